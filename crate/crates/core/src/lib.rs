//! Numeric core for a desk-scale study of group-preference post-training
//! of 2-D flow-matching generators.
//!
//! The crate provides, bottom-up:
//!
//! * a tiny MLP over one flat parameter vector with exact reverse-mode
//!   gradients ([`tape`]), Adam/SGD and EMA ([`optim`], [`params`]), a
//!   central-difference gradient checker ([`check`]) and bit-exact
//!   checkpoints ([`checkpoint`]);
//! * the rectified-flow schedule, denoising objective, and ODE /
//!   Euler-Maruyama SDE samplers ([`schedule`], [`sampler`]);
//! * point rewards, a string-edit fidelity reward, and a learned
//!   Bradley-Terry reward ([`rewards`]);
//! * group advantage machinery and the preference losses: group-preference
//!   (DGPO), pairwise preference (DPO), and a clipped policy-gradient
//!   surrogate (GRPO) ([`losses`]).
//!
//! All numerics are generic over [`scalar::Real`] (`f32` or `f64`);
//! concrete `f64` aliases for the common types live at the crate root, and
//! the training harness uses those.

pub mod check;
pub mod checkpoint;
pub mod error;
pub mod losses;
pub mod mlp;
pub mod optim;
pub mod params;
pub mod rewards;
pub mod rng;
pub mod sampler;
pub mod schedule;
pub mod scalar;
pub mod tape;

pub use error::{CoreError, CoreResult};
pub use mlp::{mlp_forward, Denoiser};
pub use params::{ema_update, Activation, GradVector, MlpArch, ModelParams};
pub use scalar::{real, Real};

/// Concrete `f64` aliases used by the training harness.
pub type ModelParams64 = params::ModelParams<f64>;
pub type GradVector64 = params::GradVector<f64>;
pub type OptimizerState64 = optim::OptimizerState<f64>;
pub type Schedule64 = schedule::Schedule<f64>;
pub type SamplerConfig64 = sampler::SamplerConfig<f64>;
pub type RolloutTrajectory64 = sampler::RolloutTrajectory<f64>;
pub type Group64 = losses::Group<f64>;
pub type RewardFn64 = rewards::RewardFn<f64>;

/// Single-precision aliases, for callers that trade tolerance for size.
pub type ModelParams32 = params::ModelParams<f32>;
pub type GradVector32 = params::GradVector<f32>;
