//! Fixed-protocol model evaluation: generate a deterministic sample set
//! with short ODE rollouts, score it with the configured reward, and
//! measure the sliced Wasserstein-2 distance to the held-out data.
//!
//! All evaluation randomness (rollout noise and projection directions)
//! comes from the evaluation seeds alone, never from the training seed, so
//! any two runs assign identical numbers to identical parameters.

use dgpo_core::rng::derive_seed;
use dgpo_core::sampler::ode_sample;
use dgpo_core::{ModelParams64, RewardFn64, Schedule64};

use crate::config::EvalConfig;
use crate::swd::sliced_w2;
use crate::task::ModeTask;
use crate::{LabError, LabResult};

/// Rollout length of the evaluation protocol, fixed by contract.
pub const EVAL_ODE_STEPS: usize = 10;

/// Stream tag separating evaluation rollout seeds from everything else.
const TAG_EVAL: u64 = 0xE7A1;

#[derive(Debug, Clone)]
pub struct EvalOutcome {
    pub mean_reward: f64,
    pub sliced_w2: f64,
    pub samples: Vec<Vec<f64>>,
    pub conds: Vec<Option<usize>>,
}

/// Evaluates `params` under the fixed protocol. Conditions cycle through
/// the task modes when the reward is conditional and stay null otherwise.
pub fn eval_model(
    params: &ModelParams64,
    schedule: &Schedule64,
    reward: &RewardFn64,
    task: &ModeTask,
    holdout: &[Vec<f64>],
    cfg: &EvalConfig,
) -> LabResult<EvalOutcome> {
    let n = cfg.samples;
    let mut samples = Vec::with_capacity(n);
    let mut conds = Vec::with_capacity(n);
    let mut reward_sum = 0.0;
    for i in 0..n {
        let cond = reward.needs_condition().then(|| i % task.modes());
        let scfg = dgpo_core::SamplerConfig64::ode(
            EVAL_ODE_STEPS,
            derive_seed(cfg.seed, &[TAG_EVAL, i as u64]),
        );
        let x = ode_sample(params, schedule, &scfg, cond)?;
        if x.iter().any(|v| !v.is_finite()) {
            return Err(LabError::runtime("non-finite sample during evaluation"));
        }
        reward_sum += reward.evaluate(cond, &x)?;
        samples.push(x);
        conds.push(cond);
    }
    let w2 = sliced_w2(&samples, holdout, cfg.swd_projections, cfg.swd_seed)?;
    Ok(EvalOutcome { mean_reward: reward_sum / n as f64, sliced_w2: w2, samples, conds })
}
