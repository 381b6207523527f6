//! Rectified-flow noise schedule and the denoising objective.
//!
//! The forward path is linear interpolation, `x_t = (1 - t) x + t eps`,
//! so `alpha_t = 1 - t`, `sigma_t = t`, and the target velocity is
//! `eps - x`. The model predicts clean data `x_hat`; velocity and score
//! are recovered from that prediction:
//!
//! ```text
//! v_hat = (x_t - x_hat) / t
//! s_hat = ((1 - t) x_hat - x_t) / t^2
//! ```
//!
//! Divisions by `t` are guarded by `t_floor`; callers never evaluate below
//! it.

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, CoreResult};
use crate::params::ModelParams;
use crate::scalar::{real, Real};
use crate::tape::{Tape, Var};

/// Per-timestep loss weight, selectable from config.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LambdaKind {
    /// Constant weight 1 (the default).
    One,
    /// Signal-to-noise weight `((1 - t) / max(t, t_floor))^2`. Heavily
    /// emphasizes small noise levels; provided for ablation, not default.
    Snr,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Schedule<R: Real> {
    /// Smallest time at which `1/t` terms are evaluated.
    pub t_floor: R,
    pub lambda: LambdaKind,
}

impl<R: Real> Default for Schedule<R> {
    fn default() -> Self {
        Schedule { t_floor: real(1e-3), lambda: LambdaKind::One }
    }
}

impl<R: Real> Schedule<R> {
    pub fn validate(&self) -> CoreResult<()> {
        if !(self.t_floor > R::zero() && self.t_floor < R::one()) {
            return Err(CoreError::invalid(format!(
                "t_floor must lie in (0, 1), got {}",
                self.t_floor
            )));
        }
        Ok(())
    }

    #[inline]
    pub fn alpha(&self, t: R) -> R {
        R::one() - t
    }

    #[inline]
    pub fn sigma(&self, t: R) -> R {
        t
    }

    pub fn lambda_at(&self, t: R) -> R {
        match self.lambda {
            LambdaKind::One => R::one(),
            LambdaKind::Snr => {
                let td = t.max(self.t_floor);
                let r = (R::one() - t) / td;
                r * r
            }
        }
    }

    /// `x_t = (1 - t) x + t eps`. Accepts any `t` in `[0, 1]`.
    pub fn forward_diffuse(&self, x: &[R], t: R, eps: &[R]) -> CoreResult<Vec<R>> {
        if x.len() != eps.len() {
            return Err(CoreError::Shape { what: "forward_diffuse eps", expected: x.len(), got: eps.len() });
        }
        if !(t >= R::zero() && t <= R::one()) {
            return Err(CoreError::invalid(format!("diffusion time must lie in [0, 1], got {t}")));
        }
        let a = self.alpha(t);
        Ok(x.iter().zip(eps.iter()).map(|(&xi, &ei)| a * xi + t * ei).collect())
    }

    fn check_t_floor(&self, t: R) -> CoreResult<()> {
        if t < self.t_floor {
            return Err(CoreError::invalid(format!(
                "time {t} below t_floor {}; 1/t terms are not evaluated there",
                self.t_floor
            )));
        }
        Ok(())
    }

    /// Velocity implied by an x-prediction: `(x_t - x_hat) / t`.
    pub fn x_to_velocity(&self, x_hat: &[R], x_t: &[R], t: R) -> CoreResult<Vec<R>> {
        if x_hat.len() != x_t.len() {
            return Err(CoreError::Shape { what: "x_to_velocity", expected: x_t.len(), got: x_hat.len() });
        }
        self.check_t_floor(t)?;
        Ok(x_t.iter().zip(x_hat.iter()).map(|(&xt, &xh)| (xt - xh) / t).collect())
    }

    /// Score implied by an x-prediction: `((1 - t) x_hat - x_t) / t^2`.
    pub fn score_from_xpred(&self, x_hat: &[R], x_t: &[R], t: R) -> CoreResult<Vec<R>> {
        if x_hat.len() != x_t.len() {
            return Err(CoreError::Shape { what: "score_from_xpred", expected: x_t.len(), got: x_hat.len() });
        }
        self.check_t_floor(t)?;
        let a = self.alpha(t);
        let t2 = t * t;
        Ok(x_t.iter().zip(x_hat.iter()).map(|(&xt, &xh)| (a * xh - xt) / t2).collect())
    }
}

fn check_loss_time<R: Real>(t: R) -> CoreResult<()> {
    if !(t > R::zero() && t <= R::one()) {
        return Err(CoreError::invalid(format!("denoising time must lie in (0, 1], got {t}")));
    }
    Ok(())
}

/// Unweighted denoising objective `||f_theta(x_t, t, cond) - x||^2`,
/// built on `tape` so gradients flow to theta. Timestep weights are
/// applied by callers.
pub fn denoising_loss_node<R: Real>(
    tape: &mut Tape<'_, R>,
    schedule: &Schedule<R>,
    x: &[R],
    t: R,
    eps: &[R],
    cond: Option<usize>,
) -> CoreResult<Var> {
    check_loss_time(t)?;
    let x_t = schedule.forward_diffuse(x, t, eps)?;
    let y = tape.mlp(&x_t, t, cond)?;
    Ok(tape.sq_dist(y, x))
}

/// Forward-only value of [`denoising_loss_node`].
pub fn denoising_loss<R: Real>(
    params: &ModelParams<R>,
    schedule: &Schedule<R>,
    x: &[R],
    t: R,
    eps: &[R],
    cond: Option<usize>,
) -> CoreResult<R> {
    check_loss_time(t)?;
    let x_t = schedule.forward_diffuse(x, t, eps)?;
    let y = crate::mlp::mlp_forward(params, &x_t, t, cond)?;
    if y.len() != x.len() {
        return Err(CoreError::Shape { what: "denoiser output", expected: x.len(), got: y.len() });
    }
    let mut acc = R::zero();
    for (yi, xi) in y.iter().zip(x.iter()) {
        let d = *yi - *xi;
        acc = acc + d * d;
    }
    Ok(acc)
}
