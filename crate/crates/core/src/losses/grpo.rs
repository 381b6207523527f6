//! Clipped importance-ratio policy gradient over recorded rollouts.
//!
//! A stochastic rollout records, for every transition, the state `x_k`,
//! the Gaussian mean and (isotropic) variance it was sampled from, and
//! the time `t_k`. The behavior density of the landed state comes
//! straight from those records. The trained model's density of the same
//! transition is recomputed on the tape: its x-prediction at `(x_k, t_k)`
//! maps affinely onto a new mean with the recorded variance, because the
//! transition rule
//!
//! ```text
//! mean = x - dt * v + 0.5 * var * score
//! ```
//!
//! is affine in the x-prediction once `x`, `t`, `dt`, and `var` are fixed.
//! Each transition contributes the usual clipped surrogate
//! `min(rho * A, clip(rho, 1 - e, 1 + e) * A)` with
//! `rho = exp(logp_new - logp_old)`, and the loss is the negated mean
//! over transitions. Deterministic rollouts have zero variance, no
//! density, and are rejected.

use crate::error::{CoreError, CoreResult};
use crate::params::{GradVector, ModelParams};
use crate::sampler::RolloutTrajectory;
use crate::scalar::{real, Real};
use crate::schedule::Schedule;
use crate::tape::{value_and_grad, Tape, Var};

/// Log-density of `x` under an isotropic Gaussian `N(mean, var * I)`.
pub fn gaussian_logprob<R: Real>(x: &[R], mean: &[R], var: R) -> CoreResult<R> {
    if x.len() != mean.len() {
        return Err(CoreError::Shape { what: "gaussian_logprob", expected: mean.len(), got: x.len() });
    }
    if !(var.is_finite() && var > R::zero()) {
        return Err(CoreError::invalid(format!("gaussian variance must be positive, got {var}")));
    }
    let tau: R = real(2.0 * std::f64::consts::PI);
    let log_norm = (tau * var).ln();
    let mut acc = R::zero();
    for (&xi, &mi) in x.iter().zip(mean.iter()) {
        let d = xi - mi;
        acc = acc + (d * d / var + log_norm);
    }
    Ok(-real::<R>(0.5) * acc)
}

/// The trained model's transition mean as a tape node: an affine map of
/// the x-prediction at the recorded `(x, t)`, with the recorded variance
/// supplying the score correction.
fn mean_node<R: Real>(
    tape: &mut Tape<'_, R>,
    schedule: &Schedule<R>,
    x: &[R],
    t: R,
    dt: R,
    var: R,
    cond: Option<usize>,
) -> CoreResult<Var> {
    let x_hat = tape.mlp(x, t, cond)?;
    let corr = real::<R>(0.5) * var;
    let alpha = schedule.alpha(t);
    let t2 = t * t;
    // mean_i = x_i (1 - dt/t - corr/t^2) + x_hat_i (dt/t + corr * alpha / t^2)
    let scale = dt / t + corr * alpha / t2;
    let keep = R::one() - dt / t - corr / t2;
    let offset: Vec<R> = x.iter().map(|&xi| keep * xi).collect();
    Ok(tape.affine(x_hat, scale, &offset))
}

/// Clipped surrogate loss for one trajectory under the bound model.
pub fn grpo_loss_node<R: Real>(
    tape: &mut Tape<'_, R>,
    schedule: &Schedule<R>,
    traj: &RolloutTrajectory<R>,
    cond: Option<usize>,
    advantage: R,
    clip_eps: R,
) -> CoreResult<Var> {
    if !(clip_eps > R::zero() && clip_eps < R::one()) {
        return Err(CoreError::invalid(format!("clip width must lie in (0, 1), got {clip_eps}")));
    }
    if !advantage.is_finite() {
        return Err(CoreError::NonFinite { op: "grpo advantage".into() });
    }
    if traj.steps.is_empty() {
        return Err(CoreError::invalid("trajectory has no recorded transitions"));
    }
    let half: R = real(0.5);
    let tau: R = real(2.0 * std::f64::consts::PI);
    let mut terms = Vec::with_capacity(traj.steps.len());
    let neg_inv_k: R = -R::one() / real(traj.steps.len() as f64);

    for (k, rec) in traj.steps.iter().enumerate() {
        if !(rec.var > R::zero()) {
            return Err(CoreError::ZeroVariance { step: k });
        }
        let x_next = traj.next_state(k);
        let mean = mean_node(tape, schedule, &rec.x, rec.t, traj.dt, rec.var, cond)?;
        // logp = -||x_next - mean||^2 / (2 var) - (D/2) ln(2 pi var)
        let sq = tape.sq_dist(mean, x_next);
        let dim: R = real(x_next.len() as f64);
        let log_norm = -half * dim * (tau * rec.var).ln();
        let logp = tape.affine(sq, -half / rec.var, &[log_norm]);

        let logp_old = gaussian_logprob(x_next, &rec.mean, rec.var)?;
        let delta = tape.affine(logp, R::one(), &[-logp_old]);
        let rho = tape.exp(delta);

        let unclipped = tape.affine(rho, advantage, &[]);
        let rho_clipped = tape.clamp(rho, R::one() - clip_eps, R::one() + clip_eps);
        let clipped = tape.affine(rho_clipped, advantage, &[]);
        let surrogate = tape.min2(unclipped, clipped);
        terms.push((surrogate, neg_inv_k));
    }
    Ok(tape.weighted_sum(&terms))
}

/// Loss value and exact gradient with respect to the trained model.
pub fn grpo_loss<R: Real>(
    params: &ModelParams<R>,
    schedule: &Schedule<R>,
    traj: &RolloutTrajectory<R>,
    cond: Option<usize>,
    advantage: R,
    clip_eps: R,
) -> CoreResult<(R, GradVector<R>)> {
    value_and_grad(params, |tape| {
        grpo_loss_node(tape, schedule, traj, cond, advantage, clip_eps)
    })
}
