//! Pairwise preference objective: the two-member special case of the
//! grouped contrast, with the preferred and dispreferred sample each
//! carrying weight one.
//!
//! ```text
//! z    = -coeff * (d_winner - d_loser),    coeff = lambda(t) * beta
//! loss = softplus(-z)
//! ```
//!
//! The node structure deliberately mirrors [`super::dgpo`]: one-term
//! weighted sums for each side, a subtraction, and the `-coeff` scaling.
//! A two-member group with distinct rewards has advantages exactly
//! normalizing to +-1 up to rounding, so the grouped objective and this
//! pairwise one coincide.

use crate::error::CoreResult;
use crate::params::{GradVector, ModelParams};
use crate::scalar::Real;
use crate::schedule::Schedule;
use crate::tape::{softplus, value_and_grad, Tape, Var};

use super::dgpo::dsm_diff_node;

/// Pairwise contrast `z` on the tape.
#[allow(clippy::too_many_arguments)]
pub fn dpo_z_node<R: Real>(
    tape: &mut Tape<'_, R>,
    ref_params: &ModelParams<R>,
    schedule: &Schedule<R>,
    winner: &[R],
    loser: &[R],
    cond: Option<usize>,
    t: R,
    eps: &[R],
    beta: R,
) -> CoreResult<Var> {
    let coeff = schedule.lambda_at(t) * beta;
    let d_w = dsm_diff_node(tape, ref_params, schedule, winner, t, eps, cond)?;
    let d_l = dsm_diff_node(tape, ref_params, schedule, loser, t, eps, cond)?;
    let s_pos = tape.weighted_sum(&[(d_w, R::one())]);
    let s_neg = tape.weighted_sum(&[(d_l, R::one())]);
    let diff = tape.sub(s_pos, s_neg);
    Ok(tape.affine(diff, -coeff, &[]))
}

/// `softplus(-z)` over the pairwise contrast.
#[allow(clippy::too_many_arguments)]
pub fn dpo_loss_node<R: Real>(
    tape: &mut Tape<'_, R>,
    ref_params: &ModelParams<R>,
    schedule: &Schedule<R>,
    winner: &[R],
    loser: &[R],
    cond: Option<usize>,
    t: R,
    eps: &[R],
    beta: R,
) -> CoreResult<Var> {
    let z = dpo_z_node(tape, ref_params, schedule, winner, loser, cond, t, eps, beta)?;
    let neg_z = tape.affine(z, -R::one(), &[]);
    Ok(tape.softplus_node(neg_z))
}

/// Loss value and exact gradient with respect to the trained model.
#[allow(clippy::too_many_arguments)]
pub fn dpo_loss<R: Real>(
    params: &ModelParams<R>,
    ref_params: &ModelParams<R>,
    schedule: &Schedule<R>,
    winner: &[R],
    loser: &[R],
    cond: Option<usize>,
    t: R,
    eps: &[R],
    beta: R,
) -> CoreResult<(R, GradVector<R>)> {
    value_and_grad(params, |tape| {
        dpo_loss_node(tape, ref_params, schedule, winner, loser, cond, t, eps, beta)
    })
}

/// Pairwise loss from precomputed improvements, mirroring the node
/// arithmetic: `softplus(coeff * (d_w - d_l))`.
pub fn pair_loss_from_diffs<R: Real>(d_w: R, d_l: R, coeff: R) -> R {
    let s_pos = R::zero() + R::one() * d_w;
    let s_neg = R::zero() + R::one() * d_l;
    let z = -coeff * (s_pos - s_neg);
    softplus(-R::one() * z)
}
