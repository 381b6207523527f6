//! Group preference objective for denoising models.
//!
//! Every member of a [`Group`] shares one `(t, eps)` draw. Each sample's
//! denoising loss under the trained model is compared against the frozen
//! reference model, giving a per-member improvement `d_i`; the group is
//! then scored by one logistic contrast between the advantage-weighted
//! improvement of the preferred side and that of the dispreferred side:
//!
//! ```text
//! z    = -coeff * (sum_{A_i > 0} w_i d_i  -  sum_{A_i <= 0} w_i d_i)
//! loss = softplus(-z),            coeff = lambda(t) * beta, w_i = |A_i|
//! ```
//!
//! Because advantages are centered, the grouped contrast equals the
//! compact signed sum `-coeff * sum_i A_i d_i`; both forms are exposed so
//! the equality can be checked across different summation orders. Adding
//! any constant to every `d_i` cancels for the same reason, which makes
//! the contrast invariant to the shared partition-function shift between
//! the two models.
//!
//! Gradients flow only through the trained model; the reference enters
//! as plain numbers.

use crate::error::{CoreError, CoreResult};
use crate::params::{GradVector, ModelParams};
use crate::scalar::Real;
use crate::schedule::{denoising_loss, denoising_loss_node, Schedule};
use crate::tape::{value_and_grad, Tape, Var};

use super::group::Group;

fn check_beta<R: Real>(beta: R) -> CoreResult<()> {
    // beta = 0 is a legal (if pointless) setting: the contrast collapses to
    // zero, the loss to softplus(0), and the gradient vanishes.
    if !(beta.is_finite() && beta >= R::zero()) {
        return Err(CoreError::invalid(format!("beta must be nonnegative and finite, got {beta}")));
    }
    Ok(())
}

/// Per-sample improvement `d = L_dsm(theta) - L_dsm(theta_ref)` as a tape
/// node; only the first term is differentiated.
pub fn dsm_diff_node<R: Real>(
    tape: &mut Tape<'_, R>,
    ref_params: &ModelParams<R>,
    schedule: &Schedule<R>,
    x: &[R],
    t: R,
    eps: &[R],
    cond: Option<usize>,
) -> CoreResult<Var> {
    let l_theta = denoising_loss_node(tape, schedule, x, t, eps, cond)?;
    let l_ref = denoising_loss(ref_params, schedule, x, t, eps, cond)?;
    Ok(tape.affine(l_theta, R::one(), &[-l_ref]))
}

/// Forward-only improvements for every group member, in member order.
/// Matches the node values of [`dsm_diff_node`] bit for bit.
pub fn dsm_diff_values<R: Real>(
    params: &ModelParams<R>,
    ref_params: &ModelParams<R>,
    schedule: &Schedule<R>,
    group: &Group<R>,
    t: R,
    eps: &[R],
) -> CoreResult<Vec<R>> {
    group
        .members
        .iter()
        .map(|m| {
            let l_theta = denoising_loss(params, schedule, &m.x, t, eps, group.cond)?;
            let l_ref = denoising_loss(ref_params, schedule, &m.x, t, eps, group.cond)?;
            // Written as multiply-then-add so it rounds exactly like the
            // affine node in [`dsm_diff_node`].
            Ok(R::one() * l_theta + -l_ref)
        })
        .collect()
}

/// Grouped-form contrast `z` on the tape: two weighted partial sums in
/// member order, subtracted, then scaled by `-coeff`.
pub fn dgpo_z_node<R: Real>(
    tape: &mut Tape<'_, R>,
    ref_params: &ModelParams<R>,
    schedule: &Schedule<R>,
    group: &Group<R>,
    t: R,
    eps: &[R],
    beta: R,
) -> CoreResult<Var> {
    check_beta(beta)?;
    if group.degenerate {
        return Err(CoreError::DegenerateGroup { group_size: group.size() });
    }
    let coeff = schedule.lambda_at(t) * beta;
    let mut pos = Vec::new();
    let mut neg = Vec::new();
    for m in &group.members {
        let d = dsm_diff_node(tape, ref_params, schedule, &m.x, t, eps, group.cond)?;
        if m.is_positive() {
            pos.push((d, m.weight()));
        } else {
            neg.push((d, m.weight()));
        }
    }
    let s_pos = tape.weighted_sum(&pos);
    let s_neg = tape.weighted_sum(&neg);
    let diff = tape.sub(s_pos, s_neg);
    Ok(tape.affine(diff, -coeff, &[]))
}

/// `softplus(-z)` over the grouped contrast.
pub fn dgpo_loss_node<R: Real>(
    tape: &mut Tape<'_, R>,
    ref_params: &ModelParams<R>,
    schedule: &Schedule<R>,
    group: &Group<R>,
    t: R,
    eps: &[R],
    beta: R,
) -> CoreResult<Var> {
    let z = dgpo_z_node(tape, ref_params, schedule, group, t, eps, beta)?;
    let neg_z = tape.affine(z, -R::one(), &[]);
    Ok(tape.softplus_node(neg_z))
}

/// Loss value and exact gradient with respect to the trained model.
pub fn dgpo_loss<R: Real>(
    params: &ModelParams<R>,
    ref_params: &ModelParams<R>,
    schedule: &Schedule<R>,
    group: &Group<R>,
    t: R,
    eps: &[R],
    beta: R,
) -> CoreResult<(R, GradVector<R>)> {
    value_and_grad(params, |tape| {
        dgpo_loss_node(tape, ref_params, schedule, group, t, eps, beta)
    })
}

/// Contrast from precomputed improvements, grouped form: the same two
/// partial sums in member order as [`dgpo_z_node`] builds.
pub fn z_grouped_from_diffs<R: Real>(group: &Group<R>, diffs: &[R], coeff: R) -> R {
    assert_eq!(diffs.len(), group.size(), "one improvement per member");
    let mut s_pos = R::zero();
    let mut s_neg = R::zero();
    for (m, &d) in group.members.iter().zip(diffs.iter()) {
        if m.is_positive() {
            s_pos = s_pos + m.weight() * d;
        } else {
            s_neg = s_neg + m.weight() * d;
        }
    }
    -coeff * (s_pos - s_neg)
}

/// Contrast from precomputed improvements, compact form: one signed
/// accumulation `-coeff * sum_i A_i d_i` in member order. Algebraically
/// identical to the grouped form, summed in a different order.
pub fn z_compact_from_diffs<R: Real>(group: &Group<R>, diffs: &[R], coeff: R) -> R {
    assert_eq!(diffs.len(), group.size(), "one improvement per member");
    let mut acc = R::zero();
    for (m, &d) in group.members.iter().zip(diffs.iter()) {
        acc = acc + m.advantage * d;
    }
    -coeff * acc
}
