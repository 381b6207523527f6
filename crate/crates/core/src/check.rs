//! Central-difference gradient checking.
//!
//! This is the independent oracle for the reverse-mode sweep: the loss is
//! re-evaluated forward-only at `theta_i +/- step` for every coordinate and
//! the symmetric quotient is compared against the analytic gradient.
//! Nothing here shares code with the backward pass.

use crate::error::CoreResult;
use crate::params::ModelParams;
use crate::scalar::{real, Real};
use crate::tape::{loss_value, value_and_grad, Tape, Var};

#[derive(Debug, Clone)]
pub struct FdReport<R: Real> {
    pub loss: R,
    /// Largest relative disagreement over all coordinates.
    pub max_rel_err: R,
    pub worst_index: usize,
    pub analytic_at_worst: R,
    pub numeric_at_worst: R,
    pub pass: bool,
}

/// Relative error with an absolute floor so near-zero coordinates compare
/// on an absolute scale instead of dividing by noise.
fn rel_err<R: Real>(a: R, b: R) -> R {
    let floor: R = real(1e-6);
    (a - b).abs() / a.abs().max(b.abs()).max(floor)
}

/// Compares the analytic gradient of `build` against central differences
/// with the given step, coordinate by coordinate.
///
/// The builder must be pure: it is re-invoked `2 * param_count + 1` times
/// against perturbed parameter vectors. A non-finite loss at any probe
/// point aborts the check.
pub fn finite_diff_check<R: Real>(
    params: &ModelParams<R>,
    build: impl Fn(&mut Tape<'_, R>) -> CoreResult<Var>,
    step: R,
    tol: R,
) -> CoreResult<FdReport<R>> {
    let (loss, grad) = value_and_grad(params, &build)?;
    let mut probe = params.clone();
    let mut worst = FdReport {
        loss,
        max_rel_err: R::zero(),
        worst_index: 0,
        analytic_at_worst: R::zero(),
        numeric_at_worst: R::zero(),
        pass: true,
    };
    let two_step = step + step;
    for i in 0..params.values.len() {
        let orig = params.values[i];
        probe.values[i] = orig + step;
        let up = loss_value(&probe, &build)?;
        probe.values[i] = orig - step;
        let down = loss_value(&probe, &build)?;
        probe.values[i] = orig;

        let numeric = (up - down) / two_step;
        let analytic = grad.values[i];
        let e = rel_err(analytic, numeric);
        if e > worst.max_rel_err {
            worst.max_rel_err = e;
            worst.worst_index = i;
            worst.analytic_at_worst = analytic;
            worst.numeric_at_worst = numeric;
        }
    }
    worst.pass = worst.max_rel_err <= tol;
    Ok(worst)
}
