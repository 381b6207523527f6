//! Flat-vector optimizers: plain SGD and Adam.

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, CoreResult};
use crate::params::{GradVector, ModelParams};
use crate::scalar::{real, Real};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "mode")]
pub enum OptMode {
    Sgd,
    Adam { beta1: f64, beta2: f64, eps: f64 },
}

impl OptMode {
    /// Adam with the conventional (0.9, 0.999, 1e-8) moments.
    pub fn adam_default() -> Self {
        OptMode::Adam { beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

#[derive(Debug, Clone)]
pub struct OptimizerState<R: Real> {
    pub mode: OptMode,
    pub lr: R,
    /// First-moment accumulator (Adam only; empty under SGD).
    pub m: Vec<R>,
    /// Second-moment accumulator (Adam only; empty under SGD).
    pub v: Vec<R>,
    pub step: u64,
}

impl<R: Real> OptimizerState<R> {
    pub fn new(mode: OptMode, lr: R, param_count: usize) -> CoreResult<Self> {
        if !(lr > R::zero()) {
            return Err(CoreError::invalid(format!("learning rate must be positive, got {lr}")));
        }
        let (m, v) = match mode {
            OptMode::Sgd => (Vec::new(), Vec::new()),
            OptMode::Adam { beta1, beta2, eps } => {
                if !(0.0..1.0).contains(&beta1) || !(0.0..1.0).contains(&beta2) || eps <= 0.0 {
                    return Err(CoreError::invalid("Adam moments must satisfy 0 <= beta < 1, eps > 0"));
                }
                (vec![R::zero(); param_count], vec![R::zero(); param_count])
            }
        };
        Ok(OptimizerState { mode, lr, m, v, step: 0 })
    }

    pub fn sgd(lr: R, param_count: usize) -> CoreResult<Self> {
        Self::new(OptMode::Sgd, lr, param_count)
    }

    pub fn adam(lr: R, param_count: usize) -> CoreResult<Self> {
        Self::new(OptMode::adam_default(), lr, param_count)
    }
}

/// One optimizer step in place. Rejects non-finite gradients and length
/// mismatches; the step counter advances only on success.
pub fn optimizer_step<R: Real>(
    state: &mut OptimizerState<R>,
    params: &mut ModelParams<R>,
    grad: &GradVector<R>,
) -> CoreResult<()> {
    let n = params.values.len();
    if grad.len() != n {
        return Err(CoreError::Shape { what: "gradient", expected: n, got: grad.len() });
    }
    if grad.values.iter().any(|g| !g.is_finite()) {
        return Err(CoreError::NonFinite { op: "optimizer gradient".into() });
    }
    state.step += 1;
    match state.mode {
        OptMode::Sgd => {
            for (p, &g) in params.values.iter_mut().zip(grad.values.iter()) {
                *p = *p - state.lr * g;
            }
        }
        OptMode::Adam { beta1, beta2, eps } => {
            let b1: R = real(beta1);
            let b2: R = real(beta2);
            let e: R = real(eps);
            let one = R::one();
            // Bias corrections at the post-increment step count.
            let c1 = one - real::<R>(beta1.powi(state.step as i32));
            let c2 = one - real::<R>(beta2.powi(state.step as i32));
            for i in 0..n {
                let g = grad.values[i];
                state.m[i] = b1 * state.m[i] + (one - b1) * g;
                state.v[i] = b2 * state.v[i] + (one - b2) * g * g;
                let m_hat = state.m[i] / c1;
                let v_hat = state.v[i] / c2;
                params.values[i] = params.values[i] - state.lr * m_hat / (v_hat.sqrt() + e);
            }
        }
    }
    Ok(())
}
