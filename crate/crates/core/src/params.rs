//! Flat model parameters and their layout.
//!
//! A model is a fully connected trunk over the concatenation
//! `[x, time_embedding(t), condition_embedding]` plus a learned condition
//! table. All parameters live in one flat vector so optimizers, EMA and
//! checkpoints treat the model as a plain array of scalars.
//!
//! Flat layout contract (row-major everywhere):
//!
//! ```text
//! for each layer l = 0..L:   W_l  (rows = dims[l+1] * cols = dims[l]), then b_l (dims[l+1])
//! then:                      condition table (cond_vocab rows * cond_emb_dim)
//! ```
//!
//! where `dims = [in_dim + time_emb_dim + cond_emb_dim, hidden..., out_dim]`
//! (the condition slot is absent when `cond_vocab == 0`). The last table row
//! is the null token used for condition dropout.

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, CoreResult};
use crate::rng::{derived_rng, standard_normal};
use crate::scalar::{real, Real};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Activation {
    Silu,
    Tanh,
}

impl Activation {
    #[inline]
    pub fn apply<R: Real>(self, x: R) -> R {
        match self {
            Activation::Silu => x * sigmoid(x),
            Activation::Tanh => x.tanh(),
        }
    }

    /// Derivative at `x`.
    #[inline]
    pub fn derivative<R: Real>(self, x: R) -> R {
        match self {
            Activation::Silu => {
                let s = sigmoid(x);
                s * (R::one() + x * (R::one() - s))
            }
            Activation::Tanh => {
                let t = x.tanh();
                R::one() - t * t
            }
        }
    }
}

/// Numerically stable logistic function.
#[inline]
pub fn sigmoid<R: Real>(x: R) -> R {
    if x >= R::zero() {
        R::one() / (R::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (R::one() + e)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MlpArch {
    /// Dimension of the data input `x`.
    pub in_dim: usize,
    /// Hidden layer widths, at least one.
    pub hidden: Vec<usize>,
    pub out_dim: usize,
    /// Sinusoidal time-embedding width (even; 0 disables the time input).
    pub time_emb_dim: usize,
    /// Rows in the condition table, including the trailing null row.
    /// 0 disables conditioning.
    pub cond_vocab: usize,
    /// Width of each condition-table row (0 iff `cond_vocab == 0`).
    pub cond_emb_dim: usize,
    pub activation: Activation,
}

impl MlpArch {
    pub fn validate(&self) -> CoreResult<()> {
        if self.in_dim == 0 || self.out_dim == 0 {
            return Err(CoreError::invalid("in_dim and out_dim must be positive"));
        }
        if self.hidden.is_empty() || self.hidden.iter().any(|&h| h == 0) {
            return Err(CoreError::invalid("hidden widths must be nonempty and positive"));
        }
        if self.time_emb_dim % 2 != 0 {
            return Err(CoreError::invalid("time_emb_dim must be even"));
        }
        if (self.cond_vocab == 0) != (self.cond_emb_dim == 0) {
            return Err(CoreError::invalid(
                "cond_vocab and cond_emb_dim must be zero together",
            ));
        }
        Ok(())
    }

    /// Width of the trunk input after embedding concatenation.
    pub fn trunk_in_dim(&self) -> usize {
        self.in_dim + self.time_emb_dim + if self.cond_vocab > 0 { self.cond_emb_dim } else { 0 }
    }

    /// Layer widths `[trunk_in, hidden..., out]`.
    pub fn dims(&self) -> Vec<usize> {
        let mut d = Vec::with_capacity(self.hidden.len() + 2);
        d.push(self.trunk_in_dim());
        d.extend_from_slice(&self.hidden);
        d.push(self.out_dim);
        d
    }

    pub fn layer_count(&self) -> usize {
        self.hidden.len() + 1
    }

    /// `(weight_offset, bias_offset, rows, cols)` for each layer, in order.
    pub fn layer_layout(&self) -> Vec<(usize, usize, usize, usize)> {
        let dims = self.dims();
        let mut off = 0;
        let mut out = Vec::with_capacity(self.layer_count());
        for l in 0..self.layer_count() {
            let (rows, cols) = (dims[l + 1], dims[l]);
            out.push((off, off + rows * cols, rows, cols));
            off += rows * cols + rows;
        }
        out
    }

    /// Offset of the condition table within the flat vector.
    pub fn cond_table_offset(&self) -> usize {
        let dims = self.dims();
        let mut off = 0;
        for l in 0..self.layer_count() {
            off += dims[l + 1] * dims[l] + dims[l + 1];
        }
        off
    }

    pub fn param_count(&self) -> usize {
        self.cond_table_offset() + self.cond_vocab * self.cond_emb_dim
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams<R: Real> {
    pub arch: MlpArch,
    pub values: Vec<R>,
}

impl<R: Real> ModelParams<R> {
    /// Seeded Gaussian init: weights `N(0, 1/fan_in)`, biases zero,
    /// condition rows `N(0, 0.5^2)`.
    pub fn init(arch: MlpArch, seed: u64) -> CoreResult<Self> {
        arch.validate()?;
        let mut rng = derived_rng(seed, &[0x1217]);
        let mut values = vec![R::zero(); arch.param_count()];
        for (w_off, b_off, rows, cols) in arch.layer_layout() {
            let scale: R = real((1.0 / cols as f64).sqrt());
            for v in &mut values[w_off..w_off + rows * cols] {
                *v = standard_normal::<R>(&mut rng) * scale;
            }
            for v in &mut values[b_off..b_off + rows] {
                *v = R::zero();
            }
        }
        let t_off = arch.cond_table_offset();
        let emb_scale: R = real(0.5);
        for v in &mut values[t_off..] {
            *v = standard_normal::<R>(&mut rng) * emb_scale;
        }
        Ok(ModelParams { arch, values })
    }

    pub fn zeros(arch: MlpArch) -> CoreResult<Self> {
        arch.validate()?;
        let n = arch.param_count();
        Ok(ModelParams { arch, values: vec![R::zero(); n] })
    }

    /// Checks length agreement and that every value is finite.
    pub fn validate(&self) -> CoreResult<()> {
        self.arch.validate()?;
        let expected = self.arch.param_count();
        if self.values.len() != expected {
            return Err(CoreError::Shape {
                what: "ModelParams::values",
                expected,
                got: self.values.len(),
            });
        }
        if self.values.iter().any(|v| !v.is_finite()) {
            return Err(CoreError::NonFinite { op: "ModelParams::values".into() });
        }
        Ok(())
    }

    /// Condition row for `cond`; `None` selects the trailing null row.
    /// Real conditions must index below the null row.
    pub fn cond_row_index(&self, cond: Option<usize>) -> CoreResult<usize> {
        let vocab = self.arch.cond_vocab;
        match cond {
            None => {
                if vocab == 0 {
                    Err(CoreError::invalid("model has no condition table"))
                } else {
                    Ok(vocab - 1)
                }
            }
            Some(k) => {
                if vocab == 0 || k + 1 >= vocab {
                    Err(CoreError::UnknownCondition { got: k, vocab })
                } else {
                    Ok(k)
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradVector<R: Real> {
    pub values: Vec<R>,
}

impl<R: Real> GradVector<R> {
    pub fn zeros(n: usize) -> Self {
        GradVector { values: vec![R::zero(); n] }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn max_abs(&self) -> R {
        self.values.iter().fold(R::zero(), |m, v| m.max(v.abs()))
    }
}

/// In-place EMA update `shadow <- mu * shadow + (1 - mu) * online`.
///
/// `mu = 0` copies the online parameters (the identity-tracking phase),
/// `mu = 1` freezes the shadow.
pub fn ema_update<R: Real>(
    shadow: &mut ModelParams<R>,
    online: &ModelParams<R>,
    mu: R,
) -> CoreResult<()> {
    if shadow.arch != online.arch {
        return Err(CoreError::invalid("EMA shadow and online model differ in architecture"));
    }
    if mu < R::zero() || mu > R::one() {
        return Err(CoreError::invalid(format!("EMA decay must lie in [0, 1], got {mu}")));
    }
    let one_minus = R::one() - mu;
    for (s, &o) in shadow.values.iter_mut().zip(online.values.iter()) {
        *s = mu * *s + one_minus * o;
    }
    Ok(())
}
