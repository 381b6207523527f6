//! Forward and backward kernels for the flat-parameter MLP.
//!
//! The trunk consumes `[x, time_embedding(t), condition_row]`, applies the
//! hidden layers with the configured activation, and a final linear layer.
//! The time embedding is fixed (not learned): for half-width `H`,
//! `emb[2j] = sin(pi * 2^j * t)`, `emb[2j+1] = cos(pi * 2^j * t)`,
//! `j = 0..H`, which spans oscillation periods from 2 down to `2^(1-H)`
//! over the unit time interval.
//!
//! Evaluation is pure: fixed reduction order, no hidden state, so equal
//! inputs give bit-identical outputs.

use crate::error::{CoreError, CoreResult};
use crate::params::ModelParams;
use crate::scalar::Real;

/// Anything that predicts clean data from a noisy state. Samplers and
/// losses are written against this trait so tests can substitute exact
/// oracle denoisers for a trained model.
pub trait Denoiser<R: Real> {
    fn data_dim(&self) -> usize;
    fn predict(&self, x_t: &[R], t: R, cond: Option<usize>) -> CoreResult<Vec<R>>;
}

impl<R: Real> Denoiser<R> for ModelParams<R> {
    fn data_dim(&self) -> usize {
        self.arch.in_dim
    }

    fn predict(&self, x_t: &[R], t: R, cond: Option<usize>) -> CoreResult<Vec<R>> {
        mlp_forward(self, x_t, t, cond)
    }
}

/// Sinusoidal time features, appended to `out`.
pub fn time_embedding<R: Real>(t: R, dim: usize, out: &mut Vec<R>) {
    debug_assert!(dim % 2 == 0);
    let mut omega = R::PI();
    for _ in 0..dim / 2 {
        let phase = omega * t;
        out.push(phase.sin());
        out.push(phase.cos());
        omega = omega + omega;
    }
}

/// Builds the trunk input `[x, time_emb, cond_row]`.
pub(crate) fn trunk_input<R: Real>(
    params: &ModelParams<R>,
    x_t: &[R],
    t: R,
    cond: Option<usize>,
) -> CoreResult<Vec<R>> {
    let arch = &params.arch;
    if x_t.len() != arch.in_dim {
        return Err(CoreError::Shape { what: "mlp input", expected: arch.in_dim, got: x_t.len() });
    }
    if !t.is_finite() {
        return Err(CoreError::NonFinite { op: "mlp time input".into() });
    }
    let mut input = Vec::with_capacity(arch.trunk_in_dim());
    input.extend_from_slice(x_t);
    time_embedding(t, arch.time_emb_dim, &mut input);
    if arch.cond_vocab > 0 {
        let row = params.cond_row_index(cond)?;
        let off = arch.cond_table_offset() + row * arch.cond_emb_dim;
        input.extend_from_slice(&params.values[off..off + arch.cond_emb_dim]);
    } else if cond.is_some() {
        return Err(CoreError::invalid("condition given to an unconditional model"));
    }
    Ok(input)
}

#[inline]
pub(crate) fn matvec_bias<R: Real>(w: &[R], b: &[R], x: &[R], rows: usize, cols: usize, y: &mut Vec<R>) {
    y.clear();
    for r in 0..rows {
        let row = &w[r * cols..(r + 1) * cols];
        let mut acc = b[r];
        for c in 0..cols {
            acc = acc + row[c] * x[c];
        }
        y.push(acc);
    }
}

/// `gx[c] += sum_r w[r,c] * delta[r]` and `gw[r,c] += delta[r] * x[c]`,
/// `gb[r] += delta[r]`; the transpose pass of [`matvec_bias`].
#[inline]
pub(crate) fn matvec_backward<R: Real>(
    w: &[R],
    x: &[R],
    delta: &[R],
    rows: usize,
    cols: usize,
    gw: &mut [R],
    gb: &mut [R],
    gx: &mut [R],
) {
    for r in 0..rows {
        let d = delta[r];
        let row = &w[r * cols..(r + 1) * cols];
        let grow = &mut gw[r * cols..(r + 1) * cols];
        for c in 0..cols {
            grow[c] += d * x[c];
            gx[c] += row[c] * d;
        }
        gb[r] += d;
    }
}

/// Intermediate activations kept for the backward pass.
#[derive(Debug, Clone)]
pub(crate) struct ForwardCache<R: Real> {
    pub input: Vec<R>,
    /// Pre-activation of each hidden layer.
    pub pre: Vec<Vec<R>>,
    /// Post-activation of each hidden layer (inputs to the next layer).
    pub post: Vec<Vec<R>>,
    pub cond_row: Option<usize>,
}

pub(crate) fn forward_cached<R: Real>(
    params: &ModelParams<R>,
    x_t: &[R],
    t: R,
    cond: Option<usize>,
) -> CoreResult<(Vec<R>, ForwardCache<R>)> {
    let arch = &params.arch;
    let input = trunk_input(params, x_t, t, cond)?;
    let cond_row = if arch.cond_vocab > 0 { Some(params.cond_row_index(cond)?) } else { None };
    let layout = arch.layer_layout();
    let n_hidden = arch.hidden.len();

    let mut pre = Vec::with_capacity(n_hidden);
    let mut post = Vec::with_capacity(n_hidden);
    let mut h = input.clone();
    for (l, &(w_off, b_off, rows, cols)) in layout.iter().enumerate() {
        let w = &params.values[w_off..w_off + rows * cols];
        let b = &params.values[b_off..b_off + rows];
        let mut y = Vec::with_capacity(rows);
        matvec_bias(w, b, &h, rows, cols, &mut y);
        if l < n_hidden {
            let act: Vec<R> = y.iter().map(|&v| arch.activation.apply(v)).collect();
            pre.push(y);
            post.push(act.clone());
            h = act;
        } else {
            h = y;
        }
    }
    Ok((h, ForwardCache { input, pre, post, cond_row }))
}

/// Accumulates `d loss / d params` into `grad` given the adjoint of the
/// network output. `grad` must be a flat buffer of `param_count` scalars.
pub(crate) fn backward_from_cache<R: Real>(
    params: &ModelParams<R>,
    cache: &ForwardCache<R>,
    out_adjoint: &[R],
    grad: &mut [R],
) {
    let arch = &params.arch;
    let layout = arch.layer_layout();
    debug_assert_eq!(grad.len(), arch.param_count());

    let mut delta: Vec<R> = out_adjoint.to_vec();
    for l in (0..layout.len()).rev() {
        let (w_off, b_off, rows, cols) = layout[l];
        let w = &params.values[w_off..w_off + rows * cols];
        let x = if l == 0 { &cache.input } else { &cache.post[l - 1] };
        let mut gx = vec![R::zero(); cols];
        {
            // grad is one flat buffer; split the layer's W and b views.
            let (head, tail) = grad.split_at_mut(b_off);
            let gw = &mut head[w_off..w_off + rows * cols];
            let gb = &mut tail[..rows];
            matvec_backward(w, x, &delta, rows, cols, gw, gb, &mut gx);
        }
        if l == 0 {
            // The x and time segments are constants; only the condition
            // row receives gradient.
            if let Some(row) = cache.cond_row {
                let seg = arch.in_dim + arch.time_emb_dim;
                let off = arch.cond_table_offset() + row * arch.cond_emb_dim;
                for j in 0..arch.cond_emb_dim {
                    grad[off + j] += gx[seg + j];
                }
            }
        } else {
            let pre = &cache.pre[l - 1];
            for c in 0..cols {
                gx[c] *= arch.activation.derivative(pre[c]);
            }
            delta = gx;
        }
    }
}

/// Plain forward pass, no cache. Pure and deterministic.
pub fn mlp_forward<R: Real>(
    params: &ModelParams<R>,
    x_t: &[R],
    t: R,
    cond: Option<usize>,
) -> CoreResult<Vec<R>> {
    let (out, _) = forward_cached(params, x_t, t, cond)?;
    Ok(out)
}
