//! Reverse-mode differentiation over a small set of vector primitives.
//!
//! A [`Tape`] is bound to one parameter vector theta. Loss builders create
//! nodes eagerly (each node's value is computed on creation), finishing with
//! a single scalar node; [`value_and_grad`] then runs one reverse sweep and
//! accumulates `d loss / d theta` into a flat gradient.
//!
//! Only MLP nodes touch theta, so the sweep routes every adjoint through
//! [`crate::mlp`]'s backward kernel. All other primitives are affine maps,
//! reductions, or scalar nonlinearities with closed-form local derivatives.
//! Node creation order is the evaluation order and the reverse sweep walks
//! it backwards, so reductions happen in one fixed order and repeated runs
//! are bit-identical.
//!
//! Any primitive that produces a non-finite value poisons the tape; the
//! poisoned tape reports the offending primitive instead of a gradient.

use crate::error::{CoreError, CoreResult};
use crate::mlp::{backward_from_cache, forward_cached, ForwardCache};
use crate::params::{sigmoid, GradVector, ModelParams};
use crate::scalar::Real;

/// Handle to a tape node.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

enum Op<R: Real> {
    Const,
    /// A window of the raw parameter vector.
    ParamSlice { offset: usize },
    Mlp { cache: ForwardCache<R> },
    /// `y = scale * x + offset` (elementwise). The offset shifts the
    /// value only, so it is not stored: the local derivative is `scale`.
    Affine { x: usize, scale: R },
    Add { a: usize, b: usize },
    Sub { a: usize, b: usize },
    /// Scalar `||x - target||^2`.
    SqDist { x: usize, target: Vec<R> },
    /// Scalar `sum_i w_i * x_i` over scalar nodes.
    WeightedSum { terms: Vec<(usize, R)> },
    Softplus { x: usize },
    Exp { x: usize },
    Clamp { x: usize, lo: R, hi: R },
    Min2 { a: usize, b: usize },
}

impl<R: Real> Op<R> {
    fn name(&self) -> &'static str {
        match self {
            Op::Const => "const",
            Op::ParamSlice { .. } => "param_slice",
            Op::Mlp { .. } => "mlp",
            Op::Affine { .. } => "affine",
            Op::Add { .. } => "add",
            Op::Sub { .. } => "sub",
            Op::SqDist { .. } => "sq_dist",
            Op::WeightedSum { .. } => "weighted_sum",
            Op::Softplus { .. } => "softplus",
            Op::Exp { .. } => "exp",
            Op::Clamp { .. } => "clamp",
            Op::Min2 { .. } => "min2",
        }
    }
}

struct Node<R: Real> {
    value: Vec<R>,
    op: Op<R>,
}

pub struct Tape<'p, R: Real> {
    params: &'p ModelParams<R>,
    nodes: Vec<Node<R>>,
    poisoned: Option<String>,
}

/// Numerically stable `ln(1 + e^x)`.
#[inline]
pub fn softplus<R: Real>(x: R) -> R {
    if x > R::zero() {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

impl<'p, R: Real> Tape<'p, R> {
    pub fn new(params: &'p ModelParams<R>) -> CoreResult<Self> {
        if params.values.len() != params.arch.param_count() {
            return Err(CoreError::Shape {
                what: "Tape params",
                expected: params.arch.param_count(),
                got: params.values.len(),
            });
        }
        Ok(Tape { params, nodes: Vec::new(), poisoned: None })
    }

    pub fn params(&self) -> &ModelParams<R> {
        self.params
    }

    fn push(&mut self, value: Vec<R>, op: Op<R>) -> Var {
        if self.poisoned.is_none() && value.iter().any(|v| !v.is_finite()) {
            self.poisoned = Some(op.name().to_string());
        }
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    fn val(&self, v: Var) -> &[R] {
        &self.nodes[v.0].value
    }

    pub fn value(&self, v: Var) -> &[R] {
        self.val(v)
    }

    pub fn scalar_value(&self, v: Var) -> R {
        debug_assert_eq!(self.val(v).len(), 1, "node is not scalar");
        self.val(v)[0]
    }

    pub fn constant(&mut self, value: Vec<R>) -> Var {
        self.push(value, Op::Const)
    }

    pub fn scalar_const(&mut self, value: R) -> Var {
        self.push(vec![value], Op::Const)
    }

    /// Exposes `params[offset..offset+len]` as a differentiable leaf.
    pub fn param_slice(&mut self, offset: usize, len: usize) -> CoreResult<Var> {
        let total = self.params.values.len();
        if offset + len > total {
            return Err(CoreError::Shape { what: "param_slice", expected: total, got: offset + len });
        }
        let value = self.params.values[offset..offset + len].to_vec();
        Ok(self.push(value, Op::ParamSlice { offset }))
    }

    /// Forward pass of the bound model; the only parameter-dependent node.
    pub fn mlp(&mut self, x_t: &[R], t: R, cond: Option<usize>) -> CoreResult<Var> {
        let (out, cache) = forward_cached(self.params, x_t, t, cond)?;
        Ok(self.push(out, Op::Mlp { cache }))
    }

    /// `scale * x + offset`; pass an empty offset for pure scaling.
    pub fn affine(&mut self, x: Var, scale: R, offset: &[R]) -> Var {
        let xv = self.val(x);
        assert!(
            offset.is_empty() || offset.len() == xv.len(),
            "affine offset length {} vs operand {}",
            offset.len(),
            xv.len()
        );
        let value: Vec<R> = if offset.is_empty() {
            xv.iter().map(|&v| scale * v).collect()
        } else {
            xv.iter().zip(offset.iter()).map(|(&v, &o)| scale * v + o).collect()
        };
        self.push(value, Op::Affine { x: x.0, scale })
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        assert_eq!(self.val(a).len(), self.val(b).len(), "add operand lengths differ");
        let value: Vec<R> =
            self.val(a).iter().zip(self.val(b).iter()).map(|(&x, &y)| x + y).collect();
        self.push(value, Op::Add { a: a.0, b: b.0 })
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        assert_eq!(self.val(a).len(), self.val(b).len(), "sub operand lengths differ");
        let value: Vec<R> =
            self.val(a).iter().zip(self.val(b).iter()).map(|(&x, &y)| x - y).collect();
        self.push(value, Op::Sub { a: a.0, b: b.0 })
    }

    /// Scalar squared distance `||x - target||^2`.
    pub fn sq_dist(&mut self, x: Var, target: &[R]) -> Var {
        let xv = self.val(x);
        assert_eq!(xv.len(), target.len(), "sq_dist target length differs");
        let mut acc = R::zero();
        for (&v, &c) in xv.iter().zip(target.iter()) {
            let d = v - c;
            acc = acc + d * d;
        }
        self.push(vec![acc], Op::SqDist { x: x.0, target: target.to_vec() })
    }

    /// Scalar squared norm `||x||^2`.
    pub fn sq_norm(&mut self, x: Var) -> Var {
        let zeros = vec![R::zero(); self.val(x).len()];
        self.sq_dist(x, &zeros)
    }

    /// `sum_i w_i * x_i` over scalar nodes, accumulated in slice order.
    pub fn weighted_sum(&mut self, terms: &[(Var, R)]) -> Var {
        let mut acc = R::zero();
        for &(v, w) in terms {
            debug_assert_eq!(self.val(v).len(), 1, "weighted_sum operand is not scalar");
            acc = acc + w * self.val(v)[0];
        }
        let owned: Vec<(usize, R)> = terms.iter().map(|&(v, w)| (v.0, w)).collect();
        self.push(vec![acc], Op::WeightedSum { terms: owned })
    }

    pub fn softplus_node(&mut self, x: Var) -> Var {
        let value: Vec<R> = self.val(x).iter().map(|&v| softplus(v)).collect();
        self.push(value, Op::Softplus { x: x.0 })
    }

    pub fn exp(&mut self, x: Var) -> Var {
        let value: Vec<R> = self.val(x).iter().map(|&v| v.exp()).collect();
        self.push(value, Op::Exp { x: x.0 })
    }

    pub fn clamp(&mut self, x: Var, lo: R, hi: R) -> Var {
        assert!(lo <= hi, "clamp bounds inverted");
        let value: Vec<R> = self.val(x).iter().map(|&v| v.max(lo).min(hi)).collect();
        self.push(value, Op::Clamp { x: x.0, lo, hi })
    }

    /// Elementwise minimum; ties route the adjoint to `a`.
    pub fn min2(&mut self, a: Var, b: Var) -> Var {
        assert_eq!(self.val(a).len(), self.val(b).len(), "min2 operand lengths differ");
        let value: Vec<R> = self
            .val(a)
            .iter()
            .zip(self.val(b).iter())
            .map(|(&x, &y)| if x <= y { x } else { y })
            .collect();
        self.push(value, Op::Min2 { a: a.0, b: b.0 })
    }

    fn check_scalar_output(&self, out: Var) -> CoreResult<R> {
        if let Some(op) = &self.poisoned {
            return Err(CoreError::NonFinite { op: op.clone() });
        }
        let v = self.val(out);
        if v.len() != 1 {
            return Err(CoreError::Shape { what: "loss output", expected: 1, got: v.len() });
        }
        Ok(v[0])
    }

    /// Reverse sweep from `out`. Consumes the tape.
    fn backward(self, out: Var) -> CoreResult<(R, GradVector<R>)> {
        let loss = self.check_scalar_output(out)?;
        let n = self.nodes.len();
        let mut adjoint: Vec<Option<Vec<R>>> = (0..n).map(|_| None).collect();
        adjoint[out.0] = Some(vec![R::one()]);
        let mut grad = vec![R::zero(); self.params.arch.param_count()];

        // Helper: add `delta * scale` into node `idx`'s adjoint.
        fn bump<R: Real>(adjoint: &mut [Option<Vec<R>>], idx: usize, delta: &[R], scale: R) {
            let slot = adjoint[idx].get_or_insert_with(|| vec![R::zero(); delta.len()]);
            for (s, &d) in slot.iter_mut().zip(delta.iter()) {
                *s += scale * d;
            }
        }

        for i in (0..n).rev() {
            let a = match adjoint[i].take() {
                Some(a) => a,
                None => continue,
            };
            // Values are read before the op match to appease the borrow
            // checker where both are needed.
            match &self.nodes[i].op {
                Op::Const => {}
                Op::ParamSlice { offset } => {
                    for (j, &d) in a.iter().enumerate() {
                        grad[offset + j] += d;
                    }
                }
                Op::Mlp { cache } => {
                    backward_from_cache(self.params, cache, &a, &mut grad);
                }
                Op::Affine { x, scale } => bump(&mut adjoint, *x, &a, *scale),
                Op::Add { a: ia, b: ib } => {
                    bump(&mut adjoint, *ia, &a, R::one());
                    bump(&mut adjoint, *ib, &a, R::one());
                }
                Op::Sub { a: ia, b: ib } => {
                    bump(&mut adjoint, *ia, &a, R::one());
                    bump(&mut adjoint, *ib, &a, -R::one());
                }
                Op::SqDist { x, target } => {
                    let x = *x;
                    let two_a0 = a[0] + a[0];
                    let delta: Vec<R> = self.nodes[x]
                        .value
                        .iter()
                        .zip(target.iter())
                        .map(|(&v, &c)| two_a0 * (v - c))
                        .collect();
                    bump(&mut adjoint, x, &delta, R::one());
                }
                Op::WeightedSum { terms } => {
                    for &(idx, w) in terms {
                        bump(&mut adjoint, idx, &a, w);
                    }
                }
                Op::Softplus { x } => {
                    let x = *x;
                    let delta: Vec<R> = self.nodes[x]
                        .value
                        .iter()
                        .zip(a.iter())
                        .map(|(&v, &ad)| ad * sigmoid(v))
                        .collect();
                    bump(&mut adjoint, x, &delta, R::one());
                }
                Op::Exp { x } => {
                    let x = *x;
                    let delta: Vec<R> = self.nodes[i]
                        .value
                        .iter()
                        .zip(a.iter())
                        .map(|(&y, &ad)| ad * y)
                        .collect();
                    bump(&mut adjoint, x, &delta, R::one());
                }
                Op::Clamp { x, lo, hi } => {
                    let (x, lo, hi) = (*x, *lo, *hi);
                    let delta: Vec<R> = self.nodes[x]
                        .value
                        .iter()
                        .zip(a.iter())
                        .map(|(&v, &ad)| if v > lo && v < hi { ad } else { R::zero() })
                        .collect();
                    bump(&mut adjoint, x, &delta, R::one());
                }
                Op::Min2 { a: ia, b: ib } => {
                    let (ia, ib) = (*ia, *ib);
                    let mut da = vec![R::zero(); a.len()];
                    let mut db = vec![R::zero(); a.len()];
                    for j in 0..a.len() {
                        if self.nodes[ia].value[j] <= self.nodes[ib].value[j] {
                            da[j] = a[j];
                        } else {
                            db[j] = a[j];
                        }
                    }
                    bump(&mut adjoint, ia, &da, R::one());
                    bump(&mut adjoint, ib, &db, R::one());
                }
            }
        }
        Ok((loss, GradVector { values: grad }))
    }
}

/// Builds a loss under `build`, returns its value and the exact gradient
/// with respect to `params`.
pub fn value_and_grad<R: Real>(
    params: &ModelParams<R>,
    build: impl FnOnce(&mut Tape<'_, R>) -> CoreResult<Var>,
) -> CoreResult<(R, GradVector<R>)> {
    let mut tape = Tape::new(params)?;
    let out = build(&mut tape)?;
    tape.backward(out)
}

/// Forward-only evaluation of the same loss builders (used by the
/// finite-difference checker).
pub fn loss_value<R: Real>(
    params: &ModelParams<R>,
    build: impl FnOnce(&mut Tape<'_, R>) -> CoreResult<Var>,
) -> CoreResult<R> {
    let mut tape = Tape::new(params)?;
    let out = build(&mut tape)?;
    tape.check_scalar_output(out)
}
