//! Reward functions over generated points, plus a learned pairwise reward.
//!
//! The analytic rewards are bounded in [0, 1]: a Gaussian bump around the
//! conditioned mixture mode, and an unconditional ring. Text fidelity
//! scores a rendered string against a target by normalized edit distance.
//! The learned reward is a small net trained on preference pairs with the
//! Bradley-Terry objective `-log sigmoid(r_w - r_l)`.

use rand::seq::SliceRandom;

use crate::error::{CoreError, CoreResult};
use crate::mlp::mlp_forward;
use crate::optim::{optimizer_step, OptimizerState};
use crate::params::{Activation, MlpArch, ModelParams};
use crate::rng::derived_rng;
use crate::scalar::{real, Real};
use crate::tape::{value_and_grad, Tape, Var};

/// `k` points equally spaced on the unit circle, mode 0 at (1, 0),
/// counterclockwise.
pub fn circle_modes<R: Real>(k: usize) -> Vec<[R; 2]> {
    assert!(k > 0, "mode count must be positive");
    (0..k)
        .map(|i| {
            let angle = 2.0 * std::f64::consts::PI * i as f64 / k as f64;
            [real(angle.cos()), real(angle.sin())]
        })
        .collect()
}

#[derive(Debug, Clone)]
pub enum RewardFn<R: Real> {
    /// `exp(-||x - mu_cond||^2 / (2 tau^2))` around the conditioned mode.
    ModeTarget { centers: Vec<[R; 2]>, tau: R },
    /// `exp(-(||x|| - radius)^2 / (2 width^2))`, condition-free.
    Ring { radius: R, width: R },
    /// Normalized edit-distance fidelity against a fixed target string.
    /// Only meaningful through [`RewardFn::evaluate_text`].
    TextFidelity { target: String },
    /// Learned Bradley-Terry reward net (unbounded score).
    LearnedBt { params: ModelParams<R> },
}

impl<R: Real> RewardFn<R> {
    /// Mode-target reward over `k` unit-circle modes with the default
    /// sharpness `tau = 0.1`.
    pub fn mode_target(k: usize) -> Self {
        RewardFn::ModeTarget { centers: circle_modes(k), tau: real(0.1) }
    }

    /// Unit ring with the default width 0.05.
    pub fn ring() -> Self {
        RewardFn::Ring { radius: R::one(), width: real(0.05) }
    }

    /// Whether [`RewardFn::evaluate`] requires a condition index.
    pub fn needs_condition(&self) -> bool {
        matches!(self, RewardFn::ModeTarget { .. })
    }

    pub fn evaluate(&self, cond: Option<usize>, x: &[R]) -> CoreResult<R> {
        match self {
            RewardFn::ModeTarget { centers, tau } => {
                let k = cond.ok_or_else(|| {
                    CoreError::invalid("mode-target reward requires a condition index")
                })?;
                if k >= centers.len() {
                    return Err(CoreError::UnknownCondition { got: k, vocab: centers.len() });
                }
                if x.len() != 2 {
                    return Err(CoreError::Shape { what: "mode-target point", expected: 2, got: x.len() });
                }
                let dx = x[0] - centers[k][0];
                let dy = x[1] - centers[k][1];
                let two = real::<R>(2.0);
                Ok((-(dx * dx + dy * dy) / (two * *tau * *tau)).exp())
            }
            RewardFn::Ring { radius, width } => {
                let norm = x.iter().fold(R::zero(), |acc, &v| acc + v * v).sqrt();
                let d = norm - *radius;
                let two = real::<R>(2.0);
                Ok((-(d * d) / (two * *width * *width)).exp())
            }
            RewardFn::TextFidelity { .. } => Err(CoreError::invalid(
                "text-fidelity scores strings, not points; use evaluate_text",
            )),
            RewardFn::LearnedBt { params } => {
                let out = mlp_forward(params, x, R::zero(), cond)?;
                Ok(out[0])
            }
        }
    }

    pub fn evaluate_text(&self, rendered: &str) -> CoreResult<R> {
        match self {
            RewardFn::TextFidelity { target } => text_fidelity(rendered, target),
            _ => Err(CoreError::invalid("only text-fidelity scores strings")),
        }
    }
}

/// Unit-cost edit distance (insert / delete / substitute), over chars.
pub fn levenshtein(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    if a.is_empty() {
        return b.len();
    }
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut curr = vec![0usize; b.len() + 1];
    for (i, &ca) in a.iter().enumerate() {
        curr[0] = i + 1;
        for (j, &cb) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(ca != cb);
            curr[j + 1] = sub.min(prev[j + 1] + 1).min(curr[j] + 1);
        }
        std::mem::swap(&mut prev, &mut curr);
    }
    prev[b.len()]
}

/// `max(1 - edits / |target|, 0)`: 1 for an exact match, 0 once the edit
/// count reaches the target length. Rejects an empty target.
pub fn text_fidelity<R: Real>(rendered: &str, target: &str) -> CoreResult<R> {
    let n_ref = target.chars().count();
    if n_ref == 0 {
        return Err(CoreError::invalid("text-fidelity target must be non-empty"));
    }
    let edits = levenshtein(rendered, target);
    let frac = 1.0 - edits as f64 / n_ref as f64;
    Ok(real(frac.max(0.0)))
}

/// One preference observation: under `cond`, `winner` beat `loser`.
#[derive(Debug, Clone)]
pub struct PreferencePair<R: Real> {
    pub cond: Option<usize>,
    pub winner: Vec<R>,
    pub loser: Vec<R>,
}

/// Bradley-Terry objective `-log sigmoid(r(w) - r(l))` for one pair,
/// built on the tape bound to the reward net.
pub fn bt_pair_loss_node<R: Real>(tape: &mut Tape<'_, R>, pair: &PreferencePair<R>) -> CoreResult<Var> {
    let rw = tape.mlp(&pair.winner, R::zero(), pair.cond)?;
    let rl = tape.mlp(&pair.loser, R::zero(), pair.cond)?;
    let z = tape.sub(rw, rl);
    let neg_z = tape.affine(z, -R::one(), &[]);
    Ok(tape.softplus_node(neg_z))
}

#[derive(Debug, Clone)]
pub struct BtTrainOutcome<R: Real> {
    pub reward: RewardFn<R>,
    /// Mean pair loss after each full pass over the data.
    pub epoch_losses: Vec<R>,
}

/// Trains a small reward net on preference pairs with seeded shuffling
/// and Adam. The net is unconditional when every pair has no condition;
/// otherwise its table covers the largest condition index plus a null row.
pub fn train_bt_reward<R: Real>(
    pairs: &[PreferencePair<R>],
    epochs: usize,
    lr: R,
    seed: u64,
) -> CoreResult<BtTrainOutcome<R>> {
    if pairs.is_empty() {
        return Err(CoreError::invalid("cannot train a reward on zero pairs"));
    }
    let dim = pairs[0].winner.len();
    for p in pairs {
        if p.winner.len() != dim || p.loser.len() != dim {
            return Err(CoreError::Shape { what: "preference pair", expected: dim, got: p.winner.len().max(p.loser.len()) });
        }
    }
    let max_cond = pairs.iter().filter_map(|p| p.cond).max();
    let (cond_vocab, cond_emb_dim) = match max_cond {
        Some(m) => (m + 2, 4),
        None => (0, 0),
    };
    let arch = MlpArch {
        in_dim: dim,
        hidden: vec![32, 32],
        out_dim: 1,
        time_emb_dim: 0,
        cond_vocab,
        cond_emb_dim,
        activation: Activation::Silu,
    };
    let mut params: ModelParams<R> = ModelParams::init(arch, seed)?;
    let mut opt = OptimizerState::adam(lr, params.values.len())?;
    let mut order: Vec<usize> = (0..pairs.len()).collect();
    let mut rng = derived_rng(seed, &[0xB7]);
    let batch = 64usize;
    let mut epoch_losses = Vec::with_capacity(epochs);

    for _ in 0..epochs {
        order.shuffle(&mut rng);
        let mut epoch_sum = R::zero();
        for chunk in order.chunks(batch) {
            let inv: R = real(1.0 / chunk.len() as f64);
            let (loss, grad) = value_and_grad(&params, |t| {
                let mut terms = Vec::with_capacity(chunk.len());
                for &i in chunk {
                    let l = bt_pair_loss_node(t, &pairs[i])?;
                    terms.push((l, inv));
                }
                Ok(t.weighted_sum(&terms))
            })?;
            optimizer_step(&mut opt, &mut params, &grad)?;
            epoch_sum = epoch_sum + loss * real(chunk.len() as f64);
        }
        epoch_losses.push(epoch_sum / real(pairs.len() as f64));
    }
    Ok(BtTrainOutcome { reward: RewardFn::LearnedBt { params }, epoch_losses })
}
