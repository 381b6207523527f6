//! TOML run configuration. Every field has a default, so an empty file (or
//! no file at all) describes a complete, runnable experiment; the resolved
//! form echoed into run manifests reproduces the identical run when fed
//! back in.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use dgpo_core::checkpoint::load_checkpoint;
use dgpo_core::rewards::RewardFn;
use dgpo_core::schedule::LambdaKind;
use dgpo_core::{Activation, MlpArch, ModelParams64, RewardFn64, Schedule64};

use crate::{LabError, LabResult};

/// Refusal message for policy-gradient training over a deterministic
/// sampler: without per-step noise there is no transition density to
/// form likelihood ratios from.
pub const GRPO_NEEDS_SDE: &str = "grpo requires sampler = \"sde\" with noise_scale > 0: \
     deterministic ode rollouts do not provide a stochastic policy";

fn prob_ok(p: f64) -> bool {
    p.is_finite() && (0.0..=1.0).contains(&p)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    Dgpo,
    DgpoOffline,
    Dpo,
    DpoOffline,
    Grpo,
}

impl Algorithm {
    /// Rollouts come from the frozen reference model instead of the
    /// exponentially averaged online model.
    pub fn is_offline(self) -> bool {
        matches!(self, Algorithm::DgpoOffline | Algorithm::DpoOffline)
    }

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Dgpo => "dgpo",
            Algorithm::DgpoOffline => "dgpo-offline",
            Algorithm::Dpo => "dpo",
            Algorithm::DpoOffline => "dpo-offline",
            Algorithm::Grpo => "grpo",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SamplerKind {
    Ode,
    Sde,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OptChoice {
    Adam,
    Sgd,
}

/// Conditioned 2-D mixture the base model is pretrained on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TaskConfig {
    /// Number of Gaussian modes, equally spaced on the unit circle.
    pub modes: usize,
    /// Per-mode isotropic standard deviation.
    pub mode_std: f64,
    /// Held-out sample count used as the distribution-distance reference.
    pub holdout: usize,
    /// Seed of the held-out draw (independent of training seeds).
    pub data_seed: u64,
}

impl Default for TaskConfig {
    fn default() -> Self {
        TaskConfig { modes: 8, mode_std: 0.05, holdout: 1024, data_seed: 7 }
    }
}

/// Denoiser network shape; the input/output dimension is fixed at 2 by the
/// task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub hidden: Vec<usize>,
    pub time_emb_dim: usize,
    pub cond_emb_dim: usize,
    pub activation: Activation,
    /// Per-timestep denoising-loss weight.
    pub lambda: LambdaKind,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            hidden: vec![64, 64, 64],
            time_emb_dim: 16,
            cond_emb_dim: 8,
            activation: Activation::Silu,
            lambda: LambdaKind::One,
        }
    }
}

impl ModelConfig {
    /// Concrete architecture for a task with `modes` condition labels plus
    /// one null row for the unconditional path.
    pub fn arch(&self, modes: usize) -> MlpArch {
        MlpArch {
            in_dim: 2,
            hidden: self.hidden.clone(),
            out_dim: 2,
            time_emb_dim: self.time_emb_dim,
            cond_vocab: modes + 1,
            cond_emb_dim: self.cond_emb_dim,
            activation: self.activation,
        }
    }
}

/// Denoising pretraining of the base model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PretrainConfig {
    pub steps: usize,
    pub batch: usize,
    pub lr: f64,
    /// Probability of replacing a sample's condition with the null label.
    pub cond_drop: f64,
    pub seed: u64,
    pub eval_every: usize,
    pub optimizer: OptChoice,
}

impl Default for PretrainConfig {
    fn default() -> Self {
        PretrainConfig {
            steps: 20_000,
            batch: 64,
            lr: 1e-4,
            cond_drop: 0.05,
            seed: 0,
            eval_every: 2000,
            optimizer: OptChoice::Adam,
        }
    }
}

/// Preference post-training loop settings, shared by every algorithm tag.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub algorithm: Algorithm,
    /// Samples per rollout group.
    pub group_size: usize,
    /// Contrast sharpness of the preference losses.
    pub beta: f64,
    /// Lower edge of the training-timestep draw `t ~ U[t_min, 1]`.
    pub t_min: f64,
    pub lr: f64,
    pub iterations: usize,
    /// Shadow-model decay once averaging starts: `s <- mu*s + (1-mu)*theta`.
    pub ema_decay: f64,
    /// Iteration at which averaging replaces the identity update; when
    /// absent, resolves to 40% of `iterations`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ema_start: Option<usize>,
    pub rollout_steps: usize,
    pub sampler: SamplerKind,
    /// Diffusion scale `a` of the stochastic sampler (`g = a*t`).
    pub noise_scale: f64,
    pub cond_drop: f64,
    pub groups_per_iter: usize,
    pub seed: u64,
    /// Floor on the advantage-normalizing standard deviation.
    pub eps_std: f64,
    /// Likelihood-ratio clip half-width for the policy-gradient baseline.
    pub clip_eps: f64,
    /// Optimizer steps taken per rollout batch by the policy-gradient
    /// baseline (other algorithms always take exactly one).
    pub grpo_inner_steps: usize,
    pub eval_every: usize,
    pub optimizer: OptChoice,
    /// Pretrained base checkpoint that post-training starts from.
    pub init_checkpoint: PathBuf,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            algorithm: Algorithm::Dgpo,
            group_size: 8,
            beta: 100.0,
            t_min: 0.3,
            lr: 1e-4,
            iterations: 500,
            ema_decay: 0.3,
            ema_start: None,
            rollout_steps: 10,
            sampler: SamplerKind::Ode,
            noise_scale: 0.7,
            cond_drop: 0.05,
            groups_per_iter: 4,
            seed: 0,
            eps_std: 1e-8,
            clip_eps: 0.2,
            grpo_inner_steps: 4,
            eval_every: 25,
            optimizer: OptChoice::Adam,
            init_checkpoint: PathBuf::from("checkpoint.json"),
        }
    }
}

impl TrainConfig {
    /// Iteration at which exponential averaging begins; identity updates
    /// run before it.
    pub fn ema_start_resolved(&self) -> usize {
        self.ema_start.unwrap_or(self.iterations * 2 / 5)
    }

    pub fn validate(&self) -> LabResult<()> {
        let fail = |msg: String| Err(LabError::Config(msg));
        if self.group_size < 2 {
            return fail(format!("train.group_size must be at least 2, got {}", self.group_size));
        }
        if !(self.beta.is_finite() && self.beta >= 0.0) {
            return fail(format!("train.beta must be nonnegative and finite, got {}", self.beta));
        }
        if !(self.t_min.is_finite() && (0.0..1.0).contains(&self.t_min)) {
            return fail(format!("train.t_min must lie in [0, 1), got {}", self.t_min));
        }
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return fail(format!("train.lr must be positive, got {}", self.lr));
        }
        if !prob_ok(self.ema_decay) {
            return fail(format!("train.ema_decay must lie in [0, 1], got {}", self.ema_decay));
        }
        if !prob_ok(self.cond_drop) {
            return fail(format!("train.cond_drop must lie in [0, 1], got {}", self.cond_drop));
        }
        if self.rollout_steps == 0 {
            return fail("train.rollout_steps must be positive".into());
        }
        if !(self.noise_scale.is_finite() && self.noise_scale >= 0.0) {
            return fail(format!(
                "train.noise_scale must be nonnegative, got {}",
                self.noise_scale
            ));
        }
        if self.groups_per_iter == 0 {
            return fail("train.groups_per_iter must be positive".into());
        }
        if !(self.eps_std.is_finite() && self.eps_std > 0.0) {
            return fail(format!("train.eps_std must be positive, got {}", self.eps_std));
        }
        if !(self.clip_eps.is_finite() && self.clip_eps > 0.0 && self.clip_eps < 1.0) {
            return fail(format!("train.clip_eps must lie in (0, 1), got {}", self.clip_eps));
        }
        if self.grpo_inner_steps == 0 {
            return fail("train.grpo_inner_steps must be positive".into());
        }
        if self.eval_every == 0 {
            return fail("train.eval_every must be positive".into());
        }
        if self.algorithm == Algorithm::Grpo
            && (self.sampler != SamplerKind::Sde || self.noise_scale <= 0.0)
        {
            return fail(GRPO_NEEDS_SDE.into());
        }
        Ok(())
    }
}

/// Model evaluation: fixed-seed generation plus distribution distance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub samples: usize,
    pub swd_projections: usize,
    /// Seed of the random projection directions.
    pub swd_seed: u64,
    /// Seed of the evaluation rollouts. Fixed independently of the run
    /// seed so every run scores a given model identically.
    pub seed: u64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig { samples: 512, swd_projections: 64, swd_seed: 12345, seed: 4242 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RewardKind {
    /// Gaussian bump around the conditioned mode center.
    ModeTarget,
    /// Unconditional bump around the unit circle.
    Ring,
    /// Learned pairwise-preference reward net loaded from a checkpoint.
    LearnedBt,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RewardConfig {
    pub kind: RewardKind,
    /// Bandwidth of the mode-target bump.
    pub tau: f64,
    pub ring_radius: f64,
    pub ring_width: f64,
    /// Required when `kind = "learned-bt"`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bt_checkpoint: Option<PathBuf>,
}

impl Default for RewardConfig {
    fn default() -> Self {
        RewardConfig {
            kind: RewardKind::ModeTarget,
            tau: 0.1,
            ring_radius: 1.0,
            ring_width: 0.05,
            bt_checkpoint: None,
        }
    }
}

impl RewardConfig {
    pub fn validate(&self) -> LabResult<()> {
        if !(self.tau.is_finite() && self.tau > 0.0) {
            return Err(LabError::Config(format!("reward.tau must be positive, got {}", self.tau)));
        }
        if !(self.ring_radius.is_finite() && self.ring_radius > 0.0) {
            return Err(LabError::Config(format!(
                "reward.ring_radius must be positive, got {}",
                self.ring_radius
            )));
        }
        if !(self.ring_width.is_finite() && self.ring_width > 0.0) {
            return Err(LabError::Config(format!(
                "reward.ring_width must be positive, got {}",
                self.ring_width
            )));
        }
        if self.kind == RewardKind::LearnedBt && self.bt_checkpoint.is_none() {
            return Err(LabError::Config(
                "reward.bt_checkpoint is required when reward.kind = \"learned-bt\"".into(),
            ));
        }
        Ok(())
    }

    /// Concrete reward over `modes` unit-circle centers.
    pub fn build(&self, modes: usize) -> LabResult<RewardFn64> {
        match self.kind {
            RewardKind::ModeTarget => Ok(RewardFn::ModeTarget {
                centers: dgpo_core::rewards::circle_modes(modes),
                tau: self.tau,
            }),
            RewardKind::Ring => {
                Ok(RewardFn::Ring { radius: self.ring_radius, width: self.ring_width })
            }
            RewardKind::LearnedBt => {
                let path = self.bt_checkpoint.as_ref().expect("validated above");
                let (params, _): (ModelParams64, _) = load_checkpoint(path)?;
                Ok(RewardFn::LearnedBt { params })
            }
        }
    }
}

/// One named entry of the ablation grid: a partial override of the `train`
/// section. Unset fields inherit the base run's values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct VariantConfig {
    pub name: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub algorithm: Option<Algorithm>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sampler: Option<SamplerKind>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub noise_scale: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_min: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub iterations: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub group_size: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lr: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rollout_steps: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grpo_inner_steps: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ema_decay: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ema_start: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cond_drop: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eval_every: Option<usize>,
}

impl VariantConfig {
    /// Base train settings with this variant's overrides applied.
    pub fn apply(&self, base: &TrainConfig) -> TrainConfig {
        let mut t = base.clone();
        if let Some(v) = self.algorithm {
            t.algorithm = v;
        }
        if let Some(v) = self.sampler {
            t.sampler = v;
        }
        if let Some(v) = self.noise_scale {
            t.noise_scale = v;
        }
        if let Some(v) = self.t_min {
            t.t_min = v;
        }
        if let Some(v) = self.beta {
            t.beta = v;
        }
        if let Some(v) = self.iterations {
            t.iterations = v;
        }
        if let Some(v) = self.group_size {
            t.group_size = v;
        }
        if let Some(v) = self.lr {
            t.lr = v;
        }
        if let Some(v) = self.rollout_steps {
            t.rollout_steps = v;
        }
        if let Some(v) = self.grpo_inner_steps {
            t.grpo_inner_steps = v;
        }
        if let Some(v) = self.ema_decay {
            t.ema_decay = v;
        }
        if let Some(v) = self.ema_start {
            t.ema_start = Some(v);
        }
        if let Some(v) = self.cond_drop {
            t.cond_drop = v;
        }
        if let Some(v) = self.eval_every {
            t.eval_every = v;
        }
        t
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct AblateConfig {
    pub variants: Vec<VariantConfig>,
    /// Run variants on worker threads instead of sequentially. Output
    /// order and file contents are identical either way.
    pub parallel: bool,
}

/// Complete experiment description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct LabConfig {
    pub task: TaskConfig,
    pub model: ModelConfig,
    pub pretrain: PretrainConfig,
    pub train: TrainConfig,
    pub eval: EvalConfig,
    pub reward: RewardConfig,
    pub ablate: AblateConfig,
}

impl LabConfig {
    pub fn validate(&self) -> LabResult<()> {
        let fail = |msg: String| Err(LabError::Config(msg));
        if self.task.modes == 0 {
            return fail("task.modes must be positive".into());
        }
        if !(self.task.mode_std.is_finite() && self.task.mode_std > 0.0) {
            return fail(format!("task.mode_std must be positive, got {}", self.task.mode_std));
        }
        if self.task.holdout == 0 {
            return fail("task.holdout must be positive".into());
        }
        self.model
            .arch(self.task.modes)
            .validate()
            .map_err(|e| LabError::Config(format!("model: {e}")))?;
        if self.pretrain.batch == 0 {
            return fail("pretrain.batch must be positive".into());
        }
        if !(self.pretrain.lr.is_finite() && self.pretrain.lr > 0.0) {
            return fail(format!("pretrain.lr must be positive, got {}", self.pretrain.lr));
        }
        if !prob_ok(self.pretrain.cond_drop) {
            return fail(format!(
                "pretrain.cond_drop must lie in [0, 1], got {}",
                self.pretrain.cond_drop
            ));
        }
        if self.pretrain.eval_every == 0 {
            return fail("pretrain.eval_every must be positive".into());
        }
        self.train.validate()?;
        if self.eval.samples == 0 {
            return fail("eval.samples must be positive".into());
        }
        if self.eval.swd_projections == 0 {
            return fail("eval.swd_projections must be positive".into());
        }
        self.reward.validate()?;
        Ok(())
    }

    /// Copy with every optional knob pinned to its concrete value; this is
    /// the form echoed into run manifests.
    pub fn resolved(&self) -> LabConfig {
        let mut cfg = self.clone();
        cfg.train.ema_start = Some(cfg.train.ema_start_resolved());
        cfg
    }

    /// Noise schedule shared by training, sampling, and evaluation.
    pub fn schedule(&self) -> Schedule64 {
        Schedule64 { lambda: self.model.lambda, ..Schedule64::default() }
    }
}

/// Parses and validates a config file; `None` means all defaults. Parse
/// diagnostics keep the file position and field path reported by the TOML
/// deserializer.
pub fn load_config(path: Option<&Path>) -> LabResult<LabConfig> {
    let cfg: LabConfig = match path {
        None => LabConfig::default(),
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| {
                LabError::Config(format!("cannot read config {}: {e}", p.display()))
            })?;
            parse_config(&text).map_err(|e| match e {
                LabError::Config(msg) => LabError::Config(format!("{}: {msg}", p.display())),
                other => other,
            })?
        }
    };
    cfg.validate()?;
    Ok(cfg)
}

/// Parses a config from TOML text (no validation).
pub fn parse_config(text: &str) -> LabResult<LabConfig> {
    toml::from_str(text).map_err(|e| LabError::Config(e.to_string()))
}
