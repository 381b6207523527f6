//! Denoising pretraining of the base model: minibatch regression of the
//! noise-corrupted data back to its clean value across random timesteps,
//! with classifier-free condition dropout.
//!
//! Draw order per step, all from one stream derived from the pretraining
//! seed: for each batch element, a labeled task draw, the condition-drop
//! coin, the timestep `t ~ U[t_floor, 1)`, and the corruption noise. The
//! evaluation schedule brackets training: a record before the first step
//! (the initialization row the improvement gate measures from), one every
//! `eval_every` steps, and one after the last step. If the loss ever turns
//! non-finite the run aborts and returns the checkpoint from the most
//! recent evaluation.

use std::time::Instant;

use dgpo_core::optim::{OptimizerState, optimizer_step};
use dgpo_core::rng::{derive_seed, derived_rng, normal_vec, uniform};
use dgpo_core::schedule::denoising_loss_node;
use dgpo_core::tape::value_and_grad;
use dgpo_core::{CoreError, ModelParams, ModelParams64};

use crate::config::{LabConfig, OptChoice};
use crate::eval::{eval_model, EvalOutcome};
use crate::metrics::MetricsRecord;
use crate::task::ModeTask;
use crate::LabResult;

/// Stream tags for the independent pretraining streams.
const TAG_INIT: u64 = 0x11;
const TAG_DATA: u64 = 0x12;

#[derive(Debug, Clone)]
pub struct PretrainOutcome {
    pub params: ModelParams64,
    pub metrics: Vec<MetricsRecord>,
    /// The loss turned non-finite and `params` is the last good
    /// evaluation-point checkpoint.
    pub diverged: bool,
    /// Evaluation of the returned parameters (the final row's samples).
    pub final_eval: EvalOutcome,
}

pub fn make_optimizer(
    choice: OptChoice,
    lr: f64,
    param_count: usize,
) -> Result<OptimizerState<f64>, CoreError> {
    match choice {
        OptChoice::Adam => OptimizerState::adam(lr, param_count),
        OptChoice::Sgd => OptimizerState::sgd(lr, param_count),
    }
}

pub fn pretrain(cfg: &LabConfig, quiet: bool) -> LabResult<PretrainOutcome> {
    let pc = &cfg.pretrain;
    let task = ModeTask::new(&cfg.task);
    let holdout = task.holdout(cfg.task.holdout, cfg.task.data_seed);
    let reward = cfg.reward.build(task.modes())?;
    let schedule = cfg.schedule();
    let arch = cfg.model.arch(cfg.task.modes);

    let mut params: ModelParams64 =
        ModelParams::init(arch, derive_seed(pc.seed, &[TAG_INIT]))?;
    let mut opt = make_optimizer(pc.optimizer, pc.lr, params.values.len())?;
    let mut data_rng = derived_rng(pc.seed, &[TAG_DATA]);

    let started = Instant::now();
    let mut metrics: Vec<MetricsRecord> = Vec::new();
    let mut last_good = params.clone();
    let mut last_eval: Option<EvalOutcome> = None;
    let mut last_loss = 0.0;
    let mut diverged = false;

    let record = |step: usize,
                      params: &ModelParams64,
                      loss: f64,
                      metrics: &mut Vec<MetricsRecord>|
     -> LabResult<EvalOutcome> {
        let eval = eval_model(params, &schedule, &reward, &task, &holdout, &cfg.eval)?;
        metrics.push(MetricsRecord {
            iteration: step,
            mean_reward: eval.mean_reward,
            sliced_w2: eval.sliced_w2,
            train_loss: loss,
            degenerate_groups: 0,
            wall_clock_s: started.elapsed().as_secs_f64(),
        });
        if !quiet {
            println!(
                "pretrain step {step}/{}: loss {loss:.5} reward {:.4} w2 {:.4}",
                pc.steps, eval.mean_reward, eval.sliced_w2
            );
        }
        Ok(eval)
    };

    for step in 0..pc.steps {
        if step % pc.eval_every == 0 {
            last_eval = Some(record(step, &params, last_loss, &mut metrics)?);
            last_good = params.clone();
        }

        let mut batch = Vec::with_capacity(pc.batch);
        for _ in 0..pc.batch {
            let (x, k) = task.sample(&mut data_rng);
            let drop: f64 = uniform(&mut data_rng, 0.0, 1.0);
            let cond = (drop >= pc.cond_drop).then_some(k);
            let t: f64 = uniform(&mut data_rng, schedule.t_floor, 1.0);
            let eps: Vec<f64> = normal_vec(&mut data_rng, 2);
            batch.push((x, cond, t, eps));
        }
        let inv_batch = 1.0 / pc.batch as f64;
        let step_result = value_and_grad(&params, |tape| {
            let mut terms = Vec::with_capacity(batch.len());
            for (x, cond, t, eps) in &batch {
                let l = denoising_loss_node(tape, &schedule, x, *t, eps, *cond)?;
                terms.push((l, inv_batch));
            }
            Ok(tape.weighted_sum(&terms))
        });
        let (loss, grad) = match step_result {
            Ok(pair) => pair,
            Err(CoreError::NonFinite { .. }) => {
                diverged = true;
                break;
            }
            Err(e) => return Err(e.into()),
        };
        if !loss.is_finite() || optimizer_step(&mut opt, &mut params, &grad).is_err() {
            diverged = true;
            break;
        }
        last_loss = loss;
    }

    if diverged {
        params = last_good;
        if !quiet {
            println!("pretrain diverged; restored the last evaluated checkpoint");
        }
    }

    // On a clean finish, close with an evaluation of the final parameters;
    // after divergence the restored checkpoint was already evaluated at its
    // own step and that row stays the last one.
    let final_eval = if diverged {
        last_eval.expect("divergence implies at least the step-0 evaluation")
    } else {
        record(pc.steps, &params, last_loss, &mut metrics)?
    };

    Ok(PretrainOutcome { params, metrics, diverged, final_eval })
}
