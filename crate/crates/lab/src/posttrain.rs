//! Preference post-training loops: online and offline group-preference
//! training, online and offline best-vs-worst pairwise training, and a
//! clipped policy-gradient baseline over stochastic rollouts.
//!
//! Shared iteration shape, for every algorithm tag:
//!
//! 1. For each group in the batch, draw a plan (condition, shared timestep
//!    `t ~ U[max(t_min, t_floor), 1)`, shared noise, per-sample rollout
//!    seeds) from a stream derived as `(seed, [tag, iteration, group])`,
//!    then roll out `group_size` samples and score them.
//! 2. Normalize rewards into advantages; a group whose rewards are all
//!    equal is degenerate and is skipped but counted. An iteration with no
//!    usable group is skipped entirely.
//! 3. Take one optimizer step on the batch loss (the policy-gradient
//!    baseline takes `grpo_inner_steps` on its frozen rollout batch).
//! 4. Online algorithms update the rollout model: identity before the
//!    averaging-start iteration, exponential averaging after. Offline
//!    variants train on a fixed dataset generated from the frozen
//!    reference: their plan stream ignores the iteration index, so every
//!    iteration regenerates the identical groups. The policy-gradient
//!    baseline always rolls out from the current model.
//!
//! Rollout seeds are derived per `(iteration, group, sample)`, so rollout
//! generation inside an iteration is embarrassingly parallel in
//! principle; this desk-scale implementation keeps it sequential, and the
//! merge order is fixed either way. Gradients never flow through rollout
//! generation: samples enter the losses as plain data.

use std::time::Instant;

use dgpo_core::losses::{dgpo_loss_node, dpo_loss_node, grpo_loss_node};
use dgpo_core::optim::optimizer_step;
use dgpo_core::params::ema_update;
use dgpo_core::rng::{derive_seed, derived_rng, normal_vec, uniform};
use dgpo_core::sampler::{ode_sample, sde_sample};
use dgpo_core::tape::value_and_grad;
use dgpo_core::{Group64, ModelParams64, RewardFn64, RolloutTrajectory64, SamplerConfig64, Schedule64};

use rand::Rng;

use crate::config::{Algorithm, LabConfig, SamplerKind, TrainConfig, GRPO_NEEDS_SDE};
use crate::eval::{eval_model, EvalOutcome};
use crate::metrics::MetricsRecord;
use crate::pretrain::make_optimizer;
use crate::task::ModeTask;
use crate::{LabError, LabResult};

/// Stream tags for the per-group and per-sample derivations.
const TAG_GROUP: u64 = 0x30;
const TAG_ROLLOUT: u64 = 0x31;

/// Everything one group's iteration consumes from the random stream, in
/// draw order: mode label, condition-drop coin, shared timestep, shared
/// denoising noise; rollout seeds are derived, not drawn.
///
/// `reward_mode` is the grading target of a conditional reward and is
/// always present; `cond` is the model-side condition used for rollouts
/// and loss terms, and drops to null with the configured probability.
/// A dropped condition changes what the model is prompted with, never
/// what the reward grades against.
#[derive(Debug, Clone)]
pub struct GroupPlan {
    pub reward_mode: usize,
    pub cond: Option<usize>,
    pub t: f64,
    pub eps: Vec<f64>,
    pub rollout_seeds: Vec<u64>,
}

/// Draws the plan for group `g` of iteration `iteration`. The stream
/// layout never depends on the reward kind: the mode label and drop coin
/// are always consumed, and an unconditional reward simply ignores them.
pub fn draw_group_plan(
    seed: u64,
    iteration: usize,
    g: usize,
    tc: &TrainConfig,
    task: &ModeTask,
    schedule: &Schedule64,
    needs_cond: bool,
) -> GroupPlan {
    let mut rng = derived_rng(seed, &[TAG_GROUP, iteration as u64, g as u64]);
    let k = rng.random_range(0..task.modes());
    let drop: f64 = uniform(&mut rng, 0.0, 1.0);
    let cond = (needs_cond && drop >= tc.cond_drop).then_some(k);
    let t: f64 = uniform(&mut rng, tc.t_min.max(schedule.t_floor), 1.0);
    let eps: Vec<f64> = normal_vec(&mut rng, 2);
    let rollout_seeds = (0..tc.group_size)
        .map(|i| derive_seed(seed, &[TAG_ROLLOUT, iteration as u64, g as u64, i as u64]))
        .collect();
    GroupPlan { reward_mode: k, cond, t, eps, rollout_seeds }
}

/// One planned group after rollout and scoring.
#[derive(Debug, Clone)]
pub struct RolloutGroup {
    pub plan: GroupPlan,
    pub group: Group64,
    /// Recorded transition parameters, present for stochastic rollouts.
    pub trajectories: Option<Vec<RolloutTrajectory64>>,
}

/// Rolls out `group_size` samples from `model` under the plan and scores
/// them with `reward`.
pub fn generate_group(
    model: &ModelParams64,
    schedule: &Schedule64,
    tc: &TrainConfig,
    reward: &RewardFn64,
    plan: GroupPlan,
) -> LabResult<RolloutGroup> {
    let mut samples = Vec::with_capacity(tc.group_size);
    let mut trajectories = Vec::new();
    for &rollout_seed in &plan.rollout_seeds {
        match tc.sampler {
            SamplerKind::Ode => {
                let scfg = SamplerConfig64::ode(tc.rollout_steps, rollout_seed);
                samples.push(ode_sample(model, schedule, &scfg, plan.cond)?);
            }
            SamplerKind::Sde => {
                let scfg =
                    SamplerConfig64::sde(tc.rollout_steps, tc.noise_scale, rollout_seed);
                let (x, traj) = sde_sample(model, schedule, &scfg, plan.cond)?;
                samples.push(x);
                trajectories.push(traj);
            }
        }
    }
    let score_cond = reward.needs_condition().then_some(plan.reward_mode);
    let rewards: Vec<f64> = samples
        .iter()
        .map(|x| reward.evaluate(score_cond, x))
        .collect::<Result<_, _>>()?;
    let group = Group64::new(plan.cond, samples, &rewards, tc.eps_std)?;
    let trajectories = (tc.sampler == SamplerKind::Sde).then_some(trajectories);
    Ok(RolloutGroup { plan, group, trajectories })
}

/// Rollout-model update for the online algorithms: identity tracking
/// before `ema_start`, exponential averaging with decay `mu` afterward.
pub fn ema_advance(
    shadow: &mut ModelParams64,
    online: &ModelParams64,
    iteration: usize,
    ema_start: usize,
    mu: f64,
) -> LabResult<()> {
    if iteration < ema_start {
        shadow.values.copy_from_slice(&online.values);
        Ok(())
    } else {
        ema_update(shadow, online, mu).map_err(LabError::from)
    }
}

/// Winner and loser indices by reward, earliest index on ties.
pub fn best_vs_worst(rewards: &[f64]) -> (usize, usize) {
    let mut wi = 0;
    let mut li = 0;
    for (i, &r) in rewards.iter().enumerate() {
        if r > rewards[wi] {
            wi = i;
        }
        if r < rewards[li] {
            li = i;
        }
    }
    (wi, li)
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: ModelParams64,
    pub metrics: Vec<MetricsRecord>,
    /// Parameter snapshots at every recorded iteration.
    pub checkpoints: Vec<(usize, ModelParams64)>,
    /// Every training timestep drawn, in draw order (audited by tests).
    pub t_log: Vec<f64>,
    pub degenerate_groups: usize,
    /// Evaluation of the returned parameters.
    pub final_eval: EvalOutcome,
}

/// Runs the configured post-training algorithm from `theta_init`.
pub fn post_train(
    cfg: &LabConfig,
    theta_init: &ModelParams64,
    quiet: bool,
) -> LabResult<TrainOutcome> {
    let tc = &cfg.train;
    tc.validate()?;
    if tc.algorithm == Algorithm::Grpo
        && (tc.sampler != SamplerKind::Sde || tc.noise_scale <= 0.0)
    {
        return Err(LabError::config(GRPO_NEEDS_SDE));
    }
    let task = ModeTask::new(&cfg.task);
    let holdout = task.holdout(cfg.task.holdout, cfg.task.data_seed);
    let reward = cfg.reward.build(task.modes())?;
    let schedule = cfg.schedule();
    let ema_start = tc.ema_start_resolved();

    let mut theta = theta_init.clone();
    let theta_ref = theta_init.clone();
    let mut theta_minus = theta_init.clone();
    let mut opt = make_optimizer(tc.optimizer, tc.lr, theta.values.len())?;

    let started = Instant::now();
    let mut metrics: Vec<MetricsRecord> = Vec::new();
    let mut checkpoints: Vec<(usize, ModelParams64)> = Vec::new();
    let mut t_log: Vec<f64> = Vec::new();
    let mut degenerate_total = 0usize;
    let mut last_loss = 0.0;

    let record = |completed: usize,
                      theta: &ModelParams64,
                      loss: f64,
                      degenerate: usize,
                      metrics: &mut Vec<MetricsRecord>,
                      checkpoints: &mut Vec<(usize, ModelParams64)>|
     -> LabResult<EvalOutcome> {
        let eval = eval_model(theta, &schedule, &reward, &task, &holdout, &cfg.eval)?;
        metrics.push(MetricsRecord {
            iteration: completed,
            mean_reward: eval.mean_reward,
            sliced_w2: eval.sliced_w2,
            train_loss: loss,
            degenerate_groups: degenerate,
            wall_clock_s: started.elapsed().as_secs_f64(),
        });
        checkpoints.push((completed, theta.clone()));
        if !quiet {
            println!(
                "{} iter {completed}/{}: loss {loss:.5} reward {:.4} w2 {:.4}",
                tc.algorithm.name(),
                tc.iterations,
                eval.mean_reward,
                eval.sliced_w2
            );
        }
        Ok(eval)
    };

    let mut last_eval =
        Some(record(0, &theta, last_loss, degenerate_total, &mut metrics, &mut checkpoints)?);

    for it in 0..tc.iterations {
        // Offline variants keep a fixed dataset: the plan stream drops the
        // iteration index, so the frozen reference regenerates the same
        // groups every time around.
        let plan_it = if tc.algorithm.is_offline() { 0 } else { it };
        let plans: Vec<GroupPlan> = (0..tc.groups_per_iter)
            .map(|g| {
                draw_group_plan(tc.seed, plan_it, g, tc, &task, &schedule, reward.needs_condition())
            })
            .collect();
        t_log.extend(plans.iter().map(|p| p.t));

        let rollout_model: &ModelParams64 = match tc.algorithm {
            Algorithm::Grpo => &theta,
            a if a.is_offline() => &theta_ref,
            _ => &theta_minus,
        };
        let mut groups = Vec::with_capacity(plans.len());
        for plan in plans {
            groups.push(generate_group(rollout_model, &schedule, tc, &reward, plan)?);
        }
        let usable: Vec<&RolloutGroup> = groups.iter().filter(|g| !g.group.degenerate).collect();
        degenerate_total += groups.len() - usable.len();

        if usable.is_empty() {
            // Nothing to learn from this iteration; the models stay put.
            if (it + 1) % tc.eval_every == 0 {
                last_eval = Some(record(
                    it + 1,
                    &theta,
                    last_loss,
                    degenerate_total,
                    &mut metrics,
                    &mut checkpoints,
                )?);
            }
            continue;
        }
        let inv = 1.0 / usable.len() as f64;

        match tc.algorithm {
            Algorithm::Dgpo | Algorithm::DgpoOffline => {
                let (loss, grad) = value_and_grad(&theta, |tape| {
                    let mut terms = Vec::with_capacity(usable.len());
                    for rg in &usable {
                        let node = dgpo_loss_node(
                            tape,
                            &theta_ref,
                            &schedule,
                            &rg.group,
                            rg.plan.t,
                            &rg.plan.eps,
                            tc.beta,
                        )?;
                        terms.push((node, inv));
                    }
                    Ok(tape.weighted_sum(&terms))
                })?;
                optimizer_step(&mut opt, &mut theta, &grad)?;
                last_loss = loss;
            }
            Algorithm::Dpo | Algorithm::DpoOffline => {
                let (loss, grad) = value_and_grad(&theta, |tape| {
                    let mut terms = Vec::with_capacity(usable.len());
                    for rg in &usable {
                        let rewards: Vec<f64> =
                            rg.group.members.iter().map(|m| m.reward).collect();
                        let (wi, li) = best_vs_worst(&rewards);
                        let node = dpo_loss_node(
                            tape,
                            &theta_ref,
                            &schedule,
                            &rg.group.members[wi].x,
                            &rg.group.members[li].x,
                            rg.group.cond,
                            rg.plan.t,
                            &rg.plan.eps,
                            tc.beta,
                        )?;
                        terms.push((node, inv));
                    }
                    Ok(tape.weighted_sum(&terms))
                })?;
                optimizer_step(&mut opt, &mut theta, &grad)?;
                last_loss = loss;
            }
            Algorithm::Grpo => {
                let trajs: Vec<(&RolloutTrajectory64, f64, Option<usize>)> = usable
                    .iter()
                    .flat_map(|rg| {
                        let trajectories = rg
                            .trajectories
                            .as_ref()
                            .expect("stochastic rollouts record trajectories");
                        trajectories
                            .iter()
                            .zip(&rg.group.members)
                            .map(move |(traj, m)| (traj, m.advantage, rg.group.cond))
                    })
                    .collect();
                let inv_traj = 1.0 / trajs.len() as f64;
                for _ in 0..tc.grpo_inner_steps {
                    let (loss, grad) = value_and_grad(&theta, |tape| {
                        let mut terms = Vec::with_capacity(trajs.len());
                        for (traj, advantage, cond) in &trajs {
                            let node = grpo_loss_node(
                                tape,
                                &schedule,
                                traj,
                                *cond,
                                *advantage,
                                tc.clip_eps,
                            )?;
                            terms.push((node, inv_traj));
                        }
                        Ok(tape.weighted_sum(&terms))
                    })?;
                    optimizer_step(&mut opt, &mut theta, &grad)?;
                    last_loss = loss;
                }
            }
        }

        if matches!(tc.algorithm, Algorithm::Dgpo | Algorithm::Dpo) {
            ema_advance(&mut theta_minus, &theta, it, ema_start, tc.ema_decay)?;
        }

        if (it + 1) % tc.eval_every == 0 {
            last_eval = Some(record(
                it + 1,
                &theta,
                last_loss,
                degenerate_total,
                &mut metrics,
                &mut checkpoints,
            )?);
        }
    }

    let final_eval = if metrics.last().map_or(true, |r| r.iteration < tc.iterations) {
        record(
            tc.iterations,
            &theta,
            last_loss,
            degenerate_total,
            &mut metrics,
            &mut checkpoints,
        )?
    } else {
        last_eval.take().expect("a recorded row implies an evaluation")
    };

    Ok(TrainOutcome {
        params: theta,
        metrics,
        checkpoints,
        t_log,
        degenerate_groups: degenerate_total,
        final_eval,
    })
}
