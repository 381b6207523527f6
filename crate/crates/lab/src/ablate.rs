//! Ablation runner: a grid of post-training variants launched from one
//! shared starting checkpoint, each in its own run directory, plus a
//! combined metric table and a directional summary.
//!
//! The summary classifies runs by what their resolved configuration says
//! (algorithm, sampler backbone, timestep floor), never by variant name,
//! so renaming a variant cannot change which comparisons are reported.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use dgpo_core::ModelParams64;

use crate::config::{
    AblateConfig, Algorithm, LabConfig, SamplerKind, TrainConfig, VariantConfig,
};
use crate::manifest::{allocate_run_dir, write_manifest, RunManifest};
use crate::metrics::{MetricsRecord, CSV_SCHEMA};
use crate::output::write_train_artifacts;
use crate::posttrain::post_train;
use crate::task::ModeTask;
use crate::{LabError, LabResult};

/// Two final rewards further apart than this are not treated as matched,
/// and their distribution distances are not compared.
pub const MATCHED_REWARD_GAP: f64 = 0.02;

pub const COMBINED_NAME: &str = "combined.csv";
pub const SUMMARY_NAME: &str = "summary.txt";

/// What a finished variant left behind.
#[derive(Debug, Clone)]
pub struct VariantSummary {
    /// The fully resolved train section the variant ran with.
    pub train: TrainConfig,
    pub metrics: Vec<MetricsRecord>,
    pub final_reward: f64,
    pub final_w2: f64,
    pub dir: PathBuf,
}

#[derive(Debug, Clone)]
pub struct VariantResult {
    pub name: String,
    /// The summary, or the error text for a variant that failed. A failed
    /// variant never aborts the rest of the grid.
    pub outcome: Result<VariantSummary, String>,
}

#[derive(Debug, Clone)]
pub struct AblateReport {
    pub results: Vec<VariantResult>,
    pub summary: String,
    pub any_failed: bool,
}

fn run_one(
    cfg: &LabConfig,
    variant: &VariantConfig,
    out_dir: &Path,
    theta_init: &ModelParams64,
    quiet: bool,
) -> VariantResult {
    let mut vcfg = cfg.clone();
    vcfg.train = variant.apply(&cfg.train);
    vcfg.ablate = AblateConfig::default();
    let attempt = (|| -> LabResult<VariantSummary> {
        vcfg.validate()?;
        let dir = allocate_run_dir(&out_dir.join(&variant.name))?;
        write_manifest(&dir, &RunManifest::new("posttrain", vcfg.train.seed, &vcfg)?)?;
        if !quiet {
            println!(
                "variant {}: {} -> {}",
                variant.name,
                vcfg.train.algorithm.name(),
                dir.display()
            );
        }
        let outcome = post_train(&vcfg, theta_init, quiet)?;
        let task = ModeTask::new(&vcfg.task);
        write_train_artifacts(&dir, &outcome, &task.centers)?;
        Ok(VariantSummary {
            train: vcfg.train.clone(),
            final_reward: outcome.final_eval.mean_reward,
            final_w2: outcome.final_eval.sliced_w2,
            metrics: outcome.metrics,
            dir,
        })
    })();
    VariantResult { name: variant.name.clone(), outcome: attempt.map_err(|e| e.to_string()) }
}

/// Runs every variant of the grid from `theta_init`, writes per-variant
/// run directories under `out_dir` plus `combined.csv` and `summary.txt`,
/// and returns the collected results in declared order.
pub fn run_ablation(
    cfg: &LabConfig,
    theta_init: &ModelParams64,
    out_dir: &Path,
    quiet: bool,
) -> LabResult<AblateReport> {
    let variants = &cfg.ablate.variants;
    if variants.is_empty() {
        return Err(LabError::config("ablation grid has no variants"));
    }
    for (i, v) in variants.iter().enumerate() {
        if v.name.is_empty() {
            return Err(LabError::config(format!("ablation variant {i} has an empty name")));
        }
        if variants[..i].iter().any(|w| w.name == v.name) {
            return Err(LabError::config(format!("duplicate ablation variant name {:?}", v.name)));
        }
    }

    let results: Vec<VariantResult> = if cfg.ablate.parallel && variants.len() > 1 {
        std::thread::scope(|scope| {
            let handles: Vec<_> = variants
                .iter()
                .map(|v| scope.spawn(move || run_one(cfg, v, out_dir, theta_init, quiet)))
                .collect();
            handles
                .into_iter()
                .zip(variants)
                .map(|(handle, v)| {
                    handle.join().unwrap_or_else(|_| VariantResult {
                        name: v.name.clone(),
                        outcome: Err("variant thread panicked".into()),
                    })
                })
                .collect()
        })
    } else {
        variants.iter().map(|v| run_one(cfg, v, out_dir, theta_init, quiet)).collect()
    };

    write_combined_csv(&out_dir.join(COMBINED_NAME), &results)?;
    let summary = summarize(&results);
    fs::write(out_dir.join(SUMMARY_NAME), &summary)
        .map_err(|e| LabError::io(out_dir.join(SUMMARY_NAME), e))?;

    let any_failed = results.iter().any(|r| r.outcome.is_err());
    Ok(AblateReport { results, summary, any_failed })
}

fn write_combined_csv(path: &Path, results: &[VariantResult]) -> LabResult<()> {
    let mut out = String::from(CSV_SCHEMA);
    out.push('\n');
    out.push_str("variant,iteration,mean_reward,sliced_w2\n");
    for r in results {
        if let Ok(s) = &r.outcome {
            for m in &s.metrics {
                let _ = writeln!(out, "{},{},{},{}", r.name, m.iteration, m.mean_reward, m.sliced_w2);
            }
        }
    }
    fs::write(path, out).map_err(|e| LabError::io(path, e))
}

fn ordering_line(out: &mut String, label: &str, a_name: &str, a: f64, b_name: &str, b: f64) {
    let verdict = if a >= b { "holds" } else { "violated" };
    let _ = writeln!(out, "ordering {label}: {a_name} {a:.4} >= {b_name} {b:.4} ({verdict})");
}

/// Renders the per-variant status lines and every directional comparison
/// the grid supports. Roles come from resolved configurations.
pub fn summarize(results: &[VariantResult]) -> String {
    let mut out = String::new();
    for r in results {
        match &r.outcome {
            Ok(s) => {
                let _ = writeln!(
                    out,
                    "variant {}: final reward {:.4}, final W2 {:.4} ({})",
                    r.name,
                    s.final_reward,
                    s.final_w2,
                    s.dir.display()
                );
            }
            Err(e) => {
                let _ = writeln!(out, "variant {}: FAILED: {e}", r.name);
            }
        }
    }
    let ok: Vec<(&str, &VariantSummary)> = results
        .iter()
        .filter_map(|r| r.outcome.as_ref().ok().map(|s| (r.name.as_str(), s)))
        .collect();
    if ok.is_empty() {
        out.push_str("no successful variants\n");
        return out;
    }

    let start_reward = ok[0].1.metrics.first().map(|m| m.mean_reward);
    if let Some(r0) = start_reward {
        let _ = writeln!(out, "starting reward (iteration 0): {r0:.4}");
    }

    let find = |pred: &dyn Fn(&TrainConfig) -> bool| {
        ok.iter().find(|(_, s)| pred(&s.train)).copied()
    };
    let dgpo_ode =
        find(&|t| t.algorithm == Algorithm::Dgpo && t.sampler == SamplerKind::Ode);
    let dgpo_sde =
        find(&|t| t.algorithm == Algorithm::Dgpo && t.sampler == SamplerKind::Sde);
    let dgpo_any = dgpo_ode.or_else(|| find(&|t| t.algorithm == Algorithm::Dgpo));
    let offline = find(&|t| t.algorithm == Algorithm::DgpoOffline);
    let dpo = find(&|t| t.algorithm == Algorithm::Dpo);

    if let (Some((an, a)), Some((bn, b))) = (dgpo_ode, dgpo_sde) {
        ordering_line(
            &mut out,
            "deterministic >= stochastic rollouts",
            an,
            a.final_reward,
            bn,
            b.final_reward,
        );
    }
    if let (Some((an, a)), Some((bn, b))) = (dgpo_any, offline) {
        ordering_line(&mut out, "on-policy >= off-policy", an, a.final_reward, bn, b.final_reward);
        if let Some(r0) = start_reward {
            ordering_line(&mut out, "off-policy >= start", bn, b.final_reward, "start", r0);
        }
    }
    if let (Some((an, a)), Some((bn, b))) = (dgpo_any, dpo) {
        if a.train.iterations == b.train.iterations {
            ordering_line(
                &mut out,
                "group preference >= pairwise preference",
                an,
                a.final_reward,
                bn,
                b.final_reward,
            );
        } else {
            let _ = writeln!(
                out,
                "group vs pairwise preference: budgets differ ({} vs {} iterations), not compared",
                a.train.iterations, b.train.iterations
            );
        }
    }

    let clipped = find(&|t| {
        t.algorithm == Algorithm::Dgpo && t.sampler == SamplerKind::Ode && t.t_min > 0.0
    });
    let unclipped = find(&|t| {
        t.algorithm == Algorithm::Dgpo && t.sampler == SamplerKind::Ode && t.t_min == 0.0
    });
    if let (Some((an, a)), Some((bn, b))) = (clipped, unclipped) {
        let gap = (a.final_reward - b.final_reward).abs();
        if gap <= MATCHED_REWARD_GAP {
            let verdict = if a.final_w2 <= b.final_w2 { "holds" } else { "violated" };
            let _ = writeln!(
                out,
                "matched-reward W2 (gap {gap:.4}): t_min {} gives {an} {:.4} <= t_min 0 gives {bn} {:.4} ({verdict})",
                a.train.t_min, a.final_w2, b.final_w2
            );
        } else {
            let _ = writeln!(
                out,
                "matched-reward W2: not comparable (reward gap {gap:.4} > {MATCHED_REWARD_GAP})"
            );
        }
    }
    out
}
