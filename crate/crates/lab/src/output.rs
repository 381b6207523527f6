//! Run-directory artifacts shared by the command-line driver and the
//! ablation runner: sample tables, scatter plots, and parameter snapshots.
//!
//! Every table starts with the `# schema=1` marker and a header row.
//! Floats are written with shortest-round-trip formatting so the files
//! parse back bit-exactly.

use std::fs;
use std::path::Path;

use dgpo_core::checkpoint::save_checkpoint;
use dgpo_core::ModelParams64;

use crate::eval::EvalOutcome;
use crate::metrics::{write_metrics_csv, write_timing_csv, CSV_SCHEMA};
use crate::posttrain::TrainOutcome;
use crate::svg::emit_scatter_svg;
use crate::{LabError, LabResult};

pub const SAMPLES_NAME: &str = "samples.csv";
pub const SCATTER_NAME: &str = "scatter.svg";
pub const METRICS_NAME: &str = "metrics.csv";
pub const TIMING_NAME: &str = "timing.csv";
pub const CHECKPOINT_NAME: &str = "checkpoint.json";

/// File name for the parameter snapshot taken after `iteration` steps.
pub fn snapshot_name(iteration: usize) -> String {
    format!("checkpoint-{iteration:06}.json")
}

/// Writes evaluation samples as `x0,x1,cond` rows; the condition field is
/// left empty for unconditional samples.
pub fn write_samples_csv(
    path: &Path,
    samples: &[Vec<f64>],
    conds: &[Option<usize>],
) -> LabResult<()> {
    if samples.len() != conds.len() {
        return Err(LabError::runtime(format!(
            "sample table: {} points but {} condition labels",
            samples.len(),
            conds.len()
        )));
    }
    let mut out = String::from(CSV_SCHEMA);
    out.push('\n');
    out.push_str("x0,x1,cond\n");
    for (x, cond) in samples.iter().zip(conds) {
        if x.len() != 2 {
            return Err(LabError::runtime(format!(
                "sample table rows must be 2-D, got dimension {}",
                x.len()
            )));
        }
        match cond {
            Some(k) => out.push_str(&format!("{},{},{k}\n", x[0], x[1])),
            None => out.push_str(&format!("{},{},\n", x[0], x[1])),
        }
    }
    fs::write(path, out).map_err(|e| LabError::io(path, e))
}

/// Reads a table written by [`write_samples_csv`].
pub fn read_samples_csv(path: &Path) -> LabResult<(Vec<Vec<f64>>, Vec<Option<usize>>)> {
    let text = fs::read_to_string(path).map_err(|e| LabError::io(path, e))?;
    let mut samples = Vec::new();
    let mut conds = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with("x0,") {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 3 {
            return Err(LabError::runtime(format!(
                "{}:{}: expected 3 fields, got {}",
                path.display(),
                ln + 1,
                fields.len()
            )));
        }
        let parse = |s: &str| -> LabResult<f64> {
            s.parse::<f64>().map_err(|e| {
                LabError::runtime(format!("{}:{}: bad number {s:?}: {e}", path.display(), ln + 1))
            })
        };
        samples.push(vec![parse(fields[0])?, parse(fields[1])?]);
        conds.push(if fields[2].is_empty() {
            None
        } else {
            Some(fields[2].parse::<usize>().map_err(|e| {
                LabError::runtime(format!(
                    "{}:{}: bad condition {:?}: {e}",
                    path.display(),
                    ln + 1,
                    fields[2]
                ))
            })?)
        });
    }
    Ok((samples, conds))
}

/// Writes the evaluation sample table and its scatter plot into `dir`.
pub fn write_eval_artifacts(
    dir: &Path,
    eval: &EvalOutcome,
    centers: &[[f64; 2]],
) -> LabResult<()> {
    write_samples_csv(&dir.join(SAMPLES_NAME), &eval.samples, &eval.conds)?;
    emit_scatter_svg(&eval.samples, &eval.conds, centers, &dir.join(SCATTER_NAME))
}

/// Writes everything a finished post-training run leaves behind: the
/// metric and timing tables, a snapshot per recorded iteration, the final
/// parameters, and the final evaluation's samples and plot.
pub fn write_train_artifacts(
    dir: &Path,
    out: &TrainOutcome,
    centers: &[[f64; 2]],
) -> LabResult<()> {
    write_metrics_csv(&dir.join(METRICS_NAME), &out.metrics)?;
    write_timing_csv(&dir.join(TIMING_NAME), &out.metrics)?;
    for (iteration, params) in &out.checkpoints {
        save_checkpoint(&dir.join(snapshot_name(*iteration)), params, None)?;
    }
    save_checkpoint(&dir.join(CHECKPOINT_NAME), &out.params, None)?;
    write_eval_artifacts(dir, &out.final_eval, centers)
}

/// Writes what a pretraining run leaves behind (no per-iteration
/// snapshots; the single checkpoint is the final or last-good state).
pub fn write_pretrain_artifacts(
    dir: &Path,
    params: &ModelParams64,
    metrics: &[crate::metrics::MetricsRecord],
    eval: &EvalOutcome,
    centers: &[[f64; 2]],
) -> LabResult<()> {
    write_metrics_csv(&dir.join(METRICS_NAME), metrics)?;
    write_timing_csv(&dir.join(TIMING_NAME), metrics)?;
    save_checkpoint(&dir.join(CHECKPOINT_NAME), params, None)?;
    write_eval_artifacts(dir, eval, centers)
}
