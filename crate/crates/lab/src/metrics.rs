//! Per-evaluation training metrics and their CSV form.
//!
//! The metrics file holds only values that are a pure function of
//! (config, seed), so re-running a run reproduces it byte for byte; the
//! wall-clock column lives in a separate timing file that is allowed to
//! differ between reruns. Numbers are printed with the shortest
//! representation that parses back to the same bits.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::{LabError, LabResult};

/// Header comment identifying the CSV layout version.
pub const CSV_SCHEMA: &str = "# schema=1";

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRecord {
    /// Completed training iterations when the row was recorded; row 0 is
    /// the untouched initial model.
    pub iteration: usize,
    /// Mean reward over the fixed evaluation sample.
    pub mean_reward: f64,
    /// Sliced Wasserstein-2 distance to the held-out data.
    pub sliced_w2: f64,
    /// Batch training loss at the most recent step (0 before any step).
    pub train_loss: f64,
    /// Degenerate (all-rewards-equal) groups seen so far, cumulative.
    pub degenerate_groups: usize,
    /// Seconds since the run started; excluded from the metrics CSV.
    pub wall_clock_s: f64,
}

/// Rejects non-finite values and non-increasing iteration numbers.
pub fn validate_records(records: &[MetricsRecord]) -> LabResult<()> {
    let mut last: Option<usize> = None;
    for r in records {
        for (name, v) in [
            ("mean_reward", r.mean_reward),
            ("sliced_w2", r.sliced_w2),
            ("train_loss", r.train_loss),
            ("wall_clock_s", r.wall_clock_s),
        ] {
            if !v.is_finite() {
                return Err(LabError::runtime(format!(
                    "metrics row at iteration {}: non-finite {name}",
                    r.iteration
                )));
            }
        }
        if let Some(prev) = last {
            if r.iteration <= prev {
                return Err(LabError::runtime(format!(
                    "metrics iterations must increase: {prev} then {}",
                    r.iteration
                )));
            }
        }
        last = Some(r.iteration);
    }
    Ok(())
}

/// Deterministic metrics CSV (no timing column).
pub fn write_metrics_csv(path: &Path, records: &[MetricsRecord]) -> LabResult<()> {
    validate_records(records)?;
    let mut out = String::new();
    out.push_str(CSV_SCHEMA);
    out.push_str("\niteration,mean_reward,sliced_w2,train_loss,degenerate_groups\n");
    for r in records {
        writeln!(
            out,
            "{},{},{},{},{}",
            r.iteration, r.mean_reward, r.sliced_w2, r.train_loss, r.degenerate_groups
        )
        .expect("string writes cannot fail");
    }
    fs::write(path, out).map_err(|e| LabError::io(path, e))
}

/// Wall-clock sidecar; informational only, never compared across runs.
pub fn write_timing_csv(path: &Path, records: &[MetricsRecord]) -> LabResult<()> {
    let mut out = String::new();
    out.push_str(CSV_SCHEMA);
    out.push_str("\niteration,wall_clock_s\n");
    for r in records {
        writeln!(out, "{},{:.3}", r.iteration, r.wall_clock_s).expect("string writes cannot fail");
    }
    fs::write(path, out).map_err(|e| LabError::io(path, e))
}

/// Reads a metrics CSV back; wall-clock values are not part of the file
/// and come back as 0.
pub fn read_metrics_csv(path: &Path) -> LabResult<Vec<MetricsRecord>> {
    let text = fs::read_to_string(path).map_err(|e| LabError::io(path, e))?;
    let mut records = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if line.starts_with('#') || line.starts_with("iteration") || line.is_empty() {
            continue;
        }
        let bad =
            || LabError::runtime(format!("{}:{}: malformed metrics row", path.display(), idx + 1));
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 5 {
            return Err(bad());
        }
        records.push(MetricsRecord {
            iteration: fields[0].parse().map_err(|_| bad())?,
            mean_reward: fields[1].parse().map_err(|_| bad())?,
            sliced_w2: fields[2].parse().map_err(|_| bad())?,
            train_loss: fields[3].parse().map_err(|_| bad())?,
            degenerate_groups: fields[4].parse().map_err(|_| bad())?,
            wall_clock_s: 0.0,
        });
    }
    Ok(records)
}
