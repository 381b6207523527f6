//! `dgpo`: command-line driver for the 2-D group-preference lab.
//!
//! Exit codes: 0 on success, 2 for configuration problems (including
//! usage errors), 3 for runtime failures such as missing checkpoints or
//! diverged training.

use std::path::PathBuf;

use clap::{Parser, Subcommand};

use dgpo_core::checkpoint::load_checkpoint;

use dgpo_lab::ablate::run_ablation;
use dgpo_lab::config::load_config;
use dgpo_lab::eval::eval_model;
use dgpo_lab::manifest::{allocate_run_dir, write_manifest, RunManifest};
use dgpo_lab::output::{
    read_samples_csv, write_eval_artifacts, write_pretrain_artifacts, write_train_artifacts,
    CHECKPOINT_NAME, SAMPLES_NAME, SCATTER_NAME,
};
use dgpo_lab::posttrain::post_train;
use dgpo_lab::pretrain::pretrain;
use dgpo_lab::task::ModeTask;
use dgpo_lab::{LabError, LabResult};

#[derive(Parser)]
#[command(name = "dgpo", version, about = "Desk-scale lab for group-preference post-training")]
struct Cli {
    /// Experiment description (TOML); defaults apply when omitted.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output directory (for `plot`: an existing run directory).
    #[arg(long, global = true, value_name = "DIR", default_value = "runs")]
    out: PathBuf,
    /// Overrides the pretrain and train seeds from the config.
    #[arg(long, global = true, value_name = "U64")]
    seed: Option<u64>,
    /// Suppress progress output.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Pretrain the flow-matching generator on the mixture task.
    Pretrain,
    /// Post-train a pretrained checkpoint with the configured algorithm.
    Posttrain,
    /// Evaluate a checkpoint under the fixed protocol.
    Eval,
    /// Run the configured ablation grid from one shared checkpoint.
    Ablate,
    /// Re-render the scatter plot from a run directory's sample table.
    Plot,
}

fn main() {
    let cli = Cli::parse();
    let code = match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    };
    std::process::exit(code);
}

fn run(cli: &Cli) -> LabResult<()> {
    let mut cfg = load_config(cli.config.as_deref())?;
    if let Some(seed) = cli.seed {
        cfg.pretrain.seed = seed;
        cfg.train.seed = seed;
    }
    let task = ModeTask::new(&cfg.task);

    match cli.command {
        Command::Pretrain => {
            let dir = allocate_run_dir(&cli.out)?;
            write_manifest(&dir, &RunManifest::new("pretrain", cfg.pretrain.seed, &cfg)?)?;
            let out = pretrain(&cfg, cli.quiet)?;
            write_pretrain_artifacts(&dir, &out.params, &out.metrics, &out.final_eval, &task.centers)?;
            if !cli.quiet {
                println!(
                    "pretrain: final W2 {:.4} -> {}",
                    out.final_eval.sliced_w2,
                    dir.join(CHECKPOINT_NAME).display()
                );
            }
            if out.diverged {
                return Err(LabError::runtime(format!(
                    "pretraining diverged; last good state kept in {}",
                    dir.join(CHECKPOINT_NAME).display()
                )));
            }
            Ok(())
        }
        Command::Posttrain => {
            let (theta_init, _) = load_checkpoint::<f64>(&cfg.train.init_checkpoint)?;
            let dir = allocate_run_dir(&cli.out)?;
            write_manifest(&dir, &RunManifest::new("posttrain", cfg.train.seed, &cfg)?)?;
            let out = post_train(&cfg, &theta_init, cli.quiet)?;
            write_train_artifacts(&dir, &out, &task.centers)?;
            if !cli.quiet {
                println!(
                    "posttrain [{}]: final reward {:.4}, final W2 {:.4} -> {}",
                    cfg.train.algorithm.name(),
                    out.final_eval.mean_reward,
                    out.final_eval.sliced_w2,
                    dir.display()
                );
            }
            Ok(())
        }
        Command::Eval => {
            let (params, _) = load_checkpoint::<f64>(&cfg.train.init_checkpoint)?;
            let holdout = task.holdout(cfg.task.holdout, cfg.task.data_seed);
            let reward = cfg.reward.build(task.modes())?;
            let outcome =
                eval_model(&params, &cfg.schedule(), &reward, &task, &holdout, &cfg.eval)?;
            let dir = allocate_run_dir(&cli.out)?;
            write_manifest(&dir, &RunManifest::new("eval", cfg.train.seed, &cfg)?)?;
            let table = format!(
                "# schema=1\nmean_reward,sliced_w2,samples\n{},{},{}\n",
                outcome.mean_reward,
                outcome.sliced_w2,
                outcome.samples.len()
            );
            let table_path = dir.join("eval.csv");
            std::fs::write(&table_path, table).map_err(|e| LabError::io(&table_path, e))?;
            write_eval_artifacts(&dir, &outcome, &task.centers)?;
            if !cli.quiet {
                println!(
                    "eval: mean reward {:.4}, sliced W2 {:.4} ({} samples) -> {}",
                    outcome.mean_reward,
                    outcome.sliced_w2,
                    outcome.samples.len(),
                    dir.display()
                );
            }
            Ok(())
        }
        Command::Ablate => {
            if cfg.ablate.variants.is_empty() {
                return Err(LabError::config("ablation grid has no variants"));
            }
            let (theta_init, _) = load_checkpoint::<f64>(&cfg.train.init_checkpoint)?;
            let dir = allocate_run_dir(&cli.out)?;
            write_manifest(&dir, &RunManifest::new("ablate", cfg.train.seed, &cfg)?)?;
            let report = run_ablation(&cfg, &theta_init, &dir, cli.quiet)?;
            print!("{}", report.summary);
            if report.any_failed {
                return Err(LabError::runtime("one or more ablation variants failed"));
            }
            Ok(())
        }
        Command::Plot => {
            let samples_path = cli.out.join(SAMPLES_NAME);
            let (samples, conds) = read_samples_csv(&samples_path)?;
            let svg_path = cli.out.join(SCATTER_NAME);
            dgpo_lab::svg::emit_scatter_svg(&samples, &conds, &task.centers, &svg_path)?;
            if !cli.quiet {
                println!("plot: {} points -> {}", samples.len(), svg_path.display());
            }
            Ok(())
        }
    }
}
