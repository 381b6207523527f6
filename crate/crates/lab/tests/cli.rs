//! End-to-end driver tests over the compiled binary: exit codes, run
//! directory hygiene, reproducibility, and the manifest config echo.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use dgpo_core::checkpoint::save_checkpoint;
use dgpo_core::ModelParams;
use dgpo_lab::config::ModelConfig;

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_dgpo")
}

fn scratch(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("dgpo-cli-{tag}-{}", std::process::id()));
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn run(args: &[&str]) -> Output {
    Command::new(bin()).args(args).output().expect("binary runs")
}

fn stderr_of(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

/// Writes a small but complete experiment into `dir`: a starting
/// checkpoint plus a config that points at it.
fn write_tiny_experiment(dir: &Path, extra_train_lines: &str) -> PathBuf {
    let model = ModelConfig {
        hidden: vec![12],
        time_emb_dim: 4,
        cond_emb_dim: 4,
        ..ModelConfig::default()
    };
    let params = ModelParams::<f64>::init(model.arch(8), 77).unwrap();
    let ckpt = dir.join("start.json");
    save_checkpoint(&ckpt, &params, None).unwrap();

    let config = format!(
        r#"
[task]
holdout = 96

[model]
hidden = [12]
time_emb_dim = 4
cond_emb_dim = 4

[train]
iterations = 2
eval_every = 1
group_size = 4
groups_per_iter = 2
rollout_steps = 4
beta = 5.0
init_checkpoint = "{}"
{extra_train_lines}

[eval]
samples = 48
swd_projections = 8
"#,
        ckpt.display()
    );
    let path = dir.join("experiment.toml");
    fs::write(&path, config).unwrap();
    path
}

#[test]
fn posttrain_reruns_are_byte_identical_and_never_clobber() {
    let dir = scratch("repro");
    let cfg = write_tiny_experiment(&dir, "");
    let out_base = dir.join("run");
    let args = [
        "posttrain",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out_base.to_str().unwrap(),
        "--seed",
        "7",
        "--quiet",
    ];

    let first = run(&args);
    assert!(first.status.success(), "first run failed: {}", stderr_of(&first));
    let second = run(&args);
    assert!(second.status.success(), "second run failed: {}", stderr_of(&second));

    let rerun = dir.join("run-r2");
    assert!(out_base.join("manifest.json").is_file());
    assert!(rerun.join("manifest.json").is_file(), "second run must land in a fresh dir");

    let a = fs::read(out_base.join("metrics.csv")).unwrap();
    let b = fs::read(rerun.join("metrics.csv")).unwrap();
    assert_eq!(a, b, "metrics CSVs must be byte-identical across reruns");

    for file in ["metrics.csv", "timing.csv", "checkpoint.json", "samples.csv", "scatter.svg"] {
        assert!(out_base.join(file).is_file(), "missing {file}");
    }
    fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn the_manifest_config_echo_reproduces_the_identical_run() {
    let dir = scratch("echo");
    let cfg = write_tiny_experiment(&dir, "");
    let out_a = dir.join("a");
    let first = run(&[
        "posttrain",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out_a.to_str().unwrap(),
        "--seed",
        "9",
        "--quiet",
    ]);
    assert!(first.status.success(), "{}", stderr_of(&first));

    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_a.join("manifest.json")).unwrap()).unwrap();
    let echo = dir.join("echo.toml");
    fs::write(&echo, manifest["config_toml"].as_str().unwrap()).unwrap();

    // No --seed here: the echoed config already pins it.
    let out_b = dir.join("b");
    let second = run(&[
        "posttrain",
        "--config",
        echo.to_str().unwrap(),
        "--out",
        out_b.to_str().unwrap(),
        "--quiet",
    ]);
    assert!(second.status.success(), "{}", stderr_of(&second));

    let a = fs::read(out_a.join("metrics.csv")).unwrap();
    let b = fs::read(out_b.join("metrics.csv")).unwrap();
    assert_eq!(a, b, "the config echo must reproduce the run");
    fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn config_errors_exit_with_status_two_and_a_diagnostic() {
    let dir = scratch("config-errors");

    // Unknown field, with its location in the message.
    let typo = dir.join("typo.toml");
    fs::write(&typo, "[train]\ngruop_size = 8\n").unwrap();
    let out = run(&["posttrain", "--config", typo.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = stderr_of(&out);
    assert!(err.contains("gruop_size") && err.contains("line"), "got: {err}");

    // Legal TOML, illegal value.
    let bad = dir.join("bad.toml");
    fs::write(&bad, "[train]\nt_min = 1.5\n").unwrap();
    let out = run(&["posttrain", "--config", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr_of(&out).contains("t_min"), "got: {}", stderr_of(&out));

    // The documented algorithm/sampler conflict.
    let cfg = write_tiny_experiment(&dir, "algorithm = \"grpo\"");
    let out = run(&["posttrain", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr_of(&out).contains("stochastic policy"), "got: {}", stderr_of(&out));

    // Usage errors share the config exit status.
    let out = run(&["frobnicate"]);
    assert_eq!(out.status.code(), Some(2));
    fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn an_empty_ablation_grid_reports_no_variants() {
    let dir = scratch("empty-grid");
    let cfg = write_tiny_experiment(&dir, "");
    let out = run(&[
        "ablate",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.join("abl").to_str().unwrap(),
        "--quiet",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr_of(&out).contains("no variants"), "got: {}", stderr_of(&out));
    fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn a_missing_checkpoint_is_a_runtime_failure() {
    let dir = scratch("missing-ckpt");
    let cfg = dir.join("experiment.toml");
    fs::write(
        &cfg,
        "[train]\niterations = 2\ninit_checkpoint = \"/nonexistent/start.json\"\n",
    )
    .unwrap();
    let out = run(&[
        "posttrain",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.join("run").to_str().unwrap(),
        "--quiet",
    ]);
    assert_eq!(out.status.code(), Some(3), "stderr: {}", stderr_of(&out));
    fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn ablate_runs_a_small_grid_and_combines_the_tables() {
    let dir = scratch("grid");
    let cfg = write_tiny_experiment(&dir, "");
    let grid = format!(
        "{}\n[[ablate.variants]]\nname = \"group\"\n\n[[ablate.variants]]\nname = \"pairwise\"\nalgorithm = \"dpo\"\n",
        fs::read_to_string(&cfg).unwrap()
    );
    fs::write(&cfg, grid).unwrap();

    let abl = dir.join("abl");
    let out = run(&[
        "ablate",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        abl.to_str().unwrap(),
        "--seed",
        "3",
        "--quiet",
    ]);
    assert!(out.status.success(), "{}", stderr_of(&out));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("variant group"), "summary missing: {stdout}");

    let combined = fs::read_to_string(abl.join("combined.csv")).unwrap();
    assert!(combined.starts_with("# schema=1\nvariant,iteration,mean_reward,sliced_w2\n"));
    for variant in ["group", "pairwise"] {
        for iteration in 0..=2 {
            assert!(
                combined.contains(&format!("\n{variant},{iteration},")),
                "combined.csv missing {variant} at {iteration}"
            );
        }
        assert!(abl.join(variant).join("metrics.csv").is_file());
    }
    assert!(abl.join("summary.txt").is_file());
    fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn eval_writes_a_record_and_plot_rerenders_the_scatter() {
    let dir = scratch("eval-plot");
    let cfg = write_tiny_experiment(&dir, "");

    let eval_dir = dir.join("evalrun");
    let out = run(&[
        "eval",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        eval_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr_of(&out));
    assert!(String::from_utf8_lossy(&out.stdout).contains("mean reward"));
    let table = fs::read_to_string(eval_dir.join("eval.csv")).unwrap();
    assert!(table.starts_with("# schema=1\nmean_reward,sliced_w2,samples\n"));

    fs::remove_file(eval_dir.join("scatter.svg")).unwrap();
    let out = run(&[
        "plot",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        eval_dir.to_str().unwrap(),
        "--quiet",
    ]);
    assert!(out.status.success(), "{}", stderr_of(&out));
    assert!(eval_dir.join("scatter.svg").is_file(), "plot must recreate the SVG");

    // Plot over a directory without a sample table is a runtime failure.
    let out = run(&["plot", "--config", cfg.to_str().unwrap(), "--out", dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
    fs::remove_dir_all(&dir).unwrap();
}
