//! Smoke tests of the `digrad` binary: verbs, exit codes, artifacts.

use std::path::Path;
use std::process::{Command, Output};

fn digrad(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_digrad"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

const TINY: &str = "\
env mini-4link
algorithm digrad-single-heuristic
settings digrad-single-heuristic ddpg
hidden 8 6
episodes 2
steps_per_episode 12
batch_size 8
buffer_capacity 500
eval_every 1
eval_episodes 2
seeds 1
outdir out
";

#[test]
fn train_eval_matrix_plots_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("run.cfg"), TINY).unwrap();

    let out = digrad(&["train", "run.cfg"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let ckpt = dir.path().join("out/digrad-single-heuristic_1_2.ckpt");
    assert!(ckpt.exists());
    assert!(dir.path().join("out/digrad-single-heuristic_1_train.csv").exists());

    let out = digrad(
        &["eval", "out/digrad-single-heuristic_1_2.ckpt", "mini-4link", "--episodes", "3"],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("success rate"), "{stdout}");

    // Plots before matrix: no aggregates yet, nonzero exit with diagnostic.
    let out = digrad(&["plots", "out"], dir.path());
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("agg_"));

    let out = digrad(&["matrix", "run.cfg"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("out/agg_digrad-single-heuristic.csv").exists());
    assert!(dir.path().join("out/agg_ddpg.csv").exists());

    let out = digrad(&["plots", "out"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let panel = std::fs::read_to_string(dir.path().join("out/plot_avg_reward.csv")).unwrap();
    let header = panel.lines().next().unwrap();
    assert_eq!(header.split(',').count(), 1 + 2 * 2);
    assert!(dir.path().join("out/plot_score_task0.csv").exists());
    assert!(dir.path().join("out/plot_score_task1.csv").exists());
}

#[test]
fn bad_config_key_fails_with_diagnostic() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.cfg"), "episodes 2\nfrobnicate yes\n").unwrap();
    let out = digrad(&["train", "bad.cfg"], dir.path());
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("frobnicate"));
}

#[test]
fn eval_unknown_env_fails() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("x.ckpt"), "{}").unwrap();
    let out = digrad(&["eval", "x.ckpt", "not-an-env"], dir.path());
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("not-an-env"));
}

#[test]
fn digrad_out_env_var_overrides_output_root() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("run.cfg"), TINY.replace("episodes 2", "episodes 1")).unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_digrad"))
        .args(["train", "run.cfg"])
        .current_dir(dir.path())
        .env("DIGRAD_OUT", dir.path().join("redirected"))
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("redirected/out").exists());
    assert!(!dir.path().join("out").exists());
}
