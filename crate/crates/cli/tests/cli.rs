use std::path::Path;
use std::process::{Command, Output};

use terdagger::io::{parse_metrics, parse_samples, read_text, RunConfig};

fn run(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_terdagger"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn text(o: &Output) -> String {
    format!("{}{}", String::from_utf8_lossy(&o.stdout), String::from_utf8_lossy(&o.stderr))
}

#[test]
fn no_arguments_prints_usage_and_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&[], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(text(&o).contains("Usage"));
}

#[test]
fn every_subcommand_documents_its_flags() {
    let dir = tempfile::tempdir().unwrap();
    for sub in ["edit", "gen-residuals", "calibrate", "detect-eval", "simulate", "benchmark"] {
        let o = run(&[sub, "--help"], dir.path());
        assert_eq!(o.status.code(), Some(0), "{sub}");
        let t = text(&o);
        assert!(t.contains("Usage"), "{sub}");
        // calibrate takes only positional files
        if sub != "calibrate" {
            assert!(t.contains("default"), "{sub} help lists no defaults");
        }
    }
    let t = text(&run(&["edit", "--help"], dir.path()));
    for flag in ["--n-points", "--lambda-s", "--lambda-e", "--lambda-q", "--soft-endpoint"] {
        assert!(t.contains(flag), "{flag}");
    }
}

#[test]
fn usage_errors_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(&["frobnicate"], dir.path()).status.code(), Some(1));
    assert_eq!(run(&["edit", "--base", "a"], dir.path()).status.code(), Some(1));
    assert_eq!(run(&["simulate", "--mode", "fast"], dir.path()).status.code(), Some(1));
    assert_eq!(run(&["simulate", "--bias", "1,2"], dir.path()).status.code(), Some(1));
}

#[test]
fn simulate_edit_gen_residuals_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let o = run(&["simulate", "--seed", "3", "--bias", "0.004", "--mode", "ter", "--out", "sim"], d);
    assert_eq!(o.status.code(), Some(0), "{}", text(&o));
    assert!(text(&o).contains("outcome=success"));
    for f in ["config.toml", "episode.log", "episode.log.events", "base.traj", "demo.traj", "corrected.traj"] {
        assert!(d.join("sim").join(f).exists(), "{f}");
    }
    let cfg = RunConfig::from_toml(&read_text(&d.join("sim/config.toml")).unwrap()).unwrap();
    assert_eq!(cfg.seed, 3);
    assert_eq!(cfg.policy.belief_bias, [0.0, 0.004, 0.0]);

    let o = run(
        &["edit", "--base", "sim/base.traj", "--demo", "sim/demo.traj", "--out", "corrected.traj", "--meta", "edit.meta"],
        d,
    );
    assert_eq!(o.status.code(), Some(0), "{}", text(&o));
    assert!(text(&o).contains("k_star="));

    let o = run(
        &[
            "gen-residuals",
            "--base",
            "sim/base.traj",
            "--corrected",
            "corrected.traj",
            "--demo",
            "sim/demo.traj",
            "--meta",
            "edit.meta",
            "--regions",
            "transition,demo,post",
            "--out",
            "samples.csv",
        ],
        d,
    );
    assert_eq!(o.status.code(), Some(0), "{}", text(&o));
    let samples = parse_samples(&read_text(&d.join("samples.csv")).unwrap()).unwrap();
    assert!(!samples.is_empty());
    assert!(text(&o).contains("pre=0"));
}

#[test]
fn malformed_trajectory_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(
        d.join("bad.traj"),
        "# trajectory dt=0.02 fields=t,px,py,pz,qw,qx,qy,qz\n0,0,0,0,1,0,0,0\n0.02,0,zz,0,1,0,0,0\n",
    )
    .unwrap();
    let o = run(&["edit", "--base", "bad.traj", "--demo", "bad.traj", "--out", "c.traj"], d);
    assert_eq!(o.status.code(), Some(2));
    let t = text(&o);
    assert!(t.contains("line 3") && t.contains("py"), "{t}");
    let o = run(&["edit", "--base", "missing.traj", "--demo", "bad.traj", "--out", "c.traj"], d);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn calibrate_and_evaluate_score_files() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("a.txt"), "# scores label=failed\n1\n14\n3\n").unwrap();
    std::fs::write(d.join("b.txt"), "# scores label=success\n2\n9\n").unwrap();
    std::fs::write(d.join("c.txt"), "# scores label=success\n2\n20\n").unwrap();
    let o = run(&["calibrate", "a.txt", "b.txt", "c.txt"], d);
    assert_eq!(o.status.code(), Some(0), "{}", text(&o));
    let t = text(&o);
    assert!(t.contains("threshold_c=1.15e1"), "{t}");
    assert!(t.contains("recall=1"), "{t}");
    let o = run(&["detect-eval", "--threshold", "11.5", "a.txt", "b.txt", "c.txt"], d);
    assert!(text(&o).contains("precision=0.5 recall=1"), "{}", text(&o));
    let o = run(&["calibrate", "b.txt"], d);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn benchmark_writes_table_and_config() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("run.toml"), "[benchmark]\neval_episodes = 2\ndetector_episodes = 4\n").unwrap();
    let args = [
        "benchmark", "--config", "run.toml", "--episodes", "2", "--n-grid", "20", "--region-grid", "pre;all", "--out",
        "bench",
    ];
    let o = run(&args, d);
    assert_eq!(o.status.code(), Some(0), "{}", text(&o));
    let table = read_text(&d.join("bench/metrics.csv")).unwrap();
    let rows = parse_metrics(&table).unwrap();
    assert_eq!(rows.len(), 3);
    assert_eq!(rows[0].label, "n=20");
    let cfg = RunConfig::from_toml(&read_text(&d.join("bench/config.toml")).unwrap()).unwrap();
    assert_eq!(cfg.benchmark.episodes, 2);
    assert_eq!(cfg.benchmark.eval_episodes, 2);
    run(&args, d);
    assert_eq!(read_text(&d.join("bench/metrics.csv")).unwrap(), table);
}

#[test]
fn unknown_config_key_is_named() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("run.toml"), "[scene]\nsocket_colour = 3\n").unwrap();
    let o = run(&["simulate", "--config", "run.toml"], d);
    assert_eq!(o.status.code(), Some(2));
    assert!(text(&o).contains("socket_colour"), "{}", text(&o));
}
