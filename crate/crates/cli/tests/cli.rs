//! End-to-end checks of the batch interface: exit codes, file layout,
//! byte-determinism, and the expand pipeline on a persisted run.

use std::path::{Path, PathBuf};
use std::process::Command;

fn modscat() -> Command {
    Command::new(env!("CARGO_BIN_EXE_modscat"))
}

fn temp_dir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("modscat-cli-{tag}-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn write(path: &Path, text: &str) {
    std::fs::write(path, text).unwrap();
}

const SMALL_RUN: &str = "\
engine = comoving
nonlinearity.lambdas = 1.0, 0.5
initial.epsilon = 0.08
initial.width = 1.0
grid.n = 1024
grid.half_width = 32
time.t_end = 600
time.dsigma = 0.002
";

#[test]
fn unknown_key_rejected_with_line_number_and_exit_2() {
    let dir = temp_dir("badkey");
    let cfg = dir.join("bad.cfg");
    write(&cfg, "nonlinearity.lambdas = 1.0\ngrid.size = 64\n");
    let out = modscat()
        .args(["simulate", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&dir)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 2"), "stderr: {err}");
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn unknown_suite_and_subcommand_exit_2() {
    let out = modscat()
        .args(["verify", "--suite", "nonsense"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let out = modscat().args(["frobnicate"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn simulate_expand_roundtrip_and_determinism() {
    let dir = temp_dir("roundtrip");
    let cfg = dir.join("run.cfg");
    write(&cfg, SMALL_RUN);

    let run = |out_dir: &Path| -> PathBuf {
        let out = modscat()
            .args(["simulate", "--config"])
            .arg(&cfg)
            .arg("--out")
            .arg(out_dir)
            .output()
            .unwrap();
        assert!(
            out.status.success(),
            "simulate failed: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        PathBuf::from(String::from_utf8(out.stdout).unwrap().trim())
    };

    let run_dir = run(&dir.join("a"));
    assert!(run_dir.join("summary.json").is_file());
    assert!(run_dir.join("results/series.csv").is_file());
    assert!(run_dir.join("results/bootstrap.csv").is_file());
    let snapshots: Vec<_> = std::fs::read_dir(run_dir.join("snapshots"))
        .unwrap()
        .collect();
    assert!(snapshots.len() >= 8, "only {} snapshots", snapshots.len());

    // Field CSV row count matches the grid (plus header).
    let field = std::fs::read_to_string(run_dir.join("results/fhat_final.csv")).unwrap();
    assert_eq!(field.lines().count(), 1024 + 1);

    // Identical config, second tree: byte-identical data files.
    let run_dir_b = run(&dir.join("b"));
    for rel in [
        "summary.json",
        "results/series.csv",
        "results/fhat_final.csv",
    ] {
        let a = std::fs::read(run_dir.join(rel)).unwrap();
        let b = std::fs::read(run_dir_b.join(rel)).unwrap();
        assert_eq!(a, b, "{rel} differs between identical runs");
    }

    // Expansion pipeline over the persisted snapshots.
    let out = modscat()
        .args(["expand", "--run"])
        .arg(&run_dir)
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "expand failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(run_dir.join("summary_expansion.json").is_file());
    assert!(run_dir.join("results/expansion/w11_closed.csv").is_file());
    let summary: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(run_dir.join("summary_expansion.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(summary["converged"], serde_json::Value::Bool(true));

    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn oracle_emits_comparison_table() {
    let dir = temp_dir("oracle");
    let cfg = dir.join("oracle.cfg");
    write(
        &cfg,
        "oracle.t_list = 5, 10, 20\noracle.xi_samples = 0.0, 0.4\ngrid.n = 2048\ngrid.half_width = 64\noracle.width = 0.75\n",
    );
    let out = modscat()
        .args(["oracle", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&dir)
        .arg("--gnuplot-script")
        .output()
        .unwrap();
    // 3 t-values is below the remainder-rate minimum: clean runtime error.
    assert_eq!(out.status.code(), Some(3));

    write(
        &cfg,
        "oracle.t_list = 5, 10, 20, 40\noracle.xi_samples = 0.0, 0.4\ngrid.n = 2048\ngrid.half_width = 64\noracle.width = 0.75\n",
    );
    let out = modscat()
        .args(["oracle", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&dir)
        .arg("--gnuplot-script")
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "oracle failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let run_dir = PathBuf::from(String::from_utf8(out.stdout).unwrap().trim());
    let table = std::fs::read_to_string(run_dir.join("results/oracle.csv")).unwrap();
    assert_eq!(table.lines().count(), 1 + 4 * 2);
    assert!(table.starts_with("t,xi,re,im,residual_order0,residual_order1"));
    assert!(run_dir.join("results/plot.gp").is_file());

    // t beyond the node cap: clean error, exit 3.
    write(
        &cfg,
        "oracle.t_list = 50, 100, 200, 400\noracle.xi_samples = 0.0\ngrid.n = 2048\ngrid.half_width = 64\noracle.eta_node_cap = 2048\n",
    );
    let out = modscat()
        .args(["oracle", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&dir)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("smaller t"), "stderr: {err}");
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn shipped_presets_parse_cleanly() {
    let presets = Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../presets")
        .canonicalize()
        .unwrap();
    let mut seen = 0;
    for entry in std::fs::read_dir(&presets).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_none_or(|e| e != "cfg") {
            continue;
        }
        seen += 1;
        let is_oracle = path.file_stem().is_some_and(|s| s == "oracle");
        // Every preset must pass the strict schema and the validation layer
        // for its subcommand; the binary is the parser of record.
        let which = if is_oracle { "oracle" } else { "simulate" };
        let probe = modscat()
            .args([which, "--config"])
            .arg(&path)
            .arg("--check")
            .output()
            .unwrap();
        assert!(
            probe.status.success(),
            "{} rejected: {}",
            path.display(),
            String::from_utf8_lossy(&probe.stderr)
        );
    }
    assert!(seen >= 8, "expected the preset set, found {seen}");
}

#[test]
fn tabulated_initial_data_runs() {
    let dir = temp_dir("tabulated");
    // Build the f1 table on the exact run grid.
    let n = 1024usize;
    let half = 32.0;
    let dx = 2.0 * half / n as f64;
    let mut table = String::from("x,re,im\n");
    for j in 0..n {
        let x = -half + j as f64 * dx;
        table.push_str(&format!(
            "{x:.17e},{:.17e},0.0\n",
            0.08 * (-x * x / 2.0).exp()
        ));
    }
    let data = dir.join("f1.csv");
    write(&data, &table);
    let cfg = dir.join("run.cfg");
    write(
        &cfg,
        &format!(
            "engine = comoving\nnonlinearity.lambdas = 1.0\ninitial.family = tabulated\ninitial.path = {}\ngrid.n = 1024\ngrid.half_width = 32\ntime.t_end = 4\ntime.dsigma = 0.002\n",
            data.display()
        ),
    );
    let out = modscat()
        .args(["simulate", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&dir)
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "tabulated run failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    std::fs::remove_dir_all(&dir).ok();
}
