//! End-to-end subprocess tests for the CLI: artifact layout, exit codes,
//! determinism, and the synth/solve/check/eval/bench chain.

use std::path::Path;
use std::process::{Command, Output};

use tempfile::tempdir;

fn irpca(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_irpca"))
        .args(args)
        .output()
        .expect("failed to spawn irpca")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Generate a small well-behaved instance for the solve/check/eval chain.
fn small_synth(dir: &Path, seed: &str) -> Output {
    irpca(&[
        "synth",
        "--out",
        path_str(dir),
        "--n1",
        "120",
        "--n2",
        "120",
        "--d1",
        "6",
        "--d2",
        "6",
        "--rank",
        "2",
        "--z",
        "1",
        "--seed",
        seed,
    ])
}

#[test]
fn synth_default_spec_mirrors_experiment_setup() {
    let dir = tempdir().unwrap();
    let out = irpca(&["synth", "--out", path_str(dir.path()), "--seed", "3"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("manifest.json")).unwrap())
            .unwrap();
    assert_eq!(manifest["spec"]["n1"], 1000);
    assert_eq!(manifest["spec"]["n2"], 1000);
    assert_eq!(manifest["spec"]["seed"], 3);
    for file in [
        "m.bin", "f1.bin", "f2.bin", "w_star.bin", "l_star.bin", "s_star.bin", "n_star.bin",
    ] {
        assert!(dir.path().join(file).exists(), "missing {file}");
    }
}

#[test]
fn synth_zero_corruption_writes_zero_sparse_matrix() {
    let dir = tempdir().unwrap();
    let out = irpca(&[
        "synth",
        "--out",
        path_str(dir.path()),
        "--n1",
        "50",
        "--n2",
        "50",
        "--d1",
        "4",
        "--d2",
        "4",
        "--rank",
        "2",
        "--z",
        "0",
        "--seed",
        "1",
    ]);
    assert!(out.status.success());
    let s = irpca::io::read_matrix_bin(&dir.path().join("s_star.bin")).unwrap();
    assert!(s.entries().iter().all(|&x| x == 0.0));
}

#[test]
fn synth_is_bitwise_deterministic_per_seed() {
    let dir_a = tempdir().unwrap();
    let dir_b = tempdir().unwrap();
    assert!(small_synth(dir_a.path(), "11").status.success());
    assert!(small_synth(dir_b.path(), "11").status.success());
    for file in ["m.bin", "f1.bin", "w_star.bin", "s_star.bin"] {
        let a = std::fs::read(dir_a.path().join(file)).unwrap();
        let b = std::fs::read(dir_b.path().join(file)).unwrap();
        assert_eq!(a, b, "{file} differs between identical runs");
    }
    let dir_c = tempdir().unwrap();
    assert!(small_synth(dir_c.path(), "12").status.success());
    let a = std::fs::read(dir_a.path().join("m.bin")).unwrap();
    let c = std::fs::read(dir_c.path().join("m.bin")).unwrap();
    assert_ne!(a, c, "different seeds must give different data");
}

#[test]
fn solve_chain_on_synth_output() {
    let inst = tempdir().unwrap();
    let solve = tempdir().unwrap();
    assert!(small_synth(inst.path(), "7").status.success());
    let out = irpca(&[
        "solve",
        "--m",
        path_str(&inst.path().join("m.bin")),
        "--f1",
        path_str(&inst.path().join("f1.bin")),
        "--f2",
        path_str(&inst.path().join("f2.bin")),
        "--rank",
        "2",
        "--cw",
        "1.0",
        "--truth-l",
        path_str(&inst.path().join("l_star.bin")),
        "--truth-s",
        path_str(&inst.path().join("s_star.bin")),
        "--out",
        path_str(solve.path()),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));

    let doc = irpca::io::read_result_json(&solve.path().join("result.json")).unwrap();
    assert!(doc.converged);
    assert_eq!(doc.mode, "inductive");
    assert!(doc.trace_summary.final_residual <= 1e-3);
    assert!(doc.metrics.is_some());
    assert!(doc.assumptions.is_some());

    // Trace CSV has a header plus one line per iteration.
    let trace = std::fs::read_to_string(solve.path().join("trace.csv")).unwrap();
    assert_eq!(trace.lines().count(), doc.iterations_run + 1);

    // eval recomputes the same metrics from the saved artifacts.
    let out = irpca(&[
        "eval",
        "--result",
        path_str(&solve.path().join("result.json")),
        "--solve-dir",
        path_str(solve.path()),
        "--truth-dir",
        path_str(inst.path()),
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert!(
        stdout(&out).contains("recomputed metrics match embedded metrics: true"),
        "{}",
        stdout(&out)
    );
}

#[test]
fn solve_transductive_mode_is_recorded() {
    let inst = tempdir().unwrap();
    let solve = tempdir().unwrap();
    assert!(small_synth(inst.path(), "9").status.success());
    let out = irpca(&[
        "solve",
        "--m",
        path_str(&inst.path().join("m.bin")),
        "--rank",
        "2",
        "--cw",
        "1.0",
        "--out",
        path_str(solve.path()),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let doc = irpca::io::read_result_json(&solve.path().join("result.json")).unwrap();
    assert_eq!(doc.mode, "transductive");
}

#[test]
fn solve_validates_rank_before_compute() {
    let inst = tempdir().unwrap();
    let solve = tempdir().unwrap();
    assert!(small_synth(inst.path(), "5").status.success());
    let out = irpca(&[
        "solve",
        "--m",
        path_str(&inst.path().join("m.bin")),
        "--f1",
        path_str(&inst.path().join("f1.bin")),
        "--f2",
        path_str(&inst.path().join("f2.bin")),
        "--rank",
        "7",
        "--out",
        path_str(solve.path()),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("rank"));
}

#[test]
fn solve_exhausted_budget_exits_2() {
    let inst = tempdir().unwrap();
    let solve = tempdir().unwrap();
    assert!(small_synth(inst.path(), "13").status.success());
    let out = irpca(&[
        "solve",
        "--m",
        path_str(&inst.path().join("m.bin")),
        "--f1",
        path_str(&inst.path().join("f1.bin")),
        "--f2",
        path_str(&inst.path().join("f2.bin")),
        "--rank",
        "2",
        "--cw",
        "1.0",
        "--stop",
        "residual",
        "--residual-tol",
        "1e-12",
        "--max-iters",
        "1",
        "--out",
        path_str(solve.path()),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn usage_errors_exit_1() {
    let out = irpca(&["solve", "--no-such-flag"]);
    assert_eq!(out.status.code(), Some(1));
    let out = irpca(&["--help"]);
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn check_reports_verdicts() {
    // A generously dimensioned instance that satisfies every assumption.
    let inst = tempdir().unwrap();
    let out = irpca(&[
        "synth",
        "--out",
        path_str(inst.path()),
        "--n1",
        "1200",
        "--n2",
        "1200",
        "--d1",
        "2",
        "--d2",
        "2",
        "--rank",
        "2",
        "--z",
        "0.4",
        "--seed",
        "5",
    ]);
    assert!(out.status.success());
    let out = irpca(&[
        "check",
        "--dir",
        path_str(inst.path()),
        "--rank",
        "2",
        "--cw",
        "1.0",
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout(&out).contains("overall_ok: true"), "{}", stdout(&out));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(inst.path().join("report.json")).unwrap())
            .unwrap();
    assert_eq!(report["overall_ok"], true);

    // Corrupt the low-rank file with something outside the feature span.
    let bogus = irpca::Matrix::from_fn(1200, 1200, |i, j| ((i * 31 + j) % 7) as f64 * 0.1);
    irpca::io::write_matrix_bin(&bogus, &inst.path().join("l_star.bin")).unwrap();
    let out = irpca(&[
        "check",
        "--dir",
        path_str(inst.path()),
        "--rank",
        "2",
        "--cw",
        "1.0",
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout(&out).contains("overall_ok: false"));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(inst.path().join("report.json")).unwrap())
            .unwrap();
    assert!(report["feasibility_residual"].as_f64().unwrap() > 1e-8);
}

#[test]
fn check_flags_oversparse_instances() {
    let inst = tempdir().unwrap();
    assert!(small_synth(inst.path(), "21").status.success());
    // One fully corrupted column blows the per-column budget.
    let mut s = irpca::io::read_matrix_bin(&inst.path().join("s_star.bin")).unwrap();
    let l = irpca::io::read_matrix_bin(&inst.path().join("l_star.bin")).unwrap();
    for i in 0..s.rows() {
        s.set(i, 0, 0.5);
    }
    irpca::io::write_matrix_bin(&s, &inst.path().join("s_star.bin")).unwrap();
    irpca::io::write_matrix_bin(&l.add(&s), &inst.path().join("m.bin")).unwrap();
    let out = irpca(&[
        "check",
        "--dir",
        path_str(inst.path()),
        "--rank",
        "2",
        "--cw",
        "1.0",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(inst.path().join("report.json")).unwrap())
            .unwrap();
    assert_eq!(report["sparsity_ok"], false);
    assert_eq!(report["z2_observed"], 120);
}

#[test]
fn eval_rejects_mismatched_dims() {
    let inst = tempdir().unwrap();
    let solve = tempdir().unwrap();
    let other = tempdir().unwrap();
    assert!(small_synth(inst.path(), "31").status.success());
    let out = irpca(&[
        "solve",
        "--m",
        path_str(&inst.path().join("m.bin")),
        "--f1",
        path_str(&inst.path().join("f1.bin")),
        "--f2",
        path_str(&inst.path().join("f2.bin")),
        "--rank",
        "2",
        "--out",
        path_str(solve.path()),
    ]);
    assert_eq!(out.status.code(), Some(0));
    // A truth directory with different dimensions.
    let out = irpca(&[
        "synth",
        "--out",
        path_str(other.path()),
        "--n1",
        "60",
        "--n2",
        "60",
        "--d1",
        "4",
        "--d2",
        "4",
        "--rank",
        "2",
        "--z",
        "1",
        "--seed",
        "32",
    ]);
    assert!(out.status.success());
    let out = irpca(&[
        "eval",
        "--result",
        path_str(&solve.path().join("result.json")),
        "--solve-dir",
        path_str(solve.path()),
        "--truth-dir",
        path_str(other.path()),
    ]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn bench_grid_shape_and_determinism() {
    let dir = tempdir().unwrap();
    let out = irpca(&[
        "bench",
        "--axis",
        "kappa",
        "--values",
        "1,2,5",
        "--seeds",
        "2",
        "--n",
        "80",
        "--d",
        "4",
        "--rank",
        "2",
        "--z",
        "1",
        "--out",
        path_str(dir.path()),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let agg = std::fs::read_to_string(dir.path().join("bench.csv")).unwrap();
    assert_eq!(agg.lines().count(), 4, "header + one row per kappa value");
    let runs = std::fs::read_to_string(dir.path().join("bench_runs.csv")).unwrap();
    assert_eq!(runs.lines().count(), 7, "header + 3 cells x 2 seeds");
    assert!(dir.path().join("bench_manifest.json").exists());

    // Parallel workers produce the same numbers (timing columns aside).
    let dir2 = tempdir().unwrap();
    let out = irpca(&[
        "bench",
        "--axis",
        "kappa",
        "--values",
        "1,2,5",
        "--seeds",
        "2",
        "--n",
        "80",
        "--d",
        "4",
        "--rank",
        "2",
        "--z",
        "1",
        "--threads",
        "3",
        "--out",
        path_str(dir2.path()),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let runs2 = std::fs::read_to_string(dir2.path().join("bench_runs.csv")).unwrap();
    let strip_timing = |text: &str| -> Vec<String> {
        text.lines()
            .map(|line| {
                line.split(',')
                    .enumerate()
                    .filter(|(i, _)| *i != 4) // wall_time_s column
                    .map(|(_, f)| f.to_string())
                    .collect::<Vec<_>>()
                    .join(",")
            })
            .collect()
    };
    assert_eq!(strip_timing(&runs), strip_timing(&runs2));
}

#[test]
fn bench_single_point_and_empty_grid() {
    let dir = tempdir().unwrap();
    let out = irpca(&[
        "bench",
        "--axis",
        "z",
        "--values",
        "2",
        "--seeds",
        "1",
        "--n",
        "60",
        "--d",
        "3",
        "--rank",
        "2",
        "--out",
        path_str(dir.path()),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let agg = std::fs::read_to_string(dir.path().join("bench.csv")).unwrap();
    assert_eq!(agg.lines().count(), 2, "header + single data row");

    let out = irpca(&[
        "bench",
        "--axis",
        "z",
        "--values",
        "",
        "--out",
        path_str(dir.path()),
    ]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn solve_accepts_config_file_with_flag_overrides() {
    let inst = tempdir().unwrap();
    let solve = tempdir().unwrap();
    assert!(small_synth(inst.path(), "41").status.success());
    let cfg_path = inst.path().join("solver.json");
    std::fs::write(
        &cfg_path,
        r#"{"rank": 1, "c_w": 1.0, "max_iters": 50, "epsilon": 1e-6, "stop_rule": "residual", "residual_tol": 1e-3}"#,
    )
    .unwrap();
    let out = irpca(&[
        "solve",
        "--m",
        path_str(&inst.path().join("m.bin")),
        "--f1",
        path_str(&inst.path().join("f1.bin")),
        "--f2",
        path_str(&inst.path().join("f2.bin")),
        "--config",
        path_str(&cfg_path),
        "--rank",
        "2",
        "--out",
        path_str(solve.path()),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let doc = irpca::io::read_result_json(&solve.path().join("result.json")).unwrap();
    assert_eq!(doc.config.rank, 2, "flag must override the config file");
    assert_eq!(doc.config.max_iters, 50, "config file value must survive");
}
