use std::path::Path;
use std::process::{Command, Output};

fn esfem(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_esfem"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("spawn esfem")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

#[test]
fn mesh_info_reports_invariants() {
    let dir = tempfile::tempdir().unwrap();
    let o = esfem(&["mesh-info", "--level", "4", "--t", "0.25", "--out", "m"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.lines().any(|l| l.split_whitespace().collect::<Vec<_>>() == ["euler", "2"]));
    assert!(text.contains("vertices     98"));
    let off = std::fs::read_to_string(dir.path().join("m/mesh.off")).unwrap();
    assert!(off.starts_with("OFF\n98 192 288\n"));
    assert!(dir.path().join("m/run_config.txt").exists());
}

#[test]
fn harmonic_initial_value_decays() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["state-solve", "--level", "5", "--N", "100", "--flow", "static", "--init", "harmonic-z"];
    let o = esfem(&args, dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = dir.path().join("esfem-out");
    let rows = csv_rows(&out.join("norms.csv"));
    assert_eq!(rows.len(), 101);
    let n0: f64 = rows[0][2].parse().unwrap();
    for r in &rows {
        let t: f64 = r[1].parse().unwrap();
        let norm: f64 = r[2].parse().unwrap();
        let expected = (-2.0 * t).exp() * n0;
        assert!((norm - expected).abs() <= 0.05 * expected, "t = {t}: {norm} vs {expected}");
    }
    assert_eq!(std::fs::read_dir(out.join("snapshots")).unwrap().count(), 101);
    // stdout is the table alone
    assert!(stdout(&o).lines().next().unwrap().trim_start().starts_with("slab"));
    assert!(!stdout(&o).contains("state-solve:"));
    assert!(stderr(&o).contains("state-solve:"));
}

#[test]
fn zero_data_gives_zero_state() {
    let dir = tempfile::tempdir().unwrap();
    let o = esfem(&["state-solve", "--level", "2", "--N", "5", "--init", "zero", "--f", "zero"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let rows = csv_rows(&dir.path().join("esfem-out/state.csv"));
    assert_eq!(rows.len(), 5 * 26);
    assert!(rows.iter().all(|r| r[2].parse::<f64>().unwrap() == 0.0));
}

#[test]
fn initial_values_from_file() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("y0.txt"), vec!["2.5"; 26].join("\n")).unwrap();
    let args = [
        "state-solve", "--level", "2", "--N", "4", "--flow", "static", "--init", "file", "--init-file", "y0.txt",
    ];
    let o = esfem(&args, dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    // constants are steady states on the static sphere
    let rows = csv_rows(&dir.path().join("esfem-out/state.csv"));
    assert!(rows.iter().all(|r| (r[2].parse::<f64>().unwrap() - 2.5).abs() < 1e-12));
    std::fs::write(dir.path().join("short.txt"), "1 2 3").unwrap();
    let o = esfem(&["state-solve", "--level", "2", "--init", "file", "--init-file", "short.txt"], dir.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn missing_level_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = esfem(&["state-solve", "--N", "10"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("Usage"));
    assert!(stdout(&o).is_empty());
    assert!(!dir.path().join("esfem-out").exists());
}

#[test]
fn invalid_settings_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        &["solve", "pd", "--level", "2", "--alpha", "0"][..],
        &["solve", "pd", "--level", "2", "--lo", "1", "--hi", "0"],
        &["solve", "pd", "--level", "2", "--example", "2"],
        &["solve", "pd", "--level", "2", "--theta", "0.5"],
        &["convergence", "--example", "1", "--levels", "5..2"],
        &["convergence", "--example", "3", "--levels", "0..1"],
        &["convergence", "--example", "2", "--levels", "0..1", "--lo", "0"],
        &["mesh-info", "--level", "2", "--alpha", "1"],
        &["mesh-info", "--level", "2", "--t", "2"],
        &["state-solve", "--level", "two"],
        &["state-solve", "--level", "2", "--flow", "static", "--flow-exponent", "2"],
        &["frobnicate"],
    ] {
        let o = esfem(args, dir.path());
        assert_eq!(o.status.code(), Some(2), "{args:?}: {}", stderr(&o));
    }
    assert!(!dir.path().join("esfem-out").exists());
}

#[test]
fn distributed_solve_converges() {
    let dir = tempfile::tempdir().unwrap();
    let o = esfem(&["solve", "pd", "--example", "1", "--level", "4"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = dir.path().join("esfem-out");
    let text = std::fs::read_to_string(out.join("report.jsonl")).unwrap();
    let summary: serde_json::Value = serde_json::from_str(text.lines().last().unwrap()).unwrap();
    assert_eq!(summary["converged"], true);
    assert!(summary["residual"].as_f64().unwrap() <= 1e-9);
    let slabs = csv_rows(&out.join("active.csv")).len();
    assert_eq!(slabs, 71);
    assert_eq!(csv_rows(&out.join("control.csv")).len(), 71 * 98);
    assert!(stdout(&o).contains("ERR_L2"));
}

#[test]
fn terminal_solve_logs_decreasing_residuals() {
    let dir = tempfile::tempdir().unwrap();
    let o = esfem(&["solve", "pt", "--example", "2", "--level", "3"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let rows = csv_rows(&dir.path().join("esfem-out/report.csv"));
    assert!(rows.len() >= 2);
    let res: Vec<f64> = rows.iter().map(|r| r[1].parse().unwrap()).collect();
    assert!(res.windows(2).all(|w| w[1] < w[0]), "{res:?}");
    assert!(*res.last().unwrap() <= 1e-9);
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("run.txt"), "# sweep\nlevel = 3\nalpha = 0.5\nout = a\n").unwrap();
    let o = esfem(&["solve", "pd", "--config", "run.txt", "--alpha", "2"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let echo = std::fs::read_to_string(dir.path().join("a/run_config.txt")).unwrap();
    assert!(echo.contains("alpha = 2\n"));
    assert!(echo.contains("level = 3\n"));
    std::fs::write(dir.path().join("bad.txt"), "levle = 3\n").unwrap();
    let o = esfem(&["solve", "pd", "--config", "bad.txt"], dir.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn run_config_reproduces_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["solve", "pd", "--level", "3", "--alpha", "0.3", "--lo", "-0.2", "--tol", "1e-11", "--out", "first"];
    assert_eq!(esfem(&args, dir.path()).status.code(), Some(0));
    let o = esfem(&["solve", "pd", "--config", "first/run_config.txt", "--out", "second"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    for file in ["control.csv", "report.csv", "active.csv"] {
        let a = std::fs::read(dir.path().join("first").join(file)).unwrap();
        let b = std::fs::read(dir.path().join("second").join(file)).unwrap();
        assert!(a == b, "{file} differs");
    }
}

#[test]
fn convergence_writes_table_and_plot_data() {
    let dir = tempfile::tempdir().unwrap();
    let o = esfem(&["convergence", "--example", "2", "--levels", "0..3"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = dir.path().join("esfem-out");
    let rows = csv_rows(&out.join("convergence.csv"));
    assert_eq!(rows.len(), 4);
    assert!(rows.iter().all(|r| r[5].parse::<f64>().unwrap() > 0.0));
    assert!(rows[3][6].parse::<f64>().is_ok());
    let dat = std::fs::read_to_string(out.join("convergence.dat")).unwrap();
    assert_eq!(dat.lines().count(), 5);
    assert!(stdout(&o).lines().next().unwrap().contains("EOC_L2"));
}

#[test]
fn example_one_rows_match_published_errors() {
    let dir = tempfile::tempdir().unwrap();
    let o = esfem(&["convergence", "--example", "1", "--levels", "0..5"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let rows = csv_rows(&dir.path().join("esfem-out/convergence.csv"));
    for (level, published) in [(4, 1.24e-2), (5, 6.78e-3)] {
        let err: f64 = rows[level][5].parse().unwrap();
        assert!((err / published - 1.0).abs() <= 0.25, "level {level}: {err}");
    }
}
