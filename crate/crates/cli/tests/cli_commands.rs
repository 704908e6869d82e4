use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use optrec_cli::{Cell, SweepSeries};
use tempfile::TempDir;

const D1: &str = "[revenue]\ncost_push = 4.5\nreward_hit = 2\ncost_miss_like = 2\nreward_ad = 11\ncost_omit = 2\n";
const D2: &str = "[revenue]\ncost_push = 1\nreward_hit = 9\ncost_miss_like = 2\nreward_ad = 3\ncost_omit = 2\n";

fn config(dir: &TempDir, name: &str, body: &str) -> PathBuf {
    let path = dir.path().join(name);
    std::fs::write(&path, body).unwrap();
    path
}

fn d1u1(dir: &TempDir, extra: &str) -> PathBuf {
    config(dir, "d1u1.toml", &format!("utility = [0.1, 0.2, 0.3, 0.4]\nseed = 42\n{extra}\n{D1}"))
}

fn optrec(cfg: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_optrec"))
        .args(args)
        .arg("--config")
        .arg(cfg)
        .output()
        .unwrap()
}

fn csv(cfg: &Path, args: &[&str]) -> SweepSeries {
    let mut a = args.to_vec();
    a.extend(["--format", "csv"]);
    let out = optrec(cfg, &a);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    SweepSeries::read_csv(out.stdout.as_slice()).unwrap()
}

fn num(c: &Cell) -> f64 {
    c.as_f64().unwrap_or_else(|| panic!("not a number: {c:?}"))
}

#[test]
fn feasible_solve_exits_zero() {
    let dir = TempDir::new().unwrap();
    let s = csv(&d1u1(&dir, ""), &["solve", "--beta", "1.5"]);
    assert_eq!(s.rows.len(), 1);
    let row = &s.rows[0];
    let col = |n: &str| &row[s.header.iter().position(|h| h == n).unwrap()];
    assert_eq!(col("case"), &Cell::Num(2.0));
    assert_eq!(col("outcome"), &Cell::text("tilted"));
    assert!((num(col("varpi")) - 9.130989640669856).abs() < 1e-6);
    assert!((num(col("kl")) - 0.657452519918903).abs() < 1e-9);
    assert!((num(col("revenue")) - 1.5).abs() < 1e-9);
    assert!(num(col("kkt_residual")) <= 1e-8);
}

#[test]
fn infeasible_solve_exits_three() {
    let dir = TempDir::new().unwrap();
    let out = optrec(&d1u1(&dir, ""), &["solve", "--beta", "3"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn invalid_configs_exit_four() {
    let dir = TempDir::new().unwrap();
    let unknown = config(&dir, "a.toml", &format!("utility = [0.5, 0.5]\nbogus = 1\n{D1}"));
    let bad_sum = config(&dir, "b.toml", &format!("utility = [0.5, 0.6]\n{D1}"));
    let zero = config(&dir, "c.toml", &format!("utility = [0, 1]\n{D1}"));
    let missing = dir.path().join("missing.toml");
    for cfg in [&unknown, &bad_sum, &zero] {
        let out = optrec(cfg, &["solve", "--beta", "1"]);
        assert_eq!(out.status.code(), Some(4), "{}", cfg.display());
    }
    let out = optrec(&missing, &["solve", "--beta", "1"]);
    assert_ne!(out.status.code(), Some(0));
}

#[test]
fn usage_errors_exit_two() {
    let dir = TempDir::new().unwrap();
    let cfg = d1u1(&dir, "");
    let out = optrec(&cfg, &["solve", "--beta", "1", "--beta-range", "0:1:3"]);
    assert_eq!(out.status.code(), Some(2));
    let out = optrec(&cfg, &["frobnicate"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn thresholds_golden_rows() {
    let dir = TempDir::new().unwrap();
    let cases = [
        ("u1", D1, [-5.0, 1.0, f64::NAN, 2.0, 0.3]),
        ("u1", D2, [10.0, 1.0, 2.0, f64::NAN, 0.3]),
        ("u2", D1, [-5.0, 0.675, f64::NAN, 2.25, 0.365]),
        ("u2", D2, [10.0, 1.65, 3.0, f64::NAN, 0.365]),
    ];
    for (i, (u, d, want)) in cases.iter().enumerate() {
        let utility = if *u == "u1" { "[0.1, 0.2, 0.3, 0.4]" } else { "[0.05, 0.15, 0.3, 0.5]" };
        let cfg = config(&dir, &format!("t{i}.toml"), &format!("utility = {utility}\n{d}"));
        let s = csv(&cfg, &["thresholds"]);
        assert_eq!(&s.header[..5], ["sign_sum", "beta_0", "beta_no", "beta_ad", "gamma"]);
        for (cell, w) in s.rows[0].iter().zip(want) {
            if w.is_nan() {
                assert_eq!(cell, &Cell::text("/"));
            } else {
                assert!((num(cell) - w).abs() <= 1e-9, "row {i}: {cell:?} vs {w}");
            }
        }
    }
}

#[test]
fn neutral_thresholds() {
    let dir = TempDir::new().unwrap();
    let neutral = "[revenue]\ncost_push = 1\nreward_hit = 2\ncost_miss_like = 1\nreward_ad = 5\ncost_omit = 2\n";
    let cfg = config(&dir, "n.toml", &format!("utility = [0.1, 0.2, 0.3, 0.4]\n{neutral}"));
    let s = csv(&cfg, &["thresholds"]);
    assert_eq!(s.rows[0][0], Cell::Num(0.0));
    assert_eq!(s.rows[0][2], Cell::text("/"));
    assert_eq!(s.rows[0][3], Cell::text("/"));
    let out = optrec(&cfg, &["solve", "--beta", "1", "--format", "csv"]);
    assert_eq!(out.status.code(), Some(0));
    let out = optrec(&cfg, &["solve", "--beta", "1.5"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn csv_output_round_trips() {
    let dir = TempDir::new().unwrap();
    let cfg = d1u1(&dir, "");
    let out_path = dir.path().join("sweep.csv");
    let out = optrec(
        &cfg,
        &["sweep-beta", "--beta-range", "0:2.5:26", "--out", out_path.to_str().unwrap()],
    );
    assert_eq!(out.status.code(), Some(0));
    let text = std::fs::read(&out_path).unwrap();
    let s = SweepSeries::read_csv(text.as_slice()).unwrap();
    let mut again = Vec::new();
    s.write_csv(&mut again).unwrap();
    assert_eq!(SweepSeries::read_csv(again.as_slice()).unwrap(), s);
    assert!(s.metadata.iter().any(|m| m.contains("seed = 42")));
    assert!(s.metadata.iter().any(|m| m.contains("cost_push = 4.5")));
}

#[test]
fn sweep_beta_shows_three_phases() {
    let dir = TempDir::new().unwrap();
    let s = csv(&d1u1(&dir, ""), &["sweep-beta", "--beta-range", "0:2.5:26"]);
    let outcome = s.column("outcome").unwrap();
    let beta: Vec<f64> = s.column("beta").unwrap().into_iter().map(num).collect();
    for (b, o) in beta.iter().zip(outcome) {
        let want = if *b <= 1.0 {
            "utility"
        } else if *b <= 2.0 + 1e-12 {
            "tilted"
        } else {
            "infeasible"
        };
        assert_eq!(o, &Cell::text(want), "beta {b}");
    }
}

#[test]
fn sweeps_are_deterministic() {
    let dir = TempDir::new().unwrap();
    let cfg = d1u1(&dir, "");
    let a = optrec(&cfg, &["sweep-beta", "--beta-range", "1:2:11"]);
    let b = optrec(&cfg, &["sweep-beta", "--beta-range", "1:2:11"]);
    assert_eq!(a.stdout, b.stdout);
    let a = optrec(&cfg, &["simulate", "--trials", "2000", "--sequence-length", "2000"]);
    let b = optrec(&cfg, &["simulate", "--trials", "2000", "--sequence-length", "2000"]);
    assert_eq!(a.stdout, b.stdout);
    let c = optrec(&cfg, &["simulate", "--trials", "2000", "--sequence-length", "2000", "--seed", "7"]);
    assert_ne!(a.stdout, c.stdout);
}

#[test]
fn simulate_requires_a_seed() {
    let dir = TempDir::new().unwrap();
    let cfg = config(&dir, "s.toml", &format!("utility = [0.1, 0.2, 0.3, 0.4]\nbeta = 1.5\n{D1}"));
    let out = optrec(&cfg, &["simulate", "--trials", "100"]);
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn sweep_varpi_rows_are_distributions() {
    let dir = TempDir::new().unwrap();
    let s = csv(&d1u1(&dir, ""), &["sweep-varpi", "--varpi-range", "-10:10:21"]);
    for row in &s.rows {
        let total: f64 = row[1..].iter().map(num).sum();
        assert!((total - 1.0).abs() < 1e-12);
        if num(&row[0]) == 0.0 {
            let p: Vec<f64> = row[1..].iter().map(num).collect();
            assert_eq!(p, [0.1, 0.2, 0.3, 0.4]);
        }
    }
}

#[test]
fn analyze_reports_partition_and_order() {
    let dir = TempDir::new().unwrap();
    let six = config(
        &dir,
        "six.toml",
        &format!("utility = [0.03, 0.07, 0.12, 0.24, 0.25, 0.29]\npartition_varpi = 5\n{D1}"),
    );
    let s = csv(&six, &["analyze"]);
    let arrows: Vec<&Cell> = s.column("partition").unwrap();
    // γ ≈ 0.2104: classes below it are amplified for positive tilts.
    let want = ["↑", "↑", "↑", "↓", "↓", "↓"];
    for (a, w) in arrows.iter().zip(want) {
        assert_eq!(*a, &Cell::text(w));
    }
    let u: Vec<f64> = s.column("u").unwrap().into_iter().map(num).collect();
    let tilde = s.column("varpi_tilde_x").unwrap();
    let crossings: Vec<(f64, f64)> = u
        .iter()
        .zip(tilde)
        .filter_map(|(&u, t)| t.as_f64().map(|t| (u, t)))
        .collect();
    assert_eq!(crossings.len(), 4);
    for (u, t) in crossings {
        assert_eq!(t > 0.0, u < 0.2104, "u = {u}, crossing {t}");
    }
    assert!(s.metadata.iter().any(|m| m.contains("crossing order")));
}

#[test]
fn oracle_agrees_and_noncommercial_solve() {
    let dir = TempDir::new().unwrap();
    let cfg = d1u1(&dir, "");
    let out = optrec(&cfg, &["oracle", "--beta", "1.5", "--grid", "100"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let out = optrec(&cfg, &["oracle", "--beta", "1.5", "--grid", "5"]);
    assert_eq!(out.status.code(), Some(4));

    let cfg = config(&dir, "d2u2.toml", &format!("utility = [0.05, 0.15, 0.3, 0.5]\n{D2}"));
    let s = csv(&cfg, &["solve", "--beta", "2"]);
    let i = s.header.iter().position(|h| h == "kl").unwrap();
    assert!((num(&s.rows[0][i]) - 0.04187122489312777).abs() < 1e-9);
}
