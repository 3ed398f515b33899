use std::path::PathBuf;
use std::process::{Command, Output};
use std::sync::Once;

fn cache_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("charquant-cache")
}

/// Build the order-71 polynomials once so parallel tests do not race to do it.
fn warm_cache() {
    static WARM: Once = Once::new();
    WARM.call_once(|| {
        let out = Command::new(env!("CARGO_BIN_EXE_charquant"))
            .args(["series", "gaussian", "--terms", "35"])
            .env("CHARQUANT_CACHE_DIR", cache_dir())
            .output()
            .expect("binary runs");
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    });
}

fn run(args: &[&str]) -> Output {
    warm_cache();
    Command::new(env!("CARGO_BIN_EXE_charquant"))
        .args(args)
        .env("CHARQUANT_CACHE_DIR", cache_dir())
        .env_remove("RUST_LOG")
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    assert!(
        out.status.success(),
        "exit {:?}: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn number(out: &Output) -> f64 {
    stdout(out).trim().parse().unwrap()
}

#[test]
fn series_gaussian_third_coefficient() {
    let v: serde_json::Value = serde_json::from_str(&stdout(&run(&["series", "gaussian", "--terms", "6"]))).unwrap();
    let q3 = v["qcoeffs"][2].as_f64().unwrap();
    let want = 2f64.sqrt() * std::f64::consts::PI.powf(1.5) / 3.0;
    assert!((q3 / want - 1.0).abs() < 1e-12);
    assert_eq!(v["u0"].as_f64(), Some(0.5));
    assert_eq!(v["horner"].as_array().unwrap().len(), 7);
}

#[test]
fn series_stable_three_halves_leading_coefficient() {
    let v: serde_json::Value =
        serde_json::from_str(&stdout(&run(&["series", "stable", "--alpha", "1.5", "--terms", "35"]))).unwrap();
    let a0 = v["horner"][0].as_f64().unwrap();
    assert!((a0 / 1.740_021_619_675_477_2 - 1.0).abs() < 1e-12);
    assert_eq!(v["horner"].as_array().unwrap().len(), 36);
}

#[test]
fn divergent_moment_exits_two() {
    let out = run(&["series", "custom-vg", "--lambda", "1", "--terms", "10"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("moment does not exist"), "{err}");
    assert!(err.contains("series construction"), "{err}");
}

#[test]
fn zero_locations() {
    assert_eq!(number(&run(&["u0", "cauchy"])), 0.5);
    let g = number(&run(&["u0", "gaussian", "--mu", "1"]));
    assert!((g - 0.158_655_253_931_457_05).abs() < 1e-10);
    let s = number(&run(&["u0", "stable", "--alpha", "0.75", "--beta", "1"]));
    assert!(s.abs() < 1e-6, "{s}");
    let s = number(&run(&["u0", "stable", "--alpha", "1.5", "--beta", "-0.5"]));
    let want = 0.5 - (-0.5 * (0.75 * std::f64::consts::PI).tan()).atan() / (1.5 * std::f64::consts::PI);
    assert!((s - want).abs() < 1e-8);
}

#[test]
fn quantile_values_and_errors() {
    assert!((number(&run(&["quantile", "cauchy", "--u", "0.75"])) - 1.0).abs() < 1e-12);
    let text = stdout(&run(&["quantile", "cauchy", "--u", "0.25,0.5"]));
    let vals: Vec<f64> = text.lines().map(|l| l.parse().unwrap()).collect();
    assert!((vals[0] + 1.0).abs() < 1e-12);
    assert_eq!(vals[1], 0.0);
    for bad in ["1", "0", "-0.5"] {
        assert_eq!(run(&["quantile", "cauchy", "--u", bad]).status.code(), Some(2));
    }
}

#[test]
fn quantile_inverts_the_cdf() {
    // Bisection on the CDF of the stable alpha = 1.5 law as an independent check.
    use charquant::charfns::make_stable_symmetric;
    use charquant::moments::{gil_pelaez_cdf, QuadratureConfig};
    let w = number(&run(&["quantile", "stable", "--alpha", "1.5", "--u", "0.7"]));
    let cf = make_stable_symmetric(1.5).unwrap();
    let cfg = QuadratureConfig::default();
    let (mut lo, mut hi) = (0.0, 5.0);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if gil_pelaez_cdf(&cf, mid, &cfg).unwrap() < 0.7 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    assert!((w - 0.5 * (lo + hi)).abs() < 1e-9, "{w} vs {}", 0.5 * (lo + hi));
}

#[test]
fn sample_csv_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for p in [&a, &b] {
        let out = run(&["sample", "cauchy", "--n", "500", "--seed", "9", "--out", p.to_str().unwrap()]);
        assert!(out.status.success());
    }
    let ta = std::fs::read_to_string(&a).unwrap();
    assert_eq!(ta, std::fs::read_to_string(&b).unwrap());
    assert!(ta.starts_with("# dist: {\"dist\":\"stable\",\"alpha\":1.0,\"beta\":0.0}\n# seed: 9\n# n: 500\n"));
    assert_eq!(ta.lines().filter(|l| !l.starts_with('#')).count(), 500);
    assert_eq!(run(&["sample", "cauchy", "--n", "0"]).status.code(), Some(2));
}

#[test]
fn levy_area_sample() {
    let text = stdout(&run(&["sample", "levy-area", "--r", "1", "--delta-t", "0.5", "--n", "2000", "--terms", "20"]));
    let xs: Vec<f64> = text.lines().filter(|l| !l.starts_with('#')).map(|l| l.parse().unwrap()).collect();
    assert_eq!(xs.len(), 2000);
    assert!(xs.iter().all(|x| x.is_finite()));
    assert_eq!(run(&["sample", "levy-area", "--r", "1", "--n", "5"]).status.code(), Some(2));
    assert_eq!(run(&["quantile", "levy-area", "--r", "1", "--u", "0.5"]).status.code(), Some(2));
}

#[test]
fn diagnose_with_cauchy_oracle() {
    let text = stdout(&run(&[
        "diagnose", "cauchy", "--grid-start", "0.5", "--grid-end", "0.8", "--grid-n", "7", "--oracle", "cauchy",
    ]));
    let header = text.lines().find(|l| !l.starts_with('#')).unwrap();
    assert_eq!(header, "u,w,rte,eqe,reference,rel_err,log10_rel_err");
    let rows: Vec<Vec<f64>> = text
        .lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(|f| f.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 7);
    for r in &rows {
        assert!(r[2].abs() < 1e-12, "rte {r:?}");
        assert!(r[5] < 1e-12, "rel err {r:?}");
    }
    assert_eq!(run(&["diagnose", "gaussian", "--oracle", "cauchy"]).status.code(), Some(2));
}

#[test]
fn diagnose_with_table_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.txt");
    let pi = std::f64::consts::PI;
    let mut table = String::from("% reference\nu quantile\n");
    for u in [0.55, 0.65, 0.75] {
        table.push_str(&format!("{u} {:.17e}\n", (pi * (u - 0.5)).tan()));
    }
    std::fs::write(&path, table).unwrap();
    let text = stdout(&run(&["diagnose", "cauchy", "--oracle", path.to_str().unwrap()]));
    assert_eq!(text.lines().filter(|l| !l.starts_with('#')).count(), 4);
    let missing = dir.path().join("nope.txt");
    assert_eq!(
        run(&["diagnose", "cauchy", "--oracle", missing.to_str().unwrap()]).status.code(),
        Some(3)
    );
}

#[test]
fn codegen_c_and_json() {
    let c = stdout(&run(&["codegen", "cauchy", "--terms", "1"]));
    assert!(c.contains("double charquant_quantile(double u)"));
    assert!(c.contains("return v*(1.5707963267948966 +\n        w*1.29192819501249"));
    let short = stdout(&run(&["codegen", "cauchy", "--terms", "3", "--digits", "3", "--lang", "expression"]));
    assert_eq!(short, "v*(1.57 +\n    w*(1.29 +\n    w*(1.28 +\n    w*1.27)))\n");
    let json = stdout(&run(&["codegen", "gaussian", "--mu", "1", "--terms", "4", "--lang", "json"]));
    let v: serde_json::Value = serde_json::from_str(&json).unwrap();
    assert!((v["u0"].as_f64().unwrap() - 0.158_655_253_9).abs() < 1e-9);
    assert_eq!(run(&["codegen", "gaussian", "--mu", "1", "--terms", "4"]).status.code(), Some(2));
}

#[test]
fn config_and_io_errors() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("q.json");
    std::fs::write(&cfg, r#"{"rel_tol": 1e-10}"#).unwrap();
    assert!(number(&run(&["--config", cfg.to_str().unwrap(), "u0", "gaussian", "--mu", "1"])) > 0.15);
    std::fs::write(&cfg, r#"{"rel_tolerance": 1e-10}"#).unwrap();
    assert_eq!(run(&["--config", cfg.to_str().unwrap(), "u0", "cauchy"]).status.code(), Some(2));
    let missing = dir.path().join("missing.json");
    assert_eq!(run(&["--config", missing.to_str().unwrap(), "u0", "cauchy"]).status.code(), Some(3));
    let unwritable = dir.path().join("no/such/dir/out.json");
    assert_eq!(
        run(&["series", "gaussian", "--terms", "2", "--out", unwritable.to_str().unwrap()]).status.code(),
        Some(3)
    );
}

#[test]
fn argument_validation() {
    assert_eq!(run(&["u0", "gaussian", "--alpha", "2"]).status.code(), Some(2));
    assert_eq!(run(&["u0", "stable"]).status.code(), Some(2));
    assert_eq!(run(&["u0"]).status.code(), Some(2));
    let s = number(&run(&["u0", "--spec", r#"{"dist":"gaussian","mu":1.0}"#]));
    assert!((s - 0.158_655_253_9).abs() < 1e-9);
}
