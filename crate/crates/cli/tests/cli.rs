use serde_json::Value;
use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_channelfield")).args(args).arg("--out").arg(out).output().expect("binary runs")
}

fn read(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap()
}

fn report(dir: &Path, name: &str) -> Value {
    serde_json::from_str(&read(&dir.join(format!("{name}_report.json")))).unwrap()
}

#[test]
fn sample_is_deterministic_and_counts_lines() {
    let t = tempfile::tempdir().unwrap();
    let (a, b) = (t.path().join("a"), t.path().join("b"));
    for d in [&a, &b] {
        assert!(run(&["sample", "--window", "0,0,5,5", "--seed", "42"], d).status.success());
    }
    assert_eq!(read(&a.join("configuration.jsonl")), read(&b.join("configuration.jsonl")));
    assert_eq!(read(&a.join("sample_report.json")), read(&b.join("sample_report.json")));
    let lines = read(&a.join("configuration.jsonl")).lines().count();
    let r = report(&a, "sample");
    assert_eq!(r["result"]["count"].as_u64().unwrap() as usize, lines - 1);
    assert_eq!(r["seed"], 42);
    assert_eq!(r["config_hash"].as_str().unwrap().len(), 64);
}

#[test]
fn replica_mean_matches_intensity() {
    let t = tempfile::tempdir().unwrap();
    assert!(run(&["sample", "--window", "0,0,1,1", "--replicas", "100", "--seed", "3"], t.path()).status.success());
    let r = report(t.path(), "sample");
    assert_eq!(r["result"]["mu_dinv"], 8.0);
    assert_eq!(r["result"]["within_3se"], true);
}

#[test]
fn empty_field_gives_the_diagonal() {
    let t = tempfile::tempdir().unwrap();
    assert!(run(&["integrate", "--empty-field", "--window", "0,0,20,20", "--start", "1,2", "--t-end", "4"], t.path()).status.success());
    let csv = read(&t.path().join("curve.csv"));
    let rows: Vec<Vec<f64>> = csv.lines().skip(1).map(|l| l.split(',').map(|x| x.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 401);
    for r in &rows {
        assert!((r[1] - 1.0 - r[0] / 2.0).abs() < 1e-12 && (r[2] - r[1] - 1.0).abs() < 1e-12);
    }
}

#[test]
fn integrate_conserves_and_truncated_runs_are_prefixes() {
    let t = tempfile::tempdir().unwrap();
    let (a, b) = (t.path().join("a"), t.path().join("b"));
    let args = ["integrate", "--window", "-2,-2,40,40", "--start", "1,1", "--seed", "8"];
    assert!(run(&[&args[..], &["--t-end", "20"]].concat(), &a).status.success());
    assert!(run(&[&args[..], &["--t-end", "10"]].concat(), &b).status.success());
    let dev = report(&a, "integrate")["result"]["conservation_max_deviation"].as_f64().unwrap();
    assert!(dev < 1e-6);
    let long = read(&a.join("curve.csv"));
    assert!(long.starts_with(&read(&b.join("curve.csv"))));
    let stats: Value = serde_json::from_str(&read(&a.join("ratio_stats.json"))).unwrap();
    assert!(stats["checkpoints"].as_array().unwrap().len() >= 4);
}

#[test]
fn start_without_padding_is_rejected() {
    let t = tempfile::tempdir().unwrap();
    let out = run(&["integrate", "--window", "0,0,10,10", "--start", "0.1,5"], t.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("padding"));
}

#[test]
fn chain_reproduces_fixture() {
    let t = tempfile::tempdir().unwrap();
    let fixtures = Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures");
    let input = fixtures.join("staircase.jsonl");
    let out = run(&["chain", "--input", input.to_str().unwrap(), "--start", "1,0.5"], t.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let got: Value = serde_json::from_str(&read(&t.path().join("chain.json"))).unwrap();
    let want: Value = serde_json::from_str(&read(&fixtures.join("staircase.chain.json"))).unwrap();
    assert_eq!(got, want);
    assert_eq!(report(t.path(), "chain")["result"]["terminal_histogram_from_minus_one"][5], 1);
}

#[test]
fn verify_subset_passes_and_is_reproducible() {
    let t = tempfile::tempdir().unwrap();
    let (a, b) = (t.path().join("a"), t.path().join("b"));
    for d in [&a, &b] {
        let out = run(&["verify", "--smoke", "--criteria", "2,8", "--seed", "5"], d);
        assert!(out.status.success());
        let text = String::from_utf8_lossy(&out.stdout).to_string();
        assert!(text.contains("PASS criterion 2") && text.contains("PASS criterion 8"), "{text}");
    }
    assert_eq!(read(&a.join("verify_report.json")), read(&b.join("verify_report.json")));
    assert_eq!(report(&a, "verify")["result"]["passed"], true);
}

#[test]
fn config_file_is_overridden_by_flags() {
    let t = tempfile::tempdir().unwrap();
    let cfg = t.path().join("run.json");
    std::fs::write(&cfg, r#"{"schema_version": 1, "alpha": 1.3, "seed": 5, "zeta_points": 3, "mc_samples": 200}"#).unwrap();
    let out = run(&["rates", "--config", cfg.to_str().unwrap(), "--alpha", "1.4"], t.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let r = report(t.path(), "rates");
    assert_eq!(r["config"]["alpha"], 1.4);
    assert_eq!(r["config"]["seed"], 5);
    assert_eq!(read(&t.path().join("rates.csv")).lines().count(), 4);
    std::fs::write(&cfg, r#"{"schema_version": 7}"#).unwrap();
    let out = run(&["rates", "--config", cfg.to_str().unwrap()], t.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn mixing_needs_an_ensemble() {
    let t = tempfile::tempdir().unwrap();
    let out = run(&["mixing", "--window", "0,0,60,20", "--replicas", "10"], t.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("insufficient"));
}

#[test]
fn field_grid_has_every_point() {
    let t = tempfile::tempdir().unwrap();
    assert!(run(&["field", "--window", "0,0,6,6", "--grid", "9"], t.path()).status.success());
    assert_eq!(read(&t.path().join("field.csv")).lines().count(), 82);
    assert_eq!(report(t.path(), "field")["result"]["max_sum_error"], 0.0);
}
