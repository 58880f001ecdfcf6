use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_covlda");

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).env_remove("COVLDA_THREADS").output().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn simulate(dir: &Path) -> (String, String) {
    let out = dir.join("sim");
    let o = run(&["simulate", "--set", "1", "--l", "40", "--s", "12", "--k", "3", "--seed", "5", "--out", s(&out), "--holdout", "10"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    (s(&out.join("counts.csv")).to_string(), s(&out.join("covariates.csv")).to_string())
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let o = run(&["fit", "--bogus"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("Usage"));
    assert_eq!(run(&[]).status.code(), Some(1));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn burnin_not_below_iters_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let (counts, covs) = simulate(dir.path());
    let out = dir.path().join("m");
    let o = run(&["fit", "--counts", &counts, "--covariates", &covs, "--k", "3", "--iters", "50", "--burnin", "50", "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(1), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn unreadable_data_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("absent.csv");
    let out = dir.path().join("m");
    let o = run(&["fit", "--counts", s(&missing), "--covariates", s(&missing), "--k", "2", "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(2));
    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "instance_id,a\nq1,-2\n").unwrap();
    let o = run(&["fit", "--counts", s(&bad), "--covariates", s(&bad), "--k", "1", "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn simulate_fit_predict_report_coherence() {
    let dir = tempfile::tempdir().unwrap();
    let (counts, covs) = simulate(dir.path());
    let model = dir.path().join("model");
    let o = run(&[
        "--quiet", "fit", "--counts", &counts, "--covariates", &covs, "--k", "3", "--mode", "joint", "--iters", "120", "--burnin",
        "60", "--thin", "2", "--seed", "3", "--ci", "0.9", "--out", s(&model),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(o.stderr.is_empty());

    let report = run(&["report", "--model", s(&model)]);
    assert!(report.status.success());
    let text = String::from_utf8_lossy(&report.stdout);
    assert!(text.contains("mode = joint") && text.contains("var1"), "{text}");

    let pred = dir.path().join("pred.csv");
    let hold = dir.path().join("sim").join("holdout_covariates.csv");
    let o = run(&["predict", "--model", s(&model), "--covariates", s(&hold), "--out", s(&pred)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = std::fs::read_to_string(&pred).unwrap();
    assert_eq!(rows.lines().count(), 11);
    assert!(rows.lines().nth(1).unwrap().starts_with("holdout1,"));

    for extra in [&[][..], &["--whole-corpus", "--m", "3"][..]] {
        let mut args = vec!["coherence", "--model", s(&model), "--counts", &counts];
        args.extend_from_slice(extra);
        let o = run(&args);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        let out = String::from_utf8_lossy(&o.stdout);
        assert!(out.starts_with("cluster,coherence\n") && out.contains("\ntotal,"), "{out}");
    }
}
