use std::process::{Command, Output};

fn varexp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_varexp")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn help_and_version_exit_zero() {
    assert_eq!(varexp(&["--help"]).status.code(), Some(0));
    let v = varexp(&["--version"]);
    assert_eq!(v.status.code(), Some(0));
    assert!(stdout(&v).contains(env!("CARGO_PKG_VERSION")));
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(varexp(&[]).status.code(), Some(1));
    assert_eq!(varexp(&["bogus"]).status.code(), Some(1));
    assert_eq!(varexp(&["--d", "0", "risk"]).status.code(), Some(1));
    assert_eq!(varexp(&["--alpha", "1", "risk"]).status.code(), Some(1));
    assert_eq!(varexp(&["--estimator", "nope", "risk"]).status.code(), Some(1));
    assert_eq!(varexp(&["--theta-grid", "0:1", "risk"]).status.code(), Some(1));
    let o = varexp(&["--config", "/nonexistent/varexp.conf", "risk"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(!o.stderr.is_empty());
}

#[test]
fn numerical_failures_exit_two() {
    let o = varexp(&["cutoff", "--kind", "general", "--epsilon", "0"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("inapplicable"));
}

#[test]
fn csv_has_metadata_header() {
    let o = varexp(&["--d", "3", "--c", "1.1", "--theta-grid", "0:2:3", "risk"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let meta: Vec<&str> = text.lines().take_while(|l| l.starts_with('#')).collect();
    assert!(meta.iter().any(|l| l.contains("schema")));
    assert!(meta.iter().any(|l| l.contains("seed")));
    let data: Vec<&str> = text.lines().skip(meta.len()).collect();
    // header row plus three grid points
    assert_eq!(data.len(), 4, "{text}");
}

#[test]
fn config_file_and_flags_combine() {
    let dir = tempfile::tempdir().unwrap();
    let conf = dir.path().join("run.conf");
    std::fs::write(&conf, "# example\nd = 3\nestimator = jsplus\nc = 1.05, 1.2\ntheta-grid = 0:4:3\nn-samples = 2000\n").unwrap();
    let out = dir.path().join("scan.csv");
    let o = varexp(&["--config", conf.to_str().unwrap(), "--out", out.to_str().unwrap(), "scan"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(&out).unwrap();
    let rows = csv.lines().filter(|l| !l.starts_with('#')).count();
    assert_eq!(rows, 1 + 2 * 3, "{csv}");
}

#[test]
fn monte_carlo_output_is_identical_across_thread_counts() {
    let cases: [&[&str]; 3] = [
        &["--d", "3", "--estimator", "jsplus", "--c", "1.1", "--theta-grid", "0:4:4", "--n-samples", "30000", "risk"],
        &["--d", "3", "--estimator", "jsplus", "--alpha", "0", "--n-samples", "5000", "epsilon"],
        &["--d", "3", "--estimator", "js", "--c", "1.05", "--c", "1.3", "--theta-grid", "0:3:3", "--n-samples", "20000", "scan"],
    ];
    for args in cases {
        let run = |threads: &str| {
            let mut full = vec!["--threads", threads];
            full.extend_from_slice(args);
            let o = varexp(&full);
            assert_eq!(o.status.code(), Some(0), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
            o.stdout
        };
        let one = run("1");
        assert_eq!(one, run("4"), "{args:?}");
        assert_eq!(one, run("4"), "{args:?}");
    }
}

#[test]
fn seed_changes_monte_carlo_output() {
    let base = ["--d", "3", "--estimator", "jsplus", "--c", "1.1", "--theta-grid", "0:1:2", "--n-samples", "5000"];
    let run = |seed: &str| {
        let mut a = base.to_vec();
        a.extend_from_slice(&["--seed", seed, "risk"]);
        stdout(&varexp(&a))
    };
    assert_ne!(run("1"), run("2"));
    assert_eq!(run("1"), run("1"));
}

#[test]
fn failed_verification_exits_three_and_still_writes_report() {
    // At a hundredth of the budget the Monte Carlo cut-off checks cannot all pass.
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("report.json");
    let o = varexp(&["verify", "--budget-scale", "0.01", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    let checks = report["checks"].as_array().unwrap();
    assert!(checks.iter().any(|c| c["passed"] == false));
    assert!(stdout(&o).lines().any(|l| l.starts_with("PASS")));
}
