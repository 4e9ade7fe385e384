use std::io::Write;
use std::path::Path;
use std::process::{Command, Output, Stdio};

const BIN: &str = env!("CARGO_BIN_EXE_ldpm");

fn ldpm(args: &[&str]) -> Output {
    Command::new(BIN).args(args).env_remove("LDPM_SEED").output().unwrap()
}

fn ldpm_stdin(args: &[&str], input: &str) -> Output {
    let mut child = Command::new(BIN)
        .args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    child.stdin.take().unwrap().write_all(input.as_bytes()).unwrap();
    child.wait_with_output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn write_config(dir: &Path, body: &str) -> String {
    let p = dir.join("run.conf");
    std::fs::write(&p, body).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn missing_config_is_a_usage_error() {
    assert_eq!(ldpm(&["simulate", "/nonexistent/run.conf"]).status.code(), Some(2));
}

#[test]
fn unknown_subcommand_and_claim_are_usage_errors() {
    assert_eq!(ldpm(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(ldpm(&["verify", "nope"]).status.code(), Some(2));
}

#[test]
fn unknown_config_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "protocol = rr_mean\ncolour = blue\n");
    assert_eq!(ldpm(&["simulate", &cfg]).status.code(), Some(2));
}

#[test]
fn single_trial_produces_one_row() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("out.csv");
    let cfg = write_config(
        dir.path(),
        "# smallest sweep\nprotocol = rr_mean\nsource = rademacher\nsource_mu = 0.2\nn = 200\nm = 10\nadversary = rr_plus_one\ntrials = 1\n",
    );
    let o = ldpm(&["simulate", &cfg, "--out-csv", csv.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&csv).unwrap();
    let lines: Vec<_> = text.lines().collect();
    assert_eq!(lines.len(), 2, "{text}");
    assert!(lines[0].contains("mean_err"));
}

#[test]
fn same_seed_same_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "protocol = hst\nsource = uniform\nn = 300\nm = 0,20\nd = 8\ntrials = 20\n",
    );
    let run = |seed: &str, name: &str| {
        let out = dir.path().join(name);
        let o = ldpm(&["simulate", &cfg, "--seed", seed, "--out-csv", out.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0));
        std::fs::read_to_string(out).unwrap()
    };
    let a = run("11", "a.csv");
    assert_eq!(a, run("11", "b.csv"));
    assert_ne!(a, run("12", "c.csv"));
}

#[test]
fn failing_assertion_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "protocol = rr_mean\nsource = rademacher\nn = 500\nm = 50\nadversary = rr_plus_one\ntrials = 20\nerror_bound = 0.01\nfail_rate_bound = 1e-9\n",
    );
    assert_eq!(ldpm(&["simulate", &cfg, "--assert"]).status.code(), Some(3));
    // Without --assert the same run succeeds.
    assert_eq!(ldpm(&["simulate", &cfg]).status.code(), Some(0));
}

#[test]
fn overrides_apply() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("out.csv");
    let cfg = write_config(
        dir.path(),
        "protocol = rr_mean\nsource = rademacher\nn = 100\ntrials = 2\n",
    );
    let o = ldpm(&["simulate", &cfg, "-D", "n=100,400", "--out-csv", csv.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(std::fs::read_to_string(csv).unwrap().lines().count(), 3);
    assert_eq!(ldpm(&["simulate", &cfg, "-D", "nonsense"]).status.code(), Some(2));
}

#[test]
fn verify_binomial_reports_known_margin() {
    let o = ldpm(&["verify", "binomial", "--n", "931", "--m", "116"]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let margin = v["margin_or_fraction"].as_f64().unwrap();
    assert!((margin - -0.224937897086489).abs() < 1e-9);
    assert_eq!(v["pass"], true);
}

#[test]
fn verify_binomial_out_of_range_is_noted() {
    let o = ldpm(&["verify", "binomial", "--n", "10", "--m", "0"]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!(v["note"].as_str().unwrap().starts_with("out-of-range"));
}

#[test]
fn verify_kov_passes() {
    let o = ldpm(&["verify", "kov", "--trials", "20"]);
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn rr_pipes_into_measure() {
    let rr = ldpm(&["channel", "rr", "--eps", "1"]);
    assert_eq!(rr.status.code(), Some(0));
    let m = ldpm_stdin(&["channel", "measure"], &stdout(&rr));
    assert_eq!(m.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&stdout(&m)).unwrap();
    assert!((v["epsilon"].as_f64().unwrap() - 1.0).abs() < 1e-12);
}

#[test]
fn zero_epsilon_rr_is_constant() {
    let o = ldpm(&["channel", "rr", "--eps", "0"]);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    for row in v["matrix"].as_array().unwrap() {
        for p in row.as_array().unwrap() {
            assert_eq!(p.as_f64().unwrap(), 0.5);
        }
    }
}

#[test]
fn malformed_channel_json_fails() {
    let o = ldpm_stdin(&["channel", "measure"], "{not json");
    assert_ne!(o.status.code(), Some(0));
}

#[test]
fn embed_reports_privacy() {
    let rr = ldpm(&["channel", "rr", "--eps", "0.5", "--d", "8"]);
    let o = ldpm_stdin(&["channel", "embed", "--d", "8", "--H", "1,2,3,4"], &stdout(&rr));
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let e = v["privacy"]["epsilon"].as_f64().unwrap();
    let z = 0.5f64.exp() + 7.0;
    let expected = ((0.5f64.exp() + 3.0) / z / (4.0 / z)).ln();
    assert!((e - expected).abs() < 1e-12, "{e} vs {expected}");
}
