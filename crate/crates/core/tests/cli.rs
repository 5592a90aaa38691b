use std::path::Path;
use std::process::{Command, Output};

use overlap_core::io::{rows_from_csv, rows_from_json};

fn overlap(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_overlap"))
        .args(args)
        .env_remove("OVERLAP_THREADS")
        .output()
        .expect("run overlap binary")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("campaign.toml");
    std::fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_string()
}

const SMALL: &str = r#"
strategies = ["TT", "TP", "SCM", "OST", "ADAPTIVE"]
c_grid = [0.0, 0.5, 1.0]
m_pairs = 5
n_copies = 90
n_repeats = 3
r_runs = 2
seed = 11
"#;

#[test]
fn unknown_flag_is_a_usage_error() {
    let out = overlap(&["theory", "--strategy", "scm", "--c", "0", "--bogus"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn theory_prints_scaled_variance() {
    let out = overlap(&["theory", "--strategy", "scm", "--c", "0", "--n", "900"]);
    assert!(out.status.success());
    assert!(stdout(&out).lines().any(|l| l == "Nv = 1.0"), "{}", stdout(&out));
}

#[test]
fn crossover_prints_intersection() {
    let out = overlap(&["crossover", "--a", "tp", "--b", "scm"]);
    assert!(out.status.success());
    assert_eq!(stdout(&out).trim(), "0.363636364");
}

#[test]
fn overhead_prints_copy_count() {
    let out = overlap(&["overhead", "--strategy", "scm", "--c", "0.5", "--eps", "0.01", "--prob", "0.05"]);
    assert!(out.status.success());
    assert_eq!(stdout(&out).trim(), "150000");
}

#[test]
fn invalid_domain_fails_without_panicking() {
    let out = overlap(&["theory", "--strategy", "scm", "--c", "1.5"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));
}

#[test]
fn oracle_check_on_defaults_passes() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "");
    let out = overlap(&["oracle-check", &config]);
    assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));
    assert!(stdout(&out).lines().all(|l| l.starts_with("PASS")));
}

#[test]
fn benchmark_output_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), SMALL);
    let mut outputs = Vec::new();
    for (i, threads) in ["1", "3"].iter().enumerate() {
        let path = dir.path().join(format!("run{i}.csv"));
        let out = overlap(&["--threads", threads, "benchmark", &config, "--out", path.to_str().unwrap()]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        outputs.push(std::fs::read(&path).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
    let text = String::from_utf8(outputs[0].clone()).unwrap();
    assert!(text.starts_with("strategy,c_target,c_bar,c_bar_std,n_copies,nv,nv_std,theory_nv,seed\n"));
    assert_eq!(rows_from_csv(&text).unwrap().len(), 15);
}

#[test]
fn csv_and_json_reports_agree() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), SMALL);
    let csv = overlap(&["benchmark", &config]);
    let json = overlap(&["benchmark", &config, "--format", "json"]);
    assert!(csv.status.success() && json.status.success());
    assert_eq!(
        rows_from_csv(&stdout(&csv)).unwrap(),
        rows_from_json(&stdout(&json)).unwrap()
    );
}

#[test]
fn seed_flag_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), SMALL);
    let a = overlap(&["benchmark", &config, "--seed", "5"]);
    let b = overlap(&["--seed", "5", "benchmark", &config]);
    let c = overlap(&["benchmark", &config]);
    assert_eq!(a.stdout, b.stdout);
    assert_ne!(a.stdout, c.stdout);
    assert!(stdout(&a).lines().skip(1).all(|l| l.ends_with(",5")));
}

#[test]
fn bad_config_names_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "n_copies = 100\nstrategies = [\"TT\"]\n");
    let out = overlap(&["benchmark", &config]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("n_copies"));
}

#[test]
fn missing_output_directory_reports_path() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), SMALL);
    let target = dir.path().join("absent").join("out.csv");
    let out = overlap(&["benchmark", &config, "--out", target.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("absent"));
}
