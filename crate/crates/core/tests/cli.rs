//! End-to-end tests of the `spikesel` binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::time::{Duration, Instant};

use spikesel::cli::{RunConfigFile, EXIT_CONFIG, THREADS_ENV};

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_spikesel"));
    cmd.env_remove(THREADS_ENV);
    cmd
}

fn repo_file(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..").join(rel)
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8(out.stderr.clone()).unwrap()
}

fn run(cmd: &mut Command) -> Output {
    cmd.output().expect("binary runs")
}

fn selected(out: &Output) -> usize {
    assert!(out.status.success(), "stderr: {}", stderr(out));
    let text = stdout(out);
    let last = text.lines().last().unwrap();
    last.strip_prefix("selected,").unwrap().parse().unwrap()
}

fn write_temp(dir: &tempfile::TempDir, name: &str, body: &str) -> PathBuf {
    let path = dir.path().join(name);
    std::fs::write(&path, body).unwrap();
    path
}

#[test]
fn experiment_header_reports_thresholds() {
    let out = run(bin().args(["experiment", "--replications", "1", "--format", "csv", "--config"])
        .arg(repo_file("configs/table2_goe.toml")));
    assert!(out.status.success(), "stderr: {}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("lambda_gamma = 1.31"), "{text}");
    assert!(text.contains("lambda_2+delta_N = 1.04"), "{text}");
    assert!(text.contains("estimator,scenario,mean,sd,pcs,pcs_se,replications,failures,status"));
    // 5 estimators x 4 scenarios minus SCREE under S4
    assert_eq!(text.lines().filter(|l| !l.starts_with('#')).count(), 1 + 19);
}

#[test]
fn smoke_config_is_fast() {
    let start = Instant::now();
    let out = run(bin().arg("experiment").arg("--config").arg(repo_file("configs/smoke.toml")));
    assert!(out.status.success(), "stderr: {}", stderr(&out));
    assert!(start.elapsed() < Duration::from_secs(5));
    assert!(stdout(&out).contains("GAIC_gamma"));
}

#[test]
fn every_shipped_config_parses() {
    for entry in std::fs::read_dir(repo_file("configs")).unwrap() {
        let path = entry.unwrap().path();
        RunConfigFile::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    }
}

#[test]
fn config_errors_exit_with_code_two_and_name_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let smoke = std::fs::read_to_string(repo_file("configs/smoke.toml")).unwrap();

    let malformed = write_temp(&dir, "bad_n.toml", &smoke.replace("n = 50", "n = \"fifty\""));
    let out = run(bin().arg("experiment").arg("--config").arg(&malformed));
    assert_eq!(out.status.code(), Some(EXIT_CONFIG as i32));
    assert!(stderr(&out).contains("n = \"fifty\""), "{}", stderr(&out));

    let unknown = write_temp(&dir, "unknown.toml", &smoke.replace("q = 5", "q = 5\nquantile = 3"));
    let out = run(bin().arg("experiment").arg("--config").arg(&unknown));
    assert_eq!(out.status.code(), Some(EXIT_CONFIG as i32));
    assert!(stderr(&out).contains("quantile"), "{}", stderr(&out));

    let invalid = write_temp(&dir, "q_too_big.toml", &smoke.replace("q = 5", "q = 50"));
    let out = run(bin().arg("experiment").arg("--config").arg(&invalid));
    assert_eq!(out.status.code(), Some(EXIT_CONFIG as i32));
    assert!(stderr(&out).contains("experiment.q"), "{}", stderr(&out));
}

#[test]
fn dump_config_roundtrips() {
    let path = repo_file("configs/table1_goe.toml");
    let out = run(bin().args(["experiment", "--dump-config", "--seed", "9", "--config"]).arg(&path));
    assert!(out.status.success(), "stderr: {}", stderr(&out));
    let dumped = RunConfigFile::parse(&stdout(&out)).unwrap();
    let mut original = RunConfigFile::load(&path).unwrap();
    original.experiment.master_seed = 9;
    assert_eq!(dumped.experiment_config(), original.experiment_config());
}

#[test]
fn csv_output_is_independent_of_threads_and_reruns() {
    let config = repo_file("configs/smoke.toml");
    let csv = |threads: Option<&str>, env: Option<&str>| {
        let mut cmd = bin();
        cmd.args(["experiment", "--replications", "20", "--format", "csv", "--config"]).arg(&config);
        if let Some(t) = threads {
            cmd.args(["--threads", t]);
        }
        if let Some(t) = env {
            cmd.env(THREADS_ENV, t);
        }
        let out = run(&mut cmd);
        assert!(out.status.success(), "stderr: {}", stderr(&out));
        out.stdout
    };
    let reference = csv(Some("1"), None);
    assert_eq!(reference, csv(Some("1"), None));
    assert_eq!(reference, csv(Some("4"), None));
    assert_eq!(reference, csv(None, Some("3")));
    assert_eq!(reference, csv(None, None));
}

#[test]
fn json_lines_output_parses() {
    let out = run(bin().args(["experiment", "--format", "json-lines", "--config"])
        .arg(repo_file("configs/smoke.toml")));
    assert!(out.status.success());
    let lines: Vec<serde_json::Value> = stdout(&out)
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(lines.len(), 1 + 19);
}

#[test]
fn curves_known_points() {
    let out = run(bin().args(["curves", "--x-min", "0.5", "--x-step", "0.5", "--gamma-step", "0.05"]));
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.starts_with("curve,sigma,argument,value\n"));
    assert!(text.lines().any(|l| l == "psi,1,1,2"), "{text}");
    assert!(text.lines().any(|l| l == "lambda_gamma,1,2,1"));
    assert!(text.lines().any(|l| l == "lambda_gamma,1,2.15,1.31068"));
}

#[test]
fn estimate_noiseless_and_edge_cases() {
    let dir = tempfile::tempdir().unwrap();
    let n = 10;
    let mut body = format!("{n}\n");
    for i in 0..n {
        let row: Vec<String> = (0..n)
            .map(|j| match (i, j) {
                (0, 0) => "5".into(),
                (1, 1) => "3".into(),
                _ => "0".into(),
            })
            .collect();
        body.push_str(&row.join(" "));
        body.push('\n');
    }
    let path = write_temp(&dir, "noiseless.txt", &body);
    let estimate = |extra: &[&str]| {
        let mut cmd = bin();
        cmd.arg("estimate").arg("--matrix").arg(&path).args(extra);
        run(&mut cmd)
    };
    assert_eq!(selected(&estimate(&["--sigma", "1"])), 2);
    assert_eq!(selected(&estimate(&["--sigma", "1", "--q", "0"])), 0);
    assert!(!estimate(&["--sigma", "1", "--q", "10"]).status.success());
    assert!(!estimate(&[]).status.success(), "S1 without --sigma");

    let asym = write_temp(&dir, "asym.txt", "2\n1 0.5\n0.4 1\n");
    let out = run(bin().arg("estimate").arg("--matrix").arg(&asym).args(["--sigma", "1"]));
    assert!(!out.status.success());
}

#[test]
fn estimate_golden_fixture() {
    let expected: [(&str, [Option<usize>; 4]); 5] = [
        ("AIC", [Some(3), Some(2), Some(3), Some(4)]),
        ("GAIC_delta", [Some(3), Some(2), Some(3), Some(4)]),
        ("SAIC", [Some(3), Some(2), Some(3), Some(3)]),
        ("GAIC_gamma", [Some(3), Some(2), Some(3), Some(3)]),
        ("SCREE", [Some(3), Some(2), Some(3), None]),
    ];
    let matrix = fixture("goe_n40_seed7.txt");
    for (estimator, per_scenario) in expected {
        for (s, want) in ["S1", "S2", "S3", "S4"].iter().zip(per_scenario) {
            let out = run(bin()
                .arg("estimate")
                .arg("--matrix")
                .arg(&matrix)
                .args(["--q", "10", "--sigma", "1", "--estimator", estimator, "--scenario", s]));
            match want {
                Some(k) => assert_eq!(selected(&out), k, "{estimator} {s}"),
                None => assert!(!out.status.success(), "{estimator} {s}"),
            }
        }
    }
}
