use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn saem(args: &[&str], env_seed: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_saem"));
    cmd.args(args).env_remove("SAEM_SEED");
    if let Some(seed) = env_seed {
        cmd.env("SAEM_SEED", seed);
    }
    cmd.output().expect("binary runs")
}

fn example(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("examples").join(name)
}

fn write_config(dir: &Path, body: &str) -> PathBuf {
    let path = dir.join("exp.cfg");
    std::fs::write(&path, body).unwrap();
    path
}

fn report(dir: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("report.json")).unwrap()).unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn valid_run_writes_trace_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "model = censored_normal\nsaem.max_iter = 150\nlouis.draws = 2000\n");
    let out = saem(&["run", cfg.to_str().unwrap()], None);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let trace = std::fs::read_to_string(dir.path().join("saem-out/trace_0.csv")).unwrap();
    let mut lines = trace.lines();
    assert_eq!(lines.next().unwrap(), "iter,gamma,theta_1,theta_2,step_norm,accept_rate,gamma_regularized");
    let rows: Vec<_> = lines.collect();
    let rep = report(&dir.path().join("saem-out"));
    assert_eq!(rows.len() as u64, rep["replications"][0]["iterations"].as_u64().unwrap());
    assert_eq!(rows.len(), 150);
    for (k, row) in rows.iter().enumerate() {
        let fields: Vec<_> = row.split(',').collect();
        assert_eq!(fields.len(), 7);
        assert_eq!(fields[0], (k + 1).to_string());
    }
    assert_eq!(rep["model"], "censored_normal");
    assert_eq!(rep["parameters"][1], "log_sigma");
    assert!(rep["replications"][0]["standard_errors"].is_array());
}

#[test]
fn unknown_model_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "model = probit\n");
    let out = saem(&["run", cfg.to_str().unwrap()], None);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("`model`"), "{}", stderr(&out));
}

#[test]
fn unknown_key_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "model = mixture\ngain.alhpa = 0.7\n");
    let out = saem(&["validate", cfg.to_str().unwrap()], None);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("gain.alhpa"));
}

#[test]
fn bad_data_file_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("d.csv"), "value,censored\n1.0,2\n").unwrap();
    let cfg = write_config(dir.path(), "model = censored_normal\ndata.path = d.csv\n");
    let out = saem(&["run", cfg.to_str().unwrap()], None);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("line 2"));
    let cfg = write_config(dir.path(), "model = censored_normal\ndata.path = missing.csv\n");
    assert_eq!(saem(&["run", cfg.to_str().unwrap()], None).status.code(), Some(1));
}

#[test]
fn failed_run_exits_two_and_still_reports() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "model = censored_normal\nsaem.theta_ceiling = 1\n");
    let out = saem(&["run", cfg.to_str().unwrap()], None);
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));
    let rep = report(&dir.path().join("saem-out"));
    assert_eq!(rep["replications"][0]["status"], "error");
    assert!(rep["replications"][0]["error"].as_str().unwrap().contains("norm"));
}

#[test]
fn bundled_example_matches_recorded_oracle() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = example("censored_normal.cfg");
    let out = saem(&["run", cfg.to_str().unwrap(), "--output-dir", dir.path().to_str().unwrap()], None);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let oracle: Value = serde_json::from_str(&std::fs::read_to_string(example("censored_normal.oracle.json")).unwrap()).unwrap();
    let rep = report(dir.path());
    let theta = rep["replications"][0]["theta_hat"].as_array().unwrap();
    for (j, t) in theta.iter().enumerate() {
        let o = oracle["direct_mle"][j].as_f64().unwrap();
        let dev = (t.as_f64().unwrap() - o).abs() / o.abs();
        assert!(dev < 0.02, "coordinate {j}: {dev}");
    }
}

#[test]
fn oracle_subcommand_reproduces_recorded_values() {
    let out = saem(&["oracle", example("censored_normal.cfg").to_str().unwrap()], None);
    assert_eq!(out.status.code(), Some(0));
    let fresh: Value = serde_json::from_slice(&out.stdout).unwrap();
    let recorded: Value = serde_json::from_str(&std::fs::read_to_string(example("censored_normal.oracle.json")).unwrap()).unwrap();
    for j in 0..2 {
        let a = fresh["direct_mle"][j].as_f64().unwrap();
        let b = recorded["direct_mle"][j].as_f64().unwrap();
        assert!((a - b).abs() < 1e-9);
    }
}

#[test]
fn validate_subcommand_passes_on_every_model() {
    let dir = tempfile::tempdir().unwrap();
    for model in ["censored_normal", "mixture", "bivariate_normal", "normal_mean"] {
        let cfg = write_config(dir.path(), &format!("model = {model}\n"));
        let out = saem(&["validate", cfg.to_str().unwrap()], None);
        assert_eq!(out.status.code(), Some(0), "{model}: {}", stderr(&out));
        assert!(String::from_utf8_lossy(&out.stdout).contains("pass"));
    }
}

#[test]
fn env_seed_overrides_config_seed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "model = mixture\nseed = 5\nsaem.max_iter = 50\nlouis.draws = 200\n");
    let run = |seed: Option<&str>, out: &str| {
        let o = dir.path().join(out);
        let res = saem(&["run", cfg.to_str().unwrap(), "--output-dir", o.to_str().unwrap()], seed);
        assert_eq!(res.status.code(), Some(0), "{}", stderr(&res));
        (std::fs::read(o.join("trace_0.csv")).unwrap(), report(&o)["seed"].as_u64().unwrap())
    };
    let (plain, s0) = run(None, "a");
    let (same, s1) = run(Some("5"), "b");
    let (other, s2) = run(Some("6"), "c");
    assert_eq!((s0, s1, s2), (5, 5, 6));
    assert_eq!(plain, same);
    assert_ne!(plain, other);
    let bad = saem(&["run", cfg.to_str().unwrap()], Some("x"));
    assert_eq!(bad.status.code(), Some(1));
}

#[test]
fn parallel_replications_match_sequential() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "model = mixture\nreplications = 3\nsaem.max_iter = 100\nlouis.draws = 500\n");
    let run = |jobs: &str, out: &str| {
        let o = dir.path().join(out);
        let res = saem(&["run", cfg.to_str().unwrap(), "--jobs", jobs, "--output-dir", o.to_str().unwrap()], None);
        assert_eq!(res.status.code(), Some(0), "{}", stderr(&res));
        o
    };
    let seq = run("1", "seq");
    let par = run("3", "par");
    for r in 0..3 {
        let name = format!("trace_{r}.csv");
        assert_eq!(std::fs::read(seq.join(&name)).unwrap(), std::fs::read(par.join(&name)).unwrap());
    }
    assert_ne!(std::fs::read(seq.join("trace_0.csv")).unwrap(), std::fs::read(seq.join("trace_1.csv")).unwrap());
    assert_eq!(report(&seq)["replications"][2]["seed"], 3);
}

#[test]
fn help_documents_every_key() {
    let out = saem(&["run", "--help"], None);
    let text = String::from_utf8_lossy(&out.stdout);
    for (key, _, _) in saem::config::KEYS {
        assert!(text.contains(key), "missing {key}");
    }
    assert!(text.contains("SAEM_SEED"));
    assert!(text.contains("--jobs"));
}
