//! Experiment runner for `saem-core`.
//!
//! An experiment is a `key = value` configuration file naming a reference
//! model, a dataset (CSV file or seeded generator), a starting point and the
//! engine settings. `run` executes the configured replications and writes
//! one trace CSV per replication plus `report.json`; `validate` checks the
//! model's derivatives by finite differences; `oracle` solves the observed
//! likelihood directly and by exact EM.

pub mod config;
pub mod data;
pub mod error;
pub mod experiment;
pub mod output;

use std::path::{Path, PathBuf};

pub use config::ExperimentConfig;
pub use error::CliError;

use experiment::{ensure_dir, BuiltModel};
use output::{replication_json, OracleJson, ReportJson};

/// Reads `SAEM_SEED`; a present but malformed value is a configuration error.
pub fn seed_from_env() -> Result<Option<u64>, CliError> {
    match std::env::var("SAEM_SEED") {
        Ok(v) => v.trim().parse().map(Some).map_err(|_| CliError::key("SAEM_SEED", format!("cannot parse `{v}`"))),
        Err(_) => Ok(None),
    }
}

fn load(config_path: &Path, output_dir: Option<&Path>) -> Result<(ExperimentConfig, BuiltModel), CliError> {
    let mut cfg = ExperimentConfig::load(config_path, seed_from_env()?)?;
    if let Some(dir) = output_dir {
        cfg.output_dir = dir.to_path_buf();
    }
    let model = BuiltModel::build(&cfg)?;
    Ok((cfg, model))
}

/// Summary of a finished `run` for the caller.
#[derive(Debug)]
pub struct RunOutcome {
    pub output_dir: PathBuf,
}

pub fn run_experiment(config_path: &Path, output_dir: Option<&Path>, jobs: usize) -> Result<RunOutcome, CliError> {
    let (cfg, model) = load(config_path, output_dir)?;
    let theta0 = model.theta0(&cfg)?;
    ensure_dir(&cfg.output_dir)?;

    let oracle = model.oracle(&theta0);
    let reps = model.run_replications(&theta0, &cfg, jobs);
    let p = theta0.dim();

    let mut entries = Vec::with_capacity(reps.len());
    for rep in &reps {
        let name = format!("trace_{}.csv", rep.index);
        if let Ok(report) = &rep.result {
            output::write_file(&cfg.output_dir.join(&name), &output::trace_csv(&report.trace, p))?;
        }
        entries.push(replication_json(rep, name, &oracle));
    }
    let report = ReportJson {
        model: cfg.model.name().into(),
        observations: model.size(),
        parameters: cfg.model.parameter_names().iter().map(|s| s.to_string()).collect(),
        theta0: theta0.to_vec(),
        seed: cfg.seed,
        t: cfg.saem.t,
        oracle: OracleJson::from(&oracle),
        replications: entries,
    };
    let json = serde_json::to_string_pretty(&report).map_err(|e| CliError::Failed(e.to_string()))?;
    output::write_file(&cfg.output_dir.join("report.json"), &(json + "\n"))?;

    if let Some(rep) = reps.iter().find(|r| r.result.is_err()) {
        let source = rep.result.as_ref().err().cloned().expect("checked above");
        return Err(CliError::Run { replication: rep.index, source });
    }
    Ok(RunOutcome { output_dir: cfg.output_dir })
}

/// Finite-difference checks at `theta0`; the error case carries the report.
pub fn validate_experiment(config_path: &Path) -> Result<String, CliError> {
    let (cfg, model) = load(config_path, None)?;
    let theta0 = model.theta0(&cfg)?;
    let report = model
        .validate(&theta0, cfg.validate_points, cfg.seed)
        .map_err(|source| CliError::Run { replication: 0, source })?;
    let text = format!(
        "model {}: {} points\n  score   max rel error {:.3e}  {}\n  info    max rel error {:.3e}  {}\n  symmetry max deviation {:.3e}  {}\n",
        cfg.model.name(),
        report.points,
        report.score_max_rel_error,
        verdict(report.score_passed),
        report.info_max_rel_error,
        verdict(report.info_passed),
        report.max_asymmetry,
        verdict(report.symmetry_passed),
    );
    if report.passed() {
        Ok(text)
    } else {
        Err(CliError::Failed(format!("{text}validation failed")))
    }
}

fn verdict(ok: bool) -> &'static str {
    if ok {
        "pass"
    } else {
        "FAIL"
    }
}

/// Direct maximization and exact-EM solution, as JSON.
pub fn oracle_experiment(config_path: &Path) -> Result<String, CliError> {
    let (cfg, model) = load(config_path, None)?;
    let theta0 = model.theta0(&cfg)?;
    let oracle = OracleJson::from(&model.oracle(&theta0));
    let json = serde_json::to_string_pretty(&oracle).map_err(|e| CliError::Failed(e.to_string()))?;
    if let Some(err) = &oracle.direct_mle_error {
        return Err(CliError::Failed(format!("{json}\ndirect maximization failed: {err}")));
    }
    Ok(json)
}
