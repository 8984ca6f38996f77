//! Trace CSV files and the JSON report.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::DMatrix;
use saem_core::TraceRecord;
use serde::Serialize;

use crate::error::CliError;
use crate::experiment::{Oracle, Replication};

/// Fixed 17-significant-digit rendering, so equal values give equal bytes.
pub fn fmt_float(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn trace_csv(trace: &[TraceRecord], p: usize) -> String {
    let mut out = String::from("iter,gamma");
    for j in 1..=p {
        let _ = write!(out, ",theta_{j}");
    }
    out.push_str(",step_norm,accept_rate,gamma_regularized\n");
    for rec in trace {
        let _ = write!(out, "{},{}", rec.iter, fmt_float(rec.gamma));
        for v in &rec.theta {
            let _ = write!(out, ",{}", fmt_float(*v));
        }
        let _ = writeln!(
            out,
            ",{},{},{}",
            fmt_float(rec.step_norm),
            fmt_float(rec.accept_rate),
            u8::from(rec.gamma_regularized)
        );
    }
    out
}

pub fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    std::fs::write(path, contents).map_err(|e| CliError::io(path, e))
}

#[derive(Debug, Serialize)]
pub struct StationarityJson {
    pub residual: f64,
    pub threshold: f64,
    pub passed: bool,
    pub draws: usize,
}

#[derive(Debug, Serialize)]
pub struct ReplicationJson {
    pub replication: usize,
    pub seed: u64,
    pub trace_file: String,
    pub status: String,
    pub error: Option<String>,
    pub iterations: Option<u64>,
    pub theta_hat: Option<Vec<f64>>,
    pub standard_errors: Option<Vec<f64>>,
    pub information_positive_definite: Option<bool>,
    pub h: Option<Vec<f64>>,
    pub gamma_t: Option<Vec<Vec<f64>>>,
    pub gamma_one: Option<Vec<Vec<f64>>>,
    pub stationarity: Option<StationarityJson>,
    pub polyak_average: Option<Vec<f64>>,
    pub acceptance_rate: Option<f64>,
    pub chain_stuck: Option<bool>,
    pub rejected_non_finite: Option<u64>,
    /// `|θ̂ⱼ − oracleⱼ| / max(|oracleⱼ|, 1e-12)` against the direct MLE.
    pub oracle_rel_deviation: Option<Vec<f64>>,
}

#[derive(Debug, Serialize)]
pub struct OracleJson {
    pub direct_mle: Option<Vec<f64>>,
    pub direct_mle_error: Option<String>,
    pub em_fixed_point: Vec<f64>,
    pub em_iterations: usize,
    pub loglik_at_mle: Option<f64>,
}

impl From<&Oracle> for OracleJson {
    fn from(o: &Oracle) -> Self {
        OracleJson {
            direct_mle: o.direct_mle.as_ref().ok().cloned(),
            direct_mle_error: o.direct_mle.as_ref().err().cloned(),
            em_fixed_point: o.em_fixed_point.clone(),
            em_iterations: o.em_iterations,
            loglik_at_mle: o.loglik_at_mle,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct ReportJson {
    pub model: String,
    pub observations: usize,
    pub parameters: Vec<String>,
    pub theta0: Vec<f64>,
    pub seed: u64,
    pub t: f64,
    pub oracle: OracleJson,
    pub replications: Vec<ReplicationJson>,
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

pub fn replication_json(rep: &Replication, trace_file: String, oracle: &Oracle) -> ReplicationJson {
    match &rep.result {
        Err(e) => ReplicationJson {
            replication: rep.index,
            seed: rep.seed,
            trace_file,
            status: "error".into(),
            error: Some(e.to_string()),
            iterations: None,
            theta_hat: None,
            standard_errors: None,
            information_positive_definite: None,
            h: None,
            gamma_t: None,
            gamma_one: None,
            stationarity: None,
            polyak_average: None,
            acceptance_rate: None,
            chain_stuck: None,
            rejected_non_finite: None,
            oracle_rel_deviation: None,
        },
        Ok(r) => ReplicationJson {
            replication: rep.index,
            seed: rep.seed,
            trace_file,
            status: match r.status {
                saem_core::RunStatus::NotStarted => "not_started",
                saem_core::RunStatus::Converged => "converged",
                saem_core::RunStatus::NotConverged => "not_converged",
            }
            .into(),
            error: None,
            iterations: Some(r.iterations),
            theta_hat: Some(r.theta.clone()),
            standard_errors: r.standard_errors.clone(),
            information_positive_definite: r.information.as_ref().map(|i| i.positive_definite),
            h: Some(r.h.clone()),
            gamma_t: Some(rows(&r.gamma_t)),
            gamma_one: Some(rows(&r.gamma_one)),
            stationarity: r.stationarity.as_ref().map(|s| StationarityJson {
                residual: s.residual,
                threshold: s.threshold,
                passed: s.passed,
                draws: s.draws,
            }),
            polyak_average: r.polyak_average.clone(),
            acceptance_rate: Some(r.acceptance_rate),
            chain_stuck: Some(r.chain_stuck),
            rejected_non_finite: Some(r.rejected_non_finite),
            oracle_rel_deviation: oracle.direct_mle.as_ref().ok().map(|o| {
                r.theta.iter().zip(o).map(|(a, b)| (a - b).abs() / b.abs().max(1e-12)).collect()
            }),
        },
    }
}
