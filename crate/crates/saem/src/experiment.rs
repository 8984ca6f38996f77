//! Builds the configured model and dataset, runs replications and oracles.

use std::path::Path;

use rayon::prelude::*;
use saem_core::model::{validate_model, ValidationReport};
use saem_core::refmodels::{
    direct_mle, em_fixed_point, generate_bivariate, generate_censored_normal, generate_mixture,
    BivariateNormalMissingModel, CensoredNormalModel, CensoredProposal, MixtureModel, MixtureProposal, NormalMeanModel,
    ReferenceModel,
};
use saem_core::saem::run;
use saem_core::{rng_stream, ParamVector, RunReport, SaemConfig, SaemError};

use crate::config::{DataSource, ExperimentConfig, ModelKind, ProposalKind};
use crate::data;
use crate::error::CliError;

pub enum BuiltModel {
    Censored(CensoredNormalModel),
    Mixture(MixtureModel),
    Bivariate(BivariateNormalMissingModel),
    NormalMean(NormalMeanModel),
}

/// Runs `$body` with `$m` bound to the concrete model.
macro_rules! with_model {
    ($built:expr, $m:ident => $body:expr) => {
        match $built {
            BuiltModel::Censored($m) => $body,
            BuiltModel::Mixture($m) => $body,
            BuiltModel::Bivariate($m) => $body,
            BuiltModel::NormalMean($m) => $body,
        }
    };
}

impl BuiltModel {
    pub fn build(cfg: &ExperimentConfig) -> Result<Self, CliError> {
        let censored_proposal = match cfg.proposal {
            ProposalKind::RandomWalk => CensoredProposal::RandomWalk { scale: cfg.rw_scale },
            _ => CensoredProposal::Conditional,
        };
        let mixture_proposal = match cfg.proposal {
            ProposalKind::SingleFlip => MixtureProposal::SingleFlip,
            _ => MixtureProposal::Conditional,
        };
        Ok(match &cfg.data {
            DataSource::File(path) => match cfg.model {
                ModelKind::CensoredNormal => {
                    BuiltModel::Censored(CensoredNormalModel::new(data::read_censored(path)?).with_proposal(censored_proposal))
                }
                ModelKind::Mixture => {
                    BuiltModel::Mixture(MixtureModel::new(data::read_values(path)?).with_proposal(mixture_proposal))
                }
                ModelKind::NormalMean => BuiltModel::NormalMean(NormalMeanModel::new(data::read_values(path)?)),
                ModelKind::BivariateNormal => BuiltModel::Bivariate(
                    BivariateNormalMissingModel::new(data::read_bivariate(path)?)
                        .map_err(|e| CliError::DataFormat { path: path.clone(), line: 0, message: e.to_string() })?,
                ),
            },
            DataSource::Generated(g) => {
                let mut rng = rng_stream(g.seed, 0);
                match cfg.model {
                    ModelKind::CensoredNormal => BuiltModel::Censored(
                        CensoredNormalModel::new(generate_censored_normal(g.n, g.mean, g.sd, g.censor_fraction, &mut rng))
                            .with_proposal(censored_proposal),
                    ),
                    ModelKind::Mixture => BuiltModel::Mixture(
                        MixtureModel::new(generate_mixture(g.n, g.pi, g.mu1, g.mu2, &mut rng)).with_proposal(mixture_proposal),
                    ),
                    ModelKind::NormalMean => {
                        let mut values = generate_censored_normal(g.n, g.mean, 1.0, 0.0, &mut rng);
                        BuiltModel::NormalMean(NormalMeanModel::new(values.drain(..).map(|o| o.value).collect()))
                    }
                    ModelKind::BivariateNormal => BuiltModel::Bivariate(
                        BivariateNormalMissingModel::new(generate_bivariate(
                            g.n,
                            g.mean2,
                            g.sd2,
                            g.rho,
                            g.missing_fraction,
                            &mut rng,
                        ))
                        .map_err(|e| CliError::key("data.missing_fraction", e.to_string()))?,
                    ),
                }
            }
        })
    }

    pub fn size(&self) -> usize {
        with_model!(self, m => saem_core::Model::size_hint(m))
    }

    /// The configured starting point, checked against the model's bounds.
    pub fn theta0(&self, cfg: &ExperimentConfig) -> Result<ParamVector, CliError> {
        let values = match &cfg.theta0 {
            Some(v) => v.clone(),
            None => with_model!(self, m => m.initial_theta()),
        };
        let theta = ParamVector::new(values).map_err(|e| CliError::key("theta0", e.to_string()))?;
        with_model!(self, m => theta.check_against(m)).map_err(|e| CliError::key("theta0", e.to_string()))?;
        Ok(theta)
    }

    pub fn validate(&self, theta0: &ParamVector, points: usize, seed: u64) -> Result<ValidationReport, SaemError> {
        with_model!(self, m => validate_model(m, theta0, points, seed))
    }

    pub fn oracle(&self, theta0: &ParamVector) -> Oracle {
        with_model!(self, m => oracle(m, theta0))
    }

    pub fn run_replications(&self, theta0: &ParamVector, cfg: &ExperimentConfig, jobs: usize) -> Vec<Replication> {
        with_model!(self, m => run_replications(m, theta0, cfg, jobs))
    }
}

/// Reference solution of the observed-data likelihood.
#[derive(Debug, Clone)]
pub struct Oracle {
    /// Direct maximization, or the failure message.
    pub direct_mle: Result<Vec<f64>, String>,
    pub em_fixed_point: Vec<f64>,
    pub em_iterations: usize,
    pub loglik_at_mle: Option<f64>,
}

pub fn oracle<M: ReferenceModel>(model: &M, theta0: &ParamVector) -> Oracle {
    let direct = direct_mle(model, theta0).map_err(|e| e.to_string());
    let (em, k) = em_fixed_point(model, theta0, 1e-10, 100_000);
    Oracle {
        loglik_at_mle: direct.as_ref().ok().map(|t| model.exact_marginal_loglik(t)),
        direct_mle: direct,
        em_fixed_point: em,
        em_iterations: k,
    }
}

pub struct Replication {
    pub index: usize,
    pub seed: u64,
    pub result: Result<RunReport, SaemError>,
}

/// Replication `r` runs with seed `cfg.seed + r`; at most `jobs` at a time.
pub fn run_replications<M: ReferenceModel + Sync>(
    model: &M,
    theta0: &ParamVector,
    cfg: &ExperimentConfig,
    jobs: usize,
) -> Vec<Replication> {
    let one = |index: usize| {
        let seed = cfg.seed.wrapping_add(index as u64);
        let config = SaemConfig { seed, ..cfg.saem.clone() };
        Replication { index, seed, result: run(model, theta0, &config) }
    };
    if jobs <= 1 || cfg.replications == 1 {
        return (0..cfg.replications).map(one).collect();
    }
    match rayon::ThreadPoolBuilder::new().num_threads(jobs).build() {
        Ok(pool) => pool.install(|| (0..cfg.replications).into_par_iter().map(one).collect()),
        Err(_) => (0..cfg.replications).map(one).collect(),
    }
}

pub fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}
