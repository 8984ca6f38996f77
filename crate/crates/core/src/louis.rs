//! Observed information by the missing-information identity
//!
//! ```text
//! −∂² log L(θ; x) = E[I − S Sᵀ | x, θ] + s sᵀ,   s = E[S | x, θ]
//! ```
//!
//! with the conditional expectations replaced by averages along a dedicated
//! Metropolis-Hastings chain.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::error::{Result, SaemError};
use crate::model::Model;
use crate::sampler::{mh_step, BlockStats, ChainState};
use crate::{linalg, rng_stream, SaemRng};
use crate::model::{evaluate_info, evaluate_score};
#[allow(unused_imports)]
use num_traits::Float;

/// Stream of [`rng_stream`] used by the estimators in this module.
pub const LOUIS_STREAM: u64 = 1;
/// Number of batches for the batch-means standard error.
pub const BATCHES: usize = 20;

/// Monte-Carlo estimate of the observed score with batch-means standard
/// errors per coordinate.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreEstimate {
    pub score: DVector<f64>,
    pub mc_se: DVector<f64>,
    pub draws: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InformationEstimate {
    /// `Î − mean S Sᵀ + ŝ ŝᵀ`, exactly symmetric.
    pub obs_info: DMatrix<f64>,
    pub score: ScoreEstimate,
    pub mean_info: DMatrix<f64>,
    pub mean_score_outer: DMatrix<f64>,
    pub mc_draws: usize,
    pub positive_definite: bool,
}

impl InformationEstimate {
    /// Conditional covariance of the complete-data score.
    pub fn missing_information(&self) -> DMatrix<f64> {
        let mut m = &self.mean_score_outer - linalg::outer(&self.score.score);
        linalg::symmetrize(&mut m);
        m
    }
}

struct Draws {
    stats: BlockStats,
    batch_means: Vec<DVector<f64>>,
}

fn collect<M: Model + ?Sized>(model: &M, theta: &[f64], draws: usize, burn: usize, rng: SaemRng) -> Result<Draws> {
    let mut chain = ChainState::new(model, theta, rng)?;
    for _ in 0..burn {
        mh_step(model, theta, &mut chain)?;
    }
    let p = model.dim();
    let batches = BATCHES.min(draws);
    let batch_len = draws / batches;
    let mut stats = BlockStats::new(p);
    let mut batch_means = Vec::with_capacity(batches);
    let mut current = BlockStats::new(p);
    for k in 0..draws {
        if mh_step(model, theta, &mut chain)? {
            stats.accepted += 1;
        }
        let s = evaluate_score(model, theta, chain.current())?;
        let info = evaluate_info(model, theta, chain.current())?;
        stats.push(&s, &info);
        if k < batches * batch_len {
            current.push(&s, &info);
            if current.draws == batch_len {
                batch_means.push(current.mean_score.clone());
                current = BlockStats::new(p);
            }
        }
    }
    Ok(Draws { stats, batch_means })
}

/// Batch-means standard error. Deviations are taken from the first batch so
/// identical batches give exactly zero.
fn batch_se(batch_means: &[DVector<f64>], p: usize) -> DVector<f64> {
    let b = batch_means.len();
    if b < 2 {
        return DVector::from_element(p, f64::INFINITY);
    }
    let shift = &batch_means[0];
    DVector::from_fn(p, |j, _| {
        let d: Vec<f64> = batch_means.iter().map(|m| m[j] - shift[j]).collect();
        let mean = d.iter().sum::<f64>() / b as f64;
        let var = d.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (b - 1) as f64;
        (var / b as f64).sqrt()
    })
}

fn score_estimate(draws: &Draws, p: usize) -> ScoreEstimate {
    ScoreEstimate {
        score: draws.stats.mean_score.clone(),
        mc_se: batch_se(&draws.batch_means, p),
        draws: draws.stats.draws,
    }
}

/// `ŝ` from `draws` states after `burn` discarded steps, starting from
/// `init_latent(θ)`.
pub fn estimate_score<M: Model + ?Sized>(
    model: &M,
    theta: &[f64],
    draws: usize,
    burn: usize,
    seed: u64,
) -> Result<ScoreEstimate> {
    estimate_score_with(model, theta, draws, burn, rng_stream(seed, LOUIS_STREAM))
}

/// [`estimate_score`] with a caller-supplied generator.
pub fn estimate_score_with<M: Model + ?Sized>(
    model: &M,
    theta: &[f64],
    draws: usize,
    burn: usize,
    rng: SaemRng,
) -> Result<ScoreEstimate> {
    if draws == 0 {
        return Err(SaemError::InvalidConfig("score estimate needs at least one draw".into()));
    }
    check_theta(model, theta)?;
    let d = collect(model, theta, draws, burn, rng)?;
    Ok(score_estimate(&d, model.dim()))
}

/// Observed information at `θ` from `draws` states after `burn`.
pub fn louis_information<M: Model + ?Sized>(
    model: &M,
    theta: &[f64],
    draws: usize,
    burn: usize,
    seed: u64,
) -> Result<InformationEstimate> {
    if draws < 2 {
        return Err(SaemError::InvalidConfig("information estimate needs at least two draws".into()));
    }
    check_theta(model, theta)?;
    let d = collect(model, theta, draws, burn, rng_stream(seed, LOUIS_STREAM))?;
    let p = model.dim();
    let score = score_estimate(&d, p);
    let mut obs_info = &d.stats.mean_info - &d.stats.mean_score_outer + linalg::outer(&score.score);
    linalg::symmetrize(&mut obs_info);
    if !linalg::is_finite(&obs_info) {
        return Err(SaemError::NonFiniteEvaluation { what: "observed information" });
    }
    let positive_definite = linalg::is_positive_definite(&obs_info);
    Ok(InformationEstimate {
        obs_info,
        score,
        mean_info: d.stats.mean_info,
        mean_score_outer: d.stats.mean_score_outer,
        mc_draws: draws,
        positive_definite,
    })
}

/// Square roots of the diagonal of the inverse observed information.
pub fn standard_errors(info: &InformationEstimate) -> Result<Vec<f64>> {
    standard_errors_of(&info.obs_info)
}

/// [`standard_errors`] for a bare information matrix.
pub fn standard_errors_of(obs_info: &DMatrix<f64>) -> Result<Vec<f64>> {
    let inv = linalg::spd_inverse(obs_info).ok_or(SaemError::IndefiniteInformation)?;
    let se: Vec<f64> = (0..inv.nrows()).map(|j| inv[(j, j)].sqrt()).collect();
    if se.iter().all(|v| v.is_finite() && *v > 0.0) {
        Ok(se)
    } else {
        Err(SaemError::IndefiniteInformation)
    }
}

fn check_theta<M: Model + ?Sized>(model: &M, theta: &[f64]) -> Result<()> {
    if theta.len() != model.dim() {
        return Err(SaemError::DimensionMismatch { what: "theta", expected: model.dim(), found: theta.len() });
    }
    if !model.contains(theta) {
        return Err(SaemError::InvalidParameter("theta outside the parameter space".into()));
    }
    Ok(())
}
