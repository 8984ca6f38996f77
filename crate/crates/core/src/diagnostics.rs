//! Endpoint diagnostics: Polyak averaging of the trace and a stationarity
//! check of the estimated score.

use alloc::vec::Vec;


use crate::error::{Result, SaemError};
use crate::louis::estimate_score_with;
use crate::model::Model;
use crate::rng_stream;
use crate::saem::TraceRecord;
#[allow(unused_imports)]
use num_traits::Float;

/// Stream of [`rng_stream`] used by [`stationarity_residual`].
pub const STATIONARITY_STREAM: u64 = 2;
/// Discarded steps before the stationarity draws.
pub const STATIONARITY_BURN: usize = 1_000;

/// Mean of `θ` over the last `1 − burn_fraction` of the trace.
pub fn polyak_average(trace: &[TraceRecord], burn_fraction: f64) -> Result<Vec<f64>> {
    if !(0.0..1.0).contains(&burn_fraction) {
        return Err(SaemError::InvalidConfig("burn_fraction must lie in [0, 1)".into()));
    }
    let skip = (burn_fraction * trace.len() as f64).floor() as usize;
    let window = &trace[skip.min(trace.len())..];
    let first = window.first().ok_or(SaemError::EmptyWindow)?;
    let mut mean = alloc::vec![0.0; first.theta.len()];
    for (k, rec) in window.iter().enumerate() {
        let w = 1.0 / (k + 1) as f64;
        for (m, t) in mean.iter_mut().zip(&rec.theta) {
            *m += (t - *m) * w;
        }
    }
    Ok(mean)
}

#[derive(Debug, Clone, PartialEq)]
pub struct StationarityCheck {
    /// `‖ŝ(θ)‖₂`.
    pub residual: f64,
    /// `3 ‖mc_se‖₂`.
    pub threshold: f64,
    pub passed: bool,
    pub draws: usize,
}

/// Compares the Monte-Carlo score at `θ` with three times its own standard
/// error. An exactly zero score with zero error passes.
pub fn stationarity_residual<M: Model + ?Sized>(
    model: &M,
    theta: &[f64],
    draws: usize,
    seed: u64,
) -> Result<StationarityCheck> {
    if draws < 100 {
        return Err(SaemError::InvalidConfig("stationarity check needs at least 100 draws".into()));
    }
    let est = estimate_score_with(model, theta, draws, STATIONARITY_BURN, rng_stream(seed, STATIONARITY_STREAM))?;
    let residual = est.score.norm();
    let threshold = 3.0 * est.mc_se.norm();
    Ok(StationarityCheck { residual, threshold, passed: residual <= threshold, draws })
}
