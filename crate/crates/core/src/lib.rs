//! Stochastic-approximation EM for incomplete-data maximum likelihood.
//!
//! The engine alternates two steps per iteration. A Metropolis-Hastings chain
//! targeting `f(z | x, θ)` is advanced for a block of draws (warm-started from
//! the previous block), then the running estimates of the observed score `h`,
//! the complete-data information and the score second moment are moved toward
//! the block averages with a Robbins-Monro gain `γ_i`, and `θ` takes a
//! preconditioned step `γ_i Γ(t)⁻¹ H̄`.
//!
//! `Γ(t) = E[I − t S Sᵀ | x, θ] + s sᵀ` interpolates between the
//! complete-data information (`t = 0`) and Louis' observed information
//! (`t = 1`), which also yields standard errors at the estimate.
//!
//! The crate is `no_std` and needs only `alloc`. File formats, configuration
//! and the command line live in the `saem` crate.
//!
//! Modules:
//! - [`model`]: the [`Model`] contract and finite-difference validation.
//! - [`sampler`]: the Metropolis-Hastings chain and block statistics.
//! - [`gain`]: gain schedules and their Robbins-Monro conditions.
//! - [`saem`]: the iteration itself and the run driver.
//! - [`louis`]: Monte-Carlo score, observed information, standard errors.
//! - [`refmodels`]: reference models with exact EM, marginal likelihoods and
//!   direct maximization.
//! - [`diagnostics`]: Polyak averages and the stationarity residual.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod diagnostics;
mod error;
pub mod fd;
pub mod gain;
pub mod linalg;
pub mod louis;
pub mod model;
pub mod refmodels;
pub mod saem;
pub mod sampler;
pub mod special;

pub use error::{Result, SaemError};
pub use gain::{ConditionReport, GainKind, GainSchedule};
pub use louis::{InformationEstimate, ScoreEstimate};
pub use model::{ConditionalMoments, Interval, Model, ParamVector, Proposal, ValidationReport};
pub use saem::{RunReport, RunStatus, SaemConfig, SaemState, TraceRecord};
pub use sampler::{BlockStats, ChainState};

/// Pseudorandom stream used by every chain. ChaCha output is platform
/// independent, so a seed pins a trajectory bit for bit.
pub type SaemRng = rand_chacha::ChaCha8Rng;

/// Builds the stream `stream` of the generator seeded with `seed`.
pub fn rng_stream(seed: u64, stream: u64) -> SaemRng {
    use rand::SeedableRng;
    let mut rng = SaemRng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
