//! Metropolis-Hastings chain targeting `f(z | x, θ)` and the block statistics
//! consumed by the stochastic-approximation update.
//!
//! Since `f(z | x, θ) ∝ f(x, z; θ)`, acceptance only needs complete-data
//! log-likelihood differences. The chain is warm-started: the last state of
//! one block is the first state of the next, with its cached log-likelihood
//! re-evaluated whenever `θ` changes.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::error::{Result, SaemError};
use crate::linalg;
use crate::model::{evaluate_info, evaluate_score, Model};
use crate::SaemRng;
#[allow(unused_imports)]
use num_traits::Float;

/// Proposals per acceptance-rate window for the stuck-chain warning.
pub const STUCK_WINDOW: u64 = 500;
/// Acceptance rate below which a window marks the chain as stuck.
pub const STUCK_RATE: f64 = 0.01;

/// `min(1, exp(l_c(z') − l_c(z) + log q-ratio))`; zero for NaN inputs.
pub fn acceptance_probability(current_loglik: f64, candidate_loglik: f64, log_ratio: f64) -> f64 {
    let log_alpha = candidate_loglik - current_loglik + log_ratio;
    if log_alpha.is_nan() {
        0.0
    } else if log_alpha >= 0.0 {
        1.0
    } else {
        log_alpha.exp()
    }
}

#[derive(Debug, Clone)]
pub struct ChainState<L> {
    current: L,
    current_loglik: f64,
    scored_at: Vec<f64>,
    accepted: u64,
    proposed: u64,
    rejected_non_finite: u64,
    window_accepted: u64,
    window_proposed: u64,
    stuck: bool,
    rng: SaemRng,
}

impl<L: Clone> ChainState<L> {
    /// Starts a chain from `model.init_latent(θ)`.
    pub fn new<M: Model<Latent = L> + ?Sized>(model: &M, theta: &[f64], mut rng: SaemRng) -> Result<Self> {
        let z = model.init_latent(theta, &mut rng);
        Self::from_latent(model, theta, z, rng)
    }

    pub fn from_latent<M: Model<Latent = L> + ?Sized>(
        model: &M,
        theta: &[f64],
        z: L,
        rng: SaemRng,
    ) -> Result<Self> {
        let current_loglik = model.complete_loglik(theta, &z);
        if !current_loglik.is_finite() {
            return Err(SaemError::NonFiniteEvaluation { what: "complete_loglik of the current state" });
        }
        Ok(Self {
            current: z,
            current_loglik,
            scored_at: theta.to_vec(),
            accepted: 0,
            proposed: 0,
            rejected_non_finite: 0,
            window_accepted: 0,
            window_proposed: 0,
            stuck: false,
            rng,
        })
    }

    pub fn current(&self) -> &L {
        &self.current
    }

    /// Cached `l_c` of the current state at the last `θ` it was scored at.
    pub fn current_loglik(&self) -> f64 {
        self.current_loglik
    }

    pub fn accepted(&self) -> u64 {
        self.accepted
    }

    pub fn proposed(&self) -> u64 {
        self.proposed
    }

    /// Candidates rejected because their log-likelihood or proposal ratio was NaN.
    pub fn rejected_non_finite(&self) -> u64 {
        self.rejected_non_finite
    }

    /// Set when the last full window of [`STUCK_WINDOW`] proposals accepted
    /// fewer than [`STUCK_RATE`] of them.
    pub fn is_stuck(&self) -> bool {
        self.stuck
    }

    pub fn acceptance_rate(&self) -> f64 {
        if self.proposed == 0 {
            0.0
        } else {
            self.accepted as f64 / self.proposed as f64
        }
    }

    pub fn rng_mut(&mut self) -> &mut SaemRng {
        &mut self.rng
    }

    fn rescore<M: Model<Latent = L> + ?Sized>(&mut self, model: &M, theta: &[f64]) -> Result<()> {
        if self.scored_at.as_slice() != theta {
            self.current_loglik = model.complete_loglik(theta, &self.current);
            self.scored_at.clear();
            self.scored_at.extend_from_slice(theta);
        }
        if !self.current_loglik.is_finite() {
            return Err(SaemError::NonFiniteEvaluation { what: "complete_loglik of the current state" });
        }
        Ok(())
    }

    fn record(&mut self, accepted: bool) {
        self.proposed += 1;
        self.window_proposed += 1;
        if accepted {
            self.accepted += 1;
            self.window_accepted += 1;
        }
        if self.window_proposed == STUCK_WINDOW {
            self.stuck = (self.window_accepted as f64) < STUCK_RATE * STUCK_WINDOW as f64;
            self.window_proposed = 0;
            self.window_accepted = 0;
        }
    }
}

/// One Metropolis-Hastings transition at `θ`. Returns whether the candidate
/// was accepted. A NaN candidate is rejected and counted, not an error.
pub fn mh_step<M: Model + ?Sized>(
    model: &M,
    theta: &[f64],
    state: &mut ChainState<M::Latent>,
) -> Result<bool> {
    state.rescore(model, theta)?;
    let proposal = model.propose(theta, &state.current, &mut state.rng);
    let candidate_loglik = model.complete_loglik(theta, &proposal.candidate);

    if candidate_loglik.is_nan() || candidate_loglik == f64::INFINITY || proposal.log_ratio.is_nan() {
        state.rejected_non_finite += 1;
        state.record(false);
        return Ok(false);
    }

    let log_alpha = candidate_loglik - state.current_loglik + proposal.log_ratio;
    let accept = if log_alpha >= 0.0 {
        true
    } else {
        let u: f64 = state.rng.random();
        u.ln() < log_alpha
    };
    if accept {
        state.current = proposal.candidate;
        state.current_loglik = candidate_loglik;
    }
    state.record(accept);
    Ok(accept)
}

/// Averages over the states visited by one block: `H̄ = mean S`,
/// `Ī = mean I`, and `mean S Sᵀ`. Kept as running means, so constant inputs
/// come back bit-exact.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockStats {
    pub draws: usize,
    pub mean_score: DVector<f64>,
    pub mean_info: DMatrix<f64>,
    pub mean_score_outer: DMatrix<f64>,
    pub accepted: u64,
}

impl BlockStats {
    pub fn new(p: usize) -> Self {
        Self {
            draws: 0,
            mean_score: DVector::zeros(p),
            mean_info: DMatrix::zeros(p, p),
            mean_score_outer: DMatrix::zeros(p, p),
            accepted: 0,
        }
    }

    pub fn push(&mut self, score: &DVector<f64>, info: &DMatrix<f64>) {
        self.draws += 1;
        let w = 1.0 / self.draws as f64;
        let so = linalg::outer(score);
        self.mean_score += (score - &self.mean_score) * w;
        self.mean_info += (info - &self.mean_info) * w;
        self.mean_score_outer += (so - &self.mean_score_outer) * w;
    }

    pub fn acceptance_rate(&self) -> f64 {
        if self.draws == 0 {
            0.0
        } else {
            self.accepted as f64 / self.draws as f64
        }
    }
}

/// Advances the chain `n` steps at `θ` and averages the score, information
/// and score outer product over the `n` visited states.
pub fn run_block<M: Model + ?Sized>(
    model: &M,
    theta: &[f64],
    state: &mut ChainState<M::Latent>,
    n: usize,
) -> Result<BlockStats> {
    if n == 0 {
        return Err(SaemError::InvalidConfig("block length must be at least 1".into()));
    }
    let mut stats = BlockStats::new(model.dim());
    for _ in 0..n {
        if mh_step(model, theta, state)? {
            stats.accepted += 1;
        }
        let s = evaluate_score(model, theta, &state.current)?;
        let info = evaluate_info(model, theta, &state.current)?;
        stats.push(&s, &info);
    }
    Ok(stats)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Proposal;
    use crate::rng_stream;
    use rand::RngCore;

    /// z ∈ {0, 1}, `l_c = θz − θ²/2`; always proposes the other state.
    struct TwoPoint;

    impl Model for TwoPoint {
        type Latent = u8;
        fn dim(&self) -> usize {
            1
        }
        fn size_hint(&self) -> usize {
            1
        }
        fn complete_loglik(&self, t: &[f64], z: &u8) -> f64 {
            t[0] * *z as f64 - 0.5 * t[0] * t[0]
        }
        fn score(&self, t: &[f64], z: &u8) -> DVector<f64> {
            DVector::from_element(1, *z as f64 - t[0])
        }
        fn complete_info(&self, _: &[f64], _: &u8) -> DMatrix<f64> {
            DMatrix::from_element(1, 1, 1.0)
        }
        fn propose(&self, _: &[f64], z: &u8, _: &mut dyn RngCore) -> Proposal<u8> {
            Proposal { candidate: 1 - *z, log_ratio: 0.0 }
        }
        fn init_latent(&self, _: &[f64], _: &mut dyn RngCore) -> u8 {
            0
        }
    }

    /// Proposes the current state again.
    struct Lazy;

    impl Model for Lazy {
        type Latent = f64;
        fn dim(&self) -> usize {
            1
        }
        fn size_hint(&self) -> usize {
            1
        }
        fn complete_loglik(&self, _: &[f64], z: &f64) -> f64 {
            -0.5 * z * z
        }
        fn score(&self, _: &[f64], _: &f64) -> DVector<f64> {
            DVector::from_element(1, 3.0)
        }
        fn complete_info(&self, _: &[f64], _: &f64) -> DMatrix<f64> {
            DMatrix::from_element(1, 1, 2.0)
        }
        fn propose(&self, _: &[f64], z: &f64, _: &mut dyn RngCore) -> Proposal<f64> {
            Proposal { candidate: *z, log_ratio: 0.0 }
        }
        fn init_latent(&self, _: &[f64], _: &mut dyn RngCore) -> f64 {
            0.7
        }
    }

    /// Every candidate evaluates to NaN.
    struct NanCandidate;

    impl Model for NanCandidate {
        type Latent = f64;
        fn dim(&self) -> usize {
            1
        }
        fn size_hint(&self) -> usize {
            1
        }
        fn complete_loglik(&self, _: &[f64], z: &f64) -> f64 {
            if *z > 0.0 { f64::NAN } else { 0.0 }
        }
        fn score(&self, _: &[f64], _: &f64) -> DVector<f64> {
            DVector::zeros(1)
        }
        fn complete_info(&self, _: &[f64], _: &f64) -> DMatrix<f64> {
            DMatrix::identity(1, 1)
        }
        fn propose(&self, _: &[f64], _: &f64, _: &mut dyn RngCore) -> Proposal<f64> {
            Proposal { candidate: 1.0, log_ratio: 0.0 }
        }
        fn init_latent(&self, _: &[f64], _: &mut dyn RngCore) -> f64 {
            0.0
        }
    }

    #[test]
    fn acceptance_probability_cases() {
        assert_eq!(acceptance_probability(-1.0, -1.0, 0.0), 1.0);
        assert_eq!(acceptance_probability(-1.0, 0.0, 0.0), 1.0);
        assert!((acceptance_probability(0.0, -(3.0f64.ln()), 0.0) - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(acceptance_probability(0.0, f64::NEG_INFINITY, 0.0), 0.0);
        assert_eq!(acceptance_probability(0.0, f64::NAN, 0.0), 0.0);
    }

    #[test]
    fn identical_proposal_always_accepts_and_keeps_state() {
        let mut chain = ChainState::new(&Lazy, &[0.0], rng_stream(1, 0)).unwrap();
        for _ in 0..100 {
            assert!(mh_step(&Lazy, &[0.0], &mut chain).unwrap());
        }
        assert_eq!(*chain.current(), 0.7);
        assert_eq!(chain.accepted(), 100);
        assert_eq!(chain.proposed(), 100);
    }

    #[test]
    fn nan_candidates_are_rejected_and_counted() {
        let mut chain = ChainState::new(&NanCandidate, &[0.0], rng_stream(1, 0)).unwrap();
        for _ in 0..(STUCK_WINDOW as usize) {
            assert!(!mh_step(&NanCandidate, &[0.0], &mut chain).unwrap());
        }
        assert_eq!(*chain.current(), 0.0);
        assert_eq!(chain.rejected_non_finite(), STUCK_WINDOW);
        assert!(chain.is_stuck());
    }

    #[test]
    fn block_of_one_equals_single_state_evaluation() {
        let theta = [3.0f64.ln()];
        let mut chain = ChainState::new(&TwoPoint, &theta, rng_stream(4, 0)).unwrap();
        let stats = run_block(&TwoPoint, &theta, &mut chain, 1).unwrap();
        let z = *chain.current();
        let s = TwoPoint.score(&theta, &z);
        assert_eq!(stats.mean_score, s);
        assert_eq!(stats.mean_info, TwoPoint.complete_info(&theta, &z));
        assert_eq!(stats.mean_score_outer, linalg::outer(&s));
    }

    #[test]
    fn constant_score_passes_through_unchanged() {
        let mut chain = ChainState::new(&Lazy, &[0.0], rng_stream(1, 0)).unwrap();
        for n in [1usize, 7, 1000] {
            let stats = run_block(&Lazy, &[0.0], &mut chain, n).unwrap();
            assert_eq!(stats.mean_score[0], 3.0);
            assert_eq!(stats.mean_score_outer[(0, 0)], 9.0);
            assert_eq!(stats.mean_info[(0, 0)], 2.0);
        }
    }

    #[test]
    fn two_point_occupancy_matches_conditional() {
        // P(z = 1 | θ = ln 3) = 3 / 4
        let theta = [3.0f64.ln()];
        let mut chain = ChainState::new(&TwoPoint, &theta, rng_stream(5, 0)).unwrap();
        let n = 100_000;
        let mut ones = 0usize;
        for _ in 0..n {
            mh_step(&TwoPoint, &theta, &mut chain).unwrap();
            ones += *chain.current() as usize;
        }
        let freq = ones as f64 / n as f64;
        assert!((freq - 0.75).abs() < 0.01, "{freq}");
    }

    #[test]
    fn cached_loglik_follows_theta() {
        let mut chain = ChainState::from_latent(&TwoPoint, &[0.5], 1, rng_stream(0, 0)).unwrap();
        assert_eq!(chain.current_loglik(), TwoPoint.complete_loglik(&[0.5], &1));
        mh_step(&TwoPoint, &[1.5], &mut chain).unwrap();
        let z = *chain.current();
        assert_eq!(chain.current_loglik(), TwoPoint.complete_loglik(&[1.5], &z));
    }

    #[test]
    fn zero_length_block_is_rejected() {
        let mut chain = ChainState::new(&Lazy, &[0.0], rng_stream(1, 0)).unwrap();
        assert!(run_block(&Lazy, &[0.0], &mut chain, 0).is_err());
    }
}
