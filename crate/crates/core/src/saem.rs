//! The stochastic-approximation EM iteration.
//!
//! Iteration `i` draws a block of `Nᵢ` latent states at `θ⁽ⁱ⁻¹⁾`
//! (warm-started chain), averages `H̄ = mean S`, `Ī = mean I` and
//! `mean S Sᵀ`, and with `γ = γᵢ` updates
//!
//! ```text
//! h       += γ (H̄ − h)
//! gamma_I += γ (Ī − gamma_I)
//! gamma_S += γ (mean S Sᵀ − gamma_S)
//! Γ(t)     = gamma_I − t gamma_S + h hᵀ
//! θ       += γ Γ(t)⁻¹ H̄
//! ```
//!
//! `Γ(t)` is regularized with an escalating ridge when it is not safely
//! positive definite, the `θ` step is capped in norm and halved until it
//! lands strictly inside the model's bounds.

use alloc::collections::VecDeque;
use alloc::format;
use alloc::vec::Vec;

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::diagnostics::{self, StationarityCheck};
use crate::error::{Result, SaemError};
use crate::gain::{check_conditions, GainSchedule};
use crate::louis::{self, InformationEstimate};
use crate::model::{Model, ParamVector};
use crate::sampler::{mh_step, run_block, BlockStats, ChainState};
use crate::{linalg, rng_stream};
#[allow(unused_imports)]
use num_traits::Float;

/// Number of ×10 ridge escalations tried before giving up on `Γ`.
pub const RIDGE_ESCALATIONS: u32 = 6;
/// Halvings of a step before it is declared unable to stay in bounds.
pub const MAX_STEP_HALVINGS: u32 = 30;

/// Block length `Nᵢ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BlockSchedule {
    Constant(usize),
    /// `Nᵢ = max(1, round(intercept + slope · i))`.
    Linear { intercept: f64, slope: f64 },
}

impl BlockSchedule {
    pub fn length(&self, i: u64) -> usize {
        match *self {
            BlockSchedule::Constant(n) => n,
            BlockSchedule::Linear { intercept, slope } => (intercept + slope * i as f64).round().max(1.0) as usize,
        }
    }
}

/// Where the conditional expectations of each iteration come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExpectationMode {
    /// Metropolis-Hastings block averages.
    Sampled,
    /// The model's exact conditional moments; the sampler is bypassed.
    Exact,
}

/// Sliding-window rule on the Polyak average of `θ` taken over the
/// post-burn-in iterations of the gain schedule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StopRule {
    pub window: usize,
    pub tolerance: f64,
}

impl Default for StopRule {
    fn default() -> Self {
        Self { window: 100, tolerance: 1e-5 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SaemConfig {
    /// Mixing parameter of `Γ(t)` during the iteration.
    pub t: f64,
    pub max_iter: u64,
    pub block: BlockSchedule,
    pub gain: GainSchedule,
    /// Largest Euclidean norm of a single `θ` step.
    pub step_cap: f64,
    /// Initial ridge added to `Γ` when it needs regularizing.
    pub ridge: f64,
    pub stop: StopRule,
    pub seed: u64,
    /// `‖θ‖₂` above this aborts the run.
    pub theta_ceiling: f64,
    /// Discarded MH steps at `θ0` before the first iteration.
    pub latent_burn: usize,
    /// Draws and burn-in of the dedicated chain for final standard errors.
    pub final_draws: usize,
    pub final_burn: usize,
    /// Draws for the stationarity residual at the endpoint.
    pub stationarity_draws: usize,
    pub expectation: ExpectationMode,
    /// Skip the `θ` update, leaving the estimates of `h` and `Γ` running at `θ0`.
    pub freeze_theta: bool,
}

impl Default for SaemConfig {
    fn default() -> Self {
        Self {
            t: 0.0,
            max_iter: 2000,
            block: BlockSchedule::Constant(1),
            gain: GainSchedule::default(),
            step_cap: 1.0,
            ridge: 1e-6,
            stop: StopRule::default(),
            seed: 0,
            theta_ceiling: 1e8,
            latent_burn: 100,
            final_draws: 10_000,
            final_burn: 1_000,
            stationarity_draws: 1_000,
            expectation: ExpectationMode::Sampled,
            freeze_theta: false,
        }
    }
}

impl SaemConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: alloc::string::String| Err(SaemError::InvalidConfig(msg));
        if !(0.0..=1.0).contains(&self.t) {
            return bad(format!("t must lie in [0, 1], got {}", self.t));
        }
        if !(self.step_cap.is_finite() && self.step_cap > 0.0) {
            return bad(format!("step_cap must be positive, got {}", self.step_cap));
        }
        if !(self.ridge.is_finite() && self.ridge >= 0.0) {
            return bad(format!("ridge must be non-negative, got {}", self.ridge));
        }
        if self.stop.window == 0 || self.stop.tolerance.is_nan() || self.stop.tolerance < 0.0 {
            return bad("stopping window must be positive and tolerance non-negative".into());
        }
        if self.theta_ceiling.is_nan() || self.theta_ceiling <= 0.0 {
            return bad("theta_ceiling must be positive".into());
        }
        match self.block {
            BlockSchedule::Constant(0) => return bad("block length must be at least 1".into()),
            BlockSchedule::Linear { intercept, slope } if !(intercept.is_finite() && slope.is_finite() && slope >= 0.0) => {
                return bad("linear block schedule needs a finite intercept and non-negative slope".into())
            }
            _ => {}
        }
        if self.final_draws < 2 {
            return bad("final_draws must be at least 2".into());
        }
        if self.stationarity_draws < 100 {
            return bad("stationarity_draws must be at least 100".into());
        }
        let report = check_conditions(&self.gain);
        if let Some(failed) = report.first_failure() {
            return Err(SaemError::InvalidGain(format!(
                "schedule with alpha = {} fails the {failed} condition",
                report.alpha
            )));
        }
        Ok(())
    }
}

/// One row of the per-iteration trace.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub iter: u64,
    pub gamma: f64,
    pub theta: Vec<f64>,
    pub h: Vec<f64>,
    pub step_norm: f64,
    pub accept_rate: f64,
    pub gamma_regularized: bool,
}

#[derive(Debug, Clone)]
struct PolyakTracker {
    start_after: u64,
    count: u64,
    mean: Vec<f64>,
    history: VecDeque<Vec<f64>>,
}

impl PolyakTracker {
    fn new(start_after: u64, p: usize) -> Self {
        Self {
            start_after,
            count: 0,
            mean: alloc::vec![0.0; p],
            history: VecDeque::new(),
        }
    }

    fn push(&mut self, iter: u64, theta: &[f64], window: usize) {
        if iter <= self.start_after {
            return;
        }
        self.count += 1;
        let w = 1.0 / self.count as f64;
        for (m, t) in self.mean.iter_mut().zip(theta) {
            *m += (t - *m) * w;
        }
        self.history.push_back(self.mean.clone());
        while self.history.len() > window + 1 {
            self.history.pop_front();
        }
    }

    /// Relative change of the average over the last `window` iterations.
    fn relative_change(&self, window: usize) -> Option<f64> {
        if self.history.len() < window + 1 {
            return None;
        }
        let old = self.history.front()?;
        let new = self.history.back()?;
        let diff = old.iter().zip(new).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        let scale = new.iter().map(|a| a * a).sum::<f64>().sqrt().max(1.0);
        Some(diff / scale)
    }
}

/// All running estimates of a run.
#[derive(Debug, Clone)]
pub struct SaemState<L> {
    iter: u64,
    theta: Vec<f64>,
    h: DVector<f64>,
    gamma_info: DMatrix<f64>,
    gamma_score: DMatrix<f64>,
    chain: Option<ChainState<L>>,
    trace: Vec<TraceRecord>,
    polyak: PolyakTracker,
}

impl<L: Clone> SaemState<L> {
    /// Zero running estimates at `θ0`. In sampled mode the chain starts from
    /// `init_latent(θ0)` and runs `latent_burn` discarded steps.
    pub fn new<M: Model<Latent = L> + ?Sized>(model: &M, theta0: &ParamVector, config: &SaemConfig) -> Result<Self> {
        theta0.check_against(model)?;
        let p = model.dim();
        let chain = match config.expectation {
            ExpectationMode::Sampled => {
                let mut chain = ChainState::new(model, theta0, rng_stream(config.seed, 0))?;
                for _ in 0..config.latent_burn {
                    mh_step(model, theta0, &mut chain)?;
                }
                Some(chain)
            }
            ExpectationMode::Exact => {
                if model.exact_conditional_expectations(theta0).is_none() {
                    return Err(SaemError::ExactExpectationsUnavailable);
                }
                None
            }
        };
        Ok(Self {
            iter: 0,
            theta: theta0.to_vec(),
            h: DVector::zeros(p),
            gamma_info: DMatrix::zeros(p, p),
            gamma_score: DMatrix::zeros(p, p),
            chain,
            trace: Vec::new(),
            polyak: PolyakTracker::new(config.gain.burn_in(), p),
        })
    }

    pub fn iter(&self) -> u64 {
        self.iter
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    /// Running estimate of the observed score.
    pub fn h(&self) -> &DVector<f64> {
        &self.h
    }

    /// Running estimate of `E[I | x, θ]`.
    pub fn gamma_info(&self) -> &DMatrix<f64> {
        &self.gamma_info
    }

    /// Running estimate of `E[S Sᵀ | x, θ]`.
    pub fn gamma_score(&self) -> &DMatrix<f64> {
        &self.gamma_score
    }

    pub fn chain(&self) -> Option<&ChainState<L>> {
        self.chain.as_ref()
    }

    pub fn trace(&self) -> &[TraceRecord] {
        &self.trace
    }

    /// Polyak average of `θ` over the post-burn-in iterations so far.
    pub fn polyak_mean(&self) -> Option<&[f64]> {
        (self.polyak.count > 0).then_some(self.polyak.mean.as_slice())
    }

    /// `Γ(t) = gamma_I − t gamma_S + h hᵀ`, symmetrized.
    pub fn gamma_t(&self, t: f64) -> DMatrix<f64> {
        let mut m = &self.gamma_info - &self.gamma_score * t + linalg::outer(&self.h);
        linalg::symmetrize(&mut m);
        m
    }

    fn converged(&self, rule: &StopRule) -> bool {
        self.polyak
            .relative_change(rule.window)
            .is_some_and(|c| c <= rule.tolerance)
    }
}

/// `Γ` itself when its smallest eigenvalue clears `1e-8 · |trace| / p`,
/// otherwise `Γ + ridge · 10ᵏ I` for the first `k ≤ 6` that does. The flag
/// reports whether a ridge was added.
pub fn regularize_gamma(gamma: &DMatrix<f64>, ridge: f64, iter: u64) -> Result<(DMatrix<f64>, bool)> {
    let p = gamma.nrows();
    if !linalg::is_finite(gamma) {
        return Err(SaemError::NonFiniteEvaluation { what: "Gamma" });
    }
    let threshold = 1e-8 * (gamma.trace().abs() / p as f64).max(f64::MIN_POSITIVE);
    let min_eig = linalg::min_eigenvalue(gamma);
    if min_eig >= threshold {
        return Ok((gamma.clone(), false));
    }
    if ridge > 0.0 {
        let mut lambda = ridge;
        for _ in 0..=RIDGE_ESCALATIONS {
            let candidate = gamma + DMatrix::identity(p, p) * lambda;
            if linalg::min_eigenvalue(&candidate) >= threshold {
                return Ok((candidate, true));
            }
            lambda *= 10.0;
        }
    }
    Err(SaemError::SingularGamma { iter, min_eigenvalue: min_eig })
}

/// Block statistics from the model's exact conditional moments.
fn exact_stats<M: Model + ?Sized>(model: &M, theta: &[f64]) -> Result<BlockStats> {
    let e = model
        .exact_conditional_expectations(theta)
        .ok_or(SaemError::ExactExpectationsUnavailable)?;
    Ok(BlockStats {
        draws: 1,
        mean_score: e.score,
        mean_info: e.info,
        mean_score_outer: e.score_outer,
        accepted: 1,
    })
}

/// One full iteration: simulation at `θ⁽ⁱ⁻¹⁾` then the coupled update.
pub fn saem_step<M: Model + ?Sized>(model: &M, state: &mut SaemState<M::Latent>, config: &SaemConfig) -> Result<()> {
    let i = state.iter + 1;
    let gamma = config.gain.gamma(i);
    let stats = match (&mut state.chain, config.expectation) {
        (Some(chain), ExpectationMode::Sampled) => run_block(model, &state.theta, chain, config.block.length(i))?,
        (None, ExpectationMode::Exact) => exact_stats(model, &state.theta)?,
        _ => return Err(SaemError::InvalidConfig("expectation mode differs from the one the state was built with".into())),
    };
    apply_update(model, state, &stats, gamma, config)
}

/// Updates `h`, `gamma_I`, `gamma_S` with gain `gamma` from `stats`, then
/// takes the capped, bounded `θ` step and appends a trace record.
pub fn apply_update<M: Model + ?Sized>(
    model: &M,
    state: &mut SaemState<M::Latent>,
    stats: &BlockStats,
    gamma: f64,
    config: &SaemConfig,
) -> Result<()> {
    let i = state.iter + 1;
    let p = model.dim();
    if stats.mean_score.len() != p {
        return Err(SaemError::DimensionMismatch { what: "block statistics", expected: p, found: stats.mean_score.len() });
    }

    state.h += (&stats.mean_score - &state.h) * gamma;
    state.gamma_info += (&stats.mean_info - &state.gamma_info) * gamma;
    state.gamma_score += (&stats.mean_score_outer - &state.gamma_score) * gamma;
    linalg::symmetrize(&mut state.gamma_info);
    linalg::symmetrize(&mut state.gamma_score);

    let mut step = DVector::<f64>::zeros(p);
    let mut regularized = false;
    if !config.freeze_theta && gamma != 0.0 {
        let (precond, flagged) = regularize_gamma(&state.gamma_t(config.t), config.ridge, i)?;
        regularized = flagged;
        let chol = Cholesky::new(precond).ok_or(SaemError::SingularGamma { iter: i, min_eigenvalue: 0.0 })?;
        step = chol.solve(&stats.mean_score) * gamma;
    }
    if !step.iter().all(|v| v.is_finite()) {
        return Err(SaemError::NonFiniteEvaluation { what: "theta step" });
    }
    let norm = step.norm();
    if norm > config.step_cap {
        step *= config.step_cap / norm;
    }

    let mut next: Vec<f64> = state.theta.iter().zip(step.iter()).map(|(t, d)| t + d).collect();
    let mut halvings = 0;
    while !model.contains(&next) {
        if halvings == MAX_STEP_HALVINGS {
            return Err(SaemError::StepOutOfBounds { iter: i });
        }
        step *= 0.5;
        halvings += 1;
        next = state.theta.iter().zip(step.iter()).map(|(t, d)| t + d).collect();
    }

    let theta_norm = next.iter().map(|v| v * v).sum::<f64>().sqrt();
    if theta_norm > config.theta_ceiling {
        return Err(SaemError::DivergedParameter { iter: i, norm: theta_norm });
    }

    state.theta = next;
    state.iter = i;
    state.polyak.push(i, &state.theta, config.stop.window);
    state.trace.push(TraceRecord {
        iter: i,
        gamma,
        theta: state.theta.clone(),
        h: state.h.iter().copied().collect(),
        step_norm: step.norm(),
        accept_rate: stats.acceptance_rate(),
        gamma_regularized: regularized,
    });
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunStatus {
    /// `max_iter = 0`.
    NotStarted,
    /// The stopping rule fired.
    Converged,
    /// `max_iter` reached before the stopping rule fired.
    NotConverged,
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub status: RunStatus,
    pub iterations: u64,
    pub theta: Vec<f64>,
    /// Running score estimate at the endpoint.
    pub h: Vec<f64>,
    pub t: f64,
    /// `Γ(t)` and `Γ(1)` from the running estimates.
    pub gamma_t: DMatrix<f64>,
    pub gamma_one: DMatrix<f64>,
    /// Louis information from a fresh chain at the endpoint.
    pub information: Option<InformationEstimate>,
    /// `None` when the information estimate is not positive definite.
    pub standard_errors: Option<Vec<f64>>,
    pub stationarity: Option<StationarityCheck>,
    /// Average of `θ` over the second half of the trace.
    pub polyak_average: Option<Vec<f64>>,
    pub acceptance_rate: f64,
    pub chain_stuck: bool,
    pub rejected_non_finite: u64,
    pub trace: Vec<TraceRecord>,
}

/// Runs [`saem_step`] until `max_iter` or the stopping rule, then computes
/// the endpoint diagnostics: Louis information and standard errors from a
/// dedicated chain, the stationarity residual, and the Polyak average.
pub fn run<M: Model + ?Sized>(model: &M, theta0: &ParamVector, config: &SaemConfig) -> Result<RunReport> {
    config.validate()?;
    theta0.check_against(model)?;
    let p = model.dim();

    if config.max_iter == 0 {
        return Ok(RunReport {
            status: RunStatus::NotStarted,
            iterations: 0,
            theta: theta0.to_vec(),
            h: alloc::vec![0.0; p],
            t: config.t,
            gamma_t: DMatrix::zeros(p, p),
            gamma_one: DMatrix::zeros(p, p),
            information: None,
            standard_errors: None,
            stationarity: None,
            polyak_average: None,
            acceptance_rate: 0.0,
            chain_stuck: false,
            rejected_non_finite: 0,
            trace: Vec::new(),
        });
    }

    let mut state = SaemState::new(model, theta0, config)?;
    let mut status = RunStatus::NotConverged;
    while state.iter < config.max_iter {
        saem_step(model, &mut state, config)?;
        if state.converged(&config.stop) {
            status = RunStatus::Converged;
            break;
        }
    }

    let theta = state.theta.clone();
    let information = louis::louis_information(model, &theta, config.final_draws, config.final_burn, config.seed)?;
    let standard_errors = louis::standard_errors(&information).ok();
    let stationarity = diagnostics::stationarity_residual(model, &theta, config.stationarity_draws, config.seed)?;
    let polyak_average = diagnostics::polyak_average(&state.trace, 0.5).ok();
    let (acceptance_rate, chain_stuck, rejected_non_finite) = match &state.chain {
        Some(c) => (c.acceptance_rate(), c.is_stuck(), c.rejected_non_finite()),
        None => (1.0, false, 0),
    };

    Ok(RunReport {
        status,
        iterations: state.iter,
        h: state.h.iter().copied().collect(),
        t: config.t,
        gamma_t: state.gamma_t(config.t),
        gamma_one: state.gamma_t(1.0),
        information: Some(information),
        standard_errors,
        stationarity: Some(stationarity),
        polyak_average,
        acceptance_rate,
        chain_stuck,
        rejected_non_finite,
        theta,
        trace: state.trace,
    })
}
