//! The incomplete-data model contract.
//!
//! A [`Model`] owns its observed data `x` and exposes the complete-data
//! log-likelihood `l_c(θ; x, z) = log f(x, z; θ)`, its score
//! `S(θ; z) = ∂θ l_c`, the complete-data information `I(θ; z) = −∂²θ l_c`,
//! and a Metropolis-Hastings proposal for `z | x, θ`. The engine never looks
//! inside `z`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::ops::Deref;

use nalgebra::{DMatrix, DVector};
use rand::RngCore;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Result, SaemError};
use crate::{fd, linalg, rng_stream};

/// Largest `|A − Aᵀ|` entry tolerated from [`Model::complete_info`].
pub const SYMMETRY_TOLERANCE: f64 = 1e-10;
/// Pass threshold for score versus finite differences of `l_c`.
pub const SCORE_FD_TOLERANCE: f64 = 1e-4;
/// Pass threshold for information versus finite differences of the score.
pub const INFO_FD_TOLERANCE: f64 = 1e-3;

/// A point `θ` in the parameter space: non-empty, every entry finite.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamVector(Vec<f64>);

impl ParamVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(SaemError::InvalidParameter("empty parameter vector".into()));
        }
        if let Some(j) = values.iter().position(|v| !v.is_finite()) {
            return Err(SaemError::InvalidParameter(format!(
                "coordinate {} is not finite",
                j + 1
            )));
        }
        Ok(Self(values))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    /// Checks dimension and strict containment in `model`'s bounds.
    pub fn check_against<M: Model + ?Sized>(&self, model: &M) -> Result<()> {
        if self.dim() != model.dim() {
            return Err(SaemError::DimensionMismatch {
                what: "parameter vector",
                expected: model.dim(),
                found: self.dim(),
            });
        }
        if !model.contains(&self.0) {
            return Err(SaemError::InvalidParameter(
                "outside the model's open parameter bounds".into(),
            ));
        }
        Ok(())
    }
}

impl Deref for ParamVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// Open interval `(lower, upper)`; infinite ends mean unbounded.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lower: f64,
    pub upper: f64,
}

impl Interval {
    pub const UNBOUNDED: Interval = Interval {
        lower: f64::NEG_INFINITY,
        upper: f64::INFINITY,
    };

    pub fn new(lower: f64, upper: f64) -> Self {
        Self { lower, upper }
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lower < x && x < self.upper
    }
}

/// A candidate latent state and `log q(current | candidate) − log q(candidate | current)`.
#[derive(Debug, Clone)]
pub struct Proposal<L> {
    pub candidate: L,
    pub log_ratio: f64,
}

/// Exact conditional moments under `z | x, θ`, available for oracle models.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalMoments {
    /// `E[S | x, θ]`, which equals the observed score.
    pub score: DVector<f64>,
    /// `E[I | x, θ]`.
    pub info: DMatrix<f64>,
    /// `E[S Sᵀ | x, θ]`.
    pub score_outer: DMatrix<f64>,
}

impl ConditionalMoments {
    /// `E[I − S Sᵀ | x, θ]`.
    pub fn info_minus_score_outer(&self) -> DMatrix<f64> {
        &self.info - &self.score_outer
    }

    /// Louis' observed information `E[I − S Sᵀ] + s sᵀ`.
    pub fn observed_information(&self) -> DMatrix<f64> {
        let mut m = self.info_minus_score_outer() + linalg::outer(&self.score);
        linalg::symmetrize(&mut m);
        m
    }
}

/// An incomplete-data model. Implementations must be safe to share between
/// concurrently running chains; all per-run randomness comes in through
/// the `rng` arguments.
pub trait Model {
    type Latent: Clone;

    /// Parameter dimension `p`.
    fn dim(&self) -> usize;

    /// Number of observation units, for reporting.
    fn size_hint(&self) -> usize;

    /// Open bounds per coordinate. Unbounded by default.
    fn bounds(&self) -> Vec<Interval> {
        vec![Interval::UNBOUNDED; self.dim()]
    }

    fn contains(&self, theta: &[f64]) -> bool {
        theta.len() == self.dim()
            && self
                .bounds()
                .iter()
                .zip(theta)
                .all(|(b, &v)| v.is_finite() && b.contains(v))
    }

    /// `l_c(θ; x, z)`. May be `-∞` where `f(x, z; θ) = 0`.
    fn complete_loglik(&self, theta: &[f64], z: &Self::Latent) -> f64;

    fn score(&self, theta: &[f64], z: &Self::Latent) -> DVector<f64>;

    fn complete_info(&self, theta: &[f64], z: &Self::Latent) -> DMatrix<f64>;

    fn propose(&self, theta: &[f64], z: &Self::Latent, rng: &mut dyn RngCore)
        -> Proposal<Self::Latent>;

    /// A starting latent state with positive conditional density at `θ`.
    fn init_latent(&self, theta: &[f64], rng: &mut dyn RngCore) -> Self::Latent;

    fn exact_conditional_expectations(&self, _theta: &[f64]) -> Option<ConditionalMoments> {
        None
    }
}

/// Score with shape and finiteness checks.
pub fn evaluate_score<M: Model + ?Sized>(
    model: &M,
    theta: &[f64],
    z: &M::Latent,
) -> Result<DVector<f64>> {
    let s = model.score(theta, z);
    if s.len() != model.dim() {
        return Err(SaemError::DimensionMismatch {
            what: "score",
            expected: model.dim(),
            found: s.len(),
        });
    }
    if !s.iter().all(|v| v.is_finite()) {
        return Err(SaemError::NonFiniteEvaluation { what: "score" });
    }
    Ok(s)
}

/// Complete-data information with shape, finiteness and symmetry checks; the
/// returned matrix is exactly symmetric.
pub fn evaluate_info<M: Model + ?Sized>(
    model: &M,
    theta: &[f64],
    z: &M::Latent,
) -> Result<DMatrix<f64>> {
    let mut info = model.complete_info(theta, z);
    let p = model.dim();
    if info.nrows() != p || info.ncols() != p {
        return Err(SaemError::DimensionMismatch {
            what: "complete_info",
            expected: p,
            found: if info.nrows() != p { info.nrows() } else { info.ncols() },
        });
    }
    if !linalg::is_finite(&info) {
        return Err(SaemError::NonFiniteEvaluation { what: "complete_info" });
    }
    let asymmetry = linalg::max_asymmetry(&info);
    if asymmetry > SYMMETRY_TOLERANCE {
        return Err(SaemError::AsymmetricInformation { asymmetry });
    }
    linalg::symmetrize(&mut info);
    Ok(info)
}

/// Outcome of [`validate_model`].
#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub points: usize,
    /// Worst `‖S − ∇l_c‖∞ / max(‖∇l_c‖∞, 1)` over the test points.
    pub score_max_rel_error: f64,
    /// Worst `‖I + ∇S‖∞ / max(‖∇S‖∞, 1)` over the test points.
    pub info_max_rel_error: f64,
    /// Worst `|I − Iᵀ|` entry before symmetrization.
    pub max_asymmetry: f64,
    pub score_passed: bool,
    pub info_passed: bool,
    pub symmetry_passed: bool,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.score_passed && self.info_passed && self.symmetry_passed
    }
}

fn rel_error(diff_max: f64, reference_max: f64) -> f64 {
    diff_max / reference_max.max(1.0)
}

/// Checks `score` and `complete_info` against central finite differences of
/// `complete_loglik` and `score` at `n_points` perturbed parameter points,
/// each with a freshly drawn latent state. Deterministic given `seed`.
pub fn validate_model<M: Model + ?Sized>(
    model: &M,
    theta0: &ParamVector,
    n_points: usize,
    seed: u64,
) -> Result<ValidationReport> {
    theta0.check_against(model)?;
    if n_points == 0 {
        return Err(SaemError::InvalidConfig("validation needs at least one point".into()));
    }
    let mut rng = rng_stream(seed, 0);
    let p = model.dim();
    let mut report = ValidationReport {
        points: n_points,
        score_max_rel_error: 0.0,
        info_max_rel_error: 0.0,
        max_asymmetry: 0.0,
        score_passed: false,
        info_passed: false,
        symmetry_passed: false,
    };

    for _ in 0..n_points {
        let theta = perturb_inside(model, theta0, &mut rng);
        let z = model.init_latent(&theta, &mut rng);
        let lc = |t: &[f64]| model.complete_loglik(t, &z);
        if !lc(&theta).is_finite() {
            return Err(SaemError::NonFiniteEvaluation { what: "complete_loglik" });
        }

        let score = evaluate_score(model, &theta, &z)?;
        let fd_score = fd::gradient(lc, &theta);
        if !fd_score.iter().all(|v| v.is_finite()) {
            return Err(SaemError::NonFiniteEvaluation { what: "complete_loglik" });
        }
        let err = rel_error((&score - &fd_score).amax(), fd_score.amax());
        report.score_max_rel_error = report.score_max_rel_error.max(err);

        let raw_info = model.complete_info(&theta, &z);
        if raw_info.nrows() != p || raw_info.ncols() != p {
            return Err(SaemError::DimensionMismatch {
                what: "complete_info",
                expected: p,
                found: raw_info.nrows(),
            });
        }
        if !linalg::is_finite(&raw_info) {
            return Err(SaemError::NonFiniteEvaluation { what: "complete_info" });
        }
        report.max_asymmetry = report.max_asymmetry.max(linalg::max_asymmetry(&raw_info));

        let fd_jac = fd::jacobian(|t| model.score(t, &z), &theta, p);
        if !linalg::is_finite(&fd_jac) {
            return Err(SaemError::NonFiniteEvaluation { what: "score" });
        }
        let err = rel_error((&raw_info + &fd_jac).amax(), fd_jac.amax());
        report.info_max_rel_error = report.info_max_rel_error.max(err);
    }

    report.score_passed = report.score_max_rel_error <= SCORE_FD_TOLERANCE;
    report.info_passed = report.info_max_rel_error <= INFO_FD_TOLERANCE;
    report.symmetry_passed = report.max_asymmetry <= SYMMETRY_TOLERANCE;
    Ok(report)
}

/// `θ0 + δ` with `δⱼ ~ N(0, (0.05 (1 + |θ0ⱼ|))²)`, halved until inside bounds.
fn perturb_inside<M: Model + ?Sized>(
    model: &M,
    theta0: &ParamVector,
    rng: &mut dyn RngCore,
) -> Vec<f64> {
    let delta: Vec<f64> = theta0
        .iter()
        .map(|&t| {
            let e: f64 = StandardNormal.sample(rng);
            0.05 * (1.0 + t.abs()) * e
        })
        .collect();
    let mut scale = 1.0;
    for _ in 0..60 {
        let cand: Vec<f64> = theta0.iter().zip(&delta).map(|(t, d)| t + scale * d).collect();
        if model.contains(&cand) {
            return cand;
        }
        scale *= 0.5;
    }
    theta0.to_vec()
}
