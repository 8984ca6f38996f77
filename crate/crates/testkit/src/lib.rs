//! Independent oracles for testing `saem-core`.
//!
//! Nothing here reuses the engine's estimators. Conditional expectations are
//! computed by brute-force enumeration of finite latent spaces, derivatives
//! by Richardson-extrapolated central differences, and MH kernels by
//! writing out the full transition matrix.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, RngCore};
use saem_core::model::{Model, Proposal};
use saem_core::sampler::acceptance_probability;

pub mod fixtures;

/// Exact conditional quantities over an enumerated latent space.
#[derive(Debug, Clone)]
pub struct Enumerated {
    /// `log Σ_z f(x, z; θ)`.
    pub log_marginal: f64,
    /// `P(z | x, θ)` in the order of the supplied states.
    pub probs: Vec<f64>,
    /// `E[S | x, θ]`.
    pub score: DVector<f64>,
    /// `E[I | x, θ]`.
    pub info: DMatrix<f64>,
    /// `E[S Sᵀ | x, θ]`.
    pub score_outer: DMatrix<f64>,
}

impl Enumerated {
    /// `E[I − S Sᵀ] + s sᵀ`.
    pub fn observed_information(&self) -> DMatrix<f64> {
        &self.info - &self.score_outer + &self.score * self.score.transpose()
    }

    /// `E[I − t S Sᵀ] + s sᵀ`.
    pub fn gamma(&self, t: f64) -> DMatrix<f64> {
        &self.info - &self.score_outer * t + &self.score * self.score.transpose()
    }
}

/// Weights every state by `exp(l_c)` and averages score, information and
/// score outer product.
pub fn enumerate<M: Model>(model: &M, theta: &[f64], states: &[M::Latent]) -> Enumerated {
    let p = model.dim();
    let logs: Vec<f64> = states.iter().map(|z| model.complete_loglik(theta, z)).collect();
    let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = logs.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = weights.iter().sum();
    let probs: Vec<f64> = weights.iter().map(|w| w / total).collect();
    let mut score = DVector::zeros(p);
    let mut info = DMatrix::zeros(p, p);
    let mut score_outer = DMatrix::zeros(p, p);
    for (z, &w) in states.iter().zip(&probs) {
        let s = model.score(theta, z);
        info += model.complete_info(theta, z) * w;
        score_outer += &s * s.transpose() * w;
        score += s * w;
    }
    Enumerated { log_marginal: max + total.ln(), probs, score, info, score_outer }
}

/// All `2ⁿ` label vectors of length `n`, lexicographic.
pub fn binary_labels(n: usize) -> Vec<Vec<u8>> {
    (0..1u32 << n)
        .map(|mask| (0..n).map(|k| ((mask >> (n - 1 - k)) & 1) as u8).collect())
        .collect()
}

fn richardson(g: impl Fn(f64) -> f64, h: f64) -> f64 {
    let d1 = g(h);
    let d2 = g(h / 2.0);
    (4.0 * d2 - d1) / 3.0
}

/// Central-difference gradient with one Richardson extrapolation.
pub fn fd_gradient(f: impl Fn(&[f64]) -> f64, theta: &[f64], h: f64) -> DVector<f64> {
    let p = theta.len();
    DVector::from_fn(p, |j, _| {
        richardson(
            |step| {
                let mut a = theta.to_vec();
                let mut b = theta.to_vec();
                a[j] += step;
                b[j] -= step;
                (f(&a) - f(&b)) / (2.0 * step)
            },
            h,
        )
    })
}

/// Central-difference Hessian from function values, Richardson extrapolated.
pub fn fd_hessian(f: impl Fn(&[f64]) -> f64, theta: &[f64], h: f64) -> DMatrix<f64> {
    let p = theta.len();
    let at = |di: usize, si: f64, dj: usize, sj: f64| {
        let mut t = theta.to_vec();
        t[di] += si;
        t[dj] += sj;
        f(&t)
    };
    DMatrix::from_fn(p, p, |i, j| {
        richardson(
            |s| {
                if i == j {
                    let mut a = theta.to_vec();
                    let mut b = theta.to_vec();
                    a[i] += s;
                    b[i] -= s;
                    (f(&a) - 2.0 * f(theta) + f(&b)) / (s * s)
                } else {
                    (at(i, s, j, s) - at(i, s, j, -s) - at(i, -s, j, s) + at(i, -s, j, -s)) / (4.0 * s * s)
                }
            },
            h,
        )
    })
}

/// `max |a − b| / max(‖b‖∞, 1)`.
pub fn max_rel_error(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let diff = (a - b).abs().max();
    diff / b.abs().max().max(1.0)
}

/// Exact MH transition matrix on `states`. `proposals(i)` lists the
/// `(j, q(i → j))` pairs of the proposal from state `i`; acceptance uses
/// `l_c` and the proposal ratio `q(j → i) / q(i → j)`.
pub fn mh_transition_matrix<M: Model>(
    model: &M,
    theta: &[f64],
    states: &[M::Latent],
    proposals: impl Fn(usize) -> Vec<(usize, f64)>,
) -> DMatrix<f64> {
    let n = states.len();
    let logs: Vec<f64> = states.iter().map(|z| model.complete_loglik(theta, z)).collect();
    let q = |i: usize, j: usize| proposals(i).iter().filter(|(k, _)| *k == j).map(|(_, w)| w).sum::<f64>();
    let mut p = DMatrix::zeros(n, n);
    for i in 0..n {
        for (j, qij) in proposals(i) {
            if j == i || qij == 0.0 {
                continue;
            }
            let log_ratio = (q(j, i) / qij).ln();
            p[(i, j)] += qij * acceptance_probability(logs[i], logs[j], log_ratio);
        }
        let off: f64 = (0..n).filter(|&j| j != i).map(|j| p[(i, j)]).sum();
        p[(i, i)] = 1.0 - off;
    }
    p
}

/// Label vectors differing from `states[i]` in exactly one position, each
/// proposed with probability `1/n`. Matches a single-site flip proposal.
pub fn single_flip_proposals(states: &[Vec<u8>], i: usize) -> Vec<(usize, f64)> {
    let n = states[i].len();
    (0..n)
        .map(|k| {
            let mut z = states[i].clone();
            z[k] ^= 1;
            let j = states.iter().position(|s| *s == z).expect("state space closed under flips");
            (j, 1.0 / n as f64)
        })
        .collect()
}

/// `z ∈ {0, 1}` with `l_c(θ; z) = θ z − θ²/2`, so `P(z = 1 | θ) = logistic(θ)`
/// and `log L(θ) = ln(1 + eᶿ) − θ²/2`. Always proposes the other state.
#[derive(Debug, Clone, Copy)]
pub struct TwoPoint;

impl TwoPoint {
    pub fn states() -> Vec<u8> {
        vec![0, 1]
    }

    pub fn log_marginal(theta: f64) -> f64 {
        theta.exp().ln_1p() - theta * theta / 2.0
    }
}

impl Model for TwoPoint {
    type Latent = u8;

    fn dim(&self) -> usize {
        1
    }

    fn size_hint(&self) -> usize {
        1
    }

    fn complete_loglik(&self, theta: &[f64], z: &u8) -> f64 {
        theta[0] * f64::from(*z) - theta[0] * theta[0] / 2.0
    }

    fn score(&self, theta: &[f64], z: &u8) -> DVector<f64> {
        DVector::from_element(1, f64::from(*z) - theta[0])
    }

    fn complete_info(&self, _theta: &[f64], _z: &u8) -> DMatrix<f64> {
        DMatrix::from_element(1, 1, 1.0)
    }

    fn propose(&self, _theta: &[f64], z: &u8, _rng: &mut dyn RngCore) -> Proposal<u8> {
        Proposal { candidate: 1 - z, log_ratio: 0.0 }
    }

    fn init_latent(&self, _theta: &[f64], _rng: &mut dyn RngCore) -> u8 {
        0
    }
}

/// Continuous latent `z | θ ~ N(θ, 1)` with `l_c = −(z − θ)²/2`, explored by
/// a Gaussian random walk of the given step.
#[derive(Debug, Clone, Copy)]
pub struct GaussianLatent {
    pub step: f64,
}

impl Model for GaussianLatent {
    type Latent = f64;

    fn dim(&self) -> usize {
        1
    }

    fn size_hint(&self) -> usize {
        1
    }

    fn complete_loglik(&self, theta: &[f64], z: &f64) -> f64 {
        -(z - theta[0]).powi(2) / 2.0
    }

    fn score(&self, theta: &[f64], z: &f64) -> DVector<f64> {
        DVector::from_element(1, z - theta[0])
    }

    fn complete_info(&self, _theta: &[f64], _z: &f64) -> DMatrix<f64> {
        DMatrix::from_element(1, 1, 1.0)
    }

    fn propose(&self, _theta: &[f64], z: &f64, rng: &mut dyn RngCore) -> Proposal<f64> {
        let e: f64 = rng.sample(BoxMuller);
        Proposal { candidate: z + self.step * e, log_ratio: 0.0 }
    }

    fn init_latent(&self, theta: &[f64], _rng: &mut dyn RngCore) -> f64 {
        theta[0]
    }
}

/// Box-Muller standard normal, kept local so the oracle does not share a
/// sampler with the code under test.
struct BoxMuller;

impl rand::distr::Distribution<f64> for BoxMuller {
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u1: f64 = 1.0 - rng.random::<f64>();
        let u2: f64 = rng.random();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }
}
