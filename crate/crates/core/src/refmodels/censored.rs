use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, RngCore};
use rand_distr::StandardNormal;

use super::ReferenceModel;
use crate::model::{ConditionalMoments, Model, Proposal};
use crate::special::{
    ln_lower_truncated_normal_pdf, ln_std_normal_pdf, ln_std_normal_sf, lower_truncated_moments,
    sample_lower_truncated_std_normal,
};
#[allow(unused_imports)]
use num_traits::Float;

/// One observation: an exact value, or a right-censoring threshold `c`
/// meaning only `y > c` is known.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CensoredObservation {
    pub value: f64,
    pub censored: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CensoredProposal {
    /// Redraw every censored value from its truncated-normal conditional.
    Conditional,
    /// Move one randomly chosen censored value by `scale · σ · N(0, 1)`.
    RandomWalk { scale: f64 },
}

/// `yₖ ~ N(μ, σ²)` observed or right-censored at a known threshold.
/// `θ = (μ, log σ)`; the latent state holds the true values of the censored
/// observations in data order.
#[derive(Debug, Clone)]
pub struct CensoredNormalModel {
    observations: Vec<CensoredObservation>,
    thresholds: Vec<f64>,
    proposal: CensoredProposal,
}

impl CensoredNormalModel {
    pub fn new(observations: Vec<CensoredObservation>) -> Self {
        let thresholds = observations.iter().filter(|o| o.censored).map(|o| o.value).collect();
        Self {
            observations,
            thresholds,
            proposal: CensoredProposal::Conditional,
        }
    }

    pub fn with_proposal(mut self, proposal: CensoredProposal) -> Self {
        self.proposal = proposal;
        self
    }

    pub fn observations(&self) -> &[CensoredObservation] {
        &self.observations
    }

    pub fn censored_count(&self) -> usize {
        self.thresholds.len()
    }

    fn observed_values(&self) -> impl Iterator<Item = f64> + '_ {
        self.observations.iter().filter(|o| !o.censored).map(|o| o.value)
    }

    /// Standardized residuals of the completed sample.
    fn residuals<'a>(&'a self, theta: &[f64], z: &'a [f64]) -> impl Iterator<Item = f64> + 'a {
        let (mu, sigma) = (theta[0], theta[1].exp());
        self.observed_values().chain(z.iter().copied()).map(move |y| (y - mu) / sigma)
    }

    fn draw_conditional(&self, theta: &[f64], rng: &mut dyn RngCore) -> Vec<f64> {
        let (mu, sigma) = (theta[0], theta[1].exp());
        self.thresholds
            .iter()
            .map(|&c| mu + sigma * sample_lower_truncated_std_normal((c - mu) / sigma, rng))
            .collect()
    }

    fn ln_conditional_density(&self, theta: &[f64], z: &[f64]) -> f64 {
        let (mu, sigma) = (theta[0], theta[1].exp());
        z.iter()
            .zip(&self.thresholds)
            .map(|(&v, &c)| ln_lower_truncated_normal_pdf(v, mu, sigma, c))
            .sum()
    }
}

impl Model for CensoredNormalModel {
    type Latent = Vec<f64>;

    fn dim(&self) -> usize {
        2
    }

    fn size_hint(&self) -> usize {
        self.observations.len()
    }

    fn complete_loglik(&self, theta: &[f64], z: &Vec<f64>) -> f64 {
        if z.iter().zip(&self.thresholds).any(|(v, c)| v <= c) {
            return f64::NEG_INFINITY;
        }
        let n = self.observations.len() as f64;
        self.residuals(theta, z).map(ln_std_normal_pdf).sum::<f64>() - n * theta[1]
    }

    fn score(&self, theta: &[f64], z: &Vec<f64>) -> DVector<f64> {
        let sigma = theta[1].exp();
        let (mut s_mu, mut s_eta) = (0.0, 0.0);
        for r in self.residuals(theta, z) {
            s_mu += r;
            s_eta += r * r - 1.0;
        }
        DVector::from_vec(vec![s_mu / sigma, s_eta])
    }

    fn complete_info(&self, theta: &[f64], z: &Vec<f64>) -> DMatrix<f64> {
        let sigma = theta[1].exp();
        let n = self.observations.len() as f64;
        let (mut sr, mut sr2) = (0.0, 0.0);
        for r in self.residuals(theta, z) {
            sr += r;
            sr2 += r * r;
        }
        let off = 2.0 * sr / sigma;
        DMatrix::from_row_slice(2, 2, &[n / (sigma * sigma), off, off, 2.0 * sr2])
    }

    fn propose(&self, theta: &[f64], z: &Vec<f64>, rng: &mut dyn RngCore) -> Proposal<Vec<f64>> {
        match self.proposal {
            CensoredProposal::Conditional => {
                let candidate = self.draw_conditional(theta, rng);
                let log_ratio =
                    self.ln_conditional_density(theta, z) - self.ln_conditional_density(theta, &candidate);
                Proposal { candidate, log_ratio }
            }
            CensoredProposal::RandomWalk { scale } => {
                let mut candidate = z.clone();
                if !candidate.is_empty() {
                    let k = rng.random_range(0..candidate.len());
                    let e: f64 = rng.sample(StandardNormal);
                    candidate[k] += scale * theta[1].exp() * e;
                }
                Proposal { candidate, log_ratio: 0.0 }
            }
        }
    }

    fn init_latent(&self, theta: &[f64], rng: &mut dyn RngCore) -> Vec<f64> {
        self.draw_conditional(theta, rng)
    }

    fn exact_conditional_expectations(&self, theta: &[f64]) -> Option<ConditionalMoments> {
        let (mu, sigma) = (theta[0], theta[1].exp());
        let n = self.observations.len() as f64;
        let (mut e_r, mut e_r2) = (0.0, 0.0);
        for x in self.observed_values() {
            let r = (x - mu) / sigma;
            e_r += r;
            e_r2 += r * r;
        }
        // covariance of (r/σ, r² − 1) summed over independent censored units
        let mut cov = DMatrix::<f64>::zeros(2, 2);
        for &c in &self.thresholds {
            let [m1, m2, m3, m4] = lower_truncated_moments((c - mu) / sigma);
            e_r += m1;
            e_r2 += m2;
            cov[(0, 0)] += (m2 - m1 * m1) / (sigma * sigma);
            cov[(0, 1)] += (m3 - m1 * m2) / sigma;
            cov[(1, 1)] += m4 - m2 * m2;
        }
        cov[(1, 0)] = cov[(0, 1)];
        let score = DVector::from_vec(vec![e_r / sigma, e_r2 - n]);
        let off = 2.0 * e_r / sigma;
        let info = DMatrix::from_row_slice(2, 2, &[n / (sigma * sigma), off, off, 2.0 * e_r2]);
        let score_outer = &score * score.transpose() + cov;
        Some(ConditionalMoments { score, info, score_outer })
    }
}

impl ReferenceModel for CensoredNormalModel {
    fn exact_em_step(&self, theta: &[f64]) -> Vec<f64> {
        let (mu, sigma) = (theta[0], theta[1].exp());
        let n = self.observations.len() as f64;
        let moments: Vec<(f64, f64)> = self
            .thresholds
            .iter()
            .map(|&c| {
                let [m1, m2, _, _] = lower_truncated_moments((c - mu) / sigma);
                (mu + sigma * m1, sigma * sigma * (m2 - m1 * m1))
            })
            .collect();
        let mu_new = (self.observed_values().sum::<f64>() + moments.iter().map(|m| m.0).sum::<f64>()) / n;
        let ss = self.observed_values().map(|x| (x - mu_new).powi(2)).sum::<f64>()
            + moments.iter().map(|&(m, v)| v + (m - mu_new).powi(2)).sum::<f64>();
        vec![mu_new, 0.5 * (ss / n).ln()]
    }

    fn exact_marginal_loglik(&self, theta: &[f64]) -> f64 {
        let (mu, eta) = (theta[0], theta[1]);
        let sigma = eta.exp();
        self.observations
            .iter()
            .map(|o| {
                let r = (o.value - mu) / sigma;
                if o.censored {
                    ln_std_normal_sf(r)
                } else {
                    ln_std_normal_pdf(r) - eta
                }
            })
            .sum()
    }

    /// Mean and log standard deviation of the values, thresholds included.
    fn initial_theta(&self) -> Vec<f64> {
        let n = self.observations.len() as f64;
        let mean = self.observations.iter().map(|o| o.value).sum::<f64>() / n;
        let var = self.observations.iter().map(|o| (o.value - mean).powi(2)).sum::<f64>() / n;
        vec![mean, 0.5 * var.max(1e-12).ln()]
    }
}

/// `n` draws from `N(mean, sd²)`, right-censored at a common threshold placed
/// midway between order statistics so that exactly `round(fraction · n)`
/// values are censored.
pub fn generate_censored_normal(
    n: usize,
    mean: f64,
    sd: f64,
    censor_fraction: f64,
    rng: &mut dyn RngCore,
) -> Vec<CensoredObservation> {
    let values: Vec<f64> = (0..n)
        .map(|_| {
            let e: f64 = rng.sample(StandardNormal);
            mean + sd * e
        })
        .collect();
    let k = ((censor_fraction.clamp(0.0, 1.0) * n as f64).round() as usize).min(n);
    if k == 0 || n == 0 {
        return values.into_iter().map(|value| CensoredObservation { value, censored: false }).collect();
    }
    let mut sorted = values.clone();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let threshold = if k == n {
        sorted[0] - 1.0
    } else {
        0.5 * (sorted[n - k - 1] + sorted[n - k])
    };
    values
        .into_iter()
        .map(|v| {
            if v > threshold {
                CensoredObservation { value: threshold, censored: true }
            } else {
                CensoredObservation { value: v, censored: false }
            }
        })
        .collect()
}
