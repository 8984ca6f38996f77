use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, RngCore};
use rand_distr::StandardNormal;

use super::ReferenceModel;
use crate::model::{ConditionalMoments, Model, Proposal};
use crate::special::{ln_std_normal_pdf, log_add_exp, logistic};
#[allow(unused_imports)]
use num_traits::Float;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MixtureProposal {
    /// Redraw every label from its conditional responsibility.
    Conditional,
    /// Flip the label of one uniformly chosen observation (symmetric).
    SingleFlip,
}

/// Two-component Gaussian mixture with unit variances,
/// `xₖ ~ π N(μ₁, 1) + (1 − π) N(μ₂, 1)`, `θ = (logit π, μ₁, μ₂)`.
/// Latent labels: `0` for component one, `1` for component two.
#[derive(Debug, Clone)]
pub struct MixtureModel {
    data: Vec<f64>,
    proposal: MixtureProposal,
}

/// `(ln π, ln(1 − π))` from `logit π`.
fn log_weights(logit: f64) -> (f64, f64) {
    (-log_add_exp(0.0, -logit), -log_add_exp(0.0, logit))
}

impl MixtureModel {
    pub fn new(data: Vec<f64>) -> Self {
        Self {
            data,
            proposal: MixtureProposal::Conditional,
        }
    }

    pub fn with_proposal(mut self, proposal: MixtureProposal) -> Self {
        self.proposal = proposal;
        self
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// `ln P(zₖ = 0 | xₖ, θ)` and `ln P(zₖ = 1 | xₖ, θ)` per observation.
    fn log_responsibilities(&self, theta: &[f64]) -> impl Iterator<Item = (f64, f64)> + '_ {
        let (lp1, lp2) = log_weights(theta[0]);
        let (mu1, mu2) = (theta[1], theta[2]);
        self.data.iter().map(move |&x| {
            let a = lp1 + ln_std_normal_pdf(x - mu1);
            let b = lp2 + ln_std_normal_pdf(x - mu2);
            let total = log_add_exp(a, b);
            (a - total, b - total)
        })
    }

    /// `P(zₖ = 0 | xₖ, θ)`.
    pub fn responsibilities(&self, theta: &[f64]) -> Vec<f64> {
        self.log_responsibilities(theta).map(|(a, _)| a.exp()).collect()
    }

    fn draw_conditional(&self, theta: &[f64], rng: &mut dyn RngCore) -> (Vec<u8>, f64) {
        let mut ln_q = 0.0;
        let labels = self
            .log_responsibilities(theta)
            .map(|(la, lb)| {
                let u: f64 = rng.random();
                if u < la.exp() {
                    ln_q += la;
                    0
                } else {
                    ln_q += lb;
                    1
                }
            })
            .collect();
        (labels, ln_q)
    }

    fn ln_conditional(&self, theta: &[f64], z: &[u8]) -> f64 {
        self.log_responsibilities(theta)
            .zip(z)
            .map(|((la, lb), &k)| if k == 0 { la } else { lb })
            .sum()
    }

    /// Per-observation score contribution under label `k`.
    fn unit_score(pi: f64, mu1: f64, mu2: f64, x: f64, k: u8) -> [f64; 3] {
        if k == 0 {
            [1.0 - pi, x - mu1, 0.0]
        } else {
            [-pi, 0.0, x - mu2]
        }
    }
}

impl Model for MixtureModel {
    type Latent = Vec<u8>;

    fn dim(&self) -> usize {
        3
    }

    fn size_hint(&self) -> usize {
        self.data.len()
    }

    fn complete_loglik(&self, theta: &[f64], z: &Vec<u8>) -> f64 {
        let (lp1, lp2) = log_weights(theta[0]);
        self.data
            .iter()
            .zip(z)
            .map(|(&x, &k)| {
                if k == 0 {
                    lp1 + ln_std_normal_pdf(x - theta[1])
                } else {
                    lp2 + ln_std_normal_pdf(x - theta[2])
                }
            })
            .sum()
    }

    fn score(&self, theta: &[f64], z: &Vec<u8>) -> DVector<f64> {
        let pi = logistic(theta[0]);
        let mut s = [0.0; 3];
        for (&x, &k) in self.data.iter().zip(z) {
            let u = Self::unit_score(pi, theta[1], theta[2], x, k);
            for j in 0..3 {
                s[j] += u[j];
            }
        }
        DVector::from_row_slice(&s)
    }

    fn complete_info(&self, theta: &[f64], z: &Vec<u8>) -> DMatrix<f64> {
        let pi = logistic(theta[0]);
        let n = self.data.len() as f64;
        let n1 = z.iter().filter(|&&k| k == 0).count() as f64;
        DMatrix::from_diagonal(&DVector::from_vec(vec![n * pi * (1.0 - pi), n1, n - n1]))
    }

    fn propose(&self, theta: &[f64], z: &Vec<u8>, rng: &mut dyn RngCore) -> Proposal<Vec<u8>> {
        match self.proposal {
            MixtureProposal::Conditional => {
                let (candidate, ln_q_candidate) = self.draw_conditional(theta, rng);
                let log_ratio = self.ln_conditional(theta, z) - ln_q_candidate;
                Proposal { candidate, log_ratio }
            }
            MixtureProposal::SingleFlip => {
                let mut candidate = z.clone();
                if !candidate.is_empty() {
                    let k = rng.random_range(0..candidate.len());
                    candidate[k] ^= 1;
                }
                Proposal { candidate, log_ratio: 0.0 }
            }
        }
    }

    fn init_latent(&self, theta: &[f64], rng: &mut dyn RngCore) -> Vec<u8> {
        self.draw_conditional(theta, rng).0
    }

    /// Labels are conditionally independent, so the moments are sums of
    /// two-point expectations per observation.
    fn exact_conditional_expectations(&self, theta: &[f64]) -> Option<ConditionalMoments> {
        let pi = logistic(theta[0]);
        let n = self.data.len() as f64;
        let mut score = DVector::<f64>::zeros(3);
        let mut cov = DMatrix::<f64>::zeros(3, 3);
        let mut n1 = 0.0;
        for (&x, w) in self.data.iter().zip(self.responsibilities(theta)) {
            let a = DVector::from_row_slice(&Self::unit_score(pi, theta[1], theta[2], x, 0));
            let b = DVector::from_row_slice(&Self::unit_score(pi, theta[1], theta[2], x, 1));
            score += &a * w + &b * (1.0 - w);
            let d = a - b;
            cov += &d * d.transpose() * (w * (1.0 - w));
            n1 += w;
        }
        let info = DMatrix::from_diagonal(&DVector::from_vec(vec![n * pi * (1.0 - pi), n1, n - n1]));
        let score_outer = &score * score.transpose() + cov;
        Some(ConditionalMoments { score, info, score_outer })
    }
}

impl ReferenceModel for MixtureModel {
    fn exact_em_step(&self, theta: &[f64]) -> Vec<f64> {
        let w = self.responsibilities(theta);
        let sw: f64 = w.iter().sum();
        let n = self.data.len() as f64;
        let mu1 = self.data.iter().zip(&w).map(|(x, w)| w * x).sum::<f64>() / sw;
        let mu2 = self.data.iter().zip(&w).map(|(x, w)| (1.0 - w) * x).sum::<f64>() / (n - sw);
        let pi = sw / n;
        vec![(pi / (1.0 - pi)).ln(), mu1, mu2]
    }

    fn exact_marginal_loglik(&self, theta: &[f64]) -> f64 {
        let (lp1, lp2) = log_weights(theta[0]);
        self.data
            .iter()
            .map(|&x| log_add_exp(lp1 + ln_std_normal_pdf(x - theta[1]), lp2 + ln_std_normal_pdf(x - theta[2])))
            .sum()
    }

    /// Even weights, component means at the lower and upper quartiles.
    fn initial_theta(&self) -> Vec<f64> {
        let mut sorted = self.data.clone();
        sorted.sort_by(|a, b| a.total_cmp(b));
        let n = sorted.len();
        if n == 0 {
            return vec![0.0, -1.0, 1.0];
        }
        let q = |f: f64| sorted[((f * (n - 1) as f64).round() as usize).min(n - 1)];
        let (lo, hi) = (q(0.25), q(0.75));
        if lo == hi {
            vec![0.0, lo - 0.5, hi + 0.5]
        } else {
            vec![0.0, lo, hi]
        }
    }
}

/// `n` draws: component one with probability `pi`, unit variances.
pub fn generate_mixture(n: usize, pi: f64, mu1: f64, mu2: f64, rng: &mut dyn RngCore) -> Vec<f64> {
    (0..n)
        .map(|_| {
            let u: f64 = rng.random();
            let e: f64 = rng.sample(StandardNormal);
            if u < pi { mu1 + e } else { mu2 + e }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{validate_model, ParamVector};
    use crate::rng_stream;

    #[test]
    fn one_point_symmetric_density() {
        // x = 0 sits midway between μ = ±1 with equal weights: L = φ(1)
        let m = MixtureModel::new(vec![0.0]);
        let v = m.exact_marginal_loglik(&[0.0, -1.0, 1.0]);
        let direct = (0.5 * ln_std_normal_pdf(1.0).exp() + 0.5 * ln_std_normal_pdf(-1.0).exp()).ln();
        assert!((v - direct).abs() < 1e-15);
        assert!((v - ln_std_normal_pdf(1.0)).abs() < 1e-15);
    }

    #[test]
    fn equal_means_half_weight_is_em_fixed_point() {
        let m = MixtureModel::new(vec![-1.0, 1.0, -2.0, 2.0]);
        let next = m.exact_em_step(&[0.0, 0.0, 0.0]);
        assert!(next[0].abs() < 1e-15);
        assert!(next[1].abs() < 1e-15);
        assert!(next[2].abs() < 1e-15);
    }

    #[test]
    fn validates() {
        let data = generate_mixture(60, 0.4, -1.0, 2.0, &mut rng_stream(2, 0));
        let m = MixtureModel::new(data);
        let report = validate_model(&m, &ParamVector::new(vec![0.2, -0.8, 1.7]).unwrap(), 10, 3).unwrap();
        assert!(report.passed(), "{report:?}");
    }

    #[test]
    fn conditional_proposal_ratio_matches_density() {
        let m = MixtureModel::new(vec![-1.0, 0.3, 2.0]);
        let theta = [0.1, -0.5, 1.5];
        let mut rng = rng_stream(4, 0);
        let z = m.init_latent(&theta, &mut rng);
        let p = m.propose(&theta, &z, &mut rng);
        let expect = m.ln_conditional(&theta, &z) - m.ln_conditional(&theta, &p.candidate);
        assert!((p.log_ratio - expect).abs() < 1e-12);
        // an independence proposal from the exact conditional always accepts
        let ratio = m.complete_loglik(&theta, &p.candidate) - m.complete_loglik(&theta, &z) + p.log_ratio;
        assert!(ratio.abs() < 1e-12);
    }
}
