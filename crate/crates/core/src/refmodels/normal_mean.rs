use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
use rand::RngCore;

use super::ReferenceModel;
use crate::linalg;
use crate::model::{ConditionalMoments, Model, Proposal};
use crate::special::ln_std_normal_pdf;

/// `xₖ ~ N(μ, 1)` with nothing missing; `θ = (μ)`. The latent space is a
/// single point, so every conditional expectation is exact and the Louis
/// formula collapses to the complete-data information `n`.
#[derive(Debug, Clone)]
pub struct NormalMeanModel {
    data: Vec<f64>,
}

impl NormalMeanModel {
    pub fn new(data: Vec<f64>) -> Self {
        Self { data }
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    fn observed_score(&self, mu: f64) -> f64 {
        self.data.iter().map(|x| x - mu).sum()
    }
}

impl Model for NormalMeanModel {
    type Latent = ();

    fn dim(&self) -> usize {
        1
    }

    fn size_hint(&self) -> usize {
        self.data.len()
    }

    fn complete_loglik(&self, theta: &[f64], _: &()) -> f64 {
        self.data.iter().map(|x| ln_std_normal_pdf(x - theta[0])).sum()
    }

    fn score(&self, theta: &[f64], _: &()) -> DVector<f64> {
        DVector::from_element(1, self.observed_score(theta[0]))
    }

    fn complete_info(&self, _: &[f64], _: &()) -> DMatrix<f64> {
        DMatrix::from_element(1, 1, self.data.len() as f64)
    }

    fn propose(&self, _: &[f64], _: &(), _: &mut dyn RngCore) -> Proposal<()> {
        Proposal { candidate: (), log_ratio: 0.0 }
    }

    fn init_latent(&self, _: &[f64], _: &mut dyn RngCore) {}

    fn exact_conditional_expectations(&self, theta: &[f64]) -> Option<ConditionalMoments> {
        let s = self.score(theta, &());
        Some(ConditionalMoments {
            score_outer: linalg::outer(&s),
            score: s,
            info: self.complete_info(theta, &()),
        })
    }
}

impl ReferenceModel for NormalMeanModel {
    fn exact_em_step(&self, _: &[f64]) -> Vec<f64> {
        self.initial_theta()
    }

    fn exact_marginal_loglik(&self, theta: &[f64]) -> f64 {
        self.complete_loglik(theta, &())
    }

    fn initial_theta(&self) -> Vec<f64> {
        vec![self.data.iter().sum::<f64>() / self.data.len() as f64]
    }
}
