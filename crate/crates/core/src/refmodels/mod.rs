//! Reference models with exact oracles.
//!
//! Each model implements [`Model`] for the engine and [`ReferenceModel`] for
//! the oracles: a closed-form EM step (maximizer of the conditional expected
//! complete-data log-likelihood), the exact observed-data log-likelihood,
//! and through it [`direct_mle`]. Constrained natural parameters are
//! carried on unconstrained scales (log, logit, atanh), so every model works
//! on an open box.

mod bivariate;
mod censored;
mod mixture;
mod normal_mean;

pub use bivariate::{generate_bivariate, BivariateNormalMissingModel, BivariateRow};
pub use censored::{generate_censored_normal, CensoredNormalModel, CensoredObservation, CensoredProposal};
pub use mixture::{generate_mixture, MixtureModel, MixtureProposal};
pub use normal_mean::NormalMeanModel;

use alloc::vec::Vec;

use nalgebra::DVector;

use crate::error::{Result, SaemError};
use crate::model::Model;
use crate::{fd, linalg};

/// Gradient-norm target of [`direct_mle`].
pub const MLE_GRADIENT_TOLERANCE: f64 = 1e-6;

pub trait ReferenceModel: Model {
    /// `argmax_θ E[l_c(θ; x, z) | x, θ_old]` in closed form.
    fn exact_em_step(&self, theta_old: &[f64]) -> Vec<f64>;

    /// `log ∫ f(x, z; θ) dz` in closed form.
    fn exact_marginal_loglik(&self, theta: &[f64]) -> f64;

    /// A data-driven starting point (moment estimates).
    fn initial_theta(&self) -> Vec<f64>;
}

/// Iterates [`ReferenceModel::exact_em_step`] until the largest coordinate
/// change drops to `tol`. Returns the fixed point and the iteration count.
pub fn em_fixed_point<M: ReferenceModel + ?Sized>(
    model: &M,
    theta0: &[f64],
    tol: f64,
    max_iter: usize,
) -> (Vec<f64>, usize) {
    let mut theta = theta0.to_vec();
    for it in 1..=max_iter {
        let next = model.exact_em_step(&theta);
        let change = next
            .iter()
            .zip(&theta)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        theta = next;
        if change <= tol {
            return (theta, it);
        }
    }
    (theta, max_iter)
}

/// Maximizes the exact observed-data log-likelihood.
pub fn direct_mle<M: ReferenceModel + ?Sized>(model: &M, theta0: &[f64]) -> Result<Vec<f64>> {
    maximize(|t| model.exact_marginal_loglik(t), theta0)
}

/// BFGS with Armijo backtracking on finite-difference gradients, finished
/// with Newton steps on a finite-difference Hessian once the line search
/// runs into roundoff. Succeeds when `‖∇f‖₂ ≤ 1e-6`.
pub fn maximize<F>(f: F, theta0: &[f64]) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> f64,
{
    let p = theta0.len();
    let objective = |t: &[f64]| -f(t);
    let mut x = DVector::from_column_slice(theta0);
    let mut fx = objective(x.as_slice());
    if !fx.is_finite() {
        return Err(SaemError::NonFiniteEvaluation { what: "objective at the starting point" });
    }
    let mut g = fd::gradient(objective, x.as_slice());
    let mut h_inv = nalgebra::DMatrix::<f64>::identity(p, p);
    let mut first = true;

    for _ in 0..1000 {
        if g.norm() <= MLE_GRADIENT_TOLERANCE {
            return Ok(x.as_slice().to_vec());
        }
        let mut d = -(&h_inv * &g);
        if g.dot(&d) >= 0.0 {
            h_inv = nalgebra::DMatrix::identity(p, p);
            d = -g.clone();
        }
        if first && d.norm() > 1.0 {
            d /= d.norm();
        }
        let slope = g.dot(&d);
        let mut t = 1.0;
        let mut next = None;
        while t > 1e-14 {
            let xn = &x + &d * t;
            let fxn = objective(xn.as_slice());
            if fxn.is_finite() && fxn <= fx + 1e-4 * t * slope {
                next = Some((xn, fxn));
                break;
            }
            t *= 0.5;
        }
        let Some((xn, fxn)) = next else { break };
        let gn = fd::gradient(objective, xn.as_slice());
        let s = &xn - &x;
        let y = &gn - &g;
        let sy = s.dot(&y);
        if sy > 1e-12 * s.norm() * y.norm() {
            if first {
                h_inv *= sy / y.dot(&y);
            }
            let rho = 1.0 / sy;
            let id = nalgebra::DMatrix::<f64>::identity(p, p);
            let left = &id - &s * y.transpose() * rho;
            let right = &id - &y * s.transpose() * rho;
            h_inv = &left * &h_inv * &right + &s * s.transpose() * rho;
            first = false;
        }
        x = xn;
        fx = fxn;
        g = gn;
    }

    // Newton polish on the gradient
    for _ in 0..50 {
        if g.norm() <= MLE_GRADIENT_TOLERANCE {
            break;
        }
        let hess = fd::hessian(objective, x.as_slice());
        let Some(inv) = linalg::spd_inverse(&hess) else { break };
        let xn = &x - inv * &g;
        let fxn = objective(xn.as_slice());
        let gn = fd::gradient(objective, xn.as_slice());
        if !fxn.is_finite() || gn.norm() >= g.norm() {
            break;
        }
        x = xn;
        g = gn;
    }

    let grad_norm = g.norm();
    if grad_norm <= MLE_GRADIENT_TOLERANCE {
        Ok(x.as_slice().to_vec())
    } else {
        Err(SaemError::LineSearchFailure {
            best: x.as_slice().to_vec(),
            grad_norm,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn maximize_concave_quadratic() {
        let f = |t: &[f64]| -(t[0] - 3.0).powi(2) - 10.0 * (t[1] + 1.0).powi(2) - t[0] * t[1];
        let x = maximize(f, &[0.0, 0.0]).unwrap();
        // stationary point of the quadratic: solve [2 1; 1 20] x = [6; -20]
        let det = 2.0 * 20.0 - 1.0;
        let x0 = (6.0 * 20.0 + 20.0) / det;
        let x1 = (2.0 * -20.0 - 6.0) / det;
        assert!((x[0] - x0).abs() < 1e-7 && (x[1] - x1).abs() < 1e-7, "{x:?}");
    }

    #[test]
    fn maximize_reports_unbounded_objective() {
        let r = maximize(|t: &[f64]| t[0], &[0.0]);
        assert!(matches!(r, Err(SaemError::LineSearchFailure { .. })));
    }
}
