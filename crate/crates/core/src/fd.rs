//! Central finite differences with the relative step `1e-5 (1 + |θⱼ|)`.

use alloc::vec::Vec;
use nalgebra::{DMatrix, DVector};

pub fn step(x: f64) -> f64 {
    1e-5 * (1.0 + x.abs())
}

pub fn gradient<F>(f: F, theta: &[f64]) -> DVector<f64>
where
    F: Fn(&[f64]) -> f64,
{
    let mut work: Vec<f64> = theta.to_vec();
    DVector::from_iterator(
        theta.len(),
        (0..theta.len()).map(|j| {
            let h = step(theta[j]);
            work[j] = theta[j] + h;
            let up = f(&work);
            work[j] = theta[j] - h;
            let down = f(&work);
            work[j] = theta[j];
            (up - down) / (2.0 * h)
        }),
    )
}

/// Jacobian `∂fᵢ/∂θⱼ` of a vector-valued function.
pub fn jacobian<F>(f: F, theta: &[f64], rows: usize) -> DMatrix<f64>
where
    F: Fn(&[f64]) -> DVector<f64>,
{
    let mut work: Vec<f64> = theta.to_vec();
    let mut jac = DMatrix::zeros(rows, theta.len());
    for j in 0..theta.len() {
        let h = step(theta[j]);
        work[j] = theta[j] + h;
        let up = f(&work);
        work[j] = theta[j] - h;
        let down = f(&work);
        work[j] = theta[j];
        for i in 0..rows.min(up.len()).min(down.len()) {
            jac[(i, j)] = (up[i] - down[i]) / (2.0 * h);
        }
    }
    jac
}

/// Hessian as the symmetrized Jacobian of the finite-difference gradient.
pub fn hessian<F>(f: F, theta: &[f64]) -> DMatrix<f64>
where
    F: Fn(&[f64]) -> f64,
{
    let mut h = jacobian(|t| gradient(&f, t), theta, theta.len());
    crate::linalg::symmetrize(&mut h);
    h
}
