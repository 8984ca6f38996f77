//! Small dense helpers on top of nalgebra. Parameter dimensions here are
//! tiny, so nothing is tuned for size.

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};

/// `a aᵀ`.
pub fn outer(a: &DVector<f64>) -> DMatrix<f64> {
    a * a.transpose()
}

/// Largest entry of `|A − Aᵀ|`.
pub fn max_asymmetry(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in (i + 1)..n {
            let d = (m[(i, j)] - m[(j, i)]).abs();
            if d > worst || d.is_nan() {
                worst = d;
            }
        }
    }
    worst
}

/// Replaces `A` with `(A + Aᵀ) / 2`.
pub fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let avg = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = avg;
            m[(j, i)] = avg;
        }
    }
}

pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return f64::INFINITY;
    }
    SymmetricEigen::new(m.clone()).eigenvalues.min()
}

pub fn is_finite(m: &DMatrix<f64>) -> bool {
    m.iter().all(|v| v.is_finite())
}

pub fn is_positive_definite(m: &DMatrix<f64>) -> bool {
    is_finite(m) && Cholesky::new(m.clone()).is_some()
}

/// Inverse of a symmetric positive definite matrix, `None` if the Cholesky
/// factorization fails.
pub fn spd_inverse(m: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    if !is_finite(m) {
        return None;
    }
    Cholesky::new(m.clone()).map(|c| c.inverse())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symmetrize_averages_off_diagonal() {
        let mut m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 4.0, 3.0]);
        assert_eq!(max_asymmetry(&m), 2.0);
        symmetrize(&mut m);
        assert_eq!(m, DMatrix::from_row_slice(2, 2, &[1.0, 3.0, 3.0, 3.0]));
    }

    #[test]
    fn min_eigenvalue_of_diagonal() {
        let m = DMatrix::from_diagonal(&DVector::from_vec(alloc::vec![4.0, -2.0, 1.0]));
        assert!((min_eigenvalue(&m) + 2.0).abs() < 1e-14);
        assert!(!is_positive_definite(&m));
    }

    #[test]
    fn spd_inverse_of_two_by_two() {
        let m = DMatrix::from_row_slice(2, 2, &[4.0, 1.0, 1.0, 3.0]);
        let inv = spd_inverse(&m).unwrap();
        let id = &m * &inv;
        assert!((id - DMatrix::<f64>::identity(2, 2)).amax() < 1e-14);
    }
}
