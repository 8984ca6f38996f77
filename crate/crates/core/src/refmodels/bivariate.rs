use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, RngCore};
use rand_distr::StandardNormal;

use super::ReferenceModel;
use crate::error::{Result, SaemError};
use crate::model::{ConditionalMoments, Model, Proposal};
use crate::special::{ln_std_normal_pdf, LN_SQRT_2PI};
#[allow(unused_imports)]
use num_traits::Float;

/// A pair with at most one coordinate missing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BivariateRow {
    pub x1: Option<f64>,
    pub x2: Option<f64>,
}

/// Bivariate normal pairs with missing components,
/// `θ = (μ₁, μ₂, log σ₁, log σ₂, atanh ρ)`. The latent state holds the
/// missing coordinates in row order.
#[derive(Debug, Clone)]
pub struct BivariateNormalMissingModel {
    rows: Vec<BivariateRow>,
    /// `(row, coordinate)` for each latent entry.
    slots: Vec<(usize, usize)>,
}

struct Natural {
    mu: [f64; 2],
    sd: [f64; 2],
    rho: f64,
}

impl Natural {
    fn from_theta(theta: &[f64]) -> Self {
        Self {
            mu: [theta[0], theta[1]],
            sd: [theta[2].exp(), theta[3].exp()],
            rho: theta[4].tanh(),
        }
    }

    /// Mean and standard deviation of coordinate `missing` given the other.
    fn conditional(&self, missing: usize, observed_value: f64) -> (f64, f64) {
        let o = 1 - missing;
        let std_obs = (observed_value - self.mu[o]) / self.sd[o];
        (
            self.mu[missing] + self.rho * self.sd[missing] * std_obs,
            self.sd[missing] * (1.0 - self.rho * self.rho).sqrt(),
        )
    }
}

/// Log-density, score and `−∂²` of one complete pair.
struct RowTerms {
    loglik: f64,
    score: [f64; 5],
    info: [[f64; 5]; 5],
}

fn ln_cosh(x: f64) -> f64 {
    let a = x.abs();
    a + libm::log1p((-2.0 * a).exp()) - core::f64::consts::LN_2
}

fn row_terms(theta: &[f64], y1: f64, y2: f64) -> RowTerms {
    let (s1, s2) = (theta[2].exp(), theta[3].exp());
    let zeta = theta[4];
    let (sh, ch) = (zeta.sinh(), zeta.cosh());
    let rho = zeta.tanh();
    let a = ch * ch;
    let b = sh * ch;
    let c = 2.0 * a - 1.0;
    let u = (y1 - theta[0]) / s1;
    let v = (y2 - theta[1]) / s2;
    let (uu, vv, uv) = (u * u, v * v, u * v);

    let loglik = -2.0 * LN_SQRT_2PI - theta[2] - theta[3] + ln_cosh(zeta) - 0.5 * a * (uu + vv) + b * uv;
    let score = [
        (a * u - b * v) / s1,
        (a * v - b * u) / s2,
        -1.0 + a * uu - b * uv,
        -1.0 + a * vv - b * uv,
        rho - b * (uu + vv) + c * uv,
    ];
    // second derivatives of the log-density
    let mut h = [[0.0; 5]; 5];
    h[0][0] = -a / (s1 * s1);
    h[0][1] = b / (s1 * s2);
    h[0][2] = (-2.0 * a * u + b * v) / s1;
    h[0][3] = b * v / s1;
    h[0][4] = (2.0 * b * u - c * v) / s1;
    h[1][1] = -a / (s2 * s2);
    h[1][2] = b * u / s2;
    h[1][3] = (-2.0 * a * v + b * u) / s2;
    h[1][4] = (2.0 * b * v - c * u) / s2;
    h[2][2] = -2.0 * a * uu + b * uv;
    h[2][3] = b * uv;
    h[2][4] = 2.0 * b * uu - c * uv;
    h[3][3] = -2.0 * a * vv + b * uv;
    h[3][4] = 2.0 * b * vv - c * uv;
    h[4][4] = (1.0 - rho * rho) - c * (uu + vv) + 4.0 * b * uv;
    let mut info = [[0.0; 5]; 5];
    for i in 0..5 {
        for j in i..5 {
            info[i][j] = -h[i][j];
            info[j][i] = -h[i][j];
        }
    }
    RowTerms { loglik, score, info }
}

/// Five-point Gauss-Hermite rule for `E[g(T)]`, `T ~ N(0, 1)`; exact for
/// polynomials of degree up to nine.
fn gauss_hermite_5() -> [(f64, f64); 5] {
    let sqrt10 = 10.0f64.sqrt();
    let weight = |x: f64| {
        let x2 = x * x;
        let he4 = x2 * x2 - 6.0 * x2 + 3.0;
        4.8 / (he4 * he4)
    };
    let inner = (5.0 - sqrt10).sqrt();
    let outer = (5.0 + sqrt10).sqrt();
    [
        (-outer, weight(outer)),
        (-inner, weight(inner)),
        (0.0, weight(0.0)),
        (inner, weight(inner)),
        (outer, weight(outer)),
    ]
}

impl BivariateNormalMissingModel {
    /// Rows with both coordinates missing carry no information and are rejected.
    pub fn new(rows: Vec<BivariateRow>) -> Result<Self> {
        let mut slots = Vec::new();
        for (i, r) in rows.iter().enumerate() {
            match (r.x1, r.x2) {
                (None, None) => {
                    return Err(SaemError::InvalidConfig(format!("row {} has both coordinates missing", i + 1)))
                }
                (None, Some(_)) => slots.push((i, 0)),
                (Some(_), None) => slots.push((i, 1)),
                (Some(_), Some(_)) => {}
            }
        }
        Ok(Self { rows, slots })
    }

    pub fn rows(&self) -> &[BivariateRow] {
        &self.rows
    }

    pub fn missing_count(&self) -> usize {
        self.slots.len()
    }

    /// Completed pairs, latent values filling the gaps.
    fn completed<'a>(&'a self, z: &'a [f64]) -> impl Iterator<Item = (f64, f64)> + 'a {
        let mut next = 0usize;
        self.rows.iter().map(move |r| match (r.x1, r.x2) {
            (Some(a), Some(b)) => (a, b),
            (None, Some(b)) => {
                next += 1;
                (z[next - 1], b)
            }
            (Some(a), None) => {
                next += 1;
                (a, z[next - 1])
            }
            (None, None) => unreachable!("rejected at construction"),
        })
    }

    fn observed_of(&self, slot: (usize, usize)) -> f64 {
        let r = &self.rows[slot.0];
        if slot.1 == 0 { r.x2.unwrap_or(0.0) } else { r.x1.unwrap_or(0.0) }
    }

    fn draw_conditional(&self, theta: &[f64], rng: &mut dyn RngCore) -> Vec<f64> {
        let nat = Natural::from_theta(theta);
        self.slots
            .iter()
            .map(|&slot| {
                let (m, sd) = nat.conditional(slot.1, self.observed_of(slot));
                let e: f64 = rng.sample(StandardNormal);
                m + sd * e
            })
            .collect()
    }

    fn ln_conditional(&self, theta: &[f64], z: &[f64]) -> f64 {
        let nat = Natural::from_theta(theta);
        self.slots
            .iter()
            .zip(z)
            .map(|(&slot, &v)| {
                let (m, sd) = nat.conditional(slot.1, self.observed_of(slot));
                ln_std_normal_pdf((v - m) / sd) - sd.ln()
            })
            .sum()
    }
}

impl Model for BivariateNormalMissingModel {
    type Latent = Vec<f64>;

    fn dim(&self) -> usize {
        5
    }

    fn size_hint(&self) -> usize {
        self.rows.len()
    }

    fn complete_loglik(&self, theta: &[f64], z: &Vec<f64>) -> f64 {
        self.completed(z).map(|(a, b)| row_terms(theta, a, b).loglik).sum()
    }

    fn score(&self, theta: &[f64], z: &Vec<f64>) -> DVector<f64> {
        let mut s = DVector::zeros(5);
        for (a, b) in self.completed(z) {
            s += DVector::from_row_slice(&row_terms(theta, a, b).score);
        }
        s
    }

    fn complete_info(&self, theta: &[f64], z: &Vec<f64>) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(5, 5);
        for (a, b) in self.completed(z) {
            let t = row_terms(theta, a, b);
            for i in 0..5 {
                for j in 0..5 {
                    m[(i, j)] += t.info[i][j];
                }
            }
        }
        m
    }

    fn propose(&self, theta: &[f64], z: &Vec<f64>, rng: &mut dyn RngCore) -> Proposal<Vec<f64>> {
        let candidate = self.draw_conditional(theta, rng);
        let log_ratio = self.ln_conditional(theta, z) - self.ln_conditional(theta, &candidate);
        Proposal { candidate, log_ratio }
    }

    fn init_latent(&self, theta: &[f64], rng: &mut dyn RngCore) -> Vec<f64> {
        self.draw_conditional(theta, rng)
    }

    /// Per-row conditional moments by Gauss-Hermite quadrature over the
    /// missing coordinate; exact because the score is quadratic in it.
    fn exact_conditional_expectations(&self, theta: &[f64]) -> Option<ConditionalMoments> {
        let nat = Natural::from_theta(theta);
        let rule = gauss_hermite_5();
        let mut score = DVector::<f64>::zeros(5);
        let mut info = DMatrix::<f64>::zeros(5, 5);
        let mut cov = DMatrix::<f64>::zeros(5, 5);
        let mut slot = 0usize;
        for (i, r) in self.rows.iter().enumerate() {
            let (a, b) = match (r.x1, r.x2) {
                (Some(a), Some(b)) => {
                    let t = row_terms(theta, a, b);
                    score += DVector::from_row_slice(&t.score);
                    info += DMatrix::from_fn(5, 5, |p, q| t.info[p][q]);
                    continue;
                }
                (a, b) => (a, b),
            };
            let missing = self.slots[slot].1;
            debug_assert_eq!(self.slots[slot].0, i);
            slot += 1;
            let observed = a.or(b).unwrap_or(0.0);
            let (m, sd) = nat.conditional(missing, observed);
            let mut e_s = DVector::<f64>::zeros(5);
            let mut e_ss = DMatrix::<f64>::zeros(5, 5);
            for &(node, w) in &rule {
                let fill = m + sd * node;
                let t = if missing == 0 { row_terms(theta, fill, observed) } else { row_terms(theta, observed, fill) };
                let s = DVector::from_row_slice(&t.score);
                e_ss += &s * s.transpose() * w;
                e_s += s * w;
                info += DMatrix::from_fn(5, 5, |p, q| t.info[p][q]) * w;
            }
            cov += e_ss - &e_s * e_s.transpose();
            score += e_s;
        }
        let score_outer = &score * score.transpose() + cov;
        Some(ConditionalMoments { score, info, score_outer })
    }
}

impl ReferenceModel for BivariateNormalMissingModel {
    /// Conditional-normal imputation of first and second moments, then the
    /// complete-data MLE of mean and covariance.
    fn exact_em_step(&self, theta: &[f64]) -> Vec<f64> {
        let nat = Natural::from_theta(theta);
        let n = self.rows.len() as f64;
        let (mut e1, mut e2, mut e11, mut e22, mut e12) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for r in &self.rows {
            let (m1, m2, q11, q22, q12) = match (r.x1, r.x2) {
                (Some(a), Some(b)) => (a, b, a * a, b * b, a * b),
                (None, Some(b)) => {
                    let (m, sd) = nat.conditional(0, b);
                    (m, b, m * m + sd * sd, b * b, m * b)
                }
                (Some(a), None) => {
                    let (m, sd) = nat.conditional(1, a);
                    (a, m, a * a, m * m + sd * sd, a * m)
                }
                (None, None) => unreachable!("rejected at construction"),
            };
            e1 += m1;
            e2 += m2;
            e11 += q11;
            e22 += q22;
            e12 += q12;
        }
        let (mu1, mu2) = (e1 / n, e2 / n);
        let v1 = e11 / n - mu1 * mu1;
        let v2 = e22 / n - mu2 * mu2;
        let c12 = e12 / n - mu1 * mu2;
        let rho = c12 / (v1 * v2).sqrt();
        vec![mu1, mu2, 0.5 * v1.ln(), 0.5 * v2.ln(), rho.atanh()]
    }

    fn exact_marginal_loglik(&self, theta: &[f64]) -> f64 {
        self.rows
            .iter()
            .map(|r| match (r.x1, r.x2) {
                (Some(a), Some(b)) => row_terms(theta, a, b).loglik,
                (Some(a), None) => ln_std_normal_pdf((a - theta[0]) / theta[2].exp()) - theta[2],
                (None, Some(b)) => ln_std_normal_pdf((b - theta[1]) / theta[3].exp()) - theta[3],
                (None, None) => 0.0,
            })
            .sum()
    }

    /// Available-case moments; correlation from complete rows, clamped to ±0.9.
    fn initial_theta(&self) -> Vec<f64> {
        let moments = |vals: Vec<f64>| {
            let n = vals.len().max(1) as f64;
            let m = vals.iter().sum::<f64>() / n;
            let v = vals.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n;
            (m, v.max(1e-12))
        };
        let (m1, v1) = moments(self.rows.iter().filter_map(|r| r.x1).collect());
        let (m2, v2) = moments(self.rows.iter().filter_map(|r| r.x2).collect());
        let pairs: Vec<(f64, f64)> = self.rows.iter().filter_map(|r| Some((r.x1?, r.x2?))).collect();
        let rho = if pairs.is_empty() {
            0.0
        } else {
            let c = pairs.iter().map(|(a, b)| (a - m1) * (b - m2)).sum::<f64>() / pairs.len() as f64;
            (c / (v1 * v2).sqrt()).clamp(-0.9, 0.9)
        };
        vec![m1, m2, 0.5 * v1.ln(), 0.5 * v2.ln(), rho.atanh()]
    }
}

/// `n` pairs; each row independently loses `x1` with probability
/// `missing_fraction / 2` and otherwise loses `x2` with the same probability.
pub fn generate_bivariate(
    n: usize,
    mean: [f64; 2],
    sd: [f64; 2],
    rho: f64,
    missing_fraction: f64,
    rng: &mut dyn RngCore,
) -> Vec<BivariateRow> {
    (0..n)
        .map(|_| {
            let e1: f64 = rng.sample(StandardNormal);
            let e2: f64 = rng.sample(StandardNormal);
            let u: f64 = rng.random();
            let y1 = mean[0] + sd[0] * e1;
            let y2 = mean[1] + sd[1] * (rho * e1 + (1.0 - rho * rho).sqrt() * e2);
            if u < 0.5 * missing_fraction {
                BivariateRow { x1: None, x2: Some(y2) }
            } else if u < missing_fraction {
                BivariateRow { x1: Some(y1), x2: None }
            } else {
                BivariateRow { x1: Some(y1), x2: Some(y2) }
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fd;
    use crate::model::{validate_model, ParamVector};
    use crate::rng_stream;

    fn model() -> BivariateNormalMissingModel {
        let rows = generate_bivariate(80, [1.0, -1.5], [2.0, 0.5], 0.5, 0.3, &mut rng_stream(8, 0));
        BivariateNormalMissingModel::new(rows).unwrap()
    }

    #[test]
    fn rejects_fully_missing_row() {
        let rows = vec![BivariateRow { x1: None, x2: None }];
        assert!(BivariateNormalMissingModel::new(rows).is_err());
    }

    #[test]
    fn gauss_hermite_weights_and_moments() {
        let rule = gauss_hermite_5();
        let moment = |k: i32| rule.iter().map(|(x, w)| w * x.powi(k)).sum::<f64>();
        assert!((moment(0) - 1.0).abs() < 1e-14);
        assert!((moment(2) - 1.0).abs() < 1e-14);
        assert!((moment(4) - 3.0).abs() < 1e-13);
        assert!((moment(8) - 105.0).abs() < 1e-11);
    }

    #[test]
    fn row_loglik_matches_textbook_density() {
        let theta = [0.3, -0.2, 0.4, -0.1, 0.6];
        let (y1, y2) = (1.1, -0.7);
        let (s1, s2, rho) = (theta[2].exp(), theta[3].exp(), f64::tanh(theta[4]));
        let u = (y1 - theta[0]) / s1;
        let v = (y2 - theta[1]) / s2;
        let q = (u * u - 2.0 * rho * u * v + v * v) / (1.0 - rho * rho);
        let direct = -(2.0 * core::f64::consts::PI * s1 * s2 * (1.0 - rho * rho).sqrt()).ln() - 0.5 * q;
        assert!((row_terms(&theta, y1, y2).loglik - direct).abs() < 1e-13);
    }

    #[test]
    fn validates() {
        let m = model();
        let theta0 = ParamVector::new(m.initial_theta()).unwrap();
        let report = validate_model(&m, &theta0, 10, 1).unwrap();
        assert!(report.passed(), "{report:?}");
    }

    #[test]
    fn exact_score_is_gradient_of_marginal() {
        let m = model();
        let theta = [0.8, -1.4, 0.6, -0.6, 0.5];
        let e = m.exact_conditional_expectations(&theta).unwrap();
        let g = fd::gradient(|t| m.exact_marginal_loglik(t), &theta);
        assert!((e.score - &g).amax() < 1e-5 * g.amax().max(1.0));
    }

    #[test]
    fn em_step_increases_marginal_loglik() {
        let m = model();
        let mut theta = vec![0.0, 0.0, 0.0, 0.0, 0.0];
        let mut ll = m.exact_marginal_loglik(&theta);
        for _ in 0..50 {
            theta = m.exact_em_step(&theta);
            let next = m.exact_marginal_loglik(&theta);
            assert!(next >= ll - 1e-10);
            ll = next;
        }
    }
}
