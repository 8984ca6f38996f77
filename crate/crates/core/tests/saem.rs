use nalgebra::{DMatrix, DVector};
use rand::RngCore;
use saem_core::gain::GainKind;
use saem_core::louis::{estimate_score, louis_information};
use saem_core::model::{Interval, Model, Proposal};
use saem_core::refmodels::{direct_mle, em_fixed_point, MixtureProposal, ReferenceModel};
use saem_core::saem::{run, saem_step, ExpectationMode, SaemConfig, SaemState};
use saem_core::{GainSchedule, ParamVector, RunStatus, SaemError};
use saem_testkit::{binary_labels, enumerate, fixtures, max_rel_error};

fn unit_gain() -> GainSchedule {
    GainSchedule::new(GainKind::ConstantThenDecay, u64::MAX, 1.0, 1.0).unwrap()
}

fn pv(v: &[f64]) -> ParamVector {
    ParamVector::new(v.to_vec()).unwrap()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

#[test]
fn one_newton_step_without_missing_data() {
    let model = fixtures::normal_mean();
    for mode in [ExpectationMode::Sampled, ExpectationMode::Exact] {
        for start in [-40.0, -1.0, 0.0, 1.5, 2.25, 300.0] {
            let cfg = SaemConfig { t: 1.0, gain: unit_gain(), step_cap: 1e6, expectation: mode, ..SaemConfig::default() };
            let mut state = SaemState::new(&model, &pv(&[start]), &cfg).unwrap();
            saem_step(&model, &mut state, &cfg).unwrap();
            assert!((state.theta()[0] - 1.5).abs() < 1e-12, "start {start}");
        }
    }
}

#[test]
fn frozen_h_and_gamma_converge_to_enumeration() {
    let model = fixtures::mixture(4);
    let theta = [0.3, -1.0, 1.2];
    let exact = enumerate(&model, &theta, &binary_labels(4));
    let cfg = SaemConfig {
        t: 1.0,
        gain: GainSchedule::polynomial(1.0, 1.0).unwrap(),
        freeze_theta: true,
        seed: 31,
        ..SaemConfig::default()
    };
    let mut state = SaemState::new(&model, &pv(&theta), &cfg).unwrap();
    for _ in 0..100_000 {
        saem_step(&model, &mut state, &cfg).unwrap();
    }
    assert_eq!(state.theta(), &theta);
    let err_gamma = max_rel_error(&state.gamma_t(1.0), &exact.observed_information());
    assert!(err_gamma < 0.02, "Gamma(1) error {err_gamma}");
    for j in 0..3 {
        let sd = (exact.score_outer[(j, j)] - exact.score[j].powi(2)).sqrt();
        assert!((state.h()[j] - exact.score[j]).abs() < 4.0 * sd / 100_000f64.sqrt(), "h coordinate {j}");
    }
    let louis = louis_information(&model, &theta, 100_000, 1_000, 32).unwrap();
    assert!(max_rel_error(&state.gamma_t(1.0), &louis.obs_info) < 0.03);
}

#[test]
fn censored_endpoint_matches_direct_mle() {
    for offset in 0..3 {
        let model = fixtures::censored_normal_with(fixtures::CENSORED_SEED + offset);
        let mle = direct_mle(&model, &model.initial_theta()).unwrap();
        let cfg = SaemConfig { seed: 100 + offset, ..SaemConfig::default() };
        let report = run(&model, &pv(&model.initial_theta()), &cfg).unwrap();
        for (j, (got, want)) in report.theta.iter().zip(&mle).enumerate() {
            assert!(rel(*got, *want) < 0.02, "dataset {offset}, coordinate {j}");
        }
        let stationarity = report.stationarity.unwrap();
        assert!(stationarity.passed, "{stationarity:?}");
    }
}

#[test]
fn bivariate_endpoint_matches_em_fixed_point() {
    for offset in 0..2 {
        let model = fixtures::bivariate_with(fixtures::BIVARIATE_SEED + offset);
        let (em, _) = em_fixed_point(&model, &model.initial_theta(), 1e-10, 100_000);
        let cfg = SaemConfig { seed: 200 + offset, ..SaemConfig::default() };
        let report = run(&model, &pv(&model.initial_theta()), &cfg).unwrap();
        for (j, (got, want)) in report.theta.iter().zip(&em).enumerate() {
            assert!(rel(*got, *want) < 0.01, "dataset {offset}, coordinate {j}: {got} vs {want}");
        }
        assert!(report.stationarity.unwrap().passed);
    }
}

#[test]
fn mixture_run_is_stationary() {
    let model = fixtures::mixture(200);
    let cfg = SaemConfig { seed: 41, ..SaemConfig::default() };
    let report = run(&model, &pv(&model.initial_theta()), &cfg).unwrap();
    assert!(report.stationarity.unwrap().passed);
    let mle = direct_mle(&model, &model.initial_theta()).unwrap();
    let se = report.standard_errors.unwrap();
    for j in 0..3 {
        assert!((report.theta[j] - mle[j]).abs() < 0.2 * se[j], "coordinate {j}");
    }
}

#[test]
fn exact_mode_at_t_one_reaches_the_mle() {
    let model = fixtures::censored_normal();
    let mle = direct_mle(&model, &model.initial_theta()).unwrap();
    let cfg = SaemConfig { t: 1.0, gain: unit_gain(), expectation: ExpectationMode::Exact, ..SaemConfig::default() };
    let mut state = SaemState::new(&model, &pv(&model.initial_theta()), &cfg).unwrap();
    for _ in 0..50 {
        saem_step(&model, &mut state, &cfg).unwrap();
    }
    for (got, want) in state.theta().iter().zip(&mle) {
        assert!((got - want).abs() < 1e-6);
    }
}

#[test]
fn perturbed_endpoint_fails_stationarity() {
    let model = fixtures::censored_normal();
    let mut theta = direct_mle(&model, &model.initial_theta()).unwrap();
    theta[0] += 0.5;
    let check = saem_core::diagnostics::stationarity_residual(&model, &theta, 1_000, 5).unwrap();
    assert!(!check.passed);
    assert!(check.residual > 5.0 * check.threshold);
}

#[test]
fn polyak_average_is_within_one_mc_error_of_endpoint() {
    let model = fixtures::censored_normal();
    let cfg = SaemConfig { seed: 65, ..SaemConfig::default() };
    let report = run(&model, &pv(&model.initial_theta()), &cfg).unwrap();
    let polyak = report.polyak_average.clone().unwrap();
    // The endpoint averages roughly one draw per post-burn-in iteration; its
    // MC error is the score MC error at that sample size, carried to θ units
    // by the inverse information.
    let draws = 10_000;
    let score = estimate_score(&model, &report.theta, draws, 1_000, 8).unwrap();
    let averaged = (report.iterations - cfg.gain.burn_in()) as f64;
    let inv = report.information.unwrap().obs_info.try_inverse().unwrap();
    let theta_se = inv.abs() * score.mc_se * (draws as f64 / averaged).sqrt();
    for j in 0..2 {
        assert!((polyak[j] - report.theta[j]).abs() <= theta_se[j], "coordinate {j}: {} {} {}", polyak[j], report.theta[j], theta_se[j]);
    }
}

#[test]
fn runs_are_reproducible_and_traces_consistent() {
    let model = fixtures::censored_normal();
    let cfg = SaemConfig { max_iter: 300, seed: 9, ..SaemConfig::default() };
    let a = run(&model, &pv(&model.initial_theta()), &cfg).unwrap();
    let b = run(&model, &pv(&model.initial_theta()), &cfg).unwrap();
    assert_eq!(a.trace, b.trace);
    assert_eq!(a.theta, b.theta);
    let c = run(&model, &pv(&model.initial_theta()), &SaemConfig { seed: 10, ..cfg.clone() }).unwrap();
    assert_ne!(a.trace, c.trace);
    assert_eq!(a.trace.len() as u64, a.iterations);
    for (k, rec) in a.trace.iter().enumerate() {
        assert_eq!(rec.iter, k as u64 + 1);
        assert_eq!(rec.gamma, cfg.gain.gamma(rec.iter));
        assert!(model.contains(&rec.theta));
    }
}

#[test]
fn stopping_rule_can_fire_before_max_iter() {
    let model = fixtures::normal_mean();
    let cfg = SaemConfig { max_iter: 5_000, ..SaemConfig::default() };
    let report = run(&model, &pv(&[0.0]), &cfg).unwrap();
    assert_eq!(report.status, RunStatus::Converged);
    assert!(report.iterations < 5_000);
    assert!((report.theta[0] - 1.5).abs() < 1e-6);
    assert!((report.standard_errors.unwrap()[0] - 10f64.sqrt().recip()).abs() < 1e-12);
}

#[test]
fn mixture_single_flip_kernel_also_runs() {
    let model = fixtures::mixture(50).with_proposal(MixtureProposal::SingleFlip);
    let cfg = SaemConfig { max_iter: 500, seed: 3, ..SaemConfig::default() };
    let report = run(&model, &pv(&model.initial_theta()), &cfg).unwrap();
    assert!(report.acceptance_rate > 0.1);
    assert!(!report.chain_stuck);
}

/// `l_c = −(θ − 5)²/2` on `θ ∈ (0, 1)`; every Newton step overshoots.
struct Bounded;

impl Model for Bounded {
    type Latent = ();
    fn dim(&self) -> usize {
        1
    }
    fn size_hint(&self) -> usize {
        1
    }
    fn bounds(&self) -> Vec<Interval> {
        vec![Interval::new(0.0, 1.0)]
    }
    fn complete_loglik(&self, theta: &[f64], _z: &()) -> f64 {
        -(theta[0] - 5.0).powi(2) / 2.0
    }
    fn score(&self, theta: &[f64], _z: &()) -> DVector<f64> {
        DVector::from_element(1, 5.0 - theta[0])
    }
    fn complete_info(&self, _theta: &[f64], _z: &()) -> DMatrix<f64> {
        DMatrix::from_element(1, 1, 1.0)
    }
    fn propose(&self, _theta: &[f64], _z: &(), _rng: &mut dyn RngCore) -> Proposal<()> {
        Proposal { candidate: (), log_ratio: 0.0 }
    }
    fn init_latent(&self, _theta: &[f64], _rng: &mut dyn RngCore) {}
}

/// Zero score and zero information: `Γ` is identically zero.
struct Flat;

impl Model for Flat {
    type Latent = ();
    fn dim(&self) -> usize {
        1
    }
    fn size_hint(&self) -> usize {
        1
    }
    fn complete_loglik(&self, _theta: &[f64], _z: &()) -> f64 {
        0.0
    }
    fn score(&self, _theta: &[f64], _z: &()) -> DVector<f64> {
        DVector::zeros(1)
    }
    fn complete_info(&self, _theta: &[f64], _z: &()) -> DMatrix<f64> {
        DMatrix::zeros(1, 1)
    }
    fn propose(&self, _theta: &[f64], _z: &(), _rng: &mut dyn RngCore) -> Proposal<()> {
        Proposal { candidate: (), log_ratio: 0.0 }
    }
    fn init_latent(&self, _theta: &[f64], _rng: &mut dyn RngCore) {}
}

#[test]
fn steps_are_backtracked_into_bounds() {
    let cfg = SaemConfig { t: 1.0, gain: unit_gain(), step_cap: 10.0, ..SaemConfig::default() };
    let mut state = SaemState::new(&Bounded, &pv(&[0.5]), &cfg).unwrap();
    for _ in 0..10 {
        saem_step(&Bounded, &mut state, &cfg).unwrap();
        assert!(Bounded.contains(state.theta()));
    }
    assert!(state.theta()[0] > 0.99);
    // Pinned against the bound, the halvings eventually run out.
    let err = (0..100).find_map(|_| saem_step(&Bounded, &mut state, &cfg).err());
    assert!(matches!(err, Some(SaemError::StepOutOfBounds { .. })));
}

#[test]
fn singular_gamma_and_divergence_are_errors() {
    let cfg = SaemConfig { max_iter: 10, ridge: 0.0, ..SaemConfig::default() };
    assert!(matches!(run(&Flat, &pv(&[0.0]), &cfg), Err(SaemError::SingularGamma { iter: 1, .. })));
    let model = fixtures::normal_mean();
    let cfg = SaemConfig { theta_ceiling: 0.5, gain: unit_gain(), t: 1.0, ..SaemConfig::default() };
    assert!(matches!(run(&model, &pv(&[0.0]), &cfg), Err(SaemError::DivergedParameter { iter: 1, .. })));
}

#[test]
fn out_of_bounds_start_is_rejected() {
    let cfg = SaemConfig::default();
    assert!(run(&Bounded, &pv(&[2.0]), &cfg).is_err());
    assert!(run(&fixtures::normal_mean(), &pv(&[0.0, 1.0]), &cfg).is_err());
}
