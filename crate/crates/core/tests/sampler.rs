use nalgebra::DVector;
use saem_core::model::Model;
use saem_core::refmodels::MixtureProposal;
use saem_core::rng_stream;
use saem_core::sampler::{mh_step, run_block, ChainState};
use saem_testkit::{binary_labels, enumerate, fixtures, mh_transition_matrix, single_flip_proposals, GaussianLatent, TwoPoint};

#[test]
fn single_flip_kernel_satisfies_detailed_balance() {
    let model = fixtures::mixture(4).with_proposal(MixtureProposal::SingleFlip);
    let states = binary_labels(4);
    for theta in [[0.3, -1.0, 1.5], [-1.2, 0.4, 0.2], [2.0, -3.0, 3.0]] {
        let pi = enumerate(&model, &theta, &states).probs;
        let p = mh_transition_matrix(&model, &theta, &states, |i| single_flip_proposals(&states, i));
        for i in 0..states.len() {
            assert!((p.row(i).sum() - 1.0).abs() < 1e-12);
            for j in 0..states.len() {
                assert!((pi[i] * p[(i, j)] - pi[j] * p[(j, i)]).abs() < 1e-12);
            }
        }
        let pi = DVector::from_vec(pi);
        let moved = p.transpose() * &pi;
        assert!((moved - pi).amax() < 1e-12);
    }
}

#[test]
fn single_flip_proposal_is_symmetric_and_local() {
    let model = fixtures::mixture(4).with_proposal(MixtureProposal::SingleFlip);
    let mut rng = rng_stream(5, 0);
    let z = vec![0u8, 1, 1, 0];
    for _ in 0..100 {
        let prop = model.propose(&[0.0, -1.0, 1.0], &z, &mut rng);
        assert_eq!(prop.log_ratio, 0.0);
        assert_eq!(prop.candidate.iter().zip(&z).filter(|(a, b)| a != b).count(), 1);
    }
}

#[test]
fn two_point_occupancy() {
    let theta = [3f64.ln()];
    let mut chain = ChainState::new(&TwoPoint, &theta, rng_stream(11, 0)).unwrap();
    let mut ones = 0u32;
    let steps = 100_000;
    for _ in 0..steps {
        mh_step(&TwoPoint, &theta, &mut chain).unwrap();
        ones += u32::from(*chain.current());
    }
    let occupancy = f64::from(ones) / f64::from(steps);
    assert!((occupancy - 0.75).abs() < 0.01, "occupancy {occupancy}");
}

#[test]
fn gaussian_latent_moments() {
    let model = GaussianLatent { step: 2.4 };
    let theta = [0.0];
    let mut chain = ChainState::new(&model, &theta, rng_stream(12, 0)).unwrap();
    let n = 100_000;
    let (mut s, mut s2) = (0.0, 0.0);
    for _ in 0..n {
        mh_step(&model, &theta, &mut chain).unwrap();
        let z = *chain.current();
        s += z;
        s2 += z * z;
    }
    let mean = s / n as f64;
    let var = s2 / n as f64 - mean * mean;
    assert!(mean.abs() < 0.02, "mean {mean}");
    assert!((var - 1.0).abs() < 0.05, "variance {var}");
}

#[test]
fn block_mean_matches_enumeration() {
    let theta = [3f64.ln()];
    let exact = enumerate(&TwoPoint, &theta, &TwoPoint::states());
    let mut chain = ChainState::new(&TwoPoint, &theta, rng_stream(13, 0)).unwrap();
    let n = 10_000;
    let stats = run_block(&TwoPoint, &theta, &mut chain, n).unwrap();
    // Var S = 0.1875; the flip chain is anticorrelated, so the iid bound is conservative.
    let sigma = (exact.score_outer[(0, 0)] - exact.score[0].powi(2)).sqrt();
    assert!((stats.mean_score[0] - exact.score[0]).abs() < 3.0 * sigma / (n as f64).sqrt());
}

#[test]
fn mixture_block_matches_enumeration() {
    let model = fixtures::mixture(6).with_proposal(MixtureProposal::SingleFlip);
    let theta = [0.2, -0.8, 1.2];
    let exact = enumerate(&model, &theta, &binary_labels(6));
    let mut chain = ChainState::new(&model, &theta, rng_stream(14, 0)).unwrap();
    run_block(&model, &theta, &mut chain, 1_000).unwrap();
    let stats = run_block(&model, &theta, &mut chain, 200_000).unwrap();
    for j in 0..3 {
        let sd = (exact.score_outer[(j, j)] - exact.score[j].powi(2)).sqrt();
        assert!((stats.mean_score[j] - exact.score[j]).abs() < 0.05 * sd.max(1.0), "coordinate {j}");
    }
    let outer = &stats.mean_score_outer;
    assert!((outer - outer.transpose()).amax() == 0.0);
    assert!(outer.clone().symmetric_eigen().eigenvalues.min() > -1e-12);
}

#[test]
fn warm_start_carries_state_and_is_reproducible() {
    let model = fixtures::mixture(6).with_proposal(MixtureProposal::SingleFlip);
    let thetas = [[0.0, -1.0, 1.0], [0.1, -0.9, 1.1], [0.2, -0.8, 1.2]];
    let trajectory = |seed| {
        let mut chain = ChainState::new(&model, &thetas[0], rng_stream(seed, 0)).unwrap();
        let mut seen = Vec::new();
        for theta in &thetas {
            let stats = run_block(&model, theta, &mut chain, 50).unwrap();
            seen.push((chain.current().clone(), stats.mean_score.clone(), chain.current_loglik()));
            assert_eq!(chain.current_loglik(), model.complete_loglik(theta, chain.current()));
        }
        seen
    };
    assert_eq!(trajectory(3), trajectory(3));
    assert_ne!(trajectory(3), trajectory(4));
}
