//! Seeded reference datasets shared by the test suites.

use saem_core::refmodels::{
    generate_bivariate, generate_censored_normal, generate_mixture, BivariateNormalMissingModel, CensoredNormalModel,
    MixtureModel, NormalMeanModel,
};
use saem_core::rng_stream;

/// Seed of the censored-normal dataset.
pub const CENSORED_SEED: u64 = 20_240_501;
/// Seed of the bivariate dataset.
pub const BIVARIATE_SEED: u64 = 20_240_502;
/// Seed of the small mixture datasets.
pub const MIXTURE_SEED: u64 = 20_240_503;

/// `n = 100` draws from `N(10, 2²)`, the top 30% right-censored.
pub fn censored_normal() -> CensoredNormalModel {
    censored_normal_with(CENSORED_SEED)
}

pub fn censored_normal_with(seed: u64) -> CensoredNormalModel {
    let mut rng = rng_stream(seed, 0);
    CensoredNormalModel::new(generate_censored_normal(100, 10.0, 2.0, 0.3, &mut rng))
}

/// `n = 200` pairs, `μ = (1, −1.5)`, `σ = (2, 0.5)`, `ρ = 0.5`, 30% of rows
/// with one coordinate missing.
pub fn bivariate() -> BivariateNormalMissingModel {
    bivariate_with(BIVARIATE_SEED)
}

pub fn bivariate_with(seed: u64) -> BivariateNormalMissingModel {
    let mut rng = rng_stream(seed, 0);
    BivariateNormalMissingModel::new(generate_bivariate(200, [1.0, -1.5], [2.0, 0.5], 0.5, 0.3, &mut rng))
        .expect("generator never drops both coordinates")
}

/// `n` draws from `0.4 N(−1, 1) + 0.6 N(1.5, 1)`.
pub fn mixture(n: usize) -> MixtureModel {
    let mut rng = rng_stream(MIXTURE_SEED, 0);
    MixtureModel::new(generate_mixture(n, 0.4, -1.0, 1.5, &mut rng))
}

/// `N(μ, 1)` with `n = 10` and sample mean `1.5`.
pub fn normal_mean() -> NormalMeanModel {
    NormalMeanModel::new(vec![0.5, 2.5, 1.0, 2.0, 1.5, 1.5, 0.0, 3.0, 1.25, 1.75])
}
