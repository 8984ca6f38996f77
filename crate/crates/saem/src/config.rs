//! Experiment configuration: `key = value` lines, dotted keys, `#` comments.
//!
//! Every key has a default except `model`. Unknown or repeated keys are
//! errors, and so is a value that does not parse for its key.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use saem_core::gain::{GainKind, GainSchedule};
use saem_core::saem::{BlockSchedule, ExpectationMode, StopRule};
use saem_core::SaemConfig;

use crate::error::CliError;

/// Name, default and meaning of every configuration key, in `--help` order.
pub const KEYS: &[(&str, &str, &str)] = &[
    ("model", "(required)", "censored_normal | mixture | bivariate_normal | normal_mean"),
    ("model.proposal", "conditional", "censored_normal: conditional | random_walk; mixture: conditional | single_flip"),
    ("model.rw_scale", "0.5", "random-walk proposal scale, censored_normal only"),
    ("data.path", "(none)", "CSV data file, relative to the config file; replaces the generator"),
    ("data.n", "100", "generator: number of observations (rows)"),
    ("data.seed", "1", "generator: seed of the synthetic dataset"),
    ("data.mean", "10", "generator: mean (censored_normal, normal_mean)"),
    ("data.sd", "2", "generator: standard deviation (censored_normal)"),
    ("data.censor_fraction", "0.3", "generator: fraction right-censored (censored_normal)"),
    ("data.pi", "0.4", "generator: weight of component one (mixture)"),
    ("data.mu1", "-1", "generator: mean of component one (mixture)"),
    ("data.mu2", "1.5", "generator: mean of component two (mixture)"),
    ("data.mean1", "1", "generator: first mean (bivariate_normal)"),
    ("data.mean2", "-1.5", "generator: second mean (bivariate_normal)"),
    ("data.sd1", "2", "generator: first standard deviation (bivariate_normal)"),
    ("data.sd2", "0.5", "generator: second standard deviation (bivariate_normal)"),
    ("data.rho", "0.5", "generator: correlation (bivariate_normal)"),
    ("data.missing_fraction", "0.3", "generator: fraction of rows with one coordinate missing (bivariate_normal)"),
    ("theta0", "auto", "starting point: `auto` (moment estimates) or comma-separated values"),
    ("seed", "1", "master seed; replication r uses seed + r (overridden by SAEM_SEED)"),
    ("replications", "1", "number of independent runs"),
    ("output.dir", "saem-out", "output directory, relative to the config file"),
    ("saem.t", "0", "Gamma(t) mixing parameter used in the iteration, in [0, 1]"),
    ("saem.max_iter", "2000", "iteration limit"),
    ("saem.block", "1", "block length N (intercept of the linear schedule)"),
    ("saem.block_slope", "0", "block length grows as round(block + block_slope * i)"),
    ("saem.step_cap", "1", "largest Euclidean norm of one theta step"),
    ("saem.ridge", "1e-6", "initial ridge for regularizing Gamma"),
    ("saem.window", "100", "stopping-rule window W"),
    ("saem.tolerance", "1e-5", "stopping-rule relative tolerance"),
    ("saem.theta_ceiling", "1e8", "abort when the norm of theta exceeds this"),
    ("saem.latent_burn", "100", "discarded MH steps before the first iteration"),
    ("saem.expectation", "sampled", "sampled (MH blocks) | exact (model's exact moments)"),
    ("gain.kind", "constant_then_decay", "constant_then_decay | polynomial"),
    ("gain.K", "200", "iterations with gain 1 (constant_then_decay)"),
    ("gain.alpha", "1", "decay exponent, in (0.5, 1]"),
    ("gain.scale", "1", "multiplier c of the polynomial gain"),
    ("louis.draws", "10000", "draws of the final standard-error chain"),
    ("louis.burn", "1000", "burn-in of the final standard-error chain"),
    ("stationarity.draws", "1000", "draws of the endpoint stationarity check"),
    ("validate.points", "10", "perturbed points checked by `saem validate`"),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    CensoredNormal,
    Mixture,
    BivariateNormal,
    NormalMean,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::CensoredNormal => "censored_normal",
            ModelKind::Mixture => "mixture",
            ModelKind::BivariateNormal => "bivariate_normal",
            ModelKind::NormalMean => "normal_mean",
        }
    }

    pub fn parameter_names(self) -> &'static [&'static str] {
        match self {
            ModelKind::CensoredNormal => &["mu", "log_sigma"],
            ModelKind::Mixture => &["logit_pi", "mu1", "mu2"],
            ModelKind::BivariateNormal => &["mu1", "mu2", "log_sigma1", "log_sigma2", "atanh_rho"],
            ModelKind::NormalMean => &["mu"],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProposalKind {
    Conditional,
    RandomWalk,
    SingleFlip,
}

/// Parameters of the synthetic dataset when no data file is given.
#[derive(Debug, Clone, PartialEq)]
pub struct Generator {
    pub n: usize,
    pub seed: u64,
    pub mean: f64,
    pub sd: f64,
    pub censor_fraction: f64,
    pub pi: f64,
    pub mu1: f64,
    pub mu2: f64,
    pub mean2: [f64; 2],
    pub sd2: [f64; 2],
    pub rho: f64,
    pub missing_fraction: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    File(PathBuf),
    Generated(Generator),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub model: ModelKind,
    pub proposal: ProposalKind,
    pub rw_scale: f64,
    pub data: DataSource,
    /// `None` means moment-based starting values.
    pub theta0: Option<Vec<f64>>,
    pub seed: u64,
    pub replications: usize,
    pub output_dir: PathBuf,
    pub saem: SaemConfig,
    pub validate_points: usize,
}

struct Entries {
    values: BTreeMap<String, (usize, String)>,
}

impl Entries {
    fn take(&mut self, key: &str) -> Option<String> {
        self.values.remove(key).map(|(_, v)| v)
    }

    fn parse<T: std::str::FromStr>(&mut self, key: &str, default: T) -> Result<T, CliError> {
        match self.take(key) {
            None => Ok(default),
            Some(raw) => raw.parse().map_err(|_| CliError::key(key, format!("cannot parse `{raw}`"))),
        }
    }

    fn float(&mut self, key: &str, default: f64) -> Result<f64, CliError> {
        let v: f64 = self.parse(key, default)?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(CliError::key(key, "must be finite"))
        }
    }
}

fn split_lines(text: &str, path: &Path) -> Result<Entries, CliError> {
    let mut values = BTreeMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| CliError::ConfigParse {
            path: path.to_path_buf(),
            line: line_no,
            message: format!("expected `key = value`, found `{line}`"),
        })?;
        let key = key.trim().to_string();
        let value = value.trim().to_string();
        if key.is_empty() {
            return Err(CliError::ConfigParse { path: path.to_path_buf(), line: line_no, message: "empty key".into() });
        }
        if let Some((first, _)) = values.insert(key.clone(), (line_no, value)) {
            return Err(CliError::key(&key, format!("repeated on lines {first} and {line_no}")));
        }
    }
    Ok(Entries { values })
}

impl ExperimentConfig {
    pub fn load(path: &Path, seed_override: Option<u64>) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new(".")).to_path_buf();
        Self::parse(&text, path, &base, seed_override)
    }

    /// Parses `text`; relative paths are resolved against `base`.
    pub fn parse(text: &str, path: &Path, base: &Path, seed_override: Option<u64>) -> Result<Self, CliError> {
        let mut e = split_lines(text, path)?;
        if let Some(key) = e.values.keys().find(|k| !KEYS.iter().any(|(name, _, _)| name == k)) {
            return Err(CliError::key(key, "unknown key"));
        }

        let model = match e.take("model").as_deref() {
            None => return Err(CliError::key("model", "missing")),
            Some("censored_normal") => ModelKind::CensoredNormal,
            Some("mixture") => ModelKind::Mixture,
            Some("bivariate_normal") => ModelKind::BivariateNormal,
            Some("normal_mean") => ModelKind::NormalMean,
            Some(other) => return Err(CliError::key("model", format!("unknown model `{other}`"))),
        };
        let proposal = match (e.take("model.proposal").as_deref(), model) {
            (None | Some("conditional"), _) => ProposalKind::Conditional,
            (Some("random_walk"), ModelKind::CensoredNormal) => ProposalKind::RandomWalk,
            (Some("single_flip"), ModelKind::Mixture) => ProposalKind::SingleFlip,
            (Some(other), m) => {
                return Err(CliError::key("model.proposal", format!("`{other}` is not available for {}", m.name())))
            }
        };
        let rw_scale = e.float("model.rw_scale", 0.5)?;
        if rw_scale <= 0.0 {
            return Err(CliError::key("model.rw_scale", "must be positive"));
        }

        let generator = Generator {
            n: e.parse("data.n", 100)?,
            seed: e.parse("data.seed", 1)?,
            mean: e.float("data.mean", 10.0)?,
            sd: e.float("data.sd", 2.0)?,
            censor_fraction: e.float("data.censor_fraction", 0.3)?,
            pi: e.float("data.pi", 0.4)?,
            mu1: e.float("data.mu1", -1.0)?,
            mu2: e.float("data.mu2", 1.5)?,
            mean2: [e.float("data.mean1", 1.0)?, e.float("data.mean2", -1.5)?],
            sd2: [e.float("data.sd1", 2.0)?, e.float("data.sd2", 0.5)?],
            rho: e.float("data.rho", 0.5)?,
            missing_fraction: e.float("data.missing_fraction", 0.3)?,
        };
        if generator.n == 0 {
            return Err(CliError::key("data.n", "must be at least 1"));
        }
        if generator.sd <= 0.0 || generator.sd2.iter().any(|s| *s <= 0.0) {
            return Err(CliError::key("data.sd", "standard deviations must be positive"));
        }
        if !(0.0..1.0).contains(&generator.censor_fraction) {
            return Err(CliError::key("data.censor_fraction", "must lie in [0, 1)"));
        }
        if !(generator.pi > 0.0 && generator.pi < 1.0) {
            return Err(CliError::key("data.pi", "must lie in (0, 1)"));
        }
        if !(generator.rho > -1.0 && generator.rho < 1.0) {
            return Err(CliError::key("data.rho", "must lie in (-1, 1)"));
        }
        if !(0.0..1.0).contains(&generator.missing_fraction) {
            return Err(CliError::key("data.missing_fraction", "must lie in [0, 1)"));
        }
        let data = match e.take("data.path") {
            Some(p) => DataSource::File(base.join(p)),
            None => DataSource::Generated(generator),
        };

        let theta0 = match e.take("theta0").as_deref() {
            None | Some("auto") => None,
            Some(list) => {
                let values: Result<Vec<f64>, _> = list.split(',').map(|v| v.trim().parse::<f64>()).collect();
                let values = values.map_err(|_| CliError::key("theta0", format!("cannot parse `{list}`")))?;
                let p = model.parameter_names().len();
                if values.len() != p {
                    return Err(CliError::key("theta0", format!("expected {p} values, found {}", values.len())));
                }
                Some(values)
            }
        };

        let seed = e.parse("seed", 1u64)?;
        let seed = seed_override.unwrap_or(seed);
        let replications = e.parse("replications", 1usize)?;
        if replications == 0 {
            return Err(CliError::key("replications", "must be at least 1"));
        }
        let output_dir = base.join(e.take("output.dir").unwrap_or_else(|| "saem-out".into()));

        let gain = {
            let kind = match e.take("gain.kind").as_deref() {
                None | Some("constant_then_decay") => GainKind::ConstantThenDecay,
                Some("polynomial") => GainKind::Polynomial,
                Some(other) => return Err(CliError::key("gain.kind", format!("unknown gain `{other}`"))),
            };
            let k = e.parse("gain.K", 200u64)?;
            let alpha = e.float("gain.alpha", 1.0)?;
            let scale = e.float("gain.scale", 1.0)?;
            GainSchedule::new(kind, k, alpha, scale).map_err(|err| CliError::key("gain.alpha", err.to_string()))?
        };

        let block = e.parse("saem.block", 1usize)?;
        let slope = e.float("saem.block_slope", 0.0)?;
        let block = if slope == 0.0 {
            BlockSchedule::Constant(block)
        } else {
            BlockSchedule::Linear { intercept: block as f64, slope }
        };
        let expectation = match e.take("saem.expectation").as_deref() {
            None | Some("sampled") => ExpectationMode::Sampled,
            Some("exact") => ExpectationMode::Exact,
            Some(other) => return Err(CliError::key("saem.expectation", format!("unknown mode `{other}`"))),
        };

        let saem = SaemConfig {
            t: e.float("saem.t", 0.0)?,
            max_iter: e.parse("saem.max_iter", 2000)?,
            block,
            gain,
            step_cap: e.float("saem.step_cap", 1.0)?,
            ridge: e.float("saem.ridge", 1e-6)?,
            stop: StopRule { window: e.parse("saem.window", 100)?, tolerance: e.float("saem.tolerance", 1e-5)? },
            seed,
            theta_ceiling: e.float("saem.theta_ceiling", 1e8)?,
            latent_burn: e.parse("saem.latent_burn", 100)?,
            final_draws: e.parse("louis.draws", 10_000)?,
            final_burn: e.parse("louis.burn", 1_000)?,
            stationarity_draws: e.parse("stationarity.draws", 1_000)?,
            expectation,
            freeze_theta: false,
        };
        saem.validate().map_err(|err| CliError::key("saem", err.to_string()))?;
        let validate_points = e.parse("validate.points", 10usize)?;
        if validate_points == 0 {
            return Err(CliError::key("validate.points", "must be at least 1"));
        }
        debug_assert!(e.values.is_empty());

        Ok(Self { model, proposal, rw_scale, data, theta0, seed, replications, output_dir, saem, validate_points })
    }
}

/// `--help` text listing every key.
pub fn keys_help() -> String {
    let width = KEYS.iter().map(|(k, _, _)| k.len()).max().unwrap_or(0);
    let mut out = String::from("Configuration keys (`key = value`, `#` starts a comment):\n");
    for (key, default, doc) in KEYS {
        out.push_str(&format!("  {key:<width$}  {doc} [default: {default}]\n"));
    }
    out.push_str("\nEnvironment:\n  SAEM_SEED  overrides `seed`\n");
    out
}
