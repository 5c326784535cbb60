//! Experiment configuration: a JSON file, command-line overrides, and the
//! validated form every command runs from.

use std::path::{Path, PathBuf};

use clap::{Parser, ValueEnum};
use qrisk_core::distributions::{InputDist, NoiseModel, ProblemSpec};
use qrisk_core::estimators::{ErrorFn, Init, MinMaxConfig};
use qrisk_core::truncation::TrimLevel;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Fit,
    Risk,
    Minimax,
    Eigen,
    VarEst,
    Bounds,
    Suite,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Fit => "fit",
            Command::Risk => "risk",
            Command::Minimax => "minimax",
            Command::Eigen => "eigen",
            Command::VarEst => "var-est",
            Command::Bounds => "bounds",
            Command::Suite => "suite",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum EstimatorChoice {
    Ols,
    Minmax,
    /// Both estimators on the same datasets.
    Both,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany {
    One(usize),
    Many(Vec<usize>),
}

impl OneOrMany {
    fn into_vec(self) -> Vec<usize> {
        match self {
            OneOrMany::One(n) => vec![n],
            OneOrMany::Many(v) => v,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpecFile {
    pub input: Option<String>,
    pub d: Option<usize>,
    pub w_star: Option<Vec<f64>>,
    pub noise: Option<String>,
    pub sigma2: Option<f64>,
    /// Exponent of the p-th power error; square error when absent.
    pub p: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MinMaxFile {
    pub k: Option<usize>,
    pub outer_steps: Option<usize>,
    pub inner_steps: Option<usize>,
    pub step_size: Option<f64>,
    pub tolerance: Option<f64>,
    /// `ols` or `zero`.
    pub init: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EigenFile {
    pub trim_k: Option<usize>,
    pub multistarts: Option<usize>,
}

/// The configuration file as written by the user. Every field is optional.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub command: Option<Command>,
    pub spec: Option<SpecFile>,
    pub n: Option<OneOrMany>,
    pub delta: Option<f64>,
    pub reps: Option<usize>,
    pub seed: Option<u64>,
    pub estimator: Option<EstimatorChoice>,
    pub minmax: Option<MinMaxFile>,
    pub eigen: Option<EigenFile>,
    pub out: Option<PathBuf>,
    pub workers: Option<usize>,
    pub quick: Option<bool>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| CliError::config(e.path().to_string(), e.into_inner().to_string()))
    }

    pub fn from_path(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::config("config", format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }
}

#[derive(Debug, Clone, Parser)]
#[command(name = "qrisk", version, about = "Quantile-risk experiments for linear regression")]
pub struct Flags {
    /// Pipeline to run; may instead come from the config file.
    #[arg(value_enum)]
    pub command: Option<Command>,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub reps: Option<usize>,
    #[arg(long)]
    pub delta: Option<f64>,
    /// One sample size or a comma-separated list.
    #[arg(long, value_delimiter = ',')]
    pub n: Option<Vec<usize>>,
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long)]
    pub sigma2: Option<f64>,
    /// Use the p-th power error instead of the square error.
    #[arg(long)]
    pub p: Option<f64>,
    #[arg(long, value_enum)]
    pub estimator: Option<EstimatorChoice>,
    /// gaussian, student-t:NU or two-point:PROB.
    #[arg(long)]
    pub noise: Option<String>,
    /// gaussian, constant, bernoulli:RHO, axis-uniform or kurtosis:KAPPA.
    #[arg(long)]
    pub input: Option<String>,
    /// Trim level of the min-max procedure.
    #[arg(long)]
    pub k: Option<usize>,
    /// Trim level of the trimmed eigenvalue infimum.
    #[arg(long)]
    pub trim_k: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub workers: Option<usize>,
    #[arg(long)]
    pub quick: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum InputChoice {
    Gaussian,
    Constant,
    Bernoulli(f64),
    AxisUniform,
    Kurtosis(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum NoiseChoice {
    Gaussian,
    StudentT(f64),
    TwoPoint(f64),
}

/// Settings of the min-max procedure; `k` is chosen from `delta` and `n`
/// when absent.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MinMaxSettings {
    pub k: Option<usize>,
    pub outer_steps: usize,
    pub inner_steps: usize,
    pub step_size: f64,
    pub tolerance: f64,
    pub init_zero: bool,
}

/// A validated configuration. It serializes deterministically and its hash
/// identifies the run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResolvedConfig {
    pub command: Command,
    pub n: Vec<usize>,
    pub d: usize,
    pub delta: f64,
    pub reps: usize,
    pub seed: u64,
    pub sigma2: f64,
    pub p: Option<f64>,
    pub input: InputChoice,
    pub noise: NoiseChoice,
    pub w_star: Vec<f64>,
    pub estimator: EstimatorChoice,
    pub minmax: MinMaxSettings,
    pub trim_k: Option<usize>,
    pub multistarts: usize,
    pub quick: bool,
    #[serde(skip)]
    pub out: PathBuf,
    #[serde(skip)]
    pub workers: Option<usize>,
}

fn parse_input(s: &str) -> Result<InputChoice, CliError> {
    let bad = || CliError::config("spec.input", format!("unrecognized input law `{s}`"));
    let num = |v: &str| v.parse::<f64>().map_err(|_| bad());
    match s.split_once(':') {
        None => match s {
            "gaussian" => Ok(InputChoice::Gaussian),
            "constant" => Ok(InputChoice::Constant),
            "axis-uniform" => Ok(InputChoice::AxisUniform),
            _ => Err(bad()),
        },
        Some(("bernoulli", v)) => Ok(InputChoice::Bernoulli(num(v)?)),
        Some(("kurtosis", v)) => Ok(InputChoice::Kurtosis(num(v)?)),
        _ => Err(bad()),
    }
}

fn parse_noise(s: &str) -> Result<NoiseChoice, CliError> {
    let bad = || CliError::config("spec.noise", format!("unrecognized noise model `{s}`"));
    let num = |v: &str| v.parse::<f64>().map_err(|_| bad());
    match s.split_once(':') {
        None if s == "gaussian" => Ok(NoiseChoice::Gaussian),
        Some(("student-t", v)) => Ok(NoiseChoice::StudentT(num(v)?)),
        Some(("two-point", v)) => Ok(NoiseChoice::TwoPoint(num(v)?)),
        _ => Err(bad()),
    }
}

fn env_seed() -> Result<Option<u64>, CliError> {
    match std::env::var("QRISK_SEED") {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| CliError::config("QRISK_SEED", format!("`{v}` is not an unsigned integer"))),
        Err(_) => Ok(None),
    }
}

impl ResolvedConfig {
    /// Merges the config file (if any) with the flags; flags win. The seed
    /// falls back to `QRISK_SEED`, then to 0.
    pub fn resolve(flags: &Flags) -> Result<Self, CliError> {
        let file = match &flags.config {
            Some(path) => ExperimentConfig::from_path(path)?,
            None => ExperimentConfig::default(),
        };
        Self::merge(file, flags, env_seed()?)
    }

    pub fn merge(file: ExperimentConfig, flags: &Flags, env_seed: Option<u64>) -> Result<Self, CliError> {
        let spec = file.spec.unwrap_or_default();
        let mm = file.minmax.unwrap_or_default();
        let eig = file.eigen.unwrap_or_default();

        let command = flags
            .command
            .or(file.command)
            .ok_or_else(|| CliError::config("command", "no command given on the command line or in the config"))?;
        let input = parse_input(flags.input.as_deref().or(spec.input.as_deref()).unwrap_or("gaussian"))?;
        let noise = parse_noise(flags.noise.as_deref().or(spec.noise.as_deref()).unwrap_or("gaussian"))?;
        let fixed_dim = matches!(input, InputChoice::Constant | InputChoice::Bernoulli(_));
        let d = flags.d.or(spec.d).unwrap_or(if fixed_dim { 1 } else { 2 });
        if d == 0 {
            return Err(CliError::config("spec.d", "dimension must be positive"));
        }
        if fixed_dim && d != 1 {
            return Err(CliError::config("spec.d", "constant and bernoulli inputs are one-dimensional"));
        }
        let n = flags.n.clone().or(file.n.map(OneOrMany::into_vec)).unwrap_or_else(|| vec![100]);
        if n.is_empty() || n.contains(&0) {
            return Err(CliError::config("n", "sample sizes must be positive"));
        }
        let delta = flags.delta.or(file.delta).unwrap_or(0.1);
        if !(delta > 0.0 && delta < 1.0) {
            return Err(CliError::config("delta", format!("must lie in (0, 1), got {delta}")));
        }
        let reps = flags.reps.or(file.reps).unwrap_or(1000);
        if reps < 100 {
            return Err(CliError::config("reps", format!("need at least 100 replicates, got {reps}")));
        }
        let sigma2 = flags.sigma2.or(spec.sigma2).unwrap_or(1.0);
        if !(sigma2 > 0.0 && sigma2.is_finite()) {
            return Err(CliError::config("spec.sigma2", format!("must be positive and finite, got {sigma2}")));
        }
        let p = flags.p.or(spec.p);
        if let Some(p) = p {
            if !(p > 2.0 && p.is_finite()) {
                return Err(CliError::config("spec.p", format!("must be finite and > 2, got {p}")));
            }
        }
        let w_star = spec.w_star.unwrap_or_else(|| vec![0.0; d]);
        if w_star.len() != d || w_star.iter().any(|w| !w.is_finite()) {
            return Err(CliError::config("spec.w_star", format!("needs {d} finite entries")));
        }
        let init_zero = match mm.init.as_deref() {
            None | Some("ols") => false,
            Some("zero") => true,
            Some(other) => return Err(CliError::config("minmax.init", format!("`{other}` is not ols or zero"))),
        };
        let minmax = MinMaxSettings {
            k: flags.k.or(mm.k),
            outer_steps: mm.outer_steps.unwrap_or(500),
            inner_steps: mm.inner_steps.unwrap_or(20),
            step_size: mm.step_size.unwrap_or(1.0),
            tolerance: mm.tolerance.unwrap_or(1e-7),
            init_zero,
        };
        if minmax.outer_steps == 0 || minmax.inner_steps == 0 {
            return Err(CliError::config("minmax", "step counts must be positive"));
        }
        if !(minmax.step_size > 0.0) || !(minmax.tolerance > 0.0) {
            return Err(CliError::config("minmax", "step_size and tolerance must be positive"));
        }
        let multistarts = eig.multistarts.unwrap_or(8);
        if multistarts == 0 {
            return Err(CliError::config("eigen.multistarts", "must be positive"));
        }
        let workers = flags.workers.or(file.workers);
        if workers == Some(0) {
            return Err(CliError::config("workers", "must be positive"));
        }
        let resolved = Self {
            command,
            n,
            d,
            delta,
            reps,
            seed: flags.seed.or(file.seed).or(env_seed).unwrap_or(0),
            sigma2,
            p,
            input,
            noise,
            w_star,
            estimator: flags.estimator.or(file.estimator).unwrap_or(EstimatorChoice::Ols),
            minmax,
            trim_k: flags.trim_k.or(eig.trim_k),
            multistarts,
            quick: flags.quick || file.quick.unwrap_or(false),
            out: flags.out.clone().or(file.out).unwrap_or_else(|| PathBuf::from("qrisk-out")),
            workers,
        };
        // surface invalid laws as config errors before any computation
        resolved.input_dist()?;
        resolved.problem_spec()?;
        Ok(resolved)
    }

    pub fn error_fn(&self) -> ErrorFn {
        match self.p {
            Some(p) => ErrorFn::p_power(p).expect("p validated"),
            None => ErrorFn::Square,
        }
    }

    pub fn input_dist(&self) -> Result<InputDist, CliError> {
        let key = |e: qrisk_core::Error| CliError::config("spec.input", e.to_string());
        match self.input {
            InputChoice::Gaussian => InputDist::standard_gaussian(self.d).map_err(key),
            InputChoice::Constant => Ok(InputDist::constant_one()),
            InputChoice::Bernoulli(rho) => InputDist::bernoulli(rho).map_err(key),
            InputChoice::AxisUniform => InputDist::axis_uniform(self.d).map_err(key),
            InputChoice::Kurtosis(kappa) => InputDist::coord_kurtosis(self.d, kappa).map_err(key),
        }
    }

    pub fn noise_model(&self) -> Result<NoiseModel, CliError> {
        let key = |e: qrisk_core::Error| CliError::config("spec.noise", e.to_string());
        match self.noise {
            NoiseChoice::Gaussian => NoiseModel::gaussian(self.sigma2).map_err(key),
            NoiseChoice::StudentT(nu) => NoiseModel::student_t(nu, self.sigma2).map_err(key),
            NoiseChoice::TwoPoint(prob) => {
                if !(prob > 0.0 && prob <= 1.0) {
                    return Err(CliError::config("spec.noise", format!("two-point probability must be in (0, 1], got {prob}")));
                }
                NoiseModel::two_point((self.sigma2 / prob).sqrt(), prob).map_err(key)
            }
        }
    }

    pub fn problem_spec(&self) -> Result<ProblemSpec, CliError> {
        ProblemSpec::new(self.input_dist()?, self.w_star.clone(), self.noise_model()?, self.error_fn())
            .map_err(|e| CliError::config("spec", e.to_string()))
    }

    /// Min-max settings at sample size `n`.
    pub fn minmax_config(&self, n: usize) -> Result<MinMaxConfig, CliError> {
        let k = match self.minmax.k {
            Some(k) => TrimLevel::new(k, n).map_err(|e| CliError::config("minmax.k", e.to_string()))?,
            None => qrisk_core::estimators::trim_level_for_delta(self.delta, n)
                .map_err(|e| CliError::config("n", e.to_string()))?,
        };
        let mut c = MinMaxConfig::new(k);
        c.outer_steps = self.minmax.outer_steps;
        c.inner_steps = self.minmax.inner_steps;
        c.step_size = self.minmax.step_size;
        c.tolerance = self.minmax.tolerance;
        c.init = if self.minmax.init_zero { Init::Zero } else { Init::Ols };
        Ok(c)
    }

    /// SHA-256 of the canonical JSON form, in hex.
    pub fn hash(&self) -> String {
        use sha2::{Digest, Sha256};
        let bytes = serde_json::to_vec(self).expect("config serializes");
        format!("{:x}", Sha256::digest(bytes))
    }
}
