use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::model::{DiscreteFamily, GaussianModel};
use crate::scaling::RateSchedule;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    BatchDiscrete,
    BatchGaussian,
    StreamOnline,
    StreamTwopass,
    StreamComprehensive,
    Scaling,
    Bounds,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::BatchDiscrete => "batch-discrete",
            ExperimentKind::BatchGaussian => "batch-gaussian",
            ExperimentKind::StreamOnline => "stream-online",
            ExperimentKind::StreamTwopass => "stream-twopass",
            ExperimentKind::StreamComprehensive => "stream-comprehensive",
            ExperimentKind::Scaling => "scaling",
            ExperimentKind::Bounds => "bounds",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Units {
    #[default]
    Nats,
    Bits,
}

impl Units {
    /// Nats per configured unit.
    pub fn scale(self) -> f64 {
        match self {
            Units::Nats => 1.0,
            Units::Bits => std::f64::consts::LN_2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GaussianMethod {
    #[default]
    ClosedForm,
    Iterative,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Spacing {
    #[default]
    Log,
    Linear,
}

/// A list of values or an evenly spaced sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Grid {
    List(Vec<f64>),
    Sweep {
        min: f64,
        max: f64,
        points: usize,
        #[serde(default)]
        spacing: Spacing,
    },
}

impl Grid {
    pub fn values(&self) -> Vec<f64> {
        match *self {
            Grid::List(ref v) => v.clone(),
            Grid::Sweep { min, max, points, spacing } => {
                if points == 1 {
                    return vec![min];
                }
                (0..points)
                    .map(|i| {
                        let t = i as f64 / (points - 1) as f64;
                        match spacing {
                            Spacing::Linear => min + (max - min) * t,
                            Spacing::Log => (min.ln() + (max.ln() - min.ln()) * t).exp(),
                        }
                    })
                    .collect()
            }
        }
    }

    fn check(&self, field: &str, positive: bool) -> Result<()> {
        match *self {
            Grid::List(ref v) if v.is_empty() => return Err(field_error(field, "must not be empty")),
            Grid::Sweep { points: 0, .. } => return Err(field_error(field, "`points` must be at least 1")),
            Grid::Sweep { min, max, .. } if !(min <= max) => {
                return Err(field_error(field, "`min` must not exceed `max`"));
            }
            Grid::Sweep { min, spacing: Spacing::Log, .. } if !(min > 0.0) => {
                return Err(field_error(field, "log spacing needs `min` > 0"));
            }
            _ => {}
        }
        let values = self.values();
        if let Some(bad) = values.iter().find(|v| !v.is_finite() || (positive && **v <= 0.0) || **v < 0.0) {
            let need = if positive { "positive" } else { "nonnegative" };
            return Err(field_error(field, &format!("every value must be finite and {need}, found {bad}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ModelSpec {
    /// Explicit covariances, or `dim` plus `seed` for random ones.
    Gaussian {
        dim: Option<usize>,
        seed: Option<u64>,
        sigma_x: Option<Vec<Vec<f64>>>,
        sigma_theta: Option<Vec<Vec<f64>>>,
    },
    /// Bernoulli family on an evenly spaced parameter grid with uniform prior.
    BernoulliUniform { grid: usize },
    Bernoulli { thetas: Vec<f64>, prior: Vec<f64> },
    /// Explicit finite family.
    Discrete {
        params: Vec<Vec<f64>>,
        prior: Vec<f64>,
        likelihood: Vec<Vec<f64>>,
    },
}

/// A constructed source model.
#[derive(Debug, Clone)]
pub enum Source {
    Gaussian(GaussianModel),
    Discrete(DiscreteFamily),
}

impl ModelSpec {
    pub fn is_gaussian(&self) -> bool {
        matches!(self, ModelSpec::Gaussian { .. })
    }

    pub fn build(&self) -> Result<Source> {
        let ctx = |e: Error| field_error("model", &e.to_string());
        match self {
            ModelSpec::Gaussian { dim, seed, sigma_x, sigma_theta } => match (sigma_x, sigma_theta) {
                (Some(sx), Some(st)) => {
                    let sx = to_matrix("model.sigma_x", sx)?;
                    let st = to_matrix("model.sigma_theta", st)?;
                    if let Some(d) = dim {
                        if *d != sx.nrows() {
                            return Err(field_error("model.dim", "disagrees with the covariance size"));
                        }
                    }
                    if seed.is_some() {
                        return Err(field_error("model.seed", "not used with explicit covariances"));
                    }
                    GaussianModel::new(sx, st).map(Source::Gaussian).map_err(ctx)
                }
                (None, None) => {
                    let d = dim.ok_or_else(|| field_error("model.dim", "required without explicit covariances"))?;
                    if d == 0 {
                        return Err(field_error("model.dim", "must be at least 1"));
                    }
                    let s = seed.ok_or_else(|| field_error("model.seed", "required for random covariances"))?;
                    GaussianModel::random(d, s).map(Source::Gaussian).map_err(ctx)
                }
                _ => Err(field_error("model", "give both `sigma_x` and `sigma_theta` or neither")),
            },
            ModelSpec::BernoulliUniform { grid } => {
                DiscreteFamily::bernoulli_uniform(*grid).map(Source::Discrete).map_err(ctx)
            }
            ModelSpec::Bernoulli { thetas, prior } => {
                DiscreteFamily::bernoulli(thetas, prior.clone()).map(Source::Discrete).map_err(ctx)
            }
            ModelSpec::Discrete { params, prior, likelihood } => {
                DiscreteFamily::new(params.clone(), prior.clone(), likelihood.clone())
                    .map(Source::Discrete)
                    .map_err(ctx)
            }
        }
    }

    /// Short label for the `model` column: the generator for random and
    /// grid models, a content hash for explicit ones.
    pub fn label(&self) -> String {
        match self {
            ModelSpec::Gaussian { dim: Some(d), seed: Some(s), sigma_x: None, .. } => format!("gaussian-d{d}-s{s}"),
            ModelSpec::BernoulliUniform { grid } => format!("bernoulli-uniform-{grid}"),
            ModelSpec::Gaussian { sigma_x, .. } => {
                let d = sigma_x.as_ref().map_or(0, |m| m.len());
                format!("gaussian-d{d}-{}", self.digest())
            }
            ModelSpec::Bernoulli { .. } => format!("bernoulli-{}", self.digest()),
            ModelSpec::Discrete { .. } => format!("discrete-{}", self.digest()),
        }
    }

    fn digest(&self) -> String {
        use sha2::{Digest, Sha256};
        let canonical = serde_json::to_string(self).expect("model spec serializes");
        let hash = Sha256::digest(canonical.as_bytes());
        hash.iter().take(6).map(|b| format!("{b:02x}")).collect()
    }
}

fn to_matrix(field: &str, rows: &[Vec<f64>]) -> Result<Matrix> {
    let n = rows.len();
    if n == 0 || rows.iter().any(|r| r.len() != n) {
        return Err(field_error(field, "must be a nonempty square array of rows"));
    }
    Ok(Matrix::from_fn(n, n, |i, j| rows[i][j]))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    pub path: PathBuf,
    #[serde(default)]
    pub format: Format,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub model: ModelSpec,
    /// Sample counts for batch and bounds experiments.
    pub k_values: Option<Vec<usize>>,
    /// Stream length.
    pub rounds: Option<usize>,
    pub beta_grid: Option<Grid>,
    /// Rate targets in the configured units.
    pub rate_budgets: Option<Grid>,
    pub schedules: Option<Vec<RateSchedule>>,
    /// Encoder alphabet size; defaults to `k + 1`.
    pub t_size: Option<usize>,
    pub restarts: Option<usize>,
    /// Backward sweeps of the two-pass solver.
    pub passes: Option<usize>,
    pub k_max: Option<usize>,
    pub seed: Option<u64>,
    pub method: Option<GaussianMethod>,
    /// Also emit the lower convex hull of each batch curve.
    #[serde(default)]
    pub hull: bool,
    pub output: OutputSpec,
    #[serde(default)]
    pub units: Units,
}

/// The sweep parameter selected by a config.
#[derive(Debug, Clone, PartialEq)]
pub enum Sweep {
    Betas(Vec<f64>),
    /// In nats, converted from the configured units.
    RateBudgets(Vec<f64>),
    Schedules(Vec<RateSchedule>),
}

pub fn field_error(field: &str, msg: &str) -> Error {
    Error::Config(format!("field `{field}`: {msg}"))
}

impl ExperimentConfig {
    /// Parse TOML text; syntax and type errors carry line and column.
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string().trim_end().to_string()))
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    fn present(&self) -> Vec<&'static str> {
        let mut v = Vec::new();
        if self.beta_grid.is_some() {
            v.push("beta_grid");
        }
        if self.rate_budgets.is_some() {
            v.push("rate_budgets");
        }
        if self.schedules.is_some() {
            v.push("schedules");
        }
        v
    }

    /// Check every cross-field rule and build the model.
    pub fn validate(&self) -> Result<Source> {
        use ExperimentKind::*;
        let present = self.present();
        if present.len() != 1 {
            return Err(Error::Config(format!(
                "exactly one of `beta_grid`, `rate_budgets`, `schedules` must be given, found {}",
                if present.is_empty() { "none".to_string() } else { present.join(", ") }
            )));
        }
        let allowed: &[&str] = match self.experiment {
            BatchDiscrete | StreamComprehensive | Bounds => &["beta_grid"],
            BatchGaussian | StreamOnline | StreamTwopass => &["beta_grid", "rate_budgets"],
            Scaling => &["schedules"],
        };
        if !allowed.contains(&present[0]) {
            return Err(field_error(
                present[0],
                &format!("not accepted by `{}`; use {}", self.experiment, allowed.join(" or ")),
            ));
        }
        if let Some(g) = &self.beta_grid {
            g.check("beta_grid", true)?;
        }
        if let Some(g) = &self.rate_budgets {
            g.check("rate_budgets", false)?;
        }
        if let Some(s) = &self.schedules {
            if s.is_empty() {
                return Err(field_error("schedules", "must not be empty"));
            }
            if s.iter().any(|s| !s.coefficient.is_finite() || !s.offset.is_finite()) {
                return Err(field_error("schedules", "coefficients and offsets must be finite"));
            }
        }

        let needs_gaussian = !matches!(self.experiment, BatchDiscrete | Bounds);
        if needs_gaussian && !self.model.is_gaussian() {
            return Err(field_error("model.kind", &format!("`{}` needs a gaussian model", self.experiment)));
        }
        if self.experiment == BatchDiscrete && self.model.is_gaussian() {
            return Err(field_error("model.kind", "`batch-discrete` needs a discrete model"));
        }

        let uses_k_values = matches!(self.experiment, BatchDiscrete | BatchGaussian | Bounds);
        match (&self.k_values, uses_k_values) {
            (None, true) => return Err(field_error("k_values", "required")),
            (Some(_), false) => return Err(field_error("k_values", &format!("not used by `{}`", self.experiment))),
            (Some(ks), true) if ks.is_empty() || ks.contains(&0) => {
                return Err(field_error("k_values", "must be a nonempty list of positive sample counts"));
            }
            _ => {}
        }

        let uses_rounds = matches!(self.experiment, StreamOnline | StreamTwopass | StreamComprehensive);
        match (self.rounds, uses_rounds) {
            (None, true) if self.experiment != StreamComprehensive => return Err(field_error("rounds", "required")),
            (Some(_), false) => return Err(field_error("rounds", &format!("not used by `{}`", self.experiment))),
            (Some(0), true) => return Err(field_error("rounds", "must be at least 1")),
            (Some(r), true) if self.experiment == StreamComprehensive && r != 2 => {
                return Err(field_error("rounds", "the comprehensive solver handles exactly 2 rounds"));
            }
            (Some(1), true) if self.experiment == StreamTwopass => {
                return Err(field_error("rounds", "two-pass needs at least 2 rounds"));
            }
            _ => {}
        }

        let stochastic = match self.experiment {
            BatchDiscrete | StreamComprehensive => true,
            BatchGaussian => self.method == Some(GaussianMethod::Iterative),
            Bounds => !self.model.is_gaussian(),
            _ => false,
        };
        if stochastic && self.seed.is_none() {
            return Err(field_error("seed", &format!("required: `{}` has stochastic components", self.experiment)));
        }

        let discrete_solver = matches!(self.experiment, BatchDiscrete) || (self.experiment == Bounds && !self.model.is_gaussian());
        if !discrete_solver {
            for (name, set) in [("t_size", self.t_size.is_some()), ("restarts", self.restarts.is_some())] {
                if set {
                    return Err(field_error(name, &format!("only used by the discrete solver, not `{}`", self.experiment)));
                }
            }
        }
        if self.t_size == Some(0) {
            return Err(field_error("t_size", "must be at least 1"));
        }
        if self.restarts == Some(0) {
            return Err(field_error("restarts", "must be at least 1"));
        }
        match (self.passes, self.experiment) {
            (Some(0), _) => return Err(field_error("passes", "must be at least 1")),
            (Some(_), StreamTwopass | StreamComprehensive) | (None, _) => {}
            (Some(_), _) => return Err(field_error("passes", &format!("not used by `{}`", self.experiment))),
        }
        match (self.k_max, self.experiment) {
            (Some(0), _) => return Err(field_error("k_max", "must be at least 1")),
            (None, Scaling) => return Err(field_error("k_max", "required")),
            (Some(_), Scaling) | (None, _) => {}
            (Some(_), _) => return Err(field_error("k_max", "only used by `scaling`")),
        }
        if self.method.is_some() && self.experiment != BatchGaussian {
            return Err(field_error("method", "only used by `batch-gaussian`"));
        }
        if self.hull && !matches!(self.experiment, BatchDiscrete | BatchGaussian) {
            return Err(field_error("hull", "only used by batch experiments"));
        }
        if self.output.path.as_os_str().is_empty() {
            return Err(field_error("output.path", "must not be empty"));
        }

        let source = self.model.build()?;
        if let Source::Gaussian(m) = &source {
            if self.experiment == StreamComprehensive && m.dim() != 1 {
                return Err(field_error("model", "the comprehensive solver needs a scalar (dim = 1) model"));
            }
        }
        Ok(source)
    }

    pub fn sweep(&self) -> Sweep {
        if let Some(g) = &self.beta_grid {
            Sweep::Betas(g.values())
        } else if let Some(g) = &self.rate_budgets {
            Sweep::RateBudgets(g.values().into_iter().map(|r| r * self.units.scale()).collect())
        } else {
            let s = self.units.scale();
            Sweep::Schedules(
                self.schedules
                    .clone()
                    .unwrap_or_default()
                    .into_iter()
                    .map(|r| RateSchedule { coefficient: r.coefficient * s, offset: r.offset * s, ..r })
                    .collect(),
            )
        }
    }
}
