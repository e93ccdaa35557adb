//! Scenario configuration: TOML (or JSON) in, validated model objects out.

use std::fmt;
use std::path::{Path, PathBuf};

use macalloc::allocation::{PowerBudget, QuadratureOptions, SolverOptions};
use macalloc::{FadingModel, FwOptions, Marginal, Scenario, StepRule, Utility};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// A configuration problem, tied to the offending field.
#[derive(Debug)]
pub struct ConfigError {
    pub field: String,
    pub message: String,
}

impl ConfigError {
    pub fn new(field: impl Into<String>, message: impl fmt::Display) -> Self {
        ConfigError {
            field: field.into(),
            message: message.to_string(),
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.field.is_empty() {
            write!(f, "{}", self.message)
        } else {
            write!(f, "field `{}`: {}", self.field, self.message)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    /// Constant transmit powers `P`.
    #[default]
    FixedPower,
    /// Average power budgets `P̄` with optimal power control.
    PowerControl,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::FixedPower => "fixed-power",
            Mode::PowerControl => "power-control",
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    /// Transmit powers in fixed-power mode, average budgets in power-control mode.
    pub powers: Vec<f64>,
    #[serde(default = "one")]
    pub noise: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FadingKind {
    Exponential,
    Uniform,
    #[serde(alias = "log_normal")]
    Lognormal,
    PointMass,
}

/// Per-user parameter vectors for one family of marginals.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FadingSpec {
    #[serde(rename = "type")]
    pub kind: FadingKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub low: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub high: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<Vec<f64>>,
    /// Target covariance of the gains; couples users through a Gaussian copula.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub covariance: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSpec {
    pub gap_tol: f64,
    pub max_iter: usize,
    pub step_rule: StepRule,
    pub pairwise: bool,
    pub quad_tol: f64,
    /// Relative power-constraint residual accepted by the multiplier solve.
    pub rel_tol: f64,
}

impl Default for SolverSpec {
    fn default() -> Self {
        SolverSpec {
            gap_tol: 1e-6,
            max_iter: 10_000,
            step_rule: StepRule::LimitedMax,
            pairwise: false,
            quad_tol: QuadratureOptions::default().tol,
            rel_tol: SolverOptions::default().rel_tol,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleSpec {
    pub n_region: usize,
    pub n_sim: usize,
    pub n_bounds: usize,
    pub export_trace: bool,
}

impl Default for SampleSpec {
    fn default() -> Self {
        SampleSpec {
            n_region: 100_000,
            n_sim: 100_000,
            n_bounds: 100_000,
            export_trace: false,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionsSpec {
    /// Channel states whose instantaneous regions are written out.
    pub states: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsSpec {
    pub epsilon: Vec<f64>,
    /// Multipliers of the fading covariance for the spread sweep.
    pub scales: Vec<f64>,
}

impl Default for BoundsSpec {
    fn default() -> Self {
        BoundsSpec {
            epsilon: (0..20)
                .map(|k| 0.01 * 100f64.powf(k as f64 / 19.0))
                .collect(),
            scales: vec![1.0, 0.25, 0.0625],
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundarySpec {
    /// Weight vectors `μ`; empty means the all-ones direction only.
    pub directions: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(default)]
    pub mode: Mode,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
    pub scenario: ScenarioSpec,
    pub fading: FadingSpec,
    pub utility: Utility,
    #[serde(default)]
    pub solver: SolverSpec,
    #[serde(default)]
    pub samples: SampleSpec,
    #[serde(default)]
    pub regions: RegionsSpec,
    #[serde(default)]
    pub bounds: BoundsSpec,
    #[serde(default)]
    pub boundary: BoundarySpec,
}

fn one() -> f64 {
    1.0
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}

impl Config {
    /// Smallest useful configuration, with every default spelled out.
    pub fn example() -> Self {
        Config {
            mode: Mode::FixedPower,
            seed: 0,
            out_dir: default_out_dir(),
            scenario: ScenarioSpec {
                powers: vec![1.0, 1.0],
                noise: 1.0,
            },
            fading: FadingSpec {
                kind: FadingKind::Uniform,
                mean: None,
                low: Some(vec![0.5, 0.5]),
                high: Some(vec![1.5, 1.5]),
                mu: None,
                sigma: None,
                value: None,
                covariance: None,
            },
            utility: Utility::WeightedLog {
                weights: vec![1.0, 1.0],
                shift: macalloc::utility::DEFAULT_SHIFT,
            },
            solver: SolverSpec::default(),
            samples: SampleSpec::default(),
            regions: RegionsSpec::default(),
            bounds: BoundsSpec::default(),
            boundary: BoundarySpec::default(),
        }
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::new("", format!("cannot read {}: {e}", path.display())))?;
        let is_json =
            path.extension().is_some_and(|e| e == "json") || text.trim_start().starts_with('{');
        if is_json {
            Self::from_json(&text)
        } else {
            Self::from_toml(&text)
        }
    }

    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let de = toml::Deserializer::parse(text).map_err(|e| ConfigError::new("", e))?;
        serde_path_to_error::deserialize(de).map_err(|e| {
            let field = e.path().to_string();
            ConfigError::new(
                if field == "." { String::new() } else { field },
                e.into_inner(),
            )
        })
    }

    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let mut de = serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(&mut de).map_err(|e| {
            let field = e.path().to_string();
            ConfigError::new(
                if field == "." { String::new() } else { field },
                e.into_inner(),
            )
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes to TOML")
    }

    /// SHA-256 of the resolved configuration in canonical (sorted-key) JSON.
    pub fn hash(&self) -> String {
        let value = serde_json::to_value(self).expect("configuration serializes to JSON");
        let digest = Sha256::digest(value.to_string().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn num_users(&self) -> usize {
        self.scenario.powers.len()
    }

    pub fn scenario(&self) -> Result<Scenario, ConfigError> {
        Scenario::new(self.scenario.powers.clone(), self.scenario.noise)
            .map_err(|e| ConfigError::new("scenario", e))
    }

    pub fn budget(&self) -> Result<PowerBudget, ConfigError> {
        PowerBudget::new(self.scenario.powers.clone())
            .map_err(|e| ConfigError::new("scenario.powers", e))
    }

    pub fn utility(&self) -> Result<Utility, ConfigError> {
        self.utility
            .validate()
            .map_err(|e| ConfigError::new("utility", e))?;
        self.check_len("utility.weights", self.utility.weights().len())?;
        Ok(self.utility.clone())
    }

    fn check_len(&self, field: &str, got: usize) -> Result<(), ConfigError> {
        let m = self.num_users();
        if got == m {
            Ok(())
        } else {
            Err(ConfigError::new(
                field,
                format!("has {got} entries but the scenario has {m} users"),
            ))
        }
    }

    fn param(&self, name: &str, values: &Option<Vec<f64>>) -> Result<Vec<f64>, ConfigError> {
        let field = format!("fading.{name}");
        let v = values.clone().ok_or_else(|| {
            ConfigError::new(
                &field,
                format!("required for fading type {:?}", self.fading.kind),
            )
        })?;
        self.check_len(&field, v.len())?;
        Ok(v)
    }

    pub fn marginals(&self) -> Result<Vec<Marginal>, ConfigError> {
        let f = &self.fading;
        let m = self.num_users();
        let used: &[&str] = match f.kind {
            FadingKind::Exponential => &["mean"],
            FadingKind::Uniform => &["low", "high"],
            FadingKind::Lognormal => &["mu", "sigma"],
            FadingKind::PointMass => &["value"],
        };
        let given = [
            ("mean", &f.mean),
            ("low", &f.low),
            ("high", &f.high),
            ("mu", &f.mu),
            ("sigma", &f.sigma),
            ("value", &f.value),
        ];
        if let Some((name, _)) = given
            .iter()
            .find(|(name, v)| v.is_some() && !used.contains(name))
        {
            return Err(ConfigError::new(
                format!("fading.{name}"),
                format!("not a parameter of fading type {:?}", f.kind),
            ));
        }
        let laws: Vec<Marginal> = match f.kind {
            FadingKind::Exponential => {
                let mean = self.param("mean", &f.mean)?;
                mean.into_iter()
                    .map(|mean| Marginal::Exponential { mean })
                    .collect()
            }
            FadingKind::Uniform => {
                let (low, high) = (self.param("low", &f.low)?, self.param("high", &f.high)?);
                (0..m)
                    .map(|i| Marginal::Uniform {
                        low: low[i],
                        high: high[i],
                    })
                    .collect()
            }
            FadingKind::Lognormal => {
                let (mu, sigma) = (self.param("mu", &f.mu)?, self.param("sigma", &f.sigma)?);
                (0..m)
                    .map(|i| Marginal::LogNormal {
                        mu: mu[i],
                        sigma: sigma[i],
                    })
                    .collect()
            }
            FadingKind::PointMass => {
                let value = self.param("value", &f.value)?;
                value
                    .into_iter()
                    .map(|value| Marginal::PointMass { value })
                    .collect()
            }
        };
        for law in &laws {
            law.validate().map_err(|e| ConfigError::new("fading", e))?;
        }
        Ok(laws)
    }

    pub fn fading(&self) -> Result<FadingModel, ConfigError> {
        let laws = self.marginals()?;
        match &self.fading.covariance {
            None => FadingModel::independent(laws),
            Some(k) => {
                self.check_len("fading.covariance", k.len())?;
                FadingModel::gaussian_copula(laws, k.clone())
            }
        }
        .map_err(|e| ConfigError::new("fading.covariance", e))
    }

    pub fn fw_options(&self) -> Result<FwOptions, ConfigError> {
        let s = &self.solver;
        if !(s.gap_tol > 0.0) {
            return Err(ConfigError::new("solver.gap_tol", "must be positive"));
        }
        if s.max_iter == 0 {
            return Err(ConfigError::new("solver.max_iter", "must be positive"));
        }
        Ok(FwOptions {
            rule: s.step_rule,
            gap_tol: s.gap_tol,
            max_iter: s.max_iter,
            record: true,
            pairwise: s.pairwise,
        })
    }

    pub fn solver_options(&self) -> Result<SolverOptions, ConfigError> {
        let s = &self.solver;
        if !(s.quad_tol > 0.0) {
            return Err(ConfigError::new("solver.quad_tol", "must be positive"));
        }
        if !(s.rel_tol > 0.0) {
            return Err(ConfigError::new("solver.rel_tol", "must be positive"));
        }
        Ok(SolverOptions {
            quadrature: QuadratureOptions { tol: s.quad_tol },
            rel_tol: s.rel_tol,
            ..SolverOptions::default()
        })
    }

    pub fn samples(&self, field: &str, n: usize) -> Result<usize, ConfigError> {
        if n == 0 {
            Err(ConfigError::new(
                format!("samples.{field}"),
                "must be positive",
            ))
        } else {
            Ok(n)
        }
    }

    pub fn states(&self) -> Result<Vec<Vec<f64>>, ConfigError> {
        for (k, s) in self.regions.states.iter().enumerate() {
            self.check_len(&format!("regions.states[{k}]"), s.len())?;
        }
        Ok(self.regions.states.clone())
    }

    pub fn directions(&self) -> Result<Vec<Vec<f64>>, ConfigError> {
        if self.boundary.directions.is_empty() {
            return Ok(vec![vec![1.0; self.num_users()]]);
        }
        for (k, d) in self.boundary.directions.iter().enumerate() {
            let field = format!("boundary.directions[{k}]");
            self.check_len(&field, d.len())?;
            if d.iter().any(|w| !(*w >= 0.0 && w.is_finite())) || d.iter().all(|w| *w == 0.0) {
                return Err(ConfigError::new(
                    field,
                    "weights must be nonnegative, finite and not all zero",
                ));
            }
        }
        Ok(self.boundary.directions.clone())
    }

    pub fn epsilon_grid(&self) -> Result<Vec<f64>, ConfigError> {
        let g = &self.bounds.epsilon;
        if g.is_empty() || g.iter().any(|e| !(*e > 0.0 && *e <= 1.0)) {
            return Err(ConfigError::new(
                "bounds.epsilon",
                "needs at least one value in (0, 1]",
            ));
        }
        Ok(g.clone())
    }

    pub fn scales(&self) -> Result<Vec<f64>, ConfigError> {
        let s = &self.bounds.scales;
        if s.iter().any(|c| !(*c >= 0.0 && c.is_finite())) {
            return Err(ConfigError::new(
                "bounds.scales",
                "scales must be finite and nonnegative",
            ));
        }
        Ok(s.clone())
    }
}
