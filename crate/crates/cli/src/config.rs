//! Scenario configuration files (JSON, or TOML by extension).

use std::path::Path;

use anyhow::{bail, Context, Result};
use contract_lab::contract::{Scenario, SolverSettings};
use contract_lab::distributions::{make_mixture, CostModel, DistributionSpec};
use contract_lab::numerics::{linspace, Tolerance};
use serde::{Deserialize, Serialize};

pub const DEFAULT_SWEEP_N: usize = 101;
pub const DEFAULT_LAMBDA_N: usize = 40;
pub const DEFAULT_LAMBDA_MIN: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default)]
    pub format: Format,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<String>,
}

/// Either explicit values or an evenly spaced range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AxisSpec {
    Values(Vec<f64>),
    Range { min: f64, max: f64, n: usize },
}

impl AxisSpec {
    pub fn values(&self, n_override: Option<usize>) -> Vec<f64> {
        match self {
            Self::Values(v) => v.clone(),
            Self::Range { min, max, n } => linspace(*min, *max, n_override.unwrap_or(*n)),
        }
    }

    fn validate(&self, name: &str) -> Result<()> {
        let bad = match self {
            Self::Values(v) => v.is_empty() || v.iter().any(|x| !(*x > 0.0 && x.is_finite())),
            Self::Range { min, max, n } => !(*min > 0.0 && max >= min && max.is_finite()) || *n == 0,
        };
        if bad {
            bail!("grids.{name} must be non-empty with positive finite values");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps_n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r_n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda0: Option<AxisSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda1: Option<AxisSpec>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MixtureTag {
    Mixture,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightedSpec {
    pub weight: f64,
    pub dist: DistributionSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixtureSpec {
    pub family: MixtureTag,
    pub components: Vec<WeightedSpec>,
}

/// A closed-form family, or a finite mixture of them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DistributionConfig {
    Single(DistributionSpec),
    Mixture(MixtureSpec),
}

impl DistributionConfig {
    pub fn model(&self) -> Result<CostModel> {
        Ok(match self {
            Self::Single(spec) => CostModel::from_spec(*spec)?,
            Self::Mixture(m) => make_mixture(
                m.components
                    .iter()
                    .map(|c| Ok((c.weight, CostModel::from_spec(c.dist)?)))
                    .collect::<Result<_>>()?,
            )?,
        })
    }
}

fn half() -> f64 {
    0.5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub b: f64,
    pub theta: f64,
    pub f0: DistributionConfig,
    pub f1: DistributionConfig,
    #[serde(default = "half")]
    pub gamma: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grids: Option<GridConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerances: Option<Tolerance>,
    #[serde(default)]
    pub output: OutputConfig,
}

impl ScenarioConfig {
    pub fn parse(text: &str, toml_syntax: bool) -> Result<Self> {
        let cfg: Self = if toml_syntax {
            toml::from_str(text).context("invalid TOML config")?
        } else {
            serde_json::from_str(text).context("invalid JSON config")?
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
        let toml_syntax = path.extension().is_some_and(|e| e == "toml");
        Self::parse(&text, toml_syntax).with_context(|| format!("in config {}", path.display()))
    }

    pub fn validate(&self) -> Result<()> {
        self.scenario()?;
        if !(0.0..=1.0).contains(&self.gamma) {
            bail!("gamma must lie in [0,1], got {}", self.gamma);
        }
        if let Some(g) = &self.grids {
            for (name, n) in [("eps_n", g.eps_n), ("r_n", g.r_n)] {
                if n.is_some_and(|n| n < 2) {
                    bail!("grids.{name} must be at least 2");
                }
            }
            if let Some(a) = &g.lambda0 {
                a.validate("lambda0")?;
            }
            if let Some(a) = &g.lambda1 {
                a.validate("lambda1")?;
            }
        }
        Ok(())
    }

    pub fn scenario(&self) -> Result<Scenario> {
        let mut solver = SolverSettings::default();
        if let Some(t) = self.tolerances {
            t.validate()?;
            solver.tol = t;
        }
        let s = Scenario::new(self.b, self.theta, self.f0.model()?, self.f1.model()?)?;
        Ok(s.with_solver(solver))
    }

    pub fn eps_n(&self) -> usize {
        self.grids.as_ref().and_then(|g| g.eps_n).unwrap_or(DEFAULT_SWEEP_N)
    }

    pub fn r_n(&self) -> usize {
        self.grids.as_ref().and_then(|g| g.r_n).unwrap_or(DEFAULT_SWEEP_N)
    }

    /// `λ_0` and `λ_1` axes; the default spans `[0.01, b]` with 40 points.
    pub fn lambda_axes(&self, n_override: Option<usize>) -> (Vec<f64>, Vec<f64>) {
        let default = AxisSpec::Range {
            min: DEFAULT_LAMBDA_MIN,
            max: self.b,
            n: DEFAULT_LAMBDA_N,
        };
        let pick = |a: Option<&AxisSpec>| a.unwrap_or(&default).values(n_override);
        let g = self.grids.as_ref();
        (pick(g.and_then(|g| g.lambda0.as_ref())), pick(g.and_then(|g| g.lambda1.as_ref())))
    }
}
