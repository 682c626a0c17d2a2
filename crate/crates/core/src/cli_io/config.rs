use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::analysis::DEFAULT_LEVEL;
use crate::engine::{EngineConfig, InitialMeasure};
use crate::error::{Error, Result};
use crate::geometry::DomainSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    /// Plain runs: event logs, stored paths and spines per replica.
    #[default]
    Simulate,
    SpineMarginal,
    Villemonais,
    Kernels,
    Boundary,
    TransformCoupling,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Simulate => "simulate",
            Self::SpineMarginal => "spine_marginal",
            Self::Villemonais => "villemonais",
            Self::Kernels => "kernels",
            Self::Boundary => "boundary",
            Self::TransformCoupling => "transform_coupling",
        }
    }

    fn uses_spine(self) -> bool {
        matches!(self, Self::Simulate | Self::SpineMarginal | Self::TransformCoupling)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub experiment: ExperimentKind,
    pub engine: EngineConfig,
    #[serde(default = "one")]
    pub replicas: usize,
    #[serde(default = "one")]
    pub parallelism: usize,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    /// Defaults to `T/2`.
    #[serde(default)]
    pub query_time: Option<f64>,
    /// Significance level of the KS gates.
    #[serde(default = "default_level")]
    pub level: f64,
    /// Population sizes for the villemonais experiment.
    #[serde(default = "default_n_values")]
    pub n_values: Vec<usize>,
    /// Indicator window `[a, b]` (on every axis) for the villemonais experiment.
    #[serde(default = "default_window")]
    pub window: [f64; 2],
    /// Exponent `a` of the map `x(u) = u^a`.
    #[serde(default = "default_exponent")]
    pub exponent: f64,
}

fn one() -> usize {
    1
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

fn default_level() -> f64 {
    DEFAULT_LEVEL
}

fn default_n_values() -> Vec<usize> {
    vec![50, 100, 200, 400, 800]
}

fn default_window() -> [f64; 2] {
    [0.4, 0.6]
}

fn default_exponent() -> f64 {
    2.0
}

impl ExperimentConfig {
    pub fn new(experiment: ExperimentKind, engine: EngineConfig) -> Self {
        Self {
            experiment,
            engine,
            replicas: 1,
            parallelism: 1,
            output_dir: default_output_dir(),
            query_time: None,
            level: default_level(),
            n_values: default_n_values(),
            window: default_window(),
            exponent: default_exponent(),
        }
    }

    /// The acceptance-suite setup for each experiment, on the unit interval
    /// with initial law uniform on `[0.25, 0.75]`.
    pub fn preset(kind: ExperimentKind) -> Self {
        let engine = |n: usize, horizon: f64, dt: f64, seed: u64| {
            EngineConfig::new(
                n,
                horizon,
                dt,
                DomainSpec::unit_interval(),
                InitialMeasure::uniform_interval(0.25, 0.75, 0.01),
                seed,
            )
        };
        let mut c = match kind {
            ExperimentKind::Simulate => {
                let mut e = engine(100, 12.0, 1e-4, 20_240_300);
                e.storage_every = 100;
                Self::new(kind, e)
            }
            ExperimentKind::SpineMarginal => {
                let mut c = Self::new(kind, engine(200, 12.0, 1e-4, 20_240_302));
                c.replicas = 1000;
                c
            }
            ExperimentKind::Villemonais => {
                let mut c = Self::new(kind, engine(50, 1.0, 1e-4, 20_240_301));
                c.replicas = 200;
                c
            }
            ExperimentKind::Kernels => Self::new(kind, engine(2, 1.0, 1e-4, 20_240_308)),
            ExperimentKind::Boundary => {
                let mut c = Self::new(kind, engine(2, 1.0, 1e-3, 20_240_307));
                c.replicas = 100_000;
                c
            }
            ExperimentKind::TransformCoupling => {
                let mut c = Self::new(kind, engine(10, 10.0, 1e-3, 20_240_309));
                c.replicas = 50;
                c
            }
        };
        c.query_time = Some(match kind {
            ExperimentKind::Villemonais | ExperimentKind::Kernels | ExperimentKind::Boundary => c.engine.horizon,
            _ => c.engine.horizon / 2.0,
        });
        c
    }

    pub fn query_time(&self) -> f64 {
        self.query_time.unwrap_or(self.engine.horizon / 2.0)
    }

    /// Fills in derived defaults and validates.
    pub fn finalize(mut self) -> Result<Self> {
        self.query_time = Some(self.query_time());
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        self.engine.validate()?;
        if self.replicas == 0 {
            return Err(Error::Config("replicas must be >= 1".into()));
        }
        if self.parallelism == 0 {
            return Err(Error::Config("parallelism must be >= 1".into()));
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(Error::Config(format!("level must be in (0, 1), got {}", self.level)));
        }
        let q = self.query_time();
        if !(q >= 0.0 && q <= self.engine.horizon) {
            return Err(Error::Config(format!("query_time {q} outside [0, T]")));
        }
        if self.experiment.uses_spine() && q > self.engine.horizon / 2.0 + 1e-12 {
            return Err(Error::Config(format!("query_time {q} exceeds T/2 = {}", self.engine.horizon / 2.0)));
        }
        match self.experiment {
            ExperimentKind::Villemonais => {
                if self.n_values.len() < 3 || self.n_values.iter().any(|&n| n < 2) {
                    return Err(Error::Config("n_values needs at least 3 sizes, each >= 2".into()));
                }
                if !(self.window[0] < self.window[1]) {
                    return Err(Error::Config(format!("window {:?} is empty", self.window)));
                }
            }
            ExperimentKind::TransformCoupling => {
                if self.engine.domain.bounds() != [(0.0, 1.0)] {
                    return Err(Error::Config("transform coupling runs on the unit interval".into()));
                }
                if !(self.exponent >= 1.0 && self.exponent.is_finite()) {
                    return Err(Error::Config(format!("exponent must be >= 1, got {}", self.exponent)));
                }
            }
            _ => {}
        }
        Ok(())
    }
}

/// Parses and validates a TOML experiment definition. Unknown keys are
/// rejected.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let c: ExperimentConfig = toml::from_str(text)?;
    c.finalize()
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::MissingFile(format!("{}: {e}", path.display())))?;
    parse_config(&text)
}
