use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::DomainSpec;
use crate::sampler::{RngStream, PARTICLE_BITS};

/// Law of the initial configuration. All mass must sit at distance at least
/// `margin` from the complement of the domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialMeasure {
    /// Particle `i` starts at `points[i % points.len()]`.
    PointCloud { points: Vec<Vec<f64>>, margin: f64 },
    /// Independent uniform draws on the box `[lower, upper]`.
    UniformOnBox { lower: Vec<f64>, upper: Vec<f64>, margin: f64 },
}

impl InitialMeasure {
    pub fn uniform_interval(lo: f64, hi: f64, margin: f64) -> Self {
        Self::UniformOnBox {
            lower: vec![lo],
            upper: vec![hi],
            margin,
        }
    }

    pub fn points_1d(points: &[f64], margin: f64) -> Self {
        Self::PointCloud {
            points: points.iter().map(|&p| vec![p]).collect(),
            margin,
        }
    }

    pub fn margin(&self) -> f64 {
        match self {
            Self::PointCloud { margin, .. } | Self::UniformOnBox { margin, .. } => *margin,
        }
    }

    pub fn validate(&self, domain: &DomainSpec) -> Result<()> {
        let margin = self.margin();
        if !(margin > 0.0) {
            return Err(Error::MarginViolation(format!("margin must be positive, got {margin}")));
        }
        match self {
            Self::PointCloud { points, .. } => {
                if points.is_empty() {
                    return Err(Error::Config("point cloud is empty".into()));
                }
                for p in points {
                    let dist = domain.dist_to_boundary(p)?;
                    if dist < margin {
                        return Err(Error::MarginViolation(format!(
                            "point {p:?} is at distance {dist} < {margin} from the boundary"
                        )));
                    }
                }
            }
            Self::UniformOnBox { lower, upper, .. } => {
                domain.check_dim(lower)?;
                domain.check_dim(upper)?;
                for (axis, (&(lo, hi), (&a, &b))) in domain.bounds().iter().zip(lower.iter().zip(upper)).enumerate() {
                    if !(a <= b) {
                        return Err(Error::Config(format!("axis {axis}: box lower {a} > upper {b}")));
                    }
                    if a - lo < margin || hi - b < margin {
                        return Err(Error::MarginViolation(format!(
                            "axis {axis}: box [{a}, {b}] is closer than {margin} to ({lo}, {hi})"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// Initial position of particle `index`, drawn from its own stream.
    pub(crate) fn draw(&self, index: usize, rng: &mut RngStream, out: &mut [f64]) {
        match self {
            Self::PointCloud { points, .. } => out.copy_from_slice(&points[index % points.len()]),
            Self::UniformOnBox { lower, upper, .. } => {
                for (o, (&a, &b)) in out.iter_mut().zip(lower.iter().zip(upper)) {
                    *o = a + (b - a) * rng.uniform();
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EngineConfig {
    pub n: usize,
    #[serde(alias = "T")]
    pub horizon: f64,
    #[serde(default = "default_dt")]
    pub dt: f64,
    pub domain: DomainSpec,
    pub initial: InitialMeasure,
    pub seed: u64,
    /// Replica index; selects the random streams.
    #[serde(default)]
    pub replica: u64,
    #[serde(default)]
    pub snapshot_times: Vec<f64>,
    /// Positions are stored every `storage_every` steps.
    #[serde(default = "default_storage_every")]
    pub storage_every: usize,
    /// Use the Brownian-bridge exit correction.
    #[serde(default = "default_true")]
    pub bridge_correction: bool,
}

fn default_dt() -> f64 {
    1e-4
}

fn default_storage_every() -> usize {
    10
}

fn default_true() -> bool {
    true
}

impl EngineConfig {
    pub fn new(n: usize, horizon: f64, dt: f64, domain: DomainSpec, initial: InitialMeasure, seed: u64) -> Self {
        Self {
            n,
            horizon,
            dt,
            domain,
            initial,
            seed,
            replica: 0,
            snapshot_times: Vec::new(),
            storage_every: default_storage_every(),
            bridge_correction: true,
        }
    }

    pub fn with_replica(mut self, replica: u64) -> Self {
        self.replica = replica;
        self
    }

    pub fn with_snapshots(mut self, times: Vec<f64>) -> Self {
        self.snapshot_times = times;
        self
    }

    pub fn storage_dt(&self) -> f64 {
        self.dt * self.storage_every as f64
    }

    pub fn steps(&self) -> usize {
        (self.horizon / self.dt).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::Config(format!("need n >= 2, got {}", self.n)));
        }
        if self.n as u64 >= (1 << PARTICLE_BITS) - 1 {
            return Err(Error::Config(format!("n = {} exceeds the stream id layout", self.n)));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(Error::Config(format!("horizon must be positive, got {}", self.horizon)));
        }
        if !(self.dt > 0.0 && self.dt < self.horizon) {
            return Err(Error::Config(format!("need 0 < dt < T, got dt = {}", self.dt)));
        }
        let steps = self.horizon / self.dt;
        if (steps - steps.round()).abs() > 1e-6 * steps.max(1.0) {
            return Err(Error::Config(format!("T = {} is not a multiple of dt = {}", self.horizon, self.dt)));
        }
        if self.storage_every == 0 {
            return Err(Error::Config("storage_every must be >= 1".into()));
        }
        let mut prev = f64::NEG_INFINITY;
        for &s in &self.snapshot_times {
            if !(0.0..=self.horizon).contains(&s) {
                return Err(Error::Config(format!("snapshot time {s} outside [0, {}]", self.horizon)));
            }
            if s < prev {
                return Err(Error::Config("snapshot times must be sorted".into()));
            }
            prev = s;
        }
        self.initial.validate(&self.domain)
    }
}
