//! Domains, Dirichlet spectral data and reference densities.
//!
//! Only intervals and axis-aligned rectangles are supported. Both have
//! closed-form principal eigenpairs for the half-Laplacian, and the killed
//! heat kernel of a rectangle factorizes into per-axis interval kernels.

mod kernel;
pub mod quadrature;
mod transform;

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub(crate) use kernel::axis_h_kernel;
pub use kernel::{ConditionedDensity, IntervalKernel, KernelEvaluator, DENSITY_FLOOR};
pub use transform::pullback_path;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DomainKind {
    Interval,
    Rectangle,
}

/// Open domain `(lo_1, hi_1) x ... x (lo_d, hi_d)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawDomain", into = "RawDomain")]
pub struct DomainSpec {
    kind: DomainKind,
    bounds: Vec<(f64, f64)>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDomain {
    kind: DomainKind,
    bounds: Vec<[f64; 2]>,
}

impl TryFrom<RawDomain> for DomainSpec {
    type Error = Error;

    fn try_from(raw: RawDomain) -> Result<Self> {
        let bounds = raw.bounds.iter().map(|b| (b[0], b[1])).collect();
        DomainSpec::new(raw.kind, bounds)
    }
}

impl From<DomainSpec> for RawDomain {
    fn from(d: DomainSpec) -> Self {
        RawDomain {
            kind: d.kind,
            bounds: d.bounds.iter().map(|&(lo, hi)| [lo, hi]).collect(),
        }
    }
}

impl DomainSpec {
    pub fn new(kind: DomainKind, bounds: Vec<(f64, f64)>) -> Result<Self> {
        if bounds.is_empty() {
            return Err(Error::InvalidDomain("no axes".into()));
        }
        if kind == DomainKind::Interval && bounds.len() != 1 {
            return Err(Error::InvalidDomain(format!(
                "an interval has exactly one axis, got {}",
                bounds.len()
            )));
        }
        for (axis, &(lo, hi)) in bounds.iter().enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::InvalidDomain(format!(
                    "axis {axis}: need finite lo < hi, got ({lo}, {hi})"
                )));
            }
        }
        Ok(Self { kind, bounds })
    }

    pub fn interval(lo: f64, hi: f64) -> Result<Self> {
        Self::new(DomainKind::Interval, vec![(lo, hi)])
    }

    pub fn rectangle(bounds: Vec<(f64, f64)>) -> Result<Self> {
        Self::new(DomainKind::Rectangle, bounds)
    }

    pub fn unit_interval() -> Self {
        Self::interval(0.0, 1.0).expect("valid")
    }

    pub fn kind(&self) -> DomainKind {
        self.kind
    }

    pub fn bounds(&self) -> &[(f64, f64)] {
        &self.bounds
    }

    pub fn dim(&self) -> usize {
        self.bounds.len()
    }

    pub fn volume(&self) -> f64 {
        self.bounds.iter().map(|(lo, hi)| hi - lo).product()
    }

    pub fn center(&self) -> Vec<f64> {
        self.bounds.iter().map(|(lo, hi)| 0.5 * (lo + hi)).collect()
    }

    pub(crate) fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: x.len(),
            });
        }
        Ok(())
    }

    pub fn contains(&self, x: &[f64]) -> Result<bool> {
        self.check_dim(x)?;
        Ok(self.contains_unchecked(x))
    }

    #[inline]
    pub(crate) fn contains_unchecked(&self, x: &[f64]) -> bool {
        self.bounds
            .iter()
            .zip(x)
            .all(|(&(lo, hi), &xi)| lo < xi && xi < hi)
    }

    /// Euclidean distance to the complement; zero outside the domain.
    pub fn dist_to_boundary(&self, x: &[f64]) -> Result<f64> {
        self.check_dim(x)?;
        if !self.contains_unchecked(x) {
            return Ok(0.0);
        }
        Ok(self
            .bounds
            .iter()
            .zip(x)
            .map(|(&(lo, hi), &xi)| (xi - lo).min(hi - xi))
            .fold(f64::INFINITY, f64::min))
    }

    pub fn eigen(&self) -> SpectralData {
        SpectralData::new(self)
    }
}

/// Principal Dirichlet eigenpair of `-(1/2)Δ` with `sup φ = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralData {
    pub lambda1: f64,
    pub phi_mass: f64,
    pub phi2_mass: f64,
    axes: Vec<(f64, f64)>,
}

impl SpectralData {
    fn new(domain: &DomainSpec) -> Self {
        let axes: Vec<(f64, f64)> = domain.bounds().iter().map(|&(lo, hi)| (lo, hi - lo)).collect();
        let lambda1 = axes.iter().map(|&(_, l)| PI * PI / (2.0 * l * l)).sum();
        let phi_mass = axes.iter().map(|&(_, l)| 2.0 * l / PI).product();
        let phi2_mass = axes.iter().map(|&(_, l)| 0.5 * l).product();
        Self {
            lambda1,
            phi_mass,
            phi2_mass,
            axes,
        }
    }

    /// Product of `sin(π (x_i - lo_i) / L_i)`; clamped to zero outside.
    pub fn phi(&self, x: &[f64]) -> f64 {
        self.axes
            .iter()
            .zip(x)
            .map(|(&(lo, l), &xi)| {
                let u = (xi - lo) / l;
                if u <= 0.0 || u >= 1.0 {
                    0.0
                } else {
                    (PI * u).sin()
                }
            })
            .product()
    }

    /// `∇ log φ`, the drift of the conditioned-forever process.
    pub fn log_phi_gradient(&self, x: &[f64]) -> Vec<f64> {
        self.axes
            .iter()
            .zip(x)
            .map(|(&(lo, l), &xi)| {
                let u = PI * (xi - lo) / l;
                PI / l * u.cos() / u.sin()
            })
            .collect()
    }
}
