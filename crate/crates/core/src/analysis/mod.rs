//! Functionals, goodness of fit, rate regressions and boundary/branch
//! diagnostics.

mod boundary;
mod branch;
pub mod ks;
mod villemonais;

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::genealogy::LineagePath;

pub use boundary::{boundary_occupation, loglog_slope, vanishing_exponent, NEAR_BOUNDARY_MIN, NEAR_BOUNDARY_WIDTH};
pub use branch::{spine_branch_rate, BranchObservation, BranchRateReport};
pub use ks::{chi_square, ks_critical_value, ks_distance, ks_statistic, FitReport, DEFAULT_LEVEL};
pub use villemonais::{replica_gap, villemonais_gap, GapRow, ReplicaGap, VillemonaisReport, VILLEMONAIS_CONSTANT};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalSample {
    /// Row-major, `dim` coordinates per point.
    pub values: Vec<f64>,
    pub dim: usize,
    pub weights: Option<Vec<f64>>,
    pub label: String,
}

impl EmpiricalSample {
    pub fn scalar(values: Vec<f64>, label: &str) -> Self {
        Self {
            values,
            dim: 1,
            weights: None,
            label: label.to_string(),
        }
    }

    pub fn len(&self) -> usize {
        self.values.len() / self.dim.max(1)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(w) = &self.weights {
            if w.len() != self.len() || w.iter().any(|&x| !(x >= 0.0)) {
                return Err(Error::InvalidArgument("weights must be nonnegative, one per point".into()));
            }
            if (w.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidArgument("weights must sum to 1".into()));
            }
        }
        Ok(())
    }
}

fn checked_mean<I: Iterator<Item = f64>>(values: I, label: &str) -> Result<f64> {
    let (mut sum, mut count) = (0.0, 0usize);
    for v in values {
        if !(v.abs() <= 1.0) {
            return Err(Error::InvalidArgument(format!("functional value {v} exceeds 1 in magnitude")));
        }
        sum += v;
        count += 1;
    }
    if count == 0 {
        return Err(Error::EmptySample(label.to_string()));
    }
    Ok(sum / count as f64)
}

/// `(1/n) Σ f(H^k)` over a set of historical paths.
pub fn empirical_functional<F: Fn(&LineagePath) -> f64>(paths: &[LineagePath], f: F) -> Result<f64> {
    checked_mean(paths.iter().map(f), "paths")
}

/// Endpoint version: `(1/n) Σ f(x_k)` over positions.
pub fn empirical_endpoint_functional<'a, I, F>(points: I, f: F) -> Result<f64>
where
    I: IntoIterator<Item = &'a [f64]>,
    F: Fn(&[f64]) -> f64,
{
    checked_mean(points.into_iter().map(f), "positions")
}

/// CDF of the density `2 sin²(π u) / L` on `(lo, hi)`.
pub fn sin2_cdf(lo: f64, hi: f64, y: f64) -> f64 {
    let u = ((y - lo) / (hi - lo)).clamp(0.0, 1.0);
    u - (2.0 * PI * u).sin() / (2.0 * PI)
}

/// CDF of the density `(π / 2L) sin(π u)` on `(lo, hi)`.
pub fn sin_cdf(lo: f64, hi: f64, y: f64) -> f64 {
    let u = ((y - lo) / (hi - lo)).clamp(0.0, 1.0);
    0.5 * (1.0 - (PI * u).cos())
}

/// Mean and standard error.
pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}
