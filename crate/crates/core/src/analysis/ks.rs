use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use super::EmpiricalSample;
use crate::error::{Error, Result};

pub const DEFAULT_LEVEL: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub statistic: f64,
    pub sample_size: usize,
    pub threshold: f64,
    pub pass: bool,
}

impl FitReport {
    pub fn new(statistic: f64, sample_size: usize, threshold: f64) -> Self {
        Self {
            statistic,
            sample_size,
            threshold,
            pass: statistic < threshold,
        }
    }
}

/// Asymptotic one-sample KS critical value `sqrt(-ln(level/2)/2) / sqrt(n)`.
pub fn ks_critical_value(n: usize, level: f64) -> f64 {
    (-(level / 2.0).ln() / 2.0).sqrt() / (n as f64).sqrt()
}

/// Sup distance between the empirical CDF of `sample` and `cdf`.
pub fn ks_statistic<F: Fn(f64) -> f64>(sample: &[f64], cdf: F) -> f64 {
    let mut xs = sample.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max)
}

fn weighted_ks<F: Fn(f64) -> f64>(values: &[f64], weights: &[f64], cdf: F) -> f64 {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut below = 0.0;
    let mut d: f64 = 0.0;
    for i in idx {
        let f = cdf(values[i]);
        let above = below + weights[i];
        d = d.max((f - below).abs()).max((above - f).abs());
        below = above;
    }
    d
}

/// One-sample KS test of a one-dimensional sample at level `level`.
pub fn ks_distance<F: Fn(f64) -> f64>(sample: &EmpiricalSample, cdf: F, level: f64) -> Result<FitReport> {
    if sample.is_empty() {
        return Err(Error::EmptySample(sample.label.clone()));
    }
    if sample.dim != 1 {
        return Err(Error::DimensionMismatch {
            expected: 1,
            got: sample.dim,
        });
    }
    let n = sample.len();
    let stat = match &sample.weights {
        Some(w) => weighted_ks(&sample.values, w, cdf),
        None => ks_statistic(&sample.values, cdf),
    };
    Ok(FitReport::new(stat, n, ks_critical_value(n, level)))
}

/// Pearson chi-square goodness of fit. Returns the statistic and p-value.
pub fn chi_square(observed: &[usize], probabilities: &[f64]) -> Result<(f64, f64)> {
    if observed.len() != probabilities.len() || observed.len() < 2 {
        return Err(Error::InvalidArgument("need matching bins, at least two".into()));
    }
    let total: usize = observed.iter().sum();
    if total == 0 {
        return Err(Error::EmptySample("chi-square".into()));
    }
    let mass: f64 = probabilities.iter().sum();
    let stat = observed
        .iter()
        .zip(probabilities)
        .map(|(&o, &p)| {
            let e = total as f64 * p / mass;
            (o as f64 - e).powi(2) / e
        })
        .sum::<f64>();
    let dist = ChiSquared::new((observed.len() - 1) as f64).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    Ok((stat, 1.0 - dist.cdf(stat)))
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use super::*;

    fn phi2_cdf(y: f64) -> f64 {
        y - (2.0 * PI * y).sin() / (2.0 * PI)
    }

    #[test]
    fn critical_values() {
        assert!((ks_critical_value(10_000, 0.01) - 0.0163).abs() < 5e-5);
        assert!((ks_critical_value(1000, 0.01) - 0.0515).abs() < 5e-4);
    }

    #[test]
    fn plug_in_quantiles_fit_perfectly() {
        let n = 500;
        let xs: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5) / n as f64).collect();
        let d = ks_statistic(&xs, |x| x.clamp(0.0, 1.0));
        assert!(d <= 1.0 / n as f64 + 1e-15);
    }

    #[test]
    fn degenerate_sample_is_far() {
        let s = EmpiricalSample::scalar(vec![0.1; 100], "deg");
        let r = ks_distance(&s, phi2_cdf, DEFAULT_LEVEL).unwrap();
        assert!(r.statistic >= 0.9);
        assert!(!r.pass);
    }

    #[test]
    fn monotone_reparameterization_invariant() {
        let xs: Vec<f64> = (1..200).map(|i| ((i * 37) % 199) as f64 / 199.0).collect();
        let a = ks_statistic(&xs, |x| x * x);
        let ys: Vec<f64> = xs.iter().map(|x| x.powi(3)).collect();
        let b = ks_statistic(&ys, |y| y.cbrt().powi(2));
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn uniform_weights_match_unweighted() {
        let xs: Vec<f64> = (0..50).map(|i| ((i * 13) % 50) as f64 / 50.0).collect();
        let mut s = EmpiricalSample::scalar(xs.clone(), "w");
        s.weights = Some(vec![1.0 / 50.0; 50]);
        let a = ks_distance(&s, |x| x, 0.01).unwrap().statistic;
        assert!((a - ks_statistic(&xs, |x| x)).abs() < 1e-12);
    }

    #[test]
    fn empty_sample_errors() {
        assert!(ks_distance(&EmpiricalSample::scalar(vec![], "e"), |x| x, 0.01).is_err());
    }

    #[test]
    fn chi_square_examples() {
        let (s, p) = chi_square(&[25, 25, 25, 25], &[0.25; 4]).unwrap();
        assert_eq!(s, 0.0);
        assert!((p - 1.0).abs() < 1e-12);
        let (_, p) = chi_square(&[100, 0], &[0.5, 0.5]).unwrap();
        assert!(p < 1e-10);
        assert!(chi_square(&[1], &[1.0]).is_err());
    }
}
