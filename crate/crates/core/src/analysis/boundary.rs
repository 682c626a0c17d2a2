use crate::error::{Error, Result};
use crate::genealogy::LineagePath;
use crate::geometry::DomainSpec;

/// Samples must have at least this many points within
/// [`NEAR_BOUNDARY_WIDTH`] of the face.
pub const NEAR_BOUNDARY_MIN: usize = 1000;
pub const NEAR_BOUNDARY_WIDTH: f64 = 0.2;

/// Fraction of `grid` times at which the path is within `threshold` of the
/// boundary.
pub fn boundary_occupation(path: &LineagePath, domain: &DomainSpec, threshold: f64, grid: &[f64]) -> Result<f64> {
    if grid.is_empty() {
        return Err(Error::EmptySample("occupation grid".into()));
    }
    let (first, last) = match (path.times().first(), path.times().last()) {
        (Some(&a), Some(&b)) => (a, b),
        _ => return Err(Error::EmptySample("path".into())),
    };
    let mut hits = 0;
    for &s in grid {
        if s < first || s > last + 1e-9 * last.abs().max(1.0) {
            return Err(Error::TimeOutOfRange { time: s, horizon: last });
        }
        let x = path.value_at(s).expect("inside path range");
        if domain.dist_to_boundary(x)? <= threshold {
            hits += 1;
        }
    }
    Ok(hits as f64 / grid.len() as f64)
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(Error::InvalidArgument("need at least two matching points".into()));
    }
    if xs.iter().chain(ys).any(|&v| !(v > 0.0)) {
        return Err(Error::InvalidArgument("log-log fit needs positive data".into()));
    }
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    Ok(linear_fit(&lx, &ly).0)
}

/// Ordinary least squares `y = a x + b`; returns `(a, b)`.
pub(crate) fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// Density exponent near a face from distances to that face: the log-log
/// slope of the empirical CDF of the distance, minus one.
pub fn vanishing_exponent(distances: &[f64]) -> Result<f64> {
    let mut near: Vec<f64> = distances
        .iter()
        .copied()
        .filter(|&r| r > 0.0 && r <= NEAR_BOUNDARY_WIDTH)
        .collect();
    if near.len() < NEAR_BOUNDARY_MIN {
        return Err(Error::Insufficient(format!(
            "{} samples within {NEAR_BOUNDARY_WIDTH} of the face, need {NEAR_BOUNDARY_MIN}",
            near.len()
        )));
    }
    near.sort_by(f64::total_cmp);
    let total = distances.len() as f64;
    // skip the noisiest lowest order statistics
    let skip = 10.min(near.len() / 10);
    let (xs, ys): (Vec<f64>, Vec<f64>) = near
        .iter()
        .enumerate()
        .skip(skip)
        .map(|(k, &r)| (r, (k + 1) as f64 / total))
        .unzip();
    Ok(loglog_slope(&xs, &ys)? - 1.0)
}
