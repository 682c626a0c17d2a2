//! Brownian increments with a Brownian-bridge exit correction.
//!
//! A step that ends inside the domain can still have left it in between. For
//! a straight barrier at distances `d1` (start) and `d2` (end) the bridge
//! crossing probability is `exp(-2 d1 d2 / dt)`. Coordinates of a rectangle
//! are independent, so per-axis survival probabilities multiply. When an
//! axis is narrower than `6 sqrt(dt)` the two barriers interact and the exact
//! image-series survival of the bridge is used instead.

use serde::{Deserialize, Serialize};

use super::RngStream;
use crate::error::{Error, Result};
use crate::geometry::DomainSpec;

/// Exponents beyond this give `exp(-a) == 0` in f64.
const EXP_CUTOFF: f64 = 745.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Lower,
    Upper,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Face {
    pub axis: usize,
    pub side: Side,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub new_position: Vec<f64>,
    pub exited: bool,
    pub exit_face: Option<Face>,
}

pub fn gaussian_increment(rng: &mut RngStream, dt: f64, d: usize) -> Vec<f64> {
    let mut out = vec![0.0; d];
    gaussian_increment_into(rng, dt, &mut out);
    out
}

#[inline]
pub fn gaussian_increment_into(rng: &mut RngStream, dt: f64, out: &mut [f64]) {
    let sd = dt.sqrt();
    for v in out.iter_mut() {
        *v = sd * rng.standard_normal();
    }
}

#[inline]
fn single_barrier(d1: f64, d2: f64, dt: f64) -> f64 {
    let a = 2.0 * d1 * d2 / dt;
    if a > EXP_CUTOFF {
        0.0
    } else {
        (-a).exp()
    }
}

/// Probability that a Brownian bridge on `(lo, hi)` from `x` to `y` over `dt`
/// stays inside, by the image series.
fn bridge_survival_two_barrier(lo: f64, hi: f64, x: f64, y: f64, dt: f64) -> f64 {
    let (u, v, l) = (x - lo, y - lo, hi - lo);
    let w = v - u;
    let term = |z: f64| {
        let a = (z * z - w * w) / (2.0 * dt);
        if a > EXP_CUTOFF {
            0.0
        } else {
            (-a).exp()
        }
    };
    let mut s = 1.0 - term(v + u);
    let mut k = 1.0;
    loop {
        let shift = 2.0 * k * l;
        let add = term(w + shift) + term(w - shift) - term(v + u + shift) - term(v + u - shift);
        s += add;
        if add.abs() < 1e-17 && k >= 2.0 || k > 10_000.0 {
            break;
        }
        k += 1.0;
    }
    s.clamp(0.0, 1.0)
}

/// Per-axis exit probabilities split between the lower and upper face.
#[inline]
fn axis_exit(lo: f64, hi: f64, x: f64, y: f64, dt: f64) -> (f64, f64) {
    let p_lo = single_barrier(x - lo, y - lo, dt);
    let p_hi = single_barrier(hi - x, hi - y, dt);
    if p_lo == 0.0 && p_hi == 0.0 {
        return (0.0, 0.0);
    }
    if hi - lo < 6.0 * dt.sqrt() {
        let q = 1.0 - bridge_survival_two_barrier(lo, hi, x, y, dt);
        let share = p_lo / (p_lo + p_hi);
        (q * share, q * (1.0 - share))
    } else {
        // survival (1 - p_lo)(1 - p_hi); the cross term goes to the lower face
        (p_lo, p_hi * (1.0 - p_lo))
    }
}

/// Probability that Brownian motion bridged from `x` to `y` over `dt` leaves
/// the domain.
pub fn crossing_probability(x: &[f64], y: &[f64], dt: f64, domain: &DomainSpec) -> f64 {
    if !domain.contains_unchecked(x) || !domain.contains_unchecked(y) {
        return 1.0;
    }
    let survival: f64 = domain
        .bounds()
        .iter()
        .zip(x.iter().zip(y))
        .map(|(&(lo, hi), (&xi, &yi))| {
            let (a, b) = axis_exit(lo, hi, xi, yi, dt);
            1.0 - a - b
        })
        .product();
    (1.0 - survival).clamp(0.0, 1.0)
}

/// Advances `x` in place by one bridge-corrected Brownian step. Returns the
/// exit face if the step left the domain, in which case `x` is moved onto
/// that face. `incr` is scratch space of length `d`.
#[inline]
pub(crate) fn step_in_place(
    rng: &mut RngStream,
    x: &mut [f64],
    incr: &mut [f64],
    dt: f64,
    domain: &DomainSpec,
    corrected: bool,
) -> Option<Face> {
    gaussian_increment_into(rng, dt, incr);
    let bounds = domain.bounds();

    // endpoint outside: pick the face with the largest overshoot
    let mut worst: Option<(f64, Face)> = None;
    for (axis, (&(lo, hi), (&xi, &di))) in bounds.iter().zip(x.iter().zip(incr.iter())).enumerate() {
        let yi = xi + di;
        let over = if yi <= lo {
            Some((lo - yi, Side::Lower))
        } else if yi >= hi {
            Some((yi - hi, Side::Upper))
        } else {
            None
        };
        if let Some((o, side)) = over {
            if worst.map_or(true, |(w, _)| o > w) {
                worst = Some((o, Face { axis, side }));
            }
        }
    }
    if let Some((_, face)) = worst {
        for (xi, di) in x.iter_mut().zip(incr.iter()) {
            *xi += di;
        }
        project_onto_face(x, bounds, face);
        return Some(face);
    }

    if corrected {
        let mut survival = 1.0;
        let mut any = false;
        for (&(lo, hi), (&xi, &di)) in bounds.iter().zip(x.iter().zip(incr.iter())) {
            let (a, b) = axis_exit(lo, hi, xi, xi + di, dt);
            if a > 0.0 || b > 0.0 {
                any = true;
                survival *= 1.0 - a - b;
            }
        }
        if any && rng.uniform() < 1.0 - survival {
            let face = sample_face(rng, x, incr, dt, bounds);
            for (xi, di) in x.iter_mut().zip(incr.iter()) {
                *xi += di;
            }
            project_onto_face(x, bounds, face);
            return Some(face);
        }
    }
    for (xi, di) in x.iter_mut().zip(incr.iter()) {
        *xi += di;
    }
    None
}

fn sample_face(rng: &mut RngStream, x: &[f64], incr: &[f64], dt: f64, bounds: &[(f64, f64)]) -> Face {
    let weights: Vec<(f64, Face)> = bounds
        .iter()
        .enumerate()
        .flat_map(|(axis, &(lo, hi))| {
            let (a, b) = axis_exit(lo, hi, x[axis], x[axis] + incr[axis], dt);
            [
                (a, Face { axis, side: Side::Lower }),
                (b, Face { axis, side: Side::Upper }),
            ]
        })
        .collect();
    let total: f64 = weights.iter().map(|w| w.0).sum();
    let mut u = rng.uniform() * total;
    for &(w, face) in &weights {
        if u < w {
            return face;
        }
        u -= w;
    }
    weights
        .iter()
        .rev()
        .find(|w| w.0 > 0.0)
        .map(|w| w.1)
        .unwrap_or(Face { axis: 0, side: Side::Lower })
}

fn project_onto_face(x: &mut [f64], bounds: &[(f64, f64)], face: Face) {
    for (xi, &(lo, hi)) in x.iter_mut().zip(bounds) {
        *xi = xi.clamp(lo, hi);
    }
    let (lo, hi) = bounds[face.axis];
    x[face.axis] = match face.side {
        Side::Lower => lo,
        Side::Upper => hi,
    };
}

/// One Brownian step of length `dt` from `x`, flagged as exited if the
/// endpoint is outside or, otherwise, with the bridge crossing probability.
pub fn bm_step(rng: &mut RngStream, x: &[f64], dt: f64, domain: &DomainSpec) -> Result<StepResult> {
    if !(dt > 0.0) {
        return Err(Error::NonPositiveTime(dt));
    }
    if !domain.contains(x)? {
        return Err(Error::OutsideDomain(x.to_vec()));
    }
    let mut pos = x.to_vec();
    let mut incr = vec![0.0; x.len()];
    let face = step_in_place(rng, &mut pos, &mut incr, dt, domain, true);
    Ok(StepResult {
        new_position: pos,
        exited: face.is_some(),
        exit_face: face,
    })
}

/// Same as [`bm_step`] but only flags exits whose endpoint is outside.
pub fn bm_step_uncorrected(rng: &mut RngStream, x: &[f64], dt: f64, domain: &DomainSpec) -> Result<StepResult> {
    if !(dt > 0.0) {
        return Err(Error::NonPositiveTime(dt));
    }
    if !domain.contains(x)? {
        return Err(Error::OutsideDomain(x.to_vec()));
    }
    let mut pos = x.to_vec();
    let mut incr = vec![0.0; x.len()];
    let face = step_in_place(rng, &mut pos, &mut incr, dt, domain, false);
    Ok(StepResult {
        new_position: pos,
        exited: face.is_some(),
        exit_face: face,
    })
}
