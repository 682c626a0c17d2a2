use serde::{Deserialize, Serialize};

use super::boundary::linear_fit;
use super::mean_se;
use crate::error::{Error, Result};
use crate::geometry::KernelEvaluator;

/// `2(1 + √2)`.
pub const VILLEMONAIS_CONSTANT: f64 = 2.0 * (1.0 + std::f64::consts::SQRT_2);

/// One replica's contribution at one population size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReplicaGap {
    /// `|H_t^n(f) - Ẽ_t(f)|`.
    pub gap: f64,
    /// `P_{μ_n}(τ > t)^{-2}` for the replica's initial empirical measure.
    pub inverse_survival_sq: f64,
}

/// Gap for an indicator of the box `[lower, upper]`, with the reference
/// computed from kernels started at the replica's own initial points.
pub fn replica_gap<'a, I, J>(
    ke: &KernelEvaluator,
    t: f64,
    initial: I,
    final_positions: J,
    lower: &[f64],
    upper: &[f64],
) -> Result<ReplicaGap>
where
    I: IntoIterator<Item = &'a [f64]>,
    J: IntoIterator<Item = &'a [f64]>,
{
    let (mut mass, mut surv, mut n0) = (0.0, 0.0, 0usize);
    for x in initial {
        mass += ke.box_mass(t, x, lower, upper)?;
        surv += ke.survival(t, x)?;
        n0 += 1;
    }
    if n0 == 0 {
        return Err(Error::EmptySample("initial positions".into()));
    }
    let inside = |y: &[f64]| y.iter().zip(lower.iter().zip(upper)).all(|(v, (a, b))| a <= v && v <= b);
    let (mut hits, mut n1) = (0usize, 0usize);
    for y in final_positions {
        hits += usize::from(inside(y));
        n1 += 1;
    }
    if n1 == 0 {
        return Err(Error::EmptySample("final positions".into()));
    }
    let survival = surv / n0 as f64;
    Ok(ReplicaGap {
        gap: (hits as f64 / n1 as f64 - mass / surv).abs(),
        inverse_survival_sq: survival.powi(-2),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapRow {
    pub n: usize,
    pub mean_gap: f64,
    pub se: f64,
    pub bound: f64,
    pub below_bound: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VillemonaisReport {
    pub rows: Vec<GapRow>,
    pub slope: f64,
    pub intercept: f64,
    pub constant: f64,
}

impl VillemonaisReport {
    pub fn all_below_bound(&self) -> bool {
        self.rows.iter().all(|r| r.below_bound)
    }
}

/// Mean gap per `n`, the log-log slope in `n`, and the check against
/// `2(1+√2) (E P(τ > t)^{-2})^{1/2} n^{-1/2}` with a 3 SE allowance.
pub fn villemonais_gap(data: &[(usize, Vec<ReplicaGap>)]) -> Result<VillemonaisReport> {
    if data.len() < 3 {
        return Err(Error::Insufficient(format!("need at least 3 population sizes, got {}", data.len())));
    }
    let mut rows = Vec::with_capacity(data.len());
    for (n, reps) in data {
        if reps.is_empty() {
            return Err(Error::EmptySample(format!("n = {n}")));
        }
        let gaps: Vec<f64> = reps.iter().map(|r| r.gap).collect();
        let (mean_gap, se) = mean_se(&gaps);
        let moment = reps.iter().map(|r| r.inverse_survival_sq).sum::<f64>() / reps.len() as f64;
        let bound = VILLEMONAIS_CONSTANT * moment.sqrt() / (*n as f64).sqrt();
        let slack = if se.is_finite() { 3.0 * se } else { 0.0 };
        rows.push(GapRow {
            n: *n,
            mean_gap,
            se,
            bound,
            below_bound: mean_gap - slack <= bound,
        });
    }
    let lx: Vec<f64> = rows.iter().map(|r| (r.n as f64).ln()).collect();
    let ly: Vec<f64> = rows.iter().map(|r| r.mean_gap.ln()).collect();
    let (slope, intercept) = linear_fit(&lx, &ly);
    Ok(VillemonaisReport {
        rows,
        slope,
        intercept,
        constant: VILLEMONAIS_CONSTANT,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::DomainSpec;

    #[test]
    fn constant_value() {
        assert!((VILLEMONAIS_CONSTANT - 4.8284).abs() < 1e-4);
    }

    #[test]
    fn exact_power_law_recovers_slope() {
        let data: Vec<(usize, Vec<ReplicaGap>)> = [50, 100, 200, 400, 800]
            .iter()
            .map(|&n| {
                let g = ReplicaGap {
                    gap: 0.7 / (n as f64).sqrt(),
                    inverse_survival_sq: 1.0,
                };
                (n, vec![g; 4])
            })
            .collect();
        let r = villemonais_gap(&data).unwrap();
        assert!((r.slope + 0.5).abs() < 1e-12);
        assert!((r.intercept - 0.7f64.ln()).abs() < 1e-12);
        assert!(r.all_below_bound());
    }

    #[test]
    fn too_few_sizes() {
        let g = ReplicaGap {
            gap: 0.1,
            inverse_survival_sq: 1.0,
        };
        assert!(villemonais_gap(&[(10, vec![g]), (20, vec![g])]).is_err());
    }

    #[test]
    fn replica_gap_against_hand_computation() {
        let ke = KernelEvaluator::new(&DomainSpec::unit_interval());
        let init = [[0.5], [0.5]];
        let fin = [[0.45], [0.9]];
        let r = replica_gap(&ke, 1.0, init.iter().map(|p| &p[..]), fin.iter().map(|p| &p[..]), &[0.4], &[0.6]).unwrap();
        let s = ke.survival(1.0, &[0.5]).unwrap();
        let m = ke.box_mass(1.0, &[0.5], &[0.4], &[0.6]).unwrap();
        assert!((r.gap - (0.5 - m / s).abs()).abs() < 1e-14);
        assert!((r.inverse_survival_sq - s.powi(-2)).abs() < 1e-12);
    }
}
