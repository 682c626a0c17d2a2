use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sampler::RngStream;

const BOOTSTRAP_RESAMPLES: usize = 1000;

/// Branch counts of one replica over its measurement window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BranchObservation {
    /// Branch points on the spine.
    pub spine_branches: usize,
    /// Length of the window the spine was observed on.
    pub spine_time: f64,
    /// Jumps received, summed over all particles.
    pub generic_branches: usize,
    /// Particle-time exposure, `n` times the window length.
    pub generic_time: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchRateReport {
    pub spine_rate: f64,
    pub generic_rate: f64,
    /// `None` when the generic rate is zero.
    pub ratio: Option<f64>,
    pub ci_low: Option<f64>,
    pub ci_high: Option<f64>,
}

fn rates(obs: &[BranchObservation], idx: impl Iterator<Item = usize>) -> (f64, f64) {
    let (mut sb, mut st, mut gb, mut gt) = (0.0, 0.0, 0.0, 0.0);
    for i in idx {
        let o = &obs[i];
        sb += o.spine_branches as f64;
        st += o.spine_time;
        gb += o.generic_branches as f64;
        gt += o.generic_time;
    }
    (sb / st, gb / gt)
}

/// Ratio of the branching rate along spines to the per-particle rate, with
/// a percentile bootstrap interval over replicas.
pub fn spine_branch_rate(obs: &[BranchObservation], seed: u64) -> Result<BranchRateReport> {
    if obs.is_empty() || obs.iter().any(|o| !(o.spine_time > 0.0 && o.generic_time > 0.0)) {
        return Err(Error::EmptySample("branch-rate window".into()));
    }
    let (spine_rate, generic_rate) = rates(obs, 0..obs.len());
    if generic_rate == 0.0 {
        return Ok(BranchRateReport {
            spine_rate,
            generic_rate,
            ratio: None,
            ci_low: None,
            ci_high: None,
        });
    }
    let mut rng = RngStream::new(seed, 0);
    let mut boot: Vec<f64> = (0..BOOTSTRAP_RESAMPLES)
        .filter_map(|_| {
            let idx: Vec<usize> = (0..obs.len()).map(|_| rng.below(obs.len())).collect();
            let (s, g) = rates(obs, idx.into_iter());
            (g > 0.0).then(|| s / g)
        })
        .collect();
    boot.sort_by(f64::total_cmp);
    let pick = |q: f64| boot[((q * boot.len() as f64) as usize).min(boot.len() - 1)];
    Ok(BranchRateReport {
        spine_rate,
        generic_rate,
        ratio: Some(spine_rate / generic_rate),
        ci_low: Some(pick(0.025)),
        ci_high: Some(pick(0.975)),
    })
}
