//! Labels, dynamical historical processes and the spine, rebuilt from the
//! event log by walking it backwards.

mod path;
mod store;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use path::{CarrierSegment, LineagePath};
pub use store::PathStore;

/// One boundary hit: `dying` jumps onto the position of `target`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    pub time: f64,
    pub dying: usize,
    pub target: usize,
    pub landing: Vec<f64>,
    /// Position on the boundary just before the jump.
    pub exit: Vec<f64>,
}

impl EventRecord {
    /// `landing - exit`.
    pub fn displacement(&self) -> Vec<f64> {
        self.landing.iter().zip(&self.exit).map(|(a, b)| a - b).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenealogyLog {
    pub n: usize,
    pub horizon: f64,
    pub dim: usize,
    pub events: Vec<EventRecord>,
}

fn slack(t: f64) -> f64 {
    1e-12 * t.abs().max(1.0)
}

impl GenealogyLog {
    pub fn new(n: usize, horizon: f64, dim: usize) -> Self {
        Self {
            n,
            horizon,
            dim,
            events: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// Number of events with time `<= t`.
    pub fn events_until(&self, t: f64) -> usize {
        let t = t + slack(t);
        self.events.partition_point(|e| e.time <= t)
    }

    pub fn check_particle(&self, i: usize) -> Result<()> {
        if i >= self.n {
            return Err(Error::IndexOutOfRange { index: i, n: self.n });
        }
        Ok(())
    }

    pub fn check_time(&self, t: f64) -> Result<()> {
        if !(t >= 0.0 && t <= self.horizon + slack(self.horizon)) {
            return Err(Error::TimeOutOfRange {
                time: t,
                horizon: self.horizon,
            });
        }
        Ok(())
    }

    /// Checks ordering, index ranges and coordinate counts.
    pub fn validate(&self) -> Result<()> {
        let mut prev = f64::NEG_INFINITY;
        for (k, e) in self.events.iter().enumerate() {
            if !(e.time > prev) {
                return Err(Error::InvalidArgument(format!("event {k}: time {} not after {prev}", e.time)));
            }
            prev = e.time;
            self.check_particle(e.dying)?;
            self.check_particle(e.target)?;
            if e.dying == e.target {
                return Err(Error::InvalidArgument(format!("event {k}: particle jumps onto itself")));
            }
            if e.landing.len() != self.dim || e.exit.len() != self.dim {
                return Err(Error::DimensionMismatch {
                    expected: self.dim,
                    got: e.landing.len(),
                });
            }
        }
        self.check_time(prev.max(0.0))
    }
}

/// Label of a particle: `(particle, event index)` pairs, event indices
/// counted from 1 with 0 for the initial entry.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelSequence {
    pub entries: Vec<(usize, usize)>,
}

impl LabelSequence {
    /// Particle sequence with consecutive repeats collapsed.
    pub fn carriers(&self) -> Vec<usize> {
        let mut out: Vec<usize> = Vec::new();
        for &(a, _) in &self.entries {
            if out.last() != Some(&a) {
                out.push(a);
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpineEstimate {
    pub path: LineagePath,
    pub coalescence_time: f64,
    pub complete: bool,
}

/// Carrier segments of the lineage of `(ell, t)`, in forward time order.
pub fn carrier_segments(log: &GenealogyLog, ell: usize, t: f64) -> Result<Vec<CarrierSegment>> {
    log.check_particle(ell)?;
    log.check_time(t)?;
    let mut segments = Vec::new();
    let (mut current, mut upper) = (ell, t);
    for e in log.events[..log.events_until(t)].iter().rev() {
        if e.dying == current {
            segments.push(CarrierSegment {
                start: e.time,
                end: upper,
                particle: current,
            });
            upper = e.time;
            current = e.target;
        }
    }
    segments.push(CarrierSegment {
        start: 0.0,
        end: upper,
        particle: current,
    });
    segments.reverse();
    Ok(segments)
}

/// Particle carrying the lineage of `(ell, t)` at time `s <= t`.
pub fn lineage_carrier(log: &GenealogyLog, ell: usize, t: f64, s: f64) -> Result<usize> {
    log.check_particle(ell)?;
    log.check_time(t)?;
    let upto = log.events_until(t);
    // at an event time the dier already carries the lineage
    let first = log.events[..upto].partition_point(|e| e.time <= s);
    let mut current = ell;
    for e in log.events[first..upto].iter().rev() {
        if e.dying == current {
            current = e.target;
        }
    }
    Ok(current)
}

/// Dynamical historical process of particle `ell` seen from time `t`, on the
/// stored grid up to `t`.
pub fn dhp(log: &GenealogyLog, store: &PathStore, ell: usize, t: f64) -> Result<LineagePath> {
    let segments = carrier_segments(log, ell, t)?;
    store.check_particle(ell)?;
    let frames = store.frames_until(t);
    let dim = store.dim();
    let mut values = Vec::with_capacity(frames * dim);
    let mut seg = 0;
    for k in 0..frames {
        let s = store.times()[k];
        while seg + 1 < segments.len() && segments[seg + 1].start <= s {
            seg += 1;
        }
        values.extend_from_slice(store.position(k, segments[seg].particle));
    }
    Ok(LineagePath::new(store.times()[..frames].to_vec(), dim, values, segments))
}

/// Label of particle `i` at time `s`.
pub fn labels(log: &GenealogyLog, i: usize, s: f64) -> Result<LabelSequence> {
    log.check_particle(i)?;
    log.check_time(s)?;
    let mut entries = Vec::new();
    let mut current = i;
    let upto = log.events_until(s);
    for (k, e) in log.events[..upto].iter().enumerate().rev() {
        if e.target == current {
            entries.push((current, k + 1));
        } else if e.dying == current {
            entries.push((current, k + 1));
            current = e.target;
        }
    }
    entries.push((current, 0));
    entries.reverse();
    Ok(LabelSequence { entries })
}

/// Time-0 ancestor of every particle's lineage seen from time `t`.
pub fn ancestors(log: &GenealogyLog, t: f64) -> Result<Vec<usize>> {
    log.check_time(t)?;
    let mut root: Vec<usize> = (0..log.n).collect();
    for e in &log.events[..log.events_until(t)] {
        root[e.dying] = root[e.target];
    }
    Ok(root)
}

/// Largest time up to which all lineages seen from the horizon coincide;
/// zero when they never merge.
pub fn coalescence_time(log: &GenealogyLog) -> f64 {
    let mut active = vec![true; log.n];
    let mut count = log.n;
    for e in log.events[..log.events_until(log.horizon)].iter().rev() {
        if !active[e.dying] {
            continue;
        }
        active[e.dying] = false;
        if active[e.target] {
            count -= 1;
        } else {
            active[e.target] = true;
        }
        if count == 1 {
            return e.time;
        }
    }
    0.0
}

/// Common ancestral prefix of all lineages seen from the horizon.
pub fn spine(log: &GenealogyLog, store: &PathStore) -> Result<SpineEstimate> {
    let tc = coalescence_time(log);
    if tc <= 0.0 {
        return Ok(SpineEstimate {
            path: LineagePath::new(Vec::new(), store.dim(), Vec::new(), Vec::new()),
            coalescence_time: 0.0,
            complete: false,
        });
    }
    let full = dhp(log, store, 0, log.horizon)?;
    Ok(SpineEstimate {
        path: full.restrict(tc),
        coalescence_time: tc,
        complete: true,
    })
}

/// Branch points charged to each time-0 ancestor through the target's lineage.
pub fn branch_counts(log: &GenealogyLog) -> Vec<usize> {
    let mut root: Vec<usize> = (0..log.n).collect();
    let mut counts = vec![0; log.n];
    for e in &log.events {
        counts[root[e.target]] += 1;
        root[e.dying] = root[e.target];
    }
    counts
}

pub fn branch_count(log: &GenealogyLog, k: usize) -> Result<usize> {
    log.check_particle(k)?;
    Ok(branch_counts(log)[k])
}

/// Event times at which the spine's carrier received a jump.
pub fn spine_branch_times(spine: &SpineEstimate, log: &GenealogyLog) -> Result<Vec<f64>> {
    if !spine.complete {
        return Err(Error::IncompleteSpine);
    }
    let upto = log.events_until(spine.coalescence_time);
    Ok(log.events[..upto]
        .iter()
        .filter(|e| spine.path.carrier_before(e.time) == Some(e.target))
        .map(|e| e.time)
        .collect())
}
