//! The n-particle Fleming-Viot system: independent Brownian steps, killing at
//! the boundary and a uniform jump onto another particle.

mod config;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::genealogy::{EventRecord, GenealogyLog, PathStore};
use crate::sampler::{step_in_place, RngStream};

pub use config::{EngineConfig, InitialMeasure};

/// Abort after this many nested dt/10 refinements of one step.
pub const MAX_REFINEMENTS: usize = 60;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParticleSystemState {
    pub time: f64,
    pub dim: usize,
    /// Row-major, `dim` coordinates per particle.
    pub positions: Vec<f64>,
    pub jump_count: usize,
}

impl ParticleSystemState {
    pub fn n(&self) -> usize {
        self.positions.len() / self.dim
    }

    pub fn position(&self, i: usize) -> &[f64] {
        &self.positions[i * self.dim..(i + 1) * self.dim]
    }

    pub fn points(&self) -> impl Iterator<Item = &[f64]> {
        self.positions.chunks_exact(self.dim)
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub log: GenealogyLog,
    pub snapshots: Vec<ParticleSystemState>,
    pub store: PathStore,
    pub final_state: ParticleSystemState,
}

/// Owns the random streams of one replica.
#[derive(Debug, Clone)]
pub struct Engine {
    config: EngineConfig,
    rngs: Vec<RngStream>,
    control: RngStream,
    incr: Vec<f64>,
    scratch: Vec<f64>,
    // (particle, offset into `pre`) for particles flagged in the current step
    exited: Vec<(usize, usize)>,
    pre: Vec<f64>,
    pending: Vec<bool>,
}

impl Engine {
    pub fn new(config: EngineConfig) -> Result<Self> {
        config.validate()?;
        let n = config.n;
        let d = config.domain.dim();
        let rngs = (0..n as u64)
            .map(|i| RngStream::for_particle(config.seed, config.replica, i))
            .collect();
        let control = RngStream::control(config.seed, config.replica);
        Ok(Self {
            config,
            rngs,
            control,
            incr: vec![0.0; d],
            scratch: vec![0.0; d],
            exited: Vec::new(),
            pre: Vec::new(),
            pending: vec![false; n],
        })
    }

    pub fn config(&self) -> &EngineConfig {
        &self.config
    }

    /// Draws the initial configuration from the particle streams.
    pub fn init(&mut self) -> (ParticleSystemState, GenealogyLog) {
        let d = self.config.domain.dim();
        let n = self.config.n;
        let mut positions = vec![0.0; n * d];
        for (i, out) in positions.chunks_exact_mut(d).enumerate() {
            self.config.initial.draw(i, &mut self.rngs[i], out);
        }
        let state = ParticleSystemState {
            time: 0.0,
            dim: d,
            positions,
            jump_count: 0,
        };
        (state, GenealogyLog::new(n, self.config.horizon, d))
    }

    /// Advances the system by one step of length `dt`.
    pub fn step(&mut self, state: &mut ParticleSystemState, log: &mut GenealogyLog) -> Result<()> {
        let t0 = state.time;
        let t1 = t0 + self.config.dt;
        if t1 > self.config.horizon * (1.0 + 1e-9) {
            return Err(Error::TimeOutOfRange {
                time: t1,
                horizon: self.config.horizon,
            });
        }
        self.advance(state, log, t0, t1, 0)?;
        state.time = t1;
        Ok(())
    }

    fn advance(
        &mut self,
        state: &mut ParticleSystemState,
        log: &mut GenealogyLog,
        t0: f64,
        t1: f64,
        depth: usize,
    ) -> Result<()> {
        if depth > MAX_REFINEMENTS {
            return Err(Error::RefinementAbort(depth));
        }
        let d = state.dim;
        let n = self.config.n;
        let dt = t1 - t0;
        let domain = &self.config.domain;
        let corrected = self.config.bridge_correction;
        self.exited.clear();
        self.pre.clear();
        for (i, x) in state.positions.chunks_exact_mut(d).enumerate() {
            self.scratch.copy_from_slice(x);
            if step_in_place(&mut self.rngs[i], x, &mut self.incr, dt, domain, corrected).is_some() {
                self.exited.push((i, self.pre.len()));
                self.pre.extend_from_slice(&self.scratch);
            }
        }
        let m = self.exited.len();
        if m == 0 {
            return Ok(());
        }
        if m == n {
            for &(i, off) in &self.exited {
                state.positions[i * d..(i + 1) * d].copy_from_slice(&self.pre[off..off + d]);
            }
            for j in 0..10 {
                let a = t0 + dt * j as f64 / 10.0;
                let b = if j == 9 { t1 } else { t0 + dt * (j + 1) as f64 / 10.0 };
                self.advance(state, log, a, b, depth + 1)?;
            }
            return Ok(());
        }

        for k in (1..m).rev() {
            let j = self.control.below(k + 1);
            self.exited.swap(k, j);
        }
        for &(i, _) in &self.exited {
            self.pending[i] = true;
        }
        for j in 0..m {
            let (i, _) = self.exited[j];
            let mut u = self.control.below(n - 1);
            if u >= i {
                u += 1;
            }
            // a target that exits later in this step is still alive now
            let landing: Vec<f64> = if self.pending[u] {
                let off = self.exited.iter().find(|e| e.0 == u).expect("pending particle is listed").1;
                self.pre[off..off + d].to_vec()
            } else {
                state.positions[u * d..(u + 1) * d].to_vec()
            };
            let exit = state.positions[i * d..(i + 1) * d].to_vec();
            state.positions[i * d..(i + 1) * d].copy_from_slice(&landing);
            self.pending[i] = false;
            let time = if j + 1 == m { t1 } else { t0 + dt * (j + 1) as f64 / m as f64 };
            log.events.push(EventRecord {
                time,
                dying: i,
                target: u,
                landing,
                exit,
            });
            state.jump_count += 1;
        }
        Ok(())
    }
}

/// Draws the initial state of replica `config.replica`.
pub fn init(config: &EngineConfig) -> Result<(ParticleSystemState, GenealogyLog)> {
    Ok(Engine::new(config.clone())?.init())
}

/// Runs one replica to the horizon.
pub fn run(config: &EngineConfig) -> Result<RunOutput> {
    let mut engine = Engine::new(config.clone())?;
    let (mut state, mut log) = engine.init();
    let steps = config.steps();
    let dt = config.dt;
    let every = config.storage_every;
    let snap_steps: Vec<usize> = config.snapshot_times.iter().map(|&s| (s / dt).round() as usize).collect();
    let mut next_snap = 0;
    let mut snapshots = Vec::with_capacity(snap_steps.len());
    let mut store = PathStore::new(config.n, config.domain.dim());

    let mut record = |k: usize, state: &ParticleSystemState, store: &mut PathStore, snapshots: &mut Vec<_>| {
        if k % every == 0 || k == steps {
            store.push(state.time, &state.positions);
        }
        while next_snap < snap_steps.len() && snap_steps[next_snap] == k {
            snapshots.push(state.clone());
            next_snap += 1;
        }
    };
    record(0, &state, &mut store, &mut snapshots);
    for k in 1..=steps {
        engine.advance(&mut state, &mut log, (k - 1) as f64 * dt, k as f64 * dt, 0)?;
        state.time = k as f64 * dt;
        record(k, &state, &mut store, &mut snapshots);
    }
    Ok(RunOutput {
        log,
        snapshots,
        store,
        final_state: state,
    })
}

/// Increments of the driving Brownian motion of `particle` over the storage
/// grid: position increments minus the jump displacements inside each
/// interval. Row-major, `dim` coordinates per interval.
pub fn driver_increments(log: &GenealogyLog, store: &PathStore, particle: usize) -> Result<Vec<f64>> {
    store.check_particle(particle)?;
    let d = store.dim();
    let times = store.times();
    let mut out = Vec::with_capacity(times.len().saturating_sub(1) * d);
    let mut e = 0;
    for k in 1..times.len() {
        let (a, b) = (store.position(k - 1, particle), store.position(k, particle));
        let mut inc: Vec<f64> = b.iter().zip(a).map(|(y, x)| y - x).collect();
        while e < log.events.len() && log.events[e].time <= times[k] {
            let ev = &log.events[e];
            if ev.dying == particle && ev.time > times[k - 1] {
                for (v, j) in inc.iter_mut().zip(ev.displacement()) {
                    *v -= j;
                }
            }
            e += 1;
        }
        out.extend_from_slice(&inc);
    }
    Ok(out)
}
