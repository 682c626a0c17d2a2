//! The acceptance criteria as runnable checks. Each check returns a
//! [`CriterionResult`] made of named gates with the measured statistic.

use std::f64::consts::PI;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{
    ks_critical_value, ks_statistic, replica_gap, sin2_cdf, sin_cdf, spine_branch_rate, vanishing_exponent,
    villemonais_gap, BranchObservation, BranchRateReport, ReplicaGap, VillemonaisReport, DEFAULT_LEVEL,
};
use crate::engine::{run, EngineConfig, InitialMeasure};
use crate::error::{Error, Result};
use crate::genealogy::{
    ancestors, branch_counts, dhp, labels, spine, spine_branch_times, GenealogyLog, PathStore,
};
use crate::geometry::quadrature::{simpson, tensor_simpson};
use crate::geometry::{pullback_path, DomainSpec, KernelEvaluator};
use crate::sampler::{bm_step, bm_step_uncorrected, h_process_step, stream_id, GridDensity, RngStream, CONTROL_INDEX};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Gate {
    pub name: String,
    pub statistic: f64,
    /// Human-readable acceptance region, e.g. `< 0.0515`.
    pub threshold: String,
    pub pass: bool,
}

impl Gate {
    pub fn below(name: &str, statistic: f64, limit: f64) -> Self {
        Self {
            name: name.to_string(),
            statistic,
            threshold: format!("< {limit}"),
            pass: statistic < limit,
        }
    }

    pub fn above(name: &str, statistic: f64, limit: f64) -> Self {
        Self {
            name: name.to_string(),
            statistic,
            threshold: format!("> {limit}"),
            pass: statistic > limit,
        }
    }

    pub fn within(name: &str, statistic: f64, lo: f64, hi: f64) -> Self {
        Self {
            name: name.to_string(),
            statistic,
            threshold: format!("in [{lo}, {hi}]"),
            pass: (lo..=hi).contains(&statistic),
        }
    }

    /// A gate that could not be evaluated.
    pub fn failed(name: &str, reason: &str) -> Self {
        Self {
            name: name.to_string(),
            statistic: f64::NAN,
            threshold: reason.to_string(),
            pass: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionResult {
    pub id: u32,
    pub title: String,
    pub gates: Vec<Gate>,
    pub notes: Vec<String>,
    pub seconds: f64,
}

impl CriterionResult {
    fn new(id: u32, title: &str) -> Self {
        Self {
            id,
            title: title.to_string(),
            gates: Vec::new(),
            notes: Vec::new(),
            seconds: 0.0,
        }
    }

    pub fn pass(&self) -> bool {
        !self.gates.is_empty() && self.gates.iter().all(|g| g.pass)
    }

    /// One line: `PASS [4] title: gate=stat (threshold); ...`.
    pub fn line(&self) -> String {
        let gates: Vec<String> = self
            .gates
            .iter()
            .map(|g| format!("{}={:.4e} ({}){}", g.name, g.statistic, g.threshold, if g.pass { "" } else { " FAIL" }))
            .collect();
        format!(
            "{} [{}] {} ({:.1}s): {}",
            if self.pass() { "PASS" } else { "FAIL" },
            self.id,
            self.title,
            self.seconds,
            gates.join("; ")
        )
    }
}

fn timed<F: FnOnce(&mut CriterionResult) -> Result<()>>(id: u32, title: &str, f: F) -> Result<CriterionResult> {
    let start = Instant::now();
    let mut r = CriterionResult::new(id, title);
    f(&mut r)?;
    r.seconds = start.elapsed().as_secs_f64();
    Ok(r)
}

fn pool(parallelism: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(parallelism.max(1))
        .build()
        .map_err(|e| Error::InvalidArgument(e.to_string()))
}

/// Runs `f` on replicas `0..count` and returns results in replica order.
pub fn map_replicas<T, F>(count: usize, parallelism: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64) -> Result<T> + Sync + Send,
{
    pool(parallelism)?.install(|| (0..count as u64).into_par_iter().map(&f).collect())
}

fn unit() -> DomainSpec {
    DomainSpec::unit_interval()
}

fn square() -> DomainSpec {
    DomainSpec::rectangle(vec![(0.0, 1.0), (0.0, 1.0)]).expect("valid")
}

/// Panels per axis for the two-dimensional quadratures.
const SQUARE_PANELS: usize = 512;

/// Criterion 1: `∫ ĥp_t(x, y) dy = 1` and spectral/image agreement.
pub fn kernel_identities() -> Result<CriterionResult> {
    timed(1, "kernel identities", |r| {
        let mut worst_h: f64 = 0.0;
        let ke = KernelEvaluator::new(&unit());
        for &t in &[0.1, 1.0, 5.0] {
            for i in 1..=9 {
                let x = i as f64 / 10.0;
                let mass = simpson(|y| if y <= 0.0 || y >= 1.0 { 0.0 } else { ke.h_kernel_unchecked(t, &[x], &[y]) }, 0.0, 1.0, 2048);
                worst_h = worst_h.max((mass - 1.0).abs());
            }
        }
        let ke2 = KernelEvaluator::new(&square());
        let grid = [0.25, 0.5, 0.75];
        for &t in &[0.1, 1.0, 5.0] {
            for &a in &grid {
                for &b in &grid {
                    let x = [a, b];
                    let mass = tensor_simpson(&[(0.0, 1.0), (0.0, 1.0)], SQUARE_PANELS, |y| {
                        if y.iter().any(|&v| v <= 0.0 || v >= 1.0) {
                            0.0
                        } else {
                            ke2.h_kernel_unchecked(t, &x, y)
                        }
                    });
                    worst_h = worst_h.max((mass - 1.0).abs());
                }
            }
        }
        r.gates.push(Gate::below("h_mass_error", worst_h, 1e-8));

        let mut worst_series: f64 = 0.0;
        let times: Vec<f64> = (0..=24).map(|k| 0.05 * (400f64).powf(k as f64 / 24.0)).collect();
        for &t in &times {
            for i in 1..=21 {
                for j in 1..=21 {
                    let (x, y) = (i as f64 / 22.0, j as f64 / 22.0);
                    let a = ke.heat_kernel_image(t, &[x], &[y])?;
                    let b = ke.heat_kernel_spectral(t, &[x], &[y])?;
                    worst_series = worst_series.max((a - b).abs());
                }
            }
        }
        r.gates.push(Gate::below("image_vs_spectral", worst_series, 1e-10));
        Ok(())
    })
}

/// Criterion 2: long-time conditioned density and bridge-marginal ratios.
pub fn long_time_density() -> Result<CriterionResult> {
    timed(2, "long-time conditioned density", |r| {
        let ke = KernelEvaluator::new(&unit());
        let mut worst: f64 = 0.0;
        for &t in &[5.0, 8.0, 12.0, 20.0] {
            let cond = ke.conditioned(t, &[0.5])?;
            for j in 1..100 {
                let y = j as f64 / 100.0;
                let limit = 0.5 * PI * (PI * y).sin();
                worst = worst.max((cond.density(&[y])? / limit - 1.0).abs());
            }
        }
        r.gates.push(Gate::below("sup_rel_error", worst, 0.01));

        let pins: Vec<f64> = (1..=9).map(|i| i as f64 / 10.0).collect();
        let mut dev: f64 = 0.0;
        for &x in &[0.2, 0.5, 0.8] {
            for j in 1..50 {
                let y = j as f64 / 50.0;
                let vals: Vec<f64> = pins
                    .iter()
                    .map(|&v| ke.bridge_marginal(8.0, 1.0, &[x], &[v], &[y]))
                    .collect::<Result<_>>()?;
                let (lo, hi) = vals.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &v| (a.min(v), b.max(v)));
                dev = dev.max(hi / lo - 1.0);
            }
        }
        r.gates.push(Gate::below("bridge_ratio_dev", dev, 0.01));
        Ok(())
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VillemonaisParams {
    pub n_values: Vec<usize>,
    pub replicas: usize,
    pub t: f64,
    pub dt: f64,
    pub window: (f64, f64),
    pub seed: u64,
    pub parallelism: usize,
}

impl VillemonaisParams {
    pub fn standard(dt: f64, parallelism: usize) -> Self {
        Self {
            n_values: vec![50, 100, 200, 400, 800],
            replicas: 200,
            t: 1.0,
            dt,
            window: (0.4, 0.6),
            seed: 20_240_301,
            parallelism,
        }
    }
}

impl VillemonaisParams {
    pub fn engine(&self) -> EngineConfig {
        EngineConfig::new(
            self.n_values[0],
            self.t,
            self.dt,
            unit(),
            InitialMeasure::uniform_interval(0.25, 0.75, 0.01),
            self.seed,
        )
    }
}

pub fn villemonais_data(p: &VillemonaisParams) -> Result<VillemonaisReport> {
    villemonais_with(&p.engine(), &p.n_values, p.replicas, p.window, p.parallelism)
}

/// Gap data for each population size in `n_values`; `base` supplies the
/// domain, initial law, horizon `t`, step and seed. The indicator window
/// `[a, b]` is applied on every axis.
pub fn villemonais_with(
    base: &EngineConfig,
    n_values: &[usize],
    replicas: usize,
    window: (f64, f64),
    parallelism: usize,
) -> Result<VillemonaisReport> {
    let ke = KernelEvaluator::new(&base.domain);
    let d = base.domain.dim();
    let (lower, upper) = (vec![window.0; d], vec![window.1; d]);
    let t = base.horizon;
    let mut data = Vec::new();
    for (k, &n) in n_values.iter().enumerate() {
        let mut base = base.clone().with_snapshots(vec![0.0, t]);
        base.n = n;
        let gaps: Vec<ReplicaGap> = map_replicas(replicas, parallelism, |r| {
            let mut c = base.clone().with_replica(r + (k * replicas) as u64);
            c.storage_every = c.steps();
            let out = run(&c)?;
            replica_gap(&ke, t, out.snapshots[0].points(), out.snapshots[1].points(), &lower, &upper)
        })?;
        data.push((n, gaps));
    }
    villemonais_gap(&data)
}

/// Criterion 3: `n^{-1/2}` decay of the empirical-measure error.
pub fn villemonais_decay(p: &VillemonaisParams) -> Result<(CriterionResult, VillemonaisReport)> {
    let start = Instant::now();
    let rep = villemonais_data(p)?;
    let mut r = villemonais_gates(&rep, p.dt);
    r.seconds = start.elapsed().as_secs_f64();
    Ok((r, rep))
}

pub fn villemonais_gates(rep: &VillemonaisReport, dt: f64) -> CriterionResult {
    let mut r = CriterionResult::new(3, &format!("Villemonais n^-1/2 decay (dt={dt})"));
    r.gates.push(Gate::within("slope", rep.slope, -0.65, -0.35));
    for row in &rep.rows {
        r.gates.push(Gate {
            name: format!("gap_n{}", row.n),
            statistic: row.mean_gap,
            threshold: format!("<= {:.6} + 3SE ({:.6})", row.bound, 3.0 * row.se),
            pass: row.below_bound,
        });
    }
    r
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpineParams {
    pub n: usize,
    pub horizon: f64,
    pub dt: f64,
    pub replicas: usize,
    pub query_time: f64,
    pub seed: u64,
    pub parallelism: usize,
    pub storage_every: usize,
}

impl SpineParams {
    pub fn standard(dt: f64, parallelism: usize) -> Self {
        Self {
            n: 200,
            horizon: 12.0,
            dt,
            replicas: 1000,
            query_time: 6.0,
            seed: 20_240_302,
            parallelism,
            storage_every: 10,
        }
    }

    pub fn engine(&self) -> EngineConfig {
        let mut c = EngineConfig::new(
            self.n,
            self.horizon,
            self.dt,
            unit(),
            InitialMeasure::uniform_interval(0.25, 0.75, 0.01),
            self.seed,
        );
        c.storage_every = self.storage_every;
        c
    }
}

/// What one replica contributes to the spine study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpineReplica {
    pub replica: u64,
    pub coalescence_time: f64,
    /// Spine position and carrier at the query time, when the spine reaches it.
    pub spine: Option<(Vec<f64>, usize)>,
    pub tagged: (Vec<f64>, usize),
    pub tagged_index: usize,
    pub events: usize,
    pub branch: Option<BranchObservation>,
}

/// Particle tagged uniformly in replica `replica`, from its own stream.
pub fn tagged_particle(seed: u64, replica: u64, n: usize) -> usize {
    RngStream::new(seed, stream_id(replica, CONTROL_INDEX - 1)).below(n)
}

pub fn spine_replica(config: &EngineConfig, query: f64) -> Result<SpineReplica> {
    let out = run(config)?;
    let sp = spine(&out.log, &out.store)?;
    let tc = sp.coalescence_time;
    let at = |p: &crate::genealogy::LineagePath| -> Option<(Vec<f64>, usize)> {
        Some((p.value_at(query)?.to_vec(), p.carrier_at(query)?))
    };
    let spine_sample = if sp.complete && tc >= query { at(&sp.path) } else { None };
    let tag = tagged_particle(config.seed, config.replica, config.n);
    let tagged = at(&dhp(&out.log, &out.store, tag, config.horizon)?).ok_or(Error::IncompleteSpine)?;
    let branch = if sp.complete {
        Some(BranchObservation {
            spine_branches: spine_branch_times(&sp, &out.log)?.len(),
            spine_time: tc,
            generic_branches: out.log.events_until(tc),
            generic_time: config.n as f64 * tc,
        })
    } else {
        None
    };
    Ok(SpineReplica {
        replica: config.replica,
        coalescence_time: tc,
        spine: spine_sample,
        tagged,
        tagged_index: tag,
        events: out.log.len(),
        branch,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpineStudy {
    pub base: EngineConfig,
    pub query_time: f64,
    pub replicas: Vec<SpineReplica>,
}

impl SpineStudy {
    /// First coordinate of the retained spine samples.
    pub fn spine_samples(&self) -> Vec<f64> {
        self.replicas.iter().filter_map(|r| r.spine.as_ref().map(|s| s.0[0])).collect()
    }

    /// First coordinate of the tagged-lineage samples.
    pub fn tagged_samples(&self) -> Vec<f64> {
        self.replicas.iter().map(|r| r.tagged.0[0]).collect()
    }

    /// Bounds of the first axis.
    pub fn axis(&self) -> (f64, f64) {
        self.base.domain.bounds()[0]
    }

    pub fn retention(&self) -> f64 {
        self.spine_samples().len() as f64 / self.replicas.len() as f64
    }

    pub fn branch_rate(&self) -> Result<BranchRateReport> {
        let obs: Vec<BranchObservation> = self.replicas.iter().filter_map(|r| r.branch).collect();
        spine_branch_rate(&obs, self.base.seed)
    }
}

pub fn spine_study(p: &SpineParams) -> Result<SpineStudy> {
    spine_study_with(&p.engine(), p.replicas, p.query_time, p.parallelism)
}

pub fn spine_study_with(base: &EngineConfig, replicas: usize, query_time: f64, parallelism: usize) -> Result<SpineStudy> {
    base.validate()?;
    if query_time > base.horizon / 2.0 + 1e-12 {
        return Err(Error::Config("spine query time must not exceed T/2".into()));
    }
    let replicas = map_replicas(replicas, parallelism, |r| spine_replica(&base.clone().with_replica(r), query_time))?;
    Ok(SpineStudy {
        base: base.clone(),
        query_time,
        replicas,
    })
}

fn ks_gate_below(name: &str, sample: &[f64], cdf: impl Fn(f64) -> f64, size_for_threshold: usize, level: f64) -> Gate {
    if sample.is_empty() {
        return Gate::failed(name, "no samples");
    }
    Gate::below(name, ks_statistic(sample, cdf), ks_critical_value(size_for_threshold, level))
}

fn ks_gate_above(name: &str, sample: &[f64], cdf: impl Fn(f64) -> f64, limit: f64) -> Gate {
    if sample.is_empty() {
        return Gate::failed(name, "no samples");
    }
    Gate::above(name, ks_statistic(sample, cdf), limit)
}

/// Criterion 4: spine marginal against `2 sin²(πy)`.
pub fn spine_marginal(study: &SpineStudy, level: f64) -> CriterionResult {
    let mut r = CriterionResult::new(4, &format!("spine marginal (dt={})", study.base.dt));
    let s = study.spine_samples();
    let (lo, hi) = study.axis();
    // the critical value is pinned at the nominal replica count
    r.gates.push(ks_gate_below("ks_spine_vs_sin2", &s, |y| sin2_cdf(lo, hi, y), study.replicas.len(), level));
    r.gates.push(Gate::above("retention", study.retention(), 0.95 - 1e-12));
    let tcs: Vec<f64> = study.replicas.iter().map(|x| x.coalescence_time).collect();
    let mean_tc = tcs.iter().sum::<f64>() / tcs.len().max(1) as f64;
    r.notes.push(format!(
        "retained {}/{} replicas with coalescence time >= {}; mean coalescence time {mean_tc:.4}",
        s.len(),
        study.replicas.len(),
        study.query_time
    ));
    match study.branch_rate() {
        Ok(b) => r.notes.push(format!(
            "spine branch rate {:.4}, generic {:.4}, ratio {:?} CI [{:?}, {:?}]",
            b.spine_rate, b.generic_rate, b.ratio, b.ci_low, b.ci_high
        )),
        Err(e) => r.notes.push(format!("branch rate: {e}")),
    }
    r
}

/// Criterion 5: the spine is not a uniformly chosen lineage.
pub fn spine_vs_tagged(study: &SpineStudy, level: f64) -> CriterionResult {
    let mut r = CriterionResult::new(5, &format!("spine differs from tagged lineage (dt={})", study.base.dt));
    let s = study.spine_samples();
    let g = study.tagged_samples();
    let (lo, hi) = study.axis();
    r.gates.push(ks_gate_above("ks_spine_vs_sin", &s, |y| sin_cdf(lo, hi, y), 0.10));
    r.gates.push(ks_gate_below("ks_tagged_vs_sin", &g, |y| sin_cdf(lo, hi, y), study.replicas.len(), level));
    r.gates.push(ks_gate_above("ks_tagged_vs_sin2", &g, |y| sin2_cdf(lo, hi, y), 0.10));
    r
}

fn exponent_gate(name: &str, sample: &[f64], axis: (f64, f64), lo: f64, hi: f64) -> Gate {
    let dist: Vec<f64> = sample.iter().map(|&x| (x - axis.0).min(axis.1 - x)).collect();
    match vanishing_exponent(&dist) {
        Ok(e) => Gate::within(name, e, lo, hi),
        Err(e) => Gate::failed(name, &e.to_string()),
    }
}

/// Criterion 6: density exponents near the boundary.
pub fn boundary_exponents(study: &SpineStudy) -> CriterionResult {
    let mut r = CriterionResult::new(6, &format!("boundary vanishing exponents (dt={})", study.base.dt));
    let (lo, hi) = study.axis();
    r.gates.push(exponent_gate("spine_exponent", &study.spine_samples(), (lo, hi), 1.6, 2.4));
    r.gates.push(exponent_gate("tagged_exponent", &study.tagged_samples(), (lo, hi), 0.7, 1.3));
    let w = 0.05 * (hi - lo);
    let near = |xs: &[f64]| xs.iter().filter(|&&x| (x - lo).min(hi - x) <= w).count() as f64 / xs.len().max(1) as f64;
    r.notes.push(format!(
        "occupation within {w}: spine {:.4} (kernel {:.4}), tagged {:.4} (kernel {:.4})",
        near(&study.spine_samples()),
        2.0 * sin2_cdf(lo, hi, lo + w),
        near(&study.tagged_samples()),
        2.0 * sin_cdf(lo, hi, lo + w)
    ));
    r
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurvivalGuard {
    pub series: f64,
    pub corrected: f64,
    pub uncorrected: f64,
    pub se_corrected: f64,
    pub se_uncorrected: f64,
}

pub fn survival_estimates(trials: usize, dt: f64, seed: u64, parallelism: usize) -> Result<SurvivalGuard> {
    let d = unit();
    let steps = (1.0 / dt).round() as usize;
    let alive = map_replicas(trials, parallelism, |i| {
        let mut out = [true, true];
        for (k, corrected) in [true, false].into_iter().enumerate() {
            let mut rng = RngStream::new(seed, stream_id(i, k as u64));
            let mut x = vec![0.5];
            for _ in 0..steps {
                let s = if corrected {
                    bm_step(&mut rng, &x, dt, &d)?
                } else {
                    bm_step_uncorrected(&mut rng, &x, dt, &d)?
                };
                if s.exited {
                    out[k] = false;
                    break;
                }
                x = s.new_position;
            }
        }
        Ok(out)
    })?;
    let frac = |k: usize| alive.iter().filter(|a| a[k]).count() as f64 / trials as f64;
    let se = |p: f64| (p * (1.0 - p) / trials as f64).sqrt();
    let (c, u) = (frac(0), frac(1));
    Ok(SurvivalGuard {
        series: KernelEvaluator::new(&d).survival(1.0, &[0.5])?,
        corrected: c,
        uncorrected: u,
        se_corrected: se(c),
        se_uncorrected: se(u),
    })
}

/// Criterion 7: the bridge correction removes the discrete-monitoring bias.
pub fn discretization_guard(trials: usize, seed: u64, parallelism: usize) -> Result<CriterionResult> {
    let start = Instant::now();
    let mut r = guard_gates(&survival_estimates(trials, 1e-3, seed, parallelism)?);
    r.seconds = start.elapsed().as_secs_f64();
    Ok(r)
}

pub fn guard_gates(g: &SurvivalGuard) -> CriterionResult {
    let mut r = CriterionResult::new(7, "discretization bias guard");
    r.gates.push(Gate::below("corrected_z", (g.corrected - g.series).abs() / g.se_corrected, 3.0));
    r.gates.push(Gate::above("uncorrected_z", (g.uncorrected - g.series) / g.se_uncorrected, 3.0));
    r.notes.push(format!(
        "series {:.6}, corrected {:.6}, uncorrected {:.6}",
        g.series, g.corrected, g.uncorrected
    ));
    r
}

/// Draws from `2 sin²(πx)` and then chains `steps` h-process steps.
pub fn h_chain(steps: usize, dt: f64, seed: u64) -> Result<Vec<f64>> {
    let ke = KernelEvaluator::new(&unit());
    let mut rng = RngStream::new(seed, 0);
    let start = GridDensity::tabulate(0.0, 1.0, 4096, |y| 2.0 * (PI * y).sin().powi(2));
    let mut x = vec![start.quantile(rng.uniform()).clamp(1e-9, 1.0 - 1e-9)];
    let mut out = Vec::with_capacity(steps);
    for _ in 0..steps {
        x = h_process_step(&mut rng, &ke, &x, dt)?;
        out.push(x[0]);
    }
    Ok(out)
}

/// Criterion 8: the h-process keeps `2 sin²` invariant.
pub fn h_stationarity(seed: u64) -> Result<CriterionResult> {
    timed(8, "h-process stationarity", |r| {
        let xs = h_chain(10_000, 0.5, seed)?;
        r.gates.push(Gate::below("ks", ks_statistic(&xs, |y| sin2_cdf(0.0, 1.0, y)), 0.0163));
        Ok(())
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CouplingCheck {
    pub replica: u64,
    pub max_diff: f64,
    pub same_times: bool,
    pub same_carriers: bool,
    pub spine_len: usize,
}

/// Spine pulled back from `D` against the spine of the pulled-back paths.
pub fn coupling_check(config: &EngineConfig, a: f64) -> Result<CouplingCheck> {
    let out = run(config)?;
    let s_d = spine(&out.log, &out.store)?;
    if !s_d.complete {
        return Err(Error::IncompleteSpine);
    }
    let pulled = pullback_path(&s_d.path, a)?;
    let inv = 1.0 / a;
    let store_u = out.store.map_values(|v| if a == 1.0 { v } else { v.powf(inv) });
    let s_u = spine(&out.log, &store_u)?;
    let max_diff = pulled
        .values()
        .iter()
        .zip(s_u.path.values())
        .map(|(p, q)| (p - q).abs())
        .fold(if pulled.len() == s_u.path.len() { 0.0 } else { f64::INFINITY }, f64::max);
    Ok(CouplingCheck {
        replica: config.replica,
        max_diff,
        same_times: pulled.times() == s_u.path.times(),
        same_carriers: pulled.carrier() == s_u.path.carrier(),
        spine_len: pulled.len(),
    })
}

/// Criterion 9: exact coupling under `x(u) = u^2`.
pub fn transform_coupling(seed: u64) -> Result<CriterionResult> {
    timed(9, "transform coupling", |r| {
        let base = EngineConfig::new(10, 10.0, 1e-3, unit(), InitialMeasure::uniform_interval(0.25, 0.75, 0.01), seed);
        let mut checks = Vec::new();
        for rep in 0..50 {
            match coupling_check(&base.clone().with_replica(rep), 2.0) {
                Ok(c) => checks.push(c),
                Err(Error::IncompleteSpine) => continue,
                Err(e) => return Err(e),
            }
            if checks.len() == 5 {
                break;
            }
        }
        if checks.is_empty() {
            r.gates.push(Gate::failed("max_diff", "no complete spine"));
            return Ok(());
        }
        let worst = checks.iter().map(|c| c.max_diff).fold(0.0, f64::max);
        r.gates.push(Gate::below("max_diff", worst, 1e-12));
        let consistent = checks.iter().all(|c| c.same_times && c.same_carriers && c.spine_len > 0);
        r.gates.push(Gate::above("grid_and_carrier_match", f64::from(u8::from(consistent)), 0.5));
        r.notes.push(format!("{} coupled spines compared", checks.len()));
        Ok(())
    })
}

/// Structural checks on one run; returns the names of violated invariants.
pub fn structural_violations(log: &GenealogyLog, store: &PathStore, domain: &DomainSpec) -> Result<Vec<String>> {
    let mut bad = Vec::new();
    if log.validate().is_err() {
        bad.push("event ordering".to_string());
    }
    for k in 0..store.len() {
        let frame = store.frame(k);
        if frame.len() != log.n * store.dim() || !frame.chunks_exact(store.dim()).all(|x| domain.contains_unchecked(x)) {
            bad.push(format!("population at t={}", store.times()[k]));
            break;
        }
    }
    if branch_counts(log).iter().sum::<usize>() != log.len() {
        bad.push("branch partition".to_string());
    }
    let horizon = log.horizon;
    let sp = spine(log, store)?;
    let mut prev_roots = usize::MAX;
    for ell in 0..log.n {
        let d = dhp(log, store, ell, horizon)?;
        let lab = labels(log, ell, horizon)?;
        let carriers: Vec<usize> = d.carrier().iter().map(|c| c.particle).collect();
        if carriers != lab.carriers() {
            bad.push(format!("label/dhp mismatch for {ell}"));
        }
        if sp.complete {
            let prefix = sp.path.len();
            if d.values()[..prefix * d.dim()] != *sp.path.values() {
                bad.push(format!("spine prefix for {ell}"));
            }
        }
    }
    for k in 0..store.len() {
        let mut roots = ancestors(log, store.times()[k])?;
        roots.sort_unstable();
        roots.dedup();
        if roots.len() > prev_roots {
            bad.push("coalescence monotonicity".to_string());
            break;
        }
        prev_roots = roots.len();
    }
    Ok(bad)
}

/// Criterion 10: invariants over a batch of small runs plus determinism of
/// the aggregated output across worker counts.
pub fn structural_suite(seed: u64) -> Result<CriterionResult> {
    timed(10, "structural invariants", |r| {
        let mut violations = Vec::new();
        let domains = [unit(), DomainSpec::rectangle(vec![(0.0, 1.0), (0.0, 2.0)])?];
        for (k, domain) in domains.iter().enumerate() {
            let initial = match k {
                0 => InitialMeasure::uniform_interval(0.25, 0.75, 0.01),
                _ => InitialMeasure::UniformOnBox {
                    lower: vec![0.25, 0.5],
                    upper: vec![0.75, 1.5],
                    margin: 0.01,
                },
            };
            for rep in 0..10 {
                let c = EngineConfig::new(30, 3.0, 1e-3, domain.clone(), initial.clone(), seed).with_replica(rep);
                let out = run(&c)?;
                violations.extend(structural_violations(&out.log, &out.store, domain)?);
            }
        }
        r.gates.push(Gate::below("invariant_violations", violations.len() as f64, 0.5));
        for v in violations.iter().take(5) {
            r.notes.push(v.clone());
        }

        let p = SpineParams {
            n: 20,
            horizon: 4.0,
            dt: 1e-3,
            replicas: 8,
            query_time: 2.0,
            seed,
            parallelism: 1,
            storage_every: 10,
        };
        let serial = serde_json::to_string(&spine_study(&p)?)?;
        let parallel = serde_json::to_string(&spine_study(&SpineParams { parallelism: 4, ..p })?)?;
        r.gates.push(Gate::below("parallel_mismatch", f64::from(u8::from(serial != parallel)), 0.5));
        Ok(())
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scope {
    /// Criteria that finish in seconds.
    Quick,
    /// Everything, including the long simulation studies.
    Full,
}

/// Runs the suite and reports each criterion through `emit` as soon as it
/// is done.
pub fn run_suite<F: FnMut(&CriterionResult)>(scope: Scope, parallelism: usize, mut emit: F) -> Result<Vec<CriterionResult>> {
    let mut all = Vec::new();
    let mut push = |r: CriterionResult, all: &mut Vec<CriterionResult>| {
        emit(&r);
        all.push(r);
    };
    push(kernel_identities()?, &mut all);
    push(long_time_density()?, &mut all);
    if scope == Scope::Full {
        for dt in [1e-4, 2e-4] {
            push(villemonais_decay(&VillemonaisParams::standard(dt, parallelism))?.0, &mut all);
            let start = Instant::now();
            let study = spine_study(&SpineParams::standard(dt, parallelism))?;
            let secs = start.elapsed().as_secs_f64();
            for mut c in [
                spine_marginal(&study, DEFAULT_LEVEL),
                spine_vs_tagged(&study, DEFAULT_LEVEL),
                boundary_exponents(&study),
            ] {
                c.seconds = secs;
                push(c, &mut all);
            }
        }
    }
    push(discretization_guard(100_000, 20_240_307, parallelism)?, &mut all);
    push(h_stationarity(20_240_308)?, &mut all);
    push(transform_coupling(20_240_309)?, &mut all);
    push(structural_suite(20_240_310)?, &mut all);
    Ok(all)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gate_comparisons() {
        assert!(Gate::below("a", 0.1, 0.2).pass);
        assert!(!Gate::above("a", 0.1, 0.2).pass);
        assert!(Gate::within("a", -0.5, -0.65, -0.35).pass);
        assert!(!Gate::failed("a", "no data").pass);
        let mut c = CriterionResult::new(1, "x");
        assert!(!c.pass());
        c.gates.push(Gate::below("a", 0.1, 0.2));
        assert!(c.pass());
        assert!(c.line().starts_with("PASS [1]"));
    }

    #[test]
    fn tagged_particle_is_deterministic_and_in_range() {
        for r in 0..50 {
            let a = tagged_particle(1, r, 7);
            assert_eq!(a, tagged_particle(1, r, 7));
            assert!(a < 7);
        }
    }

    #[test]
    fn small_spine_study_runs() {
        let p = SpineParams {
            n: 10,
            horizon: 4.0,
            dt: 1e-3,
            replicas: 4,
            query_time: 2.0,
            seed: 3,
            parallelism: 2,
            storage_every: 10,
        };
        let s = spine_study(&p).unwrap();
        assert_eq!(s.replicas.len(), 4);
        assert!(s.tagged_samples().iter().all(|&x| x > 0.0 && x < 1.0));
        assert!(spine_study(&SpineParams { query_time: 3.0, ..p }).is_err());
    }
}
