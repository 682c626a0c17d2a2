use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::{ExperimentConfig, ExperimentKind};
use crate::acceptance::{
    boundary_exponents, coupling_check, guard_gates, h_stationarity, kernel_identities, long_time_density, map_replicas,
    spine_marginal, spine_study_with, spine_vs_tagged, structural_violations, survival_estimates, villemonais_gates,
    villemonais_with, CriterionResult, Gate,
};
use crate::engine::run;
use crate::error::{Error, Result};
use crate::genealogy::{spine, LineagePath};
use crate::geometry::KernelEvaluator;
use crate::sampler::stream_id;

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputFile {
    /// Relative to the output directory.
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateRecord {
    pub criterion: String,
    pub name: String,
    /// `None` when the gate could not be evaluated.
    pub statistic: Option<f64>,
    pub threshold: String,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoalescenceStats {
    pub query_time: f64,
    pub replicas: usize,
    /// Replicas with `coalescence_time >= query_time`.
    pub retained: usize,
    pub mean_coalescence_time: f64,
}

impl CoalescenceStats {
    fn from_times(times: &[f64], query_time: f64) -> Self {
        Self {
            query_time,
            replicas: times.len(),
            retained: times.iter().filter(|&&t| t >= query_time).count(),
            mean_coalescence_time: times.iter().sum::<f64>() / times.len().max(1) as f64,
        }
    }

    pub fn fraction(&self) -> f64 {
        self.retained as f64 / self.replicas.max(1) as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub experiment: ExperimentKind,
    /// SHA-256 of the config with the worker count and output directory
    /// blanked, so that neither affects the manifest.
    pub config_sha256: String,
    pub seed: u64,
    pub version: String,
    /// Base stream id of each replica; particle `i` adds `i`.
    pub stream_ids: Vec<u64>,
    pub outputs: Vec<OutputFile>,
    pub gates: Vec<GateRecord>,
    pub coalescence: Option<CoalescenceStats>,
    pub notes: Vec<String>,
}

impl RunManifest {
    pub fn pass(&self) -> bool {
        self.gates.iter().all(|g| g.pass)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::MissingFile(format!("{}: {e}", path.display())))?;
        Ok(serde_json::from_str(&text)?)
    }
}

pub fn config_hash(config: &ExperimentConfig) -> Result<String> {
    let mut c = config.clone();
    c.parallelism = 1;
    c.output_dir = PathBuf::new();
    let text = toml::to_string(&c).map_err(|e| Error::Config(e.to_string()))?;
    Ok(hex::encode(Sha256::digest(text.as_bytes())))
}

/// Floats in CSV files: 17 significant digits.
pub(crate) fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn coords(x: &[f64]) -> String {
    x.iter().map(|&v| num(v)).collect::<Vec<_>>().join(",")
}

fn coord_header(dim: usize) -> &'static str {
    ["x", "x,y", "x,y,z"].get(dim.wrapping_sub(1)).copied().unwrap_or("x")
}

struct Outputs {
    dir: PathBuf,
    files: Vec<OutputFile>,
}

impl Outputs {
    fn new(dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(dir)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        })
    }

    fn write(&mut self, name: &str, body: &str) -> Result<()> {
        std::fs::write(self.dir.join(name), body)?;
        self.files.push(OutputFile {
            path: name.to_string(),
            sha256: hex::encode(Sha256::digest(body.as_bytes())),
        });
        Ok(())
    }
}

fn gate_records(c: &CriterionResult) -> Vec<GateRecord> {
    c.gates.iter().map(|g| gate_record(&c.title, g)).collect()
}

fn gate_record(criterion: &str, g: &Gate) -> GateRecord {
    GateRecord {
        criterion: criterion.to_string(),
        name: g.name.clone(),
        statistic: g.statistic.is_finite().then_some(g.statistic),
        threshold: g.threshold.clone(),
        pass: g.pass,
    }
}

fn gates_csv(gates: &[GateRecord]) -> String {
    let mut s = String::from("criterion,gate,statistic,threshold,pass\n");
    for g in gates {
        let stat = g.statistic.map_or_else(|| "nan".to_string(), num);
        let _ = writeln!(s, "{},{},{stat},\"{}\",{}", g.criterion, g.name, g.threshold, g.pass);
    }
    s
}

fn path_csv(path: &LineagePath) -> String {
    let mut s = format!("time,{},carrier\n", coord_header(path.dim()));
    for (i, &t) in path.times().iter().enumerate() {
        let carrier = path.carrier_at(t).map_or(String::new(), |c| c.to_string());
        let _ = writeln!(s, "{},{},{carrier}", num(t), coords(path.value(i)));
    }
    s
}

struct Collected {
    gates: Vec<GateRecord>,
    coalescence: Option<CoalescenceStats>,
    notes: Vec<String>,
    stream_ids: Vec<u64>,
}

/// Runs the configured experiment, writes its data files and
/// `manifest.json` under `config.output_dir`, and returns the manifest.
/// Data files depend only on the config and seed, not on `parallelism`.
pub fn run_experiment(config: &ExperimentConfig) -> Result<RunManifest> {
    config.validate()?;
    let mut out = Outputs::new(&config.output_dir)?;
    let replica_ids = |count: usize| (0..count as u64).map(|r| stream_id(r, 0)).collect::<Vec<_>>();
    let c = match config.experiment {
        ExperimentKind::Simulate => simulate(config, &mut out)?,
        ExperimentKind::SpineMarginal => spine_experiment(config, &mut out)?,
        ExperimentKind::Villemonais => villemonais_experiment(config, &mut out)?,
        ExperimentKind::Kernels => kernels_experiment(config, &mut out)?,
        ExperimentKind::Boundary => boundary_experiment(config, &mut out)?,
        ExperimentKind::TransformCoupling => transform_experiment(config, &mut out)?,
    };
    out.write("gates.csv", &gates_csv(&c.gates))?;
    let manifest = RunManifest {
        experiment: config.experiment,
        config_sha256: config_hash(config)?,
        seed: config.engine.seed,
        version: env!("CARGO_PKG_VERSION").to_string(),
        stream_ids: if c.stream_ids.is_empty() { replica_ids(config.replicas) } else { c.stream_ids },
        outputs: out.files,
        gates: c.gates,
        coalescence: c.coalescence,
        notes: c.notes,
    };
    let text = serde_json::to_string_pretty(&manifest)? + "\n";
    std::fs::write(config.output_dir.join(MANIFEST_FILE), text)?;
    Ok(manifest)
}

struct SimReplica {
    events: String,
    paths: String,
    spine: String,
    sample: Option<String>,
    coalescence_time: f64,
    violations: Vec<String>,
}

fn simulate(config: &ExperimentConfig, out: &mut Outputs) -> Result<Collected> {
    let q = config.query_time();
    let dim = config.engine.domain.dim();
    let reps = map_replicas(config.replicas, config.parallelism, |r| {
        let c = config.engine.clone().with_replica(r);
        let o = run(&c)?;
        let mut events = String::new();
        for e in &o.log.events {
            events.push_str(&serde_json::to_string(e)?);
            events.push('\n');
        }
        let mut paths = format!("time,particle,{}\n", coord_header(dim));
        for k in 0..o.store.len() {
            let t = num(o.store.times()[k]);
            for (i, x) in o.store.frame(k).chunks_exact(dim).enumerate() {
                let _ = writeln!(paths, "{t},{i},{}", coords(x));
            }
        }
        let sp = spine(&o.log, &o.store)?;
        let sample = sp.path.value_at(q).filter(|_| sp.coalescence_time >= q).map(|x| {
            let carrier = sp.path.carrier_at(q).expect("inside spine");
            format!("{r},{},{},{carrier},{}\n", num(q), coords(x), num(sp.coalescence_time))
        });
        Ok(SimReplica {
            events,
            paths,
            spine: path_csv(&sp.path),
            sample,
            coalescence_time: sp.coalescence_time,
            violations: structural_violations(&o.log, &o.store, &c.domain)?,
        })
    })?;
    let mut samples = format!("replica_id,time,{},carrier,coalescence_time\n", coord_header(dim));
    let mut violations = Vec::new();
    for (r, rep) in reps.iter().enumerate() {
        out.write(&format!("events_{r:04}.jsonl"), &rep.events)?;
        out.write(&format!("paths_{r:04}.csv"), &rep.paths)?;
        out.write(&format!("spine_{r:04}.csv"), &rep.spine)?;
        if let Some(s) = &rep.sample {
            samples.push_str(s);
        }
        violations.extend(rep.violations.iter().map(|v| format!("replica {r}: {v}")));
    }
    out.write("spine_samples.csv", &samples)?;
    let times: Vec<f64> = reps.iter().map(|r| r.coalescence_time).collect();
    Ok(Collected {
        gates: vec![gate_record(
            "structural invariants",
            &Gate::below("invariant_violations", violations.len() as f64, 0.5),
        )],
        coalescence: Some(CoalescenceStats::from_times(&times, q)),
        notes: violations,
        stream_ids: Vec::new(),
    })
}

fn spine_experiment(config: &ExperimentConfig, out: &mut Outputs) -> Result<Collected> {
    let q = config.query_time();
    let study = spine_study_with(&config.engine, config.replicas, q, config.parallelism)?;
    let dim = config.engine.domain.dim();
    let h = coord_header(dim);
    let mut spine_csv = format!("replica_id,time,{h},carrier,coalescence_time\n");
    let mut tagged_csv = format!("replica_id,time,{h},carrier,tagged_particle\n");
    let mut rep_csv =
        String::from("replica_id,coalescence_time,events,spine_branches,spine_time,generic_branches,generic_time\n");
    for r in &study.replicas {
        if let Some((x, carrier)) = &r.spine {
            let _ = writeln!(spine_csv, "{},{},{},{carrier},{}", r.replica, num(q), coords(x), num(r.coalescence_time));
        }
        let _ = writeln!(tagged_csv, "{},{},{},{},{}", r.replica, num(q), coords(&r.tagged.0), r.tagged.1, r.tagged_index);
        let b = r.branch.map_or(",,,".to_string(), |b| {
            format!("{},{},{},{}", b.spine_branches, num(b.spine_time), b.generic_branches, num(b.generic_time))
        });
        let _ = writeln!(rep_csv, "{},{},{},{b}", r.replica, num(r.coalescence_time), r.events);
    }
    out.write("spine_samples.csv", &spine_csv)?;
    out.write("tagged_samples.csv", &tagged_csv)?;
    out.write("replicas.csv", &rep_csv)?;

    let mut gates = Vec::new();
    let mut notes = Vec::new();
    for c in [
        spine_marginal(&study, config.level),
        spine_vs_tagged(&study, config.level),
        boundary_exponents(&study),
    ] {
        gates.extend(gate_records(&c));
        notes.extend(c.notes);
    }
    match study.branch_rate() {
        Ok(b) => notes.push(format!(
            "spine branch rate {:.4}, generic {:.4}, ratio {}",
            b.spine_rate,
            b.generic_rate,
            b.ratio.map_or("undefined".to_string(), |v| format!("{v:.4}"))
        )),
        Err(e) => notes.push(format!("branch rate: {e}")),
    }
    let times: Vec<f64> = study.replicas.iter().map(|r| r.coalescence_time).collect();
    Ok(Collected {
        gates,
        coalescence: Some(CoalescenceStats::from_times(&times, q)),
        notes,
        stream_ids: Vec::new(),
    })
}

fn villemonais_experiment(config: &ExperimentConfig, out: &mut Outputs) -> Result<Collected> {
    let mut base = config.engine.clone();
    let t = config.query_time();
    base.horizon = t;
    base.validate()?;
    let rep = villemonais_with(&base, &config.n_values, config.replicas, (config.window[0], config.window[1]), config.parallelism)?;
    let mut csv = String::from("n,mean_gap,se,bound,below_bound\n");
    for row in &rep.rows {
        let _ = writeln!(csv, "{},{},{},{},{}", row.n, num(row.mean_gap), num(row.se), num(row.bound), row.below_bound);
    }
    out.write("villemonais.csv", &csv)?;
    let c = villemonais_gates(&rep, base.dt);
    let total = config.replicas * config.n_values.len();
    Ok(Collected {
        gates: gate_records(&c),
        coalescence: None,
        notes: vec![format!("slope {:.4}, intercept {:.4}, t = {t}", rep.slope, rep.intercept)],
        stream_ids: (0..total as u64).map(|r| stream_id(r, 0)).collect(),
    })
}

fn kernels_experiment(config: &ExperimentConfig, out: &mut Outputs) -> Result<Collected> {
    let ke = KernelEvaluator::new(&config.engine.domain);
    let mut csv = String::from("t,y,conditioned_density,limit\n");
    if config.engine.domain.dim() == 1 {
        let (lo, hi) = config.engine.domain.bounds()[0];
        let mid = 0.5 * (lo + hi);
        let len = hi - lo;
        for t in [0.5, 1.0, 2.0, 5.0, 8.0, 12.0, 20.0] {
            let cond = ke.conditioned(t, &[mid])?;
            for j in 1..100 {
                let y = lo + len * j as f64 / 100.0;
                let limit = std::f64::consts::PI / (2.0 * len) * (std::f64::consts::PI * (y - lo) / len).sin();
                let _ = writeln!(csv, "{},{},{},{}", num(t), num(y), num(cond.density(&[y])?), num(limit));
            }
        }
    }
    out.write("conditioned_density.csv", &csv)?;
    let mut gates = Vec::new();
    let mut notes = Vec::new();
    for c in [kernel_identities()?, long_time_density()?, h_stationarity(config.engine.seed)?] {
        gates.extend(gate_records(&c));
        notes.extend(c.notes);
    }
    Ok(Collected {
        gates,
        coalescence: None,
        notes,
        stream_ids: vec![stream_id(0, 0)],
    })
}

fn boundary_experiment(config: &ExperimentConfig, out: &mut Outputs) -> Result<Collected> {
    let g = survival_estimates(config.replicas, config.engine.dt, config.engine.seed, config.parallelism)?;
    let mut csv = String::from("estimator,estimate,se\n");
    let _ = writeln!(csv, "series,{},{}", num(g.series), num(0.0));
    let _ = writeln!(csv, "corrected,{},{}", num(g.corrected), num(g.se_corrected));
    let _ = writeln!(csv, "uncorrected,{},{}", num(g.uncorrected), num(g.se_uncorrected));
    out.write("survival.csv", &csv)?;
    let c = guard_gates(&g);
    Ok(Collected {
        gates: gate_records(&c),
        coalescence: None,
        notes: c.notes,
        stream_ids: Vec::new(),
    })
}

fn transform_experiment(config: &ExperimentConfig, out: &mut Outputs) -> Result<Collected> {
    let checks = map_replicas(config.replicas, config.parallelism, |r| {
        match coupling_check(&config.engine.clone().with_replica(r), config.exponent) {
            Ok(c) => Ok(Some(c)),
            Err(Error::IncompleteSpine) => Ok(None),
            Err(e) => Err(e),
        }
    })?;
    let mut csv = String::from("replica_id,complete,max_diff,same_times,same_carriers,spine_len\n");
    for (r, c) in checks.iter().enumerate() {
        match c {
            Some(c) => {
                let _ = writeln!(csv, "{r},true,{},{},{},{}", num(c.max_diff), c.same_times, c.same_carriers, c.spine_len);
            }
            None => {
                let _ = writeln!(csv, "{r},false,,,,");
            }
        }
    }
    out.write("coupling.csv", &csv)?;
    let done: Vec<_> = checks.iter().flatten().collect();
    let title = "transform coupling";
    let gates = if done.is_empty() {
        vec![gate_record(title, &Gate::failed("max_diff", "no complete spine"))]
    } else {
        let worst = done.iter().map(|c| c.max_diff).fold(0.0, f64::max);
        let consistent = done.iter().all(|c| c.same_times && c.same_carriers && c.spine_len > 0);
        vec![
            gate_record(title, &Gate::below("max_diff", worst, 1e-12)),
            gate_record(title, &Gate::above("grid_and_carrier_match", f64::from(u8::from(consistent)), 0.5)),
        ]
    };
    Ok(Collected {
        gates,
        coalescence: None,
        notes: vec![format!("{} of {} replicas had a complete spine", done.len(), checks.len())],
        stream_ids: Vec::new(),
    })
}
