use std::path::Path;

use fvspine::cli_io::{parse_config, report_dir, run_experiment, ExperimentConfig, ExperimentKind};

const BASE: &str = r#"
replicas = 6
[engine]
n = 10
T = 2.0
dt = 0.001
seed = 31
domain = { kind = "interval", bounds = [[0.0, 1.0]] }
initial = { kind = "uniform_on_box", lower = [0.25], upper = [0.75], margin = 0.01 }
"#;

fn config(kind: &str, dir: &Path, parallelism: usize) -> ExperimentConfig {
    let mut c = parse_config(&format!("experiment = \"{kind}\"\n{BASE}")).unwrap();
    c.output_dir = dir.to_path_buf();
    c.parallelism = parallelism;
    c
}

fn contents(dir: &Path, names: &[String]) -> Vec<Vec<u8>> {
    names.iter().map(|n| std::fs::read(dir.join(n)).unwrap()).collect()
}

#[test]
fn files_do_not_depend_on_worker_count() {
    let tmp = tempfile::tempdir().unwrap();
    for kind in ["simulate", "spine_marginal", "transform_coupling"] {
        let a = tmp.path().join(format!("{kind}_1"));
        let b = tmp.path().join(format!("{kind}_8"));
        let ma = run_experiment(&config(kind, &a, 1)).unwrap();
        let mb = run_experiment(&config(kind, &b, 8)).unwrap();
        assert_eq!(ma, mb, "{kind}");
        let names: Vec<String> = ma.outputs.iter().map(|o| o.path.clone()).collect();
        assert_eq!(contents(&a, &names), contents(&b, &names), "{kind}");
        assert_eq!(std::fs::read(a.join("manifest.json")).unwrap(), std::fs::read(b.join("manifest.json")).unwrap());
    }
}

#[test]
fn rerun_reproduces_hashes_and_seed_changes_them() {
    let tmp = tempfile::tempdir().unwrap();
    let c = config("simulate", &tmp.path().join("a"), 2);
    let first = run_experiment(&c).unwrap();
    let second = run_experiment(&c).unwrap();
    assert_eq!(first.outputs, second.outputs);
    let mut other = c.clone();
    other.engine.seed += 1;
    other.output_dir = tmp.path().join("b");
    let third = run_experiment(&other).unwrap();
    assert_ne!(first.outputs[0].sha256, third.outputs[0].sha256);
    assert_ne!(first.config_sha256, third.config_sha256);
}

#[test]
fn spine_samples_have_documented_columns() {
    let tmp = tempfile::tempdir().unwrap();
    let c = config("spine_marginal", tmp.path(), 2);
    let m = run_experiment(&c).unwrap();
    let text = std::fs::read_to_string(tmp.path().join("spine_samples.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("replica_id,time,x,carrier,coalescence_time"));
    let cs = m.coalescence.as_ref().unwrap();
    assert_eq!(lines.count(), cs.retained);
    assert_eq!(cs.replicas, 6);
    let summary = report_dir(tmp.path()).unwrap();
    assert!(summary.text.contains("coalescence:"));
    // six replicas cannot support the boundary exponents
    assert!(!summary.pass);
    assert!(summary.text.lines().last().unwrap().contains("spine_exponent"));
}

#[test]
fn rectangle_spine_samples_have_two_coordinates() {
    let tmp = tempfile::tempdir().unwrap();
    let text = BASE
        .replace("kind = \"interval\", bounds = [[0.0, 1.0]]", "kind = \"rectangle\", bounds = [[0.0, 1.0], [0.0, 1.0]]")
        .replace("lower = [0.25], upper = [0.75]", "lower = [0.25, 0.25], upper = [0.75, 0.75]");
    let mut c = parse_config(&text).unwrap();
    c.output_dir = tmp.path().to_path_buf();
    run_experiment(&c).unwrap();
    let samples = std::fs::read_to_string(tmp.path().join("spine_samples.csv")).unwrap();
    assert!(samples.starts_with("replica_id,time,x,y,carrier,coalescence_time\n"));
    let paths = std::fs::read_to_string(tmp.path().join("paths_0000.csv")).unwrap();
    assert!(paths.starts_with("time,particle,x,y\n"));
}

#[test]
fn kernels_and_boundary_presets_pass() {
    let tmp = tempfile::tempdir().unwrap();
    let mut k = ExperimentConfig::preset(ExperimentKind::Kernels);
    k.output_dir = tmp.path().join("k");
    assert!(run_experiment(&k).unwrap().pass());
    let mut b = ExperimentConfig::preset(ExperimentKind::Boundary);
    b.output_dir = tmp.path().join("b");
    b.parallelism = 2;
    let m = run_experiment(&b).unwrap();
    assert!(m.pass(), "{:?}", m.gates);
}

#[test]
fn shipped_configs_parse() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut seen = 0;
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") {
            fvspine::cli_io::load_config(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            seen += 1;
        }
    }
    assert!(seen >= 6);
}
