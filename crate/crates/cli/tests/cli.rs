use std::path::Path;
use std::process::{Command, Output};

const SMALL: &str = r#"
replicas = 3
[engine]
n = 12
T = 0.5
dt = 0.001
seed = 11
storage_every = 5
domain = { kind = "interval", bounds = [[0.0, 1.0]] }
initial = { kind = "uniform_on_box", lower = [0.25], upper = [0.75], margin = 0.01 }
"#;

fn fvspine(args: &[&str], envs: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_fvspine"));
    cmd.args(args);
    for var in ["FVSPINE_SEED", "FVSPINE_OUT", "FVSPINE_PARALLELISM", "FVSPINE_DT", "FVSPINE_CONFIG", "FVSPINE_REPLICAS"] {
        cmd.env_remove(var);
    }
    for (k, v) in envs {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn write_config(dir: &Path, text: &str) -> String {
    let p = dir.join("run.toml");
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

fn manifest(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

#[test]
fn simulate_then_report() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL);
    let out = tmp.path().join("a");
    let o = fvspine(&["simulate", "--config", &cfg, "--out", out.to_str().unwrap()], &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).trim_end().ends_with("PASS"));
    let m = manifest(&out);
    assert_eq!(m["stream_ids"], serde_json::json!([0, 1 << 20, 2 << 20]));
    assert!(out.join("events_0002.jsonl").exists());

    let r = fvspine(&["report", out.to_str().unwrap()], &[]);
    assert!(r.status.success());
    assert!(stdout(&r).contains("coalescence:"));
}

#[test]
fn output_is_independent_of_parallelism() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL);
    let mut manifests = Vec::new();
    for (name, par) in [("p1", "1"), ("p4", "4"), ("p4b", "4")] {
        let out = tmp.path().join(name);
        let o = fvspine(&["simulate", "--config", &cfg, "--out", out.to_str().unwrap(), "--parallelism", par], &[]);
        assert!(o.status.success());
        manifests.push(std::fs::read(out.join("manifest.json")).unwrap());
    }
    assert_eq!(manifests[0], manifests[1]);
    assert_eq!(manifests[1], manifests[2]);
}

#[test]
fn env_overrides_mirror_flags() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL);
    let out = tmp.path().join("env");
    let o = fvspine(
        &["simulate"],
        &[("FVSPINE_CONFIG", &cfg), ("FVSPINE_OUT", out.to_str().unwrap()), ("FVSPINE_SEED", "99"), ("FVSPINE_DT", "0.002")],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(manifest(&out)["seed"], 99);
    // the flag wins over the environment
    let out2 = tmp.path().join("flag");
    let o = fvspine(
        &["simulate", "--config", &cfg, "--out", out2.to_str().unwrap(), "--seed", "5"],
        &[("FVSPINE_SEED", "99")],
    );
    assert!(o.status.success());
    assert_eq!(manifest(&out2)["seed"], 5);
}

#[test]
fn unknown_key_is_fatal() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), &format!("foo = 3\n{SMALL}"));
    let o = fvspine(&["simulate", "--config", &cfg], &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("foo"));
}

#[test]
fn failing_gate_gives_exit_code_one() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), &SMALL.replace("T = 0.5", "T = 1.0"));
    let out = tmp.path().join("spine");
    let o = fvspine(&["spine", "--config", &cfg, "--out", out.to_str().unwrap()], &[]);
    assert_eq!(o.status.code(), Some(1), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    let last = text.lines().last().unwrap();
    assert!(last.starts_with("FAIL") && last.contains(" vs "), "{last}");
    assert!(out.join("spine_samples.csv").exists());
    assert!(out.join("summary.csv").exists());
}

#[test]
fn report_without_manifest_errors() {
    let tmp = tempfile::tempdir().unwrap();
    let o = fvspine(&["report", tmp.path().to_str().unwrap()], &[]);
    assert_eq!(o.status.code(), Some(2));
}
