use std::fmt::Write as _;
use std::path::Path;

use sha2::{Digest, Sha256};

use super::experiment::{RunManifest, MANIFEST_FILE};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub text: String,
    /// `criterion,gate,statistic,threshold,pass` rows.
    pub table: String,
    pub pass: bool,
}

/// Summarizes a finished run. `dir` holds the manifest and its outputs.
/// Fails if the manifest lists no outputs or a listed file is missing;
/// a file whose hash changed is reported in the text.
pub fn report(manifest: &RunManifest, dir: &Path) -> Result<Summary> {
    if manifest.outputs.is_empty() {
        return Err(Error::EmptySample("manifest lists no outputs".into()));
    }
    let mut text = String::new();
    let _ = writeln!(
        text,
        "experiment {} (seed {}, version {}, config {})",
        manifest.experiment.name(),
        manifest.seed,
        manifest.version,
        &manifest.config_sha256[..manifest.config_sha256.len().min(12)]
    );
    let mut changed = Vec::new();
    for f in &manifest.outputs {
        let path = dir.join(&f.path);
        let bytes = std::fs::read(&path).map_err(|e| Error::MissingFile(format!("{}: {e}", path.display())))?;
        if hex::encode(Sha256::digest(&bytes)) != f.sha256 {
            changed.push(f.path.clone());
        }
    }
    let _ = writeln!(text, "{} output files, {} modified since the run", manifest.outputs.len(), changed.len());
    for c in &changed {
        let _ = writeln!(text, "  modified: {c}");
    }
    if let Some(c) = &manifest.coalescence {
        let _ = writeln!(
            text,
            "coalescence: {}/{} replicas ({:.4}) with coalescence_time >= {}; mean coalescence time {:.4}",
            c.retained,
            c.replicas,
            c.fraction(),
            c.query_time,
            c.mean_coalescence_time
        );
    }
    for n in &manifest.notes {
        let _ = writeln!(text, "{n}");
    }
    let mut table = String::from("criterion,gate,statistic,threshold,pass\n");
    for g in &manifest.gates {
        let stat = g.statistic.map_or("n/a".to_string(), |s| format!("{s:.6e}"));
        let _ = writeln!(
            text,
            "{} {}: {} = {stat} ({})",
            if g.pass { "ok  " } else { "FAIL" },
            g.criterion,
            g.name,
            g.threshold
        );
        let _ = writeln!(table, "{},{},{stat},\"{}\",{}", g.criterion, g.name, g.threshold, g.pass);
    }
    let failed: Vec<String> = manifest
        .gates
        .iter()
        .filter(|g| !g.pass)
        .map(|g| {
            let stat = g.statistic.map_or("n/a".to_string(), |s| format!("{s:.6e}"));
            format!("{} {stat} vs {}", g.name, g.threshold)
        })
        .collect();
    let pass = failed.is_empty() && changed.is_empty();
    if pass {
        text.push_str("PASS\n");
    } else if failed.is_empty() {
        text.push_str("FAIL: outputs modified\n");
    } else {
        let _ = writeln!(text, "FAIL: {}", failed.join("; "));
    }
    Ok(Summary { text, table, pass })
}

/// Reads `manifest.json` from `dir` and summarizes it.
pub fn report_dir(dir: &Path) -> Result<Summary> {
    report(&RunManifest::read(&dir.join(MANIFEST_FILE))?, dir)
}
