//! Run manifests: what was run, on which inputs, and what came out.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use softhebb_core::eval::mean_std;

use crate::config::Source;
use crate::error::{Error, Result};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const METRICS_FILE: &str = "metrics.csv";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigEntry {
    /// TOML literal.
    pub value: String,
    pub source: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputDigest {
    pub key: String,
    pub path: PathBuf,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedRecord {
    pub seed: u64,
    /// Relative to the run directory.
    pub outputs: Vec<PathBuf>,
    pub metrics: BTreeMap<String, f64>,
    pub error: Option<String>,
    pub wall_clock_s: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    /// Sample standard deviation; 0 for a single seed.
    pub std: f64,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub experiment: String,
    pub code_version: String,
    pub config: BTreeMap<String, ConfigEntry>,
    /// The resolved config; `softhebb <experiment> --config` on it reruns.
    pub config_file: PathBuf,
    pub inputs: Vec<InputDigest>,
    pub seeds: Vec<SeedRecord>,
    pub summary: BTreeMap<String, Summary>,
    pub wall_clock_s: f64,
}

pub fn code_version() -> String {
    match option_env!("SOFTHEBB_GIT_REV") {
        Some(rev) => format!("{} ({rev})", env!("CARGO_PKG_VERSION")),
        None => env!("CARGO_PKG_VERSION").to_string(),
    }
}

pub fn config_entries(snapshot: BTreeMap<String, (String, Source)>) -> BTreeMap<String, ConfigEntry> {
    snapshot
        .into_iter()
        .map(|(k, (value, source))| {
            let source = match source {
                Source::Default => "default",
                Source::Env => "env",
                Source::File => "file",
                Source::Cli => "cli",
            };
            (k, ConfigEntry { value, source: source.to_string() })
        })
        .collect()
}

/// Mean ± std per metric over the seeds that reported it. Non-finite values
/// are left out.
pub fn summarize(seeds: &[SeedRecord]) -> BTreeMap<String, Summary> {
    let mut by_metric: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for s in seeds.iter().filter(|s| s.error.is_none()) {
        for (k, &v) in &s.metrics {
            if v.is_finite() {
                by_metric.entry(k).or_default().push(v);
            }
        }
    }
    by_metric
        .into_iter()
        .map(|(k, v)| {
            let (mean, std) = mean_std(&v);
            (k.to_string(), Summary { mean, std, n: v.len() })
        })
        .collect()
}

/// Writes to a sibling temp file, then renames over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

impl RunManifest {
    pub fn save(&self, run_dir: &Path) -> Result<PathBuf> {
        let path = run_dir.join(MANIFEST_FILE);
        let text = serde_json::to_string_pretty(self)? + "\n";
        write_atomic(&path, text.as_bytes())?;
        Ok(path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn failed_seeds(&self) -> usize {
        self.seeds.iter().filter(|s| s.error.is_some()).count()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(seed: u64, acc: f64, error: Option<&str>) -> SeedRecord {
        SeedRecord {
            seed,
            outputs: vec![],
            metrics: [("one_layer".to_string(), acc)].into(),
            error: error.map(str::to_string),
            wall_clock_s: 0.0,
        }
    }

    #[test]
    fn summary_skips_failed_seeds() {
        let s = summarize(&[record(0, 0.5, None), record(1, 0.7, None), record(2, 0.0, Some("boom"))]);
        let one = s["one_layer"];
        assert_eq!(one.n, 2);
        assert!((one.mean - 0.6).abs() < 1e-15);
        assert!((one.std - 0.02f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn atomic_write_leaves_no_temp_file() {
        let dir = tempfile::tempdir().unwrap();
        let m = RunManifest {
            experiment: "eval".into(),
            code_version: code_version(),
            config: BTreeMap::new(),
            config_file: "config.toml".into(),
            inputs: vec![],
            seeds: vec![record(0, 0.5, None)],
            summary: summarize(&[record(0, 0.5, None)]),
            wall_clock_s: 1.0,
        };
        let p = m.save(dir.path()).unwrap();
        assert_eq!(RunManifest::load(&p).unwrap(), m);
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
