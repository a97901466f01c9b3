//! CSV and JSON outputs, content digests and the run manifest.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::decomposition::CoefficientSummary;
use crate::error::{LabError, Result};
use crate::experiments::Heatmap;
use crate::theory::Algorithm;
use crate::rng::{stream_table, StreamRecord};
use crate::trainer::{TraceRow, TrainTrace};

pub const MANIFEST: &str = "manifest.json";
pub const MANIFEST_FORMAT: &str = "label-noise-lab/manifest";

/// 17 significant digits, enough to round-trip any `f64`.
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        x.to_string()
    }
}

fn csv_bytes(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<Vec<u8>> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    let io = |e: csv::Error| LabError::Io(std::io::Error::other(e));
    w.write_record(header).map_err(io)?;
    for row in rows {
        w.write_record(&row).map_err(io)?;
    }
    w.into_inner().map_err(|e| LabError::Io(std::io::Error::other(e.to_string())))
}

fn trace_fields(r: &TraceRow) -> Vec<String> {
    vec![
        r.step.to_string(),
        fmt_f64(r.clean_train_loss),
        fmt_f64(r.noisy_train_loss),
        fmt_f64(r.test_error_01),
        fmt_f64(r.max_gamma),
        fmt_f64(r.mean_gamma),
        fmt_f64(r.max_rho_bar),
        fmt_f64(r.mean_rho_bar),
        fmt_f64(r.min_rho_under),
        fmt_f64(r.ratio_rho_over_gamma),
        fmt_f64(r.iota_mean),
        fmt_f64(r.iota_max),
        r.flip_count.to_string(),
    ]
}

/// Trace rows of several arms, one leading `arm` column.
pub fn trace_csv(arms: &[(&str, &TrainTrace)]) -> Result<Vec<u8>> {
    let mut header = vec!["arm"];
    header.extend(TraceRow::COLUMNS);
    let rows = arms.iter().flat_map(|(label, t)| {
        t.rows.iter().map(move |r| {
            let mut v = vec![label.to_string()];
            v.extend(trace_fields(r));
            v
        })
    });
    csv_bytes(&header, rows)
}

/// Long-form coefficient snapshots: one row per `(step, j, r, i)`.
pub fn coefficients_csv(arms: &[(&str, &TrainTrace)]) -> Result<Vec<u8>> {
    let header = ["arm", "step", "j", "r", "i", "gamma", "rho_bar", "rho_under"];
    let mut rows = Vec::new();
    for (label, t) in arms {
        for s in &t.snapshots {
            let (_, m, n) = s.rho_bar.dim();
            for (jx, j) in [(0usize, "1"), (1, "-1")] {
                for r in 0..m {
                    for i in 0..n {
                        rows.push(vec![
                            label.to_string(),
                            s.step.to_string(),
                            j.to_string(),
                            r.to_string(),
                            i.to_string(),
                            fmt_f64(s.gamma[[jx, r]]),
                            fmt_f64(s.rho_bar[[jx, r, i]]),
                            fmt_f64(s.rho_under[[jx, r, i]]),
                        ]);
                    }
                }
            }
        }
    }
    csv_bytes(&header, rows)
}

fn summary_fields(s: &CoefficientSummary) -> Vec<String> {
    vec![
        s.step.to_string(),
        fmt_f64(s.max_gamma.value),
        fmt_f64(s.min_gamma.value),
        fmt_f64(s.mean_gamma),
        fmt_f64(s.max_rho_bar.value),
        fmt_f64(s.min_rho_bar.value),
        fmt_f64(s.mean_rho_bar),
        fmt_f64(s.max_rho_under.value),
        fmt_f64(s.min_rho_under.value),
        fmt_f64(s.mean_rho_under),
    ]
}

/// Per-step coefficient extremes and means.
pub fn summary_csv(arms: &[(&str, &TrainTrace)]) -> Result<Vec<u8>> {
    let mut header = vec!["arm"];
    header.extend(CoefficientSummary::CSV_HEADER.split(','));
    let rows = arms.iter().flat_map(|(label, t)| {
        t.summaries.iter().map(move |s| {
            let mut v = vec![label.to_string()];
            v.extend(summary_fields(s));
            v
        })
    });
    csv_bytes(&header, rows)
}

fn algorithm_name(a: Algorithm) -> &'static str {
    match a {
        Algorithm::Gd => "gd",
        Algorithm::Lngd => "lngd",
    }
}

/// One row per `(snr, n, seed, algorithm)`; missing accuracies are empty.
pub fn heatmap_long_csv(h: &Heatmap) -> Result<Vec<u8>> {
    let rows = h.records.iter().map(|r| {
        vec![
            fmt_f64(r.snr),
            r.n.to_string(),
            r.seed.to_string(),
            algorithm_name(r.algorithm).to_string(),
            r.test_accuracy.map(fmt_f64).unwrap_or_default(),
        ]
    });
    csv_bytes(&["snr", "n", "seed", "algorithm", "test_accuracy"], rows)
}

/// One row per cell with mean and standard deviation over seeds.
pub fn heatmap_aggregate_csv(h: &Heatmap) -> Result<Vec<u8>> {
    let rows = h.cells.iter().map(|c| {
        vec![
            fmt_f64(c.snr),
            c.n.to_string(),
            fmt_f64(c.mu_scale),
            fmt_f64(c.gd.mean),
            fmt_f64(c.gd.std),
            fmt_f64(c.lngd.mean),
            fmt_f64(c.lngd.std),
            c.missing.len().to_string(),
        ]
    });
    csv_bytes(&["snr", "n", "mu_scale", "gd_mean", "gd_std", "lngd_mean", "lngd_std", "missing"], rows)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileRecord {
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub format: String,
    pub version: u32,
    pub tool_version: String,
    pub subcommand: String,
    pub config: Value,
    pub defaults_applied: Vec<String>,
    pub master_seed: u64,
    pub streams: Vec<StreamRecord>,
    pub started_unix: f64,
    pub finished_unix: f64,
    pub files: Vec<FileRecord>,
}

impl RunManifest {
    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST);
        let text = fs::read_to_string(&path)?;
        let m: RunManifest = serde_json::from_str(&text)
            .map_err(|e| LabError::Malformed { path: path.display().to_string(), message: e.to_string() })?;
        if m.format != MANIFEST_FORMAT {
            return Err(LabError::Malformed { path: path.display().to_string(), message: format!("format {}", m.format) });
        }
        Ok(m)
    }

    pub fn file(&self, name: &str) -> Option<&FileRecord> {
        self.files.iter().find(|f| f.path == name)
    }
}

pub fn now_unix() -> f64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0)
}

/// An output directory being filled; every file written is digested.
#[derive(Debug)]
pub struct RunDir {
    path: PathBuf,
    files: Vec<FileRecord>,
    started_unix: f64,
}

impl RunDir {
    /// Refuses a directory that already holds a manifest unless `force` is set.
    pub fn create(path: &Path, force: bool) -> Result<Self> {
        let manifest = path.join(MANIFEST);
        if manifest.exists() && !force {
            return Err(LabError::ManifestExists(manifest.display().to_string()));
        }
        fs::create_dir_all(path)?;
        Ok(RunDir { path: path.to_path_buf(), files: Vec::new(), started_unix: now_unix() })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        fs::write(self.path.join(name), bytes)?;
        self.files.push(FileRecord { path: name.into(), bytes: bytes.len() as u64, sha256: sha256_hex(bytes) });
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write(name, text.as_bytes())
    }

    /// Write the manifest last and return the inventory.
    pub fn finish(
        self,
        subcommand: &str,
        config: Value,
        defaults_applied: Vec<String>,
        master_seed: u64,
    ) -> Result<RunManifest> {
        let manifest = RunManifest {
            format: MANIFEST_FORMAT.into(),
            version: 1,
            tool_version: env!("CARGO_PKG_VERSION").into(),
            subcommand: subcommand.into(),
            config,
            defaults_applied,
            master_seed,
            streams: stream_table(master_seed),
            started_unix: self.started_unix,
            finished_unix: now_unix(),
            files: self.files,
        };
        let mut text = serde_json::to_string_pretty(&manifest)?;
        text.push('\n');
        fs::write(self.path.join(MANIFEST), text)?;
        Ok(manifest)
    }
}
