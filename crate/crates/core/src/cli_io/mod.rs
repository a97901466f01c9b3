//! Configuration parsing, run directories and the `lnlab` command line.

mod cli;
pub mod config;
pub mod emit;

use std::path::Path;

use serde::Serialize;

pub use cli::main_cli;
pub use config::{parse_config, parse_config_str, preset_config, ParsedConfig};
pub use emit::{RunDir, RunManifest};

use crate::error::Result;
use crate::experiments::{
    dynamics_checks, heatmap_checks, noise_checks, q_sweep_checks, ArmReports, ArmResult, Check, DynamicsResult,
    Heatmap, NoiseComparison, QSweepEntry,
};
use crate::theory::{AssumptionReport, ConcentrationReport};
use crate::trainer::{Abort, LabelNoiseSpec, MonotonicityStats, TrainTrace};

pub const TRACE_CSV: &str = "trace.csv";
pub const COEFFICIENTS_CSV: &str = "coefficients.csv";
pub const SUMMARY_CSV: &str = "coefficient_summary.csv";
pub const REPORTS_JSON: &str = "reports.json";
pub const HEATMAP_CSV: &str = "heatmap.csv";
pub const HEATMAP_AGGREGATE_CSV: &str = "heatmap_aggregate.csv";

#[derive(Debug, Serialize)]
pub struct ArmSummary<'a> {
    pub label: &'a str,
    pub noise: LabelNoiseSpec,
    pub final_test_accuracy: Option<f64>,
    pub final_clean_train_loss: Option<f64>,
    pub abort: Option<&'a Abort>,
    pub error: Option<&'a str>,
    pub monotonicity: Option<&'a MonotonicityStats>,
    pub reports: Option<&'a ArmReports>,
}

impl<'a> ArmSummary<'a> {
    pub fn of(arm: &'a ArmResult) -> Self {
        let run = arm.run.as_ref().ok();
        ArmSummary {
            label: &arm.label,
            noise: arm.noise,
            final_test_accuracy: arm.final_accuracy(),
            final_clean_train_loss: arm.trace().and_then(|t| t.last()).map(|r| r.clean_train_loss),
            abort: arm.trace().and_then(|t| t.abort.as_ref()),
            error: arm.run.as_ref().err().map(String::as_str),
            monotonicity: run.map(|a| &a.trace.monotonicity),
            reports: run.map(|a| &a.reports),
        }
    }
}

#[derive(Debug, Serialize)]
struct ArmsReport<'a> {
    kind: &'a str,
    arms: Vec<ArmSummary<'a>>,
    checks: Vec<Check>,
}

fn traces<'a>(arms: &[(&'a str, &'a ArmResult)]) -> Vec<(&'a str, &'a TrainTrace)> {
    arms.iter().filter_map(|(label, a)| a.trace().map(|t| (*label, t))).collect()
}

fn write_arms(dir: &mut RunDir, kind: &str, arms: &[(&str, &ArmResult)], checks: Vec<Check>) -> Result<()> {
    let t = traces(arms);
    dir.write(TRACE_CSV, &emit::trace_csv(&t)?)?;
    dir.write(COEFFICIENTS_CSV, &emit::coefficients_csv(&t)?)?;
    dir.write(SUMMARY_CSV, &emit::summary_csv(&t)?)?;
    let report = ArmsReport { kind, arms: arms.iter().map(|(_, a)| ArmSummary::of(a)).collect(), checks };
    dir.write_json(REPORTS_JSON, &report)
}

/// Write a paired dynamics run and its manifest into `out`.
pub fn emit_dynamics(result: &DynamicsResult, parsed: &ParsedConfig, out: &Path, force: bool) -> Result<RunManifest> {
    let mut dir = RunDir::create(out, force)?;
    let arms = [("gd", &result.gd), ("lngd", &result.lngd)];
    write_arms(&mut dir, "dynamics", &arms, dynamics_checks(result))?;
    dir.finish("dynamics", serde_json::to_value(&result.config)?, parsed.defaults_applied.clone(), result.config.seed)
}

pub fn emit_noise_comparison(
    result: &NoiseComparison,
    parsed: &ParsedConfig,
    tolerance: f64,
    out: &Path,
    force: bool,
) -> Result<RunManifest> {
    let mut dir = RunDir::create(out, force)?;
    let mut arms = vec![(result.baseline.label.as_str(), &result.baseline)];
    arms.extend(result.arms.iter().map(|a| (a.label.as_str(), a)));
    write_arms(&mut dir, "noise-compare", &arms, noise_checks(result, tolerance))?;
    dir.finish("noise-compare", serde_json::to_value(&result.config)?, parsed.defaults_applied.clone(), result.config.seed)
}

pub fn emit_q_sweep(entries: &[QSweepEntry], parsed: &ParsedConfig, out: &Path, force: bool) -> Result<RunManifest> {
    let mut dir = RunDir::create(out, force)?;
    let labels: Vec<(String, &ArmResult)> = entries
        .iter()
        .flat_map(|e| [(format!("q{}/gd", e.q), &e.dynamics.gd), (format!("q{}/lngd", e.q), &e.dynamics.lngd)])
        .collect();
    let arms: Vec<(&str, &ArmResult)> = labels.iter().map(|(l, a)| (l.as_str(), *a)).collect();
    write_arms(&mut dir, "q-sweep", &arms, q_sweep_checks(entries))?;
    let configs: Vec<_> = entries.iter().map(|e| &e.dynamics.config).collect();
    dir.finish("q-sweep", serde_json::to_value(configs)?, parsed.defaults_applied.clone(), parsed.config.seed)
}

#[derive(Debug, Serialize)]
struct HeatmapReport<'a> {
    heatmap: &'a Heatmap,
    checks: Vec<Check>,
}

pub fn emit_heatmap(h: &Heatmap, gain: f64, tolerance: f64, out: &Path, force: bool) -> Result<RunManifest> {
    let mut dir = RunDir::create(out, force)?;
    dir.write(HEATMAP_CSV, &emit::heatmap_long_csv(h)?)?;
    dir.write(HEATMAP_AGGREGATE_CSV, &emit::heatmap_aggregate_csv(h)?)?;
    dir.write_json(REPORTS_JSON, &HeatmapReport { heatmap: h, checks: heatmap_checks(h, gain, tolerance) })?;
    dir.finish("heatmap", serde_json::to_value(&h.grid)?, vec![], h.grid.seed)
}

pub fn emit_concentration(report: &ConcentrationReport, out: &Path, force: bool) -> Result<RunManifest> {
    let mut dir = RunDir::create(out, force)?;
    dir.write_json(REPORTS_JSON, report)?;
    dir.finish("concentration", serde_json::to_value(&report.settings)?, vec![], report.settings.seed)
}

pub fn emit_check(report: &AssumptionReport, extra: &serde_json::Value, out: &Path, force: bool) -> Result<RunManifest> {
    let mut dir = RunDir::create(out, force)?;
    dir.write_json(REPORTS_JSON, &serde_json::json!({ "assumptions": report, "stages": extra }))?;
    dir.finish("check", serde_json::Value::Null, vec![], 0)
}
