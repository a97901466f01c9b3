//! Paired training experiments: dynamics, label-noise variants, activation
//! exponents and the SNR by sample-size heatmap.
//!
//! Both arms of a comparison share the dataset, initialization and test set;
//! only the label-noise stream differs.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::SignalSpec;
use crate::decomposition::{projection_check, reconstruction_error, CoefficientState};
use crate::error::{LabError, Result};
use crate::network::Network;
use crate::rng::derive_seed;
use crate::theory::{
    c_test_for_bound, estimate_stage_times, proposition1_monitor, stage2_boundedness_check, theorem_verdicts,
    Algorithm, IotaBand, Proposition1Report, Stage2Report, StageConstants, StageEstimate, TheoremVerdict,
    VerdictSettings,
};
use crate::trainer::{train_run, train_run_observed, LabelNoiseSpec, RunSetup, TrainConfig, TrainTrace};

/// One run's parameters. `p` is the flip rate of the label-noise arm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BaseConfig {
    pub d: usize,
    pub n: usize,
    pub mu_scale: f64,
    pub sigma_p: f64,
    pub p: f64,
    pub eta: f64,
    pub steps: usize,
    pub seed: u64,
    pub m: usize,
    pub q: u32,
    pub sigma_0: f64,
    pub log_stride: usize,
    pub n_test: usize,
    /// Full coefficient snapshots every this many steps; 0 disables them.
    pub snapshot_stride: usize,
}

pub const DEFAULT_M: usize = 20;
pub const DEFAULT_Q: u32 = 2;
pub const DEFAULT_SIGMA_0: f64 = 0.01;
pub const DEFAULT_LOG_STRIDE: usize = 10;
pub const DEFAULT_N_TEST: usize = 2000;
pub const DEFAULT_SNAPSHOT_STRIDE: usize = 500;

impl BaseConfig {
    /// The synthetic setting of the dynamics figure.
    pub fn reference(seed: u64) -> Self {
        BaseConfig {
            d: 2000,
            n: 200,
            mu_scale: 2.0,
            sigma_p: 0.5,
            p: 0.1,
            eta: 0.5,
            steps: 2000,
            seed,
            m: DEFAULT_M,
            q: DEFAULT_Q,
            sigma_0: DEFAULT_SIGMA_0,
            log_stride: DEFAULT_LOG_STRIDE,
            n_test: DEFAULT_N_TEST,
            snapshot_stride: DEFAULT_SNAPSHOT_STRIDE,
        }
    }

    /// Range checks; errors name the offending key.
    pub fn validate(&self) -> Result<()> {
        let bad = |key: &str, message: String| Err(LabError::Config { key: key.into(), message });
        if self.d < 2 {
            return bad("d", format!("must be >= 2, got {}", self.d));
        }
        if self.n == 0 {
            return bad("n", "must be >= 1".into());
        }
        if !(self.mu_scale > 0.0 && self.mu_scale.is_finite()) {
            return bad("mu_scale", format!("must be in (0, inf), got {}", self.mu_scale));
        }
        if !(self.sigma_p > 0.0 && self.sigma_p.is_finite()) {
            return bad("sigma_p", format!("must be in (0, inf), got {}", self.sigma_p));
        }
        if !(0.0..=1.0).contains(&self.p) {
            return bad("p", format!("must be in [0, 1], got {}", self.p));
        }
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return bad("eta", format!("must be in (0, inf), got {}", self.eta));
        }
        if self.steps == 0 {
            return bad("steps", "must be >= 1".into());
        }
        if self.m == 0 {
            return bad("m", "must be >= 1".into());
        }
        if self.q < 2 {
            return bad("q", format!("must be >= 2, got {}", self.q));
        }
        if !(self.sigma_0 > 0.0 && self.sigma_0.is_finite()) {
            return bad("sigma_0", format!("must be in (0, inf), got {}", self.sigma_0));
        }
        if self.log_stride == 0 || self.log_stride > self.steps {
            return bad("log_stride", format!("must be in [1, steps = {}], got {}", self.steps, self.log_stride));
        }
        if self.n_test == 0 {
            return bad("n_test", "must be >= 1".into());
        }
        Ok(())
    }

    pub fn spec(&self) -> Result<SignalSpec> {
        SignalSpec::axis_aligned(self.d, self.mu_scale, self.sigma_p)
    }

    pub fn setup(&self) -> Result<RunSetup> {
        RunSetup::axis_aligned(self.d, self.mu_scale, self.sigma_p, self.n, self.m, self.q, self.sigma_0)
    }

    pub fn train_config(&self, noise: LabelNoiseSpec) -> TrainConfig {
        TrainConfig {
            eta: self.eta,
            steps: self.steps,
            noise,
            log_stride: self.log_stride,
            seed: self.seed,
            n_test: self.n_test,
            snapshot_stride: self.snapshot_stride,
        }
    }

    /// Label noise of the second arm: flips at rate `p`, or none when `p = 0`.
    pub fn noise(&self) -> LabelNoiseSpec {
        if self.p == 0.0 {
            LabelNoiseSpec::None
        } else {
            LabelNoiseSpec::Flip { p: self.p }
        }
    }
}

/// Settings for the per-arm theory reports.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Analysis {
    pub verdict: VerdictSettings,
    /// When set, `C_test` is chosen so the test-error bound equals this value.
    pub c_test_target: Option<f64>,
    pub band: IotaBand,
    pub stage: StageConstants,
    /// Reconstruct and project at every logged step.
    pub audit_decomposition: bool,
    pub audit_delta: f64,
}

impl Default for Analysis {
    fn default() -> Self {
        Analysis {
            verdict: VerdictSettings::default(),
            c_test_target: Some(0.05),
            band: IotaBand::default(),
            stage: StageConstants::default(),
            audit_decomposition: false,
            audit_delta: 0.01,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecompositionAudit {
    pub steps_checked: usize,
    pub max_reconstruction_error: f64,
    pub max_gamma_discrepancy: f64,
    pub max_rho_discrepancy: f64,
    pub rho_bound: f64,
    pub min_fraction_within_bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmReports {
    pub stage: std::result::Result<StageEstimate, String>,
    pub proposition1: Proposition1Report,
    pub stage2: std::result::Result<Stage2Report, String>,
    pub verdict: std::result::Result<TheoremVerdict, String>,
    pub audit: Option<DecompositionAudit>,
}

#[derive(Debug, Clone)]
pub struct Arm {
    pub trace: TrainTrace,
    pub network: Network,
    pub state: CoefficientState,
    pub reports: ArmReports,
}

#[derive(Debug, Clone)]
pub struct ArmResult {
    pub label: String,
    pub noise: LabelNoiseSpec,
    /// `Err` holds the reason the arm produced no trace.
    pub run: std::result::Result<Arm, String>,
}

impl ArmResult {
    pub fn trace(&self) -> Option<&TrainTrace> {
        self.run.as_ref().ok().map(|a| &a.trace)
    }

    /// Final test accuracy, absent when the arm failed or aborted.
    pub fn final_accuracy(&self) -> Option<f64> {
        let trace = self.trace()?;
        if trace.abort.is_some() {
            return None;
        }
        trace.last().map(|r| r.test_accuracy())
    }

    pub fn aborted(&self) -> bool {
        self.trace().is_some_and(|t| t.abort.is_some())
    }
}

fn analyse(cfg: &BaseConfig, trace: &TrainTrace, analysis: &Analysis) -> Result<(ArmReports, Option<f64>)> {
    let spec = cfg.spec()?;
    let which = Algorithm::of(&trace.shape.noise);
    let stage = estimate_stage_times(
        &spec,
        cfg.n,
        cfg.m,
        cfg.eta,
        cfg.sigma_0,
        analysis.verdict.epsilon,
        which,
        &analysis.stage,
    );
    let t1 = stage.as_ref().ok().map(|s| s.t1);
    let stage2 = match t1 {
        Some(t1) => stage2_boundedness_check(&trace.iota, t1, trace.shape.noise.flip_rate(), &analysis.band)
            .map_err(|e| e.to_string()),
        None => Err("stage-1 horizon unavailable".into()),
    };
    let mut verdict_settings = analysis.verdict;
    if let Some(target) = analysis.c_test_target {
        verdict_settings.c_test = c_test_for_bound(target, cfg.d, cfg.n);
    }
    let reports = ArmReports {
        stage: stage.map_err(|e| e.to_string()),
        proposition1: proposition1_monitor(&trace.summaries, cfg.steps as f64),
        stage2,
        verdict: theorem_verdicts(trace, &verdict_settings).map_err(|e| e.to_string()),
        audit: None,
    };
    Ok((reports, t1))
}

/// Train one arm and attach its reports.
pub fn run_arm(cfg: &BaseConfig, noise: LabelNoiseSpec, label: &str, analysis: &Analysis) -> ArmResult {
    let run = (|| -> Result<Arm> {
        cfg.validate()?;
        let setup = cfg.setup()?;
        let tc = cfg.train_config(noise);
        let mut audit: Option<DecompositionAudit> = None;
        let mut audit_error: Option<LabError> = None;
        let out = if analysis.audit_decomposition {
            let t_star = cfg.steps as f64;
            let mut acc = DecompositionAudit {
                steps_checked: 0,
                max_reconstruction_error: 0.0,
                max_gamma_discrepancy: 0.0,
                max_rho_discrepancy: 0.0,
                rho_bound: f64::NAN,
                min_fraction_within_bound: 1.0,
            };
            let out = train_run_observed(&tc, &setup, &mut |s| {
                if audit_error.is_some() {
                    return;
                }
                let checked = reconstruction_error(s.net, s.state, s.dataset)
                    .and_then(|rec| Ok((rec, projection_check(s.net, s.state, s.dataset, analysis.audit_delta, t_star)?)));
                match checked {
                    Ok((rec, proj)) => {
                        acc.steps_checked += 1;
                        acc.max_reconstruction_error = acc.max_reconstruction_error.max(rec);
                        acc.max_gamma_discrepancy = acc.max_gamma_discrepancy.max(proj.max_gamma_discrepancy);
                        acc.max_rho_discrepancy = acc.max_rho_discrepancy.max(proj.max_rho_discrepancy);
                        acc.rho_bound = proj.rho_bound;
                        acc.min_fraction_within_bound = acc.min_fraction_within_bound.min(proj.fraction_within_bound);
                    }
                    Err(e) => audit_error = Some(e),
                }
            })?;
            if let Some(e) = audit_error {
                return Err(e);
            }
            audit = Some(acc);
            out
        } else {
            train_run(&tc, &setup)?
        };
        let (mut reports, _) = analyse(cfg, &out.trace, analysis)?;
        reports.audit = audit;
        Ok(Arm { trace: out.trace, network: out.network, state: out.state, reports })
    })();
    ArmResult { label: label.into(), noise, run: run.map_err(|e| e.to_string()) }
}

#[derive(Debug, Clone)]
pub struct DynamicsResult {
    pub config: BaseConfig,
    pub gd: ArmResult,
    pub lngd: ArmResult,
}

impl DynamicsResult {
    /// Label-noise accuracy minus standard accuracy, when both finished.
    pub fn accuracy_gain(&self) -> Option<f64> {
        Some(self.lngd.final_accuracy()? - self.gd.final_accuracy()?)
    }
}

/// Standard GD and label-noise GD (flip rate `cfg.p`) on shared streams.
pub fn run_dynamics(cfg: &BaseConfig, analysis: &Analysis) -> DynamicsResult {
    let (gd, lngd) = rayon::join(
        || run_arm(cfg, LabelNoiseSpec::None, "gd", analysis),
        || run_arm(cfg, cfg.noise(), "lngd", analysis),
    );
    DynamicsResult { config: cfg.clone(), gd, lngd }
}

/// Flip, Gaussian and uniform multipliers from the label-noise variants study.
pub fn noise_variants() -> Vec<LabelNoiseSpec> {
    vec![
        LabelNoiseSpec::Flip { p: 0.1 },
        LabelNoiseSpec::Flip { p: 0.3 },
        LabelNoiseSpec::Flip { p: 0.4 },
        LabelNoiseSpec::Gaussian { mean: 1.0, std: 1.0 },
        LabelNoiseSpec::Gaussian { mean: 0.6, std: 1.0 },
        LabelNoiseSpec::Uniform { lo: -1.0, hi: 2.0 },
        LabelNoiseSpec::Uniform { lo: -2.0, hi: 3.0 },
    ]
}

#[derive(Debug, Clone)]
pub struct NoiseComparison {
    pub config: BaseConfig,
    pub baseline: ArmResult,
    pub arms: Vec<ArmResult>,
}

/// One label-noise arm per spec plus a standard-GD baseline, all on matched streams.
pub fn run_noise_comparison(cfg: &BaseConfig, noises: &[LabelNoiseSpec], analysis: &Analysis) -> Result<NoiseComparison> {
    for noise in noises {
        noise.validate()?;
    }
    let mut all: Vec<ArmResult> = std::iter::once(LabelNoiseSpec::None)
        .chain(noises.iter().copied())
        .collect::<Vec<_>>()
        .par_iter()
        .map(|noise| run_arm(cfg, *noise, &noise.label(), analysis))
        .collect();
    let baseline = all.remove(0);
    Ok(NoiseComparison { config: cfg.clone(), baseline, arms: all })
}

/// Per-exponent configurations from a base: `q = 2` is the base itself,
/// `q = 3` swaps the activation, `q = 4` also uses `eta = 0.1`, `n = 50`, `mu = 5 e_1`.
pub fn q_presets(base: &BaseConfig) -> Vec<BaseConfig> {
    vec![
        BaseConfig { q: 2, ..base.clone() },
        BaseConfig { q: 3, ..base.clone() },
        BaseConfig { q: 4, eta: 0.1, n: 50, mu_scale: 5.0, ..base.clone() },
    ]
}

#[derive(Debug, Clone)]
pub struct QSweepEntry {
    pub q: u32,
    pub dynamics: DynamicsResult,
}

pub fn run_q_sweep(configs: &[BaseConfig], analysis: &Analysis) -> Result<Vec<QSweepEntry>> {
    for cfg in configs {
        if !(2..=4).contains(&cfg.q) {
            return Err(LabError::Config { key: "q".into(), message: format!("must be in {{2, 3, 4}}, got {}", cfg.q) });
        }
    }
    Ok(configs.iter().map(|cfg| QSweepEntry { q: cfg.q, dynamics: run_dynamics(cfg, analysis) }).collect())
}

/// How a target SNR is reached.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SnrPolicy {
    /// Scale `|mu|` at fixed `sigma_p` and `d`.
    ScaleMu,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepGrid {
    pub snr_values: Vec<f64>,
    pub n_values: Vec<usize>,
    pub steps: usize,
    pub eta: f64,
    pub seeds_per_cell: usize,
    pub seed: u64,
    pub d: usize,
    pub m: usize,
    pub q: u32,
    pub sigma_0: f64,
    pub sigma_p: f64,
    pub p: f64,
    pub n_test: usize,
    pub policy: SnrPolicy,
}

impl SweepGrid {
    /// A 3 x 2 subsample of the heatmap ranges.
    pub fn desk(seed: u64) -> Self {
        SweepGrid {
            snr_values: vec![0.03, 0.06, 0.09],
            n_values: vec![100, 300],
            steps: 1000,
            eta: 1.0,
            seeds_per_cell: 3,
            seed,
            d: 2000,
            m: DEFAULT_M,
            q: DEFAULT_Q,
            sigma_0: DEFAULT_SIGMA_0,
            sigma_p: 0.5,
            p: 0.1,
            n_test: DEFAULT_N_TEST,
            policy: SnrPolicy::ScaleMu,
        }
    }

    /// SNR 0.03..=0.10 by 0.01 and n 100..=700 by 100.
    pub fn full(seed: u64) -> Self {
        SweepGrid {
            snr_values: (3..=10).map(|k| k as f64 / 100.0).collect(),
            n_values: (1..=7).map(|k| k * 100).collect(),
            ..SweepGrid::desk(seed)
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |key: &str, message: &str| Err(LabError::Config { key: key.into(), message: message.into() });
        if self.snr_values.is_empty() || self.snr_values.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
            return bad("snr_values", "must be a nonempty list of positive numbers");
        }
        if self.n_values.is_empty() || self.n_values.contains(&0) {
            return bad("n_values", "must be a nonempty list of positive integers");
        }
        if self.seeds_per_cell == 0 {
            return bad("seeds_per_cell", "must be >= 1");
        }
        Ok(())
    }

    /// `|mu|` giving the target SNR.
    pub fn mu_scale(&self, snr: f64) -> f64 {
        snr * self.sigma_p * (self.d as f64).sqrt()
    }

    /// Seed of replicate `s` in cell `(row, col)`; independent of scheduling.
    pub fn cell_seed(&self, row: usize, col: usize, s: usize) -> u64 {
        derive_seed(self.seed, &[row as u64, col as u64, s as u64])
    }

    pub fn cell_config(&self, row: usize, col: usize, s: usize) -> BaseConfig {
        BaseConfig {
            d: self.d,
            n: self.n_values[col],
            mu_scale: self.mu_scale(self.snr_values[row]),
            sigma_p: self.sigma_p,
            p: self.p,
            eta: self.eta,
            steps: self.steps,
            seed: self.cell_seed(row, col, s),
            m: self.m,
            q: self.q,
            sigma_0: self.sigma_0,
            log_stride: self.steps,
            n_test: self.n_test,
            snapshot_stride: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyStats {
    pub mean: f64,
    /// Sample standard deviation; 0 with fewer than two values.
    pub std: f64,
    pub per_seed: Vec<Option<f64>>,
}

impl AccuracyStats {
    pub fn from_values(per_seed: Vec<Option<f64>>) -> Self {
        let v: Vec<f64> = per_seed.iter().flatten().copied().collect();
        let k = v.len() as f64;
        let mean = if v.is_empty() { f64::NAN } else { v.iter().sum::<f64>() / k };
        let std = if v.len() < 2 { 0.0 } else { (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (k - 1.0)).sqrt() };
        AccuracyStats { mean, std, per_seed }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub snr: f64,
    pub n: usize,
    pub mu_scale: f64,
    pub gd: AccuracyStats,
    pub lngd: AccuracyStats,
    /// Reasons for replicates that produced no accuracy.
    pub missing: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeatmapRecord {
    pub snr: f64,
    pub n: usize,
    pub seed_index: usize,
    pub seed: u64,
    pub algorithm: Algorithm,
    pub test_accuracy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Heatmap {
    pub grid: SweepGrid,
    /// Row-major over `(snr, n)`.
    pub cells: Vec<CellResult>,
    pub records: Vec<HeatmapRecord>,
}

impl Heatmap {
    pub fn cell(&self, snr_index: usize, n_index: usize) -> &CellResult {
        &self.cells[snr_index * self.grid.n_values.len() + n_index]
    }
}

fn final_accuracy(cfg: &BaseConfig, noise: LabelNoiseSpec) -> std::result::Result<f64, String> {
    let out = train_run(&cfg.train_config(noise), &cfg.setup().map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
    if let Some(a) = &out.trace.abort {
        return Err(format!("aborted at step {}: {}", a.step, a.detail));
    }
    out.final_test_accuracy().ok_or_else(|| "no logged rows".into())
}

/// Final test accuracy of both algorithms for every `(snr, n, seed)`.
pub fn run_heatmap(grid: &SweepGrid) -> Result<Heatmap> {
    grid.validate()?;
    let (rows, cols, seeds) = (grid.snr_values.len(), grid.n_values.len(), grid.seeds_per_cell);
    let jobs: Vec<(usize, usize, usize, Algorithm)> = (0..rows)
        .flat_map(|r| (0..cols).flat_map(move |c| (0..seeds).flat_map(move |s| [(r, c, s, Algorithm::Gd), (r, c, s, Algorithm::Lngd)])))
        .collect();
    let outcomes: Vec<std::result::Result<f64, String>> = jobs
        .par_iter()
        .map(|&(r, c, s, alg)| {
            let cfg = grid.cell_config(r, c, s);
            let noise = match alg {
                Algorithm::Gd => LabelNoiseSpec::None,
                Algorithm::Lngd => cfg.noise(),
            };
            final_accuracy(&cfg, noise)
        })
        .collect();

    let mut records = Vec::with_capacity(jobs.len());
    let mut cells = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        for c in 0..cols {
            let mut gd = vec![None; seeds];
            let mut lngd = vec![None; seeds];
            let mut missing = Vec::new();
            for (k, &(jr, jc, s, alg)) in jobs.iter().enumerate() {
                if (jr, jc) != (r, c) {
                    continue;
                }
                let acc = match &outcomes[k] {
                    Ok(a) => Some(*a),
                    Err(e) => {
                        missing.push(format!("seed {s} {alg:?}: {e}"));
                        None
                    }
                };
                match alg {
                    Algorithm::Gd => gd[s] = acc,
                    Algorithm::Lngd => lngd[s] = acc,
                }
                records.push(HeatmapRecord {
                    snr: grid.snr_values[r],
                    n: grid.n_values[c],
                    seed_index: s,
                    seed: grid.cell_seed(r, c, s),
                    algorithm: alg,
                    test_accuracy: acc,
                });
            }
            cells.push(CellResult {
                snr: grid.snr_values[r],
                n: grid.n_values[c],
                mu_scale: grid.mu_scale(grid.snr_values[r]),
                gd: AccuracyStats::from_values(gd),
                lngd: AccuracyStats::from_values(lngd),
                missing,
            });
        }
    }
    Ok(Heatmap { grid: grid.clone(), cells, records })
}

/// A named pass/fail outcome with a one-line explanation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Check { name: name.into(), passed, detail: detail.into() }
    }
}

fn finite_trace(trace: &TrainTrace) -> bool {
    trace.abort.is_none() && trace.rows.iter().all(|r| r.clean_train_loss.is_finite() && r.noisy_train_loss.is_finite())
}

fn fmt_acc(a: Option<f64>) -> String {
    a.map_or_else(|| "none".into(), |a| format!("{a:.4}"))
}

/// Theorem verdict of each arm.
pub fn dynamics_checks(r: &DynamicsResult) -> Vec<Check> {
    [&r.gd, &r.lngd]
        .into_iter()
        .map(|arm| match &arm.run {
            Err(e) => Check::new(format!("{} verdict", arm.label), false, e.clone()),
            Ok(a) => match &a.reports.verdict {
                Err(e) => Check::new(format!("{} verdict", arm.label), false, e.clone()),
                Ok(v) => Check::new(
                    format!("{} verdict", arm.label),
                    v.holds && a.trace.abort.is_none(),
                    format!(
                        "loss {:.4} ({}), test error {:.4} vs {:.4} ({})",
                        v.loss_value,
                        if v.loss_ok { "ok" } else { "out of range" },
                        v.test_error,
                        v.error_threshold,
                        if v.error_ok { "ok" } else { "out of range" }
                    ),
                ),
            },
        })
        .collect()
}

/// Every variant finishes with finite losses and final accuracy at least
/// the baseline's minus `tolerance`.
pub fn noise_checks(c: &NoiseComparison, tolerance: f64) -> Vec<Check> {
    let base = c.baseline.final_accuracy();
    c.arms
        .iter()
        .map(|arm| {
            let finite = arm.trace().is_some_and(finite_trace);
            let acc = arm.final_accuracy();
            let ok = finite && matches!((acc, base), (Some(a), Some(b)) if a >= b - tolerance);
            Check::new(
                arm.label.clone(),
                ok,
                format!("finite {finite}, accuracy {} vs baseline {} - {tolerance}", fmt_acc(acc), fmt_acc(base)),
            )
        })
        .collect()
}

/// Label-noise accuracy at least standard accuracy, per exponent.
pub fn q_sweep_checks(entries: &[QSweepEntry]) -> Vec<Check> {
    entries
        .iter()
        .map(|e| {
            let (gd, ln) = (e.dynamics.gd.final_accuracy(), e.dynamics.lngd.final_accuracy());
            Check::new(
                format!("q = {}", e.q),
                matches!((gd, ln), (Some(g), Some(l)) if l >= g),
                format!("label-noise {} vs standard {}", fmt_acc(ln), fmt_acc(gd)),
            )
        })
        .collect()
}

/// The two lowest-SNR cells at the smallest `n` gain at least `gain`, and no
/// cell loses more than `tolerance`.
pub fn heatmap_checks(h: &Heatmap, gain: f64, tolerance: f64) -> Vec<Check> {
    let mut snr_order: Vec<usize> = (0..h.grid.snr_values.len()).collect();
    snr_order.sort_by(|&a, &b| h.grid.snr_values[a].total_cmp(&h.grid.snr_values[b]));
    let n_col = (0..h.grid.n_values.len()).min_by_key(|&c| h.grid.n_values[c]).unwrap_or(0);
    let mut checks: Vec<Check> = snr_order
        .iter()
        .take(2)
        .map(|&row| {
            let cell = h.cell(row, n_col);
            let diff = cell.lngd.mean - cell.gd.mean;
            Check::new(
                format!("gain at snr {} n {}", cell.snr, cell.n),
                diff >= gain,
                format!("label-noise {:.4} - standard {:.4} = {diff:.4} (need >= {gain})", cell.lngd.mean, cell.gd.mean),
            )
        })
        .collect();
    let worst = h
        .cells
        .iter()
        .map(|c| (c.lngd.mean - c.gd.mean, c))
        .min_by(|a, b| a.0.total_cmp(&b.0));
    if let Some((diff, cell)) = worst {
        checks.push(Check::new(
            "never worse",
            diff >= -tolerance && h.cells.iter().all(|c| c.missing.is_empty()),
            format!("worst difference {diff:.4} at snr {} n {} (need >= -{tolerance})", cell.snr, cell.n),
        ));
    }
    checks
}
