//! Executable forms of the assumptions, bounds and theorem statements.
//!
//! Every asymptotic statement is instantiated with configurable hidden
//! constants (default 1) and `log d` for polylog factors. Reports carry the
//! evaluated ratio alongside the pass/fail flag.

use ndarray::Axis;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{generate_dataset, SignalSpec};
use crate::decomposition::{CoefficientSummary, Extreme};
use crate::error::{LabError, Result};
use crate::network::{init_network, Branch};
use crate::rng::{derive_seed, rng_from_seed};
use crate::trainer::{sample_multipliers, LabelNoiseSpec, TrainTrace};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    /// Fails, but by no more than the configured borderline factor.
    Borderline,
    Fail,
}

/// Whether the condition is `lhs >= rhs` or `lhs <= rhs`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundKind {
    Lower,
    Upper,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AssumptionConstants {
    pub dimension: f64,
    pub snr: f64,
    pub width: f64,
    pub samples: f64,
    pub learning_rate: f64,
    pub init_lower: f64,
    pub init_upper: f64,
    /// The `C` of the flip-rate window `(C log d / sqrt(mn), 1/C)`.
    pub flip: f64,
    /// A failing condition whose ratio is within this factor of the boundary
    /// is reported as borderline.
    pub borderline_factor: f64,
}

impl Default for AssumptionConstants {
    fn default() -> Self {
        AssumptionConstants {
            dimension: 1.0,
            snr: 1.0,
            width: 1.0,
            samples: 1.0,
            learning_rate: 1.0,
            init_lower: 1.0,
            init_upper: 1.0,
            flip: 1.0,
            borderline_factor: 2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssumptionCheck {
    pub item: String,
    pub condition: String,
    pub lhs: f64,
    pub rhs: f64,
    pub kind: BoundKind,
    pub constant: f64,
    /// `lhs / rhs`; the condition holds when it is `>= 1` (lower) or `<= 1` (upper).
    pub ratio: f64,
    pub status: Status,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssumptionReport {
    pub log_factor: f64,
    pub constants: AssumptionConstants,
    pub checks: Vec<AssumptionCheck>,
}

impl AssumptionReport {
    /// Worst status among the checks of one item (`"i"` .. `"v"`).
    pub fn item_status(&self, item: &str) -> Option<Status> {
        self.checks.iter().filter(|c| c.item == item).map(|c| c.status).max_by_key(|s| *s as u8)
    }

    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.status == Status::Pass)
    }

    pub fn render(&self) -> String {
        let mut out = format!("Assumption report (log factor {:.4})\n", self.log_factor);
        for c in &self.checks {
            let op = match c.kind {
                BoundKind::Lower => ">=",
                BoundKind::Upper => "<=",
            };
            out.push_str(&format!(
                "  ({:>3}) {:<40} {:>12.5e} {} {:<12.5e} ratio {:>10.4e}  {:?}\n",
                c.item, c.condition, c.lhs, op, c.rhs, c.ratio, c.status
            ));
        }
        out
    }
}

fn finite_ratio(lhs: f64, rhs: f64) -> f64 {
    let r = lhs / rhs;
    if r.is_nan() {
        0.0
    } else if r.is_infinite() {
        f64::MAX
    } else {
        r
    }
}

fn classify(ratio: f64, kind: BoundKind, factor: f64) -> Status {
    let holds = match kind {
        BoundKind::Lower => ratio >= 1.0,
        BoundKind::Upper => ratio <= 1.0,
    };
    let near = match kind {
        BoundKind::Lower => ratio * factor >= 1.0,
        BoundKind::Upper => ratio <= factor,
    };
    if holds {
        Status::Pass
    } else if near {
        Status::Borderline
    } else {
        Status::Fail
    }
}

fn check(item: &str, condition: &str, lhs: f64, rhs: f64, kind: BoundKind, constant: f64, factor: f64) -> AssumptionCheck {
    let ratio = finite_ratio(lhs, rhs);
    AssumptionCheck {
        item: item.into(),
        condition: condition.into(),
        lhs,
        rhs,
        kind,
        constant,
        ratio,
        status: classify(ratio, kind, factor),
    }
}

/// Evaluate items (i)-(v). Item (i) is compared without a log factor; the
/// other tilde bounds use `log d`. Never fails.
pub fn check_assumptions(
    spec: &SignalSpec,
    n: usize,
    m: usize,
    eta: f64,
    sigma_0: f64,
    p: f64,
    c: &AssumptionConstants,
) -> AssumptionReport {
    let d = spec.d() as f64;
    let nf = n as f64;
    let mf = m as f64;
    let sp = spec.sigma_p();
    let mu_norm = spec.mu_norm();
    let log_d = d.ln();
    let f = c.borderline_factor;
    let dim_rhs = c.dimension * (nf * nf).max(nf * spec.mu_norm_sq() / (sp * sp));
    let init_upper = (1.0 / mu_norm * d.powf(-0.625)).min(1.0 / (sp * d.sqrt()));
    let checks = vec![
        check("i", "d >= C max{n^2, n|mu|^2/sigma_p^2}", d, dim_rhs, BoundKind::Lower, c.dimension, f),
        check("i", "SNR <= C/sqrt(n)", spec.snr(), c.snr / nf.sqrt(), BoundKind::Upper, c.snr, f),
        check("ii", "m >= C log d", mf, c.width * log_d, BoundKind::Lower, c.width, f),
        check("ii", "n >= C log d", nf, c.samples * log_d, BoundKind::Lower, c.samples, f),
        check(
            "iii",
            "eta <= C log d/(sigma_p^2 d)",
            eta,
            c.learning_rate * log_d / (sp * sp * d),
            BoundKind::Upper,
            c.learning_rate,
            f,
        ),
        check(
            "iv",
            "sigma_0 >= C log d n/(sigma_p d^{3/4})",
            sigma_0,
            c.init_lower * log_d * nf / (sp * d.powf(0.75)),
            BoundKind::Lower,
            c.init_lower,
            f,
        ),
        check(
            "iv",
            "sigma_0 <= C log d min{..}",
            sigma_0,
            c.init_upper * log_d * init_upper,
            BoundKind::Upper,
            c.init_upper,
            f,
        ),
        check("v", "p > C log d/sqrt(mn)", p, c.flip * log_d / (mf * nf).sqrt(), BoundKind::Lower, c.flip, f),
        check("v", "p < 1/C", p, 1.0 / c.flip, BoundKind::Upper, c.flip, f),
    ];
    AssumptionReport { log_factor: log_d, constants: *c, checks }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Gd,
    Lngd,
}

impl Algorithm {
    pub fn of(noise: &LabelNoiseSpec) -> Self {
        match noise {
            LabelNoiseSpec::None => Algorithm::Gd,
            _ => Algorithm::Lngd,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StageConstants {
    pub stage1: f64,
    pub stage2: f64,
}

impl Default for StageConstants {
    fn default() -> Self {
        StageConstants { stage1: 1.0, stage2: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageEstimate {
    pub which: Algorithm,
    pub t1: f64,
    pub t2: f64,
    pub epsilon: Option<f64>,
    pub constants: StageConstants,
}

/// Stage-1 horizon and stopping time. `epsilon` is the target training loss
/// and is only read for standard GD.
#[allow(clippy::too_many_arguments)]
pub fn estimate_stage_times(
    spec: &SignalSpec,
    n: usize,
    m: usize,
    eta: f64,
    sigma_0: f64,
    epsilon: f64,
    which: Algorithm,
    c: &StageConstants,
) -> Result<StageEstimate> {
    let d = spec.d() as f64;
    let (nf, mf) = (n as f64, m as f64);
    let noise_energy = spec.sigma_p().powi(2) * d;
    let init_scale = sigma_0 * spec.sigma_p() * d.sqrt();
    if !(eta > 0.0 && sigma_0 > 0.0 && n > 0 && m > 0) {
        return Err(LabError::InvalidArgument("stage times need eta, sigma_0, n, m > 0".into()));
    }
    if init_scale >= 1.0 {
        return Err(LabError::InvalidArgument(format!(
            "sigma_0 sigma_p sqrt(d) = {init_scale:.4} >= 1: log(1/(sigma_0 sigma_p sqrt(d))) is not positive"
        )));
    }
    let t1 = c.stage1 * nf * mf * (1.0 / init_scale).ln() / (eta * noise_energy);
    let (t2, eps) = match which {
        Algorithm::Gd => {
            if !(epsilon > 0.0 && epsilon < 1.0) {
                return Err(LabError::InvalidArgument(format!("epsilon must lie in (0, 1), got {epsilon}")));
            }
            (t1 + c.stage2 * mf.powi(3) * nf / (eta * epsilon * noise_energy), Some(epsilon))
        }
        Algorithm::Lngd => {
            let signal_scale = sigma_0 * spec.mu_norm();
            if signal_scale >= 6.0 {
                return Err(LabError::InvalidArgument(format!(
                    "sigma_0 |mu| = {signal_scale:.4} >= 6: log(6/(sigma_0 |mu|)) is not positive"
                )));
            }
            (t1 + c.stage2 * mf * (6.0 / signal_scale).ln() / (eta * spec.mu_norm_sq()), None)
        }
    };
    Ok(StageEstimate { which, t1, t2, epsilon: eps, constants: *c })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Coefficient {
    Gamma,
    RhoBar,
    RhoUnder,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundViolation {
    pub step: usize,
    pub coefficient: Coefficient,
    pub value: f64,
    pub limit: f64,
    pub kind: BoundKind,
    pub j: i8,
    pub r: usize,
    pub i: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Proposition1Report {
    pub t_star: f64,
    pub alpha: f64,
    pub checked_steps: usize,
    pub violations: Vec<BoundViolation>,
}

impl Proposition1Report {
    pub fn clean(&self) -> bool {
        self.violations.is_empty()
    }
}

pub fn proposition1_alpha(t_star: f64) -> f64 {
    4.0 * t_star.ln()
}

/// Check `0 <= gamma <= alpha`, `0 <= rho_bar <= alpha`, `-alpha <= rho_under <= 0`
/// on every logged summary, using the extreme entries of each step.
pub fn proposition1_monitor(summaries: &[CoefficientSummary], t_star: f64) -> Proposition1Report {
    let alpha = proposition1_alpha(t_star);
    let mut violations = Vec::new();
    for s in summaries {
        let mut push = |coefficient, e: &Extreme, limit: f64, kind| {
            let bad = match kind {
                BoundKind::Lower => e.value < limit,
                BoundKind::Upper => e.value > limit,
            };
            if bad {
                violations.push(BoundViolation { step: s.step, coefficient, value: e.value, limit, kind, j: e.j, r: e.r, i: e.i });
            }
        };
        push(Coefficient::Gamma, &s.min_gamma, 0.0, BoundKind::Lower);
        push(Coefficient::Gamma, &s.max_gamma, alpha, BoundKind::Upper);
        push(Coefficient::RhoBar, &s.min_rho_bar, 0.0, BoundKind::Lower);
        push(Coefficient::RhoBar, &s.max_rho_bar, alpha, BoundKind::Upper);
        push(Coefficient::RhoUnder, &s.min_rho_under, -alpha, BoundKind::Lower);
        push(Coefficient::RhoUnder, &s.max_rho_under, 0.0, BoundKind::Upper);
    }
    Proposition1Report { t_star, alpha, checked_steps: summaries.len(), violations }
}

/// Zero-drift point `log((1-p)/p)` of the per-sample output under flip noise.
pub fn iota_fixed_point(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 0.5) {
        return Err(LabError::InvalidArgument(format!("flip rate {p} outside (0, 0.5)")));
    }
    Ok(((1.0 - p) / p).ln())
}

pub(crate) fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let k = v.len() / 2;
    if v.len() % 2 == 1 {
        v[k]
    } else {
        0.5 * (v[k - 1] + v[k])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IotaBand {
    pub scale: f64,
    pub offset: f64,
    /// Allowed relative deviation of the median of medians from the fixed point.
    pub fixed_point_tolerance: f64,
}

impl Default for IotaBand {
    fn default() -> Self {
        IotaBand { scale: 3.0, offset: 5.0, fixed_point_tolerance: 0.5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleIota {
    pub i: usize,
    pub at_t1: f64,
    pub sup: f64,
    pub median: f64,
    pub within_band: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stage2Report {
    pub t1: f64,
    /// First logged step at or after `t1`; its value stands in for iota at `t1`.
    pub t1_step: usize,
    pub band: IotaBand,
    pub samples: Vec<SampleIota>,
    pub all_within_band: bool,
    pub median_of_medians: f64,
    pub fixed_point: Option<f64>,
    pub relative_deviation: Option<f64>,
    pub fixed_point_ok: Option<bool>,
}

/// Boundedness of each sample's iota after `t1`, plus the comparison of the
/// typical stage-2 level with the fixed point when `p` is a flip rate in (0, 0.5).
pub fn stage2_boundedness_check(
    iota: &[(usize, Vec<f64>)],
    t1: f64,
    p: Option<f64>,
    band: &IotaBand,
) -> Result<Stage2Report> {
    let start = iota
        .iter()
        .position(|(step, _)| *step as f64 >= t1)
        .ok_or_else(|| LabError::InvalidArgument(format!("no logged step at or after t1 = {t1:.3}")))?;
    let tail = &iota[start..];
    let n = tail[0].1.len();
    let mut samples = Vec::with_capacity(n);
    for i in 0..n {
        let series: Vec<f64> = tail.iter().map(|(_, v)| v[i]).collect();
        let at_t1 = series[0];
        let sup = series.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        samples.push(SampleIota {
            i,
            at_t1,
            sup,
            median: median(&series),
            within_band: sup <= band.scale * at_t1 + band.offset,
        });
    }
    let median_of_medians = median(&samples.iter().map(|s| s.median).collect::<Vec<_>>());
    let fixed_point = p.and_then(|p| iota_fixed_point(p).ok());
    let relative_deviation = fixed_point.map(|fp| (median_of_medians - fp).abs() / fp);
    Ok(Stage2Report {
        t1,
        t1_step: tail[0].0,
        band: *band,
        all_within_band: samples.iter().all(|s| s.within_band),
        samples,
        median_of_medians,
        fixed_point,
        fixed_point_ok: relative_deviation.map(|r| r <= band.fixed_point_tolerance),
        relative_deviation,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LemmaCheck {
    pub lemma: String,
    pub statement: String,
    pub delta: f64,
    pub trials: usize,
    pub passed: usize,
    pub pass_rate: f64,
    /// False when a precondition of the displayed inequality is not met.
    pub applicable: bool,
}

impl LemmaCheck {
    fn new(lemma: &str, statement: String, delta: f64, outcomes: &[bool], applicable: bool) -> Self {
        let passed = outcomes.iter().filter(|&&b| b).count();
        LemmaCheck {
            lemma: lemma.into(),
            statement,
            delta,
            trials: outcomes.len(),
            passed,
            pass_rate: if outcomes.is_empty() { 0.0 } else { passed as f64 / outcomes.len() as f64 },
            applicable,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationSettings {
    pub n: usize,
    pub m: usize,
    pub sigma_0: f64,
    pub p: f64,
    pub trials: usize,
    /// Horizon for the per-sample flip counts.
    pub t: usize,
    pub seed: u64,
}

const MIN_TRIALS: usize = 100;

fn trial_outcomes(trials: usize, seed: u64, lemma: u64, f: impl Fn(u64) -> bool + Sync) -> Vec<bool> {
    (0..trials as u64).into_par_iter().map(|k| f(derive_seed(seed, &[lemma, k]))).collect()
}

fn validate_settings(s: &ConcentrationSettings) -> Result<()> {
    if s.trials < MIN_TRIALS {
        return Err(LabError::InvalidArgument(format!("need at least {MIN_TRIALS} trials, got {}", s.trials)));
    }
    if s.n < 2 || s.m == 0 {
        return Err(LabError::InvalidArgument("need n >= 2 and m >= 1".into()));
    }
    if !(0.0..=1.0).contains(&s.p) {
        return Err(LabError::InvalidArgument(format!("flip rate {} outside [0, 1]", s.p)));
    }
    Ok(())
}

/// Noise norms in `[sigma_p^2 d/2, 3 sigma_p^2 d/2]` and pairwise inner
/// products below `2 sigma_p^2 sqrt(d log(4n^2/delta))`, for all samples.
pub fn lemma_b1(spec: &SignalSpec, s: &ConcentrationSettings, delta: f64) -> Result<LemmaCheck> {
    validate_settings(s)?;
    let d = spec.d() as f64;
    let energy = spec.sigma_p().powi(2) * d;
    let cross = 2.0 * spec.sigma_p().powi(2) * (d * (4.0 * (s.n * s.n) as f64 / delta).ln()).sqrt();
    let outcomes = trial_outcomes(s.trials, s.seed, 1, |seed| {
        let ds = generate_dataset(spec, s.n, seed, &mut rng_from_seed(seed));
        let norms_ok = ds.noise_norms_sq().iter().all(|&v| v >= energy / 2.0 && v <= 1.5 * energy);
        let xi = ds.noise_matrix();
        let gram = xi.dot(&xi.t());
        let cross_ok = (0..s.n).all(|i| (0..s.n).all(|k| i == k || gram[[i, k]].abs() <= cross));
        norms_ok && cross_ok
    });
    Ok(LemmaCheck::new(
        "B.1",
        format!("{:.1} <= |xi|^2 <= {:.1}, |<xi_i, xi_k>| <= {cross:.3}", energy / 2.0, 1.5 * energy),
        delta,
        &outcomes,
        true,
    ))
}

/// Initial projections on `mu` and on the training noise, upper and
/// anti-concentration lower bounds, for all `j, r, i`.
pub fn lemma_b2(spec: &SignalSpec, s: &ConcentrationSettings, delta: f64) -> Result<LemmaCheck> {
    validate_settings(s)?;
    let (n, m) = (s.n as f64, s.m as f64);
    let mu_scale = s.sigma_0 * spec.mu_norm();
    let xi_scale = s.sigma_0 * spec.sigma_p() * (spec.d() as f64).sqrt();
    let mu_upper = (2.0 * (8.0 * m / delta).ln()).sqrt() * mu_scale;
    let xi_upper = 2.0 * (8.0 * m * n / delta).ln().sqrt() * xi_scale;
    let outcomes = trial_outcomes(s.trials, s.seed, 2, |seed| {
        let mut rng = rng_from_seed(seed);
        let ds = generate_dataset(spec, s.n, seed, &mut rng);
        let Ok(net) = init_network(spec.d(), s.m, 2, s.sigma_0, &mut rng) else {
            return false;
        };
        let mut ok = true;
        for (j, w) in [(1.0, net.weights(Branch::Plus)), (-1.0, net.weights(Branch::Minus))] {
            let on_mu = w.t().dot(&spec.mu());
            let on_xi = ds.noise_matrix().dot(w);
            ok &= on_mu.iter().all(|v| v.abs() <= mu_upper);
            ok &= on_xi.iter().all(|v| v.abs() <= xi_upper);
            ok &= on_mu.iter().map(|v| j * v).fold(f64::NEG_INFINITY, f64::max) >= mu_scale / 2.0;
            ok &= on_xi
                .axis_iter(Axis(0))
                .all(|row| row.iter().map(|v| j * v).fold(f64::NEG_INFINITY, f64::max) >= xi_scale / 4.0);
        }
        ok
    });
    Ok(LemmaCheck::new(
        "B.2",
        format!(
            "|<w,mu>| <= {mu_upper:.4e}, |<w,xi>| <= {xi_upper:.4e}, max_r j<w,mu> >= {:.4e}, max_r j<w,xi> >= {:.4e}",
            mu_scale / 2.0,
            xi_scale / 4.0
        ),
        delta,
        &outcomes,
        true,
    ))
}

/// Per-step flip counts within `sqrt((n/2) log(4/delta))` of their means.
pub fn lemma_b3(s: &ConcentrationSettings, delta: f64) -> Result<LemmaCheck> {
    validate_settings(s)?;
    let n = s.n as f64;
    let band = ((n / 2.0) * (4.0 / delta).ln()).sqrt();
    let noise = LabelNoiseSpec::Flip { p: s.p };
    let outcomes = trial_outcomes(s.trials, s.seed, 3, |seed| {
        let eps = sample_multipliers(&noise, s.n, &mut rng_from_seed(seed));
        let minus = eps.iter().filter(|&&e| e < 0.0).count() as f64;
        (minus - n * s.p).abs() <= band && ((n - minus) - n * (1.0 - s.p)).abs() <= band
    });
    Ok(LemmaCheck::new("B.3", format!("||S_-| - np| <= {band:.3}, ||S_+| - n(1-p)| <= {band:.3}"), delta, &outcomes, true))
}

/// Per-sample flip counts up to step `t`: the deviation form, and the interval
/// form `|S_{i,-}| in [pt/2, 3pt/2]` which needs `t >= 2 log(4n/delta)/p^2`.
pub fn lemma_b4(s: &ConcentrationSettings, delta: f64) -> Result<(LemmaCheck, LemmaCheck)> {
    validate_settings(s)?;
    let (n, t) = (s.n as f64, s.t as f64);
    let p = s.p;
    let dev = ((t / 2.0) * (4.0 * n / delta).ln()).sqrt();
    let threshold = 2.0 * (4.0 * n / delta).ln() / (p * p);
    let noise = LabelNoiseSpec::Flip { p };
    let counts: Vec<Vec<usize>> = (0..s.trials as u64)
        .into_par_iter()
        .map(|k| {
            let mut rng = rng_from_seed(derive_seed(s.seed, &[4, k]));
            let mut minus = vec![0usize; s.n];
            for _ in 0..s.t {
                for (c, e) in minus.iter_mut().zip(sample_multipliers(&noise, s.n, &mut rng)) {
                    *c += usize::from(e < 0.0);
                }
            }
            minus
        })
        .collect();
    let deviation: Vec<bool> =
        counts.iter().map(|c| c.iter().all(|&k| (k as f64 - p * t).abs() <= dev)).collect();
    let interval: Vec<bool> = counts
        .iter()
        .map(|c| c.iter().all(|&k| (k as f64) >= p * t / 2.0 && (k as f64) <= 1.5 * p * t))
        .collect();
    Ok((
        LemmaCheck::new("B.4", format!("||S_i,-| - pt| <= {dev:.3} at t = {}", s.t), delta, &deviation, true),
        LemmaCheck::new(
            "B.4 interval",
            format!("|S_i,-| in [{:.1}, {:.1}] at t = {} (needs t >= {threshold:.1})", p * t / 2.0, 1.5 * p * t, s.t),
            delta,
            &interval,
            p > 0.0 && t >= threshold,
        ),
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationReport {
    pub settings: ConcentrationSettings,
    pub checks: Vec<LemmaCheck>,
}

impl ConcentrationReport {
    pub fn render(&self) -> String {
        let mut out = String::from("Concentration suite\n");
        for c in &self.checks {
            out.push_str(&format!(
                "  {:<13} delta {:<6} pass {:>5}/{:<5} ({:.4}){}  {}\n",
                c.lemma,
                c.delta,
                c.passed,
                c.trials,
                c.pass_rate,
                if c.applicable { "" } else { " n/a" },
                c.statement
            ));
        }
        out
    }
}

/// All four lemmas at one `delta`.
pub fn concentration_suite(spec: &SignalSpec, s: &ConcentrationSettings, delta: f64) -> Result<ConcentrationReport> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(LabError::InvalidArgument(format!("delta must lie in (0, 1), got {delta}")));
    }
    let (b4, b4_interval) = lemma_b4(s, delta)?;
    Ok(ConcentrationReport {
        settings: s.clone(),
        checks: vec![lemma_b1(spec, s, delta)?, lemma_b2(spec, s, delta)?, lemma_b3(s, delta)?, b4, b4_interval],
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VerdictSettings {
    /// Target training loss for standard GD.
    pub epsilon: f64,
    pub gd_error_floor: f64,
    pub gd_slack: f64,
    pub lngd_loss_band: (f64, f64),
    /// The clean loss is averaged over logged steps in this trailing window.
    pub lngd_window: usize,
    pub c_test: f64,
}

impl Default for VerdictSettings {
    fn default() -> Self {
        VerdictSettings {
            epsilon: 0.05,
            gd_error_floor: 0.24,
            gd_slack: 0.04,
            lngd_loss_band: (0.1, 1.5),
            lngd_window: 500,
            c_test: 1.0,
        }
    }
}

/// `C_test` at which `2 exp(-C d / n^2)` equals `target`.
pub fn c_test_for_bound(target: f64, d: usize, n: usize) -> f64 {
    -((n * n) as f64 / d as f64) * (target / 2.0).ln()
}

pub fn lngd_error_bound(c_test: f64, d: usize, n: usize) -> f64 {
    2.0 * (-c_test * d as f64 / (n * n) as f64).exp()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoremVerdict {
    pub which: Algorithm,
    pub loss_value: f64,
    pub loss_ok: bool,
    pub test_error: f64,
    pub error_threshold: f64,
    pub error_ok: bool,
    pub holds: bool,
    /// Set when the error bound is at least 0.5 and so says nothing.
    pub vacuous: bool,
    pub note: String,
}

/// The verdict of the theorem matching the trace's noise kind.
pub fn theorem_verdicts(trace: &TrainTrace, settings: &VerdictSettings) -> Result<TheoremVerdict> {
    let last = trace.last().ok_or_else(|| LabError::InvalidArgument("trace has no logged rows".into()))?;
    let which = Algorithm::of(&trace.shape.noise);
    let verdict = match which {
        Algorithm::Gd => {
            let threshold = settings.gd_error_floor - settings.gd_slack;
            let loss_ok = last.clean_train_loss <= settings.epsilon;
            let error_ok = last.test_error_01 >= threshold;
            TheoremVerdict {
                which,
                loss_value: last.clean_train_loss,
                loss_ok,
                test_error: last.test_error_01,
                error_threshold: threshold,
                error_ok,
                holds: loss_ok && error_ok,
                vacuous: false,
                note: format!("final clean loss <= {}, final test error >= {threshold}", settings.epsilon),
            }
        }
        Algorithm::Lngd => {
            let from = last.step.saturating_sub(settings.lngd_window);
            let window: Vec<f64> =
                trace.rows.iter().filter(|r| r.step >= from).map(|r| r.clean_train_loss).collect();
            let loss = window.iter().sum::<f64>() / window.len() as f64;
            let (lo, hi) = settings.lngd_loss_band;
            let bound = lngd_error_bound(settings.c_test, trace.shape.d, trace.shape.n);
            let loss_ok = loss >= lo && loss <= hi;
            let error_ok = last.test_error_01 <= bound;
            TheoremVerdict {
                which,
                loss_value: loss,
                loss_ok,
                test_error: last.test_error_01,
                error_threshold: bound,
                error_ok,
                holds: loss_ok && error_ok,
                vacuous: bound >= 0.5,
                note: format!(
                    "mean clean loss over last {} steps in [{lo}, {hi}], final test error <= 2 exp(-{} d/n^2) = {bound:.4}; \
                     C_test is unspecified by the theory",
                    settings.lngd_window, settings.c_test
                ),
            }
        }
    };
    Ok(verdict)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reference() -> SignalSpec {
        SignalSpec::axis_aligned(2000, 2.0, 0.5).unwrap()
    }

    fn find<'a>(r: &'a AssumptionReport, cond: &str) -> &'a AssumptionCheck {
        r.checks.iter().find(|c| c.condition.starts_with(cond)).unwrap()
    }

    #[test]
    fn snr_item_is_borderline_at_reference() {
        let r = check_assumptions(&reference(), 200, 20, 0.5, 0.01, 0.1, &AssumptionConstants::default());
        let snr = find(&r, "SNR");
        assert!((snr.ratio - 0.0894427 / (1.0 / 200f64.sqrt())).abs() < 1e-6);
        assert!((snr.ratio - 1.2649).abs() < 1e-3);
        assert_eq!(snr.status, Status::Borderline);
        assert!(r.checks.iter().all(|c| c.ratio.is_finite()));
    }

    #[test]
    fn low_dimension_fails_item_i() {
        let spec = SignalSpec::axis_aligned(10, 2.0, 0.5).unwrap();
        let r = check_assumptions(&spec, 200, 20, 0.5, 0.01, 0.1, &AssumptionConstants::default());
        let dim = find(&r, "d >=");
        assert!((dim.ratio - 10.0 / 40000.0).abs() < 1e-15);
        assert_eq!(dim.status, Status::Fail);
        assert_eq!(r.item_status("i"), Some(Status::Fail));
    }

    #[test]
    fn zero_flip_rate_fails_item_v() {
        let r = check_assumptions(&reference(), 200, 20, 0.5, 0.01, 0.0, &AssumptionConstants::default());
        assert_eq!(find(&r, "p >").status, Status::Fail);
        assert_eq!(find(&r, "p >").ratio, 0.0);
    }

    #[test]
    fn degenerate_inputs_still_report_finite_ratios() {
        let r = check_assumptions(&reference(), 0, 0, 0.0, 0.0, 0.0, &AssumptionConstants::default());
        assert!(r.checks.iter().all(|c| c.ratio.is_finite()));
    }

    #[test]
    fn stage_times_at_reference() {
        let c = StageConstants::default();
        let gd = estimate_stage_times(&reference(), 200, 20, 0.5, 0.01, 0.05, Algorithm::Gd, &c).unwrap();
        let t1 = 200.0 * 20.0 * (1.0 / (0.01 * 0.5 * 2000f64.sqrt())).ln() / (0.5 * 500.0);
        assert!((gd.t1 - t1).abs() < 1e-9);
        assert!((gd.t1 - 23.97).abs() < 0.01);
        assert!((gd.t2 - gd.t1 - 8000.0 * 200.0 / (0.5 * 0.05 * 500.0)).abs() < 1e-6);
        let ln = estimate_stage_times(&reference(), 200, 20, 0.5, 0.01, 0.05, Algorithm::Lngd, &c).unwrap();
        assert!((ln.t2 - ln.t1 - 20.0 * 300f64.ln() / 2.0).abs() < 1e-9);
        assert!((ln.t2 - ln.t1 - 57.04).abs() < 0.01);
        let fast = estimate_stage_times(&reference(), 200, 20, 1.0, 0.01, 0.05, Algorithm::Gd, &c).unwrap();
        assert!((fast.t1 - gd.t1 / 2.0).abs() < 1e-12);
    }

    #[test]
    fn stage_times_reject_large_init() {
        let c = StageConstants::default();
        let err = estimate_stage_times(&reference(), 200, 20, 0.5, 0.05, 0.05, Algorithm::Gd, &c).unwrap_err();
        assert!(err.to_string().contains(">= 1"));
        assert!(estimate_stage_times(&reference(), 200, 20, 0.5, 0.01, 1.5, Algorithm::Gd, &c).is_err());
    }

    #[test]
    fn alpha_at_2000() {
        assert!((proposition1_alpha(2000.0) - 30.404).abs() < 1e-3);
    }

    #[test]
    fn fixed_point_values() {
        assert!((iota_fixed_point(0.1).unwrap() - 9f64.ln()).abs() < 1e-15);
        assert!((iota_fixed_point(0.25).unwrap() - 3f64.ln()).abs() < 1e-15);
        assert!(iota_fixed_point(0.5 - 1e-12).unwrap().abs() < 1e-11);
        for p in [0.0, 0.5, 0.7, -0.1, f64::NAN] {
            assert!(iota_fixed_point(p).is_err());
        }
        // Drift balance at the fixed point.
        let p = 0.1;
        let z = iota_fixed_point(p).unwrap();
        assert!(((1.0 - p) / (1.0 + z.exp()) - p / (1.0 + (-z).exp())).abs() < 1e-15);
    }

    #[test]
    fn constant_iota_is_in_band() {
        let series: Vec<(usize, Vec<f64>)> = (0..10).map(|s| (s * 10, vec![2.0, 1.0])).collect();
        let r = stage2_boundedness_check(&series, 25.0, Some(0.1), &IotaBand::default()).unwrap();
        assert_eq!(r.t1_step, 30);
        assert!(r.all_within_band);
        assert_eq!(r.samples[0].sup, 2.0);
        assert_eq!(r.median_of_medians, 1.5);
        assert!(r.fixed_point_ok.unwrap());
        assert!(stage2_boundedness_check(&series, 1000.0, None, &IotaBand::default()).is_err());
    }

    #[test]
    fn iota_spike_leaves_band() {
        let mut series: Vec<(usize, Vec<f64>)> = (0..5).map(|s| (s, vec![1.0])).collect();
        series[3].1[0] = 8.01;
        let r = stage2_boundedness_check(&series, 0.0, None, &IotaBand::default()).unwrap();
        assert!(!r.all_within_band);
        assert!(r.fixed_point.is_none());
    }

    #[test]
    fn median_even_odd() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
        assert!(median(&[]).is_nan());
    }

    #[test]
    fn c_test_hits_target() {
        let c = c_test_for_bound(0.05, 2000, 200);
        assert!((lngd_error_bound(c, 2000, 200) - 0.05).abs() < 1e-12);
        assert!((lngd_error_bound(1.0, 2000, 200) - 2.0 * (-0.05f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn flip_count_lemmas_at_small_scale() {
        let s = ConcentrationSettings { n: 20, m: 20, sigma_0: 0.01, p: 0.1, trials: 200, t: 2000, seed: 3 };
        let b3 = lemma_b3(&s, 0.05).unwrap();
        assert!(b3.pass_rate >= 0.95, "{b3:?}");
        let (dev, interval) = lemma_b4(&s, 0.05).unwrap();
        assert!(interval.applicable);
        assert!(dev.pass_rate >= 0.95 && interval.pass_rate >= 0.95);
        let zero = ConcentrationSettings { p: 0.0, ..s };
        assert_eq!(lemma_b3(&zero, 0.05).unwrap().pass_rate, 1.0);
        assert!(!lemma_b4(&zero, 0.05).unwrap().1.applicable);
    }

    #[test]
    fn suite_rejects_few_trials() {
        let s = ConcentrationSettings { n: 20, m: 20, sigma_0: 0.01, p: 0.1, trials: 10, t: 100, seed: 0 };
        assert!(concentration_suite(&reference(), &s, 0.01).is_err());
    }

    #[test]
    fn suite_is_deterministic() {
        let spec = SignalSpec::axis_aligned(200, 2.0, 0.5).unwrap();
        let s = ConcentrationSettings { n: 5, m: 4, sigma_0: 0.01, p: 0.2, trials: 100, t: 50, seed: 9 };
        assert_eq!(concentration_suite(&spec, &s, 0.05).unwrap(), concentration_suite(&spec, &s, 0.05).unwrap());
    }

    fn summary(step: usize, v: [f64; 6]) -> CoefficientSummary {
        let e = |value| Extreme { value, j: 1, r: 0, i: Some(0) };
        CoefficientSummary {
            step,
            max_gamma: e(v[0]),
            min_gamma: e(v[1]),
            mean_gamma: 0.0,
            max_rho_bar: e(v[2]),
            min_rho_bar: e(v[3]),
            mean_rho_bar: 0.0,
            max_rho_under: e(v[4]),
            min_rho_under: e(v[5]),
            mean_rho_under: 0.0,
        }
    }

    proptest::proptest! {
        #[test]
        fn monitor_never_gains_violations_as_horizon_grows(
            rows in proptest::collection::vec(proptest::array::uniform6(-60.0f64..60.0), 1..20),
            t in 2.0f64..1e6,
            factor in 1.0f64..100.0,
        ) {
            let s: Vec<_> = rows.iter().enumerate().map(|(k, v)| summary(k, *v)).collect();
            let short = proposition1_monitor(&s, t).violations.len();
            let long = proposition1_monitor(&s, t * factor).violations.len();
            proptest::prop_assert!(long <= short);
        }

        #[test]
        fn fixed_point_zeroes_expected_flip_drift(p in 1e-3f64..0.499) {
            use crate::network::loss_derivative;
            let f = iota_fixed_point(p).unwrap();
            let drift = (1.0 - p) * loss_derivative(f) - p * loss_derivative(-f);
            proptest::prop_assert!(drift.abs() < 1e-12, "drift {drift:e} at p = {p}");
            proptest::prop_assert!(f > 0.0);
        }
    }
}
