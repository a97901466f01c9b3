//! Full-batch gradient descent with optional per-step label noise.
//!
//! Standard GD is the special case where every multiplier is `+1`. At each
//! step the loss is `(1/n) sum_i l(eps_i y_i f(W, x_i))` with fresh multipliers.

use ndarray::Array1;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data::{generate_dataset, Dataset, SignalSpec};
use crate::decomposition::{self, iota_all, CoefficientState, CoefficientSummary};
use crate::error::{LabError, Result};
use crate::network::{
    gradient_from_projections, init_network, loss_derivatives, mean_loss, zero_one_error, Network,
    Projections,
};
use crate::rng::{stream_rng, Stream};

/// Distribution of the per-sample label multipliers `eps_i`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LabelNoiseSpec {
    None,
    /// `-1` with probability `p`, else `+1`.
    Flip { p: f64 },
    Gaussian { mean: f64, std: f64 },
    Uniform { lo: f64, hi: f64 },
}

impl LabelNoiseSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            LabelNoiseSpec::None => Ok(()),
            LabelNoiseSpec::Flip { p } if (0.0..=1.0).contains(&p) => Ok(()),
            LabelNoiseSpec::Flip { p } => Err(LabError::InvalidNoise(format!("flip rate {p} outside [0, 1]"))),
            LabelNoiseSpec::Gaussian { mean, std } if mean.is_finite() && std >= 0.0 && std.is_finite() => Ok(()),
            LabelNoiseSpec::Gaussian { mean, std } => {
                Err(LabError::InvalidNoise(format!("gaussian({mean}, {std}) needs finite mean and std >= 0")))
            }
            LabelNoiseSpec::Uniform { lo, hi } if lo < hi && lo.is_finite() && hi.is_finite() => Ok(()),
            LabelNoiseSpec::Uniform { lo, hi } => Err(LabError::InvalidNoise(format!("uniform({lo}, {hi}) needs lo < hi"))),
        }
    }

    /// Short name, free of commas so it can sit in a CSV cell.
    pub fn label(&self) -> String {
        match *self {
            LabelNoiseSpec::None => "none".into(),
            LabelNoiseSpec::Flip { p } => format!("flip({p})"),
            LabelNoiseSpec::Gaussian { mean, std } => format!("gaussian({mean}:{std})"),
            LabelNoiseSpec::Uniform { lo, hi } => format!("uniform({lo}:{hi})"),
        }
    }

    pub fn flip_rate(&self) -> Option<f64> {
        match *self {
            LabelNoiseSpec::Flip { p } => Some(p),
            _ => None,
        }
    }
}

pub fn sample_multipliers<R: Rng + ?Sized>(noise: &LabelNoiseSpec, n: usize, rng: &mut R) -> Vec<f64> {
    match *noise {
        LabelNoiseSpec::None => vec![1.0; n],
        LabelNoiseSpec::Flip { p } => (0..n).map(|_| if rng.random::<f64>() < p { -1.0 } else { 1.0 }).collect(),
        LabelNoiseSpec::Gaussian { mean, std } => {
            (0..n).map(|_| mean + std * rng.sample::<f64, _>(StandardNormal)).collect()
        }
        LabelNoiseSpec::Uniform { lo, hi } => (0..n).map(|_| rng.random_range(lo..hi)).collect(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub eta: f64,
    pub steps: usize,
    pub noise: LabelNoiseSpec,
    pub log_stride: usize,
    pub seed: u64,
    pub n_test: usize,
    /// Full coefficient snapshots every this many steps; 0 disables them.
    pub snapshot_stride: usize,
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(LabError::InvalidConfig(format!("eta must be positive, got {}", self.eta)));
        }
        if self.log_stride == 0 {
            return Err(LabError::InvalidConfig("log_stride must be positive".into()));
        }
        if self.steps > 0 && self.log_stride > self.steps {
            return Err(LabError::InvalidConfig(format!(
                "log_stride {} exceeds steps {}",
                self.log_stride, self.steps
            )));
        }
        if self.n_test == 0 {
            return Err(LabError::InvalidConfig("n_test must be positive".into()));
        }
        self.noise.validate()
    }
}

/// Problem size and model shape of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSetup {
    pub spec: SignalSpec,
    pub n: usize,
    pub m: usize,
    pub q: u32,
    pub sigma_0: f64,
}

impl RunSetup {
    /// The two-patch setting with `mu = [mu_scale, 0, ..., 0]`.
    pub fn axis_aligned(d: usize, mu_scale: f64, sigma_p: f64, n: usize, m: usize, q: u32, sigma_0: f64) -> Result<Self> {
        Ok(RunSetup { spec: SignalSpec::axis_aligned(d, mu_scale, sigma_p)?, n, m, q, sigma_0 })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub step: usize,
    pub clean_train_loss: f64,
    pub noisy_train_loss: f64,
    pub test_error_01: f64,
    pub max_gamma: f64,
    pub mean_gamma: f64,
    pub max_rho_bar: f64,
    pub mean_rho_bar: f64,
    pub min_rho_under: f64,
    pub ratio_rho_over_gamma: f64,
    pub iota_mean: f64,
    pub iota_max: f64,
    pub flip_count: usize,
}

impl TraceRow {
    pub const COLUMNS: [&'static str; 13] = [
        "step",
        "clean_train_loss",
        "noisy_train_loss",
        "test_error_01",
        "max_gamma",
        "mean_gamma",
        "max_rho_bar",
        "mean_rho_bar",
        "min_rho_under",
        "ratio_rho_over_gamma",
        "iota_mean",
        "iota_max",
        "flip_count",
    ];

    pub fn test_accuracy(&self) -> f64 {
        1.0 - self.test_error_01
    }
}

/// Full coefficient arrays at one step.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientSnapshot {
    pub step: usize,
    pub gamma: ndarray::Array2<f64>,
    pub rho_bar: ndarray::Array3<f64>,
    pub rho_under: ndarray::Array3<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Abort {
    pub step: usize,
    pub detail: String,
}

/// Bookkeeping over every step, logged or not.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MonotonicityStats {
    pub steps: usize,
    /// Count of (step, j, r, i) where a defined `rho_bar` strictly decreased.
    pub rho_bar_decreases: usize,
    pub min_rho_bar_increment: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunShape {
    pub n: usize,
    pub d: usize,
    pub m: usize,
    pub q: u32,
    pub n_test: usize,
    pub steps: usize,
    pub eta: f64,
    pub noise: LabelNoiseSpec,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainTrace {
    pub shape: RunShape,
    pub rows: Vec<TraceRow>,
    pub summaries: Vec<CoefficientSummary>,
    /// `(step, iota_i for every i)` at each logged step.
    pub iota: Vec<(usize, Vec<f64>)>,
    pub snapshots: Vec<CoefficientSnapshot>,
    pub monotonicity: MonotonicityStats,
    pub abort: Option<Abort>,
}

impl TrainTrace {
    pub fn last(&self) -> Option<&TraceRow> {
        self.rows.last()
    }

    pub fn iota_series(&self) -> Vec<Vec<f64>> {
        decomposition::iota_series(&self.iota)
    }

    pub fn logged_steps(&self) -> Vec<usize> {
        self.rows.iter().map(|r| r.step).collect()
    }
}

/// Everything one gradient step used, handed to the coefficient recurrences.
#[derive(Debug, Clone)]
pub struct StepContext {
    pub step: usize,
    pub eta: f64,
    pub q: u32,
    pub multipliers: Vec<f64>,
    /// `l'(eps_i y_i f_i)` at the pre-update weights.
    pub loss_derivs: Vec<f64>,
    pub outputs: Array1<f64>,
    pub projections: Projections,
}

/// One in-place update `W <- W - eta * grad L^eps(W)`.
pub fn train_step(net: &mut Network, ds: &Dataset, multipliers: &[f64], eta: f64, step: usize) -> Result<StepContext> {
    crate::network::check_multipliers(ds, multipliers)?;
    if ds.is_empty() {
        return Err(LabError::EmptyDataset);
    }
    let q = net.q();
    let projections = Projections::compute(net, ds)?;
    let outputs = projections.outputs(q);
    let loss_derivs = loss_derivatives(&outputs, ds.labels(), multipliers);
    let grad = gradient_from_projections(&projections, ds, q, &loss_derivs, multipliers);
    if !grad.is_finite() {
        let bad_outputs = outputs.iter().filter(|v| !v.is_finite()).count();
        return Err(LabError::NonFinite {
            step,
            detail: format!("gradient norm {} with {bad_outputs} non-finite outputs", grad.norm()),
        });
    }
    net.apply_gradient(&grad, eta);
    Ok(StepContext { step, eta, q, multipliers: multipliers.to_vec(), loss_derivs, outputs, projections })
}

/// What an observer sees at each logged step, before that step's update.
pub struct LoggedState<'a> {
    pub step: usize,
    pub net: &'a Network,
    pub state: &'a CoefficientState,
    pub dataset: &'a Dataset,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub network: Network,
    pub trace: TrainTrace,
    pub state: CoefficientState,
    pub dataset: Dataset,
    pub test_set: Dataset,
}

impl RunOutput {
    pub fn final_test_accuracy(&self) -> Option<f64> {
        self.trace.last().map(TraceRow::test_accuracy)
    }
}

pub fn train_run(config: &TrainConfig, setup: &RunSetup) -> Result<RunOutput> {
    train_run_observed(config, setup, &mut |_| {})
}

/// Run `config.steps` steps. Dataset, init, multipliers and test set come from
/// separate streams of `config.seed`. A non-finite gradient stops the run and
/// is recorded in `trace.abort`.
pub fn train_run_observed(
    config: &TrainConfig,
    setup: &RunSetup,
    observer: &mut dyn FnMut(&LoggedState<'_>),
) -> Result<RunOutput> {
    config.validate()?;
    if setup.n == 0 {
        return Err(LabError::InvalidConfig("n must be positive".into()));
    }
    let spec = &setup.spec;
    let seed = config.seed;
    let dataset = generate_dataset(spec, setup.n, seed, &mut stream_rng(seed, Stream::Data));
    let test_set = generate_dataset(spec, config.n_test, seed, &mut stream_rng(seed, Stream::Test));
    let mut net = init_network(spec.d(), setup.m, setup.q, setup.sigma_0, &mut stream_rng(seed, Stream::Init))?;
    let mut noise_rng = stream_rng(seed, Stream::LabelNoise);
    let mut state = CoefficientState::new(&net, &dataset);

    let mut trace = TrainTrace {
        shape: RunShape {
            n: setup.n,
            d: spec.d(),
            m: setup.m,
            q: setup.q,
            n_test: config.n_test,
            steps: config.steps,
            eta: config.eta,
            noise: config.noise,
        },
        rows: Vec::new(),
        summaries: Vec::new(),
        iota: Vec::new(),
        snapshots: Vec::new(),
        monotonicity: MonotonicityStats { min_rho_bar_increment: f64::INFINITY, ..Default::default() },
        abort: None,
    };

    let mut step = 0;
    loop {
        let eps = sample_multipliers(&config.noise, setup.n, &mut noise_rng);
        let last = step == config.steps;
        let log = last || step % config.log_stride == 0;
        let snapshot = config.snapshot_stride > 0 && (last || step % config.snapshot_stride == 0);
        if snapshot {
            trace.snapshots.push(CoefficientSnapshot {
                step,
                gamma: state.gamma.clone(),
                rho_bar: state.rho_bar.clone(),
                rho_under: state.rho_under.clone(),
            });
        }
        let pending = if log {
            observer(&LoggedState { step, net: &net, state: &state, dataset: &dataset });
            Some((zero_one_error(&net, &test_set)?, state.summary(), iota_all(&state)))
        } else {
            None
        };
        let outputs = if last {
            Projections::compute(&net, &dataset)?.outputs(setup.q)
        } else {
            match train_step(&mut net, &dataset, &eps, config.eta, step) {
                Ok(ctx) => {
                    let stats = decomposition::update_coefficients(&mut state, &ctx)?;
                    trace.monotonicity.steps += 1;
                    trace.monotonicity.rho_bar_decreases += stats.rho_bar_decreases;
                    trace.monotonicity.min_rho_bar_increment =
                        trace.monotonicity.min_rho_bar_increment.min(stats.min_rho_bar_increment);
                    ctx.outputs
                }
                Err(LabError::NonFinite { step, detail }) => {
                    trace.abort = Some(Abort { step, detail });
                    break;
                }
                Err(e) => return Err(e),
            }
        };
        if let Some((test_error, summary, iota)) = pending {
            trace.rows.push(make_row(step, &outputs, &dataset, &eps, &config.noise, test_error, &summary, &iota));
            trace.summaries.push(summary);
            trace.iota.push((step, iota));
        }
        if last {
            break;
        }
        step += 1;
    }
    Ok(RunOutput { network: net, trace, state, dataset, test_set })
}

#[allow(clippy::too_many_arguments)]
fn make_row(
    step: usize,
    outputs: &Array1<f64>,
    ds: &Dataset,
    eps: &[f64],
    noise: &LabelNoiseSpec,
    test_error: f64,
    summary: &CoefficientSummary,
    iota: &[f64],
) -> TraceRow {
    let flip_count = match noise {
        LabelNoiseSpec::Flip { .. } => eps.iter().filter(|&&e| e == -1.0).count(),
        _ => 0,
    };
    let n = iota.len().max(1) as f64;
    TraceRow {
        step,
        clean_train_loss: mean_loss(outputs, ds.labels(), None),
        noisy_train_loss: mean_loss(outputs, ds.labels(), Some(eps)),
        test_error_01: test_error,
        max_gamma: summary.max_gamma.value,
        mean_gamma: summary.mean_gamma,
        max_rho_bar: summary.max_rho_bar.value,
        mean_rho_bar: summary.mean_rho_bar,
        min_rho_under: summary.min_rho_under.value,
        ratio_rho_over_gamma: ratio_from_summary(summary),
        iota_mean: iota.iter().sum::<f64>() / n,
        iota_max: iota.iter().copied().fold(0.0, f64::max),
        flip_count,
    }
}

fn ratio_from_summary(s: &CoefficientSummary) -> f64 {
    let (num, den) = (s.max_rho_bar.value, s.max_gamma.value);
    if num == 0.0 && den <= 0.0 {
        0.0
    } else {
        num / den.max(decomposition::RATIO_FLOOR)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;

    fn small_setup() -> RunSetup {
        RunSetup::axis_aligned(40, 2.0, 0.5, 20, 4, 2, 0.05).unwrap()
    }

    fn small_config(noise: LabelNoiseSpec) -> TrainConfig {
        TrainConfig { eta: 0.5, steps: 60, noise, log_stride: 25, seed: 9, n_test: 200, snapshot_stride: 30 }
    }

    #[test]
    fn multiplier_moments() {
        let mut rng = rng_from_seed(1);
        let n = 200_000;
        let flips = sample_multipliers(&LabelNoiseSpec::Flip { p: 0.3 }, n, &mut rng);
        let rate = flips.iter().filter(|&&e| e == -1.0).count() as f64 / n as f64;
        assert!((rate - 0.3).abs() < 5.0 * (0.3f64 * 0.7 / n as f64).sqrt());
        assert!(flips.iter().all(|&e| e == 1.0 || e == -1.0));

        let g = sample_multipliers(&LabelNoiseSpec::Gaussian { mean: 0.6, std: 1.0 }, n, &mut rng);
        let mean = g.iter().sum::<f64>() / n as f64;
        let var = g.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
        assert!((mean - 0.6).abs() < 0.01 && (var - 1.0).abs() < 0.02);

        let u = sample_multipliers(&LabelNoiseSpec::Uniform { lo: -2.0, hi: 3.0 }, n, &mut rng);
        assert!(u.iter().all(|&x| (-2.0..3.0).contains(&x)));
        assert!((u.iter().sum::<f64>() / n as f64 - 0.5).abs() < 0.02);

        assert_eq!(sample_multipliers(&LabelNoiseSpec::None, 3, &mut rng), vec![1.0; 3]);
    }

    #[test]
    fn noise_labels_and_validation() {
        assert_eq!(LabelNoiseSpec::Gaussian { mean: 0.6, std: 1.0 }.label(), "gaussian(0.6:1)");
        assert_eq!(LabelNoiseSpec::Uniform { lo: -1.0, hi: 2.0 }.label(), "uniform(-1:2)");
        assert!(LabelNoiseSpec::Flip { p: 1.2 }.validate().is_err());
        assert!(LabelNoiseSpec::Gaussian { mean: 0.0, std: -1.0 }.validate().is_err());
        assert!(LabelNoiseSpec::Uniform { lo: 1.0, hi: 1.0 }.validate().is_err());
        let mut c = small_config(LabelNoiseSpec::None);
        c.log_stride = 0;
        assert!(c.validate().is_err());
        c.log_stride = 100;
        assert!(c.validate().is_err());
    }

    #[test]
    fn logging_schedule() {
        let out = train_run(&small_config(LabelNoiseSpec::None), &small_setup()).unwrap();
        assert_eq!(out.trace.logged_steps(), vec![0, 25, 50, 60]);
        assert_eq!(out.trace.snapshots.iter().map(|s| s.step).collect::<Vec<_>>(), vec![0, 30, 60]);
        assert_eq!(out.trace.monotonicity.steps, 60);
        assert_eq!(out.trace.iota.len(), 4);
        assert!(out.trace.abort.is_none());
    }

    #[test]
    fn standard_gd_fits_and_memorizes_monotonically() {
        let out = train_run(&small_config(LabelNoiseSpec::None), &small_setup()).unwrap();
        let rows = &out.trace.rows;
        assert!(rows.last().unwrap().clean_train_loss < rows[0].clean_train_loss);
        assert_eq!(out.trace.monotonicity.rho_bar_decreases, 0);
        assert!(rows.iter().all(|r| r.flip_count == 0 && r.noisy_train_loss == r.clean_train_loss));
    }

    #[test]
    fn runs_are_reproducible() {
        let c = small_config(LabelNoiseSpec::Flip { p: 0.2 });
        let a = train_run(&c, &small_setup()).unwrap();
        let b = train_run(&c, &small_setup()).unwrap();
        assert_eq!(a.trace, b.trace);
        assert_eq!(a.network, b.network);
        assert!(a.trace.rows.iter().any(|r| r.flip_count > 0));
    }

    #[test]
    fn divergence_is_recorded_not_panicked() {
        let setup = RunSetup::axis_aligned(40, 1.0, 1.0, 20, 4, 4, 0.1).unwrap();
        let c = TrainConfig { eta: 1e200, ..small_config(LabelNoiseSpec::None) };
        let out = train_run(&c, &setup).unwrap();
        let abort = out.trace.abort.expect("run should diverge");
        assert!(abort.step < 60);
        assert!(out.trace.rows.iter().all(|r| r.step <= abort.step));
    }
}
