//! Signal/noise coefficient decomposition of the first-layer filters.
//!
//! Every filter stays in `w0 + span{mu, xi_1, ..., xi_n}`:
//!
//! ```text
//! w_{j,r} = w0_{j,r} + j gamma_{j,r} mu / |mu|^2 + sum_i rho_{j,r,i} xi_i / |xi_i|^2
//! ```
//!
//! The coefficients are advanced with their own recurrences, fed by the same
//! loss derivatives and inner products the weight update used. Projections of
//! the trained weights are only a cross-check.

use ndarray::{Array1, Array2, Array3, Axis};
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{LabError, Result};
use crate::network::{activation_derivative, Branch, Network};
use crate::trainer::StepContext;

/// Floor applied to the signal denominator of [`ratio_summary`].
pub const RATIO_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientState {
    /// `gamma[[j, r]]`, branch index `j` in `{0: +1, 1: -1}`.
    pub gamma: Array2<f64>,
    /// `rho_bar[[j, r, i]]`, zero unless `y_i` matches branch `j`.
    pub rho_bar: Array3<f64>,
    /// `rho_under[[j, r, i]]`, zero unless `y_i` is opposite to branch `j`.
    pub rho_under: Array3<f64>,
    pub xi_norms_sq: Vec<f64>,
    pub w0: Network,
    labels: Vec<f64>,
    mu_norm_sq: f64,
    step: usize,
}

/// Side statistics of one coefficient update.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct UpdateStats {
    /// Number of defined `rho_bar` entries that strictly decreased.
    pub rho_bar_decreases: usize,
    pub min_rho_bar_increment: f64,
}

impl CoefficientState {
    pub fn new(w0: &Network, ds: &Dataset) -> Self {
        let (m, n) = (w0.m(), ds.len());
        CoefficientState {
            gamma: Array2::zeros((2, m)),
            rho_bar: Array3::zeros((2, m, n)),
            rho_under: Array3::zeros((2, m, n)),
            xi_norms_sq: ds.noise_norms_sq().to_vec(),
            w0: w0.clone(),
            labels: ds.labels().to_vec(),
            mu_norm_sq: ds.spec().mu_norm_sq(),
            step: 0,
        }
    }

    pub fn step(&self) -> usize {
        self.step
    }

    pub fn m(&self) -> usize {
        self.gamma.ncols()
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    /// `rho = rho_bar + rho_under` for one branch, `m x n`.
    pub fn rho(&self, b: Branch) -> Array2<f64> {
        &self.rho_bar.index_axis(Axis(0), b.index()) + &self.rho_under.index_axis(Axis(0), b.index())
    }

    pub fn summary(&self) -> CoefficientSummary {
        CoefficientSummary::of(self)
    }
}

/// Advance the coefficients by one step, consuming the context of the matching
/// weight update.
pub fn update_coefficients(state: &mut CoefficientState, ctx: &StepContext) -> Result<UpdateStats> {
    if ctx.step != state.step {
        return Err(LabError::StepMismatch { expected: state.step, got: ctx.step });
    }
    let n = state.n();
    let m = state.m();
    if ctx.loss_derivs.len() != n || ctx.multipliers.len() != n {
        return Err(LabError::LengthMismatch { expected: n, got: ctx.loss_derivs.len() });
    }
    let q = ctx.q;
    let scale = ctx.eta / (n as f64 * m as f64);
    let mut stats = UpdateStats { rho_bar_decreases: 0, min_rho_bar_increment: f64::INFINITY };
    for b in Branch::BOTH {
        let j = b.index();
        let s = &ctx.projections.signal[j];
        let u = &ctx.projections.noise[j];
        for r in 0..m {
            let mut signal_sum = 0.0;
            for i in 0..n {
                let g = ctx.loss_derivs[i] * ctx.multipliers[i];
                signal_sum += g * activation_derivative(s[[i, r]], q);
                let inc = -scale * g * activation_derivative(u[[i, r]], q) * state.xi_norms_sq[i];
                if state.labels[i] == b.sign() {
                    let old = state.rho_bar[[j, r, i]];
                    let new = old + inc;
                    if new < old {
                        stats.rho_bar_decreases += 1;
                    }
                    stats.min_rho_bar_increment = stats.min_rho_bar_increment.min(inc);
                    state.rho_bar[[j, r, i]] = new;
                } else {
                    // same increment, opposite sign: y_i j = -1 for these samples
                    state.rho_under[[j, r, i]] -= inc;
                }
            }
            state.gamma[[j, r]] -= scale * signal_sum * state.mu_norm_sq;
        }
    }
    state.step += 1;
    Ok(stats)
}

/// Rebuild the filters from the coefficients.
pub fn reconstruct_weights(state: &CoefficientState, ds: &Dataset) -> Result<Network> {
    if ds.len() != state.n() {
        return Err(LabError::LengthMismatch { expected: state.n(), got: ds.len() });
    }
    let mu = ds.spec().mu();
    let inv_norms: Array1<f64> = state.xi_norms_sq.iter().map(|v| 1.0 / v).collect();
    let parts = Branch::BOTH.map(|b| {
        let mut w = state.w0.weights(b).clone();
        let g = state.gamma.row(b.index()).to_owned() * (b.sign() / state.mu_norm_sq);
        w += &mu.insert_axis(Axis(1)).dot(&g.insert_axis(Axis(0)));
        // coef[[i, r]] = rho_{j,r,i} / |xi_i|^2
        let coef = state.rho(b).t().to_owned() * inv_norms.view().insert_axis(Axis(1));
        w += &ds.noise_matrix().t().dot(&coef);
        w
    });
    let [wp, wm] = parts;
    Network::new(wp, wm, state.w0.q())
}

/// `|reconstructed - net|_F / |net|_F`.
pub fn reconstruction_error(net: &Network, state: &CoefficientState, ds: &Dataset) -> Result<f64> {
    let rec = reconstruct_weights(state, ds)?;
    let norm = net.frobenius_norm();
    let diff = rec.distance(net);
    Ok(if norm > 0.0 { diff / norm } else { diff })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProjectionReport {
    pub step: usize,
    /// `max |<w - w0, j mu> - gamma_{j,r}|`.
    pub max_gamma_discrepancy: f64,
    /// `max |<w - w0, xi_i> - rho_{j,r,i}|`.
    pub max_rho_discrepancy: f64,
    pub median_rho_discrepancy: f64,
    /// `8 sqrt(log(4 n^2 / delta) / d) n alpha`.
    pub rho_bound: f64,
    pub fraction_within_bound: f64,
    pub delta: f64,
    pub alpha: f64,
    #[serde(skip)]
    pub gamma_discrepancy: Array2<f64>,
    #[serde(skip)]
    pub rho_discrepancy: Array3<f64>,
}

/// Compare coefficients against direct projections of `w - w0`. `t_star`
/// sets `alpha = 4 log(t_star)` in the cross-term bound.
pub fn projection_check(
    net: &Network,
    state: &CoefficientState,
    ds: &Dataset,
    delta: f64,
    t_star: f64,
) -> Result<ProjectionReport> {
    let (n, m, d) = (state.n(), state.m(), ds.spec().d());
    if ds.len() != n {
        return Err(LabError::LengthMismatch { expected: n, got: ds.len() });
    }
    let mu = ds.spec().mu();
    let mut gamma_disc = Array2::zeros((2, m));
    let mut rho_disc = Array3::zeros((2, m, n));
    for b in Branch::BOTH {
        let j = b.index();
        let disp = net.weights(b) - state.w0.weights(b);
        let along_mu = mu.dot(&disp) * b.sign();
        let along_xi = ds.noise_matrix().dot(&disp); // n x m
        let rho = state.rho(b);
        for r in 0..m {
            gamma_disc[[j, r]] = (along_mu[r] - state.gamma[[j, r]]).abs();
            for i in 0..n {
                rho_disc[[j, r, i]] = (along_xi[[i, r]] - rho[[r, i]]).abs();
            }
        }
    }
    let alpha = 4.0 * t_star.ln();
    let nf = n as f64;
    let rho_bound = 8.0 * ((4.0 * nf * nf / delta).ln() / d as f64).sqrt() * nf * alpha;
    let mut flat: Vec<f64> = rho_disc.iter().copied().collect();
    flat.sort_by(f64::total_cmp);
    let within = flat.iter().filter(|&&v| v <= rho_bound).count();
    Ok(ProjectionReport {
        step: state.step,
        max_gamma_discrepancy: gamma_disc.iter().copied().fold(0.0, f64::max),
        max_rho_discrepancy: flat.last().copied().unwrap_or(0.0),
        median_rho_discrepancy: if flat.is_empty() { 0.0 } else { flat[flat.len() / 2] },
        rho_bound,
        fraction_within_bound: if flat.is_empty() { 1.0 } else { within as f64 / flat.len() as f64 },
        delta,
        alpha,
        gamma_discrepancy: gamma_disc,
        rho_discrepancy: rho_disc,
    })
}

/// `iota_i = (1/m) sum_r rho_bar_{y_i, r, i}^2`.
pub fn iota(state: &CoefficientState, i: usize) -> Result<f64> {
    if i >= state.n() {
        return Err(LabError::IndexOutOfRange { index: i, n: state.n() });
    }
    let j = Branch::from_sign(state.labels[i]).index();
    let m = state.m();
    Ok((0..m).map(|r| state.rho_bar[[j, r, i]].powi(2)).sum::<f64>() / m as f64)
}

pub fn iota_all(state: &CoefficientState) -> Vec<f64> {
    (0..state.n()).map(|i| iota(state, i).expect("index in range")).collect()
}

/// Transpose logged per-step iota vectors into one series per sample.
pub fn iota_series(snapshots: &[(usize, Vec<f64>)]) -> Vec<Vec<f64>> {
    let n = snapshots.first().map_or(0, |(_, v)| v.len());
    (0..n).map(|i| snapshots.iter().map(|(_, v)| v[i]).collect()).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RatioAggregation {
    #[default]
    MaxOverMax,
    MeanOverMean,
}

/// Noise memorization over signal learning. Zero when both are zero.
pub fn ratio_summary_with(state: &CoefficientState, agg: RatioAggregation) -> f64 {
    let (num, den) = match agg {
        RatioAggregation::MaxOverMax => (
            state.rho_bar.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            state.gamma.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        ),
        RatioAggregation::MeanOverMean => {
            let defined = defined_rho_bar(state);
            let num = defined.iter().sum::<f64>() / defined.len().max(1) as f64;
            (num, state.gamma.mean().unwrap_or(0.0))
        }
    };
    if num == 0.0 && den <= 0.0 {
        return 0.0;
    }
    num / den.max(RATIO_FLOOR)
}

pub fn ratio_summary(state: &CoefficientState) -> f64 {
    ratio_summary_with(state, RatioAggregation::MaxOverMax)
}

fn defined_rho_bar(state: &CoefficientState) -> Vec<f64> {
    let mut out = Vec::with_capacity(state.m() * state.n());
    for (i, &y) in state.labels.iter().enumerate() {
        let j = Branch::from_sign(y).index();
        for r in 0..state.m() {
            out.push(state.rho_bar[[j, r, i]]);
        }
    }
    out
}

/// Location of an extreme coefficient: `(j, r, i)`; `i` is absent for gamma.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Extreme {
    pub value: f64,
    pub j: i8,
    pub r: usize,
    pub i: Option<usize>,
}

/// Per-step extremes and means of the coefficient arrays.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientSummary {
    pub step: usize,
    pub max_gamma: Extreme,
    pub min_gamma: Extreme,
    pub mean_gamma: f64,
    pub max_rho_bar: Extreme,
    pub min_rho_bar: Extreme,
    pub mean_rho_bar: f64,
    pub max_rho_under: Extreme,
    pub min_rho_under: Extreme,
    pub mean_rho_under: f64,
}

impl CoefficientSummary {
    pub const CSV_HEADER: &'static str = "step,max_gamma,min_gamma,mean_gamma,max_rho_bar,min_rho_bar,mean_rho_bar,max_rho_under,min_rho_under,mean_rho_under";

    fn of(state: &CoefficientState) -> Self {
        let (m, n) = (state.m(), state.n());
        let sign = |j: usize| if j == 0 { 1 } else { -1 };
        let mut max_g = Extreme { value: f64::NEG_INFINITY, j: 1, r: 0, i: None };
        let mut min_g = Extreme { value: f64::INFINITY, j: 1, r: 0, i: None };
        for ((j, r), &v) in state.gamma.indexed_iter() {
            if v > max_g.value {
                max_g = Extreme { value: v, j: sign(j), r, i: None };
            }
            if v < min_g.value {
                min_g = Extreme { value: v, j: sign(j), r, i: None };
            }
        }
        let empty = Extreme { value: 0.0, j: 1, r: 0, i: None };
        let mut max_b = Extreme { value: f64::NEG_INFINITY, ..empty };
        let mut min_b = Extreme { value: f64::INFINITY, ..empty };
        let mut max_u = Extreme { value: f64::NEG_INFINITY, ..empty };
        let mut min_u = Extreme { value: f64::INFINITY, ..empty };
        let (mut sum_b, mut sum_u) = (0.0, 0.0);
        for (i, &y) in state.labels.iter().enumerate() {
            let same = Branch::from_sign(y).index();
            let other = 1 - same;
            for r in 0..m {
                let vb = state.rho_bar[[same, r, i]];
                let vu = state.rho_under[[other, r, i]];
                sum_b += vb;
                sum_u += vu;
                if vb > max_b.value {
                    max_b = Extreme { value: vb, j: sign(same), r, i: Some(i) };
                }
                if vb < min_b.value {
                    min_b = Extreme { value: vb, j: sign(same), r, i: Some(i) };
                }
                if vu > max_u.value {
                    max_u = Extreme { value: vu, j: sign(other), r, i: Some(i) };
                }
                if vu < min_u.value {
                    min_u = Extreme { value: vu, j: sign(other), r, i: Some(i) };
                }
            }
        }
        let count = (m * n).max(1) as f64;
        let fix = |e: Extreme| if e.value.is_finite() { e } else { empty };
        CoefficientSummary {
            step: state.step,
            max_gamma: max_g,
            min_gamma: min_g,
            mean_gamma: state.gamma.mean().unwrap_or(0.0),
            max_rho_bar: fix(max_b),
            min_rho_bar: fix(min_b),
            mean_rho_bar: sum_b / count,
            max_rho_under: fix(max_u),
            min_rho_under: fix(min_u),
            mean_rho_under: sum_u / count,
        }
    }
}
