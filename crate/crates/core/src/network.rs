//! Two-layer convolutional network with a fixed `+1/-1` second layer.
//!
//! `f(W, x) = F_{+1}(W_{+1}, x) - F_{-1}(W_{-1}, x)` with
//! `F_j = (1/m) sum_r sum_p sigma(<w_{j,r}, x_p>)` and `sigma(z) = max(0, z)^q`.

use ndarray::{Array1, Array2, ArrayView1, Axis, Zip};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{LabError, Result};

pub const NETWORK_FORMAT: &str = "label-noise-lab/network";
pub const NETWORK_FORMAT_VERSION: u32 = 1;

/// Output branch, i.e. the fixed second-layer sign `j`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Branch {
    Plus,
    Minus,
}

impl Branch {
    pub const BOTH: [Branch; 2] = [Branch::Plus, Branch::Minus];

    pub fn sign(self) -> f64 {
        match self {
            Branch::Plus => 1.0,
            Branch::Minus => -1.0,
        }
    }

    pub fn index(self) -> usize {
        match self {
            Branch::Plus => 0,
            Branch::Minus => 1,
        }
    }

    pub fn from_sign(sign: f64) -> Branch {
        if sign > 0.0 {
            Branch::Plus
        } else {
            Branch::Minus
        }
    }
}

pub fn activation(z: f64, q: u32) -> f64 {
    if z > 0.0 {
        z.powi(q as i32)
    } else {
        0.0
    }
}

pub fn activation_derivative(z: f64, q: u32) -> f64 {
    if z > 0.0 {
        f64::from(q) * z.powi(q as i32 - 1)
    } else {
        0.0
    }
}

/// `log(1 + exp(-z))`, overflow-free.
pub fn logistic_loss(z: f64) -> f64 {
    (-z).max(0.0) + (-z.abs()).exp().ln_1p()
}

/// `-1 / (1 + exp(z))`.
pub fn loss_derivative(z: f64) -> f64 {
    if z >= 0.0 {
        let e = (-z).exp();
        -e / (1.0 + e)
    } else {
        -1.0 / (1.0 + z.exp())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    weights: [Array2<f64>; 2],
    q: u32,
}

impl Network {
    pub fn new(w_plus: Array2<f64>, w_minus: Array2<f64>, q: u32) -> Result<Self> {
        if q < 2 {
            return Err(LabError::InvalidNetwork(format!("activation exponent must be >= 2, got {q}")));
        }
        if w_plus.dim() != w_minus.dim() {
            return Err(LabError::InvalidNetwork(format!(
                "branch shapes differ: {:?} vs {:?}",
                w_plus.dim(),
                w_minus.dim()
            )));
        }
        if w_plus.nrows() == 0 || w_plus.ncols() == 0 {
            return Err(LabError::InvalidNetwork("d and m must be positive".into()));
        }
        if !w_plus.iter().chain(w_minus.iter()).all(|v| v.is_finite()) {
            return Err(LabError::InvalidNetwork("non-finite weight".into()));
        }
        Ok(Network { weights: [w_plus, w_minus], q })
    }

    pub fn zeros(d: usize, m: usize, q: u32) -> Result<Self> {
        Self::new(Array2::zeros((d, m)), Array2::zeros((d, m)), q)
    }

    /// Column `r` of `W_j` is the filter `w_{j,r}`.
    pub fn weights(&self, branch: Branch) -> &Array2<f64> {
        &self.weights[branch.index()]
    }

    pub fn weights_mut(&mut self, branch: Branch) -> &mut Array2<f64> {
        &mut self.weights[branch.index()]
    }

    pub fn filter(&self, branch: Branch, r: usize) -> ArrayView1<'_, f64> {
        self.weights[branch.index()].column(r)
    }

    pub fn d(&self) -> usize {
        self.weights[0].nrows()
    }

    pub fn m(&self) -> usize {
        self.weights[0].ncols()
    }

    pub fn q(&self) -> u32 {
        self.q
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.weights.iter().map(|w| w.iter().map(|v| v * v).sum::<f64>()).sum::<f64>().sqrt()
    }

    /// `|self - other|_F`.
    pub fn distance(&self, other: &Network) -> f64 {
        self.weights
            .iter()
            .zip(other.weights.iter())
            .map(|(a, b)| Zip::from(a).and(b).fold(0.0, |acc, x, y| acc + (x - y) * (x - y)))
            .sum::<f64>()
            .sqrt()
    }

    pub fn scaled(&self, c: f64) -> Network {
        Network { weights: [&self.weights[0] * c, &self.weights[1] * c], q: self.q }
    }

    /// `W <- W - eta * grad`.
    pub fn apply_gradient(&mut self, grad: &Gradient, eta: f64) {
        for b in Branch::BOTH {
            self.weights[b.index()].scaled_add(-eta, grad.branch(b));
        }
    }

    pub fn to_json(&self) -> Result<String> {
        let repr = NetworkRepr {
            format: NETWORK_FORMAT.into(),
            version: NETWORK_FORMAT_VERSION,
            d: self.d(),
            m: self.m(),
            q: self.q,
            w_plus: self.weights[0].iter().copied().collect(),
            w_minus: self.weights[1].iter().copied().collect(),
        };
        Ok(serde_json::to_string(&repr)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let r: NetworkRepr = serde_json::from_str(text)?;
        if r.format != NETWORK_FORMAT || r.version != NETWORK_FORMAT_VERSION {
            return Err(LabError::InvalidNetwork(format!("unsupported format {} v{}", r.format, r.version)));
        }
        let shape = (r.d, r.m);
        let to_matrix = |v: Vec<f64>| {
            let len = v.len();
            Array2::from_shape_vec(shape, v)
                .map_err(|_| LabError::DimensionMismatch { expected: r.d * r.m, got: len })
        };
        Network::new(to_matrix(r.w_plus)?, to_matrix(r.w_minus)?, r.q)
    }
}

/// Checkpoint layout: shape header plus both branches flattened row-major (`d x m`).
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NetworkRepr {
    format: String,
    version: u32,
    d: usize,
    m: usize,
    q: u32,
    w_plus: Vec<f64>,
    w_minus: Vec<f64>,
}

/// I.i.d. `N(0, sigma_0^2)` weights; `w_plus` is drawn first, row-major.
pub fn init_network<R: Rng + ?Sized>(d: usize, m: usize, q: u32, sigma_0: f64, rng: &mut R) -> Result<Network> {
    if !(sigma_0 > 0.0 && sigma_0.is_finite()) {
        return Err(LabError::InvalidNetwork(format!("sigma_0 must be positive, got {sigma_0}")));
    }
    let mut draw = || Array2::from_shape_simple_fn((d, m), || sigma_0 * rng.sample::<f64, _>(StandardNormal));
    let w_plus = draw();
    let w_minus = draw();
    Network::new(w_plus, w_minus, q)
}

/// Network output on an arbitrary two-patch input.
pub fn forward(net: &Network, patch1: ArrayView1<'_, f64>, patch2: ArrayView1<'_, f64>) -> Result<f64> {
    for p in [&patch1, &patch2] {
        if p.len() != net.d() {
            return Err(LabError::DimensionMismatch { expected: net.d(), got: p.len() });
        }
    }
    let m = net.m() as f64;
    let mut out = 0.0;
    for b in Branch::BOTH {
        let w = net.weights(b);
        let a1 = patch1.dot(w);
        let a2 = patch2.dot(w);
        let f: f64 = a1.iter().zip(a2.iter()).map(|(&x, &y)| activation(x, net.q) + activation(y, net.q)).sum();
        out += b.sign() * f / m;
    }
    Ok(out)
}

/// Per-filter inner products of a whole dataset, shared by forward, gradient
/// and coefficient bookkeeping.
#[derive(Debug, Clone)]
pub struct Projections {
    /// `signal[j][[i, r]] = <w_{j,r}, y_i mu>`.
    pub signal: [Array2<f64>; 2],
    /// `noise[j][[i, r]] = <w_{j,r}, xi_i>`.
    pub noise: [Array2<f64>; 2],
}

impl Projections {
    pub fn compute(net: &Network, ds: &Dataset) -> Result<Self> {
        if ds.spec().d() != net.d() {
            return Err(LabError::DimensionMismatch { expected: net.d(), got: ds.spec().d() });
        }
        let y = Array1::from(ds.labels().to_vec());
        let mu = ds.spec().mu();
        let make = |b: Branch| {
            let w = net.weights(b);
            let mu_w = mu.dot(w);
            let signal = y.view().insert_axis(Axis(1)).dot(&mu_w.view().insert_axis(Axis(0)));
            let noise = ds.noise_matrix().dot(w);
            (signal, noise)
        };
        let (sp, np) = make(Branch::Plus);
        let (sm, nm) = make(Branch::Minus);
        Ok(Projections { signal: [sp, sm], noise: [np, nm] })
    }

    pub fn n(&self) -> usize {
        self.signal[0].nrows()
    }

    /// `F_j` for every sample.
    pub fn branch_outputs(&self, b: Branch, q: u32) -> Array1<f64> {
        let (s, u) = (&self.signal[b.index()], &self.noise[b.index()]);
        let m = s.ncols() as f64;
        s.rows()
            .into_iter()
            .zip(u.rows())
            .map(|(sr, ur)| {
                sr.iter().zip(ur.iter()).map(|(&a, &c)| activation(a, q) + activation(c, q)).sum::<f64>() / m
            })
            .collect()
    }

    /// `f(W, x_i)` for every sample.
    pub fn outputs(&self, q: u32) -> Array1<f64> {
        self.branch_outputs(Branch::Plus, q) - self.branch_outputs(Branch::Minus, q)
    }
}

/// Gradient with the same shape as the network weights.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    parts: [Array2<f64>; 2],
}

impl Gradient {
    pub fn branch(&self, b: Branch) -> &Array2<f64> {
        &self.parts[b.index()]
    }

    pub fn is_finite(&self) -> bool {
        self.parts.iter().all(|p| p.iter().all(|v| v.is_finite()))
    }

    pub fn norm(&self) -> f64 {
        self.parts.iter().map(|p| p.iter().map(|v| v * v).sum::<f64>()).sum::<f64>().sqrt()
    }
}

pub(crate) fn check_multipliers(ds: &Dataset, multipliers: &[f64]) -> Result<()> {
    if multipliers.len() != ds.len() {
        return Err(LabError::LengthMismatch { expected: ds.len(), got: multipliers.len() });
    }
    if let Some(bad) = multipliers.iter().find(|e| !e.is_finite()) {
        return Err(LabError::InvalidArgument(format!("non-finite multiplier {bad}")));
    }
    Ok(())
}

/// `l'(eps_i y_i f_i)` for every sample.
pub fn loss_derivatives(outputs: &Array1<f64>, labels: &[f64], multipliers: &[f64]) -> Vec<f64> {
    outputs
        .iter()
        .zip(labels)
        .zip(multipliers)
        .map(|((&f, &y), &e)| loss_derivative(e * y * f))
        .collect()
}

/// Gradient of `(1/n) sum_i l(eps_i y_i f(W, x_i))` from precomputed projections.
pub fn gradient_from_projections(
    proj: &Projections,
    ds: &Dataset,
    q: u32,
    loss_derivs: &[f64],
    multipliers: &[f64],
) -> Gradient {
    let n = ds.len();
    let m = proj.signal[0].ncols();
    let scale = 1.0 / (n as f64 * m as f64);
    let labels = ds.labels();
    let mu = ds.spec().mu();
    let weight: Vec<f64> = loss_derivs.iter().zip(multipliers).map(|(&l, &e)| l * e).collect();
    let parts = Branch::BOTH.map(|b| {
        let s = &proj.signal[b.index()];
        let u = &proj.noise[b.index()];
        let mut signal_coef = Array1::<f64>::zeros(m);
        let mut noise_coef = Array2::<f64>::zeros((n, m));
        for i in 0..n {
            let g = weight[i];
            if g == 0.0 {
                continue;
            }
            for r in 0..m {
                signal_coef[r] += g * activation_derivative(s[[i, r]], q);
                noise_coef[[i, r]] = g * labels[i] * activation_derivative(u[[i, r]], q);
            }
        }
        let mut grad = ds.noise_matrix().t().dot(&noise_coef);
        grad += &mu.insert_axis(Axis(1)).dot(&signal_coef.view().insert_axis(Axis(0)));
        grad *= b.sign() * scale;
        grad
    });
    Gradient { parts }
}

pub fn full_batch_gradient(net: &Network, ds: &Dataset, multipliers: &[f64]) -> Result<Gradient> {
    check_multipliers(ds, multipliers)?;
    if ds.is_empty() {
        return Err(LabError::EmptyDataset);
    }
    let proj = Projections::compute(net, ds)?;
    let outputs = proj.outputs(net.q());
    let derivs = loss_derivatives(&outputs, ds.labels(), multipliers);
    Ok(gradient_from_projections(&proj, ds, net.q(), &derivs, multipliers))
}

/// Mean of `l(eps_i y_i f_i)` given network outputs.
pub fn mean_loss(outputs: &Array1<f64>, labels: &[f64], multipliers: Option<&[f64]>) -> f64 {
    let n = labels.len() as f64;
    let total: f64 = match multipliers {
        Some(eps) => outputs.iter().zip(labels).zip(eps).map(|((&f, &y), &e)| logistic_loss(e * y * f)).sum(),
        None => outputs.iter().zip(labels).map(|(&f, &y)| logistic_loss(y * f)).sum(),
    };
    total / n
}

/// `(1/n) sum_i l(eps_i y_i f(W, x_i))`.
pub fn noisy_batch_loss(net: &Network, ds: &Dataset, multipliers: &[f64]) -> Result<f64> {
    check_multipliers(ds, multipliers)?;
    if ds.is_empty() {
        return Err(LabError::EmptyDataset);
    }
    let outputs = Projections::compute(net, ds)?.outputs(net.q());
    Ok(mean_loss(&outputs, ds.labels(), Some(multipliers)))
}

pub fn clean_batch_loss(net: &Network, ds: &Dataset) -> Result<f64> {
    if ds.is_empty() {
        return Err(LabError::EmptyDataset);
    }
    let outputs = Projections::compute(net, ds)?.outputs(net.q());
    Ok(mean_loss(&outputs, ds.labels(), None))
}

/// Fraction of outputs whose sign disagrees with the label; `f = 0` is an error.
pub fn error_rate(outputs: &Array1<f64>, labels: &[f64]) -> f64 {
    let wrong = outputs.iter().zip(labels).filter(|&(&f, &y)| (y * f).partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater)).count();
    wrong as f64 / labels.len() as f64
}

pub fn zero_one_error(net: &Network, test: &Dataset) -> Result<f64> {
    if test.is_empty() {
        return Err(LabError::EmptyDataset);
    }
    let outputs = Projections::compute(net, test)?.outputs(net.q());
    Ok(error_rate(&outputs, test.labels()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate_dataset, SignalSpec};
    use crate::rng::rng_from_seed;
    use ndarray::array;

    #[test]
    fn activation_values() {
        assert_eq!(activation(-1.0, 2), 0.0);
        assert_eq!(activation_derivative(-1.0, 2), 0.0);
        assert_eq!(activation(1.5, 2), 2.25);
        assert_eq!(activation_derivative(1.5, 2), 3.0);
        assert_eq!(activation(2.0, 3), 8.0);
        assert_eq!(activation_derivative(2.0, 3), 12.0);
        assert_eq!(activation_derivative(0.0, 2), 0.0);
    }

    #[test]
    fn logistic_values() {
        assert!((logistic_loss(0.0) - std::f64::consts::LN_2).abs() < 1e-15);
        assert_eq!(loss_derivative(0.0), -0.5);
        for z in [-700.0, -30.0, -1.3, 0.2, 4.0, 55.0, 900.0] {
            assert!((loss_derivative(z) + loss_derivative(-z) + 1.0).abs() < 1e-15);
            let d = loss_derivative(z);
            assert!((-1.0..=0.0).contains(&d));
        }
        let big = logistic_loss(500.0);
        assert!(big > 0.0 && (big / (-500f64).exp() - 1.0).abs() < 1e-12);
        assert!((logistic_loss(-1000.0) - 1000.0).abs() < 1e-9);
        assert!(logistic_loss(1000.0).is_finite());
    }

    fn hand_net() -> Network {
        Network::new(array![[0.5], [0.5]], array![[0.1], [0.0]], 2).unwrap()
    }

    #[test]
    fn forward_hand_instance() {
        let f = forward(&hand_net(), array![2.0, 0.0].view(), array![0.0, 3.0].view()).unwrap();
        assert!((f - 3.21).abs() < 1e-12);
        let swapped = forward(&hand_net(), array![0.0, 3.0].view(), array![2.0, 0.0].view()).unwrap();
        assert_eq!(f, swapped);
        assert!(forward(&hand_net(), array![1.0].view(), array![1.0, 1.0].view()).is_err());
    }

    #[test]
    fn clean_loss_hand_instance() {
        let spec = SignalSpec::new(array![2.0, 0.0], 1.0).unwrap();
        let ds = Dataset::from_parts(spec, 0, vec![1.0], vec![1], array![[0.0, 3.0]]).unwrap();
        let loss = clean_batch_loss(&hand_net(), &ds).unwrap();
        assert!((loss - logistic_loss(3.21)).abs() < 1e-15);
        assert!((loss - 0.0395).abs() < 1e-4);
    }

    #[test]
    fn zero_network_sentinels() {
        let spec = SignalSpec::axis_aligned(8, 1.0, 1.0).unwrap();
        let ds = generate_dataset(&spec, 12, 0, &mut rng_from_seed(0));
        let net = Network::zeros(8, 3, 2).unwrap();
        assert!((clean_batch_loss(&net, &ds).unwrap() - std::f64::consts::LN_2).abs() < 1e-15);
        assert_eq!(zero_one_error(&net, &ds).unwrap(), 1.0);
        let g = full_batch_gradient(&net, &ds, &[1.0; 12]).unwrap();
        assert_eq!(g.norm(), 0.0);
    }

    #[test]
    fn perfect_signal_network() {
        let spec = SignalSpec::axis_aligned(50, 2.0, 0.5).unwrap();
        let ds = generate_dataset(&spec, 300, 0, &mut rng_from_seed(4));
        let m = 4;
        let dir = spec.mu().to_owned() / spec.mu_norm();
        let mut wp = Array2::zeros((50, m));
        for mut c in wp.columns_mut() {
            c.assign(&dir);
        }
        let net = Network::new(wp.clone(), -wp, 2).unwrap();
        assert_eq!(zero_one_error(&net, &ds).unwrap(), 0.0);
        for s in ds.samples().take(10) {
            let f = forward(&net, s.patch1().view(), s.patch2().view()).unwrap();
            assert!((f - s.label * activation(spec.mu_norm(), 2)).abs() < 1e-9);
        }
    }

    #[test]
    fn batch_outputs_match_single_forward() {
        let spec = SignalSpec::axis_aligned(20, 1.0, 1.0).unwrap();
        let ds = generate_dataset(&spec, 9, 0, &mut rng_from_seed(2));
        let net = init_network(20, 5, 3, 0.5, &mut rng_from_seed(3)).unwrap();
        let outputs = Projections::compute(&net, &ds).unwrap().outputs(3);
        for (i, s) in ds.samples().enumerate() {
            let f = forward(&net, s.patch1().view(), s.patch2().view()).unwrap();
            assert!((f - outputs[i]).abs() <= 1e-12 * (1.0 + f.abs()));
        }
    }

    #[test]
    fn init_is_deterministic_and_validated() {
        let a = init_network(10, 4, 2, 0.1, &mut rng_from_seed(1)).unwrap();
        let b = init_network(10, 4, 2, 0.1, &mut rng_from_seed(1)).unwrap();
        assert_eq!(a, b);
        assert!(init_network(10, 4, 2, 0.0, &mut rng_from_seed(1)).is_err());
        assert!(init_network(10, 4, 2, -1.0, &mut rng_from_seed(1)).is_err());
        assert!(Network::zeros(3, 2, 1).is_err());
    }

    #[test]
    fn gradient_rejects_length_mismatch() {
        let spec = SignalSpec::axis_aligned(4, 1.0, 1.0).unwrap();
        let ds = generate_dataset(&spec, 3, 0, &mut rng_from_seed(0));
        let net = Network::zeros(4, 2, 2).unwrap();
        assert!(matches!(
            full_batch_gradient(&net, &ds, &[1.0, 1.0]),
            Err(LabError::LengthMismatch { expected: 3, got: 2 })
        ));
    }

    #[test]
    fn empty_sets_rejected() {
        let spec = SignalSpec::axis_aligned(4, 1.0, 1.0).unwrap();
        let ds = generate_dataset(&spec, 0, 0, &mut rng_from_seed(0));
        let net = Network::zeros(4, 2, 2).unwrap();
        assert!(matches!(clean_batch_loss(&net, &ds), Err(LabError::EmptyDataset)));
        assert!(matches!(zero_one_error(&net, &ds), Err(LabError::EmptyDataset)));
    }

    #[test]
    fn json_checkpoint_round_trip() {
        let net = init_network(7, 3, 4, 0.2, &mut rng_from_seed(8)).unwrap();
        let back = Network::from_json(&net.to_json().unwrap()).unwrap();
        assert_eq!(net, back);
        let v: serde_json::Value = serde_json::from_str(&net.to_json().unwrap()).unwrap();
        assert_eq!(v["format"], NETWORK_FORMAT);
        assert_eq!(v["w_plus"].as_array().unwrap().len(), 21);
        assert_eq!(v["w_plus"][1].as_f64().unwrap(), net.weights(Branch::Plus)[[0, 1]]);
    }

    /// Batch loss from per-sample `forward`, independent of the projection path.
    fn direct_loss(net: &Network, ds: &Dataset, mult: &[f64]) -> f64 {
        let total: f64 = ds
            .samples()
            .zip(mult)
            .map(|(s, e)| logistic_loss(e * s.label * forward(net, s.patch1().view(), s.patch2().view()).unwrap()))
            .sum();
        total / ds.len() as f64
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(20))]

        #[test]
        fn gradient_matches_central_differences(seed in 0u64..u64::MAX, q in 2u32..=4, flip in proptest::bool::ANY) {
            let (d, m, n, h) = (10, 3, 5, 1e-5);
            let mut rng = rng_from_seed(seed);
            let spec = SignalSpec::axis_aligned(d, 1.5, 1.0).unwrap();
            let ds = generate_dataset(&spec, n, 0, &mut rng);
            let net = init_network(d, m, q, 0.5, &mut rng).unwrap();
            let mult: Vec<f64> = (0..n).map(|i| if flip && i % 2 == 0 { -1.0 } else { 1.0 }).collect();
            let g = full_batch_gradient(&net, &ds, &mult).unwrap();
            let (mut diff, mut norm) = (0.0, 0.0);
            for b in [Branch::Plus, Branch::Minus] {
                for k in 0..d {
                    for r in 0..m {
                        let mut up = net.clone();
                        up.weights_mut(b)[[k, r]] += h;
                        let mut down = net.clone();
                        down.weights_mut(b)[[k, r]] -= h;
                        let fd = (direct_loss(&up, &ds, &mult) - direct_loss(&down, &ds, &mult)) / (2.0 * h);
                        diff += (g.branch(b)[[k, r]] - fd).powi(2);
                        norm += fd * fd;
                    }
                }
            }
            let rel = diff.sqrt() / norm.sqrt().max(1e-300);
            proptest::prop_assert!(rel <= 1e-6, "relative error {rel:e}");
        }

        #[test]
        fn patch_order_does_not_matter(seed in 0u64..u64::MAX, q in 2u32..=4) {
            let mut rng = rng_from_seed(seed);
            let net = init_network(6, 2, q, 0.7, &mut rng).unwrap();
            let spec = SignalSpec::axis_aligned(6, 1.0, 1.0).unwrap();
            let ds = generate_dataset(&spec, 1, 0, &mut rng);
            let s = ds.sample(0);
            let a = forward(&net, s.patch1().view(), s.patch2().view()).unwrap();
            let b = forward(&net, s.patch2().view(), s.patch1().view()).unwrap();
            proptest::prop_assert_eq!(a, b);
        }

        #[test]
        fn output_is_homogeneous_of_degree_q(seed in 0u64..u64::MAX, q in 2u32..=4, c in 0.1f64..5.0) {
            let mut rng = rng_from_seed(seed);
            let net = init_network(6, 2, q, 0.7, &mut rng).unwrap();
            let spec = SignalSpec::axis_aligned(6, 1.0, 1.0).unwrap();
            let ds = generate_dataset(&spec, 1, 0, &mut rng);
            let s = ds.sample(0);
            let f = forward(&net, s.patch1().view(), s.patch2().view()).unwrap();
            let fc = forward(&net.scaled(c), s.patch1().view(), s.patch2().view()).unwrap();
            let want = c.powi(q as i32) * f;
            proptest::prop_assert!((fc - want).abs() <= 1e-10 * (1.0 + want.abs()));
        }
    }
}
