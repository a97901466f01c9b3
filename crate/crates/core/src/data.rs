//! Two-patch signal-noise data model.
//!
//! Every input has two patches of dimension `d`. One patch is `y * mu`, the
//! other is a Gaussian noise vector drawn from `N(0, sigma_p^2 (I - mu mu^T / |mu|^2))`,
//! so noise is orthogonal to the signal direction.

use ndarray::{Array1, Array2, ArrayView1};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SignalSpecRepr", into = "SignalSpecRepr")]
pub struct SignalSpec {
    mu: Array1<f64>,
    sigma_p: f64,
    mu_norm_sq: f64,
}

#[derive(Serialize, Deserialize)]
struct SignalSpecRepr {
    mu: Vec<f64>,
    sigma_p: f64,
    d: usize,
}

impl TryFrom<SignalSpecRepr> for SignalSpec {
    type Error = LabError;

    fn try_from(r: SignalSpecRepr) -> Result<Self> {
        if r.mu.len() != r.d {
            return Err(LabError::InvalidSpec(format!("d = {} but mu has length {}", r.d, r.mu.len())));
        }
        SignalSpec::new(Array1::from(r.mu), r.sigma_p)
    }
}

impl From<SignalSpec> for SignalSpecRepr {
    fn from(s: SignalSpec) -> Self {
        SignalSpecRepr { d: s.d(), mu: s.mu.to_vec(), sigma_p: s.sigma_p }
    }
}

impl SignalSpec {
    pub fn new(mu: Array1<f64>, sigma_p: f64) -> Result<Self> {
        if mu.len() < 2 {
            return Err(LabError::InvalidSpec(format!("d must be at least 2, got {}", mu.len())));
        }
        if !mu.iter().all(|v| v.is_finite()) {
            return Err(LabError::InvalidSpec("mu has non-finite entries".into()));
        }
        let mu_norm_sq = mu.dot(&mu);
        if mu_norm_sq <= 0.0 {
            return Err(LabError::InvalidSpec("mu must be nonzero".into()));
        }
        if !(sigma_p > 0.0 && sigma_p.is_finite()) {
            return Err(LabError::InvalidSpec(format!("sigma_p must be positive, got {sigma_p}")));
        }
        Ok(SignalSpec { mu, sigma_p, mu_norm_sq })
    }

    /// `mu = [scale, 0, ..., 0]` in dimension `d`.
    pub fn axis_aligned(d: usize, scale: f64, sigma_p: f64) -> Result<Self> {
        let mut mu = Array1::zeros(d);
        if d > 0 {
            mu[0] = scale;
        }
        Self::new(mu, sigma_p)
    }

    /// Axis-aligned spec whose `|mu|` is chosen so that the SNR equals `snr`.
    pub fn with_snr(d: usize, snr: f64, sigma_p: f64) -> Result<Self> {
        Self::axis_aligned(d, snr * sigma_p * (d as f64).sqrt(), sigma_p)
    }

    pub fn mu(&self) -> ArrayView1<'_, f64> {
        self.mu.view()
    }

    pub fn sigma_p(&self) -> f64 {
        self.sigma_p
    }

    pub fn d(&self) -> usize {
        self.mu.len()
    }

    pub fn mu_norm_sq(&self) -> f64 {
        self.mu_norm_sq
    }

    pub fn mu_norm(&self) -> f64 {
        self.mu_norm_sq.sqrt()
    }

    /// `|mu| / (sigma_p sqrt(d))`.
    pub fn snr(&self) -> f64 {
        compute_snr(self.mu_norm(), self.sigma_p, self.d())
    }

    /// Map an isotropic vector `z` to `sigma_p (z - mu <mu, z> / |mu|^2)`.
    pub fn project_noise(&self, z: ArrayView1<'_, f64>) -> Array1<f64> {
        assert_eq!(z.len(), self.d(), "noise input has wrong dimension");
        let coef = self.mu.dot(&z) / self.mu_norm_sq;
        let mut xi = z.to_owned();
        xi.scaled_add(-coef, &self.mu);
        xi *= self.sigma_p;
        xi
    }
}

pub fn compute_snr(mu_norm: f64, sigma_p: f64, d: usize) -> f64 {
    mu_norm / (sigma_p * (d as f64).sqrt())
}

pub fn sample_noise_vector<R: Rng + ?Sized>(spec: &SignalSpec, rng: &mut R) -> Array1<f64> {
    let z: Array1<f64> = (0..spec.d()).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
    spec.project_noise(z.view())
}

/// Borrowed view of one sample.
#[derive(Debug, Clone, Copy)]
pub struct Sample<'a> {
    pub label: f64,
    /// 1 or 2: which patch carries `label * mu`.
    pub signal_patch_index: u8,
    pub noise_vector: ArrayView1<'a, f64>,
    mu: ArrayView1<'a, f64>,
}

impl Sample<'_> {
    pub fn signal_patch(&self) -> Array1<f64> {
        &self.mu * self.label
    }

    pub fn patch1(&self) -> Array1<f64> {
        if self.signal_patch_index == 1 {
            self.signal_patch()
        } else {
            self.noise_vector.to_owned()
        }
    }

    pub fn patch2(&self) -> Array1<f64> {
        if self.signal_patch_index == 2 {
            self.signal_patch()
        } else {
            self.noise_vector.to_owned()
        }
    }
}

/// `n` samples stored column-wise: labels, patch order, and the `n x d` noise matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    spec: SignalSpec,
    seed_record: u64,
    labels: Vec<f64>,
    signal_patch_index: Vec<u8>,
    noise: Array2<f64>,
    noise_norms_sq: Vec<f64>,
}

impl Dataset {
    pub fn from_parts(
        spec: SignalSpec,
        seed_record: u64,
        labels: Vec<f64>,
        signal_patch_index: Vec<u8>,
        noise: Array2<f64>,
    ) -> Result<Self> {
        let n = labels.len();
        if signal_patch_index.len() != n || noise.nrows() != n {
            return Err(LabError::InvalidArgument("dataset parts have inconsistent lengths".into()));
        }
        if noise.ncols() != spec.d() {
            return Err(LabError::DimensionMismatch { expected: spec.d(), got: noise.ncols() });
        }
        if labels.iter().any(|&y| y != 1.0 && y != -1.0) {
            return Err(LabError::InvalidArgument("labels must be +1 or -1".into()));
        }
        if signal_patch_index.iter().any(|&k| k != 1 && k != 2) {
            return Err(LabError::InvalidArgument("signal_patch_index must be 1 or 2".into()));
        }
        let noise_norms_sq = noise.rows().into_iter().map(|r| r.dot(&r)).collect();
        Ok(Dataset { spec, seed_record, labels, signal_patch_index, noise, noise_norms_sq })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn spec(&self) -> &SignalSpec {
        &self.spec
    }

    pub fn seed_record(&self) -> u64 {
        self.seed_record
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    pub fn signal_patch_indices(&self) -> &[u8] {
        &self.signal_patch_index
    }

    /// `n x d`, row `i` is the noise vector of sample `i`.
    pub fn noise_matrix(&self) -> &Array2<f64> {
        &self.noise
    }

    pub fn noise_norms_sq(&self) -> &[f64] {
        &self.noise_norms_sq
    }

    pub fn sample(&self, i: usize) -> Sample<'_> {
        Sample {
            label: self.labels[i],
            signal_patch_index: self.signal_patch_index[i],
            noise_vector: self.noise.row(i),
            mu: self.spec.mu(),
        }
    }

    pub fn samples(&self) -> impl Iterator<Item = Sample<'_>> + '_ {
        (0..self.len()).map(move |i| self.sample(i))
    }

    /// Same samples in a different order.
    pub fn permuted(&self, order: &[usize]) -> Dataset {
        let labels = order.iter().map(|&i| self.labels[i]).collect();
        let idx = order.iter().map(|&i| self.signal_patch_index[i]).collect();
        let noise = self.noise.select(ndarray::Axis(0), order);
        Dataset::from_parts(self.spec.clone(), self.seed_record, labels, idx, noise)
            .expect("permutation of a valid dataset is valid")
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&DatasetRepr::from(self))?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let repr: DatasetRepr = serde_json::from_str(text)?;
        repr.try_into()
    }
}

/// Generate `n` samples. Per sample the stream is consumed as: label, patch
/// order, then `d` standard normals for the noise.
pub fn generate_dataset<R: Rng + ?Sized>(spec: &SignalSpec, n: usize, seed_record: u64, rng: &mut R) -> Dataset {
    let d = spec.d();
    let mut labels = Vec::with_capacity(n);
    let mut idx = Vec::with_capacity(n);
    let mut noise = Array2::zeros((n, d));
    for i in 0..n {
        labels.push(if rng.random::<bool>() { 1.0 } else { -1.0 });
        idx.push(if rng.random::<bool>() { 1 } else { 2 });
        let xi = sample_noise_vector(spec, rng);
        noise.row_mut(i).assign(&xi);
    }
    Dataset::from_parts(spec.clone(), seed_record, labels, idx, noise).expect("generated dataset is valid")
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SampleRepr {
    label: i8,
    signal_patch_index: u8,
    noise_vector: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DatasetRepr {
    spec: SignalSpec,
    seed_record: u64,
    samples: Vec<SampleRepr>,
}

impl From<&Dataset> for DatasetRepr {
    fn from(ds: &Dataset) -> Self {
        DatasetRepr {
            spec: ds.spec.clone(),
            seed_record: ds.seed_record,
            samples: ds
                .samples()
                .map(|s| SampleRepr {
                    label: s.label as i8,
                    signal_patch_index: s.signal_patch_index,
                    noise_vector: s.noise_vector.to_vec(),
                })
                .collect(),
        }
    }
}

impl TryFrom<DatasetRepr> for Dataset {
    type Error = LabError;

    fn try_from(r: DatasetRepr) -> Result<Self> {
        let n = r.samples.len();
        let d = r.spec.d();
        let mut noise = Array2::zeros((n, d));
        let mut labels = Vec::with_capacity(n);
        let mut idx = Vec::with_capacity(n);
        for (i, s) in r.samples.into_iter().enumerate() {
            if s.noise_vector.len() != d {
                return Err(LabError::DimensionMismatch { expected: d, got: s.noise_vector.len() });
            }
            noise.row_mut(i).assign(&Array1::from(s.noise_vector));
            labels.push(f64::from(s.label));
            idx.push(s.signal_patch_index);
        }
        Dataset::from_parts(r.spec, r.seed_record, labels, idx, noise)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;
    use ndarray::array;

    fn reference_spec() -> SignalSpec {
        SignalSpec::axis_aligned(2000, 2.0, 0.5).unwrap()
    }

    #[test]
    fn projection_removes_signal_component() {
        let spec = SignalSpec::new(array![2.0, 0.0], 0.5).unwrap();
        let xi = spec.project_noise(array![1.0, 1.0].view());
        assert_eq!(xi, array![0.0, 0.5]);
        let zero = spec.project_noise(array![0.0, 0.0].view());
        assert_eq!(zero, array![0.0, 0.0]);
    }

    #[test]
    fn rejects_invalid_specs() {
        assert!(SignalSpec::new(array![1.0], 1.0).is_err());
        assert!(SignalSpec::new(array![0.0, 0.0], 1.0).is_err());
        assert!(SignalSpec::new(array![1.0, 0.0], 0.0).is_err());
        assert!(SignalSpec::new(array![1.0, 0.0], -1.0).is_err());
    }

    #[test]
    fn snr_formula() {
        let snr = reference_spec().snr();
        assert!((snr - 2.0 / (0.5 * 2000f64.sqrt())).abs() < 1e-15);
        assert!((snr - 0.08944).abs() < 1e-5);
        assert_eq!(compute_snr(3.0, 3.0, 1), 1.0);
        let doubled = SignalSpec::axis_aligned(2000, 2.0, 1.0).unwrap().snr();
        assert!((doubled - snr / 2.0).abs() < 1e-15);
    }

    #[test]
    fn noise_is_orthogonal_to_generic_mu() {
        let mut rng = rng_from_seed(3);
        let mu: Array1<f64> = (0..50).map(|k| (k as f64 * 0.37).sin() + 0.1).collect();
        let spec = SignalSpec::new(mu, 1.3).unwrap();
        for _ in 0..200 {
            let xi = sample_noise_vector(&spec, &mut rng);
            let bound = 1e-9 * spec.mu_norm() * xi.dot(&xi).sqrt();
            assert!(xi.dot(&spec.mu()).abs() <= bound);
        }
    }

    #[test]
    fn noise_norm_concentrates() {
        let spec = reference_spec();
        let mut rng = rng_from_seed(11);
        let inside = (0..1000)
            .filter(|_| {
                let xi = sample_noise_vector(&spec, &mut rng);
                let nsq = xi.dot(&xi);
                (250.0..=750.0).contains(&nsq)
            })
            .count();
        assert!(inside >= 990, "{inside}");
    }

    #[test]
    fn dataset_structure() {
        let spec = reference_spec();
        let ds = generate_dataset(&spec, 200, 1, &mut rng_from_seed(1));
        assert_eq!(ds.len(), 200);
        for s in ds.samples() {
            let (p1, p2) = (s.patch1(), s.patch2());
            let signal = &spec.mu() * s.label;
            let (sig, noise) = if s.signal_patch_index == 1 { (p1, p2) } else { (p2, p1) };
            assert_eq!(sig, signal);
            assert_eq!(noise, s.noise_vector);
        }
        let empty = generate_dataset(&spec, 0, 1, &mut rng_from_seed(1));
        assert!(empty.is_empty());
    }

    #[test]
    fn label_and_patch_balance() {
        let spec = SignalSpec::axis_aligned(4, 1.0, 1.0).unwrap();
        let ds = generate_dataset(&spec, 10_000, 5, &mut rng_from_seed(5));
        let label_mean = ds.labels().iter().sum::<f64>() / 10_000.0;
        let idx_mean = ds.signal_patch_indices().iter().map(|&k| f64::from(k)).sum::<f64>() / 10_000.0;
        assert!(label_mean.abs() <= 0.05);
        assert!((idx_mean - 1.5).abs() <= 0.05);
    }

    #[test]
    fn deterministic_generation() {
        let spec = SignalSpec::axis_aligned(30, 1.0, 1.0).unwrap();
        let a = generate_dataset(&spec, 17, 9, &mut rng_from_seed(9));
        let b = generate_dataset(&spec, 17, 9, &mut rng_from_seed(9));
        assert_eq!(a, b);
    }

    #[test]
    fn json_round_trip() {
        let spec = SignalSpec::axis_aligned(6, 1.5, 0.7).unwrap();
        let ds = generate_dataset(&spec, 5, 42, &mut rng_from_seed(42));
        let text = ds.to_json().unwrap();
        let back = Dataset::from_json(&text).unwrap();
        assert_eq!(ds, back);
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["spec"]["d"], 6);
        assert_eq!(v["seed_record"], 42);
        assert!(v["samples"][0]["noise_vector"].is_array());
    }
}
