//! Draw a two-patch dataset and look at its geometry.
//!
//! cargo run --example data_model

use label_noise_lab::data::{generate_dataset, SignalSpec};
use label_noise_lab::rng::{stream_rng, Stream};

fn main() -> label_noise_lab::error::Result<()> {
    let spec = SignalSpec::axis_aligned(2000, 2.0, 0.5)?;
    let ds = generate_dataset(&spec, 200, 0, &mut stream_rng(0, Stream::Data));

    println!("d = {}, |mu| = {}, sigma_p = {}, snr = {:.4}", spec.d(), spec.mu_norm(), spec.sigma_p(), spec.snr());
    let positives = ds.labels().iter().filter(|&&y| y > 0.0).count();
    let first_patch = ds.signal_patch_indices().iter().filter(|&&k| k == 1).count();
    println!("{positives}/{} positive labels, signal in patch 1 for {first_patch}", ds.len());

    let norms = ds.noise_norms_sq();
    let mean = norms.iter().sum::<f64>() / norms.len() as f64;
    let expected = spec.sigma_p().powi(2) * (spec.d() - 1) as f64;
    println!("mean |xi|^2 = {mean:.2} (expected {expected:.2})");

    let noise = ds.noise_matrix();
    let along_mu = noise.rows().into_iter().map(|r| r.dot(&spec.mu()).abs()).fold(0.0, f64::max);
    println!("max |<xi_i, mu>| = {along_mu:.2e}");
    let cross = noise.row(0).dot(&noise.row(1));
    println!("<xi_0, xi_1> = {cross:.3}");

    let s = ds.sample(0);
    println!("sample 0: y = {}, signal patch {}", s.label, ds.signal_patch_indices()[0]);
    Ok(())
}
