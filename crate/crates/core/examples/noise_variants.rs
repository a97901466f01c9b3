//! Flip, Gaussian and uniform label noise against a standard-GD baseline.
//!
//! cargo run --release --example noise_variants -- [steps]

use label_noise_lab::experiments::{noise_variants, run_noise_comparison, Analysis, BaseConfig};

fn main() -> label_noise_lab::error::Result<()> {
    let steps = std::env::args().nth(1).map_or(2000, |s| s.parse().expect("steps"));
    let cfg = BaseConfig { steps, log_stride: (steps / 10).max(1), ..BaseConfig::reference(0) };
    let c = run_noise_comparison(&cfg, &noise_variants(), &Analysis::default())?;
    for arm in std::iter::once(&c.baseline).chain(&c.arms) {
        let last = arm.trace().and_then(|t| t.last());
        println!(
            "{:<16} clean loss {:>8.4}  test acc {:.4}",
            arm.label,
            last.map_or(f64::NAN, |r| r.clean_train_loss),
            arm.final_accuracy().unwrap_or(f64::NAN)
        );
    }
    Ok(())
}
