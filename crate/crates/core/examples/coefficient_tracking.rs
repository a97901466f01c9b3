//! Track the signal and memorization coefficients during training and check
//! that they rebuild the weights.
//!
//! cargo run --release --example coefficient_tracking

use label_noise_lab::decomposition::{reconstruction_error, ratio_summary};
use label_noise_lab::trainer::{train_run_observed, LabelNoiseSpec, RunSetup, TrainConfig};

fn main() -> label_noise_lab::error::Result<()> {
    let setup = RunSetup::axis_aligned(500, 2.0, 0.5, 50, 10, 2, 0.01)?;
    let config = TrainConfig {
        eta: 0.5,
        steps: 400,
        noise: LabelNoiseSpec::Flip { p: 0.1 },
        log_stride: 50,
        seed: 1,
        n_test: 500,
        snapshot_stride: 0,
    };
    let mut worst: f64 = 0.0;
    let out = train_run_observed(&config, &setup, &mut |s| {
        let err = reconstruction_error(s.net, s.state, s.dataset).unwrap();
        worst = worst.max(err);
        println!(
            "step {:>4}  max gamma {:.4}  max rho_bar {:.4}  min rho_under {:+.4}  rho/gamma {:.2}  rebuild error {err:.1e}",
            s.step,
            s.state.gamma.iter().copied().fold(f64::MIN, f64::max),
            s.state.rho_bar.iter().copied().fold(f64::MIN, f64::max),
            s.state.rho_under.iter().copied().fold(f64::MAX, f64::min),
            ratio_summary(s.state),
        );
    })?;
    println!("worst reconstruction error {worst:.2e}");
    println!("rho_bar decreases under label noise: {}", out.trace.monotonicity.rho_bar_decreases);
    Ok(())
}
