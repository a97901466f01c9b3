//! Standard GD against label-noise GD on the same data and initialization.
//!
//! cargo run --release --example train_dynamics -- [steps] [seed]

use label_noise_lab::experiments::{run_dynamics, Analysis, BaseConfig};

fn main() {
    let mut args = std::env::args().skip(1);
    let steps = args.next().map_or(2000, |s| s.parse().expect("steps"));
    let seed = args.next().map_or(0, |s| s.parse().expect("seed"));
    let cfg = BaseConfig { steps, log_stride: (steps / 20).max(1), ..BaseConfig::reference(seed) };

    let result = run_dynamics(&cfg, &Analysis::default());
    let (gd, lngd) = (result.gd.trace().expect("gd run"), result.lngd.trace().expect("lngd run"));
    println!("{:>6}  {:>10} {:>8}  {:>10} {:>8} {:>8}", "step", "gd loss", "gd acc", "ln loss", "ln acc", "ln iota");
    for (a, b) in gd.rows.iter().zip(&lngd.rows).step_by(2) {
        println!(
            "{:>6}  {:>10.5} {:>8.4}  {:>10.5} {:>8.4} {:>8.3}",
            a.step,
            a.clean_train_loss,
            a.test_accuracy(),
            b.clean_train_loss,
            b.test_accuracy(),
            b.iota_mean
        );
    }
    println!("accuracy gain {:+.4}", result.accuracy_gain().unwrap_or(f64::NAN));
    for arm in [&result.gd, &result.lngd] {
        if let Ok(a) = &arm.run {
            if let Ok(v) = &a.reports.verdict {
                println!("{}: {}", arm.label, v.note);
            }
        }
    }
}
