//! Paired runs for activation exponents 2, 3 and 4.
//!
//! cargo run --release --example q_sweep -- [steps]

use label_noise_lab::experiments::{q_presets, run_q_sweep, Analysis, BaseConfig};

fn main() -> label_noise_lab::error::Result<()> {
    let steps = std::env::args().nth(1).map_or(2000, |s| s.parse().expect("steps"));
    let base = BaseConfig { steps, log_stride: (steps / 10).max(1), ..BaseConfig::reference(0) };
    for e in run_q_sweep(&q_presets(&base), &Analysis::default())? {
        let c = &e.dynamics.config;
        println!(
            "q = {}  (n {}, eta {}, |mu| {})  standard {:.4}  label-noise {:.4}",
            e.q,
            c.n,
            c.eta,
            c.mu_scale,
            e.dynamics.gd.final_accuracy().unwrap_or(f64::NAN),
            e.dynamics.lngd.final_accuracy().unwrap_or(f64::NAN)
        );
    }
    Ok(())
}
