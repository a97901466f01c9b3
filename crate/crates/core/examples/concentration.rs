//! Monte Carlo pass rates of the initialization, noise and flip-count bounds.
//!
//! cargo run --release --example concentration -- [trials]

use label_noise_lab::data::SignalSpec;
use label_noise_lab::theory::{concentration_suite, ConcentrationSettings};

fn main() -> label_noise_lab::error::Result<()> {
    let trials = std::env::args().nth(1).map_or(1000, |s| s.parse().expect("trials"));
    let spec = SignalSpec::axis_aligned(2000, 2.0, 0.5)?;
    let settings = ConcentrationSettings { n: 20, m: 20, sigma_0: 0.01, p: 0.1, trials, t: 2000, seed: 0 };
    for delta in [0.01, 0.05] {
        print!("{}", concentration_suite(&spec, &settings, delta)?.render());
    }
    Ok(())
}
