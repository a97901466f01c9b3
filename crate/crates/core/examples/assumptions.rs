//! Check a configuration against the theory's scaling conditions and
//! estimate its stage times.
//!
//! cargo run --example assumptions -- [d]

use label_noise_lab::experiments::{Analysis, BaseConfig};
use label_noise_lab::theory::{check_assumptions, estimate_stage_times, Algorithm, AssumptionConstants};

fn main() -> label_noise_lab::error::Result<()> {
    let d = std::env::args().nth(1).map_or(2000, |s| s.parse().expect("d"));
    let cfg = BaseConfig { d, ..BaseConfig::reference(0) };
    let spec = cfg.spec()?;
    let report = check_assumptions(&spec, cfg.n, cfg.m, cfg.eta, cfg.sigma_0, cfg.p, &AssumptionConstants::default());
    print!("{}", report.render());

    let a = Analysis::default();
    for which in [Algorithm::Gd, Algorithm::Lngd] {
        match estimate_stage_times(&spec, cfg.n, cfg.m, cfg.eta, cfg.sigma_0, a.verdict.epsilon, which, &a.stage) {
            Ok(e) => println!("{which:?}: T1 = {:.2}, T2 = {:.2}", e.t1, e.t2),
            Err(e) => println!("{which:?}: {e}"),
        }
    }
    Ok(())
}
