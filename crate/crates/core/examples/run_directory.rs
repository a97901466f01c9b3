//! Write a run directory with traces and a digest manifest, then read it back.
//!
//! cargo run --release --example run_directory -- [out]

use label_noise_lab::cli_io::{emit_dynamics, parse_config_str, RunManifest};
use label_noise_lab::experiments::{run_dynamics, Analysis};

const CONFIG: &str = r#"{"d": 500, "n": 50, "mu_scale": 2.0, "sigma_p": 0.5, "p": 0.1, "eta": 0.5, "steps": 300, "seed": 4}"#;

fn main() -> label_noise_lab::error::Result<()> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "lnlab-out/example-run".into());
    let parsed = parse_config_str(CONFIG, &[])?;
    println!("defaults applied: {:?}", parsed.defaults_applied);
    let result = run_dynamics(&parsed.config, &Analysis::default());
    emit_dynamics(&result, &parsed, out.as_ref(), true)?;

    let m = RunManifest::load(out.as_ref())?;
    println!("{} run, seed {}", m.subcommand, m.master_seed);
    for s in &m.streams {
        println!("  stream {:<12} seed {}", s.stream.name(), s.seed);
    }
    for f in &m.files {
        println!("  {:<24} {:>9} bytes  {}", f.path, f.bytes, &f.sha256[..16]);
    }
    Ok(())
}
