use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use super::config::{parse_config, parse_grid_str, parse_override, preset_config, ParsedConfig};
use super::emit::{sha256_hex, RunDir, RunManifest};
use super::{
    emit_check, emit_concentration, emit_dynamics, emit_heatmap, emit_noise_comparison, emit_q_sweep, ArmSummary,
    TRACE_CSV,
};
use crate::error::{LabError, Result};
use crate::experiments::{
    noise_variants, dynamics_checks, heatmap_checks, noise_checks, q_presets, q_sweep_checks, run_dynamics,
    run_heatmap, run_noise_comparison, run_q_sweep, Analysis, ArmResult, BaseConfig, Check, SweepGrid,
};
use crate::theory::{check_assumptions, concentration_suite, estimate_stage_times, Algorithm, ConcentrationSettings};

/// Environment variable naming the default output root.
pub const OUT_ENV: &str = "LNLAB_OUT";

const EXIT_OK: i32 = 0;
const EXIT_USAGE: i32 = 1;
const EXIT_ABORT: i32 = 2;
const EXIT_ASSERT: i32 = 3;

/// Tolerance for "no worse than standard GD" comparisons.
const WORSE_TOLERANCE: f64 = 0.02;
const HEATMAP_GAIN: f64 = 0.10;

#[derive(Debug, Parser)]
#[command(name = "lnlab", version, about = "Label-noise gradient descent laboratory", arg_required_else_help = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Args)]
struct Common {
    /// JSON configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed; overrides the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Exit with status 3 when the run's verdict fails.
    #[arg(long = "assert", global = true)]
    assert_verdict: bool,
    /// Overwrite an existing run directory.
    #[arg(long, global = true)]
    force: bool,
    /// Configuration override, `key=value` with a JSON value. Repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Evaluate the assumptions and stage-time estimates for a configuration.
    Check,
    /// Standard GD and label-noise GD on shared data and initialization.
    Dynamics {
        /// Reconstruct the filters from the coefficients at every logged step.
        #[arg(long)]
        audit: bool,
    },
    /// Test accuracy over an SNR by sample-size grid.
    Heatmap {
        /// Use the full 8 x 7 grid instead of the desk-scale subsample.
        #[arg(long)]
        full: bool,
    },
    /// Flip, Gaussian and uniform label noise against a standard-GD baseline.
    NoiseCompare,
    /// Paired runs with activation exponents 2, 3 and 4.
    QSweep,
    /// Monte Carlo pass rates of the concentration lemmas.
    Concentration {
        #[arg(long, default_value_t = 1000)]
        trials: usize,
        /// Failure probability for the initialization and noise-geometry lemmas.
        #[arg(long, default_value_t = 0.01)]
        delta_geometry: f64,
        /// Failure probability for the flip-count lemmas.
        #[arg(long, default_value_t = 0.05)]
        delta_flips: f64,
    },
    /// Re-run a saved dynamics run from its manifest and audit the decomposition.
    Decompose {
        /// Directory of the saved run.
        #[arg(long)]
        from: PathBuf,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Check => "check",
            Command::Dynamics { .. } => "dynamics",
            Command::Heatmap { .. } => "heatmap",
            Command::NoiseCompare => "noise-compare",
            Command::QSweep => "q-sweep",
            Command::Concentration { .. } => "concentration",
            Command::Decompose { .. } => "decompose",
        }
    }
}

/// Run the command line; returns the process exit status.
pub fn main_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    print!("{}", e.render());
                    EXIT_OK
                }
                _ => {
                    eprint!("{}", e.render());
                    EXIT_USAGE
                }
            };
        }
    };
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_USAGE
        }
    }
}

fn overrides(common: &Common) -> Result<Vec<(String, Value)>> {
    let mut out: Vec<(String, Value)> = common.set.iter().map(|s| parse_override(s)).collect::<Result<_>>()?;
    if let Some(seed) = common.seed {
        out.push(("seed".into(), seed.into()));
    }
    Ok(out)
}

fn load_config(common: &Common) -> Result<ParsedConfig> {
    let ov = overrides(common)?;
    match &common.config {
        Some(path) => parse_config(path, &ov),
        None => preset_config(0, &ov),
    }
}

fn out_dir(common: &Common, name: &str, seed: u64) -> PathBuf {
    if let Some(out) = &common.out {
        return out.clone();
    }
    let root = std::env::var_os(OUT_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("lnlab-out"));
    root.join(format!("{name}-seed{seed}"))
}

fn print_checks(checks: &[Check]) -> bool {
    for c in checks {
        println!("  [{}] {}: {}", if c.passed { "pass" } else { "FAIL" }, c.name, c.detail);
    }
    checks.iter().all(|c| c.passed)
}

fn print_arm(arm: &ArmResult) {
    let s = ArmSummary::of(arm);
    match (&arm.run, arm.trace().and_then(|t| t.last())) {
        (Ok(a), Some(last)) => {
            let violations = a.reports.proposition1.violations.len();
            println!(
                "  {:<16} clean loss {:.4}  noisy loss {:.4}  test acc {:.4}  bound violations {violations}{}",
                arm.label,
                last.clean_train_loss,
                last.noisy_train_loss,
                last.test_accuracy(),
                s.abort.map(|a| format!("  ABORTED at step {}", a.step)).unwrap_or_default()
            );
        }
        (Ok(_), None) => println!("  {:<16} no logged rows", arm.label),
        (Err(e), _) => println!("  {:<16} failed: {e}", arm.label),
    }
}

fn finish(arms: &[&ArmResult], checks: &[Check], assert_verdict: bool, dir: &Path) -> i32 {
    for arm in arms {
        print_arm(arm);
    }
    let ok = print_checks(checks);
    println!("outputs in {}", dir.display());
    if arms.iter().any(|a| a.aborted()) {
        EXIT_ABORT
    } else if assert_verdict && !ok {
        EXIT_ASSERT
    } else {
        EXIT_OK
    }
}

fn run(cli: &Cli) -> Result<i32> {
    let c = &cli.common;
    let name = cli.command.name();
    match &cli.command {
        Command::Check => {
            let parsed = load_config(c)?;
            let cfg = &parsed.config;
            let spec = cfg.spec()?;
            let report = check_assumptions(&spec, cfg.n, cfg.m, cfg.eta, cfg.sigma_0, cfg.p, &Default::default());
            print!("{}", report.render());
            let analysis = Analysis::default();
            let mut stages = serde_json::Map::new();
            for which in [Algorithm::Gd, Algorithm::Lngd] {
                let est = estimate_stage_times(
                    &spec,
                    cfg.n,
                    cfg.m,
                    cfg.eta,
                    cfg.sigma_0,
                    analysis.verdict.epsilon,
                    which,
                    &analysis.stage,
                );
                let key = format!("{which:?}").to_lowercase();
                match est {
                    Ok(e) => {
                        println!("Stage times ({key}): T1 = {:.3}, T2 = {:.3}", e.t1, e.t2);
                        stages.insert(key, serde_json::to_value(e)?);
                    }
                    Err(e) => {
                        println!("Stage times ({key}): invalid: {e}");
                        stages.insert(key, json!({ "invalid": e.to_string() }));
                    }
                }
            }
            if let Some(out) = &c.out {
                emit_check(&report, &Value::Object(stages), out, c.force)?;
            }
            Ok(EXIT_OK)
        }
        Command::Dynamics { audit } => {
            let parsed = load_config(c)?;
            let analysis = Analysis { audit_decomposition: *audit, ..Analysis::default() };
            let result = run_dynamics(&parsed.config, &analysis);
            let dir = out_dir(c, name, parsed.config.seed);
            emit_dynamics(&result, &parsed, &dir, c.force)?;
            Ok(finish(&[&result.gd, &result.lngd], &dynamics_checks(&result), c.assert_verdict, &dir))
        }
        Command::NoiseCompare => {
            let parsed = load_config(c)?;
            let result = run_noise_comparison(&parsed.config, &noise_variants(), &Analysis::default())?;
            let dir = out_dir(c, name, parsed.config.seed);
            emit_noise_comparison(&result, &parsed, WORSE_TOLERANCE, &dir, c.force)?;
            let mut arms = vec![&result.baseline];
            arms.extend(result.arms.iter());
            Ok(finish(&arms, &noise_checks(&result, WORSE_TOLERANCE), c.assert_verdict, &dir))
        }
        Command::QSweep => {
            let parsed = load_config(c)?;
            let entries = run_q_sweep(&q_presets(&parsed.config), &Analysis::default())?;
            let dir = out_dir(c, name, parsed.config.seed);
            emit_q_sweep(&entries, &parsed, &dir, c.force)?;
            let arms: Vec<&ArmResult> = entries.iter().flat_map(|e| [&e.dynamics.gd, &e.dynamics.lngd]).collect();
            Ok(finish(&arms, &q_sweep_checks(&entries), c.assert_verdict, &dir))
        }
        Command::Heatmap { full } => {
            let seed = c.seed.unwrap_or(0);
            let base = if *full { SweepGrid::full(seed) } else { SweepGrid::desk(seed) };
            let ov: Vec<(String, Value)> = c.set.iter().map(|s| parse_override(s)).collect::<Result<_>>()?;
            let text = match &c.config {
                Some(p) => std::fs::read_to_string(p)?,
                None => "{}".into(),
            };
            let mut grid = parse_grid_str(&text, &base, &ov)?;
            if let Some(seed) = c.seed {
                grid.seed = seed;
            }
            let h = run_heatmap(&grid)?;
            let dir = out_dir(c, name, grid.seed);
            emit_heatmap(&h, HEATMAP_GAIN, WORSE_TOLERANCE, &dir, c.force)?;
            for cell in &h.cells {
                println!(
                    "  snr {:<5} n {:<4} standard {:.4} +- {:.4}  label-noise {:.4} +- {:.4}{}",
                    cell.snr,
                    cell.n,
                    cell.gd.mean,
                    cell.gd.std,
                    cell.lngd.mean,
                    cell.lngd.std,
                    if cell.missing.is_empty() { String::new() } else { format!("  missing {}", cell.missing.len()) }
                );
            }
            let ok = print_checks(&heatmap_checks(&h, HEATMAP_GAIN, WORSE_TOLERANCE));
            println!("outputs in {}", dir.display());
            Ok(if c.assert_verdict && !ok { EXIT_ASSERT } else { EXIT_OK })
        }
        Command::Concentration { trials, delta_geometry, delta_flips } => {
            let (spec, settings) = match &c.config {
                Some(_) => {
                    let cfg = load_config(c)?.config;
                    let s = ConcentrationSettings {
                        n: cfg.n,
                        m: cfg.m,
                        sigma_0: cfg.sigma_0,
                        p: cfg.p,
                        trials: *trials,
                        t: cfg.steps,
                        seed: cfg.seed,
                    };
                    (cfg.spec()?, s)
                }
                None => {
                    let s = ConcentrationSettings {
                        n: 20,
                        m: 20,
                        sigma_0: 0.01,
                        p: 0.1,
                        trials: *trials,
                        t: 2000,
                        seed: c.seed.unwrap_or(0),
                    };
                    (BaseConfig::reference(0).spec()?, s)
                }
            };
            let geometry = concentration_suite(&spec, &settings, *delta_geometry)?;
            let flips = concentration_suite(&spec, &settings, *delta_flips)?;
            let mut report = geometry.clone();
            report.checks.retain(|k| k.lemma == "B.1" || k.lemma == "B.2");
            report.checks.extend(flips.checks.into_iter().filter(|k| k.lemma.starts_with("B.3") || k.lemma.starts_with("B.4")));
            print!("{}", report.render());
            let dir = out_dir(c, name, settings.seed);
            emit_concentration(&report, &dir, c.force)?;
            println!("outputs in {}", dir.display());
            let ok = report.checks.iter().filter(|k| k.applicable).all(|k| k.pass_rate >= 1.0 - k.delta);
            Ok(if c.assert_verdict && !ok { EXIT_ASSERT } else { EXIT_OK })
        }
        Command::Decompose { from } => decompose(c, from),
    }
}

fn decompose(c: &Common, from: &Path) -> Result<i32> {
    let manifest = RunManifest::load(from)?;
    if manifest.subcommand != "dynamics" {
        return Err(LabError::InvalidArgument(format!(
            "decompose needs a dynamics run, {} holds a {} run",
            from.display(),
            manifest.subcommand
        )));
    }
    let config: BaseConfig = serde_json::from_value(manifest.config.clone())?;
    config.validate()?;
    let analysis = Analysis { audit_decomposition: true, ..Analysis::default() };
    let result = run_dynamics(&config, &analysis);
    let trace = super::emit::trace_csv(
        &[("gd", &result.gd), ("lngd", &result.lngd)]
            .iter()
            .filter_map(|(l, a)| a.trace().map(|t| (*l, t)))
            .collect::<Vec<_>>(),
    )?;
    let saved = manifest.file(TRACE_CSV).map(|f| f.sha256.clone());
    let rerun_digest = sha256_hex(&trace);
    let matches = saved.as_deref() == Some(rerun_digest.as_str());
    let mut checks = vec![Check {
        name: "trace reproduced".into(),
        passed: matches,
        detail: format!("saved {} vs re-run {rerun_digest}", saved.as_deref().unwrap_or("<none>")),
    }];
    for arm in [&result.gd, &result.lngd] {
        let audit = arm.run.as_ref().ok().and_then(|a| a.reports.audit.clone());
        let (ok, detail) = match &audit {
            Some(a) => (
                a.max_reconstruction_error <= 1e-8 && a.max_gamma_discrepancy <= 1e-9,
                format!(
                    "{} steps, reconstruction {:.3e}, gamma discrepancy {:.3e}, rho discrepancy {:.3e} (bound {:.3e})",
                    a.steps_checked, a.max_reconstruction_error, a.max_gamma_discrepancy, a.max_rho_discrepancy, a.rho_bound
                ),
            ),
            None => (false, arm.run.as_ref().err().cloned().unwrap_or_else(|| "no audit".into())),
        };
        checks.push(Check { name: format!("{} decomposition", arm.label), passed: ok, detail });
    }
    let out = c.out.clone().unwrap_or_else(|| from.join("decompose"));
    let mut dir = RunDir::create(&out, c.force)?;
    dir.write_json(
        "decomposition.json",
        &json!({
            "source": from.display().to_string(),
            "arms": [ArmSummary::of(&result.gd), ArmSummary::of(&result.lngd)],
            "checks": checks,
        }),
    )?;
    dir.finish("decompose", manifest.config.clone(), manifest.defaults_applied.clone(), config.seed)?;
    Ok(finish(&[&result.gd, &result.lngd], &checks, c.assert_verdict, &out))
}
