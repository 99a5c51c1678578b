//! `subnyq`: run, sweep and validate separation scenarios.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use subnyq_core::emit::{emit_run, emit_sweep};
use subnyq_core::scenario::parse_si;
use subnyq_core::{run_pipeline, run_sweep, Error, Result, ScenarioConfig};

/// Environment variable that overrides `run.master_seed`.
const SEED_ENV: &str = "SUBNYQ_SEED";

#[derive(Parser)]
#[command(
    name = "subnyq",
    version,
    about = "Sub-Nyquist pulse-gated blind source separation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and write curves, eye diagram and report.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Repeat a scenario over several sampling ratios.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Comma-separated sampling ratios, e.g. `1e-2,1e-3`.
        #[arg(long, value_delimiter = ',', value_parser = parse_ratio)]
        ratios: Vec<f64>,
        #[arg(long, default_value_t = 1)]
        trials: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Parse a scenario and check its invariants.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
}

fn parse_ratio(s: &str) -> std::result::Result<f64, String> {
    let r = parse_si(s.trim()).map_err(|e| e.to_string())?;
    if r > 0.0 && r <= 1.0 {
        Ok(r)
    } else {
        Err(format!("ratio {r} is outside (0, 1]"))
    }
}

fn load(path: &Path) -> Result<ScenarioConfig> {
    let mut cfg = ScenarioConfig::from_path(path)?;
    if let Ok(raw) = std::env::var(SEED_ENV) {
        cfg.master_seed = raw.trim().parse().map_err(|_| {
            Error::Config(format!(
                "{SEED_ENV}: expected an unsigned integer, got {raw:?}"
            ))
        })?;
    }
    Ok(cfg)
}

fn warn_all(warnings: &[String]) {
    for w in warnings {
        eprintln!("warning: {w}");
    }
}

fn run(config: &Path, out: &Path) -> Result<i32> {
    let cfg = load(config)?;
    let report = run_pipeline(&cfg)?;
    warn_all(&report.messages);
    for path in emit_run(&report, out)? {
        println!("wrote {}", path.display());
    }
    println!("status          {:?}", report.status);
    println!("sampling ratio  {:e}", report.sampling_ratio);
    println!("gated samples   {}", report.gated_samples);
    println!(
        "theta0          {:.4} deg (error {:.4})",
        report.fit2.theta0_deg, report.angle_errors.theta0_deg
    );
    if let Some(f4) = &report.fit4 {
        println!("phi0            {:.4} deg", f4.phi0_deg);
    }
    println!("corr_soi        {:.6}", report.separation.corr_soi);
    println!("sinr gain       {:.2} dB", report.separation.sinr_gain_db);
    if let Some(b) = report.separation.ber {
        println!("ber             {b:e}");
    }
    if let Some(t) = &report.timings {
        eprintln!(
            "timings: generate {:.3}s gate {:.3}s estimate {:.3}s separate {:.3}s metrics {:.3}s",
            t.generate_s, t.gate_s, t.estimate_s, t.separate_s, t.metrics_s
        );
    }
    Ok(report.exit_code())
}

fn sweep(config: &Path, ratios: &[f64], trials: usize, out: &Path) -> Result<i32> {
    let cfg = load(config)?;
    let report = run_sweep(&cfg, ratios, trials)?;
    for path in emit_sweep(&report, out)? {
        println!("wrote {}", path.display());
    }
    println!(
        "{:>10} {:>8} {:>8} {:>12} {:>12} {:>10}",
        "ratio", "gated", "failed", "theta0_err", "phi0_err", "corr_soi"
    );
    let fmt = |s: Option<subnyq_core::sweep::Spread>| {
        s.map_or("-".to_owned(), |s| format!("{:.3}", s.median))
    };
    for r in &report.rows {
        println!(
            "{:>10.1e} {:>8} {:>8} {:>12} {:>12} {:>10.4}",
            r.ratio,
            r.gated_samples,
            r.failures,
            fmt(r.theta0_error_deg),
            fmt(r.phi0_error_deg),
            r.corr_soi.median
        );
    }
    Ok(0)
}

fn validate(config: &Path) -> Result<i32> {
    let cfg = load(config)?;
    warn_all(&cfg.validate()?);
    println!(
        "ok: {} samples, ~{} gated (sampling ratio {:e})",
        cfg.n_samples(),
        cfg.expected_gated_samples(),
        subnyq_core::sampler::sampling_ratio(&cfg.pulse, cfg.signal_bandwidth_hz)
    );
    Ok(0)
}

fn main() -> ExitCode {
    // clap exits with 2 on usage errors, which would read as a degenerate run
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let outcome = match &cli.command {
        Command::Run { config, out } => run(config, out),
        Command::Sweep {
            config,
            ratios,
            trials,
            out,
        } => sweep(config, ratios, *trials, out),
        Command::Validate { config } => validate(config),
    };
    match outcome {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
