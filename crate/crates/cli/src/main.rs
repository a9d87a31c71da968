//! `probeqsd`: run scenarios, custom configurations and the validation suite.
//!
//! Exit status: 0 success, 2 configuration error, 3 numerical failure,
//! 4 validation failures present, 1 I/O failure, 130 interrupted.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};

use clap::{Parser, Subcommand};

use probeqsd::coeffs::{read_coeffs, solve_coeffs, write_coeffs};
use probeqsd::config::{parse_config_with_warnings, render_config, RunConfig, Scenario};
use probeqsd::ensemble::EnsembleOptions;
use probeqsd::scenario::{run_scenario, RunOptions, RunSummary};
use probeqsd::validation::{criteria, Level, ValidationContext, ValidationOptions, ValidationReport};
use probeqsd::{Error, Result};

#[derive(Parser)]
#[command(name = "probeqsd", version, about = "Non-Markovian QSD for qubits read out through a cavity probe")]
struct Cli {
    /// Worker threads for the trajectory ensemble (default: all cores).
    #[arg(long, global = true, env = "PROBEQSD_WORKERS")]
    workers: Option<usize>,

    /// No progress output.
    #[arg(long, short, global = true)]
    quiet: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the configuration in a TOML file.
    Run {
        config: PathBuf,
        /// Coefficient cache written by `coeffs --dump`.
        #[arg(long)]
        coeffs: Option<PathBuf>,
    },
    /// Run a preset: fig2a, fig2b, fig3a or fig3b.
    Scenario {
        id: String,
        #[arg(long)]
        seed: Option<u64>,
        /// Trajectories per curve.
        #[arg(long = "K", short = 'K')]
        k: Option<usize>,
        /// Output directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the acceptance suite.
    Validate {
        #[arg(long, default_value = "quick")]
        level: String,
        /// Also write the JSON report here.
        #[arg(long)]
        report: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Scale the sampled noise kernels by this factor (fault injection).
        #[arg(long, hide = true)]
        fault_kernel_amplitude: Option<f64>,
    },
    /// Solve the coefficients of a configuration and cache them.
    Coeffs {
        config: PathBuf,
        #[arg(long)]
        dump: PathBuf,
    },
}

fn load_config(path: &Path, quiet: bool) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    let parsed = parse_config_with_warnings(&text).map_err(|e| e.context(path.display().to_string()))?;
    for w in &parsed.warnings {
        eprintln!("warning: {w}");
    }
    if !quiet {
        eprintln!("# resolved configuration\n{}", render_config(&parsed.config));
    }
    Ok(parsed.config)
}

fn progress_printer() -> impl Fn(f64) + Send + Sync + 'static {
    let last = Mutex::new(-1i64);
    move |f: f64| {
        let pct = (f * 100.0).floor() as i64;
        let mut l = last.lock().unwrap();
        if pct / 5 > *l / 5 || *l < 0 {
            *l = pct;
            eprint!("\r{pct:3}%");
            if pct >= 100 {
                eprintln!();
            }
        }
    }
}

fn execute(config: &RunConfig, coeffs: Option<PathBuf>, quiet: bool, cancel: Arc<AtomicBool>) -> Result<RunSummary> {
    let mut ensemble = EnsembleOptions::default().with_cancel(cancel);
    if !quiet {
        ensemble = ensemble.with_progress(progress_printer());
    }
    let coeffs = coeffs.map(|p| read_coeffs(&p)).transpose()?;
    let summary = run_scenario(config, &RunOptions { ensemble, coeffs })?;
    println!("run {}: {} trajectories accepted, {} rejected", summary.name, summary.trajectories, summary.rejected);
    println!("max stderr {:.3e}, max clipped mass {:.1e}, wall time {:.1} s", summary.max_stderr, summary.max_clipped, summary.wall_seconds);
    for p in [&summary.csv, &summary.meta, &summary.script] {
        println!("wrote {}", p.display());
    }
    Ok(summary)
}

fn validate(level: &str, report_file: Option<PathBuf>, seed: u64, fault: Option<f64>, quiet: bool) -> Result<bool> {
    let level: Level = level.parse()?;
    let mut ctx = ValidationContext::new(ValidationOptions {
        level,
        seed,
        kernel_fault: fault,
    });
    let mut results = Vec::new();
    for &id in criteria(level) {
        let r = ctx.run(id);
        if !quiet {
            eprintln!("{r}");
        }
        results.push(r);
    }
    let report = ValidationReport {
        level,
        passed: results.iter().all(|r| r.passed),
        criteria: results,
    };
    let json = report.to_json();
    println!("{json}");
    if let Some(path) = report_file {
        probeqsd::export::write_atomic(&path, format!("{json}\n").as_bytes())?;
    }
    Ok(report.passed)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.workers {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot start {n} workers: {e}");
            return ExitCode::from(2);
        }
    }
    let cancel = Arc::new(AtomicBool::new(false));
    {
        let cancel = cancel.clone();
        // Without a handler the default SIGINT action still stops the process.
        let _ = ctrlc::set_handler(move || cancel.store(true, Ordering::SeqCst));
    }

    let outcome: Result<bool> = match cli.command {
        Command::Run { config, coeffs } => load_config(&config, cli.quiet).and_then(|c| execute(&c, coeffs, cli.quiet, cancel)).map(|_| true),
        Command::Scenario { id, seed, k, out } => id
            .parse::<Scenario>()
            .and_then(|s| {
                let mut c = s.preset();
                if let Some(seed) = seed {
                    c.ensemble.seed = seed;
                }
                if let Some(k) = k {
                    if k < probeqsd::config::MIN_ENSEMBLE {
                        return Err(Error::Config(format!(
                            "--K: ensemble size below minimum ({k} < {})",
                            probeqsd::config::MIN_ENSEMBLE
                        )));
                    }
                    c.ensemble.k = k;
                }
                if let Some(out) = out {
                    c.output_dir = out;
                }
                execute(&c, None, cli.quiet, cancel)
            })
            .map(|_| true),
        Command::Validate {
            level,
            report,
            seed,
            fault_kernel_amplitude,
        } => validate(&level, report, seed, fault_kernel_amplitude, cli.quiet),
        Command::Coeffs { config, dump } => load_config(&config, cli.quiet).and_then(|c| {
            let coeffs = solve_coeffs(&c.model, c.grid)?;
            write_coeffs(&dump, &coeffs)?;
            println!("wrote {}", dump.display());
            Ok(true)
        }),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(4),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
