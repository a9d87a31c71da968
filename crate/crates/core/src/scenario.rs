//! Runs a configuration end to end: coefficients, ensembles, observables,
//! reference curves, and the output files.
//!
//! Each run writes `<name>.csv`, `<name>.meta.json` and `<name>.gp` into the
//! output directory. Nothing is written until every curve is computed, and
//! the three files are committed together, so an interrupted run leaves no
//! partial output behind.

use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::atomic::Ordering;
use std::sync::Arc;
use std::time::Instant;

use serde_json::json;

use crate::coeffs::{solve_coeffs, Coefficients, ModelParams};
use crate::config::{render_config, RunConfig};
use crate::ensemble::{run_ensemble_with, DensityMatrixSeries, EnsembleOptions};
use crate::export::render_csv;
use crate::observables::{coherence, concurrence, population, ObservableSeries};
use crate::operators::ComplexVector;
use crate::reference::{solve_lindblad_oracle, solve_one_qubit_master, Environment, LindbladModel};
use crate::{Error, Result, TimeGrid};

/// Fock levels per mode for the two-qubit reference; the solver checks the
/// choice by doubling it.
const ORACLE_CUTOFF: usize = 4;

#[derive(Clone, Default)]
pub struct RunOptions {
    pub ensemble: EnsembleOptions,
    /// Pre-solved coefficients, used for any curve whose model they match.
    pub coeffs: Option<Coefficients>,
}

#[derive(Clone, Debug)]
pub struct RunSummary {
    pub name: String,
    pub csv: PathBuf,
    pub meta: PathBuf,
    pub script: PathBuf,
    pub columns: Vec<String>,
    pub trajectories: usize,
    pub rejected: usize,
    pub max_stderr: f64,
    pub max_clipped: f64,
    pub wall_seconds: f64,
}

/// One curve family: a model run by ensemble, optionally with its oracle.
struct Variant {
    suffix: String,
    params: ModelParams,
}

fn variants(config: &RunConfig) -> Vec<Variant> {
    let sweep = config.g_values.len() > 1;
    let mut out: Vec<Variant> = (0..config.g_values.len())
        .map(|i| Variant {
            suffix: if sweep { format!("_g{}", config.g_values[i].re) } else { String::new() },
            params: config.model_at(i),
        })
        .collect();
    if config.compare_direct {
        out.push(Variant {
            suffix: "_direct".into(),
            params: config.model.direct(),
        });
    }
    out
}

fn observables(config: &RunConfig, series: &DensityMatrixSeries, suffix: &str) -> Result<Vec<ObservableSeries>> {
    config
        .outputs
        .iter()
        .map(|name| {
            let s = match name.as_str() {
                "population_a" => population(series, 0)?,
                "population_b" => population(series, 1)?,
                "coherence_a" => coherence(series, 0)?,
                "coherence_b" => coherence(series, 1)?,
                "concurrence" => concurrence(series)?,
                other => return Err(Error::Config(format!("unknown observable '{other}'"))),
            };
            Ok(s.with_name(format!("{name}{suffix}")))
        })
        .collect()
}

fn coefficients_for(params: &ModelParams, grid: TimeGrid, cached: Option<&Coefficients>) -> Result<Coefficients> {
    if let Some(c) = cached {
        let kernels = match c {
            Coefficients::One(x) => x.kernels(),
            Coefficients::Two(x) => x.kernels(),
        };
        if c.grid() == grid && kernels == params.kernels() && c.dim() == params.dim() {
            return Ok(c.clone());
        }
    }
    solve_coeffs(params, grid)
}

/// Deterministic reference for `params`: the exact master equation for one
/// qubit, the pseudomode Lindblad model for two.
pub fn oracle_series(params: &ModelParams, coeffs: &Coefficients, psi0: &ComplexVector, grid: TimeGrid) -> Result<DensityMatrixSeries> {
    let rho0 = psi0.projector();
    match coeffs {
        Coefficients::One(c) => solve_one_qubit_master(params, c, &rho0, grid),
        Coefficients::Two(_) => {
            let model = LindbladModel::new(params.clone(), Environment::Pseudomode, ORACLE_CUTOFF)?;
            let full = model.with_vacuum(&rho0);
            Ok(solve_lindblad_oracle(&model, &full, grid)?.system_series())
        }
    }
}

fn gnuplot_script(csv_name: &str, columns: &[String]) -> String {
    let mut s = String::from("set datafile separator ','\nset key autotitle columnhead\nset xlabel 't'\n");
    let plots: Vec<String> = columns
        .iter()
        .enumerate()
        .filter(|(_, c)| !c.ends_with("_stderr"))
        .map(|(i, _)| format!("'{csv_name}' using 1:{} with lines", i + 2))
        .collect();
    if !plots.is_empty() {
        s.push_str("plot ");
        s.push_str(&plots.join(", \\\n     "));
        s.push('\n');
    }
    s
}

fn notes(config: &RunConfig) -> Vec<String> {
    let mut n = Vec::new();
    if matches!(config.scenario, Some(s) if !s.two_qubit()) {
        n.push("non-paper choice: coupling values g = 0.3 and 0.5 are representative of the two plotted curves".into());
    }
    if config.compare_direct {
        n.push(format!(
            "non-paper choice: direct-coupling kernel is OU with rate gamma and amplitude {} (equal time integral to the probe's second layer unless overridden)",
            config.model.detector_kernel().equal_time()
        ));
    }
    if config.compare_oracle && config.model.n_qubits == 2 {
        n.push(format!("two-qubit oracle: Lindblad model with one pseudomode per layer, Fock cutoff {ORACLE_CUTOFF} checked by doubling"));
    }
    n
}

/// Commits all files or none.
fn write_all(files: &[(PathBuf, Vec<u8>)]) -> Result<()> {
    let mut staged = Vec::new();
    for (path, bytes) in files {
        let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
        let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
        tmp.write_all(bytes)?;
        tmp.as_file().sync_all()?;
        staged.push((tmp, path));
    }
    let mut done: Vec<&PathBuf> = Vec::new();
    for (tmp, path) in staged {
        if let Err(e) = tmp.persist(path) {
            for p in done {
                let _ = std::fs::remove_file(p);
            }
            return Err(Error::Io(e.error));
        }
        done.push(path);
    }
    Ok(())
}

pub fn run_scenario(config: &RunConfig, opts: &RunOptions) -> Result<RunSummary> {
    let start = Instant::now();
    let name = config.run_name();
    let ctx = |e: Error| e.context(format!("{name}"));
    let psi0 = config.psi0().map_err(ctx)?;
    let grid = config.grid;
    let runs = variants(config);
    let n_runs = runs.len();

    let mut columns_data: Vec<ObservableSeries> = Vec::new();
    let mut oracle_data: Vec<ObservableSeries> = Vec::new();
    let (mut trajectories, mut rejected) = (0, 0);
    for (i, v) in runs.iter().enumerate() {
        let label = format!("{name}{}", v.suffix);
        let with = |e: Error| e.context(label.clone());
        let coeffs = coefficients_for(&v.params, grid, opts.coeffs.as_ref()).map_err(with)?;
        let mut ens_opts = opts.ensemble.clone();
        if let Some(p) = opts.ensemble.progress.clone() {
            ens_opts.progress = Some(Arc::new(move |f| p((i as f64 + f) / n_runs as f64)));
        }
        let series = run_ensemble_with(&v.params, &coeffs, &v.params.kernels(), grid, &psi0, config.ensemble.k, config.ensemble.seed, &ens_opts)
            .map_err(with)?;
        trajectories += series.k;
        rejected += series.rejected;
        columns_data.extend(observables(config, &series, &v.suffix).map_err(with)?);
        if config.compare_oracle {
            let reference = oracle_series(&v.params, &coeffs, &psi0, grid).map_err(with)?;
            oracle_data.extend(observables(config, &reference, &format!("{}_oracle", v.suffix)).map_err(with)?);
        }
    }
    if opts.ensemble.cancel.as_ref().is_some_and(|c| c.load(Ordering::SeqCst)) {
        return Err(Error::Cancelled);
    }
    columns_data.extend(oracle_data);

    let csv_text = render_csv(&columns_data).map_err(ctx)?;
    let columns: Vec<String> = csv_text.lines().next().unwrap_or("t").split(',').skip(1).map(String::from).collect();
    let max_stderr = columns_data
        .iter()
        .filter(|s| !s.name.ends_with("_oracle") && !s.name.contains("_oracle"))
        .map(|s| s.max_stderr())
        .fold(0.0, f64::max);
    let max_clipped = columns_data.iter().flat_map(|s| s.clipped.iter().copied()).fold(0.0, f64::max);
    let wall_seconds = start.elapsed().as_secs_f64();

    std::fs::create_dir_all(&config.output_dir).map_err(|e| Error::from(e).context(format!("{name}: creating {}", config.output_dir.display())))?;
    let csv = config.output_dir.join(format!("{name}.csv"));
    let meta = config.output_dir.join(format!("{name}.meta.json"));
    let script = config.output_dir.join(format!("{name}.gp"));
    let meta_doc = json!({
        "name": name,
        "version": env!("CARGO_PKG_VERSION"),
        "config": render_config(config),
        "columns": columns,
        "notes": notes(config),
        "trajectories_per_curve": config.ensemble.k,
        "accepted_trajectories": trajectories,
        "rejected_trajectories": rejected,
        "max_stderr": max_stderr,
        "max_clipped_mass": max_clipped,
        "wall_seconds": wall_seconds,
    });
    let csv_name = format!("{name}.csv");
    write_all(&[
        (csv.clone(), csv_text.into_bytes()),
        (meta.clone(), serde_json::to_vec_pretty(&meta_doc).expect("json").into_iter().chain(*b"\n").collect()),
        (script.clone(), gnuplot_script(&csv_name, &columns).into_bytes()),
    ])
    .map_err(ctx)?;

    Ok(RunSummary {
        name,
        csv,
        meta,
        script,
        columns,
        trajectories,
        rejected,
        max_stderr,
        max_clipped,
        wall_seconds,
    })
}
