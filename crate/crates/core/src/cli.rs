//! Command-line front end.
//!
//! Every subcommand except `phantom` reads one TOML config, validates it before
//! any computation, and writes its CSV table plus JSON manifest atomically to
//! the output directory. Failures print one JSON line on stderr and map to
//! exit codes 2 (config), 3 (numerical) and 4 (I/O).

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand};
use serde::Serialize;

use crate::discretization::{discretize_transform, StepField};
use crate::experiments::output::{fmt_f64, write_result, ExperimentResult, TableRow};
use crate::experiments::{
    in_pool, run_be, run_clt, run_lln, run_mode_comparison, run_variance_convergence,
    ExperimentConfig,
};
use crate::observation::{observe, simulate_counts, CountField, Normalization};
use crate::phantoms::{builtin_phantoms, Projector};
use crate::rng::{Purpose, StreamKey};
use crate::{Error, Result};

pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;
pub const EXIT_IO: i32 = 4;

#[derive(Debug, Parser)]
#[command(
    name = "tomo-noise",
    version,
    about = "Photon-count noise experiments on discretized X-ray transforms"
)]
pub struct Invocation {
    #[command(subcommand)]
    pub command: Command,
    /// TOML experiment config.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory (defaults to the config's `output`, then `results`).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Replace the config's base seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Print the builtin phantom catalog.
    Phantom,
    /// Export the discretized transform and one simulated count field.
    Sinogram,
    /// Export one replicate's observation fields under all three normalizations.
    Simulate,
    Lln,
    Clt,
    Be,
    Variance,
    Modes,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Phantom => "phantom",
            Command::Sinogram => "sinogram",
            Command::Simulate => "simulate",
            Command::Lln => "lln",
            Command::Clt => "clt",
            Command::Be => "be",
            Command::Variance => "variance",
            Command::Modes => "modes",
        }
    }
}

pub fn exit_code(error: &Error) -> i32 {
    match error {
        Error::Config(_) | Error::InvalidParameter(_) | Error::MissingClosedForm(_) => EXIT_CONFIG,
        Error::DegenerateVariance(_) | Error::GridMismatch { .. } | Error::ModeMismatch { .. } => {
            EXIT_NUMERICAL
        }
        Error::Io { .. } | Error::Csv(_) | Error::Json(_) => EXIT_IO,
    }
}

fn error_kind(code: i32) -> &'static str {
    match code {
        EXIT_CONFIG => "config",
        EXIT_NUMERICAL => "numerical",
        _ => "io",
    }
}

/// Single-line JSON error report.
pub fn error_line(kind: &str, message: &str) -> String {
    serde_json::json!({ "error": kind, "message": message }).to_string()
}

/// Parse `args`, run, and return the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let invocation = match Invocation::try_parse_from(args) {
        Ok(inv) => inv,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return 0;
            }
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or("invalid arguments");
            eprintln!(
                "{}",
                error_line("config", first.trim_start_matches("error: "))
            );
            return EXIT_CONFIG;
        }
    };
    match run(&invocation) {
        Ok(summary) => {
            println!("{summary}");
            0
        }
        Err(e) => {
            let code = exit_code(&e);
            eprintln!("{}", error_line(error_kind(code), &e.to_string()));
            code
        }
    }
}

/// Load and validate the config with command-line overrides applied.
pub fn resolve_config(invocation: &Invocation) -> Result<ExperimentConfig> {
    let path = invocation
        .config
        .as_ref()
        .ok_or_else(|| Error::Config(format!("`{}` needs --config", invocation.command.name())))?;
    let mut config = ExperimentConfig::load(path)?;
    if let Some(seed) = invocation.seed {
        config.seed = seed;
    }
    if let Some(workers) = invocation.workers {
        config.workers = workers;
    }
    config.validate()?;
    Ok(config)
}

#[derive(Serialize)]
struct Summary<'a> {
    command: &'a str,
    rows: usize,
    csv: PathBuf,
    manifest: PathBuf,
}

/// Run one invocation; returns the JSON summary printed on success.
pub fn run(invocation: &Invocation) -> Result<String> {
    if invocation.command == Command::Phantom {
        return Ok(serde_json::to_string_pretty(&builtin_phantoms())?);
    }
    let config = resolve_config(invocation)?;
    let out = invocation
        .out
        .clone()
        .or_else(|| config.output.clone())
        .unwrap_or_else(|| PathBuf::from("results"));
    let workers = config.workers;
    let started = Instant::now();
    let command = invocation.command;
    let summary = in_pool(workers, || -> Result<Summary> {
        let used = rayon::current_num_threads();
        let elapsed = || started.elapsed().as_secs_f64();
        let (rows, (csv, manifest)) = match command {
            Command::Phantom => unreachable!("handled above"),
            Command::Sinogram => emit(&out, sinogram(&config)?, &config, used, elapsed)?,
            Command::Simulate => emit(&out, simulate(&config)?, &config, used, elapsed)?,
            Command::Lln => emit(&out, run_lln(&config)?, &config, used, elapsed)?,
            Command::Clt => emit(&out, run_clt(&config)?, &config, used, elapsed)?,
            Command::Be => emit(&out, run_be(&config)?, &config, used, elapsed)?,
            Command::Variance => emit(
                &out,
                run_variance_convergence(&config)?,
                &config,
                used,
                elapsed,
            )?,
            Command::Modes => emit(&out, run_mode_comparison(&config)?, &config, used, elapsed)?,
        };
        Ok(Summary {
            command: command.name(),
            rows,
            csv,
            manifest,
        })
    })??;
    Ok(serde_json::to_string(&summary)?)
}

fn emit<R: TableRow>(
    dir: &Path,
    result: ExperimentResult<R>,
    config: &ExperimentConfig,
    workers: usize,
    elapsed: impl Fn() -> f64,
) -> Result<(usize, (PathBuf, PathBuf))> {
    let paths = write_result(dir, &result, config, workers, elapsed())?;
    Ok((result.rows.len(), paths))
}

/// One cell of an exported field.
#[derive(Clone, Debug, PartialEq)]
pub struct CellRow {
    pub j: usize,
    pub k: usize,
    pub s: f64,
    pub theta: f64,
    pub transform: f64,
    pub count: u64,
    /// Observation values for add-one, max-one and resample; empty for `sinogram`.
    pub observed: Option<[f64; 3]>,
}

impl TableRow for CellRow {
    fn header() -> &'static [&'static str] {
        &[
            "j",
            "k",
            "s",
            "theta",
            "transform",
            "count",
            "add_one",
            "max_one",
            "resample",
        ]
    }

    fn record(&self) -> Vec<String> {
        let mut rec = vec![
            self.j.to_string(),
            self.k.to_string(),
            fmt_f64(self.s),
            fmt_f64(self.theta),
            fmt_f64(self.transform),
            self.count.to_string(),
        ];
        match self.observed {
            Some(values) => rec.extend(values.iter().map(|&v| fmt_f64(v))),
            None => rec.extend(std::iter::repeat_n(String::new(), 3)),
        }
        rec
    }
}

/// Transform on the first configured grid and replicate 0's counts at the first dose.
fn first_scan(config: &ExperimentConfig) -> Result<(StepField, CountField, StreamKey)> {
    let [n, m] = config.grids[0];
    let dose = *config
        .doses_for(n, m, 1)
        .first()
        .ok_or_else(|| Error::Config("no dose configured".into()))?;
    let projector = Projector::new(config.phantom.clone(), config.quad_order)?;
    let xfield = discretize_transform(&projector, &crate::discretization::Grid::new(n, m)?);
    let key = StreamKey::new(config.seed, 0, Purpose::Counts);
    let counts = simulate_counts(&xfield, dose, key, config.sampler)?;
    Ok((xfield, counts, key))
}

fn cell_rows(
    xfield: &StepField,
    counts: &CountField,
    observed: Option<[&StepField; 3]>,
) -> Vec<CellRow> {
    let grid = xfield.grid();
    let (n, m) = grid.dims();
    let mut rows = Vec::with_capacity(n * m);
    for j in 0..n {
        for k in 0..m {
            let corner = grid.corner(j, k);
            rows.push(CellRow {
                j,
                k,
                s: corner.s(),
                theta: corner.theta(),
                transform: xfield.get(j, k),
                count: counts.counts()[[j, k]],
                observed: observed.map(|fields| fields.map(|f| f.get(j, k))),
            });
        }
    }
    rows
}

pub fn sinogram(config: &ExperimentConfig) -> Result<ExperimentResult<CellRow>> {
    let (xfield, counts, _) = first_scan(config)?;
    Ok(ExperimentResult {
        experiment: "sinogram",
        seed: config.seed,
        rows: cell_rows(&xfield, &counts, None),
    })
}

pub fn simulate(config: &ExperimentConfig) -> Result<ExperimentResult<CellRow>> {
    let (xfield, counts, key) = first_scan(config)?;
    let fields = Normalization::ALL
        .iter()
        .map(|&mode| observe(&counts, mode, key).map(|o| o.field))
        .collect::<Result<Vec<_>>>()?;
    Ok(ExperimentResult {
        experiment: "simulate",
        seed: config.seed,
        rows: cell_rows(&xfield, &counts, Some([&fields[0], &fields[1], &fields[2]])),
    })
}
