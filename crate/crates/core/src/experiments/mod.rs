//! Seeded Monte Carlo drivers that check the limit theorems numerically.
//!
//! Replicate `r` of every experiment draws its counts from the streams keyed
//! by `(config.seed, r)`, so the same seed reproduces a table bit for bit on
//! any number of worker threads. Within one experiment all modes, correction
//! specs and doses reuse the replicate's streams, which couples the compared
//! runs.

mod be;
mod clt;
pub mod config;
mod lln;
mod modes;
pub mod output;
mod variance;

pub use be::{run_be, BeRow};
pub use clt::{run_clt, CltRow};
pub use config::{DoseSchedule, ExperimentConfig};
pub use lln::{run_lln, LlnRow};
pub use modes::{run_mode_comparison, ModeRow};
pub use output::{write_result, ExperimentResult, TableRow};
pub use variance::{run_variance_convergence, VarianceRow};

use rayon::prelude::*;

use crate::discretization::{discretize_transform, CellMasses, Grid, StepField};
use crate::phantoms::Projector;
use crate::rng::{Purpose, StreamKey};
use crate::{Error, Result};

/// Transform and test-function masses on one grid.
pub(crate) struct GridSetup {
    pub grid: Grid,
    pub xfield: StepField,
    pub masses: CellMasses,
}

pub(crate) fn projector(config: &ExperimentConfig) -> Result<Projector> {
    Projector::new(config.phantom.clone(), config.quad_order)
}

pub(crate) fn grid_setups(
    config: &ExperimentConfig,
    projector: &Projector,
) -> Result<Vec<GridSetup>> {
    config
        .grids
        .iter()
        .map(|&[n, m]| {
            let grid = Grid::new(n, m)?;
            let xfield = discretize_transform(projector, &grid);
            let masses = config.test_function.cell_masses(&grid)?;
            Ok(GridSetup {
                grid,
                xfield,
                masses,
            })
        })
        .collect()
}

pub(crate) fn replicate_key(config: &ExperimentConfig, replicate: usize) -> StreamKey {
    StreamKey::new(config.seed, replicate as u64, Purpose::Counts)
}

/// Run `f` on every replicate index inside a pool of `config.workers` threads,
/// returning results in replicate order.
pub(crate) fn replicates<T, F>(config: &ExperimentConfig, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync + Send,
{
    in_pool(config.workers, || {
        (0..config.replicates).into_par_iter().map(&f).collect()
    })?
}

/// Evaluate `f` inside a dedicated pool; `workers == 0` uses rayon's default size.
pub fn in_pool<T, F>(workers: usize, f: F) -> Result<T>
where
    T: Send,
    F: FnOnce() -> T + Send,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(f))
}

/// Least-squares slope of `ln y` against `ln x` with equal weights.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let k = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / k;
    let my = ly.iter().sum::<f64>() / k;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}
