use super::output::{fmt_f64, fmt_opt, ExperimentResult, TableRow};
use super::{grid_setups, loglog_slope, projector, replicate_key, replicates, ExperimentConfig};
use crate::observation::{observe, simulate_counts, Normalization};
use crate::reduce::{mean, standard_error};
use crate::{Error, Result};

/// Mean `L^2` distance between observation and discretized transform.
#[derive(Clone, Debug, PartialEq)]
pub struct LlnRow {
    pub seed: u64,
    pub mode: Normalization,
    pub n: usize,
    pub m: usize,
    pub dose: u64,
    pub replicates: usize,
    pub mean_norm: f64,
    pub se: Option<f64>,
    /// Fitted log-log slope over all doses of this `(grid, mode)`.
    pub slope: f64,
}

impl TableRow for LlnRow {
    fn header() -> &'static [&'static str] {
        &[
            "seed",
            "mode",
            "n",
            "m",
            "dose",
            "replicates",
            "mean_norm",
            "se",
            "slope",
        ]
    }

    fn record(&self) -> Vec<String> {
        vec![
            self.seed.to_string(),
            self.mode.to_string(),
            self.n.to_string(),
            self.m.to_string(),
            self.dose.to_string(),
            self.replicates.to_string(),
            fmt_f64(self.mean_norm),
            fmt_opt(self.se),
            fmt_f64(self.slope),
        ]
    }
}

fn check_schedule(doses: &[u64]) -> Result<()> {
    let lo = doses.iter().copied().min().unwrap_or(0) as f64;
    let hi = doses.iter().copied().max().unwrap_or(0) as f64;
    if doses.len() < 3 || hi < 100.0 * lo {
        return Err(Error::Config(format!(
            "lln needs at least 3 doses spanning two decades, got {doses:?}"
        )));
    }
    Ok(())
}

pub fn run_lln(config: &ExperimentConfig) -> Result<ExperimentResult<LlnRow>> {
    config.validate()?;
    let projector = projector(config)?;
    let setups = grid_setups(config, &projector)?;
    let mut rows = Vec::new();
    for setup in &setups {
        let (n, m) = setup.grid.dims();
        let doses = config.doses_for(n, m, 1);
        check_schedule(&doses)?;
        // norms[replicate][dose][mode]
        let norms = replicates(config, |r| {
            let key = replicate_key(config, r);
            doses
                .iter()
                .map(|&dose| {
                    let counts = simulate_counts(&setup.xfield, dose, key, config.sampler)?;
                    config
                        .modes
                        .iter()
                        .map(|&mode| {
                            let obs = observe(&counts, mode, key)?;
                            Ok(obs.field.sub(&setup.xfield)?.l2_norm())
                        })
                        .collect::<Result<Vec<f64>>>()
                })
                .collect::<Result<Vec<_>>>()
        })?;
        for (mi, &mode) in config.modes.iter().enumerate() {
            let stats: Vec<(f64, Option<f64>)> = (0..doses.len())
                .map(|di| {
                    let xs: Vec<f64> = norms.iter().map(|rep| rep[di][mi]).collect();
                    (mean(&xs), standard_error(&xs))
                })
                .collect();
            let dose_axis: Vec<f64> = doses.iter().map(|&d| d as f64).collect();
            let means: Vec<f64> = stats.iter().map(|s| s.0).collect();
            let slope = loglog_slope(&dose_axis, &means);
            for (&dose, &(mean_norm, se)) in doses.iter().zip(&stats) {
                rows.push(LlnRow {
                    seed: config.seed,
                    mode,
                    n,
                    m,
                    dose,
                    replicates: config.replicates,
                    mean_norm,
                    se,
                    slope,
                });
            }
        }
    }
    Ok(ExperimentResult {
        experiment: "lln",
        seed: config.seed,
        rows,
    })
}
