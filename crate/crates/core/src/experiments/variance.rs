use super::output::{fmt_f64, fmt_opt, ExperimentResult, TableRow};
use super::{grid_setups, projector, ExperimentConfig};
use crate::statistics::{asymptotic_variance, sigma_squared};
use crate::{Error, Result};

/// Gap between the finite-grid variance and its limit.
#[derive(Clone, Debug, PartialEq)]
pub struct VarianceRow {
    pub seed: u64,
    pub n: usize,
    pub m: usize,
    pub dose: u64,
    pub sigma2: f64,
    pub asymptotic_variance: f64,
    pub abs_error: f64,
    /// Error divided by the error on the previous grid at the same dose.
    pub ratio: Option<f64>,
}

impl TableRow for VarianceRow {
    fn header() -> &'static [&'static str] {
        &[
            "seed",
            "n",
            "m",
            "dose",
            "sigma2",
            "asymptotic_variance",
            "abs_error",
            "ratio",
        ]
    }

    fn record(&self) -> Vec<String> {
        vec![
            self.seed.to_string(),
            self.n.to_string(),
            self.m.to_string(),
            self.dose.to_string(),
            fmt_f64(self.sigma2),
            fmt_f64(self.asymptotic_variance),
            fmt_f64(self.abs_error),
            fmt_opt(self.ratio),
        ]
    }
}

/// Deterministic: no replicates are drawn.
pub fn run_variance_convergence(
    config: &ExperimentConfig,
) -> Result<ExperimentResult<VarianceRow>> {
    config.validate()?;
    if config.grids.len() < 3 && config.doses.len() < 3 {
        return Err(Error::Config(
            "variance convergence needs at least 3 grid sizes or 3 doses".into(),
        ));
    }
    let projector = projector(config)?;
    let setups = grid_setups(config, &projector)?;
    let limit = asymptotic_variance(&projector, &config.test_function);
    let mut rows: Vec<VarianceRow> = Vec::new();
    for setup in &setups {
        let (n, m) = setup.grid.dims();
        for dose in config.doses_for(n, m, 1) {
            let sigma2 = sigma_squared(&setup.xfield, dose, &setup.masses)?;
            let abs_error = (sigma2 - limit).abs();
            let previous = rows
                .iter()
                .rev()
                .find(|r| r.dose == dose && (r.n, r.m) != (n, m));
            let ratio = previous
                .filter(|p| p.abs_error > 0.0)
                .map(|p| abs_error / p.abs_error);
            rows.push(VarianceRow {
                seed: config.seed,
                n,
                m,
                dose,
                sigma2,
                asymptotic_variance: limit,
                abs_error,
                ratio,
            });
        }
    }
    Ok(ExperimentResult {
        experiment: "variance",
        seed: config.seed,
        rows,
    })
}
