use super::output::{fmt_f64, ExperimentResult, TableRow};
use super::{grid_setups, projector, replicate_key, replicates, ExperimentConfig};
use crate::discretization::pair;
use crate::gof::{dkw_margin, ks_statistic, standard_normal_cdf};
use crate::observation::simulate_counts;
use crate::statistics::{asymptotic_variance, be_bounds, w_field, CorrectionSpec};
use crate::{Error, Result};

pub(crate) const MIN_BE_REPLICATES: usize = 2_000;

/// Empirical distance of the standardized linear statistic to `Phi`, next to
/// its Berry-Esseen bounds.
#[derive(Clone, Debug, PartialEq)]
pub struct BeRow {
    pub seed: u64,
    pub n: usize,
    pub m: usize,
    pub dose: u64,
    pub replicates: usize,
    pub kappa: u32,
    pub sigma2: f64,
    pub l: f64,
    pub raw_bound: f64,
    pub composite_bound: f64,
    pub asymptotic_variance: f64,
    pub ks: f64,
    pub dkw_margin: f64,
    /// `ks <= raw_bound + dkw_margin`.
    pub within_bound: bool,
}

impl TableRow for BeRow {
    fn header() -> &'static [&'static str] {
        &[
            "seed",
            "n",
            "m",
            "dose",
            "replicates",
            "kappa",
            "sigma2",
            "L",
            "raw_bound",
            "composite_bound",
            "asymptotic_variance",
            "ks",
            "dkw_margin",
            "within_bound",
        ]
    }

    fn record(&self) -> Vec<String> {
        vec![
            self.seed.to_string(),
            self.n.to_string(),
            self.m.to_string(),
            self.dose.to_string(),
            self.replicates.to_string(),
            self.kappa.to_string(),
            fmt_f64(self.sigma2),
            fmt_f64(self.l),
            fmt_f64(self.raw_bound),
            fmt_f64(self.composite_bound),
            fmt_f64(self.asymptotic_variance),
            fmt_f64(self.ks),
            fmt_f64(self.dkw_margin),
            self.within_bound.to_string(),
        ]
    }
}

pub fn run_be(config: &ExperimentConfig) -> Result<ExperimentResult<BeRow>> {
    config.validate()?;
    config.require_replicates(MIN_BE_REPLICATES, "be")?;
    let spec: CorrectionSpec = *config
        .corrections
        .iter()
        .max_by_key(|s| s.kappa())
        .ok_or_else(|| Error::Config("be needs a correction spec for the composite rate".into()))?;
    let projector = projector(config)?;
    let setups = grid_setups(config, &projector)?;
    let limit_variance = asymptotic_variance(&projector, &config.test_function);
    let margin = dkw_margin(config.alpha, config.replicates);
    let mut rows = Vec::new();
    for setup in &setups {
        let (n, m) = setup.grid.dims();
        for dose in config.doses_for(n, m, spec.kappa()) {
            let report = be_bounds(
                &setup.xfield,
                dose,
                &setup.masses,
                &spec,
                limit_variance,
                config.be_constant,
            )?;
            let sd = report.sigma2.sqrt();
            let samples = replicates(config, |r| {
                let counts = simulate_counts(
                    &setup.xfield,
                    dose,
                    replicate_key(config, r),
                    config.sampler,
                )?;
                Ok(pair(&w_field(&counts), &setup.masses)? / sd)
            })?;
            let ks = ks_statistic(&samples, standard_normal_cdf);
            rows.push(BeRow {
                seed: config.seed,
                n,
                m,
                dose,
                replicates: samples.len(),
                kappa: report.kappa,
                sigma2: report.sigma2,
                l: report.l,
                raw_bound: report.raw_bound,
                composite_bound: report.composite_bound,
                asymptotic_variance: report.asymptotic_variance,
                ks,
                dkw_margin: margin,
                within_bound: ks <= report.raw_bound + margin,
            });
        }
    }
    Ok(ExperimentResult {
        experiment: "be",
        seed: config.seed,
        rows,
    })
}
