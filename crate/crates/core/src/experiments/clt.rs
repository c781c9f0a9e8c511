use std::collections::btree_map::Entry;
use std::collections::BTreeMap;

use super::output::{fmt_f64, fmt_opt, ExperimentResult, TableRow};
use super::{grid_setups, projector, replicate_key, replicates, ExperimentConfig};
use crate::discretization::{pair, StepField};
use crate::gof::{dkw_margin, ks_normal};
use crate::observation::{observe, simulate_counts, Normalization};
use crate::reduce::{mean, sample_variance, standard_error};
use crate::statistics::{
    asymptotic_variance, correction_field, sigma_squared, z_with_correction, CorrectionSpec,
};
use crate::Result;

pub(crate) const MIN_KS_REPLICATES: usize = 500;

/// Distribution of `<Z, g>` for one correction spec on one `(n, m, N)`.
#[derive(Clone, Debug, PartialEq)]
pub struct CltRow {
    pub seed: u64,
    pub mode: Normalization,
    pub a: u32,
    pub b: u32,
    pub kappa: u32,
    pub n: usize,
    pub m: usize,
    pub dose: u64,
    pub replicates: usize,
    pub mean: f64,
    pub se: Option<f64>,
    pub sample_variance: Option<f64>,
    pub sigma2: f64,
    pub asymptotic_variance: f64,
    pub ks: f64,
    pub dkw_margin: f64,
    pub ks_pass: bool,
    /// First-order mean of the uncorrected statistic,
    /// `-/+ sqrt(nmN) / (2N) <e^{X_{n,m} f}, g>`; present for `kappa = 1` only.
    pub bias_oracle: Option<f64>,
}

impl TableRow for CltRow {
    fn header() -> &'static [&'static str] {
        &[
            "seed",
            "mode",
            "a",
            "b",
            "kappa",
            "n",
            "m",
            "dose",
            "replicates",
            "mean",
            "se",
            "sample_variance",
            "sigma2",
            "asymptotic_variance",
            "ks",
            "dkw_margin",
            "ks_pass",
            "bias_oracle",
        ]
    }

    fn record(&self) -> Vec<String> {
        vec![
            self.seed.to_string(),
            self.mode.to_string(),
            self.a.to_string(),
            self.b.to_string(),
            self.kappa.to_string(),
            self.n.to_string(),
            self.m.to_string(),
            self.dose.to_string(),
            self.replicates.to_string(),
            fmt_f64(self.mean),
            fmt_opt(self.se),
            fmt_opt(self.sample_variance),
            fmt_f64(self.sigma2),
            fmt_f64(self.asymptotic_variance),
            fmt_f64(self.ks),
            fmt_f64(self.dkw_margin),
            self.ks_pass.to_string(),
            fmt_opt(self.bias_oracle),
        ]
    }
}

/// Leading bias of `Y - X`: `-e^X / 2N` for `AddOne`, `+e^X / 2N` otherwise.
pub(crate) fn leading_bias(xfield: &StepField, dose: u64, mode: Normalization) -> StepField {
    let sign = match mode {
        Normalization::AddOne => -1.0,
        Normalization::MaxOne | Normalization::Resample => 1.0,
    };
    xfield.map(|x| sign * x.exp() / (2.0 * dose as f64))
}

pub fn run_clt(config: &ExperimentConfig) -> Result<ExperimentResult<CltRow>> {
    config.validate()?;
    config.require_replicates(MIN_KS_REPLICATES, "clt")?;
    if config.corrections.is_empty() {
        return Err(crate::Error::Config(
            "clt needs at least one correction spec".into(),
        ));
    }
    let projector = projector(config)?;
    let setups = grid_setups(config, &projector)?;
    let limit_variance = asymptotic_variance(&projector, &config.test_function);
    let specs = &config.corrections;
    let max_kappa = specs.iter().map(|s| s.kappa()).max().unwrap_or(1);
    let mut rows = Vec::new();
    for setup in &setups {
        let (n, m) = setup.grid.dims();
        let scale = ((n * m) as f64).sqrt();
        for dose in config.doses_for(n, m, max_kappa) {
            let corrections = specs
                .iter()
                .map(|spec| correction_field(&setup.xfield, dose, spec))
                .collect::<Result<Vec<_>>>()?;
            // samples[replicate][spec]
            let samples = replicates(config, |r| {
                let key = replicate_key(config, r);
                let counts = simulate_counts(&setup.xfield, dose, key, config.sampler)?;
                let mut observed = BTreeMap::new();
                specs
                    .iter()
                    .zip(&corrections)
                    .map(|(spec, correction)| {
                        let y = match observed.entry(spec.mode.as_str()) {
                            Entry::Occupied(e) => e.into_mut(),
                            Entry::Vacant(e) => e.insert(observe(&counts, spec.mode, key)?),
                        };
                        let y = &y.field;
                        let z = z_with_correction(y, &setup.xfield, dose, correction)?;
                        pair(&z, &setup.masses)
                    })
                    .collect::<Result<Vec<f64>>>()
            })?;
            let sigma2 = sigma_squared(&setup.xfield, dose, &setup.masses)?;
            for (si, spec) in specs.iter().enumerate() {
                let xs: Vec<f64> = samples.iter().map(|rep| rep[si]).collect();
                rows.push(summarize(
                    config,
                    spec,
                    (n, m),
                    dose,
                    &xs,
                    sigma2,
                    limit_variance,
                    {
                        if spec.kappa() == 1 {
                            let bias = leading_bias(&setup.xfield, dose, spec.mode);
                            Some(scale * (dose as f64).sqrt() * pair(&bias, &setup.masses)?)
                        } else {
                            None
                        }
                    },
                ));
            }
        }
    }
    Ok(ExperimentResult {
        experiment: "clt",
        seed: config.seed,
        rows,
    })
}

#[allow(clippy::too_many_arguments)]
fn summarize(
    config: &ExperimentConfig,
    spec: &CorrectionSpec,
    (n, m): (usize, usize),
    dose: u64,
    xs: &[f64],
    sigma2: f64,
    limit_variance: f64,
    bias_oracle: Option<f64>,
) -> CltRow {
    let ks = ks_normal(xs, limit_variance);
    CltRow {
        seed: config.seed,
        mode: spec.mode,
        a: spec.a,
        b: spec.b,
        kappa: spec.kappa(),
        n,
        m,
        dose,
        replicates: xs.len(),
        mean: mean(xs),
        se: standard_error(xs),
        sample_variance: sample_variance(xs),
        sigma2,
        asymptotic_variance: limit_variance,
        ks,
        dkw_margin: dkw_margin(config.alpha, xs.len()),
        ks_pass: ks < config.ks_threshold,
        bias_oracle,
    }
}
