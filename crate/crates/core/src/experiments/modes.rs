use super::clt::MIN_KS_REPLICATES;
use super::output::{fmt_f64, fmt_opt, ExperimentResult, TableRow};
use super::{grid_setups, projector, replicate_key, replicates, ExperimentConfig};
use crate::discretization::{pair, StepField};
use crate::gof::{dkw_margin, ks_normal};
use crate::observation::{observe, simulate_counts, Normalization};
use crate::reduce::{mean, standard_error};
use crate::statistics::{asymptotic_variance, simplified_correction_field, z_with_correction};
use crate::Result;

/// `<Z, g>` under one normalization with closed-form corrections taken from
/// either its own coefficient family or the opposite one.
#[derive(Clone, Debug, PartialEq)]
pub struct ModeRow {
    pub seed: u64,
    pub mode: Normalization,
    /// Family the correction coefficients were taken from.
    pub convention: Normalization,
    pub matched: bool,
    pub kappa: u32,
    pub n: usize,
    pub m: usize,
    pub dose: u64,
    pub replicates: usize,
    pub mean: f64,
    pub se: Option<f64>,
    pub ks: f64,
    pub dkw_margin: f64,
    pub ks_pass: bool,
    /// On mismatched rows: `|mean|` over the matched row's `|mean|`.
    pub bias_ratio: Option<f64>,
    /// On resample rows: cells whose value differs from the max-one field,
    /// summed over replicates.
    pub differing_cells: Option<u64>,
    /// Expected-count bound `M nm exp(-N min p)` for `differing_cells`.
    pub differing_bound: Option<f64>,
}

impl TableRow for ModeRow {
    fn header() -> &'static [&'static str] {
        &[
            "seed",
            "mode",
            "convention",
            "matched",
            "kappa",
            "n",
            "m",
            "dose",
            "replicates",
            "mean",
            "se",
            "ks",
            "dkw_margin",
            "ks_pass",
            "bias_ratio",
            "differing_cells",
            "differing_bound",
        ]
    }

    fn record(&self) -> Vec<String> {
        vec![
            self.seed.to_string(),
            self.mode.to_string(),
            self.convention.to_string(),
            self.matched.to_string(),
            self.kappa.to_string(),
            self.n.to_string(),
            self.m.to_string(),
            self.dose.to_string(),
            self.replicates.to_string(),
            fmt_f64(self.mean),
            fmt_opt(self.se),
            fmt_f64(self.ks),
            fmt_f64(self.dkw_margin),
            self.ks_pass.to_string(),
            fmt_opt(self.bias_ratio),
            self.differing_cells
                .map(|c| c.to_string())
                .unwrap_or_default(),
            fmt_opt(self.differing_bound),
        ]
    }
}

fn opposite(mode: Normalization) -> Normalization {
    match mode {
        Normalization::AddOne => Normalization::MaxOne,
        Normalization::MaxOne | Normalization::Resample => Normalization::AddOne,
    }
}

/// One sampled statistic: which mode, which coefficient family, which order.
struct Variant {
    mode: Normalization,
    convention: Normalization,
    kappa: u32,
    correction: StepField,
}

pub fn run_mode_comparison(config: &ExperimentConfig) -> Result<ExperimentResult<ModeRow>> {
    config.validate()?;
    config.require_replicates(MIN_KS_REPLICATES, "modes")?;
    let projector = projector(config)?;
    let setups = grid_setups(config, &projector)?;
    let limit_variance = asymptotic_variance(&projector, &config.test_function);
    let max_kappa = config.kappas.iter().copied().max().unwrap_or(1);
    let margin = dkw_margin(config.alpha, config.replicates);
    let track_resample = config.modes.contains(&Normalization::Resample);
    let mut rows = Vec::new();
    for setup in &setups {
        let (n, m) = setup.grid.dims();
        for dose in config.doses_for(n, m, max_kappa) {
            let mut variants = Vec::new();
            for &mode in &config.modes {
                for &kappa in &config.kappas {
                    let conventions = if kappa == 1 {
                        vec![mode]
                    } else {
                        vec![mode, opposite(mode)]
                    };
                    for convention in conventions {
                        variants.push(Variant {
                            mode,
                            convention,
                            kappa,
                            correction: simplified_correction_field(
                                &setup.xfield,
                                dose,
                                kappa,
                                convention,
                            )?,
                        });
                    }
                }
            }
            // per replicate: one sample per variant, plus differing cells
            let samples = replicates(config, |r| {
                let key = replicate_key(config, r);
                let counts = simulate_counts(&setup.xfield, dose, key, config.sampler)?;
                let observations = config
                    .modes
                    .iter()
                    .map(|&mode| observe(&counts, mode, key))
                    .collect::<Result<Vec<_>>>()?;
                let values = variants
                    .iter()
                    .map(|v| {
                        let idx = config
                            .modes
                            .iter()
                            .position(|&md| md == v.mode)
                            .expect("listed mode");
                        let z = z_with_correction(
                            &observations[idx].field,
                            &setup.xfield,
                            dose,
                            &v.correction,
                        )?;
                        pair(&z, &setup.masses)
                    })
                    .collect::<Result<Vec<f64>>>()?;
                let differing = if track_resample {
                    let resampled = observe(&counts, Normalization::Resample, key)?;
                    let max_one = observe(&counts, Normalization::MaxOne, key)?;
                    resampled
                        .field
                        .values()
                        .iter()
                        .zip(max_one.field.values())
                        .filter(|(a, b)| a != b)
                        .count() as u64
                } else {
                    0
                };
                Ok((values, differing))
            })?;
            let differing_total: u64 = samples.iter().map(|s| s.1).sum();
            let min_p = setup
                .xfield
                .values()
                .iter()
                .fold(f64::INFINITY, |acc, &x| acc.min((-x).exp()));
            let differing_bound = (samples.len() * n * m) as f64 * (-(dose as f64) * min_p).exp();
            let first_row = rows.len();
            for (vi, v) in variants.iter().enumerate() {
                let xs: Vec<f64> = samples.iter().map(|s| s.0[vi]).collect();
                let ks = ks_normal(&xs, limit_variance);
                let resample_row = v.mode == Normalization::Resample && v.convention == v.mode;
                rows.push(ModeRow {
                    seed: config.seed,
                    mode: v.mode,
                    convention: v.convention,
                    matched: v.convention == v.mode,
                    kappa: v.kappa,
                    n,
                    m,
                    dose,
                    replicates: xs.len(),
                    mean: mean(&xs),
                    se: standard_error(&xs),
                    ks,
                    dkw_margin: margin,
                    ks_pass: ks < config.ks_threshold,
                    bias_ratio: None,
                    differing_cells: resample_row.then_some(differing_total),
                    differing_bound: resample_row.then_some(differing_bound),
                });
            }
            let block = &mut rows[first_row..];
            for i in 0..block.len() {
                if block[i].matched {
                    continue;
                }
                let reference = block
                    .iter()
                    .find(|r| r.matched && r.mode == block[i].mode && r.kappa == block[i].kappa)
                    .map(|r| r.mean.abs());
                block[i].bias_ratio = reference.map(|c| block[i].mean.abs() / c);
            }
        }
    }
    Ok(ExperimentResult {
        experiment: "modes",
        seed: config.seed,
        rows,
    })
}
