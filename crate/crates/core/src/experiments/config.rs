//! TOML experiment configuration.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::discretization::TestFunction;
use crate::observation::{Normalization, Sampler};
use crate::phantoms::{Phantom, DEFAULT_QUAD_ORDER};
use crate::statistics::CorrectionSpec;
use crate::{Error, Result};

/// Doses derived from the grid as `ceil((nm)^{1 / kappa'})`, replacing the
/// explicit dose list. `kappa'` defaults to `kappa - 0.5`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DoseSchedule {
    pub kappa_prime: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub replicates: usize,
    /// Worker threads for the replicate loop; 0 lets the pool decide.
    pub workers: usize,
    pub phantom: Phantom,
    pub quad_order: usize,
    pub grids: Vec<[usize; 2]>,
    pub doses: Vec<u64>,
    pub schedule: Option<DoseSchedule>,
    /// Specs for `clt` and `be`; every spec is applied to the same counts.
    pub corrections: Vec<CorrectionSpec>,
    /// Normalizations for `lln` and `modes`.
    pub modes: Vec<Normalization>,
    /// Orders of the closed-form corrections compared by `modes`.
    pub kappas: Vec<u32>,
    pub test_function: TestFunction,
    pub sampler: Sampler,
    /// Level of the DKW band added to every KS comparison.
    pub alpha: f64,
    pub ks_threshold: f64,
    /// Constant in front of the composite Berry-Esseen rate.
    pub be_constant: f64,
    pub output: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 20_240_601,
            replicates: 2_000,
            workers: 0,
            phantom: Phantom::Parabola {
                alpha: 0.5,
                beta: 0.5,
            },
            quad_order: DEFAULT_QUAD_ORDER,
            grids: vec![[32, 32]],
            doses: vec![200],
            schedule: None,
            corrections: vec![
                CorrectionSpec {
                    a: 1,
                    b: 0,
                    mode: Normalization::AddOne,
                },
                CorrectionSpec {
                    a: 3,
                    b: 1,
                    mode: Normalization::AddOne,
                },
            ],
            modes: Normalization::ALL.to_vec(),
            kappas: vec![3],
            test_function: TestFunction::default(),
            sampler: Sampler::Direct,
            alpha: 0.01,
            ks_threshold: 0.05,
            be_constant: 1.0,
            output: None,
        }
    }
}

fn config_error(e: Error) -> Error {
    match e {
        Error::InvalidParameter(msg) => Error::Config(msg),
        other => other,
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config is serializable")
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if self.replicates < 1 {
            return fail("replicates must be >= 1".into());
        }
        if self.grids.is_empty() {
            return fail("at least one grid is required".into());
        }
        if self.grids.iter().any(|g| g[0] < 1 || g[1] < 1) {
            return fail("grid sizes must be >= 1".into());
        }
        if self.schedule.is_none() && self.doses.is_empty() {
            return fail("at least one dose is required".into());
        }
        if self.doses.contains(&0) {
            return fail("doses must be >= 1".into());
        }
        if let Some(DoseSchedule {
            kappa_prime: Some(k),
        }) = &self.schedule
        {
            if !(k.is_finite() && *k > 0.0) {
                return fail(format!("schedule kappa_prime must be positive, got {k}"));
            }
        }
        if self.quad_order < 2 {
            return fail("quad_order must be >= 2".into());
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return fail(format!("alpha must lie in (0, 1), got {}", self.alpha));
        }
        if !(self.ks_threshold > 0.0 && self.ks_threshold.is_finite()) {
            return fail("ks_threshold must be positive".into());
        }
        if !(self.be_constant >= 0.0 && self.be_constant.is_finite()) {
            return fail("be_constant must be finite and >= 0".into());
        }
        if self.modes.is_empty() {
            return fail("at least one normalization mode is required".into());
        }
        if self.kappas.iter().any(|k| !matches!(k, 1 | 3 | 5)) {
            return fail("kappas must be drawn from {1, 3, 5}".into());
        }
        for spec in &self.corrections {
            spec.validate().map_err(config_error)?;
        }
        self.phantom.validate().map_err(config_error)?;
        self.test_function.validate().map_err(config_error)?;
        Ok(())
    }

    /// Doses to run on the `n x m` grid for a statistic with bias order `kappa`.
    pub fn doses_for(&self, n: usize, m: usize, kappa: u32) -> Vec<u64> {
        match &self.schedule {
            None => self.doses.clone(),
            Some(s) => {
                let k = s.kappa_prime.unwrap_or(kappa as f64 - 0.5);
                let dose = ((n * m) as f64).powf(1.0 / k);
                // exact powers come back a few ulps high
                let dose = if (dose - dose.round()).abs() <= 1e-9 * dose {
                    dose.round()
                } else {
                    dose.ceil()
                };
                vec![dose.max(1.0) as u64]
            }
        }
    }

    pub fn require_replicates(&self, min: usize, experiment: &str) -> Result<()> {
        if self.replicates < min {
            return Err(Error::Config(format!(
                "{experiment} needs at least {min} replicates, got {}",
                self.replicates
            )));
        }
        Ok(())
    }
}
