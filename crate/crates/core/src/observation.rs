//! Simulated photon counts on the grid and the log-normalized observation.

use std::fmt;

use ndarray::Array2;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::discretization::{Grid, StepField};
use crate::poisson::{sample_direct, sample_thinned};
use crate::rng::{Purpose, StreamKey};
use crate::{Error, Result};

/// Below this rate the conditioned law is sampled by inversion instead of
/// rejection, which would need `1 / (1 - e^{-lambda})` attempts on average.
const INVERSION_RATE: f64 = 1.0;

/// How a zero photon count is handled before taking the logarithm.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    /// `-log((S + 1) / N)`.
    AddOne,
    /// `-log(max(S, 1) / N)`.
    MaxOne,
    /// `-log(S~ / N)` with `S~` equal to `S` when positive and otherwise a
    /// fresh draw conditioned to be positive.
    Resample,
}

impl Normalization {
    pub const ALL: [Normalization; 3] = [
        Normalization::AddOne,
        Normalization::MaxOne,
        Normalization::Resample,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Normalization::AddOne => "add_one",
            Normalization::MaxOne => "max_one",
            Normalization::Resample => "resample",
        }
    }
}

impl fmt::Display for Normalization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sampler {
    #[default]
    Direct,
    Thinned,
}

/// Photon counts `S^{y_{j,k}} f` for one scan at dose `N`.
#[derive(Clone, Debug, PartialEq)]
pub struct CountField {
    grid: Grid,
    dose: u64,
    counts: Array2<u64>,
    survival: Array2<f64>,
}

impl CountField {
    /// Assemble a count field from given counts; `survival` holds `p_{j,k}`.
    pub fn new(grid: Grid, dose: u64, counts: Array2<u64>, survival: Array2<f64>) -> Result<Self> {
        if dose == 0 {
            return Err(Error::invalid("dose must be >= 1"));
        }
        for dims in [counts.dim(), survival.dim()] {
            if dims != grid.dims() {
                return Err(Error::GridMismatch {
                    expected: grid.dims(),
                    found: dims,
                });
            }
        }
        if survival.iter().any(|&p| !(p > 0.0 && p <= 1.0)) {
            return Err(Error::invalid("survival probabilities must lie in (0, 1]"));
        }
        Ok(Self {
            grid,
            dose,
            counts,
            survival,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn dose(&self) -> u64 {
        self.dose
    }

    pub fn counts(&self) -> &Array2<u64> {
        &self.counts
    }

    pub fn survival(&self) -> &Array2<f64> {
        &self.survival
    }

    /// Expected count `N p_{j,k}`.
    pub fn mean(&self, j: usize, k: usize) -> f64 {
        self.dose as f64 * self.survival[[j, k]]
    }
}

/// One scan: an independent count on every cell, `S ~ Pois(N e^{-X_{n,m} f})`.
pub fn simulate_counts(
    xfield: &StepField,
    dose: u64,
    key: StreamKey,
    sampler: Sampler,
) -> Result<CountField> {
    if dose == 0 {
        return Err(Error::invalid("dose must be >= 1"));
    }
    let grid = xfield.grid().clone();
    let m = grid.m();
    let key = key.with_purpose(Purpose::Counts);
    let survival = xfield.values().mapv(|x| (-x).exp());
    let mut counts = Array2::zeros(grid.dims());
    for ((j, k), slot) in counts.indexed_iter_mut() {
        let p: f64 = survival[[j, k]];
        let mut rng = key.cell_rng(j, k, m);
        *slot = match sampler {
            Sampler::Direct => sample_direct(dose as f64 * p, &mut rng)?,
            Sampler::Thinned => sample_thinned(dose, p, &mut rng)?,
        };
    }
    CountField::new(grid, dose, counts, survival)
}

/// A `Pois(lambda)` draw conditioned on being positive.
pub fn conditioned_positive_sample<R: Rng + ?Sized>(lambda: f64, rng: &mut R) -> Result<u64> {
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(Error::invalid(format!(
            "Poisson mean must be positive and finite, got {lambda}"
        )));
    }
    if lambda < INVERSION_RATE {
        // P(K = k | K > 0) = lambda^k / (k! (e^lambda - 1))
        let u: f64 = rng.random();
        let mut p = lambda / lambda.exp_m1();
        let mut cdf = p;
        let mut k = 1u64;
        while u > cdf && p > 0.0 {
            k += 1;
            p *= lambda / k as f64;
            cdf += p;
        }
        return Ok(k);
    }
    loop {
        let s = sample_direct(lambda, rng)?;
        if s > 0 {
            return Ok(s);
        }
    }
}

/// Log-normalized observation together with the normalization that produced it.
#[derive(Clone, Debug, PartialEq)]
pub struct Observation {
    pub mode: Normalization,
    pub field: StepField,
}

/// Observation field `Y` under `mode`. For `Resample`, zero counts are
/// redrawn from the cell's own stream (purpose `Resample`), and positive counts
/// are reused, which couples it to `MaxOne`.
pub fn observe(counts: &CountField, mode: Normalization, key: StreamKey) -> Result<Observation> {
    let n_dose = counts.dose as f64;
    let m = counts.grid.m();
    let key = key.with_purpose(Purpose::Resample);
    let mut values = Array2::zeros(counts.grid.dims());
    for ((j, k), slot) in values.indexed_iter_mut() {
        let s = counts.counts[[j, k]];
        let effective = match mode {
            Normalization::AddOne => s as f64 + 1.0,
            Normalization::MaxOne => s.max(1) as f64,
            Normalization::Resample if s > 0 => s as f64,
            Normalization::Resample => {
                let mut rng = key.cell_rng(j, k, m);
                conditioned_positive_sample(counts.mean(j, k), &mut rng)? as f64
            }
        };
        *slot = -(effective / n_dose).ln();
    }
    Ok(Observation {
        mode,
        field: StepField::new(counts.grid.clone(), values)?,
    })
}
