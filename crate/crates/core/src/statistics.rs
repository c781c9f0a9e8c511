//! Corrected CLT statistic, its linearization, and Berry-Esseen quantities.

use std::f64::consts::{PI, TAU};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::discretization::{CellMasses, StepField, TestFunction};
use crate::observation::{CountField, Normalization, Observation};
use crate::phantoms::Projector;
use crate::poisson::{abs_central_moment, MomentTable, MAX_MOMENT_ORDER};
use crate::quadrature::GaussLegendre;
use crate::reduce::pairwise_sum;
use crate::{Error, Result};

/// Constant in the raw Berry-Esseen inequality for independent summands.
pub const BERRY_ESSEEN_CONSTANT: f64 = 0.5583;

const VARIANCE_QUAD_ORDER: usize = 16;
const VARIANCE_U_PANELS: usize = 24;
const VARIANCE_THETA_PANELS: usize = 24;

/// Number of terms kept in the two correction sums.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorrectionSpec {
    /// Last index of the central-moment sum.
    pub a: u32,
    /// Last index of the `e^{rX} / N^r` sum (ignored unless `AddOne`).
    #[serde(default)]
    pub b: u32,
    #[serde(default = "default_mode")]
    pub mode: Normalization,
}

fn default_mode() -> Normalization {
    Normalization::AddOne
}

impl CorrectionSpec {
    pub fn new(a: u32, b: u32, mode: Normalization) -> Result<Self> {
        let spec = Self { a, b, mode };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.a < 1 {
            return Err(Error::invalid("correction order a must be >= 1"));
        }
        if self.a as usize > MAX_MOMENT_ORDER {
            return Err(Error::invalid(format!(
                "correction order a = {} exceeds {MAX_MOMENT_ORDER}",
                self.a
            )));
        }
        Ok(())
    }

    /// Order to which the bias is cancelled.
    pub fn kappa(&self) -> u32 {
        match self.mode {
            Normalization::AddOne => self.a.min(2 * self.b + 1),
            Normalization::MaxOne | Normalization::Resample => self.a,
        }
    }
}

/// Per-cell sum of the correction terms that `Z` subtracts from `Y - X`.
///
/// `AddOne`: `sum_{r=1}^b (-1)^r e^{rX} / (r N^r) + sum_{r=2}^a (-1)^r mu_r(lambda) / (r (lambda + 1)^r)`.
/// `MaxOne` and `Resample` drop the first sum and use `lambda + e^{-lambda}`
/// in the denominator. Here `lambda = N e^{-X}`.
pub fn correction_field(xfield: &StepField, dose: u64, spec: &CorrectionSpec) -> Result<StepField> {
    spec.validate()?;
    if dose == 0 {
        return Err(Error::invalid("dose must be >= 1"));
    }
    let table = MomentTable::new(spec.a.max(2) as usize)?;
    let n_dose = dose as f64;
    let a = spec.a as i32;
    let b = spec.b as i32;
    let mode = spec.mode;
    Ok(xfield.map(|x| {
        let lambda = n_dose * (-x).exp();
        let mut c = 0.0;
        let denom = match mode {
            Normalization::AddOne => {
                for r in 1..=b {
                    c += sign(r) * (r as f64 * x).exp() / (r as f64 * n_dose.powi(r));
                }
                lambda + 1.0
            }
            Normalization::MaxOne | Normalization::Resample => lambda + (-lambda).exp(),
        };
        for r in 2..=a {
            c += sign(r) * table.eval(r as usize, lambda) / (r as f64 * denom.powi(r));
        }
        c
    }))
}

fn sign(r: i32) -> f64 {
    if r % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Leading-order corrections in closed form, for `kappa` in `{1, 3, 5}`.
///
/// `convention` selects the coefficient family: `AddOne` gives
/// `-e^X/(2N) - e^{2X}/(12N^2)`, `MaxOne`/`Resample` give
/// `e^X/(2N) - 7 e^{2X}/(12N^2)`. The family need not match the mode the
/// observation was produced under; that is how the wrong-sign runs are built.
pub fn simplified_correction_field(
    xfield: &StepField,
    dose: u64,
    kappa: u32,
    convention: Normalization,
) -> Result<StepField> {
    if dose == 0 {
        return Err(Error::invalid("dose must be >= 1"));
    }
    if !matches!(kappa, 1 | 3 | 5) {
        return Err(Error::invalid(format!(
            "simplified corrections exist for kappa in {{1, 3, 5}}, got {kappa}"
        )));
    }
    let n_dose = dose as f64;
    let (first, second) = match convention {
        Normalization::AddOne => (-0.5, -1.0 / 12.0),
        Normalization::MaxOne | Normalization::Resample => (0.5, -7.0 / 12.0),
    };
    Ok(xfield.map(|x| {
        let mut c = 0.0;
        if kappa >= 3 {
            c += first * x.exp() / n_dose;
        }
        if kappa >= 5 {
            c += second * (2.0 * x).exp() / (n_dose * n_dose);
        }
        c
    }))
}

/// `sqrt(nmN) (Y - X - correction)` cellwise, with no mode check.
pub fn z_with_correction(
    yfield: &StepField,
    xfield: &StepField,
    dose: u64,
    correction: &StepField,
) -> Result<StepField> {
    let grid = xfield.grid();
    let scale = ((grid.n() * grid.m()) as f64 * dose as f64).sqrt();
    let residual = yfield.sub(xfield)?.sub(correction)?;
    Ok(residual.map(|v| scale * v))
}

/// Corrected statistic `Z_{n,m,N} f` for an observation made under `spec.mode`.
pub fn z_statistic(
    observation: &Observation,
    xfield: &StepField,
    dose: u64,
    spec: &CorrectionSpec,
) -> Result<StepField> {
    if observation.mode != spec.mode {
        return Err(Error::ModeMismatch {
            expected: spec.mode.to_string(),
            found: observation.mode.to_string(),
        });
    }
    let correction = correction_field(xfield, dose, spec)?;
    z_with_correction(&observation.field, xfield, dose, &correction)
}

/// Linearized field `sqrt(nmN) (Np - S) / (Np + 1)` cellwise.
pub fn w_field(counts: &CountField) -> StepField {
    let grid = counts.grid();
    let scale = ((grid.n() * grid.m()) as f64 * counts.dose() as f64).sqrt();
    StepField::from_fn(grid, |j, k| {
        let mean = counts.mean(j, k);
        scale * (mean - counts.counts()[[j, k]] as f64) / (mean + 1.0)
    })
}

fn cell_terms<F>(xfield: &StepField, masses: &CellMasses, term: F) -> Result<Vec<f64>>
where
    F: Fn(f64, f64) -> f64 + Sync,
{
    masses.check_grid(xfield.grid())?;
    let xs = xfield.values().as_slice().expect("standard layout");
    let gs = masses.values().as_slice().expect("standard layout");
    Ok(xs
        .par_iter()
        .zip(gs.par_iter())
        .map(|(&x, &g)| if g == 0.0 { 0.0 } else { term(x, g) })
        .collect())
}

/// Variance of `<W, g>`: `sum nm N^2 p / (Np + 1)^2 gamma^2`.
pub fn sigma_squared(xfield: &StepField, dose: u64, masses: &CellMasses) -> Result<f64> {
    let grid = xfield.grid();
    let nm = (grid.n() * grid.m()) as f64;
    let n_dose = dose as f64;
    let terms = cell_terms(xfield, masses, |x, g| {
        let p = (-x).exp();
        let d = n_dose * p + 1.0;
        nm * n_dose * n_dose * p / (d * d) * g * g
    })?;
    Ok(pairwise_sum(&terms))
}

/// Lyapunov ratio of `<W, g>` with the exact third absolute central moments.
pub fn lyapunov_l(xfield: &StepField, dose: u64, masses: &CellMasses) -> Result<f64> {
    let sigma2 = sigma_squared(xfield, dose, masses)?;
    if sigma2.is_nan() || sigma2 <= 0.0 {
        return Err(Error::DegenerateVariance(sigma2));
    }
    let grid = xfield.grid();
    let scale = ((grid.n() * grid.m()) as f64 * dose as f64).powf(1.5);
    let n_dose = dose as f64;
    let terms = cell_terms(xfield, masses, |x, g| {
        let lambda = n_dose * (-x).exp();
        let m3 = abs_central_moment(3, lambda).expect("positive finite rate");
        scale * m3 / (lambda + 1.0).powi(3) * g.abs().powi(3)
    })?;
    Ok(pairwise_sum(&terms) / sigma2.powf(1.5))
}

/// Limit variance `pi^2 ∫ e^{Xf} g^2 dnu`, integrated in `(u = arcsin s, theta)`.
pub fn asymptotic_variance(projector: &Projector, g: &TestFunction) -> f64 {
    if g.is_zero() {
        return 0.0;
    }
    let rule = GaussLegendre::new(VARIANCE_QUAD_ORDER).expect("order >= 2");
    let (ulo, uhi) = g.u_support();
    let h = (uhi - ulo) / VARIANCE_U_PANELS as f64;
    let panels: Vec<f64> = (0..VARIANCE_U_PANELS)
        .into_par_iter()
        .map(|i| {
            let lo = ulo + h * i as f64;
            rule.integrate(lo, lo + h, |u| {
                let s = u.sin();
                rule.integrate_composite(0.0, TAU, VARIANCE_THETA_PANELS, |t| {
                    let gv = g.evaluate(s, t);
                    if gv == 0.0 {
                        0.0
                    } else {
                        projector.transform_at(s, t).exp() * gv * gv
                    }
                })
            })
        })
        .collect();
    PI * PI * pairwise_sum(&panels)
}

/// Berry-Esseen quantities for `<W, g>` on one `(n, m, N)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BerryEsseenReport {
    pub sigma2: f64,
    #[serde(rename = "L")]
    pub l: f64,
    pub raw_bound: f64,
    pub composite_bound: f64,
    pub asymptotic_variance: f64,
    pub kappa: u32,
}

/// Rate expression `(nm)^{-1/2} + 1/n + 1/m + N^{-1/3} + (nm / N^kappa)^{1/3}`
/// scaled by `constant`.
pub fn composite_bound(n: usize, m: usize, dose: u64, kappa: u32, constant: f64) -> f64 {
    let nm = (n * m) as f64;
    let n_dose = dose as f64;
    constant
        * (nm.powf(-0.5)
            + 1.0 / n as f64
            + 1.0 / m as f64
            + n_dose.powf(-1.0 / 3.0)
            + (nm / n_dose.powi(kappa as i32)).cbrt())
}

pub fn be_bounds(
    xfield: &StepField,
    dose: u64,
    masses: &CellMasses,
    spec: &CorrectionSpec,
    asymptotic_variance: f64,
    constant: f64,
) -> Result<BerryEsseenReport> {
    spec.validate()?;
    if !(constant >= 0.0 && constant.is_finite()) {
        return Err(Error::invalid(
            "composite bound constant must be finite and >= 0",
        ));
    }
    let sigma2 = sigma_squared(xfield, dose, masses)?;
    let l = lyapunov_l(xfield, dose, masses)?;
    let grid = xfield.grid();
    let kappa = spec.kappa();
    Ok(BerryEsseenReport {
        sigma2,
        l,
        raw_bound: BERRY_ESSEEN_CONSTANT * l,
        composite_bound: composite_bound(grid.n(), grid.m(), dose, kappa, constant),
        asymptotic_variance,
        kappa,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretization::{discretize_transform, pair, Grid};
    use crate::observation::{observe, simulate_counts, Sampler};
    use crate::phantoms::Phantom;
    use crate::reduce::{mean, sample_variance};
    use crate::rng::{Purpose, StreamKey};
    use ndarray::Array2;

    fn parabola_field(n: usize, m: usize) -> StepField {
        let proj = Projector::new(Phantom::parabola(0.5, 0.5).unwrap(), 32).unwrap();
        discretize_transform(&proj, &Grid::new(n, m).unwrap())
    }

    fn spec(a: u32, b: u32, mode: Normalization) -> CorrectionSpec {
        CorrectionSpec::new(a, b, mode).unwrap()
    }

    fn max_abs_diff(a: &StepField, b: &StepField) -> f64 {
        a.sub(b).unwrap().sup_norm()
    }

    #[test]
    fn kappa_rules() {
        assert_eq!(spec(1, 0, Normalization::AddOne).kappa(), 1);
        assert_eq!(spec(3, 1, Normalization::AddOne).kappa(), 3);
        assert_eq!(spec(5, 2, Normalization::AddOne).kappa(), 5);
        assert_eq!(spec(5, 0, Normalization::AddOne).kappa(), 1);
        assert_eq!(spec(2, 7, Normalization::AddOne).kappa(), 2);
        assert_eq!(spec(3, 0, Normalization::MaxOne).kappa(), 3);
        assert_eq!(spec(5, 0, Normalization::Resample).kappa(), 5);
    }

    #[test]
    fn spec_validation() {
        assert!(CorrectionSpec::new(0, 0, Normalization::AddOne).is_err());
        assert!(CorrectionSpec::new(21, 0, Normalization::AddOne).is_err());
        let x = parabola_field(4, 4);
        let bad = CorrectionSpec {
            a: 0,
            b: 1,
            mode: Normalization::AddOne,
        };
        assert!(correction_field(&x, 100, &bad).is_err());
    }

    #[test]
    fn trivial_spec_gives_zero_correction() {
        let x = parabola_field(8, 8);
        for mode in Normalization::ALL {
            let c = correction_field(&x, 100, &spec(1, 0, mode)).unwrap();
            assert!(c.values().iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn third_order_residual_is_second_order_in_dose() {
        let x = parabola_field(8, 8);
        let scaled: Vec<f64> = [1_000u64, 10_000]
            .iter()
            .map(|&n| {
                let c = correction_field(&x, n, &spec(3, 1, Normalization::AddOne)).unwrap();
                let lead = simplified_correction_field(&x, n, 3, Normalization::AddOne).unwrap();
                max_abs_diff(&c, &lead) * (n * n) as f64
            })
            .collect();
        let bound = 2.0 * x.map(|v| (2.0 * v).exp()).sup_norm();
        assert!(scaled.iter().all(|&s| s > 0.0 && s < bound), "{scaled:?}");
        assert!((scaled[0] / scaled[1] - 1.0).abs() < 0.1, "{scaled:?}");
    }

    #[test]
    fn fifth_order_residual_is_third_order_in_dose() {
        let x = parabola_field(8, 8);
        let scaled: Vec<f64> = [1_000u64, 10_000]
            .iter()
            .map(|&n| {
                let c = correction_field(&x, n, &spec(5, 2, Normalization::AddOne)).unwrap();
                let lead = simplified_correction_field(&x, n, 5, Normalization::AddOne).unwrap();
                max_abs_diff(&c, &lead) * (n as f64).powi(3)
            })
            .collect();
        let bound = 5.0 * x.map(|v| (3.0 * v).exp()).sup_norm();
        assert!(scaled.iter().all(|&s| s > 0.0 && s < bound), "{scaled:?}");
        assert!((scaled[0] / scaled[1] - 1.0).abs() < 0.1, "{scaled:?}");
    }

    #[test]
    fn add_one_second_order_coefficient() {
        // lambda^2 (c + 1/(2 lambda)) -> -1/12
        let lambda = 4_000.0f64;
        let x = StepField::from_fn(&Grid::new(1, 1).unwrap(), |_, _| 0.0);
        let c = correction_field(&x, lambda as u64, &spec(5, 2, Normalization::AddOne)).unwrap();
        let coeff = lambda * lambda * (c.get(0, 0) + 0.5 / lambda);
        assert!((coeff + 1.0 / 12.0).abs() < 1e-3, "{coeff}");
    }

    #[test]
    fn max_one_second_order_coefficient_from_exact_form() {
        // lambda^2 (c - 1/(2 lambda)) -> 5/12 for the moment-series correction
        let lambda = 4_000.0f64;
        let x = StepField::from_fn(&Grid::new(1, 1).unwrap(), |_, _| 0.0);
        let c = correction_field(&x, lambda as u64, &spec(5, 0, Normalization::MaxOne)).unwrap();
        let coeff = lambda * lambda * (c.get(0, 0) - 0.5 / lambda);
        assert!((coeff - 5.0 / 12.0).abs() < 1e-3, "{coeff}");
    }

    #[test]
    fn successive_orders_differ_at_predicted_rate() {
        let x = parabola_field(6, 6);
        for a in 1..=7u32 {
            let diffs: Vec<f64> = [1_000u64, 10_000]
                .iter()
                .map(|&n| {
                    let lo = correction_field(&x, n, &spec(a, 4, Normalization::AddOne)).unwrap();
                    let hi =
                        correction_field(&x, n, &spec(a + 1, 4, Normalization::AddOne)).unwrap();
                    max_abs_diff(&lo, &hi)
                })
                .collect();
            let order = (a + 2) / 2; // ceil((a + 1) / 2)
            let ratio = diffs[1] / diffs[0];
            assert!(
                ratio <= 1.2 * 10f64.powi(-(order as i32)),
                "a={a}: {diffs:?}"
            );
        }
    }

    #[test]
    fn simplified_rejects_unknown_kappa() {
        let x = parabola_field(2, 2);
        assert!(simplified_correction_field(&x, 10, 2, Normalization::AddOne).is_err());
        assert!(
            simplified_correction_field(&x, 10, 1, Normalization::MaxOne)
                .unwrap()
                .values()
                .iter()
                .all(|&v| v == 0.0)
        );
    }

    fn synthetic_counts(grid: &Grid, dose: u64, p: f64) -> CountField {
        let counts = Array2::from_elem(grid.dims(), (dose as f64 * p).round() as u64);
        CountField::new(
            grid.clone(),
            dose,
            counts,
            Array2::from_elem(grid.dims(), p),
        )
        .unwrap()
    }

    #[test]
    fn z_with_trivial_spec_is_scaled_residual() {
        let x = parabola_field(8, 8);
        let counts = simulate_counts(
            &x,
            300,
            StreamKey::new(3, 0, Purpose::Counts),
            Sampler::Direct,
        )
        .unwrap();
        let obs = observe(
            &counts,
            Normalization::AddOne,
            StreamKey::new(3, 0, Purpose::Counts),
        )
        .unwrap();
        let z = z_statistic(&obs, &x, 300, &spec(1, 0, Normalization::AddOne)).unwrap();
        let scale = (64.0f64 * 300.0).sqrt();
        for ((j, k), &v) in z.values().indexed_iter() {
            let expect = scale * (obs.field.get(j, k) - x.get(j, k));
            assert!((v - expect).abs() <= 1e-12 * expect.abs().max(1.0));
        }
    }

    #[test]
    fn z_on_exact_mean_counts() {
        let grid = Grid::new(2, 2).unwrap();
        let (dose, p) = (1_000u64, 0.25);
        let counts = synthetic_counts(&grid, dose, p);
        let x = StepField::from_fn(&grid, |_, _| -(p.ln()));
        let key = StreamKey::new(0, 0, Purpose::Counts);
        let obs = observe(&counts, Normalization::AddOne, key).unwrap();
        let expect = -(p + 1.0 / dose as f64).ln() + p.ln();
        for &v in obs.field.sub(&x).unwrap().values() {
            assert!((v - expect).abs() < 1e-14);
        }
        let z = z_statistic(&obs, &x, dose, &spec(1, 0, Normalization::AddOne)).unwrap();
        let bound = 2.0 * (4.0 / dose as f64).sqrt() / p;
        assert!(
            z.sup_norm().is_finite() && z.sup_norm() <= bound,
            "{}",
            z.sup_norm()
        );
    }

    #[test]
    fn max_one_third_order_matches_leading_term() {
        let x = parabola_field(16, 16);
        let dose = 500;
        let key = StreamKey::new(9, 0, Purpose::Counts);
        let counts = simulate_counts(&x, dose, key, Sampler::Direct).unwrap();
        let obs = observe(&counts, Normalization::MaxOne, key).unwrap();
        let z = z_statistic(&obs, &x, dose, &spec(3, 0, Normalization::MaxOne)).unwrap();
        let lead = simplified_correction_field(&x, dose, 3, Normalization::MaxOne).unwrap();
        let approx = z_with_correction(&obs.field, &x, dose, &lead).unwrap();
        let gap = max_abs_diff(&z, &approx);
        let rate = (256.0 / (dose as f64).powi(3)).sqrt();
        assert!(
            gap <= x.map(|v| (2.0 * v).exp()).sup_norm() * rate,
            "{gap} vs {rate}"
        );
    }

    #[test]
    fn z_rejects_mode_and_grid_mismatch() {
        let x = parabola_field(4, 4);
        let key = StreamKey::new(1, 0, Purpose::Counts);
        let counts = simulate_counts(&x, 100, key, Sampler::Direct).unwrap();
        let obs = observe(&counts, Normalization::MaxOne, key).unwrap();
        assert!(matches!(
            z_statistic(&obs, &x, 100, &spec(3, 1, Normalization::AddOne)),
            Err(Error::ModeMismatch { .. })
        ));
        let other = parabola_field(4, 5);
        assert!(matches!(
            z_statistic(&obs, &other, 100, &spec(3, 0, Normalization::MaxOne)),
            Err(Error::GridMismatch { .. })
        ));
    }

    #[test]
    fn w_vanishes_on_exact_mean_counts() {
        let grid = Grid::new(3, 3).unwrap();
        let w = w_field(&synthetic_counts(&grid, 100, 0.5));
        assert!(w.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn w_pairing_has_mean_zero_and_predicted_variance() {
        let x = parabola_field(4, 4);
        let masses = TestFunction::default().cell_masses(x.grid()).unwrap();
        let dose = 200;
        let reps = 10_000u64;
        let samples: Vec<f64> = (0..reps)
            .map(|r| {
                let counts = simulate_counts(
                    &x,
                    dose,
                    StreamKey::new(17, r, Purpose::Counts),
                    Sampler::Direct,
                )
                .unwrap();
                pair(&w_field(&counts), &masses).unwrap()
            })
            .collect();
        let mu = mean(&samples);
        let var = sample_variance(&samples).unwrap();
        assert!(mu.abs() <= 4.0 * (var / reps as f64).sqrt(), "mean {mu}");
        let fourth = mean(&samples.iter().map(|v| (v - mu).powi(4)).collect::<Vec<_>>());
        let var_se = ((fourth - var * var) / reps as f64).sqrt();
        let sigma2 = sigma_squared(&x, dose, &masses).unwrap();
        assert!(
            (var - sigma2).abs() <= 4.0 * var_se,
            "{var} vs {sigma2} (se {var_se})"
        );
    }

    #[test]
    fn one_cell_grid_closed_forms() {
        let grid = Grid::new(1, 1).unwrap();
        let proj = Projector::new(Phantom::constant(1.0).unwrap(), 32).unwrap();
        let x = discretize_transform(&proj, &grid);
        assert_eq!(x.get(0, 0), 0.0);
        let masses = TestFunction::default().cell_masses(&grid).unwrap();
        let gamma = masses.get(0, 0);
        let dose = 50u64;
        let n = dose as f64;
        let sigma2 = sigma_squared(&x, dose, &masses).unwrap();
        let expect = n * n / ((n + 1.0) * (n + 1.0)) * gamma * gamma;
        assert!((sigma2 - expect).abs() <= 1e-14 * expect);
        let l = lyapunov_l(&x, dose, &masses).unwrap();
        let m3 = abs_central_moment(3, n).unwrap();
        let expect_l =
            n.powf(1.5) * m3 / (n + 1.0).powi(3) * gamma.abs().powi(3) / sigma2.powf(1.5);
        assert!((l - expect_l).abs() <= 1e-12 * expect_l);
    }

    #[test]
    fn zero_test_function() {
        let x = parabola_field(4, 4);
        let g = TestFunction::default().scaled(0.0);
        let masses = g.cell_masses(x.grid()).unwrap();
        assert_eq!(sigma_squared(&x, 100, &masses).unwrap(), 0.0);
        assert!(matches!(
            lyapunov_l(&x, 100, &masses),
            Err(Error::DegenerateVariance(_))
        ));
        let proj = Projector::new(Phantom::constant(1.0).unwrap(), 32).unwrap();
        assert_eq!(asymptotic_variance(&proj, &g), 0.0);
    }

    #[test]
    fn homogeneity_in_test_function() {
        let x = parabola_field(8, 8);
        let g = TestFunction::default();
        let m1 = g.cell_masses(x.grid()).unwrap();
        let m2 = g.scaled(2.0).cell_masses(x.grid()).unwrap();
        let (s1, s2) = (
            sigma_squared(&x, 300, &m1).unwrap(),
            sigma_squared(&x, 300, &m2).unwrap(),
        );
        assert!((s2 - 4.0 * s1).abs() <= 1e-12 * s2);
        let (l1, l2) = (
            lyapunov_l(&x, 300, &m1).unwrap(),
            lyapunov_l(&x, 300, &m2).unwrap(),
        );
        assert!((l2 - l1).abs() <= 1e-12 * l1);
        let proj = Projector::new(Phantom::parabola(0.5, 0.5).unwrap(), 32).unwrap();
        let (v1, v2) = (
            asymptotic_variance(&proj, &g),
            asymptotic_variance(&proj, &g.scaled(2.0)),
        );
        assert!((v2 - 4.0 * v1).abs() <= 1e-12 * v2);
    }

    /// Independent 1-D reduction for rotation-invariant phantoms: the theta
    /// integral of the squared trigonometric factor is `2 pi (c0^2 + (c1^2 + c2^2) / 2)`.
    fn radial_oracle(transform: impl Fn(f64) -> f64, g: &TestFunction) -> f64 {
        let rule = GaussLegendre::new(40).unwrap();
        let (ulo, uhi) = g.u_support();
        let radial = rule.integrate_composite(ulo, uhi, 60, |u| {
            let s = u.sin();
            transform(s).exp() * g.radial(s).powi(2)
        });
        PI * PI * TAU * (g.c0 * g.c0 + 0.5 * (g.c1 * g.c1 + g.c2 * g.c2)) * radial
    }

    #[test]
    fn asymptotic_variance_matches_radial_oracle_under_shift() {
        let g = TestFunction::default();
        for (alpha, beta) in [(0.5, 0.5), (1.2, 0.5), (0.0, 0.0)] {
            let phantom = if beta == 0.0 {
                Phantom::constant(0.8).unwrap()
            } else {
                Phantom::parabola(alpha, beta).unwrap()
            };
            let proj = Projector::new(phantom.clone(), 32).unwrap();
            let got = asymptotic_variance(&proj, &g);
            let want = radial_oracle(
                |s| {
                    let line = crate::phantoms::LineCoord::new(s, 0.0).unwrap();
                    phantom.closed_form_transform(&line).unwrap()
                },
                &g,
            );
            assert!(
                (got - want).abs() <= 1e-9 * want,
                "{phantom:?}: {got} vs {want}"
            );
        }
    }

    #[test]
    fn raw_bound_and_kappa_in_report() {
        let x = parabola_field(8, 8);
        let masses = TestFunction::default().cell_masses(x.grid()).unwrap();
        for (a, b, kappa) in [(1, 0, 1), (3, 1, 3), (5, 2, 5)] {
            let r = be_bounds(
                &x,
                1_000,
                &masses,
                &spec(a, b, Normalization::AddOne),
                1.0,
                1.0,
            )
            .unwrap();
            assert_eq!(r.raw_bound / r.l, 0.5583);
            assert_eq!(r.kappa, kappa);
            let want = composite_bound(8, 8, 1_000, kappa, 1.0);
            assert_eq!(r.composite_bound, want);
            assert!(r.composite_bound >= 0.0 && r.sigma2 > 0.0);
        }
        let k3 = 64f64.powf(-0.5) + 0.25 + 1e3f64.powf(-1.0 / 3.0) + (64.0 / 1e9f64).cbrt();
        assert!((composite_bound(8, 8, 1_000, 3, 1.0) - k3).abs() < 1e-15);
    }

    #[test]
    fn lyapunov_ratio_decays_like_inverse_root_of_cells() {
        let g = TestFunction::default();
        let scaled: Vec<f64> = [8usize, 16, 32, 64]
            .iter()
            .map(|&n| {
                let x = parabola_field(n, n);
                let masses = g.cell_masses(x.grid()).unwrap();
                lyapunov_l(&x, 1_000, &masses).unwrap() * ((n * n) as f64).sqrt()
            })
            .collect();
        let max = scaled.iter().cloned().fold(f64::MIN, f64::max);
        let min = scaled.iter().cloned().fold(f64::MAX, f64::min);
        assert!(max / min <= 3.0, "{scaled:?}");
    }
}
