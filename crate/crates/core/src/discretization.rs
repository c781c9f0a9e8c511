//! The `(n, m)` partition of the line space and piecewise-constant fields on it.
//!
//! Offsets are arcsine-spaced, `s_j = sin(pi j / 2n)`, angles uniform,
//! `theta_k = 2 pi k / m`. Cell `(j, k)` (zero-based here) is
//! `(s_j, s_{j+1}] x (theta_k, theta_{k+1}]` and its value is taken at the
//! corner `(s_{j+1}, theta_{k+1})`.
//!
//! The line measure `nu = (1 - s^2)^{-1/2} ds dtheta` becomes `du dtheta`
//! under `u = arcsin s`, so every cell has mass exactly `pi^2 / nm` and all
//! cell integrals are done in `(u, theta)`.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::phantoms::{LineCoord, Phantom, Projector};
use crate::quadrature::GaussLegendre;
use crate::reduce::pairwise_sum;
use crate::{Error, Result};

/// Per-cell tensor quadrature order for cell masses.
pub const CELL_QUAD_ORDER: usize = 16;

#[derive(Clone, Debug, PartialEq)]
pub struct Grid {
    n: usize,
    m: usize,
    s_nodes: Vec<f64>,
    theta_nodes: Vec<f64>,
}

impl Grid {
    pub fn new(n: usize, m: usize) -> Result<Self> {
        if n == 0 || m == 0 {
            return Err(Error::invalid(format!(
                "grid needs n, m >= 1, got ({n}, {m})"
            )));
        }
        let mut s_nodes: Vec<f64> = (0..=n)
            .map(|j| (PI * j as f64 / (2 * n) as f64).sin())
            .collect();
        s_nodes[0] = 0.0;
        s_nodes[n] = 1.0;
        let mut theta_nodes: Vec<f64> = (0..=m).map(|k| TAU * k as f64 / m as f64).collect();
        theta_nodes[m] = TAU;
        Ok(Self {
            n,
            m,
            s_nodes,
            theta_nodes,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.n, self.m)
    }

    pub fn s_nodes(&self) -> &[f64] {
        &self.s_nodes
    }

    pub fn theta_nodes(&self) -> &[f64] {
        &self.theta_nodes
    }

    /// `nu(A_{j,k}) = pi^2 / nm` for every cell.
    pub fn cell_measure(&self) -> f64 {
        PI * PI / (self.n * self.m) as f64
    }

    /// `nu(A_{j,k})` from the cell's widths in `(u, theta)`. The widths are
    /// taken from the uniform spacing, not by differencing rounded node values.
    pub fn cell_nu(&self, j: usize, k: usize) -> f64 {
        assert!(j < self.n && k < self.m, "cell ({j}, {k}) outside grid");
        (FRAC_PI_2 / self.n as f64) * (TAU / self.m as f64)
    }

    /// Bounds of row `j` in the arcsine coordinate `u`.
    pub fn u_bounds(&self, j: usize) -> (f64, f64) {
        let h = FRAC_PI_2 / self.n as f64;
        (h * j as f64, h * (j + 1) as f64)
    }

    pub fn theta_bounds(&self, k: usize) -> (f64, f64) {
        (self.theta_nodes[k], self.theta_nodes[k + 1])
    }

    /// Corner line `y_{j+1,k+1} = (s_{j+1}, theta_{k+1})` of zero-based cell `(j, k)`.
    pub fn corner(&self, j: usize, k: usize) -> LineCoord {
        LineCoord::new(self.s_nodes[j + 1], self.theta_nodes[k + 1])
            .expect("grid nodes are valid line coordinates")
    }

    /// Zero-based cell containing `(s, theta)` under the half-open convention
    /// `s in (s_j, s_{j+1}]`, `theta in (theta_k, theta_{k+1}]`. `s = 0` maps
    /// to row 0 and `theta = 0` is identified with `2 pi`.
    pub fn locate(&self, s: f64, theta: f64) -> (usize, usize) {
        let j = self.s_nodes.partition_point(|&x| x < s).clamp(1, self.n) - 1;
        let mut t = theta.rem_euclid(TAU);
        if t == 0.0 {
            t = TAU;
        }
        let k = self
            .theta_nodes
            .partition_point(|&x| x < t)
            .clamp(1, self.m)
            - 1;
        (j, k)
    }

    fn check_same(&self, other: (usize, usize)) -> Result<()> {
        if self.dims() != other {
            return Err(Error::GridMismatch {
                expected: self.dims(),
                found: other,
            });
        }
        Ok(())
    }
}

/// A simple function on the line space, constant on each grid cell.
#[derive(Clone, Debug, PartialEq)]
pub struct StepField {
    grid: Grid,
    values: Array2<f64>,
}

impl StepField {
    pub fn new(grid: Grid, values: Array2<f64>) -> Result<Self> {
        if values.dim() != grid.dims() {
            return Err(Error::GridMismatch {
                expected: grid.dims(),
                found: values.dim(),
            });
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: &Grid) -> Self {
        Self {
            values: Array2::zeros(grid.dims()),
            grid: grid.clone(),
        }
    }

    pub fn from_fn<F: FnMut(usize, usize) -> f64>(grid: &Grid, mut f: F) -> Self {
        Self {
            values: Array2::from_shape_fn(grid.dims(), |(j, k)| f(j, k)),
            grid: grid.clone(),
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn get(&self, j: usize, k: usize) -> f64 {
        self.values[[j, k]]
    }

    /// Value of the field at an arbitrary line.
    pub fn evaluate(&self, s: f64, theta: f64) -> f64 {
        let (j, k) = self.grid.locate(s, theta);
        self.values[[j, k]]
    }

    pub fn map<F: Fn(f64) -> f64>(&self, f: F) -> Self {
        Self {
            grid: self.grid.clone(),
            values: self.values.mapv(f),
        }
    }

    /// Cellwise `self - other`.
    pub fn sub(&self, other: &StepField) -> Result<Self> {
        self.grid.check_same(other.grid.dims())?;
        Ok(Self {
            grid: self.grid.clone(),
            values: &self.values - &other.values,
        })
    }

    /// `L^2(nu)` norm, exact for a simple function: `sqrt(pi^2/nm * sum v^2)`.
    pub fn l2_norm(&self) -> f64 {
        let sq: Vec<f64> = self.values.iter().map(|v| v * v).collect();
        (self.grid.cell_measure() * pairwise_sum(&sq)).sqrt()
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |acc, v| acc.max(v.abs()))
    }
}

/// Smooth test function `g(s, theta) = B(s) (c0 + c1 cos(q theta) + c2 sin(q theta))`,
/// where `B` is the bump `exp(-1 / (1 - t^2))` rescaled so that it vanishes
/// outside `(s_lo, s_hi)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TestFunction {
    pub s_lo: f64,
    pub s_hi: f64,
    pub c0: f64,
    pub c1: f64,
    pub c2: f64,
    pub q: i32,
}

impl Default for TestFunction {
    fn default() -> Self {
        Self {
            s_lo: 0.1,
            s_hi: 0.9,
            c0: 1.0,
            c1: 0.5,
            c2: 0.25,
            q: 2,
        }
    }
}

impl TestFunction {
    pub fn validate(&self) -> Result<()> {
        if !(self.s_lo > 0.0 && self.s_lo < self.s_hi && self.s_hi < 1.0) {
            return Err(Error::invalid(format!(
                "test function support [{}, {}] must lie inside (0, 1)",
                self.s_lo, self.s_hi
            )));
        }
        if ![self.c0, self.c1, self.c2].iter().all(|c| c.is_finite()) {
            return Err(Error::invalid("test function coefficients must be finite"));
        }
        Ok(())
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            c0: self.c0 * factor,
            c1: self.c1 * factor,
            c2: self.c2 * factor,
            ..self.clone()
        }
    }

    pub fn is_zero(&self) -> bool {
        self.c0 == 0.0 && self.c1 == 0.0 && self.c2 == 0.0
    }

    pub fn radial(&self, s: f64) -> f64 {
        if s <= self.s_lo || s >= self.s_hi {
            return 0.0;
        }
        let t = (2.0 * s - self.s_lo - self.s_hi) / (self.s_hi - self.s_lo);
        let d = 1.0 - t * t;
        if d <= 0.0 {
            0.0
        } else {
            (-1.0 / d).exp()
        }
    }

    pub fn evaluate(&self, s: f64, theta: f64) -> f64 {
        let b = self.radial(s);
        if b == 0.0 {
            return 0.0;
        }
        let (sin, cos) = (self.q as f64 * theta).sin_cos();
        b * (self.c0 + self.c1 * cos + self.c2 * sin)
    }

    /// Support band in the arcsine coordinate.
    pub fn u_support(&self) -> (f64, f64) {
        (self.s_lo.asin(), self.s_hi.asin())
    }

    /// Cell masses with the `u`-integration clipped to the support band, so
    /// that cells cut by the support edge still see a smooth integrand.
    pub fn cell_masses(&self, grid: &Grid) -> Result<CellMasses> {
        let (ulo, uhi) = self.u_support();
        cell_masses_clipped(
            |s, t| self.evaluate(s, t),
            grid,
            CELL_QUAD_ORDER,
            (ulo, uhi),
        )
    }
}

/// `gamma(A_{j,k}) = ∫_{A_{j,k}} g dnu` for every cell.
#[derive(Clone, Debug, PartialEq)]
pub struct CellMasses {
    dims: (usize, usize),
    values: Array2<f64>,
}

impl CellMasses {
    pub fn dims(&self) -> (usize, usize) {
        self.dims
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn get(&self, j: usize, k: usize) -> f64 {
        self.values[[j, k]]
    }

    pub fn total(&self) -> f64 {
        pairwise_sum(self.values.as_slice().expect("standard layout"))
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }

    pub(crate) fn check_grid(&self, grid: &Grid) -> Result<()> {
        grid.check_same(self.dims)
    }
}

/// Per-cell tensor Gauss-Legendre masses of `g` in `(u = arcsin s, theta)`.
pub fn cell_masses<G>(g: G, grid: &Grid, quad_order: usize) -> Result<CellMasses>
where
    G: Fn(f64, f64) -> f64 + Sync,
{
    cell_masses_clipped(g, grid, quad_order, (0.0, FRAC_PI_2))
}

fn cell_masses_clipped<G>(
    g: G,
    grid: &Grid,
    quad_order: usize,
    (ulo, uhi): (f64, f64),
) -> Result<CellMasses>
where
    G: Fn(f64, f64) -> f64 + Sync,
{
    let rule = GaussLegendre::new(quad_order)?;
    let (n, m) = grid.dims();
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|j| {
            let (lo, hi) = grid.u_bounds(j);
            let ub = (lo.max(ulo), hi.min(uhi));
            if ub.0 >= ub.1 {
                return vec![0.0; m];
            }
            (0..m)
                .map(|k| rule.integrate_2d(ub, grid.theta_bounds(k), |u, t| g(u.sin(), t)))
                .collect()
        })
        .collect();
    let values = Array2::from_shape_vec((n, m), rows.into_iter().flatten().collect())
        .expect("row lengths match grid");
    Ok(CellMasses {
        dims: (n, m),
        values,
    })
}

/// `<field, g> = sum_{j,k} field(j,k) gamma(A_{j,k})`.
pub fn pair(field: &StepField, masses: &CellMasses) -> Result<f64> {
    masses.check_grid(field.grid())?;
    let terms: Vec<f64> = field
        .values
        .iter()
        .zip(masses.values.iter())
        .map(|(v, g)| v * g)
        .collect();
    Ok(pairwise_sum(&terms))
}

/// `X_{n,m} f`: the transform sampled at every cell corner. The last row sits
/// on the tangent lines `s = 1` and is identically zero.
pub fn discretize_transform(projector: &Projector, grid: &Grid) -> StepField {
    let (n, m) = grid.dims();
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|j| {
            (0..m)
                .map(|k| projector.transform(&grid.corner(j, k)))
                .collect()
        })
        .collect();
    let values = Array2::from_shape_vec((n, m), rows.into_iter().flatten().collect())
        .expect("row lengths match grid");
    StepField {
        grid: grid.clone(),
        values,
    }
}

/// Halton point `i` (1-based) in bases 2 and 3, mapped to `(u, theta)`.
fn halton_line(i: u64) -> (f64, f64) {
    fn radical_inverse(mut i: u64, base: u64) -> f64 {
        let inv = 1.0 / base as f64;
        let mut f = inv;
        let mut r = 0.0;
        while i > 0 {
            r += f * (i % base) as f64;
            i /= base;
            f *= inv;
        }
        r
    }
    (
        FRAC_PI_2 * radical_inverse(i, 2),
        TAU * radical_inverse(i, 3),
    )
}

/// Largest `|X_{n,m} f(y) - Xf(y)|` over `samples` quasi-random lines spread
/// uniformly in `nu`. Requires a closed-form transform as the reference.
pub fn sup_error(phantom: &Phantom, grid: &Grid, samples: usize) -> Result<f64> {
    if !phantom.has_closed_form() {
        return Err(Error::MissingClosedForm(phantom.name().into()));
    }
    if samples == 0 {
        return Err(Error::invalid("sup_error needs at least one sample"));
    }
    let projector = Projector::new(phantom.clone(), crate::phantoms::DEFAULT_QUAD_ORDER)?;
    let field = discretize_transform(&projector, grid);
    let mut worst = 0.0f64;
    for i in 1..=samples as u64 {
        let (u, theta) = halton_line(i);
        let s = u.sin();
        if s <= 0.0 {
            continue;
        }
        let line = LineCoord::new(s.min(1.0), theta)?;
        let exact = phantom
            .closed_form_transform(&line)
            .expect("closed form checked above");
        worst = worst.max((field.evaluate(s, theta) - exact).abs());
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::SQRT_2;

    #[test]
    fn grid_nodes_for_n2() {
        let g = Grid::new(2, 3).unwrap();
        assert_eq!(g.s_nodes()[0], 0.0);
        assert!((g.s_nodes()[1] - SQRT_2 / 2.0).abs() < 1e-15);
        assert_eq!(g.s_nodes()[2], 1.0);
        assert_eq!(g.theta_nodes()[3], TAU);
    }

    #[test]
    fn rejects_empty_grid() {
        assert!(Grid::new(0, 3).is_err());
        assert!(Grid::new(3, 0).is_err());
    }

    #[test]
    fn cell_measure_and_total() {
        let g = Grid::new(3, 4).unwrap();
        assert!((g.cell_measure() - PI * PI / 12.0).abs() < 1e-15);
        assert!((g.cell_measure() - 0.822467).abs() < 1e-6);
    }

    #[test]
    fn offset_spacing_bounded() {
        for n in [1, 2, 7, 64] {
            let g = Grid::new(n, 1).unwrap();
            for w in g.s_nodes().windows(2) {
                assert!(w[1] > w[0]);
                assert!(w[1] - w[0] <= PI / (2 * n) as f64 + 1e-15);
            }
        }
    }

    #[test]
    fn locate_half_open_cells() {
        let g = Grid::new(2, 4).unwrap();
        let s1 = g.s_nodes()[1];
        assert_eq!(g.locate(s1, 0.1).0, 0);
        assert_eq!(g.locate(s1 + 1e-12, 0.1).0, 1);
        assert_eq!(g.locate(0.0, 0.1).0, 0);
        assert_eq!(g.locate(1.0, 0.1).0, 1);
        assert_eq!(g.locate(0.5, FRAC_PI_2).1, 0);
        assert_eq!(g.locate(0.5, FRAC_PI_2 + 1e-12).1, 1);
        assert_eq!(g.locate(0.5, 0.0).1, 3);
        assert_eq!(g.locate(0.5, TAU).1, 3);
    }

    #[test]
    fn constant_phantom_rows() {
        let grid = Grid::new(2, 5).unwrap();
        let proj = Projector::new(Phantom::constant(1.0).unwrap(), 32).unwrap();
        let x = discretize_transform(&proj, &grid);
        for k in 0..5 {
            assert!((x.get(0, k) - SQRT_2).abs() < 1e-14);
            assert_eq!(x.get(1, k), 0.0);
        }
    }

    #[test]
    fn radial_phantom_rows_constant_in_angle() {
        let grid = Grid::new(6, 7).unwrap();
        let proj = Projector::new(Phantom::parabola(0.4, 0.9).unwrap(), 32).unwrap();
        let x = discretize_transform(&proj, &grid);
        for j in 0..6 {
            for k in 1..7 {
                assert_eq!(x.get(j, k), x.get(j, 0));
            }
        }
        assert!(x.values().row(5).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn bump_phantom_last_row_zero() {
        let grid = Grid::new(4, 4).unwrap();
        let proj = Projector::new(Phantom::bump(0.3, 0.7, [0.3, -0.2], 0.25).unwrap(), 32).unwrap();
        let x = discretize_transform(&proj, &grid);
        assert!(x.values().row(3).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn unit_function_masses_equal_cell_measure() {
        let grid = Grid::new(5, 3).unwrap();
        let masses = cell_masses(|_, _| 1.0, &grid, 4).unwrap();
        for v in masses.values() {
            assert!((v - grid.cell_measure()).abs() < 1e-14);
        }
        assert!((masses.total() - PI * PI).abs() < 1e-12);
    }

    #[test]
    fn masses_vanish_outside_support() {
        let grid = Grid::new(16, 4).unwrap();
        let g = TestFunction::default();
        let masses = g.cell_masses(&grid).unwrap();
        for j in 0..16 {
            let (lo, hi) = grid.u_bounds(j);
            let outside = hi.sin() <= g.s_lo || lo.sin() >= g.s_hi;
            if outside {
                assert!(masses.values().row(j).iter().all(|&v| v == 0.0), "row {j}");
            }
        }
        assert!(!masses.is_zero());
    }

    #[test]
    fn masses_sum_to_global_integral() {
        let grid = Grid::new(12, 10).unwrap();
        let g = TestFunction::default();
        let masses = g.cell_masses(&grid).unwrap();
        // global composite rule, independent of the cell partition
        let rule = GaussLegendre::new(20).unwrap();
        let (ulo, uhi) = g.u_support();
        let global = rule.integrate_composite(ulo, uhi, 40, |u| {
            rule.integrate_composite(0.0, TAU, 8, |t| g.evaluate(u.sin(), t))
        });
        assert!(
            (masses.total() - global).abs() < 1e-10,
            "{} vs {global}",
            masses.total()
        );
    }

    #[test]
    fn rejects_low_mass_quadrature_order() {
        let grid = Grid::new(2, 2).unwrap();
        assert!(cell_masses(|_, _| 1.0, &grid, 1).is_err());
    }

    #[test]
    fn pair_with_unit_field_is_total_mass() {
        let grid = Grid::new(8, 8).unwrap();
        let masses = TestFunction::default().cell_masses(&grid).unwrap();
        let ones = StepField::from_fn(&grid, |_, _| 1.0);
        let v = pair(&ones, &masses).unwrap();
        assert!((v - masses.total()).abs() < 1e-14);
        let zero_g = TestFunction::default()
            .scaled(0.0)
            .cell_masses(&grid)
            .unwrap();
        assert_eq!(pair(&ones, &zero_g).unwrap(), 0.0);
    }

    #[test]
    fn pair_rejects_grid_mismatch() {
        let masses = TestFunction::default()
            .cell_masses(&Grid::new(4, 4).unwrap())
            .unwrap();
        let field = StepField::zeros(&Grid::new(4, 5).unwrap());
        assert!(matches!(
            pair(&field, &masses),
            Err(Error::GridMismatch { .. })
        ));
    }

    #[test]
    fn pair_matches_independent_2d_quadrature() {
        let grid = Grid::new(6, 5).unwrap();
        let proj = Projector::new(Phantom::constant(0.7).unwrap(), 32).unwrap();
        let x = discretize_transform(&proj, &grid);
        let g = TestFunction::default();
        let masses = g.cell_masses(&grid).unwrap();
        let v = pair(&x, &masses).unwrap();
        // integrate X_{n,m}f * g over each cell rectangle in (u, theta) with a
        // different rule and summation order
        let rule = GaussLegendre::new(20).unwrap();
        let (ulo, uhi) = g.u_support();
        let mut oracle = 0.0;
        for k in 0..5 {
            for j in 0..6 {
                let (lo, hi) = grid.u_bounds(j);
                let (lo, hi) = (lo.max(ulo), hi.min(uhi));
                if lo >= hi {
                    continue;
                }
                let c = x.get(j, k);
                oracle += c * rule.integrate_composite(lo, hi, 4, |u| {
                    let (t0, t1) = grid.theta_bounds(k);
                    rule.integrate(t0, t1, |t| g.evaluate(u.sin(), t))
                });
            }
        }
        assert!((v - oracle).abs() < 1e-8, "{v} vs {oracle}");
    }

    #[test]
    fn l2_norm_matches_quadrature_of_simple_function() {
        let grid = Grid::new(5, 4).unwrap();
        let f = StepField::from_fn(&grid, |j, k| (j as f64 + 1.0) * 0.3 - k as f64 * 0.1);
        let rule = GaussLegendre::new(3).unwrap();
        let mut sq = 0.0;
        for j in 0..5 {
            for k in 0..4 {
                sq += rule.integrate_2d(grid.u_bounds(j), grid.theta_bounds(k), |_, _| {
                    f.get(j, k).powi(2)
                });
            }
        }
        assert!((f.l2_norm() - sq.sqrt()).abs() < 1e-10);
    }

    #[test]
    fn sup_error_requires_closed_form() {
        let grid = Grid::new(4, 4).unwrap();
        let bump = Phantom::bump(0.3, 0.7, [0.3, -0.2], 0.25).unwrap();
        assert!(matches!(
            sup_error(&bump, &grid, 100),
            Err(Error::MissingClosedForm(_))
        ));
    }

    #[test]
    fn sup_error_on_single_cell_is_max_transform() {
        let grid = Grid::new(1, 1).unwrap();
        let p = Phantom::constant(1.0).unwrap();
        let samples = 2000;
        let err = sup_error(&p, &grid, samples).unwrap();
        let max_xf = (1..=samples as u64)
            .map(|i| {
                let (u, _) = halton_line(i);
                2.0 * u.cos()
            })
            .fold(0.0f64, f64::max);
        assert!((err - max_xf).abs() < 1e-12);
    }

    #[test]
    fn sup_error_small_on_fine_grid() {
        let grid = Grid::new(512, 512).unwrap();
        let c = 0.8;
        let err = sup_error(&Phantom::constant(c).unwrap(), &grid, 10_000).unwrap();
        assert!(err <= 0.05 * c, "{err}");
    }

    #[test]
    fn sup_error_decreases_under_doubling() {
        let p = Phantom::constant(1.0).unwrap();
        let coarse = sup_error(&p, &Grid::new(16, 16).unwrap(), 10_000).unwrap();
        let fine = sup_error(&p, &Grid::new(32, 32).unwrap(), 10_000).unwrap();
        assert!(fine / coarse <= 0.75, "{fine} / {coarse}");
    }

    #[test]
    fn test_function_vanishes_outside_band() {
        let g = TestFunction::default();
        for s in [0.0, 0.05, 0.1, 0.9, 0.95, 1.0] {
            assert_eq!(g.evaluate(s, 1.0), 0.0);
        }
        assert!(g.evaluate(0.5, 0.0) > 0.0);
        let bad = TestFunction {
            s_lo: 0.0,
            ..TestFunction::default()
        };
        assert!(bad.validate().is_err());
    }
}
