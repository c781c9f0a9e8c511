//! Poisson photon counts: exact samplers, central-moment polynomials and
//! absolute central moments.

use num_bigint::BigInt;
use num_traits::{ToPrimitive, Zero};
use rand::Rng;
use rand_distr::{Binomial, Distribution, Poisson};
use statrs::function::gamma::ln_gamma;

use crate::{Error, Result};

/// Highest order accepted by [`central_moment_poly`].
pub const MAX_MOMENT_ORDER: usize = 20;

/// `mu_r(lambda) = E[(S - lambda)^r]` for `S ~ Pois(lambda)`, as an exact
/// integer polynomial in `lambda` (constant term first).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CentralMomentPoly {
    order: usize,
    coeffs: Vec<BigInt>,
}

impl CentralMomentPoly {
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn coeffs(&self) -> &[BigInt] {
        &self.coeffs
    }

    pub fn degree(&self) -> usize {
        self.coeffs.iter().rposition(|c| !c.is_zero()).unwrap_or(0)
    }

    pub fn coeffs_i64(&self) -> Vec<i64> {
        self.coeffs
            .iter()
            .map(|c| c.to_i64().expect("coefficient fits in i64"))
            .collect()
    }

    pub fn eval(&self, lambda: f64) -> f64 {
        self.coeffs
            .iter()
            .rev()
            .fold(0.0, |acc, c| acc * lambda + c.to_f64().unwrap_or(f64::NAN))
    }
}

fn moment_polys_up_to(max: usize) -> Vec<CentralMomentPoly> {
    // mu_{r+1} = lambda (mu_r' + r mu_{r-1}), mu_0 = 1, mu_1 = 0
    let mut polys: Vec<Vec<BigInt>> = vec![vec![BigInt::from(1)], vec![BigInt::zero()]];
    for r in 1..max {
        let cur = &polys[r];
        let prev = &polys[r - 1];
        let len = cur.len().max(prev.len() + 1);
        let mut next = vec![BigInt::zero(); len];
        // lambda * mu_r' keeps each degree, scaled by it
        for (i, c) in cur.iter().enumerate().skip(1) {
            next[i] += c * BigInt::from(i);
        }
        for (i, c) in prev.iter().enumerate() {
            next[i + 1] += c * BigInt::from(r);
        }
        while next.len() > 1 && next.last().is_some_and(|c| c.is_zero()) {
            next.pop();
        }
        polys.push(next);
    }
    polys
        .into_iter()
        .take(max + 1)
        .enumerate()
        .map(|(order, coeffs)| CentralMomentPoly { order, coeffs })
        .collect()
}

pub fn central_moment_poly(r: usize) -> Result<CentralMomentPoly> {
    if r > MAX_MOMENT_ORDER {
        return Err(Error::invalid(format!(
            "central moment order {r} exceeds {MAX_MOMENT_ORDER}"
        )));
    }
    Ok(moment_polys_up_to(r.max(1)).swap_remove(r))
}

/// `mu_0 ..= mu_max`, built once.
#[derive(Clone, Debug)]
pub struct MomentTable {
    polys: Vec<CentralMomentPoly>,
}

impl MomentTable {
    pub fn new(max: usize) -> Result<Self> {
        if max > MAX_MOMENT_ORDER {
            return Err(Error::invalid(format!(
                "central moment order {max} exceeds {MAX_MOMENT_ORDER}"
            )));
        }
        Ok(Self {
            polys: moment_polys_up_to(max.max(1)),
        })
    }

    pub fn max_order(&self) -> usize {
        self.polys.len() - 1
    }

    pub fn get(&self, r: usize) -> &CentralMomentPoly {
        &self.polys[r]
    }

    pub fn eval(&self, r: usize, lambda: f64) -> f64 {
        self.polys[r].eval(lambda)
    }
}

fn check_rate(lambda: f64) -> Result<()> {
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(Error::invalid(format!(
            "Poisson mean must be positive and finite, got {lambda}"
        )));
    }
    Ok(())
}

/// Exact `Pois(lambda)` draw.
pub fn sample_direct<R: Rng + ?Sized>(lambda: f64, rng: &mut R) -> Result<u64> {
    check_rate(lambda)?;
    let dist = Poisson::new(lambda).map_err(|e| Error::invalid(e.to_string()))?;
    Ok(dist.sample(rng) as u64)
}

/// `V ~ Pois(dose)` photons sent, each surviving with probability `p`;
/// returns the number of survivors, which is `Pois(dose * p)`.
pub fn sample_thinned<R: Rng + ?Sized>(dose: u64, p: f64, rng: &mut R) -> Result<u64> {
    if dose == 0 {
        return Err(Error::invalid("dose must be >= 1"));
    }
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::invalid(format!(
            "survival probability {p} outside (0, 1]"
        )));
    }
    let sent = sample_direct(dose as f64, rng)?;
    if p == 1.0 || sent == 0 {
        return Ok(sent);
    }
    let thin = Binomial::new(sent, p).map_err(|e| Error::invalid(e.to_string()))?;
    Ok(thin.sample(rng))
}

/// `P(S = k)` for `S ~ Pois(lambda)`.
pub fn pmf(k: u64, lambda: f64) -> f64 {
    (k as f64 * lambda.ln() - lambda - ln_gamma(k as f64 + 1.0)).exp()
}

/// `E|S - lambda|^r` by direct summation of the series, walking outward from
/// the mode until each tail term drops below `1e-16` of the partial sum.
pub fn abs_central_moment(r: u32, lambda: f64) -> Result<f64> {
    check_rate(lambda)?;
    if r == 0 || r > 10 {
        return Err(Error::invalid(format!(
            "absolute moment order {r} outside 1..=10"
        )));
    }
    const REL_TOL: f64 = 1e-16;
    let r = r as i32;
    let mode = lambda.floor() as u64;
    let p_mode = pmf(mode, lambda);
    let term = |k: u64, p: f64| p * (k as f64 - lambda).abs().powi(r);

    let mut terms = vec![term(mode, p_mode)];
    let mut sum = terms[0];

    let mut p = p_mode;
    let mut prev = terms[0];
    let mut k = mode;
    loop {
        p *= lambda / (k + 1) as f64;
        k += 1;
        let t = term(k, p);
        terms.push(t);
        sum += t;
        // past k = lambda + 1 the terms decrease monotonically
        let settled = k as f64 - lambda >= 1.0 && t < prev;
        if (settled && t <= REL_TOL * sum) || p == 0.0 {
            break;
        }
        prev = t;
    }

    let mut p = p_mode;
    let mut prev = terms[0];
    let mut k = mode;
    while k > 0 {
        p *= k as f64 / lambda;
        k -= 1;
        let t = term(k, p);
        terms.push(t);
        sum += t;
        let settled = lambda - k as f64 >= 1.0 && t < prev;
        if settled && t <= REL_TOL * sum {
            break;
        }
        prev = t;
    }

    // add small terms first
    terms.sort_by(|a, b| a.total_cmp(b));
    Ok(terms.iter().sum())
}

/// Chernoff bound `P(S <= a lambda) <= exp(-lambda (a ln a - a + 1))`.
pub fn lower_tail_bound(lambda: f64, a: f64) -> Result<f64> {
    check_rate(lambda)?;
    if !(a > 0.0 && a < 1.0) {
        return Err(Error::invalid(format!("tail fraction {a} outside (0, 1)")));
    }
    Ok((-lambda * (a * a.ln() - a + 1.0)).exp())
}
