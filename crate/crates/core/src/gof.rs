//! Goodness-of-fit statistics used by the Monte Carlo checks.

use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

use crate::{Error, Result};

pub fn standard_normal_cdf(x: f64) -> f64 {
    Normal::standard().cdf(x)
}

/// `sup_x |F_M(x) - F(x)|` for the empirical CDF of `samples`.
pub fn ks_statistic<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> f64 {
    let mut xs = samples.to_vec();
    xs.sort_by(|a, b| a.total_cmp(b));
    let m = xs.len() as f64;
    xs.iter().enumerate().fold(0.0, |d, (i, &x)| {
        let f = cdf(x);
        let above = (i + 1) as f64 / m - f;
        let below = f - i as f64 / m;
        d.max(above).max(below)
    })
}

/// One-sample KS distance to `N(0, variance)`.
pub fn ks_normal(samples: &[f64], variance: f64) -> f64 {
    let sd = variance.sqrt();
    ks_statistic(samples, |x| standard_normal_cdf(x / sd))
}

/// Dvoretzky-Kiefer-Wolfowitz band half-width `sqrt(ln(2/alpha) / 2M)`.
pub fn dkw_margin(alpha: f64, samples: usize) -> f64 {
    ((2.0 / alpha).ln() / (2.0 * samples as f64)).sqrt()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChiSquareTest {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
}

fn chi_square_sf(statistic: f64, dof: usize) -> Result<f64> {
    let dist = ChiSquared::new(dof as f64).map_err(|e| Error::invalid(e.to_string()))?;
    Ok(dist.sf(statistic))
}

/// Two-sample chi-square homogeneity test on integer-valued samples.
///
/// Values are binned individually; neighbouring values are merged until each
/// bin holds at least `min_pooled` draws from the two samples together.
pub fn chi_square_two_sample(a: &[u64], b: &[u64], min_pooled: usize) -> Result<ChiSquareTest> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::invalid("chi-square test needs non-empty samples"));
    }
    let max = a.iter().chain(b).copied().max().unwrap_or(0) as usize;
    let mut ca = vec![0usize; max + 1];
    let mut cb = vec![0usize; max + 1];
    for &x in a {
        ca[x as usize] += 1;
    }
    for &x in b {
        cb[x as usize] += 1;
    }
    let mut bins: Vec<(f64, f64)> = Vec::new();
    let (mut acc_a, mut acc_b) = (0usize, 0usize);
    for (x, y) in ca.into_iter().zip(cb) {
        acc_a += x;
        acc_b += y;
        if acc_a + acc_b >= min_pooled {
            bins.push((acc_a as f64, acc_b as f64));
            acc_a = 0;
            acc_b = 0;
        }
    }
    if acc_a + acc_b > 0 {
        match bins.last_mut() {
            Some(last) => {
                last.0 += acc_a as f64;
                last.1 += acc_b as f64;
            }
            None => bins.push((acc_a as f64, acc_b as f64)),
        }
    }
    if bins.len() < 2 {
        return Ok(ChiSquareTest {
            statistic: 0.0,
            dof: 0,
            p_value: 1.0,
        });
    }
    let na = a.len() as f64;
    let nb = b.len() as f64;
    let ka = (nb / na).sqrt();
    let kb = (na / nb).sqrt();
    let statistic: f64 = bins
        .iter()
        .map(|&(x, y)| (ka * x - kb * y).powi(2) / (x + y))
        .sum();
    let dof = bins.len() - 1;
    Ok(ChiSquareTest {
        statistic,
        dof,
        p_value: chi_square_sf(statistic, dof)?,
    })
}

/// Pearson goodness of fit of integer samples to a probability mass function
/// on `support_min..`. Bins are merged from the left until the expected count
/// reaches `min_expected`; the right tail collects the remaining mass.
pub fn chi_square_pmf<P: Fn(u64) -> f64>(
    samples: &[u64],
    support_min: u64,
    pmf: P,
    min_expected: f64,
) -> Result<ChiSquareTest> {
    if samples.is_empty() {
        return Err(Error::invalid("chi-square test needs samples"));
    }
    let total = samples.len() as f64;
    let max = samples.iter().copied().max().unwrap_or(support_min);
    let mut observed = vec![0usize; (max - support_min + 1) as usize];
    for &x in samples {
        if x < support_min {
            return Err(Error::invalid(format!(
                "sample {x} below support {support_min}"
            )));
        }
        observed[(x - support_min) as usize] += 1;
    }
    let mut bins: Vec<(f64, f64)> = Vec::new();
    let (mut obs, mut exp, mut cum) = (0.0, 0.0, 0.0);
    for (i, &o) in observed.iter().enumerate() {
        let p = pmf(support_min + i as u64);
        obs += o as f64;
        exp += p * total;
        cum += p;
        if exp >= min_expected && (1.0 - cum) * total >= min_expected {
            bins.push((obs, exp));
            obs = 0.0;
            exp = 0.0;
        }
    }
    // right tail, including all mass beyond the largest sample
    bins.push((obs, exp + (1.0 - cum).max(0.0) * total));
    if bins.len() < 2 {
        return Ok(ChiSquareTest {
            statistic: 0.0,
            dof: 0,
            p_value: 1.0,
        });
    }
    let statistic: f64 = bins.iter().map(|&(o, e)| (o - e).powi(2) / e).sum();
    let dof = bins.len() - 1;
    Ok(ChiSquareTest {
        statistic,
        dof,
        p_value: chi_square_sf(statistic, dof)?,
    })
}
