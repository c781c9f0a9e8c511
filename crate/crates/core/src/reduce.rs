//! Order-fixed floating point reductions.
//!
//! Every sum over grid cells or Monte Carlo replicates goes through
//! [`pairwise_sum`], so the association order depends only on the slice
//! length and never on how the terms were produced.

const BLOCK: usize = 16;

/// Pairwise (tree) summation with a fixed split point at `len / 2`.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= BLOCK {
        return xs.iter().fold(0.0, |acc, &x| acc + x);
    }
    let (lo, hi) = xs.split_at(xs.len() / 2);
    pairwise_sum(lo) + pairwise_sum(hi)
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    pairwise_sum(xs) / xs.len() as f64
}

/// Unbiased sample variance; `None` for fewer than two samples.
pub fn sample_variance(xs: &[f64]) -> Option<f64> {
    if xs.len() < 2 {
        return None;
    }
    let mu = mean(xs);
    let sq: Vec<f64> = xs.iter().map(|x| (x - mu) * (x - mu)).collect();
    Some(pairwise_sum(&sq) / (xs.len() - 1) as f64)
}

/// Standard error of the sample mean; `None` for fewer than two samples.
pub fn standard_error(xs: &[f64]) -> Option<f64> {
    sample_variance(xs).map(|v| (v / xs.len() as f64).sqrt())
}
