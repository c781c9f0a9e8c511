//! Fixed-order Gauss-Legendre rules.

use std::f64::consts::PI;

use crate::{Error, Result};

#[derive(Clone, Debug)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    /// Nodes and weights on [-1, 1], found by Newton iteration on P_n
    /// from the Chebyshev-like initial guess.
    pub fn new(order: usize) -> Result<Self> {
        if order < 2 {
            return Err(Error::invalid(format!(
                "quadrature order must be >= 2, got {order}"
            )));
        }
        let n = order;
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        for i in 0..n.div_ceil(2) {
            let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre_with_derivative(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        Ok(Self { nodes, weights })
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Integral of `f` over `[a, b]`.
    pub fn integrate<F: Fn(f64) -> f64>(&self, a: f64, b: f64, f: F) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (b + a);
        let mut acc = 0.0;
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            acc += w * f(mid + half * x);
        }
        acc * half
    }

    /// Composite rule over `panels` equal subintervals.
    pub fn integrate_composite<F: Fn(f64) -> f64>(
        &self,
        a: f64,
        b: f64,
        panels: usize,
        f: F,
    ) -> f64 {
        let h = (b - a) / panels as f64;
        (0..panels)
            .map(|i| {
                let lo = a + h * i as f64;
                self.integrate(lo, lo + h, &f)
            })
            .sum()
    }

    /// Tensor-product rule over the rectangle `[a0, b0] x [a1, b1]`.
    pub fn integrate_2d<F: Fn(f64, f64) -> f64>(
        &self,
        (a0, b0): (f64, f64),
        (a1, b1): (f64, f64),
        f: F,
    ) -> f64 {
        let h0 = 0.5 * (b0 - a0);
        let c0 = 0.5 * (b0 + a0);
        let h1 = 0.5 * (b1 - a1);
        let c1 = 0.5 * (b1 + a1);
        let mut acc = 0.0;
        for (x, wx) in self.nodes.iter().zip(&self.weights) {
            let u = c0 + h0 * x;
            let mut row = 0.0;
            for (y, wy) in self.nodes.iter().zip(&self.weights) {
                row += wy * f(u, c1 + h1 * y);
            }
            acc += wx * row;
        }
        acc * h0 * h1
    }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}
