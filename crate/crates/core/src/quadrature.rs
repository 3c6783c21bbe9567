//! Gauss-Legendre velocity quadrature.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Legendre polynomial `P_n(x)` and its derivative by the three-term recurrence.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// Nodes (ascending) and weights of the `n`-point Gauss-Legendre rule on
/// `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if n == 0 {
        return Err(Error::Config("quadrature needs at least one node".into()));
    }
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        // Chebyshev-like initial guess for the i-th largest root
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, dp) = legendre(n, x);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[n - 1 - i] = x;
        nodes[i] = -x;
        weights[n - 1 - i] = w;
        weights[i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    Ok((nodes, weights))
}

/// Discrete ordinates on `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct VelocityQuadrature {
    pub n_nodes: usize,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl VelocityQuadrature {
    pub fn gauss_legendre(n_nodes: usize) -> Result<Self> {
        let (nodes, weights) = gauss_legendre(n_nodes)?;
        Ok(Self {
            n_nodes,
            nodes,
            weights,
        })
    }

    /// Nonnegative nodes with their multiplicities: `2 w` for a node paired
    /// with its mirror image, `w` for the origin.
    pub fn half_range(&self) -> (Vec<f64>, Vec<f64>) {
        self.nodes
            .iter()
            .zip(&self.weights)
            .filter(|(z, _)| **z >= 0.0)
            .map(|(&z, &w)| (z, if z == 0.0 { w } else { 2.0 * w }))
            .unzip()
    }

    /// `sum_i w_i f(zeta_i)`.
    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&z, &w)| w * f(z)).sum()
    }
}
