//! Uniform periodic finite-volume mesh and MUSCL slope reconstruction.

use crate::error::{length_mismatch, Error, Result};

/// Uniform one-dimensional mesh on `[0, L)` with periodic boundaries.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid1D {
    domain_length: f64,
    n_cells: usize,
    dx: f64,
    cell_centers: Vec<f64>,
}

impl Grid1D {
    pub fn new(domain_length: f64, n_cells: usize) -> Result<Self> {
        if !(domain_length.is_finite() && domain_length > 0.0) {
            return Err(Error::Config(format!(
                "domain length must be positive, got {domain_length}"
            )));
        }
        if n_cells < 3 {
            return Err(Error::Config(format!(
                "at least 3 cells are required, got {n_cells}"
            )));
        }
        let dx = domain_length / n_cells as f64;
        let cell_centers = (0..n_cells).map(|i| (i as f64 + 0.5) * dx).collect();
        Ok(Self {
            domain_length,
            n_cells,
            dx,
            cell_centers,
        })
    }

    pub fn domain_length(&self) -> f64 {
        self.domain_length
    }

    pub fn n_cells(&self) -> usize {
        self.n_cells
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn cell_centers(&self) -> &[f64] {
        &self.cell_centers
    }

    /// Periodic left neighbour of cell `i`.
    #[inline]
    pub fn left(&self, i: usize) -> usize {
        if i == 0 {
            self.n_cells - 1
        } else {
            i - 1
        }
    }

    /// Periodic right neighbour of cell `i`.
    #[inline]
    pub fn right(&self, i: usize) -> usize {
        if i + 1 == self.n_cells {
            0
        } else {
            i + 1
        }
    }

    /// Midpoint-rule integral of a cell-averaged field over the domain.
    pub fn integrate(&self, field: &[f64]) -> f64 {
        field.iter().sum::<f64>() * self.dx
    }

    pub(crate) fn check_len(&self, what: &str, field: &[f64]) -> Result<()> {
        if field.len() != self.n_cells {
            return Err(length_mismatch(what, self.n_cells, field.len()));
        }
        Ok(())
    }
}

/// Classical minmod limiter: zero on sign change, otherwise the argument of
/// smaller magnitude.
#[inline]
pub fn minmod(a: f64, b: f64) -> f64 {
    if a * b <= 0.0 {
        0.0
    } else if a.abs() <= b.abs() {
        a
    } else {
        b
    }
}

/// Minmod-limited slopes (per unit length) of a cell-averaged field.
pub fn reconstruct(field: &[f64], grid: &Grid1D) -> Result<Vec<f64>> {
    grid.check_len("reconstruct", field)?;
    let mut slopes = vec![0.0; field.len()];
    limited_increments(field, &mut slopes);
    let inv_dx = 1.0 / grid.dx();
    slopes.iter_mut().for_each(|s| *s *= inv_dx);
    Ok(slopes)
}

/// Limited increments `minmod(u_i - u_{i-1}, u_{i+1} - u_i)` with periodic wrap.
pub(crate) fn limited_increments(field: &[f64], out: &mut [f64]) {
    let n = field.len();
    debug_assert_eq!(out.len(), n);
    for i in 0..n {
        let left = field[if i == 0 { n - 1 } else { i - 1 }];
        let right = field[if i + 1 == n { 0 } else { i + 1 }];
        out[i] = minmod(field[i] - left, right - field[i]);
    }
}

/// Total variation of the piecewise-linear reconstruction `u_i + s_i (x - x_i)`
/// over one period, counting interior variation and interface jumps.
pub fn reconstructed_total_variation(field: &[f64], slopes: &[f64], dx: f64) -> f64 {
    let n = field.len();
    (0..n)
        .map(|i| {
            let next = if i + 1 == n { 0 } else { i + 1 };
            let right_face = field[i] + 0.5 * dx * slopes[i];
            let next_left_face = field[next] - 0.5 * dx * slopes[next];
            (slopes[i] * dx).abs() + (next_left_face - right_face).abs()
        })
        .sum()
}

/// Total variation of periodic cell averages.
pub fn total_variation(field: &[f64]) -> f64 {
    let n = field.len();
    (0..n)
        .map(|i| (field[if i + 1 == n { 0 } else { i + 1 }] - field[i]).abs())
        .sum()
}
