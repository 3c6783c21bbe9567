//! Macroscopic and kinetic solution containers.

use crate::epi::{Compartment, CompartmentSet};
use crate::error::{length_mismatch, Error, Result};
use crate::grid::Grid1D;

/// Per-cell densities and fluxes of every compartment, stored
/// compartment-major.
#[derive(Debug, Clone, PartialEq)]
pub struct MacroState {
    compartments: CompartmentSet,
    n_cells: usize,
    density: Vec<f64>,
    flux: Vec<f64>,
}

impl MacroState {
    pub fn zeros(compartments: CompartmentSet, n_cells: usize) -> Self {
        let len = compartments.len() * n_cells;
        Self {
            compartments,
            n_cells,
            density: vec![0.0; len],
            flux: vec![0.0; len],
        }
    }

    /// Densities given per compartment; fluxes start at zero.
    pub fn from_densities(compartments: CompartmentSet, densities: Vec<Vec<f64>>) -> Result<Self> {
        let n = densities.first().map_or(0, Vec::len);
        let fluxes = vec![vec![0.0; n]; densities.len()];
        Self::new(compartments, densities, fluxes)
    }

    pub fn new(
        compartments: CompartmentSet,
        densities: Vec<Vec<f64>>,
        fluxes: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let nc = compartments.len();
        if densities.len() != nc || fluxes.len() != nc {
            return Err(Error::Config(format!(
                "expected {nc} compartments, got {} densities and {} fluxes",
                densities.len(),
                fluxes.len()
            )));
        }
        let n_cells = densities[0].len();
        for v in densities.iter().chain(&fluxes) {
            if v.len() != n_cells {
                return Err(length_mismatch("macro state", n_cells, v.len()));
            }
        }
        Ok(Self {
            compartments,
            n_cells,
            density: densities.concat(),
            flux: fluxes.concat(),
        })
    }

    pub fn compartments(&self) -> CompartmentSet {
        self.compartments
    }

    pub fn n_cells(&self) -> usize {
        self.n_cells
    }

    pub fn density(&self, c: usize) -> &[f64] {
        &self.density[c * self.n_cells..(c + 1) * self.n_cells]
    }

    pub fn density_mut(&mut self, c: usize) -> &mut [f64] {
        &mut self.density[c * self.n_cells..(c + 1) * self.n_cells]
    }

    pub fn flux(&self, c: usize) -> &[f64] {
        &self.flux[c * self.n_cells..(c + 1) * self.n_cells]
    }

    pub fn flux_mut(&mut self, c: usize) -> &mut [f64] {
        &mut self.flux[c * self.n_cells..(c + 1) * self.n_cells]
    }

    pub fn density_of(&self, c: Compartment) -> Option<&[f64]> {
        self.compartments.index_of(c).map(|k| self.density(k))
    }

    /// All densities, compartment-major.
    pub fn densities(&self) -> &[f64] {
        &self.density
    }

    pub fn densities_mut(&mut self) -> &mut [f64] {
        &mut self.density
    }

    pub fn fluxes(&self) -> &[f64] {
        &self.flux
    }

    pub fn fluxes_mut(&mut self) -> &mut [f64] {
        &mut self.flux
    }

    /// Sum of all compartment densities per cell.
    pub fn total_density(&self) -> Vec<f64> {
        let mut rho = vec![0.0; self.n_cells];
        for c in 0..self.compartments.len() {
            for (r, d) in rho.iter_mut().zip(self.density(c)) {
                *r += d;
            }
        }
        rho
    }

    /// Total population `sum_c int density_c dx`.
    pub fn total_population(&self, grid: &Grid1D) -> f64 {
        self.density.iter().sum::<f64>() * grid.dx()
    }

    /// Snapshot vector used for uncertainty quantification: densities only.
    pub fn snapshot(&self) -> Vec<f64> {
        self.density.clone()
    }

    /// Densities followed by fluxes.
    pub fn export(&self) -> Vec<f64> {
        let mut v = self.density.clone();
        v.extend_from_slice(&self.flux);
        v
    }

    pub fn check_grid(&self, grid: &Grid1D) -> Result<()> {
        if self.n_cells != grid.n_cells() {
            return Err(length_mismatch("macro state", grid.n_cells(), self.n_cells));
        }
        Ok(())
    }

    /// Discrete check `|J_c| <= lambda_c * rho_c + eps`.
    pub fn check_subcharacteristic(&self, lambda: &[f64], eps: f64) -> Result<()> {
        for (c, &l) in lambda.iter().enumerate().take(self.compartments.len()) {
            for (k, (j, d)) in self.flux(c).iter().zip(self.density(c)).enumerate() {
                if j.abs() > l * d + eps {
                    return Err(Error::Config(format!(
                        "flux {j} exceeds lambda * density in compartment {c}, cell {k}"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Even and odd parities on the nonnegative velocity nodes, laid out as
/// `[compartment][node][cell]`.
#[derive(Debug, Clone, PartialEq)]
pub struct KineticState {
    compartments: CompartmentSet,
    n_cells: usize,
    n_nodes: usize,
    r: Vec<f64>,
    j: Vec<f64>,
}

impl KineticState {
    pub fn zeros(compartments: CompartmentSet, n_nodes: usize, n_cells: usize) -> Self {
        let len = compartments.len() * n_nodes * n_cells;
        Self {
            compartments,
            n_cells,
            n_nodes,
            r: vec![0.0; len],
            j: vec![0.0; len],
        }
    }

    pub fn compartments(&self) -> CompartmentSet {
        self.compartments
    }

    pub fn n_cells(&self) -> usize {
        self.n_cells
    }

    /// Number of stored (nonnegative) velocity nodes.
    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    fn range(&self, c: usize, m: usize) -> std::ops::Range<usize> {
        let start = (c * self.n_nodes + m) * self.n_cells;
        start..start + self.n_cells
    }

    pub fn r(&self, c: usize, m: usize) -> &[f64] {
        &self.r[self.range(c, m)]
    }

    pub fn r_mut(&mut self, c: usize, m: usize) -> &mut [f64] {
        let r = self.range(c, m);
        &mut self.r[r]
    }

    pub fn j(&self, c: usize, m: usize) -> &[f64] {
        &self.j[self.range(c, m)]
    }

    pub fn j_mut(&mut self, c: usize, m: usize) -> &mut [f64] {
        let r = self.range(c, m);
        &mut self.j[r]
    }

    pub fn even(&self) -> &[f64] {
        &self.r
    }

    pub fn odd(&self) -> &[f64] {
        &self.j
    }

    pub(crate) fn parts_mut(&mut self) -> (&mut [f64], &mut [f64]) {
        (&mut self.r, &mut self.j)
    }
}
