//! Reaction-diffusion reference solver: implicit diffusion and linear
//! reactions, explicit incidence.

use crate::epi::{EpidemicParameters, ReactionNetwork};
use crate::error::{Error, Result};
use crate::grid::Grid1D;
use crate::imex::{ImexStepper, ImexSystem, ImexTableau};
use crate::state::MacroState;
use crate::transport::{check_positivity, march, Trajectory};

/// Second-order central approximation of `u_xx` on the periodic grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Laplacian {
    /// `(u[i-1] - 2 u[i] + u[i+1]) / dx^2`.
    Compact,
    /// `(u[i-2] - 2 u[i] + u[i+2]) / (4 dx^2)`, the central difference of
    /// central differences. The relaxation schemes reduce to this stencil in
    /// the diffusive limit.
    #[default]
    Wide,
}

impl Laplacian {
    fn stride(self) -> usize {
        match self {
            Laplacian::Compact => 1,
            Laplacian::Wide => 2,
        }
    }

    fn scale(self, dx: f64) -> f64 {
        let s = self.stride() as f64 * dx;
        1.0 / (s * s)
    }
}

/// Solves the periodic system `-a x[i-1] + diag[i] x[i] - a x[i+1] = rhs[i]`
/// (Thomas algorithm with a Sherman-Morrison correction for the corners).
fn solve_cyclic(a: f64, diag: &[f64], rhs: &[f64], x: &mut [f64], z: &mut [f64], cp: &mut [f64]) {
    let n = rhs.len();
    if a == 0.0 {
        for ((xi, r), d) in x.iter_mut().zip(rhs).zip(diag) {
            *xi = r / d;
        }
        return;
    }
    if n == 2 {
        // both neighbours are the same cell
        let (d0, d1, o) = (diag[0], diag[1], -2.0 * a);
        let det = d0 * d1 - o * o;
        x[0] = (d1 * rhs[0] - o * rhs[1]) / det;
        x[1] = (d0 * rhs[1] - o * rhs[0]) / det;
        return;
    }
    let off = -a;
    let gamma = -diag[0];
    let bb = |i: usize| {
        if i == 0 {
            diag[0] - gamma
        } else if i == n - 1 {
            diag[n - 1] - off * off / gamma
        } else {
            diag[i]
        }
    };
    let mut thomas = |d: &dyn Fn(usize) -> f64, out: &mut [f64]| {
        cp[0] = off / bb(0);
        out[0] = d(0) / bb(0);
        for i in 1..n {
            let m = bb(i) - off * cp[i - 1];
            cp[i] = off / m;
            out[i] = (d(i) - off * out[i - 1]) / m;
        }
        for i in (0..n - 1).rev() {
            out[i] -= cp[i] * out[i + 1];
        }
    };
    thomas(&|i| rhs[i], x);
    thomas(
        &|i| {
            if i == 0 {
                gamma
            } else if i == n - 1 {
                off
            } else {
                0.0
            }
        },
        z,
    );
    let fact = (x[0] + off * x[n - 1] / gamma) / (1.0 + z[0] + off * z[n - 1] / gamma);
    for (xi, zi) in x.iter_mut().zip(z.iter()) {
        *xi -= fact * zi;
    }
}

struct DiffusionSystem {
    grid: Grid1D,
    n: usize,
    d: Vec<f64>,
    laplacian: Laplacian,
    reactions: ReactionNetwork,
    params: EpidemicParameters,
    z: Vec<f64>,
    rates: Vec<f64>,
    outflow: Vec<f64>,
    // scratch for one cycle of the stencil
    diag: Vec<f64>,
    rhs: Vec<f64>,
    sol: Vec<f64>,
    zbuf: Vec<f64>,
    cp: Vec<f64>,
    crhs: Vec<f64>,
    csol: Vec<f64>,
}

impl DiffusionSystem {
    fn reactions_into(&self, y: &[f64], out: &mut [f64], linear: bool) {
        let n = self.n;
        for (k, tr) in self.reactions.transitions().iter().enumerate() {
            if tr.linear != linear {
                continue;
            }
            for i in 0..n {
                let flow = self.rates[k * n + i] * y[tr.from * n + i];
                out[tr.from * n + i] -= flow;
                out[tr.to * n + i] += flow;
            }
        }
    }

    /// Solves `(1 + h outflow) u - h d u_xx = rhs` for one compartment, one
    /// stencil cycle at a time.
    fn solve_compartment(&mut self, c: usize, h: f64, rhs: &[f64], out: &mut [f64]) {
        let n = self.n;
        let stride = self.laplacian.stride();
        let a = h * self.d[c] * self.laplacian.scale(self.grid.dx());
        let cycles = if stride == 2 && n % 2 == 0 { 2 } else { 1 };
        let len = n / cycles;
        for start in 0..cycles {
            // walk i -> i + stride (mod n)
            let mut i = start;
            for k in 0..len {
                self.diag[k] = 1.0 + h * self.outflow[c * n + i] + 2.0 * a;
                self.rhs[k] = rhs[i];
                i = (i + stride) % n;
            }
            solve_cyclic(
                a,
                &self.diag[..len],
                &self.rhs[..len],
                &mut self.sol[..len],
                &mut self.zbuf[..len],
                &mut self.cp[..len],
            );
            let mut i = start;
            for k in 0..len {
                out[i] = self.sol[k];
                i = (i + stride) % n;
            }
        }
    }
}

impl ImexSystem for DiffusionSystem {
    fn len(&self) -> usize {
        self.d.len() * self.n
    }

    fn explicit_rhs(&mut self, t: f64, y: &[f64], out: &mut [f64]) -> Result<()> {
        if self.params.time_dependent {
            self.reactions.coeffs.resample(&self.params, &self.grid, &self.z, t)?;
        }
        out.fill(0.0);
        self.reactions.rates(y, self.n, &mut self.rates);
        self.reactions_into(y, out, false);
        Ok(())
    }

    fn stiff_rhs(&mut self, _t: f64, y: &[f64], out: &mut [f64]) -> Result<()> {
        let n = self.n;
        let stride = self.laplacian.stride();
        let scale = self.laplacian.scale(self.grid.dx());
        for (c, &d) in self.d.iter().enumerate() {
            let u = &y[c * n..(c + 1) * n];
            for i in 0..n {
                let l = u[(i + n - stride) % n];
                let r = u[(i + stride) % n];
                out[c * n + i] = d * (l - 2.0 * u[i] + r) * scale;
            }
        }
        self.reactions.rates(y, n, &mut self.rates);
        self.reactions_into(y, out, true);
        Ok(())
    }

    fn stiff_solve(&mut self, t: f64, h: f64, known: &[f64], out: &mut [f64]) -> Result<()> {
        if self.params.time_dependent {
            self.reactions.coeffs.resample(&self.params, &self.grid, &self.z, t)?;
        }
        let n = self.n;
        self.reactions.rates(known, n, &mut self.rates);
        self.outflow.fill(0.0);
        for (k, tr) in self.reactions.transitions().iter().enumerate() {
            if tr.linear {
                for i in 0..n {
                    self.outflow[tr.from * n + i] += self.rates[k * n + i];
                }
            }
        }
        // linear inflows come from lower compartments, already solved
        let mut rhs = std::mem::take(&mut self.crhs);
        let mut sol = std::mem::take(&mut self.csol);
        for c in 0..self.d.len() {
            rhs.copy_from_slice(&known[c * n..(c + 1) * n]);
            for (k, tr) in self.reactions.transitions().iter().enumerate() {
                if tr.linear && tr.to == c {
                    for i in 0..n {
                        rhs[i] += h * self.rates[k * n + i] * out[tr.from * n + i];
                    }
                }
            }
            self.solve_compartment(c, h, &rhs, &mut sol);
            out[c * n..(c + 1) * n].copy_from_slice(&sol);
        }
        self.crhs = rhs;
        self.csol = sol;
        Ok(())
    }
}

/// Reaction-diffusion solver bound to one parameter sample.
pub struct DiffusionSolver {
    grid: Grid1D,
    system: DiffusionSystem,
    stepper: ImexStepper,
    buf: Vec<f64>,
}

impl DiffusionSolver {
    pub fn new(
        grid: &Grid1D,
        params: &EpidemicParameters,
        z: &[f64],
        diffusivities: &[f64],
        tab: &ImexTableau,
    ) -> Result<Self> {
        let nc = params.compartments.len();
        if diffusivities.len() != nc {
            return Err(Error::Config(format!(
                "{nc} compartments but {} diffusivities",
                diffusivities.len()
            )));
        }
        if let Some(d) = diffusivities.iter().find(|d| !(**d >= 0.0 && d.is_finite())) {
            return Err(Error::Config(format!("diffusivity must be nonnegative, got {d}")));
        }
        let n = grid.n_cells();
        let reactions = ReactionNetwork::new(params, grid, z, 0.0)?;
        let n_tr = reactions.transitions().len();
        let system = DiffusionSystem {
            grid: grid.clone(),
            n,
            d: diffusivities.to_vec(),
            reactions,
            params: params.clone(),
            z: z.to_vec(),
            laplacian: Laplacian::default(),
            rates: vec![0.0; n_tr * n],
            outflow: vec![0.0; nc * n],
            diag: vec![0.0; n],
            rhs: vec![0.0; n],
            sol: vec![0.0; n],
            zbuf: vec![0.0; n],
            cp: vec![0.0; n],
            crhs: vec![0.0; n],
            csol: vec![0.0; n],
        };
        Ok(Self {
            grid: grid.clone(),
            stepper: ImexStepper::new(tab, nc * n)?,
            buf: vec![0.0; nc * n],
            system,
        })
    }

    /// Selects the diffusion stencil (default [`Laplacian::Wide`]).
    pub fn with_laplacian(mut self, laplacian: Laplacian) -> Self {
        self.system.laplacian = laplacian;
        self
    }

    pub fn step(&mut self, state: &mut MacroState, t: f64, dt: f64) -> Result<()> {
        state.check_grid(&self.grid)?;
        if state.densities().len() != self.buf.len() {
            return Err(Error::Config("state and parameters use different compartments".into()));
        }
        self.step_unchecked(state, t, dt, 0)
    }

    fn step_unchecked(&mut self, state: &mut MacroState, t: f64, dt: f64, index: usize) -> Result<()> {
        self.buf.copy_from_slice(state.densities());
        self.stepper
            .advance(&mut self.system, t, dt, &mut self.buf)
            .map_err(|e| e.at_step(index))?;
        state.densities_mut().copy_from_slice(&self.buf);
        check_positivity(state.densities(), self.grid.n_cells(), index)
    }

    /// Integrates to `t_end` with nominal step `dt`; fluxes are ignored.
    pub fn run(
        &mut self,
        init: &MacroState,
        t_end: f64,
        dt: f64,
        output_times: &[f64],
    ) -> Result<Trajectory<MacroState>> {
        init.check_grid(&self.grid)?;
        if init.densities().len() != self.buf.len() {
            return Err(Error::Config("state and parameters use different compartments".into()));
        }
        march(init, t_end, dt, dt, output_times, |s, t, h, k| {
            self.step_unchecked(s, t, h, k)
        })
    }
}

/// Single reaction-diffusion step; builds a throwaway solver.
pub fn diffusion_step(
    state: &MacroState,
    params: &EpidemicParameters,
    z: &[f64],
    diffusivities: &[f64],
    grid: &Grid1D,
    dt: f64,
    tab: &ImexTableau,
) -> Result<MacroState> {
    let mut solver = DiffusionSolver::new(grid, params, z, diffusivities, tab)?;
    let mut out = state.clone();
    solver.step(&mut out, 0.0, dt)?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::epi::{CompartmentSet, Field};
    use approx::assert_relative_eq;

    #[test]
    fn cyclic_solver_matches_dense() {
        let n = 7;
        let a = 0.3;
        let diag: Vec<f64> = (0..n).map(|i| 1.9 + 0.1 * i as f64).collect();
        let rhs: Vec<f64> = (0..n).map(|i| (i as f64).sin() + 0.5).collect();
        let mut x = vec![0.0; n];
        let (mut z, mut cp) = (vec![0.0; n], vec![0.0; n]);
        solve_cyclic(a, &diag, &rhs, &mut x, &mut z, &mut cp);
        for i in 0..n {
            let l = x[(i + n - 1) % n];
            let r = x[(i + 1) % n];
            assert_relative_eq!(-a * l + diag[i] * x[i] - a * r, rhs[i], epsilon = 1e-13);
        }
    }

    #[test]
    fn constant_data_unchanged_without_reactions() {
        let g = Grid1D::new(20.0, 50).unwrap();
        let p = EpidemicParameters::sir(Field::Constant(0.0), Field::Constant(0.0));
        let st = MacroState::from_densities(CompartmentSet::Sir, vec![vec![0.8; 50], vec![0.2; 50], vec![0.0; 50]]).unwrap();
        let out = diffusion_step(&st, &p, &[], &[1.0; 3], &g, 0.5, &ImexTableau::ars443()).unwrap();
        for (a, b) in out.densities().iter().zip(st.densities()) {
            assert_relative_eq!(a, b, epsilon = 1e-14);
        }
    }
}
