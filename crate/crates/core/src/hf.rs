//! Kinetic high-fidelity solver on even/odd parities.

use crate::epi::EpidemicParameters;
use crate::error::{Error, Result};
use crate::grid::Grid1D;
use crate::imex::{compute_dt, ImexStepper, ImexSystem, ImexTableau};
use crate::quadrature::VelocityQuadrature;
use crate::state::{KineticState, MacroState};
use crate::transport::{check_positivity, march, Fidelity, PairSystem, Trajectory, TransportConfig};

/// Velocity profile of the initial distribution.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum VelocityProfile {
    /// `exp(-v^2 / 2)`, renormalized on the discrete nodes.
    #[default]
    Gaussian,
    /// Isotropic equilibrium.
    Uniform,
}

impl VelocityProfile {
    fn eval(self, v: f64) -> f64 {
        match self {
            VelocityProfile::Gaussian => (-0.5 * v * v).exp(),
            VelocityProfile::Uniform => 1.0,
        }
    }
}

/// Even parities `r = c rho g(zeta)` with `c = 1 / sum_i w_i g(zeta_i)` and
/// zero odd parities.
pub fn kinetic_init(
    macro_init: &MacroState,
    quad: &VelocityQuadrature,
    profile: VelocityProfile,
) -> Result<KineticState> {
    if let Some(j) = macro_init.fluxes().iter().find(|j| **j != 0.0) {
        return Err(Error::Config(format!(
            "even initial profile cannot carry a nonzero flux ({j})"
        )));
    }
    let (speeds, _) = quad.half_range();
    let norm = 1.0 / quad.integrate(|v| profile.eval(v));
    let set = macro_init.compartments();
    let mut st = KineticState::zeros(set, speeds.len(), macro_init.n_cells());
    for c in 0..set.len() {
        let rho = macro_init.density(c);
        for (m, &v) in speeds.iter().enumerate() {
            let shape = norm * profile.eval(v);
            for (r, d) in st.r_mut(c, m).iter_mut().zip(rho) {
                *r = shape * d;
            }
        }
    }
    Ok(st)
}

/// Densities `sum_i w_i r(zeta_i)` and fluxes `sum_i w_i zeta_i j(zeta_i)`.
pub fn moments(state: &KineticState, quad: &VelocityQuadrature) -> Result<MacroState> {
    let (speeds, mult) = quad.half_range();
    if speeds.len() != state.n_nodes() {
        return Err(Error::Config(format!(
            "state has {} nodes, quadrature {}",
            state.n_nodes(),
            speeds.len()
        )));
    }
    let set = state.compartments();
    let mut out = MacroState::zeros(set, state.n_cells());
    for c in 0..set.len() {
        for m in 0..speeds.len() {
            let (w, v) = (mult[m], speeds[m]);
            for (d, r) in out.density_mut(c).iter_mut().zip(state.r(c, m)) {
                *d += w * r;
            }
            for (f, j) in out.flux_mut(c).iter_mut().zip(state.j(c, m)) {
                *f += w * v * j;
            }
        }
    }
    Ok(out)
}

/// High-fidelity solver bound to one parameter sample.
pub struct HighFidelitySolver {
    grid: Grid1D,
    quad: VelocityQuadrature,
    system: PairSystem,
    stepper: ImexStepper,
    buf: Vec<f64>,
    dens: Vec<f64>,
    dt: f64,
    startup: f64,
    n_compartments: usize,
    n_nodes: usize,
}

impl HighFidelitySolver {
    pub fn new(
        grid: &Grid1D,
        params: &EpidemicParameters,
        z: &[f64],
        cfg: &TransportConfig,
        quad: &VelocityQuadrature,
        tab: &ImexTableau,
    ) -> Result<Self> {
        if cfg.fidelity != Fidelity::High {
            return Err(Error::Config("high-fidelity solver needs high fidelity transport".into()));
        }
        let (speeds, mult) = quad.half_range();
        let n_nodes = speeds.len();
        let system = PairSystem::new(grid, params, z, cfg, speeds, mult)?;
        let len = system.len();
        let dt = compute_dt(grid, cfg.lambda_max(), cfg.d_max())?;
        let nc = params.compartments.len();
        Ok(Self {
            grid: grid.clone(),
            quad: quad.clone(),
            system,
            stepper: ImexStepper::new(tab, len)?,
            buf: vec![0.0; len],
            dens: vec![0.0; nc * grid.n_cells()],
            dt,
            startup: cfg.startup_step(dt),
            n_compartments: nc,
            n_nodes,
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn quadrature(&self) -> &VelocityQuadrature {
        &self.quad
    }

    fn check(&self, state: &KineticState) -> Result<()> {
        if state.n_cells() != self.grid.n_cells()
            || state.n_nodes() != self.n_nodes
            || state.compartments().len() != self.n_compartments
        {
            return Err(Error::Config("kinetic state does not match the solver layout".into()));
        }
        Ok(())
    }

    pub fn step(&mut self, state: &mut KineticState, t: f64, dt: f64) -> Result<()> {
        self.check(state)?;
        self.step_unchecked(state, t, dt, 0)
    }

    fn step_unchecked(&mut self, state: &mut KineticState, t: f64, dt: f64, index: usize) -> Result<()> {
        let half = state.even().len();
        self.buf[..half].copy_from_slice(state.even());
        self.buf[half..].copy_from_slice(state.odd());
        self.stepper
            .advance(&mut self.system, t, dt, &mut self.buf)
            .map_err(|e| e.at_step(index))?;
        let (r, j) = state.parts_mut();
        r.copy_from_slice(&self.buf[..half]);
        j.copy_from_slice(&self.buf[half..]);
        self.system.densities_into(&self.buf[..half], &mut self.dens);
        check_positivity(&self.dens, self.grid.n_cells(), index)
    }

    pub fn run(
        &mut self,
        init: &KineticState,
        t_end: f64,
        output_times: &[f64],
    ) -> Result<Trajectory<KineticState>> {
        self.check(init)?;
        let dt = self.dt;
        march(init, t_end, dt, self.startup, output_times, |s, t, h, k| {
            self.step_unchecked(s, t, h, k)
        })
    }

    /// Starts from a macroscopic state with the Gaussian velocity profile and
    /// returns the final moments.
    pub fn run_macro(&mut self, init: &MacroState, t_end: f64) -> Result<MacroState> {
        let k0 = kinetic_init(init, &self.quad, VelocityProfile::Gaussian)?;
        let traj = self.run(&k0, t_end, &[])?;
        moments(&traj.final_state, &self.quad)
    }
}

/// Single high-fidelity step; builds a throwaway solver.
#[allow(clippy::too_many_arguments)]
pub fn hf_step(
    state: &KineticState,
    params: &EpidemicParameters,
    z: &[f64],
    cfg: &TransportConfig,
    grid: &Grid1D,
    quad: &VelocityQuadrature,
    dt: f64,
    tab: &ImexTableau,
) -> Result<KineticState> {
    let mut solver = HighFidelitySolver::new(grid, params, z, cfg, quad, tab)?;
    let mut out = state.clone();
    solver.step(&mut out, 0.0, dt)?;
    Ok(out)
}
