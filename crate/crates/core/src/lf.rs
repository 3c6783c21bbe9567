//! Two-velocity (density/flux) low-fidelity solver.

use crate::epi::EpidemicParameters;
use crate::error::{Error, Result};
use crate::grid::Grid1D;
use crate::imex::{compute_dt, ImexStepper, ImexSystem, ImexTableau};
use crate::state::MacroState;
use crate::transport::{check_positivity, march, Fidelity, PairSystem, Trajectory, TransportConfig};

/// Low-fidelity solver bound to one parameter sample.
pub struct LowFidelitySolver {
    grid: Grid1D,
    system: PairSystem,
    stepper: ImexStepper,
    buf: Vec<f64>,
    dt: f64,
    startup: f64,
    n_compartments: usize,
}

impl LowFidelitySolver {
    pub fn new(
        grid: &Grid1D,
        params: &EpidemicParameters,
        z: &[f64],
        cfg: &TransportConfig,
        tab: &ImexTableau,
    ) -> Result<Self> {
        if cfg.fidelity != Fidelity::Low {
            return Err(Error::Config("low-fidelity solver needs low fidelity transport".into()));
        }
        let system = PairSystem::new(grid, params, z, cfg, vec![1.0], vec![1.0])?;
        let len = system.len();
        let dt = compute_dt(grid, cfg.lambda_max(), cfg.d_max())?;
        Ok(Self {
            grid: grid.clone(),
            system,
            stepper: ImexStepper::new(tab, len)?,
            buf: vec![0.0; len],
            dt,
            startup: cfg.startup_step(dt),
            n_compartments: params.compartments.len(),
        })
    }

    /// Nominal step from the stability formula.
    pub fn dt(&self) -> f64 {
        self.dt
    }

    fn check(&self, state: &MacroState) -> Result<()> {
        state.check_grid(&self.grid)?;
        if state.compartments().len() != self.n_compartments {
            return Err(Error::Config("state and parameters use different compartments".into()));
        }
        Ok(())
    }

    /// One IMEX step of length `dt` starting at time `t`.
    pub fn step(&mut self, state: &mut MacroState, t: f64, dt: f64) -> Result<()> {
        self.check(state)?;
        self.step_unchecked(state, t, dt, 0)
    }

    fn step_unchecked(&mut self, state: &mut MacroState, t: f64, dt: f64, index: usize) -> Result<()> {
        let half = state.densities().len();
        self.buf[..half].copy_from_slice(state.densities());
        self.buf[half..].copy_from_slice(state.fluxes());
        self.stepper
            .advance(&mut self.system, t, dt, &mut self.buf)
            .map_err(|e| e.at_step(index))?;
        state.densities_mut().copy_from_slice(&self.buf[..half]);
        state.fluxes_mut().copy_from_slice(&self.buf[half..]);
        check_positivity(state.densities(), self.grid.n_cells(), index)
    }

    /// Integrates to `t_end`, recording states at `output_times`.
    pub fn run(
        &mut self,
        init: &MacroState,
        t_end: f64,
        output_times: &[f64],
    ) -> Result<Trajectory<MacroState>> {
        self.check(init)?;
        let dt = self.dt;
        march(init, t_end, dt, self.startup, output_times, |s, t, h, k| {
            self.step_unchecked(s, t, h, k)
        })
    }
}

/// Single low-fidelity step; builds a throwaway solver.
pub fn lf_step(
    state: &MacroState,
    params: &EpidemicParameters,
    z: &[f64],
    cfg: &TransportConfig,
    grid: &Grid1D,
    dt: f64,
    tab: &ImexTableau,
) -> Result<MacroState> {
    let mut solver = LowFidelitySolver::new(grid, params, z, cfg, tab)?;
    let mut out = state.clone();
    solver.step(&mut out, 0.0, dt)?;
    Ok(out)
}

/// Low-fidelity run with the stability time step.
pub fn lf_run(
    init: &MacroState,
    params: &EpidemicParameters,
    z: &[f64],
    cfg: &TransportConfig,
    grid: &Grid1D,
    t_end: f64,
    tab: &ImexTableau,
) -> Result<Trajectory<MacroState>> {
    LowFidelitySolver::new(grid, params, z, cfg, tab)?.run(init, t_end, &[])
}
