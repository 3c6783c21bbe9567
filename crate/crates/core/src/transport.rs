//! Relaxation transport systems shared by the two-velocity and the kinetic
//! solvers.
//!
//! Every compartment carries one or more pairs `(u, w)` advected with a node
//! speed `v`:
//!
//! ```text
//! u_t + v w_x          = reactions(u) - kinetic relaxation
//! w_t + lambda^2 v u_x = reactions(w) - w / tau
//! ```
//!
//! The flux equation is split as `w_t + phi v u_x = -(w + tau (lambda^2 - phi) v u_x) / tau`.
//! The left part is a hyperbolic system with speeds `±sqrt(phi) v`, upwinded on
//! its characteristic variables with MUSCL-minmod reconstruction; the right
//! part is integrated implicitly together with the relaxation and the linear
//! reactions (recovery, latency); only the incidence is explicit. `phi` equals
//! `lambda^2` when the cell Peclet number `q = lambda dx / D` is small and
//! vanishes like `q^-8` otherwise, so the numerical viscosity of the upwind
//! part does not pollute the diffusive limit. The limited slopes are scaled by
//! `sqrt(phi) / lambda`: full MUSCL when transport is hyperbolic, plain cell
//! values when it is diffusive, where `u` then sees the central difference of
//! the central flux `w = -D u_x`.

use crate::epi::{EpidemicParameters, ReactionNetwork};
use crate::error::{Error, Result};
use crate::grid::{limited_increments, Grid1D};
use crate::imex::ImexSystem;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fidelity {
    Low,
    High,
}

/// Characteristic speeds and relaxation times per compartment.
#[derive(Debug, Clone, PartialEq)]
pub struct TransportConfig {
    pub lambda: Vec<f64>,
    pub tau: Vec<f64>,
    pub fidelity: Fidelity,
}

impl TransportConfig {
    pub fn new(lambda: Vec<f64>, tau: Vec<f64>, fidelity: Fidelity) -> Result<Self> {
        let cfg = Self {
            lambda,
            tau,
            fidelity,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.lambda.len() != self.tau.len() {
            return Err(Error::Config(format!(
                "{} speeds but {} relaxation times",
                self.lambda.len(),
                self.tau.len()
            )));
        }
        if let Some(l) = self.lambda.iter().find(|l| !(**l >= 0.0 && l.is_finite())) {
            return Err(Error::Config(format!("speed must be nonnegative, got {l}")));
        }
        if let Some(t) = self.tau.iter().find(|t| !(**t > 0.0 && t.is_finite())) {
            return Err(Error::Config(format!("relaxation time must be positive, got {t}")));
        }
        Ok(())
    }

    /// `lambda^2 tau` for the two-velocity model, `lambda^2 tau / 3` for the
    /// kinetic one.
    pub fn diffusivity(&self, c: usize) -> f64 {
        let d = self.lambda[c] * self.lambda[c] * self.tau[c];
        match self.fidelity {
            Fidelity::Low => d,
            Fidelity::High => d / 3.0,
        }
    }

    pub fn diffusivities(&self) -> Vec<f64> {
        (0..self.lambda.len()).map(|c| self.diffusivity(c)).collect()
    }

    pub fn lambda_max(&self) -> f64 {
        self.lambda.iter().copied().fold(0.0, f64::max)
    }

    pub fn d_max(&self) -> f64 {
        self.diffusivities().into_iter().fold(0.0, f64::max)
    }

    /// Length of the first step of a run: ten relaxation times, so that
    /// initial data away from local equilibrium relax before the explicit
    /// stages use their fluxes with a full step.
    pub fn startup_step(&self, dt: f64) -> f64 {
        (10.0 * self.tau.iter().copied().fold(0.0, f64::max)).min(dt)
    }

    fn expect(&self, fidelity: Fidelity, n_compartments: usize) -> Result<()> {
        self.validate()?;
        if self.fidelity != fidelity {
            return Err(Error::Config(format!(
                "solver needs {fidelity:?} fidelity transport, got {:?}",
                self.fidelity
            )));
        }
        if self.lambda.len() != n_compartments {
            return Err(Error::Config(format!(
                "{} compartments but {} speeds",
                n_compartments,
                self.lambda.len()
            )));
        }
        Ok(())
    }
}

/// Square root of the split parameter `phi` for one compartment.
pub(crate) fn split_speed(lambda: f64, diffusivity: f64, dx: f64) -> f64 {
    if lambda == 0.0 {
        return 0.0;
    }
    let q = lambda * dx / diffusivity;
    lambda / (1.0 + q.powi(4))
}

/// Semi-discrete relaxation system over all compartments and nodes.
/// State layout: all `u` blocks, then all `w` blocks; block index
/// `c * n_nodes + m`, cells innermost.
pub(crate) struct PairSystem {
    grid: Grid1D,
    n: usize,
    nc: usize,
    nm: usize,
    speeds: Vec<f64>,
    mult: Vec<f64>,
    inv_mult_sum: f64,
    kinetic: bool,
    sqrt_phi: Vec<f64>,
    theta: Vec<f64>,
    stiff_coef: Vec<f64>,
    tau: Vec<f64>,
    ratio: Vec<Vec<f64>>,
    reactions: ReactionNetwork,
    params: EpidemicParameters,
    z: Vec<f64>,
    dens: Vec<f64>,
    rates: Vec<f64>,
    outflow: Vec<f64>,
    pp: Vec<f64>,
    pm: Vec<f64>,
    dp: Vec<f64>,
    dm: Vec<f64>,
    fu: Vec<f64>,
    fw: Vec<f64>,
}

impl PairSystem {
    /// `speeds`/`mult` are the node speeds and the quadrature multiplicities
    /// used to form densities (`[1]`, `[1]` for the two-velocity model).
    pub fn new(
        grid: &Grid1D,
        params: &EpidemicParameters,
        z: &[f64],
        cfg: &TransportConfig,
        speeds: Vec<f64>,
        mult: Vec<f64>,
    ) -> Result<Self> {
        let nc = params.compartments.len();
        let kinetic = cfg.fidelity == Fidelity::High;
        cfg.expect(cfg.fidelity, nc)?;
        let n = grid.n_cells();
        let nm = speeds.len();
        let reactions = ReactionNetwork::new(params, grid, z, 0.0)?;
        let n_tr = reactions.transitions().len();
        let dx = grid.dx();
        let sqrt_phi: Vec<f64> = (0..nc)
            .map(|c| split_speed(cfg.lambda[c], cfg.diffusivity(c), dx))
            .collect();
        let theta = (0..nc)
            .map(|c| if cfg.lambda[c] == 0.0 { 0.0 } else { sqrt_phi[c] / cfg.lambda[c] })
            .collect();
        let stiff_coef = (0..nc)
            .map(|c| cfg.lambda[c] * cfg.lambda[c] - sqrt_phi[c] * sqrt_phi[c])
            .collect();
        let ratio = (0..nc)
            .map(|to| {
                (0..nc)
                    .map(|from| {
                        if cfg.lambda[from] == 0.0 {
                            0.0
                        } else {
                            cfg.lambda[to] / cfg.lambda[from]
                        }
                    })
                    .collect()
            })
            .collect();
        let inv_mult_sum = 1.0 / mult.iter().sum::<f64>();
        Ok(Self {
            grid: grid.clone(),
            n,
            nc,
            nm,
            speeds,
            mult,
            inv_mult_sum,
            kinetic,
            sqrt_phi,
            theta,
            stiff_coef,
            tau: cfg.tau.clone(),
            ratio,
            reactions,
            params: params.clone(),
            z: z.to_vec(),
            dens: vec![0.0; nc * n],
            rates: vec![0.0; n_tr * n],
            outflow: vec![0.0; nc * n],
            pp: vec![0.0; n],
            pm: vec![0.0; n],
            dp: vec![0.0; n],
            dm: vec![0.0; n],
            fu: vec![0.0; n],
            fw: vec![0.0; n],
        })
    }

    fn blocks(&self) -> usize {
        self.nc * self.nm
    }

    /// Densities `sum_m mult_m u_{c,m}` written compartment-major into `out`.
    pub fn densities_into(&self, u: &[f64], out: &mut [f64]) {
        let n = self.n;
        out.fill(0.0);
        for c in 0..self.nc {
            let d = &mut out[c * n..(c + 1) * n];
            for m in 0..self.nm {
                let b = c * self.nm + m;
                let w = self.mult[m];
                for (di, ui) in d.iter_mut().zip(&u[b * n..(b + 1) * n]) {
                    *di += w * ui;
                }
            }
        }
    }

    fn transport_block(&mut self, v: f64, s: f64, theta: f64, u: &[f64], w: &[f64], ou: &mut [f64], ow: &mut [f64]) {
        let n = self.n;
        if v == 0.0 {
            ou.fill(0.0);
            ow.fill(0.0);
            return;
        }
        for i in 0..n {
            self.pp[i] = s * u[i] + w[i];
            self.pm[i] = s * u[i] - w[i];
        }
        limited_increments(&self.pp, &mut self.dp);
        limited_increments(&self.pm, &mut self.dm);
        // face i sits between cell i and cell i + 1
        for i in 0..n {
            let r = if i + 1 == n { 0 } else { i + 1 };
            let left = self.pp[i] + 0.5 * theta * self.dp[i];
            let right = self.pm[r] - 0.5 * theta * self.dm[r];
            self.fu[i] = 0.5 * v * (left - right);
            self.fw[i] = 0.5 * s * v * (left + right);
        }
        let inv_dx = 1.0 / self.grid.dx();
        for i in 0..n {
            let l = if i == 0 { n - 1 } else { i - 1 };
            ou[i] = -(self.fu[i] - self.fu[l]) * inv_dx;
            ow[i] = -(self.fw[i] - self.fw[l]) * inv_dx;
        }
    }
}

#[inline]
fn central_derivative(u: &[f64], i: usize, inv_2dx: f64) -> f64 {
    let n = u.len();
    let l = if i == 0 { n - 1 } else { i - 1 };
    let r = if i + 1 == n { 0 } else { i + 1 };
    (u[r] - u[l]) * inv_2dx
}

impl ImexSystem for PairSystem {
    fn len(&self) -> usize {
        2 * self.blocks() * self.n
    }

    fn explicit_rhs(&mut self, t: f64, y: &[f64], out: &mut [f64]) -> Result<()> {
        if self.params.time_dependent {
            let (params, grid, z) = (&self.params, &self.grid, &self.z);
            self.reactions.coeffs.resample(params, grid, z, t)?;
        }
        let n = self.n;
        let half = self.blocks() * n;
        let (u, w) = y.split_at(half);
        let (ou, ow) = out.split_at_mut(half);

        for b in 0..self.blocks() {
            let c = b / self.nm;
            let v = self.speeds[b % self.nm];
            let s = self.sqrt_phi[c];
            let theta = self.theta[c];
            let range = b * n..(b + 1) * n;
            self.transport_block(
                v,
                s,
                theta,
                &u[range.clone()],
                &w[range.clone()],
                &mut ou[range.clone()],
                &mut ow[range],
            );
        }

        let mut dens = std::mem::take(&mut self.dens);
        self.densities_into(u, &mut dens);
        self.reactions.rates(&dens, n, &mut self.rates);
        self.dens = dens;
        for (k, tr) in self.reactions.transitions().iter().enumerate() {
            if tr.linear {
                continue;
            }
            let rate = &self.rates[k * n..(k + 1) * n];
            let ratio = self.ratio[tr.to][tr.from];
            for m in 0..self.nm {
                let from = (tr.from * self.nm + m) * n;
                let to = (tr.to * self.nm + m) * n;
                for i in 0..n {
                    let du = rate[i] * u[from + i];
                    ou[from + i] -= du;
                    ou[to + i] += du;
                    let dw = rate[i] * w[from + i];
                    ow[from + i] -= dw;
                    ow[to + i] += ratio * dw;
                }
            }
        }
        Ok(())
    }

    fn stiff_rhs(&mut self, _t: f64, y: &[f64], out: &mut [f64]) -> Result<()> {
        let n = self.n;
        let half = self.blocks() * n;
        let (u, w) = y.split_at(half);
        let (ou, ow) = out.split_at_mut(half);
        let mut dens = std::mem::take(&mut self.dens);
        self.densities_into(u, &mut dens);
        self.reactions.rates(&dens, n, &mut self.rates);
        if self.kinetic {
            for b in 0..self.blocks() {
                let c = b / self.nm;
                let inv_tau = 1.0 / self.tau[c];
                for i in 0..n {
                    let eq = dens[c * n + i] * self.inv_mult_sum;
                    ou[b * n + i] = (eq - u[b * n + i]) * inv_tau;
                }
            }
        } else {
            ou.fill(0.0);
        }
        self.dens = dens;
        let inv_2dx = 0.5 / self.grid.dx();
        for b in 0..self.blocks() {
            let c = b / self.nm;
            let v = self.speeds[b % self.nm];
            let coef = self.stiff_coef[c] * v;
            let inv_tau = 1.0 / self.tau[c];
            let ub = &u[b * n..(b + 1) * n];
            for i in 0..n {
                ow[b * n + i] = -w[b * n + i] * inv_tau - coef * central_derivative(ub, i, inv_2dx);
            }
        }
        for (k, tr) in self.reactions.transitions().iter().enumerate() {
            if !tr.linear {
                continue;
            }
            let rate = &self.rates[k * n..(k + 1) * n];
            let ratio = self.ratio[tr.to][tr.from];
            for m in 0..self.nm {
                let from = (tr.from * self.nm + m) * n;
                let to = (tr.to * self.nm + m) * n;
                for i in 0..n {
                    let du = rate[i] * u[from + i];
                    ou[from + i] -= du;
                    ou[to + i] += du;
                    let dw = rate[i] * w[from + i];
                    ow[from + i] -= dw;
                    ow[to + i] += ratio * dw;
                }
            }
        }
        Ok(())
    }

    fn stiff_solve(&mut self, t: f64, h: f64, known: &[f64], out: &mut [f64]) -> Result<()> {
        if self.params.time_dependent {
            let (params, grid, z) = (&self.params, &self.grid, &self.z);
            self.reactions.coeffs.resample(params, grid, z, t)?;
        }
        let n = self.n;
        let nm = self.nm;
        let half = self.blocks() * n;
        let (ku, kw) = known.split_at(half);
        let (ou, ow) = out.split_at_mut(half);
        let mut dens = std::mem::take(&mut self.dens);
        self.densities_into(ku, &mut dens);
        self.reactions.rates(&dens, n, &mut self.rates);

        // total linear outflow rate per compartment
        self.outflow.fill(0.0);
        for (k, tr) in self.reactions.transitions().iter().enumerate() {
            if tr.linear {
                let rate = &self.rates[k * n..(k + 1) * n];
                for (o, r) in self.outflow[tr.from * n..(tr.from + 1) * n].iter_mut().zip(rate) {
                    *o += r;
                }
            }
        }

        // Compartments are solved in order: every linear inflow comes from a
        // lower index. Relaxation conserves each density, so the stage
        // densities only see the linear reactions.
        let transitions = self.reactions.transitions();
        for c in 0..self.nc {
            if self.kinetic {
                for i in 0..n {
                    let mut num = dens[c * n + i];
                    for (k, tr) in transitions.iter().enumerate() {
                        if tr.linear && tr.to == c {
                            num += h * self.rates[k * n + i] * dens[tr.from * n + i];
                        }
                    }
                    dens[c * n + i] = num / (1.0 + h * self.outflow[c * n + i]);
                }
            }
            let r = if self.kinetic { h / self.tau[c] } else { 0.0 };
            for m in 0..nm {
                let b = (c * nm + m) * n;
                for i in 0..n {
                    let mut num = ku[b + i] + r * dens[c * n + i] * self.inv_mult_sum;
                    for (k, tr) in transitions.iter().enumerate() {
                        if tr.linear && tr.to == c {
                            num += h * self.rates[k * n + i] * ou[(tr.from * nm + m) * n + i];
                        }
                    }
                    ou[b + i] = num / (1.0 + r + h * self.outflow[c * n + i]);
                }
            }
        }
        self.dens = dens;

        let inv_2dx = 0.5 / self.grid.dx();
        for c in 0..self.nc {
            let r = h / self.tau[c];
            for m in 0..nm {
                let b = (c * nm + m) * n;
                let coef = h * self.stiff_coef[c] * self.speeds[m];
                let ub = &ou[b..b + n];
                for i in 0..n {
                    let mut num = kw[b + i] - coef * central_derivative(ub, i, inv_2dx);
                    for (k, tr) in transitions.iter().enumerate() {
                        if tr.linear && tr.to == c {
                            num += h
                                * self.ratio[c][tr.from]
                                * self.rates[k * n + i]
                                * ow[(tr.from * nm + m) * n + i];
                        }
                    }
                    ow[b + i] = num / (1.0 + r + h * self.outflow[c * n + i]);
                }
            }
        }
        Ok(())
    }

    fn locate(&self, index: usize) -> Option<usize> {
        if !self.kinetic {
            return None;
        }
        let block = (index % (self.blocks() * self.n)) / self.n;
        Some(block % self.nm)
    }
}

/// Fails with a positivity error if any density drops below `-1e-8`.
pub(crate) fn check_positivity(densities: &[f64], n: usize, step: usize) -> Result<()> {
    const EPS_POS: f64 = -1e-8;
    if let Some(idx) = densities.iter().position(|d| *d < EPS_POS) {
        return Err(Error::Positivity {
            step,
            compartment: idx / n,
            value: densities[idx],
        });
    }
    Ok(())
}

/// Output of a time integration.
#[derive(Debug, Clone)]
pub struct Trajectory<S> {
    /// Requested output times that were reached, in increasing order.
    pub times: Vec<f64>,
    /// States at `times`.
    pub snapshots: Vec<S>,
    pub final_state: S,
    pub final_time: f64,
    pub steps: usize,
}

/// Marches `state` to `t_end` with nominal step `dt`, shortening steps to hit
/// each output time and the final time exactly. The first step is at most
/// `first`.
pub(crate) fn march<S: Clone>(
    state: &S,
    t_end: f64,
    dt: f64,
    first: f64,
    output_times: &[f64],
    mut step: impl FnMut(&mut S, f64, f64, usize) -> Result<()>,
) -> Result<Trajectory<S>> {
    if !(t_end > 0.0 && t_end.is_finite()) {
        return Err(Error::Config(format!("final time must be positive, got {t_end}")));
    }
    if !(dt > 0.0 && first > 0.0) {
        return Err(Error::Config(format!("time step must be positive, got {dt}")));
    }
    let mut stops: Vec<f64> = output_times
        .iter()
        .copied()
        .filter(|&t| t > 0.0 && t <= t_end)
        .collect();
    stops.sort_by(f64::total_cmp);
    stops.dedup();
    let mut targets = stops.clone();
    if targets.last() != Some(&t_end) {
        targets.push(t_end);
    }

    let mut cur = state.clone();
    let mut t = 0.0;
    let mut steps = 0;
    let mut snapshots = Vec::with_capacity(stops.len());
    let mut times = Vec::with_capacity(stops.len());
    for target in targets {
        while t < target {
            let remaining = target - t;
            let nominal = if steps == 0 { dt.min(first) } else { dt };
            let (h, lands) = if remaining <= nominal * (1.0 + 1e-10) {
                (remaining, true)
            } else {
                (nominal, false)
            };
            step(&mut cur, t, h, steps).map_err(|e| e.at_step(steps))?;
            steps += 1;
            t = if lands { target } else { t + h };
        }
        if stops.contains(&target) {
            times.push(target);
            snapshots.push(cur.clone());
        }
    }
    Ok(Trajectory {
        times,
        snapshots,
        final_state: cur,
        final_time: t,
        steps,
    })
}
