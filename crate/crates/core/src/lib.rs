//! Asymptotic-preserving solvers for kinetic and two-velocity epidemic
//! transport models, and a bi-fidelity stochastic collocation toolkit built
//! on top of them.

pub mod bifi;
pub mod diffusion;
pub mod epi;
pub mod error;
pub mod grid;
pub mod hf;
pub mod imex;
pub mod lf;
pub mod quadrature;
pub mod state;
pub mod transport;
pub mod uq;

pub use bifi::{
    bifi_eval, bifi_stats, greedy_select, project_coefficients, relative_l2_error, BiFiBasis,
    SnapshotSet, StdEstimator,
};
pub use diffusion::{diffusion_step, DiffusionSolver, Laplacian};
pub use epi::{
    incidence, reproduction_number_seiar, reproduction_number_sir, Compartment, CompartmentSet,
    EpidemicParameters, Field, SeiarParameters,
};
pub use error::{Error, Result};
pub use grid::{minmod, reconstruct, Grid1D};
pub use hf::{hf_step, kinetic_init, moments, HighFidelitySolver, VelocityProfile};
pub use imex::{compute_dt, gsa_check, imex_advance, ImexStepper, ImexSystem, ImexTableau};
pub use lf::{lf_run, lf_step, LowFidelitySolver};
pub use quadrature::VelocityQuadrature;
pub use state::{KineticState, MacroState};
pub use transport::{Fidelity, Trajectory, TransportConfig};
pub use uq::{
    cc_sparse_grid, estimate_stats, read_samples_csv, uniform_candidates, write_samples_csv,
    QuadratureRule, RandomDomain, StatField,
};
