//! Test scenarios: a periodic SIR outbreak with a spatially varying contact
//! rate, and an SEIAR outbreak seeded in three cities.

use std::f64::consts::PI;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use bifi_core::{
    CompartmentSet, EpidemicParameters, Field, Fidelity, Grid1D, ImexTableau, MacroState,
    RandomDomain, SeiarParameters, TransportConfig,
};

use crate::error::{ExpError, ExpResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    A,
    B,
}

/// Named scenario accepted by `bifi run`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScenarioName {
    Test1a,
    Test1b,
    Test2a,
    Test2b,
    Custom,
}

impl FromStr for ScenarioName {
    type Err = ExpError;

    fn from_str(s: &str) -> ExpResult<Self> {
        match s.to_ascii_lowercase().as_str() {
            "test1a" => Ok(Self::Test1a),
            "test1b" => Ok(Self::Test1b),
            "test2a" => Ok(Self::Test2a),
            "test2b" => Ok(Self::Test2b),
            "custom" => Ok(Self::Custom),
            other => Err(ExpError::Config(format!("unknown scenario '{other}'"))),
        }
    }
}

impl fmt::Display for ScenarioName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Self::Test1a => "test1a",
            Self::Test1b => "test1b",
            Self::Test2a => "test2a",
            Self::Test2b => "test2b",
            Self::Custom => "custom",
        };
        f.write_str(s)
    }
}

/// SIR outbreak on a ring seeded with a Gaussian of infected, contact rate
/// `beta0 (1 + beta_z z1) (1 + beta_amp sin(beta_freq pi x / L))`.
#[derive(Debug, Clone, PartialEq)]
pub struct SirModel {
    pub beta0: f64,
    pub beta_z: f64,
    pub beta_amp: f64,
    pub beta_freq: f64,
    pub gamma0: f64,
    pub gamma_z: f64,
    pub infected_amp: f64,
    pub infected_center: f64,
    pub infected_width: f64,
}

impl Default for SirModel {
    fn default() -> Self {
        Self {
            beta0: 11.0,
            beta_z: 0.6,
            beta_amp: 0.05,
            beta_freq: 13.0,
            gamma0: 10.0,
            gamma_z: 0.4,
            infected_amp: 0.01,
            infected_center: 10.0,
            infected_width: 1.0,
        }
    }
}

/// SEIAR outbreak seeded with exposed individuals around three city centers.
#[derive(Debug, Clone, PartialEq)]
pub struct SeiarModel {
    pub cities: [f64; 3],
    pub exposed_amp: [f64; 3],
    pub hotspot: [f64; 3],
    pub beta_a0: f64,
    pub beta_a_z: f64,
    pub beta_ripple: f64,
    pub beta_i_ratio: f64,
    pub gamma_i: f64,
    pub gamma_a: f64,
    pub a: f64,
    pub sigma: f64,
}

impl Default for SeiarModel {
    fn default() -> Self {
        Self {
            cities: [10.0 / 3.0, 10.0, 50.0 / 3.0],
            exposed_amp: [0.01, 0.001, 0.004],
            hotspot: [0.5, 0.25, 0.5],
            beta_a0: 0.5,
            beta_a_z: 0.5,
            beta_ripple: 0.05,
            beta_i_ratio: 0.03,
            gamma_i: 1.0 / 14.0,
            gamma_a: 1.0 / 7.0,
            a: 1.0 / 3.0,
            sigma: 1.0 / 12.5,
        }
    }
}

impl SeiarModel {
    /// Contact rate of the asymptomatic class at `x` for the sample `z`.
    pub fn beta_a(&self, x: f64, z: &[f64]) -> f64 {
        let bumps: f64 = self
            .cities
            .iter()
            .zip(&self.hotspot)
            .map(|(c, h)| h * (-(x - c) * (x - c)).exp())
            .sum();
        self.beta_a0 * (1.0 + self.beta_a_z * z[1]) * (1.0 + bumps)
            + self.beta_ripple * (2.0 * PI * x).sin()
    }

    pub fn exposed(&self, x: f64, z: &[f64]) -> f64 {
        self.cities
            .iter()
            .zip(&self.exposed_amp)
            .map(|(c, amp)| amp * (1.0 + z[0]) * (-(x - c) * (x - c)).exp())
            .sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Sir(SirModel),
    Seiar(SeiarModel),
}

impl Model {
    pub fn compartments(&self) -> CompartmentSet {
        match self {
            Model::Sir(_) => CompartmentSet::Sir,
            Model::Seiar(_) => CompartmentSet::Seiar,
        }
    }
}

/// Everything needed to run one bi-fidelity experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub name: String,
    pub model: Model,
    pub length: f64,
    pub nx: usize,
    pub nv: usize,
    /// Characteristic speed per compartment.
    pub lambda: Vec<f64>,
    /// Low-fidelity relaxation time per compartment.
    pub tau_lf: Vec<f64>,
    /// High-fidelity relaxation time per compartment.
    pub tau_hf: Vec<f64>,
    /// Ties the kinetic relaxation times to `3 tau_lf` so both models share
    /// the same diffusion limit.
    pub consistent: bool,
    pub domain: RandomDomain,
    pub cc_level: u32,
    pub candidates: usize,
    pub n_select: usize,
    pub t_end: f64,
    pub seed: u64,
    pub tableau: String,
    pub out_dir: PathBuf,
}

impl ScenarioConfig {
    pub fn build(name: ScenarioName) -> ExpResult<Self> {
        match name {
            ScenarioName::Test1a => Ok(build_test1(Variant::A)),
            ScenarioName::Test1b => Ok(build_test1(Variant::B)),
            ScenarioName::Test2a => Ok(build_test2(Variant::A)),
            ScenarioName::Test2b => Ok(build_test2(Variant::B)),
            ScenarioName::Custom => Err(ExpError::Config(
                "custom scenarios need a config file with a 'base' key".into(),
            )),
        }
    }

    pub fn compartments(&self) -> CompartmentSet {
        self.model.compartments()
    }

    pub fn grid(&self) -> ExpResult<Grid1D> {
        Ok(Grid1D::new(self.length, self.nx)?)
    }

    pub fn imex(&self) -> ExpResult<ImexTableau> {
        Ok(ImexTableau::by_name(&self.tableau)?)
    }

    /// Applies the consistency rule and checks shapes.
    pub fn validate(&mut self) -> ExpResult<()> {
        let nc = self.compartments().len();
        for (what, v) in [("lambda", &self.lambda), ("tau_lf", &self.tau_lf), ("tau_hf", &self.tau_hf)] {
            if v.len() != nc {
                return Err(ExpError::Config(format!(
                    "{what} has {} entries, the model has {nc} compartments",
                    v.len()
                )));
            }
        }
        if self.consistent {
            self.tau_hf = self.tau_lf.iter().map(|t| 3.0 * t).collect();
        }
        if self.nv == 0 || self.nv % 2 != 0 {
            return Err(ExpError::Config(format!("nv must be even and positive, got {}", self.nv)));
        }
        if self.domain.dim() != 2 {
            return Err(ExpError::Config("scenarios use a two-dimensional random vector".into()));
        }
        if !(self.t_end > 0.0) {
            return Err(ExpError::Config(format!("t_end must be positive, got {}", self.t_end)));
        }
        self.transport(Fidelity::Low)?;
        self.transport(Fidelity::High)?;
        self.params().validate()?;
        Ok(())
    }

    pub fn transport(&self, fidelity: Fidelity) -> ExpResult<TransportConfig> {
        let tau = match fidelity {
            Fidelity::Low => self.tau_lf.clone(),
            Fidelity::High => self.tau_hf.clone(),
        };
        Ok(TransportConfig::new(self.lambda.clone(), tau, fidelity)?)
    }

    /// Diffusion coefficients of the shared limit, taken from the
    /// low-fidelity transport.
    pub fn diffusivities(&self) -> ExpResult<Vec<f64>> {
        Ok(self.transport(Fidelity::Low)?.diffusivities())
    }

    pub fn params(&self) -> EpidemicParameters {
        match &self.model {
            Model::Sir(m) => {
                let (m1, m2) = (m.clone(), m.clone());
                let length = self.length;
                EpidemicParameters::sir(
                    Field::from_fn(move |x, z, _| {
                        m1.beta0
                            * (1.0 + m1.beta_z * z[0])
                            * (1.0 + m1.beta_amp * (m1.beta_freq * PI * x / length).sin())
                    }),
                    Field::from_fn(move |_, z, _| m2.gamma0 * (1.0 + m2.gamma_z * z[1])),
                )
            }
            Model::Seiar(m) => {
                let (m1, m2) = (m.clone(), m.clone());
                EpidemicParameters::seiar(
                    Field::from_fn(move |x, z, _| m1.beta_i_ratio * m1.beta_a(x, z)),
                    Field::Constant(m.gamma_i),
                    SeiarParameters {
                        beta_a: Field::from_fn(move |x, z, _| m2.beta_a(x, z)),
                        kappa_a: Field::Constant(0.0),
                        gamma_a: Field::Constant(m.gamma_a),
                        a: Field::Constant(m.a),
                        sigma: Field::Constant(m.sigma),
                    },
                )
            }
        }
    }

    /// Initial densities at sample `z`, with zero fluxes.
    pub fn initial_state(&self, grid: &Grid1D, z: &[f64]) -> ExpResult<MacroState> {
        let xs = grid.cell_centers();
        let n = xs.len();
        let state = match &self.model {
            Model::Sir(m) => {
                let i: Vec<f64> = xs
                    .iter()
                    .map(|&x| {
                        let r = (x - m.infected_center) / m.infected_width;
                        m.infected_amp * (-r * r).exp()
                    })
                    .collect();
                let s = i.iter().map(|v| 1.0 - v).collect();
                MacroState::from_densities(CompartmentSet::Sir, vec![s, i, vec![0.0; n]])?
            }
            Model::Seiar(m) => {
                let e: Vec<f64> = xs.iter().map(|&x| m.exposed(x, z)).collect();
                let s = e.iter().map(|v| 1.0 - v).collect();
                MacroState::from_densities(
                    CompartmentSet::Seiar,
                    vec![s, e, vec![0.0; n], vec![0.0; n], vec![0.0; n]],
                )?
            }
        };
        Ok(state)
    }
}

fn base(name: &str, model: Model, lambda: Vec<f64>, tau_lf: Vec<f64>, domain: RandomDomain, n: usize) -> ScenarioConfig {
    let tau_hf = tau_lf.iter().map(|t| 3.0 * t).collect();
    ScenarioConfig {
        name: name.into(),
        model,
        length: 20.0,
        nx: 150,
        nv: 8,
        lambda,
        tau_lf,
        tau_hf,
        consistent: true,
        domain,
        cc_level: 3,
        candidates: 1000,
        n_select: n,
        t_end: 5.0,
        seed: 20240601,
        tableau: "ars443".into(),
        out_dir: PathBuf::from("out").join(name),
    }
}

/// SIR scenario with `z ~ U(-1, 1)^2`: diffusive (`a`) or hyperbolic (`b`)
/// scaling.
pub fn build_test1(variant: Variant) -> ScenarioConfig {
    let domain = RandomDomain::cube(2, -1.0, 1.0).expect("valid box");
    let model = Model::Sir(SirModel::default());
    match variant {
        Variant::A => base("test1a", model, vec![1e5f64.sqrt(); 3], vec![1e-5; 3], domain, 8),
        Variant::B => base("test1b", model, vec![1.0; 3], vec![1.0; 3], domain, 14),
    }
}

/// SEIAR scenario with `z ~ U(0, 1)^2`; the symptomatic class does not move.
pub fn build_test2(variant: Variant) -> ScenarioConfig {
    let domain = RandomDomain::cube(2, 0.0, 1.0).expect("valid box");
    let model = Model::Seiar(SeiarModel::default());
    let speeds = |l2: f64| {
        let l = l2.sqrt();
        vec![l, l, 0.0, l, l]
    };
    match variant {
        Variant::A => base("test2a", model, speeds(10.0), vec![0.25; 5], domain, 6),
        Variant::B => base("test2b", model, speeds(1.0), vec![10.0; 5], domain, 7),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use bifi_core::compute_dt;

    #[test]
    fn time_steps() {
        for (v, expect) in [(Variant::A, 0.89e-2), (Variant::B, 0.12)] {
            let c = build_test1(v);
            let t = c.transport(Fidelity::Low).unwrap();
            let dt = compute_dt(&c.grid().unwrap(), t.lambda_max(), t.d_max()).unwrap();
            assert!((dt / expect - 1.0).abs() < 0.01, "{dt}");
        }
    }

    #[test]
    fn shared_diffusion_limit() {
        for mut c in [build_test1(Variant::A), build_test2(Variant::A), build_test2(Variant::B)] {
            c.validate().unwrap();
            let lf = c.transport(Fidelity::Low).unwrap().diffusivities();
            let hf = c.transport(Fidelity::High).unwrap().diffusivities();
            for (a, b) in lf.iter().zip(&hf) {
                assert!((a - b).abs() <= 1e-12 * a.max(1.0));
            }
        }
        let c = build_test1(Variant::A);
        assert!((c.diffusivities().unwrap()[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn city_seeding() {
        let m = SeiarModel::default();
        let e = m.exposed(10.0 / 3.0, &[0.0, 0.0]);
        assert!((e - 0.01).abs() < 1e-15);
        assert!((0.0..=1.0).contains(&m.sigma));
    }

    #[test]
    fn initial_state_has_unit_population_density() {
        let c = build_test2(Variant::A);
        let g = c.grid().unwrap();
        let s = c.initial_state(&g, &[0.3, 0.7]).unwrap();
        for v in s.total_density() {
            assert!((v - 1.0).abs() < 1e-15);
        }
        assert!(s.fluxes().iter().all(|j| *j == 0.0));
    }
}
