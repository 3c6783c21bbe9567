//! Compartments, coefficient fields, incidence and reproduction numbers.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::Grid1D;
use crate::state::MacroState;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Compartment {
    S,
    E,
    I,
    A,
    R,
}

impl Compartment {
    pub fn label(self) -> &'static str {
        match self {
            Compartment::S => "S",
            Compartment::E => "E",
            Compartment::I => "I",
            Compartment::A => "A",
            Compartment::R => "R",
        }
    }
}

impl fmt::Display for Compartment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CompartmentSet {
    Sir,
    Seiar,
}

const SIR: [Compartment; 3] = [Compartment::S, Compartment::I, Compartment::R];
const SEIAR: [Compartment; 5] = [
    Compartment::S,
    Compartment::E,
    Compartment::I,
    Compartment::A,
    Compartment::R,
];

impl CompartmentSet {
    pub fn members(self) -> &'static [Compartment] {
        match self {
            CompartmentSet::Sir => &SIR,
            CompartmentSet::Seiar => &SEIAR,
        }
    }

    pub fn len(self) -> usize {
        self.members().len()
    }

    pub fn is_empty(self) -> bool {
        false
    }

    pub fn index_of(self, c: Compartment) -> Option<usize> {
        self.members().iter().position(|&m| m == c)
    }

    pub fn labels(self) -> Vec<&'static str> {
        self.members().iter().map(|c| c.label()).collect()
    }
}

impl std::str::FromStr for CompartmentSet {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "sir" => Ok(CompartmentSet::Sir),
            "seiar" => Ok(CompartmentSet::Seiar),
            other => Err(Error::Parse(format!("unknown compartment set '{other}'"))),
        }
    }
}

/// Signature of an evaluable coefficient: `(x, z, t) -> value`.
pub type FieldFn = dyn Fn(f64, &[f64], f64) -> f64 + Send + Sync;

/// A scalar coefficient depending on position, random input and time.
#[derive(Clone)]
pub enum Field {
    Constant(f64),
    Function(Arc<FieldFn>),
}

impl Field {
    pub fn constant(value: f64) -> Self {
        Field::Constant(value)
    }

    pub fn from_fn<F>(f: F) -> Self
    where
        F: Fn(f64, &[f64], f64) -> f64 + Send + Sync + 'static,
    {
        Field::Function(Arc::new(f))
    }

    pub fn eval(&self, x: f64, z: &[f64], t: f64) -> f64 {
        match self {
            Field::Constant(v) => *v,
            Field::Function(f) => f(x, z, t),
        }
    }

    pub fn sample(&self, grid: &Grid1D, z: &[f64], t: f64) -> Vec<f64> {
        grid.cell_centers()
            .iter()
            .map(|&x| self.eval(x, z, t))
            .collect()
    }

    fn sample_into(&self, grid: &Grid1D, z: &[f64], t: f64, out: &mut [f64]) {
        match self {
            Field::Constant(v) => out.fill(*v),
            Field::Function(f) => {
                for (o, &x) in out.iter_mut().zip(grid.cell_centers()) {
                    *o = f(x, z, t);
                }
            }
        }
    }
}

impl fmt::Debug for Field {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Field::Constant(v) => write!(f, "Constant({v})"),
            Field::Function(_) => f.write_str("Function(..)"),
        }
    }
}

impl From<f64> for Field {
    fn from(v: f64) -> Self {
        Field::Constant(v)
    }
}

/// Extra coefficients of the SEIAR model. `gamma` of the parent parameters
/// plays the role of the symptomatic recovery rate.
#[derive(Debug, Clone)]
pub struct SeiarParameters {
    pub beta_a: Field,
    pub kappa_a: Field,
    pub gamma_a: Field,
    pub a: Field,
    pub sigma: Field,
}

#[derive(Debug, Clone)]
pub struct EpidemicParameters {
    pub compartments: CompartmentSet,
    pub beta: Field,
    pub kappa: Field,
    pub p: f64,
    pub gamma: Field,
    pub seiar: Option<SeiarParameters>,
    /// Re-sample the fields at every stage when set.
    pub time_dependent: bool,
}

impl EpidemicParameters {
    pub fn sir(beta: Field, gamma: Field) -> Self {
        Self {
            compartments: CompartmentSet::Sir,
            beta,
            kappa: Field::Constant(0.0),
            p: 1.0,
            gamma,
            seiar: None,
            time_dependent: false,
        }
    }

    pub fn seiar(beta_i: Field, gamma_i: Field, extra: SeiarParameters) -> Self {
        Self {
            compartments: CompartmentSet::Seiar,
            beta: beta_i,
            kappa: Field::Constant(0.0),
            p: 1.0,
            gamma: gamma_i,
            seiar: Some(extra),
            time_dependent: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.p >= 1.0 && self.p.is_finite()) {
            return Err(Error::Config(format!("exponent p must be >= 1, got {}", self.p)));
        }
        match (self.compartments, &self.seiar) {
            (CompartmentSet::Sir, None) | (CompartmentSet::Seiar, Some(_)) => Ok(()),
            (CompartmentSet::Sir, Some(_)) => Err(Error::Config(
                "SEIAR coefficients supplied for an SIR model".into(),
            )),
            (CompartmentSet::Seiar, None) => {
                Err(Error::Config("SEIAR model requires SEIAR coefficients".into()))
            }
        }
    }
}

/// Incidence `beta * g * I^p / (1 + kappa * I)`.
pub fn incidence(g: f64, infectious: f64, beta: f64, kappa: f64, p: f64) -> Result<f64> {
    if infectious < 0.0 {
        return Err(Error::Domain(format!(
            "infectious density must be nonnegative, got {infectious}"
        )));
    }
    Ok(g * infection_rate(infectious, beta, kappa, p))
}

/// Per-capita infection rate `beta * I^p / (1 + kappa * I)`; zero for `I <= 0`.
#[inline]
pub(crate) fn infection_rate(infectious: f64, beta: f64, kappa: f64, p: f64) -> f64 {
    if infectious <= 0.0 {
        return 0.0;
    }
    let ip = if p == 1.0 { infectious } else { infectious.powf(p) };
    beta * ip / (1.0 + kappa * infectious)
}

/// Coefficient arrays sampled on the grid.
#[derive(Debug, Clone)]
pub(crate) struct SampledCoefficients {
    pub beta: Vec<f64>,
    pub kappa: Vec<f64>,
    pub gamma: Vec<f64>,
    pub beta_a: Vec<f64>,
    pub kappa_a: Vec<f64>,
    pub gamma_a: Vec<f64>,
    pub a: Vec<f64>,
    pub sigma: Vec<f64>,
}

impl SampledCoefficients {
    pub fn new(params: &EpidemicParameters, grid: &Grid1D, z: &[f64], t: f64) -> Result<Self> {
        params.validate()?;
        let n = grid.n_cells();
        let seiar_len = if params.seiar.is_some() { n } else { 0 };
        let mut out = Self {
            beta: vec![0.0; n],
            kappa: vec![0.0; n],
            gamma: vec![0.0; n],
            beta_a: vec![0.0; seiar_len],
            kappa_a: vec![0.0; seiar_len],
            gamma_a: vec![0.0; seiar_len],
            a: vec![0.0; seiar_len],
            sigma: vec![0.0; seiar_len],
        };
        out.resample(params, grid, z, t)?;
        Ok(out)
    }

    pub fn resample(
        &mut self,
        params: &EpidemicParameters,
        grid: &Grid1D,
        z: &[f64],
        t: f64,
    ) -> Result<()> {
        params.beta.sample_into(grid, z, t, &mut self.beta);
        params.kappa.sample_into(grid, z, t, &mut self.kappa);
        params.gamma.sample_into(grid, z, t, &mut self.gamma);
        check_nonnegative("beta", &self.beta)?;
        check_nonnegative("kappa", &self.kappa)?;
        check_nonnegative("gamma", &self.gamma)?;
        if let Some(s) = &params.seiar {
            s.beta_a.sample_into(grid, z, t, &mut self.beta_a);
            s.kappa_a.sample_into(grid, z, t, &mut self.kappa_a);
            s.gamma_a.sample_into(grid, z, t, &mut self.gamma_a);
            s.a.sample_into(grid, z, t, &mut self.a);
            s.sigma.sample_into(grid, z, t, &mut self.sigma);
            check_nonnegative("beta_A", &self.beta_a)?;
            check_nonnegative("kappa_A", &self.kappa_a)?;
            check_nonnegative("gamma_A", &self.gamma_a)?;
            check_nonnegative("a", &self.a)?;
            if let Some(bad) = self.sigma.iter().find(|s| !(0.0..=1.0).contains(*s)) {
                return Err(Error::Config(format!("sigma must lie in [0, 1], got {bad}")));
            }
        }
        Ok(())
    }
}

fn check_nonnegative(name: &str, values: &[f64]) -> Result<()> {
    match values.iter().find(|v| !(**v >= 0.0 && v.is_finite())) {
        Some(bad) => Err(Error::Config(format!(
            "coefficient {name} must be finite and nonnegative, got {bad}"
        ))),
        None => Ok(()),
    }
}

/// Transfer `from -> to` with a per-capita rate. Only infection rates depend
/// on the densities; the others are `linear`. Every network lists `from < to`,
/// so implicit solves over the linear part are triangular.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Transition {
    pub from: usize,
    pub to: usize,
    pub linear: bool,
}

/// Epidemic reactions written as a list of compartment transfers.
#[derive(Debug, Clone)]
pub(crate) struct ReactionNetwork {
    set: CompartmentSet,
    p: f64,
    transitions: Vec<Transition>,
    pub coeffs: SampledCoefficients,
}

impl ReactionNetwork {
    pub fn new(params: &EpidemicParameters, grid: &Grid1D, z: &[f64], t: f64) -> Result<Self> {
        let coeffs = SampledCoefficients::new(params, grid, z, t)?;
        let transitions = match params.compartments {
            // S -> I, I -> R
            CompartmentSet::Sir => vec![
                Transition { from: 0, to: 1, linear: false },
                Transition { from: 1, to: 2, linear: true },
            ],
            // S -> E, E -> I, E -> A, I -> R, A -> R
            CompartmentSet::Seiar => vec![
                Transition { from: 0, to: 1, linear: false },
                Transition { from: 1, to: 2, linear: true },
                Transition { from: 1, to: 3, linear: true },
                Transition { from: 2, to: 4, linear: true },
                Transition { from: 3, to: 4, linear: true },
            ],
        };
        Ok(Self {
            set: params.compartments,
            p: params.p,
            transitions,
            coeffs,
        })
    }

    pub fn transitions(&self) -> &[Transition] {
        &self.transitions
    }

    /// Per-capita rates of every transition, laid out transition-major.
    /// `densities` is compartment-major.
    pub fn rates(&self, densities: &[f64], n: usize, rates: &mut [f64]) {
        let c = &self.coeffs;
        match self.set {
            CompartmentSet::Sir => {
                let infected = &densities[n..2 * n];
                let (inf, rec) = rates.split_at_mut(n);
                for i in 0..n {
                    inf[i] = infection_rate(infected[i], c.beta[i], c.kappa[i], self.p);
                    rec[i] = c.gamma[i];
                }
            }
            CompartmentSet::Seiar => {
                let infected = &densities[2 * n..3 * n];
                let asympt = &densities[3 * n..4 * n];
                for i in 0..n {
                    rates[i] = infection_rate(infected[i], c.beta[i], c.kappa[i], self.p)
                        + infection_rate(asympt[i], c.beta_a[i], c.kappa_a[i], self.p);
                    rates[n + i] = c.a[i] * c.sigma[i];
                    rates[2 * n + i] = c.a[i] * (1.0 - c.sigma[i]);
                    rates[3 * n + i] = c.gamma[i];
                    rates[4 * n + i] = c.gamma_a[i];
                }
            }
        }
    }
}

fn integral_of<F: Fn(usize) -> f64>(n: usize, dx: f64, f: F) -> f64 {
    (0..n).map(f).sum::<f64>() * dx
}

/// Space-integrated ratio of new infections to removals for the SIR model.
pub fn reproduction_number_sir(
    state: &MacroState,
    params: &EpidemicParameters,
    grid: &Grid1D,
    z: &[f64],
    t: f64,
) -> Result<f64> {
    if state.compartments() != CompartmentSet::Sir {
        return Err(Error::Config("SIR reproduction number needs an SIR state".into()));
    }
    state.check_grid(grid)?;
    let coeffs = SampledCoefficients::new(params, grid, z, t)?;
    let (s, i) = (state.density(0), state.density(1));
    check_infectious(i)?;
    let n = grid.n_cells();
    let dx = grid.dx();
    let new_inf = integral_of(n, dx, |k| {
        s[k] * infection_rate(i[k], coeffs.beta[k], coeffs.kappa[k], params.p)
    });
    let removals = integral_of(n, dx, |k| coeffs.gamma[k] * i[k]);
    if removals == 0.0 {
        return Err(Error::UndefinedR0("removal integral is zero".into()));
    }
    Ok(new_inf / removals)
}

/// Reproduction number of the SEIAR model, weighting the symptomatic and
/// asymptomatic branches by the fraction of exposed entering each.
pub fn reproduction_number_seiar(
    state: &MacroState,
    params: &EpidemicParameters,
    grid: &Grid1D,
    z: &[f64],
    t: f64,
) -> Result<f64> {
    if state.compartments() != CompartmentSet::Seiar {
        return Err(Error::Config(
            "SEIAR reproduction number needs an SEIAR state".into(),
        ));
    }
    state.check_grid(grid)?;
    let c = SampledCoefficients::new(params, grid, z, t)?;
    let (s, e, i, a) = (
        state.density(0),
        state.density(1),
        state.density(2),
        state.density(3),
    );
    check_infectious(i)?;
    check_infectious(a)?;
    let n = grid.n_cells();
    let dx = grid.dx();
    let p = params.p;

    let exposed_out = integral_of(n, dx, |k| c.a[k] * e[k]);
    if exposed_out == 0.0 {
        return Err(Error::UndefinedR0("latency outflow integral is zero".into()));
    }
    let frac_i = integral_of(n, dx, |k| c.a[k] * c.sigma[k] * e[k]) / exposed_out;
    let frac_a = integral_of(n, dx, |k| c.a[k] * (1.0 - c.sigma[k]) * e[k]) / exposed_out;

    // a branch that receives nobody contributes nothing, so its ratio is not needed
    let branch = |frac: f64, num: f64, den: f64, name: &str| -> Result<f64> {
        if frac == 0.0 {
            return Ok(0.0);
        }
        if den == 0.0 {
            return Err(Error::UndefinedR0(format!("{name} removal integral is zero")));
        }
        Ok(num / den * frac)
    };
    let term_i = branch(
        frac_i,
        integral_of(n, dx, |k| s[k] * infection_rate(i[k], c.beta[k], c.kappa[k], p)),
        integral_of(n, dx, |k| c.gamma[k] * i[k]),
        "symptomatic",
    )?;
    let term_a = branch(
        frac_a,
        integral_of(n, dx, |k| {
            s[k] * infection_rate(a[k], c.beta_a[k], c.kappa_a[k], p)
        }),
        integral_of(n, dx, |k| c.gamma_a[k] * a[k]),
        "asymptomatic",
    )?;
    Ok(term_i + term_a)
}

fn check_infectious(values: &[f64]) -> Result<()> {
    if let Some(v) = values.iter().find(|v| **v < 0.0) {
        return Err(Error::Domain(format!("negative infectious density {v}")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    #[test]
    fn incidence_examples() {
        assert_relative_eq!(incidence(1.0, 0.01, 11.0, 0.0, 1.0).unwrap(), 0.11, epsilon = 1e-15);
        assert_eq!(incidence(3.7, 0.0, 2.0, 0.5, 2.0).unwrap(), 0.0);
        assert_relative_eq!(incidence(1.0, 1.0, 1.0, 1.0, 1.0).unwrap(), 0.5);
        assert!(matches!(incidence(1.0, -0.1, 1.0, 0.0, 1.0), Err(Error::Domain(_))));
    }

    fn uniform_state(set: CompartmentSet, n: usize, values: &[f64]) -> MacroState {
        let d = values.iter().map(|&v| vec![v; n]).collect();
        MacroState::from_densities(set, d).unwrap()
    }

    #[test]
    fn r0_sir_constants_cancel() {
        let g = Grid1D::new(20.0, 40).unwrap();
        let st = uniform_state(CompartmentSet::Sir, 40, &[1.0, 0.3, 0.0]);
        let p = EpidemicParameters::sir(Field::Constant(2.5), Field::Constant(5.0));
        let r0 = reproduction_number_sir(&st, &p, &g, &[], 0.0).unwrap();
        assert_relative_eq!(r0, 0.5, epsilon = 1e-14);
    }

    #[test]
    fn r0_sir_sinusoidal_contact_rate() {
        let g = Grid1D::new(20.0, 150).unwrap();
        let st = uniform_state(CompartmentSet::Sir, 150, &[1.0, 0.2, 0.0]);
        let beta = Field::from_fn(|x, _, _| 11.0 * (1.0 + 0.05 * (13.0 * PI * x / 20.0).sin()));
        let p = EpidemicParameters::sir(beta, Field::Constant(10.0));
        let r0 = reproduction_number_sir(&st, &p, &g, &[0.0, 0.0], 0.0).unwrap();
        // mean of sin(13 pi x / 20) over [0, 20] is (1 - cos 13 pi) / (13 pi) = 2 / (13 pi)
        let exact = 1.1 * (1.0 + 0.05 * 2.0 / (13.0 * PI));
        assert_relative_eq!(r0, exact, max_relative = 1e-3);
        assert!((r0 - 1.1027).abs() < 1e-3);
    }

    #[test]
    fn r0_sir_undefined_without_infectious() {
        let g = Grid1D::new(1.0, 10).unwrap();
        let st = uniform_state(CompartmentSet::Sir, 10, &[1.0, 0.0, 0.0]);
        let p = EpidemicParameters::sir(Field::Constant(1.0), Field::Constant(1.0));
        assert!(matches!(
            reproduction_number_sir(&st, &p, &g, &[], 0.0),
            Err(Error::UndefinedR0(_))
        ));
    }

    fn seiar_params(beta_i: f64, beta_a: f64, gi: f64, ga: f64, sigma: f64) -> EpidemicParameters {
        EpidemicParameters::seiar(
            Field::Constant(beta_i),
            Field::Constant(gi),
            SeiarParameters {
                beta_a: Field::Constant(beta_a),
                kappa_a: Field::Constant(0.0),
                gamma_a: Field::Constant(ga),
                a: Field::Constant(1.0 / 3.0),
                sigma: Field::Constant(sigma),
            },
        )
    }

    #[test]
    fn r0_seiar_constants_cancel() {
        let g = Grid1D::new(20.0, 30).unwrap();
        let st = uniform_state(CompartmentSet::Seiar, 30, &[1.0, 0.01, 0.02, 0.05, 0.0]);
        let p = seiar_params(0.015, 0.5, 1.0 / 14.0, 1.0 / 7.0, 0.08);
        let r0 = reproduction_number_seiar(&st, &p, &g, &[], 0.0).unwrap();
        let exact = 0.08 * 0.015 * 14.0 + 0.92 * 0.5 * 7.0;
        assert_relative_eq!(r0, exact, max_relative = 1e-13);
    }

    #[test]
    fn r0_seiar_sigma_one_ignores_asymptomatic_branch() {
        let g = Grid1D::new(20.0, 30).unwrap();
        let st = uniform_state(CompartmentSet::Seiar, 30, &[1.0, 0.01, 0.02, 0.0, 0.0]);
        let p = seiar_params(0.2, 0.5, 0.1, 1.0 / 7.0, 1.0);
        let r0 = reproduction_number_seiar(&st, &p, &g, &[], 0.0).unwrap();
        assert_relative_eq!(r0, 2.0, max_relative = 1e-13);
    }

    #[test]
    fn invalid_coefficients_rejected() {
        let g = Grid1D::new(1.0, 5).unwrap();
        let p = EpidemicParameters::sir(Field::Constant(-1.0), Field::Constant(1.0));
        assert!(SampledCoefficients::new(&p, &g, &[], 0.0).is_err());
        let p = seiar_params(0.1, 0.1, 0.1, 0.1, 1.5);
        assert!(SampledCoefficients::new(&p, &g, &[], 0.0).is_err());
    }

    proptest! {
        #[test]
        fn incidence_monotone(g in 0.0f64..2.0, dg in 0.0f64..1.0, i in 0.0f64..1.0,
                              beta in 0.0f64..20.0, db in 0.0f64..5.0,
                              kappa in 0.0f64..3.0, p in 1.0f64..3.0) {
            let base = incidence(g, i, beta, kappa, p).unwrap();
            prop_assert!(incidence(g + dg, i, beta, kappa, p).unwrap() >= base);
            prop_assert!(incidence(g, i, beta + db, kappa, p).unwrap() >= base);
        }

        #[test]
        fn r0_invariant_under_rescaling(scale in 0.01f64..100.0, seed in prop::collection::vec(0.01f64..1.0, 12)) {
            let g = Grid1D::new(20.0, 12).unwrap();
            let s: Vec<f64> = seed.iter().map(|v| 1.0 - 0.5 * v).collect();
            let beta = Field::from_fn(|x, _, _| 1.0 + 0.5 * (x / 3.0).sin());
            let gamma = Field::from_fn(|x, _, _| 0.5 + 0.1 * x);
            let p = EpidemicParameters::sir(beta, gamma);
            let st1 = MacroState::from_densities(CompartmentSet::Sir, vec![s.clone(), seed.clone(), vec![0.0; 12]]).unwrap();
            let scaled: Vec<f64> = seed.iter().map(|v| v * scale).collect();
            let st2 = MacroState::from_densities(CompartmentSet::Sir, vec![s, scaled, vec![0.0; 12]]).unwrap();
            let a = reproduction_number_sir(&st1, &p, &g, &[], 0.0).unwrap();
            let b = reproduction_number_sir(&st2, &p, &g, &[], 0.0).unwrap();
            prop_assert!((a - b).abs() <= 1e-12 * a.abs());
        }
    }
}
