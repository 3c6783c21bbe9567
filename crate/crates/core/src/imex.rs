//! Implicit-explicit Runge-Kutta tableaux and the generic stage loop.

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::grid::Grid1D;

/// Double Butcher tableau. Row `k` of `a_impl` may be nonzero up to and
/// including the diagonal; `a_expl` is strictly lower triangular.
#[derive(Debug, Clone, PartialEq)]
pub struct ImexTableau {
    pub name: String,
    pub s: usize,
    pub a_impl: Vec<Vec<f64>>,
    pub a_expl: Vec<Vec<f64>>,
    pub b_impl: Vec<f64>,
    pub b_expl: Vec<f64>,
    pub order: u32,
}

impl ImexTableau {
    /// Builds a tableau from possibly ragged lower-triangular rows.
    pub fn new(
        name: impl Into<String>,
        a_impl: Vec<Vec<f64>>,
        a_expl: Vec<Vec<f64>>,
        b_impl: Vec<f64>,
        b_expl: Vec<f64>,
        order: u32,
    ) -> Result<Self> {
        let s = b_impl.len();
        let pad = |rows: Vec<Vec<f64>>, what: &str| -> Result<Vec<Vec<f64>>> {
            if rows.len() != s {
                return Err(Error::Config(format!(
                    "{what} has {} rows, expected {s}",
                    rows.len()
                )));
            }
            rows.into_iter()
                .map(|mut r| {
                    if r.len() > s {
                        return Err(Error::Config(format!("{what} row longer than {s}")));
                    }
                    r.resize(s, 0.0);
                    Ok(r)
                })
                .collect()
        };
        let tab = Self {
            name: name.into(),
            s,
            a_impl: pad(a_impl, "implicit matrix")?,
            a_expl: pad(a_expl, "explicit matrix")?,
            b_impl,
            b_expl,
            order,
        };
        tab.validate()?;
        Ok(tab)
    }

    /// Four-stage pair with an explicit first stage: implicit part with
    /// diagonal 1/2, order three.
    pub fn ars443() -> Self {
        let h = 0.5;
        Self::new(
            "ARS(4,4,3)",
            vec![
                vec![0.0],
                vec![0.0, h],
                vec![0.0, 1.0 / 6.0, h],
                vec![0.0, -0.5, 0.5, h],
                vec![0.0, 1.5, -1.5, 0.5, h],
            ],
            vec![
                vec![],
                vec![0.5],
                vec![11.0 / 18.0, 1.0 / 18.0],
                vec![5.0 / 6.0, -5.0 / 6.0, 0.5],
                vec![0.25, 1.75, 0.75, -1.75],
            ],
            vec![0.0, 1.5, -1.5, 0.5, 0.5],
            vec![0.25, 1.75, 0.75, -1.75, 0.0],
            3,
        )
        .expect("built-in tableau is well formed")
    }

    /// Two-stage L-stable pair, order two.
    pub fn ars222() -> Self {
        let g = 1.0 - std::f64::consts::FRAC_1_SQRT_2;
        let d = 1.0 - 1.0 / (2.0 * g);
        Self::new(
            "ARS(2,2,2)",
            vec![vec![0.0], vec![0.0, g], vec![0.0, 1.0 - g, g]],
            vec![vec![], vec![g], vec![d, 1.0 - d]],
            vec![0.0, 1.0 - g, g],
            vec![d, 1.0 - d, 0.0],
            2,
        )
        .expect("built-in tableau is well formed")
    }

    /// Implicit Euler paired with explicit Euler.
    pub fn euler() -> Self {
        Self::new("Euler", vec![vec![1.0]], vec![vec![]], vec![1.0], vec![1.0], 1)
            .expect("built-in tableau is well formed")
    }

    /// Looks up a built-in tableau by name (case-insensitive).
    pub fn by_name(name: &str) -> Result<Self> {
        match name.to_ascii_lowercase().replace([' ', '(', ')', ','], "").as_str() {
            "ars443" => Ok(Self::ars443()),
            "ars222" => Ok(Self::ars222()),
            "euler" => Ok(Self::euler()),
            other => Err(Error::Config(format!("unknown tableau '{other}'"))),
        }
    }

    /// Parses a TOML block:
    ///
    /// ```toml
    /// name = "custom"
    /// order = 1
    /// a_impl = [["1"]]
    /// a_expl = [[]]
    /// b_impl = ["1"]
    /// b_expl = ["1"]
    /// ```
    ///
    /// Entries may be TOML numbers or strings holding decimals or `p/q`
    /// rationals.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Entry {
            Num(f64),
            Text(String),
        }
        #[derive(Deserialize)]
        struct Raw {
            name: Option<String>,
            order: u32,
            a_impl: Vec<Vec<Entry>>,
            a_expl: Vec<Vec<Entry>>,
            b_impl: Vec<Entry>,
            b_expl: Vec<Entry>,
        }
        let raw: Raw = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        let value = |e: &Entry| match e {
            Entry::Num(v) => Ok(*v),
            Entry::Text(s) => parse_rational(s),
        };
        let vector = |v: &[Entry]| v.iter().map(value).collect::<Result<Vec<_>>>();
        let matrix = |m: &[Vec<Entry>]| m.iter().map(|r| vector(r)).collect::<Result<Vec<_>>>();
        Self::new(
            raw.name.unwrap_or_else(|| "custom".into()),
            matrix(&raw.a_impl)?,
            matrix(&raw.a_expl)?,
            vector(&raw.b_impl)?,
            vector(&raw.b_expl)?,
            raw.order,
        )
    }

    pub fn validate(&self) -> Result<()> {
        let s = self.s;
        if s == 0 {
            return Err(Error::Config("tableau needs at least one stage".into()));
        }
        if self.b_expl.len() != s || self.b_impl.len() != s {
            return Err(Error::Config("weight vectors must have length s".into()));
        }
        for (name, m) in [("implicit", &self.a_impl), ("explicit", &self.a_expl)] {
            if m.len() != s || m.iter().any(|r| r.len() != s) {
                return Err(Error::Config(format!("{name} matrix must be {s}x{s}")));
            }
        }
        for k in 0..s {
            for j in 0..s {
                if j > k && self.a_impl[k][j] != 0.0 {
                    return Err(Error::Config(format!(
                        "implicit matrix not lower triangular at ({k}, {j})"
                    )));
                }
                if j >= k && self.a_expl[k][j] != 0.0 {
                    return Err(Error::Config(format!(
                        "explicit matrix not strictly lower triangular at ({k}, {j})"
                    )));
                }
            }
        }
        let all = self
            .a_impl
            .iter()
            .chain(&self.a_expl)
            .flatten()
            .chain(&self.b_impl)
            .chain(&self.b_expl);
        if all.into_iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("tableau entries must be finite".into()));
        }
        Ok(())
    }

    /// Abscissae of the implicit part.
    pub fn c_impl(&self) -> Vec<f64> {
        self.a_impl.iter().map(|r| r.iter().sum()).collect()
    }

    /// Abscissae of the explicit part.
    pub fn c_expl(&self) -> Vec<f64> {
        self.a_expl.iter().map(|r| r.iter().sum()).collect()
    }

    /// Whether both weight vectors sum to one.
    pub fn is_consistent(&self, tol: f64) -> bool {
        (self.b_impl.iter().sum::<f64>() - 1.0).abs() <= tol
            && (self.b_expl.iter().sum::<f64>() - 1.0).abs() <= tol
    }
}

/// Parses `"p/q"`, `"-p/q"` or a plain decimal.
pub fn parse_rational(text: &str) -> Result<f64> {
    let t = text.trim();
    let bad = || Error::Parse(format!("invalid number '{text}'"));
    match t.split_once('/') {
        Some((num, den)) => {
            let n: f64 = num.trim().parse().map_err(|_| bad())?;
            let d: f64 = den.trim().parse().map_err(|_| bad())?;
            if d == 0.0 {
                return Err(bad());
            }
            Ok(n / d)
        }
        None => t.parse().map_err(|_| bad()),
    }
}

/// Globally-stiffly-accurate check: the last implicit row equals `b_impl`
/// and the last explicit row equals `b_expl` in its first `s-1` entries.
pub fn gsa_check(tab: &ImexTableau) -> Result<bool> {
    tab.validate()?;
    let s = tab.s;
    let last_impl = &tab.a_impl[s - 1];
    let last_expl = &tab.a_expl[s - 1];
    let same = |a: f64, b: f64| (a - b).abs() <= 1e-14 * (1.0 + b.abs());
    let impl_ok = (0..s).all(|j| same(last_impl[j], tab.b_impl[j]));
    let expl_ok = (0..s - 1).all(|j| same(last_expl[j], tab.b_expl[j]));
    Ok(impl_ok && expl_ok)
}

/// Time step `max(0.9 dx / lambda_max, dx^2 / (2 d_max))`.
pub fn compute_dt(grid: &Grid1D, lambda_max: f64, d_max: f64) -> Result<f64> {
    const NU_H: f64 = 0.9;
    const NU_P: f64 = 1.0;
    let dx = grid.dx();
    let hyperbolic = if lambda_max > 0.0 { NU_H * dx / lambda_max } else { 0.0 };
    let parabolic = if d_max > 0.0 { NU_P * dx * dx / (2.0 * d_max) } else { 0.0 };
    if !(lambda_max > 0.0 || d_max > 0.0) {
        return Err(Error::Config(
            "time step needs a positive speed or diffusivity".into(),
        ));
    }
    Ok(hyperbolic.max(parabolic))
}

/// A semi-discrete system `y' = F(t, y) + Q(t, y)` with non-stiff `F` and
/// stiff `Q` whose implicit stage equation can be solved directly.
pub trait ImexSystem {
    fn len(&self) -> usize;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Writes `F(t, y)`.
    fn explicit_rhs(&mut self, t: f64, y: &[f64], out: &mut [f64]) -> Result<()>;

    /// Writes `Q(t, y)`.
    fn stiff_rhs(&mut self, t: f64, y: &[f64], out: &mut [f64]) -> Result<()>;

    /// Solves `Y = known + h Q(t, Y)` for `Y`.
    fn stiff_solve(&mut self, t: f64, h: f64, known: &[f64], out: &mut [f64]) -> Result<()>;

    /// Maps a state index to a velocity node, for error reports.
    fn locate(&self, _index: usize) -> Option<usize> {
        None
    }
}

/// Reusable stage storage for one tableau and one system size.
#[derive(Debug, Clone)]
pub struct ImexStepper {
    tab: ImexTableau,
    c_impl: Vec<f64>,
    c_expl: Vec<f64>,
    need_f: Vec<bool>,
    need_q: Vec<bool>,
    last_stage_final: bool,
    stages: Vec<Vec<f64>>,
    f: Vec<Vec<f64>>,
    q: Vec<Vec<f64>>,
    known: Vec<f64>,
}

impl ImexStepper {
    pub fn new(tab: &ImexTableau, len: usize) -> Result<Self> {
        let gsa = gsa_check(tab)?;
        let s = tab.s;
        let need_f = (0..s)
            .map(|k| tab.b_expl[k] != 0.0 || (k + 1..s).any(|i| tab.a_expl[i][k] != 0.0))
            .collect();
        let need_q = (0..s)
            .map(|k| tab.b_impl[k] != 0.0 || (k + 1..s).any(|i| tab.a_impl[i][k] != 0.0))
            .collect();
        Ok(Self {
            tab: tab.clone(),
            c_impl: tab.c_impl(),
            c_expl: tab.c_expl(),
            need_f,
            need_q,
            last_stage_final: gsa && tab.b_expl[s - 1] == 0.0,
            stages: vec![vec![0.0; len]; s],
            f: vec![vec![0.0; len]; s],
            q: vec![vec![0.0; len]; s],
            known: vec![0.0; len],
        })
    }

    pub fn tableau(&self) -> &ImexTableau {
        &self.tab
    }

    /// Internal stages of the most recent step.
    pub fn stages(&self) -> &[Vec<f64>] {
        &self.stages
    }

    /// Advances `y` from `t` to `t + dt` in place.
    pub fn advance<S: ImexSystem + ?Sized>(
        &mut self,
        sys: &mut S,
        t: f64,
        dt: f64,
        y: &mut [f64],
    ) -> Result<()> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::Config(format!("time step must be positive, got {dt}")));
        }
        let n = y.len();
        if n != sys.len() || n != self.known.len() {
            return Err(Error::Config(format!(
                "state length {n} does not match system length {}",
                sys.len()
            )));
        }
        let s = self.tab.s;
        for k in 0..s {
            self.known.copy_from_slice(y);
            for j in 0..k {
                let ae = dt * self.tab.a_expl[k][j];
                if ae != 0.0 {
                    axpy(&mut self.known, ae, &self.f[j]);
                }
                let ai = dt * self.tab.a_impl[k][j];
                if ai != 0.0 {
                    axpy(&mut self.known, ai, &self.q[j]);
                }
            }
            let akk = self.tab.a_impl[k][k];
            let ti = t + self.c_impl[k] * dt;
            if akk != 0.0 {
                let h = dt * akk;
                sys.stiff_solve(ti, h, &self.known, &mut self.stages[k])?;
                let inv = 1.0 / h;
                for ((q, y), kn) in self.q[k].iter_mut().zip(&self.stages[k]).zip(&self.known) {
                    *q = (y - kn) * inv;
                }
            } else {
                self.stages[k].copy_from_slice(&self.known);
                if self.need_q[k] {
                    sys.stiff_rhs(ti, &self.stages[k], &mut self.q[k])?;
                }
            }
            check_finite(sys, &self.stages[k], k)?;
            if self.need_f[k] {
                sys.explicit_rhs(t + self.c_expl[k] * dt, &self.stages[k], &mut self.f[k])?;
            }
        }
        if self.last_stage_final {
            y.copy_from_slice(&self.stages[s - 1]);
        } else {
            for k in 0..s {
                let be = dt * self.tab.b_expl[k];
                if be != 0.0 {
                    axpy(y, be, &self.f[k]);
                }
                let bi = dt * self.tab.b_impl[k];
                if bi != 0.0 {
                    axpy(y, bi, &self.q[k]);
                }
            }
            check_finite(sys, y, s)?;
        }
        Ok(())
    }
}

fn check_finite<S: ImexSystem + ?Sized>(sys: &S, v: &[f64], stage: usize) -> Result<()> {
    if let Some(idx) = v.iter().position(|x| !x.is_finite()) {
        return Err(Error::NumericFailure {
            step: 0,
            stage,
            node: sys.locate(idx),
            detail: format!("non-finite value at state index {idx}"),
        });
    }
    Ok(())
}

#[inline]
pub(crate) fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

/// One IMEX step of `sys` from `t` to `t + dt`, returning the new state.
pub fn imex_advance<S: ImexSystem + ?Sized>(
    sys: &mut S,
    y: &[f64],
    t: f64,
    dt: f64,
    tab: &ImexTableau,
) -> Result<Vec<f64>> {
    let mut stepper = ImexStepper::new(tab, y.len())?;
    let mut out = y.to_vec();
    stepper.advance(sys, t, dt, &mut out)?;
    Ok(out)
}

/// Like [`imex_advance`] but also returns the internal stages.
pub fn imex_advance_with_stages<S: ImexSystem + ?Sized>(
    sys: &mut S,
    y: &[f64],
    t: f64,
    dt: f64,
    tab: &ImexTableau,
) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let mut stepper = ImexStepper::new(tab, y.len())?;
    let mut out = y.to_vec();
    stepper.advance(sys, t, dt, &mut out)?;
    Ok((out, stepper.stages))
}

/// Componentwise relaxation `y' = F(t, y) + (eq - y) / tau` with a fixed
/// equilibrium and a user supplied non-stiff part.
pub struct Relaxation<F> {
    pub tau: Vec<f64>,
    pub equilibrium: Vec<f64>,
    pub explicit: F,
}

impl<F> Relaxation<F>
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    pub fn new(tau: Vec<f64>, equilibrium: Vec<f64>, explicit: F) -> Result<Self> {
        if tau.len() != equilibrium.len() {
            return Err(Error::Config("tau and equilibrium lengths differ".into()));
        }
        if let Some(t) = tau.iter().find(|t| !(**t > 0.0)) {
            return Err(Error::Config(format!("relaxation time must be positive, got {t}")));
        }
        Ok(Self {
            tau,
            equilibrium,
            explicit,
        })
    }
}

impl<F> ImexSystem for Relaxation<F>
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    fn len(&self) -> usize {
        self.tau.len()
    }

    fn explicit_rhs(&mut self, t: f64, y: &[f64], out: &mut [f64]) -> Result<()> {
        (self.explicit)(t, y, out);
        Ok(())
    }

    fn stiff_rhs(&mut self, _t: f64, y: &[f64], out: &mut [f64]) -> Result<()> {
        for i in 0..y.len() {
            out[i] = (self.equilibrium[i] - y[i]) / self.tau[i];
        }
        Ok(())
    }

    fn stiff_solve(&mut self, _t: f64, h: f64, known: &[f64], out: &mut [f64]) -> Result<()> {
        for i in 0..known.len() {
            let r = h / self.tau[i];
            out[i] = (known[i] + r * self.equilibrium[i]) / (1.0 + r);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn zero_rhs(_: f64, _: &[f64], out: &mut [f64]) {
        out.fill(0.0);
    }

    #[test]
    fn builtin_tableaux_are_gsa_and_consistent() {
        for tab in [ImexTableau::ars443(), ImexTableau::ars222(), ImexTableau::euler()] {
            assert!(gsa_check(&tab).unwrap(), "{}", tab.name);
            assert!(tab.is_consistent(1e-14), "{}", tab.name);
        }
    }

    #[test]
    fn perturbed_weight_breaks_gsa() {
        let mut tab = ImexTableau::ars443();
        tab.b_impl[2] += 1e-3;
        assert!(!gsa_check(&tab).unwrap());
        let mut tab = ImexTableau::ars443();
        tab.b_expl[0] -= 1e-3;
        assert!(!gsa_check(&tab).unwrap());
    }

    #[test]
    fn malformed_tableau_rejected() {
        let mut tab = ImexTableau::euler();
        tab.a_impl.push(vec![0.0]);
        assert!(matches!(gsa_check(&tab), Err(Error::Config(_))));
        let r = ImexTableau::new("x", vec![vec![0.0, 1.0]], vec![vec![]], vec![1.0], vec![1.0], 1);
        assert!(r.is_err());
    }

    /// Order conditions up to three for both parts and the coupling terms.
    #[test]
    fn ars443_order_conditions() {
        let t = ImexTableau::ars443();
        let (a, at, b, bt) = (&t.a_impl, &t.a_expl, &t.b_impl, &t.b_expl);
        let c = t.c_impl();
        let ct = t.c_expl();
        for k in 0..t.s {
            assert_relative_eq!(c[k], ct[k], epsilon = 1e-15);
        }
        let dot = |u: &[f64], v: &[f64]| u.iter().zip(v).map(|(x, y)| x * y).sum::<f64>();
        let mat = |m: &Vec<Vec<f64>>, v: &[f64]| m.iter().map(|r| dot(r, v)).collect::<Vec<_>>();
        let sq: Vec<f64> = c.iter().map(|x| x * x).collect();
        for w in [b, bt] {
            assert_relative_eq!(w.iter().sum::<f64>(), 1.0, epsilon = 1e-14);
            assert_relative_eq!(dot(w, &c), 0.5, epsilon = 1e-14);
            assert_relative_eq!(dot(w, &sq), 1.0 / 3.0, epsilon = 1e-14);
            for m in [a, at] {
                assert_relative_eq!(dot(w, &mat(m, &c)), 1.0 / 6.0, epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn parse_rationals() {
        assert_eq!(parse_rational("3/2").unwrap(), 1.5);
        assert_eq!(parse_rational(" -7/4 ").unwrap(), -1.75);
        assert_eq!(parse_rational("0.25").unwrap(), 0.25);
        assert!(parse_rational("1/0").is_err());
        assert!(parse_rational("abc").is_err());
    }

    #[test]
    fn toml_tableau_round_trip() {
        let text = r#"
            name = "ARS(4,4,3)"
            order = 3
            a_impl = [["0"], ["0", "1/2"], ["0", "1/6", "1/2"], ["0", "-1/2", "1/2", "1/2"], ["0", "3/2", "-3/2", "1/2", "1/2"]]
            a_expl = [[], ["1/2"], ["11/18", "1/18"], ["5/6", "-5/6", "1/2"], ["1/4", "7/4", "3/4", "-7/4"]]
            b_impl = ["0", "3/2", "-3/2", "1/2", "1/2"]
            b_expl = ["1/4", "7/4", "3/4", "-7/4", 0]
        "#;
        let parsed = ImexTableau::from_toml_str(text).unwrap();
        let builtin = ImexTableau::ars443();
        assert_eq!(parsed.s, builtin.s);
        for k in 0..parsed.s {
            for j in 0..parsed.s {
                assert_relative_eq!(parsed.a_impl[k][j], builtin.a_impl[k][j], epsilon = 1e-16);
                assert_relative_eq!(parsed.a_expl[k][j], builtin.a_expl[k][j], epsilon = 1e-16);
            }
        }
        assert!(gsa_check(&parsed).unwrap());
    }

    #[test]
    fn scalar_relaxation_local_error() {
        let tab = ImexTableau::ars443();
        let mut sys = Relaxation::new(vec![1.0], vec![0.0], zero_rhs).unwrap();
        let y = imex_advance(&mut sys, &[1.0], 0.0, 0.1, &tab).unwrap();
        // local error of an order-p method scales like dt^(p+1)
        assert!((y[0] - (-0.1f64).exp()).abs() < 1e-5);
    }

    #[test]
    fn fixed_point_unchanged() {
        let tab = ImexTableau::ars443();
        let eq = vec![0.3, -1.2, 4.0];
        let mut sys = Relaxation::new(vec![1e-3, 1.0, 50.0], eq.clone(), zero_rhs).unwrap();
        let y = imex_advance(&mut sys, &eq, 0.0, 0.7, &tab).unwrap();
        for (a, b) in y.iter().zip(&eq) {
            assert_relative_eq!(a, b, epsilon = 1e-15);
        }
    }

    fn relaxation_error(tab: &ImexTableau, tau: f64, n_steps: usize) -> f64 {
        // y' = -y/tau + cos(t): exact solution with y(0) = 1
        let t_end = 1.0;
        let dt = t_end / n_steps as f64;
        let mut sys = Relaxation::new(vec![tau], vec![0.0], |t: f64, _: &[f64], out: &mut [f64]| {
            out[0] = t.cos();
        })
        .unwrap();
        let mut st = ImexStepper::new(tab, 1).unwrap();
        let mut y = vec![1.0];
        for n in 0..n_steps {
            st.advance(&mut sys, n as f64 * dt, dt, &mut y).unwrap();
        }
        let k = 1.0 / tau;
        let particular = |t: f64| (k * t.cos() + t.sin()) / (1.0 + k * k);
        let exact = (1.0 - particular(0.0)) * (-k * t_end).exp() + particular(t_end);
        (y[0] - exact).abs()
    }

    #[test]
    fn convergence_order_on_nonstiff_relaxation() {
        for tab in [ImexTableau::ars443(), ImexTableau::ars222()] {
            let e1 = relaxation_error(&tab, 1.0, 20);
            let e2 = relaxation_error(&tab, 1.0, 40);
            let order = (e1 / e2).log2();
            assert!(order >= 1.8, "{}: order {order}", tab.name);
        }
    }

    #[test]
    fn ap_stage_values_reach_equilibrium() {
        let tab = ImexTableau::ars443();
        let eq = vec![0.25];
        let mut sys = Relaxation::new(vec![1e-12], eq, |_: f64, y: &[f64], out: &mut [f64]| {
            out[0] = -0.5 * y[0];
        })
        .unwrap();
        let (y, stages) = imex_advance_with_stages(&mut sys, &[1.0], 0.0, 0.1, &tab).unwrap();
        for st in &stages[1..] {
            assert!((st[0] - 0.25).abs() < 1e-8, "{}", st[0]);
        }
        assert!((y[0] - 0.25).abs() < 1e-8);
    }

    #[test]
    fn gsa_final_equals_last_stage() {
        // Affine problem y' = M y + g split into two parts; compare the
        // weighted combination against the last internal stage.
        let tab = ImexTableau::ars443();
        let mut sys = Relaxation::new(
            vec![0.3, 2.0],
            vec![1.0, -0.5],
            |t: f64, y: &[f64], out: &mut [f64]| {
                out[0] = 0.2 * y[1] + t;
                out[1] = -0.7 * y[0] + 1.0;
            },
        )
        .unwrap();
        let y0 = [0.4, 0.9];
        let dt = 0.2;
        let (y, stages) = imex_advance_with_stages(&mut sys, &y0, 0.0, dt, &tab).unwrap();
        let mut combo = y0.to_vec();
        let mut f = [0.0; 2];
        let mut q = [0.0; 2];
        let c = tab.c_expl();
        for k in 0..tab.s {
            sys.explicit_rhs(c[k] * dt, &stages[k], &mut f).unwrap();
            sys.stiff_rhs(0.0, &stages[k], &mut q).unwrap();
            for i in 0..2 {
                combo[i] += dt * (tab.b_expl[k] * f[i] + tab.b_impl[k] * q[i]);
            }
        }
        for i in 0..2 {
            assert_relative_eq!(combo[i], y[i], epsilon = 1e-14);
            assert_relative_eq!(stages[tab.s - 1][i], y[i], epsilon = 1e-15);
        }
    }

    #[test]
    fn compute_dt_examples() {
        let g = Grid1D::new(20.0, 150).unwrap();
        let a = compute_dt(&g, 1e5f64.sqrt(), 1.0).unwrap();
        assert!((a - 0.89e-2).abs() / 0.89e-2 < 0.01, "{a}");
        let b = compute_dt(&g, 1.0, 1.0).unwrap();
        assert!((b - 0.12).abs() / 0.12 < 0.01, "{b}");
        let lim = compute_dt(&g, 1e12, 1.0).unwrap();
        assert_relative_eq!(lim, g.dx() * g.dx() / 2.0, max_relative = 1e-12);
        assert!(compute_dt(&g, 0.0, 0.0).is_err());
    }

    #[test]
    fn nonpositive_tau_rejected() {
        assert!(Relaxation::new(vec![0.0], vec![0.0], zero_rhs).is_err());
    }

    #[test]
    fn non_finite_state_reports_stage() {
        let tab = ImexTableau::ars443();
        let mut sys = Relaxation::new(vec![1.0], vec![0.0], |_: f64, _: &[f64], out: &mut [f64]| {
            out[0] = f64::NAN;
        })
        .unwrap();
        match imex_advance(&mut sys, &[1.0], 0.0, 0.1, &tab) {
            Err(Error::NumericFailure { stage, .. }) => assert_eq!(stage, 1),
            other => panic!("unexpected {other:?}"),
        }
    }

    proptest! {
        #[test]
        fn linear_in_state(y1 in prop::collection::vec(-3.0f64..3.0, 3),
                           y2 in prop::collection::vec(-3.0f64..3.0, 3),
                           dt in 0.01f64..0.5) {
            let tab = ImexTableau::ars443();
            let make = || Relaxation::new(vec![0.1, 1.0, 5.0], vec![0.0; 3], |_: f64, y: &[f64], out: &mut [f64]| {
                out[0] = y[1] - y[2];
                out[1] = 0.5 * y[0];
                out[2] = -y[1];
            }).unwrap();
            let a = imex_advance(&mut make(), &y1, 0.0, dt, &tab).unwrap();
            let b = imex_advance(&mut make(), &y2, 0.0, dt, &tab).unwrap();
            let sum: Vec<f64> = y1.iter().zip(&y2).map(|(p, q)| p + q).collect();
            let c = imex_advance(&mut make(), &sum, 0.0, dt, &tab).unwrap();
            for i in 0..3 {
                prop_assert!((a[i] + b[i] - c[i]).abs() < 1e-12);
            }
        }
    }
}
