use std::f64::consts::PI;

use bifi_core::{
    relative_l2_error, CompartmentSet, DiffusionSolver, EpidemicParameters, Fidelity, Field,
    Grid1D, HighFidelitySolver, ImexTableau, Laplacian, LowFidelitySolver, MacroState,
    TransportConfig, VelocityProfile, VelocityQuadrature, kinetic_init, moments,
};
use proptest::prelude::*;

fn sir(beta: f64, gamma: f64) -> EpidemicParameters {
    EpidemicParameters::sir(Field::Constant(beta), Field::Constant(gamma))
}

fn gaussian(g: &Grid1D, amp: f64, center: f64, width: f64) -> Vec<f64> {
    g.cell_centers()
        .iter()
        .map(|x| amp * (-((x - center) / width).powi(2)).exp())
        .collect()
}

fn outbreak(g: &Grid1D, center: f64) -> MacroState {
    let i = gaussian(g, 0.01, center, 1.0);
    let s = i.iter().map(|v| 1.0 - v).collect();
    MacroState::from_densities(CompartmentSet::Sir, vec![s, i, vec![0.0; g.n_cells()]]).unwrap()
}

fn lf(g: &Grid1D, p: &EpidemicParameters, lambda: f64, tau: f64, init: &MacroState, t: f64) -> MacroState {
    let cfg = TransportConfig::new(vec![lambda; 3], vec![tau; 3], Fidelity::Low).unwrap();
    LowFidelitySolver::new(g, p, &[], &cfg, &ImexTableau::ars443())
        .unwrap()
        .run(init, t, &[])
        .unwrap()
        .final_state
}

fn hf(g: &Grid1D, p: &EpidemicParameters, lambda: f64, tau: f64, nv: usize, init: &MacroState, t: f64) -> MacroState {
    let cfg = TransportConfig::new(vec![lambda; 3], vec![tau; 3], Fidelity::High).unwrap();
    let q = VelocityQuadrature::gauss_legendre(nv).unwrap();
    HighFidelitySolver::new(g, p, &[], &cfg, &q, &ImexTableau::ars443())
        .unwrap()
        .run_macro(init, t)
        .unwrap()
}

fn diffuse(g: &Grid1D, p: &EpidemicParameters, d: f64, lap: Laplacian, init: &MacroState, t: f64, dt: f64) -> MacroState {
    DiffusionSolver::new(g, p, &[], &[d; 3], &ImexTableau::ars443())
        .unwrap()
        .with_laplacian(lap)
        .run(init, t, dt, &[])
        .unwrap()
        .final_state
}

#[test]
fn heat_kernel_widening() {
    // reactions off: a Gaussian of variance s0^2 has variance s0^2 + 2 D t
    let g = Grid1D::new(40.0, 2000).unwrap();
    let p = sir(0.0, 0.0);
    let (d, t, s0) = (1.0, 1.0, 1.0);
    let s = gaussian(&g, 1.0, 20.0, s0 * 2f64.sqrt());
    let n = g.n_cells();
    let init = MacroState::from_densities(CompartmentSet::Sir, vec![s, vec![0.0; n], vec![0.0; n]]).unwrap();
    let var = s0 * s0 + 2.0 * d * t;
    let exact: Vec<f64> = g
        .cell_centers()
        .iter()
        .map(|x| s0 / var.sqrt() * (-(x - 20.0).powi(2) / (2.0 * var)).exp())
        .collect();
    for lap in [Laplacian::Compact, Laplacian::Wide] {
        let out = diffuse(&g, &p, d, lap, &init, t, 0.005);
        let e = relative_l2_error(out.density(0), &exact, g.dx()).unwrap();
        assert!(e < 1e-4, "{lap:?}: {e}");
    }
}

fn assert_mirror(out: &MacroState, tol: f64) {
    for c in 0..out.compartments().len() {
        let u = out.density(c);
        let n = u.len();
        for i in 0..n / 2 {
            let d = (u[i] - u[n - 1 - i]).abs();
            assert!(d <= tol, "compartment {c} cell {i}: {d:e}");
        }
    }
}

#[test]
fn symmetric_data_stays_symmetric() {
    let g = Grid1D::new(20.0, 150).unwrap();
    let p = sir(11.0, 10.0);
    let init = outbreak(&g, 10.0);
    let t_end = 5.0;

    // Hyperbolic regime with half the nominal step. At the nominal CFL 0.9
    // the limited scheme amplifies roundoff asymmetry (see README).
    let cfg = TransportConfig::new(vec![1.0; 3], vec![1.0; 3], Fidelity::Low).unwrap();
    let mut solver = LowFidelitySolver::new(&g, &p, &[], &cfg, &ImexTableau::ars443()).unwrap();
    let dt = 0.5 * solver.dt();
    let steps = (t_end / dt).ceil() as usize;
    let dt = t_end / steps as f64;
    let mut u = init.clone();
    for k in 0..steps {
        solver.step(&mut u, k as f64 * dt, dt).unwrap();
    }
    assert_mirror(&u, 1e-10);

    let cfg = TransportConfig::new(vec![1.0; 3], vec![3.0; 3], Fidelity::High).unwrap();
    let q = VelocityQuadrature::gauss_legendre(8).unwrap();
    let mut solver = HighFidelitySolver::new(&g, &p, &[], &cfg, &q, &ImexTableau::ars443()).unwrap();
    let dt = t_end / (t_end / (0.5 * solver.dt())).ceil();
    let mut f = kinetic_init(&init, &q, VelocityProfile::Gaussian).unwrap();
    let mut t = 0.0;
    while t < t_end - 1e-12 {
        solver.step(&mut f, t, dt).unwrap();
        t += dt;
    }
    assert_mirror(&moments(&f, &q).unwrap(), 1e-10);

    // Diffusive regimes with the nominal step.
    let lambda = 1e5f64.sqrt();
    assert_mirror(&lf(&g, &p, lambda, 1e-5, &init, t_end), 1e-10);
    assert_mirror(&hf(&g, &p, lambda, 3e-5, 8, &init, t_end), 1e-10);
}

#[test]
fn velocity_count_irrelevant_in_diffusive_regime() {
    let g = Grid1D::new(20.0, 150).unwrap();
    let beta = Field::from_fn(|x, _, _| 11.0 * (1.0 + 0.05 * (13.0 * PI * x / 20.0).sin()));
    let p = EpidemicParameters::sir(beta, Field::Constant(10.0));
    let init = outbreak(&g, 10.0);
    let lambda = 1e5f64.sqrt();
    let a = hf(&g, &p, lambda, 3e-5, 4, &init, 5.0);
    let b = hf(&g, &p, lambda, 3e-5, 8, &init, 5.0);
    let e = relative_l2_error(&a.snapshot(), &b.snapshot(), g.dx()).unwrap();
    assert!(e <= 1e-6, "{e}");
}

#[test]
fn small_relaxation_time_approaches_diffusion() {
    let g = Grid1D::new(20.0, 100).unwrap();
    let p = sir(11.0, 10.0);
    let init = outbreak(&g, 10.0);
    let d = 1.0;
    let reference = diffuse(&g, &p, d, Laplacian::Wide, &init, 1.0, 0.01);
    let errors: Vec<f64> = [1e-1, 1e-2, 1e-4]
        .iter()
        .map(|&tau| {
            let out = lf(&g, &p, (d / tau).sqrt(), tau, &init, 1.0);
            relative_l2_error(out.density(1), reference.density(1), g.dx()).unwrap()
        })
        .collect();
    assert!(errors.windows(2).all(|w| w[1] < w[0]), "{errors:?}");
    assert!(errors[2] < 1e-3, "{errors:?}");
}

#[test]
fn diffusion_solver_second_order() {
    let run = |n: usize| {
        let g = Grid1D::new(20.0, n).unwrap();
        let out = diffuse(&g, &sir(2.0, 1.0), 0.5, Laplacian::Compact, &outbreak(&g, 10.0), 1.0, 0.4 * 20.0 / n as f64);
        out.snapshot()
    };
    let coarsen = |u: &[f64]| -> Vec<f64> { u.chunks(2).map(|p| 0.5 * (p[0] + p[1])).collect() };
    let u: Vec<Vec<f64>> = [50, 100, 200].iter().map(|&n| run(n)).collect();
    let e1 = relative_l2_error(&u[0], &coarsen(&u[1]), 1.0).unwrap();
    let e2 = relative_l2_error(&u[1], &coarsen(&u[2]), 1.0).unwrap();
    let order = (e1 / e2).log2();
    assert!(order >= 1.8, "{order}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn population_conserved(beta in 0.0f64..4.0, gamma in 0.0f64..3.0,
                            lambda in 0.5f64..3.0, tau in 0.05f64..3.0,
                            center in 6.0f64..14.0) {
        let g = Grid1D::new(20.0, 100).unwrap();
        let p = sir(beta, gamma);
        let init = outbreak(&g, center);
        let m0 = init.total_population(&g);
        let d = lambda * lambda * tau;
        for out in [
            lf(&g, &p, lambda, tau, &init, 1.0),
            hf(&g, &p, lambda, 3.0 * tau, 4, &init, 1.0),
            diffuse(&g, &p, d, Laplacian::Wide, &init, 1.0, (g.dx() * g.dx() / (2.0 * d)).min(0.05)),
        ] {
            prop_assert!((out.total_population(&g) / m0 - 1.0).abs() <= 1e-10);
            prop_assert!(out.densities().iter().all(|v| *v >= -1e-8));
        }
    }
}
