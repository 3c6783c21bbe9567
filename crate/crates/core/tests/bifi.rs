use bifi_core::{
    bifi_stats, cc_sparse_grid, estimate_stats, greedy_select,
    project_coefficients, RandomDomain, SnapshotSet, StdEstimator,
};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn set(vs: Vec<Vec<f64>>, weight: f64) -> SnapshotSet {
    let samples = (0..vs.len()).map(|i| vec![i as f64]).collect();
    SnapshotSet::new(samples, vs, weight).unwrap()
}

/// Distance from `u` to the span of `basis` under `weight * dot`, by dense
/// least squares.
fn distance(u: &[f64], basis: &[&Vec<f64>], weight: f64) -> f64 {
    let b = DVector::from_column_slice(u);
    if basis.is_empty() {
        return (weight * b.dot(&b)).sqrt();
    }
    let a = DMatrix::from_fn(u.len(), basis.len(), |i, j| basis[j][i]);
    let c = a.clone().svd(true, true).solve(&b, 1e-14).unwrap();
    let r = b - a * c;
    (weight * r.dot(&r)).sqrt()
}

fn vectors(m: usize, len: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(-1.0f64..1.0, len), m)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn greedy_matches_brute_force(vs in vectors(12, 20), weight in 0.1f64..2.0) {
        let s = set(vs.clone(), weight);
        let basis = greedy_select(&s, 6).unwrap();
        for k in 0..basis.n() {
            let prev: Vec<&Vec<f64>> = basis.selected_indices[..k].iter().map(|&i| &vs[i]).collect();
            let dists: Vec<f64> = vs.iter().map(|u| distance(u, &prev, weight)).collect();
            let best = dists.iter().cloned().fold(0.0, f64::max);
            let pick = basis.selected_indices[k];
            prop_assert!((dists[pick] - best).abs() <= 1e-9 * best.max(1.0), "step {k}: {} vs {best}", dists[pick]);
            prop_assert!((basis.selection_distances[k] - best).abs() <= 1e-9 * best.max(1.0));
        }
    }

    #[test]
    fn selection_is_nested(vs in vectors(10, 15)) {
        let s = set(vs, 1.0);
        let long = greedy_select(&s, 7).unwrap();
        for n in 1..7 {
            let short = greedy_select(&s, n).unwrap();
            prop_assert_eq!(&short.selected_indices[..], &long.selected_indices[..n]);
        }
        prop_assert!(long.selection_distances.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12)));
    }

    #[test]
    fn projection_error_never_grows(vs in vectors(10, 15), u in prop::collection::vec(-1.0f64..1.0, 15)) {
        let s = set(vs, 0.5);
        let basis = greedy_select(&s, 8).unwrap();
        let mut last = f64::INFINITY;
        for n in 1..=8 {
            let b = basis.truncate(n).unwrap();
            let c = project_coefficients(&u, &b).unwrap();
            let mut r = u.clone();
            for (ck, uk) in c.iter().zip(&b.lf_snapshots) {
                r.iter_mut().zip(uk).for_each(|(x, y)| *x -= ck * y);
            }
            let e = (0.5 * r.iter().map(|x| x * x).sum::<f64>()).sqrt();
            prop_assert!(e <= last * (1.0 + 1e-10) + 1e-14, "n {n}: {e} > {last}");
            let reference: Vec<&Vec<f64>> = b.lf_snapshots.iter().collect();
            prop_assert!((e - distance(&u, &reference, 0.5)).abs() <= 1e-10);
            last = e;
        }
    }

    #[test]
    fn interpolates_at_selected_points(vs in vectors(9, 12), hf in vectors(9, 7)) {
        let s = set(vs.clone(), 1.0);
        let basis = greedy_select(&s, 5).unwrap();
        let hf_sel = basis.selected_indices.iter().map(|&i| hf[i].clone()).collect();
        let basis = basis.with_hf(hf_sel).unwrap();
        for &i in &basis.selected_indices {
            let c = project_coefficients(&vs[i], &basis).unwrap();
            let approx: Vec<f64> = (0..7)
                .map(|k| c.iter().zip(&basis.hf_snapshots).map(|(c, h)| c * h[k]).sum())
                .collect();
            for (a, b) in approx.iter().zip(&hf[i]) {
                prop_assert!((a - b).abs() <= 1e-10, "{a} vs {b}");
            }
        }
    }
}

/// When the high-fidelity field is a fixed linear map of the low-fidelity one
/// and the basis spans every low-fidelity evaluation, the surrogate is exact.
#[test]
fn linear_high_fidelity_is_reproduced() {
    let domain = RandomDomain::cube(2, -1.0, 1.0).unwrap();
    let rule = cc_sparse_grid(3, &domain).unwrap();
    let lf = |z: &[f64]| vec![1.0, z[0], z[1], z[0] * z[1], 1.0 + z[0] * z[0]];
    let map = |u: &[f64]| vec![2.0 * u[0] - u[3], u[1] + u[2], 0.5 * u[4], u[0] + u[1] + u[2] + u[3]];
    let lf_evals: Vec<Vec<f64>> = rule.nodes.iter().map(|z| lf(z)).collect();
    let hf_evals: Vec<Vec<f64>> = lf_evals.iter().map(|u| map(u)).collect();
    let s = SnapshotSet::new(rule.nodes.clone(), lf_evals.clone(), 1.0).unwrap();
    let basis = greedy_select(&s, 5).unwrap();
    let hf_sel = basis.selected_indices.iter().map(|&i| hf_evals[i].clone()).collect();
    let basis = basis.with_hf(hf_sel).unwrap();
    let exact = estimate_stats(&hf_evals, &rule).unwrap();
    for estimator in [StdEstimator::Surrogate, StdEstimator::SecondMoment] {
        let bf = bifi_stats(&basis, &rule, &lf_evals, estimator).unwrap();
        for (a, b) in bf.mean.iter().zip(&exact.mean) {
            assert!((a - b).abs() <= 1e-12, "{estimator:?} mean {a} vs {b}");
        }
        if estimator == StdEstimator::Surrogate {
            for (a, b) in bf.std.iter().zip(&exact.std) {
                assert!((a - b).abs() <= 1e-10, "std {a} vs {b}");
            }
        }
    }
}
