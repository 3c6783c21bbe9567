//! Random inputs, Clenshaw-Curtis sparse grids and moment estimates.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{length_mismatch, Error, Result};

/// Box of independent uniform random parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct RandomDomain {
    pub bounds: Vec<(f64, f64)>,
}

impl RandomDomain {
    pub fn new(bounds: Vec<(f64, f64)>) -> Result<Self> {
        if bounds.is_empty() {
            return Err(Error::Config("random domain needs at least one dimension".into()));
        }
        if let Some((lo, hi)) = bounds.iter().find(|(lo, hi)| !(lo < hi)) {
            return Err(Error::Config(format!("empty interval [{lo}, {hi}]")));
        }
        Ok(Self { bounds })
    }

    /// `[lo, hi]^dim`.
    pub fn cube(dim: usize, lo: f64, hi: f64) -> Result<Self> {
        Self::new(vec![(lo, hi); dim])
    }

    pub fn dim(&self) -> usize {
        self.bounds.len()
    }

    pub fn contains(&self, z: &[f64]) -> bool {
        z.len() == self.dim()
            && z.iter().zip(&self.bounds).all(|(v, (lo, hi))| *lo <= *v && *v <= *hi)
    }

    pub fn midpoint(&self) -> Vec<f64> {
        self.bounds.iter().map(|(lo, hi)| 0.5 * (lo + hi)).collect()
    }

    /// Maps a point of `[-1, 1]^d` into the box.
    fn map_reference(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.bounds)
            .map(|(&x, &(lo, hi))| lo + 0.5 * (x + 1.0) * (hi - lo))
            .collect()
    }
}

/// Nodes in parameter space with probability weights.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    pub nodes: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate(&self, f: impl Fn(&[f64]) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(z, w)| w * f(z)).sum()
    }

    /// CSV with columns `z1..zd, weight`.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let dim = self.nodes.first().map_or(0, Vec::len);
        let mut w = csv::Writer::from_path(path)?;
        let mut header: Vec<String> = (1..=dim).map(|k| format!("z{k}")).collect();
        header.push("weight".into());
        w.write_record(&header)?;
        for (z, wt) in self.nodes.iter().zip(&self.weights) {
            let mut row: Vec<String> = z.iter().map(|v| format!("{v:e}")).collect();
            row.push(format!("{wt:e}"));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let mut r = csv::Reader::from_path(path)?;
        let mut nodes = Vec::new();
        let mut weights = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            let vals = parse_row(&rec)?;
            let (w, z) = vals.split_last().ok_or_else(|| Error::Parse("empty row".into()))?;
            nodes.push(z.to_vec());
            weights.push(*w);
        }
        Ok(Self { nodes, weights })
    }
}

fn parse_row(rec: &csv::StringRecord) -> Result<Vec<f64>> {
    rec.iter()
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| Error::Parse(format!("invalid number '{s}'")))
        })
        .collect()
}

/// Number of points of the nested one-dimensional rule at `level`.
fn cc_points(level: u32) -> usize {
    if level == 0 {
        1
    } else {
        (1usize << level) + 1
    }
}

/// Clenshaw-Curtis weights on `[-1, 1]` (summing to 2) for `m` points at
/// `cos(pi j / (m - 1))`.
fn cc_weights(m: usize) -> Vec<f64> {
    if m == 1 {
        return vec![2.0];
    }
    let n = m - 1;
    (0..m)
        .map(|j| {
            let c = if j == 0 || j == n { 1.0 } else { 2.0 };
            let mut s = 0.0;
            for k in 1..=n / 2 {
                let b = if 2 * k == n { 1.0 } else { 2.0 };
                let kk = k as f64;
                s += b / (4.0 * kk * kk - 1.0) * (2.0 * kk * j as f64 * PI / n as f64).cos();
            }
            c / n as f64 * (1.0 - s)
        })
        .collect()
}

fn binomial(n: u32, k: u32) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Enumerates multi-indices of length `dim` with entries summing to `total`.
fn compositions(dim: usize, total: u32, prefix: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
    if prefix.len() + 1 == dim {
        prefix.push(total);
        out.push(prefix.clone());
        prefix.pop();
        return;
    }
    for first in 0..=total {
        prefix.push(first);
        compositions(dim, total - first, prefix, out);
        prefix.pop();
    }
}

/// Smolyak sparse grid of nested Clenshaw-Curtis rules with probability
/// weights, mapped into `domain`.
pub fn cc_sparse_grid(level: u32, domain: &RandomDomain) -> Result<QuadratureRule> {
    let dim = domain.dim();
    if level > 20 {
        return Err(Error::Config(format!("sparse grid level {level} too large")));
    }
    // every node is addressed by its index on the finest one-dimensional level
    let fine = level.max(1);
    let denom = 1u64 << fine;
    let index_of = |lvl: u32, j: usize| -> u64 {
        if lvl == 0 {
            denom / 2
        } else {
            j as u64 * (1u64 << (fine - lvl))
        }
    };

    let mut acc: BTreeMap<Vec<u64>, f64> = BTreeMap::new();
    let lower = (level + 1).saturating_sub(dim as u32);
    for total in lower..=level {
        let coef = if (level - total) % 2 == 0 { 1.0 } else { -1.0 }
            * binomial(dim as u32 - 1, level - total);
        let mut multi = Vec::new();
        compositions(dim, total, &mut Vec::new(), &mut multi);
        for levels in multi {
            let rules: Vec<Vec<f64>> = levels.iter().map(|&l| cc_weights(cc_points(l))).collect();
            let sizes: Vec<usize> = rules.iter().map(Vec::len).collect();
            let count: usize = sizes.iter().product();
            for flat in 0..count {
                let mut rest = flat;
                let mut key = Vec::with_capacity(dim);
                let mut w = coef;
                for k in 0..dim {
                    let j = rest % sizes[k];
                    rest /= sizes[k];
                    key.push(index_of(levels[k], j));
                    w *= rules[k][j] * 0.5;
                }
                *acc.entry(key).or_insert(0.0) += w;
            }
        }
    }

    let mut nodes = Vec::with_capacity(acc.len());
    let mut weights = Vec::with_capacity(acc.len());
    for (key, w) in acc {
        let x: Vec<f64> = key
            .iter()
            .map(|&i| {
                if 2 * i == denom {
                    0.0
                } else {
                    (PI * i as f64 / denom as f64).cos()
                }
            })
            .collect();
        nodes.push(domain.map_reference(&x));
        weights.push(w);
    }
    Ok(QuadratureRule { nodes, weights })
}

/// Pointwise mean and standard deviation of a vector-valued quantity.
#[derive(Debug, Clone, PartialEq)]
pub struct StatField {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

/// Quadrature mean and `sqrt(max(0, E[u^2] - mean^2))`.
pub fn estimate_stats(evaluations: &[Vec<f64>], rule: &QuadratureRule) -> Result<StatField> {
    if evaluations.len() != rule.len() {
        return Err(length_mismatch("evaluations", rule.len(), evaluations.len()));
    }
    let len = evaluations.first().map_or(0, Vec::len);
    let mut mean = vec![0.0; len];
    let mut second = vec![0.0; len];
    for (u, &w) in evaluations.iter().zip(&rule.weights) {
        if u.len() != len {
            return Err(length_mismatch("evaluation", len, u.len()));
        }
        for k in 0..len {
            mean[k] += w * u[k];
            second[k] += w * u[k] * u[k];
        }
    }
    let std = mean
        .iter()
        .zip(&second)
        .map(|(m, s)| (s - m * m).max(0.0).sqrt())
        .collect();
    Ok(StatField { mean, std })
}

/// Reproducible uniform samples in `domain`.
pub fn uniform_candidates(n: usize, domain: &RandomDomain, seed: u64) -> Result<Vec<Vec<f64>>> {
    if n == 0 {
        return Err(Error::Config("candidate set must be nonempty".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..n)
        .map(|_| {
            domain
                .bounds
                .iter()
                .map(|&(lo, hi)| lo + rng.random::<f64>() * (hi - lo))
                .collect()
        })
        .collect())
}

/// CSV with columns `z1..zd`.
pub fn write_samples_csv(path: impl AsRef<Path>, samples: &[Vec<f64>]) -> Result<()> {
    let dim = samples.first().map_or(0, Vec::len);
    let mut w = csv::Writer::from_path(path)?;
    w.write_record((1..=dim).map(|k| format!("z{k}")))?;
    for z in samples {
        w.write_record(z.iter().map(|v| format!("{v:e}")))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_samples_csv(path: impl AsRef<Path>) -> Result<Vec<Vec<f64>>> {
    let mut r = csv::Reader::from_path(path)?;
    r.records().map(|rec| parse_row(&rec?)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::collections::HashSet;

    fn sym() -> RandomDomain {
        RandomDomain::cube(2, -1.0, 1.0).unwrap()
    }

    #[test]
    fn level_three_in_two_dimensions_has_29_nodes() {
        let rule = cc_sparse_grid(3, &sym()).unwrap();
        assert_eq!(rule.len(), 29);
        assert_relative_eq!(rule.weights.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn level_zero_is_midpoint() {
        let d = RandomDomain::new(vec![(0.0, 1.0), (2.0, 4.0), (-1.0, 1.0)]).unwrap();
        let rule = cc_sparse_grid(0, &d).unwrap();
        assert_eq!(rule.nodes, vec![vec![0.5, 3.0, 0.0]]);
        assert_relative_eq!(rule.weights[0], 1.0, epsilon = 1e-15);
    }

    #[test]
    fn one_dimensional_counts() {
        let d = RandomDomain::cube(1, -1.0, 1.0).unwrap();
        for (l, n) in [(0, 1), (1, 3), (2, 5), (3, 9), (4, 17)] {
            assert_eq!(cc_sparse_grid(l, &d).unwrap().len(), n);
        }
    }

    #[test]
    fn integrates_quadratic() {
        let rule = cc_sparse_grid(3, &sym()).unwrap();
        // E[z1^2 + z2^2] under U(-1,1)^2
        let v = rule.integrate(|z| z[0] * z[0] + z[1] * z[1]);
        assert_relative_eq!(v, 2.0 / 3.0, epsilon = 1e-12);
    }

    #[test]
    fn exact_for_total_degree_five() {
        let rule = cc_sparse_grid(3, &sym()).unwrap();
        let moment = |a: i32| if a % 2 == 1 { 0.0 } else { 1.0 / (a as f64 + 1.0) };
        for a in 0..=5 {
            for b in 0..=(5 - a) {
                let v = rule.integrate(|z| z[0].powi(a) * z[1].powi(b));
                assert!((v - moment(a) * moment(b)).abs() < 1e-12, "{a} {b}");
            }
        }
    }

    #[test]
    fn nested_levels() {
        let key = |z: &Vec<f64>| z.iter().map(|v| (v * 1e12).round() as i64).collect::<Vec<_>>();
        for l in 0..4 {
            let a: HashSet<_> = cc_sparse_grid(l, &sym()).unwrap().nodes.iter().map(key).collect();
            let b: HashSet<_> = cc_sparse_grid(l + 1, &sym()).unwrap().nodes.iter().map(key).collect();
            assert!(a.is_subset(&b), "level {l}");
        }
    }

    #[test]
    fn stats_examples() {
        let rule = cc_sparse_grid(3, &sym()).unwrap();
        let c: Vec<Vec<f64>> = rule.nodes.iter().map(|_| vec![1.5, -2.0]).collect();
        let s = estimate_stats(&c, &rule).unwrap();
        for k in 0..2 {
            assert_relative_eq!(s.mean[k], [1.5, -2.0][k], epsilon = 1e-12);
            assert!(s.std[k] < 1e-6);
        }
        let lin: Vec<Vec<f64>> = rule.nodes.iter().map(|z| vec![z[0]]).collect();
        let s = estimate_stats(&lin, &rule).unwrap();
        assert!(s.mean[0].abs() < 1e-12);
        assert_relative_eq!(s.std[0], 1.0 / 3f64.sqrt(), epsilon = 1e-12);

        let single = QuadratureRule {
            nodes: vec![vec![0.0]],
            weights: vec![1.0],
        };
        let s = estimate_stats(&[vec![4.0, 5.0]], &single).unwrap();
        assert_eq!(s.mean, vec![4.0, 5.0]);
        assert_eq!(s.std, vec![0.0, 0.0]);
        assert!(estimate_stats(&[vec![1.0], vec![2.0]], &single).is_err());
    }

    #[test]
    fn candidates_reproducible_and_inside() {
        let d = sym();
        let a = uniform_candidates(5, &d, 42).unwrap();
        let b = uniform_candidates(5, &d, 42).unwrap();
        assert_eq!(a, b);
        let big = uniform_candidates(1000, &d, 7).unwrap();
        assert!(big.iter().all(|z| d.contains(z)));
        for k in 0..2 {
            let m = big.iter().map(|z| z[k]).sum::<f64>() / 1000.0;
            assert!(m.abs() < 0.05, "{m}");
        }
        assert!(uniform_candidates(0, &d, 1).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let dir = std::env::temp_dir().join(format!("bifi-uq-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let rule = cc_sparse_grid(2, &sym()).unwrap();
        let path = dir.join("rule.csv");
        rule.write_csv(&path).unwrap();
        let back = QuadratureRule::read_csv(&path).unwrap();
        assert_eq!(back.len(), rule.len());
        for (a, b) in back.weights.iter().zip(&rule.weights) {
            assert_relative_eq!(a, b, max_relative = 1e-15);
        }
        let s = uniform_candidates(4, &sym(), 3).unwrap();
        let p2 = dir.join("cand.csv");
        write_samples_csv(&p2, &s).unwrap();
        assert_eq!(read_samples_csv(&p2).unwrap(), s);
        std::fs::remove_dir_all(dir).ok();
    }
}
