//! Greedy point selection on low-fidelity snapshots and the bi-fidelity
//! surrogate built from a few high-fidelity snapshots.

use std::path::Path;

use crate::error::{length_mismatch, Error, Result};
use crate::uq::{QuadratureRule, StatField};

const PIVOT_TOL: f64 = 1e-14;

/// Snapshots (one vector per sample) with the inner product
/// `<u, v> = weight * sum_k u_k v_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotSet {
    pub samples: Vec<Vec<f64>>,
    pub vectors: Vec<Vec<f64>>,
    pub weight: f64,
}

impl SnapshotSet {
    pub fn new(samples: Vec<Vec<f64>>, vectors: Vec<Vec<f64>>, weight: f64) -> Result<Self> {
        if samples.len() != vectors.len() {
            return Err(length_mismatch("snapshot set", samples.len(), vectors.len()));
        }
        if !(weight > 0.0) {
            return Err(Error::Config(format!("inner product weight must be positive, got {weight}")));
        }
        if let Some(first) = vectors.first() {
            if let Some(v) = vectors.iter().find(|v| v.len() != first.len()) {
                return Err(length_mismatch("snapshot", first.len(), v.len()));
            }
        }
        Ok(Self {
            samples,
            vectors,
            weight,
        })
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn inner(&self, u: &[f64], v: &[f64]) -> f64 {
        inner(self.weight, u, v)
    }
}

#[inline]
fn inner(weight: f64, u: &[f64], v: &[f64]) -> f64 {
    weight * u.iter().zip(v).map(|(a, b)| a * b).sum::<f64>()
}

/// Selected low-fidelity basis, its Gramian factor and the paired
/// high-fidelity snapshots.
#[derive(Debug, Clone, PartialEq)]
pub struct BiFiBasis {
    pub selected_indices: Vec<usize>,
    pub samples: Vec<Vec<f64>>,
    pub lf_snapshots: Vec<Vec<f64>>,
    pub hf_snapshots: Vec<Vec<f64>>,
    /// Lower-triangular factor of the Gramian, row `k` has `k + 1` entries.
    pub gramian_chol: Vec<Vec<f64>>,
    /// Distance of each pick to the span of the previous picks.
    pub selection_distances: Vec<f64>,
    pub weight: f64,
}

impl BiFiBasis {
    pub fn n(&self) -> usize {
        self.selected_indices.len()
    }

    /// Attaches high-fidelity snapshots aligned with the selected samples.
    pub fn with_hf(mut self, hf: Vec<Vec<f64>>) -> Result<Self> {
        if hf.len() != self.n() {
            return Err(length_mismatch("high-fidelity snapshots", self.n(), hf.len()));
        }
        self.hf_snapshots = hf;
        Ok(self)
    }

    /// Leading `n` picks; nested selections share their factor.
    pub fn truncate(&self, n: usize) -> Result<Self> {
        if n > self.n() {
            return Err(Error::Config(format!(
                "cannot truncate a basis of {} to {n}",
                self.n()
            )));
        }
        Ok(Self {
            selected_indices: self.selected_indices[..n].to_vec(),
            samples: self.samples[..n].to_vec(),
            lf_snapshots: self.lf_snapshots[..n].to_vec(),
            hf_snapshots: self.hf_snapshots.iter().take(n).cloned().collect(),
            gramian_chol: self.gramian_chol[..n].to_vec(),
            selection_distances: self.selection_distances[..n].to_vec(),
            weight: self.weight,
        })
    }

    /// Dense Gramian of the low-fidelity basis.
    pub fn gramian(&self) -> Vec<Vec<f64>> {
        let n = self.n();
        (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| inner(self.weight, &self.lf_snapshots[i], &self.lf_snapshots[j]))
                    .collect()
            })
            .collect()
    }

    /// Rebuilds a basis from stored snapshots in the given order.
    pub fn from_parts(
        selected_indices: Vec<usize>,
        samples: Vec<Vec<f64>>,
        lf_snapshots: Vec<Vec<f64>>,
        hf_snapshots: Vec<Vec<f64>>,
        weight: f64,
    ) -> Result<Self> {
        let n = lf_snapshots.len();
        if selected_indices.len() != n || samples.len() != n || hf_snapshots.len() != n {
            return Err(Error::Config("basis parts have different lengths".into()));
        }
        let mut basis = Self {
            selected_indices,
            samples,
            lf_snapshots,
            hf_snapshots,
            gramian_chol: Vec::new(),
            selection_distances: Vec::new(),
            weight,
        };
        let g = basis.gramian();
        let mut l: Vec<Vec<f64>> = Vec::with_capacity(n);
        for i in 0..n {
            let mut row = vec![0.0; i + 1];
            for j in 0..=i {
                let prev: &[f64] = if j == i { &row } else { &l[j] };
                let s: f64 = (0..j).map(|k| row[k] * prev[k]).sum();
                if i == j {
                    let d = g[i][i] - s;
                    if !(d > 0.0) {
                        return Err(Error::Conditioning(d.max(0.0).sqrt()));
                    }
                    row[j] = d.sqrt();
                } else {
                    row[j] = (g[i][j] - s) / l[j][j];
                }
            }
            basis.selection_distances.push(row[i]);
            l.push(row);
        }
        basis.gramian_chol = l;
        Ok(basis)
    }

    /// CSV with one row per pick: `k, index, z.., distance, lf_.., hf_..`.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        let dim = self.samples.first().map_or(0, Vec::len);
        let len_l = self.lf_snapshots.first().map_or(0, Vec::len);
        let len_h = self.hf_snapshots.first().map_or(0, Vec::len);
        let mut header = vec!["k".to_string(), "index".into()];
        header.extend((1..=dim).map(|k| format!("z{k}")));
        header.push("distance".into());
        header.push("weight".into());
        header.extend((0..len_l).map(|k| format!("lf_{k}")));
        header.extend((0..len_h).map(|k| format!("hf_{k}")));
        w.write_record(&header)?;
        for k in 0..self.n() {
            let mut row = vec![k.to_string(), self.selected_indices[k].to_string()];
            row.extend(self.samples[k].iter().map(|v| format!("{v:e}")));
            row.push(format!("{:e}", self.selection_distances[k]));
            row.push(format!("{:e}", self.weight));
            row.extend(self.lf_snapshots[k].iter().map(|v| format!("{v:e}")));
            if let Some(h) = self.hf_snapshots.get(k) {
                row.extend(h.iter().map(|v| format!("{v:e}")));
            }
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let mut r = csv::Reader::from_path(path)?;
        let header = r.headers()?.clone();
        let dim = header.iter().filter(|h| h.starts_with('z')).count();
        let len_l = header.iter().filter(|h| h.starts_with("lf_")).count();
        let parse = |s: &str| -> Result<f64> {
            s.parse().map_err(|_| Error::Parse(format!("invalid number '{s}'")))
        };
        let (mut idx, mut samples, mut lf, mut hf) = (vec![], vec![], vec![], vec![]);
        let mut weight = 1.0;
        let mut distances = vec![];
        for rec in r.records() {
            let rec = rec?;
            let f: Vec<&str> = rec.iter().collect();
            idx.push(f[1].parse().map_err(|_| Error::Parse(format!("invalid index '{}'", f[1])))?);
            samples.push(f[2..2 + dim].iter().map(|s| parse(s)).collect::<Result<Vec<_>>>()?);
            distances.push(parse(f[2 + dim])?);
            weight = parse(f[3 + dim])?;
            let start = 4 + dim;
            lf.push(f[start..start + len_l].iter().map(|s| parse(s)).collect::<Result<Vec<_>>>()?);
            hf.push(f[start + len_l..].iter().map(|s| parse(s)).collect::<Result<Vec<_>>>()?);
        }
        // keep the recorded distances so a rewrite reproduces the file
        let mut basis = Self::from_parts(idx, samples, lf, hf, weight)?;
        basis.selection_distances = distances;
        Ok(basis)
    }
}

/// Greedy selection of the snapshot farthest from the span of those already
/// chosen, realized as a diagonally pivoted Cholesky factorization of the
/// candidate Gramian evaluated column by column. Ties go to the lowest index.
pub fn greedy_select(candidates: &SnapshotSet, n: usize) -> Result<BiFiBasis> {
    let big_n = candidates.len();
    if n > big_n {
        return Err(Error::Config(format!(
            "cannot select {n} points from {big_n} candidates"
        )));
    }
    let w = candidates.weight;
    let vecs = &candidates.vectors;
    let mut diag: Vec<f64> = vecs.iter().map(|u| inner(w, u, u)).collect();
    let mut chosen = vec![false; big_n];
    let mut cols: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut picks = Vec::with_capacity(n);
    let mut distances = Vec::with_capacity(n);
    for k in 0..n {
        let mut pivot = None;
        let mut best = f64::NEG_INFINITY;
        for i in 0..big_n {
            if !chosen[i] && diag[i] > best {
                best = diag[i];
                pivot = Some(i);
            }
        }
        let p = match pivot {
            Some(p) if best >= PIVOT_TOL => p,
            _ => {
                return Err(Error::RankDeficient {
                    requested: n,
                    achievable: k,
                })
            }
        };
        let root = best.sqrt();
        let col: Vec<f64> = (0..big_n)
            .map(|i| {
                if chosen[i] {
                    return 0.0;
                }
                let g = inner(w, &vecs[i], &vecs[p]);
                let s: f64 = cols.iter().map(|c| c[i] * c[p]).sum();
                (g - s) / root
            })
            .collect();
        for i in 0..big_n {
            if !chosen[i] {
                diag[i] -= col[i] * col[i];
            }
        }
        chosen[p] = true;
        diag[p] = 0.0;
        cols.push(col);
        picks.push(p);
        distances.push(root);
    }
    let gramian_chol = (0..n)
        .map(|k| (0..=k).map(|j| cols[j][picks[k]]).collect())
        .collect();
    Ok(BiFiBasis {
        samples: picks.iter().map(|&i| candidates.samples[i].clone()).collect(),
        lf_snapshots: picks.iter().map(|&i| vecs[i].clone()).collect(),
        hf_snapshots: Vec::new(),
        selected_indices: picks,
        gramian_chol,
        selection_distances: distances,
        weight: w,
    })
}

/// Orthonormal basis of the low-fidelity span (Gram-Schmidt with one
/// re-orthogonalization pass) and the triangular factor `R` with
/// `u_k = sum_j R[j][k] q_j`; `R[j]` holds columns `j..n`.
struct Orthonormal {
    q: Vec<Vec<f64>>,
    r: Vec<Vec<f64>>,
    weight: f64,
}

impl Orthonormal {
    fn new(basis: &BiFiBasis) -> Result<Self> {
        let n = basis.n();
        for (k, row) in basis.gramian_chol.iter().enumerate() {
            if !(row[k] >= PIVOT_TOL) {
                return Err(Error::Conditioning(row[k]));
            }
        }
        let w = basis.weight;
        let mut q: Vec<Vec<f64>> = Vec::with_capacity(n);
        let mut r = vec![vec![0.0; n]; n];
        for k in 0..n {
            let mut v = basis.lf_snapshots[k].clone();
            let coef = sweep(w, &q, &mut v);
            for (j, c) in coef.into_iter().enumerate() {
                r[j][k] = c;
            }
            let norm = inner(w, &v, &v).sqrt();
            if !(norm > 0.0) {
                return Err(Error::Conditioning(norm));
            }
            r[k][k] = norm;
            v.iter_mut().for_each(|x| *x /= norm);
            q.push(v);
        }
        Ok(Self { q, r, weight: w })
    }

    fn coefficients(&self, u: &[f64]) -> Result<Vec<f64>> {
        let n = self.q.len();
        if let Some(first) = self.q.first() {
            if first.len() != u.len() {
                return Err(length_mismatch("low-fidelity snapshot", first.len(), u.len()));
            }
        }
        let mut rem = u.to_vec();
        let y = sweep(self.weight, &self.q, &mut rem);
        let mut c = vec![0.0; n];
        for k in (0..n).rev() {
            let s: f64 = (k + 1..n).map(|j| self.r[k][j] * c[j]).sum();
            c[k] = (y[k] - s) / self.r[k][k];
        }
        Ok(c)
    }
}

/// Removes the components along `q` from `v` in two passes and returns them.
fn sweep(w: f64, q: &[Vec<f64>], v: &mut [f64]) -> Vec<f64> {
    let mut coef = vec![0.0; q.len()];
    for _ in 0..2 {
        for (j, qj) in q.iter().enumerate() {
            let a = inner(w, v, qj);
            v.iter_mut().zip(qj).for_each(|(x, y)| *x -= a * y);
            coef[j] += a;
        }
    }
    coef
}

/// Coefficients of the orthogonal projection of `u_lf` onto the span of the
/// low-fidelity basis, i.e. the solution of `G c = f` with
/// `f_k = <u_lf, u_k>`. Computed through an orthonormalized basis rather
/// than the normal equations, which square the condition number.
pub fn project_coefficients(u_lf: &[f64], basis: &BiFiBasis) -> Result<Vec<f64>> {
    Orthonormal::new(basis)?.coefficients(u_lf)
}

/// `sum_k c_k u^H(z_k)`.
pub fn combine_hf(coefficients: &[f64], basis: &BiFiBasis) -> Result<Vec<f64>> {
    if basis.hf_snapshots.len() != basis.n() {
        return Err(Error::Config("basis has no high-fidelity snapshots".into()));
    }
    if coefficients.len() != basis.n() {
        return Err(length_mismatch("coefficients", basis.n(), coefficients.len()));
    }
    let len = basis.hf_snapshots.first().map_or(0, Vec::len);
    let mut out = vec![0.0; len];
    for (c, h) in coefficients.iter().zip(&basis.hf_snapshots) {
        for (o, v) in out.iter_mut().zip(h) {
            *o += c * v;
        }
    }
    Ok(out)
}

/// Bi-fidelity approximation at `z`: runs the low-fidelity model, projects,
/// and recombines the high-fidelity snapshots.
pub fn bifi_eval<F>(z: &[f64], basis: &BiFiBasis, lf_solver: F) -> Result<Vec<f64>>
where
    F: FnOnce(&[f64]) -> Result<Vec<f64>>,
{
    let u = lf_solver(z)?;
    let c = project_coefficients(&u, basis)?;
    combine_hf(&c, basis)
}

/// How the bi-fidelity standard deviation is formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum StdEstimator {
    /// Evaluate the surrogate at every rule node and take the weighted
    /// centered second moment.
    #[default]
    Surrogate,
    /// Project the low-fidelity second moment and subtract the squared mean.
    SecondMoment,
}

/// Bi-fidelity mean and standard deviation from low-fidelity evaluations at
/// the rule nodes.
pub fn bifi_stats(
    basis: &BiFiBasis,
    rule: &QuadratureRule,
    lf_evals: &[Vec<f64>],
    estimator: StdEstimator,
) -> Result<StatField> {
    if lf_evals.len() != rule.len() {
        return Err(length_mismatch("low-fidelity evaluations", rule.len(), lf_evals.len()));
    }
    let len = lf_evals.first().map_or(0, Vec::len);
    let mut mean_l = vec![0.0; len];
    let mut second_l = vec![0.0; len];
    for (u, &w) in lf_evals.iter().zip(&rule.weights) {
        if u.len() != len {
            return Err(length_mismatch("low-fidelity evaluation", len, u.len()));
        }
        for k in 0..len {
            mean_l[k] += w * u[k];
            second_l[k] += w * u[k] * u[k];
        }
    }
    let mean = combine_hf(&project_coefficients(&mean_l, basis)?, basis)?;
    let var: Vec<f64> = match estimator {
        StdEstimator::Surrogate => {
            let mut var = vec![0.0; mean.len()];
            let ortho = Orthonormal::new(basis)?;
            for (u, &w) in lf_evals.iter().zip(&rule.weights) {
                let ub = combine_hf(&ortho.coefficients(u)?, basis)?;
                for k in 0..var.len() {
                    let d = ub[k] - mean[k];
                    var[k] += w * d * d;
                }
            }
            var
        }
        StdEstimator::SecondMoment => {
            let m2 = combine_hf(&project_coefficients(&second_l, basis)?, basis)?;
            m2.iter().zip(&mean).map(|(s, m)| s - m * m).collect()
        }
    };
    Ok(StatField {
        mean,
        std: var.into_iter().map(|v| v.max(0.0).sqrt()).collect(),
    })
}

/// `||approx - reference|| / ||reference||` in the `dx`-weighted L2 norm.
pub fn relative_l2_error(approx: &[f64], reference: &[f64], dx: f64) -> Result<f64> {
    if approx.len() != reference.len() {
        return Err(length_mismatch("approximation", reference.len(), approx.len()));
    }
    let diff: f64 = approx.iter().zip(reference).map(|(a, r)| (a - r) * (a - r)).sum();
    let norm: f64 = reference.iter().map(|r| r * r).sum();
    if norm == 0.0 {
        return Err(Error::ZeroReference);
    }
    Ok((dx * diff).sqrt() / (dx * norm).sqrt())
}
