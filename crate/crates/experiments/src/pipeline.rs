//! The bi-fidelity experiment: low-fidelity sweep over candidates, greedy
//! point selection, high-fidelity runs at the selected points, and
//! statistics on a sparse-grid reference rule.

use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;

use bifi_core::{
    bifi_stats, cc_sparse_grid, estimate_stats, greedy_select, relative_l2_error,
    uniform_candidates, write_samples_csv, BiFiBasis, EpidemicParameters, Error, Fidelity,
    Grid1D, HighFidelitySolver, ImexTableau, LowFidelitySolver, QuadratureRule, SnapshotSet,
    StatField, StdEstimator, TransportConfig, VelocityQuadrature,
};

use crate::error::{io_err, ExpResult};
use crate::output::{self, ErrorRow, ErrorTable, Timing};
use crate::scenario::ScenarioConfig;

/// Both solvers for one scenario. Each evaluation builds its own solver, so
/// evaluations are independent and run in parallel.
pub struct Models {
    pub grid: Grid1D,
    params: EpidemicParameters,
    lf: TransportConfig,
    hf: TransportConfig,
    quad: VelocityQuadrature,
    tab: ImexTableau,
    cfg: ScenarioConfig,
}

impl Models {
    pub fn new(cfg: &ScenarioConfig) -> ExpResult<Self> {
        let mut cfg = cfg.clone();
        cfg.validate()?;
        Ok(Self {
            grid: cfg.grid()?,
            params: cfg.params(),
            lf: cfg.transport(Fidelity::Low)?,
            hf: cfg.transport(Fidelity::High)?,
            quad: VelocityQuadrature::gauss_legendre(cfg.nv)?,
            tab: cfg.imex()?,
            cfg,
        })
    }

    pub fn config(&self) -> &ScenarioConfig {
        &self.cfg
    }

    /// Final low-fidelity densities at `z`, compartment-major.
    pub fn lf(&self, z: &[f64]) -> ExpResult<Vec<f64>> {
        let init = self.cfg.initial_state(&self.grid, z)?;
        let mut s = LowFidelitySolver::new(&self.grid, &self.params, z, &self.lf, &self.tab)?;
        Ok(s.run(&init, self.cfg.t_end, &[])?.final_state.snapshot())
    }

    /// Final high-fidelity densities at `z`, compartment-major.
    pub fn hf(&self, z: &[f64]) -> ExpResult<Vec<f64>> {
        let init = self.cfg.initial_state(&self.grid, z)?;
        let mut s =
            HighFidelitySolver::new(&self.grid, &self.params, z, &self.hf, &self.quad, &self.tab)?;
        Ok(s.run_macro(&init, self.cfg.t_end)?.snapshot())
    }

    pub fn lf_many(&self, zs: &[Vec<f64>]) -> ExpResult<Vec<Vec<f64>>> {
        zs.par_iter().map(|z| self.lf(z)).collect()
    }

    pub fn hf_many(&self, zs: &[Vec<f64>]) -> ExpResult<Vec<Vec<f64>>> {
        zs.par_iter().map(|z| self.hf(z)).collect()
    }
}

/// Everything produced by a full run.
#[derive(Debug, Clone)]
pub struct Report {
    pub name: String,
    pub xs: Vec<f64>,
    pub dx: f64,
    pub labels: Vec<&'static str>,
    pub candidates: Vec<Vec<f64>>,
    pub basis: BiFiBasis,
    pub rule: QuadratureRule,
    pub hf: StatField,
    pub lf: StatField,
    /// Bi-fidelity statistics using the first `k + 1` selected points.
    pub bf: Vec<StatField>,
    pub errors: ErrorTable,
    pub timings: Vec<Timing>,
}

fn timed<T>(timings: &mut Vec<Timing>, stage: &str, runs: usize, f: impl FnOnce() -> ExpResult<T>) -> ExpResult<T> {
    let start = Instant::now();
    let out = f()?;
    timings.push(Timing {
        stage: stage.into(),
        seconds: start.elapsed().as_secs_f64(),
        runs,
    });
    Ok(out)
}

/// Result of the selection stage.
pub struct Selection {
    pub candidates: Vec<Vec<f64>>,
    /// Low-fidelity part only.
    pub basis: BiFiBasis,
}

/// Low-fidelity sweep over the candidate set and greedy selection of
/// `cfg.n_select` points. Writes `candidates.csv`, `selected_points.csv` and
/// the low-fidelity `basis.csv`.
pub fn select(models: &Models, out: &Path, timings: &mut Vec<Timing>) -> ExpResult<Selection> {
    let cfg = models.config();
    let candidates = uniform_candidates(cfg.candidates, &cfg.domain, cfg.seed)?;
    write_samples_csv(out.join("candidates.csv"), &candidates)?;
    let lf = timed(timings, "lf_candidates", candidates.len(), || models.lf_many(&candidates))?;
    let basis = timed(timings, "greedy", 0, || {
        let set = SnapshotSet::new(candidates.clone(), lf, models.grid.dx())?;
        Ok(greedy_select(&set, cfg.n_select)?)
    })?;
    output::write_selected(&out.join("selected_points.csv"), &basis)?;
    basis.write_csv(out.join("basis.csv"))?;
    Ok(Selection { candidates, basis })
}

/// Result of the statistics stage.
pub struct Statistics {
    pub basis: BiFiBasis,
    pub rule: QuadratureRule,
    pub hf: StatField,
    pub lf: StatField,
    pub bf: Vec<StatField>,
}

/// High-fidelity runs at the selected points, then reference and
/// bi-fidelity statistics on the sparse-grid rule. Writes the completed
/// `basis.csv`, `rule.csv`, `fields_{hf,lf,bf}.csv` and `bf_decay.csv`.
pub fn statistics(models: &Models, basis: BiFiBasis, out: &Path, timings: &mut Vec<Timing>) -> ExpResult<Statistics> {
    let cfg = models.config();
    let labels = cfg.compartments().labels();
    let xs = models.grid.cell_centers();
    let basis = if basis.n() > 0 {
        let hf = timed(timings, "hf_selected", basis.n(), || models.hf_many(&basis.samples))?;
        basis.with_hf(hf)?
    } else {
        basis
    };
    basis.write_csv(out.join("basis.csv"))?;

    let rule = cc_sparse_grid(cfg.cc_level, &cfg.domain)?;
    rule.write_csv(out.join("rule.csv"))?;
    let lf_evals = timed(timings, "lf_rule", rule.len(), || models.lf_many(&rule.nodes))?;
    let hf_evals = timed(timings, "hf_rule", rule.len(), || models.hf_many(&rule.nodes))?;
    let hf = estimate_stats(&hf_evals, &rule)?;
    let lf = estimate_stats(&lf_evals, &rule)?;
    output::write_fields(&out.join("fields_hf.csv"), xs, &labels, &hf)?;
    output::write_fields(&out.join("fields_lf.csv"), xs, &labels, &lf)?;

    let bf = timed(timings, "bifi_stats", 0, || {
        (1..=basis.n())
            .map(|k| Ok(bifi_stats(&basis.truncate(k)?, &rule, &lf_evals, StdEstimator::Surrogate)?))
            .collect::<ExpResult<Vec<_>>>()
    })?;
    if let Some(last) = bf.last() {
        output::write_fields(&out.join("fields_bf.csv"), xs, &labels, last)?;
    }
    output::write_bf_decay(&out.join("bf_decay.csv"), xs, &labels, &bf)?;
    Ok(Statistics { basis, rule, hf, lf, bf })
}

/// Relative L2 error per compartment and for the concatenated state. A
/// compartment with an identically zero reference reports NaN.
pub fn field_errors(approx: &[f64], reference: &[f64], nc: usize, dx: f64) -> ExpResult<Vec<f64>> {
    let n = reference.len() / nc.max(1);
    let rel = |a: &[f64], r: &[f64]| match relative_l2_error(a, r, dx) {
        Ok(e) => Ok(e),
        Err(Error::ZeroReference) => Ok(f64::NAN),
        Err(e) => Err(e),
    };
    let mut out = Vec::with_capacity(nc + 1);
    for c in 0..nc {
        let span = c * n..(c + 1) * n;
        out.push(rel(&approx[span.clone()], &reference[span])?);
    }
    out.push(rel(approx, reference)?);
    Ok(out)
}

/// Error decay of the bi-fidelity statistics against the high-fidelity
/// reference, with the low-fidelity errors repeated on each row. Without
/// bi-fidelity fields the table has a single low-fidelity row with `n = 0`.
pub fn error_table(hf: &StatField, lf: &StatField, bf: &[StatField], labels: &[&str], dx: f64) -> ExpResult<ErrorTable> {
    let nc = labels.len();
    let lf_mean = field_errors(&lf.mean, &hf.mean, nc, dx)?;
    let lf_std = field_errors(&lf.std, &hf.std, nc, dx)?;
    let mut rows = Vec::new();
    if bf.is_empty() {
        rows.push(ErrorRow { n: 0, bf_mean: None, bf_std: None, lf_mean, lf_std });
    } else {
        for (k, b) in bf.iter().enumerate() {
            rows.push(ErrorRow {
                n: k + 1,
                bf_mean: Some(field_errors(&b.mean, &hf.mean, nc, dx)?),
                bf_std: Some(field_errors(&b.std, &hf.std, nc, dx)?),
                lf_mean: lf_mean.clone(),
                lf_std: lf_std.clone(),
            });
        }
    }
    let mut names: Vec<String> = labels.iter().map(|s| s.to_string()).collect();
    names.push("all".into());
    Ok(ErrorTable { labels: names, rows })
}

/// Full run. Artifacts are written as soon as each stage finishes; if a
/// stage fails, a `FAILED` file with the error is left next to them.
pub fn run_pipeline(cfg: &ScenarioConfig) -> ExpResult<Report> {
    let out = cfg.out_dir.clone();
    std::fs::create_dir_all(&out).map_err(io_err(&out))?;
    let marker = out.join("FAILED");
    if marker.exists() {
        std::fs::remove_file(&marker).map_err(io_err(&marker))?;
    }
    let mut timings = Vec::new();
    let result = run_stages(cfg, &out, &mut timings);
    if !timings.is_empty() {
        output::write_timing(&out.join("timing.csv"), &timings)?;
    }
    if let Err(e) = &result {
        std::fs::write(&marker, format!("{e}\n")).map_err(io_err(&marker))?;
    }
    result
}

fn run_stages(cfg: &ScenarioConfig, out: &Path, timings: &mut Vec<Timing>) -> ExpResult<Report> {
    let start = Instant::now();
    let models = Models::new(cfg)?;
    let sel = select(&models, out, timings)?;
    let st = statistics(&models, sel.basis, out, timings)?;
    let labels = cfg.compartments().labels();
    let dx = models.grid.dx();
    let errors = error_table(&st.hf, &st.lf, &st.bf, &labels, dx)?;
    errors.write_csv(&out.join("error_decay.csv"))?;
    timings.push(Timing {
        stage: "total".into(),
        seconds: start.elapsed().as_secs_f64(),
        runs: 0,
    });
    Ok(Report {
        name: cfg.name.clone(),
        xs: models.grid.cell_centers().to_vec(),
        dx,
        labels,
        candidates: sel.candidates,
        basis: st.basis,
        rule: st.rule,
        hf: st.hf,
        lf: st.lf,
        bf: st.bf,
        errors,
        timings: timings.clone(),
    })
}
