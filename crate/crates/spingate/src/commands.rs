//! The five CLI commands. Each `compute_*` function is pure; each `run_*`
//! wrapper also writes the artifacts into the output directory.

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use spingate_core::dynamics::{self, PiecewiseField, TimeGrid};
use spingate_core::hilbert::{self, ComplexMatrix};
use spingate_core::measures::{self, GateTarget};
use spingate_core::model::{self, Hamiltonian};
use spingate_core::optim::ga::{self, GaResult};
use spingate_core::optim::gradient::{self, OptimReport, Termination};
use spingate_core::robustness::{self, EnsembleReport, Histogram};
use spingate_core::{Executor, Sequential, SystemSpec};

use crate::config::{OptimizerBlock, Resolved, RunConfig, Stage, TrajectoryFormat};
use crate::error::{CliError, Result};
use crate::io::{self, Cell};

/// Envelope shared by every JSON artifact.
#[derive(Debug, Serialize)]
pub struct Artifact<'a, T: Serialize> {
    pub command: &'a str,
    pub version: &'a str,
    pub seed: u64,
    pub config: &'a RunConfig,
    pub result: &'a T,
}

fn write_artifact<T: Serialize>(dir: &Path, file: &str, command: &str, res: &Resolved, result: &T) -> Result<PathBuf> {
    let path = dir.join(file);
    let artifact = Artifact {
        command,
        version: env!("CARGO_PKG_VERSION"),
        seed: res.config.seed,
        config: &res.config,
        result,
    };
    io::write_json(&path, &artifact)?;
    Ok(path)
}

fn output_dir(res: &Resolved) -> Result<PathBuf> {
    let dir = res.config.output.dir.clone();
    fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
    Ok(dir)
}

/// Headline numbers of an optimized field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub a_max: f64,
    pub t_final: f64,
    pub fluence: f64,
    pub fidelity: f64,
    pub entropy: f64,
}

impl Summary {
    pub fn of(spec: &SystemSpec, field: &PiecewiseField, target: &GateTarget) -> Result<Self> {
        let u = dynamics::propagate(spec, field, false).into_final();
        Ok(Self {
            a_max: field.max_amplitude(),
            t_final: field.grid().t_final(),
            fluence: field.fluence(),
            fidelity: measures::distance(&u, target, spec.n())?.fidelity,
            entropy: measures::final_entropy(&u, spec.n())?,
        })
    }
}

/// Gradient-stage report without the field, which goes to its own CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientStage {
    pub fidelity: f64,
    pub fluence: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    pub termination: Termination,
    pub squared_from: Option<usize>,
    pub objective_history: Vec<f64>,
}

impl From<&OptimReport> for GradientStage {
    fn from(r: &OptimReport) -> Self {
        Self {
            fidelity: r.fidelity,
            fluence: r.fluence,
            grad_norm: r.grad_norm,
            iterations: r.iterations,
            termination: r.termination,
            squared_from: r.squared_from,
            objective_history: r.objective_history.clone(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct OptimizeOutcome {
    pub summary: Summary,
    pub ga: Option<GaResult>,
    pub gradient: Option<GradientStage>,
    #[serde(skip)]
    pub field: PiecewiseField,
}

/// GA stage (if listed), then the gradient stage seeded with the GA best field,
/// `init`, or the zero field, in that order of preference.
pub fn run_stages<E: Executor>(
    spec: &SystemSpec,
    grid: TimeGrid,
    target: &GateTarget,
    optimizer: &OptimizerBlock,
    init: Option<PiecewiseField>,
    executor: &E,
) -> Result<OptimizeOutcome> {
    let mut field = init.unwrap_or_else(|| PiecewiseField::zeros(grid));
    let mut ga_result = None;
    let mut gradient = None;
    for stage in &optimizer.stages {
        match stage {
            Stage::Ga => {
                let result = ga::ga_optimize(spec, target, grid, &optimizer.ga, &optimizer.bounds, executor)?;
                field = ga::synthesize(&result.best);
                ga_result = Some(result);
            }
            Stage::Gradient => {
                let report = gradient::optimize(spec, &field, target, &optimizer.gradient)?;
                gradient = Some(GradientStage::from(&report));
                field = report.field;
            }
        }
    }
    Ok(OptimizeOutcome {
        summary: Summary::of(spec, &field, target)?,
        ga: ga_result,
        gradient,
        field,
    })
}

pub fn compute_optimize<E: Executor>(res: &Resolved, init: Option<PiecewiseField>, executor: &E) -> Result<OptimizeOutcome> {
    run_stages(&res.spec, res.grid, &res.target, &res.config.optimizer, init, executor)
}

/// Writes `optimize.json`, `field.csv`, `summary.csv`, the convergence
/// histories and, if configured, the propagator trajectory.
pub fn run_optimize<E: Executor>(res: &Resolved, init: Option<PiecewiseField>, executor: &E) -> Result<OptimizeOutcome> {
    let outcome = compute_optimize(res, init, executor)?;
    let dir = output_dir(res)?;
    write_artifact(&dir, "optimize.json", "optimize", res, &outcome)?;
    io::write_field_csv(&dir.join("field.csv"), &outcome.field)?;
    let s = outcome.summary;
    io::write_csv(
        &dir.join("summary.csv"),
        &["n", "a_max", "t_final", "fluence", "fidelity", "entropy"],
        [vec![res.spec.n().into(), s.a_max.into(), s.t_final.into(), s.fluence.into(), s.fidelity.into(), s.entropy.into()]],
    )?;
    if let Some(g) = &outcome.ga {
        let rows = g.history.iter().enumerate().map(|(k, f)| vec![k.into(), (*f).into()]);
        io::write_csv(&dir.join("ga_history.csv"), &["generation", "best_fidelity"], rows)?;
    }
    if let Some(g) = &outcome.gradient {
        let rows = g.objective_history.iter().enumerate().map(|(k, v)| vec![k.into(), (*v).into()]);
        io::write_csv(&dir.join("gradient_history.csv"), &["iteration", "objective"], rows)?;
    }
    match res.config.output.trajectory {
        TrajectoryFormat::None => {}
        format => {
            let traj = dynamics::propagate(&res.spec, &outcome.field, true);
            if format == TrajectoryFormat::Csv {
                io::write_trajectory_csv(&dir.join("trajectory.csv"), &traj)?;
            } else {
                io::write_trajectory_binary(&dir.join("trajectory.bin"), &traj)?;
            }
        }
    }
    Ok(outcome)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub gamma: f64,
    /// Environment the field was evaluated on.
    pub n: usize,
    /// Environment the field was optimized for.
    pub source_n: usize,
    pub fidelity: Option<f64>,
    pub entropy: Option<f64>,
    pub fluence: Option<f64>,
    /// `ok`, or the error that stopped this row.
    pub status: String,
}

impl SweepRow {
    fn failed(gamma: f64, n: usize, source_n: usize, error: &CliError) -> Self {
        Self {
            gamma,
            n,
            source_n,
            fidelity: None,
            entropy: None,
            fluence: None,
            status: error.to_string(),
        }
    }

    fn from_summary(gamma: f64, n: usize, source_n: usize, s: &Summary) -> Self {
        Self {
            gamma,
            n,
            source_n,
            fidelity: Some(s.fidelity),
            entropy: Some(s.entropy),
            fluence: Some(s.fluence),
            status: "ok".into(),
        }
    }
}

fn sweep_point<E: Executor>(
    res: &Resolved,
    gamma: f64,
    fixed: Option<&PiecewiseField>,
    warm: Option<PiecewiseField>,
    executor: &E,
) -> (Vec<SweepRow>, Option<PiecewiseField>) {
    let n = res.spec.n();
    let attempt = || -> Result<(Summary, PiecewiseField)> {
        let spec = res.spec_with_gamma(gamma)?;
        match fixed {
            Some(field) => Ok((Summary::of(&spec, field, &res.target)?, field.clone())),
            None => {
                let mut optimizer = res.config.optimizer.clone();
                if warm.is_some() {
                    optimizer.stages.retain(|s| *s == Stage::Gradient);
                }
                let out = run_stages(&spec, res.grid, &res.target, &optimizer, warm.clone(), executor)?;
                Ok((out.summary, out.field))
            }
        }
    };
    match attempt() {
        Err(e) => (vec![SweepRow::failed(gamma, n, n, &e)], None),
        Ok((summary, field)) => {
            let mut rows = vec![SweepRow::from_summary(gamma, n, n, &summary)];
            if let Some(cross) = res.config.sweep.cross_n {
                let row = res
                    .spec_with_n(cross, gamma)
                    .and_then(|spec| Summary::of(&spec, &field, &res.target))
                    .map(|s| SweepRow::from_summary(gamma, cross, n, &s))
                    .unwrap_or_else(|e| SweepRow::failed(gamma, cross, n, &e));
                rows.push(row);
            }
            (rows, Some(field))
        }
    }
}

/// One optimization (or evaluation of `fixed`) per coupling in `sweep.gammas`.
/// Failing points are recorded in their row and the sweep continues.
pub fn compute_sweep<E: Executor>(res: &Resolved, fixed: Option<&PiecewiseField>, executor: &E) -> Vec<SweepRow> {
    if res.config.sweep.warm_start && fixed.is_none() {
        let mut rows = Vec::new();
        let mut warm = None;
        for &gamma in &res.gammas {
            let (point, field) = sweep_point(res, gamma, None, warm.take(), executor);
            rows.extend(point);
            warm = field;
        }
        rows
    } else {
        executor
            .map(res.gammas.len(), |i| sweep_point(res, res.gammas[i], fixed, None, &Sequential).0)
            .into_iter()
            .flatten()
            .collect()
    }
}

pub fn run_sweep<E: Executor>(res: &Resolved, fixed: Option<&PiecewiseField>, executor: &E) -> Result<Vec<SweepRow>> {
    let rows = compute_sweep(res, fixed, executor);
    let dir = output_dir(res)?;
    write_artifact(&dir, "sweep.json", "sweep", res, &rows)?;
    let csv_rows = rows.iter().map(|r| {
        vec![
            r.gamma.into(),
            r.n.into(),
            r.source_n.into(),
            r.fidelity.into(),
            r.entropy.into(),
            r.fluence.into(),
            r.status.as_str().into(),
        ]
    });
    io::write_csv(&dir.join("sweep.csv"), &["gamma", "n", "source_n", "fidelity", "entropy", "fluence", "status"], csv_rows)?;
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntropyOutcome {
    pub times: Vec<f64>,
    /// Absent when no field was supplied.
    pub controlled: Option<Vec<f64>>,
    pub uncontrolled: Vec<f64>,
}

impl EntropyOutcome {
    pub fn final_controlled(&self) -> Option<f64> {
        self.controlled.as_ref().and_then(|c| c.last().copied())
    }

    pub fn final_uncontrolled(&self) -> f64 {
        *self.uncontrolled.last().expect("trace includes t = 0")
    }
}

/// Entropy of the reduced qubit state at every grid time, with and without `field`.
pub fn compute_entropy(res: &Resolved, field: Option<&PiecewiseField>) -> EntropyOutcome {
    let uncontrolled = measures::entropy_trace(&res.spec, &PiecewiseField::zeros(res.grid));
    let controlled = field.map(|f| measures::entropy_trace(&res.spec, f).into_iter().map(|(_, s)| s).collect());
    EntropyOutcome {
        times: uncontrolled.iter().map(|(t, _)| *t).collect(),
        controlled,
        uncontrolled: uncontrolled.into_iter().map(|(_, s)| s).collect(),
    }
}

pub fn run_entropy(res: &Resolved, field: Option<&PiecewiseField>) -> Result<EntropyOutcome> {
    let outcome = compute_entropy(res, field);
    let dir = output_dir(res)?;
    write_artifact(&dir, "entropy.json", "entropy", res, &outcome)?;
    let path = dir.join("entropy.csv");
    match &outcome.controlled {
        Some(c) => {
            let rows = (0..outcome.times.len()).map(|k| vec![outcome.times[k].into(), c[k].into(), outcome.uncontrolled[k].into()]);
            io::write_csv(&path, &["t", "controlled", "uncontrolled"], rows)?;
        }
        None => {
            let rows = (0..outcome.times.len()).map(|k| vec![outcome.times[k].into(), outcome.uncontrolled[k].into()]);
            io::write_csv(&path, &["t", "uncontrolled"], rows)?;
        }
    }
    Ok(outcome)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleOutcome {
    /// The field on the configured (unperturbed) system.
    pub nominal: Summary,
    pub report: EnsembleReport,
    pub fidelity_skewness: f64,
    pub fidelity_histogram: Histogram,
    pub entropy_histogram: Histogram,
}

pub fn compute_ensemble<E: Executor>(res: &Resolved, field: &PiecewiseField, executor: &E) -> Result<EnsembleOutcome> {
    let report = robustness::evaluate_ensemble(field, &res.spec, &res.target, &res.ensemble, executor)?;
    let f: Vec<f64> = report.samples.iter().map(|s| s.fidelity).collect();
    let s: Vec<f64> = report.samples.iter().map(|s| s.entropy).collect();
    let bins = res.config.ensemble.bins;
    Ok(EnsembleOutcome {
        nominal: Summary::of(&res.spec, field, &res.target)?,
        fidelity_skewness: robustness::skewness(&f)?,
        fidelity_histogram: robustness::histogram(&f, bins)?,
        entropy_histogram: robustness::histogram(&s, bins)?,
        report,
    })
}

fn histogram_rows(h: &Histogram) -> impl Iterator<Item = Vec<Cell>> + '_ {
    h.counts.iter().enumerate().map(|(b, &c)| vec![h.edges[b].into(), h.edges[b + 1].into(), c.into()])
}

/// Writes `ensemble.json`, `samples.csv` and one histogram CSV per quantity.
pub fn run_ensemble<E: Executor>(res: &Resolved, field: &PiecewiseField, executor: &E) -> Result<EnsembleOutcome> {
    let outcome = compute_ensemble(res, field, executor)?;
    let dir = output_dir(res)?;
    write_artifact(&dir, "ensemble.json", "ensemble", res, &outcome)?;
    let pairs: Vec<String> = res.spec.pairs().map(|(i, j)| format!("gamma_{i}_{j}")).collect();
    let mut header = vec!["draw".to_string()];
    header.extend(pairs);
    header.extend(["fidelity".to_string(), "entropy".to_string()]);
    let rows = outcome.report.samples.iter().map(|s| {
        let mut row: Vec<Cell> = vec![s.draw.into()];
        row.extend(s.couplings.iter().map(|&g| Cell::from(g)));
        row.extend([s.fidelity.into(), s.entropy.into()]);
        row
    });
    io::write_csv(&dir.join("samples.csv"), &header, rows)?;
    let header = ["bin_lo", "bin_hi", "count"];
    io::write_csv(&dir.join("histogram_fidelity.csv"), &header, histogram_rows(&outcome.fidelity_histogram))?;
    io::write_csv(&dir.join("histogram_entropy.csv"), &header, histogram_rows(&outcome.entropy_histogram))?;
    Ok(outcome)
}

/// Recomputes `(f_mean, f_sd, s_mean, s_sd)` from a stored `samples.csv`.
pub fn statistics_from_samples(path: &Path) -> Result<(f64, f64, f64, f64)> {
    let (header, rows) = io::read_csv(path)?;
    let col = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| CliError::validation(path.display().to_string(), format!("missing column `{name}`")))
    };
    let (fi, si) = (col("fidelity")?, col("entropy")?);
    let f: Vec<f64> = rows.iter().map(|r| r[fi]).collect();
    let s: Vec<f64> = rows.iter().map(|r| r[si]).collect();
    let (f_mean, f_sd) = robustness::statistics(&f)?;
    let (s_mean, s_sd) = robustness::statistics(&s)?;
    Ok((f_mean, f_sd, s_mean, s_sd))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub limit: f64,
    pub passed: bool,
    /// Informational checks do not affect the exit code.
    pub required: bool,
}

impl Check {
    fn below(name: &str, value: f64, limit: f64) -> Self {
        Self {
            name: name.into(),
            value,
            limit,
            passed: value < limit,
            required: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub checks: Vec<Check>,
    pub passed: bool,
}

/// A smooth, nonzero probe field on `grid` for the invariant checks.
pub fn probe_field(grid: TimeGrid) -> PiecewiseField {
    let tf = grid.t_final();
    PiecewiseField::from_fn(grid, |t| 1.5 * (PI * t / tf).sin().powi(2) * (t.cos() + 0.4 * (1.3 * t + 0.7).cos()))
        .expect("finite probe field")
}

const CHECK_FD_COMPONENTS: usize = 8;

/// Runs the invariant suite on the configured system.
pub fn compute_check(res: &Resolved) -> Result<CheckReport> {
    let spec = &res.spec;
    let n = spec.n();
    let field = probe_field(res.grid);
    let mut checks = Vec::new();

    let bound = res.config.optimizer.gradient.amplitude_bound.unwrap_or(4.0);
    let herm = [-bound, -1.0, 0.0, 1.0, bound]
        .iter()
        .map(|&c| hilbert::hermiticity_error(&model::hamiltonian_at(spec, c)))
        .fold(0.0, f64::max);
    checks.push(Check::below("hamiltonian_hermiticity", herm, 1e-12));

    let traj = dynamics::propagate(spec, &field, true);
    let drift = traj.unitaries().iter().map(hilbert::unitarity_error).fold(0.0, f64::max);
    checks.push(Check::below("propagator_unitarity", drift, 1e-10));

    let mut rng = ChaCha8Rng::seed_from_u64(res.config.seed);
    let worst_gate = (0..10)
        .map(|_| {
            let phi = hilbert::random_unitary(1 << n, &mut rng);
            let u = hilbert::kron(res.target.matrix(), &phi);
            measures::distance(&u, &res.target, n).map(|d| d.j)
        })
        .collect::<spingate_core::Result<Vec<f64>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    checks.push(Check::below("perfect_gate_distance", worst_gate, 1e-10));

    let alpha = res.config.optimizer.gradient.alpha;
    let analytic = gradient::gradient_k(spec, &field, &res.target, alpha).gradient;
    let scale = analytic.iter().fold(0.0f64, |m, g| m.max(g.abs()));
    let m = field.values().len();
    let picks: Vec<usize> = (0..CHECK_FD_COMPONENTS.min(m)).map(|i| i * m / CHECK_FD_COMPONENTS.min(m)).collect();
    let fd_error = picks
        .iter()
        .map(|&k| {
            let shifted = |s: f64| {
                let mut v = field.values().to_vec();
                v[k] += s;
                let f = PiecewiseField::new(res.grid, v).expect("finite field");
                gradient::objective_k(spec, &f, &res.target, alpha)
            };
            let h = 1e-4;
            let fd = (8.0 * (shifted(h) - shifted(-h)) - (shifted(2.0 * h) - shifted(-2.0 * h))) / (12.0 * h);
            (analytic[k] - fd).abs() / fd.abs().max(1e-3 * scale)
        })
        .fold(0.0, f64::max);
    checks.push(Check::below("gradient_vs_finite_differences", fd_error, 1e-5));

    let b_final = hilbert::random_unitary(spec.dim(), &mut rng);
    let costates = dynamics::propagate_costate(spec, &field, &b_final)?;
    let pairing = |k: usize| (&costates[k] * &traj.unitaries()[k]).trace();
    let reference = pairing(0);
    let pairing_drift = (0..costates.len())
        .map(|k| (pairing(k) - reference).norm() / reference.norm().max(1e-300))
        .fold(0.0, f64::max);
    checks.push(Check::below("costate_pairing", pairing_drift, 1e-8));

    if n <= 2 {
        let dim = model::controllability_dim(spec, 64)?;
        let full = spec.dim() * spec.dim() - 1;
        checks.push(Check {
            name: "controllability_dim".into(),
            value: dim as f64,
            limit: full as f64,
            passed: dim == full,
            required: false,
        });
    }

    let passed = checks.iter().all(|c| c.passed || !c.required);
    Ok(CheckReport { checks, passed })
}

pub fn run_check(res: &Resolved) -> Result<CheckReport> {
    let report = compute_check(res)?;
    let dir = output_dir(res)?;
    write_artifact(&dir, "check.json", "check", res, &report)?;
    Ok(report)
}

/// Unitary of the configured system under `field`, for callers that need the raw propagator.
pub fn final_unitary(res: &Resolved, field: &PiecewiseField) -> ComplexMatrix {
    dynamics::propagate_with(&Hamiltonian::new(&res.spec), field, false).into_final()
}
