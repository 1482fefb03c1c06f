//! Adjoint-gradient minimization of `K = J + (α/2)·ℰ` over the field values.
//!
//! The gradient is exact for the discrete dynamics. The forward pass stores
//! `U(t_k)`. The final costate comes from the chain rule through
//! `J = sqrt(1 − 2λ²‖Q‖_*)` with the nuclear-norm subgradient `WV†`, and the
//! costate `B(t_k) = B(t_{k+1}) exp(−iH_k dt)` is carried backwards. Then
//!
//! ```text
//! ∂K/∂c_k = Re trace(U_k B_{k+1} ∂exp(−iH_k dt)/∂c_k) + α c_k dt
//! ```
//!
//! where the derivative of each step propagator is taken in the eigenbasis of
//! `H_k` (divided differences).
//!
//! Near a perfect gate `dJ = −(λ²/J) dN` is singular, so below
//! [`SINGULAR_J`] the squared distance `J² = 1 − 2λ²‖Q‖_*` is used instead;
//! both share their minimizers.

use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)] // shadowed by inherent methods whenever std is linked
use num_traits::Float;

use crate::dynamics::{self, PiecewiseField, Step};
use crate::hilbert::{self, ComplexMatrix};
use crate::measures::{self, lambda_sq, GateTarget};
use crate::model::{Hamiltonian, SystemSpec};
use crate::Result;

/// Distance below which the gradient switches to the squared objective.
pub const SINGULAR_J: f64 = 1e-9;

/// Consecutive sub-`tol_obj` decreases, each followed by a steepest-descent
/// restart, before the optimizer reports convergence.
pub const STALL_PATIENCE: usize = 3;

/// Step caches above this dimension are recomputed in the backward pass
/// instead of stored.
const STEP_CACHE_MAX_DIM: usize = 32;

/// Which function of the gate distance is minimized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum ObjectivePath {
    /// `J + (α/2)ℰ`
    #[default]
    Distance,
    /// `J² + (α/2)ℰ`, i.e. maximizing the nuclear norm of `Q`.
    Squared,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Direction {
    SteepestDescent,
    /// Polak–Ribière (clamped at zero), restarted whenever the direction
    /// stops being a descent direction.
    #[default]
    ConjugateGradient,
}

/// Armijo backtracking parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct LineSearch {
    pub initial_step: f64,
    pub shrink: f64,
    pub armijo: f64,
    pub max_backtracks: usize,
    /// Start each search from twice the previously accepted step instead of
    /// `initial_step` (capped at `1e3 · initial_step`).
    pub adaptive: bool,
}

impl Default for LineSearch {
    fn default() -> Self {
        Self {
            initial_step: 1.0,
            shrink: 0.5,
            armijo: 1e-4,
            max_backtracks: 40,
            adaptive: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct GradConfig {
    /// Fluence weight `α >= 0`.
    pub alpha: f64,
    pub max_iters: usize,
    pub line_search: LineSearch,
    /// Stop when the L² norm of the functional gradient drops below this.
    pub tol_grad: f64,
    /// Stop when an accepted step lowers the objective by less than this
    /// (relative to `1 + |K|`).
    pub tol_obj: f64,
    /// Stop (or skip optimization) once `J <= tol_distance`.
    pub tol_distance: f64,
    /// Optional clipping bound `|c_k| <= amplitude_bound`.
    pub amplitude_bound: Option<f64>,
    pub direction: Direction,
    pub path: ObjectivePath,
}

impl Default for GradConfig {
    fn default() -> Self {
        Self {
            alpha: 1e-4,
            max_iters: 2000,
            line_search: LineSearch::default(),
            tol_grad: 1e-8,
            tol_obj: 1e-12,
            tol_distance: 1e-9,
            amplitude_bound: Some(4.0),
            direction: Direction::default(),
            path: ObjectivePath::default(),
        }
    }
}

impl GradConfig {
    pub fn validate(&self) -> Result<()> {
        use crate::Error::InvalidConfig;
        use alloc::format;
        if !(self.alpha.is_finite() && self.alpha >= 0.0) {
            return Err(InvalidConfig(format!("alpha = {} must be non-negative", self.alpha)));
        }
        for (name, v) in [("tol_grad", self.tol_grad), ("tol_obj", self.tol_obj)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(InvalidConfig(format!("{name} = {v} must be positive")));
            }
        }
        if !(self.tol_distance.is_finite() && self.tol_distance >= 0.0) {
            return Err(InvalidConfig(format!("tol_distance = {} must be non-negative", self.tol_distance)));
        }
        let ls = &self.line_search;
        if !(ls.initial_step > 0.0 && ls.shrink > 0.0 && ls.shrink < 1.0 && ls.armijo > 0.0 && ls.armijo < 1.0) {
            return Err(InvalidConfig("line search needs initial_step > 0, shrink and armijo in (0, 1)".into()));
        }
        if let Some(b) = self.amplitude_bound {
            if !(b.is_finite() && b > 0.0) {
                return Err(InvalidConfig(format!("amplitude_bound = {b} must be positive")));
            }
        }
        Ok(())
    }
}

/// Value (and optionally gradient) of the objective at one field.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub j: f64,
    pub fluence: f64,
    pub path: ObjectivePath,
    pub objective: f64,
    /// `∂K/∂c_k`; empty when not requested.
    pub gradient: Vec<f64>,
    /// Set when the singularity guard replaced `J` by `J²`.
    pub squared_fallback: bool,
}

impl Evaluation {
    pub fn fidelity(&self) -> f64 {
        1.0 - self.j
    }
}

/// `K = J(U(t_f)) + (α/2) Σ c_k² dt`.
pub fn objective_k(spec: &SystemSpec, field: &PiecewiseField, target: &GateTarget, alpha: f64) -> f64 {
    let u = dynamics::propagate(spec, field, false).into_final();
    let j = measures::distance(&u, target, spec.n()).expect("dimension matches").j;
    j + 0.5 * alpha * field.fluence()
}

/// Exact gradient of [`objective_k`]. Falls back to the squared objective
/// (and flags it) when `J < SINGULAR_J`.
pub fn gradient_k(spec: &SystemSpec, field: &PiecewiseField, target: &GateTarget, alpha: f64) -> Evaluation {
    evaluate(&Hamiltonian::new(spec), spec.n(), field, target, alpha, ObjectivePath::Distance, true)
}

/// Objective and gradient along an explicit path.
pub fn evaluate(
    ham: &Hamiltonian,
    n: usize,
    field: &PiecewiseField,
    target: &GateTarget,
    alpha: f64,
    requested: ObjectivePath,
    with_gradient: bool,
) -> Evaluation {
    let grid = *field.grid();
    let dt = grid.dt();
    let fluence = field.fluence();
    let cache_steps = with_gradient && ham.dim() <= STEP_CACHE_MAX_DIM;

    let mut u = hilbert::identity(ham.dim());
    let mut forward: Vec<ComplexMatrix> = Vec::with_capacity(if with_gradient { grid.steps() + 1 } else { 0 });
    let mut steps: Vec<Step> = Vec::with_capacity(if cache_steps { grid.steps() } else { 0 });
    for &c in field.values() {
        if with_gradient {
            forward.push(u.clone());
        }
        let step = Step::new(ham, c, dt);
        u = &step.propagator * &u;
        if cache_steps {
            steps.push(step);
        }
    }

    let (dist, polar) = measures::distance_with_polar(&u, target, n).expect("dimension matches");
    let j = dist.j;
    let (path, squared_fallback) = match requested {
        ObjectivePath::Distance if j < SINGULAR_J => (ObjectivePath::Squared, true),
        p => (p, false),
    };
    let objective = match path {
        ObjectivePath::Distance => j,
        ObjectivePath::Squared => j * j,
    } + 0.5 * alpha * fluence;

    let mut eval = Evaluation {
        j,
        fluence,
        path,
        objective,
        gradient: Vec::new(),
        squared_fallback,
    };
    if !with_gradient {
        return eval;
    }

    // dN = Re trace((G⊗WV†)† dU)
    let lam2 = lambda_sq(n);
    let coef = match path {
        ObjectivePath::Distance => -lam2 / j,
        ObjectivePath::Squared => -2.0 * lam2,
    };
    let mut costate = hilbert::kron(target.matrix(), &polar).adjoint().scale(coef);

    let dh = ham.control_derivative();
    let mut gradient = vec![0.0; grid.steps()];
    for k in (0..grid.steps()).rev() {
        let c = field.values()[k];
        let recomputed;
        let step = if cache_steps {
            &steps[k]
        } else {
            recomputed = Step::new(ham, c, dt);
            &recomputed
        };
        // Re trace(U_k B_{k+1} V D V†) = Re trace((V† U_k B_{k+1} V) D)
        let v = &step.eigen.vectors;
        let d = step.derivative_in_eigenbasis(&dh, dt);
        let x = v.adjoint() * (&forward[k] * &costate) * v;
        let tr: f64 = x.iter().zip(d.transpose().iter()).map(|(a, b)| (a * b).re).sum();
        gradient[k] = tr + alpha * c * dt;
        costate = &costate * &step.propagator;
    }
    eval.gradient = gradient;
    eval
}

/// Why [`optimize`] stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Termination {
    AlreadyOptimal,
    DistanceTolerance,
    GradientTolerance,
    ObjectiveTolerance,
    MaxIterations,
    LineSearchFailed,
}

#[derive(Debug, Clone)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct OptimReport {
    pub field: PiecewiseField,
    /// Objective after each accepted iteration, starting with the initial
    /// value.
    pub objective_history: Vec<f64>,
    pub fidelity: f64,
    pub fluence: f64,
    /// L² norm of the functional gradient at the returned field.
    pub grad_norm: f64,
    pub iterations: usize,
    pub termination: Termination,
    /// Iteration at which the singularity guard switched to `J²`.
    pub squared_from: Option<usize>,
}

/// L² norm of the functional gradient `(∂K/∂c_k)/dt`.
fn functional_norm(gradient: &[f64], dt: f64) -> f64 {
    (gradient.iter().map(|g| g * g).sum::<f64>() / dt).sqrt()
}

/// Descent on `K` from `init` with Armijo backtracking along the functional
/// (L²) gradient direction `−(∂K/∂c_k)/dt`.
pub fn optimize(spec: &SystemSpec, init: &PiecewiseField, target: &GateTarget, config: &GradConfig) -> Result<OptimReport> {
    config.validate()?;
    let ham = Hamiltonian::new(spec);
    let n = spec.n();
    let grid = *init.grid();
    let dt = grid.dt();
    let ls = config.line_search;

    let mut field = init.clone();
    if let Some(b) = config.amplitude_bound {
        field.clip(b);
    }
    let mut path = config.path;
    let mut squared_from = None;
    let mut current = evaluate(&ham, n, &field, target, config.alpha, path, true);
    if current.squared_fallback {
        path = ObjectivePath::Squared;
        squared_from = Some(0);
    }
    let mut history = vec![current.objective];
    // Gradient with components pinned at the amplitude bound (and pushing outward) removed.
    let projected = |field: &PiecewiseField, gradient: &[f64]| -> Vec<f64> {
        match config.amplitude_bound {
            None => gradient.to_vec(),
            Some(b) => field
                .values()
                .iter()
                .zip(gradient)
                .map(|(&c, &g)| if (c >= b && g < 0.0) || (c <= -b && g > 0.0) { 0.0 } else { g })
                .collect(),
        }
    };

    let finish = |field: PiecewiseField, current: &Evaluation, history: Vec<f64>, iterations, termination, squared_from| {
        Ok(OptimReport {
            fidelity: current.fidelity(),
            fluence: field.fluence(),
            grad_norm: functional_norm(&projected(&field, &current.gradient), dt),
            field,
            objective_history: history,
            iterations,
            termination,
            squared_from,
        })
    };

    if current.j <= config.tol_distance {
        return finish(field, &current, history, 0, Termination::AlreadyOptimal, squared_from);
    }

    let mut free = projected(&field, &current.gradient);
    let mut direction: Vec<f64> = free.iter().map(|g| -g / dt).collect();
    let mut prev_gradient = free.clone();
    let mut last_step = ls.initial_step;
    let mut stalls = 0;
    for iter in 0..config.max_iters {
        if functional_norm(&free, dt) < config.tol_grad {
            return finish(field, &current, history, iter, Termination::GradientTolerance, squared_from);
        }
        let slope: f64 = direction.iter().zip(&free).map(|(d, g)| d * g).sum();
        if !(slope < 0.0) {
            direction = free.iter().map(|g| -g / dt).collect();
        }

        let mut step = if ls.adaptive {
            (2.0 * last_step).min(1e3 * ls.initial_step)
        } else {
            ls.initial_step
        };
        let mut accepted = None;
        for _ in 0..=ls.max_backtracks {
            let values: Vec<f64> = field.values().iter().zip(&direction).map(|(c, d)| c + step * d).collect();
            let mut trial = PiecewiseField::new(grid, values)?;
            if let Some(b) = config.amplitude_bound {
                trial.clip(b);
            }
            let moved: f64 = trial
                .values()
                .iter()
                .zip(field.values())
                .zip(&current.gradient)
                .map(|((t, c), g)| (t - c) * g)
                .sum();
            let value = evaluate(&ham, n, &trial, target, config.alpha, path, false).objective;
            if value <= current.objective + ls.armijo * moved.min(0.0) {
                last_step = step;
                accepted = Some(trial);
                break;
            }
            step *= ls.shrink;
        }

        let Some(trial) = accepted else {
            if direction.iter().zip(&free).all(|(d, g)| *d == -g / dt) {
                return finish(field, &current, history, iter, Termination::LineSearchFailed, squared_from);
            }
            // Retry from steepest descent before giving up.
            direction = free.iter().map(|g| -g / dt).collect();
            continue;
        };

        let previous = current.objective;
        field = trial;
        current = evaluate(&ham, n, &field, target, config.alpha, path, true);
        if current.squared_fallback && path == ObjectivePath::Distance {
            path = ObjectivePath::Squared;
            squared_from = Some(iter + 1);
        }
        history.push(current.objective);

        if current.j <= config.tol_distance {
            return finish(field, &current, history, iter + 1, Termination::DistanceTolerance, squared_from);
        }
        free = projected(&field, &current.gradient);
        let path_switched = current.path == ObjectivePath::Squared && squared_from == Some(iter + 1);
        let stalled = !path_switched && previous - current.objective < config.tol_obj * (1.0 + previous.abs());
        stalls = if stalled { stalls + 1 } else { 0 };
        if stalls >= STALL_PATIENCE {
            return finish(field, &current, history, iter + 1, Termination::ObjectiveTolerance, squared_from);
        }

        direction = match config.direction {
            _ if stalled => free.iter().map(|g| -g / dt).collect(),
            Direction::SteepestDescent => free.iter().map(|g| -g / dt).collect(),
            Direction::ConjugateGradient => {
                let num: f64 = free.iter().zip(&prev_gradient).map(|(g, p)| g * (g - p)).sum();
                let den: f64 = prev_gradient.iter().map(|p| p * p).sum();
                let beta = if den > 0.0 { (num / den).max(0.0) } else { 0.0 };
                free.iter()
                    .zip(&direction)
                    .map(|(g, d)| if *g == 0.0 && config.amplitude_bound.is_some() { 0.0 } else { -g / dt + beta * d })
                    .collect()
            }
        };
        prev_gradient = free.clone();
    }
    let iters = config.max_iters;
    finish(field, &current, history, iters, Termination::MaxIterations, squared_from)
}
