//! Exact propagation under piecewise-constant control.
//!
//! On step `k` the field is held at `c_k` over `[t_k, t_{k+1})` and the step
//! propagator `exp(−i H(c_k) dt)` is formed from the spectral decomposition
//! of the Hermitian `H(c_k)`. Each step is therefore exact, and the discrete
//! gradient used by the optimizers is the exact gradient of what is simulated.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;
#[allow(unused_imports)] // shadowed by inherent methods whenever std is linked
use num_traits::Float;

use crate::hilbert::{self, hermitian_eigen, hermiticity_error, ComplexMatrix, HermitianEigen, StateVector};
use crate::model::{Hamiltonian, SystemSpec};
use crate::{Error, Result};

/// Default upper bound on the step length, in units of `1/ω_0`.
pub const DEFAULT_MAX_DT: f64 = 0.05;

/// Hermiticity tolerance for externally supplied Hamiltonians.
const HERMITIAN_TOL: f64 = 1e-10;

/// Uniform grid of `steps` intervals on `[0, t_final]`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TimeGrid {
    t_final: f64,
    steps: usize,
}

impl TimeGrid {
    pub fn new(t_final: f64, steps: usize) -> Result<Self> {
        if !(t_final.is_finite() && t_final > 0.0) {
            return Err(Error::InvalidGrid(format!("final time {t_final} must be positive")));
        }
        if steps == 0 {
            return Err(Error::InvalidGrid("at least one time step is required".into()));
        }
        Ok(Self { t_final, steps })
    }

    /// Finest uniform grid whose step does not exceed `max_dt`.
    pub fn with_max_step(t_final: f64, max_dt: f64) -> Result<Self> {
        if !(max_dt.is_finite() && max_dt > 0.0) {
            return Err(Error::InvalidGrid(format!("maximum step {max_dt} must be positive")));
        }
        let steps = (t_final / max_dt).ceil().max(1.0) as usize;
        Self::new(t_final, steps)
    }

    /// Grid with `dt <= 0.05` (500 steps for `t_final = 25`).
    pub fn with_default_resolution(t_final: f64) -> Result<Self> {
        Self::with_max_step(t_final, DEFAULT_MAX_DT)
    }

    pub fn t_final(&self) -> f64 {
        self.t_final
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn dt(&self) -> f64 {
        self.t_final / self.steps as f64
    }

    /// `t_k = k·dt` for `k = 0..=steps`.
    pub fn time(&self, k: usize) -> f64 {
        if k == self.steps {
            self.t_final
        } else {
            k as f64 * self.dt()
        }
    }

    pub fn midpoint(&self, k: usize) -> f64 {
        (k as f64 + 0.5) * self.dt()
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..=self.steps).map(|k| self.time(k))
    }

    /// Whether `dt · spectral_radius <= 0.5`, i.e. each step rotates phases by
    /// at most half a radian.
    pub fn resolves(&self, spectral_radius: f64) -> bool {
        self.dt() * spectral_radius <= 0.5
    }
}

/// Control amplitudes `c_k` held constant on each grid interval.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PiecewiseField {
    grid: TimeGrid,
    values: Vec<f64>,
}

impl PiecewiseField {
    pub fn new(grid: TimeGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.steps() {
            return Err(Error::InvalidField(format!(
                "{} values for a grid of {} steps",
                values.len(),
                grid.steps()
            )));
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidField(format!("value {k} is not finite")));
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: TimeGrid) -> Self {
        Self {
            grid,
            values: vec![0.0; grid.steps()],
        }
    }

    /// Samples `f` at interval midpoints.
    pub fn from_fn(grid: TimeGrid, f: impl Fn(f64) -> f64) -> Result<Self> {
        let values = (0..grid.steps()).map(|k| f(grid.midpoint(k))).collect();
        Self::new(grid, values)
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// `ℰ = Σ c_k² dt`.
    pub fn fluence(&self) -> f64 {
        self.values.iter().map(|c| c * c).sum::<f64>() * self.grid.dt()
    }

    pub fn max_amplitude(&self) -> f64 {
        self.values.iter().fold(0.0, |m, c| m.max(c.abs()))
    }

    /// Clamps every value into `[-bound, bound]`.
    pub fn clip(&mut self, bound: f64) {
        for v in &mut self.values {
            *v = v.clamp(-bound, bound);
        }
    }

    /// Splits into the fields on `[0, t_k)` and `[t_k, t_f)`.
    pub fn split_at(&self, k: usize) -> Result<(Self, Self)> {
        if k == 0 || k >= self.grid.steps() {
            return Err(Error::InvalidField(format!(
                "split index {k} must lie strictly inside 0..{}",
                self.grid.steps()
            )));
        }
        let dt = self.grid.dt();
        let head = TimeGrid::new(k as f64 * dt, k)?;
        let tail = TimeGrid::new(self.grid.t_final() - k as f64 * dt, self.grid.steps() - k)?;
        Ok((
            Self::new(head, self.values[..k].to_vec())?,
            Self::new(tail, self.values[k..].to_vec())?,
        ))
    }
}

/// Propagators `U(t_k)` on a grid, starting from `U(0) = I`.
///
/// A trajectory built with `keep_trajectory = false` holds only the final
/// propagator.
#[derive(Debug, Clone)]
pub struct UnitaryTrajectory {
    grid: TimeGrid,
    unitaries: Vec<ComplexMatrix>,
}

impl UnitaryTrajectory {
    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn is_full(&self) -> bool {
        self.unitaries.len() == self.grid.steps() + 1
    }

    pub fn unitaries(&self) -> &[ComplexMatrix] {
        &self.unitaries
    }

    pub fn final_unitary(&self) -> &ComplexMatrix {
        self.unitaries.last().expect("trajectory is never empty")
    }

    pub fn into_final(mut self) -> ComplexMatrix {
        self.unitaries.pop().expect("trajectory is never empty")
    }
}

/// Step propagator `exp(−i h dt)`; rejects non-Hermitian `h`.
pub fn step_propagator(h: &ComplexMatrix, dt: f64) -> Result<ComplexMatrix> {
    let err = hermiticity_error(h);
    let scale = h.iter().fold(1.0f64, |m, z| m.max(z.norm()));
    if !(err <= HERMITIAN_TOL * scale) {
        return Err(Error::NotHermitian(err));
    }
    Ok(hilbert::exp_hermitian(h, dt))
}

/// Eigendecomposition of `H(c_k)` together with its step propagator.
#[derive(Debug, Clone)]
pub(crate) struct Step {
    pub eigen: HermitianEigen,
    pub propagator: ComplexMatrix,
}

impl Step {
    pub fn new(ham: &Hamiltonian, c: f64, dt: f64) -> Self {
        let eigen = hermitian_eigen(&ham.at(c));
        let propagator = eigen.map(|l| Complex64::from_polar(1.0, -l * dt));
        Self { eigen, propagator }
    }

    /// Directional derivative of `exp(−i H dt)` along `dH`, expressed in the
    /// eigenbasis of `H`: returns the matrix `D` with
    /// `d exp = V D V†` (divided differences of `exp(−iλ dt)`).
    pub fn derivative_in_eigenbasis(&self, dh: &ComplexMatrix, dt: f64) -> ComplexMatrix {
        let v = &self.eigen.vectors;
        let lam = &self.eigen.values;
        let rotated = v.adjoint() * dh * v;
        ComplexMatrix::from_fn(rotated.nrows(), rotated.ncols(), |a, b| {
            // (e^{−iλ_a dt} − e^{−iλ_b dt}) / (λ_a − λ_b), written without cancellation.
            let mid = 0.5 * (lam[a] + lam[b]);
            let x = 0.5 * (lam[a] - lam[b]) * dt;
            let sinc = if x == 0.0 { 1.0 } else { x.sin() / x };
            let divided = Complex64::from_polar(1.0, -mid * dt) * Complex64::new(0.0, -dt * sinc);
            divided * rotated[(a, b)]
        })
    }
}

/// Forward propagation `U(t_{k+1}) = exp(−i H(c_k) dt) U(t_k)`.
pub fn propagate(spec: &SystemSpec, field: &PiecewiseField, keep_trajectory: bool) -> UnitaryTrajectory {
    propagate_with(&Hamiltonian::new(spec), field, keep_trajectory)
}

pub fn propagate_with(ham: &Hamiltonian, field: &PiecewiseField, keep_trajectory: bool) -> UnitaryTrajectory {
    let grid = *field.grid();
    let dt = grid.dt();
    let mut u = hilbert::identity(ham.dim());
    let mut unitaries = Vec::with_capacity(if keep_trajectory { grid.steps() + 1 } else { 1 });
    if keep_trajectory {
        unitaries.push(u.clone());
    }
    for &c in field.values() {
        let step = Step::new(ham, c, dt);
        u = &step.propagator * &u;
        if keep_trajectory {
            unitaries.push(u.clone());
        }
    }
    if !keep_trajectory {
        unitaries.push(u);
    }
    UnitaryTrajectory { grid, unitaries }
}

/// Costate trajectory `B(t_k) = B(t_{k+1}) exp(−i H(c_k) dt)`, integrated
/// backwards from `B(t_f) = b_final`. Entry `k` is `B(t_k)`.
pub fn propagate_costate(spec: &SystemSpec, field: &PiecewiseField, b_final: &ComplexMatrix) -> Result<Vec<ComplexMatrix>> {
    hilbert::check_square(b_final, spec.dim())?;
    let ham = Hamiltonian::new(spec);
    let dt = field.grid().dt();
    let steps = field.grid().steps();
    let mut out = vec![b_final.clone(); steps + 1];
    for k in (0..steps).rev() {
        let step = Step::new(&ham, field.values()[k], dt);
        out[k] = &out[k + 1] * &step.propagator;
    }
    Ok(out)
}

/// Ascending eigenvalues of `H(c_k)` for every step.
pub fn instantaneous_spectrum(spec: &SystemSpec, field: &PiecewiseField) -> Vec<Vec<f64>> {
    let ham = Hamiltonian::new(spec);
    field
        .values()
        .iter()
        .map(|&c| hilbert::hermitian_eigenvalues(&ham.at(c)))
        .collect()
}

/// Applies each step propagator to `psi0` and returns `ψ(t_k)` for
/// `k = 0..=steps`.
pub fn propagate_state(spec: &SystemSpec, field: &PiecewiseField, psi0: &StateVector) -> Result<Vec<StateVector>> {
    if psi0.len() != spec.dim() {
        return Err(Error::DimensionMismatch {
            expected: spec.dim(),
            rows: psi0.len(),
            cols: 1,
        });
    }
    let ham = Hamiltonian::new(spec);
    let dt = field.grid().dt();
    let mut states = Vec::with_capacity(field.grid().steps() + 1);
    states.push(psi0.clone());
    for &c in field.values() {
        let step = Step::new(&ham, c, dt);
        let next = &step.propagator * states.last().expect("nonempty");
        states.push(next);
    }
    Ok(states)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::{frobenius_norm, kron, pauli, unitarity_error, SpinAxis, I};
    use crate::model::default_spec;
    use core::f64::consts::PI;

    fn smooth_field(grid: TimeGrid) -> PiecewiseField {
        let tf = grid.t_final();
        PiecewiseField::from_fn(grid, |t| {
            let env = (PI * t / tf).sin().powi(2);
            env * (1.3 * (1.02 * t).cos() + 0.6 * (0.7 * t + 0.4).sin())
        })
        .unwrap()
    }

    #[test]
    fn grid_resolution() {
        let g = TimeGrid::with_default_resolution(25.0).unwrap();
        assert_eq!(g.steps(), 500);
        assert!(g.dt() <= DEFAULT_MAX_DT);
        assert_eq!(g.time(500), 25.0);
        assert!(TimeGrid::new(0.0, 10).is_err());
        assert!(TimeGrid::new(1.0, 0).is_err());
        assert!(g.resolves(10.0));
        assert!(!g.resolves(11.0));
    }

    #[test]
    fn field_validation_and_fluence() {
        let g = TimeGrid::new(2.0, 4).unwrap();
        assert!(PiecewiseField::new(g, vec![0.0; 3]).is_err());
        assert!(PiecewiseField::new(g, vec![0.0, f64::NAN, 0.0, 0.0]).is_err());
        let mut f = PiecewiseField::new(g, vec![1.0, -2.0, 3.0, 0.0]).unwrap();
        assert_eq!(f.fluence(), 14.0 * 0.5);
        assert_eq!(f.max_amplitude(), 3.0);
        f.clip(1.5);
        assert_eq!(f.values(), &[1.0, -1.5, 1.5, 0.0]);
    }

    #[test]
    fn free_period_is_minus_identity() {
        let h = pauli(SpinAxis::Z).scale(0.5);
        let u = step_propagator(&h, 2.0 * PI).unwrap();
        assert!(frobenius_norm(&(u + hilbert::identity(2))) < 1e-14);
    }

    #[test]
    fn zero_step_is_identity() {
        let h = pauli(SpinAxis::Y).scale(0.3);
        assert!(frobenius_norm(&(step_propagator(&h, 0.0).unwrap() - hilbert::identity(2))) < 1e-15);
    }

    #[test]
    fn pi_pulse_about_x() {
        let u = step_propagator(&pauli(SpinAxis::X).scale(0.5), PI).unwrap();
        assert!(frobenius_norm(&(u - pauli(SpinAxis::X) * (-I))) < 1e-14);
    }

    #[test]
    fn non_hermitian_step_rejected() {
        let mut h = pauli(SpinAxis::X);
        h[(0, 1)] = Complex64::new(2.0, 0.0);
        assert!(matches!(step_propagator(&h, 1.0), Err(Error::NotHermitian(_))));
    }

    #[test]
    fn free_qubit_closed_form() {
        let spec = default_spec(0, 0.0, 0.0).unwrap();
        let tf = 7.3;
        let field = PiecewiseField::zeros(TimeGrid::new(tf, 50).unwrap());
        let u = propagate(&spec, &field, false).into_final();
        assert!((u[(0, 0)] - Complex64::from_polar(1.0, -tf / 2.0)).norm() < 1e-13);
        assert!((u[(1, 1)] - Complex64::from_polar(1.0, tf / 2.0)).norm() < 1e-13);
        assert!(u[(0, 1)].norm() < 1e-15);
    }

    #[test]
    fn uncoupled_evolution_factorizes() {
        let spec = default_spec(2, 0.0, 0.0).unwrap();
        let tf = 5.0;
        let field = PiecewiseField::zeros(TimeGrid::new(tf, 40).unwrap());
        let u = propagate(&spec, &field, false).into_final();
        let single = |w: f64| step_propagator(&pauli(SpinAxis::Z).scale(0.5 * w), tf).unwrap();
        let expected = kron(&kron(&single(1.0), &single(spec.omegas()[1])), &single(spec.omegas()[2]));
        assert!(frobenius_norm(&(u - expected)) < 1e-12);
    }

    #[test]
    fn uncoupled_driven_evolution_factorizes() {
        // The field only touches the qubit, so with γ = 0 the qubit block
        // evolves as the driven n = 0 system.
        let spec = default_spec(1, 0.0, 0.0).unwrap();
        let field = smooth_field(TimeGrid::new(6.0, 120).unwrap());
        let u = propagate(&spec, &field, false).into_final();
        let qubit = propagate(&default_spec(0, 0.0, 0.0).unwrap(), &field, false).into_final();
        let env = step_propagator(&pauli(SpinAxis::Z).scale(0.5 * spec.omegas()[1]), 6.0).unwrap();
        assert!(frobenius_norm(&(u - kron(&qubit, &env))) < 1e-12);
    }

    #[test]
    fn trajectory_shapes() {
        let spec = default_spec(1, 0.02, 0.0).unwrap();
        let field = smooth_field(TimeGrid::new(3.0, 30).unwrap());
        let full = propagate(&spec, &field, true);
        assert!(full.is_full());
        assert_eq!(full.unitaries().len(), 31);
        assert_eq!(full.unitaries()[0], hilbert::identity(4));
        let last = propagate(&spec, &field, false);
        assert!(!last.is_full());
        assert_eq!(full.final_unitary(), last.final_unitary());
    }

    #[test]
    fn unitarity_over_long_runs() {
        let spec = default_spec(2, 0.02, 0.0175).unwrap();
        let field = smooth_field(TimeGrid::new(60.0, 10_000).unwrap());
        let u = propagate(&spec, &field, false).into_final();
        assert!(unitarity_error(&u) < 1e-10, "{}", unitarity_error(&u));
    }

    #[test]
    fn composition_on_shared_grid() {
        let spec = default_spec(2, 0.02, 0.0175).unwrap();
        let field = smooth_field(TimeGrid::new(10.0, 200).unwrap());
        let (head, tail) = field.split_at(73).unwrap();
        let whole = propagate(&spec, &field, false).into_final();
        let composed = propagate(&spec, &tail, false).into_final() * propagate(&spec, &head, false).into_final();
        assert!(frobenius_norm(&(whole - composed)) < 1e-10);
    }

    #[test]
    fn step_halving_is_second_order() {
        let spec = default_spec(1, 0.02, 0.0).unwrap();
        let tf = 8.0;
        let final_u = |m: usize| propagate(&spec, &smooth_field(TimeGrid::new(tf, m).unwrap()), false).into_final();
        let reference = final_u(6400);
        let e1 = frobenius_norm(&(final_u(100) - &reference));
        let e2 = frobenius_norm(&(final_u(200) - &reference));
        let ratio = e1 / e2;
        assert!((3.5..4.5).contains(&ratio), "error ratio {ratio}");
    }

    #[test]
    fn costate_identity_without_hamiltonian() {
        let spec = SystemSpec::new(vec![1e-300], 0.0, vec![vec![0.0]]).unwrap();
        let field = PiecewiseField::zeros(TimeGrid::new(1.0, 5).unwrap());
        let bs = propagate_costate(&spec, &field, &hilbert::identity(2)).unwrap();
        assert_eq!(bs.len(), 6);
        for b in bs {
            assert!(frobenius_norm(&(b - hilbert::identity(2))) < 1e-15);
        }
    }

    #[test]
    fn costate_matches_closed_form_and_conserves_pairing() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let spec = default_spec(1, 0.02, 0.0).unwrap();
        let field = smooth_field(TimeGrid::new(5.0, 100).unwrap());
        let b_final = hilbert::random_unitary(4, &mut rng).scale(0.7);
        let traj = propagate(&spec, &field, true);
        let bs = propagate_costate(&spec, &field, &b_final).unwrap();
        let uf = traj.final_unitary();
        let pairing0 = (&bs[0] * &traj.unitaries()[0]).trace();
        for (k, (b, u)) in bs.iter().zip(traj.unitaries()).enumerate() {
            let closed = &b_final * uf * u.adjoint();
            assert!(frobenius_norm(&(b - closed)) < 1e-11, "step {k}");
            let p = (b * u).trace();
            assert!((p - pairing0).norm() <= 1e-8 * pairing0.norm());
        }
        assert!(propagate_costate(&spec, &field, &hilbert::identity(2)).is_err());
    }

    #[test]
    fn spectrum_of_driven_qubit() {
        let spec = default_spec(0, 0.0, 0.0).unwrap();
        let g = TimeGrid::new(1.0, 3).unwrap();
        let field = PiecewiseField::new(g, vec![2.0, -2.0, 0.0]).unwrap();
        let spec_k = instantaneous_spectrum(&spec, &field);
        let r = 5f64.sqrt() / 2.0;
        for k in 0..2 {
            assert!((spec_k[k][0] + r).abs() < 1e-14 && (spec_k[k][1] - r).abs() < 1e-14);
        }
        assert!((spec_k[2][1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn zero_field_spectrum_is_constant() {
        let spec = default_spec(2, 0.02, 0.0175).unwrap();
        let field = PiecewiseField::zeros(TimeGrid::new(1.0, 4).unwrap());
        let spectra = instantaneous_spectrum(&spec, &field);
        let drift = hilbert::hermitian_eigenvalues(&crate::model::build_drift(&spec));
        assert!(spectra.iter().all(|s| s == &drift));
    }

    #[test]
    fn eigenbasis_derivative_matches_finite_difference() {
        let spec = default_spec(1, 0.02, 0.0).unwrap();
        let ham = Hamiltonian::new(&spec);
        let (c, dt, h) = (0.8, 0.05, 1e-6);
        let step = Step::new(&ham, c, dt);
        let d = step.derivative_in_eigenbasis(&ham.control_derivative(), dt);
        let v = &step.eigen.vectors;
        let analytic = v * d * v.adjoint();
        let fd = (Step::new(&ham, c + h, dt).propagator - Step::new(&ham, c - h, dt).propagator).unscale(2.0 * h);
        assert!(frobenius_norm(&(analytic - fd)) < 1e-9);
    }
}
