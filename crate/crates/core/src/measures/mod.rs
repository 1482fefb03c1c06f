//! Gate distance, fidelity and decoherence diagnostics.
//!
//! The distance between an evolution `U` of the composite system and a
//! one-qubit target `G` is the Frobenius distance from `U` to the closest
//! `G ⊗ Φ`, minimized over all environment unitaries `Φ` and normalized by
//! `λ_n = 2^{−(n+2)/2}`. The minimization has the closed form
//!
//! ```text
//! J = sqrt(1 − 2 λ_n² ‖Q‖_*),   Q_{νν'} = Σ_{r,r'} conj(G_{rr'}) U_{rν, r'ν'}
//! ```
//!
//! where `‖·‖_*` is the nuclear norm. [`distance_bruteforce`] performs the
//! minimization numerically and exists to cross-check the closed form.

mod bruteforce;

use alloc::string::String;
use alloc::vec::Vec;
use core::f64::consts::FRAC_1_SQRT_2;

use num_complex::Complex64;
#[allow(unused_imports)] // shadowed by inherent methods whenever std is linked
use num_traits::Float;

use crate::dynamics::{self, PiecewiseField};
use crate::hilbert::{self, basis_state, check_square, ComplexMatrix, SpinLabel, StateVector, I, ONE, ZERO};
use crate::model::SystemSpec;
use crate::{Error, Result};

pub use bruteforce::distance_bruteforce;

/// Unitarity tolerance for gate targets.
const TARGET_UNITARITY_TOL: f64 = 1e-12;

/// One-qubit target gate.
#[derive(Debug, Clone, PartialEq)]
pub struct GateTarget {
    name: String,
    matrix: ComplexMatrix,
}

impl GateTarget {
    pub fn new(name: impl Into<String>, matrix: ComplexMatrix) -> Result<Self> {
        check_square(&matrix, 2)?;
        let err = hilbert::unitarity_error(&matrix);
        if !(err <= TARGET_UNITARITY_TOL) {
            return Err(Error::NotUnitary(err));
        }
        Ok(Self {
            name: name.into(),
            matrix,
        })
    }

    /// `(1/√2) [[1, 1], [1, −1]]`
    pub fn hadamard() -> Self {
        let h = Complex64::new(FRAC_1_SQRT_2, 0.0);
        Self::new("hadamard", ComplexMatrix::from_row_slice(2, 2, &[h, h, h, -h])).expect("unitary")
    }

    /// Looks up a standard gate: `identity`, `hadamard`, `x`, `y`, `z`, `s`,
    /// `t`, `sqrt_x`.
    pub fn named(name: &str) -> Option<Self> {
        let m = |e: [Complex64; 4]| ComplexMatrix::from_row_slice(2, 2, &e);
        let matrix = match name {
            "hadamard" => return Some(Self::hadamard()),
            "identity" => hilbert::identity(2),
            "x" => m([ZERO, ONE, ONE, ZERO]),
            "y" => m([ZERO, -I, I, ZERO]),
            "z" => m([ONE, ZERO, ZERO, -ONE]),
            "s" => m([ONE, ZERO, ZERO, I]),
            "t" => m([ONE, ZERO, ZERO, Complex64::from_polar(1.0, core::f64::consts::FRAC_PI_4)]),
            "sqrt_x" => {
                let (a, b) = (Complex64::new(0.5, 0.5), Complex64::new(0.5, -0.5));
                m([a, b, b, a])
            }
            _ => return None,
        };
        Some(Self::new(name, matrix).expect("standard gates are unitary"))
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DistanceResult {
    /// Normalized distance `J ∈ [0, 1]`.
    pub j: f64,
    /// `1 − J`.
    pub fidelity: f64,
    /// `trace sqrt(Q†Q)`.
    pub nuclear_norm: f64,
    pub q: ComplexMatrix,
}

/// Normalization `λ_n² = 2^{−(n+2)}`.
pub fn lambda_sq(n: usize) -> f64 {
    (0.5f64).powi(n as i32 + 2)
}

/// The `2^n × 2^n` matrix `Q` contracting the qubit indices of `u` against
/// `conj(G)`.
pub fn q_matrix(u: &ComplexMatrix, target: &GateTarget, n: usize) -> Result<ComplexMatrix> {
    let env = 1usize << n;
    check_square(u, 2 * env)?;
    let g = target.matrix();
    let mut q = ComplexMatrix::zeros(env, env);
    for r in 0..2 {
        for rp in 0..2 {
            let weight = g[(r, rp)].conj();
            q += u.view((r * env, rp * env), (env, env)) * weight;
        }
    }
    Ok(q)
}

/// Closed-form environment-minimized distance and fidelity.
pub fn distance(u: &ComplexMatrix, target: &GateTarget, n: usize) -> Result<DistanceResult> {
    Ok(distance_with_polar(u, target, n)?.0)
}

/// Distance together with the unitary polar factor `W V†` of `Q = W Σ V†`,
/// which is the (sub)gradient of the nuclear norm with respect to `Q`.
pub(crate) fn distance_with_polar(u: &ComplexMatrix, target: &GateTarget, n: usize) -> Result<(DistanceResult, ComplexMatrix)> {
    let q = q_matrix(u, target, n)?;
    let svd = q.clone().svd(true, true);
    let nuclear_norm: f64 = svd.singular_values.iter().sum();
    let polar = svd.u.as_ref().expect("requested") * svd.v_t.as_ref().expect("requested");
    // The minimum over Φ is attained at Φ = W V†, where
    // ‖U − G⊗Φ‖² = 2^{n+2} − 2‖Q‖_*. Evaluating the residual directly avoids
    // the cancellation in 1 − 2λ²‖Q‖_* when U is close to a perfect gate.
    let residual: f64 = (u - hilbert::kron(target.matrix(), &polar))
        .iter()
        .map(|z| z.norm_sqr())
        .sum();
    let j = (lambda_sq(n) * residual).sqrt().min(1.0);
    Ok((
        DistanceResult {
            j,
            fidelity: 1.0 - j,
            nuclear_norm,
            q,
        },
        polar,
    ))
}

/// `sqrt(max(0, 1 − 2 λ_n² N))`, clamped against roundoff.
pub fn j_from_nuclear_norm(nuclear_norm: f64, n: usize) -> f64 {
    (1.0 - 2.0 * lambda_sq(n) * nuclear_norm).max(0.0).sqrt()
}

/// Gate fidelity `F = 1 − J` of the evolution produced by `field`.
pub fn gate_fidelity(spec: &SystemSpec, field: &PiecewiseField, target: &GateTarget) -> f64 {
    let u = dynamics::propagate(spec, field, false).into_final();
    distance(&u, target, spec.n()).expect("propagator has the system dimension").fidelity
}

/// Reduced qubit state `trace_env |ψ><ψ|`.
pub fn reduced_density(state: &StateVector, n: usize) -> Result<ComplexMatrix> {
    let env = 1usize << n;
    if state.len() != 2 * env {
        return Err(Error::DimensionMismatch {
            expected: 2 * env,
            rows: state.len(),
            cols: 1,
        });
    }
    let top = state.rows(0, env);
    let bottom = state.rows(env, env);
    let rho = |a: nalgebra::DVectorView<Complex64>, b: nalgebra::DVectorView<Complex64>| a.dotc(&b);
    // ρ_rs = Σ_ν ψ_{rν} conj(ψ_{sν}); dotc(x, y) = Σ conj(x) y.
    let r00 = rho(top, top);
    let r01 = rho(bottom, top);
    let r11 = rho(bottom, bottom);
    Ok(ComplexMatrix::from_row_slice(2, 2, &[r00, r01, r01.conj(), r11]))
}

/// Tolerance below which negative eigenvalues are treated as roundoff.
const NEGATIVE_EIGENVALUE_TOL: f64 = 1e-10;

/// `S = −Σ λ ln λ` over the eigenvalues of a density matrix, with
/// `0 ln 0 = 0`.
pub fn von_neumann_entropy(rho: &ComplexMatrix) -> Result<f64> {
    if !rho.is_square() {
        return Err(Error::DimensionMismatch {
            expected: rho.nrows(),
            rows: rho.nrows(),
            cols: rho.ncols(),
        });
    }
    let herm = hilbert::hermiticity_error(rho);
    if herm > 1e-10 {
        return Err(Error::NotHermitian(herm));
    }
    let mut s = 0.0;
    for lambda in hilbert::hermitian_eigenvalues(rho) {
        if lambda < -NEGATIVE_EIGENVALUE_TOL {
            return Err(Error::NegativeEigenvalue(lambda));
        }
        if lambda > 0.0 {
            s -= lambda * lambda.ln();
        }
    }
    Ok(s.max(0.0))
}

/// `|−>_0 ⊗ |+>^{⊗n}`: qubit down, every environment spin up.
pub fn initial_state(n: usize) -> StateVector {
    let mut labels = Vec::with_capacity(n + 1);
    labels.push(SpinLabel::Down);
    labels.resize(n + 1, SpinLabel::Up);
    basis_state(&labels, n).expect("label count matches")
}

/// Index of [`initial_state`] in the composite basis.
pub fn initial_state_index(n: usize) -> usize {
    1 << n
}

/// Entropy of the reduced qubit state after `u` acts on [`initial_state`];
/// reads a single column of `u`.
pub fn final_entropy(u: &ComplexMatrix, n: usize) -> Result<f64> {
    check_square(u, 2 << n)?;
    let psi = u.column(initial_state_index(n)).into_owned();
    von_neumann_entropy(&reduced_density(&psi, n)?)
}

/// `(t_k, S_vN(t_k))` along the controlled evolution of [`initial_state`].
pub fn entropy_trace(spec: &SystemSpec, field: &PiecewiseField) -> Vec<(f64, f64)> {
    let n = spec.n();
    let states = dynamics::propagate_state(spec, field, &initial_state(n)).expect("dimension matches");
    states
        .iter()
        .enumerate()
        .map(|(k, psi)| {
            let rho = reduced_density(psi, n).expect("dimension matches");
            let s = von_neumann_entropy(&rho).expect("reduced states are valid density matrices");
            (field.grid().time(k), s)
        })
        .collect()
}
