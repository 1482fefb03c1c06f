//! System parameters, Hamiltonian assembly and controllability.
//!
//! The Hamiltonian is
//!
//! ```text
//! H(t) = Σ_i ω_i S_iz − μ C(t) S_0x − Σ_{i<j} γ_ij S_i·S_j
//! ```
//!
//! in units where the qubit frequency `ω_0 = 1` (one free period is `2π`).

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)] // shadowed by inherent methods whenever std is linked
use num_traits::Float;

use crate::hilbert::{self, commutator, embed_spin_op, embed_spin_pair, ComplexMatrix, SpinAxis};
use crate::{Error, Result};

/// Largest supported environment.
pub const MAX_ENVIRONMENT: usize = 6;

/// Frequencies `ω_1..ω_6` of the environment spins, in units of `ω_0`.
pub const ENVIRONMENT_FREQUENCIES: [f64; MAX_ENVIRONMENT] =
    [0.99841, 1.00159, 0.96007, 1.04159, 0.87597, 1.14159];

/// Parameters of the qubit + `n`-spin environment.
///
/// `couplings` is the full symmetric `(n+1)×(n+1)` matrix of exchange
/// strengths with a zero diagonal; row/column 0 is the qubit.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(try_from = "SystemSpecRepr", into = "SystemSpecRepr"))]
pub struct SystemSpec {
    omegas: Vec<f64>,
    mu: f64,
    couplings: Vec<Vec<f64>>,
}

#[cfg(feature = "serde")]
#[derive(serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
struct SystemSpecRepr {
    omegas: Vec<f64>,
    mu: f64,
    couplings: Vec<Vec<f64>>,
}

#[cfg(feature = "serde")]
impl TryFrom<SystemSpecRepr> for SystemSpec {
    type Error = Error;
    fn try_from(r: SystemSpecRepr) -> Result<Self> {
        SystemSpec::new(r.omegas, r.mu, r.couplings)
    }
}

#[cfg(feature = "serde")]
impl From<SystemSpec> for SystemSpecRepr {
    fn from(s: SystemSpec) -> Self {
        SystemSpecRepr {
            omegas: s.omegas,
            mu: s.mu,
            couplings: s.couplings,
        }
    }
}

impl SystemSpec {
    pub fn new(omegas: Vec<f64>, mu: f64, couplings: Vec<Vec<f64>>) -> Result<Self> {
        let invalid = |msg: alloc::string::String| Err(Error::InvalidSpec(msg));
        if omegas.is_empty() {
            return invalid("at least the qubit frequency is required".into());
        }
        let n = omegas.len() - 1;
        if n > MAX_ENVIRONMENT {
            return Err(Error::TooManyParticles(n));
        }
        if let Some((i, w)) = omegas.iter().enumerate().find(|(_, w)| !(w.is_finite() && **w > 0.0)) {
            return invalid(format!("frequency ω_{i} = {w} must be finite and positive"));
        }
        if !mu.is_finite() {
            return invalid(format!("dipole moment {mu} must be finite"));
        }
        if couplings.len() != n + 1 || couplings.iter().any(|row| row.len() != n + 1) {
            return invalid(format!("coupling matrix must be {0}x{0}", n + 1));
        }
        for i in 0..=n {
            if couplings[i][i] != 0.0 {
                return invalid(format!("coupling diagonal entry ({i},{i}) must be zero"));
            }
            for j in 0..=n {
                let g = couplings[i][j];
                if !g.is_finite() {
                    return invalid(format!("coupling ({i},{j}) = {g} is not finite"));
                }
                if g != couplings[j][i] {
                    return invalid(format!("coupling matrix is not symmetric at ({i},{j})"));
                }
            }
        }
        Ok(Self { omegas, mu, couplings })
    }

    /// Number of environment particles.
    pub fn n(&self) -> usize {
        self.omegas.len() - 1
    }

    /// Composite Hilbert-space dimension `2^(n+1)`.
    pub fn dim(&self) -> usize {
        1 << self.omegas.len()
    }

    pub fn omegas(&self) -> &[f64] {
        &self.omegas
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn coupling(&self, i: usize, j: usize) -> f64 {
        self.couplings[i][j]
    }

    pub fn couplings(&self) -> &[Vec<f64>] {
        &self.couplings
    }

    /// Pairs `(i, j)` with `i < j`, qubit pairs first, in row-major order.
    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> {
        let n = self.n();
        (0..=n).flat_map(move |i| (i + 1..=n).map(move |j| (i, j)))
    }

    /// Same system with the given coupling matrix.
    pub fn with_couplings(&self, couplings: Vec<Vec<f64>>) -> Result<Self> {
        Self::new(self.omegas.clone(), self.mu, couplings)
    }
}

/// Uniform couplings: `gamma` between the qubit and each environment spin,
/// `gamma_prime` between every pair of environment spins.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CouplingRule {
    pub gamma: f64,
    pub gamma_prime: f64,
}

impl CouplingRule {
    pub fn expand(&self, n: usize) -> Result<Vec<Vec<f64>>> {
        if !(self.gamma.is_finite() && self.gamma >= 0.0) {
            return Err(Error::InvalidSpec(format!(
                "qubit-environment coupling {} must be finite and non-negative",
                self.gamma
            )));
        }
        if !self.gamma_prime.is_finite() {
            return Err(Error::InvalidSpec(format!(
                "environment coupling {} must be finite",
                self.gamma_prime
            )));
        }
        let mut m = vec![vec![0.0; n + 1]; n + 1];
        for i in 0..=n {
            for j in i + 1..=n {
                let g = if i == 0 { self.gamma } else { self.gamma_prime };
                m[i][j] = g;
                m[j][i] = g;
            }
        }
        Ok(m)
    }
}

/// The reference system: `ω_0 = 1`, the tabulated environment frequencies,
/// `μ = 1`, and couplings from [`CouplingRule`].
pub fn default_spec(n: usize, gamma: f64, gamma_prime: f64) -> Result<SystemSpec> {
    if n > MAX_ENVIRONMENT {
        return Err(Error::TooManyParticles(n));
    }
    let mut omegas = vec![1.0];
    omegas.extend_from_slice(&ENVIRONMENT_FREQUENCIES[..n]);
    let couplings = CouplingRule { gamma, gamma_prime }.expand(n)?;
    SystemSpec::new(omegas, 1.0, couplings)
}

/// Field-free part `Σ ω_i S_iz − Σ_{i<j} γ_ij S_i·S_j`.
pub fn build_drift(spec: &SystemSpec) -> ComplexMatrix {
    let n = spec.n();
    let mut h = ComplexMatrix::zeros(spec.dim(), spec.dim());
    for (i, &w) in spec.omegas().iter().enumerate() {
        h += embed_spin_op(SpinAxis::Z, i, n).expect("index in range").scale(w);
    }
    for (i, j) in spec.pairs() {
        let g = spec.coupling(i, j);
        if g == 0.0 {
            continue;
        }
        for axis in SpinAxis::ALL {
            h -= embed_spin_pair(axis, i, j, n).expect("index in range").scale(g);
        }
    }
    h
}

/// `μ S_0x`; the field enters the Hamiltonian as `−C(t) · μ S_0x`.
pub fn build_control_op(spec: &SystemSpec) -> ComplexMatrix {
    embed_spin_op(SpinAxis::X, 0, spec.n())
        .expect("qubit always exists")
        .scale(spec.mu())
}

pub fn hamiltonian_at(spec: &SystemSpec, c: f64) -> ComplexMatrix {
    Hamiltonian::new(spec).at(c)
}

/// Drift and control operator assembled once, for repeated evaluation.
#[derive(Debug, Clone)]
pub struct Hamiltonian {
    pub drift: ComplexMatrix,
    pub control: ComplexMatrix,
}

impl Hamiltonian {
    pub fn new(spec: &SystemSpec) -> Self {
        Self {
            drift: build_drift(spec),
            control: build_control_op(spec),
        }
    }

    pub fn dim(&self) -> usize {
        self.drift.nrows()
    }

    pub fn at(&self, c: f64) -> ComplexMatrix {
        &self.drift - self.control.scale(c)
    }

    /// `∂H/∂c`.
    pub fn control_derivative(&self) -> ComplexMatrix {
        -&self.control
    }
}

/// Real dimension of the Lie algebra generated by `i·H_drift` and `i·μS_0x`.
///
/// Right-nested commutators of the generators are added level by level and
/// kept only when their component orthogonal to the current span has
/// relative norm above `1e-10`. The system is controllable up to a global
/// phase iff the result is at least `4^(n+1) − 1`.
///
/// Returns [`Error::AlgebraNotClosed`] if new directions still appear after
/// `max_depth` commutator levels.
pub fn controllability_dim(spec: &SystemSpec, max_depth: usize) -> Result<usize> {
    const MAX_N: usize = 2;
    const RESIDUAL_TOL: f64 = 1e-10;
    if spec.n() > MAX_N {
        return Err(Error::TooLarge {
            what: "controllability analysis",
            n: spec.n(),
            max: MAX_N,
        });
    }
    let ham = Hamiltonian::new(spec);
    let generators = [ham.drift.clone() * hilbert::I, ham.control.clone() * hilbert::I];

    let mut basis: Vec<Vec<f64>> = Vec::new();
    let mut frontier: Vec<ComplexMatrix> = Vec::new();
    for g in &generators {
        if let Some(v) = orthogonal_residual(g, &basis, RESIDUAL_TOL) {
            basis.push(v);
            frontier.push(g.clone());
        }
    }

    let full = spec.dim() * spec.dim();
    for _depth in 0..max_depth {
        if frontier.is_empty() || basis.len() >= full {
            return Ok(basis.len());
        }
        let mut next = Vec::new();
        for x in &frontier {
            for g in &generators {
                let bracket = commutator(g, x);
                if let Some(v) = orthogonal_residual(&bracket, &basis, RESIDUAL_TOL) {
                    basis.push(v);
                    next.push(bracket);
                }
            }
        }
        frontier = next;
    }
    if frontier.is_empty() || basis.len() >= full {
        Ok(basis.len())
    } else {
        Err(Error::AlgebraNotClosed {
            dim: basis.len(),
            depth: max_depth,
        })
    }
}

/// Flattens `m` to a real vector, normalizes it, and removes its projection
/// on the orthonormal `basis` (two Gram-Schmidt passes). Returns the unit
/// residual if its norm exceeds `tol`.
fn orthogonal_residual(m: &ComplexMatrix, basis: &[Vec<f64>], tol: f64) -> Option<Vec<f64>> {
    let mut v: Vec<f64> = m.iter().flat_map(|z| [z.re, z.im]).collect();
    let norm = l2(&v);
    if norm == 0.0 {
        return None;
    }
    v.iter_mut().for_each(|x| *x /= norm);
    for _ in 0..2 {
        for b in basis {
            let dot: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
            v.iter_mut().zip(b).for_each(|(x, y)| *x -= dot * y);
        }
    }
    let r = l2(&v);
    if r > tol {
        v.iter_mut().for_each(|x| *x /= r);
        Some(v)
    } else {
        None
    }
}

fn l2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}
