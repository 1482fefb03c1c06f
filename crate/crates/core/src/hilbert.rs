//! Operator algebra on the composite qubit + environment Hilbert space.
//!
//! Basis ordering: particle 0 (the qubit) is the leftmost, most significant
//! tensor factor, so a composite index is `qubit_index * 2^n + env_index`.
//! Locally `|+> = (1, 0)` and `|-> = (0, 1)`, which makes `S_z = diag(1/2, -1/2)`.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
#[allow(unused_imports)] // shadowed by inherent methods whenever std is linked
use num_traits::Float;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::{Error, Result};

pub type ComplexMatrix = DMatrix<Complex64>;
pub type StateVector = DVector<Complex64>;

pub const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub const ONE: Complex64 = Complex64::new(1.0, 0.0);
pub const I: Complex64 = Complex64::new(0.0, 1.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum SpinAxis {
    X,
    Y,
    Z,
}

impl SpinAxis {
    pub const ALL: [SpinAxis; 3] = [SpinAxis::X, SpinAxis::Y, SpinAxis::Z];
}

/// Eigenstate label of the local `S_z`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SpinLabel {
    /// `S_z = +1/2`
    Up,
    /// `S_z = -1/2`
    Down,
}

impl SpinLabel {
    fn local_index(self) -> usize {
        match self {
            SpinLabel::Up => 0,
            SpinLabel::Down => 1,
        }
    }
}

pub fn identity(dim: usize) -> ComplexMatrix {
    ComplexMatrix::identity(dim, dim)
}

pub fn pauli(axis: SpinAxis) -> ComplexMatrix {
    match axis {
        SpinAxis::X => ComplexMatrix::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO]),
        SpinAxis::Y => ComplexMatrix::from_row_slice(2, 2, &[ZERO, -I, I, ZERO]),
        SpinAxis::Z => ComplexMatrix::from_row_slice(2, 2, &[ONE, ZERO, ZERO, -ONE]),
    }
}

/// Kronecker product `a ⊗ b`.
pub fn kron(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    a.kronecker(b)
}

/// Tensor product over `n + 1` slots, with `local[slot]` placed at the given
/// slots and the 2x2 identity elsewhere.
fn embed_local(slots: &[(usize, ComplexMatrix)], n: usize) -> ComplexMatrix {
    let id2 = identity(2);
    let mut out = identity(1);
    for slot in 0..=n {
        let factor = slots
            .iter()
            .find(|(s, _)| *s == slot)
            .map(|(_, m)| m)
            .unwrap_or(&id2);
        out = kron(&out, factor);
    }
    out
}

/// The spin operator `S_axis = σ_axis / 2` of `particle`, embedded into the
/// `2^(n+1)`-dimensional composite space.
pub fn embed_spin_op(axis: SpinAxis, particle: usize, n: usize) -> Result<ComplexMatrix> {
    if particle > n {
        return Err(Error::ParticleOutOfRange { particle, n });
    }
    Ok(embed_local(&[(particle, pauli(axis).scale(0.5))], n))
}

/// `S_{i,axis} S_{j,axis}` for `i != j`, built directly as a tensor product.
pub fn embed_spin_pair(axis: SpinAxis, i: usize, j: usize, n: usize) -> Result<ComplexMatrix> {
    for particle in [i, j] {
        if particle > n {
            return Err(Error::ParticleOutOfRange { particle, n });
        }
    }
    debug_assert_ne!(i, j);
    let half = pauli(axis).scale(0.5);
    Ok(embed_local(&[(i, half.clone()), (j, half)], n))
}

/// Product state `|l_0> ⊗ |l_1> ⊗ ... ⊗ |l_n>` of local `S_z` eigenstates.
pub fn basis_state(labels: &[SpinLabel], n: usize) -> Result<StateVector> {
    if labels.len() != n + 1 {
        return Err(Error::LabelCount {
            expected: n + 1,
            got: labels.len(),
        });
    }
    let index = labels
        .iter()
        .fold(0usize, |acc, l| (acc << 1) | l.local_index());
    let mut v = StateVector::zeros(1 << (n + 1));
    v[index] = ONE;
    Ok(v)
}

pub fn commutator(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    a * b - b * a
}

pub fn frobenius_norm(a: &ComplexMatrix) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Largest elementwise deviation `|a_ij - conj(a_ji)|`.
pub fn hermiticity_error(a: &ComplexMatrix) -> f64 {
    if !a.is_square() {
        return f64::INFINITY;
    }
    let d = a.nrows();
    let mut worst = 0.0f64;
    for i in 0..d {
        for j in i..d {
            worst = worst.max((a[(i, j)] - a[(j, i)].conj()).norm());
        }
    }
    worst
}

/// `‖U†U − I‖_Fr`.
pub fn unitarity_error(u: &ComplexMatrix) -> f64 {
    if !u.is_square() {
        return f64::INFINITY;
    }
    frobenius_norm(&(u.adjoint() * u - identity(u.nrows())))
}

pub(crate) fn check_square(a: &ComplexMatrix, expected: usize) -> Result<()> {
    if a.nrows() != expected || a.ncols() != expected {
        return Err(Error::DimensionMismatch {
            expected,
            rows: a.nrows(),
            cols: a.ncols(),
        });
    }
    Ok(())
}

/// Eigendecomposition of a Hermitian matrix with eigenvalues sorted
/// ascending; column `k` of `vectors` belongs to `values[k]`.
#[derive(Debug, Clone)]
pub struct HermitianEigen {
    pub values: Vec<f64>,
    pub vectors: ComplexMatrix,
}

impl HermitianEigen {
    /// `V f(Λ) V†` for a scalar function of the eigenvalues.
    pub fn map(&self, f: impl Fn(f64) -> Complex64) -> ComplexMatrix {
        let mut scaled = self.vectors.clone();
        for (k, mut col) in scaled.column_iter_mut().enumerate() {
            col *= f(self.values[k]);
        }
        scaled * self.vectors.adjoint()
    }
}

/// Only the lower triangle of `h` is read; callers are responsible for
/// Hermiticity.
pub fn hermitian_eigen(h: &ComplexMatrix) -> HermitianEigen {
    let eig = h.clone().symmetric_eigen();
    let d = h.nrows();
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vectors = ComplexMatrix::from_fn(d, d, |r, c| eig.eigenvectors[(r, order[c])]);
    HermitianEigen { values, vectors }
}

/// Eigenvalues of a Hermitian matrix, ascending.
pub fn hermitian_eigenvalues(h: &ComplexMatrix) -> Vec<f64> {
    let mut values: Vec<f64> = h.clone().symmetric_eigenvalues().iter().copied().collect();
    values.sort_by(f64::total_cmp);
    values
}

/// `exp(−i·h·t)` for Hermitian `h`.
pub fn exp_hermitian(h: &ComplexMatrix, t: f64) -> ComplexMatrix {
    hermitian_eigen(h).map(|lambda| Complex64::from_polar(1.0, -lambda * t))
}

/// Haar-random unitary: QR of a complex Ginibre matrix with the phases of
/// `R`'s diagonal absorbed into `Q`.
pub fn random_unitary<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> ComplexMatrix {
    let g = ComplexMatrix::from_fn(dim, dim, |_, _| {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        Complex64::new(re, im)
    });
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for (k, mut col) in q.column_iter_mut().enumerate() {
        let d = r[(k, k)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { ONE };
        col *= phase;
    }
    q
}

/// Haar-random pure state of dimension `dim`.
pub fn random_state<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> StateVector {
    let mut v = StateVector::from_fn(dim, |_, _| {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        Complex64::new(re, im)
    });
    let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    v.unscale_mut(norm);
    v
}
