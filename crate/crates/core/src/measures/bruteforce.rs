//! Direct numerical minimization of `λ_n ‖U − G⊗Φ‖_Fr` over `Φ ∈ U(2^n)`.
//!
//! Independent of the closed form: it never forms `Q` or an SVD. `Φ` is
//! charted as `Φ₀·exp(i H(θ))` with `H(θ)` Hermitian and `θ ∈ ℝ^{4^n}`, and the
//! squared norm is minimized by BFGS on central-difference gradients from
//! several starting points. After each BFGS run the chart is re-centered on
//! the current minimizer.

use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;
#[allow(unused_imports)] // shadowed by inherent methods whenever std is linked
use num_traits::Float;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{lambda_sq, GateTarget};
use crate::hilbert::{self, check_square, exp_hermitian, kron, ComplexMatrix};
use crate::{Error, Result};

const STARTS: usize = 8;
const RECENTER_ROUNDS: usize = 6;
const MAX_BFGS_ITERS: usize = 400;
const FD_STEP: f64 = 1e-6;
const GRAD_TOL: f64 = 1e-9;
/// Gradient norm (relative to the problem scale) accepted as converged.
const CONVERGED_GRAD: f64 = 1e-6;
const MAX_N: usize = 2;

/// Environment-minimized distance computed by explicit search over `Φ`.
///
/// Limited to `n <= 2`. Fails with [`Error::NotConverged`] if no start
/// reaches a stationary point.
pub fn distance_bruteforce(u: &ComplexMatrix, target: &GateTarget, n: usize) -> Result<f64> {
    if n > MAX_N {
        return Err(Error::TooLarge {
            what: "brute-force distance",
            n,
            max: MAX_N,
        });
    }
    let env = 1usize << n;
    check_square(u, 2 * env)?;
    let g = target.matrix();
    let objective = |phi: &ComplexMatrix| -> f64 {
        (u - kron(g, phi)).iter().map(|z| z.norm_sqr()).sum()
    };

    let mut rng = ChaCha8Rng::seed_from_u64(0x6272_7574_6566_6f72);
    let mut best = f64::INFINITY;
    let mut best_grad = f64::INFINITY;
    for start in 0..STARTS {
        let mut center = if start == 0 {
            hilbert::identity(env)
        } else {
            hilbert::random_unitary(env, &mut rng)
        };
        let mut value = objective(&center);
        let mut grad_norm = f64::INFINITY;
        for _ in 0..RECENTER_ROUNDS {
            let chart = |theta: &[f64]| objective(&(&center * exp_hermitian(&hermitian_from(theta, env), -1.0)));
            let run = bfgs(&chart, vec![0.0; env * env]);
            let improved = value - run.value;
            center = &center * exp_hermitian(&hermitian_from(&run.x, env), -1.0);
            value = run.value.min(value);
            grad_norm = run.grad_norm;
            if improved <= 1e-15 * (1.0 + value) {
                break;
            }
        }
        if value < best {
            best = value;
            best_grad = grad_norm;
        }
    }
    let scale = 1.0 + best.sqrt();
    if best_grad > CONVERGED_GRAD * scale {
        return Err(Error::NotConverged { grad_norm: best_grad });
    }
    Ok((lambda_sq(n) * best.max(0.0)).sqrt())
}

/// Hermitian matrix from `d²` reals: the diagonal, then `(re, im)` of each
/// upper-triangle entry.
fn hermitian_from(theta: &[f64], d: usize) -> ComplexMatrix {
    let mut h = ComplexMatrix::zeros(d, d);
    let mut it = theta.iter().copied();
    for a in 0..d {
        h[(a, a)] = Complex64::new(it.next().unwrap_or(0.0), 0.0);
    }
    for a in 0..d {
        for b in a + 1..d {
            let z = Complex64::new(it.next().unwrap_or(0.0), it.next().unwrap_or(0.0));
            h[(a, b)] = z;
            h[(b, a)] = z.conj();
        }
    }
    h
}

struct Minimum {
    x: Vec<f64>,
    value: f64,
    grad_norm: f64,
}

fn central_gradient(f: &impl Fn(&[f64]) -> f64, x: &[f64]) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            probe[i] = x[i] + FD_STEP;
            let plus = f(&probe);
            probe[i] = x[i] - FD_STEP;
            let minus = f(&probe);
            probe[i] = x[i];
            (plus - minus) / (2.0 * FD_STEP)
        })
        .collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn bfgs(f: &impl Fn(&[f64]) -> f64, x0: Vec<f64>) -> Minimum {
    let dim = x0.len();
    let mut x = x0;
    let mut fx = f(&x);
    let mut g = central_gradient(f, &x);
    let mut hinv = identity_matrix(dim);
    for _ in 0..MAX_BFGS_ITERS {
        if dot(&g, &g).sqrt() < GRAD_TOL {
            break;
        }
        let mut p: Vec<f64> = (0..dim).map(|i| -dot(&hinv[i], &g)).collect();
        let mut slope = dot(&g, &p);
        if slope >= 0.0 {
            hinv = identity_matrix(dim);
            p = g.iter().map(|v| -v).collect();
            slope = -dot(&g, &g);
        }
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let trial: Vec<f64> = x.iter().zip(&p).map(|(xi, pi)| xi + t * pi).collect();
            let ft = f(&trial);
            if ft <= fx + 1e-4 * t * slope {
                accepted = Some((trial, ft));
                break;
            }
            t *= 0.5;
        }
        let Some((x_new, f_new)) = accepted else { break };
        let g_new = central_gradient(f, &x_new);
        let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-20 {
            // H ← (I − ρ s yᵀ) H (I − ρ y sᵀ) + ρ s sᵀ
            let rho = 1.0 / sy;
            let hy: Vec<f64> = (0..dim).map(|i| dot(&hinv[i], &y)).collect();
            let yhy = dot(&y, &hy);
            for i in 0..dim {
                for j in 0..dim {
                    hinv[i][j] += -rho * (hy[i] * s[j] + s[i] * hy[j]) + (rho * rho * yhy + rho) * s[i] * s[j];
                }
            }
        }
        x = x_new;
        fx = f_new;
        g = g_new;
    }
    Minimum {
        grad_norm: dot(&g, &g).sqrt(),
        x,
        value: fx,
    }
}

fn identity_matrix(d: usize) -> Vec<Vec<f64>> {
    (0..d)
        .map(|i| (0..d).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect()
}
