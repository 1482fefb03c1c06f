//! Monte Carlo robustness of a fixed control field against normally
//! distributed exchange couplings.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)] // shadowed by inherent methods whenever std is linked
use num_traits::Float;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::dynamics::{self, PiecewiseField};
use crate::measures::{self, GateTarget};
use crate::model::{Hamiltonian, SystemSpec};
use crate::{Error, Executor, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct EnsembleConfig {
    pub size: usize,
    pub gamma_mean: f64,
    pub gamma_sd: f64,
    /// Environment pairs are drawn from `N(c·γ̄, c·σ_γ)`.
    pub c: f64,
    pub seed: u64,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        Self {
            size: 10_000,
            gamma_mean: 0.02,
            gamma_sd: 0.0025,
            c: 0.0,
            seed: 0,
        }
    }
}

impl EnsembleConfig {
    pub fn validate(&self) -> Result<()> {
        if self.size == 0 {
            return Err(Error::InvalidConfig("ensemble size must be at least 1".into()));
        }
        for (name, v) in [("gamma_mean", self.gamma_mean), ("gamma_sd", self.gamma_sd), ("c", self.c)] {
            if !v.is_finite() {
                return Err(Error::InvalidConfig(format!("{name} = {v} is not finite")));
            }
        }
        if self.gamma_sd < 0.0 || self.c < 0.0 {
            return Err(Error::InvalidConfig("gamma_sd and c must be non-negative".into()));
        }
        Ok(())
    }
}

/// Draws the couplings of ensemble member `draw_index`.
///
/// Qubit pairs `(0, j)` get `γ̄ + σ_γ z`, environment pairs `c(γ̄ + σ_γ z)`,
/// one standard normal `z` per pair in row-major order. Pairs whose base
/// coupling is exactly zero stay zero.
pub fn sample_couplings(base: &SystemSpec, config: &EnsembleConfig, draw_index: u64) -> Result<SystemSpec> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(draw_index);
    let size = base.n() + 1;
    let mut couplings = vec![vec![0.0; size]; size];
    for (i, j) in base.pairs() {
        let z: f64 = StandardNormal.sample(&mut rng);
        if base.coupling(i, j) == 0.0 {
            continue;
        }
        let scale = if i == 0 { 1.0 } else { config.c };
        let g = scale * (config.gamma_mean + config.gamma_sd * z);
        couplings[i][j] = g;
        couplings[j][i] = g;
    }
    base.with_couplings(couplings)
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EnsembleSample {
    pub draw: u64,
    /// Upper-triangle couplings in `SystemSpec::pairs` order.
    pub couplings: Vec<f64>,
    pub fidelity: f64,
    pub entropy: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EnsembleReport {
    pub samples: Vec<EnsembleSample>,
    pub f_mean: f64,
    pub f_sd: f64,
    pub s_mean: f64,
    pub s_sd: f64,
}

impl EnsembleReport {
    pub fn from_samples(samples: Vec<EnsembleSample>) -> Result<Self> {
        let f: Vec<f64> = samples.iter().map(|s| s.fidelity).collect();
        let s: Vec<f64> = samples.iter().map(|s| s.entropy).collect();
        let (f_mean, f_sd) = statistics(&f)?;
        let (s_mean, s_sd) = statistics(&s)?;
        Ok(Self {
            samples,
            f_mean,
            f_sd,
            s_mean,
            s_sd,
        })
    }
}

/// Applies `field` to every ensemble member and aggregates fidelity and final entropy.
pub fn evaluate_ensemble<E: Executor>(
    field: &PiecewiseField,
    base: &SystemSpec,
    target: &GateTarget,
    config: &EnsembleConfig,
    executor: &E,
) -> Result<EnsembleReport> {
    config.validate()?;
    let n = base.n();
    let results = executor.map(config.size, |draw| -> Result<EnsembleSample> {
        let spec = sample_couplings(base, config, draw as u64)?;
        let u = dynamics::propagate_with(&Hamiltonian::new(&spec), field, false).into_final();
        Ok(EnsembleSample {
            draw: draw as u64,
            couplings: spec.pairs().map(|(i, j)| spec.coupling(i, j)).collect(),
            fidelity: measures::distance(&u, target, n)?.fidelity,
            entropy: measures::final_entropy(&u, n)?,
        })
    });
    EnsembleReport::from_samples(results.into_iter().collect::<Result<_>>()?)
}

/// Mean and population (1/L) standard deviation.
pub fn statistics(values: &[f64]) -> Result<(f64, f64)> {
    if values.is_empty() {
        return Err(Error::EmptyInput);
    }
    let len = values.len() as f64;
    let rough = values.iter().sum::<f64>() / len;
    let mean = rough + values.iter().map(|v| v - rough).sum::<f64>() / len;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / len;
    Ok((mean, var.sqrt()))
}

/// Population skewness `m₃ / m₂^{3/2}`; zero for constant input.
pub fn skewness(values: &[f64]) -> Result<f64> {
    let (mean, sd) = statistics(values)?;
    if sd == 0.0 {
        return Ok(0.0);
    }
    let m3 = values.iter().map(|v| (v - mean).powi(3)).sum::<f64>() / values.len() as f64;
    Ok(m3 / sd.powi(3))
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Histogram {
    /// `bins + 1` edges.
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
}

/// Uniform bins over `[min, max]`; the last bin is closed. A zero-width span
/// is widened to `[v − 0.5, v + 0.5]`.
pub fn histogram(values: &[f64], bins: usize) -> Result<Histogram> {
    if bins == 0 {
        return Err(Error::InvalidConfig("histogram needs at least one bin".into()));
    }
    if values.is_empty() {
        return Err(Error::EmptyInput);
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidConfig("histogram values must be finite".into()));
    }
    let mut lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let mut hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hi == lo {
        lo -= 0.5;
        hi += 0.5;
    }
    let width = (hi - lo) / bins as f64;
    let edges = (0..=bins).map(|b| if b == bins { hi } else { lo + b as f64 * width }).collect();
    let mut counts = vec![0; bins];
    for &v in values {
        let b = (((v - lo) / width) as usize).min(bins - 1);
        counts[b] += 1;
    }
    Ok(Histogram { edges, counts })
}
