//! Genetic algorithm over spectrally parameterized fields
//! `C(t) = f(t) Σ_ℓ A_ℓ cos(ω_ℓ t + θ_ℓ)`.
//!
//! Genome layout: `[A_0, ω_0, θ_0, A_1, ω_1, θ_1, ...]`. Operators are tournament
//! selection, uniform crossover, per-gene Gaussian mutation and elitism.
//! Every child draws from its own ChaCha substream keyed by
//! `(generation, index)`, so results do not depend on how fitness
//! evaluations are scheduled.

use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::{PI, TAU};

#[allow(unused_imports)] // shadowed by inherent methods whenever std is linked
use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::dynamics::{self, PiecewiseField, TimeGrid};
use crate::measures::{self, GateTarget};
use crate::model::{Hamiltonian, SystemSpec};
use crate::{Error, Executor, Result};

/// Envelope `f(t)` multiplying the spectral components.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Envelope {
    /// `sin²(πt/t_f)`, vanishing at both ends.
    #[default]
    SinSquared,
    Flat,
}

impl Envelope {
    pub fn at(self, t: f64, t_final: f64) -> f64 {
        match self {
            Envelope::SinSquared => (PI * t / t_final).sin().powi(2),
            Envelope::Flat => 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SpectralComponent {
    pub amplitude: f64,
    pub frequency: f64,
    /// Phase in `[0, 2π)`.
    pub phase: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ParamField {
    pub components: Vec<SpectralComponent>,
    pub envelope: Envelope,
    pub grid: TimeGrid,
}

impl ParamField {
    pub fn value_at(&self, t: f64) -> f64 {
        let carrier: f64 = self
            .components
            .iter()
            .map(|c| c.amplitude * (c.frequency * t + c.phase).cos())
            .sum();
        self.envelope.at(t, self.grid.t_final()) * carrier
    }

    fn from_genome(genome: &[f64], envelope: Envelope, grid: TimeGrid) -> Self {
        let components = genome
            .chunks_exact(3)
            .map(|g| SpectralComponent {
                amplitude: g[0],
                frequency: g[1],
                phase: g[2],
            })
            .collect();
        Self {
            components,
            envelope,
            grid,
        }
    }
}

/// Samples the parameterized field at interval midpoints.
pub fn synthesize(pf: &ParamField) -> PiecewiseField {
    PiecewiseField::from_fn(pf.grid, |t| pf.value_at(t)).expect("bounded parameters give finite values")
}

/// Search box for the genes.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct GaBounds {
    pub components: usize,
    /// Bound on `|C(t)|`; each component amplitude lies in `[0, field_max / components]`.
    pub field_max: f64,
    pub frequency_min: f64,
    pub frequency_max: f64,
}

impl Default for GaBounds {
    fn default() -> Self {
        Self {
            components: 8,
            field_max: 4.0,
            frequency_min: 0.5,
            frequency_max: 2.0,
        }
    }
}

impl GaBounds {
    pub fn component_max(&self) -> f64 {
        self.field_max / self.components as f64
    }

    fn gene_range(&self, gene: usize) -> (f64, f64) {
        match gene % 3 {
            0 => (0.0, self.component_max()),
            1 => (self.frequency_min, self.frequency_max),
            _ => (0.0, TAU),
        }
    }

    fn repair(&self, gene: usize, value: f64) -> f64 {
        if gene % 3 == 2 {
            value.rem_euclid(TAU)
        } else {
            let (lo, hi) = self.gene_range(gene);
            value.clamp(lo, hi)
        }
    }

    /// Whether every gene of `pf` lies inside the box.
    pub fn contains(&self, pf: &ParamField) -> bool {
        pf.components.len() == self.components
            && pf.components.iter().all(|c| {
                (0.0..=self.component_max()).contains(&c.amplitude)
                    && (self.frequency_min..=self.frequency_max).contains(&c.frequency)
                    && (0.0..TAU).contains(&c.phase)
            })
    }

    fn validate(&self) -> Result<()> {
        if self.components == 0 {
            return Err(Error::InvalidConfig("at least one spectral component is required".into()));
        }
        if !(self.field_max.is_finite() && self.field_max > 0.0) {
            return Err(Error::InvalidConfig(format!("field_max = {} must be positive", self.field_max)));
        }
        if !(self.frequency_min > 0.0 && self.frequency_max >= self.frequency_min && self.frequency_max.is_finite()) {
            return Err(Error::InvalidConfig("frequency band must satisfy 0 < min <= max".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct GaConfig {
    pub population: usize,
    pub generations: usize,
    pub tournament_size: usize,
    pub crossover_rate: f64,
    /// Probability that a gene is mutated.
    pub mutation_rate: f64,
    /// Standard deviation of a mutation as a fraction of the gene's range.
    pub mutation_scale: f64,
    /// Per-generation factor applied to `mutation_scale`.
    pub mutation_decay: f64,
    pub elitism: usize,
    pub envelope: Envelope,
    pub seed: u64,
}

impl Default for GaConfig {
    fn default() -> Self {
        Self {
            population: 250,
            generations: 100,
            tournament_size: 3,
            crossover_rate: 0.9,
            mutation_rate: 0.15,
            mutation_scale: 0.1,
            mutation_decay: 0.98,
            elitism: 2,
            envelope: Envelope::SinSquared,
            seed: 0,
        }
    }
}

impl GaConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: alloc::string::String| Err(Error::InvalidConfig(msg));
        if self.population < 2 {
            return bad(format!("population = {} must be at least 2", self.population));
        }
        if self.tournament_size == 0 {
            return bad("tournament_size must be at least 1".into());
        }
        if self.elitism > self.population {
            return bad(format!("elitism = {} exceeds the population", self.elitism));
        }
        for (name, p) in [("crossover_rate", self.crossover_rate), ("mutation_rate", self.mutation_rate)] {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("{name} = {p} must lie in [0, 1]"));
            }
        }
        if !(self.mutation_scale.is_finite() && self.mutation_scale >= 0.0) {
            return bad(format!("mutation_scale = {} must be non-negative", self.mutation_scale));
        }
        if !(self.mutation_decay > 0.0 && self.mutation_decay <= 1.0) {
            return bad(format!("mutation_decay = {} must lie in (0, 1]", self.mutation_decay));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GaResult {
    pub best: ParamField,
    pub fitness: f64,
    /// Best fitness of the initial population, then after each generation.
    pub history: Vec<f64>,
}

fn substream(seed: u64, generation: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((generation << 32) | index);
    rng
}

/// Maximizes gate fidelity over spectrally parameterized fields on `grid`.
pub fn ga_optimize<E: Executor>(
    spec: &SystemSpec,
    target: &GateTarget,
    grid: TimeGrid,
    config: &GaConfig,
    bounds: &GaBounds,
    executor: &E,
) -> Result<GaResult> {
    config.validate()?;
    bounds.validate()?;
    let ham = Hamiltonian::new(spec);
    let n = spec.n();
    let genes = 3 * bounds.components;
    let fitness_of = |genome: &[f64]| -> f64 {
        let field = synthesize(&ParamField::from_genome(genome, config.envelope, grid));
        let u = dynamics::propagate_with(&ham, &field, false).into_final();
        measures::distance(&u, target, n).expect("dimension matches").fidelity
    };

    let mut population: Vec<Vec<f64>> = (0..config.population)
        .map(|i| {
            let mut rng = substream(config.seed, 0, i as u64);
            (0..genes)
                .map(|g| {
                    let (lo, hi) = bounds.gene_range(g);
                    let v = rng.random_range(lo..hi);
                    bounds.repair(g, v)
                })
                .collect()
        })
        .collect();
    let mut fitness = executor.map(population.len(), |i| fitness_of(&population[i]));

    let ranked = |fitness: &[f64]| -> Vec<usize> {
        let mut order: Vec<usize> = (0..fitness.len()).collect();
        order.sort_by(|&a, &b| fitness[b].total_cmp(&fitness[a]).then(a.cmp(&b)));
        order
    };
    let mut order = ranked(&fitness);
    let mut history = Vec::with_capacity(config.generations + 1);
    history.push(fitness[order[0]]);

    for generation in 1..=config.generations as u64 {
        let width = config.mutation_scale * config.mutation_decay.powi(generation as i32 - 1);
        let tournament = |rng: &mut ChaCha8Rng| -> usize {
            let mut best = rng.random_range(0..population.len());
            for _ in 1..config.tournament_size {
                let challenger = rng.random_range(0..population.len());
                if fitness[challenger] > fitness[best] || (fitness[challenger] == fitness[best] && challenger < best) {
                    best = challenger;
                }
            }
            best
        };

        let mut next: Vec<Vec<f64>> = Vec::with_capacity(config.population);
        let mut next_fitness: Vec<Option<f64>> = Vec::with_capacity(config.population);
        for &elite in order.iter().take(config.elitism) {
            next.push(population[elite].clone());
            next_fitness.push(Some(fitness[elite]));
        }
        for i in config.elitism..config.population {
            let mut rng = substream(config.seed, generation, i as u64);
            let a = tournament(&mut rng);
            let b = tournament(&mut rng);
            let cross = rng.random::<f64>() < config.crossover_rate;
            let mut child: Vec<f64> = (0..genes)
                .map(|g| {
                    let take_b = rng.random::<bool>();
                    if cross && take_b {
                        population[b][g]
                    } else {
                        population[a][g]
                    }
                })
                .collect();
            for (g, gene) in child.iter_mut().enumerate() {
                if rng.random::<f64>() < config.mutation_rate {
                    let (lo, hi) = bounds.gene_range(g);
                    let z: f64 = StandardNormal.sample(&mut rng);
                    *gene = bounds.repair(g, *gene + z * width * (hi - lo));
                }
            }
            next.push(child);
            next_fitness.push(None);
        }
        let evaluated = executor.map(next.len(), |i| next_fitness[i].unwrap_or_else(|| fitness_of(&next[i])));
        population = next;
        fitness = evaluated;
        order = ranked(&fitness);
        history.push(fitness[order[0]]);
    }

    let best = order[0];
    Ok(GaResult {
        best: ParamField::from_genome(&population[best], config.envelope, grid),
        fitness: fitness[best],
        history,
    })
}
