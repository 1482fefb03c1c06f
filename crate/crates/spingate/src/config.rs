//! TOML run configuration.
//!
//! A file is parsed strictly (unknown keys are errors) and then resolved:
//! every optional value is filled in, checked against the core
//! preconditions, and turned into core types. The resolved [`RunConfig`] is
//! what gets embedded in every JSON artifact.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use spingate_core::dynamics::TimeGrid;
use spingate_core::hilbert::ComplexMatrix;
use spingate_core::model::{CouplingRule, ENVIRONMENT_FREQUENCIES, MAX_ENVIRONMENT};
use spingate_core::optim::ga::{GaBounds, GaConfig};
use spingate_core::optim::gradient::GradConfig;
use spingate_core::robustness::EnsembleConfig;
use spingate_core::{GateTarget, SystemSpec};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    pub system: SystemBlock,
    pub grid: GridBlock,
    #[serde(default)]
    pub target: TargetBlock,
    #[serde(default)]
    pub optimizer: OptimizerBlock,
    #[serde(default)]
    pub ensemble: EnsembleBlock,
    #[serde(default)]
    pub sweep: SweepBlock,
    #[serde(default)]
    pub output: OutputBlock,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemBlock {
    pub n: usize,
    #[serde(default)]
    pub gamma: f64,
    #[serde(default)]
    pub gamma_prime: f64,
    /// Overrides `[1, ω_1, ..., ω_n]`; must have `n + 1` entries.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frequencies: Option<Vec<f64>>,
    #[serde(default = "unit")]
    pub mu: f64,
}

fn unit() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridBlock {
    pub t_final: f64,
    /// Defaults to the smallest count with `dt ≤ 0.05`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub steps: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetBlock {
    /// Named gate; `hadamard` when neither key is given.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gate: Option<String>,
    /// Explicit unitary as `[row][col] = [re, im]`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matrix: Option<[[[f64; 2]; 2]; 2]>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Ga,
    Gradient,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerBlock {
    #[serde(default = "default_stages")]
    pub stages: Vec<Stage>,
    #[serde(default)]
    pub ga: GaConfig,
    #[serde(default)]
    pub bounds: GaBounds,
    #[serde(default)]
    pub gradient: GradConfig,
}

fn default_stages() -> Vec<Stage> {
    vec![Stage::Ga, Stage::Gradient]
}

impl Default for OptimizerBlock {
    fn default() -> Self {
        Self {
            stages: default_stages(),
            ga: GaConfig::default(),
            bounds: GaBounds::default(),
            gradient: GradConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleBlock {
    #[serde(default = "default_ensemble_size")]
    pub size: usize,
    /// Defaults to `system.gamma`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma_mean: Option<f64>,
    /// Defaults to `gamma_mean / 8`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma_sd: Option<f64>,
    /// Defaults to `system.gamma_prime / system.gamma` (0 when `gamma` is 0).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    #[serde(default = "default_bins")]
    pub bins: usize,
}

fn default_ensemble_size() -> usize {
    10_000
}

fn default_bins() -> usize {
    30
}

impl Default for EnsembleBlock {
    fn default() -> Self {
        Self {
            size: default_ensemble_size(),
            gamma_mean: None,
            gamma_sd: None,
            c: None,
            bins: default_bins(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepBlock {
    /// Defaults to 0, 0.001, ..., 0.02.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gammas: Option<Vec<f64>>,
    /// Seed each point's gradient stage with the previous point's field.
    #[serde(default)]
    pub warm_start: bool,
    /// Also evaluate each optimized field on an environment of this size.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cross_n: Option<usize>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrajectoryFormat {
    #[default]
    None,
    Csv,
    Binary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputBlock {
    #[serde(default = "default_dir")]
    pub dir: PathBuf,
    #[serde(default)]
    pub trajectory: TrajectoryFormat,
}

fn default_dir() -> PathBuf {
    PathBuf::from("out")
}

impl Default for OutputBlock {
    fn default() -> Self {
        Self {
            dir: default_dir(),
            trajectory: TrajectoryFormat::None,
        }
    }
}

/// A validated configuration together with the core objects it describes.
#[derive(Debug, Clone)]
pub struct Resolved {
    /// The input with every default filled in.
    pub config: RunConfig,
    pub spec: SystemSpec,
    pub grid: TimeGrid,
    pub target: GateTarget,
    pub ensemble: EnsembleConfig,
    pub gammas: Vec<f64>,
}

impl Resolved {
    /// The system at a different qubit coupling, keeping everything else.
    pub fn spec_with_gamma(&self, gamma: f64) -> Result<SystemSpec> {
        let mut system = self.config.system.clone();
        system.gamma = gamma;
        build_spec(&system, "sweep.gammas")
    }

    /// The system with a different environment size; frequencies revert to the defaults.
    pub fn spec_with_n(&self, n: usize, gamma: f64) -> Result<SystemSpec> {
        let system = SystemBlock {
            n,
            gamma,
            frequencies: None,
            ..self.config.system.clone()
        };
        build_spec(&system, "sweep.cross_n")
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let raw: toml::Table = text.parse().map_err(|e: toml::de::Error| CliError::validation("config", e.message().to_string()))?;
        // The run seed drives every stage; a separate GA seed may only repeat it.
        let ga_seed = raw.get("optimizer").and_then(|o| o.get("ga")).and_then(|g| g.get("seed"));
        if ga_seed.is_some() && ga_seed != Some(raw.get("seed").unwrap_or(&toml::Value::Integer(0))) {
            return Err(CliError::validation("optimizer.ga.seed", "differs from the top-level `seed`"));
        }
        let de = toml::Deserializer::new(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let path = if path == "." { "config".to_string() } else { path };
            CliError::validation(path, e.inner().message().to_string())
        })
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_toml(&text)
    }

    /// Checks every block and fills in defaults.
    pub fn resolve(&self) -> Result<Resolved> {
        let mut config = self.clone();

        let system = &mut config.system;
        if system.n > MAX_ENVIRONMENT {
            return Err(CliError::validation(
                "system.n",
                format!("{} exceeds the largest supported environment ({MAX_ENVIRONMENT})", system.n),
            ));
        }
        if system.frequencies.is_none() {
            let mut omegas = vec![1.0];
            omegas.extend_from_slice(&ENVIRONMENT_FREQUENCIES[..system.n]);
            system.frequencies = Some(omegas);
        }
        let spec = build_spec(system, "system")?;

        let grid = match config.grid.steps {
            Some(steps) => TimeGrid::new(config.grid.t_final, steps),
            None => TimeGrid::with_default_resolution(config.grid.t_final),
        }
        .map_err(|e| CliError::validation("grid", e.to_string()))?;
        config.grid.steps = Some(grid.steps());

        let target = match (&config.target.gate, &config.target.matrix) {
            (Some(_), Some(_)) => return Err(CliError::validation("target", "give either `gate` or `matrix`, not both")),
            (None, Some(m)) => {
                let matrix = ComplexMatrix::from_fn(2, 2, |r, c| spingate_core::hilbert::ONE * m[r][c][0] + spingate_core::hilbert::I * m[r][c][1]);
                GateTarget::new("custom", matrix).map_err(|e| CliError::validation("target.matrix", e.to_string()))?
            }
            (gate, None) => {
                let name = gate.clone().unwrap_or_else(|| "hadamard".into());
                let target = GateTarget::named(&name).ok_or_else(|| CliError::validation("target.gate", format!("unknown gate `{name}`")))?;
                config.target.gate = Some(name);
                target
            }
        };

        let optimizer = &mut config.optimizer;
        let mut seen = Vec::new();
        for stage in &optimizer.stages {
            if seen.contains(stage) {
                return Err(CliError::validation("optimizer.stages", format!("{stage:?} listed twice")));
            }
            seen.push(*stage);
        }
        if optimizer.stages == [Stage::Gradient, Stage::Ga] {
            return Err(CliError::validation("optimizer.stages", "the GA stage must come before the gradient stage"));
        }
        optimizer.ga.seed = config.seed;
        optimizer.ga.validate().map_err(|e| CliError::validation("optimizer.ga", e.to_string()))?;
        validate_bounds(&optimizer.bounds)?;
        optimizer.gradient.validate().map_err(|e| CliError::validation("optimizer.gradient", e.to_string()))?;

        let block = &mut config.ensemble;
        let gamma_mean = *block.gamma_mean.get_or_insert(config.system.gamma);
        let gamma_sd = *block.gamma_sd.get_or_insert(gamma_mean / 8.0);
        let ratio = if config.system.gamma > 0.0 { config.system.gamma_prime / config.system.gamma } else { 0.0 };
        let c = *block.c.get_or_insert(ratio);
        if block.bins == 0 {
            return Err(CliError::validation("ensemble.bins", "must be at least 1"));
        }
        let ensemble = EnsembleConfig {
            size: block.size,
            gamma_mean,
            gamma_sd,
            c,
            seed: config.seed,
        };
        ensemble.validate().map_err(|e| CliError::validation("ensemble", e.to_string()))?;

        let gammas = config
            .sweep
            .gammas
            .get_or_insert_with(|| (0..=20).map(|k| k as f64 * 1e-3).collect())
            .clone();
        if gammas.is_empty() {
            return Err(CliError::validation("sweep.gammas", "must list at least one value"));
        }
        if let Some(g) = gammas.iter().find(|g| !(g.is_finite() && **g >= 0.0)) {
            return Err(CliError::validation("sweep.gammas", format!("{g} is not a non-negative coupling")));
        }
        if let Some(cross) = config.sweep.cross_n {
            if cross > MAX_ENVIRONMENT {
                return Err(CliError::validation("sweep.cross_n", format!("{cross} exceeds {MAX_ENVIRONMENT}")));
            }
        }

        Ok(Resolved {
            config,
            spec,
            grid,
            target,
            ensemble,
            gammas,
        })
    }
}

fn build_spec(system: &SystemBlock, path: &str) -> Result<SystemSpec> {
    let at = |field: &str| format!("{path}.{field}");
    if system.n > MAX_ENVIRONMENT {
        return Err(CliError::validation(at("n"), format!("{} exceeds {MAX_ENVIRONMENT}", system.n)));
    }
    let omegas = match &system.frequencies {
        Some(f) if f.len() != system.n + 1 => {
            return Err(CliError::validation(at("frequencies"), format!("expected {} entries, got {}", system.n + 1, f.len())));
        }
        Some(f) => f.clone(),
        None => {
            let mut omegas = vec![1.0];
            omegas.extend_from_slice(&ENVIRONMENT_FREQUENCIES[..system.n]);
            omegas
        }
    };
    let couplings = CouplingRule {
        gamma: system.gamma,
        gamma_prime: system.gamma_prime,
    }
    .expand(system.n)
    .map_err(|e| CliError::validation(at("gamma"), e.to_string()))?;
    SystemSpec::new(omegas, system.mu, couplings).map_err(|e| CliError::validation(path, e.to_string()))
}

fn validate_bounds(bounds: &GaBounds) -> Result<()> {
    let at = |field: &str| format!("optimizer.bounds.{field}");
    if bounds.components == 0 {
        return Err(CliError::validation(at("components"), "must be at least 1"));
    }
    if !(bounds.field_max.is_finite() && bounds.field_max > 0.0) {
        return Err(CliError::validation(at("field_max"), "must be positive"));
    }
    if !(bounds.frequency_min > 0.0 && bounds.frequency_max >= bounds.frequency_min && bounds.frequency_max.is_finite()) {
        return Err(CliError::validation(at("frequency_min"), "need 0 < frequency_min <= frequency_max"));
    }
    Ok(())
}
