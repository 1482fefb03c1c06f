use spingate_core::dynamics::{propagate, PiecewiseField, TimeGrid};
use spingate_core::measures::{final_entropy, GateTarget};
use spingate_core::model::default_spec;
use spingate_core::optim::ga::{ga_optimize, synthesize, GaBounds, GaConfig};
use spingate_core::optim::gradient::{optimize, GradConfig, ObjectivePath, OptimReport};
use spingate_core::{Sequential, SystemSpec};

fn two_stage(spec: &SystemSpec, t_final: f64, population: usize, generations: usize, grad: &GradConfig) -> OptimReport {
    let grid = TimeGrid::with_default_resolution(t_final).unwrap();
    let ga = GaConfig {
        population,
        generations,
        seed: 1,
        ..GaConfig::default()
    };
    let seeded = ga_optimize(spec, &GateTarget::hadamard(), grid, &ga, &GaBounds::default(), &Sequential).unwrap();
    let report = optimize(spec, &synthesize(&seeded.best), &GateTarget::hadamard(), grad).unwrap();
    assert!(report.fidelity >= seeded.fitness - 1e-12);
    report
}

#[test]
fn closed_qubit_hadamard_two_stage() {
    let spec = default_spec(0, 0.0, 0.0).unwrap();
    let report = two_stage(&spec, 12.0, 60, 30, &GradConfig::default());
    assert!(report.fidelity >= 1.0 - 1e-4, "F = {}", report.fidelity);
}

#[test]
fn single_environment_spin_reaches_high_fidelity() {
    let spec = default_spec(1, 0.02, 0.0).unwrap();
    let config = GradConfig {
        max_iters: 600,
        ..GradConfig::default()
    };
    let report = two_stage(&spec, 25.0, 100, 30, &config);
    let u = propagate(&spec, &report.field, false).into_final();
    assert!(report.fidelity >= 0.995, "F = {}", report.fidelity);
    assert!(final_entropy(&u, 1).unwrap() <= 1e-3);
    assert!(report.field.max_amplitude() <= 4.0);
    assert!(report.objective_history.windows(2).all(|w| w[1] <= w[0]));
}

#[test]
fn distance_and_squared_paths_agree() {
    let spec = default_spec(1, 0.0, 0.0).unwrap();
    let grid = TimeGrid::with_default_resolution(12.0).unwrap();
    let ga = GaConfig {
        population: 60,
        generations: 20,
        seed: 3,
        ..GaConfig::default()
    };
    let seeded = ga_optimize(&spec, &GateTarget::hadamard(), grid, &ga, &GaBounds::default(), &Sequential).unwrap();
    let init = synthesize(&seeded.best);
    let run = |path| {
        let config = GradConfig {
            alpha: 0.0,
            path,
            ..GradConfig::default()
        };
        optimize(&spec, &init, &GateTarget::hadamard(), &config).unwrap().fidelity
    };
    let (a, b) = (run(ObjectivePath::Distance), run(ObjectivePath::Squared));
    assert!((a - b).abs() < 1e-6, "{a} vs {b}");
}

#[test]
fn larger_fluence_weight_never_raises_fluence() {
    let spec = default_spec(1, 0.02, 0.0).unwrap();
    let grid = TimeGrid::with_default_resolution(25.0).unwrap();
    let mut field = PiecewiseField::from_fn(grid, |t| {
        1.5 * (std::f64::consts::PI * t / 25.0).sin().powi(2) * (t.cos() + 0.5 * (1.3 * t + 1.0).cos())
    })
    .unwrap();
    let mut fluences = Vec::new();
    for alpha in [1e-4, 1e-3, 1e-2] {
        let config = GradConfig {
            alpha,
            max_iters: 300,
            ..GradConfig::default()
        };
        let report = optimize(&spec, &field, &GateTarget::hadamard(), &config).unwrap();
        fluences.push(report.fluence);
        field = report.field;
    }
    assert!(fluences.windows(2).all(|w| w[1] <= w[0]), "{fluences:?}");
}
