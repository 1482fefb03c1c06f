//! Acceptance suite: one `[PASS]`/`[FAIL]` line per criterion.
//!
//! Run alone with `cargo test -p spingate --test acceptance`. Criteria listed
//! in `UNATTAINABLE` are evaluated as stated and reported as failures, but do
//! not fail the process; any other failure (or an unattainable criterion that
//! unexpectedly passes) exits nonzero.

use std::fs;
use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use spingate::commands::{self, OptimizeOutcome, Summary};
use spingate::{Resolved, RunConfig};
use spingate_core::Sequential;
use spingate_core::dynamics::{propagate, propagate_costate, PiecewiseField, TimeGrid};
use spingate_core::hilbert::{identity, kron, random_unitary, unitarity_error};
use spingate_core::measures::{self, distance, distance_bruteforce, GateTarget};
use spingate_core::model::{controllability_dim, default_spec};
use spingate_core::optim::gradient::{gradient_k, objective_k};
use spingate_core::robustness::{evaluate_ensemble, EnsembleConfig};
use spingate_core::SystemSpec;

/// Criterion 2, second clause: the Hadamard gate is traceless, so
/// `Q(I₄, H) = tr(H)*·I₂ = 0` and `J = 1` exactly, not `√(1 − 1/√2)`.
const UNATTAINABLE: &[usize] = &[2];

struct Verdict {
    passed: bool,
    detail: String,
}

fn verdict(passed: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        passed,
        detail: detail.into(),
    }
}

fn resolve(text: &str) -> Resolved {
    RunConfig::from_toml(text).and_then(|c| c.resolve()).expect("acceptance configs are valid")
}

fn preset(name: &str) -> Resolved {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("presets").join(name);
    RunConfig::from_path(&path).and_then(|c| c.resolve()).expect("preset resolves")
}

fn two_stage(res: &Resolved) -> OptimizeOutcome {
    commands::compute_optimize(res, None, &Sequential).expect("optimization runs")
}

fn within(elapsed: Duration, minutes: u64) -> bool {
    elapsed <= Duration::from_secs(60 * minutes)
}

fn distance_oracle() -> Verdict {
    let start = Instant::now();
    let target = GateTarget::hadamard();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst: f64 = 0.0;
    for (n, count) in [(1, 50), (2, 20)] {
        for _ in 0..count {
            let u = random_unitary(2 << n, &mut rng);
            let closed = distance(&u, &target, n).unwrap().j;
            let brute = distance_bruteforce(&u, &target, n).unwrap();
            worst = worst.max((closed - brute).abs());
        }
    }
    let elapsed = start.elapsed();
    verdict(
        worst < 1e-5 && within(elapsed, 2),
        format!("max |J_closed − J_brute| = {worst:.2e} over 50 (n=1) + 20 (n=2) unitaries in {:.1?}", elapsed),
    )
}

fn perfect_gates() -> Verdict {
    let target = GateTarget::hadamard();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst: f64 = 0.0;
    for n in [1, 2, 4] {
        for _ in 0..100 {
            let phi = random_unitary(1 << n, &mut rng);
            worst = worst.max(distance(&kron(target.matrix(), &phi), &target, n).unwrap().j);
        }
    }
    let stated = (1.0 - std::f64::consts::FRAC_1_SQRT_2).sqrt();
    let j_identity = distance(&identity(4), &target, 1).unwrap().j;
    let clause_a = worst < 1e-10;
    let clause_b = (j_identity - stated).abs() <= 1e-10;
    verdict(
        clause_a && clause_b,
        format!(
            "max J(G⊗Φ) = {worst:.2e} [{}]; J(I₄, Hadamard) = {j_identity:.12} vs stated {stated:.12} [{}]",
            if clause_a { "ok" } else { "fails" },
            if clause_b { "ok" } else { "fails: tr(Hadamard) = 0 gives Q = 0, J = 1" }
        ),
    )
}

fn random_field(grid: TimeGrid, rng: &mut ChaCha8Rng) -> PiecewiseField {
    use rand::Rng;
    let harmonics: Vec<(f64, f64, f64)> = (0..5)
        .map(|_| (rng.random_range(-1.0..1.0), rng.random_range(0.5..2.0), rng.random_range(0.0..std::f64::consts::TAU)))
        .collect();
    PiecewiseField::from_fn(grid, |t| harmonics.iter().map(|(a, w, p)| a * (w * t + p).cos()).sum()).unwrap()
}

fn gradient_certification() -> Verdict {
    let start = Instant::now();
    let target = GateTarget::hadamard();
    let alpha = 1e-4;
    let grid = TimeGrid::new(10.0, 200).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(33);
    let mut worst: f64 = 0.0;
    for spec in [default_spec(1, 0.02, 0.0).unwrap(), default_spec(2, 0.02, 0.0175).unwrap()] {
        for _ in 0..5 {
            let field = random_field(grid, &mut rng);
            let analytic = gradient_k(&spec, &field, &target, alpha).gradient;
            let fd: Vec<f64> = (0..grid.steps())
                .map(|k| {
                    let at = |s: f64| {
                        let mut v = field.values().to_vec();
                        v[k] += s;
                        objective_k(&spec, &PiecewiseField::new(grid, v).unwrap(), &target, alpha)
                    };
                    let h = 1e-4;
                    (8.0 * (at(h) - at(-h)) - (at(2.0 * h) - at(-2.0 * h))) / (12.0 * h)
                })
                .collect();
            // Relative to |fd_k|, floored at 1e-3 of the largest component so
            // sign changes of the gradient do not divide by zero.
            let scale = fd.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            let err = analytic
                .iter()
                .zip(&fd)
                .map(|(a, f)| (a - f).abs() / f.abs().max(1e-3 * scale))
                .fold(0.0, f64::max);
            worst = worst.max(err);
        }
    }
    let elapsed = start.elapsed();
    verdict(
        worst < 1e-5 && within(elapsed, 5),
        format!("max componentwise relative error {worst:.2e} over 2 specs × 5 fields × 200 components (five-point stencil) in {elapsed:.1?}"),
    )
}

fn closed_system(n: usize) -> String {
    format!(
        "seed = 1\n[system]\nn = {n}\ngamma = 0.0\n[grid]\nt_final = 12.0\n\
         [optimizer.ga]\npopulation = 100\ngenerations = 40\n[optimizer.gradient]\nmax_iters = 1000\n"
    )
}

fn closed_optimization() -> Verdict {
    let start = Instant::now();
    let f: Vec<f64> = [0, 1].iter().map(|&n| two_stage(&resolve(&closed_system(n))).summary.fidelity).collect();
    let elapsed = start.elapsed();
    verdict(
        f.iter().all(|&x| x >= 1.0 - 1e-4) && within(elapsed, 10),
        format!("F(n=0) = {:.8}, F(n=1) = {:.8} in {elapsed:.1?}", f[0], f[1]),
    )
}

fn open_optimization(outcome: &OptimizeOutcome, elapsed: Duration) -> Verdict {
    let s = outcome.summary;
    verdict(
        s.fidelity >= 0.995 && s.entropy <= 1e-3 && within(elapsed, 60),
        format!(
            "F = {:.9}, S_vN(t_f) = {:.2e}, fluence = {:.1}, A_max = {:.2} in {elapsed:.1?}",
            s.fidelity, s.entropy, s.fluence, s.a_max
        ),
    )
}

fn gamma_trend() -> Verdict {
    let text = "seed = 1\n[system]\nn = 1\n[grid]\nt_final = 25.0\n\
                [optimizer.ga]\npopulation = 100\ngenerations = 30\n[optimizer.gradient]\nmax_iters = 1500\n\
                [sweep]\ngammas = [0.0, 0.01, 0.02]\n";
    let res = resolve(text);
    let rows = commands::compute_sweep(&res, None, &Sequential);
    let f: Vec<f64> = rows.iter().map(|r| r.fidelity.expect("sweep point succeeds")).collect();
    let trend = f.windows(2).all(|w| w[1] <= w[0] + 1e-3);
    verdict(trend, format!("F(γ=0, 0.01, 0.02) = {:.9}, {:.9}, {:.9}", f[0], f[1], f[2]))
}

fn inter_environment(field: &PiecewiseField, nominal: &Summary) -> Verdict {
    let coupled = default_spec(2, 0.02, 0.0175).unwrap();
    let f = measures::gate_fidelity(&coupled, field, &GateTarget::hadamard());
    let loss = nominal.fidelity - f;
    verdict(
        loss < 1e-3,
        format!("F(γ'=0) = {:.6}, F(γ'=0.0175) = {f:.6}, loss = {loss:.2e}", nominal.fidelity),
    )
}

fn robustness(field: &PiecewiseField, spec: &SystemSpec, nominal: &Summary) -> Verdict {
    let start = Instant::now();
    let config = EnsembleConfig {
        size: 1000,
        gamma_mean: 0.02,
        gamma_sd: 0.02 / 8.0,
        c: 0.0,
        seed: 1,
    };
    let report = evaluate_ensemble(field, spec, &GateTarget::hadamard(), &config, &Sequential).unwrap();
    let elapsed = start.elapsed();
    let ratio = report.f_sd / report.f_mean;
    let bound = 1e-2 * (config.gamma_sd / config.gamma_mean);
    let offset = (report.f_mean - nominal.fidelity).abs();
    verdict(
        ratio <= bound && offset <= 2.0 * report.f_sd && within(elapsed, 15),
        format!(
            "σ_F/F̄ = {ratio:.2e} (bound {bound:.2e}), |F̄ − F| = {offset:.2e} vs 2σ_F = {:.2e}, F̄ = {:.6} in {elapsed:.1?}",
            2.0 * report.f_sd,
            report.f_mean
        ),
    )
}

fn dynamics_invariants() -> Verdict {
    let spec = default_spec(2, 0.02, 0.0175).unwrap();
    let smooth = |grid: TimeGrid| PiecewiseField::from_fn(grid, |t| 1.2 * (0.9 * t).cos() + 0.5 * (1.7 * t + 0.3).sin()).unwrap();

    let long = smooth(TimeGrid::new(200.0, 10_000).unwrap());
    let drift = unitarity_error(propagate(&spec, &long, false).final_unitary());

    let field = smooth(TimeGrid::new(10.0, 200).unwrap());
    let whole = propagate(&spec, &field, false).into_final();
    let (head, tail) = field.split_at(83).unwrap();
    let composed = propagate(&spec, &tail, false).into_final() * propagate(&spec, &head, false).into_final();
    let composition = (&whole - &composed).norm();

    let at = |steps| propagate(&spec, &smooth(TimeGrid::new(10.0, steps).unwrap()), false).into_final();
    let reference = at(6400);
    let ratio = (&at(100) - &reference).norm() / (&at(200) - &reference).norm();

    let traj = propagate(&spec, &field, true);
    let b_final = random_unitary(8, &mut ChaCha8Rng::seed_from_u64(5));
    let costates = propagate_costate(&spec, &field, &b_final).unwrap();
    let pair = |k: usize| (&costates[k] * &traj.unitaries()[k]).trace();
    let pairing = (0..costates.len()).map(|k| (pair(k) - pair(0)).norm() / pair(0).norm()).fold(0.0, f64::max);

    let ok = drift < 1e-10 && composition < 1e-12 && (3.5..=4.5).contains(&ratio) && pairing < 1e-8;
    verdict(
        ok,
        format!(
            "unitarity drift (10⁴ steps) {drift:.1e}, composition {composition:.1e}, step-halving ratio {ratio:.3}, tr(BU) drift {pairing:.1e}"
        ),
    )
}

fn uncontrolled_decoherence() -> Verdict {
    let spec = default_spec(1, 0.02, 0.0).unwrap();
    let grid = TimeGrid::with_default_resolution(60.0).unwrap();
    let trace = measures::entropy_trace(&spec, &PiecewiseField::zeros(grid));
    let at = |t: f64| trace.iter().find(|(s, _)| (s - t).abs() < 1e-9).expect("time on grid").1;
    let (s10, s30, s60) = (at(10.0), at(30.0), at(60.0));
    let ok = s60 > s30 && s30 > s10 && s10 > 0.0 && s60 < std::f64::consts::LN_2;
    verdict(ok, format!("S(10) = {s10:.3e}, S(30) = {s30:.3e}, S(60) = {s60:.3e}, ln 2 = 0.693"))
}

fn controllability() -> Verdict {
    let qubit = controllability_dim(&default_spec(0, 0.0, 0.0).unwrap(), 20).unwrap();
    let coupled = controllability_dim(&default_spec(1, 0.02, 0.0).unwrap(), 40).unwrap();
    let uncoupled = controllability_dim(&default_spec(1, 0.0, 0.0).unwrap(), 40).unwrap();
    verdict(
        qubit == 3 && coupled == 15 && uncoupled < 15,
        format!("dim = {qubit} (qubit), {coupled} (n=1, γ=0.02), {uncoupled} (n=1, γ=0)"),
    )
}

fn determinism() -> Verdict {
    let tmp = tempfile::tempdir().unwrap();
    let config = tmp.path().join("run.toml");
    fs::write(
        &config,
        "seed = 11\n[system]\nn = 1\ngamma = 0.02\n[grid]\nt_final = 5.0\n\
         [optimizer.ga]\npopulation = 12\ngenerations = 3\n[optimizer.gradient]\nmax_iters = 15\n\
         [ensemble]\nsize = 25\n[sweep]\ngammas = [0.0, 0.02]\n",
    )
    .unwrap();
    let out = tmp.path().join("out");
    let run = |command: &str, threads: &str, extra: &[&str]| -> Vec<u8> {
        let status = Command::new(env!("CARGO_BIN_EXE_spingate"))
            .args([command, "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap(), "--threads", threads])
            .args(extra)
            .output()
            .expect("binary runs");
        assert!(status.status.success(), "{command}: {}", String::from_utf8_lossy(&status.stderr));
        let bytes = fs::read(out.join(format!("{command}.json"))).unwrap();
        fs::remove_dir_all(&out).unwrap();
        bytes
    };
    let field = tmp.path().join("field.csv");
    let mut identical = Vec::new();
    for command in ["optimize", "sweep", "entropy", "check"] {
        let first = run(command, "1", &[]);
        identical.push((command, first == run(command, "2", &[])));
    }
    run("optimize", "1", &[]);
    let _ = fs::create_dir_all(&out);
    let optimized = Command::new(env!("CARGO_BIN_EXE_spingate"))
        .args(["optimize", "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()])
        .output()
        .unwrap();
    assert!(optimized.status.success());
    fs::copy(out.join("field.csv"), &field).unwrap();
    fs::remove_dir_all(&out).unwrap();
    let extra = ["--field", field.to_str().unwrap()];
    let first = run("ensemble", "1", &extra);
    identical.push(("ensemble", first == run("ensemble", "2", &extra)));
    let summary: Vec<String> = identical.iter().map(|(c, same)| format!("{c}:{}", if *same { "same" } else { "DIFFERS" })).collect();
    verdict(identical.iter().all(|(_, same)| *same), format!("JSON reruns (1 vs 2 threads) {}", summary.join(" ")))
}

fn main() -> ExitCode {
    let total = Instant::now();
    let mut results: Vec<(usize, &str, Verdict, Duration)> = Vec::new();
    let mut record = |id: usize, name: &'static str, f: &mut dyn FnMut() -> Verdict| {
        let start = Instant::now();
        let v = f();
        let elapsed = start.elapsed();
        println!("[{}] {id:>2}. {name}: {} ({elapsed:.1?})", if v.passed { "PASS" } else { "FAIL" }, v.detail);
        results.push((id, name, v, elapsed));
    };

    record(1, "distance-measure oracle", &mut distance_oracle);
    record(2, "perfect-gate cases", &mut perfect_gates);
    record(3, "gradient certification", &mut gradient_certification);
    record(4, "closed-system optimization", &mut closed_optimization);

    let start = Instant::now();
    let open = two_stage(&preset("optimize_n1.toml"));
    let open_elapsed = start.elapsed();
    record(5, "open-system optimization (n=1, γ=0.02, t_f=25)", &mut || open_optimization(&open, open_elapsed));
    record(6, "fidelity-vs-γ trend", &mut gamma_trend);

    let n2 = preset("optimize_n2.toml");
    let n2_outcome = two_stage(&n2);
    record(7, "inter-environment insensitivity", &mut || inter_environment(&n2_outcome.field, &n2_outcome.summary));
    record(8, "robustness ensemble", &mut || robustness(&n2_outcome.field, &n2.spec, &n2_outcome.summary));

    record(9, "dynamics invariants", &mut dynamics_invariants);
    record(10, "uncontrolled decoherence", &mut uncontrolled_decoherence);
    record(11, "controllability", &mut controllability);
    record(12, "determinism", &mut determinism);

    let failed: Vec<usize> = results.iter().filter(|r| !r.2.passed).map(|r| r.0).collect();
    let unexpected: Vec<usize> = failed.iter().copied().filter(|id| !UNATTAINABLE.contains(id)).collect();
    let recovered: Vec<usize> = UNATTAINABLE.iter().copied().filter(|id| !failed.contains(id)).collect();
    println!(
        "acceptance: {} passed, {} failed {:?} ({:?} documented as unattainable) in {:.1?}",
        results.len() - failed.len(),
        failed.len(),
        failed,
        UNATTAINABLE,
        total.elapsed()
    );
    if !unexpected.is_empty() || !recovered.is_empty() {
        println!("unexpected failures {unexpected:?}; unattainable criteria now passing {recovered:?}");
        return ExitCode::FAILURE;
    }
    ExitCode::SUCCESS
}
