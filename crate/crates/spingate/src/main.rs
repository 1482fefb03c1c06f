use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use spingate::commands;
use spingate::{io, CliError, Rayon, Result, RunConfig};

#[derive(Debug, Parser)]
#[command(name = "spingate", version, about = "Single-qubit gate control under spin-bath decoherence")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML run configuration.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,
    /// Overrides `output.dir`.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,
    /// Control field CSV (`t,c`) on the configured grid.
    #[arg(long, global = true, value_name = "PATH")]
    field: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the configured optimizer stages and write the optimized field.
    Optimize,
    /// Optimize (or evaluate `--field`) for every coupling in `sweep.gammas`.
    Sweep,
    /// Entropy of the qubit versus time, with and without `--field`.
    Entropy,
    /// Apply `--field` to an ensemble of perturbed couplings.
    Ensemble,
    /// Run the invariant suite on the configured system.
    Check,
}

fn run(cli: Cli) -> Result<()> {
    let path = cli.config.ok_or_else(|| CliError::validation("--config", "a configuration file is required"))?;
    let mut config = RunConfig::from_path(&path)?;
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(out) = cli.out {
        config.output.dir = out;
    }
    let res = config.resolve()?;
    let executor = Rayon::new(cli.threads)?;
    let field = cli.field.as_deref().map(|p| io::read_field_csv(p, &res.grid)).transpose()?;
    let dir = res.config.output.dir.display().to_string();

    match cli.command {
        Command::Optimize => {
            let s = commands::run_optimize(&res, field, &executor)?.summary;
            println!(
                "n={} t_f={} A_max={:.3} fluence={:.3} F={:.6} S_vN={:.3e} -> {dir}",
                res.spec.n(),
                s.t_final,
                s.a_max,
                s.fluence,
                s.fidelity,
                s.entropy
            );
        }
        Command::Sweep => {
            let rows = commands::run_sweep(&res, field.as_ref(), &executor)?;
            for r in &rows {
                match r.fidelity {
                    Some(f) => println!("gamma={} n={} source_n={} F={f:.6}", r.gamma, r.n, r.source_n),
                    None => println!("gamma={} n={} failed: {}", r.gamma, r.n, r.status),
                }
            }
        }
        Command::Entropy => {
            let out = commands::run_entropy(&res, field.as_ref())?;
            match out.final_controlled() {
                Some(s) => println!("S_vN(t_f): controlled={s:.3e} uncontrolled={:.3e} -> {dir}", out.final_uncontrolled()),
                None => println!("S_vN(t_f): uncontrolled={:.3e} -> {dir}", out.final_uncontrolled()),
            }
        }
        Command::Ensemble => {
            let field = field.ok_or_else(|| CliError::validation("--field", "the ensemble command needs a control field"))?;
            let out = commands::run_ensemble(&res, &field, &executor)?;
            let r = &out.report;
            println!(
                "L={} F_mean={:.6} F_sd={:.3e} S_mean={:.3e} S_sd={:.3e} (nominal F={:.6}) -> {dir}",
                r.samples.len(),
                r.f_mean,
                r.f_sd,
                r.s_mean,
                r.s_sd,
                out.nominal.fidelity
            );
        }
        Command::Check => {
            let report = commands::run_check(&res)?;
            for c in &report.checks {
                let mark = if c.passed { "ok" } else if c.required { "FAIL" } else { "note" };
                println!("[{mark}] {} = {:.3e} (limit {:.1e})", c.name, c.value, c.limit);
            }
            if !report.passed {
                return Err(CliError::Runtime("invariant check failed".into()));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
