use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use pathgibbs::config::ExperimentSpec;
use pathgibbs::runner::{cmd_analyze, cmd_check, cmd_sample};
use pathgibbs::{Error, Result};

/// Path-space Gibbs measure experiments.
#[derive(Parser)]
#[command(version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Experiment spec (TOML).
    #[arg(long, global = true)]
    spec: Option<PathBuf>,
    /// Output or run directory; defaults to the spec's `[output] dir`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for independent tasks (1 = reproducible single-threaded mode).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Sample even if required conditions fail.
    #[arg(long, global = true)]
    force: bool,
}

#[derive(Subcommand, Clone, Copy, PartialEq, Eq)]
enum Command {
    /// Check the potential's growth and decay conditions.
    Check,
    /// Run the sampler for every (lambda, seed) pair.
    Sample,
    /// Compute estimators on a completed run.
    Analyze,
    /// Check, sample and analyze.
    All,
}

fn load_spec(cli: &Cli) -> Result<ExperimentSpec> {
    let path = cli
        .spec
        .as_ref()
        .ok_or_else(|| Error::Config("--spec FILE is required for this command".into()))?;
    ExperimentSpec::from_file(path)
}

fn out_dir(cli: &Cli, spec: Option<&ExperimentSpec>) -> Result<PathBuf> {
    cli.out
        .clone()
        .or_else(|| spec.and_then(|s| s.output.clone()))
        .ok_or_else(|| Error::Config("no output directory: pass --out DIR or set [output] dir".into()))
}

fn run(cli: &Cli) -> Result<u8> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Error::Config("--threads must be at least 1".into()));
        }
        // a second initialization can only fail if a pool already exists
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    match cli.command {
        Command::Check => {
            let spec = load_spec(cli)?;
            let out = out_dir(cli, Some(&spec))?;
            let outcome = cmd_check(&spec, &out)?;
            if let Some(r) = &outcome.report {
                for (name, v) in r.verdicts() {
                    println!("{name}: {v:?}");
                }
            }
            Ok(if outcome.required_hold { 0 } else { 1 })
        }
        Command::Sample => {
            let spec = load_spec(cli)?;
            let out = out_dir(cli, Some(&spec))?;
            let m = cmd_sample(&spec, &out, cli.threads, cli.force)?;
            for t in &m.tasks {
                println!(
                    "{}: lambda = {}, {} samples, acceptance {:.3}, iact {:.1}",
                    t.name, t.lambda, t.summary.n_samples, t.summary.acceptance_rate, t.summary.iact
                );
                for w in &t.warnings {
                    eprintln!("warning ({}): {w}", t.name);
                }
            }
            Ok(0)
        }
        Command::Analyze => {
            let spec = cli.spec.as_ref().map(|p| ExperimentSpec::from_file(p)).transpose()?;
            let out = out_dir(cli, spec.as_ref())?;
            let verdicts = cmd_analyze(&out, spec.as_ref().map(|s| &s.analysis))?;
            for v in &verdicts {
                let task = v.task.as_deref().unwrap_or("-");
                println!("{} [{task}]: {}", v.criterion, if v.passed { "pass" } else { "FAIL" });
            }
            Ok(0)
        }
        Command::All => {
            let spec = load_spec(cli)?;
            let out = out_dir(cli, Some(&spec))?;
            // the conditions land in analysis/conditions.json
            cmd_sample(&spec, &out, cli.threads, cli.force)?;
            for v in cmd_analyze(&out, None)? {
                let task = v.task.as_deref().unwrap_or("-");
                println!("{} [{task}]: {}", v.criterion, if v.passed { "pass" } else { "FAIL" });
            }
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
