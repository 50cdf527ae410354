use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use schlab_cli::config::RunConfig;
use schlab_cli::{load_config, CliError, EXIT_FAILED, EXIT_OK};

#[derive(Parser)]
#[command(
    name = "schlab",
    version,
    about = "Stochastic Camassa–Holm / Euler–Poincaré laboratory"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Config file (flat key = value lines).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; defaults to the config's `output` key.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed (base seed for ensembles); overrides `seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Config override, repeatable.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate one trajectory.
    Run(Common),
    /// Seeded Monte Carlo over many paths.
    Ensemble {
        #[command(flatten)]
        common: Common,
        /// Number of paths; overrides `paths`.
        #[arg(long)]
        paths: Option<usize>,
    },
    /// Run a canned experiment; exits 0 iff every criterion passes.
    Experiment {
        name: String,
        #[arg(long, default_value = ".")]
        out: PathBuf,
        /// Parameter override, repeatable; values are read as JSON.
        #[arg(long = "override", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Exiting times of u₀ and of nearby initial data on one path.
    ProbeStability(Common),
}

fn config(common: &Common, paths: Option<usize>) -> Result<(RunConfig, PathBuf), CliError> {
    let mut overrides = common.overrides.clone();
    if let Some(s) = common.seed {
        overrides.push(format!("seed={s}"));
    }
    if let Some(p) = paths {
        overrides.push(format!("paths={p}"));
    }
    let cfg = load_config(&common.config, &overrides)?;
    let out = common.out.clone().unwrap_or_else(|| cfg.output.clone());
    Ok((cfg, out))
}

fn run(cli: Cli) -> Result<i32, CliError> {
    match cli.command {
        Command::Run(common) => {
            let (cfg, out) = config(&common, None)?;
            let s = schlab_cli::cmd_run(&cfg, &out)?;
            println!("{} at t = {} (seed {})", s.status.flag(), s.final_time, s.seed);
            Ok(EXIT_OK)
        }
        Command::Ensemble { common, paths } => {
            let (cfg, out) = config(&common, paths)?;
            let s = schlab_cli::cmd_ensemble(&cfg, &out)?;
            let f = &s.breaking_fraction;
            println!(
                "{} paths: {} breakdown, {} completed, {} failed; fraction {} [{}, {}]",
                s.paths, s.tallies.breakdown, s.tallies.completed, s.tallies.failed, f.estimate, f.ci_low, f.ci_high
            );
            Ok(EXIT_OK)
        }
        Command::Experiment { name, out, overrides } => {
            let r = schlab_cli::cmd_experiment(&name, &overrides, &out)?;
            for c in &r.criteria {
                let tag = if c.pass { "PASS" } else { "FAIL" };
                println!("{tag} {}: {} (expected {})", c.name, c.measured, c.expected);
            }
            println!(
                "{} {} in {:.1} s",
                r.name,
                if r.pass { "passed" } else { "failed" },
                r.runtime_seconds
            );
            Ok(if r.pass { EXIT_OK } else { EXIT_FAILED })
        }
        Command::ProbeStability(common) => {
            let (cfg, out) = config(&common, None)?;
            let r = schlab_cli::cmd_probe(&cfg, &out)?;
            for e in &r.entries {
                println!("{}: tau = {:?}, gap = {:?}", e.label, e.tau, e.gap);
            }
            Ok(EXIT_OK)
        }
    }
}

fn main() -> ExitCode {
    let code = match run(Cli::parse()) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    };
    ExitCode::from(code as u8)
}
