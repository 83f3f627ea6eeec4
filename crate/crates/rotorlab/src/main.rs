use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use rotorlab::config::{parse_with_overrides, Scenario, ScenarioConfig};
use rotorlab::run_scenario;

#[derive(Parser)]
#[command(name = "rotorlab", version, about = "Random rotations of Brownian paths: experiment runner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the scenario described by a config file.
    Run {
        config: PathBuf,
        /// Output directory (overrides `out`).
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        paths: Option<usize>,
        /// Print only the OVERALL line.
        #[arg(long)]
        quiet: bool,
    },
    /// List the available scenarios.
    ListScenarios,
    /// Run every scenario at reduced size with default settings.
    Selftest {
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

fn run(config: PathBuf, out: Option<PathBuf>, seed: Option<u64>, paths: Option<usize>, quiet: bool) -> Result<bool> {
    let text = std::fs::read_to_string(&config)
        .with_context(|| format!("reading config {}", config.display()))?;
    let mut overrides = Vec::new();
    if let Some(o) = out {
        overrides.push(("out", o.display().to_string()));
    }
    if let Some(s) = seed {
        overrides.push(("seed", s.to_string()));
    }
    if let Some(p) = paths {
        overrides.push(("paths", p.to_string()));
    }
    let cfg = parse_with_overrides(&text, &overrides)
        .with_context(|| format!("parsing config {}", config.display()))?;
    let mut report = run_scenario(&cfg).with_context(|| format!("running scenario {}", cfg.scenario))?;
    report
        .write(&cfg.out)
        .with_context(|| format!("writing results to {}", cfg.out.display()))?;
    let summary = report.summary();
    if quiet {
        print!("{}", summary.lines().last().unwrap_or_default());
        println!();
    } else {
        print!("{summary}");
    }
    Ok(report.passed())
}

fn selftest(seed: u64) -> Result<bool> {
    let mut ok = true;
    for s in Scenario::ALL {
        let mut cfg = ScenarioConfig::with_defaults(s, seed);
        cfg.n_iter = cfg.n_iter.min(200);
        cfg.paths = match s {
            Scenario::Levy => 10_000,
            Scenario::ErgodicDichotomy | Scenario::NecessaryConditions => 50,
            Scenario::DivergenceIdentities => 20,
            _ => 5_000,
        };
        let report = run_scenario(&cfg).with_context(|| format!("running scenario {s}"))?;
        let failed: Vec<&str> = report.tests.iter().filter(|t| !t.pass).map(|t| t.name.as_str()).collect();
        println!(
            "{s}: {} tests, {} failed{}",
            report.tests.len(),
            failed.len(),
            if failed.is_empty() { String::new() } else { format!(" ({})", failed.join(", ")) }
        );
        ok &= failed.is_empty();
    }
    Ok(ok)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run {
            config,
            out,
            seed,
            paths,
            quiet,
        } => run(config, out, seed, paths, quiet),
        Command::ListScenarios => {
            for s in Scenario::ALL {
                println!("{:<22} {}", s.name(), s.description());
            }
            Ok(true)
        }
        Command::Selftest { seed } => selftest(seed),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
