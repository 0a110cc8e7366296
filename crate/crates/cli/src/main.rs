use std::path::PathBuf;
use std::process::ExitCode;

use cbo_games::lab::{run_selftest, ExperimentReport};
use cbo_games::metrics::gamma_exponent;
use cbo_games_cli::config::defaults_help;
use cbo_games_cli::{execute, parse_config, split_overrides, CliError, Experiment, Result};
use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand};

/// Consensus-based optimization for Nash equilibria of M-player games.
#[derive(Parser)]
#[command(name = "cbo-games", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// TOML configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Print the resolved configuration and exit.
    #[arg(long)]
    dry_run: bool,
    /// Only report failures.
    #[arg(long)]
    quiet: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Run the particle system and record consensus, moments and variance.
    Simulate(RunArgs),
    /// Exponential decay of the variance functional.
    VarianceDecay(RunArgs),
    /// Mean-field convergence rate against a large reference system.
    MfRate(RunArgs),
    /// Consensus of i.i.d. samples against a high-sample oracle.
    IidConsensus(RunArgs),
    /// Lipschitz ratio of the consensus map in Wasserstein distance.
    StabilityProbe(RunArgs),
    /// Moment bounds along trajectories.
    MomentMonitor(RunArgs),
    /// Equilibrium search on a non-convex game.
    NashSearch(RunArgs),
    /// Print the convergence exponent gamma(q, p, p_M).
    Gamma {
        #[arg(long)]
        q: f64,
        #[arg(long)]
        p: f64,
        #[arg(long)]
        pm: f64,
    },
    /// Run the bundled invariant checks.
    Selftest {
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn init_threads() -> Result<()> {
    let Ok(raw) = std::env::var("CBO_GAMES_THREADS") else {
        return Ok(());
    };
    let threads: usize = raw
        .trim()
        .parse()
        .map_err(|_| CliError::Config(format!("CBO_GAMES_THREADS must be a count, got `{raw}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| CliError::Config(format!("cannot start thread pool: {e}")))
}

fn print_report(report: &ExperimentReport, quiet: bool) {
    for v in &report.verdicts {
        if !quiet || !v.passed {
            let status = if v.passed { "PASS" } else { "FAIL" };
            println!("{status} {}: measured {} ({:?})", v.name, v.measured, v.comparison);
        }
    }
    if !quiet {
        println!(
            "{}: {} in {:.1}s",
            report.name,
            if report.passed() { "passed" } else { "failed" },
            report.wall_time
        );
    }
}

fn run_experiment(experiment: Experiment, args: RunArgs, overrides: &[(String, String)]) -> Result<bool> {
    let cfg = parse_config(experiment, args.config.as_deref(), overrides)?;
    if args.dry_run {
        print!("{}", cfg.to_toml()?);
        return Ok(true);
    }
    let report = execute(&cfg)?;
    let written = cbo_games_cli::write_outputs(&report, &cfg)?;
    print_report(&report, args.quiet);
    if !args.quiet {
        for path in written {
            println!("wrote {}", path.display());
        }
    }
    Ok(report.passed())
}

fn run(cli: Cli, overrides: &[(String, String)]) -> Result<bool> {
    let experiment = match cli.command {
        Command::Gamma { q, p, pm } => {
            println!("{}", gamma_exponent(q, p, pm)?);
            return Ok(true);
        }
        Command::Selftest { seed } => {
            let report = run_selftest(seed)?;
            print_report(&report, false);
            return Ok(report.passed());
        }
        Command::Simulate(a) => (Experiment::Simulate, a),
        Command::VarianceDecay(a) => (Experiment::VarianceDecay, a),
        Command::MfRate(a) => (Experiment::MfRate, a),
        Command::IidConsensus(a) => (Experiment::IidConsensus, a),
        Command::StabilityProbe(a) => (Experiment::StabilityProbe, a),
        Command::MomentMonitor(a) => (Experiment::MomentMonitor, a),
        Command::NashSearch(a) => (Experiment::NashSearch, a),
    };
    run_experiment(experiment.0, experiment.1, overrides)
}

fn main() -> ExitCode {
    let (args, overrides) = match split_overrides(std::env::args().collect()) {
        Ok(split) => split,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    let matches = Cli::command().after_help(defaults_help()).get_matches_from(args);
    let cli = match Cli::from_arg_matches(&matches) {
        Ok(cli) => cli,
        Err(e) => e.exit(),
    };
    let is_experiment = !matches!(cli.command, Command::Gamma { .. } | Command::Selftest { .. });
    if !overrides.is_empty() && !is_experiment {
        eprintln!("error: configuration flags only apply to experiment subcommands");
        return ExitCode::from(1);
    }
    if let Err(e) = init_threads() {
        eprintln!("error: {e}");
        return ExitCode::from(1);
    }
    match run(cli, &overrides) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
