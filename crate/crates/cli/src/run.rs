//! Maps a [`RunConfig`] onto the experiments and writes their outputs.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use cbo_games::lab::report::mean_series;
use cbo_games::lab::{
    bounded_bump, run_iid_consensus, run_moment_monitor, run_mf_rate, run_nash_search, run_stability_probe,
    run_variance_decay, Comparison, DecayConfig, ExperimentReport, FrozenCost, IidConfig, MfRateConfig,
    MomentConfig, NashConfig, SeedSeries, Series, StabilityConfig, Verdict,
};
use cbo_games::metrics::variance_at;
use cbo_games::{GameSpec, Recording, Simulator, Strategy};

use crate::config::{Experiment, Format, IidCost, RunConfig};
use crate::error::{CliError, Result};

/// Runs the configured experiment. The report's `config` holds the run
/// configuration under `run` and the experiment's own settings under `lab`.
pub fn execute(cfg: &RunConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let game = cfg.build_game()?;
    let params = &cfg.params;
    let seeds = cfg.seeds.list();
    let mut report = match cfg.experiment {
        Experiment::Simulate => run_simulate(&game, cfg)?,
        Experiment::VarianceDecay => {
            let lab = DecayConfig {
                particles: cfg.particles.n,
                seeds,
                init: cfg.init.clone(),
                record_every: cfg.record_every,
                ..DecayConfig::default()
            };
            run_variance_decay(&game, params, &lab)?
        }
        Experiment::MfRate => {
            let lab = MfRateConfig {
                n_list: cfg.particles.n_list.clone(),
                n_ref: cfg.particles.n_ref,
                p: cfg.analysis.p,
                seeds,
                init: cfg.init.clone(),
                ..MfRateConfig::default()
            };
            run_mf_rate(&game, params, &lab)?
        }
        Experiment::IidConsensus => {
            let lab = IidConfig {
                law: cfg.init.clone(),
                dim: cfg.game.d,
                alpha: params.alpha,
                n_list: cfg.particles.n_list.clone(),
                trials: cfg.analysis.trials,
                p: cfg.analysis.p,
                oracle_samples: cfg.analysis.oracle_samples,
                oracle_batches: cfg.analysis.oracle_batches,
                seed: cfg.seeds.base_seed,
                ..IidConfig::default()
            };
            run_iid_consensus(&frozen_cost(&game, cfg.analysis.cost), &lab)?
        }
        Experiment::StabilityProbe => {
            let lab = StabilityConfig {
                radius: cfg.analysis.radius,
                p: cfg.analysis.p,
                alpha: params.alpha,
                trials: cfg.analysis.trials,
                seed: cfg.seeds.base_seed,
                ..StabilityConfig::default()
            };
            run_stability_probe(&game, &lab)?
        }
        Experiment::MomentMonitor => {
            let lab = MomentConfig {
                particles: cfg.particles.n,
                p: cfg.analysis.p,
                seeds,
                init: cfg.init.clone(),
                record_every: cfg.record_every,
                ..MomentConfig::default()
            };
            run_moment_monitor(&game, params, &lab)?
        }
        Experiment::NashSearch => {
            let lab = NashConfig {
                particles: cfg.particles.n,
                seeds,
                init: cfg.init.clone(),
                probe_budget: cfg.analysis.probe_budget,
                probe_radius: cfg.analysis.probe_radius,
                probe_seed: cfg.seeds.base_seed,
                ..NashConfig::default()
            };
            run_nash_search(&game, params, &lab)?
        }
    };
    let run = serde_json::to_value(cfg).map_err(|e| CliError::Encode(e.to_string()))?;
    let lab = std::mem::take(&mut report.config);
    report.config = serde_json::json!({ "run": run, "lab": lab });
    Ok(report)
}

/// Player 1's cost with the opponents frozen at the known equilibrium, or at
/// the origin when the game has none.
fn frozen_cost(game: &GameSpec, choice: IidCost) -> FrozenCost {
    match choice {
        IidCost::BoundedBump => bounded_bump(),
        IidCost::Game => {
            let opp = game
                .known_nash()
                .cloned()
                .unwrap_or_else(|| Strategy::zeros(game.players(), game.dim()))
                .opponents(0);
            let game = game.clone();
            Arc::new(move |x: &[f64]| game.eval_cost(0, x, &opp).unwrap_or(f64::NAN))
        }
    }
}

/// Plain trajectories: consensus path, per-player moments and, when the game
/// has a known equilibrium, the variance functional.
fn run_simulate(game: &GameSpec, cfg: &RunConfig) -> Result<ExperimentReport> {
    let start = Instant::now();
    let (players, d) = (game.players(), game.dim());
    let mut consensus_cols = vec!["time".to_string()];
    for m in 1..=players {
        consensus_cols.extend((1..=d).map(|k| format!("c_{m}_{k}")));
    }
    let mut moment_cols = vec!["time".to_string()];
    moment_cols.extend((1..=players).map(|m| format!("moment_{m}")));
    let mut v_cols = vec!["time".to_string()];
    v_cols.extend((1..=players).map(|m| format!("V_{m}")));
    v_cols.push("V_total".into());

    let mut per_seed = Vec::new();
    let (mut paths, mut moments, mut traces) = (Vec::new(), Vec::new(), Vec::new());
    let mut terminal_max = 0.0_f64;
    for seed in cfg.seeds.list() {
        let init = cfg.init.sample_ensemble(players, cfg.particles.n, d, seed)?;
        let traj = Simulator::new(game, init, cfg.params, seed)?.run(Recording::every(cfg.record_every))?;
        let times = traj.recorded_times();
        let mut path = Series::new(consensus_cols.clone());
        let mut moment = Series::new(moment_cols.clone());
        let mut trace = Series::new(v_cols.clone());
        for ((t, c), ens) in times.iter().zip(&traj.consensus_path).zip(&traj.snapshots) {
            let mut row = vec![*t];
            row.extend(c.points.iter().flatten());
            path.push(row);
            let mut row = vec![*t];
            row.extend(ens.moments(cfg.analysis.p));
            moment.push(row);
            if let Some(x_star) = game.known_nash() {
                let v = variance_at(ens, x_star)?;
                let mut row = vec![*t];
                row.extend(&v);
                row.push(v.iter().sum());
                trace.push(row);
            }
        }
        if let Some(last) = &traj.terminal {
            terminal_max = last.as_slice().iter().fold(terminal_max, |a, x| a.max(x.abs()));
        }
        per_seed.push(SeedSeries { seed, series: path.clone() });
        paths.push(path);
        moments.push(moment);
        traces.push(trace);
    }

    let mut report = ExperimentReport::new(
        "simulate",
        serde_json::json!({ "game": game.name(), "players": players, "dim": d, "params": cfg.params }),
    );
    report.seed_count = per_seed.len();
    report.per_seed = per_seed;
    report.aggregated.insert("consensus_path".into(), mean_series(&paths));
    report.aggregated.insert("moments".into(), mean_series(&moments));
    if game.known_nash().is_some() {
        report.aggregated.insert("v_trace".into(), mean_series(&traces));
    }
    report.thresholds = BTreeMap::new();
    report.verdicts = vec![Verdict::new("terminal_max_abs", terminal_max, Comparison::Finite)];
    report.wall_time = start.elapsed().as_secs_f64();
    Ok(report)
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|source| CliError::Write {
        path: path.to_path_buf(),
        source,
    })
}

/// Writes `config.toml`, plus `report.json` and one CSV per aggregated
/// series as selected by `output.formats`. Returns the written paths.
pub fn write_outputs(report: &ExperimentReport, cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let dir = PathBuf::from(&cfg.output.directory);
    fs::create_dir_all(&dir).map_err(|source| CliError::Write {
        path: dir.clone(),
        source,
    })?;
    let mut written = Vec::new();
    let path = dir.join("config.toml");
    write_file(&path, &cfg.to_toml()?)?;
    written.push(path);
    if cfg.output.formats.contains(&Format::Json) {
        let path = dir.join("report.json");
        let json = serde_json::to_string_pretty(report).map_err(|e| CliError::Encode(e.to_string()))?;
        write_file(&path, &json)?;
        written.push(path);
    }
    if cfg.output.formats.contains(&Format::Csv) {
        for (name, series) in &report.aggregated {
            let path = dir.join(format!("{name}.csv"));
            write_file(&path, &series.to_csv())?;
            written.push(path);
        }
    }
    Ok(written)
}
