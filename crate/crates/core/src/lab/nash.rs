//! Equilibrium search on a non-convex game: run the swarm per seed, take the
//! terminal consensus, and check it against the known equilibrium.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::report::{ExperimentReport, SeedSeries, Series, Verdict};
use crate::dynamics::{CboParams, Recording, Simulator};
use crate::ensemble::{distance, Law};
use crate::error::{Error, Result};
use crate::game::{nash_residual, GameSpec, Strategy};
use crate::par;

pub const NAME: &str = "nash-search";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NashConfig {
    pub particles: usize,
    pub seeds: Vec<u64>,
    pub init: Law,
    /// Candidate deviations per player when probing the median point.
    pub probe_budget: usize,
    pub probe_radius: f64,
    pub probe_seed: u64,
    pub residual_max: f64,
    pub distance_max: f64,
    /// Seeds that must land within `distance_max` of the equilibrium.
    pub min_hits: usize,
}

impl Default for NashConfig {
    fn default() -> Self {
        Self {
            particles: 400,
            seeds: (0..8).collect(),
            init: Law::Uniform { low: -3.0, high: 3.0 },
            probe_budget: 20_000,
            probe_radius: 3.0,
            probe_seed: 0,
            residual_max: 0.5,
            distance_max: 0.25,
            min_hits: 6,
        }
    }
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

pub fn run_nash_search(game: &GameSpec, params: &CboParams, cfg: &NashConfig) -> Result<ExperimentReport> {
    let start = Instant::now();
    params.validate()?;
    let x_star = game
        .known_nash()
        .ok_or_else(|| Error::Config(format!("game `{}` has no known equilibrium", game.name())))?
        .clone();
    if cfg.seeds.is_empty() || cfg.particles == 0 {
        return Err(Error::Config("need at least one seed and one particle".into()));
    }
    let (players, dim) = (game.players(), game.dim());
    let mut columns = vec!["seed".to_string()];
    for m in 1..=players {
        columns.extend((1..=dim).map(|k| format!("c_{m}_{k}")));
    }
    columns.push("distance".into());

    let finals = par::try_map_jobs(cfg.seeds.len(), |s| {
        let seed = cfg.seeds[s];
        let init = cfg.init.sample_ensemble(players, cfg.particles, dim, seed)?;
        let rec = Recording { every: usize::MAX, snapshots: false };
        let traj = Simulator::new(game, init, *params, seed)?.run(rec)?;
        let last = traj
            .consensus_path
            .last()
            .ok_or(Error::MissingSnapshots)?;
        Ok(last.points.concat())
    })?;

    let mut per_seed = Vec::with_capacity(finals.len());
    let mut table = Series::new(columns.clone());
    for (seed, point) in cfg.seeds.iter().zip(&finals) {
        let mut row = vec![*seed as f64];
        row.extend(point);
        row.push(distance(point, x_star.as_slice()));
        let mut series = Series::new(columns.clone());
        series.push(row.clone());
        per_seed.push(SeedSeries { seed: *seed, series });
        table.push(row);
    }

    let center: Vec<f64> = (0..players * dim)
        .map(|j| median(&mut finals.iter().map(|p| p[j]).collect::<Vec<_>>()))
        .collect();
    let median_strategy = Strategy::new(players, dim, center.clone())?;
    let residual = nash_residual(game, &median_strategy, cfg.probe_budget, cfg.probe_radius, cfg.probe_seed)?;
    let mut median_cols: Vec<String> = columns[1..columns.len() - 1].to_vec();
    median_cols.push("residual".into());
    let mut median_series = Series::new(median_cols);
    let mut row = center;
    row.push(residual);
    median_series.push(row);

    let config = serde_json::json!({
        "game": game.name(),
        "players": players,
        "dim": dim,
        "params": params,
        "nash": cfg,
    });
    let mut report = ExperimentReport::new(NAME, config);
    report.seed_count = per_seed.len();
    report.per_seed = per_seed;
    report.aggregated.insert("consensus".into(), table);
    report.aggregated.insert("median_point".into(), median_series);
    report.thresholds.insert("residual_max".into(), cfg.residual_max);
    report.thresholds.insert("distance_max".into(), cfg.distance_max);
    report.thresholds.insert("min_hits".into(), cfg.min_hits as f64);
    let (fits, verdicts) = gate(&report)?;
    report.fits = fits;
    report.verdicts = verdicts;
    report.wall_time = start.elapsed().as_secs_f64();
    Ok(report)
}

pub(super) fn gate(report: &ExperimentReport) -> Result<super::Gated> {
    let residual = report
        .series("median_point")?
        .column("residual")
        .and_then(|c| c.first().copied())
        .unwrap_or(f64::NAN);
    let distances = report.series("consensus")?.column("distance").unwrap_or_default();
    let limit = report.threshold("distance_max")?;
    let hits = distances.iter().filter(|d| **d <= limit).count();
    let verdicts = vec![
        Verdict::at_most("median_nash_residual", residual, report.threshold("residual_max")?),
        Verdict::at_least("seeds_near_equilibrium", hits as f64, report.threshold("min_hits")?),
    ];
    Ok((Default::default(), verdicts))
}
