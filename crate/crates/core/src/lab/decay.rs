//! Exponential decay of the variance functional `V(t)` toward a known
//! equilibrium.
//!
//! The decay rate is fitted on the exponential phase `[0, T*]`, where `T*`
//! is the first recorded time with `V(T*) <= ratio_max · V(0)`. Past `T*`
//! the swarm has collapsed and `V` settles at the squared offset of the
//! final consensus point, which depends on `α` and `N`. A fit over the
//! whole horizon is kept in the report as `v_decay_full_horizon`.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::report::{mean_series, ExperimentReport, SeedSeries, Series, Verdict};
use crate::dynamics::{CboParams, Recording, Simulator};
use crate::ensemble::Law;
use crate::error::{Error, Result};
use crate::game::GameSpec;
use crate::metrics::{fit_exponential_decay, variance_trace};
use crate::par;

pub const NAME: &str = "variance-decay";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayConfig {
    pub particles: usize,
    pub seeds: Vec<u64>,
    pub init: Law,
    pub record_every: usize,
    /// Allowed shortfall of the fitted rate against `(2λ − σ²)/2`.
    pub slack: f64,
    /// Upper bound on `V(T)/V(0)`.
    pub ratio_max: f64,
    pub r2_min: f64,
    /// Points with `V` below this are excluded from every fit.
    pub floor: f64,
}

impl Default for DecayConfig {
    fn default() -> Self {
        Self {
            particles: 200,
            seeds: (0..8).collect(),
            init: Law::Uniform { low: -3.0, high: 3.0 },
            record_every: 10,
            slack: 0.3,
            ratio_max: 1e-3,
            r2_min: 0.9,
            floor: 1e-8,
        }
    }
}

/// Theoretical rate floor `(2λ − σ²)/2`.
pub fn rate_floor(params: &CboParams) -> f64 {
    (2.0 * params.lambda - params.sigma * params.sigma) / 2.0
}

pub fn check_decay_regime(params: &CboParams) -> Result<()> {
    if 2.0 * params.lambda <= params.sigma * params.sigma {
        return Err(Error::Config(
            "decay regime violated (2λ > σ² required)".into(),
        ));
    }
    Ok(())
}

pub fn run_variance_decay(game: &GameSpec, params: &CboParams, cfg: &DecayConfig) -> Result<ExperimentReport> {
    let start = Instant::now();
    check_decay_regime(params)?;
    params.validate()?;
    let x_star = game
        .known_nash()
        .ok_or_else(|| Error::Config(format!("game `{}` has no known equilibrium", game.name())))?
        .clone();
    if cfg.seeds.is_empty() || cfg.particles == 0 {
        return Err(Error::Config("need at least one seed and one particle".into()));
    }
    let players = game.players();
    let mut columns = vec!["time".to_string()];
    columns.extend((1..=players).map(|m| format!("V_{m}")));
    columns.push("V_total".into());

    let per_seed = par::try_map_jobs(cfg.seeds.len(), |s| {
        let seed = cfg.seeds[s];
        let init = cfg.init.sample_ensemble(players, cfg.particles, game.dim(), seed)?;
        let traj = Simulator::new(game, init, *params, seed)?.run(Recording::every(cfg.record_every))?;
        let mut series = Series::new(columns.clone());
        for point in variance_trace(&traj, &x_star)? {
            let mut row = vec![point.time];
            row.extend(point.per_player);
            row.push(point.total);
            series.push(row);
        }
        Ok(SeedSeries { seed, series })
    })?;

    let config = serde_json::json!({
        "game": game.name(),
        "players": players,
        "dim": game.dim(),
        "params": params,
        "decay": cfg,
    });
    let mut report = ExperimentReport::new(NAME, config);
    report.seed_count = per_seed.len();
    let raw: Vec<Series> = per_seed.iter().map(|s| s.series.clone()).collect();
    report.aggregated.insert("v_trace".into(), mean_series(&raw));
    report.per_seed = per_seed;
    report.thresholds.insert("rate_floor".into(), rate_floor(params));
    report.thresholds.insert("slack".into(), cfg.slack);
    report.thresholds.insert("ratio_max".into(), cfg.ratio_max);
    report.thresholds.insert("r2_min".into(), cfg.r2_min);
    report.thresholds.insert("floor".into(), cfg.floor);
    let (fits, verdicts) = gate(&report)?;
    report.fits = fits;
    report.verdicts = verdicts;
    report.wall_time = start.elapsed().as_secs_f64();
    Ok(report)
}

pub(super) fn gate(report: &ExperimentReport) -> Result<super::Gated> {
    let trace = report.series("v_trace")?;
    let times = trace.column("time").unwrap_or_default();
    let total = trace.column("V_total").unwrap_or_default();
    let floor = report.threshold("floor")?;
    let rate = report.threshold("rate_floor")?;
    let slack = report.threshold("slack")?;

    let ratio_max = report.threshold("ratio_max")?;
    let v0 = total.first().copied().unwrap_or(f64::NAN);
    // exponential phase: up to the first time T* with V(T*) <= ratio_max * V(0)
    let target = floor.max(ratio_max * v0);
    let above = total.iter().take_while(|v| **v > target).count();
    let window = (above + 1).min(total.len());
    let usable = total.iter().take_while(|v| **v >= floor).count();
    let mut fits = std::collections::BTreeMap::new();
    let mut verdicts = Vec::new();
    let fit = fit_exponential_decay(&times[..window], &total[..window]).ok();
    if let Some(fit) = fit {
        fits.insert("v_decay".to_string(), fit);
    }
    if let Ok(full) = fit_exponential_decay(&times[..usable], &total[..usable]) {
        fits.insert("v_decay_full_horizon".to_string(), full);
    }
    verdicts.push(Verdict::at_most(
        "decay_slope",
        fit.map_or(f64::NAN, |f| f.slope),
        -rate + slack,
    ));
    verdicts.push(Verdict::at_least(
        "decay_r_squared",
        fit.map_or(f64::NAN, |f| f.r_squared),
        report.threshold("r2_min")?,
    ));
    let ratio = match total.last() {
        Some(&vt) if v0 > 0.0 => vt / v0,
        _ => f64::NAN,
    };
    verdicts.push(Verdict::at_most("terminal_ratio", ratio, ratio_max));
    Ok((fits, verdicts))
}
