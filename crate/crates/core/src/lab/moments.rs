//! Moment and consensus-size monitoring along particle trajectories.

use std::collections::BTreeMap;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::report::{mean_series, Comparison, ExperimentReport, SeedSeries, Series, Verdict};
use crate::consensus::ConsensusSet;
use crate::dynamics::{CboParams, Simulator};
use crate::ensemble::{norm, Ensemble, Law};
use crate::error::{Error, Result};
use crate::game::GameSpec;
use crate::par;
use crate::sum::exact_sum;

pub const NAME: &str = "moment-monitor";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentConfig {
    pub particles: usize,
    pub p: f64,
    pub seeds: Vec<u64>,
    pub init: Law,
    pub record_every: usize,
    /// Ceiling on `sup_t (1/N) Σ |X|²` relative to its initial value.
    pub growth_max: f64,
    /// With a zero initial moment the ceiling becomes
    /// `zero_ceiling_factor · σ² · T · d`.
    pub zero_ceiling_factor: f64,
}

impl Default for MomentConfig {
    fn default() -> Self {
        Self {
            particles: 200,
            p: 2.0,
            seeds: (0..4).collect(),
            init: Law::Uniform { low: -3.0, high: 3.0 },
            record_every: 10,
            growth_max: 1e3,
            zero_ceiling_factor: 1e3,
        }
    }
}

struct Tracker {
    players: usize,
    particles: usize,
    p: f64,
    sup: Vec<f64>,
    initial_p: f64,
    initial_2: f64,
    sup_2: f64,
    hull_violations: usize,
    c_mon_max: f64,
}

impl Tracker {
    fn new(ens: &Ensemble, p: f64) -> Self {
        let m2 = exact_sum(ens.moments(2.0));
        Self {
            players: ens.players(),
            particles: ens.particles(),
            p,
            sup: vec![0.0; ens.players() * ens.particles()],
            initial_p: exact_sum(ens.moments(p)),
            initial_2: m2,
            sup_2: m2,
            hull_violations: 0,
            c_mon_max: 0.0,
        }
    }

    /// Updates running maxima and returns the trace row values
    /// `(per-player p-moments, Σ second moments, consensus ratio)`.
    fn observe(&mut self, ens: &Ensemble, consensus: &ConsensusSet) -> (Vec<f64>, f64, f64) {
        let n = self.particles;
        for m in 0..self.players {
            let mut largest = 0.0_f64;
            for i in 0..n {
                let r = norm(ens.particle(m, i));
                largest = largest.max(r);
                let v = r.powf(self.p);
                let slot = &mut self.sup[m * n + i];
                if v > *slot {
                    *slot = v;
                }
            }
            if norm(&consensus.points[m]) > largest {
                self.hull_violations += 1;
            }
        }
        let m2 = exact_sum(ens.moments(2.0));
        self.sup_2 = self.sup_2.max(m2);
        let c_max = consensus.points.iter().map(|c| norm(c)).fold(0.0, f64::max);
        let c_mon = if c_max == 0.0 { 0.0 } else { c_max / m2.sqrt() };
        self.c_mon_max = self.c_mon_max.max(c_mon);
        (ens.moments(self.p), m2, c_mon)
    }

    /// Seed-level `E[sup_t |X^{m,i}|^p]`, averaged over particles, per player.
    fn sup_moments(&self) -> Vec<f64> {
        let n = self.particles;
        (0..self.players)
            .map(|m| exact_sum(self.sup[m * n..(m + 1) * n].iter().copied()) / n as f64)
            .collect()
    }
}

pub fn run_moment_monitor(game: &GameSpec, params: &CboParams, cfg: &MomentConfig) -> Result<ExperimentReport> {
    let start = Instant::now();
    params.validate()?;
    if !(cfg.p >= 2.0) {
        return Err(Error::Config(format!("moment monitor needs p >= 2, got {}", cfg.p)));
    }
    if cfg.seeds.is_empty() || cfg.particles == 0 || cfg.record_every == 0 {
        return Err(Error::Config("need seeds, particles and record_every >= 1".into()));
    }
    let players = game.players();
    let mut trace_cols = vec!["time".to_string()];
    trace_cols.extend((1..=players).map(|m| format!("moment_{m}")));
    trace_cols.push("second_moment_total".into());
    trace_cols.push("consensus_ratio".into());
    let mut summary_cols = vec!["seed".to_string()];
    summary_cols.extend((1..=players).map(|m| format!("sup_moment_{m}")));
    summary_cols.extend(
        ["initial_moment_sum", "initial_second_moment", "sup_second_moment", "hull_violations", "consensus_ratio_max"]
            .map(String::from),
    );

    let results = par::try_map_jobs(cfg.seeds.len(), |s| {
        let seed = cfg.seeds[s];
        let init = cfg.init.sample_ensemble(players, cfg.particles, game.dim(), seed)?;
        let mut tracker = Tracker::new(&init, cfg.p);
        let mut sim = Simulator::new(game, init, *params, seed)?;
        let mut trace = Series::new(trace_cols.clone());
        while !sim.is_done() {
            let (k, time) = (sim.step_index(), sim.time());
            sim.advance_observed(|state, consensus| {
                let row = tracker.observe(state, consensus);
                if k % cfg.record_every == 0 {
                    trace.push(trace_row(time, row));
                }
            })?;
        }
        let consensus = sim.consensus()?;
        let row = tracker.observe(sim.state(), &consensus);
        trace.push(trace_row(sim.time(), row));
        let mut summary = vec![seed as f64];
        summary.extend(tracker.sup_moments());
        summary.extend([
            tracker.initial_p,
            tracker.initial_2,
            tracker.sup_2,
            tracker.hull_violations as f64,
            tracker.c_mon_max,
        ]);
        Ok((SeedSeries { seed, series: trace }, summary))
    })?;

    let mut summary = Series::new(summary_cols);
    let mut per_seed = Vec::new();
    for (trace, row) in results {
        per_seed.push(trace);
        summary.push(row);
    }
    let raw: Vec<Series> = per_seed.iter().map(|s| s.series.clone()).collect();

    let mut report = ExperimentReport::new(
        NAME,
        serde_json::json!({
            "game": game.name(), "players": players, "dim": game.dim(),
            "params": params, "moments": cfg,
        }),
    );
    report.seed_count = per_seed.len();
    report.aggregated.insert("moments".into(), mean_series(&raw));
    report.aggregated.insert("moment_summary".into(), summary);
    report.per_seed = per_seed;
    report.thresholds = BTreeMap::from([
        ("growth_max".to_string(), cfg.growth_max),
        (
            "zero_ceiling".to_string(),
            cfg.zero_ceiling_factor * params.sigma * params.sigma * params.t_end * game.dim() as f64,
        ),
        ("players".to_string(), players as f64),
    ]);
    let (fits, verdicts) = gate(&report)?;
    report.fits = fits;
    report.verdicts = verdicts;
    report.wall_time = start.elapsed().as_secs_f64();
    Ok(report)
}

fn trace_row(time: f64, (moments, m2, c_mon): (Vec<f64>, f64, f64)) -> Vec<f64> {
    let mut row = vec![time];
    row.extend(moments);
    row.push(m2);
    row.push(c_mon);
    row
}

/// `κ̂ = max_m E[sup_t |X^{m,i}_t|^p] / Σ_m E|X^{m,i}_0|^p` from the summary
/// table, or `None` when the initial moments vanish.
pub fn kappa_hat(report: &ExperimentReport) -> Result<Option<f64>> {
    let (sup, initial) = sup_and_initial(report)?;
    Ok((initial > 0.0).then(|| sup / initial))
}

fn mean(v: &[f64]) -> f64 {
    exact_sum(v.iter().copied()) / v.len().max(1) as f64
}

fn sup_and_initial(report: &ExperimentReport) -> Result<(f64, f64)> {
    let summary = report.series("moment_summary")?;
    let players = report.threshold("players")? as usize;
    let sup = (1..=players)
        .map(|m| mean(&summary.column(&format!("sup_moment_{m}")).unwrap_or_default()))
        .fold(0.0, f64::max);
    let initial = mean(&summary.column("initial_moment_sum").unwrap_or_default());
    Ok((sup, initial))
}

pub(super) fn gate(report: &ExperimentReport) -> Result<super::Gated> {
    let summary = report.series("moment_summary")?;
    let col = |name: &str| summary.column(name).unwrap_or_default();
    let (sup, initial) = sup_and_initial(report)?;
    let mut verdicts = Vec::new();
    if initial > 0.0 {
        verdicts.push(Verdict::new("kappa_hat", sup / initial, Comparison::Finite));
    } else {
        verdicts.push(Verdict::at_most("sup_moment_ceiling", sup, report.threshold("zero_ceiling")?));
    }
    let growth = col("initial_second_moment")
        .iter()
        .zip(col("sup_second_moment"))
        .map(|(&a, b)| match (a > 0.0, b > 0.0) {
            (true, _) => b / a,
            (false, false) => 0.0,
            (false, true) => f64::INFINITY,
        })
        .fold(0.0, f64::max);
    verdicts.push(Verdict::at_most("second_moment_growth", growth, report.threshold("growth_max")?));
    verdicts.push(Verdict::at_most(
        "hull_norm_violations",
        col("hull_violations").iter().sum(),
        0.0,
    ));
    let c_mon = col("consensus_ratio_max").iter().copied().fold(0.0, f64::max);
    verdicts.push(Verdict::new("consensus_ratio_max", c_mon, Comparison::Finite));
    Ok((BTreeMap::new(), verdicts))
}
