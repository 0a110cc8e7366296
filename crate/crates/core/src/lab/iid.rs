//! Convergence of the consensus point of `N` i.i.d. samples toward the
//! consensus of the sampling law itself.

use std::collections::BTreeMap;
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::report::{Comparison, ExperimentReport, SeedSeries, Series, Verdict};
use crate::consensus::consensus_of_samples;
use crate::ensemble::{distance, Law};
use crate::error::{Error, Result};
use crate::noise::{Domain, Streams};
use crate::par;
use crate::sum::exact_sum;

pub const NAME: &str = "iid-consensus";

/// Single-player cost with the opponents already frozen.
pub type FrozenCost = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// `E(x) = 1 / (1 + |x|²)`, bounded with values in `(0, 1]`.
pub fn bounded_bump() -> FrozenCost {
    Arc::new(|x: &[f64]| 1.0 / (1.0 + x.iter().map(|v| v * v).sum::<f64>()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IidConfig {
    pub law: Law,
    pub dim: usize,
    pub alpha: f64,
    pub n_list: Vec<usize>,
    pub trials: usize,
    pub p: f64,
    /// Samples per oracle batch.
    pub oracle_samples: usize,
    pub oracle_batches: usize,
    /// Every batch must lie within this distance of the pooled estimate.
    pub oracle_tolerance: f64,
    pub seed: u64,
    pub slope_target: f64,
    pub slope_tolerance: f64,
    pub r2_min: f64,
    pub floor: f64,
}

impl Default for IidConfig {
    fn default() -> Self {
        Self {
            law: Law::Gaussian { mean: 0.0, std: 1.0 },
            dim: 2,
            alpha: 1.0,
            n_list: vec![100, 1_000, 10_000, 100_000],
            trials: 200,
            p: 2.0,
            oracle_samples: 10_000_000,
            oracle_batches: 3,
            oracle_tolerance: 1e-3,
            seed: 0,
            slope_target: -0.5,
            slope_tolerance: 0.1,
            r2_min: 0.9,
            floor: 1e-8,
        }
    }
}

const CHUNK: usize = 1 << 15;

/// Partial softmin sums of one chunk: `(min cost, Σ e, Σ e·x)` with
/// `e = exp(−α (c − min))`.
struct Partial {
    min: f64,
    weight: f64,
    moment: Vec<f64>,
}

fn chunk_partial(cfg: &IidConfig, cost: &FrozenCost, batch: usize, chunk: usize, len: usize) -> Result<Partial> {
    let d = cfg.dim;
    let mut rng = Streams::new(cfg.seed, Domain::Oracle).rng(batch, chunk as u64);
    let mut xs = vec![0.0; len * d];
    for x in xs.chunks_exact_mut(d) {
        cfg.law.sample_into(&mut rng, x);
    }
    let costs: Vec<f64> = xs.chunks_exact(d).map(|x| cost(x)).collect();
    if costs.iter().any(|c| !c.is_finite()) {
        return Err(Error::Evaluation { player: 0, value: f64::NAN });
    }
    let min = costs.iter().copied().fold(f64::INFINITY, f64::min);
    let e: Vec<f64> = costs.iter().map(|c| (-cfg.alpha * (c - min)).exp()).collect();
    let weight = exact_sum(e.iter().copied());
    let moment = (0..d)
        .map(|k| exact_sum(e.iter().enumerate().map(|(i, w)| w * xs[i * d + k])))
        .collect();
    Ok(Partial { min, weight, moment })
}

fn merge(parts: &[Partial], alpha: f64, dim: usize) -> Vec<f64> {
    let gmin = parts.iter().map(|p| p.min).fold(f64::INFINITY, f64::min);
    let scale: Vec<f64> = parts.iter().map(|p| (-alpha * (p.min - gmin)).exp()).collect();
    let weight = exact_sum(parts.iter().zip(&scale).map(|(p, s)| p.weight * s));
    (0..dim)
        .map(|k| exact_sum(parts.iter().zip(&scale).map(|(p, s)| p.moment[k] * s)) / weight)
        .collect()
}

/// High-sample reference consensus of the law: per-batch estimates and the
/// pooled estimate.
pub fn oracle_consensus(cfg: &IidConfig, cost: &FrozenCost) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
    let chunks = cfg.oracle_samples.div_ceil(CHUNK);
    let jobs = cfg.oracle_batches * chunks;
    let parts = par::try_map_jobs(jobs, |j| {
        let (batch, chunk) = (j / chunks, j % chunks);
        let len = CHUNK.min(cfg.oracle_samples - chunk * CHUNK);
        chunk_partial(cfg, cost, batch, chunk, len)
    })?;
    let batches = parts
        .chunks(chunks)
        .map(|b| merge(b, cfg.alpha, cfg.dim))
        .collect();
    let pooled = merge(&parts, cfg.alpha, cfg.dim);
    Ok((batches, pooled))
}

pub fn run_iid_consensus(cost: &FrozenCost, cfg: &IidConfig) -> Result<ExperimentReport> {
    let start = Instant::now();
    if cfg.dim == 0 || cfg.trials < 2 || cfg.n_list.is_empty() || cfg.oracle_batches == 0 || cfg.oracle_samples == 0 {
        return Err(Error::Config(
            "iid-consensus needs d >= 1, trials >= 2, a nonempty n_list and a nonempty oracle".into(),
        ));
    }
    if !(cfg.p >= 1.0) || !(cfg.alpha >= 0.0) {
        return Err(Error::Config("need p >= 1 and alpha >= 0".into()));
    }
    if let Law::Point { at } = &cfg.law {
        crate::error::check_len("point law", cfg.dim, at.len())?;
    }

    let (batches, reference) = oracle_consensus(cfg, cost)?;
    let spread = batches
        .iter()
        .map(|b| distance(b, &reference))
        .fold(0.0, f64::max);
    if spread > cfg.oracle_tolerance {
        return Err(Error::OracleUnstable {
            spread,
            tolerance: cfg.oracle_tolerance,
        });
    }

    let trials = cfg.trials;
    let sampler = Streams::new(cfg.seed, Domain::Sampling);
    let jobs = cfg.n_list.len() * trials;
    let errors = par::try_map_jobs(jobs, |j| {
        let (k, t) = (j / trials, j % trials);
        let n = cfg.n_list[k];
        let mut rng = sampler.rng(k, t as u64);
        let mut xs = vec![0.0; n * cfg.dim];
        for x in xs.chunks_exact_mut(cfg.dim) {
            cfg.law.sample_into(&mut rng, x);
        }
        let c = consensus_of_samples(&xs, cfg.dim, cfg.alpha, |x| cost(x))?;
        Ok(distance(&c, &reference).powf(cfg.p))
    })?;

    let mut table = Series::new(["N", "err", "err_stderr"]);
    let mut raw = Series::new(["N", "trial", "abs_err_p"]);
    for (k, &n) in cfg.n_list.iter().enumerate() {
        let v = &errors[k * trials..(k + 1) * trials];
        let mean = exact_sum(v.iter().copied()) / trials as f64;
        let var = exact_sum(v.iter().map(|e| (e - mean).powi(2))) / (trials - 1) as f64;
        let err = mean.powf(1.0 / cfg.p);
        let se = if mean > 0.0 {
            err / (cfg.p * mean) * (var / trials as f64).sqrt()
        } else {
            0.0
        };
        table.push(vec![n as f64, err, se]);
        for (t, e) in v.iter().enumerate() {
            raw.push(vec![n as f64, t as f64, *e]);
        }
    }

    let mut report = ExperimentReport::new(NAME, serde_json::json!({ "iid": cfg }));
    report.seed_count = 1;
    report.per_seed = vec![SeedSeries {
        seed: cfg.seed,
        series: raw,
    }];
    let mut oracle = Series::new((0..cfg.dim).map(|k| format!("x_{}", k + 1)));
    for b in &batches {
        oracle.push(b.clone());
    }
    report.aggregated.insert("iid".into(), table);
    report.aggregated.insert("oracle_batches".into(), oracle);
    report.thresholds = BTreeMap::from([
        ("slope_target".to_string(), cfg.slope_target),
        ("slope_tolerance".to_string(), cfg.slope_tolerance),
        ("r2_min".to_string(), cfg.r2_min),
        ("floor".to_string(), cfg.floor),
        ("oracle_spread".to_string(), spread),
    ]);
    let (fits, verdicts) = gate(&report)?;
    report.fits = fits;
    report.verdicts = verdicts;
    report.wall_time = start.elapsed().as_secs_f64();
    Ok(report)
}

pub(super) fn gate(report: &ExperimentReport) -> Result<super::Gated> {
    let table = report.series("iid")?;
    let floor = report.threshold("floor")?;
    let (ns, errs): (Vec<f64>, Vec<f64>) = table
        .column("N")
        .unwrap_or_default()
        .into_iter()
        .zip(table.column("err").unwrap_or_default())
        .filter(|(_, e)| *e >= floor)
        .unzip();
    let fit = fit_power_law_opt(&ns, &errs);
    let target = report.threshold("slope_target")?;
    let tol = report.threshold("slope_tolerance")?;
    let mut fits = BTreeMap::new();
    if let Some(f) = fit {
        fits.insert("err_power_law".to_string(), f);
    }
    let verdicts = vec![
        Verdict::new(
            "iid_slope",
            fit.map_or(f64::NAN, |f| f.slope),
            Comparison::Within {
                low: target - tol,
                high: target + tol,
            },
        ),
        Verdict::at_least(
            "iid_r_squared",
            fit.map_or(f64::NAN, |f| f.r_squared),
            report.threshold("r2_min")?,
        ),
    ];
    Ok((fits, verdicts))
}

fn fit_power_law_opt(ns: &[f64], errs: &[f64]) -> Option<crate::metrics::FitResult> {
    crate::metrics::fit_power_law(ns, errs).ok()
}
