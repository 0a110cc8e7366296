//! Empirical Lipschitz ratio of the consensus map with respect to the sum of
//! per-player Wasserstein distances.

use std::collections::BTreeMap;
use std::time::Instant;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::report::{Comparison, ExperimentReport, SeedSeries, Series, Verdict};
use crate::consensus::{softmin_weights, weighted_point};
use crate::ensemble::distance;
use crate::error::{Error, Result};
use crate::game::{opponents_of, GameSpec};
use crate::metrics::{wasserstein_p, EmpiricalMeasure};
use crate::noise::{Domain, Streams};
use crate::par;

pub const NAME: &str = "stability-probe";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityConfig {
    /// Bound `R` on the p-moment of every sampled measure.
    pub radius: f64,
    pub p: f64,
    pub alpha: f64,
    pub trials: usize,
    pub max_atoms: usize,
    pub seed: u64,
    pub max_attempts: usize,
    /// Translations `10^0, 10^-1, …` used for the finite-difference limit.
    pub translation_steps: usize,
}

impl Default for StabilityConfig {
    fn default() -> Self {
        Self {
            radius: 10.0,
            p: 2.0,
            alpha: 1.0,
            trials: 1000,
            max_atoms: 64,
            seed: 0,
            max_attempts: 1000,
            translation_steps: 7,
        }
    }
}

/// Consensus of every player for a tuple of empirical measures, opponents
/// frozen at the means of their measures.
pub fn consensus_of_measures(game: &GameSpec, measures: &[EmpiricalMeasure], alpha: f64) -> Result<Vec<Vec<f64>>> {
    crate::error::check_len("measure tuple", game.players(), measures.len())?;
    let d = game.dim();
    let means: Vec<f64> = measures.iter().flat_map(|m| m.mean()).collect();
    crate::error::check_len("measure dimension", game.players() * d, means.len())?;
    (0..game.players())
        .map(|m| {
            let opp = opponents_of(&means, d, m);
            let mu = &measures[m];
            let costs = (0..mu.len())
                .map(|i| game.eval_cost(m, mu.atom(i), &opp))
                .collect::<Result<Vec<_>>>()?;
            let w = softmin_weights(&costs, alpha)?;
            let atoms: Vec<f64> = (0..mu.len()).flat_map(|i| mu.atom(i).to_vec()).collect();
            weighted_point(&atoms, d, &w)
        })
        .collect()
}

/// `max_m |Δ consensus_m| / Σ_j W_p(μ_j, ν_j)`, zero when both vanish.
pub fn stability_ratio(game: &GameSpec, mu: &[EmpiricalMeasure], nu: &[EmpiricalMeasure], alpha: f64, p: f64) -> Result<(f64, f64, f64)> {
    let a = consensus_of_measures(game, mu, alpha)?;
    let b = consensus_of_measures(game, nu, alpha)?;
    let delta = a
        .iter()
        .zip(&b)
        .map(|(x, y)| distance(x, y))
        .fold(0.0, f64::max);
    let mut w = 0.0;
    for (x, y) in mu.iter().zip(nu) {
        w += wasserstein_p(x, y, p)?;
    }
    let ratio = if delta == 0.0 { 0.0 } else { delta / w };
    Ok((ratio, delta, w))
}

fn draw_measure(rng: &mut ChaCha8Rng, n: usize, dim: usize, cfg: &StabilityConfig, around: Option<&EmpiricalMeasure>) -> Result<EmpiricalMeasure> {
    for _ in 0..cfg.max_attempts {
        let atoms: Vec<f64> = match around {
            None => {
                let center: Vec<f64> = (0..dim).map(|_| rng.random_range(-2.0..2.0)).collect();
                let scale = rng.random_range(0.05..2.0);
                (0..n * dim)
                    .map(|k| {
                        let z: f64 = StandardNormal.sample(rng);
                        center[k % dim] + scale * z
                    })
                    .collect()
            }
            Some(base) => {
                let eps = 10f64.powf(rng.random_range(-4.0..0.0));
                (0..n)
                    .flat_map(|i| base.atom(i).to_vec())
                    .map(|x| {
                        let z: f64 = StandardNormal.sample(rng);
                        x + eps * z
                    })
                    .collect()
            }
        };
        let measure = EmpiricalMeasure::new(dim, atoms)?;
        if measure.moment(cfg.p) <= cfg.radius {
            return Ok(measure);
        }
    }
    Err(Error::Rejection {
        bound: cfg.radius,
        attempts: cfg.max_attempts,
    })
}

/// Two random measure tuples for trial `trial`: odd trials perturb the first
/// tuple, even trials draw the second independently.
pub fn draw_pair(game: &GameSpec, cfg: &StabilityConfig, trial: usize) -> Result<(Vec<EmpiricalMeasure>, Vec<EmpiricalMeasure>)> {
    let mut rng = Streams::new(cfg.seed, Domain::Measures).rng(0, trial as u64);
    let n = rng.random_range(1..=cfg.max_atoms.max(1));
    let d = game.dim();
    let mu = (0..game.players())
        .map(|_| draw_measure(&mut rng, n, d, cfg, None))
        .collect::<Result<Vec<_>>>()?;
    let nu = mu
        .iter()
        .map(|m| draw_measure(&mut rng, n, d, cfg, (trial % 2 == 1).then_some(m)))
        .collect::<Result<Vec<_>>>()?;
    Ok((mu, nu))
}

pub fn run_stability_probe(game: &GameSpec, cfg: &StabilityConfig) -> Result<ExperimentReport> {
    let start = Instant::now();
    if !(cfg.radius > 0.0) || cfg.trials < 2 || cfg.max_atoms == 0 {
        return Err(Error::Config("need R > 0, trials >= 2 and max_atoms >= 1".into()));
    }
    if cfg.max_atoms > crate::metrics::EXACT_ATOM_CAP {
        return Err(Error::Config("max_atoms exceeds the exact W_p cap".into()));
    }
    let p_m = game.growth().map_or(1.0, |g| g.stability_exponent());
    if cfg.p < p_m.max(1.0) {
        return Err(Error::Config(format!(
            "p = {} is below the game's stability exponent p_M = {p_m}",
            cfg.p
        )));
    }

    let rows = par::try_map_jobs(cfg.trials, |t| {
        let (mu, nu) = draw_pair(game, cfg, t)?;
        let (ratio, delta, w) = stability_ratio(game, &mu, &nu, cfg.alpha, cfg.p)?;
        Ok(vec![t as f64, ratio, delta, w])
    })?;
    let mut trials = Series::new(["trial", "ratio", "delta", "w_sum"]);
    trials.rows = rows;

    // finite-difference sequence: translate player 0 by δ e_1
    let (mu, _) = draw_pair(game, cfg, 0)?;
    let mut translation = Series::new(["delta", "ratio"]);
    for s in 0..cfg.translation_steps {
        let step = 10f64.powi(-(s as i32));
        let mut moved = mu.clone();
        let d = game.dim();
        let atoms: Vec<f64> = (0..mu[0].len())
            .flat_map(|i| {
                let mut a = mu[0].atom(i).to_vec();
                a[0] += step;
                a
            })
            .collect();
        moved[0] = EmpiricalMeasure::new(d, atoms)?;
        let (ratio, _, _) = stability_ratio(game, &mu, &moved, cfg.alpha, cfg.p)?;
        translation.push(vec![step, ratio]);
    }

    let mut report = ExperimentReport::new(
        NAME,
        serde_json::json!({ "game": game.name(), "players": game.players(), "dim": game.dim(), "stability": cfg }),
    );
    report.seed_count = 1;
    report.per_seed = vec![SeedSeries {
        seed: cfg.seed,
        series: trials.clone(),
    }];
    report.aggregated.insert("stability".into(), trials);
    report.aggregated.insert("translation".into(), translation);
    report.thresholds = BTreeMap::from([
        ("half_growth_max".to_string(), 2.0),
        ("translation_rel_tol".to_string(), 1e-2),
    ]);
    let (fits, verdicts) = gate(&report)?;
    report.fits = fits;
    report.verdicts = verdicts;
    report.wall_time = start.elapsed().as_secs_f64();
    Ok(report)
}

pub(super) fn gate(report: &ExperimentReport) -> Result<super::Gated> {
    let ratios = report.series("stability")?.column("ratio").unwrap_or_default();
    let half = ratios.len() / 2;
    let max_of = |v: &[f64]| v.iter().copied().fold(0.0, f64::max);
    let max_all = ratios.iter().copied().fold(0.0_f64, |a, b| if b.is_nan() { f64::NAN } else { a.max(b) });
    let first = max_of(&ratios[..half]);
    let second = max_of(&ratios[half..]);
    let growth = if first > 0.0 { second / first } else if second == 0.0 { 1.0 } else { f64::INFINITY };

    let tr = report.series("translation")?.column("ratio").unwrap_or_default();
    let limit_change = match tr.as_slice() {
        [.., a, b] => (a - b).abs() / a.abs().max(b.abs()).max(1e-300),
        _ => f64::NAN,
    };
    let verdicts = vec![
        Verdict::new("max_ratio", max_all, Comparison::Finite),
        Verdict::at_most("second_half_growth", growth, report.threshold("half_growth_max")?),
        Verdict::at_most(
            "translation_limit_change",
            limit_change,
            report.threshold("translation_rel_tol")?,
        ),
    ];
    Ok((BTreeMap::new(), verdicts))
}
