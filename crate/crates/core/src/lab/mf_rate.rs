//! Finite-N versus reference-system gap under common-noise coupling.
//!
//! The reference system of `n_ref` particles stands in for i.i.d. copies of
//! the mean-field process. A system of `N` particles shares initial positions
//! and noise streams with reference particles `0..N`, and the gap
//! `sup_t |X^{m,i}_t − X^{m,i}_{ref,t}|` is recorded for every shared index.

use std::collections::BTreeMap;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::report::{Comparison, ExperimentReport, SeedSeries, Series, Verdict};
use crate::dynamics::{CboParams, Simulator};
use crate::ensemble::{distance, Ensemble, Law};
use crate::error::{Error, Result};
use crate::game::GameSpec;
use crate::metrics::{fit_power_law, gamma_exponent};
use crate::par;
use crate::sum::exact_sum;

pub const NAME: &str = "mf-rate";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MfRateConfig {
    pub n_list: Vec<usize>,
    pub n_ref: usize,
    pub p: f64,
    pub seeds: Vec<u64>,
    pub init: Law,
    /// Moment order `q` of the initial law entering `γ`.
    pub q_moment: f64,
    /// The fitted slope must lie in `[−γ − slack_low, −γ + slack_high]`.
    pub slack_low: f64,
    pub slack_high: f64,
    pub r2_min: f64,
    /// Sizes whose gap falls below this are excluded from the fit.
    pub floor: f64,
}

impl Default for MfRateConfig {
    fn default() -> Self {
        Self {
            n_list: vec![16, 32, 64, 128, 256],
            n_ref: 4096,
            p: 2.0,
            seeds: (0..16).collect(),
            init: Law::Uniform { low: -3.0, high: 3.0 },
            q_moment: 16.0,
            slack_low: 0.25,
            slack_high: 0.2,
            r2_min: 0.9,
            floor: 1e-8,
        }
    }
}

/// Per-particle `sup_t |X − X_ref|^p` for each size in `sizes`, from one
/// seed. Entry `[k][m * N_k + i]` belongs to particle `(m, i)` of the
/// `k`-th system.
pub fn coupled_sup_gaps(
    game: &GameSpec,
    params: &CboParams,
    init: &Law,
    sizes: &[usize],
    n_ref: usize,
    p: f64,
    seed: u64,
) -> Result<Vec<Vec<f64>>> {
    if sizes.iter().any(|&n| n == 0 || n > n_ref) {
        return Err(Error::Input(format!(
            "coupled sizes must lie in 1..={n_ref}, got {sizes:?}"
        )));
    }
    let players = game.players();
    let reference_init = init.sample_ensemble(players, n_ref, game.dim(), seed)?;
    let mut reference = Simulator::new(game, reference_init.clone(), *params, seed)?;
    let mut systems = sizes
        .iter()
        .map(|&n| Simulator::new(game, reference_init.truncated(n), *params, seed))
        .collect::<Result<Vec<_>>>()?;
    let mut sups: Vec<Vec<f64>> = sizes.iter().map(|&n| vec![0.0; players * n]).collect();

    let update = |sups: &mut [Vec<f64>], systems: &[Simulator], refstate: &Ensemble| {
        for (sup, sys) in sups.iter_mut().zip(systems) {
            let st = sys.state();
            let n = st.particles();
            for m in 0..players {
                for i in 0..n {
                    let gap = distance(st.particle(m, i), refstate.particle(m, i)).powf(p);
                    let slot = &mut sup[m * n + i];
                    if gap > *slot {
                        *slot = gap;
                    }
                }
            }
        }
    };

    loop {
        update(&mut sups, &systems, reference.state());
        if reference.is_done() {
            break;
        }
        reference.advance()?;
        for sys in systems.iter_mut() {
            sys.advance()?;
        }
    }
    Ok(sups)
}

pub fn run_mf_rate(game: &GameSpec, params: &CboParams, cfg: &MfRateConfig) -> Result<ExperimentReport> {
    let start = Instant::now();
    params.validate()?;
    if cfg.n_list.is_empty() || cfg.seeds.is_empty() {
        return Err(Error::Config("n_list and seeds must be nonempty".into()));
    }
    let largest = *cfg.n_list.iter().max().unwrap();
    if 4 * largest > cfg.n_ref {
        return Err(Error::Config(format!(
            "n_ref = {} is too small for N = {largest}: need max(n_list) <= n_ref / 4",
            cfg.n_ref
        )));
    }
    if !(cfg.p >= 1.0) {
        return Err(Error::Config(format!("p must be >= 1, got {}", cfg.p)));
    }
    let p_m = game
        .growth()
        .map(|g| g.stability_exponent())
        .ok_or_else(|| Error::Config(format!("game `{}` declares no growth constants", game.name())))?;
    let gamma = gamma_exponent(cfg.q_moment, cfg.p, p_m)?.min(0.5);

    let per_seed_gaps = par::try_map_jobs(cfg.seeds.len(), |s| {
        coupled_sup_gaps(game, params, &cfg.init, &cfg.n_list, cfg.n_ref, cfg.p, cfg.seeds[s])
    })?;

    let seeds = cfg.seeds.len() as f64;
    let mut table = Series::new(["N", "gap", "gap_stderr"]);
    for (k, &n) in cfg.n_list.iter().enumerate() {
        // seed average of sup^p per particle; the gap is the worst particle
        let mut worst = (f64::NEG_INFINITY, 0usize);
        let means: Vec<f64> = (0..game.players() * n)
            .map(|j| exact_sum(per_seed_gaps.iter().map(|g| g[k][j])) / seeds)
            .collect();
        for (j, &y) in means.iter().enumerate() {
            if y > worst.0 {
                worst = (y, j);
            }
        }
        let (y, j) = worst;
        let var = exact_sum(per_seed_gaps.iter().map(|g| (g[k][j] - y).powi(2))) / (seeds - 1.0).max(1.0);
        let se_y = (var / seeds).sqrt();
        let gap = y.powf(1.0 / cfg.p);
        let gap_se = if y > 0.0 {
            gap / (cfg.p * y) * se_y
        } else {
            0.0
        };
        table.push(vec![n as f64, gap, gap_se]);
    }

    let per_seed = cfg
        .seeds
        .iter()
        .zip(&per_seed_gaps)
        .map(|(&seed, gaps)| {
            let mut series = Series::new(["N", "mean_sup_gap_p", "max_sup_gap_p"]);
            for (k, &n) in cfg.n_list.iter().enumerate() {
                let v = &gaps[k];
                let mean = exact_sum(v.iter().copied()) / v.len() as f64;
                let max = v.iter().copied().fold(0.0, f64::max);
                series.push(vec![n as f64, mean, max]);
            }
            SeedSeries { seed, series }
        })
        .collect();

    let config = serde_json::json!({
        "game": game.name(),
        "players": game.players(),
        "dim": game.dim(),
        "params": params,
        "mf_rate": cfg,
    });
    let mut report = ExperimentReport::new(NAME, config);
    report.seed_count = cfg.seeds.len();
    report.per_seed = per_seed;
    report.aggregated.insert("mf_rate".into(), table);
    report.thresholds = BTreeMap::from([
        ("gamma".to_string(), gamma),
        ("slack_low".to_string(), cfg.slack_low),
        ("slack_high".to_string(), cfg.slack_high),
        ("r2_min".to_string(), cfg.r2_min),
        ("floor".to_string(), cfg.floor),
    ]);
    report.notes.push(format!(
        "reference system of {} particles stands in for the mean-field law; its own O(n_ref^-1/2) error is not subtracted",
        cfg.n_ref
    ));
    let (fits, verdicts) = gate(&report)?;
    report.fits = fits;
    report.verdicts = verdicts;
    report.wall_time = start.elapsed().as_secs_f64();
    Ok(report)
}

pub(super) fn gate(report: &ExperimentReport) -> Result<super::Gated> {
    let table = report.series("mf_rate")?;
    let floor = report.threshold("floor")?;
    let gamma = report.threshold("gamma")?;
    let (ns, gaps): (Vec<f64>, Vec<f64>) = table
        .column("N")
        .unwrap_or_default()
        .into_iter()
        .zip(table.column("gap").unwrap_or_default())
        .filter(|(_, g)| *g >= floor)
        .unzip();
    let fit = fit_power_law(&ns, &gaps).ok();
    let mut fits = BTreeMap::new();
    if let Some(f) = fit {
        fits.insert("gap_power_law".to_string(), f);
    }
    let verdicts = vec![
        Verdict::new(
            "rate_slope",
            fit.map_or(f64::NAN, |f| f.slope),
            Comparison::Within {
                low: -gamma - report.threshold("slack_low")?,
                high: -gamma + report.threshold("slack_high")?,
            },
        ),
        Verdict::at_least(
            "rate_r_squared",
            fit.map_or(f64::NAN, |f| f.r_squared),
            report.threshold("r2_min")?,
        ),
    ];
    Ok((fits, verdicts))
}
