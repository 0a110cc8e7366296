//! Fast invariant checks bundled with the binary.

use std::collections::BTreeMap;
use std::time::Instant;

use rand::Rng;

use super::report::{ExperimentReport, Verdict};
use crate::consensus::{consensus_for_player, softmin_weights};
use crate::dynamics::{simulate, CboParams, Recording};
use crate::ensemble::{norm, Ensemble, Law};
use crate::error::Result;
use crate::game::{builtin_game, nash_residual, BUILTIN_GAMES};
use crate::metrics::{gamma_exponent, wasserstein_p, EmpiricalMeasure};
use crate::noise::{Domain, Streams};

pub const NAME: &str = "selftest";

/// Minimum over all matchings by enumeration (Heap's algorithm).
fn brute_force_cost(cost: &[f64], n: usize) -> f64 {
    let mut perm: Vec<usize> = (0..n).collect();
    let eval = |p: &[usize]| -> f64 { p.iter().enumerate().map(|(i, &j)| cost[i * n + j]).sum() };
    let mut best = eval(&perm);
    let mut c = vec![0usize; n];
    let mut i = 0;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                perm.swap(0, i);
            } else {
                perm.swap(c[i], i);
            }
            best = best.min(eval(&perm));
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    best
}

pub fn run_selftest(seed: u64) -> Result<ExperimentReport> {
    let start = Instant::now();
    let streams = Streams::new(seed, Domain::Probe);
    let mut verdicts = Vec::new();

    // softmin normalization under extreme inputs
    let mut rng = streams.rng(0, 0);
    let mut bad = 0usize;
    for _ in 0..2000 {
        let n = rng.random_range(1..20);
        let costs: Vec<f64> = (0..n).map(|_| rng.random_range(-1e6..1e6)).collect();
        let alpha = 10f64.powf(rng.random_range(-3.0..6.0));
        let w = softmin_weights(&costs, alpha)?;
        let s: f64 = crate::sum::exact_sum(w.as_slice().iter().copied());
        if (s - 1.0).abs() > 1e-12 || w.as_slice().iter().any(|x| !x.is_finite()) {
            bad += 1;
        }
    }
    verdicts.push(Verdict::at_most("softmin_normalization_failures", bad as f64, 0.0));

    // hull-norm bound and permutation invariance of consensus points
    let game = builtin_game("rastrigin-coupled", 2, 2, 0.3)?;
    let (mut hull, mut perm) = (0usize, 0usize);
    for case in 0..300u64 {
        let n = 1 + (case as usize % 12);
        let ens = Law::Gaussian { mean: 0.0, std: 2.0 }.sample_ensemble(2, n, 2, seed ^ case)?;
        let c = consensus_for_player(&game, &ens, 0, 5.0)?;
        let largest = (0..n).map(|i| norm(ens.particle(0, i))).fold(0.0, f64::max);
        if norm(&c) > largest {
            hull += 1;
        }
        let mut players: Vec<Vec<Vec<f64>>> = (0..2)
            .map(|m| (0..n).map(|i| ens.particle(m, i).to_vec()).collect())
            .collect();
        players[0].reverse();
        players[1].rotate_left(n / 2);
        let shuffled = Ensemble::from_players(&players)?;
        if consensus_for_player(&game, &shuffled, 0, 5.0)? != c {
            perm += 1;
        }
    }
    verdicts.push(Verdict::at_most("hull_norm_violations", hull as f64, 0.0));
    verdicts.push(Verdict::at_most("permutation_mismatches", perm as f64, 0.0));

    // exact W_p against enumeration
    let mut rng = streams.rng(1, 0);
    let mut worst = 0.0_f64;
    for _ in 0..200 {
        let n = rng.random_range(1..=6);
        let d = rng.random_range(1..=3);
        let p = [1.0, 2.0, 3.0][rng.random_range(0..3)];
        let a: Vec<f64> = (0..n * d).map(|_| rng.random_range(-2.0..2.0)).collect();
        let b: Vec<f64> = (0..n * d).map(|_| rng.random_range(-2.0..2.0)).collect();
        let mut cost = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                cost.push(crate::ensemble::distance(&a[i * d..(i + 1) * d], &b[j * d..(j + 1) * d]).powf(p));
            }
        }
        let oracle = (brute_force_cost(&cost, n) / n as f64).powf(1.0 / p);
        let w = wasserstein_p(&EmpiricalMeasure::new(d, a)?, &EmpiricalMeasure::new(d, b)?, p)?;
        worst = worst.max((w - oracle).abs());
    }
    verdicts.push(Verdict::at_most("wasserstein_max_error", worst, 1e-9));

    let gamma_err = [
        (gamma_exponent(8.0, 2.0, 1.0)?, 0.5),
        (gamma_exponent(6.0, 2.0, 1.0)?, 0.5),
        (gamma_exponent(5.0, 2.5, 1.0)?, 0.2),
    ]
    .iter()
    .map(|(a, b)| (a - b).abs())
    .fold(0.0, f64::max);
    verdicts.push(Verdict::at_most("gamma_examples_error", gamma_err, 1e-15));

    // dynamics: single-particle swarms never move; fixed seed reproduces
    let quad = builtin_game("decoupled-quadratic", 2, 2, 0.0)?;
    let params = CboParams {
        t_end: 1.0,
        ..CboParams::default()
    };
    let single = Law::Uniform { low: -3.0, high: 3.0 }.sample_ensemble(2, 1, 2, seed)?;
    let traj = simulate(&quad, &single, &params, seed, 1)?;
    let moved = traj.snapshots.iter().filter(|s| **s != single).count();
    verdicts.push(Verdict::at_most("single_particle_moves", moved as f64, 0.0));

    let init = Law::Uniform { low: -3.0, high: 3.0 }.sample_ensemble(2, 32, 2, seed)?;
    let a = simulate(&quad, &init, &params, seed, 10)?;
    let b = simulate(&quad, &init, &params, seed, 10)?;
    verdicts.push(Verdict::at_most("reproducibility_mismatch", f64::from(u8::from(a != b)), 0.0));

    let law = Law::Uniform { low: -3.0, high: 3.0 };
    let (x, y) = crate::dynamics::simulate_coupled(&quad, &law, &params, 16, 16, seed, Recording::every(10))?;
    verdicts.push(Verdict::at_most("self_coupling_mismatch", f64::from(u8::from(x != y)), 0.0));

    let mut residual = 0.0_f64;
    for name in BUILTIN_GAMES {
        let g = builtin_game(name, 3, 2, 0.3)?;
        let star = g.known_nash().expect("builtins carry an equilibrium").clone();
        residual = residual.max(nash_residual(&g, &star, 1000, 3.0, seed)?);
    }
    verdicts.push(Verdict::at_most("builtin_nash_residual", residual, 1e-12));

    let mut report = ExperimentReport::new(NAME, serde_json::json!({ "seed": seed }));
    report.seed_count = 1;
    report.thresholds = BTreeMap::new();
    report.verdicts = verdicts;
    report.wall_time = start.elapsed().as_secs_f64();
    Ok(report)
}
