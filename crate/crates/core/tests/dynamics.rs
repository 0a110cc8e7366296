use cbo_games::lab::coupled_sup_gaps;
use cbo_games::metrics::variance_at;
use cbo_games::{
    builtin_game, consensus_all, diffusion_apply, simulate, simulate_coupled, step_em, CboParams, Diffusion, Ensemble,
    Error, Law, NoiseStream, Recording, Simulator,
};
use statrs::distribution::{ContinuousCDF, Normal};

fn decay_params(t_end: f64) -> CboParams {
    CboParams {
        lambda: 1.0,
        sigma: 0.5,
        alpha: 40.0,
        xi: 1.0,
        dt: 0.01,
        t_end,
        diffusion: Diffusion::Anisotropic,
    }
}

fn bits(ens: &Ensemble) -> Vec<u64> {
    ens.as_slice().iter().map(|v| v.to_bits()).collect()
}

#[test]
fn diffusion_examples() {
    assert_eq!(diffusion_apply(Diffusion::Isotropic, &[3.0, 4.0], &[0.0, 1.0]).unwrap(), vec![0.0, 5.0]);
    assert_eq!(diffusion_apply(Diffusion::Anisotropic, &[3.0, 4.0], &[1.0, 1.0]).unwrap(), vec![3.0, 4.0]);
    for kind in [Diffusion::Isotropic, Diffusion::Anisotropic] {
        assert_eq!(diffusion_apply(kind, &[0.0; 3], &[0.3, -1.0, 2.0]).unwrap(), vec![0.0; 3]);
    }
    assert!(diffusion_apply(Diffusion::Isotropic, &[1.0], &[1.0, 2.0]).is_err());
}

#[test]
fn params_validation() {
    let ok = decay_params(1.0);
    assert!(ok.validate().is_ok());
    for bad in [
        CboParams { dt: 0.0, ..ok },
        CboParams { dt: 2.0, ..ok },
        CboParams { xi: 1.5, ..ok },
        CboParams { sigma: -0.1, ..ok },
        CboParams { t_end: f64::NAN, ..ok },
    ] {
        assert!(bad.validate().is_err(), "{bad:?}");
    }
}

#[test]
fn horizon_is_hit_exactly_with_a_short_last_step() {
    let p = CboParams { dt: 0.3, t_end: 1.0, ..decay_params(1.0) };
    assert_eq!(p.num_steps(), 4);
    assert_eq!(p.time_at(4), 1.0);
    assert!((p.step_size(3) - 0.1).abs() < 1e-15);
    let g = builtin_game("decoupled-quadratic", 2, 1, 0.0).unwrap();
    let init = Law::Uniform { low: -1.0, high: 1.0 }.sample_ensemble(2, 3, 1, 0).unwrap();
    let traj = simulate(&g, &init, &p, 0, 1).unwrap();
    assert_eq!(traj.times.len(), 5);
    assert_eq!(*traj.times.last().unwrap(), 1.0);
    assert!(traj.times.windows(2).all(|w| w[0] < w[1]));
}

#[test]
fn collapsed_player_without_noise_stays_put() {
    let g = builtin_game("coupled-quadratic", 2, 2, 0.5).unwrap();
    let z = vec![0.4, -2.0];
    let players = vec![vec![z.clone(); 5], (0..5).map(|i| vec![i as f64, -1.0]).collect()];
    let ens = Ensemble::from_players(&players).unwrap();
    let p = CboParams { sigma: 0.0, ..decay_params(1.0) };
    let next = step_em(&g, &ens, &p, &NoiseStream::new(1), 0).unwrap();
    for i in 0..5 {
        assert_eq!(next.particle(0, i), z.as_slice());
    }
}

#[test]
fn noiseless_step_is_the_explicit_update() {
    let g = builtin_game("rastrigin-coupled", 2, 3, 0.2).unwrap();
    let ens = Law::Gaussian { mean: 0.0, std: 1.5 }.sample_ensemble(2, 9, 3, 4).unwrap();
    let p = CboParams { sigma: 0.0, lambda: 0.7, ..decay_params(1.0) };
    let c = consensus_all(&g, &ens, p.alpha).unwrap();
    let next = step_em(&g, &ens, &p, &NoiseStream::new(0), 0).unwrap();
    for m in 0..2 {
        for i in 0..9 {
            let x = ens.particle(m, i);
            let expected: Vec<f64> = (0..3).map(|k| x[k] - p.lambda * p.dt * (x[k] - c.points[m][k])).collect();
            assert_eq!(next.particle(m, i), expected.as_slice());
        }
    }
}

#[test]
fn single_particle_is_a_fixed_point() {
    let g = builtin_game("rastrigin-coupled", 3, 2, 0.4).unwrap();
    let init = Law::Uniform { low: -3.0, high: 3.0 }.sample_ensemble(3, 1, 2, 8).unwrap();
    for kind in [Diffusion::Anisotropic, Diffusion::Isotropic] {
        let p = CboParams { sigma: 2.0, diffusion: kind, ..decay_params(5.0) };
        let traj = simulate(&g, &init, &p, 3, 50).unwrap();
        for snap in &traj.snapshots {
            assert_eq!(bits(snap), bits(&init));
        }
    }
}

#[test]
fn identity_dynamics_keep_the_initial_ensemble() {
    let g = builtin_game("decoupled-quadratic", 2, 2, 0.0).unwrap();
    let init = Law::Uniform { low: -3.0, high: 3.0 }.sample_ensemble(2, 20, 2, 1).unwrap();
    let p = CboParams { lambda: 0.0, sigma: 0.0, ..decay_params(2.0) };
    let traj = simulate(&g, &init, &p, 0, 1000).unwrap();
    assert_eq!(traj.terminal.unwrap(), init);
}

#[test]
fn same_seed_same_trajectory() {
    let g = builtin_game("rastrigin-coupled", 2, 2, 0.1).unwrap();
    let init = Law::Uniform { low: -3.0, high: 3.0 }.sample_ensemble(2, 50, 2, 2).unwrap();
    let a = simulate(&g, &init, &decay_params(2.0), 77, 10).unwrap();
    let b = simulate(&g, &init, &decay_params(2.0), 77, 10).unwrap();
    assert_eq!(a, b);
    let c = simulate(&g, &init, &decay_params(2.0), 78, 10).unwrap();
    assert_ne!(a.terminal, c.terminal);
}

#[test]
fn decoupled_quadratic_swarm_contracts() {
    let g = builtin_game("decoupled-quadratic", 2, 2, 0.0).unwrap();
    let x_star = g.known_nash().unwrap().clone();
    let init = Law::Uniform { low: -3.0, high: 3.0 }.sample_ensemble(2, 100, 2, 0).unwrap();
    let traj = simulate(&g, &init, &decay_params(10.0), 0, 100).unwrap();
    let v0: f64 = variance_at(&init, &x_star).unwrap().iter().sum();
    let vt: f64 = variance_at(traj.terminal.as_ref().unwrap(), &x_star).unwrap().iter().sum();
    assert!(vt <= 1e-3 * v0, "V(T) = {vt}, V(0) = {v0}");
}

#[test]
fn results_do_not_depend_on_worker_count() {
    let g = builtin_game("rastrigin-coupled", 2, 2, 0.1).unwrap();
    let init = Law::Uniform { low: -3.0, high: 3.0 }.sample_ensemble(2, 700, 2, 5).unwrap();
    let p = decay_params(0.5);
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| simulate(&g, &init, &p, 9, 5).unwrap())
    };
    let one = run(1);
    for threads in [2, 8] {
        let other = run(threads);
        assert_eq!(bits(one.terminal.as_ref().unwrap()), bits(other.terminal.as_ref().unwrap()));
        assert_eq!(one, other);
    }
}

#[test]
fn exchangeable_under_relabelling() {
    let g = builtin_game("coupled-quadratic", 2, 2, 0.3).unwrap();
    let n = 12;
    let init = Law::Uniform { low: -3.0, high: 3.0 }.sample_ensemble(2, n, 2, 6).unwrap();
    let perm: Vec<usize> = (0..n).map(|j| (j * 5 + 3) % n).collect();
    let players: Vec<Vec<Vec<f64>>> = (0..2)
        .map(|m| perm.iter().map(|&i| init.particle(m, i).to_vec()).collect())
        .collect();
    let permuted = Ensemble::from_players(&players).unwrap();
    let labels = perm.iter().map(|&i| i as u64).collect();
    let p = decay_params(1.0);
    let a = Simulator::new(&g, init, p, 4).unwrap().run(Recording::every(1000)).unwrap();
    let b = Simulator::new(&g, permuted, p, 4)
        .unwrap()
        .with_labels(labels)
        .unwrap()
        .run(Recording::every(1000))
        .unwrap();
    let (ta, tb) = (a.terminal.unwrap(), b.terminal.unwrap());
    for m in 0..2 {
        for (j, &i) in perm.iter().enumerate() {
            assert_eq!(tb.particle(m, j), ta.particle(m, i));
        }
    }
    assert_eq!(a.consensus_path, b.consensus_path);
}

#[test]
fn zero_xi_without_noise_shrinks_by_the_drift_factor() {
    let g = builtin_game("rastrigin-coupled", 2, 2, 0.5).unwrap();
    let init = Law::Uniform { low: -3.0, high: 3.0 }.sample_ensemble(2, 6, 2, 3).unwrap();
    let p = CboParams { xi: 0.0, sigma: 0.0, lambda: 0.8, dt: 0.05, ..decay_params(1.0) };
    let mut sim = Simulator::new(&g, init, p, 0).unwrap();
    let factor = 1.0 - p.lambda * p.dt;
    assert_eq!(p.num_steps(), 20);
    while !sim.is_done() {
        assert_eq!(p.step_size(sim.step_index()), p.dt);
        let before = sim.state().clone();
        sim.advance().unwrap();
        for (x, y) in before.as_slice().iter().zip(sim.state().as_slice()) {
            assert_eq!(*y, x - p.lambda * p.dt * x);
            assert!((y - factor * x).abs() <= 1e-15 * x.abs());
        }
    }
}

#[test]
fn self_coupling_is_bit_identical() {
    let g = builtin_game("decoupled-quadratic", 2, 2, 0.0).unwrap();
    let law = Law::Uniform { low: -3.0, high: 3.0 };
    let (a, b) = simulate_coupled(&g, &law, &decay_params(1.0), 40, 40, 3, Recording::every(7)).unwrap();
    assert_eq!(a, b);
    let (a, b) = simulate_coupled(&g, &law, &decay_params(1.0), 1, 1, 3, Recording::every(7)).unwrap();
    assert_eq!(a, b);
    let first = a.snapshots[0].clone();
    assert!(a.snapshots.iter().all(|s| *s == first));
    assert!(simulate_coupled(&g, &law, &decay_params(1.0), 5, 4, 3, Recording::every(7)).is_err());
}

#[test]
fn coupled_prefix_shares_initial_positions() {
    let g = builtin_game("decoupled-quadratic", 2, 2, 0.0).unwrap();
    let law = Law::Gaussian { mean: 1.0, std: 2.0 };
    let (a, b) = simulate_coupled(&g, &law, &decay_params(0.1), 8, 64, 11, Recording::every(100)).unwrap();
    assert_eq!(a.snapshots[0], b.snapshots[0].truncated(8));
}

#[test]
fn coupled_gap_saturates_as_reference_grows() {
    let g = builtin_game("decoupled-quadratic", 2, 2, 0.0).unwrap();
    let law = Law::Uniform { low: -3.0, high: 3.0 };
    let p = decay_params(10.0);
    let rms = |n_ref: usize| {
        let total: f64 = (0..32)
            .map(|s| {
                let g = &coupled_sup_gaps(&g, &p, &law, &[16], n_ref, 2.0, s).unwrap()[0];
                g.iter().sum::<f64>() / g.len() as f64
            })
            .sum();
        (total / 32.0).sqrt()
    };
    assert_eq!(rms(16), 0.0);
    let limit = rms(1024);
    assert!(limit > 0.0);
    for n_ref in [64, 256] {
        let gap = rms(n_ref);
        assert!((gap - limit).abs() <= 0.1 * limit, "n_ref={n_ref}: {gap} vs {limit}");
    }
}

#[test]
fn blow_up_is_reported_with_the_partial_trajectory() {
    let flat: cbo_games::game::CostFn = std::sync::Arc::new(|_: &[f64], _: &[f64]| 0.0);
    let g = cbo_games::GameSpec::new("flat", 1, vec![flat.clone(), flat]).unwrap();
    let init = Ensemble::from_players(&[vec![vec![1e300], vec![-1e300]], vec![vec![0.0], vec![1.0]]]).unwrap();
    let p = CboParams { lambda: 0.0, sigma: 3.0, alpha: 0.0, dt: 1.0, t_end: 100.0, ..decay_params(1.0) };
    match simulate(&g, &init, &p, 0, 1) {
        Err(Error::BlowUp { partial, step, .. }) => {
            assert_eq!(partial.recorded_steps.last(), Some(&step));
            assert!(partial.terminal.is_some());
        }
        other => panic!("expected blow-up, got {other:?}"),
    }
}

/// Kolmogorov distribution tail `P(K > x)`.
fn kolmogorov_tail(x: f64) -> f64 {
    let mut total = 0.0;
    for k in 1..=100 {
        let k = k as f64;
        let sign = if k as u64 % 2 == 1 { 1.0 } else { -1.0 };
        total += sign * (-2.0 * k * k * x * x).exp();
    }
    (2.0 * total).clamp(0.0, 1.0)
}

#[test]
fn noise_stream_is_standard_normal() {
    let noise = NoiseStream::new(2024);
    let mut values = Vec::with_capacity(100_000);
    let mut buf = [0.0; 5];
    for step in 0..4000 {
        for label in 0..5 {
            noise.fill(label % 2, label as u64, step, &mut buf);
            values.extend_from_slice(&buf);
        }
    }
    values.sort_by(f64::total_cmp);
    let n = values.len() as f64;
    let normal = Normal::new(0.0, 1.0).unwrap();
    let d = values
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let f = normal.cdf(*v);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max);
    let p_value = kolmogorov_tail((n.sqrt() + 0.12 + 0.11 / n.sqrt()) * d);
    assert!(p_value > 1e-3, "KS D = {d}, p = {p_value}");
}

#[test]
fn deviates_are_addressable() {
    let noise = NoiseStream::new(5);
    let mut buf = [0.0; 3];
    noise.fill(1, 7, 42, &mut buf);
    for (coord, v) in buf.iter().enumerate() {
        assert_eq!(noise.deviate(1, 7, 42, coord, 3), *v);
    }
    let mut other = [0.0; 3];
    noise.fill(1, 7, 43, &mut other);
    assert_ne!(buf, other);
    noise.fill(0, 7, 42, &mut other);
    assert_ne!(buf, other);
}
