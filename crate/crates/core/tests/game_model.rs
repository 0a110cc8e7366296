use cbo_games::game::{improvement_against, BUILTIN_GAMES};
use cbo_games::{builtin_game, nash_residual, Error, Strategy};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[test]
fn decoupled_quadratic_cost_at_three_four() {
    let g = builtin_game("decoupled-quadratic", 2, 2, 0.0).unwrap();
    assert_eq!(g.eval_cost(0, &[3.0, 4.0], &[-7.0, 1.5]).unwrap(), 25.0);
    assert_eq!(g.eval_cost(0, &[3.0, 4.0], &[0.0, 0.0]).unwrap(), 25.0);
}

#[test]
fn eval_cost_rejects_bad_shapes_and_players() {
    let g = builtin_game("coupled-quadratic", 3, 2, 0.2).unwrap();
    assert!(matches!(g.eval_cost(0, &[1.0], &[0.0; 4]), Err(Error::Input(_))));
    assert!(matches!(g.eval_cost(0, &[1.0, 2.0], &[0.0; 3]), Err(Error::Input(_))));
    assert!(matches!(g.eval_cost(3, &[1.0, 2.0], &[0.0; 4]), Err(Error::Input(_))));
}

#[test]
fn non_finite_cost_names_the_player() {
    let g = builtin_game("decoupled-quadratic", 2, 1, 0.0).unwrap();
    match g.eval_cost(1, &[1e200], &[0.0]) {
        Err(Error::Evaluation { player, .. }) => assert_eq!(player, 1),
        other => panic!("expected evaluation error, got {other:?}"),
    }
}

#[test]
fn opponent_ordering_skips_own_block() {
    let x = Strategy::new(3, 1, vec![1.0, 2.0, 3.0]).unwrap();
    assert_eq!(x.opponents(0), vec![2.0, 3.0]);
    assert_eq!(x.opponents(1), vec![1.0, 3.0]);
    assert_eq!(x.opponents(2), vec![1.0, 2.0]);
}

#[test]
fn coupled_quadratic_origin_has_zero_cost() {
    let g = builtin_game("coupled-quadratic", 3, 2, 0.1).unwrap();
    let zero = Strategy::zeros(3, 2);
    assert_eq!(g.eval_joint(&zero).unwrap(), vec![0.0; 3]);
}

/// Best-response iteration `x_m <- a · avg(x_{-m})` from random starts.
fn fixed_point_oracle(players: usize, dim: usize, a: f64, seed: u64) -> Vec<f64> {
    let mut r = rng(seed);
    let mut x: Vec<f64> = (0..players * dim).map(|_| r.random_range(-5.0..5.0)).collect();
    for _ in 0..500 {
        let prev = x.clone();
        for m in 0..players {
            for k in 0..dim {
                let others: f64 = (0..players).filter(|&j| j != m).map(|j| prev[j * dim + k]).sum();
                x[m * dim + k] = a * others / (players - 1) as f64;
            }
        }
    }
    x
}

#[test]
fn coupled_quadratic_equilibrium_matches_fixed_point_oracle() {
    for (players, dim, a) in [(3, 1, 0.5), (2, 2, 0.1), (4, 3, -0.9)] {
        let g = builtin_game("coupled-quadratic", players, dim, a).unwrap();
        let nash = g.known_nash().unwrap();
        for seed in 0..5 {
            let fp = fixed_point_oracle(players, dim, a, seed);
            for (u, v) in fp.iter().zip(nash.as_slice()) {
                assert!((u - v).abs() < 1e-12, "fixed point {fp:?} vs {:?}", nash.as_slice());
            }
        }
        // the oracle's limit is a best response for every player
        let x = Strategy::new(players, dim, fixed_point_oracle(players, dim, a, 9)).unwrap();
        assert!(nash_residual(&g, &x, 2000, 2.0, 1).unwrap() <= 1e-12);
    }
}

#[test]
fn builtin_examples() {
    let g = builtin_game("decoupled-quadratic", 2, 2, 0.0).unwrap();
    assert_eq!(g.known_nash().unwrap().as_slice(), &[0.0; 4]);
    let g = builtin_game("coupled-quadratic", 3, 1, 0.5).unwrap();
    assert_eq!(g.known_nash().unwrap().as_slice(), &[0.0; 3]);
    let g = builtin_game("rastrigin-coupled", 2, 2, 0.0).unwrap();
    assert_eq!(g.eval_cost(0, &[0.0, 0.0], &[0.0, 0.0]).unwrap(), 0.0);
    assert!(matches!(builtin_game("nope", 2, 2, 0.0), Err(Error::UnknownGame(_))));
    assert!(builtin_game("decoupled-quadratic", 1, 2, 0.0).is_err());
    assert!(builtin_game("coupled-quadratic", 2, 2, 1.0).is_err());
}

#[test]
fn known_nash_beats_random_deviations() {
    let mut r = rng(3);
    for name in BUILTIN_GAMES {
        let g = builtin_game(name, 3, 2, 0.3).unwrap();
        let x = g.known_nash().unwrap().clone();
        for m in 0..3 {
            let own = g.eval_cost(m, x.block(m), &x.opponents(m)).unwrap();
            for _ in 0..100 {
                let y: Vec<f64> = (0..2).map(|_| r.random_range(-5.0..5.0)).collect();
                assert!(own <= g.eval_cost(m, &y, &x.opponents(m)).unwrap());
            }
        }
    }
}

#[test]
fn nash_certificate_for_every_builtin_game() {
    for name in BUILTIN_GAMES {
        for (players, dim) in [(2, 1), (2, 2), (3, 2)] {
            let g = builtin_game(name, players, dim, 0.25).unwrap();
            let r = nash_residual(&g, g.known_nash().unwrap(), 10_000, 3.0, 42).unwrap();
            assert!(r <= 1e-12, "{name} M={players} d={dim}: residual {r}");
        }
    }
}

#[test]
fn residual_of_unit_offset_is_brute_force_minimum() {
    let g = builtin_game("decoupled-quadratic", 2, 2, 0.0).unwrap();
    let x = Strategy::new(2, 2, vec![1.0, 0.0, 0.0, 0.0]).unwrap();
    let r = nash_residual(&g, &x, 1000, 2.0, 7).unwrap();
    assert!(r > 0.0 && r <= 1.0, "residual {r}");
    // with one candidate pinned at the true best response the residual is exact
    let candidates = vec![vec![0.0, 0.0], vec![1.5, -0.5]];
    assert_eq!(improvement_against(&g, &x, 0, &candidates).unwrap(), 1.0);
}

#[test]
fn self_comparison_has_zero_residual() {
    let g = builtin_game("rastrigin-coupled", 2, 2, 0.4).unwrap();
    let x = Strategy::new(2, 2, vec![0.7, -1.2, 2.0, 0.3]).unwrap();
    let only_self = vec![x.block(1).to_vec()];
    assert_eq!(improvement_against(&g, &x, 1, &only_self).unwrap(), 0.0);
}

#[test]
fn residual_rejects_bad_arguments() {
    let g = builtin_game("decoupled-quadratic", 2, 2, 0.0).unwrap();
    let x = Strategy::zeros(2, 2);
    assert!(nash_residual(&g, &x, 0, 1.0, 0).is_err());
    assert!(nash_residual(&g, &x, 10, 0.0, 0).is_err());
    assert!(nash_residual(&g, &Strategy::zeros(3, 2), 10, 1.0, 0).is_err());
}

#[test]
fn growth_sandwich_holds_on_bounded_domain() {
    let mut r = rng(11);
    for name in BUILTIN_GAMES {
        for (players, dim) in [(2, 1), (2, 2), (3, 3)] {
            let g = builtin_game(name, players, dim, 0.3).unwrap();
            let meta = *g.growth().unwrap();
            for _ in 0..1000 {
                let total = players * dim;
                let mut z: Vec<f64> = (0..total).map(|_| r.random_range(-1.0..1.0)).collect();
                let len = z.iter().map(|v| v * v).sum::<f64>().sqrt();
                let radius = 10.0 * r.random::<f64>();
                z.iter_mut().for_each(|v| *v *= radius / len);
                let norm = z.iter().map(|v| v * v).sum::<f64>().sqrt();
                let x = Strategy::new(players, dim, z).unwrap();
                for m in 0..players {
                    let e = g.eval_cost(m, x.block(m), &x.opponents(m)).unwrap();
                    let lower = (norm.powf(meta.order) - meta.g) / meta.c;
                    let upper = meta.c * (norm.powf(meta.order) + meta.g);
                    assert!(lower <= e && e <= upper, "{name}: {lower} <= {e} <= {upper}");
                }
            }
        }
    }
}

#[test]
fn eval_cost_is_pure() {
    let g = builtin_game("rastrigin-coupled", 3, 2, 0.3).unwrap();
    let a = g.eval_cost(2, &[0.3, -0.1], &[1.0, 2.0, 3.0, 4.0]).unwrap();
    let b = g.eval_cost(2, &[0.3, -0.1], &[1.0, 2.0, 3.0, 4.0]).unwrap();
    assert_eq!(a.to_bits(), b.to_bits());
}
