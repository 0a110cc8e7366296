//! Browser demo: a live two-player swarm in the plane, the convergence
//! exponent explorer and softmin concentration on a 1-d Rastrigin cost.
//!
//! The logic lives in plain Rust types so it can be tested natively; the
//! `wasm_bindgen` layer only converts errors.

use cbo_games::game::rastrigin;
use cbo_games::metrics::{gamma_exponent, monte_carlo_threshold, variance_at};
use cbo_games::noise::NoiseStream;
use cbo_games::{builtin_game, consensus_all, softmin_weights, step_em, weighted_point, CboParams, Diffusion, Ensemble, GameSpec, Law};
use wasm_bindgen::prelude::*;

pub const PLAYERS: usize = 2;
pub const DIM: usize = 2;

/// Open-ended horizon: the page steps for as long as it stays open.
const HORIZON_STEPS: f64 = 1e9;

pub struct SwarmCore {
    game: GameSpec,
    params: CboParams,
    noise: NoiseStream,
    state: Ensemble,
    step: usize,
}

impl SwarmCore {
    pub fn new(game: &str, coupling: f64, particles: usize, lambda: f64, sigma: f64, alpha: f64, seed: u64) -> Result<Self, String> {
        let game = builtin_game(game, PLAYERS, DIM, coupling).map_err(|e| e.to_string())?;
        let dt = 0.01;
        let params = CboParams {
            lambda,
            sigma,
            alpha,
            xi: 1.0,
            dt,
            t_end: dt * HORIZON_STEPS,
            diffusion: Diffusion::Anisotropic,
        };
        params.validate().map_err(|e| e.to_string())?;
        if particles == 0 {
            return Err("need at least one particle".into());
        }
        let state = Law::Uniform { low: -3.0, high: 3.0 }
            .sample_ensemble(PLAYERS, particles, DIM, seed)
            .map_err(|e| e.to_string())?;
        Ok(Self {
            game,
            params,
            noise: NoiseStream::new(seed),
            state,
            step: 0,
        })
    }

    pub fn advance(&mut self, steps: usize) -> Result<(), String> {
        for _ in 0..steps {
            self.state = step_em(&self.game, &self.state, &self.params, &self.noise, self.step).map_err(|e| e.to_string())?;
            self.step += 1;
        }
        Ok(())
    }

    pub fn time(&self) -> f64 {
        self.step as f64 * self.params.dt
    }

    /// `[x, y]` pairs, player 1's particles first.
    pub fn positions(&self) -> Vec<f64> {
        self.state.as_slice().to_vec()
    }

    pub fn consensus(&self) -> Result<Vec<f64>, String> {
        let c = consensus_all(&self.game, &self.state, self.params.alpha).map_err(|e| e.to_string())?;
        Ok(c.points.concat())
    }

    pub fn equilibrium(&self) -> Option<Vec<f64>> {
        self.game.known_nash().map(|s| s.as_slice().to_vec())
    }

    /// Total variance around the known equilibrium, `NaN` without one.
    pub fn variance(&self) -> f64 {
        match self.game.known_nash() {
            Some(x) => variance_at(&self.state, x).map_or(f64::NAN, |v| v.iter().sum()),
            None => f64::NAN,
        }
    }
}

/// Rastrigin cost on the line.
pub fn rastrigin_1d(x: f64) -> f64 {
    rastrigin(std::iter::once(x))
}

/// `n` points spread uniformly over `[-3, 3]`.
pub fn sample_points(n: usize, seed: u64) -> Result<Vec<f64>, String> {
    let ens = Law::Uniform { low: -3.0, high: 3.0 }
        .sample_ensemble(1, n, 1, seed)
        .map_err(|e| e.to_string())?;
    Ok(ens.as_slice().to_vec())
}

/// Softmin weights of `xs` under the 1-d Rastrigin cost, followed by the
/// weighted consensus point.
pub fn concentration(xs: &[f64], alpha: f64) -> Result<Vec<f64>, String> {
    let costs: Vec<f64> = xs.iter().map(|&x| rastrigin_1d(x)).collect();
    let w = softmin_weights(&costs, alpha).map_err(|e| e.to_string())?;
    let c = weighted_point(xs, 1, &w).map_err(|e| e.to_string())?;
    let mut out = w.as_slice().to_vec();
    out.push(c[0]);
    Ok(out)
}

fn js(e: String) -> JsError {
    JsError::new(&e)
}

#[wasm_bindgen]
pub struct Swarm(SwarmCore);

#[wasm_bindgen]
impl Swarm {
    #[wasm_bindgen(constructor)]
    pub fn new(game: &str, coupling: f64, particles: usize, lambda: f64, sigma: f64, alpha: f64, seed: u64) -> Result<Swarm, JsError> {
        SwarmCore::new(game, coupling, particles, lambda, sigma, alpha, seed).map(Swarm).map_err(js)
    }

    pub fn advance(&mut self, steps: usize) -> Result<(), JsError> {
        self.0.advance(steps).map_err(js)
    }

    pub fn time(&self) -> f64 {
        self.0.time()
    }

    pub fn positions(&self) -> Vec<f64> {
        self.0.positions()
    }

    pub fn consensus(&self) -> Result<Vec<f64>, JsError> {
        self.0.consensus().map_err(js)
    }

    /// Empty when the game has no known equilibrium.
    pub fn equilibrium(&self) -> Vec<f64> {
        self.0.equilibrium().unwrap_or_default()
    }

    pub fn variance(&self) -> f64 {
        self.0.variance()
    }
}

#[wasm_bindgen]
pub fn gamma(q: f64, p: f64, p_m: f64) -> Result<f64, JsError> {
    gamma_exponent(q, p, p_m).map_err(|e| JsError::new(&e.to_string()))
}

/// Moment order above which `gamma` reaches the Monte Carlo rate.
#[wasm_bindgen]
pub fn gamma_threshold(p_m: f64) -> f64 {
    monte_carlo_threshold(p_m)
}

#[wasm_bindgen]
pub fn softmin_points(n: usize, seed: u64) -> Result<Vec<f64>, JsError> {
    sample_points(n, seed).map_err(js)
}

#[wasm_bindgen]
pub fn softmin_concentration(xs: &[f64], alpha: f64) -> Result<Vec<f64>, JsError> {
    concentration(xs, alpha).map_err(js)
}

#[wasm_bindgen]
pub fn rastrigin_line(x: f64) -> f64 {
    rastrigin_1d(x)
}
