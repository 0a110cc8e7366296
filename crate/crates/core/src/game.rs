//! M-player games: cost evaluators, growth metadata and builtin benchmarks.

use std::fmt;
use std::sync::Arc;

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::ensemble::norm;
use crate::error::{check_len, Error, Result};
use crate::noise::{unit_f64, Domain, Streams};

/// `E_m(x_m; x_{-m})`. The second argument holds the opponents'
/// strategies in player order with player `m` removed.
pub type CostFn = Arc<dyn Fn(&[f64], &[f64]) -> f64 + Send + Sync>;

/// Declared constants of the local Lipschitz and polynomial growth
/// conditions on the costs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrowthMeta {
    /// Growth exponent `s` of the local Lipschitz constant.
    pub lipschitz_exponent: f64,
    /// Growth order `ℓ` of the cost sandwich.
    pub order: f64,
    pub c: f64,
    pub g: f64,
}

impl GrowthMeta {
    /// `p_M`: `2 + s` for bounded costs (`ℓ = 0`), `1` otherwise.
    pub fn stability_exponent(&self) -> f64 {
        if self.order == 0.0 {
            2.0 + self.lipschitz_exponent
        } else {
            1.0
        }
    }

    /// Checks `c⁻¹(|z|^ℓ − G) ≤ value ≤ c(|z|^ℓ + G)` where `z = (x, y)`.
    pub fn sandwich_holds(&self, joint_norm: f64, value: f64) -> bool {
        let r = joint_norm.powf(self.order);
        (r - self.g) / self.c <= value && value <= self.c * (r + self.g)
    }
}

/// Joint strategy `(x_1, …, x_M)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Strategy {
    dim: usize,
    blocks: Vec<f64>,
}

impl Strategy {
    pub fn new(players: usize, dim: usize, blocks: Vec<f64>) -> Result<Self> {
        check_len("strategy", players * dim, blocks.len())?;
        if dim == 0 || blocks.iter().any(|x| !x.is_finite()) {
            return Err(Error::Input("strategy must have finite entries and d >= 1".into()));
        }
        Ok(Self { dim, blocks })
    }

    pub fn zeros(players: usize, dim: usize) -> Self {
        Self {
            dim,
            blocks: vec![0.0; players * dim],
        }
    }

    pub fn players(&self) -> usize {
        self.blocks.len() / self.dim
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn block(&self, m: usize) -> &[f64] {
        &self.blocks[m * self.dim..(m + 1) * self.dim]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.blocks
    }

    /// Opponent strategies `x_{-m}` in the order `(x_1..x_{m-1}, x_{m+1}..x_M)`.
    pub fn opponents(&self, m: usize) -> Vec<f64> {
        opponents_of(&self.blocks, self.dim, m)
    }
}

pub(crate) fn opponents_of(joint: &[f64], dim: usize, m: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(joint.len() - dim);
    out.extend_from_slice(&joint[..m * dim]);
    out.extend_from_slice(&joint[(m + 1) * dim..]);
    out
}

#[derive(Clone)]
pub struct GameSpec {
    name: String,
    players: usize,
    dim: usize,
    costs: Vec<CostFn>,
    growth: Option<GrowthMeta>,
    known_nash: Option<Strategy>,
}

impl fmt::Debug for GameSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GameSpec")
            .field("name", &self.name)
            .field("players", &self.players)
            .field("dim", &self.dim)
            .field("growth", &self.growth)
            .field("known_nash", &self.known_nash)
            .finish_non_exhaustive()
    }
}

impl GameSpec {
    pub fn new(name: impl Into<String>, dim: usize, costs: Vec<CostFn>) -> Result<Self> {
        if costs.len() < 2 {
            return Err(Error::Input(format!(
                "a game needs at least 2 players, got {}",
                costs.len()
            )));
        }
        if dim == 0 {
            return Err(Error::Input("strategy dimension must be >= 1".into()));
        }
        Ok(Self {
            name: name.into(),
            players: costs.len(),
            dim,
            costs,
            growth: None,
            known_nash: None,
        })
    }

    pub fn with_growth(mut self, growth: GrowthMeta) -> Self {
        self.growth = Some(growth);
        self
    }

    pub fn with_known_nash(mut self, nash: Strategy) -> Result<Self> {
        if nash.players() != self.players || nash.dim() != self.dim {
            return Err(Error::Input("known_nash shape does not match the game".into()));
        }
        self.known_nash = Some(nash);
        Ok(self)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn players(&self) -> usize {
        self.players
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn growth(&self) -> Option<&GrowthMeta> {
        self.growth.as_ref()
    }

    pub fn known_nash(&self) -> Option<&Strategy> {
        self.known_nash.as_ref()
    }

    /// `E_m(x_m; x_{-m})` with shape and finiteness checks.
    pub fn eval_cost(&self, m: usize, x_m: &[f64], x_minus_m: &[f64]) -> Result<f64> {
        if m >= self.players {
            return Err(Error::Input(format!(
                "player index {m} out of range for {} players",
                self.players
            )));
        }
        check_len("x_m", self.dim, x_m.len())?;
        check_len("x_{-m}", (self.players - 1) * self.dim, x_minus_m.len())?;
        self.eval_unchecked(m, x_m, x_minus_m)
    }

    /// Shapes are trusted; only finiteness is enforced.
    #[inline]
    pub(crate) fn eval_unchecked(&self, m: usize, x_m: &[f64], x_minus_m: &[f64]) -> Result<f64> {
        let value = (self.costs[m])(x_m, x_minus_m);
        if value.is_finite() {
            Ok(value)
        } else {
            Err(Error::Evaluation { player: m, value })
        }
    }

    /// Costs of every player at a joint strategy.
    pub fn eval_joint(&self, x: &Strategy) -> Result<Vec<f64>> {
        (0..self.players)
            .map(|m| self.eval_cost(m, x.block(m), &x.opponents(m)))
            .collect()
    }
}

/// Largest sampled unilateral improvement `E_m(x_m; x_{-m}) - min_y E_m(y; x_{-m})`
/// over players, with candidates `y` drawn uniformly from the ball of radius
/// `probe_radius` around `x_m`. Zero means no sampled deviation helps.
pub fn nash_residual(game: &GameSpec, x: &Strategy, probe_budget: usize, probe_radius: f64, rng_seed: u64) -> Result<f64> {
    if probe_budget == 0 {
        return Err(Error::Input("probe_budget must be >= 1".into()));
    }
    if !(probe_radius > 0.0 && probe_radius.is_finite()) {
        return Err(Error::Input("probe_radius must be positive".into()));
    }
    check_shape(game, x)?;
    let streams = Streams::new(rng_seed, Domain::Probe);
    let d = game.dim();
    let mut worst = 0.0_f64;
    for m in 0..game.players() {
        let mut rng = streams.rng(m, 0);
        let center = x.block(m);
        let candidates: Vec<Vec<f64>> = (0..probe_budget)
            .map(|_| {
                let mut dir: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut rng)).collect();
                let len = norm(&dir);
                let radius = probe_radius * unit_f64(&mut rng).powf(1.0 / d as f64);
                for (v, c) in dir.iter_mut().zip(center) {
                    *v = c + if len > 0.0 { *v / len * radius } else { 0.0 };
                }
                dir
            })
            .collect();
        worst = worst.max(improvement_against(game, x, m, &candidates)?);
    }
    Ok(worst)
}

/// `max(0, E_m(x_m; x_{-m}) - min_y E_m(y; x_{-m}))` over the given candidates.
pub fn improvement_against(game: &GameSpec, x: &Strategy, m: usize, candidates: &[Vec<f64>]) -> Result<f64> {
    check_shape(game, x)?;
    let opp = x.opponents(m);
    let current = game.eval_cost(m, x.block(m), &opp)?;
    let mut best = f64::INFINITY;
    for y in candidates {
        best = best.min(game.eval_cost(m, y, &opp)?);
    }
    Ok((current - best).max(0.0))
}

fn check_shape(game: &GameSpec, x: &Strategy) -> Result<()> {
    if x.players() != game.players() || x.dim() != game.dim() {
        return Err(Error::Input(format!(
            "strategy shape {}x{} does not match game {}x{}",
            x.players(),
            x.dim(),
            game.players(),
            game.dim()
        )));
    }
    Ok(())
}

/// Names accepted by [`builtin_game`].
pub const BUILTIN_GAMES: [&str; 3] = ["decoupled-quadratic", "coupled-quadratic", "rastrigin-coupled"];

fn sq_norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

/// Componentwise average of the `M - 1` opponent blocks.
fn opponent_average(x_minus_m: &[f64], dim: usize) -> impl Iterator<Item = f64> + '_ {
    let count = (x_minus_m.len() / dim) as f64;
    (0..dim).map(move |k| x_minus_m.iter().skip(k).step_by(dim).sum::<f64>() / count)
}

pub fn rastrigin(u: impl Iterator<Item = f64>) -> f64 {
    u.map(|v| 10.0 + v * v - 10.0 * (std::f64::consts::TAU * v).cos())
        .sum()
}

/// Benchmark games whose Nash equilibrium is the origin.
///
/// * `decoupled-quadratic`: `E_m = |x_m|²`.
/// * `coupled-quadratic`: `E_m = |x_m − a·avg(x_{-m})|²`, requires `|a| < 1`.
/// * `rastrigin-coupled`: `E_m = Rastrigin(x_m − a·avg(x_{-m}))`.
///
/// Growth constants are declared for `|(x, y)| ≤ 10`, the region where they
/// are spot-checked; the quadratic lower bound cannot hold globally for a
/// cost that ignores part of its argument.
pub fn builtin_game(name: &str, players: usize, dim: usize, coupling: f64) -> Result<GameSpec> {
    if players < 2 || dim == 0 {
        return Err(Error::Input(format!(
            "builtin games need M >= 2 and d >= 1, got M={players}, d={dim}"
        )));
    }
    if !coupling.is_finite() {
        return Err(Error::Input("coupling must be finite".into()));
    }
    let a = coupling;
    let costs: Vec<CostFn> = match name {
        "decoupled-quadratic" => (0..players)
            .map(|_| Arc::new(|x: &[f64], _: &[f64]| sq_norm(x)) as CostFn)
            .collect(),
        "coupled-quadratic" => {
            if a.abs() >= 1.0 {
                return Err(Error::Input(format!(
                    "coupled-quadratic needs |coupling| < 1 for a unique equilibrium, got {a}"
                )));
            }
            (0..players)
                .map(|_| {
                    Arc::new(move |x: &[f64], y: &[f64]| {
                        x.iter()
                            .zip(opponent_average(y, x.len()))
                            .map(|(xi, yi)| (xi - a * yi) * (xi - a * yi))
                            .sum()
                    }) as CostFn
                })
                .collect()
        }
        "rastrigin-coupled" => (0..players)
            .map(|_| {
                Arc::new(move |x: &[f64], y: &[f64]| {
                    rastrigin(
                        x.iter()
                            .zip(opponent_average(y, x.len()))
                            .map(|(xi, yi)| xi - a * yi),
                    )
                }) as CostFn
            })
            .collect(),
        other => return Err(Error::UnknownGame(other.to_string())),
    };
    let growth = match name {
        "decoupled-quadratic" => GrowthMeta {
            lipschitz_exponent: 1.0,
            order: 2.0,
            c: 1.0,
            g: 100.0,
        },
        "coupled-quadratic" => GrowthMeta {
            lipschitz_exponent: 1.0,
            order: 2.0,
            c: 2.0,
            g: 100.0,
        },
        _ => GrowthMeta {
            lipschitz_exponent: 1.0,
            order: 2.0,
            c: 2.0 * (1.0 + a * a),
            g: 100.0 + 20.0 * dim as f64,
        },
    };
    GameSpec::new(name, dim, costs)?
        .with_growth(growth)
        .with_known_nash(Strategy::zeros(players, dim))
}
