//! Softmin-weighted consensus points.
//!
//! For player `m` the consensus is the average of its particles weighted by
//! `exp(-α E_m(X^{m,i}; M^{-m}))`, where `M^{-m}` holds the sample averages of
//! the opponents' particles. Weights are computed after subtracting the
//! minimum cost, and every sum is correctly rounded (see [`crate::sum`]), so
//! the result is bit-for-bit invariant under particle permutations.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::ensemble::Ensemble;
use crate::error::{check_len, Error, Result};
use crate::game::{opponents_of, GameSpec};
use crate::par;
use crate::sum::{exact_sum, ExactSum};

/// Normalized nonnegative weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightVector(Vec<f64>);

impl WeightVector {
    /// Validates and wraps externally supplied weights. They must be
    /// finite, nonnegative, not all zero and sum to one within `1e-12`.
    pub fn new(w: Vec<f64>) -> Result<Self> {
        if w.is_empty() {
            return Err(Error::Input("weight vector is empty".into()));
        }
        if w.iter().any(|x| !x.is_finite() || *x < 0.0) {
            return Err(Error::Input("weights must be finite and nonnegative".into()));
        }
        let total = exact_sum(w.iter().copied());
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::Input(format!("weights sum to {total}, not 1")));
        }
        Ok(Self(w))
    }

    pub fn uniform(n: usize) -> Self {
        Self(vec![1.0 / n as f64; n])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Consensus points of all players at one instant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsensusSet {
    pub points: Vec<Vec<f64>>,
    pub alpha: f64,
}

/// `w_i ∝ exp(-α (c_i − min c))`.
pub fn softmin_weights(costs: &[f64], alpha: f64) -> Result<WeightVector> {
    if costs.is_empty() {
        return Err(Error::Input("softmin of an empty cost vector".into()));
    }
    if !(alpha >= 0.0 && alpha.is_finite()) {
        return Err(Error::Input(format!("alpha must be finite and >= 0, got {alpha}")));
    }
    if let Some(i) = costs.iter().position(|c| !c.is_finite()) {
        return Err(Error::Input(format!("cost {i} is not finite: {}", costs[i])));
    }
    let min = costs.iter().copied().fold(f64::INFINITY, f64::min);
    let raw: Vec<f64> = costs.iter().map(|c| (-alpha * (c - min)).exp()).collect();
    // the minimizer contributes exp(0) = 1, so total >= 1
    let total = exact_sum(raw.iter().copied());
    Ok(WeightVector(raw.into_iter().map(|e| e / total).collect()))
}

/// Lexicographic order on coordinates, used to break weight ties.
fn lex_cmp(a: &[f64], b: &[f64]) -> Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(Ordering::Equal)
}

/// `Σ_i w_i x_i` for `positions` stored flat with dimension `dim`.
///
/// Evaluated as `x_a + Σ_i w_i (x_i − x_a)` around the heaviest particle `x_a`
/// (ties broken lexicographically), which is exact when the weight
/// concentrates on one particle or all particles coincide.
pub fn weighted_point(positions: &[f64], dim: usize, w: &WeightVector) -> Result<Vec<f64>> {
    if dim == 0 {
        return Err(Error::Input("dimension must be >= 1".into()));
    }
    check_len("positions", w.len() * dim, positions.len())?;
    let weights = w.as_slice();
    let point = |i: usize| &positions[i * dim..(i + 1) * dim];
    let mut anchor = 0;
    for i in 1..weights.len() {
        match weights[i].total_cmp(&weights[anchor]) {
            Ordering::Greater => anchor = i,
            Ordering::Equal if lex_cmp(point(i), point(anchor)).is_lt() => anchor = i,
            _ => {}
        }
    }
    let base = point(anchor);
    let mut out = Vec::with_capacity(dim);
    for k in 0..dim {
        let mut acc = ExactSum::new();
        for (i, wi) in weights.iter().enumerate() {
            if i != anchor && *wi != 0.0 {
                acc.add(wi * (positions[i * dim + k] - base[k]));
            }
        }
        out.push(base[k] + acc.value());
    }
    Ok(out)
}

/// Per-player sample averages `M = (1/N) Σ_i (X^{1,i}, …, X^{M,i})`, flattened.
pub fn sample_means(ens: &Ensemble) -> Vec<f64> {
    let (n, d) = (ens.particles(), ens.dim());
    let mut out = Vec::with_capacity(ens.players() * d);
    for m in 0..ens.players() {
        let block = ens.player(m);
        for k in 0..d {
            let s = exact_sum((0..n).map(|i| block[i * d + k]));
            out.push(s / n as f64);
        }
    }
    out
}

fn check_game_ensemble(game: &GameSpec, ens: &Ensemble) -> Result<()> {
    if game.players() != ens.players() || game.dim() != ens.dim() {
        return Err(Error::Input(format!(
            "ensemble shape (M={}, d={}) does not match game (M={}, d={})",
            ens.players(),
            ens.dim(),
            game.players(),
            game.dim()
        )));
    }
    Ok(())
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha >= 0.0 && alpha.is_finite()) {
        return Err(Error::Input(format!("alpha must be finite and >= 0, got {alpha}")));
    }
    Ok(())
}

fn player_consensus(game: &GameSpec, ens: &Ensemble, means: &[f64], m: usize, alpha: f64) -> Result<Vec<f64>> {
    let opponents = opponents_of(means, ens.dim(), m);
    let costs = par::try_map(ens.particles(), |i| {
        game.eval_unchecked(m, ens.particle(m, i), &opponents)
    })?;
    let w = softmin_weights(&costs, alpha)?;
    weighted_point(ens.player(m), ens.dim(), &w)
}

/// Consensus point of player `m`, opponents frozen at their sample averages.
pub fn consensus_for_player(game: &GameSpec, ens: &Ensemble, m: usize, alpha: f64) -> Result<Vec<f64>> {
    check_game_ensemble(game, ens)?;
    check_alpha(alpha)?;
    if m >= game.players() {
        return Err(Error::Input(format!("player index {m} out of range")));
    }
    player_consensus(game, ens, &sample_means(ens), m, alpha)
}

/// Consensus points of every player, sharing one pass over the sample averages.
pub fn consensus_all(game: &GameSpec, ens: &Ensemble, alpha: f64) -> Result<ConsensusSet> {
    check_game_ensemble(game, ens)?;
    check_alpha(alpha)?;
    let means = sample_means(ens);
    let points = (0..game.players())
        .map(|m| player_consensus(game, ens, &means, m, alpha))
        .collect::<Result<Vec<_>>>()?;
    Ok(ConsensusSet { points, alpha })
}

/// Consensus of an arbitrary weighted sample under a single cost `x ↦ cost(x)`.
pub fn consensus_of_samples(samples: &[f64], dim: usize, alpha: f64, cost: impl Fn(&[f64]) -> f64) -> Result<Vec<f64>> {
    check_alpha(alpha)?;
    if dim == 0 || samples.is_empty() || !samples.len().is_multiple_of(dim) {
        return Err(Error::Input("samples must be a nonempty multiple of dim".into()));
    }
    let costs: Vec<f64> = samples.chunks_exact(dim).map(&cost).collect();
    let w = softmin_weights(&costs, alpha)?;
    weighted_point(samples, dim, &w)
}
