use rand::RngCore;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::noise::{unit_f64, Domain, Streams};

/// Particle positions `X^{m,i}` for `m < players`, `i < particles`, stored
/// contiguously as `[m][i][coordinate]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ensemble {
    players: usize,
    particles: usize,
    dim: usize,
    data: Vec<f64>,
}

impl Ensemble {
    pub fn zeros(players: usize, particles: usize, dim: usize) -> Self {
        Self {
            players,
            particles,
            dim,
            data: vec![0.0; players * particles * dim],
        }
    }

    pub fn from_vec(players: usize, particles: usize, dim: usize, data: Vec<f64>) -> Result<Self> {
        if players == 0 || particles == 0 || dim == 0 {
            return Err(Error::Input("ensemble dimensions must be positive".into()));
        }
        crate::error::check_len("ensemble data", players * particles * dim, data.len())?;
        if let Some(pos) = data.iter().position(|x| !x.is_finite()) {
            return Err(Error::Input(format!("non-finite ensemble entry at flat index {pos}")));
        }
        Ok(Self {
            players,
            particles,
            dim,
            data,
        })
    }

    /// Builds an ensemble from per-player particle lists.
    pub fn from_players(players: &[Vec<Vec<f64>>]) -> Result<Self> {
        let m = players.len();
        let n = players.first().map_or(0, Vec::len);
        let d = players.first().and_then(|p| p.first()).map_or(0, Vec::len);
        let mut data = Vec::with_capacity(m * n * d);
        for (j, player) in players.iter().enumerate() {
            crate::error::check_len(&format!("particles of player {j}"), n, player.len())?;
            for x in player {
                crate::error::check_len("particle dimension", d, x.len())?;
                data.extend_from_slice(x);
            }
        }
        Self::from_vec(m, n, d, data)
    }

    pub fn players(&self) -> usize {
        self.players
    }

    pub fn particles(&self) -> usize {
        self.particles
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn particle(&self, m: usize, i: usize) -> &[f64] {
        let at = (m * self.particles + i) * self.dim;
        &self.data[at..at + self.dim]
    }

    #[inline]
    pub fn particle_mut(&mut self, m: usize, i: usize) -> &mut [f64] {
        let at = (m * self.particles + i) * self.dim;
        &mut self.data[at..at + self.dim]
    }

    /// All particles of player `m`, flattened.
    pub fn player(&self, m: usize) -> &[f64] {
        let len = self.particles * self.dim;
        &self.data[m * len..(m + 1) * len]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub(crate) fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// Keeps the first `n` particles of every player.
    pub fn truncated(&self, n: usize) -> Self {
        let n = n.min(self.particles);
        let mut out = Self::zeros(self.players, n, self.dim);
        for m in 0..self.players {
            for i in 0..n {
                out.particle_mut(m, i).copy_from_slice(self.particle(m, i));
            }
        }
        out
    }

    /// Per-player mean of `|X^{m,i}|^p`.
    pub fn moments(&self, p: f64) -> Vec<f64> {
        (0..self.players)
            .map(|m| {
                let s = crate::sum::exact_sum(
                    (0..self.particles).map(|i| norm(self.particle(m, i)).powf(p)),
                );
                s / self.particles as f64
            })
            .collect()
    }
}

pub fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// A sampling law on `R^d`, used for initial conditions and i.i.d. draws.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Law {
    /// Uniform on the box `[low, high]^d`.
    Uniform { low: f64, high: f64 },
    /// Isotropic Gaussian `N(mean, std^2 I)`.
    Gaussian { mean: f64, std: f64 },
    /// Dirac mass at a fixed point (its length must match `d`).
    Point { at: Vec<f64> },
}

impl Law {
    pub fn sample_into<R: RngCore>(&self, rng: &mut R, out: &mut [f64]) {
        match self {
            Law::Uniform { low, high } => {
                for x in out.iter_mut() {
                    *x = low + (high - low) * unit_f64(rng);
                }
            }
            Law::Gaussian { mean, std } => {
                for x in out.iter_mut() {
                    let z: f64 = StandardNormal.sample(rng);
                    *x = mean + std * z;
                }
            }
            Law::Point { at } => out.copy_from_slice(at),
        }
    }

    /// Draws an ensemble where particle `(m, i)` depends only on
    /// `(seed, m, i)`. Ensembles of different sizes built from the same seed
    /// therefore agree on their common indices.
    pub fn sample_ensemble(&self, players: usize, particles: usize, dim: usize, seed: u64) -> Result<Ensemble> {
        if let Law::Point { at } = self {
            crate::error::check_len("point law dimension", dim, at.len())?;
        }
        let streams = Streams::new(seed, Domain::Initial);
        let mut ens = Ensemble::zeros(players, particles, dim);
        for m in 0..players {
            for i in 0..particles {
                let mut rng = streams.rng(m, i as u64);
                self.sample_into(&mut rng, ens.particle_mut(m, i));
            }
        }
        Ok(ens)
    }
}
