use serde::{Deserialize, Serialize};

use crate::dynamics::Trajectory;
use crate::ensemble::Ensemble;
use crate::error::{Error, Result};
use crate::game::Strategy;
use crate::sum::exact_sum;

/// Particle-average surrogate of `V^m(t) = E|X^m_t − x*_m|²` at one time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariancePoint {
    pub time: f64,
    pub per_player: Vec<f64>,
    pub total: f64,
}

/// `V^m = (1/N) Σ_i |X^{m,i} − x*_m|²` for every player.
pub fn variance_at(ens: &Ensemble, x_star: &Strategy) -> Result<Vec<f64>> {
    if x_star.players() != ens.players() || x_star.dim() != ens.dim() {
        return Err(Error::Input("x_star shape does not match the ensemble".into()));
    }
    let n = ens.particles();
    Ok((0..ens.players())
        .map(|m| {
            let target = x_star.block(m);
            exact_sum((0..n).map(|i| {
                ens.particle(m, i)
                    .iter()
                    .zip(target)
                    .map(|(x, t)| (x - t) * (x - t))
                    .sum::<f64>()
            })) / n as f64
        })
        .collect())
}

pub fn variance_trace(traj: &Trajectory, x_star: &Strategy) -> Result<Vec<VariancePoint>> {
    if traj.snapshots.is_empty() {
        return Err(Error::MissingSnapshots);
    }
    traj.snapshots
        .iter()
        .zip(traj.recorded_times())
        .map(|(ens, time)| {
            let per_player = variance_at(ens, x_star)?;
            let total = per_player.iter().sum();
            Ok(VariancePoint {
                time,
                per_player,
                total,
            })
        })
        .collect()
}
