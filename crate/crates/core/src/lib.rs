//! Consensus-based optimization (CBO) for Nash equilibria of M-player games.
//!
//! Each player owns a swarm of `N` particles in `R^d`. Particles drift toward
//! their player's softmin-weighted consensus point, evaluated with the
//! opponents frozen at their swarm averages, and diffuse with a noise
//! amplitude proportional to their distance from it.
//!
//! * [`game`]: cost functions and benchmark games with known equilibria.
//! * [`consensus`]: stable softmin weights and consensus points.
//! * [`dynamics`]: Euler–Maruyama integration with addressable noise.
//! * [`metrics`]: Wasserstein distances, variance functional, rate fits.
//! * [`lab`]: experiments measuring decay and mean-field convergence rates.

// `!(x >= lo)` is deliberate: NaN must fail range checks.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod consensus;
pub mod dynamics;
pub mod ensemble;
pub mod error;
pub mod game;
pub mod lab;
pub mod metrics;
pub mod noise;
mod par;
pub mod sum;

pub use consensus::{consensus_all, consensus_for_player, softmin_weights, weighted_point, ConsensusSet, WeightVector};
pub use dynamics::{diffusion_apply, simulate, simulate_coupled, step_em, CboParams, Diffusion, Recording, Simulator, Trajectory};
pub use ensemble::{Ensemble, Law};
pub use error::{Error, Result};
pub use game::{builtin_game, nash_residual, GameSpec, GrowthMeta, Strategy};
pub use noise::NoiseStream;
