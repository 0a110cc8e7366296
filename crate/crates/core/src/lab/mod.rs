//! Experiments checking the quantitative behavior of the particle system:
//! variance decay, mean-field convergence rate, i.i.d. consensus rate,
//! consensus stability, moment bounds and equilibrium search on a
//! non-convex game.
//!
//! Every experiment stores its aggregated series and thresholds in the
//! report and derives fits and verdicts from those alone, so [`regate`]
//! reproduces them from a stored report.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::metrics::FitResult;

pub mod decay;
pub mod iid;
pub mod mf_rate;
pub mod moments;
pub mod nash;
pub mod report;
pub mod selftest;
pub mod stability;

pub use decay::{run_variance_decay, DecayConfig};
pub use iid::{bounded_bump, run_iid_consensus, FrozenCost, IidConfig};
pub use mf_rate::{coupled_sup_gaps, run_mf_rate, MfRateConfig};
pub use moments::{kappa_hat, run_moment_monitor, MomentConfig};
pub use nash::{run_nash_search, NashConfig};
pub use report::{Comparison, ExperimentReport, SeedSeries, Series, Verdict};
pub use selftest::run_selftest;
pub use stability::{run_stability_probe, StabilityConfig};

pub(crate) type Gated = (BTreeMap<String, FitResult>, Vec<Verdict>);

/// Recomputes fits and verdicts from a report's stored series.
pub fn regate(report: &ExperimentReport) -> Result<(BTreeMap<String, FitResult>, Vec<Verdict>)> {
    match report.name.as_str() {
        decay::NAME => decay::gate(report),
        mf_rate::NAME => mf_rate::gate(report),
        iid::NAME => iid::gate(report),
        stability::NAME => stability::gate(report),
        moments::NAME => moments::gate(report),
        nash::NAME => nash::gate(report),
        other => Err(Error::Input(format!("no gating rule for report `{other}`"))),
    }
}
