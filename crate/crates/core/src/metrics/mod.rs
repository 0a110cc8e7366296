//! Distances, functionals and fits used by the experiments.

mod fit;
mod gamma;
mod variance;
mod wasserstein;

pub use fit::{fit_exponential_decay, fit_linear, fit_power_law, FitResult};
pub use gamma::{gamma_exponent, monte_carlo_threshold};
pub use variance::{variance_at, variance_trace, VariancePoint};
pub use wasserstein::{assignment, wasserstein_p, EmpiricalMeasure, EXACT_ATOM_CAP};
