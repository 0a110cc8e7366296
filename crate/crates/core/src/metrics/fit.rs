use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Ordinary least-squares line.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// Least squares of `ys` on `xs`. A perfect fit, including constant data,
/// has `r² = 1`.
pub fn fit_linear(xs: &[f64], ys: &[f64]) -> Result<FitResult> {
    if xs.len() != ys.len() {
        return Err(Error::Input("fit: x and y lengths differ".into()));
    }
    if xs.len() < 3 {
        return Err(Error::Input(format!("fit needs at least 3 points, got {}", xs.len())));
    }
    if xs.iter().chain(ys).any(|v| !v.is_finite()) {
        return Err(Error::Input("fit: non-finite data".into()));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx == 0.0 {
        return Err(Error::Input("fit: all abscissae coincide".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_tot: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    let ss_res: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| {
            let r = y - (intercept + slope * x);
            r * r
        })
        .sum();
    let r_squared = if ss_tot <= f64::EPSILON * f64::EPSILON * n {
        1.0
    } else {
        (1.0 - ss_res / ss_tot).clamp(0.0, 1.0)
    };
    Ok(FitResult {
        slope,
        intercept,
        r_squared,
    })
}

fn logs(values: &[f64], what: &str) -> Result<Vec<f64>> {
    values
        .iter()
        .map(|&v| {
            if v > 0.0 && v.is_finite() {
                Ok(v.ln())
            } else {
                Err(Error::Input(format!("{what} must be positive and finite, got {v}")))
            }
        })
        .collect()
}

/// Fits `ln(values) = intercept + slope · t`; a negative slope is a decay rate.
pub fn fit_exponential_decay(times: &[f64], values: &[f64]) -> Result<FitResult> {
    fit_linear(times, &logs(values, "decay values")?)
}

/// Fits `ln(gaps) = intercept + slope · ln(ns)`.
pub fn fit_power_law(ns: &[f64], gaps: &[f64]) -> Result<FitResult> {
    fit_linear(&logs(ns, "sizes")?, &logs(gaps, "gaps")?)
}
