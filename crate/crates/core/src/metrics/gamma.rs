use crate::error::{Error, Result};

/// Rate exponent of the mean-field limit estimate,
/// `γ = min{1/2, (q − p)/(2p²), (q − b)/(2b²)}` with `b = max(2, p_M)`.
///
/// Requires `q ≥ max(4, 2 p_M)` and `0 < p ≤ q/2`.
pub fn gamma_exponent(q: f64, p: f64, p_m: f64) -> Result<f64> {
    if ![q, p, p_m].iter().all(|v| v.is_finite()) || p_m <= 0.0 {
        return Err(Error::Domain(format!(
            "q, p, p_M must be finite with p_M > 0 (got q={q}, p={p}, p_M={p_m})"
        )));
    }
    if q < 4f64.max(2.0 * p_m) {
        return Err(Error::Domain(format!(
            "q = {q} is below max(4, 2 p_M) = {}",
            4f64.max(2.0 * p_m)
        )));
    }
    if !(p > 0.0 && p <= q / 2.0) {
        return Err(Error::Domain(format!("p = {p} must lie in (0, q/2 = {}]", q / 2.0)));
    }
    let b = p_m.max(2.0);
    let moment_term = (q - p) / (2.0 * p * p);
    let stability_term = (q - b) / (2.0 * b * b);
    Ok(0.5f64.min(moment_term).min(stability_term))
}

/// Smallest `q` giving `γ = 1/2` at `p = 2`: `max(6, b + b²)`, `b = max(2, p_M)`.
pub fn monte_carlo_threshold(p_m: f64) -> f64 {
    let b = p_m.max(2.0);
    6f64.max(b + b * b)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn examples() {
        assert_eq!(gamma_exponent(8.0, 2.0, 1.0).unwrap(), 0.5);
        assert_eq!(gamma_exponent(6.0, 2.0, 1.0).unwrap(), 0.5);
        assert!((gamma_exponent(5.0, 2.5, 1.0).unwrap() - 0.2).abs() < 1e-15);
    }

    #[test]
    fn hypotheses_enforced() {
        assert!(gamma_exponent(3.0, 1.0, 1.0).is_err());
        assert!(gamma_exponent(5.0, 1.0, 3.0).is_err());
        assert!(gamma_exponent(8.0, 4.5, 1.0).is_err());
        assert!(gamma_exponent(8.0, 0.0, 1.0).is_err());
        assert!(gamma_exponent(f64::NAN, 2.0, 1.0).is_err());
    }

    #[test]
    fn threshold_gives_half() {
        for pm in [1.0, 2.0, 2.5, 3.0, 4.0] {
            assert_eq!(gamma_exponent(monte_carlo_threshold(pm), 2.0, pm).unwrap(), 0.5);
        }
    }
}
