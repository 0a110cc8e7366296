//! Correctly rounded floating-point summation.
//!
//! Every reduction that feeds the particle dynamics goes through
//! [`exact_sum`]. The result is the exact sum rounded once, so it does not
//! depend on the order of the terms: permuting particles or changing the
//! number of worker threads cannot change a single bit of the output.

/// Running nonoverlapping expansion (Shewchuk partials).
#[derive(Debug, Clone, Default)]
pub struct ExactSum {
    partials: Vec<f64>,
}

impl ExactSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, mut x: f64) {
        let mut i = 0;
        for j in 0..self.partials.len() {
            let mut y = self.partials[j];
            if x.abs() < y.abs() {
                std::mem::swap(&mut x, &mut y);
            }
            let hi = x + y;
            let lo = y - (hi - x);
            if lo != 0.0 {
                self.partials[i] = lo;
                i += 1;
            }
            x = hi;
        }
        self.partials.truncate(i);
        self.partials.push(x);
    }

    /// Sum of everything added so far, rounded to nearest (ties to even).
    pub fn value(&self) -> f64 {
        let p = &self.partials;
        let mut n = p.len();
        if n == 0 {
            return 0.0;
        }
        n -= 1;
        let mut hi = p[n];
        let mut lo = 0.0;
        while n > 0 {
            let x = hi;
            n -= 1;
            let y = p[n];
            hi = x + y;
            let yr = hi - x;
            lo = y - yr;
            if lo != 0.0 {
                break;
            }
        }
        // half-way case: the remaining partials decide the rounding direction
        if n > 0 && ((lo < 0.0 && p[n - 1] < 0.0) || (lo > 0.0 && p[n - 1] > 0.0)) {
            let y = lo * 2.0;
            let x = hi + y;
            let yr = x - hi;
            if y == yr {
                hi = x;
            }
        }
        hi
    }
}

impl Extend<f64> for ExactSum {
    fn extend<I: IntoIterator<Item = f64>>(&mut self, iter: I) {
        for x in iter {
            self.add(x);
        }
    }
}

/// Correctly rounded sum of `values`.
pub fn exact_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut acc = ExactSum::new();
    acc.extend(values);
    acc.value()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cancels_catastrophically_cancelling_terms() {
        assert_eq!(exact_sum([1e100, 1.0, -1e100]), 1.0);
        assert_eq!(exact_sum([0.1; 10]), 1.0);
        assert_eq!(exact_sum(std::iter::empty()), 0.0);
    }

    #[test]
    fn order_independent() {
        let xs: Vec<f64> = (0..200)
            .map(|k| ((k as f64) * 0.731).sin() * 10f64.powi((k % 17) - 8))
            .collect();
        let forward = exact_sum(xs.iter().copied());
        let backward = exact_sum(xs.iter().rev().copied());
        let mut shuffled = xs.clone();
        shuffled.sort_by(|a, b| a.total_cmp(b));
        assert_eq!(forward.to_bits(), backward.to_bits());
        assert_eq!(forward.to_bits(), exact_sum(shuffled).to_bits());
    }

    #[test]
    fn half_way_rounding() {
        // 1 + 2^-53 + 2^-105 must round up, not to even
        let v = exact_sum([1.0, 2f64.powi(-53), 2f64.powi(-105)]);
        assert_eq!(v, 1.0 + f64::EPSILON);
    }
}
