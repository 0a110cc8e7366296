use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sum::exact_sum;

/// Largest measure size handled by the exact solver.
pub const EXACT_ATOM_CAP: usize = 512;

/// Uniform empirical measure `(1/N) Σ δ_{a_i}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalMeasure {
    dim: usize,
    atoms: Vec<f64>,
}

impl EmpiricalMeasure {
    pub fn new(dim: usize, atoms: Vec<f64>) -> Result<Self> {
        if dim == 0 || atoms.is_empty() || !atoms.len().is_multiple_of(dim) {
            return Err(Error::Input(
                "empirical measure needs at least one atom of dimension >= 1".into(),
            ));
        }
        if atoms.iter().any(|x| !x.is_finite()) {
            return Err(Error::Input("empirical measure atoms must be finite".into()));
        }
        Ok(Self { dim, atoms })
    }

    pub fn from_points(points: &[Vec<f64>]) -> Result<Self> {
        let dim = points.first().map_or(0, Vec::len);
        if points.iter().any(|p| p.len() != dim) {
            return Err(Error::Input("atoms of differing dimension".into()));
        }
        Self::new(dim, points.concat())
    }

    pub fn len(&self) -> usize {
        self.atoms.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn atom(&self, i: usize) -> &[f64] {
        &self.atoms[i * self.dim..(i + 1) * self.dim]
    }

    pub fn mean(&self) -> Vec<f64> {
        let n = self.len();
        (0..self.dim)
            .map(|k| exact_sum((0..n).map(|i| self.atoms[i * self.dim + k])) / n as f64)
            .collect()
    }

    /// `(1/N) Σ |a_i|^p`.
    pub fn moment(&self, p: f64) -> f64 {
        let n = self.len();
        exact_sum((0..n).map(|i| crate::ensemble::norm(self.atom(i)).powf(p))) / n as f64
    }
}

/// Minimum-cost perfect matching of a square cost matrix (row-major),
/// returned as `row -> column`. Shortest augmenting paths with potentials,
/// `O(n³)`.
pub fn assignment(cost: &[f64], n: usize) -> Vec<usize> {
    assert_eq!(cost.len(), n * n, "cost matrix must be n x n");
    let inf = f64::INFINITY;
    let a = |i: usize, j: usize| cost[(i - 1) * n + (j - 1)];
    // 1-based; index 0 is the virtual source row/column
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut row_of = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        row_of[0] = i;
        let mut j0 = 0;
        let mut minv = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = row_of[j0];
            let mut delta = inf;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = a(i0, j) - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[row_of[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if row_of[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            row_of[j0] = row_of[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut col_of = vec![0; n];
    for j in 1..=n {
        col_of[row_of[j] - 1] = j - 1;
    }
    col_of
}

/// Exact `W_p` between two uniform empirical measures of equal size:
/// `((1/N) min_π Σ |a_i − b_π(i)|^p)^{1/p}`. One-dimensional measures are
/// matched by sorting, others by optimal assignment.
pub fn wasserstein_p(a: &EmpiricalMeasure, b: &EmpiricalMeasure, p: f64) -> Result<f64> {
    if !(p >= 1.0 && p.is_finite()) {
        return Err(Error::Input(format!("W_p needs finite p >= 1, got {p}")));
    }
    if a.dim() != b.dim() {
        return Err(Error::Input("measures live in different dimensions".into()));
    }
    let n = a.len();
    if n != b.len() {
        return Err(Error::Input(format!(
            "exact W_p needs equal atom counts, got {n} and {}",
            b.len()
        )));
    }
    if n > EXACT_ATOM_CAP {
        return Err(Error::Input(format!(
            "{n} atoms exceed the exact-assignment cap of {EXACT_ATOM_CAP}"
        )));
    }
    if n == 1 {
        return Ok(crate::ensemble::distance(a.atom(0), b.atom(0)));
    }
    let total = if a.dim() == 1 {
        let mut xs = a.atoms.clone();
        let mut ys = b.atoms.clone();
        xs.sort_by(f64::total_cmp);
        ys.sort_by(f64::total_cmp);
        exact_sum(xs.iter().zip(&ys).map(|(x, y)| (x - y).abs().powf(p)))
    } else {
        let mut cost = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                cost.push(crate::ensemble::distance(a.atom(i), b.atom(j)).powf(p));
            }
        }
        let matching = assignment(&cost, n);
        exact_sum(matching.iter().enumerate().map(|(i, &j)| cost[i * n + j]))
    };
    let mean = total / n as f64;
    Ok(if p == 2.0 { mean.sqrt() } else { mean.powf(1.0 / p) })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m1(xs: &[f64]) -> EmpiricalMeasure {
        EmpiricalMeasure::new(1, xs.to_vec()).unwrap()
    }

    #[test]
    fn examples() {
        let a = EmpiricalMeasure::from_points(&[vec![0.0, 1.0], vec![2.0, -1.0]]).unwrap();
        assert_eq!(wasserstein_p(&a, &a, 2.0).unwrap(), 0.0);

        let x = EmpiricalMeasure::from_points(&[vec![0.0, 0.0]]).unwrap();
        let y = EmpiricalMeasure::from_points(&[vec![3.0, 4.0]]).unwrap();
        assert_eq!(wasserstein_p(&x, &y, 1.0).unwrap(), 5.0);
        assert!((wasserstein_p(&x, &y, 3.0).unwrap() - 5.0).abs() < 1e-12);

        let w = wasserstein_p(&m1(&[0.0, 1.0]), &m1(&[0.0, 3.0]), 2.0).unwrap();
        assert!((w - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn errors() {
        assert!(wasserstein_p(&m1(&[0.0]), &m1(&[0.0, 1.0]), 2.0).is_err());
        assert!(wasserstein_p(&m1(&[0.0]), &m1(&[1.0]), 0.5).is_err());
        let big = m1(&vec![0.0; EXACT_ATOM_CAP + 1]);
        assert!(wasserstein_p(&big, &big, 1.0).is_err());
        assert!(EmpiricalMeasure::new(2, vec![0.0; 3]).is_err());
    }

    #[test]
    fn assignment_known_matrix() {
        #[rustfmt::skip]
        let cost = [
            4.0, 1.0, 3.0,
            2.0, 0.0, 5.0,
            3.0, 2.0, 2.0,
        ];
        let m = assignment(&cost, 3);
        let total: f64 = m.iter().enumerate().map(|(i, &j)| cost[i * 3 + j]).sum();
        assert_eq!(total, 5.0);
    }

    #[test]
    fn max_size_runs() {
        let n = EXACT_ATOM_CAP;
        let a: Vec<f64> = (0..2 * n).map(|k| (k as f64 * 0.37).sin()).collect();
        let b: Vec<f64> = (0..2 * n).map(|k| (k as f64 * 0.91).cos()).collect();
        let w = wasserstein_p(
            &EmpiricalMeasure::new(2, a).unwrap(),
            &EmpiricalMeasure::new(2, b).unwrap(),
            2.0,
        )
        .unwrap();
        assert!(w.is_finite() && w > 0.0);
    }
}
