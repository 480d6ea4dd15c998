use std::cmp::Ordering;
use std::fmt;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Lexicographic total order on vectors: first component, then the next, ...
pub fn canonical_cmp(a: &[f64], b: &[f64]) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.total_cmp(y) {
            Ordering::Equal => continue,
            o => return o,
        }
    }
    a.len().cmp(&b.len())
}

/// An unordered collection of `L` real vectors of length `D`.
///
/// Members are stored in canonical order (ascending first component, ties
/// broken by later components), so derived equality is set equality.
#[derive(Clone, Debug, PartialEq)]
pub struct ParameterSet {
    dim: usize,
    rows: Vec<Vec<f64>>,
}

impl ParameterSet {
    pub fn new(mut rows: Vec<Vec<f64>>) -> Result<Self> {
        let dim = rows.first().ok_or(Error::Empty)?.len();
        if dim == 0 {
            return Err(Error::DimensionMismatch("members must have length >= 1".into()));
        }
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::DimensionMismatch("members differ in length".into()));
        }
        if rows.iter().flatten().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("parameter set"));
        }
        rows.sort_by(|a, b| canonical_cmp(a, b));
        Ok(Self { dim, rows })
    }

    /// A set of scalars (`D = 1`).
    pub fn from_scalars(values: &[f64]) -> Result<Self> {
        Self::new(values.iter().map(|&v| vec![v]).collect())
    }

    /// Rows of an `L x D` matrix taken as set members.
    pub fn from_matrix(m: &DMatrix<f64>) -> Result<Self> {
        Self::new((0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect())
    }

    /// Number of members `L`.
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Member dimension `D`.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.rows[i]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r[j]).collect()
    }

    /// Canonically ordered members as an `L x D` matrix.
    pub fn to_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.len(), self.dim, |i, j| self.rows[i][j])
    }

    /// Row-major flattening in canonical order.
    pub fn flat(&self) -> Vec<f64> {
        self.rows.iter().flatten().copied().collect()
    }

    /// Largest entrywise deviation after canonical ordering; infinite when
    /// shapes differ.
    pub fn max_abs_diff(&self, other: &ParameterSet) -> f64 {
        if self.len() != other.len() || self.dim != other.dim {
            return f64::INFINITY;
        }
        self.rows
            .iter()
            .flatten()
            .zip(other.rows.iter().flatten())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Minimum over member matchings of the largest member distance
    /// (Euclidean). Exhaustive over permutations, so intended for small `L`.
    pub fn set_distance(&self, other: &ParameterSet) -> f64 {
        if self.len() != other.len() || self.dim != other.dim {
            return f64::INFINITY;
        }
        let l = self.len();
        let dist = |i: usize, j: usize| -> f64 {
            self.rows[i]
                .iter()
                .zip(&other.rows[j])
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt()
        };
        let mut perm: Vec<usize> = (0..l).collect();
        let mut best = f64::INFINITY;
        loop {
            let d = (0..l).map(|i| dist(i, perm[i])).fold(0.0, f64::max);
            best = best.min(d);
            if !next_permutation(&mut perm) {
                break;
            }
        }
        best
    }
}

impl fmt::Display for ParameterSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, r) in self.rows.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            if self.dim == 1 {
                write!(f, "{:.4}", r[0])?;
            } else {
                let parts: Vec<String> = r.iter().map(|x| format!("{x:.4}")).collect();
                write!(f, "[{}]", parts.join(", "))?;
            }
        }
        write!(f, "}}")
    }
}

/// Advance to the next permutation in lexicographic order. Returns false
/// after the last one.
pub(crate) fn next_permutation(p: &mut [usize]) -> bool {
    if p.len() < 2 {
        return false;
    }
    let mut i = p.len() - 1;
    while i > 0 && p[i - 1] >= p[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = p.len() - 1;
    while p[j] <= p[i - 1] {
        j -= 1;
    }
    p.swap(i - 1, j);
    p[i..].reverse();
    true
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equality_is_set_equality() {
        let a = ParameterSet::new(vec![vec![3.0, 4.0], vec![1.0, 2.0]]).unwrap();
        let b = ParameterSet::new(vec![vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.row(0), &[1.0, 2.0]);
    }

    #[test]
    fn ties_broken_by_later_components() {
        let a = ParameterSet::new(vec![vec![1.0, 5.0], vec![1.0, 2.0]]).unwrap();
        assert_eq!(a.row(0), &[1.0, 2.0]);
    }

    #[test]
    fn rejects_bad_input() {
        assert_eq!(ParameterSet::new(vec![]), Err(Error::Empty));
        assert!(ParameterSet::new(vec![vec![1.0], vec![1.0, 2.0]]).is_err());
        assert!(ParameterSet::from_scalars(&[f64::NAN]).is_err());
    }

    #[test]
    fn set_distance_matches_best_pairing() {
        let a = ParameterSet::new(vec![vec![-2.0, 5.0], vec![4.0, 6.0]]).unwrap();
        let b = ParameterSet::new(vec![vec![-2.0, 6.0], vec![4.0, 5.0]]).unwrap();
        assert!((a.set_distance(&b) - 1.0).abs() < 1e-15);
        assert_eq!(a.set_distance(&a), 0.0);
    }

    #[test]
    fn permutations_enumerate_in_order() {
        let mut p = vec![0, 1, 2];
        let mut seen = vec![p.clone()];
        while next_permutation(&mut p) {
            seen.push(p.clone());
        }
        assert_eq!(seen.len(), 6);
        assert_eq!(seen[1], vec![0, 2, 1]);
        assert_eq!(seen[5], vec![2, 1, 0]);
    }
}
