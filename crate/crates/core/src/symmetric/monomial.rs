use std::collections::HashMap;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

use super::set::ParameterSet;
use super::transform::{block_len, convolve, CoefficientBlock};

/// A multiset of column indices (0-based), stored nondecreasing.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MonomialIndex(Vec<usize>);

impl MonomialIndex {
    pub fn new(mut mu: Vec<usize>) -> Self {
        mu.sort_unstable();
        Self(mu)
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn degree(&self) -> usize {
        self.0.len()
    }

    /// Sum of the column indices, i.e. the power of `t` of the product of
    /// the corresponding input columns.
    pub fn t_power(&self) -> usize {
        self.0.iter().sum()
    }
}

/// Number of multisets of size `l` over `d` symbols, `C(d+l-1, l)`.
pub fn multiset_count(d: usize, l: usize) -> usize {
    let mut c: u128 = 1;
    for i in 0..l as u128 {
        c = c * (d as u128 + i) / (i + 1);
    }
    c as usize
}

/// Position of `mu` in the lexicographic enumeration of size-`mu.len()`
/// multisets over `0..d`.
fn multiset_rank(d: usize, mu: &[usize]) -> usize {
    let k = mu.len();
    let mut rank = 0;
    let mut lo = 0;
    for (i, &m) in mu.iter().enumerate() {
        for v in lo..m {
            rank += multiset_count(d - v, k - i - 1);
        }
        lo = m;
    }
    rank
}

/// Monomial symmetric functions of one degree: one value per multiset of
/// column indices, in lexicographic multiset order.
#[derive(Clone, Debug, PartialEq)]
pub struct MonomialBlock {
    pub degree: usize,
    pub dim: usize,
    pub values: Vec<f64>,
}

impl MonomialBlock {
    pub fn zeros(degree: usize, dim: usize) -> Self {
        Self { degree, dim, values: vec![0.0; multiset_count(dim, degree)] }
    }

    /// Entry for a multiset; `None` if its size or indices do not fit.
    pub fn get(&self, mu: &MonomialIndex) -> Option<f64> {
        let s = mu.as_slice();
        if s.len() != self.degree || s.iter().any(|&p| p >= self.dim) {
            return None;
        }
        self.values.get(multiset_rank(self.dim, s)).copied()
    }
}

/// Enumeration of all multisets up to a maximum degree, with the index maps
/// needed to grow a multiset by one element.
#[derive(Clone, Debug)]
pub struct MonomialBasis {
    dim: usize,
    max_degree: usize,
    lists: Vec<Vec<Vec<usize>>>,
    parents: Vec<Vec<(usize, usize)>>,
    grow: Vec<Vec<usize>>,
    powers: Vec<Vec<usize>>,
}

impl MonomialBasis {
    pub fn new(dim: usize, max_degree: usize) -> Self {
        let mut lists: Vec<Vec<Vec<usize>>> = vec![vec![Vec::new()]];
        let mut parents = vec![vec![(0, 0)]];
        for j in 1..=max_degree {
            let mut list = Vec::with_capacity(multiset_count(dim, j));
            let mut par = Vec::with_capacity(multiset_count(dim, j));
            for (pi, prev) in lists[j - 1].iter().enumerate() {
                let start = prev.last().copied().unwrap_or(0);
                for p in start..dim {
                    let mut mu = prev.clone();
                    mu.push(p);
                    list.push(mu);
                    par.push((pi, p));
                }
            }
            lists.push(list);
            parents.push(par);
        }
        let mut grow = Vec::with_capacity(max_degree);
        for j in 0..max_degree {
            let index: HashMap<&[usize], usize> =
                lists[j + 1].iter().enumerate().map(|(i, m)| (m.as_slice(), i)).collect();
            let mut g = vec![0; lists[j].len() * dim];
            for (a, mu) in lists[j].iter().enumerate() {
                for p in 0..dim {
                    let mut bigger = mu.clone();
                    let pos = bigger.partition_point(|&x| x <= p);
                    bigger.insert(pos, p);
                    g[a * dim + p] = index[bigger.as_slice()];
                }
            }
            grow.push(g);
        }
        let powers = lists.iter().map(|l| l.iter().map(|m| m.iter().sum()).collect()).collect();
        Self { dim, max_degree, lists, parents, grow, powers }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn max_degree(&self) -> usize {
        self.max_degree
    }

    /// Multisets of size `l`, in storage order.
    pub fn multisets(&self, l: usize) -> &[Vec<usize>] {
        &self.lists[l]
    }

    /// For each multiset of size `l`: its prefix of size `l-1` and the
    /// appended (largest) element.
    pub fn parents(&self, l: usize) -> &[(usize, usize)] {
        &self.parents[l]
    }

    /// Monomial symmetric functions of degrees `1..=max_degree` of the
    /// member rows.
    pub fn transform<T: AsRef<[f64]>>(&self, rows: &[T]) -> Vec<Vec<f64>> {
        let top = self.max_degree.min(rows.len());
        let mut blocks: Vec<Vec<f64>> =
            (0..=self.max_degree).map(|j| vec![0.0; self.lists[j].len()]).collect();
        blocks[0][0] = 1.0;
        for (count, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            for j in (1..=(count + 1).min(top)).rev() {
                let (lower, upper) = blocks.split_at_mut(j);
                let prev = &lower[j - 1];
                let target = &mut upper[0];
                let g = &self.grow[j - 1];
                for (a, &pv) in prev.iter().enumerate() {
                    for (p, &x) in row.iter().enumerate() {
                        target[g[a * self.dim + p]] += pv * x;
                    }
                }
            }
        }
        blocks.remove(0);
        blocks
    }

    /// Sums entries of a degree-`l` block that share a power of `t`.
    pub fn project(&self, l: usize, values: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; block_len(l, self.dim)];
        for (v, &m) in values.iter().zip(&self.powers[l]) {
            out[m] += v;
        }
        out
    }

    /// Power of `t` carried by each multiset of size `l`.
    pub fn t_powers(&self, l: usize) -> &[usize] {
        &self.powers[l]
    }

    /// Design matrices of degrees `1..=max_degree` for input `psi`, as
    /// column lists: column `mu` of degree `l` is the convolution of the
    /// input columns named by `mu`.
    pub fn design_columns(&self, psi: &DMatrix<f64>) -> Vec<Vec<Vec<f64>>> {
        let cols: Vec<Vec<f64>> =
            (0..self.dim).map(|p| psi.column(p).iter().copied().collect()).collect();
        let mut out: Vec<Vec<Vec<f64>>> = vec![vec![vec![1.0]]];
        for j in 1..=self.max_degree {
            let level: Vec<Vec<f64>> = self.parents[j]
                .iter()
                .map(|&(pa, p)| convolve(&out[j - 1][pa], &cols[p]))
                .collect();
            out.push(level);
        }
        out.remove(0);
        out
    }
}

/// Monomial symmetric functions of degrees `1..=L` of a parameter set.
pub fn monomial_transform(theta: &ParameterSet) -> Vec<MonomialBlock> {
    let basis = MonomialBasis::new(theta.dim(), theta.len());
    basis
        .transform(theta.rows())
        .into_iter()
        .enumerate()
        .map(|(j, values)| MonomialBlock { degree: j + 1, dim: theta.dim(), values })
        .collect()
}

/// Collapses a monomial block onto powers of `t`, giving the coefficient
/// block of the same degree.
pub fn degree_projection(eta: &MonomialBlock) -> CoefficientBlock {
    let basis = MonomialBasis::new(eta.dim, eta.degree);
    CoefficientBlock { degree: eta.degree, values: basis.project(eta.degree, &eta.values) }
}

fn check_square(psi: &DMatrix<f64>) -> Result<()> {
    if psi.nrows() != psi.ncols() || psi.nrows() == 0 {
        return Err(Error::DimensionMismatch(format!(
            "input matrix must be square, got {}x{}",
            psi.nrows(),
            psi.ncols()
        )));
    }
    if psi.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("input matrix"));
    }
    Ok(())
}

/// Regression matrix of degree `l`: maps the degree-`l` monomial symmetric
/// functions of `theta` to the degree-`l` block of the transform of
/// `{psi * theta_i}`.
pub fn design_matrix(psi: &DMatrix<f64>, l: usize) -> Result<DMatrix<f64>> {
    check_square(psi)?;
    if l == 0 {
        return Err(Error::DegreeOutOfRange { degree: l, max: usize::MAX });
    }
    let d = psi.nrows();
    let basis = MonomialBasis::new(d, l);
    let cols = basis.design_columns(psi).swap_remove(l - 1);
    Ok(DMatrix::from_fn(block_len(l, d), cols.len(), |r, c| cols[c][r]))
}

/// Regression matrices for degrees `1..=max_degree`.
pub fn design_matrices(psi: &DMatrix<f64>, max_degree: usize) -> Result<Vec<DMatrix<f64>>> {
    check_square(psi)?;
    let d = psi.nrows();
    let basis = MonomialBasis::new(d, max_degree);
    Ok(basis
        .design_columns(psi)
        .into_iter()
        .enumerate()
        .map(|(j, cols)| DMatrix::from_fn(block_len(j + 1, d), cols.len(), |r, c| cols[c][r]))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symmetric::transform::elementary_convolution;

    fn bracket(theta: &[Vec<f64>], l: usize, mu: &[usize]) -> f64 {
        // Sum over ordered l-tuples of distinct members and all distinct
        // orderings of mu, divided out by subset ordering.
        let n = theta.len();
        let mut orderings: Vec<Vec<usize>> = Vec::new();
        let mut p = mu.to_vec();
        p.sort_unstable();
        loop {
            orderings.push(p.clone());
            if !crate::symmetric::set::next_permutation(&mut p) {
                break;
            }
        }
        let mut total = 0.0;
        for mask in 0u32..(1 << n) {
            if mask.count_ones() as usize != l {
                continue;
            }
            let members: Vec<usize> = (0..n).filter(|i| mask & (1 << i) != 0).collect();
            for o in &orderings {
                total += members.iter().zip(o).map(|(&i, &c)| theta[i][c]).product::<f64>();
            }
        }
        total
    }

    #[test]
    fn counts_and_ranks() {
        assert_eq!(multiset_count(3, 2), 6);
        assert_eq!(multiset_count(10, 4), 715);
        assert_eq!(multiset_count(1, 5), 1);
        let basis = MonomialBasis::new(4, 3);
        for (i, mu) in basis.multisets(3).iter().enumerate() {
            assert_eq!(multiset_rank(4, mu), i);
        }
    }

    #[test]
    fn single_surviving_term() {
        let theta = ParameterSet::new(vec![
            vec![1.0, 0.0, 0.0],
            vec![1.0, 0.0, 0.0],
            vec![0.0, 1.0, 0.0],
        ])
        .unwrap();
        let eta = monomial_transform(&theta);
        assert_eq!(eta[2].get(&MonomialIndex::new(vec![0, 0, 1])), Some(1.0));
    }

    #[test]
    fn scalar_case_is_elementary_symmetric() {
        let theta = ParameterSet::from_scalars(&[1.0, 2.0, 3.0]).unwrap();
        let eta = monomial_transform(&theta);
        let vals: Vec<f64> = eta.iter().map(|b| b.values[0]).collect();
        assert_eq!(vals, vec![6.0, 11.0, 6.0]);
    }

    #[test]
    fn brackets_match_direct_sums() {
        let rows = vec![vec![0.5, -1.0, 2.0], vec![1.5, 0.3, -0.7], vec![-1.1, 0.9, 0.4]];
        let theta = ParameterSet::new(rows.clone()).unwrap();
        let eta = monomial_transform(&theta);
        let basis = MonomialBasis::new(3, 3);
        for l in 1..=3 {
            for (i, mu) in basis.multisets(l).iter().enumerate() {
                let want = bracket(&rows, l, mu);
                assert!((eta[l - 1].values[i] - want).abs() < 1e-12, "l={l} mu={mu:?}");
            }
        }
        // degree-2 pure first-column entry is the pairwise product sum
        let pairs = rows[0][0] * rows[1][0] + rows[0][0] * rows[2][0] + rows[1][0] * rows[2][0];
        assert!((eta[1].get(&MonomialIndex::new(vec![0, 0])).unwrap() - pairs).abs() < 1e-12);
    }

    #[test]
    fn projection_groups_equal_powers() {
        let mut eta = MonomialBlock::zeros(3, 3);
        let basis = MonomialBasis::new(3, 3);
        for (i, mu) in basis.multisets(3).iter().enumerate() {
            eta.values[i] = (10 * i + mu.len()) as f64;
        }
        let lam = degree_projection(&eta);
        let a = eta.get(&MonomialIndex::new(vec![0, 0, 2])).unwrap();
        let b = eta.get(&MonomialIndex::new(vec![0, 1, 1])).unwrap();
        assert_eq!(lam.values[2], a + b);
        assert_eq!(lam.values.len(), 7);
    }

    #[test]
    fn projection_is_reindexing_for_two_columns() {
        let basis = MonomialBasis::new(2, 5);
        for l in 1..=5 {
            let mut powers = basis.t_powers(l).to_vec();
            powers.sort_unstable();
            assert_eq!(powers, (0..=l).collect::<Vec<_>>());
        }
    }

    #[test]
    fn projection_of_transform_is_convolution() {
        let rows = vec![vec![0.5, -1.0, 2.0, 0.1], vec![1.5, 0.3, -0.7, 1.0], vec![-1.1, 0.9, 0.4, 2.0]];
        let theta = ParameterSet::new(rows.clone()).unwrap();
        for (l, eta) in monomial_transform(&theta).iter().enumerate() {
            let lam = degree_projection(eta).values;
            let want = elementary_convolution(&rows, l + 1).unwrap().values;
            for (a, b) in lam.iter().zip(&want) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn design_scalar_and_identity() {
        let psi = DMatrix::from_element(1, 1, 1.7);
        let a = design_matrix(&psi, 3).unwrap();
        assert_eq!(a.shape(), (1, 1));
        assert!((a[(0, 0)] - 1.7f64.powi(3)).abs() < 1e-15);

        let eye = DMatrix::<f64>::identity(3, 3);
        let basis = MonomialBasis::new(3, 2);
        let a = design_matrix(&eye, 2).unwrap();
        for (c, mu) in basis.multisets(2).iter().enumerate() {
            let col: Vec<f64> = a.column(c).iter().copied().collect();
            let mut want = vec![0.0; 5];
            want[mu.iter().sum::<usize>()] = 1.0;
            assert_eq!(col, want);
        }
    }

    #[test]
    fn design_shape_and_errors() {
        let psi = DMatrix::from_element(2, 2, 1.0);
        assert_eq!(design_matrix(&psi, 2).unwrap().shape(), (3, 3));
        assert!(design_matrix(&DMatrix::zeros(2, 3), 1).is_err());
        assert!(design_matrix(&psi, 0).is_err());
    }
}
