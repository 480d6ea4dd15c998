use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::symmetric::set::next_permutation;

/// Largest `L` for which all `L!` permutations are enumerated.
pub const MAX_ENUMERATED: usize = 8;

/// All permutations of `0..l` in lexicographic order; index 0 is the
/// identity.
pub fn permutation_table(l: usize) -> Result<Vec<Vec<usize>>> {
    if l > MAX_ENUMERATED {
        return Err(Error::TooManyPermutations { l, max: MAX_ENUMERATED });
    }
    let mut p: Vec<usize> = (0..l).collect();
    let mut table = vec![p.clone()];
    while next_permutation(&mut p) {
        table.push(p.clone());
    }
    Ok(table)
}

/// Lexicographic rank of a permutation of `0..n`.
pub fn permutation_rank(p: &[usize]) -> usize {
    let n = p.len();
    let mut rank = 0;
    let mut fact = 1;
    for i in (0..n).rev() {
        let smaller_after = p[i + 1..].iter().filter(|&&x| x < p[i]).count();
        rank += smaller_after * fact;
        fact *= n - i;
    }
    rank
}

/// How the anonymizing permutation is drawn at each step. Probability
/// vectors are indexed by [`permutation_table`] position.
#[derive(Clone, Debug, PartialEq)]
pub enum PermutationModel {
    UniformIid,
    CategoricalIid { pi: Vec<f64> },
    /// Chain on permutation indices with transition matrix `I + mu Q`.
    Markov { pi0: Vec<f64>, generator: DMatrix<f64>, mu: f64 },
}

pub(crate) fn check_distribution(p: &[f64], n: usize, what: &str) -> Result<()> {
    if p.len() != n {
        return Err(Error::InvalidModel(format!("{what} has length {}, expected {n}", p.len())));
    }
    if p.iter().any(|&x| !(x >= 0.0)) {
        return Err(Error::InvalidModel(format!("{what} has a negative entry")));
    }
    let total: f64 = p.iter().sum();
    if (total - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidModel(format!("{what} sums to {total}")));
    }
    Ok(())
}

/// Checks a generator and rate; returns the transition matrix `I + mu Q`.
pub(crate) fn transition_matrix(q: &DMatrix<f64>, mu: f64) -> Result<DMatrix<f64>> {
    let n = q.nrows();
    if q.ncols() != n {
        return Err(Error::InvalidModel("generator must be square".into()));
    }
    for i in 0..n {
        let row_sum: f64 = q.row(i).sum();
        if row_sum.abs() > 1e-12 {
            return Err(Error::InvalidModel(format!("generator row {i} sums to {row_sum}")));
        }
        for j in 0..n {
            if i != j && q[(i, j)] < 0.0 {
                return Err(Error::InvalidModel("negative off-diagonal rate".into()));
            }
        }
    }
    let max_rate = (0..n).map(|i| q[(i, i)].abs()).fold(0.0, f64::max);
    if !(mu >= 0.0) || mu * max_rate > 1.0 {
        return Err(Error::InvalidModel(format!("rate {mu} makes I + mu Q non-stochastic")));
    }
    Ok(DMatrix::identity(n, n) + q * mu)
}

pub(crate) fn cumulative(p: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut acc = 0.0;
    p.map(|x| {
        acc += x;
        acc
    })
    .collect()
}

pub(crate) fn draw<R: Rng + ?Sized>(cum: &[f64], rng: &mut R) -> usize {
    let u = rng.random::<f64>() * cum[cum.len() - 1];
    cum.partition_point(|&c| c <= u).min(cum.len() - 1)
}

impl PermutationModel {
    pub fn validate(&self, l: usize) -> Result<()> {
        match self {
            PermutationModel::UniformIid => Ok(()),
            PermutationModel::CategoricalIid { pi } => {
                check_distribution(pi, permutation_table(l)?.len(), "permutation prior")
            }
            PermutationModel::Markov { pi0, generator, mu } => {
                let x = permutation_table(l)?.len();
                check_distribution(pi0, x, "initial permutation distribution")?;
                if generator.nrows() != x {
                    return Err(Error::InvalidModel(format!("generator must be {x}x{x}")));
                }
                transition_matrix(generator, *mu).map(|_| ())
            }
        }
    }

    /// Prior over permutation indices at a single step, when the model is
    /// iid.
    pub fn iid_prior(&self, l: usize) -> Option<Vec<f64>> {
        match self {
            PermutationModel::UniformIid => {
                let x = permutation_table(l).ok()?.len();
                Some(vec![1.0 / x as f64; x])
            }
            PermutationModel::CategoricalIid { pi } => Some(pi.clone()),
            PermutationModel::Markov { .. } => None,
        }
    }

    pub(crate) fn sampler(&self, l: usize) -> Result<PermSampler> {
        self.validate(l)?;
        Ok(match self {
            PermutationModel::UniformIid => PermSampler::Uniform,
            PermutationModel::CategoricalIid { pi } => PermSampler::Categorical {
                table: permutation_table(l)?,
                cum: cumulative(pi.iter().copied()),
            },
            PermutationModel::Markov { pi0, generator, mu } => {
                let p = transition_matrix(generator, *mu)?;
                PermSampler::Markov {
                    table: permutation_table(l)?,
                    init: cumulative(pi0.iter().copied()),
                    rows: (0..p.nrows()).map(|i| cumulative(p.row(i).iter().copied())).collect(),
                    state: None,
                }
            }
        })
    }
}

pub(crate) enum PermSampler {
    Uniform,
    Categorical { table: Vec<Vec<usize>>, cum: Vec<f64> },
    Markov { table: Vec<Vec<usize>>, init: Vec<f64>, rows: Vec<Vec<f64>>, state: Option<usize> },
}

impl PermSampler {
    /// Writes the next permutation into `out`.
    pub(crate) fn next<R: Rng + ?Sized>(&mut self, out: &mut [usize], rng: &mut R) {
        match self {
            PermSampler::Uniform => {
                for (i, x) in out.iter_mut().enumerate() {
                    *x = i;
                }
                out.shuffle(rng);
            }
            PermSampler::Categorical { table, cum } => {
                out.copy_from_slice(&table[draw(cum, rng)]);
            }
            PermSampler::Markov { table, init, rows, state } => {
                let s = match *state {
                    None => draw(init, rng),
                    Some(prev) => draw(&rows[prev], rng),
                };
                *state = Some(s);
                out.copy_from_slice(&table[s]);
            }
        }
    }
}
