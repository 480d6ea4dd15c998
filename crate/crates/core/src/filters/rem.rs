use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::sim::{permutation_table, NoiseModel, ObservationRecord};
use crate::symmetric::ParameterSet;

use super::{check_record, check_state, Estimate, Filter, FilterConfig, Mode};

/// Largest `L` handled by recursive EM.
pub const MAX_SYSTEMS: usize = 6;

/// Recursive EM over the permutation mixture. Each step weighs every
/// permutation by its posterior under the assumed noise model and takes a
/// stochastic gradient step on the expected log-likelihood.
pub struct Rem {
    eps: f64,
    theta: DMatrix<f64>,
    assumed: NoiseModel,
    table: Vec<Vec<usize>>,
    log_prior: Vec<f64>,
    weights: Vec<f64>,
    k: usize,
}

impl Rem {
    pub fn new(config: &FilterConfig, l: usize, d: usize) -> Result<Self> {
        if l > MAX_SYSTEMS {
            return Err(Error::TooManyPermutations { l, max: MAX_SYSTEMS });
        }
        config.rem.assumed.validate()?;
        config.rem.assumed.score(1.0)?;
        let table = permutation_table(l)?;
        let x = table.len();
        let prior = config.rem.prior.clone().unwrap_or_else(|| vec![1.0 / x as f64; x]);
        if prior.len() != x || (prior.iter().sum::<f64>() - 1.0).abs() > 1e-12 || prior.iter().any(|&p| p < 0.0) {
            return Err(Error::InvalidModel(format!("prior must be a distribution over {x} permutations")));
        }
        let theta = if let Some(t) = config.init_theta(l, d)? {
            t.clone()
        } else if let Some(c) = config.init_coefficients(l * d)? {
            DMatrix::from_row_slice(l, d, c)
        } else {
            DMatrix::zeros(l, d)
        };
        Ok(Self {
            eps: config.eps,
            theta,
            assumed: config.rem.assumed.clone(),
            table,
            log_prior: prior.iter().map(|p| p.ln()).collect(),
            weights: vec![1.0 / x as f64; x],
            k: 0,
        })
    }

    /// Posterior over permutations computed in the latest step.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn ordered(&self) -> &DMatrix<f64> {
        &self.theta
    }
}

impl Filter for Rem {
    fn mode(&self) -> Mode {
        Mode::Rem
    }

    fn step(&mut self, record: &ObservationRecord) -> Result<()> {
        let (l, d) = self.theta.shape();
        check_record(record, l, d)?;
        let psi = &record.psi;
        let pred = psi * self.theta.transpose();
        // loglik[(row, s)]: observation row explained by system s
        let mut loglik = DMatrix::zeros(l, l);
        let mut grads: Vec<Vec<nalgebra::DVector<f64>>> = Vec::with_capacity(l);
        for (row, y) in record.y.iter().enumerate() {
            let mut per_system = Vec::with_capacity(l);
            for s in 0..l {
                let mut ll = 0.0;
                let mut score = nalgebra::DVector::zeros(d);
                for r in 0..d {
                    let res = y[r] - pred[(r, s)];
                    ll += self.assumed.log_density(res);
                    score[r] = self.assumed.score(res)?;
                }
                loglik[(row, s)] = ll;
                per_system.push(psi.transpose() * score);
            }
            grads.push(per_system);
        }
        let logw: Vec<f64> = self
            .table
            .iter()
            .zip(&self.log_prior)
            .map(|(perm, lp)| lp + perm.iter().enumerate().map(|(row, &s)| loglik[(row, s)]).sum::<f64>())
            .collect();
        let max = logw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if max == f64::NEG_INFINITY {
            return Err(Error::ZeroLikelihood);
        }
        let mut total = 0.0;
        for (w, lw) in self.weights.iter_mut().zip(&logw) {
            *w = (lw - max).exp();
            total += *w;
        }
        for w in &mut self.weights {
            *w /= total;
        }
        let mut step = DMatrix::zeros(l, d);
        for (perm, &w) in self.table.iter().zip(&self.weights) {
            if w == 0.0 {
                continue;
            }
            for (row, &s) in perm.iter().enumerate() {
                for c in 0..d {
                    step[(s, c)] += w * grads[row][s][c];
                }
            }
        }
        self.theta += step * self.eps;
        self.k += 1;
        check_state(self.theta.as_slice(), self.k)
    }

    fn steps(&self) -> usize {
        self.k
    }

    fn coefficients(&self) -> Vec<f64> {
        self.theta.transpose().as_slice().to_vec()
    }

    fn estimate(&mut self) -> Result<Estimate> {
        Ok(Estimate::plain(ParameterSet::from_matrix(&self.theta)?))
    }
}
