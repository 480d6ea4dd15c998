use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::sim::ObservationRecord;
use crate::symmetric::ParameterSet;

use super::{check_record, check_state, Estimate, Filter, FilterConfig, Mode};

/// Per-system LMS with oracle labels taken from the record's hidden
/// permutation. A reference point for what anonymization costs.
pub struct Classical {
    eps: f64,
    theta: DMatrix<f64>,
    k: usize,
}

impl Classical {
    pub fn new(config: &FilterConfig, l: usize, d: usize) -> Result<Self> {
        let theta = if let Some(t) = config.init_theta(l, d)? {
            t.clone()
        } else if let Some(c) = config.init_coefficients(l * d)? {
            DMatrix::from_row_slice(l, d, c)
        } else {
            DMatrix::zeros(l, d)
        };
        Ok(Self { eps: config.eps, theta, k: 0 })
    }

    /// Estimates ordered by system label.
    pub fn ordered(&self) -> &DMatrix<f64> {
        &self.theta
    }
}

impl Filter for Classical {
    fn mode(&self) -> Mode {
        Mode::Classical
    }

    fn step(&mut self, record: &ObservationRecord) -> Result<()> {
        let (l, d) = self.theta.shape();
        check_record(record, l, d)?;
        let hidden = record.hidden.as_ref().ok_or(Error::MissingLabels)?;
        let psi = &record.psi;
        for (row, &s) in hidden.perm.iter().enumerate() {
            let pred = psi * self.theta.row(s).transpose();
            let err = nalgebra::DVector::from_column_slice(&record.y[row]) - pred;
            let grad = psi.transpose() * err;
            for c in 0..d {
                self.theta[(s, c)] += self.eps * grad[c];
            }
        }
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
