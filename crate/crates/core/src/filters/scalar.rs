use crate::error::{Error, Result};
use crate::sim::ObservationRecord;
use crate::symmetric::{elementary_symmetric, invert_scalar, transform_into};

use super::{check_record, check_state, Estimate, Filter, FilterConfig, Mode};

/// Bank of `L` decoupled scalar LMS filters on the coefficients of
/// `prod_l (s + y_l)` (`D = 1`).
pub struct SymScalar {
    eps: f64,
    lambda: Vec<f64>,
    k: usize,
    z: Vec<Vec<f64>>,
    last: Option<Estimate>,
}

impl SymScalar {
    pub fn new(config: &FilterConfig, l: usize, d: usize) -> Result<Self> {
        if d != 1 {
            return Err(Error::DimensionMismatch("sym-scalar needs D = 1".into()));
        }
        let lambda = if let Some(t) = config.init_theta(l, 1)? {
            elementary_symmetric(t.as_slice())
        } else if let Some(c) = config.init_coefficients(l)? {
            c.to_vec()
        } else {
            vec![0.0; l]
        };
        Ok(Self { eps: config.eps, lambda, k: 0, z: Vec::new(), last: None })
    }

    pub fn lambda(&self) -> &[f64] {
        &self.lambda
    }

    /// One update from already transformed pseudo-observations `z`.
    pub fn update(&mut self, psi: f64, z: &[f64]) -> Result<()> {
        if z.len() != self.lambda.len() {
            return Err(Error::DimensionMismatch("pseudo-observation length".into()));
        }
        let mut p = psi;
        for (lam, &zl) in self.lambda.iter_mut().zip(z) {
            let r = zl - p * *lam;
            *lam += self.eps * (p * r);
            p *= psi;
        }
        self.k += 1;
        check_state(&self.lambda, self.k)
    }
}

impl Filter for SymScalar {
    fn mode(&self) -> Mode {
        Mode::SymScalar
    }

    fn step(&mut self, record: &ObservationRecord) -> Result<()> {
        check_record(record, self.lambda.len(), 1)?;
        transform_into(&record.y, &mut self.z);
        let z: Vec<f64> = self.z.iter().map(|b| b[0]).collect();
        self.update(record.psi[(0, 0)], &z)
    }

    fn steps(&self) -> usize {
        self.k
    }

    fn coefficients(&self) -> Vec<f64> {
        self.lambda.clone()
    }

    fn estimate(&mut self) -> Result<Estimate> {
        let inv = invert_scalar(&self.lambda)?;
        let est = Estimate {
            set: inv.set.clone(),
            complex: inv.any_complex(),
            ill_conditioned: false,
            conditions: Vec::new(),
        };
        self.last = Some(est.clone());
        Ok(est)
    }
}
