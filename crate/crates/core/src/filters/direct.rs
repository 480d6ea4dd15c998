use crate::error::{Error, Result};
use crate::sim::ObservationRecord;
use crate::symmetric::{transform_into, ParameterSet};

use super::{check_record, check_state, Estimate, Filter, FilterConfig, Mode};

/// Stochastic gradient descent on
/// `sum_l (z_l - psi^l e_l(theta))^2` directly in the parameters. The
/// objective is not convex in `theta` and the recursion can stall at
/// spurious stationary points.
pub struct DirectSgd {
    eps: f64,
    theta: Vec<f64>,
    k: usize,
    z: Vec<Vec<f64>>,
    model: Vec<f64>,
    others: Vec<f64>,
    weighted: Vec<f64>,
    grad: Vec<f64>,
}

/// `e_0..e_n` of `values` with entry `skip` left out (all entries when
/// `skip` is out of range).
fn elementary_without(values: &[f64], skip: usize, out: &mut Vec<f64>) {
    let n = values.len();
    out.clear();
    out.resize(n + 1, 0.0);
    out[0] = 1.0;
    let mut count = 0;
    for (i, &v) in values.iter().enumerate() {
        if i == skip {
            continue;
        }
        count += 1;
        for j in (1..=count).rev() {
            out[j] += out[j - 1] * v;
        }
    }
}

impl DirectSgd {
    pub fn new(config: &FilterConfig, l: usize, d: usize) -> Result<Self> {
        if d != 1 {
            return Err(Error::DimensionMismatch("direct-sgd needs D = 1".into()));
        }
        let theta = if let Some(t) = config.init_theta(l, 1)? {
            t.as_slice().to_vec()
        } else if let Some(c) = config.init_coefficients(l)? {
            c.to_vec()
        } else {
            vec![0.0; l]
        };
        Ok(Self {
            eps: config.eps,
            theta,
            k: 0,
            z: Vec::new(),
            model: Vec::new(),
            others: Vec::new(),
            weighted: vec![0.0; l],
            grad: vec![0.0; l],
        })
    }

    /// Parameters in their internal (unsorted) slots.
    pub fn theta(&self) -> &[f64] {
        &self.theta
    }
}

impl Filter for DirectSgd {
    fn mode(&self) -> Mode {
        Mode::DirectSgd
    }

    fn step(&mut self, record: &ObservationRecord) -> Result<()> {
        let l = self.theta.len();
        check_record(record, l, 1)?;
        let psi = record.psi[(0, 0)];
        transform_into(&record.y, &mut self.z);
        elementary_without(&self.theta, usize::MAX, &mut self.model);
        let mut p = psi;
        for j in 0..l {
            self.weighted[j] = (self.z[j][0] - p * self.model[j + 1]) * p;
            p *= psi;
        }
        for j in 0..l {
            elementary_without(&self.theta, j, &mut self.others);
            let acc: f64 = self.weighted.iter().zip(&self.others).map(|(w, e)| w * e).sum();
            self.grad[j] = 2.0 * acc;
        }
        for (t, g) in self.theta.iter_mut().zip(&self.grad) {
            *t += self.eps * g;
        }
        self.k += 1;
        check_state(&self.theta, self.k)
    }

    fn steps(&self) -> usize {
        self.k
    }

    fn coefficients(&self) -> Vec<f64> {
        self.theta.clone()
    }

    fn estimate(&mut self) -> Result<Estimate> {
        Ok(Estimate::plain(ParameterSet::from_scalars(&self.theta)?))
    }
}
