use crate::error::{Error, Result};
use crate::sim::ObservationRecord;
use crate::symmetric::{canonical_cmp, elementary_symmetric, invert_scalar, MonomialBasis, MonomialIndex, MonomialBlock, ParameterSet};

use super::{check_record, check_state, Estimate, Filter, FilterConfig, Mode};

/// Componentwise baseline: for each output component `j`, an LMS bank
/// regresses the scalar transform of `{y_1j, ..., y_Lj}` on the monomial
/// symmetric functions through the regressor `prod_{p in mu} psi_jp`. Only
/// the pure entries `e_l(theta_{.j})` are read back, each column is inverted
/// on its own and the columns are paired by rank. The pairing across columns
/// is lost, which produces ghost sets.
pub struct Naive {
    eps: f64,
    l: usize,
    d: usize,
    basis: MonomialBasis,
    /// `eta[j][degree - 1]` for component `j`.
    eta: Vec<Vec<Vec<f64>>>,
    regressor: Vec<Vec<f64>>,
    column: Vec<f64>,
    k: usize,
}

impl Naive {
    pub fn new(config: &FilterConfig, l: usize, d: usize) -> Result<Self> {
        let basis = MonomialBasis::new(d, l);
        let sizes: Vec<usize> = (1..=l).map(|j| basis.multisets(j).len()).collect();
        let per: usize = sizes.iter().sum();
        let eta = if let Some(t) = config.init_theta(l, d)? {
            let mut rows: Vec<Vec<f64>> =
                (0..l).map(|i| t.row(i).iter().copied().collect()).collect();
            rows.sort_by(|a, b| canonical_cmp(a, b));
            vec![basis.transform(&rows); d]
        } else if let Some(c) = config.init_coefficients(per * d)? {
            (0..d)
                .map(|j| {
                    let mut at = j * per;
                    sizes
                        .iter()
                        .map(|&s| {
                            let v = c[at..at + s].to_vec();
                            at += s;
                            v
                        })
                        .collect()
                })
                .collect()
        } else {
            vec![sizes.iter().map(|&s| vec![0.0; s]).collect(); d]
        };
        let regressor = (0..=l).map(|j| vec![0.0; basis.multisets(j).len()]).collect();
        Ok(Self { eps: config.eps, l, d, basis, eta, regressor, column: vec![0.0; l], k: 0 })
    }

    /// Pure-entry coefficients `e_1..e_L` of component `j`.
    pub fn column_coefficients(&self, j: usize) -> Vec<f64> {
        (1..=self.l)
            .map(|deg| {
                let block = MonomialBlock {
                    degree: deg,
                    dim: self.d,
                    values: self.eta[j][deg - 1].clone(),
                };
                block.get(&MonomialIndex::new(vec![j; deg])).expect("pure index")
            })
            .collect()
    }
}

impl Filter for Naive {
    fn mode(&self) -> Mode {
        Mode::Naive
    }

    fn step(&mut self, record: &ObservationRecord) -> Result<()> {
        check_record(record, self.l, self.d)?;
        for j in 0..self.d {
            for (c, y) in self.column.iter_mut().zip(&record.y) {
                *c = y[j];
            }
            let z = elementary_symmetric(&self.column);
            self.regressor[0][0] = 1.0;
            for deg in 1..=self.l {
                let (lower, upper) = self.regressor.split_at_mut(deg);
                for (a, &(parent, p)) in upper[0].iter_mut().zip(self.basis.parents(deg)) {
                    *a = lower[deg - 1][parent] * record.psi[(j, p)];
                }
            }
            for deg in 1..=self.l {
                let a = &self.regressor[deg];
                let eta = &mut self.eta[j][deg - 1];
                let pred: f64 = a.iter().zip(eta.iter()).map(|(x, e)| x * e).sum();
                let r = z[deg - 1] - pred;
                for (e, &x) in eta.iter_mut().zip(a) {
                    *e += self.eps * (x * r);
                }
            }
        }
        self.k += 1;
        for comp in &self.eta {
            for block in comp {
                check_state(block, self.k)?;
            }
        }
        Ok(())
    }

    fn steps(&self) -> usize {
        self.k
    }

    fn coefficients(&self) -> Vec<f64> {
        self.eta.iter().flatten().flatten().copied().collect()
    }

    fn estimate(&mut self) -> Result<Estimate> {
        let mut columns = Vec::with_capacity(self.d);
        let mut complex = false;
        for j in 0..self.d {
            let inv = invert_scalar(&self.column_coefficients(j))?;
            complex |= inv.any_complex();
            columns.push(inv.set.column(0));
        }
        let rows: Vec<Vec<f64>> =
            (0..self.l).map(|i| columns.iter().map(|c| c[i]).collect()).collect();
        if rows.iter().flatten().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("naive estimate"));
        }
        Ok(Estimate { complex, ..Estimate::plain(ParameterSet::new(rows)?) })
    }
}
