use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::sim::ObservationRecord;
use crate::symmetric::{
    block_len, canonical_cmp, invert_vector, transform_into, CoefficientBlock, MonomialBasis,
};

use super::{check_record, check_state, Estimate, Filter, FilterConfig, Mode};

/// Records in the excitation warm-up window.
const WARMUP: usize = 200;
/// Smallest acceptable eigenvalue of the averaged regressor Gram matrix.
const EXCITATION_FLOOR: f64 = 1e-8;

/// Design matrix column stored as its nonzero entries `(row, value)`.
type SparseColumn = Vec<(usize, f64)>;

/// LMS bank on the monomial symmetric functions, one regression per degree
/// with the design matrix built from the current input.
pub struct SymVector {
    eps: f64,
    l: usize,
    d: usize,
    basis: MonomialBasis,
    eta: Vec<Vec<f64>>,
    k: usize,
    z: Vec<Vec<f64>>,
    residual: Vec<f64>,
    design_psi: Option<DMatrix<f64>>,
    design: Vec<Vec<SparseColumn>>,
    gram: Option<Vec<DMatrix<f64>>>,
    gram_pending: usize,
    weak_excitation: Option<bool>,
    last: Option<Estimate>,
}

impl SymVector {
    pub fn new(config: &FilterConfig, l: usize, d: usize) -> Result<Self> {
        let basis = MonomialBasis::new(d, l);
        let sizes: Vec<usize> = (1..=l).map(|j| basis.multisets(j).len()).collect();
        let eta = if let Some(t) = config.init_theta(l, d)? {
            let mut rows: Vec<Vec<f64>> =
                (0..l).map(|i| t.row(i).iter().copied().collect()).collect();
            rows.sort_by(|a, b| canonical_cmp(a, b));
            basis.transform(&rows)
        } else if let Some(c) = config.init_coefficients(sizes.iter().sum())? {
            let mut out = Vec::new();
            let mut at = 0;
            for &s in &sizes {
                out.push(c[at..at + s].to_vec());
                at += s;
            }
            out
        } else {
            sizes.iter().map(|&s| vec![0.0; s]).collect()
        };
        let gram = (d >= 3).then(|| sizes.iter().map(|&s| DMatrix::zeros(s, s)).collect());
        Ok(Self {
            eps: config.eps,
            l,
            d,
            basis,
            eta,
            k: 0,
            z: Vec::new(),
            residual: Vec::new(),
            design_psi: None,
            design: Vec::new(),
            gram,
            gram_pending: 0,
            weak_excitation: None,
            last: None,
        })
    }

    /// Monomial symmetric function estimates, per degree.
    pub fn eta(&self) -> &[Vec<f64>] {
        &self.eta
    }

    /// Coefficient blocks obtained by collapsing the monomial estimates.
    pub fn lambda(&self) -> Vec<CoefficientBlock> {
        self.eta
            .iter()
            .enumerate()
            .map(|(j, e)| CoefficientBlock { degree: j + 1, values: self.basis.project(j + 1, e) })
            .collect()
    }

    /// Whether the warm-up window found a near-singular regressor Gram
    /// matrix (only checked for `D >= 3`; `None` before the check).
    pub fn weak_excitation(&self) -> Option<bool> {
        self.weak_excitation
    }

    fn refresh_design(&mut self, psi: &DMatrix<f64>) {
        if self.design_psi.as_ref() == Some(psi) {
            return;
        }
        self.flush_gram();
        self.design = self
            .basis
            .design_columns(psi)
            .into_iter()
            .map(|cols| {
                cols.into_iter()
                    .map(|c| c.into_iter().enumerate().filter(|&(_, v)| v != 0.0).collect())
                    .collect()
            })
            .collect();
        self.design_psi = Some(psi.clone());
    }

    /// Adds the pending copies of the current design to the Gram sums.
    fn flush_gram(&mut self) {
        let Some(gram) = self.gram.as_mut() else { return };
        if self.gram_pending == 0 {
            return;
        }
        let w = self.gram_pending as f64;
        for (j, (g, cols)) in gram.iter_mut().zip(&self.design).enumerate() {
            let rows = block_len(j + 1, self.d);
            let mut dense = DMatrix::zeros(rows, cols.len());
            for (c, col) in cols.iter().enumerate() {
                for &(r, v) in col {
                    dense[(r, c)] = v;
                }
            }
            *g += dense.transpose() * &dense * w;
        }
        self.gram_pending = 0;
    }

    fn finish_excitation_check(&mut self) {
        self.flush_gram();
        if let Some(gram) = self.gram.take() {
            let n = WARMUP as f64;
            let weak = gram.into_iter().any(|g| {
                let size = g.nrows();
                let shifted = g / n - DMatrix::identity(size, size) * EXCITATION_FLOOR;
                shifted.cholesky().is_none()
            });
            self.weak_excitation = Some(weak);
        }
    }
}

impl Filter for SymVector {
    fn mode(&self) -> Mode {
        Mode::SymVector
    }

    fn step(&mut self, record: &ObservationRecord) -> Result<()> {
        check_record(record, self.l, self.d)?;
        transform_into(&record.y, &mut self.z);
        self.refresh_design(&record.psi);
        for ((eta, cols), z) in self.eta.iter_mut().zip(&self.design).zip(&self.z) {
            self.residual.clear();
            self.residual.extend_from_slice(z);
            for (col, &e) in cols.iter().zip(eta.iter()) {
                for &(r, v) in col {
                    self.residual[r] -= v * e;
                }
            }
            for (col, e) in cols.iter().zip(eta.iter_mut()) {
                let mut g = 0.0;
                for &(r, v) in col {
                    g += v * self.residual[r];
                }
                *e += self.eps * g;
            }
        }
        self.k += 1;
        if self.gram.is_some() {
            self.gram_pending += 1;
            if self.k == WARMUP {
                self.finish_excitation_check();
            }
        }
        for e in &self.eta {
            check_state(e, self.k)?;
        }
        Ok(())
    }

    fn steps(&self) -> usize {
        self.k
    }

    fn coefficients(&self) -> Vec<f64> {
        self.eta.iter().flatten().copied().collect()
    }

    fn estimate(&mut self) -> Result<Estimate> {
        match invert_vector(&self.lambda()) {
            Ok(inv) => {
                let est = Estimate {
                    complex: inv.any_complex(),
                    set: inv.set,
                    ill_conditioned: false,
                    conditions: inv.conditions,
                };
                self.last = Some(est.clone());
                Ok(est)
            }
            Err(e @ Error::IllConditioned { .. }) => match &self.last {
                Some(prev) => Ok(Estimate { ill_conditioned: true, ..prev.clone() }),
                None => Err(e),
            },
            Err(e) => Err(e),
        }
    }
}
