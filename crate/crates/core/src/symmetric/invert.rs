use nalgebra::DMatrix;

use crate::error::{Error, Result};

use super::set::{canonical_cmp, ParameterSet};
use super::transform::{block_len, transform_into, CoefficientBlock};

/// Linear solves whose condition number exceeds this are rejected.
pub const CONDITION_LIMIT: f64 = 1e10;

const IMAG_TOL: f64 = 1e-8;

/// Factors of a scalar coefficient vector, with a flag per factor telling
/// whether it came from a complex root (its real part is reported).
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarInversion {
    pub set: ParameterSet,
    pub complex: Vec<bool>,
}

impl ScalarInversion {
    pub fn any_complex(&self) -> bool {
        self.complex.iter().any(|&c| c)
    }
}

/// Recovered parameter set with the diagnostics of the recovery.
#[derive(Clone, Debug, PartialEq)]
pub struct VectorInversion {
    pub set: ParameterSet,
    /// Complex-root flags of the first-column factors, in the order of the
    /// first-column values before reassembly.
    pub complex: Vec<bool>,
    /// Condition number of the solve for each column `2..=D`.
    pub conditions: Vec<f64>,
}

impl VectorInversion {
    pub fn any_complex(&self) -> bool {
        self.complex.iter().any(|&c| c)
    }
}

/// Diagonal similarity scaling (radix 2) that evens out row and column
/// norms before the eigenvalue iteration.
fn balance(a: &mut DMatrix<f64>) {
    let n = a.nrows();
    loop {
        let mut done = true;
        for i in 0..n {
            let mut c = 0.0;
            let mut r = 0.0;
            for j in 0..n {
                if j != i {
                    c += a[(j, i)].abs();
                    r += a[(i, j)].abs();
                }
            }
            if c == 0.0 || r == 0.0 {
                continue;
            }
            let s = c + r;
            let mut f = 1.0;
            let mut g = r / 2.0;
            while c < g {
                f *= 2.0;
                c *= 4.0;
            }
            g = r * 2.0;
            while c > g {
                f /= 2.0;
                c /= 4.0;
            }
            if (c + r) / f < 0.95 * s {
                done = false;
                a.row_mut(i).scale_mut(1.0 / f);
                a.column_mut(i).scale_mut(f);
            }
        }
        if done {
            break;
        }
    }
}

/// Factors `theta` of `s^L + lambda_1 s^(L-1) + ... + lambda_L`, i.e. the
/// negated roots, from the eigenvalues of the balanced companion matrix.
pub fn invert_scalar(lambda: &[f64]) -> Result<ScalarInversion> {
    if lambda.is_empty() {
        return Err(Error::Empty);
    }
    if lambda.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("coefficients"));
    }
    // Exact zero trailing coefficients contribute exact zero factors.
    let n = lambda.iter().rposition(|&x| x != 0.0).map_or(0, |i| i + 1);
    let mut pairs: Vec<(f64, bool)> = vec![(0.0, false); lambda.len() - n];
    if n == 1 {
        pairs.push((lambda[0], false));
    } else if n > 1 {
        let mut c = DMatrix::zeros(n, n);
        for j in 0..n {
            c[(0, j)] = -lambda[j];
        }
        for i in 1..n {
            c[(i, i - 1)] = 1.0;
        }
        balance(&mut c);
        pairs.extend(
            c.complex_eigenvalues()
                .iter()
                .map(|z| (-z.re, z.im.abs() >= IMAG_TOL * (1.0 + z.re.abs()))),
        );
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let values: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    Ok(ScalarInversion {
        set: ParameterSet::from_scalars(&values)?,
        complex: pairs.iter().map(|p| p.1).collect(),
    })
}

fn condition_number(m: &DMatrix<f64>) -> f64 {
    let sv = m.singular_values();
    let max = sv.iter().copied().fold(0.0, f64::max);
    let min = sv.iter().copied().fold(f64::INFINITY, f64::min);
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Recovers the parameter set from coefficient blocks of degrees `1..=L`.
///
/// The first column comes from the scalar inversion of the leading entries.
/// Each later column `m` enters the `t^m` coefficient of every block
/// linearly once the earlier columns are known, giving one `L x L` solve
/// per column.
pub fn invert_vector(blocks: &[CoefficientBlock]) -> Result<VectorInversion> {
    let l = blocks.len();
    let d = blocks.first().ok_or(Error::Empty)?.values.len();
    if d == 0 {
        return Err(Error::DimensionMismatch("empty degree-1 block".into()));
    }
    for (j, b) in blocks.iter().enumerate() {
        if b.values.len() != block_len(j + 1, d) {
            return Err(Error::DimensionMismatch(format!(
                "block {} has length {}, expected {}",
                j + 1,
                b.values.len(),
                block_len(j + 1, d)
            )));
        }
        if b.values.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("coefficients"));
        }
    }
    let first: Vec<f64> = blocks.iter().map(|b| b.values[0]).collect();
    let scalar = invert_scalar(&first)?;
    let mut x: Vec<Vec<f64>> = scalar
        .set
        .rows()
        .iter()
        .map(|r| {
            let mut v = vec![0.0; d];
            v[0] = r[0];
            v
        })
        .collect();
    let mut conditions = Vec::with_capacity(d.saturating_sub(1));
    let mut buf = Vec::new();
    for m in 1..d {
        transform_into(&x, &mut buf);
        let known: Vec<f64> = buf.iter().map(|b| b[m]).collect();
        let mut a = DMatrix::zeros(l, l);
        for i in 0..l {
            x[i][m] = 1.0;
            transform_into(&x, &mut buf);
            x[i][m] = 0.0;
            for (r, b) in buf.iter().enumerate() {
                a[(r, i)] = b[m] - known[r];
            }
        }
        let cond = condition_number(&a);
        conditions.push(cond);
        if !(cond <= CONDITION_LIMIT) {
            return Err(Error::IllConditioned { column: m + 1, condition: cond });
        }
        let rhs = nalgebra::DVector::from_fn(l, |r, _| blocks[r].values[m] - known[r]);
        let sol = a
            .lu()
            .solve(&rhs)
            .ok_or(Error::IllConditioned { column: m + 1, condition: f64::INFINITY })?;
        for i in 0..l {
            x[i][m] = sol[i];
        }
    }
    x.sort_by(|a, b| canonical_cmp(a, b));
    Ok(VectorInversion { set: ParameterSet::new(x)?, complex: scalar.complex, conditions })
}
