use crate::error::{Error, Result};

use super::set::canonical_cmp;

/// Coefficients of one degree of the symmetric transform.
#[derive(Clone, Debug, PartialEq)]
pub struct CoefficientBlock {
    pub degree: usize,
    pub values: Vec<f64>,
}

/// Length of a degree-`l` block for members of length `d`.
pub fn block_len(l: usize, d: usize) -> usize {
    l * (d - 1) + 1
}

/// Full discrete convolution (polynomial product) of `a` and `b`.
pub fn convolve(a: &[f64], b: &[f64]) -> Vec<f64> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, &x) in a.iter().enumerate() {
        for (j, &y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

/// Writes all blocks of degrees `1..=L` into `out[0..L]`.
///
/// Members are visited in canonical order, so the result is bitwise
/// independent of the order in which `y` is supplied. One member at a time
/// is folded into every degree (highest first), so no subset is enumerated.
pub fn transform_into<T: AsRef<[f64]>>(y: &[T], out: &mut Vec<Vec<f64>>) {
    let l = y.len();
    let d = y[0].as_ref().len();
    let mut order: Vec<usize> = (0..l).collect();
    order.sort_by(|&a, &b| canonical_cmp(y[a].as_ref(), y[b].as_ref()));
    out.resize_with(l, Vec::new);
    for (j, block) in out.iter_mut().enumerate() {
        block.clear();
        block.resize(block_len(j + 1, d), 0.0);
    }
    for (count, &idx) in order.iter().enumerate() {
        let v = y[idx].as_ref();
        for j in (1..=(count + 1).min(l)).rev() {
            let (lower, upper) = out.split_at_mut(j - 1);
            let target = &mut upper[0];
            if j == 1 {
                for (t, &x) in target.iter_mut().zip(v) {
                    *t += x;
                }
            } else {
                let prev = &lower[j - 2];
                for (a, &p) in prev.iter().enumerate() {
                    for (b, &x) in v.iter().enumerate() {
                        target[a + b] += p * x;
                    }
                }
            }
        }
    }
}

fn validate<T: AsRef<[f64]>>(y: &[T]) -> Result<usize> {
    let d = y.first().ok_or(Error::Empty)?.as_ref().len();
    if d == 0 {
        return Err(Error::DimensionMismatch("vectors must have length >= 1".into()));
    }
    if y.iter().any(|v| v.as_ref().len() != d) {
        return Err(Error::DimensionMismatch("vectors differ in length".into()));
    }
    Ok(d)
}

/// Blocks of degrees `1..=L` of the vector symmetric transform of `y`.
pub fn full_transform<T: AsRef<[f64]>>(y: &[T]) -> Result<Vec<CoefficientBlock>> {
    validate(y)?;
    let mut out = Vec::new();
    transform_into(y, &mut out);
    Ok(out
        .into_iter()
        .enumerate()
        .map(|(j, values)| CoefficientBlock { degree: j + 1, values })
        .collect())
}

/// Sum over all size-`l` subsets of the convolution of their members.
pub fn elementary_convolution<T: AsRef<[f64]>>(y: &[T], l: usize) -> Result<CoefficientBlock> {
    validate(y)?;
    if l == 0 || l > y.len() {
        return Err(Error::DegreeOutOfRange { degree: l, max: y.len() });
    }
    let mut out = Vec::new();
    transform_into(y, &mut out);
    Ok(CoefficientBlock { degree: l, values: out.swap_remove(l - 1) })
}

/// Elementary symmetric polynomials `e_1..e_L` of scalars.
pub fn elementary_symmetric(values: &[f64]) -> Vec<f64> {
    let rows: Vec<[f64; 1]> = values.iter().map(|&v| [v]).collect();
    if rows.is_empty() {
        return Vec::new();
    }
    let mut out = Vec::new();
    transform_into(&rows, &mut out);
    out.into_iter().map(|b| b[0]).collect()
}

/// Componentwise scalar transforms: entry `j` holds `e_1..e_L` of
/// `{y_1j, ..., y_Lj}`. Discards which entries belonged to the same vector.
pub fn naive_transform<T: AsRef<[f64]>>(y: &[T]) -> Result<Vec<Vec<f64>>> {
    let d = validate(y)?;
    Ok((0..d)
        .map(|j| {
            let col: Vec<f64> = y.iter().map(|v| v.as_ref()[j]).collect();
            elementary_symmetric(&col)
        })
        .collect())
}
