use nalgebra::DMatrix;

use crate::error::{Error, Result};

use super::set::ParameterSet;

const GAP_TOL: f64 = 1e-9;

/// Jacobian of the factors with respect to the coefficients:
/// `jac[(m, l)] = d theta_l / d lambda_m` (rows coefficients, columns
/// factors in canonical order).
#[derive(Clone, Debug, PartialEq)]
pub struct SensitivityMatrix {
    pub jac: DMatrix<f64>,
}

/// Sensitivity of distinct scalar factors to the polynomial coefficients.
///
/// Differentiating `prod_i (x + theta_i)` at its root `x = -theta_l` gives
/// `(-theta_l)^(L-m) / prod_{i != l} (theta_i - theta_l)`.
pub fn root_sensitivity(theta: &ParameterSet) -> Result<SensitivityMatrix> {
    if theta.dim() != 1 {
        return Err(Error::DimensionMismatch("root sensitivity needs D = 1".into()));
    }
    let t = theta.column(0);
    let l = t.len();
    let scale = 1.0 + t.iter().fold(0.0f64, |a, x| a.max(x.abs()));
    let gap = t.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
    if gap < GAP_TOL * scale {
        return Err(Error::RepeatedRoot { gap });
    }
    let mut jac = DMatrix::zeros(l, l);
    for (c, &tl) in t.iter().enumerate() {
        let deriv: f64 = t
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != c)
            .map(|(_, &ti)| ti - tl)
            .product();
        for m in 1..=l {
            jac[(m - 1, c)] = (-tl).powi((l - m) as i32) / deriv;
        }
    }
    Ok(SensitivityMatrix { jac })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symmetric::invert::invert_scalar;
    use crate::symmetric::transform::elementary_symmetric;

    #[test]
    fn two_factor_hand_values() {
        let s = root_sensitivity(&ParameterSet::from_scalars(&[1.0, 2.0]).unwrap()).unwrap();
        let want = DMatrix::from_row_slice(2, 2, &[-1.0, 2.0, 1.0, -1.0]);
        assert!((s.jac - want).abs().max() < 1e-14);
    }

    #[test]
    fn two_factor_general_form() {
        let (a, b) = (0.7, -2.3);
        let s = root_sensitivity(&ParameterSet::from_scalars(&[a, b]).unwrap()).unwrap();
        // canonical order puts b first
        let (t1, t2) = (b, a);
        let want = DMatrix::from_row_slice(
            2,
            2,
            &[t1 / (t1 - t2), t2 / (t2 - t1), 1.0 / (t2 - t1), 1.0 / (t1 - t2)],
        );
        assert!((s.jac - want).abs().max() < 1e-14);
    }

    #[test]
    fn matches_finite_differences() {
        check_finite_differences(&[-2.0, 0.5, 5.0, 8.0]);
        check_finite_differences(&[-2.0, 5.0, 8.0]);
        check_finite_differences(&[1.5]);
    }

    fn check_finite_differences(theta: &[f64]) {
        let n = theta.len();
        let s = root_sensitivity(&ParameterSet::from_scalars(theta).unwrap()).unwrap();
        let lam = elementary_symmetric(theta);
        let h = 1e-6;
        for m in 0..n {
            let mut up = lam.clone();
            let mut dn = lam.clone();
            up[m] += h;
            dn[m] -= h;
            let fu = invert_scalar(&up).unwrap().set.column(0);
            let fd = invert_scalar(&dn).unwrap().set.column(0);
            for c in 0..n {
                let fdv = (fu[c] - fd[c]) / (2.0 * h);
                let rel = (fdv - s.jac[(m, c)]).abs() / s.jac[(m, c)].abs().max(1e-12);
                assert!(rel < 1e-5, "m={m} c={c}: {fdv} vs {}", s.jac[(m, c)]);
            }
        }
    }

    #[test]
    fn repeated_root_rejected() {
        let theta = ParameterSet::from_scalars(&[1.0, 1.0 + 1e-12]).unwrap();
        assert!(matches!(root_sensitivity(&theta), Err(Error::RepeatedRoot { .. })));
    }
}
