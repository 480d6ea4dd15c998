use nalgebra::DMatrix;

use crate::error::{Error, Result};

use super::noise::NoiseModel;

/// A stochastic kernel applied after the base observation channel.
#[derive(Clone, Debug, PartialEq)]
pub enum Garbling {
    Identity,
    /// Independent zero-mean Gaussian noise of the given std is added.
    AdditiveGaussian { sigma: f64 },
    /// Row-stochastic matrix over the support of a discrete model.
    Kernel(DMatrix<f64>),
}

fn check_stochastic(m: &DMatrix<f64>) -> Result<()> {
    for i in 0..m.nrows() {
        if m.row(i).iter().any(|&x| !(x >= 0.0)) {
            return Err(Error::InvalidModel(format!("kernel row {i} has a negative entry")));
        }
        let s: f64 = m.row(i).sum();
        if (s - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidModel(format!("kernel row {i} sums to {s}")));
        }
    }
    Ok(())
}

/// Noise model of the composed channel. With `mean_preserving`, a discrete
/// kernel must satisfy `E[x' | x] = x` for every support point.
pub fn garble(base: &NoiseModel, kernel: &Garbling, mean_preserving: bool) -> Result<NoiseModel> {
    base.validate()?;
    match kernel {
        Garbling::Identity => Ok(base.clone()),
        Garbling::AdditiveGaussian { sigma: g } => {
            if !(*g >= 0.0) {
                return Err(Error::InvalidModel("garbling std must be >= 0".into()));
            }
            match base {
                NoiseModel::Gaussian { sigma } => {
                    Ok(NoiseModel::Gaussian { sigma: (sigma * sigma + g * g).sqrt() })
                }
                _ if *g == 0.0 => Ok(base.clone()),
                _ => Err(Error::InvalidModel(
                    "additive Gaussian garbling is only closed-form for Gaussian noise".into(),
                )),
            }
        }
        Garbling::Kernel(m) => {
            let NoiseModel::Discrete { support, probs } = base else {
                return Err(Error::InvalidModel("kernel garbling needs a discrete model".into()));
            };
            let n = support.len();
            if m.nrows() != n || m.ncols() != n {
                return Err(Error::DimensionMismatch(format!("kernel must be {n}x{n}")));
            }
            check_stochastic(m)?;
            if mean_preserving {
                for i in 0..n {
                    let cond: f64 = (0..n).map(|j| m[(i, j)] * support[j]).sum();
                    if (cond - support[i]).abs() > 1e-12 * (1.0 + support[i].abs()) {
                        return Err(Error::InvalidModel(format!(
                            "kernel moves the conditional mean of {} to {cond}",
                            support[i]
                        )));
                    }
                }
            }
            let out: Vec<f64> = (0..n).map(|j| (0..n).map(|i| probs[i] * m[(i, j)]).sum()).collect();
            let g = NoiseModel::Discrete { support: support.clone(), probs: out };
            g.validate()?;
            Ok(g)
        }
    }
}

/// Garbled likelihood matrix `B M` (rows states, columns observations).
pub fn garble_likelihood(b: &DMatrix<f64>, m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if b.ncols() != m.nrows() {
        return Err(Error::DimensionMismatch("kernel rows must match observation count".into()));
    }
    check_stochastic(b)?;
    check_stochastic(m)?;
    Ok(b * m)
}
