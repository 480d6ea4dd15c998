use nalgebra::DMatrix;
use rand::distr::weighted::WeightedIndex;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Distribution of each entry of the noise matrix. `sigma` is always the
/// standard deviation; the Laplacian scale is `sigma / sqrt(2)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NoiseModel {
    Gaussian { sigma: f64 },
    Laplacian { sigma: f64 },
    Discrete { support: Vec<f64>, probs: Vec<f64> },
}

impl NoiseModel {
    pub fn validate(&self) -> Result<()> {
        match self {
            NoiseModel::Gaussian { sigma } | NoiseModel::Laplacian { sigma } => {
                if !(sigma.is_finite() && *sigma >= 0.0) {
                    return Err(Error::InvalidModel(format!("noise std {sigma} must be >= 0")));
                }
            }
            NoiseModel::Discrete { support, probs } => {
                if support.is_empty() || support.len() != probs.len() {
                    return Err(Error::InvalidModel("support and probs must match".into()));
                }
                if probs.iter().any(|&p| !(p >= 0.0)) {
                    return Err(Error::InvalidModel("negative probability".into()));
                }
                let total: f64 = probs.iter().sum();
                if (total - 1.0).abs() > 1e-12 {
                    return Err(Error::InvalidModel(format!("probabilities sum to {total}")));
                }
                let mean: f64 = support.iter().zip(probs).map(|(x, p)| x * p).sum();
                if mean.abs() > 1e-12 {
                    return Err(Error::InvalidModel(format!("pmf mean {mean} is not zero")));
                }
                if support.iter().any(|x| !x.is_finite()) {
                    return Err(Error::InvalidModel("non-finite support point".into()));
                }
            }
        }
        Ok(())
    }

    pub fn std_dev(&self) -> f64 {
        match self {
            NoiseModel::Gaussian { sigma } | NoiseModel::Laplacian { sigma } => *sigma,
            NoiseModel::Discrete { support, probs } => {
                support.iter().zip(probs).map(|(x, p)| p * x * x).sum::<f64>().sqrt()
            }
        }
    }

    /// Log density (log pmf for the discrete variant). A zero-std
    /// continuous model is a point mass at zero.
    pub fn log_density(&self, x: f64) -> f64 {
        match self {
            NoiseModel::Gaussian { sigma } => {
                if *sigma == 0.0 {
                    return if x == 0.0 { 0.0 } else { f64::NEG_INFINITY };
                }
                let z = x / sigma;
                -0.5 * z * z - sigma.ln() - 0.5 * (2.0 * std::f64::consts::PI).ln()
            }
            NoiseModel::Laplacian { sigma } => {
                if *sigma == 0.0 {
                    return if x == 0.0 { 0.0 } else { f64::NEG_INFINITY };
                }
                let b = sigma / std::f64::consts::SQRT_2;
                -x.abs() / b - (2.0 * b).ln()
            }
            NoiseModel::Discrete { support, probs } => support
                .iter()
                .zip(probs)
                .find(|(s, _)| (**s - x).abs() <= 1e-12 * (1.0 + s.abs()))
                .map_or(f64::NEG_INFINITY, |(_, p)| p.ln()),
        }
    }

    /// `-d/dx log p(x)`; the gradient of `log p(y - a.theta)` with respect
    /// to `theta` is `a * score(residual)`. Zero at a Laplacian kink.
    pub fn score(&self, x: f64) -> Result<f64> {
        match self {
            NoiseModel::Gaussian { sigma } if *sigma > 0.0 => Ok(x / (sigma * sigma)),
            NoiseModel::Laplacian { sigma } if *sigma > 0.0 => {
                let b = sigma / std::f64::consts::SQRT_2;
                Ok(if x > 0.0 {
                    1.0 / b
                } else if x < 0.0 {
                    -1.0 / b
                } else {
                    0.0
                })
            }
            _ => Err(Error::InvalidModel("noise model has no differentiable log-density".into())),
        }
    }

    pub fn sampler(&self) -> Result<NoiseSampler> {
        self.validate()?;
        Ok(match self {
            NoiseModel::Gaussian { sigma } => NoiseSampler::Gaussian(*sigma),
            NoiseModel::Laplacian { sigma } => {
                NoiseSampler::Laplacian(sigma / std::f64::consts::SQRT_2)
            }
            NoiseModel::Discrete { support, probs } => NoiseSampler::Discrete(
                support.clone(),
                WeightedIndex::new(probs).map_err(|e| Error::InvalidModel(e.to_string()))?,
            ),
        })
    }
}

/// Prepared sampler for a [`NoiseModel`].
#[derive(Clone, Debug)]
pub enum NoiseSampler {
    Gaussian(f64),
    Laplacian(f64),
    Discrete(Vec<f64>, WeightedIndex<f64>),
}

impl NoiseSampler {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            NoiseSampler::Gaussian(s) => {
                let z: f64 = StandardNormal.sample(rng);
                if *s == 0.0 {
                    0.0
                } else {
                    s * z
                }
            }
            NoiseSampler::Laplacian(b) => {
                let u: f64 = rng.random::<f64>() - 0.5;
                if *b == 0.0 {
                    0.0
                } else {
                    -b * u.signum() * (1.0 - 2.0 * u.abs()).ln()
                }
            }
            NoiseSampler::Discrete(support, w) => support[w.sample(rng)],
        }
    }

    pub fn fill<R: Rng + ?Sized>(&self, out: &mut [f64], rng: &mut R) {
        for x in out {
            *x = self.sample(rng);
        }
    }
}

/// Matrix of iid noise entries.
pub fn sample_noise<R: Rng + ?Sized>(
    model: &NoiseModel,
    rows: usize,
    cols: usize,
    rng: &mut R,
) -> Result<DMatrix<f64>> {
    let s = model.sampler()?;
    Ok(DMatrix::from_fn(rows, cols, |_, _| s.sample(rng)))
}
