use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::symmetric::ParameterSet;

use super::noise::NoiseModel;
use super::perm::{check_distribution, transition_matrix};

/// How the shared `D x D` input matrix is produced at each step.
#[derive(Clone, Debug, PartialEq)]
pub enum InputModel {
    /// iid standard normal entries.
    Gaussian,
    Identity,
    Fixed(DMatrix<f64>),
}

/// `L` linear systems with ordered ground-truth rows `theta[l]`.
#[derive(Clone, Debug, PartialEq)]
pub struct SystemSpec {
    pub theta: DMatrix<f64>,
    pub input: InputModel,
    pub noise: NoiseModel,
}

impl SystemSpec {
    pub fn new(theta: DMatrix<f64>, input: InputModel, noise: NoiseModel) -> Result<Self> {
        let s = Self { theta, input, noise };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.theta.nrows() == 0 || self.theta.ncols() == 0 {
            return Err(Error::Empty);
        }
        if self.theta.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("true parameters"));
        }
        if let InputModel::Fixed(m) = &self.input {
            if m.nrows() != self.d() || m.ncols() != self.d() {
                return Err(Error::DimensionMismatch(format!(
                    "fixed input must be {0}x{0}",
                    self.d()
                )));
            }
        }
        self.noise.validate()
    }

    /// Number of systems `L`.
    pub fn l(&self) -> usize {
        self.theta.nrows()
    }

    /// Parameter dimension `D`.
    pub fn d(&self) -> usize {
        self.theta.ncols()
    }

    pub fn truth(&self) -> ParameterSet {
        ParameterSet::from_matrix(&self.theta).expect("validated parameters")
    }
}

/// Slow Markov chain over true parameter matrices with transition matrix
/// `I + mu Q`.
#[derive(Clone, Debug, PartialEq)]
pub struct HyperChain {
    pub states: Vec<DMatrix<f64>>,
    pub generator: DMatrix<f64>,
    pub mu: f64,
    pub pi0: Vec<f64>,
}

impl HyperChain {
    /// Transition matrix, after validating the chain against `(l, d)`.
    pub fn transition(&self, l: usize, d: usize) -> Result<DMatrix<f64>> {
        if self.states.is_empty() {
            return Err(Error::InvalidModel("hyper chain has no states".into()));
        }
        if self.states.iter().any(|s| s.nrows() != l || s.ncols() != d) {
            return Err(Error::DimensionMismatch(format!("hyper states must be {l}x{d}")));
        }
        if self.generator.nrows() != self.states.len() {
            return Err(Error::InvalidModel("generator size differs from state count".into()));
        }
        check_distribution(&self.pi0, self.states.len(), "initial hyper distribution")?;
        transition_matrix(&self.generator, self.mu)
    }

    /// Two-state chain switching at rate `mu` in both directions.
    pub fn two_state(a: DMatrix<f64>, b: DMatrix<f64>, mu: f64) -> Self {
        Self {
            states: vec![a, b],
            generator: DMatrix::from_row_slice(2, 2, &[-1.0, 1.0, 1.0, -1.0]),
            mu,
            pi0: vec![1.0, 0.0],
        }
    }
}

/// Evolution of the true parameters over time.
#[derive(Clone, Debug, PartialEq)]
pub enum Drift {
    Markov(HyperChain),
    /// The system parameters hold for steps `k < at`, then `theta`.
    Switch { at: usize, theta: DMatrix<f64> },
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spec_validation() {
        let theta = DMatrix::from_row_slice(2, 1, &[4.0, 5.0]);
        let ok = SystemSpec::new(theta.clone(), InputModel::Gaussian, NoiseModel::Gaussian { sigma: 1.0 });
        assert_eq!(ok.unwrap().truth(), ParameterSet::from_scalars(&[5.0, 4.0]).unwrap());
        let bad = SystemSpec::new(
            theta,
            InputModel::Fixed(DMatrix::identity(2, 2)),
            NoiseModel::Gaussian { sigma: 1.0 },
        );
        assert!(bad.is_err());
    }

    #[test]
    fn hyper_validation() {
        let a = DMatrix::from_row_slice(2, 1, &[4.0, 5.0]);
        let b = DMatrix::from_row_slice(2, 1, &[1.0, 3.0]);
        let chain = HyperChain::two_state(a, b, 0.01);
        let p = chain.transition(2, 1).unwrap();
        assert!((p[(0, 1)] - 0.01).abs() < 1e-15);
        assert!(chain.transition(3, 1).is_err());
    }
}
