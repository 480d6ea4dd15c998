//! Estimation of the parameter set of `L` parallel linear systems observed
//! through anonymized (unordered) measurement sets.
//!
//! The central idea is to map each unordered observation set to the
//! coefficients of the polynomial whose factors are the set members. Those
//! coefficients are linear in a set of symmetric functions of the true
//! parameters, so a bank of ordinary LMS filters estimates them without any
//! data association. The parameter set is recovered afterwards by polynomial
//! root finding and a sequence of small linear solves.
//!
//! Modules:
//! - [`symmetric`]: forward transforms, design matrices, inversion, sensitivity.
//! - [`sim`]: trajectory generation with anonymizing permutations and drift.
//! - [`filters`]: the symmetric-transform filters and the baselines.
//! - [`analysis`]: asymptotic covariance, MAP anonymity, Blackwell garbling,
//!   tracking error.

pub mod analysis;
pub mod error;
pub mod filters;
pub mod rng;
pub mod sim;
pub mod symmetric;

pub use error::{Error, Result};
pub use filters::{Estimate, Filter, FilterConfig, Init, Mode};
pub use sim::{
    Drift, HyperChain, InputModel, NoiseModel, ObservationRecord, PermutationModel, SystemSpec,
};
pub use symmetric::{
    CoefficientBlock, MonomialBasis, MonomialBlock, MonomialIndex, ParameterSet,
    SensitivityMatrix,
};

pub use nalgebra::DMatrix;
