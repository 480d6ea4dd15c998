//! Online estimators over anonymized records.
//!
//! The symmetric-transform filters run LMS on the transformed observations
//! and only invert back to a parameter set when an estimate is requested;
//! the inversion never feeds back into the recursion.

mod classical;
mod direct;
mod log;
mod naive;
mod rem;
mod runner;
mod scalar;
mod vector;

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::sim::{NoiseModel, ObservationRecord};
use crate::symmetric::ParameterSet;

pub use classical::Classical;
pub use direct::DirectSgd;
pub use log::write_log_csv;
pub use naive::Naive;
pub use rem::Rem;
pub use runner::{average_estimates, run_trial, run_trials, LogRow, RunPlan, TrialOutcome};
pub use scalar::SymScalar;
pub use vector::SymVector;

/// Any state entry above this magnitude is treated as divergence.
pub const DIVERGENCE_LIMIT: f64 = 1e12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Mode {
    SymScalar,
    SymVector,
    Classical,
    DirectSgd,
    Naive,
    Rem,
}

impl Mode {
    pub const ALL: [Mode; 6] =
        [Mode::SymScalar, Mode::SymVector, Mode::Classical, Mode::DirectSgd, Mode::Naive, Mode::Rem];

    pub fn name(self) -> &'static str {
        match self {
            Mode::SymScalar => "sym-scalar",
            Mode::SymVector => "sym-vector",
            Mode::Classical => "classical",
            Mode::DirectSgd => "direct-sgd",
            Mode::Naive => "naive",
            Mode::Rem => "rem",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Mode::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::InvalidModel(format!("unknown filter mode `{s}`")))
    }
}

/// Initial state. `Theta` rows are the initial parameter estimate; the
/// symmetric filters start from its transform.
#[derive(Clone, Debug, PartialEq)]
pub enum Init {
    Zeros,
    Theta(DMatrix<f64>),
    /// Raw filter state, in the layout of [`Filter::coefficients`].
    Coefficients(Vec<f64>),
}

/// Noise model and permutation prior assumed by recursive EM. A missing
/// prior means uniform.
#[derive(Clone, Debug, PartialEq)]
pub struct RemModel {
    pub assumed: NoiseModel,
    pub prior: Option<Vec<f64>>,
}

impl Default for RemModel {
    fn default() -> Self {
        Self { assumed: NoiseModel::Gaussian { sigma: 1.0 }, prior: None }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FilterConfig {
    pub mode: Mode,
    pub eps: f64,
    pub init: Init,
    /// Inversion cadence for logging.
    pub invert_every: usize,
    pub rem: RemModel,
}

impl FilterConfig {
    pub fn new(mode: Mode, eps: f64) -> Self {
        Self { mode, eps, init: Init::Zeros, invert_every: 100, rem: RemModel::default() }
    }

    pub fn with_init(mut self, init: Init) -> Self {
        self.init = init;
        self
    }

    pub fn with_theta(self, rows: &[&[f64]]) -> Self {
        let d = rows[0].len();
        let flat: Vec<f64> = rows.iter().flat_map(|r| r.iter().copied()).collect();
        self.with_init(Init::Theta(DMatrix::from_row_slice(rows.len(), d, &flat)))
    }

    pub fn with_invert_every(mut self, n: usize) -> Self {
        self.invert_every = n;
        self
    }

    pub fn with_rem(mut self, rem: RemModel) -> Self {
        self.rem = rem;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eps > 0.0 && self.eps.is_finite()) {
            return Err(Error::InvalidModel(format!("step size {} must be > 0", self.eps)));
        }
        if self.invert_every == 0 {
            return Err(Error::InvalidModel("invert_every must be >= 1".into()));
        }
        Ok(())
    }

    pub(crate) fn init_theta(&self, l: usize, d: usize) -> Result<Option<&DMatrix<f64>>> {
        match &self.init {
            Init::Theta(t) => {
                if t.shape() != (l, d) {
                    return Err(Error::DimensionMismatch(format!(
                        "initial parameters are {}x{}, expected {l}x{d}",
                        t.nrows(),
                        t.ncols()
                    )));
                }
                Ok(Some(t))
            }
            _ => Ok(None),
        }
    }

    pub(crate) fn init_coefficients(&self, len: usize) -> Result<Option<&[f64]>> {
        match &self.init {
            Init::Coefficients(c) => {
                if c.len() != len {
                    return Err(Error::DimensionMismatch(format!(
                        "initial state has {} entries, expected {len}",
                        c.len()
                    )));
                }
                Ok(Some(c))
            }
            _ => Ok(None),
        }
    }
}

/// Parameter-set estimate with inversion diagnostics.
#[derive(Clone, Debug, PartialEq)]
pub struct Estimate {
    pub set: ParameterSet,
    /// Some factor came from a complex root and was replaced by its real part.
    pub complex: bool,
    /// The latest inversion failed; `set` is the last successful one.
    pub ill_conditioned: bool,
    pub conditions: Vec<f64>,
}

impl Estimate {
    pub(crate) fn plain(set: ParameterSet) -> Self {
        Self { set, complex: false, ill_conditioned: false, conditions: Vec::new() }
    }
}

/// Snapshot of a filter.
#[derive(Clone, Debug, PartialEq)]
pub struct FilterState {
    pub k: usize,
    pub coefficients: Vec<f64>,
    pub last_inverted: Option<Estimate>,
}

pub trait Filter: Send {
    fn mode(&self) -> Mode;

    /// Consumes one record.
    fn step(&mut self, record: &ObservationRecord) -> Result<()>;

    /// Number of records consumed.
    fn steps(&self) -> usize;

    /// Flattened recursion state (coefficients, monomial values or
    /// parameters depending on the mode).
    fn coefficients(&self) -> Vec<f64>;

    /// Current parameter-set estimate in canonical order.
    fn estimate(&mut self) -> Result<Estimate>;

    fn state(&mut self) -> FilterState {
        let last_inverted = self.estimate().ok();
        FilterState { k: self.steps(), coefficients: self.coefficients(), last_inverted }
    }
}

/// Builds the filter for `config` on `l` systems of dimension `d`.
pub fn build(config: &FilterConfig, l: usize, d: usize) -> Result<Box<dyn Filter>> {
    config.validate()?;
    Ok(match config.mode {
        Mode::SymScalar => Box::new(SymScalar::new(config, l, d)?),
        Mode::SymVector => Box::new(SymVector::new(config, l, d)?),
        Mode::Classical => Box::new(Classical::new(config, l, d)?),
        Mode::DirectSgd => Box::new(DirectSgd::new(config, l, d)?),
        Mode::Naive => Box::new(Naive::new(config, l, d)?),
        Mode::Rem => Box::new(Rem::new(config, l, d)?),
    })
}

pub(crate) fn check_state(values: &[f64], step: usize) -> Result<()> {
    if values.iter().any(|x| !(x.abs() <= DIVERGENCE_LIMIT)) {
        return Err(Error::Diverged { step });
    }
    Ok(())
}

pub(crate) fn check_record(record: &ObservationRecord, l: usize, d: usize) -> Result<()> {
    if record.y.len() != l || record.y.iter().any(|y| y.len() != d) || record.psi.shape() != (d, d)
    {
        return Err(Error::DimensionMismatch(format!("record does not match L={l}, D={d}")));
    }
    Ok(())
}
