use serde::{Deserialize, Serialize};

/// Machine-readable outcome of one experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub experiment: String,
    pub seed: u64,
    pub n_trials: usize,
    pub estimates: Vec<f64>,
    pub standard_errors: Vec<f64>,
    /// Reference values the estimates are compared against.
    pub target: Vec<f64>,
    pub pass: bool,
}
