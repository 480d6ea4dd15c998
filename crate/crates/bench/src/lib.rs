//! Fixtures shared by the criterion benchmarks under `benches/`.

use nalgebra::DMatrix;
use symset::sim::generate_trajectory;
use symset::{InputModel, NoiseModel, ObservationRecord, PermutationModel, SystemSpec};

/// `L` systems with `D`-dimensional parameters, spread out so every
/// inversion is well conditioned.
pub fn system(l: usize, d: usize, input: InputModel) -> SystemSpec {
    let theta = DMatrix::from_fn(l, d, |i, m| (i * d + m) as f64 * 0.5 + i as f64 + 1.0);
    SystemSpec::new(theta, input, NoiseModel::Gaussian { sigma: 0.1 }).expect("valid fixture")
}

/// `n` anonymized records of [`system`].
pub fn records(l: usize, d: usize, input: InputModel, n: usize) -> Vec<ObservationRecord> {
    generate_trajectory(&system(l, d, input), &PermutationModel::UniformIid, None, n, 1).expect("valid fixture")
}
