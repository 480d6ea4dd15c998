//! Anonymized observation trajectories.
//!
//! At step `k` every system `s` produces `psi(k) theta_s + v_s(k)`; the
//! records are then emitted in the order of a random permutation, so row
//! `l` of the observation comes from system `perm[l]`. Input, noise and
//! permutation are drawn independently of each other.

mod dump;
mod garble;
mod noise;
mod perm;
mod system;
mod trajectory;

pub use dump::write_trajectory_csv;
pub use garble::{garble, garble_likelihood, Garbling};
pub use noise::{sample_noise, NoiseModel, NoiseSampler};
pub use perm::{permutation_rank, permutation_table, PermutationModel, MAX_ENUMERATED};
pub use system::{Drift, HyperChain, InputModel, SystemSpec};
pub use trajectory::{generate_trajectory, Hidden, ObservationRecord, Trajectory};
