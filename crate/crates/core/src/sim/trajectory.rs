use nalgebra::DMatrix;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::rng::{trial_rng, TrialRng};

use super::noise::NoiseSampler;
use super::perm::{cumulative, draw, permutation_rank, PermSampler, PermutationModel};
use super::system::{Drift, InputModel, SystemSpec};

/// Ground truth behind one record, for diagnostics and labeled baselines.
#[derive(Clone, Debug, PartialEq)]
pub struct Hidden {
    /// Row `l` of the observation came from system `perm[l]`.
    pub perm: Vec<usize>,
    /// Lexicographic index of `perm`.
    pub perm_index: usize,
    /// Noise by system (row `s` was added to system `s`).
    pub noise: DMatrix<f64>,
    /// True parameters at this step, ordered by system.
    pub theta: DMatrix<f64>,
}

/// One time step of anonymized data.
#[derive(Clone, Debug, PartialEq)]
pub struct ObservationRecord {
    pub k: usize,
    pub psi: DMatrix<f64>,
    /// Observation vectors in permuted storage order.
    pub y: Vec<Vec<f64>>,
    pub hidden: Option<Hidden>,
}

impl ObservationRecord {
    fn empty(l: usize, d: usize) -> Self {
        Self {
            k: 0,
            psi: DMatrix::zeros(d, d),
            y: vec![vec![0.0; d]; l],
            hidden: Some(Hidden {
                perm: (0..l).collect(),
                perm_index: 0,
                noise: DMatrix::zeros(l, d),
                theta: DMatrix::zeros(l, d),
            }),
        }
    }
}

enum DriftState {
    None,
    Markov { states: Vec<DMatrix<f64>>, init: Vec<f64>, rows: Vec<Vec<f64>>, current: Option<usize> },
    Switch { at: usize, theta: DMatrix<f64> },
}

/// Streaming generator of one trial's records.
pub struct Trajectory {
    spec: SystemSpec,
    rng: TrialRng,
    noise: NoiseSampler,
    perm: PermSampler,
    drift: DriftState,
    theta: DMatrix<f64>,
    k: usize,
    record: ObservationRecord,
}

impl Trajectory {
    /// Trajectory on random stream `trial` of `seed`.
    pub fn new(
        spec: &SystemSpec,
        perm: &PermutationModel,
        drift: Option<&Drift>,
        seed: u64,
        trial: u64,
    ) -> Result<Self> {
        spec.validate()?;
        let (l, d) = (spec.l(), spec.d());
        let drift = match drift {
            None => DriftState::None,
            Some(Drift::Markov(chain)) => {
                let p = chain.transition(l, d)?;
                DriftState::Markov {
                    states: chain.states.clone(),
                    init: cumulative(chain.pi0.iter().copied()),
                    rows: (0..p.nrows()).map(|i| cumulative(p.row(i).iter().copied())).collect(),
                    current: None,
                }
            }
            Some(Drift::Switch { at, theta }) => {
                if theta.shape() != (l, d) {
                    return Err(Error::DimensionMismatch(format!("switch target must be {l}x{d}")));
                }
                DriftState::Switch { at: *at, theta: theta.clone() }
            }
        };
        Ok(Self {
            spec: spec.clone(),
            rng: trial_rng(seed, trial),
            noise: spec.noise.sampler()?,
            perm: perm.sampler(l)?,
            drift,
            theta: spec.theta.clone(),
            k: 0,
            record: ObservationRecord::empty(l, d),
        })
    }

    /// Advances one step and returns the new record, reusing its buffers.
    pub fn advance(&mut self) -> &ObservationRecord {
        let (l, d) = (self.spec.l(), self.spec.d());
        match &mut self.drift {
            DriftState::None => {}
            DriftState::Markov { states, init, rows, current } => {
                let s = match *current {
                    None => draw(init, &mut self.rng),
                    Some(prev) => draw(&rows[prev], &mut self.rng),
                };
                if *current != Some(s) {
                    self.theta.copy_from(&states[s]);
                }
                *current = Some(s);
            }
            DriftState::Switch { at, theta } => {
                if self.k == *at {
                    self.theta.copy_from(theta);
                }
            }
        }
        let rec = &mut self.record;
        rec.k = self.k;
        match &self.spec.input {
            InputModel::Gaussian => {
                for x in rec.psi.iter_mut() {
                    *x = StandardNormal.sample(&mut self.rng);
                }
            }
            InputModel::Identity => rec.psi.fill_with_identity(),
            InputModel::Fixed(m) => rec.psi.copy_from(m),
        }
        let hidden = rec.hidden.as_mut().expect("generator records carry hidden fields");
        self.perm.next(&mut hidden.perm, &mut self.rng);
        hidden.perm_index = if l <= 20 { permutation_rank(&hidden.perm) } else { 0 };
        self.noise.fill(hidden.noise.as_mut_slice(), &mut self.rng);
        hidden.theta.copy_from(&self.theta);
        for (row, &s) in hidden.perm.iter().enumerate() {
            let y = &mut rec.y[row];
            for r in 0..d {
                let mut acc = 0.0;
                for c in 0..d {
                    acc += rec.psi[(r, c)] * self.theta[(s, c)];
                }
                y[r] = acc + hidden.noise[(s, r)];
            }
        }
        self.k += 1;
        &self.record
    }
}

impl Iterator for Trajectory {
    type Item = ObservationRecord;

    fn next(&mut self) -> Option<ObservationRecord> {
        Some(self.advance().clone())
    }
}

/// The first `n` records of trial 0 of `seed`.
pub fn generate_trajectory(
    spec: &SystemSpec,
    perm: &PermutationModel,
    drift: Option<&Drift>,
    n: usize,
    seed: u64,
) -> Result<Vec<ObservationRecord>> {
    if n == 0 {
        return Err(Error::InvalidModel("trajectory length must be >= 1".into()));
    }
    Ok(Trajectory::new(spec, perm, drift, seed, 0)?.take(n).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::NoiseModel;
    use crate::symmetric::ParameterSet;

    fn example3(sigma: f64) -> SystemSpec {
        SystemSpec::new(
            DMatrix::from_row_slice(2, 2, &[-2.0, 6.0, 4.0, 5.0]),
            InputModel::Gaussian,
            NoiseModel::Gaussian { sigma },
        )
        .unwrap()
    }

    #[test]
    fn noiseless_records_invert_to_truth() {
        let spec = example3(0.0);
        let recs = generate_trajectory(&spec, &PermutationModel::UniformIid, None, 20, 3).unwrap();
        for r in &recs {
            let inv = r.psi.clone().try_inverse().unwrap();
            let rows: Vec<Vec<f64>> = r
                .y
                .iter()
                .map(|y| (&inv * nalgebra::DVector::from_column_slice(y)).iter().copied().collect())
                .collect();
            let got = ParameterSet::new(rows).unwrap();
            assert!(got.max_abs_diff(&spec.truth()) < 1e-9);
        }
    }

    #[test]
    fn reproducible() {
        let spec = example3(0.1);
        let a = generate_trajectory(&spec, &PermutationModel::UniformIid, None, 50, 8).unwrap();
        let b = generate_trajectory(&spec, &PermutationModel::UniformIid, None, 50, 8).unwrap();
        assert_eq!(a, b);
        let c = generate_trajectory(&spec, &PermutationModel::UniformIid, None, 50, 9).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn hidden_fields_reconstruct_observations() {
        let spec = example3(0.3);
        for r in generate_trajectory(&spec, &PermutationModel::UniformIid, None, 30, 1).unwrap() {
            let h = r.hidden.as_ref().unwrap();
            for (row, &s) in h.perm.iter().enumerate() {
                let signal = &r.psi * h.theta.row(s).transpose();
                for m in 0..2 {
                    assert_eq!(r.y[row][m], signal[m] + h.noise[(s, m)]);
                }
            }
        }
    }

    #[test]
    fn switch_drift() {
        let spec = SystemSpec::new(
            DMatrix::from_row_slice(2, 1, &[4.0, 5.0]),
            InputModel::Gaussian,
            NoiseModel::Laplacian { sigma: 2.0 },
        )
        .unwrap();
        let drift = Drift::Switch { at: 10, theta: DMatrix::from_row_slice(2, 1, &[1.0, 3.0]) };
        let recs =
            generate_trajectory(&spec, &PermutationModel::UniformIid, Some(&drift), 20, 0).unwrap();
        assert_eq!(recs[9].hidden.as_ref().unwrap().theta[(0, 0)], 4.0);
        assert_eq!(recs[10].hidden.as_ref().unwrap().theta[(0, 0)], 1.0);
    }
}
