//! Monte-Carlo invariants of the simulator and the filters.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;

use symset::filters::{build, run_trials, FilterConfig, Mode, RunPlan};
use symset::rng::trial_rng;
use symset::sim::{sample_noise, Trajectory};
use symset::symmetric::{design_matrix, full_transform, monomial_transform};
use symset::{InputModel, NoiseModel, PermutationModel, SystemSpec};

fn mean_and_se(xs: impl Iterator<Item = f64>) -> (f64, f64, usize) {
    let (mut n, mut s, mut s2) = (0usize, 0.0, 0.0);
    for x in xs {
        n += 1;
        s += x;
        s2 += x * x;
    }
    let m = s / n as f64;
    let var = (s2 / n as f64 - m * m).max(0.0);
    (m, (var / n as f64).sqrt(), n)
}

#[test]
fn noise_samples_have_zero_mean() {
    let models = [
        NoiseModel::Gaussian { sigma: 1.5 },
        NoiseModel::Laplacian { sigma: 2.0 },
        NoiseModel::Discrete { support: vec![-2.0, 1.0], probs: vec![1.0 / 3.0, 2.0 / 3.0] },
    ];
    for (i, model) in models.iter().enumerate() {
        let mut rng = trial_rng(11, i as u64);
        let m = sample_noise(model, 1000, 1000, &mut rng).unwrap();
        let (mean, se, n) = mean_and_se(m.iter().copied());
        assert_eq!(n, 1_000_000);
        assert!(mean.abs() <= 3.0 * se, "{model:?}: mean {mean}, se {se}");
    }
}

#[test]
fn markov_permutations_follow_transition_matrix() {
    let q = DMatrix::from_row_slice(2, 2, &[-1.0, 1.0, 2.0, -2.0]);
    let mu = 0.2;
    let perm = PermutationModel::Markov { pi0: vec![1.0, 0.0], generator: q.clone(), mu };
    let spec = SystemSpec::new(
        DMatrix::from_row_slice(2, 1, &[1.0, 3.0]),
        InputModel::Identity,
        NoiseModel::Gaussian { sigma: 0.0 },
    )
    .unwrap();
    let mut traj = Trajectory::new(&spec, &perm, None, 5, 0).unwrap();
    let mut counts = [[0usize; 2]; 2];
    let mut prev = traj.advance().hidden.as_ref().unwrap().perm_index;
    for _ in 0..100_000 {
        let cur = traj.advance().hidden.as_ref().unwrap().perm_index;
        counts[prev][cur] += 1;
        prev = cur;
    }
    let p = DMatrix::identity(2, 2) + q * mu;
    for i in 0..2 {
        let n = (counts[i][0] + counts[i][1]) as f64;
        for j in 0..2 {
            let freq = counts[i][j] as f64 / n;
            let se = (p[(i, j)] * (1.0 - p[(i, j)]) / n).sqrt();
            assert!((freq - p[(i, j)]).abs() <= 3.0 * se, "({i},{j}): {freq} vs {}", p[(i, j)]);
        }
    }
}

fn example3() -> SystemSpec {
    SystemSpec::new(
        DMatrix::from_row_slice(2, 2, &[-2.0, 6.0, 4.0, 5.0]),
        InputModel::Gaussian,
        NoiseModel::Gaussian { sigma: 0.1 },
    )
    .unwrap()
}

#[test]
fn hidden_fields_reconstruct_observations() {
    let spec = example3();
    let mut traj = Trajectory::new(&spec, &PermutationModel::UniformIid, None, 9, 3).unwrap();
    for _ in 0..200 {
        let rec = traj.advance();
        let h = rec.hidden.as_ref().unwrap();
        for (row, &s) in h.perm.iter().enumerate() {
            let signal = &rec.psi * h.theta.row(s).transpose();
            for m in 0..2 {
                assert_eq!(rec.y[row][m], signal[m] + h.noise[(s, m)]);
            }
        }
    }
}

#[test]
fn same_seed_same_trajectory() {
    let spec = example3();
    let a: Vec<_> = Trajectory::new(&spec, &PermutationModel::UniformIid, None, 4, 1).unwrap().take(500).collect();
    let b: Vec<_> = Trajectory::new(&spec, &PermutationModel::UniformIid, None, 4, 1).unwrap().take(500).collect();
    assert_eq!(a, b);
    let c: Vec<_> = Trajectory::new(&spec, &PermutationModel::UniformIid, None, 4, 2).unwrap().take(500).collect();
    assert_ne!(a, c);
}

#[test]
fn filters_ignore_storage_order() {
    for (spec, mode) in [
        (
            SystemSpec::new(
                DMatrix::from_row_slice(3, 1, &[-2.0, 5.0, 8.0]),
                InputModel::Gaussian,
                NoiseModel::Gaussian { sigma: 0.01 },
            )
            .unwrap(),
            Mode::SymScalar,
        ),
        (example3(), Mode::SymVector),
    ] {
        let cfg = FilterConfig::new(mode, 1e-4);
        let mut a = build(&cfg, spec.l(), spec.d()).unwrap();
        let mut b = build(&cfg, spec.l(), spec.d()).unwrap();
        let mut rng = trial_rng(1, 99);
        for mut rec in Trajectory::new(&spec, &PermutationModel::UniformIid, None, 2, 0).unwrap().take(2000) {
            a.step(&rec).unwrap();
            rec.y.shuffle(&mut rng);
            rec.hidden = None;
            b.step(&rec).unwrap();
            let ab: Vec<u64> = a.coefficients().iter().map(|x| x.to_bits()).collect();
            let bb: Vec<u64> = b.coefficients().iter().map(|x| x.to_bits()).collect();
            assert_eq!(ab, bb);
        }
    }
}

#[test]
fn coefficient_error_scales_with_step_size() {
    let spec = SystemSpec::new(
        DMatrix::from_row_slice(3, 1, &[-2.0, 5.0, 8.0]),
        InputModel::Gaussian,
        NoiseModel::Gaussian { sigma: 1e-2 },
    )
    .unwrap();
    let lam0 = [11.0, 14.0, -80.0];
    let mse = |eps: f64| {
        let filters = [FilterConfig::new(Mode::SymScalar, eps).with_theta(&[&[-2.0], &[5.0], &[8.0]])];
        let plan = RunPlan {
            system: &spec,
            perm: &PermutationModel::UniformIid,
            drift: None,
            filters: &filters,
            n_steps: 200_000,
            seed: 21,
            log: false,
        };
        let out = run_trials(&plan, 20).unwrap();
        let total: f64 = out
            .iter()
            .map(|t| t[0].coefficients.iter().zip(&lam0).map(|(a, b)| (a - b).powi(2)).sum::<f64>())
            .sum();
        total / out.len() as f64
    };
    let m = [mse(1e-4), mse(2e-4), mse(4e-4)];
    for w in m.windows(2) {
        let ratio = w[1] / w[0];
        assert!((1.0..=4.0).contains(&ratio), "doubling eps changed the MSE by {ratio} ({m:?})");
    }
}

/// `z - A eta(theta)` averaged over records, for every degree and entry.
fn noise_polynomial_means(spec: &SystemSpec, n: usize) -> Vec<(f64, f64)> {
    let eta = monomial_transform(&spec.truth());
    let mut traj = Trajectory::new(spec, &PermutationModel::UniformIid, None, 31, 0).unwrap();
    let mut samples: Vec<Vec<f64>> = Vec::new();
    for _ in 0..n {
        let rec = traj.advance();
        let z = full_transform(&rec.y).unwrap();
        let mut row = Vec::new();
        for (l, (zl, el)) in z.iter().zip(&eta).enumerate() {
            let a = design_matrix(&rec.psi, l + 1).unwrap();
            let pred = a * DVector::from_column_slice(&el.values);
            row.extend(zl.values.iter().zip(pred.iter()).map(|(a, b)| a - b));
        }
        samples.push(row);
    }
    (0..samples[0].len())
        .map(|j| {
            let (m, se, _) = mean_and_se(samples.iter().map(|s| s[j]));
            (m, se)
        })
        .collect()
}

#[test]
fn noise_polynomial_has_zero_mean() {
    let scalar = SystemSpec::new(
        DMatrix::from_row_slice(3, 1, &[-2.0, 5.0, 8.0]),
        InputModel::Gaussian,
        NoiseModel::Gaussian { sigma: 0.5 },
    )
    .unwrap();
    for spec in [scalar, example3()] {
        for (j, (m, se)) in noise_polynomial_means(&spec, 100_000).into_iter().enumerate() {
            assert!(m.abs() <= 3.0 * se, "entry {j}: mean {m}, se {se}");
        }
    }
}
