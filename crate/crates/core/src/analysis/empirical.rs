use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::filters::{build, FilterConfig, Init, Mode};
use crate::sim::{Drift, HyperChain, PermutationModel, SystemSpec, Trajectory};

use super::stats::{mean_se, sample_covariance, CovarianceEstimate};

/// Scaled terminal covariances over independent trials.
#[derive(Clone, Debug, PartialEq)]
pub struct EmpiricalCovariance {
    /// `1/eps` times the covariance of the filter coefficients.
    pub coefficients: CovarianceEstimate,
    /// `1/eps` times the covariance of the canonically ordered estimates,
    /// flattened row-major.
    pub theta: CovarianceEstimate,
}

fn truth_coefficients(mode: Mode, eps: f64, spec: &SystemSpec) -> Result<Vec<f64>> {
    let cfg = FilterConfig::new(mode, eps).with_init(Init::Theta(spec.theta.clone()));
    Ok(build(&cfg, spec.l(), spec.d())?.coefficients())
}

fn scale(mut c: CovarianceEstimate, by: f64) -> CovarianceEstimate {
    c.cov *= by;
    c.std_err *= by;
    c
}

/// Runs `n_trials` independent filters started at the truth for `n_steps`
/// steps and returns the scaled sample covariances of the terminal
/// deviations. Any diverged or non-invertible trial is an error.
pub fn empirical_asymptotic_covariance(
    mode: Mode,
    spec: &SystemSpec,
    eps: f64,
    n_steps: usize,
    n_trials: usize,
    seed: u64,
) -> Result<EmpiricalCovariance> {
    spec.validate()?;
    if n_trials < 2 {
        return Err(Error::InvalidModel("need at least two trials".into()));
    }
    let truth = spec.truth().flat();
    let lam0 = truth_coefficients(mode, eps, spec)?;
    let cfg = FilterConfig::new(mode, eps).with_init(Init::Theta(spec.theta.clone()));
    let perm = PermutationModel::UniformIid;
    let rows: Vec<Result<(Vec<f64>, Vec<f64>)>> = (0..n_trials as u64)
        .into_par_iter()
        .map(|t| {
            let mut f = build(&cfg, spec.l(), spec.d())?;
            let mut traj = Trajectory::new(spec, &perm, None, seed, t)?;
            for _ in 0..n_steps {
                f.step(traj.advance())?;
            }
            let lam: Vec<f64> = f.coefficients().iter().zip(&lam0).map(|(a, b)| a - b).collect();
            let th: Vec<f64> = f.estimate()?.set.flat().iter().zip(&truth).map(|(a, b)| a - b).collect();
            Ok((lam, th))
        })
        .collect();
    let rows = rows.into_iter().collect::<Result<Vec<_>>>()?;
    let lam: Vec<&[f64]> = rows.iter().map(|r| r.0.as_slice()).collect();
    let th: Vec<&[f64]> = rows.iter().map(|r| r.1.as_slice()).collect();
    Ok(EmpiricalCovariance {
        coefficients: scale(sample_covariance(&lam, lam0.len()), 1.0 / eps),
        theta: scale(sample_covariance(&th, truth.len()), 1.0 / eps),
    })
}

/// Mean squared coefficient tracking error.
#[derive(Clone, Debug, PartialEq)]
pub struct TrackingReport {
    pub mse: f64,
    /// Standard error across trials.
    pub std_err: f64,
    pub n_trials: usize,
}

/// Time-averaged `|lambda(k) - lambda_true(k)|^2` over the second half of
/// the horizon while the true parameters follow `hyper`, averaged over
/// trials. Uses the scalar symmetric filter for `D = 1` and the vector one
/// otherwise; both start from zero.
pub fn tracking_mse(
    spec: &SystemSpec,
    hyper: &HyperChain,
    eps: f64,
    mu: f64,
    n_steps: usize,
    n_trials: usize,
    seed: u64,
) -> Result<TrackingReport> {
    spec.validate()?;
    if n_trials == 0 || n_steps < 2 {
        return Err(Error::InvalidModel("need trials and at least two steps".into()));
    }
    let chain = HyperChain { mu, ..hyper.clone() };
    let qmax = (0..chain.generator.nrows()).map(|i| chain.generator[(i, i)].abs()).fold(0.0, f64::max);
    if !(mu >= 0.0) || mu * qmax > 1.0 {
        return Err(Error::InvalidModel(format!("mu * max|q_ii| = {} exceeds 1", mu * qmax)));
    }
    let mode = if spec.d() == 1 { Mode::SymScalar } else { Mode::SymVector };
    let targets: Vec<Vec<f64>> = chain
        .states
        .iter()
        .map(|s| truth_coefficients(mode, eps, &SystemSpec { theta: s.clone(), ..spec.clone() }))
        .collect::<Result<_>>()?;
    let states = chain.states.clone();
    let drift = Drift::Markov(chain);
    let cfg = FilterConfig::new(mode, eps);
    let perm = PermutationModel::UniformIid;
    let start = n_steps / 2;
    let per_trial: Vec<Result<f64>> = (0..n_trials as u64)
        .into_par_iter()
        .map(|t| {
            let mut f = build(&cfg, spec.l(), spec.d())?;
            let mut traj = Trajectory::new(spec, &perm, Some(&drift), seed, t)?;
            let mut acc = 0.0;
            let mut state = 0usize;
            for k in 0..n_steps {
                let rec = traj.advance();
                f.step(rec)?;
                if k >= start {
                    let theta = &rec.hidden.as_ref().expect("generated records").theta;
                    if states[state] != *theta {
                        state = states.iter().position(|s| s == theta).expect("theta is a chain state");
                    }
                    acc += squared_distance(&f.coefficients(), &targets[state]);
                }
            }
            Ok(acc / (n_steps - start) as f64)
        })
        .collect();
    let mses = per_trial.into_iter().collect::<Result<Vec<_>>>()?;
    let (mse, std_err) = mean_se(&mses);
    Ok(TrackingReport { mse, std_err, n_trials })
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}
