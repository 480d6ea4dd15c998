use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::rng::trial_rng;
use crate::sim::{InputModel, NoiseModel, SystemSpec};
use crate::symmetric::{elementary_symmetric, root_sensitivity, ParameterSet};

use super::stats::{sample_covariance, CovarianceEstimate};

/// Input moments `diag((2l-1)!!)` of the scalar regressors `psi^l` for a
/// standard Gaussian input.
pub fn moment_matrix_q(l: usize) -> DMatrix<f64> {
    let mut q = DMatrix::zeros(l, l);
    let mut df = 1.0;
    for i in 0..l {
        df *= (2 * i + 1) as f64;
        q[(i, i)] = df;
    }
    q
}

/// How the pseudo-observation noise covariance is obtained.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum RMethod {
    /// Diagonal closed form, valid for `L = 2` and Gaussian noise.
    ClosedFormL2,
    MonteCarlo { n_samples: usize, seed: u64 },
}

const CHUNKS: usize = 64;

/// Covariance of the gradient noise `psi^l w_l`, where `w_l` is the part of
/// the degree-`l` pseudo-observation not explained by `psi^l lambda_l`.
/// The input is standard Gaussian.
pub fn noise_covariance_r(
    theta: &ParameterSet,
    noise: &NoiseModel,
    method: RMethod,
) -> Result<CovarianceEstimate> {
    if theta.dim() != 1 {
        return Err(Error::DimensionMismatch("noise covariance needs D = 1".into()));
    }
    noise.validate()?;
    let t = theta.column(0);
    let l = t.len();
    match method {
        RMethod::ClosedFormL2 => {
            let NoiseModel::Gaussian { sigma } = *noise else {
                return Err(Error::InvalidModel("closed form needs Gaussian noise".into()));
            };
            if l != 2 {
                return Err(Error::InvalidModel(format!("closed form needs L = 2, got {l}")));
            }
            let s2 = sigma * sigma;
            let mut r = DMatrix::zeros(2, 2);
            r[(0, 0)] = 2.0 * s2;
            r[(1, 1)] = 15.0 * s2 * (t[0] * t[0] + t[1] * t[1]) + 3.0 * s2 * s2;
            Ok(CovarianceEstimate { std_err: DMatrix::zeros(2, 2), cov: r, n: 0 })
        }
        RMethod::MonteCarlo { n_samples, seed } => {
            if n_samples < 2 {
                return Err(Error::InvalidModel("need at least two samples".into()));
            }
            let lambda = elementary_symmetric(&t);
            let sampler = noise.sampler()?;
            let per = n_samples.div_ceil(CHUNKS);
            let chunks: Vec<Vec<f64>> = (0..CHUNKS)
                .into_par_iter()
                .map(|c| {
                    let count = per.min(n_samples.saturating_sub(c * per));
                    let mut rng = trial_rng(seed, c as u64);
                    let mut out = Vec::with_capacity(count * l);
                    let mut y = vec![0.0; l];
                    for _ in 0..count {
                        let psi: f64 = StandardNormal.sample(&mut rng);
                        for (yi, ti) in y.iter_mut().zip(&t) {
                            *yi = psi * ti + sampler.sample(&mut rng);
                        }
                        let z = elementary_symmetric(&y);
                        let mut pow = 1.0;
                        for j in 0..l {
                            pow *= psi;
                            out.push(pow * (z[j] - pow * lambda[j]));
                        }
                    }
                    out
                })
                .collect();
            let samples: Vec<&[f64]> = chunks.iter().flat_map(|c| c.chunks_exact(l)).collect();
            Ok(sample_covariance(&samples, l))
        }
    }
}

fn check_symmetric(m: &DMatrix<f64>, what: &str) -> Result<()> {
    if !m.is_square() {
        return Err(Error::DimensionMismatch(format!("{what} must be square")));
    }
    let scale = m.amax().max(1.0);
    if (m - m.transpose()).amax() > 1e-12 * scale {
        return Err(Error::InvalidModel(format!("{what} must be symmetric")));
    }
    Ok(())
}

/// Symmetric solution of `Q S + S Q = R` via the vectorized system
/// `(I (x) Q + Q (x) I) vec(S) = vec(R)`.
pub fn lyapunov_solve(q: &DMatrix<f64>, r: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_symmetric(q, "Q")?;
    check_symmetric(r, "R")?;
    let n = q.nrows();
    if r.nrows() != n {
        return Err(Error::DimensionMismatch("Q and R sizes differ".into()));
    }
    if q.iter().any(|x| !x.is_finite()) || r.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("Lyapunov input"));
    }
    if q.clone().cholesky().is_none() {
        return Err(Error::InvalidModel("Q must be positive definite".into()));
    }
    let eye = DMatrix::<f64>::identity(n, n);
    let k = eye.kronecker(q) + q.kronecker(&eye);
    let rhs = DVector::from_column_slice(r.as_slice());
    let x = k
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::InvalidModel("Lyapunov operator is singular".into()))?;
    let s = DMatrix::from_column_slice(n, n, x.as_slice());
    Ok((&s + s.transpose()) * 0.5)
}

/// Delta-method covariance `J^T S J` of the ordered factors, with `J` the
/// root sensitivity; returns the matrix and its trace.
pub fn delta_covariance(sigma: &DMatrix<f64>, theta: &ParameterSet) -> Result<(DMatrix<f64>, f64)> {
    let jac = root_sensitivity(theta)?.jac;
    if sigma.shape() != jac.shape() {
        return Err(Error::DimensionMismatch("covariance size differs from L".into()));
    }
    let bar = jac.transpose() * sigma * &jac;
    let bar = (&bar + bar.transpose()) * 0.5;
    let trace = bar.trace();
    Ok((bar, trace))
}

/// Asymptotic covariance of the scalar symmetric filter.
#[derive(Clone, Debug, PartialEq)]
pub struct CovarianceReport {
    pub q: DMatrix<f64>,
    pub r: DMatrix<f64>,
    /// Standard errors of `r` (zero for the closed form).
    pub r_std_err: DMatrix<f64>,
    /// Covariance of the coefficient estimates, scaled by `1/eps`.
    pub sigma: DMatrix<f64>,
    /// Covariance of the ordered parameter estimates, scaled by `1/eps`.
    pub sigma_bar: DMatrix<f64>,
    pub trace_bar: f64,
}

/// Full covariance chain for a scalar system with Gaussian input.
pub fn covariance_report(spec: &SystemSpec, method: RMethod) -> Result<CovarianceReport> {
    spec.validate()?;
    if spec.d() != 1 {
        return Err(Error::DimensionMismatch("covariance analysis needs D = 1".into()));
    }
    if spec.input != InputModel::Gaussian {
        return Err(Error::InvalidModel("closed-form moments need standard Gaussian input".into()));
    }
    let theta = spec.truth();
    let q = moment_matrix_q(spec.l());
    let r = noise_covariance_r(&theta, &spec.noise, method)?;
    let sigma = lyapunov_solve(&q, &r.cov)?;
    let (sigma_bar, trace_bar) = delta_covariance(&sigma, &theta)?;
    Ok(CovarianceReport { q, r: r.cov, r_std_err: r.std_err, sigma, sigma_bar, trace_bar })
}
