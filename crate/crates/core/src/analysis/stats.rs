use nalgebra::DMatrix;

/// Sample covariance with entrywise standard errors.
#[derive(Clone, Debug, PartialEq)]
pub struct CovarianceEstimate {
    pub cov: DMatrix<f64>,
    /// Standard error of each entry, from the spread of the centred
    /// products.
    pub std_err: DMatrix<f64>,
    pub n: usize,
}

/// Two-pass covariance of `samples`, each of length `dim`.
pub(crate) fn sample_covariance(samples: &[&[f64]], dim: usize) -> CovarianceEstimate {
    let n = samples.len();
    let mut mean = vec![0.0; dim];
    for s in samples {
        for (m, x) in mean.iter_mut().zip(s.iter()) {
            *m += x;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let mut sum = DMatrix::<f64>::zeros(dim, dim);
    let mut sum_sq = DMatrix::<f64>::zeros(dim, dim);
    let mut c = vec![0.0; dim];
    for s in samples {
        for i in 0..dim {
            c[i] = s[i] - mean[i];
        }
        for i in 0..dim {
            for j in 0..dim {
                let p = c[i] * c[j];
                sum[(i, j)] += p;
                sum_sq[(i, j)] += p * p;
            }
        }
    }
    let nf = n as f64;
    let cov = &sum / (nf - 1.0);
    let std_err = DMatrix::from_fn(dim, dim, |i, j| {
        let m: f64 = sum[(i, j)] / nf;
        let var: f64 = (sum_sq[(i, j)] / nf - m * m).max(0.0);
        (var / nf).sqrt()
    });
    CovarianceEstimate { cov, std_err, n }
}

/// Mean and standard error of independent replicates.
pub(crate) fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}
