use nalgebra::DMatrix;
use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::rng::trial_rng;
use crate::sim::{garble, permutation_table, Garbling, InputModel, NoiseModel, SystemSpec};

use super::covariance::{covariance_report, RMethod};
use super::stats::{mean_se, sample_covariance};

/// Largest `L` handled by the permutation-state analyses.
pub const MAX_STATES_L: usize = 6;

const CHUNKS: usize = 64;
const Z95: f64 = 1.959963984540054;

/// Belief over the `L!` permutation indices.
#[derive(Clone, Debug, PartialEq)]
pub struct PosteriorState {
    pi: Vec<f64>,
}

impl PosteriorState {
    pub fn new(pi: Vec<f64>) -> Result<Self> {
        if pi.is_empty() {
            return Err(Error::Empty);
        }
        if pi.iter().any(|p| !(*p >= 0.0) || !p.is_finite()) {
            return Err(Error::InvalidModel("posterior entries must be finite and >= 0".into()));
        }
        let s: f64 = pi.iter().sum();
        if (s - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidModel(format!("posterior sums to {s}")));
        }
        Ok(Self { pi })
    }

    pub fn uniform(x: usize) -> Self {
        Self { pi: vec![1.0 / x as f64; x] }
    }

    pub fn point_mass(x: usize, i: usize) -> Self {
        let mut pi = vec![0.0; x];
        pi[i] = 1.0;
        Self { pi }
    }

    pub fn probs(&self) -> &[f64] {
        &self.pi
    }

    pub fn len(&self) -> usize {
        self.pi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pi.is_empty()
    }
}

/// Bayes step from log-likelihoods `log B_{iy}`, evaluated in log space.
pub fn bayes_update_log(state: &PosteriorState, log_lik: &[f64]) -> Result<PosteriorState> {
    if log_lik.len() != state.len() {
        return Err(Error::DimensionMismatch("one likelihood per state".into()));
    }
    if log_lik.iter().any(|x| x.is_nan() || *x == f64::INFINITY) {
        return Err(Error::NonFinite("log-likelihood"));
    }
    let logs: Vec<f64> = state
        .pi
        .iter()
        .zip(log_lik)
        .map(|(&p, &ll)| if p == 0.0 { f64::NEG_INFINITY } else { p.ln() + ll })
        .collect();
    let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return Err(Error::ZeroLikelihood);
    }
    let w: Vec<f64> = logs.iter().map(|x| (x - max).exp()).collect();
    let s: f64 = w.iter().sum();
    Ok(PosteriorState { pi: w.iter().map(|x| x / s).collect() })
}

/// Bayes step `pi_i ∝ B_{iy} pi_i`.
pub fn bayes_update(state: &PosteriorState, lik: &[f64]) -> Result<PosteriorState> {
    if lik.iter().any(|x| !(*x >= 0.0)) {
        return Err(Error::InvalidModel("likelihoods must be >= 0".into()));
    }
    let logs: Vec<f64> = lik.iter().map(|x| x.ln()).collect();
    bayes_update_log(state, &logs)
}

/// What the observer sees.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Channel {
    /// Rows in the permuted order, so their values carry information about
    /// the permutation.
    Ordered,
    /// Only the unordered set of rows.
    Anonymized,
}

/// Monte-Carlo MAP error for inferring the permutation.
#[derive(Clone, Debug, PartialEq)]
pub struct AnonymityReport {
    pub p_error: f64,
    /// Half-width of the 95% normal-approximation interval.
    pub ci_halfwidth: f64,
    /// `p_error X / (X - 1)` with `X = L!`; zero when `X = 1`.
    pub anonymity: f64,
    pub n_samples: usize,
}

fn log_lik_rows(noise: &NoiseModel, y: &[f64], theta: &DMatrix<f64>, perm: &[usize]) -> f64 {
    let d = theta.ncols();
    let mut acc = 0.0;
    for (row, &s) in perm.iter().enumerate() {
        for m in 0..d {
            acc += noise.log_density(y[row * d + m] - theta[(s, m)]);
        }
    }
    acc
}

fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

fn check_anonymity_inputs(prior: &PosteriorState, spec: &SystemSpec) -> Result<Vec<Vec<usize>>> {
    spec.validate()?;
    if spec.input != InputModel::Identity {
        return Err(Error::InvalidModel("anonymity analysis uses identity input".into()));
    }
    if spec.l() > MAX_STATES_L {
        return Err(Error::TooManyPermutations { l: spec.l(), max: MAX_STATES_L });
    }
    let table = permutation_table(spec.l())?;
    if prior.len() != table.len() {
        return Err(Error::DimensionMismatch(format!("prior needs {} entries", table.len())));
    }
    Ok(table)
}

fn sample_index<R: Rng + ?Sized>(pi: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, p) in pi.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    pi.iter().rposition(|&p| p > 0.0).unwrap_or(0)
}

/// Estimates `1 - E_y[max_i (B_y pi)_i]` by drawing the permutation from
/// the prior, the observation from the channel, and scoring the MAP guess.
/// Ties between maximal posterior entries are broken uniformly at random.
pub fn map_error_probability(
    prior: &PosteriorState,
    spec: &SystemSpec,
    channel: Channel,
    n_samples: usize,
    seed: u64,
) -> Result<AnonymityReport> {
    let table = check_anonymity_inputs(prior, spec)?;
    if n_samples == 0 {
        return Err(Error::InvalidModel("need at least one sample".into()));
    }
    let (l, d) = (spec.l(), spec.d());
    let x = table.len();
    let sampler = spec.noise.sampler()?;
    let per = n_samples.div_ceil(CHUNKS);
    let errors: Vec<Result<usize>> = (0..CHUNKS)
        .into_par_iter()
        .map(|c| {
            let count = per.min(n_samples.saturating_sub(c * per));
            let mut rng = trial_rng(seed, c as u64);
            let mut y = vec![0.0; l * d];
            let mut logs = vec![0.0; x];
            let mut wrong = 0usize;
            for _ in 0..count {
                let truth = sample_index(prior.probs(), &mut rng);
                for (row, &s) in table[truth].iter().enumerate() {
                    for m in 0..d {
                        y[row * d + m] = spec.theta[(s, m)] + sampler.sample(&mut rng);
                    }
                }
                match channel {
                    Channel::Ordered => {
                        for (j, p) in table.iter().enumerate() {
                            logs[j] = log_lik_rows(&spec.noise, &y, &spec.theta, p);
                        }
                    }
                    Channel::Anonymized => {
                        // The set likelihood sums over every row assignment,
                        // so it is the same for all states.
                        for (j, p) in table.iter().enumerate() {
                            logs[j] = log_lik_rows(&spec.noise, &y, &spec.theta, p);
                        }
                        let set = log_sum_exp(&logs);
                        logs.iter_mut().for_each(|v| *v = set);
                    }
                }
                let post = bayes_update_log(prior, &logs)?;
                let best = post.pi.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let ties: Vec<usize> =
                    (0..x).filter(|&i| post.pi[i] >= best * (1.0 - 1e-12)).collect();
                let guess = ties[rng.random_range(0..ties.len())];
                if guess != truth {
                    wrong += 1;
                }
            }
            Ok(wrong)
        })
        .collect();
    let mut wrong = 0usize;
    for e in errors {
        wrong += e?;
    }
    let n = n_samples as f64;
    let p = wrong as f64 / n;
    let ci = Z95 * (p * (1.0 - p) / n).sqrt();
    let anonymity = if x > 1 { p * x as f64 / (x as f64 - 1.0) } else { 0.0 };
    Ok(AnonymityReport { p_error: p, ci_halfwidth: ci, anonymity, n_samples })
}

/// Comparison of a channel with its garbled version.
#[derive(Clone, Debug, PartialEq)]
pub struct BlackwellReport {
    pub base: AnonymityReport,
    pub garbled: AnonymityReport,
    /// Empirical observation covariance under each noise model.
    pub cov_base: DMatrix<f64>,
    pub cov_garbled: DMatrix<f64>,
    /// Smallest eigenvalue of `cov_garbled - cov_base`, with its standard
    /// error from batch means.
    pub cov_min_eig: f64,
    pub cov_min_eig_se: f64,
    /// Trace of the parameter asymptotic covariance under each model, with
    /// standard errors.
    pub trace_base: f64,
    pub trace_base_se: f64,
    pub trace_garbled: f64,
    pub trace_garbled_se: f64,
    pub p_error_ordered: bool,
    pub cov_ordered: bool,
    pub trace_ordered: bool,
}

impl BlackwellReport {
    pub fn all_ordered(&self) -> bool {
        self.p_error_ordered && self.cov_ordered && self.trace_ordered
    }
}

const BATCHES: usize = 20;
/// Slack, in standard errors, allowed on every ordering check.
pub const ORDER_SLACK: f64 = 3.0;

fn observation_batches(spec: &SystemSpec, n: usize, seed: u64) -> Result<Vec<DMatrix<f64>>> {
    let dim = spec.l() * spec.d();
    let sampler = spec.noise.sampler()?;
    let per = n.div_ceil(BATCHES);
    Ok((0..BATCHES)
        .into_par_iter()
        .map(|b| {
            let mut rng = trial_rng(seed, b as u64);
            let count = per.min(n.saturating_sub(b * per));
            let data: Vec<f64> = (0..count * dim)
                .map(|i| spec.theta[(i % dim / spec.d(), i % spec.d())] + sampler.sample(&mut rng))
                .collect();
            let refs: Vec<&[f64]> = data.chunks_exact(dim).collect();
            sample_covariance(&refs, dim).cov
        })
        .collect())
}

/// Trace of the asymptotic parameter covariance per batch, using the
/// Monte-Carlo noise covariance and a Gaussian-input copy of `spec`.
fn trace_batches(spec: &SystemSpec, n: usize, seed: u64) -> Result<Vec<f64>> {
    let gaussian = SystemSpec::new(spec.theta.clone(), InputModel::Gaussian, spec.noise.clone())?;
    let per = n.div_ceil(BATCHES).max(2);
    (0..BATCHES as u64)
        .map(|b| {
            let method = RMethod::MonteCarlo { n_samples: per, seed: seed ^ (b << 32) };
            Ok(covariance_report(&gaussian, method)?.trace_bar)
        })
        .collect()
}

fn min_eig(m: &DMatrix<f64>) -> f64 {
    m.clone().symmetric_eigen().eigenvalues.min()
}

/// Checks the orderings implied by garbling `spec`'s noise with `kernel`:
/// MAP error, observation covariance (Loewner, via the smallest eigenvalue
/// of the difference) and the trace of the parameter asymptotic covariance.
/// The covariance trace needs `D = 1`; otherwise it is reported as NaN and
/// treated as ordered.
pub fn blackwell_compare(
    spec: &SystemSpec,
    kernel: &Garbling,
    prior: &PosteriorState,
    channel: Channel,
    n_samples: usize,
    seed: u64,
) -> Result<BlackwellReport> {
    check_anonymity_inputs(prior, spec)?;
    let garbled_noise = garble(&spec.noise, kernel, true)?;
    let garbled = SystemSpec { noise: garbled_noise, ..spec.clone() };
    // Common random numbers on the base and garbled runs.
    let base_rep = map_error_probability(prior, spec, channel, n_samples, seed)?;
    let garb_rep = map_error_probability(prior, &garbled, channel, n_samples, seed)?;

    let cb = observation_batches(spec, n_samples, seed ^ 0x5eed)?;
    let cg = observation_batches(&garbled, n_samples, seed ^ 0x5eed)?;
    let eigs: Vec<f64> = cb.iter().zip(&cg).map(|(b, g)| min_eig(&(g - b))).collect();
    let (_, eig_se) = mean_se(&eigs);
    let mean = |ms: &[DMatrix<f64>]| ms.iter().fold(DMatrix::zeros(ms[0].nrows(), ms[0].ncols()), |a, m| a + m) / ms.len() as f64;
    let (cov_base, cov_garbled) = (mean(&cb), mean(&cg));
    let cov_min_eig = min_eig(&(&cov_garbled - &cov_base));

    let (trace_base, trace_base_se, trace_garbled, trace_garbled_se) = if spec.d() == 1 {
        let (tb, sb) = mean_se(&trace_batches(spec, n_samples, seed ^ 0x7ace)?);
        let (tg, sg) = mean_se(&trace_batches(&garbled, n_samples, seed ^ 0x7ace)?);
        (tb, sb, tg, sg)
    } else {
        (f64::NAN, f64::NAN, f64::NAN, f64::NAN)
    };

    let p_slack = ORDER_SLACK * (base_rep.ci_halfwidth + garb_rep.ci_halfwidth) / Z95;
    let p_error_ordered = base_rep.p_error <= garb_rep.p_error + p_slack;
    let cov_ordered = cov_min_eig >= -ORDER_SLACK * eig_se;
    let trace_ordered = spec.d() != 1
        || trace_base <= trace_garbled + ORDER_SLACK * (trace_base_se.powi(2) + trace_garbled_se.powi(2)).sqrt();
    Ok(BlackwellReport {
        base: base_rep,
        garbled: garb_rep,
        cov_base,
        cov_garbled,
        cov_min_eig,
        cov_min_eig_se: eig_se,
        trace_base,
        trace_base_se,
        trace_garbled,
        trace_garbled_se,
        p_error_ordered,
        cov_ordered,
        trace_ordered,
    })
}
