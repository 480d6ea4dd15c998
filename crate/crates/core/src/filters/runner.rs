use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::sim::{Drift, PermutationModel, SystemSpec, Trajectory};

use super::{build, Estimate, Filter, FilterConfig, Mode};

/// Everything needed to run filters on simulated data.
#[derive(Clone, Copy, Debug)]
pub struct RunPlan<'a> {
    pub system: &'a SystemSpec,
    pub perm: &'a PermutationModel,
    pub drift: Option<&'a Drift>,
    pub filters: &'a [FilterConfig],
    pub n_steps: usize,
    pub seed: u64,
    /// Record a log row every `invert_every` steps (plus step 0).
    pub log: bool,
}

/// One logged inversion.
#[derive(Clone, Debug, PartialEq)]
pub struct LogRow {
    pub k: usize,
    pub coefficients: Vec<f64>,
    /// Canonically ordered estimate, row-major; `None` if inversion failed.
    pub estimate: Option<Vec<f64>>,
    pub complex: bool,
    pub ill_conditioned: bool,
}

/// Result of one filter on one trial.
#[derive(Clone, Debug)]
pub struct TrialOutcome {
    pub trial: u64,
    pub mode: Mode,
    pub steps: usize,
    pub estimate: Option<Estimate>,
    pub coefficients: Vec<f64>,
    pub log: Vec<LogRow>,
    /// Set when the filter stopped early (divergence) or could not be
    /// inverted at the end.
    pub error: Option<Error>,
}

fn log_row(f: &mut dyn Filter) -> LogRow {
    let est = f.estimate().ok();
    LogRow {
        k: f.steps(),
        coefficients: f.coefficients(),
        complex: est.as_ref().is_some_and(|e| e.complex),
        ill_conditioned: est.as_ref().is_some_and(|e| e.ill_conditioned),
        estimate: est.map(|e| e.set.flat()),
    }
}

/// Runs all filters of the plan on trial `trial`; they share the records.
pub fn run_trial(plan: &RunPlan<'_>, trial: u64) -> Result<Vec<TrialOutcome>> {
    let (l, d) = (plan.system.l(), plan.system.d());
    let mut traj = Trajectory::new(plan.system, plan.perm, plan.drift, plan.seed, trial)?;
    let mut filters: Vec<Box<dyn Filter>> =
        plan.filters.iter().map(|c| build(c, l, d)).collect::<Result<_>>()?;
    let mut logs: Vec<Vec<LogRow>> = vec![Vec::new(); filters.len()];
    let mut errors: Vec<Option<Error>> = vec![None; filters.len()];
    if plan.log {
        for (f, log) in filters.iter_mut().zip(&mut logs) {
            log.push(log_row(f.as_mut()));
        }
    }
    for k in 1..=plan.n_steps {
        let rec = traj.advance();
        for (i, f) in filters.iter_mut().enumerate() {
            if errors[i].is_some() {
                continue;
            }
            if let Err(e) = f.step(rec) {
                errors[i] = Some(e);
                continue;
            }
            if plan.log && k % plan.filters[i].invert_every == 0 {
                logs[i].push(log_row(f.as_mut()));
            }
        }
    }
    Ok(filters
        .into_iter()
        .zip(logs)
        .zip(errors)
        .map(|((mut f, log), error)| {
            let (estimate, error) = match error {
                Some(e) => (None, Some(e)),
                None => match f.estimate() {
                    Ok(est) => (Some(est), None),
                    Err(e) => (None, Some(e)),
                },
            };
            TrialOutcome {
                trial,
                mode: f.mode(),
                steps: f.steps(),
                estimate,
                coefficients: f.coefficients(),
                log,
                error,
            }
        })
        .collect())
}

/// Runs trials `0..n_trials` concurrently; the result is indexed by trial.
pub fn run_trials(plan: &RunPlan<'_>, n_trials: usize) -> Result<Vec<Vec<TrialOutcome>>> {
    (0..n_trials as u64).into_par_iter().map(|t| run_trial(plan, t)).collect()
}

/// Entrywise mean of canonically ordered estimates.
pub fn average_estimates<'a>(estimates: impl IntoIterator<Item = &'a Estimate>) -> Option<DMatrix<f64>> {
    let mut sum: Option<DMatrix<f64>> = None;
    let mut n = 0usize;
    for e in estimates {
        let m = e.set.to_matrix();
        sum = Some(match sum {
            None => m,
            Some(s) => s + m,
        });
        n += 1;
    }
    sum.map(|s| s / n as f64)
}
