//! Running a configured experiment and writing its artifacts.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::Path;

use anyhow::{Context, Result};
use rayon::prelude::*;
use serde::Serialize;

use symset::analysis::Summary;
use symset::filters::{run_trial, write_log_csv, RunPlan, TrialOutcome};
use symset::sim::{write_trajectory_csv, Trajectory};
use symset::FilterConfig;

use crate::config::ExperimentSpec;

/// Terminal state of one filter on one trial.
#[derive(Clone, Debug)]
pub struct TrialRow {
    pub trial: u64,
    pub estimate: Option<Vec<f64>>,
    pub status: String,
}

/// Everything one filter produced across the trials.
#[derive(Clone, Debug)]
pub struct FilterResult {
    pub label: String,
    pub mode: String,
    pub rows: Vec<TrialRow>,
    /// Entrywise mean over trials with an estimate, canonical row-major order.
    pub mean: Option<Vec<f64>>,
    pub std_err: Option<Vec<f64>>,
}

impl FilterResult {
    pub fn failed(&self) -> usize {
        self.rows.iter().filter(|r| r.estimate.is_none()).count()
    }
}

/// Per-filter, per-trial terminal estimates plus aggregates.
#[derive(Clone, Debug)]
pub struct ResultTable {
    pub truth: Vec<f64>,
    pub filters: Vec<FilterResult>,
}

fn plan<'a>(spec: &'a ExperimentSpec, filters: &'a [FilterConfig], log: bool) -> RunPlan<'a> {
    RunPlan {
        system: &spec.system,
        perm: &spec.perm,
        drift: spec.drift.as_ref(),
        filters,
        n_steps: spec.horizon,
        seed: spec.seed,
        log,
    }
}

fn mean_and_se(samples: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    let n = samples.len() as f64;
    let width = samples[0].len();
    let mean: Vec<f64> = (0..width).map(|j| samples.iter().map(|s| s[j]).sum::<f64>() / n).collect();
    let se = (0..width)
        .map(|j| {
            if samples.len() < 2 {
                return f64::NAN;
            }
            let ss: f64 = samples.iter().map(|s| (s[j] - mean[j]).powi(2)).sum();
            (ss / (n - 1.0) / n).sqrt()
        })
        .collect();
    (mean, se)
}

/// Runs all trials. Trial 0 is run with logging and its logs are returned
/// alongside the table.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<(ResultTable, Vec<TrialOutcome>)> {
    let configs: Vec<FilterConfig> = spec.filters.iter().map(|f| f.config.clone()).collect();
    let logged = run_trial(&plan(spec, &configs, true), 0)?;
    let quiet = plan(spec, &configs, false);
    let rest: Vec<Vec<TrialOutcome>> =
        (1..spec.trials as u64).into_par_iter().map(|t| run_trial(&quiet, t)).collect::<symset::Result<_>>()?;

    let filters = spec
        .filters
        .iter()
        .enumerate()
        .map(|(i, f)| {
            let rows: Vec<TrialRow> = std::iter::once(&logged[i])
                .chain(rest.iter().map(|t| &t[i]))
                .map(|o| TrialRow {
                    trial: o.trial,
                    estimate: o.estimate.as_ref().map(|e| e.set.flat()),
                    status: match (&o.error, &o.estimate) {
                        (Some(e), _) => e.to_string(),
                        (None, Some(e)) if e.complex => "complex roots".into(),
                        _ => "ok".into(),
                    },
                })
                .collect();
            let ok: Vec<Vec<f64>> = rows.iter().filter_map(|r| r.estimate.clone()).collect();
            let (mean, std_err) = if ok.is_empty() {
                (None, None)
            } else {
                let (m, s) = mean_and_se(&ok);
                (Some(m), Some(s))
            };
            FilterResult { label: f.label.clone(), mode: f.config.mode.to_string(), rows, mean, std_err }
        })
        .collect();
    Ok((ResultTable { truth: spec.system.truth().flat(), filters }, logged))
}

fn max_errors(est: &[f64], truth: &[f64]) -> (f64, f64) {
    est.iter().zip(truth).fold((0.0f64, 0.0f64), |(a, r), (e, t)| {
        let abs = (e - t).abs();
        (a.max(abs), r.max(abs / t.abs()))
    })
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    let path = dir.join(name);
    Ok(BufWriter::new(File::create(&path).with_context(|| format!("creating {}", path.display()))?))
}

/// Writes `results.csv`: one row per filter and trial, then one `mean` row
/// per filter. Estimate columns are canonical row-major `theta{i}_{m}`.
pub fn write_results_csv(table: &ResultTable, l: usize, d: usize, dir: &Path) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(dir, "results.csv")?);
    let mut header = vec!["filter".to_string(), "mode".into(), "trial".into()];
    for i in 1..=l {
        for m in 1..=d {
            header.push(format!("theta{i}_{m}"));
        }
    }
    header.extend(["max_abs_error", "max_rel_error", "status"].map(String::from));
    w.write_record(&header)?;
    let mut record = |f: &FilterResult, trial: String, est: Option<&Vec<f64>>, status: &str| -> Result<()> {
        let mut row = vec![f.label.clone(), f.mode.clone(), trial];
        match est {
            Some(e) => {
                row.extend(e.iter().map(|x| x.to_string()));
                let (a, r) = max_errors(e, &table.truth);
                row.push(a.to_string());
                row.push(r.to_string());
            }
            None => row.extend(std::iter::repeat_n(String::new(), l * d + 2)),
        }
        row.push(status.to_string());
        w.write_record(&row)?;
        Ok(())
    };
    for f in &table.filters {
        for r in &f.rows {
            record(f, r.trial.to_string(), r.estimate.as_ref(), &r.status)?;
        }
    }
    for f in &table.filters {
        let status = format!("{} of {} trials failed", f.failed(), f.rows.len());
        record(f, "mean".into(), f.mean.as_ref(), &status)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `log_<filter>.csv` for the logged trial.
pub fn write_logs(spec: &ExperimentSpec, logged: &[TrialOutcome], dir: &Path) -> Result<()> {
    let (l, d) = (spec.system.l(), spec.system.d());
    for (f, out) in spec.filters.iter().zip(logged) {
        write_log_csv(&out.log, out.mode, l, d, create(dir, &format!("log_{}.csv", f.label))?)?;
    }
    Ok(())
}

/// Writes `trajectory_trial<t>.csv` for every trial.
pub fn write_trajectories(spec: &ExperimentSpec, reveal: bool, dir: &Path) -> Result<()> {
    for t in 0..spec.trials as u64 {
        let traj = Trajectory::new(&spec.system, &spec.perm, spec.drift.as_ref(), spec.seed, t)?;
        let records: Vec<_> = traj.take(spec.horizon).collect();
        write_trajectory_csv(&records, reveal, create(dir, &format!("trajectory_trial{t}.csv"))?)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct FilterSummary<'a> {
    filter: &'a str,
    mode: &'a str,
    failed_trials: usize,
    mean_estimate: Option<&'a Vec<f64>>,
    standard_errors: Option<&'a Vec<f64>>,
    max_abs_error: Option<f64>,
    max_rel_error: Option<f64>,
}

#[derive(Serialize)]
struct SummaryFile<'a> {
    experiment: &'a str,
    seed: u64,
    config_hash: &'a str,
    trials: usize,
    horizon: usize,
    truth: &'a [f64],
    filters: Vec<FilterSummary<'a>>,
    targets: &'a [Summary],
}

/// Writes `summary.json`.
pub fn write_summary(
    spec: &ExperimentSpec,
    table: &ResultTable,
    targets: &[Summary],
    dir: &Path,
) -> Result<()> {
    let filters = table
        .filters
        .iter()
        .map(|f| {
            let errs = f.mean.as_ref().map(|m| max_errors(m, &table.truth));
            FilterSummary {
                filter: &f.label,
                mode: &f.mode,
                failed_trials: f.failed(),
                mean_estimate: f.mean.as_ref(),
                standard_errors: f.std_err.as_ref(),
                max_abs_error: errs.map(|e| e.0),
                max_rel_error: errs.map(|e| e.1),
            }
        })
        .collect();
    let file = SummaryFile {
        experiment: &spec.name,
        seed: spec.seed,
        config_hash: &spec.hash,
        trials: spec.trials,
        horizon: spec.horizon,
        truth: &table.truth,
        filters,
        targets,
    };
    serde_json::to_writer_pretty(create(dir, "summary.json")?, &file)?;
    Ok(())
}

/// Writes every artifact of a filter run into `dir`.
pub fn emit_outputs(
    spec: &ExperimentSpec,
    table: &ResultTable,
    logged: &[TrialOutcome],
    targets: &[Summary],
    dir: &Path,
) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    write_logs(spec, logged, dir)?;
    write_results_csv(table, spec.system.l(), spec.system.d(), dir)?;
    write_summary(spec, table, targets, dir)
}
