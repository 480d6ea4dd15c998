//! Asymptotic covariance, anonymity and tracking analyses.

mod anonymity;
mod covariance;
mod empirical;
mod report;
mod stats;

pub use anonymity::{
    bayes_update, bayes_update_log, blackwell_compare, map_error_probability, AnonymityReport,
    BlackwellReport, Channel, PosteriorState, MAX_STATES_L, ORDER_SLACK,
};
pub use covariance::{
    covariance_report, delta_covariance, lyapunov_solve, moment_matrix_q, noise_covariance_r,
    CovarianceReport, RMethod,
};
pub use empirical::{empirical_asymptotic_covariance, tracking_mse, EmpiricalCovariance, TrackingReport};
pub use report::Summary;
pub use stats::CovarianceEstimate;
