//! Nonparametric estimation for multivariate time series: kernel-weighted
//! conditional means, conditional covariance matrices and conditional
//! geometric quantiles, with confidence bands, bandwidth selection, risk
//! measures, a Monte Carlo evaluation harness and CSV ingestion for
//! financial replay studies.
//!
//! Estimators condition a p-variate response on a k-variate covariate
//! process through local kernel weights. Quantiles are geometric: indexed by
//! a direction vector in the open unit ball of the response space and fitted
//! by an iteratively re-weighted least squares scheme with guaranteed
//! descent.

pub mod bandwidth;
pub mod covariance;
pub mod dataio;
pub mod dataset;
pub mod error;
pub mod kernel;
pub mod linalg;
pub mod mean;
pub mod quantile;
pub mod risk;
pub mod sim;
pub mod stats;

pub use bandwidth::{blocked_cv_bandwidth, rate_bandwidth, CvConfig, CvLoss, CvReport};
pub use covariance::{estimate_cov, generalized_variance, CovEstimate};
pub use dataset::{Dataset, TimeKind};
pub use error::{Error, Result};
pub use kernel::{Bandwidth, KernelConstants, KernelFamily, KernelSpec};
pub use mean::{
    confidence_band, confidence_band_with_cov, estimate_mean, jackknife_mean, nw_weights,
    BandResult, MeanEstimate,
};
pub use quantile::{
    check_noncrossing, estimate_quantile, foc_residual, irls_step, objective_value, Direction,
    IrlsConfig, NoncrossingReport, QuantileEstimate,
};
pub use risk::{rolling_volatility, var_estimate, VarEstimate};
pub use sim::{
    run_monte_carlo, run_monte_carlo_suite, simulate_covariates, simulate_responses, ErrorDist,
    McReport, McRow, SimConfig, Target,
};
