//! Risk measures built on the conditional quantile machinery: conditional
//! Value-at-Risk and rolling volatility.

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::kernel::{Bandwidth, KernelSpec};
use crate::quantile::{estimate_quantile, Direction, IrlsConfig};
use ndarray::Array1;

/// Conditional Value-at-Risk estimate at one conditioning point.
#[derive(Debug, Clone)]
pub struct VarEstimate {
    /// Confidence level alpha in (0,1).
    pub level: f64,
    /// Fitted loss quantile vector, in loss units (negated returns).
    pub value: Array1<f64>,
    /// Conditioning covariate value (standardized scale).
    pub x: Vec<f64>,
}

/// Conditional Value-at-Risk at level `alpha`.
///
/// Losses are negated responses; the estimate is the conditional geometric
/// quantile of the loss vector in the direction encoding `alpha`.
pub fn var_estimate(
    data: &Dataset,
    x: &[f64],
    spec: &KernelSpec,
    b: Bandwidth,
    alpha: f64,
    cfg: &IrlsConfig,
) -> Result<VarEstimate> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "VaR level must be in (0,1), got {alpha}"
        )));
    }
    let losses = data.responses().mapv(|v| -v);
    let loss_data = data.with_responses(losses)?;
    let dir = Direction::from_level(alpha, data.p())?;
    let est = estimate_quantile(&loss_data, x, spec, b, &dir, cfg)?;
    Ok(VarEstimate {
        level: alpha,
        value: est.q,
        x: x.to_vec(),
    })
}

/// Rolling sample standard deviation with window length `window`
/// (denominator `window - 1`). Entry `j` covers `series[j..j+window]`.
pub fn rolling_volatility(series: &[f64], window: usize) -> Result<Vec<f64>> {
    if window < 2 || window > series.len() {
        return Err(Error::InvalidArgument(format!(
            "window must lie in [2, {}], got {window}",
            series.len()
        )));
    }
    Ok(series
        .windows(window)
        .map(crate::stats::sample_sd)
        .collect())
}
