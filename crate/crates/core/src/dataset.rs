//! Paired response/covariate series with a shared time index.

use crate::error::{Error, Result};
use chrono::NaiveDate;
use ndarray::{Array1, Array2, ArrayView1};

/// How the integer time index should be rendered.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TimeKind {
    /// Plain observation counter.
    Index,
    /// Days since the common era; rendered as an ISO-8601 date.
    Date,
}

/// An n x p response matrix and n x k covariate matrix observed on a common,
/// strictly increasing time index.
///
/// Covariates are kept both in their original units and standardized
/// per-coordinate (centered, divided by the sample standard deviation).
/// Every estimator in this crate works on the standardized copy, and every
/// evaluation point handed to an estimator is interpreted on that scale.
#[derive(Debug, Clone)]
pub struct Dataset {
    responses: Array2<f64>,
    covariates: Array2<f64>,
    covariates_std: Array2<f64>,
    cov_mean: Vec<f64>,
    cov_sd: Vec<f64>,
    times: Vec<i64>,
    time_kind: TimeKind,
}

impl Dataset {
    /// Build a dataset from raw matrices, standardizing the covariates.
    ///
    /// `times` must be strictly increasing and match the row count; rows of
    /// `responses` and `covariates` must line up and contain only finite
    /// values.
    pub fn new(
        responses: Array2<f64>,
        covariates: Array2<f64>,
        times: Vec<i64>,
        time_kind: TimeKind,
    ) -> Result<Self> {
        let n = responses.nrows();
        if n == 0 {
            return Err(Error::InvalidArgument(
                "dataset must have at least one row".into(),
            ));
        }
        if covariates.nrows() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: covariates.nrows(),
            });
        }
        if times.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: times.len(),
            });
        }
        if times.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidArgument(
                "time index must be strictly increasing".into(),
            ));
        }
        if responses
            .iter()
            .chain(covariates.iter())
            .any(|v| !v.is_finite())
        {
            return Err(Error::InvalidArgument(
                "dataset contains non-finite entries".into(),
            ));
        }

        let k = covariates.ncols();
        let mut cov_mean = vec![0.0; k];
        let mut cov_sd = vec![1.0; k];
        for j in 0..k {
            let col: Vec<f64> = covariates.column(j).to_vec();
            cov_mean[j] = crate::stats::mean(&col);
            let sd = crate::stats::sample_sd(&col);
            // A constant column carries no scale; leave it unscaled.
            cov_sd[j] = if sd > 0.0 { sd } else { 1.0 };
        }
        let mut covariates_std = covariates.clone();
        for j in 0..k {
            for i in 0..n {
                covariates_std[(i, j)] = (covariates[(i, j)] - cov_mean[j]) / cov_sd[j];
            }
        }

        Ok(Dataset {
            responses,
            covariates,
            covariates_std,
            cov_mean,
            cov_sd,
            times,
            time_kind,
        })
    }

    /// Build a dataset whose covariates are already on the working scale
    /// (identity standardization). Times default to `0..n`.
    pub fn from_standardized(responses: Array2<f64>, covariates: Array2<f64>) -> Result<Self> {
        let n = responses.nrows();
        if n == 0 {
            return Err(Error::InvalidArgument(
                "dataset must have at least one row".into(),
            ));
        }
        if covariates.nrows() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: covariates.nrows(),
            });
        }
        if responses
            .iter()
            .chain(covariates.iter())
            .any(|v| !v.is_finite())
        {
            return Err(Error::InvalidArgument(
                "dataset contains non-finite entries".into(),
            ));
        }
        let k = covariates.ncols();
        Ok(Dataset {
            responses,
            covariates_std: covariates.clone(),
            covariates,
            cov_mean: vec![0.0; k],
            cov_sd: vec![1.0; k],
            times: (0..n as i64).collect(),
            time_kind: TimeKind::Index,
        })
    }

    /// Same covariates and time index, different responses.
    pub fn with_responses(&self, responses: Array2<f64>) -> Result<Self> {
        if responses.nrows() != self.n() {
            return Err(Error::DimensionMismatch {
                expected: self.n(),
                actual: responses.nrows(),
            });
        }
        if responses.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(
                "dataset contains non-finite entries".into(),
            ));
        }
        let mut out = self.clone();
        out.responses = responses;
        Ok(out)
    }

    /// Row subset preserving the standardization parameters of the parent.
    pub fn subset(&self, keep: &[usize]) -> Result<Self> {
        if keep.is_empty() {
            return Err(Error::InvalidArgument(
                "subset must keep at least one row".into(),
            ));
        }
        let p = self.p();
        let k = self.k();
        let mut responses = Array2::zeros((keep.len(), p));
        let mut covariates = Array2::zeros((keep.len(), k));
        let mut covariates_std = Array2::zeros((keep.len(), k));
        let mut times = Vec::with_capacity(keep.len());
        for (row, &i) in keep.iter().enumerate() {
            if i >= self.n() {
                return Err(Error::InvalidArgument(format!(
                    "row index {i} out of range"
                )));
            }
            responses.row_mut(row).assign(&self.responses.row(i));
            covariates.row_mut(row).assign(&self.covariates.row(i));
            covariates_std
                .row_mut(row)
                .assign(&self.covariates_std.row(i));
            times.push(self.times[i]);
        }
        if times.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidArgument(
                "subset indices must be strictly increasing in time".into(),
            ));
        }
        Ok(Dataset {
            responses,
            covariates,
            covariates_std,
            cov_mean: self.cov_mean.clone(),
            cov_sd: self.cov_sd.clone(),
            times,
            time_kind: self.time_kind,
        })
    }

    pub fn n(&self) -> usize {
        self.responses.nrows()
    }

    pub fn p(&self) -> usize {
        self.responses.ncols()
    }

    pub fn k(&self) -> usize {
        self.covariates.ncols()
    }

    pub fn responses(&self) -> &Array2<f64> {
        &self.responses
    }

    pub fn covariates(&self) -> &Array2<f64> {
        &self.covariates
    }

    pub fn covariates_std(&self) -> &Array2<f64> {
        &self.covariates_std
    }

    pub fn response_row(&self, t: usize) -> ArrayView1<'_, f64> {
        self.responses.row(t)
    }

    pub fn covariate_std_row(&self, t: usize) -> ArrayView1<'_, f64> {
        self.covariates_std.row(t)
    }

    pub fn times(&self) -> &[i64] {
        &self.times
    }

    pub fn time_kind(&self) -> TimeKind {
        self.time_kind
    }

    pub fn cov_mean(&self) -> &[f64] {
        &self.cov_mean
    }

    pub fn cov_sd(&self) -> &[f64] {
        &self.cov_sd
    }

    /// Map a point in raw covariate units onto the standardized scale.
    pub fn standardize_point(&self, x_raw: &[f64]) -> Result<Vec<f64>> {
        if x_raw.len() != self.k() {
            return Err(Error::DimensionMismatch {
                expected: self.k(),
                actual: x_raw.len(),
            });
        }
        Ok(x_raw
            .iter()
            .enumerate()
            .map(|(j, &v)| (v - self.cov_mean[j]) / self.cov_sd[j])
            .collect())
    }

    /// Map a standardized point back to raw covariate units.
    pub fn destandardize_point(&self, x_std: &[f64]) -> Result<Vec<f64>> {
        if x_std.len() != self.k() {
            return Err(Error::DimensionMismatch {
                expected: self.k(),
                actual: x_std.len(),
            });
        }
        Ok(x_std
            .iter()
            .enumerate()
            .map(|(j, &v)| v * self.cov_sd[j] + self.cov_mean[j])
            .collect())
    }

    /// Human-readable label for the `t`-th time point.
    pub fn time_label(&self, t: usize) -> String {
        match self.time_kind {
            TimeKind::Index => self.times[t].to_string(),
            TimeKind::Date => match NaiveDate::from_num_days_from_ce_opt(self.times[t] as i32) {
                Some(d) => d.format("%Y-%m-%d").to_string(),
                None => self.times[t].to_string(),
            },
        }
    }

    /// Per-coordinate column means of the responses.
    pub fn response_means(&self) -> Array1<f64> {
        let mut m = Array1::zeros(self.p());
        for j in 0..self.p() {
            m[j] = crate::stats::mean(&self.responses.column(j).to_vec());
        }
        m
    }

    /// Sum of per-coordinate sample variances of the responses (the marginal
    /// dispersion scale used as the cross-validation penalty).
    pub fn response_variance_trace(&self) -> f64 {
        (0..self.p())
            .map(|j| {
                let sd = crate::stats::sample_sd(&self.responses.column(j).to_vec());
                sd * sd
            })
            .sum()
    }
}
