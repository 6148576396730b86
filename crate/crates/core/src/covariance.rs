//! Kernel-weighted conditional covariance and the generalized variance.

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::kernel::{Bandwidth, KernelSpec};
use crate::linalg;
use crate::mean::{estimate_mean, raw_kernel_weights};
use ndarray::Array2;

/// Conditional covariance estimate at a single evaluation point.
#[derive(Debug, Clone)]
pub struct CovEstimate {
    /// Symmetric p x p matrix.
    pub matrix: Array2<f64>,
    /// Determinant of `matrix`, clamped to zero when negligibly negative.
    pub generalized_variance: f64,
    pub bandwidth: Bandwidth,
}

/// Smallest eigenvalue tolerated before the PSD diagnostic trips. The
/// defining sum is PSD by construction, so anything below this indicates an
/// upstream bug rather than statistical noise.
const PSD_TOLERANCE: f64 = -1e-10;

/// In-sample conditional mean fits `mu(X_t)` for every observation, shared
/// across evaluation points.
pub fn fitted_means(data: &Dataset, spec: &KernelSpec, b: Bandwidth) -> Result<Array2<f64>> {
    let n = data.n();
    let p = data.p();
    let mut out = Array2::zeros((n, p));
    for t in 0..n {
        let x: Vec<f64> = data.covariate_std_row(t).to_vec();
        let m = estimate_mean(data, &x, spec, b)?;
        out.row_mut(t).assign(&m.point);
    }
    Ok(out)
}

/// Conditional covariance at `x`: the kernel-weighted sum of residual outer
/// products, with residuals taken against in-sample mean fits at bandwidth
/// `b_mean` and outer weights at bandwidth `b_cov`.
pub fn estimate_cov(
    data: &Dataset,
    x: &[f64],
    spec: &KernelSpec,
    b_cov: Bandwidth,
    b_mean: Bandwidth,
) -> Result<CovEstimate> {
    let (weights, total) = raw_kernel_weights(data, x, spec, b_cov)?;
    if total <= 0.0 {
        return Err(Error::EmptyNeighborhood {
            bandwidth: b_cov.value(),
        });
    }
    let p = data.p();
    let mut matrix = Array2::zeros((p, p));
    let mut residual = vec![0.0; p];
    for (t, &w) in weights.iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        let xt: Vec<f64> = data.covariate_std_row(t).to_vec();
        let fit = estimate_mean(data, &xt, spec, b_mean).map_err(|e| match e {
            Error::EmptyNeighborhood { bandwidth } => Error::DegeneratePoint(format!(
                "in-sample mean fit at observation {t} has an empty neighborhood (bandwidth {bandwidth})"
            )),
            other => other,
        })?;
        let y = data.response_row(t);
        for j in 0..p {
            residual[j] = y[j] - fit.point[j];
        }
        let wn = w / total;
        for i in 0..p {
            for j in i..p {
                matrix[(i, j)] += wn * residual[i] * residual[j];
            }
        }
    }
    for i in 0..p {
        for j in 0..i {
            matrix[(i, j)] = matrix[(j, i)];
        }
    }
    finish_cov(matrix, b_cov)
}

/// Same as [`estimate_cov`] but with the in-sample mean fits precomputed via
/// [`fitted_means`]; used by grid sweeps that revisit the same dataset.
pub fn estimate_cov_with_means(
    data: &Dataset,
    x: &[f64],
    spec: &KernelSpec,
    b_cov: Bandwidth,
    fitted: &Array2<f64>,
) -> Result<CovEstimate> {
    if fitted.nrows() != data.n() || fitted.ncols() != data.p() {
        return Err(Error::DimensionMismatch {
            expected: data.n() * data.p(),
            actual: fitted.nrows() * fitted.ncols(),
        });
    }
    let (weights, total) = raw_kernel_weights(data, x, spec, b_cov)?;
    if total <= 0.0 {
        return Err(Error::EmptyNeighborhood {
            bandwidth: b_cov.value(),
        });
    }
    let p = data.p();
    let mut matrix = Array2::zeros((p, p));
    let mut residual = vec![0.0; p];
    for (t, &w) in weights.iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        let y = data.response_row(t);
        for j in 0..p {
            residual[j] = y[j] - fitted[(t, j)];
        }
        let wn = w / total;
        for i in 0..p {
            for j in i..p {
                matrix[(i, j)] += wn * residual[i] * residual[j];
            }
        }
    }
    for i in 0..p {
        for j in 0..i {
            matrix[(i, j)] = matrix[(j, i)];
        }
    }
    finish_cov(matrix, b_cov)
}

fn finish_cov(matrix: Array2<f64>, bandwidth: Bandwidth) -> Result<CovEstimate> {
    let eigs = linalg::sym_eigenvalues(&matrix);
    if let Some(min) = eigs.first() {
        if *min < PSD_TOLERANCE {
            return Err(Error::Diagnostics(format!(
                "covariance estimate has eigenvalue {min}, below the PSD tolerance"
            )));
        }
    }
    let gv = clamped_determinant(&matrix);
    Ok(CovEstimate {
        matrix,
        generalized_variance: gv,
        bandwidth,
    })
}

fn clamped_determinant(matrix: &Array2<f64>) -> f64 {
    let det = linalg::determinant(matrix);
    if det < 0.0 && det > PSD_TOLERANCE {
        0.0
    } else {
        det
    }
}

/// Determinant of the covariance estimate, the scalar volatility summary.
pub fn generalized_variance(cov: &CovEstimate) -> f64 {
    clamped_determinant(&cov.matrix)
}
