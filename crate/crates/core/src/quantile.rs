//! Conditional geometric quantiles.
//!
//! A quantile is indexed by a direction vector `u` in the open unit ball of
//! the response space and defined as the minimizer of the kernel-weighted
//! objective `sum_t K_b(x - X_t) (|Y_t - q| + <u, Y_t - q>) / n`. The
//! minimizer is computed by iteratively re-weighted least squares; each
//! update minimizes a quadratic majorizer of the objective, so objective
//! values never increase along the iteration.

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::kernel::{Bandwidth, KernelSpec};
use crate::mean::raw_kernel_weights;
use ndarray::{Array1, Array2, ArrayView1};

/// Direction vector in the open unit ball, optionally tagged with the scalar
/// level it encodes.
#[derive(Debug, Clone)]
pub struct Direction {
    u: Array1<f64>,
    /// The scalar level tau this direction was built from, when applicable.
    pub level_tag: Option<f64>,
}

impl Direction {
    /// Wrap an arbitrary direction; `|u|` must be strictly below one.
    pub fn new(u: Array1<f64>) -> Result<Self> {
        let norm = u.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !norm.is_finite() || norm >= 1.0 {
            return Err(Error::InvalidArgument(format!(
                "direction norm must be strictly below 1, got {norm}"
            )));
        }
        Ok(Direction { u, level_tag: None })
    }

    /// Direction encoding the scalar level `tau`: `(2 tau - 1)` spread evenly
    /// over the diagonal unit vector `(1/sqrt(p), ..., 1/sqrt(p))`.
    ///
    /// At p = 1 this reduces to the classical univariate convention
    /// `u = 2 tau - 1`; tau = 0.5 gives the spatial median.
    pub fn from_level(tau: f64, p: usize) -> Result<Self> {
        if !(tau > 0.0 && tau < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "quantile level must be in (0,1), got {tau}"
            )));
        }
        if p == 0 {
            return Err(Error::InvalidArgument(
                "response dimension must be positive".into(),
            ));
        }
        let magnitude = 2.0 * tau - 1.0;
        let coord = magnitude / (p as f64).sqrt();
        Ok(Direction {
            u: Array1::from_elem(p, coord),
            level_tag: Some(tau),
        })
    }

    /// The zero direction (spatial median) in dimension `p`.
    pub fn spatial_median(p: usize) -> Result<Self> {
        Self::from_level(0.5, p)
    }

    pub fn u(&self) -> ArrayView1<'_, f64> {
        self.u.view()
    }

    pub fn dim(&self) -> usize {
        self.u.len()
    }
}

/// Controls for the iteratively re-weighted least squares loop.
#[derive(Debug, Clone, Copy)]
pub struct IrlsConfig {
    pub max_iter: usize,
    /// Relative step tolerance, scaled by `1 + |q|`.
    pub tol: f64,
    /// Additive weight stabilizer; keeps weights finite when an iterate lands
    /// on a data point. Zero disables stabilization.
    pub stabilizer: f64,
}

impl Default for IrlsConfig {
    fn default() -> Self {
        IrlsConfig {
            max_iter: 500,
            tol: 1e-8,
            stabilizer: 1e-10,
        }
    }
}

impl IrlsConfig {
    fn validate(&self) -> Result<()> {
        if self.max_iter == 0 {
            return Err(Error::InvalidArgument("max_iter must be at least 1".into()));
        }
        if !(self.tol > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "tolerance must be positive, got {}",
                self.tol
            )));
        }
        if self.stabilizer < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "stabilizer must be non-negative, got {}",
                self.stabilizer
            )));
        }
        Ok(())
    }
}

/// Fitted conditional quantile with convergence diagnostics.
#[derive(Debug, Clone)]
pub struct QuantileEstimate {
    pub q: Array1<f64>,
    pub iterations: usize,
    /// Objective value at the start point and after every accepted step.
    pub objective_trace: Vec<f64>,
    pub foc_residual_norm: f64,
    pub converged: bool,
}

/// Pairwise-separation report across quantile levels at one evaluation point.
#[derive(Debug, Clone)]
pub struct NoncrossingReport {
    pub levels: Vec<f64>,
    pub quantiles: Vec<Array1<f64>>,
    /// Euclidean distances between fitted quantiles, indexed like `levels`.
    pub distances: Array2<f64>,
    pub min_separation: f64,
    pub separated: bool,
}

/// Separation floor below which two fitted quantiles count as crossing.
pub const SEPARATION_FLOOR: f64 = 1e-8;

fn check_shapes(data: &Dataset, dir: &Direction) -> Result<()> {
    if dir.dim() != data.p() {
        return Err(Error::DimensionMismatch {
            expected: data.p(),
            actual: dir.dim(),
        });
    }
    Ok(())
}

/// Sampled objective `n^{-1} sum_t K_b(x - X_t) (|Y_t - q| + <u, Y_t - q>)`.
pub fn objective_value(
    data: &Dataset,
    x: &[f64],
    spec: &KernelSpec,
    b: Bandwidth,
    dir: &Direction,
    q: &[f64],
) -> Result<f64> {
    check_shapes(data, dir)?;
    if q.len() != data.p() {
        return Err(Error::DimensionMismatch {
            expected: data.p(),
            actual: q.len(),
        });
    }
    let (weights, total) = raw_kernel_weights(data, x, spec, b)?;
    if total <= 0.0 {
        return Err(Error::EmptyNeighborhood {
            bandwidth: b.value(),
        });
    }
    let u = dir.u();
    let p = data.p();
    let mut acc = 0.0;
    for (t, &w) in weights.iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        let y = data.response_row(t);
        let mut sq = 0.0;
        let mut inner = 0.0;
        for j in 0..p {
            let r = y[j] - q[j];
            sq += r * r;
            inner += u[j] * r;
        }
        acc += w * (sq.sqrt() + inner);
    }
    Ok(acc / data.n() as f64)
}

/// One IRLS update from the current iterate `q_k`.
///
/// The step solves the first-order condition of the quadratic majorizer built
/// at `q_k`: numerator `sum_t K_b u + sum_t w_t K_b^2 Y_t`, denominator
/// `sum_t w_t K_b^2`, with weights `w_t = 1 / (K_b |Y_t - q_k| + stabilizer)`.
/// Its fixed points therefore satisfy the estimator's first-order condition.
pub fn irls_step(
    data: &Dataset,
    x: &[f64],
    spec: &KernelSpec,
    b: Bandwidth,
    dir: &Direction,
    q_k: &[f64],
    cfg: &IrlsConfig,
) -> Result<Array1<f64>> {
    check_shapes(data, dir)?;
    cfg.validate()?;
    let (weights, total) = raw_kernel_weights(data, x, spec, b)?;
    if total <= 0.0 {
        return Err(Error::EmptyNeighborhood {
            bandwidth: b.value(),
        });
    }
    let p = data.p();
    let u = dir.u();
    let mut numerator = Array1::<f64>::zeros(p);
    let mut denominator = 0.0;
    let mut kernel_sum = 0.0;
    for (t, &kb) in weights.iter().enumerate() {
        if kb == 0.0 {
            continue;
        }
        kernel_sum += kb;
        let y = data.response_row(t);
        let mut sq = 0.0;
        for j in 0..p {
            let r = y[j] - q_k[j];
            sq += r * r;
        }
        let dist = sq.sqrt();
        let scaled = kb * dist + cfg.stabilizer;
        if scaled == 0.0 {
            return Err(Error::InvalidArgument(
                "iterate coincides with a data point and the stabilizer is zero".into(),
            ));
        }
        let w = 1.0 / scaled;
        let wk2 = w * kb * kb;
        denominator += wk2;
        for j in 0..p {
            numerator[j] += wk2 * y[j];
        }
    }
    if denominator <= 0.0 || !denominator.is_finite() {
        return Err(Error::EmptyNeighborhood {
            bandwidth: b.value(),
        });
    }
    for j in 0..p {
        numerator[j] += kernel_sum * u[j];
    }
    Ok(numerator / denominator)
}

/// Norm of the first-order condition
/// `sum_t K_b(X_t - x) [ (Y_t - q)/|Y_t - q| + u ]`, normalized by the kernel
/// mass `sum_t K_b(X_t - x)`. Observations coinciding with `q` contribute
/// their limiting value of zero.
pub fn foc_residual(
    data: &Dataset,
    x: &[f64],
    spec: &KernelSpec,
    b: Bandwidth,
    dir: &Direction,
    q: &[f64],
) -> Result<f64> {
    check_shapes(data, dir)?;
    let (weights, total) = raw_kernel_weights(data, x, spec, b)?;
    if total <= 0.0 {
        return Err(Error::EmptyNeighborhood {
            bandwidth: b.value(),
        });
    }
    let p = data.p();
    let u = dir.u();
    let mut score = vec![0.0; p];
    for (t, &kb) in weights.iter().enumerate() {
        if kb == 0.0 {
            continue;
        }
        let y = data.response_row(t);
        let mut sq = 0.0;
        for j in 0..p {
            let r = y[j] - q[j];
            sq += r * r;
        }
        let dist = sq.sqrt();
        if dist == 0.0 {
            continue;
        }
        for j in 0..p {
            score[j] += kb * ((y[j] - q[j]) / dist + u[j]);
        }
    }
    Ok(score.iter().map(|v| v * v).sum::<f64>().sqrt() / total)
}

/// Fit the conditional geometric quantile at `x` in direction `dir`.
///
/// Iterates from the kernel-weighted mean until the relative step falls
/// below `cfg.tol` or `cfg.max_iter` is reached. The recorded objective
/// trace is non-increasing; non-convergence is reported through the
/// `converged` flag rather than an error.
pub fn estimate_quantile(
    data: &Dataset,
    x: &[f64],
    spec: &KernelSpec,
    b: Bandwidth,
    dir: &Direction,
    cfg: &IrlsConfig,
) -> Result<QuantileEstimate> {
    check_shapes(data, dir)?;
    cfg.validate()?;
    let (weights, total) = raw_kernel_weights(data, x, spec, b)?;
    if total <= 0.0 {
        return Err(Error::EmptyNeighborhood {
            bandwidth: b.value(),
        });
    }
    let p = data.p();

    // Degenerate neighborhoods: every weighted response is the same point.
    let mut reference: Option<usize> = None;
    let mut all_identical = true;
    for (t, &w) in weights.iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        match reference {
            None => reference = Some(t),
            Some(r) => {
                let yr = data.response_row(r);
                let yt = data.response_row(t);
                if (0..p).any(|j| yr[j] != yt[j]) {
                    all_identical = false;
                    break;
                }
            }
        }
    }
    if all_identical {
        let r = reference.expect("positive total implies a weighted observation");
        let q: Array1<f64> = data.response_row(r).to_owned();
        let qs = q.to_vec();
        let trace = vec![objective_value(data, x, spec, b, dir, &qs)?];
        let foc = foc_residual(data, x, spec, b, dir, &qs)?;
        return Ok(QuantileEstimate {
            q,
            iterations: 0,
            objective_trace: trace,
            foc_residual_norm: foc,
            converged: true,
        });
    }

    // Start at the kernel-weighted mean.
    let mut q = Array1::<f64>::zeros(p);
    for (t, &w) in weights.iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        let y = data.response_row(t);
        for j in 0..p {
            q[j] += w * y[j];
        }
    }
    q.mapv_inplace(|v| v / total);

    let mut trace = Vec::with_capacity(16);
    trace.push(objective_value(
        data,
        x,
        spec,
        b,
        dir,
        q.as_slice().unwrap(),
    )?);
    let mut converged = false;
    let mut iterations = 0;
    for _ in 0..cfg.max_iter {
        let next = irls_step(data, x, spec, b, dir, q.as_slice().unwrap(), cfg)?;
        iterations += 1;
        let step: f64 = q
            .iter()
            .zip(next.iter())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        let scale = 1.0 + q.iter().map(|v| v * v).sum::<f64>().sqrt();
        q = next;
        trace.push(objective_value(
            data,
            x,
            spec,
            b,
            dir,
            q.as_slice().unwrap(),
        )?);
        if step <= cfg.tol * scale {
            converged = true;
            break;
        }
    }
    let foc = foc_residual(data, x, spec, b, dir, q.as_slice().unwrap())?;
    Ok(QuantileEstimate {
        q,
        iterations,
        objective_trace: trace,
        foc_residual_norm: foc,
        converged,
    })
}

/// Fit one quantile per level and report the pairwise separations.
pub fn check_noncrossing(
    data: &Dataset,
    x: &[f64],
    spec: &KernelSpec,
    b: Bandwidth,
    levels: &[f64],
    cfg: &IrlsConfig,
) -> Result<NoncrossingReport> {
    if levels.is_empty() {
        return Err(Error::InvalidArgument(
            "at least one level is required".into(),
        ));
    }
    for (i, &a) in levels.iter().enumerate() {
        if !(a > 0.0 && a < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "levels must lie in (0,1), got {a}"
            )));
        }
        if levels[i + 1..].contains(&a) {
            return Err(Error::InvalidArgument(format!("duplicate level {a}")));
        }
    }
    let mut quantiles = Vec::with_capacity(levels.len());
    for &tau in levels {
        let dir = Direction::from_level(tau, data.p())?;
        let est = estimate_quantile(data, x, spec, b, &dir, cfg)?;
        quantiles.push(est.q);
    }
    let l = levels.len();
    let mut distances = Array2::zeros((l, l));
    let mut min_separation = f64::INFINITY;
    for i in 0..l {
        for j in i + 1..l {
            let d = quantiles[i]
                .iter()
                .zip(quantiles[j].iter())
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            distances[(i, j)] = d;
            distances[(j, i)] = d;
            min_separation = min_separation.min(d);
        }
    }
    if l == 1 {
        min_separation = f64::INFINITY;
    }
    Ok(NoncrossingReport {
        levels: levels.to_vec(),
        quantiles,
        distances,
        min_separation,
        separated: min_separation > SEPARATION_FLOOR,
    })
}

/// Geometric quantile of an unweighted point cloud.
///
/// This is the same majorize-minimize iteration with all kernel weights equal
/// to one; the simulation harness uses it to extract directional quantiles
/// from large conditional samples.
pub fn geometric_quantile_uniform(
    points: &Array2<f64>,
    dir: &Direction,
    cfg: &IrlsConfig,
) -> Result<Array1<f64>> {
    let n = points.nrows();
    let p = points.ncols();
    if n == 0 {
        return Err(Error::InvalidArgument("point cloud is empty".into()));
    }
    if dir.dim() != p {
        return Err(Error::DimensionMismatch {
            expected: p,
            actual: dir.dim(),
        });
    }
    cfg.validate()?;
    let u = dir.u();
    let mut q = Array1::<f64>::zeros(p);
    for t in 0..n {
        for j in 0..p {
            q[j] += points[(t, j)];
        }
    }
    q.mapv_inplace(|v| v / n as f64);
    for _ in 0..cfg.max_iter {
        let mut numerator = Array1::<f64>::zeros(p);
        let mut denominator = 0.0;
        for t in 0..n {
            let mut sq = 0.0;
            for j in 0..p {
                let r = points[(t, j)] - q[j];
                sq += r * r;
            }
            let w = 1.0 / (sq.sqrt() + cfg.stabilizer.max(f64::MIN_POSITIVE));
            denominator += w;
            for j in 0..p {
                numerator[j] += w * points[(t, j)];
            }
        }
        for j in 0..p {
            numerator[j] += n as f64 * u[j];
        }
        let next = numerator / denominator;
        let step: f64 = q
            .iter()
            .zip(next.iter())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        let scale = 1.0 + q.iter().map(|v| v * v).sum::<f64>().sqrt();
        q = next;
        if step <= cfg.tol * scale {
            break;
        }
    }
    Ok(q)
}
