//! Kernel-weighted conditional mean estimation: Nadaraya-Watson weights, the
//! local-constant mean, a two-bandwidth bias-corrected variant, and
//! chi-square confidence bands for linear functionals of the mean.

use crate::covariance;
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::kernel::{Bandwidth, KernelSpec};
use crate::stats::chi_square_quantile;
use ndarray::Array1;

/// Local-constant mean estimate at a single evaluation point.
#[derive(Debug, Clone)]
pub struct MeanEstimate {
    /// Weighted response average at the evaluation point.
    pub point: Array1<f64>,
    /// Kernel density estimate of the covariate density at the point.
    pub density: f64,
    /// Sum of the unnormalized (rescaled) kernel weights.
    pub effective_mass: f64,
    pub bandwidth: Bandwidth,
}

/// Confidence band for a linear functional `a' mu(x)`.
#[derive(Debug, Clone)]
pub struct BandResult {
    pub center: f64,
    pub half_width: f64,
    pub contrast: Array1<f64>,
    /// Confidence level, e.g. 0.95.
    pub level: f64,
}

/// Rescaled kernel values `K_b(x - X_t)` for every observation.
///
/// Returns the per-observation values together with their sum; callers that
/// only need normalized weights divide through.
pub(crate) fn raw_kernel_weights(
    data: &Dataset,
    x: &[f64],
    spec: &KernelSpec,
    b: Bandwidth,
) -> Result<(Vec<f64>, f64)> {
    if spec.dim() != data.k() {
        return Err(Error::DimensionMismatch {
            expected: data.k(),
            actual: spec.dim(),
        });
    }
    if x.len() != data.k() {
        return Err(Error::DimensionMismatch {
            expected: data.k(),
            actual: x.len(),
        });
    }
    let n = data.n();
    let k = data.k();
    let inv_b = 1.0 / b.value();
    let scale = b.value().powi(-(k as i32));
    let cov = data.covariates_std();
    let mut weights = vec![0.0; n];
    let mut total = 0.0;
    for t in 0..n {
        let mut sq = 0.0;
        for j in 0..k {
            let d = (x[j] - cov[(t, j)]) * inv_b;
            sq += d * d;
        }
        let w = scale * spec.eval_sq_norm(sq);
        weights[t] = w;
        total += w;
    }
    Ok((weights, total))
}

/// Normalized Nadaraya-Watson weights at `x` (standardized scale).
///
/// Errors with [`Error::EmptyNeighborhood`] when no observation has positive
/// kernel weight.
pub fn nw_weights(data: &Dataset, x: &[f64], spec: &KernelSpec, b: Bandwidth) -> Result<Vec<f64>> {
    let (mut weights, total) = raw_kernel_weights(data, x, spec, b)?;
    if total <= 0.0 {
        return Err(Error::EmptyNeighborhood {
            bandwidth: b.value(),
        });
    }
    for w in &mut weights {
        *w /= total;
    }
    Ok(weights)
}

/// Local-constant estimate of the conditional mean at `x`.
pub fn estimate_mean(
    data: &Dataset,
    x: &[f64],
    spec: &KernelSpec,
    b: Bandwidth,
) -> Result<MeanEstimate> {
    let (weights, total) = raw_kernel_weights(data, x, spec, b)?;
    if total <= 0.0 {
        return Err(Error::EmptyNeighborhood {
            bandwidth: b.value(),
        });
    }
    let p = data.p();
    let mut point = Array1::zeros(p);
    for (t, &w) in weights.iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        let y = data.response_row(t);
        for j in 0..p {
            point[j] += w * y[j];
        }
    }
    point.mapv_inplace(|v| v / total);
    Ok(MeanEstimate {
        point,
        density: total / data.n() as f64,
        effective_mass: total,
        bandwidth: b,
    })
}

/// Bias-corrected mean: `2 mu_b(x) - mu_{sqrt(2) b}(x)`.
///
/// The pairing cancels the leading quadratic smoothing bias shared by the two
/// bandwidths.
pub fn jackknife_mean(
    data: &Dataset,
    x: &[f64],
    spec: &KernelSpec,
    b: Bandwidth,
) -> Result<Array1<f64>> {
    let base = estimate_mean(data, x, spec, b)?;
    let wide = estimate_mean(data, x, spec, b.jackknife_pair())?;
    Ok(2.0 * &base.point - &wide.point)
}

/// Half-width of the band from its raw ingredients:
/// `sqrt(phi_k * chi2 * a'Sigma a / (n b^k f))`.
pub(crate) fn band_half_width(phi_k: f64, chi2: f64, quad_form: f64, n_bk_density: f64) -> f64 {
    (phi_k * chi2 * quad_form / n_bk_density).sqrt()
}

/// Confidence band for the linear functional `a' mu(x)` at significance
/// `alpha` (coverage `1 - alpha`).
///
/// Centered on the bias-corrected mean; the covariance matrix is estimated at
/// `x` with the same bandwidth for the outer weighting and the in-sample mean
/// fits.
pub fn confidence_band(
    data: &Dataset,
    x: &[f64],
    spec: &KernelSpec,
    b: Bandwidth,
    contrast: &[f64],
    alpha: f64,
) -> Result<BandResult> {
    let cov = covariance::estimate_cov(data, x, spec, b, b)?;
    band_from_parts(data, x, spec, b, &cov, contrast, alpha)
}

/// [`confidence_band`] with the covariance estimate supplied by the caller;
/// grid sweeps precompute the in-sample mean fits once and estimate the
/// covariance from them instead of refitting per row.
pub fn confidence_band_with_cov(
    data: &Dataset,
    x: &[f64],
    spec: &KernelSpec,
    b: Bandwidth,
    cov: &covariance::CovEstimate,
    contrast: &[f64],
    alpha: f64,
) -> Result<BandResult> {
    band_from_parts(data, x, spec, b, cov, contrast, alpha)
}

fn band_from_parts(
    data: &Dataset,
    x: &[f64],
    spec: &KernelSpec,
    b: Bandwidth,
    cov: &covariance::CovEstimate,
    contrast: &[f64],
    alpha: f64,
) -> Result<BandResult> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "alpha must be in (0,1), got {alpha}"
        )));
    }
    if contrast.len() != data.p() {
        return Err(Error::DimensionMismatch {
            expected: data.p(),
            actual: contrast.len(),
        });
    }
    let corrected = jackknife_mean(data, x, spec, b)?;
    let base = estimate_mean(data, x, spec, b)?;
    if base.density <= 0.0 {
        return Err(Error::DegeneratePoint(format!(
            "estimated covariate density is {} at the evaluation point",
            base.density
        )));
    }
    let p = data.p();
    let mut quad = 0.0;
    for i in 0..p {
        for j in 0..p {
            quad += contrast[i] * cov.matrix[(i, j)] * contrast[j];
        }
    }
    quad = quad.max(0.0);
    let chi2 = chi_square_quantile(p as f64, 1.0 - alpha)?;
    // The band is centered on the bias-corrected mean, so the variance
    // constant is the one of its effective kernel, not of the base kernel.
    let phi_k = spec.jackknife_variance_constant();
    let n_bk_density = data.n() as f64 * b.value().powi(data.k() as i32) * base.density;
    let center = contrast
        .iter()
        .zip(corrected.iter())
        .map(|(a, m)| a * m)
        .sum();
    Ok(BandResult {
        center,
        half_width: band_half_width(phi_k, chi2, quad, n_bk_density),
        contrast: Array1::from(contrast.to_vec()),
        level: 1.0 - alpha,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::{array, Array2};
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn spec1() -> KernelSpec {
        KernelSpec::epanechnikov(1).unwrap()
    }

    fn bw(v: f64) -> Bandwidth {
        Bandwidth::new(v).unwrap()
    }

    #[test]
    fn single_observation_gets_unit_weight() {
        let d = Dataset::from_standardized(array![[3.0]], array![[0.2]]).unwrap();
        let w = nw_weights(&d, &[0.2], &spec1(), bw(1.0)).unwrap();
        assert_eq!(w, vec![1.0]);
        let m = estimate_mean(&d, &[0.2], &spec1(), bw(1.0)).unwrap();
        assert_abs_diff_eq!(m.point[0], 3.0, epsilon = 1e-15);
    }

    #[test]
    fn identical_covariates_give_uniform_weights_and_column_means() {
        let y = array![[1.0, 4.0], [2.0, 5.0], [3.0, 6.0]];
        let x = Array2::zeros((3, 1));
        let d = Dataset::from_standardized(y, x).unwrap();
        let w = nw_weights(&d, &[0.0], &spec1(), bw(1.0)).unwrap();
        for wi in &w {
            assert_abs_diff_eq!(*wi, 1.0 / 3.0, epsilon = 1e-12);
        }
        let m = estimate_mean(&d, &[0.0], &spec1(), bw(1.0)).unwrap();
        assert_abs_diff_eq!(m.point[0], 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(m.point[1], 5.0, epsilon = 1e-12);
    }

    #[test]
    fn two_point_weights_match_direct_kernel_evaluation() {
        let y = array![[1.0, 0.0], [0.0, 1.0]];
        let x = array![[0.0], [0.5]];
        let d = Dataset::from_standardized(y, x).unwrap();
        let w = nw_weights(&d, &[0.0], &spec1(), bw(1.0)).unwrap();
        // K(0) = 0.75, K(0.5) = 0.75 * (1 - 0.25) = 0.5625
        let expect0 = 0.75 / (0.75 + 0.5625);
        let expect1 = 0.5625 / (0.75 + 0.5625);
        assert_abs_diff_eq!(w[0], expect0, epsilon = 1e-12);
        assert_abs_diff_eq!(w[1], expect1, epsilon = 1e-12);
        assert_abs_diff_eq!(w[0], 0.5714, epsilon = 5e-5);
        assert_abs_diff_eq!(w[1], 0.4286, epsilon = 5e-5);

        let m = estimate_mean(&d, &[0.0], &spec1(), bw(1.0)).unwrap();
        assert_abs_diff_eq!(m.point[0], expect0, epsilon = 1e-12);
        assert_abs_diff_eq!(m.point[1], expect1, epsilon = 1e-12);
    }

    #[test]
    fn empty_neighborhood_is_an_error() {
        let d = Dataset::from_standardized(array![[1.0]], array![[5.0]]).unwrap();
        let err = nw_weights(&d, &[0.0], &spec1(), bw(1.0)).unwrap_err();
        assert!(matches!(err, Error::EmptyNeighborhood { .. }));
    }

    #[test]
    fn weights_sum_to_one_and_are_nonnegative() {
        let mut rng = StdRng::seed_from_u64(7);
        for _ in 0..50 {
            let n = rng.random_range(2..40);
            let mut y = Array2::zeros((n, 2));
            let mut x = Array2::zeros((n, 2));
            for i in 0..n {
                for j in 0..2 {
                    y[(i, j)] = rng.random_range(-2.0..2.0);
                    x[(i, j)] = rng.random_range(-1.0..1.0);
                }
            }
            let d = Dataset::from_standardized(y, x).unwrap();
            let spec = KernelSpec::epanechnikov(2).unwrap();
            let w = nw_weights(&d, &[0.0, 0.0], &spec, bw(2.0)).unwrap();
            assert!(w.iter().all(|&wi| wi >= 0.0));
            assert_abs_diff_eq!(w.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn epanechnikov_localization_gives_exact_zeros() {
        let y = array![[1.0], [2.0], [3.0]];
        let x = array![[0.0], [0.4], [1.7]];
        let d = Dataset::from_standardized(y, x).unwrap();
        let w = nw_weights(&d, &[0.0], &spec1(), bw(1.0)).unwrap();
        assert_eq!(w[2], 0.0);
        assert!(w[0] > 0.0 && w[1] > 0.0);
    }

    #[test]
    fn gaussian_kernel_weights_every_in_range_observation() {
        let y = array![[1.0], [2.0], [3.0]];
        let x = array![[0.0], [0.4], [1.7]];
        let d = Dataset::from_standardized(y, x).unwrap();
        let gauss = KernelSpec::gaussian(1).unwrap();
        let w = nw_weights(&d, &[0.0], &gauss, bw(1.0)).unwrap();
        assert!(w.iter().all(|&wi| wi > 0.0));
        assert_abs_diff_eq!(w.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
        // weights decay with distance and match the density ratio directly
        assert!(w[0] > w[1] && w[1] > w[2]);
        let ratio = (-0.5_f64 * 0.4 * 0.4).exp();
        assert_abs_diff_eq!(w[1] / w[0], ratio, epsilon = 1e-12);
        // beyond the truncation radius the weight is exactly zero
        let far = array![[0.0], [9.0]];
        let d = Dataset::from_standardized(array![[1.0], [2.0]], far).unwrap();
        let w = nw_weights(&d, &[0.0], &gauss, bw(1.0)).unwrap();
        assert_eq!(w[1], 0.0);
    }

    #[test]
    fn mean_is_affine_equivariant() {
        let mut rng = StdRng::seed_from_u64(11);
        let n = 30;
        let p = 2;
        let mut y = Array2::zeros((n, p));
        let mut x = Array2::zeros((n, 1));
        for i in 0..n {
            y[(i, 0)] = rng.random_range(-1.0..1.0);
            y[(i, 1)] = rng.random_range(-1.0..1.0);
            x[(i, 0)] = rng.random_range(-1.0..1.0);
        }
        let a = array![[1.3, -0.4], [0.2, 0.9]];
        let c = array![0.5, -1.2];
        let mut y2 = Array2::zeros((n, p));
        for i in 0..n {
            for r in 0..p {
                y2[(i, r)] = a[(r, 0)] * y[(i, 0)] + a[(r, 1)] * y[(i, 1)] + c[r];
            }
        }
        let d1 = Dataset::from_standardized(y, x.clone()).unwrap();
        let d2 = Dataset::from_standardized(y2, x).unwrap();
        let m1 = estimate_mean(&d1, &[0.1], &spec1(), bw(1.5)).unwrap();
        let m2 = estimate_mean(&d2, &[0.1], &spec1(), bw(1.5)).unwrap();
        for r in 0..p {
            let expect = a[(r, 0)] * m1.point[0] + a[(r, 1)] * m1.point[1] + c[r];
            assert_abs_diff_eq!(m2.point[r], expect, epsilon = 1e-10);
        }
    }

    #[test]
    fn jackknife_combination_is_componentwise() {
        // Constant responses: correction vanishes.
        let y = array![[2.0, -1.0], [2.0, -1.0], [2.0, -1.0]];
        let x = array![[-0.2], [0.0], [0.2]];
        let d = Dataset::from_standardized(y, x).unwrap();
        let m = jackknife_mean(&d, &[0.0], &spec1(), bw(1.0)).unwrap();
        assert_abs_diff_eq!(m[0], 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(m[1], -1.0, epsilon = 1e-12);
    }

    #[test]
    fn jackknife_two_bandwidth_arithmetic() {
        // mu_b = (1,1), mu_{sqrt2 b} = (0.8,1.2) -> 2a - b = (1.2, 0.8).
        let a = array![1.0, 1.0];
        let b = array![0.8, 1.2];
        let out: Array1<f64> = 2.0 * &a - &b;
        assert_abs_diff_eq!(out[0], 1.2, epsilon = 1e-15);
        assert_abs_diff_eq!(out[1], 0.8, epsilon = 1e-15);
    }

    #[test]
    fn jackknife_reduces_boundary_adjacent_bias_on_linear_signal() {
        // Y = X on a fine grid; near (but inside) the boundary the plain
        // local-constant fit is pulled inward, the corrected fit less so.
        let n = 201;
        let mut y = Array2::zeros((n, 1));
        let mut x = Array2::zeros((n, 1));
        for i in 0..n {
            let v = -1.0 + 2.0 * i as f64 / (n - 1) as f64;
            x[(i, 0)] = v;
            y[(i, 0)] = v;
        }
        let d = Dataset::from_standardized(y, x).unwrap();
        // Points whose kernel support at both bandwidths overlaps the edge
        // of the design; there the truncation bias is the dominant term and
        // the two-bandwidth combination cancels most of it.
        let b = bw(0.3);
        for &pt in &[-0.95, 0.95, -0.9, 0.9] {
            let plain = estimate_mean(&d, &[pt], &spec1(), b).unwrap().point[0];
            let corrected = jackknife_mean(&d, &[pt], &spec1(), b).unwrap()[0];
            assert!(
                (corrected - pt).abs() < (plain - pt).abs(),
                "at {pt}: corrected {corrected} vs plain {plain}"
            );
        }
    }

    #[test]
    fn band_half_width_formula() {
        // p = 2, Sigma = I, a = e1, alpha = 0.05, n b^k f = 1000, phi = 0.6.
        let chi2 = chi_square_quantile(2.0, 0.95).unwrap();
        let hw = band_half_width(0.6, chi2, 1.0, 1000.0);
        assert_abs_diff_eq!(hw, 0.05995730754682691, epsilon = 1e-12);
        assert_abs_diff_eq!(hw, 0.0600, epsilon = 1e-4);
        // Quadrupling n halves the width.
        let hw4 = band_half_width(0.6, chi2, 1.0, 4000.0);
        assert_abs_diff_eq!(hw4, hw / 2.0, epsilon = 1e-15);
        // Null contrast gives zero width.
        assert_eq!(band_half_width(0.6, chi2, 0.0, 1000.0), 0.0);
        // Width grows with the quadratic form.
        assert!(band_half_width(0.6, chi2, 2.0, 1000.0) > hw);
    }

    #[test]
    fn confidence_band_end_to_end() {
        let mut rng = StdRng::seed_from_u64(3);
        let n = 300;
        let mut y = Array2::zeros((n, 2));
        let mut x = Array2::zeros((n, 1));
        for i in 0..n {
            let xv: f64 = rng.random_range(-2.0..2.0);
            x[(i, 0)] = xv;
            y[(i, 0)] = xv + 0.1 * rng.random_range(-1.0..1.0);
            y[(i, 1)] = -xv + 0.1 * rng.random_range(-1.0..1.0);
        }
        let d = Dataset::from_standardized(y, x).unwrap();
        let band = confidence_band(&d, &[0.0], &spec1(), bw(0.8), &[1.0, 0.0], 0.05).unwrap();
        assert!(band.half_width > 0.0);
        assert!(band.center.abs() < 0.2);
        assert_abs_diff_eq!(band.level, 0.95, epsilon = 1e-15);
        // Null contrast: degenerate band at zero.
        let null = confidence_band(&d, &[0.0], &spec1(), bw(0.8), &[0.0, 0.0], 0.05).unwrap();
        assert_eq!(null.half_width, 0.0);
        assert_eq!(null.center, 0.0);
    }

    #[test]
    fn confidence_band_rejects_bad_alpha() {
        let d = Dataset::from_standardized(array![[1.0]], array![[0.0]]).unwrap();
        assert!(confidence_band(&d, &[0.0], &spec1(), bw(1.0), &[1.0], 0.0).is_err());
        assert!(confidence_band(&d, &[0.0], &spec1(), bw(1.0), &[1.0], 1.0).is_err());
    }
}
