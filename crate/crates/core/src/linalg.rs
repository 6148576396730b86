//! Dense linear algebra for the small (p x p) matrices this crate works with.

use ndarray::Array2;

/// Determinant by LU decomposition with partial pivoting.
pub fn determinant(m: &Array2<f64>) -> f64 {
    let n = m.nrows();
    assert_eq!(n, m.ncols(), "determinant requires a square matrix");
    if n == 0 {
        return 1.0;
    }
    if n == 1 {
        return m[(0, 0)];
    }
    if n == 2 {
        return m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)];
    }
    let mut a = m.clone();
    let mut det = 1.0;
    for col in 0..n {
        let mut pivot = col;
        for row in col + 1..n {
            if a[(row, col)].abs() > a[(pivot, col)].abs() {
                pivot = row;
            }
        }
        if a[(pivot, col)] == 0.0 {
            return 0.0;
        }
        if pivot != col {
            for j in 0..n {
                let tmp = a[(col, j)];
                a[(col, j)] = a[(pivot, j)];
                a[(pivot, j)] = tmp;
            }
            det = -det;
        }
        det *= a[(col, col)];
        for row in col + 1..n {
            let factor = a[(row, col)] / a[(col, col)];
            for j in col..n {
                a[(row, j)] -= factor * a[(col, j)];
            }
        }
    }
    det
}

/// Eigenvalues of a symmetric matrix by the cyclic Jacobi method,
/// returned in ascending order.
pub fn sym_eigenvalues(m: &Array2<f64>) -> Vec<f64> {
    let n = m.nrows();
    assert_eq!(n, m.ncols(), "eigenvalues require a square matrix");
    let mut a = m.clone();
    for _sweep in 0..100 {
        let mut off = 0.0;
        for i in 0..n {
            for j in i + 1..n {
                off += a[(i, j)] * a[(i, j)];
            }
        }
        if off.sqrt() < 1e-14 * (1.0 + frobenius(&a)) {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = if theta >= 0.0 {
                    1.0 / (theta + (1.0 + theta * theta).sqrt())
                } else {
                    -1.0 / (-theta + (1.0 + theta * theta).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut eigs: Vec<f64> = (0..n).map(|i| a[(i, i)]).collect();
    eigs.sort_by(|x, y| x.partial_cmp(y).unwrap());
    eigs
}

fn frobenius(a: &Array2<f64>) -> f64 {
    a.iter().map(|v| v * v).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    #[test]
    fn determinant_closed_forms() {
        assert_abs_diff_eq!(
            determinant(&array![[2.0, 1.0], [1.0, 2.0]]),
            3.0,
            epsilon = 1e-14
        );
        assert_abs_diff_eq!(
            determinant(&array![[0.5, 0.0], [0.0, 0.5]]),
            0.25,
            epsilon = 1e-14
        );
        let m = array![[2.0, 1.0, 0.0], [1.0, 3.0, 1.0], [0.0, 1.0, 4.0]];
        // cofactor expansion: 2*(12-1) - 1*(4-0) = 18
        assert_abs_diff_eq!(determinant(&m), 18.0, epsilon = 1e-12);
    }

    #[test]
    fn jacobi_eigenvalues_known_matrix() {
        let m = array![[2.0, 1.0], [1.0, 2.0]];
        let e = sym_eigenvalues(&m);
        assert_abs_diff_eq!(e[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(e[1], 3.0, epsilon = 1e-12);
    }

    #[test]
    fn jacobi_matches_determinant_product() {
        let m = array![[4.0, 1.0, 0.5], [1.0, 3.0, -0.2], [0.5, -0.2, 5.0]];
        let e = sym_eigenvalues(&m);
        let prod: f64 = e.iter().product();
        assert_abs_diff_eq!(prod, determinant(&m), epsilon = 1e-10);
    }
}
