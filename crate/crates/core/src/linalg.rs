use nalgebra::{DMatrix, DVector};

/// Ridge penalty used when the design matrix is rank deficient.
pub const RIDGE_PENALTY: f64 = 1e-6;
const RANK_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq)]
pub struct LeastSquaresFit {
    pub coefficients: DVector<f64>,
    /// True when the ridge fallback produced the coefficients.
    pub ridge: bool,
}

/// Minimizes `|y - X b|^2` through a QR factorization of `x`. Rank-deficient
/// or underdetermined systems are solved as ridge regression with
/// [`RIDGE_PENALTY`] instead.
pub fn solve_least_squares(x: &DMatrix<f64>, y: &DVector<f64>) -> LeastSquaresFit {
    let (n, q) = x.shape();
    assert_eq!(n, y.len(), "design rows must match response length");
    if n >= q && q > 0 {
        let qr = x.clone().qr();
        let r = qr.r();
        let diag: Vec<f64> = (0..q).map(|i| r[(i, i)].abs()).collect();
        let top = diag.iter().copied().fold(0.0, f64::max);
        if top > 0.0 && diag.iter().all(|&d| d > RANK_TOL * top) {
            let qty = qr.q().transpose() * y;
            if let Some(b) = r.solve_upper_triangular(&qty) {
                if b.iter().all(|v| v.is_finite()) {
                    return LeastSquaresFit {
                        coefficients: b,
                        ridge: false,
                    };
                }
            }
        }
    }
    ridge(x, y, RIDGE_PENALTY)
}

fn ridge(x: &DMatrix<f64>, y: &DVector<f64>, lambda: f64) -> LeastSquaresFit {
    let q = x.ncols();
    let gram = x.transpose() * x + DMatrix::identity(q, q) * lambda;
    let rhs = x.transpose() * y;
    let coefficients = match gram.clone().cholesky() {
        Some(ch) => ch.solve(&rhs),
        None => gram.lu().solve(&rhs).unwrap_or_else(|| DVector::zeros(q)),
    };
    LeastSquaresFit {
        coefficients,
        ridge: true,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_point_line() {
        let x = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 1.0, 1.0]);
        let y = DVector::from_vec(vec![1.0, 3.0]);
        let fit = solve_least_squares(&x, &y);
        assert!(!fit.ridge);
        assert!((fit.coefficients[0] - 1.0).abs() < 1e-12);
        assert!((fit.coefficients[1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn collinear_design_uses_ridge() {
        // second and third columns are identical
        let x = DMatrix::from_row_slice(4, 3, &[1.0, 1.0, 1.0, 1.0, 2.0, 2.0, 1.0, 3.0, 3.0, 1.0, 4.0, 4.0]);
        let y = DVector::from_vec(vec![2.0, 4.0, 6.0, 8.0]);
        let fit = solve_least_squares(&x, &y);
        assert!(fit.ridge);
        let pred = &x * &fit.coefficients;
        assert!((pred - y).norm() < 1e-4);
    }

    #[test]
    fn underdetermined_uses_ridge() {
        let x = DMatrix::from_row_slice(1, 2, &[1.0, 2.0]);
        let y = DVector::from_vec(vec![3.0]);
        let fit = solve_least_squares(&x, &y);
        assert!(fit.ridge);
        assert!(((&x * &fit.coefficients)[0] - 3.0).abs() < 1e-4);
    }
}
