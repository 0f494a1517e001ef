//! Penalized cubic B-spline smoother: exact solve of the penalized normal
//! equations, with the smoothing parameter picked by generalized
//! cross-validation over a log grid when not supplied.

use super::{
    check_xy, default_interior_knots, design_matrix, quantile_knots, second_difference_penalty,
    SplineError, SplineFit, CUBIC_ORDER,
};
use nalgebra::{DMatrix, DVector};

/// Fit with a fixed penalty. Minimizes ||y - B c||^2 + lambda ||D c||^2 where
/// D is the second divided-difference penalty, and returns the exact solution
/// of (B'B + lambda D'D) c = B'y.
pub fn fit_pspline(x: &[f64], y: &[f64], lambda: f64) -> Result<SplineFit, SplineError> {
    check_xy(x, y)?;
    let knots = quantile_knots(x, default_interior_knots(x.len()), CUBIC_ORDER);
    fit_with_knots(x, y, lambda, &knots)
}

fn fit_with_knots(
    x: &[f64],
    y: &[f64],
    lambda: f64,
    knots: &[f64],
) -> Result<SplineFit, SplineError> {
    let b = design_matrix(knots, CUBIC_ORDER, x);
    let d = second_difference_penalty(knots, CUBIC_ORDER);
    // least squares on the stacked system [B; sqrt(lambda) D] rather than the
    // normal equations: much better conditioned for large lambda, and the
    // SVD pseudo-inverse absorbs empty-span basis columns
    let ncoef = b.ncols();
    let m = b.nrows() + d.nrows();
    let mut s = DMatrix::zeros(m, ncoef);
    let mut rhs = DVector::zeros(m);
    for i in 0..b.nrows() {
        for j in 0..ncoef {
            s[(i, j)] = b[(i, j)];
        }
        rhs[i] = y[i];
    }
    let sl = lambda.sqrt();
    for i in 0..d.nrows() {
        for j in 0..ncoef {
            s[(b.nrows() + i, j)] = sl * d[(i, j)];
        }
    }
    let svd = s.svd(true, true);
    let smax = svd.singular_values.max();
    let coef = svd
        .solve(&rhs, smax * 1e-12)
        .map_err(|_| SplineError::DegenerateDesign)?;
    Ok(SplineFit {
        knots: knots.to_vec(),
        coefficients: coef.as_slice().to_vec(),
        penalty_lambda: lambda,
        basis_order: CUBIC_ORDER,
        monotone: false,
    })
}

/// GCV score for one lambda: n * RSS / (n - tr(H))^2.
fn gcv_score(b: &DMatrix<f64>, d: &DMatrix<f64>, y: &DVector<f64>, lambda: f64) -> Option<f64> {
    let n = b.nrows() as f64;
    let g = b.transpose() * b;
    let mut a = g.clone();
    if d.nrows() > 0 {
        a += lambda * d.transpose() * d;
    }
    for i in 0..a.nrows() {
        a[(i, i)] += 1e-10;
    }
    let chol = a.cholesky()?;
    let coef = chol.solve(&(b.transpose() * y));
    let resid = y - b * &coef;
    let rss = resid.norm_squared();
    // tr(H) = tr(A^{-1} G)
    let ainv_g = chol.solve(&g);
    let edf: f64 = (0..ainv_g.nrows()).map(|i| ainv_g[(i, i)]).sum();
    let denom = (n - edf).max(1e-6);
    Some(n * rss / (denom * denom))
}

/// Fit with lambda chosen by GCV over {1e-3 .. 1e4} (log grid).
pub fn fit_pspline_gcv(x: &[f64], y: &[f64]) -> Result<SplineFit, SplineError> {
    check_xy(x, y)?;
    let knots = quantile_knots(x, default_interior_knots(x.len()), CUBIC_ORDER);
    let b = design_matrix(&knots, CUBIC_ORDER, x);
    let d = second_difference_penalty(&knots, CUBIC_ORDER);
    let yv = DVector::from_column_slice(y);
    let mut best = (f64::INFINITY, 1.0);
    for k in -3..=4 {
        let lambda = 10f64.powi(k);
        if let Some(score) = gcv_score(&b, &d, &yv, lambda) {
            if score < best.0 {
                best = (score, lambda);
            }
        }
    }
    if !best.0.is_finite() {
        return Err(SplineError::DegenerateDesign);
    }
    fit_with_knots(x, y, best.1, &knots)
}
