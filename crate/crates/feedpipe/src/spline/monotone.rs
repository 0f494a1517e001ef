//! Monotone (non-decreasing) spline regression: least squares over an
//! I-spline basis (cumulative B-splines) with non-negative slope coefficients
//! and a free intercept, solved by Lawson–Hanson non-negative least squares.

use super::{
    check_xy, default_interior_knots, design_matrix, quantile_knots, SplineError, SplineFit,
    CUBIC_ORDER,
};
use nalgebra::{DMatrix, DVector};

/// Fit a non-decreasing cubic spline. The returned coefficients are plain
/// B-spline coefficients (non-decreasing sequence), so [`SplineFit::eval`]
/// applies unchanged.
pub fn fit_monotone_spline(x: &[f64], y: &[f64]) -> Result<SplineFit, SplineError> {
    check_xy(x, y)?;
    let knots = quantile_knots(x, default_interior_knots(x.len()), CUBIC_ORDER);
    let b = design_matrix(&knots, CUBIC_ORDER, x);
    let m = b.ncols();
    let n = b.nrows();

    // I-spline columns: Z_j = sum of B-spline columns j..m-1, j = 1..m-1.
    // f = intercept + sum d_j Z_j with d_j >= 0 is equivalent to a
    // non-decreasing B-spline coefficient sequence (partition of unity).
    let mut z = DMatrix::zeros(n, m - 1);
    for i in 0..n {
        let mut acc = 0.0;
        for j in (1..m).rev() {
            acc += b[(i, j)];
            z[(i, j - 1)] = acc;
        }
    }

    // Profile out the free intercept by centering.
    let ybar = y.iter().sum::<f64>() / n as f64;
    let yc = DVector::from_iterator(n, y.iter().map(|&v| v - ybar));
    let col_means: Vec<f64> = (0..m - 1).map(|j| z.column(j).sum() / n as f64).collect();
    let mut zc = z.clone();
    for j in 0..m - 1 {
        for i in 0..n {
            zc[(i, j)] -= col_means[j];
        }
    }

    let d = nnls(&zc, &yc).ok_or(SplineError::DegenerateDesign)?;
    let intercept = ybar - col_means.iter().zip(d.iter()).map(|(c, v)| c * v).sum::<f64>();

    // back to B-spline coefficients: c_0 = intercept, c_l = intercept + sum_{j<=l} d_j
    let mut coef = vec![intercept; m];
    let mut acc = intercept;
    for l in 1..m {
        acc += d[l - 1];
        coef[l] = acc;
    }
    Ok(SplineFit {
        knots,
        coefficients: coef,
        penalty_lambda: 0.0,
        basis_order: CUBIC_ORDER,
        monotone: true,
    })
}

/// Lawson–Hanson active-set NNLS: argmin ||A x - b||, x >= 0.
fn nnls(a: &DMatrix<f64>, b: &DVector<f64>) -> Option<DVector<f64>> {
    let m = a.ncols();
    let mut passive = vec![false; m];
    let mut x = DVector::zeros(m);
    let tol = 1e-10 * a.amax().max(1.0);
    let max_outer = 3 * m + 30;

    for _ in 0..max_outer {
        let resid = b - a * &x;
        let w = a.transpose() * &resid;
        // most-violating inactive coordinate
        let mut best: Option<(usize, f64)> = None;
        for j in 0..m {
            if !passive[j] && w[j] > tol {
                if best.map_or(true, |(_, bw)| w[j] > bw) {
                    best = Some((j, w[j]));
                }
            }
        }
        let Some((j_add, _)) = best else {
            return Some(x);
        };
        passive[j_add] = true;

        // inner loop: solve LS on the passive set, backtrack if infeasible
        loop {
            let idx: Vec<usize> = (0..m).filter(|&j| passive[j]).collect();
            let sub = a.select_columns(idx.iter());
            let svd = sub.svd(true, true);
            let s = svd.solve(b, 1e-12).ok()?;
            if s.iter().all(|&v| v > tol) {
                x.fill(0.0);
                for (k, &j) in idx.iter().enumerate() {
                    x[j] = s[k];
                }
                break;
            }
            // step toward s until the first coordinate hits zero
            let mut alpha = f64::INFINITY;
            for (k, &j) in idx.iter().enumerate() {
                if s[k] <= tol {
                    let denom = x[j] - s[k];
                    if denom > 0.0 {
                        alpha = alpha.min(x[j] / denom);
                    }
                }
            }
            if !alpha.is_finite() {
                alpha = 0.0;
            }
            for (k, &j) in idx.iter().enumerate() {
                x[j] += alpha * (s[k] - x[j]);
                if x[j] <= tol {
                    x[j] = 0.0;
                    passive[j] = false;
                }
            }
            if idx.iter().all(|&j| !passive[j]) {
                // everything dropped; give up on this coordinate
                break;
            }
        }
    }
    Some(x)
}
