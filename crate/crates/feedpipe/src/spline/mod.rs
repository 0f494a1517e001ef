//! Cubic B-spline machinery shared by the penalized smoother and the monotone
//! regression fitter.

pub mod monotone;
pub mod pspline;

pub use monotone::fit_monotone_spline;
pub use pspline::{fit_pspline, fit_pspline_gcv};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const CUBIC_ORDER: usize = 4;

#[derive(Debug, Error)]
pub enum SplineError {
    #[error("need at least {need} points, got {got}")]
    TooFewPoints { need: usize, got: usize },
    #[error("x values are all identical")]
    DegenerateX,
    #[error("degenerate_design: penalized normal equations are singular")]
    DegenerateDesign,
    #[error("non-finite value in input")]
    NonFinite,
}

/// A fitted spline: full knot vector, B-spline coefficients, and how it was
/// obtained. `monotone` fits are non-decreasing on their domain.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SplineFit {
    pub knots: Vec<f64>,
    pub coefficients: Vec<f64>,
    pub penalty_lambda: f64,
    pub basis_order: usize,
    pub monotone: bool,
}

impl SplineFit {
    /// Evaluate at `x`, clamped to the fitted domain.
    pub fn eval(&self, x: f64) -> f64 {
        let k = self.basis_order;
        let lo = self.knots[k - 1];
        let hi = self.knots[self.knots.len() - k];
        let x = x.clamp(lo, hi);
        let b = basis_row(&self.knots, k, x);
        b.iter()
            .zip(&self.coefficients)
            .map(|(bi, ci)| bi * ci)
            .sum()
    }

    pub fn eval_many(&self, xs: &[f64]) -> Vec<f64> {
        xs.iter().map(|&x| self.eval(x)).collect()
    }
}

/// Build an open (clamped) knot vector with interior knots at empirical
/// quantiles of `x`. Duplicate quantiles are collapsed.
pub fn quantile_knots(x: &[f64], n_interior: usize, order: usize) -> Vec<f64> {
    let mut sorted = x.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let lo = sorted[0];
    let hi = sorted[sorted.len() - 1];
    let mut interior = Vec::with_capacity(n_interior);
    for i in 1..=n_interior {
        let q = i as f64 / (n_interior + 1) as f64;
        let pos = q * (sorted.len() - 1) as f64;
        let j = pos.floor() as usize;
        let frac = pos - j as f64;
        let v = if j + 1 < sorted.len() {
            sorted[j] * (1.0 - frac) + sorted[j + 1] * frac
        } else {
            sorted[j]
        };
        if v > lo && v < hi && interior.last().map_or(true, |&p| v > p) {
            interior.push(v);
        }
    }
    let mut knots = vec![lo; order];
    knots.extend(interior);
    knots.extend(vec![hi; order]);
    knots
}

/// Default interior-knot count: 20, reduced to max(4, n/10) for small inputs.
pub fn default_interior_knots(n: usize) -> usize {
    20.min(4.max(n / 10))
}

/// Number of B-spline basis functions for a clamped knot vector.
pub fn n_basis(knots: &[f64], order: usize) -> usize {
    knots.len() - order
}

/// One row of the B-spline design matrix (Cox–de Boor recursion).
pub fn basis_row(knots: &[f64], order: usize, x: f64) -> Vec<f64> {
    let m = n_basis(knots, order);
    let mut b = vec![0.0; m];
    // locate the knot span: last i with knots[i] <= x < knots[i+1]
    let hi = knots[knots.len() - order];
    let mut span = if x >= hi {
        // right endpoint belongs to the last non-empty span
        knots.len() - order - 1
    } else {
        let mut s = order - 1;
        while s + 1 < knots.len() - order && knots[s + 1] <= x {
            s += 1;
        }
        s
    };
    while knots[span + 1] <= knots[span] && span > 0 {
        span -= 1;
    }
    // de Boor: build degrees 0..order-1 in place over the active window
    let mut vals = vec![0.0; order];
    vals[0] = 1.0;
    for deg in 1..order {
        let mut saved = 0.0;
        for r in 0..deg {
            let i = span + 1 + r - deg;
            let denom = knots[i + deg] - knots[i];
            let term = if denom > 0.0 { vals[r] / denom } else { 0.0 };
            vals[r] = saved + (knots[i + deg] - x) * term;
            saved = (x - knots[i]) * term;
        }
        vals[deg] = saved;
    }
    for (r, &v) in vals.iter().enumerate() {
        let idx = span + 1 + r - order;
        if idx < m {
            b[idx] = v;
        }
    }
    b
}

/// Dense design matrix: rows are `basis_row` evaluations.
pub fn design_matrix(knots: &[f64], order: usize, xs: &[f64]) -> DMatrix<f64> {
    let m = n_basis(knots, order);
    let mut d = DMatrix::zeros(xs.len(), m);
    for (i, &x) in xs.iter().enumerate() {
        let row = basis_row(knots, order, x);
        for (j, v) in row.into_iter().enumerate() {
            d[(i, j)] = v;
        }
    }
    d
}

/// Greville abscissae: the coefficient sites; a linear function has B-spline
/// coefficients linear in these.
pub fn greville(knots: &[f64], order: usize) -> Vec<f64> {
    let m = n_basis(knots, order);
    (0..m)
        .map(|j| knots[j + 1..j + order].iter().sum::<f64>() / (order - 1) as f64)
        .collect()
}

/// Second divided-difference penalty matrix over the Greville sites. Its null
/// space is exactly the affine coefficient sequences, so any affine function
/// is penalty-free regardless of lambda.
pub fn second_difference_penalty(knots: &[f64], order: usize) -> DMatrix<f64> {
    let g = greville(knots, order);
    let m = g.len();
    if m < 3 {
        return DMatrix::zeros(0, m);
    }
    let mut d = DMatrix::zeros(m - 2, m);
    for i in 0..m - 2 {
        let h1 = g[i + 1] - g[i];
        let h2 = g[i + 2] - g[i + 1];
        // scale by mean spacing so lambda has comparable meaning across knot layouts
        let s = (h1 + h2) / 2.0;
        d[(i, i)] = s / h1;
        d[(i, i + 1)] = -s / h1 - s / h2;
        d[(i, i + 2)] = s / h2;
    }
    d
}

pub(crate) fn check_xy(x: &[f64], y: &[f64]) -> Result<(), SplineError> {
    if x.len() != y.len() || x.len() < 4 {
        return Err(SplineError::TooFewPoints {
            need: 4,
            got: x.len().min(y.len()),
        });
    }
    if x.iter().chain(y.iter()).any(|v| !v.is_finite()) {
        return Err(SplineError::NonFinite);
    }
    let first = x[0];
    if x.iter().all(|&v| v == first) {
        return Err(SplineError::DegenerateX);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn basis_rows_sum_to_one() {
        let x: Vec<f64> = (0..50).map(|i| i as f64 / 49.0).collect();
        let knots = quantile_knots(&x, 7, CUBIC_ORDER);
        for &xi in &x {
            let row = basis_row(&knots, CUBIC_ORDER, xi);
            let s: f64 = row.iter().sum();
            assert!((s - 1.0).abs() < 1e-12, "sum {s} at x={xi}");
            assert!(row.iter().all(|&v| v >= -1e-14));
        }
    }

    #[test]
    fn linear_reproduction_via_greville() {
        // Marsden: coefficients c_j = a*greville_j + b represent a*x + b
        let x: Vec<f64> = (0..40).map(|i| (i as f64).sqrt()).collect();
        let knots = quantile_knots(&x, 6, CUBIC_ORDER);
        let g = greville(&knots, CUBIC_ORDER);
        let coef: Vec<f64> = g.iter().map(|&gi| 2.0 * gi + 1.0).collect();
        let fit = SplineFit {
            knots: knots.clone(),
            coefficients: coef,
            penalty_lambda: 0.0,
            basis_order: CUBIC_ORDER,
            monotone: false,
        };
        for &xi in &x {
            assert!((fit.eval(xi) - (2.0 * xi + 1.0)).abs() < 1e-10);
        }
    }

    #[test]
    fn penalty_annihilates_affine_coefficients() {
        let x: Vec<f64> = (0..60).map(|i| (i as f64 * 0.37).sin() + i as f64 * 0.1).collect();
        let knots = quantile_knots(&x, 9, CUBIC_ORDER);
        let g = greville(&knots, CUBIC_ORDER);
        let d = second_difference_penalty(&knots, CUBIC_ORDER);
        let coef = nalgebra::DVector::from_iterator(g.len(), g.iter().map(|&gi| -3.0 * gi + 0.5));
        let r = &d * coef;
        assert!(r.amax() < 1e-9);
    }
}
