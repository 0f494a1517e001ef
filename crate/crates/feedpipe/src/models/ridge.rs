//! Bayesian ridge regression fit by evidence maximization: alternating
//! MacKay updates of the noise precision (alpha) and weight precision
//! (lambda) until relative change drops below 1e-6 or 300 iterations.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RidgeError {
    #[error("need at least 2 rows, got {0}")]
    TooFewRows(usize),
    #[error("non-finite value in input")]
    NonFinite,
    #[error("empty feature set")]
    EmptyFeatures,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RidgeModel {
    pub weights: Vec<f64>,
    pub intercept: f64,
    /// Noise precision.
    pub alpha: f64,
    /// Weight precision.
    pub lambda: f64,
    pub n_iter: usize,
}

impl RidgeModel {
    pub fn predict(&self, row: &[f64]) -> f64 {
        self.intercept
            + row
                .iter()
                .zip(&self.weights)
                .map(|(x, w)| x * w)
                .sum::<f64>()
    }
}

fn center(rows: &[Vec<f64>], targets: &[f64]) -> (DMatrix<f64>, DVector<f64>, Vec<f64>, f64) {
    let n = rows.len();
    let p = rows[0].len();
    let mut xm = vec![0.0; p];
    for r in rows {
        for (m, v) in xm.iter_mut().zip(r) {
            *m += v;
        }
    }
    for m in &mut xm {
        *m /= n as f64;
    }
    let ym = targets.iter().sum::<f64>() / n as f64;
    let mut x = DMatrix::zeros(n, p);
    for (i, r) in rows.iter().enumerate() {
        for j in 0..p {
            x[(i, j)] = r[j] - xm[j];
        }
    }
    let y = DVector::from_iterator(n, targets.iter().map(|t| t - ym));
    (x, y, xm, ym)
}

fn solve_weights(
    eig: &SymmetricEigen<f64, nalgebra::Dyn>,
    xty: &DVector<f64>,
    alpha: f64,
    lambda: f64,
) -> DVector<f64> {
    // w = alpha (lambda I + alpha X'X)^{-1} X'y via the eigenbasis of X'X
    let proj = eig.eigenvectors.transpose() * xty;
    let scaled = DVector::from_iterator(
        proj.len(),
        proj.iter()
            .zip(eig.eigenvalues.iter())
            .map(|(&p, &e)| alpha * p / (lambda + alpha * e.max(0.0))),
    );
    &eig.eigenvectors * scaled
}

fn validate(rows: &[Vec<f64>], targets: &[f64]) -> Result<(), RidgeError> {
    if rows.len() < 2 || rows.len() != targets.len() {
        return Err(RidgeError::TooFewRows(rows.len()));
    }
    if rows[0].is_empty() {
        return Err(RidgeError::EmptyFeatures);
    }
    if rows.iter().flatten().chain(targets).any(|v| !v.is_finite()) {
        return Err(RidgeError::NonFinite);
    }
    Ok(())
}

/// Fixed-hyperparameter mode: direct solve of
/// (lambda I + alpha X'X) w = alpha X'y on centered data.
pub fn train_ridge_fixed(
    rows: &[Vec<f64>],
    targets: &[f64],
    alpha: f64,
    lambda: f64,
) -> Result<RidgeModel, RidgeError> {
    validate(rows, targets)?;
    let (x, y, xm, ym) = center(rows, targets);
    let xtx = x.transpose() * &x;
    let eig = SymmetricEigen::new(xtx);
    let xty = x.transpose() * &y;
    let w = solve_weights(&eig, &xty, alpha, lambda);
    let intercept = ym - xm.iter().zip(w.iter()).map(|(m, wi)| m * wi).sum::<f64>();
    Ok(RidgeModel {
        weights: w.as_slice().to_vec(),
        intercept,
        alpha,
        lambda,
        n_iter: 0,
    })
}

/// Evidence-maximization fit.
pub fn train_ridge(rows: &[Vec<f64>], targets: &[f64]) -> Result<RidgeModel, RidgeError> {
    validate(rows, targets)?;
    let n = rows.len();
    let (x, y, xm, ym) = center(rows, targets);
    let xtx = x.transpose() * &x;
    let eig = SymmetricEigen::new(xtx);
    let xty = x.transpose() * &y;

    let y_var = y.norm_squared() / n as f64;
    let mut alpha = if y_var > 0.0 { 1.0 / y_var } else { 1.0 };
    let mut lambda = 1.0;
    let mut n_iter = 0;
    for it in 0..300 {
        n_iter = it + 1;
        let w = solve_weights(&eig, &xty, alpha, lambda);
        // effective number of parameters
        let gamma: f64 = eig
            .eigenvalues
            .iter()
            .map(|&e| {
                let ae = alpha * e.max(0.0);
                ae / (lambda + ae)
            })
            .sum();
        let wtw = w.norm_squared();
        let resid = &y - &x * &w;
        let rss = resid.norm_squared();
        let new_lambda = if wtw > 1e-300 { gamma / wtw } else { lambda };
        // an essentially perfect fit: the noise precision is unbounded, so
        // stop at the current (ridgeless) solution
        if rss <= 1e-12 * y.norm_squared().max(1e-300) {
            break;
        }
        let new_alpha = (n as f64 - gamma).max(1e-6) / rss;
        let rel = ((new_lambda - lambda).abs() / lambda.max(1e-12))
            .max((new_alpha - alpha).abs() / alpha.max(1e-12));
        lambda = new_lambda;
        alpha = new_alpha;
        if rel < 1e-6 {
            break;
        }
    }
    let w = solve_weights(&eig, &xty, alpha, lambda);
    let intercept = ym - xm.iter().zip(w.iter()).map(|(m, wi)| m * wi).sum::<f64>();
    Ok(RidgeModel {
        weights: w.as_slice().to_vec(),
        intercept,
        alpha,
        lambda,
        n_iter,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn noiseless_line_recovers_slope() {
        let rows: Vec<Vec<f64>> = (0..200).map(|i| vec![i as f64 / 10.0]).collect();
        let targets: Vec<f64> = rows.iter().map(|r| 2.0 * r[0]).collect();
        let model = train_ridge(&rows, &targets).unwrap();
        // OLS oracle for y = 2x exactly is slope 2, intercept 0
        assert!((model.weights[0] - 2.0).abs() < 1e-3, "slope {}", model.weights[0]);
        assert!(model.intercept.abs() < 1e-2);
    }

    #[test]
    fn constant_target_gives_zero_weights() {
        let rows: Vec<Vec<f64>> = (0..30).map(|i| vec![i as f64, (i % 3) as f64]).collect();
        let targets = vec![7.5; 30];
        let model = train_ridge(&rows, &targets).unwrap();
        for w in &model.weights {
            assert!(w.abs() < 1e-9);
        }
        assert!((model.intercept - 7.5).abs() < 1e-9);
    }

    #[test]
    fn fixed_mode_matches_direct_solve() {
        use rand::prelude::*;
        use rand_chacha::ChaCha8Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let n = 50;
        let p = 4;
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..p).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let targets: Vec<f64> = rows
            .iter()
            .map(|r| 1.0 + r[0] - 2.0 * r[1] + 0.5 * r[2] + rng.gen_range(-0.05..0.05))
            .collect();
        let (alpha, lambda) = (3.0, 0.7);
        let model = train_ridge_fixed(&rows, &targets, alpha, lambda).unwrap();
        // oracle: dense solve of (lambda I + alpha Xc'Xc) w = alpha Xc'yc
        let (x, y, _, _) = center(&rows, &targets);
        let a = DMatrix::identity(p, p) * lambda + x.transpose() * &x * alpha;
        let rhs = x.transpose() * &y * alpha;
        let w = a.lu().solve(&rhs).unwrap();
        for j in 0..p {
            assert!((model.weights[j] - w[j]).abs() < 1e-8, "j={j}");
        }
    }

    #[test]
    fn lambda_to_zero_approaches_ols() {
        let rows: Vec<Vec<f64>> = (0..40).map(|i| vec![i as f64, (i * i) as f64 / 40.0]).collect();
        let targets: Vec<f64> = rows.iter().map(|r| 3.0 * r[0] - 0.5 * r[1] + 1.0).collect();
        let model = train_ridge_fixed(&rows, &targets, 1.0, 1e-12).unwrap();
        assert!((model.weights[0] - 3.0).abs() < 1e-6);
        assert!((model.weights[1] + 0.5).abs() < 1e-6);
        assert!((model.intercept - 1.0).abs() < 1e-5);
    }

    #[test]
    fn non_finite_input_is_error() {
        let rows = vec![vec![1.0], vec![f64::NAN]];
        let targets = vec![1.0, 2.0];
        assert!(train_ridge(&rows, &targets).is_err());
    }
}
