//! Principal component analysis by eigendecomposition of the sample
//! covariance, keeping the smallest set of components that explains the
//! target variance fraction (95% by default).
//!
//! For wide matrices (more features than rows, the usual shape for the
//! 8,736-column lag matrix) the decomposition goes through the row Gram
//! matrix, which is numerically equivalent to a thin SVD of the centered
//! data.

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PcaError {
    #[error("need at least 2 rows, got {0}")]
    TooFewRows(usize),
    #[error("matrix has no variance")]
    ZeroVariance,
    #[error("feature dimension mismatch: model has {model}, data has {data}")]
    DimensionMismatch { model: usize, data: usize },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PcaModel {
    /// Row-major, n_components x n_features; rows are orthonormal.
    pub components: Vec<Vec<f64>>,
    /// Sample covariance eigenvalues for the retained components,
    /// non-increasing.
    pub eigenvalues: Vec<f64>,
    pub explained_variance_ratio: Vec<f64>,
    pub n_components: usize,
    pub n_features: usize,
    /// Column means of the training data.
    pub mean: Vec<f64>,
    pub total_variance: f64,
}

fn column_means(data: &[f64], n_rows: usize, n_cols: usize) -> Vec<f64> {
    let mut means = vec![0.0; n_cols];
    for i in 0..n_rows {
        for j in 0..n_cols {
            means[j] += data[i * n_cols + j];
        }
    }
    for m in &mut means {
        *m /= n_rows as f64;
    }
    means
}

/// Fit PCA on a row-major matrix, retaining the smallest number of components
/// whose cumulative explained-variance ratio reaches `target_variance`.
pub fn fit_pca(
    data: &[f64],
    n_rows: usize,
    n_cols: usize,
    target_variance: f64,
) -> Result<PcaModel, PcaError> {
    if n_rows < 2 {
        return Err(PcaError::TooFewRows(n_rows));
    }
    let mean = column_means(data, n_rows, n_cols);
    let centered: Vec<f64> = (0..n_rows * n_cols)
        .map(|idx| data[idx] - mean[idx % n_cols])
        .collect();
    let denom = (n_rows - 1) as f64;

    // (eigenvalue of covariance, component vector) pairs, descending
    let pairs: Vec<(f64, Vec<f64>)> = if n_cols <= n_rows {
        // covariance route: C = Xc' Xc / (n-1)
        let xc = DMatrix::from_row_slice(n_rows, n_cols, &centered);
        let cov = xc.transpose() * &xc / denom;
        let eig = SymmetricEigen::new(cov);
        let mut pairs: Vec<(f64, Vec<f64>)> = (0..n_cols)
            .map(|j| {
                (
                    eig.eigenvalues[j].max(0.0),
                    eig.eigenvectors.column(j).iter().cloned().collect(),
                )
            })
            .collect();
        pairs.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
        pairs
    } else {
        // Gram route: G = Xc Xc'; v_i = Xc' u_i / s_i
        let rows: Vec<&[f64]> = (0..n_rows)
            .map(|i| &centered[i * n_cols..(i + 1) * n_cols])
            .collect();
        let gram_rows: Vec<Vec<f64>> = (0..n_rows)
            .into_par_iter()
            .map(|i| {
                (0..=i)
                    .map(|j| rows[i].iter().zip(rows[j]).map(|(a, b)| a * b).sum())
                    .collect()
            })
            .collect();
        let mut g = DMatrix::zeros(n_rows, n_rows);
        for (i, gr) in gram_rows.iter().enumerate() {
            for (j, &v) in gr.iter().enumerate() {
                g[(i, j)] = v;
                g[(j, i)] = v;
            }
        }
        let eig = SymmetricEigen::new(g);
        let mut order: Vec<usize> = (0..n_rows).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].partial_cmp(&eig.eigenvalues[a]).unwrap());
        let max_ev = eig.eigenvalues[order[0]].max(0.0);
        order
            .into_par_iter()
            .filter_map(|idx| {
                let ev = eig.eigenvalues[idx];
                if ev <= 1e-12 * max_ev.max(1.0) {
                    return None;
                }
                let s = ev.sqrt();
                let u = eig.eigenvectors.column(idx);
                let mut v = vec![0.0; n_cols];
                for (i, row) in rows.iter().enumerate() {
                    let ui = u[i] / s;
                    for (vj, &xj) in v.iter_mut().zip(row.iter()) {
                        *vj += ui * xj;
                    }
                }
                Some((ev / denom, v))
            })
            .collect()
    };

    let total_variance: f64 = if n_cols <= n_rows {
        pairs.iter().map(|(ev, _)| ev).sum()
    } else {
        // full trace, including any numerically discarded directions
        (0..n_rows)
            .map(|i| {
                centered[i * n_cols..(i + 1) * n_cols]
                    .iter()
                    .map(|v| v * v)
                    .sum::<f64>()
            })
            .sum::<f64>()
            / denom
    };
    if total_variance <= 0.0 {
        return Err(PcaError::ZeroVariance);
    }

    let mut components = Vec::new();
    let mut eigenvalues = Vec::new();
    let mut ratios = Vec::new();
    let mut cum = 0.0;
    for (ev, mut v) in pairs {
        if ev <= 0.0 {
            break;
        }
        // deterministic sign: largest-magnitude coordinate is positive
        let mut pivot = 0;
        for (j, &vj) in v.iter().enumerate() {
            if vj.abs() > v[pivot].abs() {
                pivot = j;
            }
        }
        if v[pivot] < 0.0 {
            for vj in &mut v {
                *vj = -*vj;
            }
        }
        let ratio = ev / total_variance;
        cum += ratio;
        components.push(v);
        eigenvalues.push(ev);
        ratios.push(ratio);
        if cum >= target_variance {
            break;
        }
    }
    Ok(PcaModel {
        n_components: components.len(),
        n_features: n_cols,
        components,
        eigenvalues,
        explained_variance_ratio: ratios,
        mean,
        total_variance,
    })
}

/// Project rows onto the retained components: scores = (X - mean) V'.
pub fn project(
    data: &[f64],
    n_rows: usize,
    n_cols: usize,
    model: &PcaModel,
) -> Result<Vec<Vec<f64>>, PcaError> {
    if n_cols != model.n_features {
        return Err(PcaError::DimensionMismatch {
            model: model.n_features,
            data: n_cols,
        });
    }
    Ok((0..n_rows)
        .into_par_iter()
        .map(|i| {
            let row = &data[i * n_cols..(i + 1) * n_cols];
            model
                .components
                .iter()
                .map(|c| {
                    row.iter()
                        .zip(c.iter().zip(&model.mean))
                        .map(|(&x, (&cj, &mj))| (x - mj) * cj)
                        .sum()
                })
                .collect()
        })
        .collect())
}

/// Reconstruct rows from scores: X ~= mean + scores V.
pub fn reconstruct(scores: &[Vec<f64>], model: &PcaModel) -> Vec<Vec<f64>> {
    scores
        .iter()
        .map(|s| {
            let mut row = model.mean.clone();
            for (sk, comp) in s.iter().zip(&model.components) {
                for (rj, &cj) in row.iter_mut().zip(comp) {
                    *rj += sk * cj;
                }
            }
            row
        })
        .collect()
}

impl PcaModel {
    /// Max absolute deviation of V V' from identity.
    pub fn orthonormality_error(&self) -> f64 {
        let k = self.n_components;
        let mut worst: f64 = 0.0;
        for i in 0..k {
            for j in i..k {
                let dot: f64 = self.components[i]
                    .iter()
                    .zip(&self.components[j])
                    .map(|(a, b)| a * b)
                    .sum();
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((dot - target).abs());
            }
        }
        worst
    }
}
