//! Intake prediction models: gradient-boosted trees, Bayesian ridge, the
//! stratified train/validation splitter, and a small grid-search driver.

pub mod features;
pub mod gbt;
pub mod metrics;
pub mod ridge;
pub mod split;

use gbt::{train_gbt, GbtError, GbtModel, GbtParams};
use metrics::metrics;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvRecord {
    pub params: GbtParams,
    pub fold: usize,
    pub rmse: f64,
    pub r2: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CvResult {
    pub best_params: GbtParams,
    pub best_mean_rmse: f64,
    pub table: Vec<CvRecord>,
}

/// Hyperparameter grid tried by `cv_search`:
/// depth {3,5,7} x rounds {100,300} x learning rate {0.05,0.1} x l2 {1,10}.
pub fn default_grid(seed: u64) -> Vec<GbtParams> {
    let mut grid = Vec::new();
    for &max_depth in &[3usize, 5, 7] {
        for &n_rounds in &[100usize, 300] {
            for &learning_rate in &[0.05f64, 0.1] {
                for &l2_reg in &[1.0f64, 10.0] {
                    grid.push(GbtParams {
                        max_depth,
                        n_rounds,
                        learning_rate,
                        l2_reg,
                        min_child_weight: 1,
                        subsample: 1.0,
                        colsample: 1.0,
                        seed,
                    });
                }
            }
        }
    }
    grid
}

/// K-fold grid search over boosting hyperparameters. Candidates are ranked
/// by mean fold RMSE; exact ties prefer fewer rounds, then shallower trees.
pub fn cv_search(
    rows: &[Vec<f64>],
    targets: &[f64],
    feature_names: &[String],
    folds: &[Vec<usize>],
    grid: &[GbtParams],
) -> Result<CvResult, GbtError> {
    let mut table = Vec::new();
    let mut best: Option<(f64, GbtParams)> = None;
    for params in grid {
        let mut fold_rmse = Vec::with_capacity(folds.len());
        for (fi, holdout) in folds.iter().enumerate() {
            let hold: std::collections::HashSet<usize> = holdout.iter().copied().collect();
            let mut tr_rows = Vec::new();
            let mut tr_y = Vec::new();
            let mut va_rows = Vec::new();
            let mut va_y = Vec::new();
            for other in folds {
                for &i in other {
                    if hold.contains(&i) {
                        continue;
                    }
                    tr_rows.push(rows[i].clone());
                    tr_y.push(targets[i]);
                }
            }
            for &i in holdout {
                va_rows.push(rows[i].clone());
                va_y.push(targets[i]);
            }
            let (model, _) = train_gbt(&tr_rows, &tr_y, feature_names, params)?;
            let preds = model.predict_batch(&va_rows);
            let m = metrics(&va_y, &preds);
            fold_rmse.push(m.rmse);
            table.push(CvRecord {
                params: params.clone(),
                fold: fi,
                rmse: m.rmse,
                r2: m.r2,
            });
        }
        let mean_rmse = fold_rmse.iter().sum::<f64>() / fold_rmse.len() as f64;
        let better = match &best {
            None => true,
            Some((b, bp)) => {
                mean_rmse < *b
                    || (mean_rmse == *b
                        && (params.n_rounds < bp.n_rounds
                            || (params.n_rounds == bp.n_rounds
                                && params.max_depth < bp.max_depth)))
            }
        };
        if better {
            best = Some((mean_rmse, params.clone()));
        }
    }
    let (best_mean_rmse, best_params) = best
        .map(|(r, p)| (r, p))
        .ok_or(GbtError::EmptyFeatures)?;
    Ok(CvResult {
        best_params,
        best_mean_rmse,
        table,
    })
}

/// Fit the final model on the full training rows with the winning parameters.
pub fn fit_best(
    rows: &[Vec<f64>],
    targets: &[f64],
    feature_names: &[String],
    cv: &CvResult,
) -> Result<GbtModel, GbtError> {
    let (model, _) = train_gbt(rows, targets, feature_names, &cv.best_params)?;
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_has_24_candidates() {
        assert_eq!(default_grid(0).len(), 3 * 2 * 2 * 2);
    }

    #[test]
    fn cv_table_has_grid_times_folds_rows() {
        let n = 60;
        let rows: Vec<Vec<f64>> = (0..n).map(|i| vec![i as f64, (i % 7) as f64]).collect();
        let y: Vec<f64> = rows.iter().map(|r| 2.0 * r[0] + r[1]).collect();
        let names = vec!["a".to_string(), "b".to_string()];
        let folds: Vec<Vec<usize>> = (0..3).map(|f| (0..n).filter(|i| i % 3 == f).collect()).collect();
        // tiny grid to keep this quick
        let grid: Vec<GbtParams> = default_grid(1).into_iter().take(2).collect();
        let res = cv_search(&rows, &y, &names, &folds, &grid).unwrap();
        assert_eq!(res.table.len(), grid.len() * folds.len());
        assert!(res.best_mean_rmse.is_finite());
    }

    #[test]
    fn cv_picks_lower_error_candidate() {
        let n = 120;
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|i| vec![(i as f64 * 0.37).sin(), (i as f64 * 0.11).cos()])
            .collect();
        let y: Vec<f64> = rows.iter().map(|r| 3.0 * r[0] - r[1]).collect();
        let names = vec!["s".to_string(), "c".to_string()];
        let folds: Vec<Vec<usize>> = (0..3).map(|f| (0..n).filter(|i| i % 3 == f).collect()).collect();
        let weak = GbtParams { n_rounds: 1, learning_rate: 0.05, ..GbtParams::default() };
        let strong = GbtParams { n_rounds: 150, learning_rate: 0.1, ..GbtParams::default() };
        let res = cv_search(&rows, &y, &names, &folds, &[weak, strong.clone()]).unwrap();
        assert_eq!(res.best_params.n_rounds, strong.n_rounds);
    }
}
