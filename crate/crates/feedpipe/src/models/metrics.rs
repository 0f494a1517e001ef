use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub rmse: f64,
    /// None when the true values have zero variance.
    pub r2: Option<f64>,
}

/// RMSE and R^2 (SST about the mean of `y_true`).
pub fn metrics(y_true: &[f64], y_pred: &[f64]) -> Metrics {
    assert!(y_true.len() == y_pred.len() && y_true.len() >= 2);
    let n = y_true.len() as f64;
    let sse: f64 = y_true
        .iter()
        .zip(y_pred)
        .map(|(t, p)| (t - p) * (t - p))
        .sum();
    let mean = y_true.iter().sum::<f64>() / n;
    let sst: f64 = y_true.iter().map(|t| (t - mean) * (t - mean)).sum();
    Metrics {
        rmse: (sse / n).sqrt(),
        r2: if sst > 0.0 { Some(1.0 - sse / sst) } else { None },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_prediction() {
        let y = vec![1.0, 2.0, 3.0];
        let m = metrics(&y, &y);
        assert_eq!(m.rmse, 0.0);
        assert_eq!(m.r2, Some(1.0));
    }

    #[test]
    fn mean_prediction_has_r2_zero() {
        let y = vec![1.0, 2.0, 3.0, 4.0];
        let pred = vec![2.5; 4];
        let m = metrics(&y, &pred);
        assert!((m.r2.unwrap()).abs() < 1e-12);
    }

    #[test]
    fn hand_computed_four_points() {
        // {(1,2),(2,2),(3,4),(4,4)}: sse = 1+0+1+0 = 2, sst = 5
        let y = vec![1.0, 2.0, 3.0, 4.0];
        let pred = vec![2.0, 2.0, 4.0, 4.0];
        let m = metrics(&y, &pred);
        assert!((m.rmse - 0.5f64.sqrt()).abs() < 1e-12);
        assert!((m.r2.unwrap() - 0.6).abs() < 1e-12);
    }

    #[test]
    fn zero_variance_flags_r2() {
        let y = vec![2.0, 2.0, 2.0];
        let m = metrics(&y, &[1.0, 2.0, 3.0]);
        assert_eq!(m.r2, None);
        assert!(m.rmse > 0.0);
    }
}
