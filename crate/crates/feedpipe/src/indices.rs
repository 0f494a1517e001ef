//! The two environmental indices, both scaled to [-1, 1] with +1 = heat:
//!
//! * InComfort — meteorology only: each retained principal component is
//!   oriented heat-positive, min-max normalized to [0, 1] (linear membership
//!   function), then the components are eigenvalue-weighted and summed.
//! * EASI — intake-aware: boosted trees predict standardized daily mean
//!   intake from the principal-component scores; the signed intake deficit
//!   (reference minus prediction) is oriented against air temperature and
//!   min-max rescaled.

use crate::kmeans::{kmeans_classify, ClusterModel, KmeansError, COMFORT_K};
use crate::models::gbt::{train_gbt, GbtError, GbtModel, GbtParams};
use crate::pca::PcaModel;
use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum IndexError {
    #[error("length mismatch between scores and auxiliary series")]
    LengthMismatch,
    #[error("intake series is constant; EASI is undefined")]
    DegenerateIntake,
    #[error("gbt: {0}")]
    Gbt(#[from] GbtError),
    #[error("kmeans: {0}")]
    Kmeans(#[from] KmeansError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexSeries {
    pub date: NaiveDate,
    pub incomfort: f64,
    pub easi: f64,
    pub incomfort_class: usize,
    pub easi_class: usize,
}

pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut va = 0.0;
    let mut vb = 0.0;
    for (x, y) in a.iter().zip(b) {
        cov += (x - ma) * (y - mb);
        va += (x - ma) * (x - ma);
        vb += (y - mb) * (y - mb);
    }
    if va <= 0.0 || vb <= 0.0 {
        return 0.0;
    }
    cov / (va * vb).sqrt()
}

fn minmax_01(values: &[f64]) -> Vec<f64> {
    let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if hi <= lo {
        return vec![0.5; values.len()]; // constant membership
    }
    values.iter().map(|&v| (v - lo) / (hi - lo)).collect()
}

fn minmax_pm1(values: &[f64]) -> Vec<f64> {
    minmax_01(values)
        .into_iter()
        .map(|v| {
            if v == 0.5 && values.iter().all(|&x| x == values[0]) {
                0.0
            } else {
                2.0 * v - 1.0
            }
        })
        .collect()
}

/// InComfort: eigenvalue-weighted sum of membership-normalized component
/// scores, rescaled to [-1, 1]. Components are sign-oriented so each
/// correlates non-negatively with daily mean air temperature.
pub fn incomfort(
    scores: &[Vec<f64>],
    model: &PcaModel,
    ta_mean: &[f64],
) -> Result<Vec<f64>, IndexError> {
    if scores.len() != ta_mean.len() || scores.is_empty() {
        return Err(IndexError::LengthMismatch);
    }
    let n = scores.len();
    let k = model.n_components;
    let lambda_sum: f64 = model.eigenvalues.iter().sum();
    let mut raw = vec![0.0; n];
    for j in 0..k {
        let mut col: Vec<f64> = scores.iter().map(|s| s[j]).collect();
        if pearson(&col, ta_mean) < 0.0 {
            for v in &mut col {
                *v = -*v;
            }
        }
        let mu = minmax_01(&col);
        let w = model.eigenvalues[j] / lambda_sum;
        for (r, m) in raw.iter_mut().zip(mu) {
            *r += w * m;
        }
    }
    Ok(minmax_pm1(&raw))
}

/// Default boosting preset for the EASI regressor: shallow and regularized,
/// since the score matrix is wide relative to the day count.
pub fn easi_gbt_params(seed: u64) -> GbtParams {
    GbtParams {
        max_depth: 3,
        n_rounds: 200,
        learning_rate: 0.05,
        l2_reg: 10.0,
        min_child_weight: 5,
        subsample: 1.0,
        colsample: 1.0,
        seed,
    }
}

pub struct EasiResult {
    pub values: Vec<f64>,
    pub model: GbtModel,
    /// Days outside the training min-max range, clamped.
    pub clamped: Vec<usize>,
}

/// EASI: train boosted trees to predict standardized daily mean intake from
/// PC scores; the raw index is the predicted intake deficit (train-mean
/// reference minus prediction), oriented heat-positive via air temperature
/// and min-max rescaled over the training rows.
pub fn easi(
    scores: &[Vec<f64>],
    daily_fi: &[f64],
    ta_mean: &[f64],
    train_mask: &[bool],
    params: &GbtParams,
) -> Result<EasiResult, IndexError> {
    let n = scores.len();
    if daily_fi.len() != n || ta_mean.len() != n || train_mask.len() != n {
        return Err(IndexError::LengthMismatch);
    }
    let train_idx: Vec<usize> = (0..n).filter(|&i| train_mask[i]).collect();
    let fi_train: Vec<f64> = train_idx.iter().map(|&i| daily_fi[i]).collect();
    let m = fi_train.iter().sum::<f64>() / fi_train.len() as f64;
    let sd = (fi_train.iter().map(|&v| (v - m) * (v - m)).sum::<f64>()
        / (fi_train.len() as f64 - 1.0))
        .sqrt();
    if !(sd > 0.0) {
        return Err(IndexError::DegenerateIntake);
    }

    let rows: Vec<Vec<f64>> = train_idx.iter().map(|&i| scores[i].clone()).collect();
    let targets: Vec<f64> = fi_train.iter().map(|&v| (v - m) / sd).collect();
    let names: Vec<String> = (0..scores[0].len()).map(|j| format!("pc{j}")).collect();
    let (model, _) = train_gbt(&rows, &targets, &names, params)?;

    // deficit: reference (train mean, 0 after standardization) minus prediction
    let mut raw: Vec<f64> = scores
        .iter()
        .map(|s| -model.predict_unchecked(s))
        .collect();
    if pearson(&raw, ta_mean) < 0.0 {
        for v in &mut raw {
            *v = -*v;
        }
    }
    // min-max over the training period; other rows clamp
    let tr_vals: Vec<f64> = train_idx.iter().map(|&i| raw[i]).collect();
    let lo = tr_vals.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = tr_vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut clamped = Vec::new();
    let values: Vec<f64> = if hi <= lo {
        vec![0.0; n]
    } else {
        raw.iter()
            .enumerate()
            .map(|(i, &v)| {
                let u = (v - lo) / (hi - lo);
                if !(0.0..=1.0).contains(&u) {
                    clamped.push(i);
                }
                2.0 * u.clamp(0.0, 1.0) - 1.0
            })
            .collect()
    };
    Ok(EasiResult { values, model, clamped })
}

/// Classify both index series into the 5 comfort classes and assemble the
/// per-day output.
pub fn classify_series(
    dates: &[NaiveDate],
    incomfort_vals: &[f64],
    easi_vals: &[f64],
    seed: u64,
) -> Result<(Vec<IndexSeries>, ClusterModel, ClusterModel), IndexError> {
    let (ic_model, ic_labels) = kmeans_classify(incomfort_vals, COMFORT_K, seed)?;
    let (ea_model, ea_labels) = kmeans_classify(easi_vals, COMFORT_K, seed.wrapping_add(1))?;
    let series = dates
        .iter()
        .enumerate()
        .map(|(i, &date)| IndexSeries {
            date,
            incomfort: incomfort_vals[i],
            easi: easi_vals[i],
            incomfort_class: ic_labels[i],
            easi_class: ea_labels[i],
        })
        .collect();
    Ok((series, ic_model, ea_model))
}
