//! Stratified 50/50 train/validation split (strata: animal x meteorological
//! season) with 3 disjoint CV folds carved from the training half.

use chrono::{Datelike, NaiveDate};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SplitError {
    #[error("need at least 10 rows, got {0}")]
    TooFewRows(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub train: Vec<bool>,
    pub validation: Vec<bool>,
    /// Disjoint subsets of the training half, by row index.
    pub folds: Vec<Vec<usize>>,
}

pub fn season_of(date: NaiveDate) -> &'static str {
    match date.month() {
        12 | 1 | 2 => "DJF",
        3..=5 => "MAM",
        6..=8 => "JJA",
        _ => "SON",
    }
}

/// Build a deterministic stratified split. Within each stratum, half the rows
/// go to train (odd counts favor train), chosen by a seeded shuffle.
pub fn split(
    strata: &[(String, String)],
    seed: u64,
    n_folds: usize,
) -> Result<SplitPlan, SplitError> {
    let n = strata.len();
    if n < 10 {
        return Err(SplitError::TooFewRows(n));
    }
    let mut groups: BTreeMap<&(String, String), Vec<usize>> = BTreeMap::new();
    for (i, key) in strata.iter().enumerate() {
        groups.entry(key).or_default().push(i);
    }
    let mut train = vec![false; n];
    for (g, (_, idxs)) in groups.iter_mut().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (g as u64).wrapping_mul(0x9E3779B97F4A7C15));
        idxs.shuffle(&mut rng);
        let n_train = idxs.len().div_ceil(2); // ties favor train
        for &i in idxs.iter().take(n_train) {
            train[i] = true;
        }
    }
    let validation: Vec<bool> = train.iter().map(|&t| !t).collect();

    // CV folds: round-robin over a seeded shuffle of the training rows
    let mut train_rows: Vec<usize> = (0..n).filter(|&i| train[i]).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(0xF01D));
    train_rows.shuffle(&mut rng);
    let mut folds = vec![Vec::new(); n_folds.max(1)];
    for (k, &i) in train_rows.iter().enumerate() {
        folds[k % n_folds.max(1)].push(i);
    }
    for f in &mut folds {
        f.sort_unstable();
    }
    Ok(SplitPlan { train, validation, folds })
}
