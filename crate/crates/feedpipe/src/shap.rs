//! Per-prediction feature attributions for the boosted-tree models using the
//! path-dependent TreeSHAP recursion. Absent features are marginalized along
//! tree paths in proportion to the training cover stored on each node, so the
//! attributions plus the expected value reconstruct the prediction exactly.

use crate::models::gbt::{GbtModel, Tree};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapRow {
    /// One value per feature, same order as the model's feature names.
    pub values: Vec<f64>,
    /// Expected model output over the training distribution.
    pub base: f64,
}

impl ShapRow {
    pub fn total(&self) -> f64 {
        self.base + self.values.iter().sum::<f64>()
    }
}

#[derive(Clone, Copy)]
struct PathElement {
    feature: i32,
    zero_fraction: f64,
    one_fraction: f64,
    pweight: f64,
}

fn extend(path: &mut Vec<PathElement>, zero_fraction: f64, one_fraction: f64, feature: i32) {
    path.push(PathElement {
        feature,
        zero_fraction,
        one_fraction,
        pweight: if path.is_empty() { 1.0 } else { 0.0 },
    });
    let l = path.len();
    for i in (0..l - 1).rev() {
        path[i + 1].pweight += one_fraction * path[i].pweight * (i + 1) as f64 / l as f64;
        path[i].pweight = zero_fraction * path[i].pweight * (l - 1 - i) as f64 / l as f64;
    }
}

fn unwind(path: &mut Vec<PathElement>, index: usize) {
    let l = path.len();
    let one = path[index].one_fraction;
    let zero = path[index].zero_fraction;
    let mut next = path[l - 1].pweight;
    for i in (0..l - 1).rev() {
        if one != 0.0 {
            let tmp = path[i].pweight;
            path[i].pweight = next * l as f64 / ((i + 1) as f64 * one);
            next = tmp - path[i].pweight * zero * (l - 1 - i) as f64 / l as f64;
        } else {
            path[i].pweight = path[i].pweight * l as f64 / (zero * (l - 1 - i) as f64);
        }
    }
    for i in index..l - 1 {
        path[i].feature = path[i + 1].feature;
        path[i].zero_fraction = path[i + 1].zero_fraction;
        path[i].one_fraction = path[i + 1].one_fraction;
    }
    path.pop();
}

fn unwound_sum(path: &[PathElement], index: usize) -> f64 {
    let l = path.len();
    let one = path[index].one_fraction;
    let zero = path[index].zero_fraction;
    let mut total = 0.0;
    let mut next = path[l - 1].pweight;
    for i in (0..l - 1).rev() {
        if one != 0.0 {
            let tmp = next * l as f64 / ((i + 1) as f64 * one);
            total += tmp;
            next = path[i].pweight - tmp * zero * (l - 1 - i) as f64 / l as f64;
        } else {
            total += path[i].pweight / (zero * (l - 1 - i) as f64 / l as f64);
        }
    }
    total
}

// Each recursion level owns its copy of the path: `unwind` rewrites the
// pweights of every element, so a shared stack would corrupt the caller's
// state.
fn tree_shap_recurse(
    tree: &Tree,
    x: &[f64],
    phi: &mut [f64],
    node: usize,
    mut path: Vec<PathElement>,
    parent_zero: f64,
    parent_one: f64,
    parent_feature: i32,
) {
    extend(&mut path, parent_zero, parent_one, parent_feature);
    let n = &tree.nodes[node];
    if n.feature < 0 {
        for i in 1..path.len() {
            let w = unwound_sum(&path, i);
            let e = &path[i];
            phi[e.feature as usize] += w * (e.one_fraction - e.zero_fraction) * n.value;
        }
    } else {
        let f = n.feature as usize;
        let (hot, cold) = if x[f] < n.threshold {
            (n.left as usize, n.right as usize)
        } else {
            (n.right as usize, n.left as usize)
        };
        let mut hot_zero = tree.nodes[hot].cover / n.cover;
        let mut cold_zero = tree.nodes[cold].cover / n.cover;
        let mut one = 1.0;
        // a split on a feature already on the path reuses its fractions
        if let Some(k) = path.iter().position(|e| e.feature == n.feature) {
            one = path[k].one_fraction;
            hot_zero *= path[k].zero_fraction;
            cold_zero *= path[k].zero_fraction;
            unwind(&mut path, k);
        }
        tree_shap_recurse(tree, x, phi, hot, path.clone(), hot_zero, one, n.feature);
        tree_shap_recurse(tree, x, phi, cold, path, cold_zero, 0.0, n.feature);
    }
}

/// Expected output of one tree under the cover-weighted training distribution.
fn tree_expectation(tree: &Tree, node: usize) -> f64 {
    let n = &tree.nodes[node];
    if n.feature < 0 {
        n.value
    } else {
        (tree.nodes[n.left as usize].cover * tree_expectation(tree, n.left as usize)
            + tree.nodes[n.right as usize].cover * tree_expectation(tree, n.right as usize))
            / n.cover
    }
}

pub fn expected_value(model: &GbtModel) -> f64 {
    model.base_value
        + model.learning_rate
            * model
                .trees
                .iter()
                .map(|t| tree_expectation(t, 0))
                .sum::<f64>()
}

pub fn shap_values(model: &GbtModel, row: &[f64]) -> ShapRow {
    let n_features = model.feature_names.len();
    let mut phi = vec![0.0; n_features];
    for tree in &model.trees {
        let mut tphi = vec![0.0; n_features];
        let path = Vec::with_capacity(model.params.max_depth + 2);
        tree_shap_recurse(tree, row, &mut tphi, 0, path, 1.0, 1.0, -1);
        for (p, t) in phi.iter_mut().zip(&tphi) {
            *p += model.learning_rate * t;
        }
    }
    ShapRow {
        values: phi,
        base: expected_value(model),
    }
}

pub fn shap_batch(model: &GbtModel, rows: &[Vec<f64>]) -> Vec<ShapRow> {
    rows.par_iter().map(|r| shap_values(model, r)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureImportance {
    pub name: String,
    /// Mean |attribution| across rows, normalized so all shares sum to 1.
    pub share: f64,
}

/// Global importance ranking: mean absolute attribution per feature,
/// normalized, sorted descending with name as the tie-break.
pub fn importance(model: &GbtModel, shap_rows: &[ShapRow]) -> Vec<FeatureImportance> {
    let n = model.feature_names.len();
    let mut mean_abs = vec![0.0; n];
    for r in shap_rows {
        for (m, v) in mean_abs.iter_mut().zip(&r.values) {
            *m += v.abs();
        }
    }
    let total: f64 = mean_abs.iter().sum();
    let mut out: Vec<FeatureImportance> = model
        .feature_names
        .iter()
        .zip(&mean_abs)
        .map(|(name, &m)| FeatureImportance {
            name: name.clone(),
            share: if total > 0.0 { m / total } else { 0.0 },
        })
        .collect();
    out.sort_by(|a, b| {
        b.share
            .partial_cmp(&a.share)
            .unwrap()
            .then_with(|| a.name.cmp(&b.name))
    });
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub value: f64,
    pub prediction: f64,
}

/// What-if response sweep: vary one feature over a grid while pinning every
/// other feature at its training mean.
pub fn simulate_sweep(model: &GbtModel, feature: &str, grid: &[f64]) -> Option<Vec<SweepPoint>> {
    let f = model.feature_names.iter().position(|n| n == feature)?;
    let mut row = model.feature_means.clone();
    Some(
        grid.iter()
            .map(|&v| {
                row[f] = v;
                SweepPoint {
                    value: v,
                    prediction: model.predict_unchecked(&row),
                }
            })
            .collect(),
    )
}
