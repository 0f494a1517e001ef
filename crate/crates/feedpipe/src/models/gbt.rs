//! Gradient-boosted regression trees with squared-error loss: each round fits
//! one depth-limited tree to the current residuals using greedy exact split
//! search over 256 quantile bin candidates per feature. Leaf value is
//! sum(residuals) / (count + l2_reg); prediction is
//! base_value + learning_rate * sum of leaf values.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const MAX_BINS: usize = 256;

#[derive(Debug, Error)]
pub enum GbtError {
    #[error("empty feature set")]
    EmptyFeatures,
    #[error("need at least 2 rows, got {0}")]
    TooFewRows(usize),
    #[error("non-finite target")]
    NonFiniteTarget,
    #[error("schema mismatch: model expects {expected} features, row has {got}")]
    SchemaMismatch { expected: usize, got: usize },
    #[error("unknown feature {0:?}")]
    UnknownFeature(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbtParams {
    pub max_depth: usize,
    pub n_rounds: usize,
    pub learning_rate: f64,
    pub l2_reg: f64,
    /// Minimum row count per child.
    pub min_child_weight: usize,
    pub subsample: f64,
    pub colsample: f64,
    pub seed: u64,
}

impl Default for GbtParams {
    fn default() -> Self {
        GbtParams {
            max_depth: 5,
            n_rounds: 100,
            learning_rate: 0.1,
            l2_reg: 1.0,
            min_child_weight: 1,
            subsample: 1.0,
            colsample: 1.0,
            seed: 0,
        }
    }
}

/// Named hyperparameter presets standing in for the three boosting libraries
/// the pipeline compares; one engine, three operating points.
pub fn preset(name: &str) -> Option<GbtParams> {
    match name {
        "deep" => Some(GbtParams {
            max_depth: 7,
            n_rounds: 300,
            learning_rate: 0.05,
            l2_reg: 1.0,
            ..GbtParams::default()
        }),
        "balanced" => Some(GbtParams::default()),
        "light" => Some(GbtParams {
            max_depth: 3,
            n_rounds: 300,
            learning_rate: 0.1,
            l2_reg: 10.0,
            ..GbtParams::default()
        }),
        _ => None,
    }
}

/// One node of a regression tree, in a flat array. `feature < 0` marks a
/// leaf; `cover` is the number of training rows that reached the node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeNode {
    pub feature: i32,
    pub threshold: f64,
    pub left: u32,
    pub right: u32,
    pub value: f64,
    pub cover: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<TreeNode>,
}

impl Tree {
    pub fn predict(&self, row: &[f64]) -> f64 {
        let mut i = 0usize;
        loop {
            let n = &self.nodes[i];
            if n.feature < 0 {
                return n.value;
            }
            i = if row[n.feature as usize] < n.threshold {
                n.left as usize
            } else {
                n.right as usize
            };
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbtModel {
    pub base_value: f64,
    pub learning_rate: f64,
    pub params: GbtParams,
    pub trees: Vec<Tree>,
    pub feature_names: Vec<String>,
    /// Training-set feature means, used by response sweeps.
    pub feature_means: Vec<f64>,
}

impl GbtModel {
    pub fn predict(&self, row: &[f64]) -> Result<f64, GbtError> {
        if row.len() != self.feature_names.len() {
            return Err(GbtError::SchemaMismatch {
                expected: self.feature_names.len(),
                got: row.len(),
            });
        }
        Ok(self.predict_unchecked(row))
    }

    pub fn predict_unchecked(&self, row: &[f64]) -> f64 {
        self.base_value
            + self.learning_rate * self.trees.iter().map(|t| t.predict(row)).sum::<f64>()
    }

    pub fn predict_batch(&self, rows: &[Vec<f64>]) -> Vec<f64> {
        rows.par_iter().map(|r| self.predict_unchecked(r)).collect()
    }

    /// The model truncated to its first `k` rounds.
    pub fn truncated(&self, k: usize) -> GbtModel {
        GbtModel {
            trees: self.trees[..k.min(self.trees.len())].to_vec(),
            ..self.clone()
        }
    }
}

/// Per-feature quantile binning shared by all rounds.
struct Binned {
    /// bin index per row, feature-major: bins[f * n_rows + i]
    bins: Vec<u16>,
    /// candidate split thresholds per feature; splitting at bin b sends
    /// bins <= b left, threshold = cuts[f][b]
    cuts: Vec<Vec<f64>>,
    n_rows: usize,
}

fn build_bins(rows: &[Vec<f64>], n_features: usize) -> Binned {
    let n_rows = rows.len();
    let mut bins = vec![0u16; n_features * n_rows];
    let mut cuts = Vec::with_capacity(n_features);
    for f in 0..n_features {
        let mut vals: Vec<f64> = rows.iter().map(|r| r[f]).collect();
        vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
        vals.dedup();
        // at most MAX_BINS distinct representatives, chosen by quantile
        let edges: Vec<f64> = if vals.len() <= MAX_BINS {
            vals
        } else {
            (0..MAX_BINS)
                .map(|k| vals[k * (vals.len() - 1) / (MAX_BINS - 1)])
                .collect()
        };
        // threshold between edge b and b+1 is their midpoint
        let fcuts: Vec<f64> = edges.windows(2).map(|w| (w[0] + w[1]) / 2.0).collect();
        for (i, r) in rows.iter().enumerate() {
            // bin = number of cuts at or below the value
            let v = r[f];
            let b = fcuts.partition_point(|&c| c <= v);
            bins[f * n_rows + i] = b as u16;
        }
        cuts.push(fcuts);
    }
    Binned { bins, cuts, n_rows }
}

struct SplitChoice {
    feature: usize,
    bin: usize,
    gain: f64,
}

/// Greedy exact search over binned candidates for one node.
fn best_split(
    binned: &Binned,
    features: &[usize],
    rows: &[u32],
    resid: &[f64],
    sum: f64,
    l2: f64,
    min_child: usize,
) -> Option<SplitChoice> {
    let n = rows.len();
    let parent_score = sum * sum / (n as f64 + l2);
    let choices: Vec<Option<SplitChoice>> = features
        .par_iter()
        .map(|&f| {
            let n_bins = binned.cuts[f].len() + 1;
            if n_bins < 2 {
                return None;
            }
            let mut hist_sum = vec![0.0f64; n_bins];
            let mut hist_cnt = vec![0u32; n_bins];
            let fbase = f * binned.n_rows;
            for &ri in rows {
                let b = binned.bins[fbase + ri as usize] as usize;
                hist_sum[b] += resid[ri as usize];
                hist_cnt[b] += 1;
            }
            let mut best: Option<SplitChoice> = None;
            let mut left_sum = 0.0;
            let mut left_cnt = 0u32;
            for b in 0..n_bins - 1 {
                left_sum += hist_sum[b];
                left_cnt += hist_cnt[b];
                let right_cnt = n as u32 - left_cnt;
                if (left_cnt as usize) < min_child || (right_cnt as usize) < min_child {
                    continue;
                }
                if left_cnt == 0 || right_cnt == 0 {
                    continue;
                }
                let right_sum = sum - left_sum;
                let gain = left_sum * left_sum / (left_cnt as f64 + l2)
                    + right_sum * right_sum / (right_cnt as f64 + l2)
                    - parent_score;
                if gain > best.as_ref().map_or(1e-12, |s| s.gain) {
                    best = Some(SplitChoice { feature: f, bin: b, gain });
                }
            }
            best
        })
        .collect();
    // deterministic tie-break: lowest feature index, then lowest threshold
    let mut winner: Option<SplitChoice> = None;
    for c in choices.into_iter().flatten() {
        let take = match &winner {
            None => true,
            Some(w) => c.gain > w.gain,
        };
        if take {
            winner = Some(c);
        }
    }
    winner
}

fn grow_tree(
    binned: &Binned,
    features: &[usize],
    rows: Vec<u32>,
    resid: &[f64],
    params: &GbtParams,
) -> Tree {
    struct Work {
        node: usize,
        rows: Vec<u32>,
        depth: usize,
    }
    let mut nodes = Vec::new();
    let root_sum: f64 = rows.iter().map(|&i| resid[i as usize]).sum();
    nodes.push(TreeNode {
        feature: -1,
        threshold: 0.0,
        left: 0,
        right: 0,
        value: root_sum / (rows.len() as f64 + params.l2_reg),
        cover: rows.len() as f64,
    });
    let mut queue = vec![Work { node: 0, rows, depth: 0 }];
    while let Some(w) = queue.pop() {
        if w.depth >= params.max_depth || w.rows.len() < 2 * params.min_child_weight.max(1) {
            continue;
        }
        let sum: f64 = w.rows.iter().map(|&i| resid[i as usize]).sum();
        let Some(split) = best_split(
            binned,
            features,
            &w.rows,
            resid,
            sum,
            params.l2_reg,
            params.min_child_weight.max(1),
        ) else {
            continue;
        };
        let fbase = split.feature * binned.n_rows;
        let (left_rows, right_rows): (Vec<u32>, Vec<u32>) = w
            .rows
            .iter()
            .partition(|&&ri| (binned.bins[fbase + ri as usize] as usize) <= split.bin);
        if left_rows.is_empty() || right_rows.is_empty() {
            continue;
        }
        let mk_leaf = |rs: &[u32]| {
            let s: f64 = rs.iter().map(|&i| resid[i as usize]).sum();
            TreeNode {
                feature: -1,
                threshold: 0.0,
                left: 0,
                right: 0,
                value: s / (rs.len() as f64 + params.l2_reg),
                cover: rs.len() as f64,
            }
        };
        let li = nodes.len();
        nodes.push(mk_leaf(&left_rows));
        let ri = nodes.len();
        nodes.push(mk_leaf(&right_rows));
        nodes[w.node].feature = split.feature as i32;
        nodes[w.node].threshold = binned.cuts[split.feature][split.bin];
        nodes[w.node].left = li as u32;
        nodes[w.node].right = ri as u32;
        queue.push(Work { node: li, rows: left_rows, depth: w.depth + 1 });
        queue.push(Work { node: ri, rows: right_rows, depth: w.depth + 1 });
    }
    Tree { nodes }
}

/// Train on row-major features. Returns the model and the per-round training
/// loss trace (MSE over all rows, evaluated after each round).
pub fn train_gbt(
    rows: &[Vec<f64>],
    targets: &[f64],
    feature_names: &[String],
    params: &GbtParams,
) -> Result<(GbtModel, Vec<f64>), GbtError> {
    let n = rows.len();
    if n < 2 {
        return Err(GbtError::TooFewRows(n));
    }
    let n_features = feature_names.len();
    if n_features == 0 || rows.iter().any(|r| r.len() != n_features) {
        return Err(GbtError::EmptyFeatures);
    }
    if targets.iter().any(|t| !t.is_finite()) {
        return Err(GbtError::NonFiniteTarget);
    }

    let base_value = targets.iter().sum::<f64>() / n as f64;
    let binned = build_bins(rows, n_features);
    let mut pred = vec![base_value; n];
    let mut trees = Vec::with_capacity(params.n_rounds);
    let mut loss_trace = Vec::with_capacity(params.n_rounds);
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);

    for _round in 0..params.n_rounds {
        let resid: Vec<f64> = targets.iter().zip(&pred).map(|(t, p)| t - p).collect();

        let row_ids: Vec<u32> = if params.subsample < 1.0 {
            let keep = ((n as f64 * params.subsample).round() as usize).max(1);
            let mut ids: Vec<u32> = (0..n as u32).collect();
            ids.partial_shuffle(&mut rng, keep);
            let mut sub = ids[..keep].to_vec();
            sub.sort_unstable();
            sub
        } else {
            (0..n as u32).collect()
        };
        let features: Vec<usize> = if params.colsample < 1.0 {
            let keep = ((n_features as f64 * params.colsample).round() as usize).max(1);
            let mut ids: Vec<usize> = (0..n_features).collect();
            ids.partial_shuffle(&mut rng, keep);
            let mut sub = ids[..keep].to_vec();
            sub.sort_unstable();
            sub
        } else {
            (0..n_features).collect()
        };

        let tree = grow_tree(&binned, &features, row_ids, &resid, params);
        let deltas: Vec<f64> = rows.par_iter().map(|r| tree.predict(r)).collect();
        for (p, d) in pred.iter_mut().zip(&deltas) {
            *p += params.learning_rate * d;
        }
        trees.push(tree);
        let mse = targets
            .iter()
            .zip(&pred)
            .map(|(t, p)| (t - p) * (t - p))
            .sum::<f64>()
            / n as f64;
        loss_trace.push(mse);
    }

    let feature_means: Vec<f64> = (0..n_features)
        .map(|f| rows.iter().map(|r| r[f]).sum::<f64>() / n as f64)
        .collect();
    Ok((
        GbtModel {
            base_value,
            learning_rate: params.learning_rate,
            params: params.clone(),
            trees,
            feature_names: feature_names.to_vec(),
            feature_means,
        },
        loss_trace,
    ))
}

pub fn feature_names(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("f{i}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_target_predicts_constant() {
        let rows: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64]).collect();
        let targets = vec![3.25; 20];
        let (model, trace) =
            train_gbt(&rows, &targets, &feature_names(1), &GbtParams::default()).unwrap();
        assert_eq!(model.base_value, 3.25);
        for r in &rows {
            assert!((model.predict(r).unwrap() - 3.25).abs() < 1e-12);
        }
        assert!(trace.iter().all(|&l| l < 1e-20));
    }

    #[test]
    fn depth1_step_function_is_exact() {
        // y = 1[x >= 0], depth 1, lr 1, 1 round, l2 0: leaf means recover 0/1
        let rows: Vec<Vec<f64>> = (-10..10).map(|i| vec![i as f64 + 0.5]).collect();
        let targets: Vec<f64> = rows.iter().map(|r| if r[0] >= 0.0 { 1.0 } else { 0.0 }).collect();
        let params = GbtParams {
            max_depth: 1,
            n_rounds: 1,
            learning_rate: 1.0,
            l2_reg: 0.0,
            ..GbtParams::default()
        };
        let (model, _) = train_gbt(&rows, &targets, &feature_names(1), &params).unwrap();
        // hand derivation: base = 0.5, split at 0, leaf values -0.5 / +0.5
        assert_eq!(model.base_value, 0.5);
        for (r, t) in rows.iter().zip(&targets) {
            assert_eq!(model.predict(r).unwrap(), *t);
        }
    }

    #[test]
    fn zero_round_model_is_base() {
        let rows: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64]).collect();
        let targets: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let params = GbtParams { n_rounds: 0, ..GbtParams::default() };
        let (model, _) = train_gbt(&rows, &targets, &feature_names(1), &params).unwrap();
        assert_eq!(model.predict(&[3.0]).unwrap(), 4.5);
    }

    #[test]
    fn loss_trace_non_increasing() {
        use rand::prelude::*;
        use rand_chacha::ChaCha8Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for trial in 0..5 {
            let n = 120;
            let rows: Vec<Vec<f64>> = (0..n)
                .map(|_| (0..4).map(|_| rng.gen_range(-2.0..2.0)).collect())
                .collect();
            let targets: Vec<f64> = rows
                .iter()
                .map(|r| r[0].sin() + r[1] * r[2] + rng.gen_range(-0.1..0.1))
                .collect();
            let params = GbtParams {
                max_depth: 3,
                n_rounds: 40,
                learning_rate: 0.3,
                l2_reg: 1.0,
                seed: trial,
                ..GbtParams::default()
            };
            let (_, trace) = train_gbt(&rows, &targets, &feature_names(4), &params).unwrap();
            for w in trace.windows(2) {
                assert!(w[1] <= w[0] + 1e-12, "trial {trial}: {} -> {}", w[0], w[1]);
            }
        }
    }

    #[test]
    fn prefix_property() {
        let rows: Vec<Vec<f64>> = (0..60).map(|i| vec![(i as f64 * 0.7).sin(), i as f64]).collect();
        let targets: Vec<f64> = rows.iter().map(|r| r[0] * 2.0 + r[1] * 0.05).collect();
        let params = GbtParams { n_rounds: 20, ..GbtParams::default() };
        let (full, _) = train_gbt(&rows, &targets, &feature_names(2), &params).unwrap();
        let short_params = GbtParams { n_rounds: 7, ..GbtParams::default() };
        let (short, _) = train_gbt(&rows, &targets, &feature_names(2), &short_params).unwrap();
        let truncated = full.truncated(7);
        for r in &rows {
            assert_eq!(truncated.predict(r).unwrap(), short.predict(r).unwrap());
        }
    }

    #[test]
    fn serialization_round_trip_bitwise() {
        let rows: Vec<Vec<f64>> = (0..50)
            .map(|i| vec![(i as f64).cos(), (i as f64 / 3.0).sin(), i as f64])
            .collect();
        let targets: Vec<f64> = rows.iter().map(|r| r[0] + 0.5 * r[1] - 0.01 * r[2]).collect();
        let (model, _) =
            train_gbt(&rows, &targets, &feature_names(3), &GbtParams::default()).unwrap();
        let json = serde_json::to_string(&model).unwrap();
        let back: GbtModel = serde_json::from_str(&json).unwrap();
        for r in &rows {
            let a = model.predict(r).unwrap();
            let b = back.predict(r).unwrap();
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn batch_equals_rowwise() {
        let rows: Vec<Vec<f64>> = (0..30).map(|i| vec![i as f64, (i % 5) as f64]).collect();
        let targets: Vec<f64> = rows.iter().map(|r| r[0] - r[1]).collect();
        let (model, _) =
            train_gbt(&rows, &targets, &feature_names(2), &GbtParams::default()).unwrap();
        let batch = model.predict_batch(&rows);
        for (r, b) in rows.iter().zip(batch) {
            assert_eq!(model.predict(r).unwrap(), b);
        }
    }

    #[test]
    fn determinism_across_runs() {
        let rows: Vec<Vec<f64>> = (0..80)
            .map(|i| vec![(i as f64 * 1.3).sin(), (i as f64 * 0.2).cos()])
            .collect();
        let targets: Vec<f64> = rows.iter().map(|r| r[0] * r[1]).collect();
        let params = GbtParams { subsample: 0.8, colsample: 0.9, seed: 5, ..GbtParams::default() };
        let (a, _) = train_gbt(&rows, &targets, &feature_names(2), &params).unwrap();
        let (b, _) = train_gbt(&rows, &targets, &feature_names(2), &params).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    }
}
