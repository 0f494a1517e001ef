//! 1-D k-means over index values: k-means++ seeding, Lloyd iterations, 10
//! seeded restarts with the best objective winning, and silhouette scoring.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const COMFORT_K: usize = 5;
pub const COMFORT_CLASSES: [&str; COMFORT_K] = [
    "cold stress",
    "slight cold stress",
    "comfortable",
    "slight heat stress",
    "heat stress",
];

#[derive(Debug, Error)]
pub enum KmeansError {
    #[error("need at least {k} distinct values, got {distinct}")]
    TooFewDistinct { k: usize, distinct: usize },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClusterModel {
    pub k: usize,
    /// Ascending; index i maps to comfort class i (cold -> heat).
    pub centroids: Vec<f64>,
    pub silhouette: f64,
    /// Final within-cluster sum of squares.
    pub objective: f64,
}

impl ClusterModel {
    pub fn assign(&self, value: f64) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (i, &c) in self.centroids.iter().enumerate() {
            let d = (value - c).abs();
            if d < best_d {
                best_d = d;
                best = i;
            }
        }
        best
    }

    pub fn class_name(&self, value: f64) -> &'static str {
        COMFORT_CLASSES[self.assign(value).min(COMFORT_CLASSES.len() - 1)]
    }
}

fn assign_all(values: &[f64], centroids: &[f64]) -> (Vec<usize>, f64) {
    let mut labels = vec![0usize; values.len()];
    let mut obj = 0.0;
    for (i, &v) in values.iter().enumerate() {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (c, &cv) in centroids.iter().enumerate() {
            let d = (v - cv) * (v - cv);
            if d < best_d {
                best_d = d;
                best = c;
            }
        }
        labels[i] = best;
        obj += best_d;
    }
    (labels, obj)
}

fn kmeans_pp_init(values: &[f64], k: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut centroids = Vec::with_capacity(k);
    centroids.push(values[rng.gen_range(0..values.len())]);
    let mut d2: Vec<f64> = values
        .iter()
        .map(|&v| (v - centroids[0]) * (v - centroids[0]))
        .collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total <= 0.0 {
            // remaining points coincide with a centroid; pick any distinct value
            *values
                .iter()
                .find(|v| !centroids.contains(v))
                .unwrap_or(&values[0])
        } else {
            let mut target = rng.gen::<f64>() * total;
            let mut pick = values.len() - 1;
            for (i, &d) in d2.iter().enumerate() {
                if target < d {
                    pick = i;
                    break;
                }
                target -= d;
            }
            values[pick]
        };
        centroids.push(next);
        for (i, &v) in values.iter().enumerate() {
            d2[i] = d2[i].min((v - next) * (v - next));
        }
    }
    centroids
}

/// One Lloyd run. Returns (centroids, objective, objective trace).
fn lloyd(values: &[f64], mut centroids: Vec<f64>) -> (Vec<f64>, f64, Vec<f64>) {
    let mut trace = Vec::new();
    let mut obj = f64::INFINITY;
    for _ in 0..300 {
        let (labels, o) = assign_all(values, &centroids);
        trace.push(o);
        obj = o;
        let mut sums = vec![0.0; centroids.len()];
        let mut counts = vec![0usize; centroids.len()];
        for (&v, &l) in values.iter().zip(&labels) {
            sums[l] += v;
            counts[l] += 1;
        }
        let mut moved: f64 = 0.0;
        for c in 0..centroids.len() {
            if counts[c] > 0 {
                let next = sums[c] / counts[c] as f64;
                moved = moved.max((next - centroids[c]).abs());
                centroids[c] = next;
            }
        }
        if moved < 1e-10 {
            break;
        }
    }
    (centroids, obj, trace)
}

/// Silhouette coefficient on 1-D values (mean over points; singleton
/// clusters contribute 0).
pub fn silhouette(values: &[f64], labels: &[usize], k: usize) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    let mut total = 0.0;
    for i in 0..n {
        let own = labels[i];
        let mut sums = vec![0.0; k];
        let mut counts = vec![0usize; k];
        for j in 0..n {
            if j == i {
                continue;
            }
            sums[labels[j]] += (values[i] - values[j]).abs();
            counts[labels[j]] += 1;
        }
        // counts[own] excludes self because j == i is skipped
        let own_members = counts[own];
        if own_members == 0 {
            continue; // singleton: s = 0
        }
        let a = sums[own] / own_members as f64;
        let mut b = f64::INFINITY;
        for c in 0..k {
            if c != own && counts[c] > 0 {
                b = b.min(sums[c] / counts[c] as f64);
            }
        }
        if !b.is_finite() {
            continue;
        }
        let s = (b - a) / a.max(b).max(1e-300);
        total += s;
    }
    total / n as f64
}

/// Cluster 1-D index values into `k` classes. Ten k-means++ restarts with
/// seeds derived from `seed`; best objective wins, ties broken by the lowest
/// restart seed. Centroids are returned ascending.
pub fn kmeans_classify(
    values: &[f64],
    k: usize,
    seed: u64,
) -> Result<(ClusterModel, Vec<usize>), KmeansError> {
    let mut distinct = values.to_vec();
    distinct.sort_by(|a, b| a.partial_cmp(b).unwrap());
    distinct.dedup();
    if distinct.len() < k {
        return Err(KmeansError::TooFewDistinct {
            k,
            distinct: distinct.len(),
        });
    }

    let mut best: Option<(Vec<f64>, f64)> = None;
    for restart in 0..10u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(restart));
        let init = kmeans_pp_init(values, k, &mut rng);
        let (centroids, obj, trace) = lloyd(values, init);
        debug_assert!(trace.windows(2).all(|w| w[1] <= w[0] + 1e-12));
        if best.as_ref().map_or(true, |(_, bo)| obj < *bo) {
            best = Some((centroids, obj));
        }
    }
    let (mut centroids, objective) = best.unwrap();
    centroids.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let (labels, _) = assign_all(values, &centroids);
    let sil = silhouette(values, &labels, k);
    Ok((
        ClusterModel {
            k,
            centroids,
            silhouette: sil,
            objective,
        },
        labels,
    ))
}

/// Objective trace of a single Lloyd run from a k-means++ start; exposed for
/// the monotonicity check.
pub fn lloyd_trace(values: &[f64], k: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let init = kmeans_pp_init(values, k, &mut rng);
    lloyd(values, init).2
}
