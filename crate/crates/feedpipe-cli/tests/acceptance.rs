//! Acceptance suite: one test per release criterion, each printing a single
//! `acceptance NN <name>: PASS` line once its assertions hold. Run with
//! `cargo test --test acceptance -- --nocapture` to see the lines.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::time::Instant;

use chrono::NaiveDate;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use feedpipe::cleanse::two_pass_clean;
use feedpipe::indices::{classify_series, easi, easi_gbt_params, incomfort, pearson};
use feedpipe::ingest::FeedingEvent;
use feedpipe::kmeans::{kmeans_classify, lloyd_trace};
use feedpipe::models::features::{build_feature_table, build_pen_table, AnimalInfo};
use feedpipe::models::gbt::{feature_names, train_gbt, GbtModel, GbtParams, Tree};
use feedpipe::models::metrics::metrics;
use feedpipe::models::ridge::{train_ridge, train_ridge_fixed};
use feedpipe::models::split::{season_of, split};
use feedpipe::pca::{fit_pca, project, reconstruct};
use feedpipe::sessionize::{build_meals, build_meals_all, daily_aggregate, Meal};
use feedpipe::shap::{importance, shap_values};
use feedpipe::synth::{synth_generate, SynthConfig};
use feedpipe::weather::{aggregate_daily, build_lag_matrix, normalize, N_LAG_COLS};

fn pass(n: usize, name: &str) {
    println!("acceptance {n:02} {name}: PASS");
}

// ------------------------------------------------------------------ 1

/// Independent sessionizer: instead of running accumulators, pick meal
/// boundaries by re-aggregating candidate slices from scratch.
fn oracle_meals(events: &[FeedingEvent]) -> Vec<Meal> {
    const GAP_S: f64 = 1200.0;
    const MAX_DUR_S: f64 = 7200.0;
    const MAX_INTAKE_KG: f64 = 10.0;

    let mut meals = Vec::new();
    let mut lo = 0usize;
    while lo < events.len() {
        // grow the slice while every rule still holds for the extension
        let mut hi = lo + 1;
        while hi < events.len() {
            let slice = &events[lo..=hi];
            let gap = slice[slice.len() - 1].start as f64
                - (slice[slice.len() - 2].start as f64 + slice[slice.len() - 2].duration_s);
            let dur: f64 = slice.iter().map(|e| e.duration_s).sum();
            let intake: f64 = slice.iter().map(|e| e.intake_kg).sum();
            if gap >= GAP_S || dur > MAX_DUR_S || intake > MAX_INTAKE_KG {
                break;
            }
            hi += 1;
        }
        let slice = &events[lo..hi];
        meals.push(Meal {
            animal_id: slice[0].animal_id.clone(),
            pen_id: slice[0].pen_id.clone(),
            start: slice[0].start,
            end: slice
                .iter()
                .map(|e| e.start as f64 + e.duration_s)
                .fold(f64::NEG_INFINITY, f64::max) as i64,
            intake_kg: slice.iter().map(|e| e.intake_kg).sum(),
            n_events: slice.len(),
            duration_s: slice.iter().map(|e| e.duration_s).sum(),
        });
        lo = hi;
    }
    meals
}

#[test]
fn a01_sessionization_oracle() {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    for case in 0..1000 {
        let n = rng.gen_range(1..=50);
        let mut t = 1_600_000_000i64;
        let events: Vec<FeedingEvent> = (0..n)
            .map(|_| {
                t += rng.gen_range(0..3000);
                let dur = rng.gen_range(10.0..900.0);
                let intake = if rng.gen_bool(0.05) {
                    rng.gen_range(4.0..15.0)
                } else {
                    rng.gen_range(0.02..1.5)
                };
                let e = FeedingEvent {
                    animal_id: "A".into(),
                    pen_id: "P".into(),
                    start: t,
                    intake_kg: intake,
                    duration_s: dur,
                };
                t += dur as i64;
                e
            })
            .collect();
        let got = build_meals(&events).unwrap();
        let want = oracle_meals(&events);
        assert_eq!(got.len(), want.len(), "case {case}: meal count");
        for (g, w) in got.iter().zip(&want) {
            assert_eq!(g.start, w.start, "case {case}");
            assert_eq!(g.n_events, w.n_events, "case {case}");
            assert!((g.intake_kg - w.intake_kg).abs() < 1e-12, "case {case}");
            assert!((g.duration_s - w.duration_s).abs() < 1e-12, "case {case}");
        }
        // 20-min rule inside each meal: re-check on the raw events
        let mut idx = 0usize;
        for m in &got {
            for k in 1..m.n_events {
                let prev = &events[idx + k - 1];
                let gap = events[idx + k].start as f64 - (prev.start as f64 + prev.duration_s);
                assert!(gap < 1200.0, "case {case}: intra-meal gap {gap}");
            }
            // caps hold for every multi-event meal
            if m.n_events > 1 {
                assert!(m.duration_s <= 7200.0 && m.intake_kg <= 10.0, "case {case}");
            }
            idx += m.n_events;
        }
    }
    assert!(t0.elapsed().as_secs_f64() < 5.0, "took {:?}", t0.elapsed());
    pass(1, "sessionization oracle");
}

// ------------------------------------------------------------------ 2

#[test]
fn a02_outlier_recovery() {
    let t0 = Instant::now();
    let cfg = SynthConfig {
        seed: 202,
        n_animals: 200,
        n_pens: 10,
        n_days: 120,
        outlier_rate: 0.005,
        ..SynthConfig::default()
    };
    let out = synth_generate(&cfg);
    let meals = build_meals_all(&out.events);
    let result = two_pass_clean(&meals);
    assert_eq!(result.meals.len(), meals.len());

    // which meals contain an injected event?
    let injected: HashSet<(String, i64)> = out
        .injected_outliers
        .iter()
        .map(|&i| (out.events[i].animal_id.clone(), out.events[i].start))
        .collect();
    let mut n_injected_meals = 0usize;
    let mut n_injected_replaced = 0usize;
    let mut n_clean_meals = 0usize;
    let mut n_clean_replaced = 0usize;
    let skipped: HashSet<&String> = result.skipped_animals.iter().collect();
    for cm in &result.meals {
        if skipped.contains(&cm.meal.animal_id) {
            continue;
        }
        let hit = injected
            .iter()
            .any(|(a, s)| *a == cm.meal.animal_id && *s >= cm.meal.start && *s <= cm.meal.end);
        if hit {
            n_injected_meals += 1;
            if cm.replaced {
                n_injected_replaced += 1;
            }
        } else {
            n_clean_meals += 1;
            if cm.replaced {
                n_clean_replaced += 1;
            }
        }
    }
    assert!(n_injected_meals > 50, "generator produced {n_injected_meals} outlier meals");
    let recall = n_injected_replaced as f64 / n_injected_meals as f64;
    let false_rate = n_clean_replaced as f64 / n_clean_meals as f64;
    assert!(recall >= 0.90, "recall {recall:.3}");
    assert!(false_rate <= 0.01, "false replacement rate {false_rate:.4}");

    // post-replacement residuals stay inside the pass-2 band
    let mut by_animal: BTreeMap<&str, Vec<&feedpipe::cleanse::CleanedMeal>> = BTreeMap::new();
    for cm in &result.meals {
        by_animal.entry(&cm.meal.animal_id).or_default().push(cm);
    }
    for rep in &result.reports {
        if rep.trait_name != "intake_vs_duration_pass2" || !rep.threshold.is_finite() {
            continue;
        }
        for cm in &by_animal[rep.animal_id.as_str()] {
            let r = cm.meal.intake_kg - cm.fit_pass2;
            assert!(
                (r - rep.median).abs() <= rep.threshold * (1.0 + 1e-9) + 1e-9,
                "{}: residual {r} vs median {} threshold {}",
                rep.animal_id,
                rep.median,
                rep.threshold
            );
        }
    }
    assert!(t0.elapsed().as_secs_f64() < 60.0, "took {:?}", t0.elapsed());
    pass(2, "outlier recovery");
}

// ------------------------------------------------------------------ 3

#[test]
fn a03_lag_matrix_shape() {
    let cfg = SynthConfig { seed: 303, n_animals: 2, n_days: 12, ..SynthConfig::default() };
    let out = synth_generate(&cfg);
    let lag = build_lag_matrix(&out.weather).unwrap();
    assert_eq!(lag.n_cols, 13 * 96 * 7);
    assert_eq!(lag.n_cols, N_LAG_COLS);
    assert_eq!(lag.col_names.len(), 8_736);
    assert!(lag.n_rows() > 0);
    pass(3, "lag-matrix shape");
}

// ------------------------------------------------------------------ 4

#[test]
fn a04_pca_properties() {
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let (n, d, latent) = (400usize, 40usize, 5usize);
    let basis: Vec<Vec<f64>> = (0..latent)
        .map(|_| (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .collect();
    let mut data = vec![0.0; n * d];
    for i in 0..n {
        let coeffs: Vec<f64> = (0..latent)
            .map(|k| rng.gen_range(-3.0..3.0) * (latent - k) as f64)
            .collect();
        for j in 0..d {
            let mut v = 0.1 * rng.gen_range(-1.0..1.0);
            for k in 0..latent {
                v += coeffs[k] * basis[k][j];
            }
            data[i * d + j] = v;
        }
    }
    let model = fit_pca(&data, n, d, 0.95).unwrap();
    assert!(model.orthonormality_error() <= 1e-8);
    let cum: f64 = model.explained_variance_ratio.iter().sum();
    assert!(cum >= 0.95, "cumulative ratio {cum}");

    let scores = project(&data, n, d, &model).unwrap();
    for j in 0..model.n_components {
        let col: Vec<f64> = scores.iter().map(|s| s[j]).collect();
        let mean = col.iter().sum::<f64>() / n as f64;
        let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n as f64 - 1.0);
        let rel = (var - model.eigenvalues[j]).abs() / model.eigenvalues[j];
        assert!(rel <= 1e-6, "component {j}: score var {var} vs eigenvalue {}", model.eigenvalues[j]);
    }

    // exact rank-1 input reconstructs exactly
    let v: Vec<f64> = (0..d).map(|j| ((j + 1) as f64 * 0.37).sin()).collect();
    let norm: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let mut r1 = vec![0.0; n * d];
    for i in 0..n {
        let s = (i as f64 / 17.0).cos() * 4.0;
        for j in 0..d {
            r1[i * d + j] = 2.0 + s * v[j] / norm;
        }
    }
    let m1 = fit_pca(&r1, n, d, 0.95).unwrap();
    assert_eq!(m1.n_components, 1);
    let back = reconstruct(&project(&r1, n, d, &m1).unwrap(), &m1);
    for i in 0..n {
        for j in 0..d {
            assert!((back[i][j] - r1[i * d + j]).abs() <= 1e-8);
        }
    }
    pass(4, "pca properties");
}

// ------------------------------------------------------------------ 5

#[test]
fn a05_index_contracts() {
    let t0 = Instant::now();
    let cfg = SynthConfig {
        seed: 505,
        n_animals: 20,
        n_pens: 4,
        n_days: 1095,
        outlier_rate: 0.0,
        ..SynthConfig::default()
    };
    let out = synth_generate(&cfg);
    let mut lag = build_lag_matrix(&out.weather).unwrap();
    normalize(&mut lag).unwrap();
    let model = fit_pca(&lag.data, lag.n_rows(), lag.n_cols, 0.95).unwrap();
    let all_scores = project(&lag.data, lag.n_rows(), lag.n_cols, &model).unwrap();

    let (daily, _) = aggregate_daily(&out.weather);
    let ta_by_date: BTreeMap<NaiveDate, f64> = daily.iter().map(|d| (d.date, d.ta_mean)).collect();
    let mut fi_by_date: BTreeMap<NaiveDate, (f64, usize)> = BTreeMap::new();
    for t in &out.truth {
        let e = fi_by_date.entry(t.date).or_insert((0.0, 0));
        e.0 += t.intake_kg;
        e.1 += 1;
    }

    let mut dates = Vec::new();
    let mut scores = Vec::new();
    let mut ta = Vec::new();
    let mut fi = Vec::new();
    for (i, &date) in lag.dates.iter().enumerate() {
        let (Some(&t), Some(&(s, c))) = (ta_by_date.get(&date), fi_by_date.get(&date)) else {
            continue;
        };
        dates.push(date);
        scores.push(all_scores[i].clone());
        ta.push(t);
        fi.push(s / c as f64);
    }
    assert!(dates.len() > 1000, "only {} aligned days", dates.len());

    let ic = incomfort(&scores, &model, &ta).unwrap();
    let strata: Vec<(String, String)> =
        dates.iter().map(|d| ("all".to_string(), season_of(*d).to_string())).collect();
    let plan = split(&strata, 505, 3).unwrap();
    let ea = easi(&scores, &fi, &ta, &plan.train, &easi_gbt_params(505)).unwrap();

    for (&a, &b) in ic.iter().zip(&ea.values) {
        assert!((-1.0..=1.0).contains(&a) && (-1.0..=1.0).contains(&b));
    }
    let r_ic_ta = pearson(&ic, &ta);
    let r_ea_fi = pearson(&ea.values, &fi);
    let r_ic_fi = pearson(&ic, &fi);
    assert!(r_ic_ta >= 0.7, "corr(incomfort, ta) = {r_ic_ta:.3}");
    assert!(r_ea_fi <= -0.4, "corr(easi, fi) = {r_ea_fi:.3}");
    assert!(r_ic_fi.abs() < 0.2, "corr(incomfort, fi) = {r_ic_fi:.3}");

    // classification is defined over the whole series
    let (series, _, _) = classify_series(&dates, &ic, &ea.values, 505).unwrap();
    assert_eq!(series.len(), dates.len());
    assert!(t0.elapsed().as_secs_f64() < 300.0, "took {:?}", t0.elapsed());
    pass(5, "index contracts");
}

// ------------------------------------------------------------------ 6

fn oracle_silhouette(values: &[f64], labels: &[usize], k: usize) -> f64 {
    let n = values.len();
    let mut total = 0.0;
    for i in 0..n {
        let mine = labels[i];
        let mut dist = vec![0.0f64; k];
        let mut cnt = vec![0usize; k];
        for j in 0..n {
            if i == j {
                continue;
            }
            dist[labels[j]] += (values[i] - values[j]).abs();
            cnt[labels[j]] += 1;
        }
        if cnt[mine] == 0 {
            continue;
        }
        let a = dist[mine] / cnt[mine] as f64;
        let b = (0..k)
            .filter(|&c| c != mine && cnt[c] > 0)
            .map(|c| dist[c] / cnt[c] as f64)
            .fold(f64::INFINITY, f64::min);
        if !b.is_finite() {
            continue;
        }
        total += (b - a) / a.max(b).max(1e-300);
    }
    total / n as f64
}

#[test]
fn a06_kmeans_silhouette() {
    let mut rng = ChaCha8Rng::seed_from_u64(606);
    for case in 0..100 {
        let n = rng.gen_range(15..60);
        let k = rng.gen_range(2..=5usize);
        let values: Vec<f64> = (0..n)
            .map(|_| rng.gen_range(0..k) as f64 * 3.0 + rng.gen_range(-1.0..1.0))
            .collect();
        let Ok((cm, labels)) = kmeans_classify(&values, k, case as u64) else {
            continue; // too few distinct values; regenerate next case
        };
        let want = oracle_silhouette(&values, &labels, k);
        assert!(
            (cm.silhouette - want).abs() <= 1e-12,
            "case {case}: {} vs {want}",
            cm.silhouette
        );
        // label order follows value order
        for i in 0..values.len() {
            for j in 0..values.len() {
                if values[i] < values[j] {
                    assert!(labels[i] <= labels[j], "case {case}: order violated");
                }
            }
        }
        // Lloyd objective never increases
        let trace = lloyd_trace(&values, k, case as u64);
        for w in trace.windows(2) {
            assert!(w[1] <= w[0] + 1e-12, "case {case}: {} -> {}", w[0], w[1]);
        }
    }
    pass(6, "kmeans and silhouette");
}

// ------------------------------------------------------------------ 7

#[test]
fn a07_gbdt_correctness() {
    let mut rng = ChaCha8Rng::seed_from_u64(707);
    for case in 0..50u64 {
        let n = rng.gen_range(40..160);
        let d = rng.gen_range(1..6);
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..d).map(|_| rng.gen_range(-2.0..2.0)).collect())
            .collect();
        let targets: Vec<f64> = rows
            .iter()
            .map(|r| r.iter().map(|v| v.sin()).sum::<f64>() + rng.gen_range(-0.2..0.2))
            .collect();
        let params = GbtParams {
            max_depth: rng.gen_range(1..5),
            n_rounds: 30,
            learning_rate: 0.3,
            l2_reg: 1.0,
            seed: case,
            ..GbtParams::default()
        };
        let (model, trace) = train_gbt(&rows, &targets, &feature_names(d), &params).unwrap();
        for w in trace.windows(2) {
            assert!(w[1] <= w[0] + 1e-12, "case {case}");
        }
        // serialization round-trips to bitwise-identical predictions
        let back: GbtModel =
            serde_json::from_str(&serde_json::to_string(&model).unwrap()).unwrap();
        for r in rows.iter().take(20) {
            assert_eq!(model.predict(r).unwrap().to_bits(), back.predict(r).unwrap().to_bits());
        }
    }

    // hand-derived depth-1 split: y = 1[x >= 0], lr 1, 1 round, no shrinkage
    let rows: Vec<Vec<f64>> = (-10..10).map(|i| vec![i as f64 + 0.5]).collect();
    let targets: Vec<f64> =
        rows.iter().map(|r| if r[0] >= 0.0 { 1.0 } else { 0.0 }).collect();
    let params = GbtParams {
        max_depth: 1,
        n_rounds: 1,
        learning_rate: 1.0,
        l2_reg: 0.0,
        ..GbtParams::default()
    };
    let (step, _) = train_gbt(&rows, &targets, &feature_names(1), &params).unwrap();
    assert_eq!(step.base_value, 0.5);
    for (r, t) in rows.iter().zip(&targets) {
        assert_eq!(step.predict(r).unwrap(), *t);
    }

    // prefix property: truncating the tree list reproduces the shorter model
    let rows: Vec<Vec<f64>> =
        (0..80).map(|i| vec![(i as f64 * 0.7).sin(), i as f64]).collect();
    let targets: Vec<f64> = rows.iter().map(|r| r[0] * 2.0 + r[1] * 0.05).collect();
    let full_params = GbtParams { n_rounds: 25, ..GbtParams::default() };
    let (full, _) = train_gbt(&rows, &targets, &feature_names(2), &full_params).unwrap();
    let short_params = GbtParams { n_rounds: 9, ..GbtParams::default() };
    let (short, _) = train_gbt(&rows, &targets, &feature_names(2), &short_params).unwrap();
    let trunc = full.truncated(9);
    for r in &rows {
        assert_eq!(trunc.predict(r).unwrap(), short.predict(r).unwrap());
    }
    pass(7, "gbdt correctness");
}

// ------------------------------------------------------------------ 8

#[test]
fn a08_ridge_correctness() {
    use nalgebra::{DMatrix, DVector};
    let mut rng = ChaCha8Rng::seed_from_u64(808);
    for case in 0..10 {
        let (n, d) = (rng.gen_range(30..80), rng.gen_range(2..8));
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..d).map(|_| rng.gen_range(-2.0..2.0)).collect())
            .collect();
        let targets: Vec<f64> = rows
            .iter()
            .map(|r| r.iter().enumerate().map(|(j, v)| (j as f64 - 1.5) * v).sum::<f64>()
                + rng.gen_range(-0.5..0.5))
            .collect();
        let (alpha, lambda) = (rng.gen_range(0.1..5.0), rng.gen_range(0.01..2.0));
        let got = train_ridge_fixed(&rows, &targets, alpha, lambda).unwrap();

        // direct solve on centered data: (lambda I + alpha X'X) w = alpha X'y
        let xm: Vec<f64> =
            (0..d).map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / n as f64).collect();
        let ym = targets.iter().sum::<f64>() / n as f64;
        let x = DMatrix::from_fn(n, d, |i, j| rows[i][j] - xm[j]);
        let y = DVector::from_fn(n, |i, _| targets[i] - ym);
        let a = DMatrix::identity(d, d) * lambda + x.transpose() * &x * alpha;
        let w = a.lu().solve(&(x.transpose() * &y * alpha)).unwrap();
        for j in 0..d {
            assert!((got.weights[j] - w[j]).abs() <= 1e-8, "case {case} weight {j}");
        }
        let intercept = ym - xm.iter().zip(w.iter()).map(|(m, wi)| m * wi).sum::<f64>();
        assert!((got.intercept - intercept).abs() <= 1e-8, "case {case}");
    }

    // evidence maximization recovers the noiseless slope
    let rows: Vec<Vec<f64>> = (0..50).map(|i| vec![i as f64 / 5.0 - 5.0]).collect();
    let targets: Vec<f64> = rows.iter().map(|r| 2.0 * r[0]).collect();
    let model = train_ridge(&rows, &targets).unwrap();
    assert!((model.weights[0] - 2.0).abs() <= 1e-3, "slope {}", model.weights[0]);
    pass(8, "ridge correctness");
}

// ------------------------------------------------------------------ 9

fn cond_exp(tree: &Tree, node: usize, x: &[f64], s: u32) -> f64 {
    let nd = &tree.nodes[node];
    if nd.feature < 0 {
        return nd.value;
    }
    let f = nd.feature as usize;
    if s & (1 << f) != 0 {
        let next = if x[f] < nd.threshold { nd.left } else { nd.right };
        cond_exp(tree, next as usize, x, s)
    } else {
        (tree.nodes[nd.left as usize].cover * cond_exp(tree, nd.left as usize, x, s)
            + tree.nodes[nd.right as usize].cover * cond_exp(tree, nd.right as usize, x, s))
            / nd.cover
    }
}

fn brute_shapley(model: &GbtModel, x: &[f64]) -> Vec<f64> {
    let d = model.feature_names.len();
    assert!(d <= 4);
    let v = |s: u32| {
        model.base_value
            + model.learning_rate
                * model.trees.iter().map(|t| cond_exp(t, 0, x, s)).sum::<f64>()
    };
    let fact = [1.0, 1.0, 2.0, 6.0, 24.0];
    let mut phi = vec![0.0; d];
    for i in 0..d {
        for s in 0u32..(1 << d) {
            if s & (1 << i) != 0 {
                continue;
            }
            let k = s.count_ones() as usize;
            phi[i] += fact[k] * fact[d - k - 1] / fact[d] * (v(s | (1 << i)) - v(s));
        }
    }
    phi
}

#[test]
fn a09_shap() {
    let mut rng = ChaCha8Rng::seed_from_u64(909);
    for case in 0..8u64 {
        let d = rng.gen_range(1..=4usize);
        let n = 150;
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..d).map(|_| rng.gen_range(-3.0..3.0)).collect())
            .collect();
        let y: Vec<f64> = rows
            .iter()
            .map(|r| {
                r.iter().enumerate().map(|(j, v)| (j + 1) as f64 * v.sin()).sum::<f64>()
                    + r[0] * r[d - 1]
            })
            .collect();
        let params = GbtParams {
            max_depth: 3,
            n_rounds: 20,
            learning_rate: 0.2,
            l2_reg: 0.5,
            seed: case,
            ..GbtParams::default()
        };
        let (model, _) = train_gbt(&rows, &y, &feature_names(d), &params).unwrap();
        let mut shap_rows = Vec::new();
        for row in rows.iter().take(25) {
            let s = shap_values(&model, row);
            // local accuracy: contributions plus base reproduce the prediction
            let pred = model.predict(row).unwrap();
            assert!((s.total() - pred).abs() <= 1e-6, "case {case}: {} vs {pred}", s.total());
            let slow = brute_shapley(&model, row);
            for (a, b) in s.values.iter().zip(&slow) {
                assert!((a - b).abs() <= 1e-9, "case {case}: {a} vs {b}");
            }
            shap_rows.push(s);
        }
        let imp = importance(&model, &shap_rows);
        let total: f64 = imp.iter().map(|f| f.share).sum();
        assert!((total - 1.0).abs() <= 1e-9, "case {case}: importance sums to {total}");
    }
    pass(9, "shap");
}

// ------------------------------------------------------------------ 10

#[test]
fn a10_end_to_end_synthetic() {
    let t0 = Instant::now();
    let cfg = SynthConfig {
        seed: 1010,
        n_animals: 200,
        n_pens: 10,
        n_days: 120,
        outlier_rate: 0.005,
        ..SynthConfig::default()
    };
    let out = synth_generate(&cfg);

    // sessionize, clean
    let meals = build_meals_all(&out.events);
    let clean = two_pass_clean(&meals);
    let behavior = clean.behavior;

    // weather, lag matrix, indices
    let (daily, _) = aggregate_daily(&out.weather);
    let mut lag = build_lag_matrix(&out.weather).unwrap();
    normalize(&mut lag).unwrap();
    let pca = fit_pca(&lag.data, lag.n_rows(), lag.n_cols, 0.95).unwrap();
    let all_scores = project(&lag.data, lag.n_rows(), lag.n_cols, &pca).unwrap();

    let ta_by_date: BTreeMap<NaiveDate, f64> = daily.iter().map(|d| (d.date, d.ta_mean)).collect();
    let mut fi_by_date: BTreeMap<NaiveDate, (f64, usize)> = BTreeMap::new();
    for b in &behavior {
        let e = fi_by_date.entry(b.date).or_insert((0.0, 0));
        e.0 += b.feed_intake_kg;
        e.1 += 1;
    }
    let mut dates = Vec::new();
    let mut scores = Vec::new();
    let mut ta = Vec::new();
    let mut fi = Vec::new();
    for (i, &date) in lag.dates.iter().enumerate() {
        let (Some(&t), Some(&(s, c))) = (ta_by_date.get(&date), fi_by_date.get(&date)) else {
            continue;
        };
        dates.push(date);
        scores.push(all_scores[i].clone());
        ta.push(t);
        fi.push(s / c as f64);
    }
    let ic = incomfort(&scores, &pca, &ta).unwrap();
    let strata: Vec<(String, String)> =
        dates.iter().map(|d| ("all".to_string(), season_of(*d).to_string())).collect();
    let ea = easi(&scores, &fi, &ta, &split(&strata, 1010, 3).unwrap().train, &easi_gbt_params(1010))
        .unwrap();
    let (series, _, _) = classify_series(&dates, &ic, &ea.values, 1010).unwrap();

    // feature table and animal-level models
    let amap: HashMap<String, AnimalInfo> =
        out.animals.iter().map(|a| (a.animal_id.clone(), a.clone())).collect();
    let table = build_feature_table(&behavior, &amap, &daily, &series);
    assert!(table.rows.len() > 10_000, "only {} feature rows", table.rows.len());

    let strata: Vec<(String, String)> = table
        .rows
        .iter()
        .map(|r| (r.animal_id.clone(), season_of(r.date).to_string()))
        .collect();
    let plan = split(&strata, 1010, 3).unwrap();
    let rows: Vec<Vec<f64>> = table.rows.iter().map(|r| r.features.clone()).collect();
    let targets: Vec<f64> = table.rows.iter().map(|r| r.target).collect();
    let tr_idx: Vec<usize> = (0..rows.len()).filter(|&i| plan.train[i]).collect();
    let va_idx: Vec<usize> = (0..rows.len()).filter(|&i| plan.validation[i]).collect();
    let tr_rows: Vec<Vec<f64>> = tr_idx.iter().map(|&i| rows[i].clone()).collect();
    let tr_y: Vec<f64> = tr_idx.iter().map(|&i| targets[i]).collect();
    let params = GbtParams {
        max_depth: 5,
        n_rounds: 300,
        learning_rate: 0.05,
        l2_reg: 1.0,
        min_child_weight: 5,
        seed: 1010,
        ..GbtParams::default()
    };
    let (gbt, _) = train_gbt(&tr_rows, &tr_y, &table.feature_names, &params).unwrap();
    let ridge = train_ridge(&tr_rows, &tr_y).unwrap();

    let va_y: Vec<f64> = va_idx.iter().map(|&i| targets[i]).collect();
    let gbt_va: Vec<f64> = va_idx.iter().map(|&i| gbt.predict_unchecked(&rows[i])).collect();
    let ridge_va: Vec<f64> = va_idx.iter().map(|&i| ridge.predict(&rows[i])).collect();
    let m_gbt = metrics(&va_y, &gbt_va);
    let m_ridge = metrics(&va_y, &ridge_va);
    assert!(m_gbt.r2.unwrap() >= 0.7, "animal validation R2 {:?}", m_gbt.r2);
    assert!(m_gbt.rmse <= m_ridge.rmse, "gbt {} vs ridge {}", m_gbt.rmse, m_ridge.rmse);

    // pen level: roll up animal predictions, same discipline
    let preds = gbt.predict_batch(&rows);
    let pen_table = build_pen_table(&table, &preds);
    let pen_strata: Vec<(String, String)> = pen_table
        .rows
        .iter()
        .map(|r| (r.pen_id.clone(), season_of(r.date).to_string()))
        .collect();
    let pen_plan = split(&pen_strata, 1011, 3).unwrap();
    let pen_rows: Vec<Vec<f64>> = pen_table.rows.iter().map(|r| r.features.clone()).collect();
    let pen_y: Vec<f64> = pen_table.rows.iter().map(|r| r.target).collect();
    let ptr: Vec<usize> = (0..pen_rows.len()).filter(|&i| pen_plan.train[i]).collect();
    let pva: Vec<usize> = (0..pen_rows.len()).filter(|&i| pen_plan.validation[i]).collect();
    let ptr_rows: Vec<Vec<f64>> = ptr.iter().map(|&i| pen_rows[i].clone()).collect();
    let ptr_y: Vec<f64> = ptr.iter().map(|&i| pen_y[i]).collect();
    let (pen_model, _) =
        train_gbt(&ptr_rows, &ptr_y, &pen_table.feature_names, &params).unwrap();
    let pen_va_y: Vec<f64> = pva.iter().map(|&i| pen_y[i]).collect();
    let pen_va_p: Vec<f64> =
        pva.iter().map(|&i| pen_model.predict_unchecked(&pen_rows[i])).collect();
    let m_pen = metrics(&pen_va_y, &pen_va_p);
    assert!(
        m_pen.rmse < 0.5 * m_gbt.rmse,
        "pen rmse {} vs animal rmse {}",
        m_pen.rmse,
        m_gbt.rmse
    );

    // behavior table sanity: the daily aggregate is what the models consumed
    assert!(!daily_aggregate(&meals).is_empty());
    assert!(t0.elapsed().as_secs_f64() < 600.0, "took {:?}", t0.elapsed());
    pass(10, "end-to-end synthetic analog");
}

// ------------------------------------------------------------------ 11

#[test]
fn a11_cli_determinism() {
    use std::process::Command;
    let bin = env!("CARGO_BIN_EXE_feedpipe");
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("config.json");
    std::fs::write(
        &config,
        r#"{"seed": 99, "synth": {"n_animals": 12, "n_pens": 3, "n_days": 90}}"#,
    )
    .unwrap();
    let mut reports = Vec::new();
    for threads in ["1", "8"] {
        let out = dir.path().join(format!("out{threads}"));
        let status = Command::new(bin)
            .args(["run", "all", "--config"])
            .arg(&config)
            .args(["--threads", threads, "--out"])
            .arg(&out)
            .env_remove("FEEDPIPE_SEED")
            .env_remove("FEEDPIPE_OUT")
            .status()
            .unwrap();
        assert!(status.success(), "--threads {threads} run failed");
        reports.push(std::fs::read(out.join("report.json")).unwrap());
    }
    assert_eq!(reports[0], reports[1], "report.json differs across thread counts");
    pass(11, "cli determinism");
}
