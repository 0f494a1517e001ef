//! Feature assembly for the animal-level and pen-level intake models.
//!
//! One row per animal-day. Rows missing any lag, weather, or index value are
//! dropped and counted rather than imputed.

use crate::indices::IndexSeries;
use crate::sessionize::DailyBehavior;
use crate::weather::{DailyWeather, BASE_VARS, N_BASE_VARS};
use chrono::{Duration, NaiveDate};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashMap};

pub const N_LAGS: usize = 6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnimalInfo {
    pub animal_id: String,
    pub pen_id: String,
    /// Integer-coded breed.
    pub breed: u32,
    /// Integer-coded sex.
    pub sex: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureRow {
    pub animal_id: String,
    pub pen_id: String,
    pub date: NaiveDate,
    pub features: Vec<f64>,
    /// Daily feed intake, kg.
    pub target: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FeatureTable {
    pub feature_names: Vec<String>,
    pub rows: Vec<FeatureRow>,
    pub dropped_rows: usize,
}

pub fn feature_names() -> Vec<String> {
    let mut names = vec![
        "breed".to_string(),
        "sex".to_string(),
        "pen_size".to_string(),
        "n_meals".to_string(),
        "mean_meal_duration_s".to_string(),
        "n_events".to_string(),
    ];
    for k in 1..=N_LAGS {
        names.push(format!("fi_lag{k}"));
    }
    for k in 1..=N_LAGS {
        names.push(format!("meal_duration_lag{k}"));
    }
    for v in BASE_VARS {
        names.push(format!("wx_{v}"));
    }
    names.push("incomfort".to_string());
    names.push("easi".to_string());
    names
}

/// Assemble the animal-day design matrix. Requires six complete days of
/// intake/duration history, same-day weather, and same-day index values.
pub fn build_feature_table(
    behavior: &[DailyBehavior],
    animals: &HashMap<String, AnimalInfo>,
    daily_weather: &[DailyWeather],
    indices: &[IndexSeries],
) -> FeatureTable {
    let wx: BTreeMap<NaiveDate, &DailyWeather> = daily_weather
        .iter()
        .filter(|d| !d.incomplete)
        .map(|d| (d.date, d))
        .collect();
    let idx: BTreeMap<NaiveDate, &IndexSeries> = indices.iter().map(|s| (s.date, s)).collect();

    // headcount per pen from the animal table
    let mut pen_size: HashMap<&str, f64> = HashMap::new();
    for info in animals.values() {
        *pen_size.entry(info.pen_id.as_str()).or_insert(0.0) += 1.0;
    }

    // per-animal per-day lookups
    let mut by_animal: BTreeMap<&str, BTreeMap<NaiveDate, &DailyBehavior>> = BTreeMap::new();
    for b in behavior {
        by_animal
            .entry(b.animal_id.as_str())
            .or_default()
            .insert(b.date, b);
    }

    let mut rows = Vec::new();
    let mut dropped = 0usize;
    for (animal_id, days) in &by_animal {
        let Some(info) = animals.get(*animal_id) else {
            dropped += days.len();
            continue;
        };
        for (&date, b) in days {
            let (Some(w), Some(ix)) = (wx.get(&date), idx.get(&date)) else {
                dropped += 1;
                continue;
            };
            let mut fi_lags = Vec::with_capacity(N_LAGS);
            let mut md_lags = Vec::with_capacity(N_LAGS);
            for k in 1..=N_LAGS as i64 {
                match days.get(&(date - Duration::days(k))) {
                    Some(prev) if prev.n_meals > 0 => {
                        fi_lags.push(prev.feed_intake_kg);
                        md_lags.push(prev.eating_time_s / prev.n_meals as f64);
                    }
                    _ => break,
                }
            }
            if fi_lags.len() < N_LAGS || b.n_meals == 0 {
                dropped += 1;
                continue;
            }
            let mut f = vec![
                info.breed as f64,
                info.sex as f64,
                *pen_size.get(info.pen_id.as_str()).unwrap_or(&0.0),
                b.n_meals as f64,
                b.eating_time_s / b.n_meals as f64,
                b.n_events as f64,
            ];
            f.extend(fi_lags);
            f.extend(md_lags);
            f.extend(w.values());
            f.push(ix.incomfort);
            f.push(ix.easi);
            rows.push(FeatureRow {
                animal_id: animal_id.to_string(),
                pen_id: info.pen_id.clone(),
                date,
                features: f,
                target: b.feed_intake_kg,
            });
        }
    }
    FeatureTable {
        feature_names: feature_names(),
        rows,
        dropped_rows: dropped,
    }
}

pub fn pen_feature_names() -> Vec<String> {
    let mut names = vec![
        "pred_mean".to_string(),
        "pred_sum".to_string(),
        "headcount".to_string(),
    ];
    for v in BASE_VARS {
        names.push(format!("wx_{v}"));
    }
    names.push("incomfort".to_string());
    names.push("easi".to_string());
    names
}

/// Roll animal-day rows and their model predictions up to pen-day rows.
/// The target is mean per-head intake; predictors are the aggregated animal
/// predictions plus the day's weather and indices.
pub fn build_pen_table(
    table: &FeatureTable,
    predictions: &[f64],
) -> FeatureTable {
    assert_eq!(table.rows.len(), predictions.len());
    let wx_off = 6 + 2 * N_LAGS;
    let mut groups: BTreeMap<(String, NaiveDate), Vec<usize>> = BTreeMap::new();
    for (i, r) in table.rows.iter().enumerate() {
        groups.entry((r.pen_id.clone(), r.date)).or_default().push(i);
    }
    let mut rows = Vec::new();
    for ((pen_id, date), idxs) in groups {
        let n = idxs.len() as f64;
        let pred_sum: f64 = idxs.iter().map(|&i| predictions[i]).sum();
        let target = idxs.iter().map(|&i| table.rows[i].target).sum::<f64>() / n;
        let first = &table.rows[idxs[0]];
        let mut f = vec![pred_sum / n, pred_sum, n];
        f.extend_from_slice(&first.features[wx_off..wx_off + N_BASE_VARS + 2]);
        rows.push(FeatureRow {
            animal_id: String::new(),
            pen_id,
            date,
            features: f,
            target,
        });
    }
    FeatureTable {
        feature_names: pen_feature_names(),
        rows,
        dropped_rows: 0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mk_behavior(animal: &str, pen: &str, date: NaiveDate, fi: f64) -> DailyBehavior {
        DailyBehavior {
            animal_id: animal.to_string(),
            pen_id: pen.to_string(),
            date,
            n_meals: 4,
            eating_time_s: 4000.0,
            mean_meal_interval_s: 9000.0,
            feed_intake_kg: fi,
            first_meal_start: 0,
            last_meal_end: 0,
            n_events: 9,
            empty_day: false,
        }
    }

    fn mk_weather(date: NaiveDate) -> DailyWeather {
        DailyWeather {
            date,
            ta_mean: 10.0,
            ta_max: 15.0,
            ta_min: 5.0,
            rh_mean: 70.0,
            rh_max: 90.0,
            rh_min: 50.0,
            pv_mean: 1.0,
            tp_mean: 9.0,
            wd_mean: 180.0,
            ws_mean: 3.0,
            wg_max: 6.0,
            si_mean: 150.0,
            rain_sum: 0.0,
            completeness: 1.0,
            incomplete: false,
        }
    }

    fn mk_index(date: NaiveDate) -> IndexSeries {
        IndexSeries {
            date,
            incomfort: 0.1,
            easi: -0.2,
            incomfort_class: 2,
            easi_class: 2,
        }
    }

    fn setup(n_days: i64) -> (Vec<DailyBehavior>, HashMap<String, AnimalInfo>, Vec<DailyWeather>, Vec<IndexSeries>) {
        let d0 = NaiveDate::from_ymd_opt(2021, 3, 1).unwrap();
        let mut behavior = Vec::new();
        let mut weather = Vec::new();
        let mut indices = Vec::new();
        for i in 0..n_days {
            let d = d0 + Duration::days(i);
            behavior.push(mk_behavior("a1", "p1", d, 10.0 + i as f64 * 0.1));
            weather.push(mk_weather(d));
            indices.push(mk_index(d));
        }
        let mut animals = HashMap::new();
        animals.insert(
            "a1".to_string(),
            AnimalInfo { animal_id: "a1".into(), pen_id: "p1".into(), breed: 1, sex: 0 },
        );
        (behavior, animals, weather, indices)
    }

    #[test]
    fn thirty_three_features_and_lag_gating() {
        let (behavior, animals, weather, indices) = setup(10);
        let t = build_feature_table(&behavior, &animals, &weather, &indices);
        assert_eq!(t.feature_names.len(), 33);
        // first 6 days lack full lag history
        assert_eq!(t.rows.len(), 4);
        assert_eq!(t.dropped_rows, 6);
        let r = &t.rows[0];
        assert_eq!(r.features.len(), 33);
        // fi_lag1 is yesterday's intake
        let lag1_pos = t.feature_names.iter().position(|n| n == "fi_lag1").unwrap();
        assert!((r.features[lag1_pos] - (r.target - 0.1)).abs() < 1e-9);
    }

    #[test]
    fn missing_weather_day_drops_row() {
        let (behavior, animals, mut weather, indices) = setup(10);
        weather.remove(8);
        let t = build_feature_table(&behavior, &animals, &weather, &indices);
        assert_eq!(t.rows.len(), 3);
        assert_eq!(t.dropped_rows, 7);
    }

    #[test]
    fn pen_rollup_averages_targets() {
        let (mut behavior, mut animals, weather, indices) = setup(10);
        let d0 = NaiveDate::from_ymd_opt(2021, 3, 1).unwrap();
        for i in 0..10 {
            behavior.push(mk_behavior("a2", "p1", d0 + Duration::days(i), 8.0));
        }
        animals.insert(
            "a2".to_string(),
            AnimalInfo { animal_id: "a2".into(), pen_id: "p1".into(), breed: 1, sex: 1 },
        );
        let t = build_feature_table(&behavior, &animals, &weather, &indices);
        let preds: Vec<f64> = t.rows.iter().map(|r| r.target + 0.5).collect();
        let pen = build_pen_table(&t, &preds);
        assert_eq!(pen.feature_names.len(), 18);
        assert_eq!(pen.rows.len(), 4);
        for r in &pen.rows {
            assert_eq!(r.features[2], 2.0); // headcount
            assert!((r.features[0] - (r.target + 0.5)).abs() < 1e-9);
            assert!((r.features[1] - 2.0 * r.features[0]).abs() < 1e-9);
        }
    }
}
