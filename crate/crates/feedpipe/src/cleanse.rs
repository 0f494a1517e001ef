//! Two-pass outlier cleaning on meal data. Pass 1 smooths intake against
//! meal duration with a penalized spline (and the four daily behavior traits
//! against days on feed); pass 2 refits intake against duration with a
//! monotone spline. Both passes replace points whose median-centered residual
//! exceeds 3x the residual interquartile range with the fitted value.

use crate::sessionize::{daily_aggregate, DailyBehavior, Meal};
use crate::spline::{fit_monotone_spline, fit_pspline_gcv, SplineError, SplineFit};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Minimum meals per animal before any fit is attempted.
pub const MIN_MEALS_FOR_FIT: usize = 10;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OutlierReport {
    pub trait_name: String,
    pub animal_id: String,
    pub n_checked: usize,
    pub n_replaced: usize,
    pub replaced_indices: Vec<usize>,
    /// 3 x IQR of the residuals.
    pub threshold: f64,
    /// Median of the residuals (the centering point for the test).
    pub median: f64,
    pub zero_iqr: bool,
    pub insufficient_data: bool,
}

/// Linear-interpolation quantile (the common "type 7" definition).
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let pos = q * (n - 1) as f64;
    let j = pos.floor() as usize;
    let frac = pos - j as f64;
    if j + 1 < n {
        sorted[j] * (1.0 - frac) + sorted[j + 1] * frac
    } else {
        sorted[j]
    }
}

fn median(sorted: &[f64]) -> f64 {
    quantile(sorted, 0.5)
}

/// Replace points whose median-centered residual magnitude exceeds
/// 3 x IQR(residuals) with the fitted value.
pub fn detect_replace(
    x: &[f64],
    y: &[f64],
    fit: &SplineFit,
    trait_name: &str,
    animal_id: &str,
) -> (Vec<f64>, OutlierReport) {
    let fitted: Vec<f64> = x.iter().map(|&xi| fit.eval(xi)).collect();
    let resid: Vec<f64> = y.iter().zip(&fitted).map(|(yi, fi)| yi - fi).collect();
    let mut sorted = resid.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let iqr = quantile(&sorted, 0.75) - quantile(&sorted, 0.25);
    let med = median(&sorted);
    let threshold = 3.0 * iqr;

    let mut y_clean = y.to_vec();
    let mut replaced_indices = Vec::new();
    let scale = y.iter().fold(1.0f64, |a, &v| a.max(v.abs()));
    let zero_iqr = iqr <= 1e-12 * scale;
    if !zero_iqr {
        for (i, &r) in resid.iter().enumerate() {
            if (r - med).abs() > threshold {
                y_clean[i] = fitted[i];
                replaced_indices.push(i);
            }
        }
    }
    let report = OutlierReport {
        trait_name: trait_name.to_string(),
        animal_id: animal_id.to_string(),
        n_checked: y.len(),
        n_replaced: replaced_indices.len(),
        replaced_indices,
        threshold,
        median: med,
        zero_iqr,
        insufficient_data: false,
    };
    (y_clean, report)
}

/// One meal after cleaning, with its pass-1/pass-2 fitted values for the
/// cleaning plots.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CleanedMeal {
    pub meal: Meal,
    pub intake_raw_kg: f64,
    pub replaced: bool,
    pub fit_pass1: f64,
    pub fit_pass2: f64,
}

#[derive(Debug, Default)]
pub struct CleanResult {
    pub meals: Vec<CleanedMeal>,
    pub reports: Vec<OutlierReport>,
    /// Daily behavior recomputed from cleaned meals, traits smoothed and
    /// outlier-replaced against days on feed.
    pub behavior: Vec<DailyBehavior>,
    /// Animals skipped for having fewer than `MIN_MEALS_FOR_FIT` meals.
    pub skipped_animals: Vec<String>,
}

fn clean_one_animal(
    animal_id: &str,
    meals: &[Meal],
) -> Result<(Vec<CleanedMeal>, Vec<OutlierReport>), SplineError> {
    let x: Vec<f64> = meals.iter().map(|m| m.duration_s).collect();
    let y_raw: Vec<f64> = meals.iter().map(|m| m.intake_kg).collect();

    // pass 1: penalized spline, intake vs duration. A least-squares GCV fit
    // chases extreme points, so flag provisionally, refit without the flagged
    // points, and make the final call on the raw data against the refit.
    let fit0 = fit_pspline_gcv(&x, &y_raw)?;
    let (_, rep0) = detect_replace(&x, &y_raw, &fit0, "intake_vs_duration_pass0", animal_id);
    let dropped: std::collections::HashSet<usize> =
        rep0.replaced_indices.iter().copied().collect();
    let fit1 = if dropped.is_empty() {
        fit0
    } else {
        let xs: Vec<f64> = (0..x.len()).filter(|i| !dropped.contains(i)).map(|i| x[i]).collect();
        let ys: Vec<f64> =
            (0..x.len()).filter(|i| !dropped.contains(i)).map(|i| y_raw[i]).collect();
        if xs.len() >= MIN_MEALS_FOR_FIT {
            fit_pspline_gcv(&xs, &ys)?
        } else {
            fit0
        }
    };
    let (y1, mut rep1) = detect_replace(&x, &y_raw, &fit1, "intake_vs_duration_pass1", animal_id);
    rep1.trait_name = "intake_vs_duration_pass1".into();

    // pass 2: monotone refit on pass-1 output
    let fit2 = fit_monotone_spline(&x, &y1)?;
    let (y2, rep2) = detect_replace(&x, &y1, &fit2, "intake_vs_duration_pass2", animal_id);

    let cleaned = meals
        .iter()
        .enumerate()
        .map(|(i, m)| {
            let mut meal = m.clone();
            meal.intake_kg = y2[i];
            CleanedMeal {
                intake_raw_kg: y_raw[i],
                replaced: y2[i] != y_raw[i],
                fit_pass1: fit1.eval(x[i]),
                fit_pass2: fit2.eval(x[i]),
                meal,
            }
        })
        .collect();
    Ok((cleaned, vec![rep1, rep2]))
}

/// Smooth a daily trait against days on feed and replace its outliers.
/// Returns the cleaned series (unchanged when the fit is infeasible).
fn clean_trait(
    animal_id: &str,
    days: &[f64],
    values: &[f64],
    name: &str,
    reports: &mut Vec<OutlierReport>,
) -> Vec<f64> {
    if days.len() < MIN_MEALS_FOR_FIT || days.iter().all(|&d| d == days[0]) {
        return values.to_vec();
    }
    match fit_pspline_gcv(days, values) {
        Ok(fit) => {
            let (clean, rep) = detect_replace(days, values, &fit, name, animal_id);
            reports.push(rep);
            clean
        }
        Err(_) => values.to_vec(),
    }
}

/// Run both cleaning passes over all animals, then rebuild the daily behavior
/// table from cleaned meals and smooth its traits. No meals are dropped.
pub fn two_pass_clean(meals: &[Meal]) -> CleanResult {
    let mut by_animal: BTreeMap<&str, Vec<&Meal>> = BTreeMap::new();
    for m in meals {
        by_animal.entry(&m.animal_id).or_default().push(m);
    }

    let animals: Vec<(&str, Vec<Meal>)> = by_animal
        .into_iter()
        .map(|(a, ms)| {
            let mut owned: Vec<Meal> = ms.into_iter().cloned().collect();
            owned.sort_by_key(|m| m.start);
            (a, owned)
        })
        .collect();

    let per_animal: Vec<(Vec<CleanedMeal>, Vec<OutlierReport>, Option<String>)> = animals
        .par_iter()
        .map(|(animal_id, ms)| {
            if ms.len() < MIN_MEALS_FOR_FIT {
                let passthrough = ms
                    .iter()
                    .map(|m| CleanedMeal {
                        intake_raw_kg: m.intake_kg,
                        replaced: false,
                        fit_pass1: f64::NAN,
                        fit_pass2: f64::NAN,
                        meal: m.clone(),
                    })
                    .collect();
                let report = OutlierReport {
                    trait_name: "intake_vs_duration_pass1".into(),
                    animal_id: animal_id.to_string(),
                    n_checked: ms.len(),
                    n_replaced: 0,
                    replaced_indices: vec![],
                    threshold: f64::NAN,
                    median: f64::NAN,
                    zero_iqr: false,
                    insufficient_data: true,
                };
                return (passthrough, vec![report], Some(animal_id.to_string()));
            }
            match clean_one_animal(animal_id, ms) {
                Ok((cleaned, reports)) => (cleaned, reports, None),
                Err(_) => {
                    // fit failed (e.g. all durations identical); pass through flagged
                    let passthrough = ms
                        .iter()
                        .map(|m| CleanedMeal {
                            intake_raw_kg: m.intake_kg,
                            replaced: false,
                            fit_pass1: f64::NAN,
                            fit_pass2: f64::NAN,
                            meal: m.clone(),
                        })
                        .collect();
                    let report = OutlierReport {
                        trait_name: "intake_vs_duration_pass1".into(),
                        animal_id: animal_id.to_string(),
                        n_checked: ms.len(),
                        n_replaced: 0,
                        replaced_indices: vec![],
                        threshold: f64::NAN,
                        median: f64::NAN,
                        zero_iqr: false,
                        insufficient_data: true,
                    };
                    (passthrough, vec![report], Some(animal_id.to_string()))
                }
            }
        })
        .collect();

    let mut result = CleanResult::default();
    for (cleaned, reports, skipped) in per_animal {
        result.meals.extend(cleaned);
        result.reports.extend(reports);
        if let Some(a) = skipped {
            result.skipped_animals.push(a);
        }
    }

    // daily behavior from cleaned meals, then trait smoothing per animal
    let cleaned_meals: Vec<Meal> = result.meals.iter().map(|c| c.meal.clone()).collect();
    let mut behavior = daily_aggregate(&cleaned_meals);
    let mut by_animal_days: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for (i, b) in behavior.iter().enumerate() {
        by_animal_days.entry(b.animal_id.clone()).or_default().push(i);
    }
    for (animal_id, idxs) in by_animal_days {
        let first = behavior[idxs[0]].date;
        let days: Vec<f64> = idxs
            .iter()
            .map(|&i| (behavior[i].date - first).num_days() as f64)
            .collect();
        let mean_meal_dur: Vec<f64> = idxs
            .iter()
            .map(|&i| behavior[i].eating_time_s / behavior[i].n_meals.max(1) as f64)
            .collect();
        let n_meals: Vec<f64> = idxs.iter().map(|&i| behavior[i].n_meals as f64).collect();
        let first_start: Vec<f64> = idxs
            .iter()
            .map(|&i| behavior[i].first_meal_start.rem_euclid(86400) as f64)
            .collect();
        let last_end: Vec<f64> = idxs
            .iter()
            .map(|&i| behavior[i].last_meal_end.rem_euclid(86400) as f64)
            .collect();

        let dur_c = clean_trait(&animal_id, &days, &mean_meal_dur, "meal_duration", &mut result.reports);
        let nm_c = clean_trait(&animal_id, &days, &n_meals, "meals_per_day", &mut result.reports);
        let fs_c = clean_trait(&animal_id, &days, &first_start, "first_meal_start", &mut result.reports);
        let le_c = clean_trait(&animal_id, &days, &last_end, "last_meal_end", &mut result.reports);

        for (k, &i) in idxs.iter().enumerate() {
            let b = &mut behavior[i];
            b.eating_time_s = dur_c[k] * b.n_meals.max(1) as f64;
            b.n_meals = nm_c[k].round().max(0.0) as usize;
            b.first_meal_start = b.first_meal_start - b.first_meal_start.rem_euclid(86400)
                + fs_c[k].round() as i64;
            b.last_meal_end =
                b.last_meal_end - b.last_meal_end.rem_euclid(86400) + le_c[k].round() as i64;
        }
    }
    result.behavior = behavior;
    result
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spline::fit_pspline;

    #[test]
    fn zero_residuals_replace_nothing() {
        let x: Vec<f64> = (0..20).map(|i| i as f64).collect();
        let y: Vec<f64> = x.iter().map(|&xi| 2.0 * xi + 1.0).collect();
        let fit = fit_pspline(&x, &y, 1.0).unwrap();
        let (clean, rep) = detect_replace(&x, &y, &fit, "t", "a");
        assert_eq!(rep.n_replaced, 0);
        assert_eq!(clean, y);
    }

    #[test]
    fn constant_data_flags_zero_iqr() {
        let x: Vec<f64> = (0..20).map(|i| i as f64).collect();
        let y = vec![5.0; 20];
        let fit = fit_pspline(&x, &y, 1.0).unwrap();
        let (clean, rep) = detect_replace(&x, &y, &fit, "t", "a");
        assert!(rep.zero_iqr);
        assert_eq!(rep.n_replaced, 0);
        assert_eq!(clean, y);
    }

    #[test]
    fn single_spike_is_replaced() {
        // y = x plus alternating +-0.5 noise so the residual IQR is
        // hand-computable (about 1.0), with one spike far beyond 3 x IQR.
        let n = 41;
        let x: Vec<f64> = (0..n).map(|i| i as f64).collect();
        let mut y: Vec<f64> = x
            .iter()
            .enumerate()
            .map(|(i, &xi)| xi + if i % 2 == 0 { 0.5 } else { -0.5 })
            .collect();
        y[20] += 40.0; // way past 3 x IQR = 3 for residual IQR near 1
        let fit = fit_pspline(&x, &y, 1e9).unwrap(); // near-linear fit
        let (clean, rep) = detect_replace(&x, &y, &fit, "t", "a");
        assert_eq!(rep.replaced_indices, vec![20]);
        assert!((clean[20] - fit.eval(x[20])).abs() < 1e-12);
        // all other values untouched
        for i in 0..n {
            if i != 20 {
                assert_eq!(clean[i], y[i]);
            }
        }
    }

    #[test]
    fn post_replacement_residuals_within_threshold() {
        let n = 60;
        let x: Vec<f64> = (0..n).map(|i| i as f64 / 5.0).collect();
        let mut y: Vec<f64> = x
            .iter()
            .enumerate()
            .map(|(i, &xi)| xi.sin() + ((i * 7919) % 11) as f64 * 0.02)
            .collect();
        y[10] += 30.0;
        y[40] -= 25.0;
        let fit = fit_pspline_gcv(&x, &y).unwrap();
        let (clean, rep) = detect_replace(&x, &y, &fit, "t", "a");
        let resid: Vec<f64> = clean
            .iter()
            .zip(x.iter())
            .map(|(&yi, &xi)| yi - fit.eval(xi))
            .collect();
        let mut sorted: Vec<f64> = y.iter().zip(x.iter()).map(|(&yi, &xi)| yi - fit.eval(xi)).collect();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let med = median(&sorted);
        for &r in &resid {
            assert!((r - med).abs() <= rep.threshold + 1e-12);
        }
    }

    #[test]
    fn few_meals_pass_through_flagged() {
        let meals: Vec<Meal> = (0..9)
            .map(|i| Meal {
                animal_id: "A1".into(),
                pen_id: "P1".into(),
                start: i * 10000,
                end: i * 10000 + 600,
                intake_kg: 1.0,
                n_events: 1,
                duration_s: 600.0,
            })
            .collect();
        let result = two_pass_clean(&meals);
        assert_eq!(result.skipped_animals, vec!["A1".to_string()]);
        assert_eq!(result.meals.len(), 9);
        assert!(result.meals.iter().all(|c| !c.replaced));
        assert!(result.reports.iter().any(|r| r.insufficient_data));
    }

    #[test]
    fn record_count_is_preserved() {
        let meals: Vec<Meal> = (0..200)
            .map(|i| Meal {
                animal_id: format!("A{}", i % 4),
                pen_id: "P1".into(),
                start: (i as i64) * 9000,
                end: (i as i64) * 9000 + 700,
                intake_kg: 1.2 + ((i * 31) % 7) as f64 * 0.1,
                n_events: 2,
                duration_s: 500.0 + ((i * 17) % 13) as f64 * 40.0,
            })
            .collect();
        let result = two_pass_clean(&meals);
        assert_eq!(result.meals.len(), meals.len());
    }
}
