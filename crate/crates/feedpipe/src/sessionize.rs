//! Meal sessionization: feeding events merged when gaps are under 20 minutes,
//! with meals closed at 2 hours of cumulative duration or 10 kg of intake.
//! Events are never split; the event that would breach a cap starts the next
//! meal.

use crate::ingest::{day_of, FeedingEvent};
use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

/// Gap at or above this closes the current meal (20 min).
pub const MEAL_GAP_S: f64 = 1200.0;
/// Cumulative event duration cap per meal (2 h).
pub const MEAL_DURATION_CAP_S: f64 = 7200.0;
/// Cumulative intake cap per meal.
pub const MEAL_INTAKE_CAP_KG: f64 = 10.0;

#[derive(Debug, Error)]
pub enum SessionizeError {
    #[error("events for animal {0} are not sorted by start time")]
    Unsorted(String),
}

/// An aggregated feeding session (the paper's MI unit).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Meal {
    pub animal_id: String,
    pub pen_id: String,
    pub start: i64,
    pub end: i64,
    pub intake_kg: f64,
    pub n_events: usize,
    /// Sum of constituent event durations, seconds.
    pub duration_s: f64,
}

/// Per-animal daily behavior traits derived from meals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DailyBehavior {
    pub animal_id: String,
    pub pen_id: String,
    pub date: NaiveDate,
    pub n_meals: usize,
    pub eating_time_s: f64,
    pub mean_meal_interval_s: f64,
    pub feed_intake_kg: f64,
    pub first_meal_start: i64,
    pub last_meal_end: i64,
    pub n_events: usize,
    /// True for emitted zero-meal days.
    pub empty_day: bool,
}

fn event_end(e: &FeedingEvent) -> f64 {
    e.start as f64 + e.duration_s
}

/// Fold one animal's time-sorted events into meals.
///
/// A new meal opens when the gap from the previous event's end to the next
/// event's start is >= 20 min, or when appending the event would push the
/// meal past either cap.
pub fn build_meals(events: &[FeedingEvent]) -> Result<Vec<Meal>, SessionizeError> {
    for w in events.windows(2) {
        if w[1].start < w[0].start {
            return Err(SessionizeError::Unsorted(w[0].animal_id.clone()));
        }
    }
    let mut meals: Vec<Meal> = Vec::new();
    let mut current: Option<(Meal, f64)> = None; // meal + end of last event
    for e in events {
        let fits = match &current {
            Some((meal, last_end)) => {
                (e.start as f64 - last_end) < MEAL_GAP_S
                    && meal.duration_s + e.duration_s <= MEAL_DURATION_CAP_S
                    && meal.intake_kg + e.intake_kg <= MEAL_INTAKE_CAP_KG
            }
            None => false,
        };
        if fits {
            let (meal, last_end) = current.as_mut().unwrap();
            meal.end = meal.end.max(event_end(e).ceil() as i64);
            meal.intake_kg += e.intake_kg;
            meal.duration_s += e.duration_s;
            meal.n_events += 1;
            *last_end = event_end(e);
        } else {
            if let Some((meal, _)) = current.take() {
                meals.push(meal);
            }
            current = Some((
                Meal {
                    animal_id: e.animal_id.clone(),
                    pen_id: e.pen_id.clone(),
                    start: e.start,
                    end: event_end(e).ceil() as i64,
                    intake_kg: e.intake_kg,
                    n_events: 1,
                    duration_s: e.duration_s,
                },
                event_end(e),
            ));
        }
    }
    if let Some((meal, _)) = current {
        meals.push(meal);
    }
    Ok(meals)
}

/// Group events by animal, sort within each animal, and sessionize all.
pub fn build_meals_all(events: &[FeedingEvent]) -> Vec<Meal> {
    let mut by_animal: BTreeMap<&str, Vec<&FeedingEvent>> = BTreeMap::new();
    for e in events {
        by_animal.entry(&e.animal_id).or_default().push(e);
    }
    let mut meals = Vec::new();
    for (_, mut evs) in by_animal {
        evs.sort_by_key(|e| e.start);
        let owned: Vec<FeedingEvent> = evs.into_iter().cloned().collect();
        meals.extend(build_meals(&owned).expect("sorted by construction"));
    }
    meals.sort_by(|a, b| (a.start, &a.animal_id).cmp(&(b.start, &b.animal_id)));
    meals
}

/// Aggregate meals into one record per animal-day. A meal belongs to the UTC
/// day of its start. The mean interval is over gaps between consecutive meal
/// midpoints within the day.
pub fn daily_aggregate(meals: &[Meal]) -> Vec<DailyBehavior> {
    let mut by_key: BTreeMap<(String, NaiveDate), Vec<&Meal>> = BTreeMap::new();
    for m in meals {
        by_key
            .entry((m.animal_id.clone(), day_of(m.start)))
            .or_default()
            .push(m);
    }
    let mut out = Vec::new();
    for ((animal_id, date), mut day_meals) in by_key {
        day_meals.sort_by_key(|m| m.start);
        let n_meals = day_meals.len();
        let eating_time_s: f64 = day_meals.iter().map(|m| m.duration_s).sum();
        let feed_intake_kg: f64 = day_meals.iter().map(|m| m.intake_kg).sum();
        let midpoints: Vec<f64> = day_meals
            .iter()
            .map(|m| (m.start as f64 + m.end as f64) / 2.0)
            .collect();
        let mean_meal_interval_s = if midpoints.len() >= 2 {
            midpoints.windows(2).map(|w| w[1] - w[0]).sum::<f64>() / (midpoints.len() - 1) as f64
        } else {
            0.0
        };
        out.push(DailyBehavior {
            pen_id: day_meals[0].pen_id.clone(),
            animal_id,
            date,
            n_meals,
            eating_time_s: eating_time_s.min(86400.0),
            mean_meal_interval_s,
            feed_intake_kg,
            first_meal_start: day_meals[0].start,
            last_meal_end: day_meals.last().unwrap().end,
            n_events: day_meals.iter().map(|m| m.n_events).sum(),
            empty_day: false,
        });
    }
    out
}
