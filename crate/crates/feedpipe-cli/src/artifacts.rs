//! CSV/JSON readers and writers for the intermediate artifacts each stage
//! leaves behind. Every stage can be re-run in isolation from these files.

use anyhow::{Context, Result};
use chrono::NaiveDate;
use feedpipe::cleanse::CleanedMeal;
use feedpipe::indices::IndexSeries;
use feedpipe::models::features::AnimalInfo;
use feedpipe::sessionize::{DailyBehavior, Meal};
use feedpipe::synth::TrueDaily;
use feedpipe::weather::DailyWeather;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use std::path::Path;

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)
        .with_context(|| format!("cannot create {}", path.display()))?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path)
        .with_context(|| format!("cannot read {}", path.display()))?;
    let mut out = Vec::new();
    for rec in r.deserialize() {
        out.push(rec?);
    }
    Ok(out)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(value)?)
        .with_context(|| format!("cannot write {}", path.display()))?;
    Ok(())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let s = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read {}", path.display()))?;
    Ok(serde_json::from_str(&s)?)
}

/// Flat row for cleaned_meals.csv: the meal schema plus cleaning columns.
#[derive(Debug, Serialize, Deserialize)]
pub struct CleanedMealRow {
    pub animal_id: String,
    pub pen_id: String,
    pub start: i64,
    pub end: i64,
    pub intake_kg: f64,
    pub n_events: usize,
    pub duration_s: f64,
    pub intake_raw_kg: f64,
    pub replaced: bool,
}

impl From<&CleanedMeal> for CleanedMealRow {
    fn from(c: &CleanedMeal) -> Self {
        CleanedMealRow {
            animal_id: c.meal.animal_id.clone(),
            pen_id: c.meal.pen_id.clone(),
            start: c.meal.start,
            end: c.meal.end,
            intake_kg: c.meal.intake_kg,
            n_events: c.meal.n_events,
            duration_s: c.meal.duration_s,
            intake_raw_kg: c.intake_raw_kg,
            replaced: c.replaced,
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct PredictionRow {
    pub animal_id: String,
    pub pen_id: String,
    pub date: NaiveDate,
    pub y_true: f64,
    pub y_pred_gbt: f64,
    pub y_pred_ridge: f64,
    pub split: String,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct PenPredictionRow {
    pub pen_id: String,
    pub date: NaiveDate,
    pub y_true: f64,
    pub y_pred: f64,
    pub split: String,
}

// Typed aliases to keep stage code readable.
pub fn write_meals(path: &Path, meals: &[Meal]) -> Result<()> {
    write_csv(path, meals)
}
pub fn read_meals(path: &Path) -> Result<Vec<Meal>> {
    read_csv(path)
}
pub fn write_behavior(path: &Path, rows: &[DailyBehavior]) -> Result<()> {
    write_csv(path, rows)
}
pub fn read_behavior(path: &Path) -> Result<Vec<DailyBehavior>> {
    read_csv(path)
}
pub fn write_daily_weather(path: &Path, rows: &[DailyWeather]) -> Result<()> {
    write_csv(path, rows)
}
pub fn read_daily_weather(path: &Path) -> Result<Vec<DailyWeather>> {
    read_csv(path)
}
pub fn write_index_series(path: &Path, rows: &[IndexSeries]) -> Result<()> {
    write_csv(path, rows)
}
pub fn read_index_series(path: &Path) -> Result<Vec<IndexSeries>> {
    read_csv(path)
}
pub fn write_animals(path: &Path, rows: &[AnimalInfo]) -> Result<()> {
    write_csv(path, rows)
}
pub fn read_animals(path: &Path) -> Result<Vec<AnimalInfo>> {
    read_csv(path)
}
pub fn write_truth(path: &Path, rows: &[TrueDaily]) -> Result<()> {
    write_csv(path, rows)
}
