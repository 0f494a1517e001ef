//! CSV ingestion of feeder events and 15-minute weather samples.
//!
//! Parsing is total: every data row becomes exactly one record or one
//! [`Diagnostic`]. Timestamps are ISO-8601 UTC; weather times are snapped to
//! the 15-minute grid (ties toward the earlier slot).

use crate::diag::Diagnostic;
use chrono::{DateTime, NaiveDate, SecondsFormat, TimeZone, Utc};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::io::Read;
use std::path::Path;
use thiserror::Error;

pub const SLOT_SECONDS: i64 = 900;
pub const SLOTS_PER_DAY: usize = 96;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("cannot read {path}: {source}")]
    Unreadable {
        path: String,
        source: std::io::Error,
    },
    #[error("csv error in {path}: {source}")]
    Csv { path: String, source: csv::Error },
    #[error("missing column {0:?} in header")]
    MissingColumn(String),
}

/// One feeder visit: the raw unit of the pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeedingEvent {
    pub animal_id: String,
    pub pen_id: String,
    /// Unix seconds, UTC.
    pub start: i64,
    pub intake_kg: f64,
    pub duration_s: f64,
}

/// One 15-minute weather record from a station.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeatherSample {
    pub station_id: String,
    /// Unix seconds, UTC, snapped to the 15-min grid.
    pub time: i64,
    pub ta_c: f64,
    pub rh_pct: f64,
    pub pv_kpa: f64,
    pub tp_c: f64,
    pub wd_deg: f64,
    pub ws_ms: f64,
    pub wg_ms: f64,
    pub si_wm2: f64,
    pub rain_mm: f64,
}

/// Column mapping for the events file. Defaults to the canonical header.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EventSchema {
    pub timestamp: String,
    pub animal_id: String,
    pub pen_id: String,
    pub intake_kg: String,
    pub duration_s: String,
}

impl Default for EventSchema {
    fn default() -> Self {
        EventSchema {
            timestamp: "timestamp".into(),
            animal_id: "animal_id".into(),
            pen_id: "pen_id".into(),
            intake_kg: "intake_kg".into(),
            duration_s: "duration_s".into(),
        }
    }
}

pub fn parse_timestamp(s: &str) -> Option<i64> {
    DateTime::parse_from_rfc3339(s.trim())
        .ok()
        .map(|t| t.with_timezone(&Utc).timestamp())
}

pub fn format_timestamp(t: i64) -> String {
    Utc.timestamp_opt(t, 0)
        .single()
        .map(|d| d.to_rfc3339_opts(SecondsFormat::Secs, true))
        .unwrap_or_else(|| t.to_string())
}

pub fn day_of(t: i64) -> NaiveDate {
    DateTime::<Utc>::from_timestamp(t.div_euclid(86400) * 86400, 0)
        .expect("in-range timestamp")
        .date_naive()
}

/// Snap a timestamp to the nearest 15-min slot, ties toward earlier.
pub fn snap_to_grid(t: i64) -> i64 {
    let r = t.rem_euclid(SLOT_SECONDS);
    if r <= SLOT_SECONDS / 2 {
        t - r
    } else {
        t + (SLOT_SECONDS - r)
    }
}

fn header_index(headers: &csv::StringRecord, name: &str) -> Result<usize, IngestError> {
    headers
        .iter()
        .position(|h| h.trim() == name)
        .ok_or_else(|| IngestError::MissingColumn(name.to_string()))
}

/// Parse a feeder-event CSV. Malformed rows become diagnostics, never panics.
/// Row order is preserved.
pub fn parse_events(
    path: &Path,
    schema: &EventSchema,
) -> Result<(Vec<FeedingEvent>, Vec<Diagnostic>), IngestError> {
    let file = std::fs::File::open(path).map_err(|e| IngestError::Unreadable {
        path: path.display().to_string(),
        source: e,
    })?;
    parse_events_from(file, schema).map_err(|e| IngestError::Csv {
        path: path.display().to_string(),
        source: e,
    })
}

pub fn parse_events_from<R: Read>(
    reader: R,
    schema: &EventSchema,
) -> Result<(Vec<FeedingEvent>, Vec<Diagnostic>), csv::Error> {
    let mut rdr = csv::ReaderBuilder::new().flexible(true).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h.trim() == name);
    let (i_ts, i_an, i_pen, i_in, i_du) = match (
        col(&schema.timestamp),
        col(&schema.animal_id),
        col(&schema.pen_id),
        col(&schema.intake_kg),
        col(&schema.duration_s),
    ) {
        (Some(a), Some(b), Some(c), Some(d), Some(e)) => (a, b, c, d, e),
        _ => {
            // Missing columns make every row unparseable; surface as a csv
            // error via the first record read below is not possible, so use
            // a synthetic diagnostic stream instead.
            let mut diags = Vec::new();
            for (row, _) in rdr.records().enumerate() {
                diags.push(Diagnostic::new(row + 1, "missing_column", "header lacks a mapped column"));
            }
            return Ok((Vec::new(), diags));
        }
    };

    let mut events = Vec::new();
    let mut diags = Vec::new();
    for (idx, rec) in rdr.records().enumerate() {
        let row = idx + 1;
        let rec = match rec {
            Ok(r) => r,
            Err(e) => {
                diags.push(Diagnostic::new(row, "malformed_row", e.to_string()));
                continue;
            }
        };
        let field = |i: usize| rec.get(i).unwrap_or("").trim();
        let Some(start) = parse_timestamp(field(i_ts)) else {
            diags.push(Diagnostic::new(row, "bad_timestamp", field(i_ts)));
            continue;
        };
        let animal_id = field(i_an).to_string();
        let pen_id = field(i_pen).to_string();
        if animal_id.is_empty() {
            diags.push(Diagnostic::new(row, "empty_animal_id", ""));
            continue;
        }
        let Ok(intake_kg) = field(i_in).parse::<f64>() else {
            diags.push(Diagnostic::new(row, "bad_intake", field(i_in)));
            continue;
        };
        let Ok(duration_s) = field(i_du).parse::<f64>() else {
            diags.push(Diagnostic::new(row, "bad_duration", field(i_du)));
            continue;
        };
        if !intake_kg.is_finite() || intake_kg < 0.0 {
            diags.push(Diagnostic::new(row, "negative_intake", format!("{intake_kg}")));
            continue;
        }
        if !duration_s.is_finite() || duration_s < 0.0 {
            diags.push(Diagnostic::new(row, "negative_duration", format!("{duration_s}")));
            continue;
        }
        events.push(FeedingEvent {
            animal_id,
            pen_id,
            start,
            intake_kg,
            duration_s,
        });
    }
    Ok((events, diags))
}

/// Parse a weather CSV for one station (empty `station_id` keeps every row).
/// Output is time-sorted, snapped to the grid, deduplicated (last wins).
pub fn parse_weather(
    path: &Path,
    station_id: &str,
) -> Result<(Vec<WeatherSample>, Vec<Diagnostic>), IngestError> {
    let file = std::fs::File::open(path).map_err(|e| IngestError::Unreadable {
        path: path.display().to_string(),
        source: e,
    })?;
    parse_weather_from(file, station_id).map_err(|e| IngestError::Csv {
        path: path.display().to_string(),
        source: e,
    })
}

pub fn parse_weather_from<R: Read>(
    reader: R,
    station_id: &str,
) -> Result<(Vec<WeatherSample>, Vec<Diagnostic>), csv::Error> {
    let mut rdr = csv::ReaderBuilder::new().flexible(true).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let idx = |name: &str| header_index(&headers, name);
    let (i_ts, i_st) = match (idx("timestamp"), idx("station_id")) {
        (Ok(a), Ok(b)) => (a, b),
        _ => return Ok((Vec::new(), vec![Diagnostic::new(0, "missing_column", "timestamp/station_id")])),
    };
    let vars = ["ta_c", "rh_pct", "pv_kpa", "tp_c", "wd_deg", "ws_ms", "wg_ms", "si_wm2", "rain_mm"];
    let mut vi = [0usize; 9];
    for (k, v) in vars.iter().enumerate() {
        match idx(v) {
            Ok(i) => vi[k] = i,
            Err(_) => return Ok((Vec::new(), vec![Diagnostic::new(0, "missing_column", *v)])),
        }
    }

    let mut samples: Vec<WeatherSample> = Vec::new();
    let mut diags = Vec::new();
    let mut last_time = i64::MIN;
    let mut unsorted = false;
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 1;
        let rec = match rec {
            Ok(r) => r,
            Err(e) => {
                diags.push(Diagnostic::new(row, "malformed_row", e.to_string()));
                continue;
            }
        };
        let field = |i: usize| rec.get(i).unwrap_or("").trim();
        let st = field(i_st).to_string();
        if !station_id.is_empty() && st != station_id {
            continue;
        }
        let Some(raw_time) = parse_timestamp(field(i_ts)) else {
            diags.push(Diagnostic::new(row, "bad_timestamp", field(i_ts)));
            continue;
        };
        let mut vals = [0.0f64; 9];
        let mut bad = None;
        for (k, &ci) in vi.iter().enumerate() {
            match field(ci).parse::<f64>() {
                Ok(v) if v.is_finite() => vals[k] = v,
                _ => {
                    bad = Some(vars[k]);
                    break;
                }
            }
        }
        if let Some(name) = bad {
            diags.push(Diagnostic::new(row, "bad_value", name));
            continue;
        }
        let time = snap_to_grid(raw_time);
        let mut rh = vals[1];
        if !(0.0..=100.0).contains(&rh) {
            diags.push(Diagnostic::new(row, "rh_clamped", format!("{rh}")));
            rh = rh.clamp(0.0, 100.0);
        }
        let mut wd = vals[4].rem_euclid(360.0);
        if wd >= 360.0 {
            wd = 0.0;
        }
        if time < last_time {
            unsorted = true;
        }
        last_time = time;
        samples.push(WeatherSample {
            station_id: st,
            time,
            ta_c: vals[0],
            rh_pct: rh,
            pv_kpa: vals[2].max(0.0),
            tp_c: vals[3],
            wd_deg: wd,
            ws_ms: vals[5].max(0.0),
            wg_ms: vals[6].max(0.0),
            si_wm2: vals[7].max(0.0),
            rain_mm: vals[8].max(0.0),
        });
    }
    if unsorted {
        diags.push(Diagnostic::new(0, "unsorted_input", "samples re-sorted by time"));
        samples.sort_by_key(|s| s.time);
    }
    // Collapse duplicate timestamps, keeping the last occurrence.
    let mut dedup: Vec<WeatherSample> = Vec::with_capacity(samples.len());
    for s in samples {
        match dedup.last() {
            Some(prev) if prev.time == s.time => {
                diags.push(Diagnostic::new(0, "duplicate_timestamp", format_timestamp(s.time)));
                *dedup.last_mut().unwrap() = s;
            }
            _ => dedup.push(s),
        }
    }
    Ok((dedup, diags))
}

/// Per-day slot completeness for a sorted weather series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DayCompleteness {
    pub date: NaiveDate,
    /// Distinct 15-min slots present, out of 96.
    pub present: usize,
    pub longest_gap_min: i64,
}

/// Summarize slot coverage per calendar day. The longest gap is measured
/// between consecutive present slots, with virtual slots just outside the day
/// so edge holes count too (a complete day reports 15).
pub fn gap_report(samples: &[WeatherSample]) -> Vec<DayCompleteness> {
    let mut by_day: BTreeMap<NaiveDate, Vec<i64>> = BTreeMap::new();
    for s in samples {
        let slot = s.time.rem_euclid(86400) / SLOT_SECONDS;
        by_day.entry(day_of(s.time)).or_default().push(slot);
    }
    by_day
        .into_iter()
        .map(|(date, mut slots)| {
            slots.sort_unstable();
            slots.dedup();
            let mut longest = 0i64;
            let mut prev = -1i64;
            for &s in slots.iter().chain(std::iter::once(&(SLOTS_PER_DAY as i64))) {
                longest = longest.max(s - prev);
                prev = s;
            }
            DayCompleteness {
                date,
                present: slots.len(),
                longest_gap_min: longest * 15,
            }
        })
        .collect()
}

pub fn write_events_csv<W: std::io::Write>(w: W, events: &[FeedingEvent]) -> csv::Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["timestamp", "animal_id", "pen_id", "intake_kg", "duration_s"])?;
    for e in events {
        wtr.write_record([
            format_timestamp(e.start),
            e.animal_id.clone(),
            e.pen_id.clone(),
            format!("{}", e.intake_kg),
            format!("{}", e.duration_s),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn write_weather_csv<W: std::io::Write>(w: W, samples: &[WeatherSample]) -> csv::Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record([
        "timestamp", "station_id", "ta_c", "rh_pct", "pv_kpa", "tp_c", "wd_deg", "ws_ms", "wg_ms",
        "si_wm2", "rain_mm",
    ])?;
    for s in samples {
        wtr.write_record([
            format_timestamp(s.time),
            s.station_id.clone(),
            format!("{}", s.ta_c),
            format!("{}", s.rh_pct),
            format!("{}", s.pv_kpa),
            format!("{}", s.tp_c),
            format!("{}", s.wd_deg),
            format!("{}", s.ws_ms),
            format!("{}", s.wg_ms),
            format!("{}", s.si_wm2),
            format!("{}", s.rain_mm),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}
