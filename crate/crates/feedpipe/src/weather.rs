//! Daily weather aggregation and the lagged feature matrix: 13 variables x
//! 96 15-min slots x 7 days (current day plus lags 1-6) = 8,736 columns per
//! qualifying day.

use crate::diag::Diagnostic;
use crate::ingest::{day_of, WeatherSample, SLOTS_PER_DAY, SLOT_SECONDS};
use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;
use thiserror::Error;

pub const N_BASE_VARS: usize = 13;
pub const N_LAG_DAYS: usize = 7; // current day + 6 lags
pub const N_LAG_COLS: usize = N_BASE_VARS * SLOTS_PER_DAY * N_LAG_DAYS; // 8,736

/// Slot-level variable names, in column order. The daily max/min forms are
/// broadcast across the day's slots.
pub const BASE_VARS: [&str; N_BASE_VARS] = [
    "ta", "ta_max", "ta_min", "rh", "rh_max", "rh_min", "pv", "tp", "wd", "ws", "wg", "si", "rain",
];

/// A day qualifies for the lag matrix when at least 75% of slots are present.
pub const MIN_DAY_COMPLETENESS: f64 = 0.75;

#[derive(Debug, Error)]
pub enum WeatherError {
    #[error("insufficient_history: no date has 7 consecutive qualifying days")]
    InsufficientHistory,
    #[error("need at least {0} rows")]
    TooFewRows(usize),
    #[error("feature dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("bad header: {0}")]
    BadHeader(String),
}

/// Daily aggregates of the 13 weather variables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DailyWeather {
    pub date: NaiveDate,
    pub ta_mean: f64,
    pub ta_max: f64,
    pub ta_min: f64,
    pub rh_mean: f64,
    pub rh_max: f64,
    pub rh_min: f64,
    pub pv_mean: f64,
    pub tp_mean: f64,
    /// Circular mean, degrees in [0, 360).
    pub wd_mean: f64,
    pub ws_mean: f64,
    pub wg_max: f64,
    pub si_mean: f64,
    pub rain_sum: f64,
    pub completeness: f64,
    pub incomplete: bool,
}

impl DailyWeather {
    pub fn values(&self) -> [f64; N_BASE_VARS] {
        [
            self.ta_mean,
            self.ta_max,
            self.ta_min,
            self.rh_mean,
            self.rh_max,
            self.rh_min,
            self.pv_mean,
            self.tp_mean,
            self.wd_mean,
            self.ws_mean,
            self.wg_max,
            self.si_mean,
            self.rain_sum,
        ]
    }
}

fn circular_mean_deg(angles: impl Iterator<Item = f64>) -> f64 {
    let (mut s, mut c, mut n) = (0.0, 0.0, 0usize);
    for a in angles {
        let r = a.to_radians();
        s += r.sin();
        c += r.cos();
        n += 1;
    }
    if n == 0 || (s.abs() < 1e-12 && c.abs() < 1e-12) {
        return 0.0;
    }
    let mut deg = s.atan2(c).to_degrees();
    if deg < 0.0 {
        deg += 360.0;
    }
    if deg >= 360.0 {
        deg = 0.0;
    }
    deg
}

/// Aggregate sorted, grid-snapped samples into per-day records. Days with no
/// slots are omitted with a diagnostic; days under 75% completeness are
/// flagged incomplete.
pub fn aggregate_daily(samples: &[WeatherSample]) -> (Vec<DailyWeather>, Vec<Diagnostic>) {
    let mut by_day: BTreeMap<NaiveDate, Vec<&WeatherSample>> = BTreeMap::new();
    for s in samples {
        by_day.entry(day_of(s.time)).or_default().push(s);
    }
    let mut out = Vec::new();
    let diags = Vec::new();
    for (date, ss) in by_day {
        let n = ss.len() as f64;
        let mean = |f: fn(&WeatherSample) -> f64| ss.iter().map(|s| f(s)).sum::<f64>() / n;
        let maxv = |f: fn(&WeatherSample) -> f64| {
            ss.iter().map(|s| f(s)).fold(f64::NEG_INFINITY, f64::max)
        };
        let minv =
            |f: fn(&WeatherSample) -> f64| ss.iter().map(|s| f(s)).fold(f64::INFINITY, f64::min);
        let completeness = n / SLOTS_PER_DAY as f64;
        out.push(DailyWeather {
            date,
            ta_mean: mean(|s| s.ta_c),
            ta_max: maxv(|s| s.ta_c),
            ta_min: minv(|s| s.ta_c),
            rh_mean: mean(|s| s.rh_pct),
            rh_max: maxv(|s| s.rh_pct),
            rh_min: minv(|s| s.rh_pct),
            pv_mean: mean(|s| s.pv_kpa),
            tp_mean: mean(|s| s.tp_c),
            wd_mean: circular_mean_deg(ss.iter().map(|s| s.wd_deg)),
            ws_mean: mean(|s| s.ws_ms),
            wg_max: maxv(|s| s.wg_ms),
            si_mean: mean(|s| s.si_wm2),
            rain_sum: ss.iter().map(|s| s.rain_mm).sum(),
            completeness,
            incomplete: completeness < MIN_DAY_COMPLETENESS,
        });
    }
    (out, diags)
}

/// The lagged feature matrix. Rows are dates with a full 7-day qualifying
/// history; column (lag k, variable v, slot s) holds v at slot s of day d-k.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LagMatrix {
    pub dates: Vec<NaiveDate>,
    pub n_cols: usize,
    /// Row-major, dates.len() x n_cols.
    pub data: Vec<f64>,
    pub col_names: Vec<String>,
    /// Per-column statistics once normalized.
    pub means: Option<Vec<f64>>,
    pub sds: Option<Vec<f64>>,
    pub constant_cols: Vec<usize>,
}

impl LagMatrix {
    pub fn n_rows(&self) -> usize {
        self.dates.len()
    }
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n_cols..(i + 1) * self.n_cols]
    }
}

pub fn lag_col_names() -> Vec<String> {
    let mut names = Vec::with_capacity(N_LAG_COLS);
    for k in 0..N_LAG_DAYS {
        for v in BASE_VARS {
            for s in 0..SLOTS_PER_DAY {
                names.push(format!("{v}_s{s:02}_lag{k}"));
            }
        }
    }
    names
}

/// Per-day slot grid for one day's samples: 13 x 96, with missing slots
/// linearly interpolated (edges held constant) and daily forms broadcast.
fn day_grid(ss: &[&WeatherSample]) -> Option<[Vec<f64>; N_BASE_VARS]> {
    let present = ss.len() as f64 / SLOTS_PER_DAY as f64;
    if present < MIN_DAY_COMPLETENESS {
        return None;
    }
    let mut slot_vals: Vec<Option<[f64; 9]>> = vec![None; SLOTS_PER_DAY];
    for s in ss {
        let slot = (s.time.rem_euclid(86400) / SLOT_SECONDS) as usize;
        slot_vals[slot] = Some([
            s.ta_c, s.rh_pct, s.pv_kpa, s.tp_c, s.wd_deg, s.ws_ms, s.wg_ms, s.si_wm2, s.rain_mm,
        ]);
    }
    // linear interpolation of holes per measured variable
    let mut grid9 = vec![[0.0f64; 9]; SLOTS_PER_DAY];
    for v in 0..9 {
        let mut last: Option<(usize, f64)> = None;
        let mut i = 0;
        while i < SLOTS_PER_DAY {
            if let Some(vals) = &slot_vals[i] {
                if let Some((j, prev)) = last {
                    let gap = i - j;
                    for (step, g) in grid9.iter_mut().enumerate().take(i).skip(j + 1) {
                        let t = (step - j) as f64 / gap as f64;
                        g[v] = prev * (1.0 - t) + vals[v] * t;
                    }
                } else {
                    for g in grid9.iter_mut().take(i) {
                        g[v] = vals[v];
                    }
                }
                grid9[i][v] = vals[v];
                last = Some((i, vals[v]));
                i += 1;
            } else {
                i += 1;
            }
        }
        if let Some((j, prev)) = last {
            for g in grid9.iter_mut().skip(j + 1) {
                g[v] = prev;
            }
        }
    }
    let ta: Vec<f64> = grid9.iter().map(|g| g[0]).collect();
    let rh: Vec<f64> = grid9.iter().map(|g| g[1]).collect();
    let ta_max = ta.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let ta_min = ta.iter().cloned().fold(f64::INFINITY, f64::min);
    let rh_max = rh.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let rh_min = rh.iter().cloned().fold(f64::INFINITY, f64::min);
    let broadcast = |v: f64| vec![v; SLOTS_PER_DAY];
    Some([
        ta,
        broadcast(ta_max),
        broadcast(ta_min),
        rh,
        broadcast(rh_max),
        broadcast(rh_min),
        grid9.iter().map(|g| g[2]).collect(),
        grid9.iter().map(|g| g[3]).collect(),
        grid9.iter().map(|g| g[4]).collect(),
        grid9.iter().map(|g| g[5]).collect(),
        grid9.iter().map(|g| g[6]).collect(),
        grid9.iter().map(|g| g[7]).collect(),
        grid9.iter().map(|g| g[8]).collect(),
    ])
}

/// Build the lag matrix from sorted, grid-snapped samples. Rows lacking a
/// full 7-day qualifying history are excluded.
pub fn build_lag_matrix(samples: &[WeatherSample]) -> Result<LagMatrix, WeatherError> {
    let mut by_day: BTreeMap<NaiveDate, Vec<&WeatherSample>> = BTreeMap::new();
    for s in samples {
        by_day.entry(day_of(s.time)).or_default().push(s);
    }
    let grids: BTreeMap<NaiveDate, [Vec<f64>; N_BASE_VARS]> = by_day
        .iter()
        .filter_map(|(&d, ss)| day_grid(ss).map(|g| (d, g)))
        .collect();

    let mut dates = Vec::new();
    let mut data = Vec::new();
    for &d in grids.keys() {
        let history: Option<Vec<&[Vec<f64>; N_BASE_VARS]>> = (0..N_LAG_DAYS as i64)
            .map(|k| grids.get(&(d - chrono::Duration::days(k))))
            .collect();
        let Some(history) = history else { continue };
        dates.push(d);
        for g in history {
            for var in g.iter() {
                data.extend_from_slice(var);
            }
        }
    }
    if dates.is_empty() {
        return Err(WeatherError::InsufficientHistory);
    }
    Ok(LagMatrix {
        dates,
        n_cols: N_LAG_COLS,
        data,
        col_names: lag_col_names(),
        means: None,
        sds: None,
        constant_cols: Vec::new(),
    })
}

/// Z-score each column in place; constant columns map to zero and are
/// flagged. Stats are stored on the matrix for exact round-tripping.
pub fn normalize(matrix: &mut LagMatrix) -> Result<(), WeatherError> {
    let n = matrix.n_rows();
    if n < 2 {
        return Err(WeatherError::TooFewRows(2));
    }
    let cols = matrix.n_cols;
    let mut means = vec![0.0; cols];
    let mut sds = vec![0.0; cols];
    let mut constant = Vec::new();
    for j in 0..cols {
        let mut sum = 0.0;
        for i in 0..n {
            sum += matrix.data[i * cols + j];
        }
        let mean = sum / n as f64;
        let mut ss = 0.0;
        for i in 0..n {
            let d = matrix.data[i * cols + j] - mean;
            ss += d * d;
        }
        let sd = (ss / (n - 1) as f64).sqrt();
        means[j] = mean;
        sds[j] = sd;
        if sd == 0.0 {
            constant.push(j);
            for i in 0..n {
                matrix.data[i * cols + j] = 0.0;
            }
        } else {
            for i in 0..n {
                matrix.data[i * cols + j] = (matrix.data[i * cols + j] - mean) / sd;
            }
        }
    }
    matrix.means = Some(means);
    matrix.sds = Some(sds);
    matrix.constant_cols = constant;
    Ok(())
}

/// Apply previously stored statistics to a raw matrix (e.g. future rows).
pub fn apply_normalization(
    matrix: &mut LagMatrix,
    means: &[f64],
    sds: &[f64],
) -> Result<(), WeatherError> {
    if means.len() != matrix.n_cols || sds.len() != matrix.n_cols {
        return Err(WeatherError::DimensionMismatch {
            expected: matrix.n_cols,
            got: means.len(),
        });
    }
    let cols = matrix.n_cols;
    for i in 0..matrix.n_rows() {
        for j in 0..cols {
            let v = &mut matrix.data[i * cols + j];
            *v = if sds[j] == 0.0 { 0.0 } else { (*v - means[j]) / sds[j] };
        }
    }
    matrix.means = Some(means.to_vec());
    matrix.sds = Some(sds.to_vec());
    Ok(())
}

#[derive(Serialize, Deserialize)]
struct StoreHeader {
    n_rows: usize,
    n_cols: usize,
    dates: Vec<NaiveDate>,
    col_names: Vec<String>,
    means: Option<Vec<f64>>,
    sds: Option<Vec<f64>>,
    constant_cols: Vec<usize>,
}

/// Persist as a JSON header plus a little-endian f64 column store.
pub fn write_store(matrix: &LagMatrix, json_path: &Path, bin_path: &Path) -> Result<(), WeatherError> {
    let header = StoreHeader {
        n_rows: matrix.n_rows(),
        n_cols: matrix.n_cols,
        dates: matrix.dates.clone(),
        col_names: matrix.col_names.clone(),
        means: matrix.means.clone(),
        sds: matrix.sds.clone(),
        constant_cols: matrix.constant_cols.clone(),
    };
    let f = std::fs::File::create(json_path)?;
    serde_json::to_writer(f, &header).map_err(|e| WeatherError::BadHeader(e.to_string()))?;
    let mut w = std::io::BufWriter::new(std::fs::File::create(bin_path)?);
    let (n, cols) = (matrix.n_rows(), matrix.n_cols);
    for j in 0..cols {
        for i in 0..n {
            w.write_all(&matrix.data[i * cols + j].to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_store(json_path: &Path, bin_path: &Path) -> Result<LagMatrix, WeatherError> {
    let f = std::fs::File::open(json_path)?;
    let header: StoreHeader =
        serde_json::from_reader(f).map_err(|e| WeatherError::BadHeader(e.to_string()))?;
    let mut bytes = Vec::new();
    std::fs::File::open(bin_path)?.read_to_end(&mut bytes)?;
    let expected = header.n_rows * header.n_cols * 8;
    if bytes.len() != expected {
        return Err(WeatherError::BadHeader(format!(
            "binary payload is {} bytes, expected {expected}",
            bytes.len()
        )));
    }
    let mut data = vec![0.0f64; header.n_rows * header.n_cols];
    let (n, cols) = (header.n_rows, header.n_cols);
    for j in 0..cols {
        for i in 0..n {
            let off = (j * n + i) * 8;
            data[i * cols + j] = f64::from_le_bytes(bytes[off..off + 8].try_into().unwrap());
        }
    }
    Ok(LagMatrix {
        dates: header.dates,
        n_cols: header.n_cols,
        data,
        col_names: header.col_names,
        means: header.means,
        sds: header.sds,
        constant_cols: header.constant_cols,
    })
}
