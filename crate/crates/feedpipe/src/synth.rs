//! Deterministic synthetic herd generator used for demos and end-to-end
//! verification: a seasonal AR(1) weather process at 15-minute resolution,
//! animals with persistent intake baselines, meals built from short event
//! bursts, heat-driven intake suppression with a multi-day lag, and a small
//! rate of deliberately corrupted events.

use crate::ingest::{FeedingEvent, WeatherSample, SLOT_SECONDS, SLOTS_PER_DAY};
use crate::models::features::AnimalInfo;
use chrono::{Datelike, Duration, NaiveDate};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SynthConfig {
    pub seed: u64,
    pub n_animals: usize,
    pub n_pens: usize,
    pub start_date: NaiveDate,
    pub n_days: usize,
    /// Fraction of events replaced with absurd intake/duration values.
    pub outlier_rate: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            seed: 42,
            n_animals: 24,
            n_pens: 3,
            start_date: NaiveDate::from_ymd_opt(2020, 1, 1).unwrap(),
            n_days: 365,
            outlier_rate: 0.005,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrueDaily {
    pub animal_id: String,
    pub date: NaiveDate,
    pub intake_kg: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SynthOutput {
    pub events: Vec<FeedingEvent>,
    pub weather: Vec<WeatherSample>,
    pub animals: Vec<AnimalInfo>,
    /// Ground-truth daily intakes before outlier injection.
    pub truth: Vec<TrueDaily>,
    /// Indices into `events` that were corrupted.
    pub injected_outliers: Vec<usize>,
    /// Daily mean air temperature, one entry per simulated day.
    pub ta_daily: Vec<f64>,
}

fn seasonal_ta(day_of_year: f64) -> f64 {
    7.1 + 16.0 * (2.0 * std::f64::consts::PI * (day_of_year - 200.0) / 365.25).cos()
}

const TA_MIN: f64 = -30.3;
const TA_MAX: f64 = 42.5;

/// Heat-suppression signal for one day: positive temperature excursions above
/// the trailing 5-day mean (plus a margin) on the previous three days,
/// weighted toward yesterday.
fn suppression(ta_days: &[f64], day: usize) -> f64 {
    let spike = |d: usize| -> f64 {
        if d < 5 {
            return 0.0;
        }
        let trail: f64 = ta_days[d - 5..d].iter().sum::<f64>() / 5.0;
        (ta_days[d] - trail - 5.0).max(0.0)
    };
    let weights = [0.5, 0.3, 0.2];
    let mut s = 0.0;
    for (k, w) in weights.iter().enumerate() {
        if day > k {
            s += w * spike(day - k - 1);
        }
    }
    0.9 * s
}

pub fn synth_generate(cfg: &SynthConfig) -> SynthOutput {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    // --- daily mean temperature: seasonal cycle + AR(1) anomaly ---
    let phi = 0.7;
    let innov = Normal::new(0.0, 5.0).unwrap();
    let mut anomaly = 0.0;
    let mut ta_daily = Vec::with_capacity(cfg.n_days);
    for d in 0..cfg.n_days {
        let date = cfg.start_date + Duration::days(d as i64);
        anomaly = phi * anomaly + innov.sample(&mut rng);
        let ta = (seasonal_ta(date.ordinal() as f64) + anomaly).clamp(TA_MIN, TA_MAX);
        ta_daily.push(ta);
    }

    // --- 15-minute weather around the daily mean ---
    let mut weather = Vec::with_capacity(cfg.n_days * SLOTS_PER_DAY);
    let mut wd = rng.gen_range(0.0..360.0);
    let noise = Normal::new(0.0, 0.4).unwrap();
    for (d, &ta_day) in ta_daily.iter().enumerate() {
        let date = cfg.start_date + Duration::days(d as i64);
        let midnight = date.and_hms_opt(0, 0, 0).unwrap().and_utc().timestamp();
        let rain_day = rng.gen_bool(0.25);
        let si_peak = (400.0
            + 350.0 * (2.0 * std::f64::consts::PI * (date.ordinal() as f64 - 172.0) / 365.25).cos())
        .max(100.0);
        for s in 0..SLOTS_PER_DAY {
            let hour = s as f64 * 0.25;
            // diurnal cycle: coolest ~05:00, warmest ~15:00
            let diurnal = 4.0 * (2.0 * std::f64::consts::PI * (hour - 15.0) / 24.0).cos();
            let ta = ta_day + diurnal + noise.sample(&mut rng);
            // humidity runs against temperature
            let rh = (85.0 - 1.5 * (ta - 7.0) + noise.sample(&mut rng) * 5.0).clamp(15.0, 100.0);
            // saturation vapor pressure (Magnus), scaled by rh
            let es = 0.6108 * (17.27 * ta / (ta + 237.3)).exp();
            let pv = es * rh / 100.0;
            let tp = ta - (100.0 - rh) / 5.0;
            wd = (wd + noise.sample(&mut rng) * 20.0).rem_euclid(360.0);
            let ws = (3.0 + 1.5 * noise.sample(&mut rng)).max(0.0);
            let wg = ws + (1.0 + noise.sample(&mut rng)).max(0.0) * 2.0;
            let si = if (6.0..20.0).contains(&hour) {
                (si_peak * (std::f64::consts::PI * (hour - 6.0) / 14.0).sin()).max(0.0)
                    * (1.0 + 0.05 * noise.sample(&mut rng))
            } else {
                0.0
            };
            let rain = if rain_day && rng.gen_bool(0.1) {
                rng.gen_range(0.1..2.0)
            } else {
                0.0
            };
            weather.push(WeatherSample {
                station_id: "synth0".to_string(),
                time: midnight + (s * SLOT_SECONDS as usize) as i64,
                ta_c: ta,
                rh_pct: rh,
                pv_kpa: pv,
                tp_c: tp,
                wd_deg: wd,
                ws_ms: ws,
                wg_ms: wg,
                si_wm2: si.max(0.0),
                rain_mm: rain,
            });
        }
    }

    // --- animals ---
    let baseline = Normal::new(11.89, 3.08).unwrap();
    let mut animals = Vec::with_capacity(cfg.n_animals);
    let mut baselines = HashMap::new();
    for a in 0..cfg.n_animals {
        let id = format!("A{a:03}");
        let pen = format!("P{:02}", a % cfg.n_pens);
        animals.push(AnimalInfo {
            animal_id: id.clone(),
            pen_id: pen,
            breed: (a % 2) as u32 + 1,
            sex: (a % 3 == 0) as u32,
        });
        baselines.insert(id, f64::clamp(baseline.sample(&mut rng), 4.0, 22.0));
    }

    // --- meals and events ---
    let day_noise = Normal::new(0.0, 0.5).unwrap();
    let meal_noise = Normal::new(0.0, 0.15).unwrap();
    let mut events = Vec::new();
    let mut truth = Vec::new();
    let mut injected = Vec::new();
    for d in 0..cfg.n_days {
        let date = cfg.start_date + Duration::days(d as i64);
        let midnight = date.and_hms_opt(0, 0, 0).unwrap().and_utc().timestamp();
        let supp = suppression(&ta_daily, d);
        // shared day-level wobble (weather other than heat, feed batch, ...)
        let common = day_noise.sample(&mut rng);
        for info in &animals {
            let base = baselines[&info.animal_id];
            let target = (base - supp + common + 0.3 * day_noise.sample(&mut rng)).max(3.0);
            let n_meals = rng.gen_range(6..=10usize);
            let mut total = 0.0;
            // meal start times spread over 04:00..22:00
            let mut starts: Vec<i64> = (0..n_meals)
                .map(|_| midnight + rng.gen_range(4 * 3600..22 * 3600) as i64)
                .collect();
            starts.sort_unstable();
            // pushed forward as needed so the 20-min gap rule separates meals
            let mut prev_end = i64::MIN / 2;
            for &meal_start in &starts {
                let meal_kg =
                    (target / n_meals as f64 * (1.0 + meal_noise.sample(&mut rng))).max(0.05);
                total += meal_kg;
                // eating rate ~100 g/min plus an additive visit overhead, so
                // meal duration tracks meal size the way the cleaner expects
                let meal_dur =
                    (meal_kg / 0.0017 + 600.0 * meal_noise.sample(&mut rng)).clamp(30.0, 6000.0);
                // a meal is 1..=5 visits separated by gaps well under 20 min
                let n_sub = rng.gen_range(1..=5usize);
                let mut t = meal_start.max(prev_end + 1300 + rng.gen_range(0..600));
                for _ in 0..n_sub {
                    let dur = (meal_dur / n_sub as f64).max(20.0);
                    events.push(FeedingEvent {
                        animal_id: info.animal_id.clone(),
                        pen_id: info.pen_id.clone(),
                        start: t,
                        intake_kg: meal_kg / n_sub as f64,
                        duration_s: dur,
                    });
                    t += dur as i64 + rng.gen_range(30..300);
                }
                prev_end = t;
            }
            truth.push(TrueDaily {
                animal_id: info.animal_id.clone(),
                date,
                intake_kg: total,
            });
        }
    }

    // --- outlier injection: absurd intake or marathon duration ---
    for i in 0..events.len() {
        if rng.gen_bool(cfg.outlier_rate) {
            // mostly intake spikes: marathon durations are high-leverage
            // points the spline can chase, so keep them the minority
            if rng.gen_bool(0.75) {
                events[i].intake_kg = rng.gen_range(12.0..35.0);
            } else {
                events[i].duration_s = rng.gen_range(3.0 * 3600.0..8.0 * 3600.0);
            }
            injected.push(i);
        }
    }

    SynthOutput {
        events,
        weather,
        animals,
        truth,
        injected_outliers: injected,
        ta_daily,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_cfg() -> SynthConfig {
        SynthConfig {
            seed: 7,
            n_animals: 6,
            n_pens: 2,
            n_days: 30,
            ..SynthConfig::default()
        }
    }

    #[test]
    fn deterministic_for_same_seed() {
        let a = synth_generate(&small_cfg());
        let b = synth_generate(&small_cfg());
        assert_eq!(a.events, b.events);
        assert_eq!(a.weather, b.weather);
        let mut c = small_cfg();
        c.seed = 8;
        let d = synth_generate(&c);
        assert_ne!(a.events, d.events);
    }

    #[test]
    fn weather_covers_every_slot() {
        let out = synth_generate(&small_cfg());
        assert_eq!(out.weather.len(), 30 * SLOTS_PER_DAY);
        for w in &out.weather {
            assert_eq!(w.time % SLOT_SECONDS as i64, 0);
            assert!((TA_MIN..=TA_MAX).contains(&w.ta_c));
            assert!((0.0..=100.0).contains(&w.rh_pct));
            assert!(w.si_wm2 >= 0.0 && w.ws_ms >= 0.0 && w.rain_mm >= 0.0);
            assert!((0.0..360.0).contains(&w.wd_deg));
        }
    }

    #[test]
    fn truth_matches_clean_event_totals() {
        let mut cfg = small_cfg();
        cfg.outlier_rate = 0.0;
        let out = synth_generate(&cfg);
        let mut sums: HashMap<(String, NaiveDate), f64> = HashMap::new();
        for e in &out.events {
            let date = chrono::DateTime::from_timestamp(e.start, 0).unwrap().date_naive();
            *sums.entry((e.animal_id.clone(), date)).or_insert(0.0) += e.intake_kg;
        }
        for t in &out.truth {
            let s = sums.get(&(t.animal_id.clone(), t.date)).copied().unwrap_or(0.0);
            // meals started late in the day can spill past midnight
            assert!((s - t.intake_kg).abs() < 1.5, "{} {}: {s} vs {}", t.animal_id, t.date, t.intake_kg);
        }
    }

    #[test]
    fn outlier_rate_roughly_honored() {
        let mut cfg = small_cfg();
        cfg.n_days = 120;
        cfg.outlier_rate = 0.01;
        let out = synth_generate(&cfg);
        let rate = out.injected_outliers.len() as f64 / out.events.len() as f64;
        assert!(rate > 0.004 && rate < 0.02, "rate {rate}");
    }

    #[test]
    fn hot_spells_suppress_intake() {
        let mut cfg = SynthConfig { n_days: 400, n_animals: 10, ..small_cfg() };
        cfg.outlier_rate = 0.0;
        let out = synth_generate(&cfg);
        // daily herd mean intake
        let mut by_day: HashMap<NaiveDate, (f64, usize)> = HashMap::new();
        for t in &out.truth {
            let e = by_day.entry(t.date).or_insert((0.0, 0));
            e.0 += t.intake_kg;
            e.1 += 1;
        }
        let mut dates: Vec<&NaiveDate> = by_day.keys().collect();
        dates.sort();
        let fi: Vec<f64> = dates.iter().map(|d| {
            let (s, n) = by_day[d];
            s / n as f64
        }).collect();
        let supp: Vec<f64> = (0..cfg.n_days).map(|d| suppression(&out.ta_daily, d)).collect();
        let corr = crate::indices::pearson(&fi, &supp);
        assert!(corr < -0.5, "corr {corr}");
    }
}
