//! The ten pipeline stages. Each reads only persisted artifacts from the
//! output directory, writes its own artifacts, and reports both lists so the
//! manifest can digest them.

use crate::artifacts::*;
use crate::config::Config;
use anyhow::anyhow;
use chrono::NaiveDate;
use feedpipe::cleanse::two_pass_clean;
use feedpipe::indices::{classify_series, easi, easi_gbt_params, incomfort, pearson};
use feedpipe::ingest::{
    gap_report, parse_events, parse_weather, write_events_csv, write_weather_csv, EventSchema,
};
use feedpipe::kmeans::ClusterModel;
use feedpipe::models::features::{build_feature_table, build_pen_table, FeatureTable};
use feedpipe::models::gbt::{train_gbt, GbtModel, GbtParams};
use feedpipe::models::metrics::{metrics, Metrics};
use feedpipe::models::ridge::{train_ridge, RidgeModel};
use feedpipe::models::split::{season_of, split, SplitPlan};
use feedpipe::models::{cv_search, default_grid, CvResult};
use feedpipe::pca::{fit_pca, project};
use feedpipe::sessionize::{build_meals_all, daily_aggregate, DailyBehavior};
use feedpipe::shap::{importance, shap_batch, simulate_sweep};
use feedpipe::synth::{synth_generate, SynthConfig};
use feedpipe::weather::{aggregate_daily, build_lag_matrix, normalize, read_store, write_store};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};

#[derive(Debug)]
pub enum StageError {
    /// A required upstream artifact is absent (exit 2).
    MissingArtifact(PathBuf),
    /// The config file violates the schema (exit 3).
    Config(String),
    Other(anyhow::Error),
}

impl<E: Into<anyhow::Error>> From<E> for StageError {
    fn from(e: E) -> Self {
        StageError::Other(e.into())
    }
}

pub struct StageOutcome {
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
}

type StageResult = Result<StageOutcome, StageError>;

fn require(out: &Path, names: &[&str]) -> Result<(), StageError> {
    for n in names {
        let p = out.join(n);
        if !p.exists() {
            return Err(StageError::MissingArtifact(p));
        }
    }
    Ok(())
}

fn outcome(inputs: &[&str], outputs: &[&str]) -> StageOutcome {
    StageOutcome {
        inputs: inputs.iter().map(|s| s.to_string()).collect(),
        outputs: outputs.iter().map(|s| s.to_string()).collect(),
    }
}

pub fn run_stage(stage: &str, cfg: &Config, seed: u64, out: &Path) -> StageResult {
    match stage {
        "synth" => stage_synth(cfg, seed, out),
        "ingest" => stage_ingest(cfg, out),
        "sessionize" => stage_sessionize(out),
        "clean" => stage_clean(out),
        "features" => stage_features(out),
        "indices" => stage_indices(cfg, seed, out),
        "train" => stage_train(cfg, seed, out),
        "predict" => stage_predict(out),
        "explain" => stage_explain(cfg, out),
        "report" => stage_report(seed, out),
        other => Err(StageError::Config(format!("unknown stage {other:?}"))),
    }
}

pub const STAGE_ORDER: [&str; 10] = [
    "synth",
    "ingest",
    "sessionize",
    "clean",
    "features",
    "indices",
    "train",
    "predict",
    "explain",
    "report",
];

// ---------------------------------------------------------------- synth

fn stage_synth(cfg: &Config, seed: u64, out: &Path) -> StageResult {
    let start_date = NaiveDate::parse_from_str(&cfg.synth.start_date, "%Y-%m-%d")
        .map_err(|e| StageError::Config(format!("synth.start_date: {e}")))?;
    if cfg.synth.n_animals == 0 || cfg.synth.n_pens == 0 || cfg.synth.n_days == 0 {
        return Err(StageError::Config(
            "synth sizes must be positive".to_string(),
        ));
    }
    let sc = SynthConfig {
        seed,
        n_animals: cfg.synth.n_animals,
        n_pens: cfg.synth.n_pens,
        start_date,
        n_days: cfg.synth.n_days,
        outlier_rate: cfg.synth.outlier_rate,
    };
    let gen = synth_generate(&sc);
    write_events_csv(std::fs::File::create(out.join("raw_events.csv"))?, &gen.events)?;
    write_weather_csv(std::fs::File::create(out.join("raw_weather.csv"))?, &gen.weather)?;
    write_animals(&out.join("animals.csv"), &gen.animals)?;
    write_truth(&out.join("truth.csv"), &gen.truth)?;
    write_json(&out.join("injected_outliers.json"), &gen.injected_outliers)?;
    Ok(outcome(
        &[],
        &[
            "raw_events.csv",
            "raw_weather.csv",
            "animals.csv",
            "truth.csv",
            "injected_outliers.json",
        ],
    ))
}

// ---------------------------------------------------------------- ingest

fn stage_ingest(cfg: &Config, out: &Path) -> StageResult {
    require(out, &["raw_events.csv", "raw_weather.csv"])?;
    let (events, mut diags) = parse_events(&out.join("raw_events.csv"), &EventSchema::default())
        .map_err(|e| StageError::Other(e.into()))?;
    let (weather, wdiags) = parse_weather(&out.join("raw_weather.csv"), &cfg.ingest.station_id)
        .map_err(|e| StageError::Other(e.into()))?;
    diags.extend(wdiags);
    write_events_csv(std::fs::File::create(out.join("events.csv"))?, &events)?;
    write_weather_csv(std::fs::File::create(out.join("weather.csv"))?, &weather)?;
    feedpipe::diag::write_jsonl(std::fs::File::create(out.join("diagnostics.jsonl"))?, &diags)?;
    write_json(&out.join("gap_report.json"), &gap_report(&weather))?;
    Ok(outcome(
        &["raw_events.csv", "raw_weather.csv"],
        &["events.csv", "weather.csv", "diagnostics.jsonl", "gap_report.json"],
    ))
}

// ---------------------------------------------------------------- sessionize

fn stage_sessionize(out: &Path) -> StageResult {
    require(out, &["events.csv"])?;
    let (events, _) = parse_events(&out.join("events.csv"), &EventSchema::default())
        .map_err(|e| StageError::Other(e.into()))?;
    let meals = build_meals_all(&events);
    let behavior = daily_aggregate(&meals);
    write_meals(&out.join("meals.csv"), &meals)?;
    write_behavior(&out.join("daily_behavior.csv"), &behavior)?;
    Ok(outcome(
        &["events.csv"],
        &["meals.csv", "daily_behavior.csv"],
    ))
}

// ---------------------------------------------------------------- clean

#[derive(Serialize, Deserialize)]
struct OutlierSummary {
    reports: Vec<feedpipe::cleanse::OutlierReport>,
    skipped_animals: Vec<String>,
}

fn stage_clean(out: &Path) -> StageResult {
    require(out, &["meals.csv"])?;
    let meals = read_meals(&out.join("meals.csv"))?;
    let result = two_pass_clean(&meals);
    let rows: Vec<CleanedMealRow> = result.meals.iter().map(CleanedMealRow::from).collect();
    write_csv(&out.join("cleaned_meals.csv"), &rows)?;
    write_behavior(&out.join("cleaned_behavior.csv"), &result.behavior)?;
    write_json(
        &out.join("outlier_report.json"),
        &OutlierSummary {
            reports: result.reports,
            skipped_animals: result.skipped_animals,
        },
    )?;
    Ok(outcome(
        &["meals.csv"],
        &["cleaned_meals.csv", "cleaned_behavior.csv", "outlier_report.json"],
    ))
}

// ---------------------------------------------------------------- features

fn stage_features(out: &Path) -> StageResult {
    require(out, &["weather.csv"])?;
    let (samples, _) = parse_weather(&out.join("weather.csv"), "")
        .map_err(|e| StageError::Other(e.into()))?;
    let (daily, _) = aggregate_daily(&samples);
    write_daily_weather(&out.join("daily_weather.csv"), &daily)?;
    let mut lag = build_lag_matrix(&samples)?;
    normalize(&mut lag)?;
    write_store(&lag, &out.join("lag_matrix.json"), &out.join("lag_matrix.bin"))?;
    Ok(outcome(
        &["weather.csv"],
        &["daily_weather.csv", "lag_matrix.json", "lag_matrix.bin"],
    ))
}

// ---------------------------------------------------------------- indices

#[derive(Serialize, Deserialize)]
pub struct ClusterModels {
    pub incomfort: ClusterModel,
    pub easi: ClusterModel,
}

fn stage_indices(cfg: &Config, seed: u64, out: &Path) -> StageResult {
    require(
        out,
        &["lag_matrix.json", "lag_matrix.bin", "cleaned_behavior.csv", "daily_weather.csv"],
    )?;
    let lag = read_store(&out.join("lag_matrix.json"), &out.join("lag_matrix.bin"))?;
    let behavior = read_behavior(&out.join("cleaned_behavior.csv"))?;
    let daily = read_daily_weather(&out.join("daily_weather.csv"))?;

    let model = fit_pca(&lag.data, lag.n_rows(), lag.n_cols, cfg.indices.target_variance)?;
    let all_scores = project(&lag.data, lag.n_rows(), lag.n_cols, &model)?;

    // daily herd-mean intake and air temperature, intersected with lag dates
    let mut fi_by_date: BTreeMap<NaiveDate, (f64, usize)> = BTreeMap::new();
    for b in &behavior {
        let e = fi_by_date.entry(b.date).or_insert((0.0, 0));
        e.0 += b.feed_intake_kg;
        e.1 += 1;
    }
    let ta_by_date: BTreeMap<NaiveDate, f64> = daily.iter().map(|d| (d.date, d.ta_mean)).collect();
    let mut dates = Vec::new();
    let mut scores = Vec::new();
    let mut fi = Vec::new();
    let mut ta = Vec::new();
    for (i, &date) in lag.dates.iter().enumerate() {
        let (Some(&(s, n)), Some(&t)) = (fi_by_date.get(&date), ta_by_date.get(&date)) else {
            continue;
        };
        dates.push(date);
        scores.push(all_scores[i].clone());
        fi.push(s / n as f64);
        ta.push(t);
    }
    if dates.len() < 10 {
        return Err(anyhow!("only {} days with intake, weather, and full lag history", dates.len()).into());
    }

    let ic = incomfort(&scores, &model, &ta)?;
    // 50% season-stratified train mask for the EASI regressor
    let strata: Vec<(String, String)> = dates
        .iter()
        .map(|d| ("all".to_string(), season_of(*d).to_string()))
        .collect();
    let plan = split(&strata, seed, 3)?;
    let easi_res = easi(&scores, &fi, &ta, &plan.train, &easi_gbt_params(seed))?;
    let (series, ic_model, ea_model) = classify_series(&dates, &ic, &easi_res.values, seed)?;

    write_json(&out.join("pca_model.json"), &model)?;
    write_index_series(&out.join("index_series.csv"), &series)?;
    write_json(
        &out.join("cluster_model.json"),
        &ClusterModels { incomfort: ic_model, easi: ea_model },
    )?;
    write_json(&out.join("easi_model.json"), &easi_res.model)?;
    Ok(outcome(
        &["lag_matrix.json", "lag_matrix.bin", "cleaned_behavior.csv", "daily_weather.csv"],
        &["pca_model.json", "index_series.csv", "cluster_model.json", "easi_model.json"],
    ))
}

// ---------------------------------------------------------------- train

const FEATURE_INPUTS: [&str; 4] = [
    "cleaned_behavior.csv",
    "animals.csv",
    "daily_weather.csv",
    "index_series.csv",
];

fn load_feature_table(out: &Path) -> Result<FeatureTable, StageError> {
    require(out, &FEATURE_INPUTS)?;
    let behavior = read_behavior(&out.join("cleaned_behavior.csv"))?;
    let animals = read_animals(&out.join("animals.csv"))?;
    let daily = read_daily_weather(&out.join("daily_weather.csv"))?;
    let series = read_index_series(&out.join("index_series.csv"))?;
    let amap: HashMap<String, _> = animals
        .into_iter()
        .map(|a| (a.animal_id.clone(), a))
        .collect();
    Ok(build_feature_table(&behavior, &amap, &daily, &series))
}

fn strata_of(table: &FeatureTable, pen_level: bool) -> Vec<(String, String)> {
    table
        .rows
        .iter()
        .map(|r| {
            let key = if pen_level { r.pen_id.clone() } else { r.animal_id.clone() };
            (key, season_of(r.date).to_string())
        })
        .collect()
}

fn grid_for(cfg: &Config, seed: u64) -> Result<Vec<GbtParams>, StageError> {
    match cfg.train.grid.as_str() {
        "full" => Ok(default_grid(seed)),
        "small" => Ok(vec![
            GbtParams { max_depth: 3, l2_reg: 1.0, seed, ..GbtParams::default() },
            GbtParams { max_depth: 3, l2_reg: 10.0, seed, ..GbtParams::default() },
            GbtParams { max_depth: 5, l2_reg: 1.0, seed, ..GbtParams::default() },
            GbtParams { max_depth: 5, l2_reg: 10.0, seed, ..GbtParams::default() },
        ]),
        other => Err(StageError::Config(format!(
            "train.grid must be \"small\" or \"full\", got {other:?}"
        ))),
    }
}

#[derive(Serialize, Deserialize)]
struct CvTableRow {
    level: String,
    max_depth: usize,
    n_rounds: usize,
    learning_rate: f64,
    l2_reg: f64,
    fold: usize,
    rmse: f64,
    r2: Option<f64>,
}

fn cv_rows(level: &str, cv: &CvResult) -> Vec<CvTableRow> {
    cv.table
        .iter()
        .map(|r| CvTableRow {
            level: level.to_string(),
            max_depth: r.params.max_depth,
            n_rounds: r.params.n_rounds,
            learning_rate: r.params.learning_rate,
            l2_reg: r.params.l2_reg,
            fold: r.fold,
            rmse: r.rmse,
            r2: r.r2,
        })
        .collect()
}

#[derive(Serialize, Deserialize)]
struct SplitFile {
    animal: SplitPlan,
    pen: SplitPlan,
}

fn train_level(
    table: &FeatureTable,
    plan: &SplitPlan,
    grid: &[GbtParams],
) -> Result<(GbtModel, CvResult), StageError> {
    let rows: Vec<Vec<f64>> = table.rows.iter().map(|r| r.features.clone()).collect();
    let targets: Vec<f64> = table.rows.iter().map(|r| r.target).collect();
    let cv = cv_search(&rows, &targets, &table.feature_names, &plan.folds, grid)?;
    let tr_rows: Vec<Vec<f64>> = (0..rows.len()).filter(|&i| plan.train[i]).map(|i| rows[i].clone()).collect();
    let tr_y: Vec<f64> = (0..rows.len()).filter(|&i| plan.train[i]).map(|i| targets[i]).collect();
    let (model, _) = train_gbt(&tr_rows, &tr_y, &table.feature_names, &cv.best_params)?;
    Ok((model, cv))
}

fn stage_train(cfg: &Config, seed: u64, out: &Path) -> StageResult {
    let table = load_feature_table(out)?;
    if table.rows.is_empty() {
        return Err(anyhow!("no complete feature rows to train on").into());
    }
    let grid = grid_for(cfg, seed)?;
    let plan = split(&strata_of(&table, false), seed, cfg.train.n_folds)?;
    let (animal_model, animal_cv) = train_level(&table, &plan, &grid)?;

    // ridge baseline on the same training rows
    let tr_rows: Vec<Vec<f64>> = table.rows.iter().enumerate()
        .filter(|(i, _)| plan.train[*i])
        .map(|(_, r)| r.features.clone())
        .collect();
    let tr_y: Vec<f64> = table.rows.iter().enumerate()
        .filter(|(i, _)| plan.train[*i])
        .map(|(_, r)| r.target)
        .collect();
    let ridge = train_ridge(&tr_rows, &tr_y)?;

    // pen level: roll animal predictions up, same split/CV discipline
    let all_rows: Vec<Vec<f64>> = table.rows.iter().map(|r| r.features.clone()).collect();
    let preds = animal_model.predict_batch(&all_rows);
    let pen_table = build_pen_table(&table, &preds);
    let pen_plan = split(&strata_of(&pen_table, true), seed.wrapping_add(1), cfg.train.n_folds)?;
    let (pen_model, pen_cv) = train_level(&pen_table, &pen_plan, &grid)?;

    write_json(&out.join("model.json"), &animal_model)?;
    write_json(&out.join("ridge_model.json"), &ridge)?;
    write_json(&out.join("pen_model.json"), &pen_model)?;
    write_json(&out.join("split.json"), &SplitFile { animal: plan, pen: pen_plan })?;
    let mut rows = cv_rows("animal", &animal_cv);
    rows.extend(cv_rows("pen", &pen_cv));
    write_csv(&out.join("cv_table.csv"), &rows)?;
    let mut inputs: Vec<&str> = FEATURE_INPUTS.to_vec();
    inputs.sort_unstable();
    Ok(outcome(
        &inputs,
        &["model.json", "ridge_model.json", "pen_model.json", "split.json", "cv_table.csv"],
    ))
}

// ---------------------------------------------------------------- predict

#[derive(Serialize, Deserialize)]
pub struct LevelMetrics {
    pub train: Metrics,
    pub validation: Metrics,
}

#[derive(Serialize, Deserialize)]
pub struct MetricsFile {
    pub animal_gbt: LevelMetrics,
    pub animal_ridge: LevelMetrics,
    pub pen: LevelMetrics,
}

fn level_metrics(y: &[f64], p: &[f64], train_mask: &[bool]) -> LevelMetrics {
    let pick = |want: bool| -> (Vec<f64>, Vec<f64>) {
        (0..y.len())
            .filter(|&i| train_mask[i] == want)
            .map(|i| (y[i], p[i]))
            .unzip()
    };
    let (ty, tp) = pick(true);
    let (vy, vp) = pick(false);
    LevelMetrics {
        train: metrics(&ty, &tp),
        validation: metrics(&vy, &vp),
    }
}

fn stage_predict(out: &Path) -> StageResult {
    require(out, &["model.json", "ridge_model.json", "pen_model.json", "split.json"])?;
    let table = load_feature_table(out)?;
    let animal_model: GbtModel = read_json(&out.join("model.json"))?;
    let ridge: RidgeModel = read_json(&out.join("ridge_model.json"))?;
    let pen_model: GbtModel = read_json(&out.join("pen_model.json"))?;
    let splits: SplitFile = read_json(&out.join("split.json"))?;
    if splits.animal.train.len() != table.rows.len() {
        return Err(anyhow!(
            "split.json covers {} rows but the feature table has {}",
            splits.animal.train.len(),
            table.rows.len()
        )
        .into());
    }

    let rows: Vec<Vec<f64>> = table.rows.iter().map(|r| r.features.clone()).collect();
    let y: Vec<f64> = table.rows.iter().map(|r| r.target).collect();
    let gbt_pred = animal_model.predict_batch(&rows);
    let ridge_pred: Vec<f64> = rows.iter().map(|r| ridge.predict(r)).collect();
    let pred_rows: Vec<PredictionRow> = table
        .rows
        .iter()
        .enumerate()
        .map(|(i, r)| PredictionRow {
            animal_id: r.animal_id.clone(),
            pen_id: r.pen_id.clone(),
            date: r.date,
            y_true: r.target,
            y_pred_gbt: gbt_pred[i],
            y_pred_ridge: ridge_pred[i],
            split: if splits.animal.train[i] { "train" } else { "validation" }.to_string(),
        })
        .collect();
    write_csv(&out.join("predictions.csv"), &pred_rows)?;

    let pen_table = build_pen_table(&table, &gbt_pred);
    let pen_rows: Vec<Vec<f64>> = pen_table.rows.iter().map(|r| r.features.clone()).collect();
    let pen_y: Vec<f64> = pen_table.rows.iter().map(|r| r.target).collect();
    let pen_pred = pen_model.predict_batch(&pen_rows);
    let pen_out: Vec<PenPredictionRow> = pen_table
        .rows
        .iter()
        .enumerate()
        .map(|(i, r)| PenPredictionRow {
            pen_id: r.pen_id.clone(),
            date: r.date,
            y_true: r.target,
            y_pred: pen_pred[i],
            split: if splits.pen.train[i] { "train" } else { "validation" }.to_string(),
        })
        .collect();
    write_csv(&out.join("pen_predictions.csv"), &pen_out)?;

    let metrics_file = MetricsFile {
        animal_gbt: level_metrics(&y, &gbt_pred, &splits.animal.train),
        animal_ridge: level_metrics(&y, &ridge_pred, &splits.animal.train),
        pen: level_metrics(&pen_y, &pen_pred, &splits.pen.train),
    };
    write_json(&out.join("metrics.json"), &metrics_file)?;

    let mut inputs: Vec<&str> = FEATURE_INPUTS.to_vec();
    inputs.extend(["model.json", "ridge_model.json", "pen_model.json", "split.json"]);
    Ok(outcome(
        &inputs,
        &["predictions.csv", "pen_predictions.csv", "metrics.json"],
    ))
}

// ---------------------------------------------------------------- explain

fn stage_explain(cfg: &Config, out: &Path) -> StageResult {
    require(out, &["model.json", "split.json"])?;
    let table = load_feature_table(out)?;
    let model: GbtModel = read_json(&out.join("model.json"))?;
    let splits: SplitFile = read_json(&out.join("split.json"))?;

    let mut val_idx: Vec<usize> = (0..table.rows.len())
        .filter(|&i| !splits.animal.train[i])
        .collect();
    if cfg.explain.max_rows > 0 {
        val_idx.truncate(cfg.explain.max_rows);
    }
    let val_rows: Vec<Vec<f64>> = val_idx.iter().map(|&i| table.rows[i].features.clone()).collect();
    let shap_rows = shap_batch(&model, &val_rows);

    // wide CSV: ids, base, prediction, then one column per feature
    let mut w = csv::Writer::from_path(out.join("shap_values.csv"))?;
    let mut header = vec!["animal_id".to_string(), "date".to_string(), "base".to_string(), "prediction".to_string()];
    header.extend(table.feature_names.iter().map(|n| format!("phi_{n}")));
    w.write_record(&header)?;
    for (k, &i) in val_idx.iter().enumerate() {
        let r = &table.rows[i];
        let s = &shap_rows[k];
        let mut rec = vec![
            r.animal_id.clone(),
            r.date.to_string(),
            format!("{}", s.base),
            format!("{}", s.total()),
        ];
        rec.extend(s.values.iter().map(|v| format!("{v}")));
        w.write_record(&rec)?;
    }
    w.flush()?;

    write_csv(&out.join("importance.csv"), &importance(&model, &shap_rows))?;

    for feature in ["incomfort", "easi"] {
        let n = cfg.explain.sweep_points.max(2);
        let grid: Vec<f64> = (0..n)
            .map(|i| -1.0 + 2.0 * i as f64 / (n - 1) as f64)
            .collect();
        let pts = simulate_sweep(&model, feature, &grid)
            .ok_or_else(|| anyhow!("feature {feature} missing from model"))?;
        write_csv(&out.join(format!("sweep_{feature}.csv")), &pts)?;
    }

    let mut inputs: Vec<&str> = FEATURE_INPUTS.to_vec();
    inputs.extend(["model.json", "split.json"]);
    Ok(outcome(
        &inputs,
        &["shap_values.csv", "importance.csv", "sweep_incomfort.csv", "sweep_easi.csv"],
    ))
}

// ---------------------------------------------------------------- report

#[derive(Serialize, Deserialize)]
pub struct Report {
    pub seed: u64,
    pub models: MetricsFile,
    pub indices: IndexReport,
    pub outliers: OutlierCounts,
    pub rows: RowCounts,
}

#[derive(Serialize, Deserialize)]
pub struct IndexReport {
    pub incomfort_ta_corr: f64,
    pub easi_fi_corr: f64,
    pub incomfort_fi_corr: f64,
    pub incomfort_silhouette: f64,
    pub easi_silhouette: f64,
}

#[derive(Serialize, Deserialize)]
pub struct OutlierCounts {
    pub n_checked: usize,
    pub n_replaced: usize,
    pub skipped_animals: usize,
}

#[derive(Serialize, Deserialize)]
pub struct RowCounts {
    pub animal_days: usize,
    pub pen_days: usize,
    pub index_days: usize,
}

#[derive(Serialize)]
struct IndexPlotRow {
    date: NaiveDate,
    incomfort: f64,
    easi: f64,
    ta_mean: f64,
    mean_fi: f64,
}

fn stage_report(seed: u64, out: &Path) -> StageResult {
    require(
        out,
        &[
            "metrics.json",
            "predictions.csv",
            "pen_predictions.csv",
            "index_series.csv",
            "daily_weather.csv",
            "cleaned_behavior.csv",
            "outlier_report.json",
            "cluster_model.json",
        ],
    )?;
    let models: MetricsFile = read_json(&out.join("metrics.json"))?;
    let preds: Vec<PredictionRow> = read_csv(&out.join("predictions.csv"))?;
    let pen_preds: Vec<PenPredictionRow> = read_csv(&out.join("pen_predictions.csv"))?;
    let series = read_index_series(&out.join("index_series.csv"))?;
    let daily = read_daily_weather(&out.join("daily_weather.csv"))?;
    let behavior: Vec<DailyBehavior> = read_behavior(&out.join("cleaned_behavior.csv"))?;
    let outliers: OutlierSummary = read_json(&out.join("outlier_report.json"))?;
    let clusters: ClusterModels = read_json(&out.join("cluster_model.json"))?;

    let mut fi_by_date: BTreeMap<NaiveDate, (f64, usize)> = BTreeMap::new();
    for b in &behavior {
        let e = fi_by_date.entry(b.date).or_insert((0.0, 0));
        e.0 += b.feed_intake_kg;
        e.1 += 1;
    }
    let ta_by_date: BTreeMap<NaiveDate, f64> = daily.iter().map(|d| (d.date, d.ta_mean)).collect();

    let mut plot = Vec::new();
    let (mut ic, mut ea, mut ta, mut fi) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for s in &series {
        let (Some(&(sum, n)), Some(&t)) = (fi_by_date.get(&s.date), ta_by_date.get(&s.date)) else {
            continue;
        };
        let mean_fi = sum / n as f64;
        ic.push(s.incomfort);
        ea.push(s.easi);
        ta.push(t);
        fi.push(mean_fi);
        plot.push(IndexPlotRow {
            date: s.date,
            incomfort: s.incomfort,
            easi: s.easi,
            ta_mean: t,
            mean_fi,
        });
    }

    let report = Report {
        seed,
        models,
        indices: IndexReport {
            incomfort_ta_corr: pearson(&ic, &ta),
            easi_fi_corr: pearson(&ea, &fi),
            incomfort_fi_corr: pearson(&ic, &fi),
            incomfort_silhouette: clusters.incomfort.silhouette,
            easi_silhouette: clusters.easi.silhouette,
        },
        outliers: OutlierCounts {
            n_checked: outliers.reports.iter().map(|r| r.n_checked).sum(),
            n_replaced: outliers.reports.iter().map(|r| r.n_replaced).sum(),
            skipped_animals: outliers.skipped_animals.len(),
        },
        rows: RowCounts {
            animal_days: preds.len(),
            pen_days: pen_preds.len(),
            index_days: series.len(),
        },
    };
    write_json(&out.join("report.json"), &report)?;
    write_csv(&out.join("report_indices.csv"), &plot)?;

    // plot-ready validation scatters
    #[derive(Serialize)]
    struct Scatter {
        y_true: f64,
        y_pred: f64,
    }
    let animal_scatter: Vec<Scatter> = preds
        .iter()
        .filter(|p| p.split == "validation")
        .map(|p| Scatter { y_true: p.y_true, y_pred: p.y_pred_gbt })
        .collect();
    let pen_scatter: Vec<Scatter> = pen_preds
        .iter()
        .filter(|p| p.split == "validation")
        .map(|p| Scatter { y_true: p.y_true, y_pred: p.y_pred })
        .collect();
    write_csv(&out.join("report_scatter_animal.csv"), &animal_scatter)?;
    write_csv(&out.join("report_scatter_pen.csv"), &pen_scatter)?;

    Ok(outcome(
        &[
            "metrics.json",
            "predictions.csv",
            "pen_predictions.csv",
            "index_series.csv",
            "daily_weather.csv",
            "cleaned_behavior.csv",
            "outlier_report.json",
            "cluster_model.json",
        ],
        &["report.json", "report_indices.csv", "report_scatter_animal.csv", "report_scatter_pen.csv"],
    ))
}
