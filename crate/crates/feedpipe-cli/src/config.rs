//! Single JSON config with per-stage sections. Unknown keys are schema
//! violations. Only the seed and paths may be overridden from outside the
//! file (env vars / flags), so a config hash pins a run.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Config {
    pub seed: u64,
    pub synth: SynthSection,
    pub ingest: IngestSection,
    pub indices: IndicesSection,
    pub train: TrainSection,
    pub explain: ExplainSection,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthSection {
    pub n_animals: usize,
    pub n_pens: usize,
    pub start_date: String,
    pub n_days: usize,
    pub outlier_rate: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IngestSection {
    /// Keep only this station; empty keeps all rows.
    pub station_id: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IndicesSection {
    pub target_variance: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainSection {
    pub n_folds: usize,
    /// "small" (4 candidates) or "full" (24 candidates).
    pub grid: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExplainSection {
    /// Cap on explained validation rows (0 = all).
    pub max_rows: usize,
    /// Grid size for the what-if index sweeps.
    pub sweep_points: usize,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            seed: 42,
            synth: SynthSection::default(),
            ingest: IngestSection::default(),
            indices: IndicesSection::default(),
            train: TrainSection::default(),
            explain: ExplainSection::default(),
        }
    }
}

impl Default for SynthSection {
    fn default() -> Self {
        SynthSection {
            n_animals: 24,
            n_pens: 3,
            start_date: "2020-01-01".to_string(),
            n_days: 365,
            outlier_rate: 0.005,
        }
    }
}

impl Default for IngestSection {
    fn default() -> Self {
        IngestSection {
            station_id: String::new(),
        }
    }
}

impl Default for IndicesSection {
    fn default() -> Self {
        IndicesSection {
            target_variance: 0.95,
        }
    }
}

impl Default for TrainSection {
    fn default() -> Self {
        TrainSection {
            n_folds: 3,
            grid: "small".to_string(),
        }
    }
}

impl Default for ExplainSection {
    fn default() -> Self {
        ExplainSection {
            max_rows: 0,
            sweep_points: 41,
        }
    }
}
