//! `feedpipe` — batch pipeline driver. Stages run from and into a single
//! output directory; every stage appends digests to manifest.json so a rerun
//! with the same seed can be verified byte-for-byte.
//!
//! Exit codes: 0 success, 1 internal error, 2 missing upstream artifact,
//! 3 config schema violation.

mod artifacts;
mod config;
mod manifest;
mod stages;

use clap::{Parser, Subcommand};
use config::Config;
use manifest::{sha256_bytes, ManifestEntry};
use stages::{StageError, STAGE_ORDER};
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

#[derive(Parser)]
#[command(name = "feedpipe", version, about = "Feed-intake pipeline driver")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one pipeline stage (or `all` for the whole pipeline in order).
    Run {
        /// synth | ingest | sessionize | clean | features | indices | train
        /// | predict | explain | report | all
        stage: String,
        /// JSON config file; defaults apply when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Overrides the config seed (highest precedence).
        #[arg(long)]
        seed: Option<u64>,
        /// Rayon thread count (0 = library default). Never changes results.
        #[arg(long, default_value_t = 0)]
        threads: usize,
        /// Artifact directory.
        #[arg(long, default_value = "out")]
        out: Option<PathBuf>,
    },
}

fn load_config(path: &Option<PathBuf>) -> Result<(Config, String), String> {
    match path {
        Some(p) => {
            let bytes = std::fs::read(p)
                .map_err(|e| format!("config {}: {e}", p.display()))?;
            let cfg: Config = serde_json::from_slice(&bytes)
                .map_err(|e| format!("config {}: {e}", p.display()))?;
            Ok((cfg, sha256_bytes(&bytes)))
        }
        None => {
            let cfg = Config::default();
            let bytes = serde_json::to_vec(&cfg).expect("default config serializes");
            Ok((cfg, sha256_bytes(&bytes)))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let Command::Run { stage, config, seed, threads, out } = cli.command;

    if threads > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
        {
            eprintln!("feedpipe: cannot configure {threads} threads: {e}");
            return ExitCode::from(1);
        }
    }

    let (cfg, config_hash) = match load_config(&config) {
        Ok(v) => v,
        Err(e) => {
            eprintln!("feedpipe: {e}");
            return ExitCode::from(3);
        }
    };

    // env overrides are limited to paths and seed by design
    let out_dir = out
        .or_else(|| std::env::var_os("FEEDPIPE_OUT").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"));
    let seed = seed
        .or_else(|| {
            std::env::var("FEEDPIPE_SEED")
                .ok()
                .and_then(|s| s.parse().ok())
        })
        .unwrap_or(cfg.seed);

    if let Err(e) = std::fs::create_dir_all(&out_dir) {
        eprintln!("feedpipe: cannot create {}: {e}", out_dir.display());
        return ExitCode::from(1);
    }

    let stage_list: Vec<&str> = if stage == "all" {
        STAGE_ORDER.to_vec()
    } else if STAGE_ORDER.contains(&stage.as_str()) {
        vec![stage.as_str()]
    } else {
        eprintln!(
            "feedpipe: unknown stage {stage:?}; expected one of {} or all",
            STAGE_ORDER.join(", ")
        );
        return ExitCode::from(3);
    };

    for s in stage_list {
        let started = Instant::now();
        match stages::run_stage(s, &cfg, seed, &out_dir) {
            Ok(oc) => {
                let entry = ManifestEntry {
                    stage: s.to_string(),
                    seed,
                    config_sha256: config_hash.clone(),
                    inputs: match manifest::digest_files(
                        &out_dir,
                        &oc.inputs.iter().map(String::as_str).collect::<Vec<_>>(),
                    ) {
                        Ok(m) => m,
                        Err(e) => {
                            eprintln!("feedpipe: {s}: digesting inputs: {e}");
                            return ExitCode::from(1);
                        }
                    },
                    outputs: match manifest::digest_files(
                        &out_dir,
                        &oc.outputs.iter().map(String::as_str).collect::<Vec<_>>(),
                    ) {
                        Ok(m) => m,
                        Err(e) => {
                            eprintln!("feedpipe: {s}: digesting outputs: {e}");
                            return ExitCode::from(1);
                        }
                    },
                    duration_ms: started.elapsed().as_millis(),
                    version: env!("CARGO_PKG_VERSION").to_string(),
                };
                if let Err(e) = manifest::append(&out_dir, entry) {
                    eprintln!("feedpipe: {s}: manifest: {e}");
                    return ExitCode::from(1);
                }
                eprintln!("feedpipe: {s}: ok ({} ms)", started.elapsed().as_millis());
            }
            Err(StageError::MissingArtifact(p)) => {
                eprintln!("feedpipe: {s}: missing upstream artifact {}", p.display());
                return ExitCode::from(2);
            }
            Err(StageError::Config(msg)) => {
                eprintln!("feedpipe: {s}: config: {msg}");
                return ExitCode::from(3);
            }
            Err(StageError::Other(e)) => {
                eprintln!("feedpipe: {s}: {e:#}");
                return ExitCode::from(1);
            }
        }
    }
    ExitCode::SUCCESS
}
