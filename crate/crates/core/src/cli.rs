// Copyright 2026 The deid Authors
// SPDX-License-Identifier: Apache-2.0

//! Command-line front end. Exit codes: 0 success, 1 when some documents
//! failed, 2 for configuration or setup errors.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::error::{Error, Result};
use crate::eval::{fingerprint_collision_rate, uniqueness_attack};
use crate::pipeline::{
    corpus_chronologies, run_deid, run_detect, run_eval, run_ingest_check, run_merge,
    PipelineConfig, Resources, RunSummary,
};
use crate::rng::document_rng;

#[derive(Debug, Parser)]
#[command(name = "deid", version, about = "De-identify French clinical notes")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// TOML (or .json) configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Total privacy budget per document.
    #[arg(long, global = true)]
    pub epsilon: Option<f64>,
    /// Write original/surrogate pairs here (mode 0600).
    #[arg(long, global = true)]
    pub audit_map: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Rule-based detection of structured PHI.
    Detect {
        input: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Validate external annotations against a corpus.
    IngestCheck {
        input: PathBuf,
        #[arg(short, long)]
        annotations: PathBuf,
    },
    /// Merge rule spans with external annotations.
    Merge {
        input: PathBuf,
        #[arg(short, long)]
        annotations: Option<PathBuf>,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Replace every detected span.
    Deid {
        input: PathBuf,
        #[arg(short, long)]
        annotations: Option<PathBuf>,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Score predicted standoff files against gold ones.
    Eval {
        gold: PathBuf,
        predicted: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// Fingerprint uniqueness of the corpus chronologies.
    Attack {
        input: PathBuf,
        /// Also report how often sanitization leaves the fingerprint
        /// unchanged, at each of these budgets.
        #[arg(long, value_delimiter = ',')]
        trend: Vec<f64>,
        #[arg(long, default_value_t = 100)]
        trials: usize,
    },
}

fn config(g: &GlobalArgs) -> Result<PipelineConfig> {
    let mut cfg = match &g.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    if g.seed.is_some() {
        cfg.seed = g.seed;
    }
    if let Some(e) = g.epsilon {
        cfg.epsilon_total = e;
    }
    if g.audit_map.is_some() {
        cfg.audit_map = g.audit_map.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn report(summary: &RunSummary) -> i32 {
    eprintln!(
        "{} documents processed, {} failed",
        summary.processed,
        summary.failures.len()
    );
    for f in &summary.failures {
        eprintln!("  {}: {}", f.doc_id, f.error);
    }
    summary.exit_code()
}

/// Runs a parsed command line and returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    let cfg = match config(&cli.global) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return 2;
        }
    };
    match execute(&cli.command, &cfg) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}

fn execute(command: &Command, cfg: &PipelineConfig) -> Result<i32> {
    let resources = || Resources::load(cfg).map_err(|e| Error::Config(e.to_string()));
    Ok(match command {
        Command::Detect { input, output } => {
            report(&run_detect(input, output, cfg, &resources()?)?)
        }
        Command::IngestCheck { input, annotations } => {
            let (r, summary) = run_ingest_check(input, annotations, cfg)?;
            for (doc, (kept, dropped)) in &r.documents {
                println!("{doc}\tkept {kept}\tdropped {dropped}");
            }
            for doc in &r.missing {
                println!("{doc}\tno record");
            }
            report(&summary)
        }
        Command::Merge {
            input,
            annotations,
            output,
        } => report(&run_merge(
            input,
            annotations.as_deref(),
            output,
            cfg,
            &resources()?,
        )?),
        Command::Deid {
            input,
            annotations,
            output,
        } => report(&run_deid(
            input,
            annotations.as_deref(),
            output,
            cfg,
            &resources()?,
        )?),
        Command::Eval {
            gold,
            predicted,
            json,
        } => {
            let (r, summary) = run_eval(gold, predicted, cfg)?;
            if *json {
                println!("{}", r.to_json());
            } else {
                print!("{}", r.to_table());
            }
            report(&summary)
        }
        Command::Attack {
            input,
            trend,
            trials,
        } => {
            let (seqs, summary) = corpus_chronologies(input, cfg, &resources()?)?;
            let mut out = serde_json::json!({ "uniqueness": uniqueness_attack(&seqs) });
            if !trend.is_empty() {
                let mut rng = document_rng(cfg.seed, "attack");
                let mut rates = Vec::new();
                for &eps in trend {
                    let rate =
                        fingerprint_collision_rate(&seqs, eps, &cfg.amplitudes, *trials, &mut rng)?;
                    rates.push(serde_json::json!({ "epsilon": eps, "collision_rate": rate }));
                }
                out["collision_rates"] = rates.into();
            }
            println!("{}", serde_json::to_string_pretty(&out)?);
            report(&summary)
        }
    })
}
