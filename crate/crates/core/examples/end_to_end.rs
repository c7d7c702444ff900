// Copyright 2026 The deid Authors
// SPDX-License-Identifier: Apache-2.0

//! De-identifies the bundled sample corpus.
//!
//!     cargo run --example end_to_end [output_dir]

use std::path::{Path, PathBuf};

use deid::pipeline::{run_deid, PipelineConfig, Resources};

fn main() -> deid::Result<()> {
    let sample = Path::new(env!("CARGO_MANIFEST_DIR")).join("data/sample");
    let output = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("deid-sample-out"));

    let mut cfg = PipelineConfig::load(sample.join("deid.toml"))?;
    cfg.audit_map = Some(output.with_extension("audit.jsonl"));
    let res = Resources::load(&cfg)?;
    let summary = run_deid(
        &sample,
        Some(&sample.join("external.jsonl")),
        &output,
        &cfg,
        &res,
    )?;
    println!(
        "{} processed, {} failed",
        summary.processed,
        summary.failures.len()
    );

    let mut outputs: Vec<_> = std::fs::read_dir(&output)
        .map_err(|e| deid::Error::Unreadable(e.to_string()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "txt"))
        .collect();
    outputs.sort();
    for path in outputs {
        let before =
            std::fs::read_to_string(sample.join(path.file_name().unwrap())).unwrap_or_default();
        let after = std::fs::read_to_string(&path).unwrap_or_default();
        println!("--- {}\n{before}+++\n{after}", path.display());
    }
    Ok(())
}
