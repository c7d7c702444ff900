// Copyright 2026 The deid Authors
// SPDX-License-Identifier: Apache-2.0

//! Rule detection, then merging a rule stream with an NER stream.
//!
//!     cargo run --example detect_and_merge

use chrono::NaiveDate;
use deid::ingest::{ingest_record, IngestOptions};
use deid::merge::merge;
use deid::model::{
    validate_annotation_set, Document, Source, StandoffDocument, StandoffSpan, Tag, TaggedSpan,
};
use deid::rules::{detect_structured, PatternSet};

fn main() -> deid::Result<()> {
    let reference = NaiveDate::from_ymd_opt(2020, 1, 10).unwrap();
    let doc = Document::new(
        "demo",
        "M. Jean habite à Bermont 90400 et travaille. Vu le 12/03/2019, tel 03 84 11 22 33.",
        reference,
    )?;

    let rules = detect_structured(&doc, &PatternSet::default());
    println!("rule spans:");
    for s in rules.spans() {
        println!(
            "  [{:>3}, {:>3}) {:<5} {:?}",
            s.start, s.end, s.tag, s.surface
        );
    }

    // spans as an NER tool would emit them
    let record = StandoffDocument {
        doc_id: "demo".into(),
        spans: vec![
            StandoffSpan {
                start: 3,
                end: 7,
                tag: "PER".into(),
            },
            StandoffSpan {
                start: 17,
                end: 24,
                tag: "LOC".into(),
            },
        ],
    };
    let external = ingest_record(&doc, &record, &IngestOptions::default())?.set;

    let merged = merge(&doc, &rules, &external)?;
    println!("merged spans:");
    for s in merged.set.spans() {
        println!(
            "  [{:>3}, {:>3}) {:<5} {:?}",
            s.start, s.end, s.tag, s.surface
        );
    }

    // two streams that disagree on every span
    let span = |s, e, t, src| TaggedSpan::from_document(&doc, s, e, t, src);
    let a = validate_annotation_set(
        &doc,
        vec![
            span(3, 7, Tag::Per, Source::Rule)?,
            span(17, 24, Tag::Per, Source::Rule)?,
            span(25, 30, Tag::Loc, Source::Rule)?,
        ],
    )?;
    let b = validate_annotation_set(
        &doc,
        vec![
            span(3, 7, Tag::Per, Source::External)?,
            span(17, 24, Tag::Loc, Source::External)?,
        ],
    )?;
    let out = merge(&doc, &a, &b)?;
    let tags: Vec<_> = out.set.spans().iter().map(|s| s.tag.as_str()).collect();
    println!(
        "PER/PER/LOC merged with PER/LOC/O gives {tags:?}; {} conflict(s)",
        out.conflicts.len()
    );
    Ok(())
}
