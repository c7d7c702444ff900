// Copyright 2026 The deid Authors
// SPDX-License-Identifier: Apache-2.0

//! Span scoring and the chronology fingerprint attack.
//!
//!     cargo run --example evaluate

use chrono::NaiveDate;
use deid::dates::TemporalSequence;
use deid::eval::{micro_average, micro_exact, score, uniqueness_attack, ConfusionCounts, Matching};
use deid::model::{AnnotationSet, StandoffDocument, StandoffSpan};

fn set(doc: &str, spans: &[(usize, usize, &str)]) -> deid::Result<AnnotationSet> {
    AnnotationSet::from_standoff(&StandoffDocument {
        doc_id: doc.into(),
        spans: spans
            .iter()
            .map(|&(start, end, tag)| StandoffSpan {
                start,
                end,
                tag: tag.into(),
            })
            .collect(),
    })
}

fn main() -> deid::Result<()> {
    let gold = set("a", &[(0, 4, "PER"), (10, 17, "LOC"), (20, 30, "DATE")])?;
    let pred = set(
        "a",
        &[
            (0, 4, "PER"),
            (10, 15, "LOC"),
            (20, 30, "DATE"),
            (40, 45, "PER"),
        ],
    )?;

    for m in [Matching::ExactSpan, Matching::Overlap] {
        let mut total = ConfusionCounts::default();
        total += &score(&gold, &pred, m)?;
        let exact = micro_exact(&total);
        println!(
            "{m:?}: micro P={} R={} F1={}",
            exact.precision, exact.recall, exact.f1
        );
        print!("{}", micro_average(&total).to_table());
    }

    let d = |y, m, day| NaiveDate::from_ymd_opt(y, m, day).unwrap();
    let corpus = vec![
        TemporalSequence::from_dates(vec![d(2020, 1, 10), d(2020, 1, 1), d(2019, 12, 1)])?,
        // same gaps after the first one, shifted by a year
        TemporalSequence::from_dates(vec![d(2021, 5, 1), d(2021, 1, 1), d(2020, 12, 1)])?,
        TemporalSequence::from_dates(vec![d(2020, 3, 3), d(2020, 2, 2), d(2019, 2, 2)])?,
    ];
    let r = uniqueness_attack(&corpus);
    println!(
        "attack: {} documents, {} share a fingerprint, {:.2} unique",
        r.n_docs, r.n_non_unique, r.fraction_unique
    );
    Ok(())
}
