// Copyright 2026 The deid Authors
// SPDX-License-Identifier: Apache-2.0

//! Building a chronology from a note and replacing its dates.
//!
//!     cargo run --example sanitize_dates [epsilon]

use chrono::NaiveDate;
use deid::dates::{
    build_chronology, intervals, rewrite_mentions, sanitize_dates, uniqueness_fingerprint,
    CategoryAmplitudes,
};
use deid::ldp::{PrivacyBudget, SplitPolicy};
use deid::model::{Document, Tag};
use deid::rules::{detect_structured, normalize_temporal, NormalizeOptions, PatternSet};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

fn main() -> deid::Result<()> {
    let epsilon: f64 = std::env::args()
        .nth(1)
        .and_then(|a| a.parse().ok())
        .unwrap_or(1.0);
    let doc = Document::new(
        "demo",
        "Patiente de 72 ans, opérée le 3 février 2019, contrôle le 15/03/2019, revue hier.",
        NaiveDate::from_ymd_opt(2019, 6, 1).unwrap(),
    )?;
    let spans = detect_structured(&doc, &PatternSet::default());
    let mentions: Vec<_> = spans
        .spans()
        .iter()
        .filter(|s| matches!(s.tag, Tag::Date | Tag::Age))
        .map(|s| normalize_temporal(&doc, s, NormalizeOptions::default()))
        .collect::<deid::Result<_>>()?;

    let chronology = build_chronology(&mentions, doc.reference_date())?;
    println!("chronology  {:?}", chronology.dates());
    println!("intervals   {:?}", intervals(&chronology)?.0);
    println!("fingerprint {:?}", uniqueness_fingerprint(&chronology));

    let mut budget = PrivacyBudget::new(epsilon, SplitPolicy::FixedQuarters)?;
    let out = sanitize_dates(
        &chronology,
        &mut budget,
        &CategoryAmplitudes::default(),
        &mut ChaCha20Rng::seed_from_u64(1),
    )?;
    println!("categories  {:?}", out.categories);
    println!("noisy       {:?}", out.noisy_intervals);
    println!("sanitized   {:?}", out.sanitized.dates());
    for (m, text) in mentions.iter().zip(rewrite_mentions(&mentions, &out)) {
        println!("  {:<18} -> {text}", m.span.surface);
    }
    println!("ledger {:?}", budget.ledger());
    Ok(())
}
