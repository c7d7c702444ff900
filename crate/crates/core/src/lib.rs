// Copyright 2026 The deid Authors
// SPDX-License-Identifier: Apache-2.0

//! De-identification of French clinical notes.
//!
//! Spans are found by a regex detector for structured identifiers and by an
//! external NER tool for names, places and organisations; the two streams are
//! merged, then every span is replaced. Dates, ages and locations go through
//! ε-local differential privacy mechanisms; names and formatted identifiers
//! get random surrogates that keep their shape.
//!
//! ```
//! use chrono::NaiveDate;
//! use deid::model::Document;
//! use deid::rules::{detect_structured, PatternSet};
//!
//! let doc = Document::new("n1", "Vu le 12/03/2019, tel 03 84 11 22 33.",
//!     NaiveDate::from_ymd_opt(2020, 1, 1).unwrap()).unwrap();
//! let set = detect_structured(&doc, &PatternSet::default());
//! let tags: Vec<_> = set.spans().iter().map(|s| s.tag.as_str()).collect();
//! assert_eq!(tags, ["DATE", "PHONE"]);
//! ```

pub mod cli;
pub mod dates;
pub mod error;
pub mod eval;
pub mod ingest;
pub mod ldp;
pub mod location;
pub mod merge;
pub mod model;
pub mod pipeline;
pub mod rng;
pub mod rules;
pub mod surrogates;

pub use error::{Error, Result};
pub use model::{AnnotationSet, Document, Source, Tag, TaggedSpan};
