// Copyright 2026 The deid Authors
// SPDX-License-Identifier: Apache-2.0

use std::path::PathBuf;

use crate::model::Tag;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("document id must not be empty")]
    EmptyDocumentId,

    #[error("span [{start}, {end}) is out of range for a text of {len} characters")]
    OffsetOutOfRange {
        start: usize,
        end: usize,
        len: usize,
    },

    #[error("span [{start}, {end}) surface {found:?} does not match text {expected:?}")]
    SurfaceMismatch {
        start: usize,
        end: usize,
        expected: String,
        found: String,
    },

    #[error("spans from different sources overlap at [{start}, {end})")]
    CrossSourceOverlap { start: usize, end: usize },

    #[error("tag O carries no PHI category")]
    NonPhiTag,

    #[error("unknown tag {0:?}")]
    UnknownTag(String),

    #[error("pattern file line {line}: {message}")]
    PatternFile { line: usize, message: String },

    #[error("cannot normalize temporal expression {0:?}")]
    UnparseableTemporal(String),

    #[error("document {0:?} is not present")]
    UnknownDocument(String),

    #[error("malformed annotation record for {doc_id:?}: {message}")]
    MalformedRecord { doc_id: String, message: String },

    #[error("merge candidate has O from both sources")]
    BothOutside,

    #[error("annotation sets refer to different documents ({expected:?} vs {found:?})")]
    DocumentMismatch { expected: String, found: String },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("value {value} lies outside [{lower}, {upper}]")]
    ValueOutOfDomain { value: f64, lower: f64, upper: f64 },

    #[error("privacy budget exhausted: requested {requested}, remaining {remaining}")]
    BudgetExhausted { requested: f64, remaining: f64 },

    #[error("tag {0} has no privacy budget pool")]
    NotBudgeted(Tag),

    #[error("chronology has no temporal mention")]
    EmptyChronology,

    #[error("location {0:?} is not in the gazetteer")]
    UnresolvedLocation(String),

    #[error("gazetteer: {0}")]
    Gazetteer(String),

    #[error("name pool {0:?} is empty")]
    EmptyNamePool(&'static str),

    /// A document that could not be read, reported by message.
    #[error("{0}")]
    Unreadable(String),

    #[error("configuration: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
