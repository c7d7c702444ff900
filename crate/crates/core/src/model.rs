// Copyright 2026 The deid Authors
// SPDX-License-Identifier: Apache-2.0

//! Documents, PHI tags and character-offset span annotations.
//!
//! All offsets are counted in Unicode scalar values (`char`s), never bytes,
//! so that annotations produced by different tools line up on accented text.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A single clinical note.
#[derive(Debug, Clone)]
pub struct Document {
    id: String,
    text: String,
    reference_date: NaiveDate,
    metadata: BTreeMap<String, String>,
    // byte offset of every char boundary, len = char count + 1
    boundaries: Vec<usize>,
}

impl Document {
    pub fn new(
        id: impl Into<String>,
        text: impl Into<String>,
        reference_date: NaiveDate,
    ) -> Result<Self> {
        let id = id.into();
        if id.is_empty() {
            return Err(Error::EmptyDocumentId);
        }
        let text = text.into();
        let mut boundaries: Vec<usize> = text.char_indices().map(|(b, _)| b).collect();
        boundaries.push(text.len());
        Ok(Document {
            id,
            text,
            reference_date,
            metadata: BTreeMap::new(),
            boundaries,
        })
    }

    pub fn with_metadata(mut self, metadata: BTreeMap<String, String>) -> Self {
        self.metadata = metadata;
        self
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    /// The "current date" of the note; anchors every date computation.
    pub fn reference_date(&self) -> NaiveDate {
        self.reference_date
    }

    pub fn metadata(&self) -> &BTreeMap<String, String> {
        &self.metadata
    }

    /// Length in chars.
    pub fn len(&self) -> usize {
        self.boundaries.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Text between two char offsets. Panics when out of range; callers
    /// check with [`Document::check_range`] first.
    pub fn slice(&self, start: usize, end: usize) -> &str {
        &self.text[self.boundaries[start]..self.boundaries[end]]
    }

    pub fn check_range(&self, start: usize, end: usize) -> Result<()> {
        if start < end && end <= self.len() {
            Ok(())
        } else {
            Err(Error::OffsetOutOfRange {
                start,
                end,
                len: self.len(),
            })
        }
    }

    /// Char offset of a byte offset that falls on a char boundary.
    pub fn char_offset(&self, byte: usize) -> usize {
        self.boundaries
            .binary_search(&byte)
            .expect("byte offset on a char boundary")
    }
}

/// PHI tag. `O` is the only non-PHI value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Tag {
    #[serde(rename = "PER")]
    Per,
    #[serde(rename = "LOC")]
    Loc,
    #[serde(rename = "ORG")]
    Org,
    #[serde(rename = "DATE")]
    Date,
    #[serde(rename = "AGE")]
    Age,
    #[serde(rename = "PHONE")]
    Phone,
    #[serde(rename = "EMAIL")]
    Email,
    #[serde(rename = "URL")]
    Url,
    #[serde(rename = "ID")]
    Id,
    #[serde(rename = "MISC")]
    Misc,
    #[serde(rename = "O")]
    O,
}

impl Tag {
    pub const ALL: [Tag; 11] = [
        Tag::Per,
        Tag::Loc,
        Tag::Org,
        Tag::Date,
        Tag::Age,
        Tag::Phone,
        Tag::Email,
        Tag::Url,
        Tag::Id,
        Tag::Misc,
        Tag::O,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Tag::Per => "PER",
            Tag::Loc => "LOC",
            Tag::Org => "ORG",
            Tag::Date => "DATE",
            Tag::Age => "AGE",
            Tag::Phone => "PHONE",
            Tag::Email => "EMAIL",
            Tag::Url => "URL",
            Tag::Id => "ID",
            Tag::Misc => "MISC",
            Tag::O => "O",
        }
    }

    pub fn is_phi(self) -> bool {
        self != Tag::O
    }
}

impl fmt::Display for Tag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Tag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Tag::ALL
            .iter()
            .copied()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| Error::UnknownTag(s.to_string()))
    }
}

/// HIPAA Safe Harbor identifier categories covered by a tag.
///
/// 1 names, 2 geographic subdivisions, 3 dates and ages, 4 telephone, 5 fax,
/// 6 e-mail, 7 SSN, 8 medical record, 9 health plan, 10 account,
/// 11 certificate/license, 14 URL, 18 any other unique identifier.
pub fn tag_to_hipaa(tag: Tag) -> Result<BTreeSet<u8>> {
    let cats: &[u8] = match tag {
        Tag::O => return Err(Error::NonPhiTag),
        Tag::Per => &[1],
        Tag::Loc | Tag::Org => &[2],
        Tag::Date | Tag::Age => &[3],
        Tag::Phone => &[4, 5],
        Tag::Email => &[6],
        Tag::Url => &[14],
        Tag::Id => &[7, 8, 9, 10, 11, 18],
        Tag::Misc => {
            log::warn!("MISC has no HIPAA category and is never substituted");
            &[]
        }
    };
    Ok(cats.iter().copied().collect())
}

/// Which detector produced a span.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Source {
    Rule,
    External,
    Merged,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TaggedSpan {
    pub start: usize,
    pub end: usize,
    pub tag: Tag,
    pub source: Source,
    pub surface: String,
}

impl TaggedSpan {
    /// Builds a span whose surface is read from the document.
    pub fn from_document(
        doc: &Document,
        start: usize,
        end: usize,
        tag: Tag,
        source: Source,
    ) -> Result<Self> {
        doc.check_range(start, end)?;
        Ok(TaggedSpan {
            start,
            end,
            tag,
            source,
            surface: doc.slice(start, end).to_string(),
        })
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }

    pub fn overlaps(&self, other: &TaggedSpan) -> bool {
        self.start < other.end && other.start < self.end
    }
}

/// Sorted, overlap-free PHI spans of one document. Only constructed through
/// [`validate_annotation_set`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnnotationSet {
    doc_id: String,
    spans: Vec<TaggedSpan>,
}

impl AnnotationSet {
    pub fn empty(doc_id: impl Into<String>) -> Self {
        AnnotationSet {
            doc_id: doc_id.into(),
            spans: Vec::new(),
        }
    }

    pub fn doc_id(&self) -> &str {
        &self.doc_id
    }

    pub fn spans(&self) -> &[TaggedSpan] {
        &self.spans
    }

    pub fn len(&self) -> usize {
        self.spans.len()
    }

    pub fn is_empty(&self) -> bool {
        self.spans.is_empty()
    }

    /// Reads a standoff record without its text, for scoring. Surfaces are
    /// left empty; overlapping spans are an error.
    pub fn from_standoff(record: &StandoffDocument) -> Result<Self> {
        let mut spans = Vec::with_capacity(record.spans.len());
        for s in &record.spans {
            let tag: Tag = s.tag.parse()?;
            if s.start >= s.end {
                return Err(Error::MalformedRecord {
                    doc_id: record.doc_id.clone(),
                    message: format!("empty or inverted span [{}, {})", s.start, s.end),
                });
            }
            if tag.is_phi() {
                spans.push(TaggedSpan {
                    start: s.start,
                    end: s.end,
                    tag,
                    source: Source::Merged,
                    surface: String::new(),
                });
            }
        }
        spans.sort_by_key(|s| (s.start, s.end));
        if let Some(w) = spans.windows(2).find(|w| w[0].overlaps(&w[1])) {
            return Err(Error::MalformedRecord {
                doc_id: record.doc_id.clone(),
                message: format!("overlapping spans at {} and {}", w[0].start, w[1].start),
            });
        }
        Ok(AnnotationSet {
            doc_id: record.doc_id.clone(),
            spans,
        })
    }

    pub fn to_standoff(&self) -> StandoffDocument {
        StandoffDocument {
            doc_id: self.doc_id.clone(),
            spans: self
                .spans
                .iter()
                .map(|s| StandoffSpan {
                    start: s.start,
                    end: s.end,
                    tag: s.tag.as_str().to_string(),
                })
                .collect(),
        }
    }
}

/// Validates raw spans against a document and resolves same-source
/// overlaps: the longest span wins, ties go to the smaller start, then to
/// the earlier position in `raw`.
pub fn validate_annotation_set(doc: &Document, raw: Vec<TaggedSpan>) -> Result<AnnotationSet> {
    let mut candidates = Vec::with_capacity(raw.len());
    for (order, span) in raw.into_iter().enumerate() {
        doc.check_range(span.start, span.end)?;
        let expected = doc.slice(span.start, span.end);
        if span.surface != expected {
            return Err(Error::SurfaceMismatch {
                start: span.start,
                end: span.end,
                expected: expected.to_string(),
                found: span.surface,
            });
        }
        if span.tag.is_phi() {
            candidates.push((order, span));
        }
    }

    candidates.sort_by(|(oa, a), (ob, b)| {
        b.len()
            .cmp(&a.len())
            .then(a.start.cmp(&b.start))
            .then(oa.cmp(ob))
    });

    let mut kept: Vec<TaggedSpan> = Vec::with_capacity(candidates.len());
    for (_, span) in candidates {
        if let Some(k) = kept
            .iter()
            .find(|k| k.overlaps(&span) && k.source != span.source)
        {
            return Err(Error::CrossSourceOverlap {
                start: span.start.max(k.start),
                end: span.end.min(k.end),
            });
        }
        if !kept.iter().any(|k| k.overlaps(&span)) {
            kept.push(span);
        }
    }
    kept.sort_by_key(|s| s.start);

    Ok(AnnotationSet {
        doc_id: doc.id().to_string(),
        spans: kept,
    })
}

/// One document's standoff annotations as exchanged on disk.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StandoffDocument {
    pub doc_id: String,
    pub spans: Vec<StandoffSpan>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StandoffSpan {
    pub start: usize,
    pub end: usize,
    pub tag: String,
}
