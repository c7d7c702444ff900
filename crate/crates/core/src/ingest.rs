// Copyright 2026 The deid Authors
// SPDX-License-Identifier: Apache-2.0

//! Loading span annotations produced by an out-of-process NER model.
//!
//! Accepted layouts: one standoff object, a JSON array of them, or one
//! object per line (JSONL).

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::model::{
    validate_annotation_set, AnnotationSet, Document, Source, StandoffDocument, Tag, TaggedSpan,
};

#[derive(Debug, Clone, Default)]
pub struct ExternalAnnotationFile {
    pub path: Option<PathBuf>,
    records: BTreeMap<String, StandoffDocument>,
}

impl ExternalAnnotationFile {
    pub fn parse(source: &str) -> Result<Self> {
        let trimmed = source.trim_start();
        let docs: Vec<StandoffDocument> = if trimmed.starts_with('[') {
            serde_json::from_str(trimmed)?
        } else if let Ok(single) = serde_json::from_str::<StandoffDocument>(trimmed) {
            vec![single]
        } else {
            trimmed
                .lines()
                .filter(|l| !l.trim().is_empty())
                .map(serde_json::from_str)
                .collect::<Result<_, _>>()?
        };

        let mut records: BTreeMap<String, StandoffDocument> = BTreeMap::new();
        for doc in docs {
            // several records for one document are concatenated
            records
                .entry(doc.doc_id.clone())
                .and_modify(|r| r.spans.extend(doc.spans.iter().cloned()))
                .or_insert(doc);
        }
        Ok(ExternalAnnotationFile {
            path: None,
            records,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let source = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut file = Self::parse(&source)?;
        file.path = Some(path.to_path_buf());
        Ok(file)
    }

    pub fn from_records(records: impl IntoIterator<Item = StandoffDocument>) -> Self {
        let mut file = ExternalAnnotationFile::default();
        for r in records {
            file.records.insert(r.doc_id.clone(), r);
        }
        file
    }

    pub fn record(&self, doc_id: &str) -> Option<&StandoffDocument> {
        self.records.get(doc_id)
    }

    pub fn doc_ids(&self) -> impl Iterator<Item = &str> {
        self.records.keys().map(String::as_str)
    }

    /// Fails on the first record whose `doc_id` names no loaded document.
    pub fn check_documents<'a>(&self, known: impl IntoIterator<Item = &'a str>) -> Result<()> {
        let known: BTreeSet<&str> = known.into_iter().collect();
        match self.doc_ids().find(|id| !known.contains(id)) {
            Some(id) => Err(Error::UnknownDocument(id.to_string())),
            None => Ok(()),
        }
    }
}

/// A record dropped because its tag is outside the allow-list.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DroppedRecord {
    pub start: usize,
    pub end: usize,
    pub tag: Tag,
}

#[derive(Debug, Clone)]
pub struct IngestOutcome {
    pub set: AnnotationSet,
    pub dropped: Vec<DroppedRecord>,
}

#[derive(Debug, Clone)]
pub struct IngestOptions {
    pub allowed: BTreeSet<Tag>,
}

impl Default for IngestOptions {
    fn default() -> Self {
        IngestOptions {
            allowed: [Tag::Per, Tag::Loc, Tag::Org].into_iter().collect(),
        }
    }
}

/// Validates one document's external spans. Spans with tags outside the
/// allow-list are dropped and reported; every kept span is tagged
/// [`Source::External`].
pub fn ingest(
    doc: &Document,
    file: &ExternalAnnotationFile,
    opts: &IngestOptions,
) -> Result<IngestOutcome> {
    let record = file
        .record(doc.id())
        .ok_or_else(|| Error::UnknownDocument(doc.id().to_string()))?;
    ingest_record(doc, record, opts)
}

pub fn ingest_record(
    doc: &Document,
    record: &StandoffDocument,
    opts: &IngestOptions,
) -> Result<IngestOutcome> {
    let malformed = |message: String| Error::MalformedRecord {
        doc_id: doc.id().to_string(),
        message,
    };
    if record.doc_id != doc.id() {
        return Err(Error::UnknownDocument(record.doc_id.clone()));
    }

    let mut raw = Vec::with_capacity(record.spans.len());
    let mut dropped = Vec::new();
    for s in &record.spans {
        if s.start >= s.end {
            return Err(malformed(format!(
                "inverted or empty offsets [{}, {})",
                s.start, s.end
            )));
        }
        let tag: Tag = s
            .tag
            .parse()
            .map_err(|_| malformed(format!("unknown tag {:?}", s.tag)))?;
        if tag == Tag::O {
            continue;
        }
        if !opts.allowed.contains(&tag) {
            dropped.push(DroppedRecord {
                start: s.start,
                end: s.end,
                tag,
            });
            continue;
        }
        raw.push(TaggedSpan::from_document(
            doc,
            s.start,
            s.end,
            tag,
            Source::External,
        )?);
    }
    if !dropped.is_empty() {
        log::warn!(
            "{}: dropped {} external span(s) with tags outside the allow-list",
            doc.id(),
            dropped.len()
        );
    }
    Ok(IngestOutcome {
        set: validate_annotation_set(doc, raw)?,
        dropped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::NaiveDate;

    fn doc() -> Document {
        Document::new(
            "d1",
            "Jean habite à Bermont",
            NaiveDate::from_ymd_opt(2020, 1, 10).unwrap(),
        )
        .unwrap()
    }

    fn file(json: &str) -> ExternalAnnotationFile {
        ExternalAnnotationFile::parse(json).unwrap()
    }

    #[test]
    fn well_formed_record() {
        let out = ingest(
            &doc(),
            &file(r#"{"doc_id":"d1","spans":[{"start":0,"end":4,"tag":"PER"}]}"#),
            &IngestOptions::default(),
        )
        .unwrap();
        assert_eq!(out.set.len(), 1);
        assert_eq!(out.set.spans()[0].source, Source::External);
        assert_eq!(out.set.spans()[0].surface, "Jean");
    }

    #[test]
    fn disallowed_tag_dropped_with_report() {
        let out = ingest(
            &doc(),
            &file(r#"{"doc_id":"d1","spans":[{"start":0,"end":4,"tag":"DATE"},{"start":14,"end":21,"tag":"LOC"}]}"#),
            &IngestOptions::default(),
        )
        .unwrap();
        assert_eq!(
            out.dropped,
            vec![DroppedRecord {
                start: 0,
                end: 4,
                tag: Tag::Date
            }]
        );
        assert_eq!(out.set.len(), 1);
    }

    #[test]
    fn inverted_offsets_are_malformed() {
        let err = ingest(
            &doc(),
            &file(r#"{"doc_id":"d1","spans":[{"start":9,"end":4,"tag":"PER"}]}"#),
            &IngestOptions::default(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::MalformedRecord { .. }));
    }

    #[test]
    fn unknown_tag_is_malformed() {
        let err = ingest(
            &doc(),
            &file(r#"{"doc_id":"d1","spans":[{"start":0,"end":4,"tag":"B-PER"}]}"#),
            &IngestOptions::default(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::MalformedRecord { .. }));
    }

    #[test]
    fn out_of_range_and_unknown_document() {
        let f = file(r#"{"doc_id":"d1","spans":[{"start":0,"end":400,"tag":"PER"}]}"#);
        assert!(matches!(
            ingest(&doc(), &f, &IngestOptions::default()),
            Err(Error::OffsetOutOfRange { .. })
        ));
        let f = file(r#"{"doc_id":"other","spans":[]}"#);
        assert!(matches!(
            ingest(&doc(), &f, &IngestOptions::default()),
            Err(Error::UnknownDocument(_))
        ));
        assert!(f.check_documents(["d1"]).is_err());
        assert!(f.check_documents(["other"]).is_ok());
    }

    #[test]
    fn accepts_array_and_jsonl() {
        let arr = file(r#"[{"doc_id":"a","spans":[]},{"doc_id":"b","spans":[]}]"#);
        assert_eq!(arr.doc_ids().collect::<Vec<_>>(), ["a", "b"]);
        let lines = file("{\"doc_id\":\"a\",\"spans\":[]}\n\n{\"doc_id\":\"b\",\"spans\":[]}\n");
        assert_eq!(lines.doc_ids().collect::<Vec<_>>(), ["a", "b"]);
    }

    #[test]
    fn configurable_allow_list() {
        let opts = IngestOptions {
            allowed: [Tag::Per, Tag::Loc, Tag::Org, Tag::Date]
                .into_iter()
                .collect(),
        };
        let out = ingest(
            &doc(),
            &file(r#"{"doc_id":"d1","spans":[{"start":0,"end":4,"tag":"DATE"}]}"#),
            &opts,
        )
        .unwrap();
        assert!(out.dropped.is_empty());
        assert_eq!(out.set.len(), 1);
    }

    proptest::proptest! {
        // ingestion never invents spans: every output span is one of the input records
        #[test]
        fn never_invents_spans(spans in proptest::collection::vec((0usize..21, 1usize..8, 0usize..4), 0..8)) {
            let tags = ["PER", "LOC", "ORG", "DATE"];
            let records: Vec<_> = spans
                .iter()
                .map(|(s, l, t)| crate::model::StandoffSpan { start: *s, end: (*s + *l).min(21), tag: tags[*t].into() })
                .filter(|s| s.start < s.end)
                .collect();
            let rec = StandoffDocument { doc_id: "d1".into(), spans: records.clone() };
            let out = ingest_record(&doc(), &rec, &IngestOptions::default()).unwrap();
            for s in out.set.spans() {
                proptest::prop_assert!(records.iter().any(|r| r.start == s.start && r.end == s.end && r.tag == s.tag.as_str()));
            }
        }
    }
}
