// Copyright 2026 The deid Authors
// SPDX-License-Identifier: Apache-2.0

//! Combining the rule stream and the external-model stream into one set of
//! PHI spans.
//!
//! Overlapping spans from the two streams are grouped into a candidate
//! covering their union, and each candidate gets one final tag:
//!
//! 1. both streams agree: keep the tag;
//! 2. exactly one stream says `O`: keep the other tag;
//! 3. the streams disagree on two PHI tags: the external (contextual) model wins.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{validate_annotation_set, AnnotationSet, Document, Source, Tag, TaggedSpan};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MergeCandidate {
    pub start: usize,
    pub end: usize,
    /// Rule-stream tag, `O` when the rules were silent.
    pub t_m: Tag,
    /// External-stream tag, `O` when the model was silent.
    pub t_n: Tag,
    /// Number of input spans folded into this candidate.
    pub members: usize,
}

/// Groups spans that overlap by at least one character. Within a group the
/// tag contributed by each stream is that of its longest span.
pub fn align(rule: &AnnotationSet, external: &AnnotationSet) -> Vec<MergeCandidate> {
    let mut all: Vec<(&TaggedSpan, bool)> = rule
        .spans()
        .iter()
        .map(|s| (s, true))
        .chain(external.spans().iter().map(|s| (s, false)))
        .collect();
    all.sort_by_key(|(s, from_rule)| (s.start, !from_rule));

    let mut out = Vec::new();
    let mut i = 0;
    while i < all.len() {
        let mut end = all[i].0.end;
        let mut j = i + 1;
        while j < all.len() && all[j].0.start < end {
            end = end.max(all[j].0.end);
            j += 1;
        }
        let group = &all[i..j];
        let pick = |want_rule: bool| {
            group
                .iter()
                .filter(|(_, r)| *r == want_rule)
                .max_by(|(a, _), (b, _)| a.len().cmp(&b.len()).then(b.start.cmp(&a.start)))
                .map_or(Tag::O, |(s, _)| s.tag)
        };
        out.push(MergeCandidate {
            start: group[0].0.start,
            end,
            t_m: pick(true),
            t_n: pick(false),
            members: group.len(),
        });
        i = j;
    }
    out
}

/// Final tag of one candidate.
pub fn decide(c: &MergeCandidate) -> Result<Tag> {
    match (c.t_m, c.t_n) {
        (Tag::O, Tag::O) => Err(Error::BothOutside),
        (m, n) if m == n => Ok(m),
        (Tag::O, n) => Ok(n),
        (m, Tag::O) => Ok(m),
        (_, n) => Ok(n),
    }
}

/// A case-3 disagreement, kept for audit.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Conflict {
    pub doc_id: String,
    pub start: usize,
    pub end: usize,
    pub t_m: Tag,
    pub t_n: Tag,
}

#[derive(Debug, Clone)]
pub struct MergeOutcome {
    pub set: AnnotationSet,
    pub conflicts: Vec<Conflict>,
    /// Regions where three or more spans chained together.
    pub chains: Vec<(usize, usize)>,
}

pub fn merge(
    doc: &Document,
    rule: &AnnotationSet,
    external: &AnnotationSet,
) -> Result<MergeOutcome> {
    for set in [rule, external] {
        if set.doc_id() != doc.id() {
            return Err(Error::DocumentMismatch {
                expected: doc.id().to_string(),
                found: set.doc_id().to_string(),
            });
        }
    }

    let mut spans = Vec::new();
    let mut conflicts = Vec::new();
    let mut chains = Vec::new();
    for c in align(rule, external) {
        let tag = decide(&c)?;
        if c.t_m != Tag::O && c.t_n != Tag::O && c.t_m != c.t_n {
            log::info!(
                "merge conflict doc={} region=[{}, {}) t_m={} t_n={}",
                doc.id(),
                c.start,
                c.end,
                c.t_m,
                c.t_n
            );
            conflicts.push(Conflict {
                doc_id: doc.id().to_string(),
                start: c.start,
                end: c.end,
                t_m: c.t_m,
                t_n: c.t_n,
            });
        }
        if c.members > 2 {
            log::info!(
                "merge chain doc={} region=[{}, {}) spans={}",
                doc.id(),
                c.start,
                c.end,
                c.members
            );
            chains.push((c.start, c.end));
        }
        spans.push(TaggedSpan::from_document(
            doc,
            c.start,
            c.end,
            tag,
            Source::Merged,
        )?);
    }

    Ok(MergeOutcome {
        set: validate_annotation_set(doc, spans)?,
        conflicts,
        chains,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::NaiveDate;
    use proptest::prelude::*;

    const TEXT: &str = "M. Jean habite à Bermont 90400 et travaille";

    fn doc() -> Document {
        Document::new("d", TEXT, NaiveDate::from_ymd_opt(2020, 1, 10).unwrap()).unwrap()
    }

    fn set(doc: &Document, source: Source, spans: &[(usize, usize, Tag)]) -> AnnotationSet {
        let raw = spans
            .iter()
            .map(|&(s, e, t)| TaggedSpan::from_document(doc, s, e, t, source).unwrap())
            .collect();
        validate_annotation_set(doc, raw).unwrap()
    }

    fn cand(t_m: Tag, t_n: Tag) -> MergeCandidate {
        MergeCandidate {
            start: 0,
            end: 1,
            t_m,
            t_n,
            members: 1,
        }
    }

    #[test]
    fn align_exact_overlap() {
        let d = doc();
        let c = align(
            &set(&d, Source::Rule, &[(3, 7, Tag::Per)]),
            &set(&d, Source::External, &[(3, 7, Tag::Per)]),
        );
        assert_eq!(c.len(), 1);
        assert_eq!((c[0].t_m, c[0].t_n), (Tag::Per, Tag::Per));
    }

    #[test]
    fn align_partial_overlap_takes_union() {
        let d = doc();
        let c = align(
            &set(&d, Source::Rule, &[(14, 19, Tag::Per)]),
            &set(&d, Source::External, &[(14, 21, Tag::Loc)]),
        );
        assert_eq!(c.len(), 1);
        assert_eq!(
            (c[0].start, c[0].end, c[0].t_m, c[0].t_n),
            (14, 21, Tag::Per, Tag::Loc)
        );
    }

    #[test]
    fn align_singleton() {
        let d = doc();
        let c = align(
            &set(&d, Source::Rule, &[(22, 27, Tag::Loc)]),
            &AnnotationSet::empty("d"),
        );
        assert_eq!(
            (c[0].start, c[0].end, c[0].t_m, c[0].t_n),
            (22, 27, Tag::Loc, Tag::O)
        );
    }

    #[test]
    fn align_chain_uses_longest_span_per_source() {
        let d = doc();
        let c = align(
            &set(&d, Source::Rule, &[(0, 5, Tag::Per), (6, 14, Tag::Date)]),
            &set(&d, Source::External, &[(3, 7, Tag::Loc)]),
        );
        assert_eq!(c.len(), 1);
        assert_eq!(
            (c[0].start, c[0].end, c[0].t_m, c[0].t_n, c[0].members),
            (0, 14, Tag::Date, Tag::Loc, 3)
        );
    }

    #[test]
    fn decide_cases() {
        assert_eq!(decide(&cand(Tag::Per, Tag::Per)).unwrap(), Tag::Per);
        assert_eq!(decide(&cand(Tag::Loc, Tag::O)).unwrap(), Tag::Loc);
        assert_eq!(decide(&cand(Tag::Per, Tag::Loc)).unwrap(), Tag::Loc);
        assert!(matches!(
            decide(&cand(Tag::O, Tag::O)),
            Err(Error::BothOutside)
        ));
    }

    #[test]
    fn worked_example() {
        let d = doc();
        assert_eq!(d.slice(3, 7), "Jean");
        assert_eq!(d.slice(17, 24), "Bermont");
        assert_eq!(d.slice(25, 30), "90400");
        let rule = set(
            &d,
            Source::Rule,
            &[(3, 7, Tag::Per), (17, 24, Tag::Per), (25, 30, Tag::Loc)],
        );
        let ext = set(
            &d,
            Source::External,
            &[(3, 7, Tag::Per), (17, 24, Tag::Loc)],
        );
        let out = merge(&d, &rule, &ext).unwrap();
        let tags: Vec<_> = out
            .set
            .spans()
            .iter()
            .map(|s| (s.surface.as_str(), s.tag))
            .collect();
        assert_eq!(
            tags,
            [
                ("Jean", Tag::Per),
                ("Bermont", Tag::Loc),
                ("90400", Tag::Loc)
            ]
        );
        assert!(out.set.spans().iter().all(|s| s.source == Source::Merged));
        assert_eq!(out.conflicts.len(), 1);
        assert_eq!(
            (out.conflicts[0].t_m, out.conflicts[0].t_n),
            (Tag::Per, Tag::Loc)
        );
    }

    #[test]
    fn empty_external_is_identity_and_disjoint_is_union() {
        let d = doc();
        let rule = set(&d, Source::Rule, &[(3, 7, Tag::Per), (25, 30, Tag::Loc)]);
        let out = merge(&d, &rule, &AnnotationSet::empty("d")).unwrap();
        let key = |s: &AnnotationSet| {
            s.spans()
                .iter()
                .map(|x| (x.start, x.end, x.tag))
                .collect::<Vec<_>>()
        };
        assert_eq!(key(&out.set), key(&rule));

        let ext = set(&d, Source::External, &[(17, 24, Tag::Loc)]);
        let out = merge(&d, &rule, &ext).unwrap();
        assert_eq!(
            key(&out.set),
            vec![(3, 7, Tag::Per), (17, 24, Tag::Loc), (25, 30, Tag::Loc)]
        );
    }

    #[test]
    fn mismatched_documents() {
        let d = doc();
        assert!(matches!(
            merge(&d, &AnnotationSet::empty("x"), &AnnotationSet::empty("d")),
            Err(Error::DocumentMismatch { .. })
        ));
    }

    fn arb_spans() -> impl Strategy<Value = Vec<(usize, usize, Tag)>> {
        let len = TEXT.chars().count();
        prop::collection::vec((0..len, 1usize..6, 0usize..10), 0..6).prop_map(move |v| {
            v.into_iter()
                .map(|(s, l, t)| (s, (s + l).min(len), Tag::ALL[t]))
                .filter(|(s, e, _)| s < e)
                .collect()
        })
    }

    proptest! {
        #[test]
        fn coverage_is_monotone(r in arb_spans(), n in arb_spans()) {
            let d = doc();
            let rule = set(&d, Source::Rule, &r);
            let ext = set(&d, Source::External, &n);
            let out = merge(&d, &rule, &ext).unwrap();
            for s in rule.spans().iter().chain(ext.spans()) {
                for ch in s.start..s.end {
                    prop_assert!(out.set.spans().iter().any(|o| o.start <= ch && ch < o.end));
                }
            }
            for w in out.set.spans().windows(2) {
                prop_assert!(w[0].end <= w[1].start);
            }
        }

        #[test]
        fn merge_with_itself_is_identity(r in arb_spans()) {
            let d = doc();
            let a = set(&d, Source::Rule, &r);
            let mut b_raw = Vec::new();
            for s in a.spans() {
                let mut s = s.clone();
                s.source = Source::External;
                b_raw.push(s);
            }
            let b = validate_annotation_set(&d, b_raw).unwrap();
            let out = merge(&d, &a, &b).unwrap();
            let key = |s: &AnnotationSet| s.spans().iter().map(|x| (x.start, x.end, x.tag)).collect::<Vec<_>>();
            prop_assert_eq!(key(&out.set), key(&a));
        }
    }
}
