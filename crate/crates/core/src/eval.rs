// Copyright 2026 The deid Authors
// SPDX-License-Identifier: Apache-2.0

//! Span-level scoring and the interval-fingerprint uniqueness attack.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::ops::{Add, AddAssign};

use num_rational::Ratio;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dates::{sanitize_dates, uniqueness_fingerprint, CategoryAmplitudes, TemporalSequence};
use crate::error::{Error, Result};
use crate::ldp::{PrivacyBudget, SplitPolicy};
use crate::model::{AnnotationSet, Tag};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
}

impl Add for Counts {
    type Output = Counts;
    fn add(self, o: Counts) -> Counts {
        Counts {
            tp: self.tp + o.tp,
            fp: self.fp + o.fp,
            fn_: self.fn_ + o.fn_,
        }
    }
}

/// Per-tag TP/FP/FN. Adding two of these pools documents.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts(pub BTreeMap<Tag, Counts>);

impl ConfusionCounts {
    pub fn get(&self, tag: Tag) -> Counts {
        self.0.get(&tag).copied().unwrap_or_default()
    }

    fn entry(&mut self, tag: Tag) -> &mut Counts {
        self.0.entry(tag).or_default()
    }

    pub fn pooled(&self) -> Counts {
        self.0.values().fold(Counts::default(), |a, b| a + *b)
    }
}

impl AddAssign<&ConfusionCounts> for ConfusionCounts {
    fn add_assign(&mut self, o: &ConfusionCounts) {
        for (tag, c) in &o.0 {
            let e = self.entry(*tag);
            *e = *e + *c;
        }
    }
}

impl Add for ConfusionCounts {
    type Output = ConfusionCounts;
    fn add(mut self, o: ConfusionCounts) -> ConfusionCounts {
        self += &o;
        self
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Matching {
    #[default]
    ExactSpan,
    /// At least one shared character and the same tag, matched one-to-one
    /// greedily in span order.
    Overlap,
}

pub fn score(
    gold: &AnnotationSet,
    predicted: &AnnotationSet,
    matching: Matching,
) -> Result<ConfusionCounts> {
    if gold.doc_id() != predicted.doc_id() {
        return Err(Error::DocumentMismatch {
            expected: gold.doc_id().to_string(),
            found: predicted.doc_id().to_string(),
        });
    }
    let mut counts = ConfusionCounts::default();
    let mut gold_used = vec![false; gold.len()];
    for p in predicted.spans() {
        let hit = gold.spans().iter().enumerate().position(|(i, g)| {
            !gold_used[i]
                && g.tag == p.tag
                && match matching {
                    Matching::ExactSpan => g.start == p.start && g.end == p.end,
                    Matching::Overlap => g.start < p.end && p.start < g.end,
                }
        });
        match hit {
            Some(i) => {
                gold_used[i] = true;
                counts.entry(p.tag).tp += 1;
            }
            None => counts.entry(p.tag).fp += 1,
        }
    }
    for (g, used) in gold.spans().iter().zip(gold_used) {
        if !used {
            counts.entry(g.tag).fn_ += 1;
        }
    }
    Ok(counts)
}

/// Exact precision, recall and F1 for one set of counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExactMetrics {
    pub precision: Ratio<u64>,
    pub recall: Ratio<u64>,
    pub f1: Ratio<u64>,
    /// Set when some denominator was zero and the value defaulted to 0.
    pub undefined: bool,
}

impl ExactMetrics {
    pub fn from_counts(c: Counts) -> Self {
        let mut undefined = false;
        let mut ratio = |num: u64, den: u64| {
            if den == 0 {
                undefined = true;
                Ratio::from_integer(0)
            } else {
                Ratio::new(num, den)
            }
        };
        let precision = ratio(c.tp, c.tp + c.fp);
        let recall = ratio(c.tp, c.tp + c.fn_);
        // 2PR/(P+R) = 2TP/(2TP+FP+FN)
        let f1 = ratio(2 * c.tp, 2 * c.tp + c.fp + c.fn_);
        ExactMetrics {
            precision,
            recall,
            f1,
            undefined,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub undefined: bool,
}

impl Metrics {
    fn new(c: Counts) -> Self {
        let e = ExactMetrics::from_counts(c);
        let f = |r: Ratio<u64>| *r.numer() as f64 / *r.denom() as f64;
        Metrics {
            tp: c.tp,
            fp: c.fp,
            fn_: c.fn_,
            precision: f(e.precision),
            recall: f(e.recall),
            f1: f(e.f1),
            undefined: e.undefined,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub per_tag: BTreeMap<Tag, Metrics>,
    pub micro: Metrics,
}

impl MetricsReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn to_table(&self) -> String {
        let mut out = format!(
            "{:<6} {:>6} {:>6} {:>6} {:>9} {:>9} {:>9}\n",
            "tag", "tp", "fp", "fn", "precision", "recall", "f1"
        );
        let rows = self
            .per_tag
            .iter()
            .map(|(t, m)| (t.as_str(), m))
            .chain([("micro", &self.micro)]);
        for (label, m) in rows {
            let _ = writeln!(
                out,
                "{:<6} {:>6} {:>6} {:>6} {:>9.4} {:>9.4} {:>9.4}",
                label, m.tp, m.fp, m.fn_, m.precision, m.recall, m.f1
            );
        }
        out
    }
}

/// Exact micro-averaged metrics from counts pooled over every tag.
pub fn micro_exact(counts: &ConfusionCounts) -> ExactMetrics {
    ExactMetrics::from_counts(counts.pooled())
}

pub fn micro_average(counts: &ConfusionCounts) -> MetricsReport {
    MetricsReport {
        per_tag: counts
            .0
            .iter()
            .map(|(t, c)| (*t, Metrics::new(*c)))
            .collect(),
        micro: Metrics::new(counts.pooled()),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackReport {
    pub n_docs: usize,
    pub n_non_unique: usize,
    pub fraction_unique: f64,
}

/// Groups documents by their interval fingerprint. A document is non-unique
/// when another one shares its fingerprint; empty fingerprints always count
/// as non-unique since they carry no information.
pub fn uniqueness_attack(corpus: &[TemporalSequence]) -> AttackReport {
    let prints: Vec<Vec<i64>> = corpus.iter().map(uniqueness_fingerprint).collect();
    uniqueness_of_fingerprints(&prints)
}

pub fn uniqueness_of_fingerprints(prints: &[Vec<i64>]) -> AttackReport {
    let mut groups: HashMap<&[i64], usize> = HashMap::new();
    for p in prints {
        *groups.entry(p.as_slice()).or_default() += 1;
    }
    let n_non_unique = prints
        .iter()
        .filter(|p| p.is_empty() || groups[p.as_slice()] > 1)
        .count();
    let n_docs = prints.len();
    AttackReport {
        n_docs,
        n_non_unique,
        fraction_unique: if n_docs == 0 {
            0.0
        } else {
            (n_docs - n_non_unique) as f64 / n_docs as f64
        },
    }
}

/// Fraction of sanitization runs whose fingerprint equals the original one,
/// over `trials` runs per document at budget `epsilon_total` (fixed
/// quarters). Documents with fewer than two gaps carry no fingerprint and
/// are skipped.
pub fn fingerprint_collision_rate<R: Rng + ?Sized>(
    corpus: &[TemporalSequence],
    epsilon_total: f64,
    amps: &CategoryAmplitudes,
    trials: usize,
    rng: &mut R,
) -> Result<f64> {
    let mut runs = 0u64;
    let mut hits = 0u64;
    for s in corpus.iter().filter(|s| s.len() > 2) {
        let original = uniqueness_fingerprint(s);
        for _ in 0..trials {
            let mut budget = PrivacyBudget::new(epsilon_total, SplitPolicy::FixedQuarters)?;
            let out = sanitize_dates(s, &mut budget, amps, rng)?;
            hits += u64::from(uniqueness_fingerprint(&out.sanitized) == original);
            runs += 1;
        }
    }
    Ok(if runs == 0 {
        0.0
    } else {
        hits as f64 / runs as f64
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{validate_annotation_set, Document, Source, TaggedSpan};
    use chrono::NaiveDate;

    fn set(spans: &[(usize, usize, Tag)]) -> AnnotationSet {
        let d = Document::new(
            "d",
            "abcdefghijklmnopqrstuvwxyz",
            NaiveDate::from_ymd_opt(2020, 1, 1).unwrap(),
        )
        .unwrap();
        let raw = spans
            .iter()
            .map(|&(s, e, t)| TaggedSpan::from_document(&d, s, e, t, Source::Merged).unwrap())
            .collect();
        validate_annotation_set(&d, raw).unwrap()
    }

    #[test]
    fn exact_match() {
        let c = score(
            &set(&[(0, 4, Tag::Per)]),
            &set(&[(0, 4, Tag::Per)]),
            Matching::ExactSpan,
        )
        .unwrap();
        assert_eq!(
            c.get(Tag::Per),
            Counts {
                tp: 1,
                fp: 0,
                fn_: 0
            }
        );
    }

    #[test]
    fn tag_mismatch() {
        let c = score(
            &set(&[(0, 4, Tag::Per)]),
            &set(&[(0, 4, Tag::Loc)]),
            Matching::ExactSpan,
        )
        .unwrap();
        assert_eq!(
            c.get(Tag::Per),
            Counts {
                tp: 0,
                fp: 0,
                fn_: 1
            }
        );
        assert_eq!(
            c.get(Tag::Loc),
            Counts {
                tp: 0,
                fp: 1,
                fn_: 0
            }
        );
    }

    #[test]
    fn missed_span() {
        let gold = set(&[(0, 4, Tag::Per), (10, 14, Tag::Loc)]);
        let c = score(&gold, &set(&[(0, 4, Tag::Per)]), Matching::ExactSpan).unwrap();
        assert_eq!(
            c.pooled(),
            Counts {
                tp: 1,
                fp: 0,
                fn_: 1
            }
        );
    }

    #[test]
    fn overlap_mode_is_one_to_one() {
        let gold = set(&[(0, 6, Tag::Per)]);
        let pred = set(&[(0, 2, Tag::Per), (3, 5, Tag::Per)]);
        assert_eq!(
            score(&gold, &pred, Matching::ExactSpan)
                .unwrap()
                .get(Tag::Per)
                .tp,
            0
        );
        assert_eq!(
            score(&gold, &pred, Matching::Overlap)
                .unwrap()
                .get(Tag::Per),
            Counts {
                tp: 1,
                fp: 1,
                fn_: 0
            }
        );
    }

    #[test]
    fn document_mismatch() {
        let other = AnnotationSet::empty("other");
        assert!(matches!(
            score(&set(&[]), &other, Matching::ExactSpan),
            Err(Error::DocumentMismatch { .. })
        ));
    }

    #[test]
    fn micro_formulas() {
        let m = ExactMetrics::from_counts(Counts {
            tp: 3,
            fp: 1,
            fn_: 0,
        });
        assert_eq!(
            (m.precision, m.recall, m.f1),
            (Ratio::new(3, 4), Ratio::from_integer(1), Ratio::new(6, 7))
        );
        let z = ExactMetrics::from_counts(Counts::default());
        assert!(z.undefined && z.f1 == Ratio::from_integer(0));

        let mut c = ConfusionCounts::default();
        c.0.insert(
            Tag::Per,
            Counts {
                tp: 1,
                fp: 1,
                fn_: 0,
            },
        );
        c.0.insert(
            Tag::Loc,
            Counts {
                tp: 1,
                fp: 0,
                fn_: 1,
            },
        );
        let m = micro_exact(&c);
        assert_eq!(
            (m.precision, m.recall, m.f1),
            (Ratio::new(2, 3), Ratio::new(2, 3), Ratio::new(2, 3))
        );
    }

    #[test]
    fn single_tag_micro_equals_per_tag() {
        let mut c = ConfusionCounts::default();
        c.0.insert(
            Tag::Date,
            Counts {
                tp: 5,
                fp: 2,
                fn_: 3,
            },
        );
        let r = micro_average(&c);
        assert_eq!(r.micro, r.per_tag[&Tag::Date]);
        assert!(r.to_table().contains("micro"));
        assert!(r.to_json().contains("\"DATE\""));
    }

    #[test]
    fn attack_grouping() {
        let r = uniqueness_of_fingerprints(&[vec![31], vec![31], vec![9]]);
        assert_eq!((r.n_docs, r.n_non_unique), (3, 2));
        assert!((r.fraction_unique - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(
            uniqueness_of_fingerprints(&[vec![1], vec![2]]).fraction_unique,
            1.0
        );
        assert_eq!(
            uniqueness_of_fingerprints(&[vec![], vec![2]]).n_non_unique,
            1
        );
    }

    #[test]
    fn collisions_vanish_without_noise_budget() {
        use rand::SeedableRng;
        let d = |y, m, day| chrono::NaiveDate::from_ymd_opt(y, m, day).unwrap();
        let s = TemporalSequence::from_dates(vec![d(2020, 1, 10), d(2020, 1, 1), d(2019, 12, 1)])
            .unwrap();
        let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(0);
        let amps = CategoryAmplitudes::default();
        assert_eq!(
            fingerprint_collision_rate(std::slice::from_ref(&s), 1e9, &amps, 20, &mut rng).unwrap(),
            1.0
        );
        let short = TemporalSequence::from_dates(vec![d(2020, 1, 10), d(2020, 1, 1)]).unwrap();
        assert_eq!(
            fingerprint_collision_rate(&[short], 1.0, &amps, 20, &mut rng).unwrap(),
            0.0
        );
    }

    proptest::proptest! {
        #[test]
        fn identical_sets_score_perfectly(raw in proptest::collection::vec((0usize..20, 1usize..6, 0usize..3), 0..8)) {
            let spans: Vec<_> = raw.into_iter().map(|(s, l, t)| (s, (s + l).min(26), [Tag::Per, Tag::Loc, Tag::Date][t])).collect();
            let d = Document::new("d", "abcdefghijklmnopqrstuvwxyz", NaiveDate::from_ymd_opt(2020, 1, 1).unwrap()).unwrap();
            let raw = spans.iter().map(|&(s, e, t)| TaggedSpan::from_document(&d, s, e, t, Source::Rule).unwrap()).collect();
            let a = validate_annotation_set(&d, raw).unwrap();
            let c = score(&a, &a, Matching::ExactSpan).unwrap().pooled();
            proptest::prop_assert_eq!(c, Counts { tp: a.len() as u64, fp: 0, fn_: 0 });
        }

        #[test]
        fn counts_are_additive(a in 0u64..50, b in 0u64..50, c in 0u64..50) {
            let mut x = ConfusionCounts::default();
            x.0.insert(Tag::Per, Counts { tp: a, fp: b, fn_: c });
            let y = x.clone() + x.clone();
            proptest::prop_assert_eq!(y.get(Tag::Per), Counts { tp: 2 * a, fp: 2 * b, fn_: 2 * c });
        }
    }
}
