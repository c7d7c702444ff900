// Copyright 2026 The deid Authors
// SPDX-License-Identifier: Apache-2.0

//! Date and age sanitization over a document's chronology.
//!
//! The mentions of a document are ordered newest-first behind its reference
//! date `e_0`, turned into the day gaps between consecutive elements, and
//! each gap is replaced by a bounded-Laplace draw over `[0, Δ]`, where `Δ`
//! is the amplitude of the gap's category. Surrogate dates are then rebuilt
//! backwards from the unchanged reference date, so order is preserved.

use chrono::{Days, NaiveDate};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ldp::{bounded_laplace, NoiseScale, PrivacyBudget};
use crate::model::Tag;
use crate::rules::{render_temporal, TemporalMention};

/// A document's dates, newest first. `dates[0]` is the reference date and
/// `refs[k]` lists the mentions (by index) that resolved to `dates[k]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TemporalSequence {
    dates: Vec<NaiveDate>,
    refs: Vec<Vec<usize>>,
    clamped: Vec<usize>,
}

impl TemporalSequence {
    /// Builds a sequence directly from dates; `dates[0]` is the reference
    /// and the rest must be non-increasing.
    pub fn from_dates(dates: Vec<NaiveDate>) -> Result<Self> {
        if dates.is_empty() {
            return Err(Error::EmptyChronology);
        }
        if dates.windows(2).any(|w| w[0] < w[1]) {
            return Err(Error::InvalidParameter(
                "chronology must be newest first".into(),
            ));
        }
        let refs = vec![Vec::new(); dates.len()];
        Ok(TemporalSequence {
            dates,
            refs,
            clamped: Vec::new(),
        })
    }

    pub fn reference_date(&self) -> NaiveDate {
        self.dates[0]
    }

    /// `e_0, e_1, ..., e_n`.
    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    /// Mention indices behind element `k`.
    pub fn refs(&self, k: usize) -> &[usize] {
        &self.refs[k]
    }

    /// Mentions that were later than the reference date and got clamped.
    pub fn clamped(&self) -> &[usize] {
        &self.clamped
    }

    pub fn len(&self) -> usize {
        self.dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }

    fn element_of(&self, mention: usize) -> Option<usize> {
        self.refs.iter().position(|r| r.contains(&mention))
    }
}

/// Orders mentions newest-first behind the reference date. Mentions with the
/// same date share one element; mentions after the reference date are
/// clamped to it.
pub fn build_chronology(
    mentions: &[TemporalMention],
    reference_date: NaiveDate,
) -> Result<TemporalSequence> {
    if mentions.is_empty() {
        return Err(Error::EmptyChronology);
    }
    let mut clamped = Vec::new();
    let mut dated: Vec<(NaiveDate, usize)> = mentions
        .iter()
        .enumerate()
        .map(|(i, m)| {
            if m.normalized > reference_date {
                log::warn!(
                    "{:?} ({}) is after the reference date {}; clamped",
                    m.span.surface,
                    m.normalized,
                    reference_date
                );
                clamped.push(i);
                (reference_date, i)
            } else {
                (m.normalized, i)
            }
        })
        .collect();
    dated.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));

    let mut dates = vec![reference_date];
    let mut refs: Vec<Vec<usize>> = vec![Vec::new()];
    for (date, idx) in dated {
        if dates.len() > 1 && *dates.last().unwrap() == date {
            refs.last_mut().unwrap().push(idx);
        } else {
            dates.push(date);
            refs.push(vec![idx]);
        }
    }
    Ok(TemporalSequence {
        dates,
        refs,
        clamped,
    })
}

/// Day gaps `e_0 - e_1, e_1 - e_2, ...`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntervalSequence(pub Vec<i64>);

pub fn intervals(s: &TemporalSequence) -> Result<IntervalSequence> {
    if s.len() < 2 {
        return Err(Error::EmptyChronology);
    }
    Ok(IntervalSequence(
        s.dates
            .windows(2)
            .map(|w| (w[0] - w[1]).num_days())
            .collect(),
    ))
}

/// The gaps without the first one. Unchanged by any uniform shift of the
/// non-reference dates, which is what makes it a fingerprint.
pub fn uniqueness_fingerprint(s: &TemporalSequence) -> Vec<i64> {
    intervals(s)
        .map(|i| i.0.into_iter().skip(1).collect())
        .unwrap_or_default()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum IntervalCategory {
    Short,
    Medium,
    Long,
}

/// Category amplitudes in days.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct CategoryAmplitudes {
    pub short: u32,
    pub medium: u32,
    pub long: u32,
}

impl Default for CategoryAmplitudes {
    fn default() -> Self {
        CategoryAmplitudes {
            short: 61,
            medium: 660,
            long: 36_000,
        }
    }
}

impl CategoryAmplitudes {
    pub fn validate(&self) -> Result<()> {
        if 0 < self.short && self.short < self.medium && self.medium < self.long {
            Ok(())
        } else {
            Err(Error::Config(format!(
                "amplitudes must be strictly increasing and positive: {self:?}"
            )))
        }
    }

    pub fn amplitude(&self, c: IntervalCategory) -> u32 {
        match c {
            IntervalCategory::Short => self.short,
            IntervalCategory::Medium => self.medium,
            IntervalCategory::Long => self.long,
        }
    }
}

/// Smallest category whose amplitude covers the gap.
pub fn categorize(interval: i64, amps: &CategoryAmplitudes) -> IntervalCategory {
    if interval <= amps.short as i64 {
        IntervalCategory::Short
    } else if interval <= amps.medium as i64 {
        IntervalCategory::Medium
    } else {
        IntervalCategory::Long
    }
}

#[derive(Debug, Clone)]
pub struct SanitizedChronology {
    pub original: TemporalSequence,
    pub sanitized: TemporalSequence,
    pub categories: Vec<IntervalCategory>,
    pub noisy_intervals: Vec<i64>,
    pub epsilons: Vec<f64>,
}

impl SanitizedChronology {
    /// Replacement date for mention `idx`.
    pub fn surrogate_for(&self, idx: usize) -> Option<NaiveDate> {
        self.original
            .element_of(idx)
            .map(|k| self.sanitized.dates[k])
    }
}

/// Noises every gap with its share of the date pool and rebuilds the dates
/// from the reference date.
pub fn sanitize_dates<R: Rng + ?Sized>(
    s: &TemporalSequence,
    budget: &mut PrivacyBudget,
    amps: &CategoryAmplitudes,
    rng: &mut R,
) -> Result<SanitizedChronology> {
    let gaps = intervals(s)?.0;
    let epsilons = budget.allocate(Tag::Date, gaps.len())?;

    let mut categories = Vec::with_capacity(gaps.len());
    let mut noisy_intervals = Vec::with_capacity(gaps.len());
    let mut dates = vec![s.reference_date()];
    for (gap, eps) in gaps.iter().zip(&epsilons) {
        let category = categorize(*gap, amps);
        let delta = amps.amplitude(category) as f64;
        let value = if *gap as f64 > delta {
            log::warn!("interval of {gap} days exceeds the largest amplitude; clamped to {delta}");
            delta
        } else {
            *gap as f64
        };
        let noisy =
            bounded_laplace(value, 0.0, delta, NoiseScale::new(delta, *eps)?, rng)?.round() as i64;
        let prev = *dates.last().unwrap();
        let next = prev
            .checked_sub_days(Days::new(noisy as u64))
            .ok_or_else(|| {
                Error::InvalidParameter("surrogate date out of calendar range".into())
            })?;
        categories.push(category);
        noisy_intervals.push(noisy);
        dates.push(next);
    }

    Ok(SanitizedChronology {
        original: s.clone(),
        sanitized: TemporalSequence {
            dates,
            refs: s.refs.clone(),
            clamped: s.clamped.clone(),
        },
        categories,
        noisy_intervals,
        epsilons,
    })
}

/// Replacement text for every mention, in mention order.
pub fn rewrite_mentions(
    mentions: &[TemporalMention],
    chronology: &SanitizedChronology,
) -> Vec<String> {
    let reference = chronology.original.reference_date();
    mentions
        .iter()
        .enumerate()
        .map(|(i, m)| {
            let date = chronology
                .surrogate_for(i)
                .expect("every mention is in the chronology");
            render_temporal(m, date, reference)
        })
        .collect()
}
