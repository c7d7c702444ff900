// Copyright 2026 The deid Authors
// SPDX-License-Identifier: Apache-2.0

//! Pattern-driven detection of structured PHI and normalization of the
//! temporal expressions it finds.

use std::path::Path;
use std::sync::OnceLock;

use chrono::{Datelike, Days, Months, NaiveDate};
use regex::Regex;

use crate::error::{Error, Result};
use crate::model::{validate_annotation_set, AnnotationSet, Document, Source, Tag, TaggedSpan};

pub const DEFAULT_PATTERNS: &str = include_str!("../data/patterns.tsv");

/// Days per year used to turn ages into dates and back.
pub const DAYS_PER_YEAR: f64 = 365.25;

/// An ordered list of `(tag, regex)` detection rules.
#[derive(Debug, Clone)]
pub struct PatternSet {
    rules: Vec<(Tag, Regex)>,
}

impl PatternSet {
    /// Parses `TAG<TAB>regex` lines. Blank lines and `#` comments are skipped.
    pub fn parse(source: &str) -> Result<Self> {
        let mut rules = Vec::new();
        for (idx, line) in source.lines().enumerate() {
            let line_no = idx + 1;
            if line.trim().is_empty() || line.trim_start().starts_with('#') {
                continue;
            }
            let (tag, pattern) = line.split_once('\t').ok_or_else(|| Error::PatternFile {
                line: line_no,
                message: "expected TAG<TAB>pattern".into(),
            })?;
            let tag: Tag = tag.trim().parse().map_err(|e: Error| Error::PatternFile {
                line: line_no,
                message: e.to_string(),
            })?;
            if tag == Tag::O {
                return Err(Error::PatternFile {
                    line: line_no,
                    message: "O is not a detectable tag".into(),
                });
            }
            let regex = Regex::new(pattern).map_err(|e| Error::PatternFile {
                line: line_no,
                message: e.to_string(),
            })?;
            rules.push((tag, regex));
        }
        Ok(PatternSet { rules })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let source = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&source)
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }
}

impl Default for PatternSet {
    fn default() -> Self {
        PatternSet::parse(DEFAULT_PATTERNS).expect("shipped pattern file is valid")
    }
}

/// Runs every rule over the document and keeps the longest match wherever
/// matches overlap.
pub fn detect_structured(doc: &Document, patterns: &PatternSet) -> AnnotationSet {
    let mut raw = Vec::new();
    for (tag, regex) in &patterns.rules {
        for m in regex.find_iter(doc.text()) {
            let start = doc.char_offset(m.start());
            let end = doc.char_offset(m.end());
            if start < end {
                raw.push(TaggedSpan {
                    start,
                    end,
                    tag: *tag,
                    source: Source::Rule,
                    surface: m.as_str().to_string(),
                });
            }
        }
    }
    let set =
        validate_annotation_set(doc, raw).expect("regex matches are in range and single-source");
    for span in set.spans().iter().filter(|s| s.tag == Tag::Age) {
        let before = doc
            .slice(span.start.saturating_sub(12), span.start)
            .to_lowercase();
        if before.trim_end().ends_with("pendant") || before.trim_end().ends_with("durant") {
            log::info!(
                "{}: {:?} at {} may be a duration rather than an age",
                doc.id(),
                span.surface,
                span.start
            );
        }
    }
    set
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TemporalKind {
    AbsoluteDate,
    RelativeDate,
    Age,
}

/// How a temporal mention was written, kept so a replacement date can be
/// rendered the same way.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SurfaceFormat {
    /// `12/03/2019`, with its separator and zero padding.
    NumericDmy {
        sep: char,
        pad_day: bool,
        pad_month: bool,
    },
    /// `12 mars 2019`.
    DayMonthName {
        sep: char,
        capitalized: bool,
    },
    MonthYear,
    MonthNameYear,
    Relative,
    /// The age number sits between `prefix` and `suffix` in the surface.
    Age {
        prefix: String,
        suffix: String,
    },
}

/// A DATE or AGE span resolved to a calendar date.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TemporalMention {
    pub span: TaggedSpan,
    pub kind: TemporalKind,
    pub format: SurfaceFormat,
    pub normalized: NaiveDate,
}

#[derive(Debug, Clone, Copy)]
pub struct NormalizeOptions {
    /// Day assumed for month-precision dates like `03/2019`.
    pub month_precision_day: u32,
}

impl Default for NormalizeOptions {
    fn default() -> Self {
        NormalizeOptions {
            month_precision_day: 15,
        }
    }
}

const MONTHS: [(&str, u32); 15] = [
    ("janvier", 1),
    ("février", 2),
    ("fevrier", 2),
    ("mars", 3),
    ("avril", 4),
    ("mai", 5),
    ("juin", 6),
    ("juillet", 7),
    ("août", 8),
    ("aout", 8),
    ("septembre", 9),
    ("octobre", 10),
    ("novembre", 11),
    ("décembre", 12),
    ("decembre", 12),
];

fn month_number(name: &str) -> Option<u32> {
    let name = name.to_lowercase();
    MONTHS.iter().find(|(n, _)| *n == name).map(|(_, m)| *m)
}

fn month_name(month: u32) -> &'static str {
    MONTHS
        .iter()
        .find(|(_, m)| *m == month)
        .map(|(n, _)| *n)
        .expect("month in 1..=12")
}

fn small_number(word: &str) -> Option<u32> {
    let n = match word.to_lowercase().as_str() {
        "un" | "une" => 1,
        "deux" => 2,
        "trois" => 3,
        "quatre" => 4,
        "cinq" => 5,
        "six" => 6,
        "sept" => 7,
        "huit" => 8,
        "neuf" => 9,
        "dix" => 10,
        "quinze" => 15,
        other => return other.parse().ok(),
    };
    Some(n)
}

struct TemporalRegexes {
    numeric: Regex,
    day_month_name: Regex,
    month_year: Regex,
    month_name_year: Regex,
    relative: Regex,
    deictic: Regex,
    age: Regex,
}

fn regexes() -> &'static TemporalRegexes {
    static RE: OnceLock<TemporalRegexes> = OnceLock::new();
    RE.get_or_init(|| TemporalRegexes {
        numeric: Regex::new(r"^(\d{1,2})([/.-])(\d{1,2})[/.-](\d{4})$").unwrap(),
        day_month_name: Regex::new(r"^(?i)(1er|\d{1,2})([ -])(\p{L}+)[ -](\d{4})$").unwrap(),
        month_year: Regex::new(r"^(\d{1,2})/(\d{4})$").unwrap(),
        month_name_year: Regex::new(r"^(?i)(\p{L}+)\s+(\d{4})$").unwrap(),
        relative: Regex::new(
            r"^(?i)(dans|il y a|depuis)\s+(\p{L}+|\d{1,3})\s+(jours?|semaines?|mois|ans?|années?)$",
        )
        .unwrap(),
        deictic: Regex::new(r"^(?i)(avant-hier|hier|aujourd'hui|demain|après-demain)$").unwrap(),
        age: Regex::new(r"(\d{1,3})").unwrap(),
    })
}

fn unparseable(surface: &str) -> Error {
    Error::UnparseableTemporal(surface.to_string())
}

/// Shifts a date by a signed number of days, months or years.
fn shift(date: NaiveDate, amount: u32, unit: &str, forward: bool) -> Option<NaiveDate> {
    let unit = unit.to_lowercase();
    let (days, months) = if unit.starts_with("jour") {
        (amount as u64, 0)
    } else if unit.starts_with("semaine") {
        (7 * amount as u64, 0)
    } else if unit == "mois" {
        (0, amount)
    } else {
        (0, 12 * amount)
    };
    if forward {
        date.checked_add_days(Days::new(days))?
            .checked_add_months(Months::new(months))
    } else {
        date.checked_sub_days(Days::new(days))?
            .checked_sub_months(Months::new(months))
    }
}

/// Date a person of `years` was born, counting 365.25 days per year.
pub fn age_to_date(reference: NaiveDate, years: u32) -> Option<NaiveDate> {
    let days = (years as f64 * DAYS_PER_YEAR).round() as u64;
    reference.checked_sub_days(Days::new(days))
}

/// Whole years between `date` and `reference`, counting 365.25 days per year.
pub fn date_to_age(reference: NaiveDate, date: NaiveDate) -> i64 {
    let days = (reference - date).num_days();
    (days as f64 / DAYS_PER_YEAR).floor() as i64
}

/// Resolves a DATE or AGE span to a calendar date.
pub fn normalize_temporal(
    doc: &Document,
    span: &TaggedSpan,
    opts: NormalizeOptions,
) -> Result<TemporalMention> {
    let surface = span.surface.trim();
    let reference = doc.reference_date();
    let re = regexes();
    let mention = |kind, format, normalized| TemporalMention {
        span: span.clone(),
        kind,
        format,
        normalized,
    };

    match span.tag {
        Tag::Age => {
            let m = re
                .age
                .find(&span.surface)
                .ok_or_else(|| unparseable(surface))?;
            let years: u32 = m.as_str().parse().map_err(|_| unparseable(surface))?;
            let date = age_to_date(reference, years).ok_or_else(|| unparseable(surface))?;
            let format = SurfaceFormat::Age {
                prefix: span.surface[..m.start()].to_string(),
                suffix: span.surface[m.end()..].to_string(),
            };
            Ok(mention(TemporalKind::Age, format, date))
        }
        Tag::Date => {
            if let Some(c) = re.numeric.captures(surface) {
                let (d, m, y) = (&c[1], &c[3], &c[4]);
                let date = NaiveDate::from_ymd_opt(
                    y.parse().unwrap(),
                    m.parse().unwrap(),
                    d.parse().unwrap(),
                )
                .ok_or_else(|| unparseable(surface))?;
                let format = SurfaceFormat::NumericDmy {
                    sep: c[2].chars().next().unwrap(),
                    pad_day: d.len() == 2,
                    pad_month: m.len() == 2,
                };
                return Ok(mention(TemporalKind::AbsoluteDate, format, date));
            }
            if let Some(c) = re.day_month_name.captures(surface) {
                let day = if c[1].eq_ignore_ascii_case("1er") {
                    1
                } else {
                    c[1].parse().unwrap()
                };
                let month = month_number(&c[3]).ok_or_else(|| unparseable(surface))?;
                let date = NaiveDate::from_ymd_opt(c[4].parse().unwrap(), month, day)
                    .ok_or_else(|| unparseable(surface))?;
                let format = SurfaceFormat::DayMonthName {
                    sep: c[2].chars().next().unwrap(),
                    capitalized: c[3].chars().next().is_some_and(char::is_uppercase),
                };
                return Ok(mention(TemporalKind::AbsoluteDate, format, date));
            }
            if let Some(c) = re.month_year.captures(surface) {
                let date = NaiveDate::from_ymd_opt(
                    c[2].parse().unwrap(),
                    c[1].parse().unwrap(),
                    opts.month_precision_day,
                )
                .ok_or_else(|| unparseable(surface))?;
                return Ok(mention(
                    TemporalKind::AbsoluteDate,
                    SurfaceFormat::MonthYear,
                    date,
                ));
            }
            if let Some(c) = re.month_name_year.captures(surface) {
                if let Some(month) = month_number(&c[1]) {
                    let date = NaiveDate::from_ymd_opt(
                        c[2].parse().unwrap(),
                        month,
                        opts.month_precision_day,
                    )
                    .ok_or_else(|| unparseable(surface))?;
                    return Ok(mention(
                        TemporalKind::AbsoluteDate,
                        SurfaceFormat::MonthNameYear,
                        date,
                    ));
                }
            }
            if let Some(c) = re.relative.captures(surface) {
                let amount = small_number(&c[2]).ok_or_else(|| unparseable(surface))?;
                let forward = c[1].eq_ignore_ascii_case("dans");
                let date =
                    shift(reference, amount, &c[3], forward).ok_or_else(|| unparseable(surface))?;
                return Ok(mention(
                    TemporalKind::RelativeDate,
                    SurfaceFormat::Relative,
                    date,
                ));
            }
            if let Some(c) = re.deictic.captures(surface) {
                let offset: i64 = match c[1].to_lowercase().as_str() {
                    "avant-hier" => -2,
                    "hier" => -1,
                    "demain" => 1,
                    "après-demain" => 2,
                    _ => 0,
                };
                let date = reference
                    .checked_add_signed(chrono::Duration::days(offset))
                    .ok_or_else(|| unparseable(surface))?;
                return Ok(mention(
                    TemporalKind::RelativeDate,
                    SurfaceFormat::Relative,
                    date,
                ));
            }
            Err(unparseable(surface))
        }
        _ => Err(unparseable(surface)),
    }
}

/// Renders `date` as `dd/mm/yyyy`.
pub fn render_dmy(date: NaiveDate) -> String {
    format!("{:02}/{:02}/{:04}", date.day(), date.month(), date.year())
}

/// Writes a replacement date (or, for ages, the age it implies) in the
/// mention's original style. Relative expressions become `dd/mm/yyyy`.
pub fn render_temporal(mention: &TemporalMention, date: NaiveDate, reference: NaiveDate) -> String {
    match &mention.format {
        SurfaceFormat::NumericDmy {
            sep,
            pad_day,
            pad_month,
        } => {
            let day = if *pad_day {
                format!("{:02}", date.day())
            } else {
                date.day().to_string()
            };
            let month = if *pad_month {
                format!("{:02}", date.month())
            } else {
                date.month().to_string()
            };
            format!("{day}{sep}{month}{sep}{:04}", date.year())
        }
        SurfaceFormat::DayMonthName { sep, capitalized } => {
            let day = if date.day() == 1 {
                "1er".to_string()
            } else {
                date.day().to_string()
            };
            let mut month = month_name(date.month()).to_string();
            if *capitalized {
                month = capitalize(&month);
            }
            format!("{day}{sep}{month}{sep}{}", date.year())
        }
        SurfaceFormat::Age { prefix, suffix } => {
            format!("{prefix}{}{suffix}", date_to_age(reference, date).max(0))
        }
        SurfaceFormat::MonthYear => format!("{:02}/{:04}", date.month(), date.year()),
        SurfaceFormat::MonthNameYear => format!("{} {}", month_name(date.month()), date.year()),
        SurfaceFormat::Relative => {
            log::debug!("{:?} rendered as dd/mm/yyyy", mention.span.surface);
            render_dmy(date)
        }
    }
}

fn capitalize(s: &str) -> String {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) => c.to_uppercase().chain(chars).collect(),
        None => String::new(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ymd(y: i32, m: u32, d: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(y, m, d).unwrap()
    }

    fn doc(text: &str) -> Document {
        Document::new("t", text, ymd(2020, 1, 10)).unwrap()
    }

    fn detect(text: &str) -> Vec<(Tag, String)> {
        detect_structured(&doc(text), &PatternSet::default())
            .spans()
            .iter()
            .map(|s| (s.tag, s.surface.clone()))
            .collect()
    }

    #[test]
    fn phone() {
        assert_eq!(
            detect("appelez le 03 84 11 22 33"),
            vec![(Tag::Phone, "03 84 11 22 33".into())]
        );
    }

    #[test]
    fn relative_date_vs_frequency() {
        assert_eq!(
            detect("revoir dans 3 jours"),
            vec![(Tag::Date, "dans 3 jours".into())]
        );
        assert!(detect("3 x par jour").is_empty());
    }

    #[test]
    fn relative_past_beats_age() {
        assert_eq!(
            detect("opéré il y a 3 ans"),
            vec![(Tag::Date, "il y a 3 ans".into())]
        );
        assert_eq!(
            detect("patient de 75 ans"),
            vec![(Tag::Age, "75 ans".into())]
        );
    }

    #[test]
    fn mixed_structured_entities() {
        let found = detect(
            "Né le 12/03/1950, vu le 1er avril 2020. Contact jean.dupont@chu.fr, https://chu.fr/x. \
             IPP AB1234567, 90400 Bermont, tél 0384112233.",
        );
        let tags: Vec<Tag> = found.iter().map(|(t, _)| *t).collect();
        assert_eq!(
            tags,
            vec![
                Tag::Date,
                Tag::Date,
                Tag::Email,
                Tag::Url,
                Tag::Id,
                Tag::Loc,
                Tag::Phone
            ]
        );
        assert_eq!(found[3].1, "https://chu.fr/x");
        assert_eq!(found[6].1, "0384112233");
    }

    #[test]
    fn detection_is_deterministic_and_never_o() {
        let text = "RDV 03/2019 puis dans deux semaines, 81 ans, 03 84 11 22 33";
        let a = detect(text);
        assert_eq!(a, detect(text));
        assert!(a.iter().all(|(t, _)| *t != Tag::O));
    }

    #[test]
    fn pattern_file_errors_carry_line_numbers() {
        assert!(matches!(
            PatternSet::parse("DATE\t(unclosed"),
            Err(Error::PatternFile { line: 1, .. })
        ));
        assert!(matches!(
            PatternSet::parse("# c\nFOO\tx"),
            Err(Error::PatternFile { line: 2, .. })
        ));
        assert!(matches!(
            PatternSet::parse("DATE x"),
            Err(Error::PatternFile { line: 1, .. })
        ));
        assert_eq!(PatternSet::parse("# only\n\nID\t\\d+").unwrap().len(), 1);
    }

    fn normalize(text: &str, tag: Tag, reference: NaiveDate) -> Result<TemporalMention> {
        let d = Document::new("t", text, reference).unwrap();
        let span = TaggedSpan::from_document(&d, 0, d.len(), tag, Source::Rule).unwrap();
        normalize_temporal(&d, &span, NormalizeOptions::default())
    }

    #[test]
    fn normalizes_absolute_dates() {
        for reference in [ymd(2020, 1, 10), ymd(1999, 5, 5)] {
            assert_eq!(
                normalize("12/03/2019", Tag::Date, reference)
                    .unwrap()
                    .normalized,
                ymd(2019, 3, 12)
            );
        }
        assert_eq!(
            normalize("1er avril 2020", Tag::Date, ymd(2020, 5, 1))
                .unwrap()
                .normalized,
            ymd(2020, 4, 1)
        );
        assert_eq!(
            normalize("03/2019", Tag::Date, ymd(2020, 5, 1))
                .unwrap()
                .normalized,
            ymd(2019, 3, 15)
        );
        assert_eq!(
            normalize("mars 2019", Tag::Date, ymd(2020, 5, 1))
                .unwrap()
                .normalized,
            ymd(2019, 3, 15)
        );
    }

    #[test]
    fn normalizes_relative_dates() {
        let m = normalize("dans 3 jours", Tag::Date, ymd(2020, 1, 10)).unwrap();
        assert_eq!(m.normalized, ymd(2020, 1, 13));
        assert_eq!(m.kind, TemporalKind::RelativeDate);
        assert_eq!(
            normalize("il y a deux semaines", Tag::Date, ymd(2020, 1, 10))
                .unwrap()
                .normalized,
            ymd(2019, 12, 27)
        );
        assert_eq!(
            normalize("depuis 6 mois", Tag::Date, ymd(2020, 1, 10))
                .unwrap()
                .normalized,
            ymd(2019, 7, 10)
        );
        assert_eq!(
            normalize("hier", Tag::Date, ymd(2020, 1, 10))
                .unwrap()
                .normalized,
            ymd(2020, 1, 9)
        );
    }

    // Independent calendar oracle: walk back one day at a time with the
    // Gregorian leap rule, no chrono arithmetic.
    fn days_back(mut y: i32, mut m: u32, mut d: u32, n: u32) -> (i32, u32, u32) {
        let leap = |y: i32| (y % 4 == 0 && y % 100 != 0) || y % 400 == 0;
        let month_len = |y: i32, m: u32| match m {
            1 | 3 | 5 | 7 | 8 | 10 | 12 => 31,
            4 | 6 | 9 | 11 => 30,
            _ if leap(y) => 29,
            _ => 28,
        };
        for _ in 0..n {
            if d > 1 {
                d -= 1;
            } else if m > 1 {
                m -= 1;
                d = month_len(y, m);
            } else {
                y -= 1;
                m = 12;
                d = 31;
            }
        }
        (y, m, d)
    }

    #[test]
    fn age_to_date_matches_calendar_oracle() {
        assert_eq!((75.0f64 * 365.25).round() as u32, 27394);
        let (y, m, d) = days_back(2020, 1, 1, 27394);
        assert_eq!((y, m, d), (1944, 12, 31));
        let mention = normalize("75 ans", Tag::Age, ymd(2020, 1, 1)).unwrap();
        assert_eq!(mention.normalized, ymd(y, m, d));
        assert_eq!(mention.kind, TemporalKind::Age);
    }

    #[test]
    fn unparseable_temporal() {
        assert!(matches!(
            normalize("le mardi", Tag::Date, ymd(2020, 1, 1)),
            Err(Error::UnparseableTemporal(_))
        ));
        assert!(matches!(
            normalize("31/02/2019", Tag::Date, ymd(2020, 1, 1)),
            Err(Error::UnparseableTemporal(_))
        ));
    }

    #[test]
    fn renders_in_original_style() {
        let m = normalize("1er avril 2020", Tag::Date, ymd(2020, 5, 1)).unwrap();
        assert_eq!(
            render_temporal(&m, ymd(2019, 12, 3), ymd(2020, 5, 1)),
            "3 décembre 2019"
        );
        let m = normalize("5.3.2019", Tag::Date, ymd(2020, 5, 1)).unwrap();
        assert_eq!(
            render_temporal(&m, ymd(2019, 12, 3), ymd(2020, 5, 1)),
            "3.12.2019"
        );
        let m = normalize("dans 3 jours", Tag::Date, ymd(2020, 5, 1)).unwrap();
        assert_eq!(
            render_temporal(&m, ymd(2019, 12, 3), ymd(2020, 5, 1)),
            "03/12/2019"
        );
        let m = normalize("75 ans", Tag::Age, ymd(2020, 1, 1)).unwrap();
        assert_eq!(render_temporal(&m, m.normalized, ymd(2020, 1, 1)), "75 ans");
    }

    proptest::proptest! {
        #[test]
        fn dmy_render_round_trips(days in 0i64..60_000) {
            let date = ymd(1900, 1, 1) + chrono::Duration::days(days);
            let m = normalize("01/01/2000", Tag::Date, ymd(2090, 1, 1)).unwrap();
            let text = render_temporal(&m, date, ymd(2090, 1, 1));
            proptest::prop_assert_eq!(normalize(&text, Tag::Date, ymd(2090, 1, 1)).unwrap().normalized, date);
        }
    }
}
