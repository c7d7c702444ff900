// Copyright 2026 The deid Authors
// SPDX-License-Identifier: Apache-2.0

//! Corpus-level runs: detection, merging, de-identification, scoring and the
//! fingerprint attack, over directories of `*.txt` notes.
//!
//! A note `x.txt` may have a sidecar `x.meta.json` holding a flat object of
//! strings; its `reference_date` (`YYYY-MM-DD`) is the date the note was
//! written. Without a sidecar the config's `reference_date` is used.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dates::{
    build_chronology, rewrite_mentions, sanitize_dates, CategoryAmplitudes, TemporalSequence,
};
use crate::error::{Error, Result};
use crate::eval::{
    micro_average, score, uniqueness_attack, AttackReport, ConfusionCounts, Matching, MetricsReport,
};
use crate::ingest::{ingest_record, ExternalAnnotationFile, IngestOptions};
use crate::ldp::{LedgerEntry, PrivacyBudget, SplitPolicy};
use crate::location::{analyze, fallback_city, perturb, render_location, Gazetteer, LocationMemo};
use crate::merge::{merge, Conflict};
use crate::model::{AnnotationSet, Document, StandoffDocument, Tag, TaggedSpan};
use crate::rng::document_rng;
use crate::rules::{
    detect_structured, normalize_temporal, NormalizeOptions, PatternSet, TemporalMention,
};
use crate::surrogates::{
    randomize_digits, substitute_formatted, substitute_name, NameLookupTable, NamePools,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamePoolPaths {
    pub male: PathBuf,
    pub female: PathBuf,
    pub unisex: PathBuf,
    pub family: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub epsilon_total: f64,
    pub split_policy: SplitPolicy,
    pub amplitudes: CategoryAmplitudes,
    /// Shipped data is used for any resource left unset.
    pub gazetteer: Option<PathBuf>,
    pub patterns: Option<PathBuf>,
    pub name_pools: Option<NamePoolPaths>,
    pub seed: Option<u64>,
    /// Fallback for notes without a sidecar.
    pub reference_date: Option<NaiveDate>,
    /// Put ages in the chronology. When off their digits are randomized.
    pub include_ages: bool,
    /// Replace gazetteer cities named inside ORG spans.
    pub substitute_org: bool,
    pub month_precision_day: u32,
    pub matching: Matching,
    /// Where to write original/surrogate pairs. Off unless set.
    pub audit_map: Option<PathBuf>,
    pub workers: Option<usize>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            epsilon_total: 1.0,
            split_policy: SplitPolicy::FixedQuarters,
            amplitudes: CategoryAmplitudes::default(),
            gazetteer: None,
            patterns: None,
            name_pools: None,
            seed: None,
            reference_date: None,
            include_ages: true,
            substitute_org: true,
            month_precision_day: 15,
            matching: Matching::ExactSpan,
            audit_map: None,
            workers: None,
        }
    }
}

impl PipelineConfig {
    /// Reads a `.json` file as JSON and anything else as TOML.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let source = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: PipelineConfig = if path.extension().is_some_and(|e| e == "json") {
            serde_json::from_str(&source)
                .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
        } else {
            toml::from_str(&source)
                .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon_total > 0.0 && self.epsilon_total.is_finite()) {
            return Err(Error::Config(format!(
                "epsilon_total must be positive and finite, got {}",
                self.epsilon_total
            )));
        }
        PrivacyBudget::new(self.epsilon_total, self.split_policy.clone())
            .map_err(|e| Error::Config(e.to_string()))?;
        self.amplitudes.validate()?;
        if !(1..=28).contains(&self.month_precision_day) {
            return Err(Error::Config(
                "month_precision_day must be in 1..=28".into(),
            ));
        }
        if self.workers == Some(0) {
            return Err(Error::Config("workers must be at least 1".into()));
        }
        Ok(())
    }

    fn normalize_options(&self) -> NormalizeOptions {
        NormalizeOptions {
            month_precision_day: self.month_precision_day,
        }
    }
}

/// Immutable data shared by every document of a run.
#[derive(Debug, Clone, Default)]
pub struct Resources {
    pub patterns: PatternSet,
    pub gazetteer: Gazetteer,
    pub pools: NamePools,
}

impl Resources {
    pub fn load(cfg: &PipelineConfig) -> Result<Self> {
        let patterns = match &cfg.patterns {
            Some(p) => PatternSet::load(p)?,
            None => PatternSet::default(),
        };
        let gazetteer = match &cfg.gazetteer {
            Some(p) => Gazetteer::load(p)?,
            None => Gazetteer::default(),
        };
        let pools = match &cfg.name_pools {
            Some(p) => NamePools::load(&p.male, &p.female, &p.unisex, &p.family)?,
            None => NamePools::default(),
        };
        Ok(Resources {
            patterns,
            gazetteer,
            pools,
        })
    }
}

/// One replaced span.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Replacement {
    pub doc_id: String,
    pub start: usize,
    pub end: usize,
    pub tag: Tag,
    pub original: String,
    pub surrogate: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocumentLedger {
    pub doc_id: String,
    pub epsilon_total: f64,
    pub spent: f64,
    pub entries: Vec<LedgerEntry>,
}

#[derive(Debug, Clone)]
pub struct DeidDocument {
    pub doc_id: String,
    pub text: String,
    pub replacements: Vec<Replacement>,
    pub ledger: DocumentLedger,
    pub conflicts: Vec<Conflict>,
}

/// External spans for `doc`, or an empty set when the file has no record
/// for it.
pub fn external_set(
    doc: &Document,
    file: Option<&ExternalAnnotationFile>,
) -> Result<AnnotationSet> {
    match file.and_then(|f| f.record(doc.id())) {
        Some(record) => {
            let outcome = ingest_record(doc, record, &IngestOptions::default())?;
            for d in &outcome.dropped {
                log::debug!(
                    "{}: dropped external {} span [{}, {})",
                    doc.id(),
                    d.tag,
                    d.start,
                    d.end
                );
            }
            Ok(outcome.set)
        }
        None => {
            if file.is_some() {
                log::warn!("{}: no external annotations", doc.id());
            }
            Ok(AnnotationSet::empty(doc.id()))
        }
    }
}

/// Splits DATE/AGE spans into mentions that resolve to a date and spans that
/// do not.
pub fn temporal_mentions<'a>(
    doc: &Document,
    spans: impl IntoIterator<Item = &'a TaggedSpan>,
    cfg: &PipelineConfig,
) -> (Vec<TemporalMention>, Vec<&'a TaggedSpan>) {
    let mut mentions = Vec::new();
    let mut rest = Vec::new();
    for span in spans {
        let wanted = span.tag == Tag::Date || (span.tag == Tag::Age && cfg.include_ages);
        if !wanted {
            if span.tag == Tag::Age {
                rest.push(span);
            }
            continue;
        }
        match normalize_temporal(doc, span, cfg.normalize_options()) {
            Ok(m) => mentions.push(m),
            Err(e) => {
                log::warn!("{}: {e}; digits will be randomized", doc.id());
                rest.push(span);
            }
        }
    }
    (mentions, rest)
}

/// De-identifies one document: detect, merge with the external spans,
/// then replace every merged span.
pub fn deidentify<R: Rng + ?Sized>(
    doc: &Document,
    external: &AnnotationSet,
    res: &Resources,
    cfg: &PipelineConfig,
    rng: &mut R,
) -> Result<DeidDocument> {
    let rule = detect_structured(doc, &res.patterns);
    let merged = merge(doc, &rule, external)?;
    let spans = merged.set.spans();
    let gaz = &res.gazetteer;

    let (mentions, unresolved_temporal) = temporal_mentions(doc, spans, cfg);
    let loc_forms: Vec<_> = spans
        .iter()
        .filter(|s| s.tag == Tag::Loc)
        .map(|s| (s, analyze(gaz, &s.surface)))
        .collect();
    let org_cities: Vec<_> = if cfg.substitute_org {
        spans
            .iter()
            .filter(|s| s.tag == Tag::Org)
            .map(|s| (s, gaz.find_embedded(&s.surface)))
            .collect()
    } else {
        Vec::new()
    };

    let mut budget = PrivacyBudget::new(cfg.epsilon_total, cfg.split_policy.clone())?
        .with_occurrences(
            mentions.len(),
            loc_forms.len() + org_cities.iter().map(|(_, c)| c.len()).sum::<usize>(),
        );
    let mut out: BTreeMap<usize, (usize, Tag, String)> = BTreeMap::new();

    if !mentions.is_empty() {
        let chronology = build_chronology(&mentions, doc.reference_date())?;
        if chronology.len() > 1 {
            let sanitized = sanitize_dates(&chronology, &mut budget, &cfg.amplitudes, rng)?;
            for (m, text) in mentions.iter().zip(rewrite_mentions(&mentions, &sanitized)) {
                out.insert(m.span.start, (m.span.end, m.span.tag, text));
            }
        }
    }
    for span in unresolved_temporal {
        out.insert(
            span.start,
            (span.end, span.tag, randomize_digits(&span.surface, rng)),
        );
    }

    // one location draw per distinct city
    let cities: BTreeSet<_> = loc_forms
        .iter()
        .filter_map(|(_, f)| f.city())
        .chain(org_cities.iter().flat_map(|(_, c)| c.iter().map(|x| x.2)))
        .collect();
    let share = if cities.is_empty() {
        0.0
    } else {
        budget.allocate(Tag::Loc, cities.len())?[0]
    };
    let mut memo = LocationMemo::default();
    for (span, form) in &loc_forms {
        let surrogate = match form.city() {
            Some(z) => perturb(gaz, z, share, &mut memo, rng)?,
            None => fallback_city(gaz, &span.surface, &mut memo, rng),
        };
        out.insert(
            span.start,
            (
                span.end,
                Tag::Loc,
                render_location(gaz, *form, &span.surface, surrogate),
            ),
        );
    }
    for (span, found) in &org_cities {
        if found.is_empty() {
            continue;
        }
        let chars: Vec<char> = span.surface.chars().collect();
        let mut text = String::new();
        let mut at = 0;
        for &(s, e, z) in found {
            let y = perturb(gaz, z, share, &mut memo, rng)?;
            text.extend(&chars[at..s]);
            text.push_str(&gaz.city(y).name);
            at = e;
        }
        text.extend(&chars[at..]);
        out.insert(span.start, (span.end, Tag::Org, text));
    }

    let mut names = NameLookupTable::default();
    for span in spans {
        let text = match span.tag {
            Tag::Per => substitute_name(&mut names, &res.pools, &span.surface, rng),
            Tag::Phone | Tag::Email | Tag::Url | Tag::Id => substitute_formatted(span, rng),
            Tag::Org if !out.contains_key(&span.start) => {
                log::warn!("{}: ORG {:?} kept", doc.id(), span.surface);
                continue;
            }
            Tag::Misc => {
                log::warn!("{}: MISC {:?} kept", doc.id(), span.surface);
                continue;
            }
            _ => continue,
        };
        out.insert(span.start, (span.end, span.tag, text));
    }

    let mut text = String::with_capacity(doc.text().len());
    let mut replacements = Vec::with_capacity(out.len());
    let mut at = 0;
    for (start, (end, tag, surrogate)) in out {
        text.push_str(doc.slice(at, start));
        text.push_str(&surrogate);
        at = end;
        replacements.push(Replacement {
            doc_id: doc.id().to_string(),
            start,
            end,
            tag,
            original: doc.slice(start, end).to_string(),
            surrogate,
        });
    }
    text.push_str(doc.slice(at, doc.len()));

    Ok(DeidDocument {
        doc_id: doc.id().to_string(),
        text,
        replacements,
        ledger: DocumentLedger {
            doc_id: doc.id().to_string(),
            epsilon_total: budget.epsilon_total(),
            spent: budget.spent(),
            entries: budget.ledger().to_vec(),
        },
        conflicts: merged.conflicts,
    })
}

/// A note found in an input directory. `doc` is an error when the note
/// could not be read.
#[derive(Debug)]
pub struct CorpusEntry {
    pub stem: String,
    pub path: PathBuf,
    pub doc: Result<Document>,
}

fn read_sidecar(path: &Path) -> Result<BTreeMap<String, String>> {
    let source = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&source)?)
}

fn read_document(
    path: &Path,
    stem: &str,
    cfg: &PipelineConfig,
    require_reference: bool,
) -> Result<Document> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let text = String::from_utf8(bytes).map_err(|e| {
        Error::io(
            path,
            std::io::Error::new(std::io::ErrorKind::InvalidData, e),
        )
    })?;
    let sidecar = path.with_file_name(format!("{stem}.meta.json"));
    let metadata = if sidecar.exists() {
        read_sidecar(&sidecar)?
    } else {
        BTreeMap::new()
    };
    let reference = match metadata.get("reference_date") {
        Some(s) => NaiveDate::parse_from_str(s, "%Y-%m-%d").map_err(|e| {
            Error::InvalidParameter(format!("{}: reference_date {s:?}: {e}", sidecar.display()))
        })?,
        None => match (cfg.reference_date, require_reference) {
            (Some(d), _) => d,
            (None, false) => NaiveDate::default(),
            (None, true) => {
                return Err(Error::Config(format!(
                    "{stem}: no reference date in sidecar or config"
                )))
            }
        },
    };
    Ok(Document::new(stem, text, reference)?.with_metadata(metadata))
}

/// Every `*.txt` under `dir` (not recursive), sorted by file name.
pub fn read_corpus(
    dir: &Path,
    cfg: &PipelineConfig,
    require_reference: bool,
) -> Result<Vec<CorpusEntry>> {
    let mut paths = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.is_file() && path.extension().is_some_and(|e| e == "txt") {
            paths.push(path);
        }
    }
    paths.sort();
    Ok(paths
        .into_iter()
        .map(|path| {
            let stem = path
                .file_stem()
                .unwrap_or_default()
                .to_string_lossy()
                .into_owned();
            let doc = read_document(&path, &stem, cfg, require_reference);
            CorpusEntry { stem, path, doc }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DocumentFailure {
    pub doc_id: String,
    pub error: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct RunSummary {
    pub processed: usize,
    pub failures: Vec<DocumentFailure>,
}

impl RunSummary {
    fn collect(results: Vec<(String, Result<()>)>) -> Self {
        let mut summary = RunSummary::default();
        for (doc_id, r) in results {
            match r {
                Ok(()) => summary.processed += 1,
                Err(e) => {
                    log::error!("{doc_id}: {e}");
                    summary.failures.push(DocumentFailure {
                        doc_id,
                        error: e.to_string(),
                    });
                }
            }
        }
        summary
    }

    pub fn exit_code(&self) -> i32 {
        if self.failures.is_empty() {
            0
        } else {
            1
        }
    }
}

fn pool(cfg: &PipelineConfig) -> Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cfg.workers {
        b = b.num_threads(n);
    }
    b.build().map_err(|e| Error::Config(e.to_string()))
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write(path: &Path, contents: &[u8]) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    write(path, s.as_bytes())
}

/// Rule detection only; writes `<out>/<stem>.json`.
pub fn run_detect(
    input: &Path,
    output: &Path,
    cfg: &PipelineConfig,
    res: &Resources,
) -> Result<RunSummary> {
    let corpus = read_corpus(input, cfg, false)?;
    create_dir(output)?;
    let results = pool(cfg)?.install(|| {
        corpus
            .par_iter()
            .map(|e| {
                let r = e.doc.as_ref().map_err(clone_err).and_then(|doc| {
                    let set = detect_structured(doc, &res.patterns);
                    write_json(&output.join(format!("{}.json", e.stem)), &set.to_standoff())
                });
                (e.stem.clone(), r)
            })
            .collect()
    });
    Ok(RunSummary::collect(results))
}

// Errors are not Clone; per-document reporting only needs the message.
fn clone_err(e: &Error) -> Error {
    Error::Unreadable(e.to_string())
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct IngestCheckReport {
    /// Kept and dropped span counts per document.
    pub documents: BTreeMap<String, (usize, usize)>,
    pub missing: Vec<String>,
    pub unknown: Vec<String>,
}

/// Validates an external annotation file against a corpus.
pub fn run_ingest_check(
    input: &Path,
    external: &Path,
    cfg: &PipelineConfig,
) -> Result<(IngestCheckReport, RunSummary)> {
    let corpus = read_corpus(input, cfg, false)?;
    let file = ExternalAnnotationFile::load(external)?;
    let known: BTreeSet<&str> = corpus.iter().map(|e| e.stem.as_str()).collect();
    let mut report = IngestCheckReport {
        unknown: file
            .doc_ids()
            .filter(|d| !known.contains(d))
            .map(String::from)
            .collect(),
        ..Default::default()
    };
    let mut results = Vec::new();
    for e in &corpus {
        let r = e
            .doc
            .as_ref()
            .map_err(clone_err)
            .and_then(|doc| match file.record(doc.id()) {
                Some(record) => {
                    let o = ingest_record(doc, record, &IngestOptions::default())?;
                    report
                        .documents
                        .insert(e.stem.clone(), (o.set.len(), o.dropped.len()));
                    Ok(())
                }
                None => {
                    report.missing.push(e.stem.clone());
                    Ok(())
                }
            });
        results.push((e.stem.clone(), r));
    }
    for u in &report.unknown {
        results.push((u.clone(), Err(Error::UnknownDocument(u.clone()))));
    }
    Ok((report, RunSummary::collect(results)))
}

/// Detection merged with external spans; writes `<out>/<stem>.json` and
/// `<out>/conflicts.jsonl`.
pub fn run_merge(
    input: &Path,
    external: Option<&Path>,
    output: &Path,
    cfg: &PipelineConfig,
    res: &Resources,
) -> Result<RunSummary> {
    let corpus = read_corpus(input, cfg, false)?;
    let file = external.map(ExternalAnnotationFile::load).transpose()?;
    create_dir(output)?;
    let results: Vec<(String, Result<Vec<Conflict>>)> = pool(cfg)?.install(|| {
        corpus
            .par_iter()
            .map(|e| {
                let r = e.doc.as_ref().map_err(clone_err).and_then(|doc| {
                    let ext = external_set(doc, file.as_ref())?;
                    let merged = merge(doc, &detect_structured(doc, &res.patterns), &ext)?;
                    write_json(
                        &output.join(format!("{}.json", e.stem)),
                        &merged.set.to_standoff(),
                    )?;
                    Ok(merged.conflicts)
                });
                (e.stem.clone(), r)
            })
            .collect()
    });
    let mut log = String::new();
    let mut plain = Vec::with_capacity(results.len());
    for (id, r) in results {
        plain.push((
            id,
            r.map(|conflicts| {
                for c in conflicts {
                    log.push_str(&serde_json::to_string(&c).expect("conflict serializes"));
                    log.push('\n');
                }
            }),
        ));
    }
    write(&output.join("conflicts.jsonl"), log.as_bytes())?;
    Ok(RunSummary::collect(plain))
}

fn write_audit_map(path: &Path, replacements: &[Replacement]) -> Result<()> {
    let mut opts = fs::OpenOptions::new();
    opts.write(true).create(true).truncate(true);
    #[cfg(unix)]
    {
        use std::os::unix::fs::OpenOptionsExt;
        opts.mode(0o600);
    }
    let mut f = opts.open(path).map_err(|e| Error::io(path, e))?;
    #[cfg(unix)]
    {
        use std::os::unix::fs::PermissionsExt;
        f.set_permissions(fs::Permissions::from_mode(0o600))
            .map_err(|e| Error::io(path, e))?;
    }
    for r in replacements {
        let line = serde_json::to_string(r)?;
        writeln!(f, "{line}").map_err(|e| Error::io(path, e))?;
    }
    Ok(())
}

/// Full de-identification. Writes `<out>/<stem>.txt` and
/// `<out>/<stem>.ledger.json`, plus the audit map when configured.
pub fn run_deid(
    input: &Path,
    external: Option<&Path>,
    output: &Path,
    cfg: &PipelineConfig,
    res: &Resources,
) -> Result<RunSummary> {
    let corpus = read_corpus(input, cfg, true)?;
    let file = external.map(ExternalAnnotationFile::load).transpose()?;
    if let Some(audit) = &cfg.audit_map {
        if audit.parent().is_some_and(|p| p.starts_with(output)) {
            log::warn!(
                "audit map {} is inside the output directory",
                audit.display()
            );
        }
    }
    create_dir(output)?;
    let results: Vec<(String, Result<Vec<Replacement>>)> = pool(cfg)?.install(|| {
        corpus
            .par_iter()
            .map(|e| {
                let r = e.doc.as_ref().map_err(clone_err).and_then(|doc| {
                    let ext = external_set(doc, file.as_ref())?;
                    let mut rng = document_rng(cfg.seed, doc.id());
                    let out = deidentify(doc, &ext, res, cfg, &mut rng)?;
                    write(&output.join(format!("{}.txt", e.stem)), out.text.as_bytes())?;
                    write_json(&output.join(format!("{}.ledger.json", e.stem)), &out.ledger)?;
                    Ok(out.replacements)
                });
                (e.stem.clone(), r)
            })
            .collect()
    });
    let mut audit = Vec::new();
    let mut plain = Vec::with_capacity(results.len());
    for (id, r) in results {
        plain.push((id, r.map(|reps| audit.extend(reps))));
    }
    if let Some(path) = &cfg.audit_map {
        write_audit_map(path, &audit)?;
    }
    Ok(RunSummary::collect(plain))
}

fn read_standoff_dir(dir: &Path) -> Result<BTreeMap<String, StandoffDocument>> {
    let mut out = BTreeMap::new();
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.extension().is_some_and(|e| e == "json")
                && !p.to_string_lossy().ends_with(".ledger.json")
        })
        .collect();
    paths.sort();
    for path in paths {
        let file = ExternalAnnotationFile::load(&path)?;
        for id in file.doc_ids() {
            out.insert(id.to_string(), file.record(id).expect("listed id").clone());
        }
    }
    Ok(out)
}

/// Scores a directory of predicted standoff files against gold ones. A gold
/// document without prediction counts as an empty prediction; a prediction
/// without gold is a failure.
pub fn run_eval(
    gold: &Path,
    predicted: &Path,
    cfg: &PipelineConfig,
) -> Result<(MetricsReport, RunSummary)> {
    let gold = read_standoff_dir(gold)?;
    let predicted = read_standoff_dir(predicted)?;
    let mut results = Vec::new();
    let mut counts: Vec<ConfusionCounts> = Vec::new();
    for (id, g) in &gold {
        let r = AnnotationSet::from_standoff(g).and_then(|g| {
            let p = match predicted.get(id) {
                Some(p) => AnnotationSet::from_standoff(p)?,
                None => AnnotationSet::empty(id.clone()),
            };
            counts.push(score(&g, &p, cfg.matching)?);
            Ok(())
        });
        results.push((id.clone(), r));
    }
    for id in predicted.keys().filter(|id| !gold.contains_key(*id)) {
        results.push((
            id.clone(),
            Err(Error::UnknownDocument(format!(
                "{id} has no gold annotations"
            ))),
        ));
    }
    let total = counts
        .into_par_iter()
        .reduce(ConfusionCounts::default, |a, b| a + b);
    Ok((micro_average(&total), RunSummary::collect(results)))
}

/// The rule-detected chronology of every readable note.
pub fn corpus_chronologies(
    input: &Path,
    cfg: &PipelineConfig,
    res: &Resources,
) -> Result<(Vec<TemporalSequence>, RunSummary)> {
    let corpus = read_corpus(input, cfg, true)?;
    let results: Vec<(String, Result<TemporalSequence>)> = pool(cfg)?.install(|| {
        corpus
            .par_iter()
            .map(|e| {
                let r = e.doc.as_ref().map_err(clone_err).and_then(|doc| {
                    let set = detect_structured(doc, &res.patterns);
                    let (mentions, _) = temporal_mentions(doc, set.spans(), cfg);
                    if mentions.is_empty() {
                        TemporalSequence::from_dates(vec![doc.reference_date()])
                    } else {
                        build_chronology(&mentions, doc.reference_date())
                    }
                });
                (e.stem.clone(), r)
            })
            .collect()
    });
    let mut seqs = Vec::new();
    let mut plain = Vec::new();
    for (id, r) in results {
        plain.push((id, r.map(|s| seqs.push(s))));
    }
    Ok((seqs, RunSummary::collect(plain)))
}

/// Uniqueness of interval fingerprints over a corpus.
pub fn run_attack(
    input: &Path,
    cfg: &PipelineConfig,
    res: &Resources,
) -> Result<(AttackReport, RunSummary)> {
    let (seqs, summary) = corpus_chronologies(input, cfg, res)?;
    Ok((uniqueness_attack(&seqs), summary))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn doc(text: &str) -> Document {
        Document::new("d", text, NaiveDate::from_ymd_opt(2020, 1, 10).unwrap()).unwrap()
    }

    fn run(d: &Document, ext: &AnnotationSet) -> DeidDocument {
        deidentify(
            d,
            ext,
            &Resources::default(),
            &PipelineConfig::default(),
            &mut ChaCha20Rng::seed_from_u64(3),
        )
        .unwrap()
    }

    #[test]
    fn no_phi_is_a_no_op() {
        let d = doc("Patient en bonne santé, rien à signaler.");
        let out = run(&d, &AnnotationSet::empty("d"));
        assert_eq!(out.text, d.text());
        assert!(out.replacements.is_empty());
        assert_eq!(out.ledger.spent, 0.0);
    }

    #[test]
    fn formatted_spans_are_replaced() {
        let d = doc("Tel 03 84 11 22 33, mail jean.dupont@chu.fr, vu le 02/01/2020.");
        let out = run(&d, &AnnotationSet::empty("d"));
        assert!(!out.text.contains("03 84 11 22 33"));
        assert!(!out.text.contains("jean.dupont"));
        assert_eq!(out.replacements.len(), 3);
        assert!(out.ledger.spent <= 1.0);
    }

    #[test]
    fn config_round_trips_and_validates() {
        let cfg: PipelineConfig = toml::from_str(
            "epsilon_total = 2.0\nseed = 5\nreference_date = \"2020-01-10\"\n[split_policy.custom]\ndate_age = 0.5\nlocation = 0.5\n",
        )
        .unwrap();
        cfg.validate().unwrap();
        assert_eq!(cfg.seed, Some(5));
        assert!(matches!(cfg.split_policy, SplitPolicy::Custom(_)));
        let bad = PipelineConfig {
            epsilon_total: 0.0,
            ..Default::default()
        };
        assert!(matches!(bad.validate(), Err(Error::Config(_))));
        assert!(toml::from_str::<PipelineConfig>("epsilon = 1.0").is_err());
    }
}
