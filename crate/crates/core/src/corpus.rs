//! Word-association corpus handling: ingestion of raw association records,
//! respondent filtering, aggregation into frequency tables, and deterministic
//! by-cue train/valid/test splits.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("file {0} is empty")]
    EmptyFile(String),
    #[error("missing required column(s) {missing:?} in header of {path}")]
    MissingColumns { path: String, missing: Vec<String> },
    #[error("no records to aggregate")]
    NoRecords,
    #[error("split ratios {0:?} do not sum to 1")]
    InvalidRatios([f64; 3]),
    #[error("cannot split {n} cue(s) into 3 partitions")]
    TooFewCues { n: usize },
    #[error("unknown cue '{0}'")]
    UnknownCue(String),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

/// Which of the participant's free associations a record came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ResponsePosition {
    R1,
    R2,
    R3,
    Unknown,
}

impl ResponsePosition {
    fn parse(s: &str) -> Self {
        match s.trim().to_ascii_uppercase().as_str() {
            "R1" | "1" => ResponsePosition::R1,
            "R2" | "2" => ResponsePosition::R2,
            "R3" | "3" => ResponsePosition::R3,
            _ => ResponsePosition::Unknown,
        }
    }
}

/// One (participant, cue, response) observation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AssociationRecord {
    pub cue: String,
    pub response: String,
    pub participant_id: Option<String>,
    pub country: Option<String>,
    pub native_language: Option<String>,
    pub position: ResponsePosition,
}

/// Respondent metadata filter. Empty criteria match everything.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FilterSpec {
    pub country: Option<String>,
    pub native_language: Option<String>,
}

impl FilterSpec {
    pub fn is_identity(&self) -> bool {
        fn empty(v: &Option<String>) -> bool {
            v.as_deref().map(|s| s.trim().is_empty()).unwrap_or(true)
        }
        empty(&self.country) && empty(&self.native_language)
    }
}

/// Input file layout for [`ingest`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CorpusFormat {
    /// One row per (participant, cue, response): participantId, cue,
    /// response, country, nativeLanguage, responsePosition.
    Long,
    /// One row per (cue, response) with a count column.
    Aggregated,
}

impl std::str::FromStr for CorpusFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "long" | "longtsv" => Ok(CorpusFormat::Long),
            "aggregated" | "aggregatedtsv" => Ok(CorpusFormat::Aggregated),
            other => Err(format!("unknown corpus format '{other}'")),
        }
    }
}

/// A malformed input row, reported but not fatal.
#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct RowError {
    pub line: usize,
    pub message: String,
}

/// Aggregated rows expand into this many records at most; anything larger
/// is treated as a malformed row.
pub const MAX_AGGREGATED_COUNT: u64 = 1_000_000;

/// Result of ingesting a corpus file.
#[derive(Debug)]
pub struct IngestOutcome {
    pub records: Vec<AssociationRecord>,
    pub row_errors: Vec<RowError>,
    /// Rows skipped because cue or response was empty after trimming.
    pub skipped_empty: usize,
}

fn header_index(header: &[&str], names: &[&str]) -> Option<usize> {
    header.iter().position(|h| {
        let h = h.trim().to_ascii_lowercase().replace(['_', ' ', '-'], "");
        names.iter().any(|n| h == *n)
    })
}

fn non_empty(field: &str) -> Option<String> {
    let t = field.trim();
    if t.is_empty() {
        None
    } else {
        Some(t.to_string())
    }
}

/// Read association records from a UTF-8 TSV file with a header row.
///
/// Malformed rows are collected as [`RowError`]s; rows with an empty cue or
/// response are skipped and counted. Aggregated rows expand into `count`
/// logical records with no participant metadata.
pub fn ingest(path: &Path, format: CorpusFormat) -> Result<IngestOutcome, CorpusError> {
    let text = fs::read_to_string(path)?;
    let display = path.display().to_string();
    let mut lines = text.lines().enumerate();

    let (_, header_line) = lines
        .by_ref()
        .find(|(_, l)| !l.trim().is_empty())
        .ok_or_else(|| CorpusError::EmptyFile(display.clone()))?;
    let header: Vec<&str> = header_line.split('\t').collect();

    let cue_idx = header_index(&header, &["cue"]);
    let resp_idx = header_index(&header, &["response", "r"]);
    let mut missing = Vec::new();
    if cue_idx.is_none() {
        missing.push("cue".to_string());
    }
    if resp_idx.is_none() {
        missing.push("response".to_string());
    }

    let count_idx = header_index(&header, &["count", "n"]);
    if format == CorpusFormat::Aggregated && count_idx.is_none() {
        missing.push("count".to_string());
    }
    if !missing.is_empty() {
        return Err(CorpusError::MissingColumns {
            path: display,
            missing,
        });
    }
    let (cue_idx, resp_idx) = (cue_idx.unwrap(), resp_idx.unwrap());

    let participant_idx = header_index(&header, &["participantid", "participant", "id"]);
    let country_idx = header_index(&header, &["country"]);
    let language_idx = header_index(&header, &["nativelanguage", "language"]);
    let position_idx = header_index(&header, &["responseposition", "position"]);

    let mut records = Vec::new();
    let mut row_errors = Vec::new();
    let mut skipped_empty = 0usize;

    let max_idx = match format {
        CorpusFormat::Long => [
            Some(cue_idx),
            Some(resp_idx),
            participant_idx,
            country_idx,
            language_idx,
            position_idx,
        ]
        .iter()
        .flatten()
        .copied()
        .max()
        .unwrap(),
        CorpusFormat::Aggregated => cue_idx.max(resp_idx).max(count_idx.unwrap()),
    };

    for (lineno, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() <= max_idx {
            row_errors.push(RowError {
                line: lineno + 1,
                message: format!(
                    "expected at least {} tab-separated columns, found {}",
                    max_idx + 1,
                    fields.len()
                ),
            });
            continue;
        }
        let cue = fields[cue_idx].trim();
        let response = fields[resp_idx].trim();
        if cue.is_empty() || response.is_empty() {
            skipped_empty += 1;
            continue;
        }
        match format {
            CorpusFormat::Long => records.push(AssociationRecord {
                cue: cue.to_string(),
                response: response.to_string(),
                participant_id: participant_idx.and_then(|i| non_empty(fields[i])),
                country: country_idx.and_then(|i| non_empty(fields[i])),
                native_language: language_idx.and_then(|i| non_empty(fields[i])),
                position: position_idx
                    .map(|i| ResponsePosition::parse(fields[i]))
                    .unwrap_or(ResponsePosition::Unknown),
            }),
            CorpusFormat::Aggregated => {
                let count: u64 = match fields[count_idx.unwrap()].trim().parse() {
                    Ok(c) if c > MAX_AGGREGATED_COUNT => {
                        row_errors.push(RowError {
                            line: lineno + 1,
                            message: format!(
                                "count {c} exceeds the per-row limit of {MAX_AGGREGATED_COUNT}"
                            ),
                        });
                        continue;
                    }
                    Ok(c) if c > 0 => c,
                    Ok(_) => {
                        row_errors.push(RowError {
                            line: lineno + 1,
                            message: "count must be a positive integer".to_string(),
                        });
                        continue;
                    }
                    Err(_) => {
                        row_errors.push(RowError {
                            line: lineno + 1,
                            message: format!(
                                "invalid count '{}'",
                                fields[count_idx.unwrap()].trim()
                            ),
                        });
                        continue;
                    }
                };
                for _ in 0..count {
                    records.push(AssociationRecord {
                        cue: cue.to_string(),
                        response: response.to_string(),
                        participant_id: None,
                        country: None,
                        native_language: None,
                        position: ResponsePosition::Unknown,
                    });
                }
            }
        }
    }

    Ok(IngestOutcome {
        records,
        row_errors,
        skipped_empty,
    })
}

/// Result of applying a [`FilterSpec`].
#[derive(Debug)]
pub struct FilterOutcome {
    pub records: Vec<AssociationRecord>,
    /// Records dropped because a required metadata field was absent.
    pub dropped_missing: usize,
}

/// Keep records whose metadata matches every non-empty criterion
/// (case-insensitive, trimmed). Records missing a required field are dropped
/// and counted separately.
pub fn filter_records(records: Vec<AssociationRecord>, spec: &FilterSpec) -> FilterOutcome {
    if spec.is_identity() {
        return FilterOutcome {
            records,
            dropped_missing: 0,
        };
    }
    let fold = |s: &str| s.trim().to_lowercase();
    let wanted_country = spec.country.as_deref().map(fold).filter(|s| !s.is_empty());
    let wanted_language = spec
        .native_language
        .as_deref()
        .map(fold)
        .filter(|s| !s.is_empty());

    let mut dropped_missing = 0usize;
    let records = records
        .into_iter()
        .filter(|r| {
            for (wanted, actual) in [
                (wanted_country.as_deref(), r.country.as_deref()),
                (wanted_language.as_deref(), r.native_language.as_deref()),
            ] {
                let Some(want) = wanted else { continue };
                match actual {
                    None => {
                        dropped_missing += 1;
                        return false;
                    }
                    Some(have) if fold(have) != want => return false,
                    Some(_) => {}
                }
            }
            true
        })
        .collect();
    FilterOutcome {
        records,
        dropped_missing,
    }
}

/// Normative frequency table: cue -> responses ordered by count descending,
/// ties broken by ascending response string.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct AssociationTable {
    entries: BTreeMap<String, Vec<(String, u64)>>,
    totals: BTreeMap<String, u64>,
}

impl AssociationTable {
    pub fn cues(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn cue_count(&self) -> usize {
        self.entries.len()
    }

    pub fn contains_cue(&self, cue: &str) -> bool {
        self.entries.contains_key(cue)
    }

    /// Frequency-ordered (response, count) pairs for a cue.
    pub fn responses(&self, cue: &str) -> Option<&[(String, u64)]> {
        self.entries.get(cue).map(Vec::as_slice)
    }

    pub fn total(&self, cue: &str) -> Option<u64> {
        self.totals.get(cue).copied()
    }

    /// First `min(k, available)` responses in table order.
    pub fn top_k(&self, cue: &str, k: usize) -> Result<Vec<String>, CorpusError> {
        let list = self
            .entries
            .get(cue)
            .ok_or_else(|| CorpusError::UnknownCue(cue.to_string()))?;
        Ok(list.iter().take(k).map(|(word, _)| word.clone()).collect())
    }

    /// All distinct response words plus cue words.
    pub fn vocabulary(&self) -> BTreeSet<String> {
        let mut vocab: BTreeSet<String> = self
            .entries
            .values()
            .flat_map(|list| list.iter().map(|(w, _)| w.clone()))
            .collect();
        vocab.extend(self.entries.keys().cloned());
        vocab
    }
}

/// Count responses per cue. Responses are trimmed and case-folded before
/// counting; cues are trimmed but kept verbatim otherwise.
pub fn aggregate(records: &[AssociationRecord]) -> Result<AssociationTable, CorpusError> {
    if records.is_empty() {
        return Err(CorpusError::NoRecords);
    }
    let mut counts: BTreeMap<String, BTreeMap<String, u64>> = BTreeMap::new();
    for record in records {
        let cue = record.cue.trim();
        let response = record.response.trim().to_lowercase();
        if cue.is_empty() || response.is_empty() {
            continue;
        }
        *counts
            .entry(cue.to_string())
            .or_default()
            .entry(response)
            .or_insert(0) += 1;
    }

    let mut entries = BTreeMap::new();
    let mut totals = BTreeMap::new();
    for (cue, by_response) in counts {
        let total: u64 = by_response.values().sum();
        let mut list: Vec<(String, u64)> = by_response.into_iter().collect();
        list.sort_by(|(ra, ca), (rb, cb)| cb.cmp(ca).then_with(|| ra.cmp(rb)));
        totals.insert(cue.clone(), total);
        entries.insert(cue, list);
    }
    Ok(AssociationTable { entries, totals })
}

/// Disjoint by-cue partition of a table.
#[derive(Debug, Clone, PartialEq)]
pub struct CorpusSplit {
    pub train_cues: BTreeSet<String>,
    pub valid_cues: BTreeSet<String>,
    pub test_cues: BTreeSet<String>,
    pub seed: u64,
    pub ratios: [f64; 3],
}

/// Deterministically partition the cue set. The shuffle runs over the sorted
/// cue list with a seeded generator, so the split depends only on the cue set
/// and the seed, not on ingestion order.
pub fn split_by_cue(
    table: &AssociationTable,
    ratios: [f64; 3],
    seed: u64,
) -> Result<CorpusSplit, CorpusError> {
    let sum: f64 = ratios.iter().sum();
    if (sum - 1.0).abs() > 1e-9 || ratios.iter().any(|r| *r < 0.0) {
        return Err(CorpusError::InvalidRatios(ratios));
    }
    let n = table.cue_count();
    if n < 3 {
        return Err(CorpusError::TooFewCues { n });
    }

    let mut cues: Vec<String> = table.cues().map(str::to_string).collect();
    cues.sort();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    cues.shuffle(&mut rng);

    let n_train = ((ratios[0] * n as f64).round() as usize).min(n);
    let n_valid = ((ratios[1] * n as f64).round() as usize).min(n - n_train);

    let train_cues: BTreeSet<String> = cues[..n_train].iter().cloned().collect();
    let valid_cues: BTreeSet<String> = cues[n_train..n_train + n_valid].iter().cloned().collect();
    let test_cues: BTreeSet<String> = cues[n_train + n_valid..].iter().cloned().collect();

    Ok(CorpusSplit {
        train_cues,
        valid_cues,
        test_cues,
        seed,
        ratios,
    })
}

/// On-disk form of a [`CorpusSplit`].
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SplitManifest {
    pub seed: u64,
    pub ratios: [f64; 3],
    pub train: Vec<String>,
    pub valid: Vec<String>,
    pub test: Vec<String>,
}

impl From<&CorpusSplit> for SplitManifest {
    fn from(split: &CorpusSplit) -> Self {
        SplitManifest {
            seed: split.seed,
            ratios: split.ratios,
            train: split.train_cues.iter().cloned().collect(),
            valid: split.valid_cues.iter().cloned().collect(),
            test: split.test_cues.iter().cloned().collect(),
        }
    }
}

impl SplitManifest {
    pub fn to_split(&self) -> CorpusSplit {
        CorpusSplit {
            train_cues: self.train.iter().cloned().collect(),
            valid_cues: self.valid.iter().cloned().collect(),
            test_cues: self.test.iter().cloned().collect(),
            seed: self.seed,
            ratios: self.ratios,
        }
    }

    pub fn subset(&self, name: &str) -> Option<&[String]> {
        match name {
            "train" => Some(&self.train),
            "valid" => Some(&self.valid),
            "test" => Some(&self.test),
            _ => None,
        }
    }
}

/// Write a table in aggregated TSV form (cue, response, count), cues in
/// sorted order and responses in table order.
pub fn write_aggregated_tsv<W: Write>(table: &AssociationTable, mut w: W) -> std::io::Result<()> {
    writeln!(w, "cue\tresponse\tcount")?;
    for (cue, list) in &table.entries {
        for (response, count) in list {
            writeln!(w, "{cue}\t{response}\t{count}")?;
        }
    }
    Ok(())
}

/// Load a table previously written by [`write_aggregated_tsv`].
pub fn read_aggregated_tsv(path: &Path) -> Result<AssociationTable, CorpusError> {
    let outcome = ingest(path, CorpusFormat::Aggregated)?;
    aggregate(&outcome.records)
}
