//! Lexical-level scoring of model outputs: ranked-response parsing,
//! tie-corrected Spearman correlation, the ranking reward used for
//! preference optimization, and Precision@K against human top-K lists.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::io::Write;
use std::sync::LazyLock;

use regex::Regex;
use serde::Serialize;
use thiserror::Error;

use crate::corpus::AssociationTable;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("non-finite value in input")]
    NonFinite,
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

/// A model's ranked word list recovered from free text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedRanking {
    /// First-occurrence order, duplicates removed keeping the earliest rank.
    pub ordered_words: Vec<String>,
    pub parse_warnings: Vec<String>,
}

static RANK_LINE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?im)^\s*(?:[-*•>]\s*)?rank\s*\d+\s*[:：]\s*(.+?)\s*$").unwrap());

static FINAL_MARKER: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)final\s+ranking\s*[:：]?").unwrap());

/// Extract `Rank <n>: <word>` lines, searching after the last
/// `Final Ranking:` marker when one is present.
pub fn parse_ranked_response(text: &str) -> ParsedRanking {
    let section = match FINAL_MARKER.find_iter(text).last() {
        Some(m) => &text[m.start()..],
        None => text,
    };

    let mut ordered_words = Vec::new();
    let mut parse_warnings = Vec::new();
    let mut seen = HashSet::new();
    for capture in RANK_LINE.captures_iter(section) {
        let word = capture[1].trim().to_lowercase();
        if word.is_empty() {
            continue;
        }
        if seen.insert(word.clone()) {
            ordered_words.push(word);
        } else {
            parse_warnings.push(format!("duplicate word '{word}' ignored"));
        }
    }
    if ordered_words.is_empty() {
        parse_warnings.push("no rank lines found".to_string());
    }
    ParsedRanking {
        ordered_words,
        parse_warnings,
    }
}

/// Fractional (midrank) ranks, 1-based: tied values share the mean of the
/// ranks they occupy.
pub fn fractional_ranks(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));

    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let rank = (i + 1 + j + 1) as f64 / 2.0;
        for &idx in &order[i..=j] {
            ranks[idx] = rank;
        }
        i = j + 1;
    }
    ranks
}

fn pearson(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let n = xs.len() as f64;
    let mean_x = xs.iter().sum::<f64>() / n;
    let mean_y = ys.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut var_x = 0.0;
    let mut var_y = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        let dx = x - mean_x;
        let dy = y - mean_y;
        cov += dx * dy;
        var_x += dx * dx;
        var_y += dy * dy;
    }
    if var_x == 0.0 || var_y == 0.0 {
        return None;
    }
    Some(cov / (var_x * var_y).sqrt())
}

/// Tie-corrected Spearman correlation: Pearson correlation of fractional
/// ranks. `None` when fewer than two pairs or either side is constant.
pub fn spearman(a: &[f64], b: &[f64]) -> Result<Option<f64>, MetricsError> {
    if a.len() != b.len() {
        return Err(MetricsError::LengthMismatch(a.len(), b.len()));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(MetricsError::NonFinite);
    }
    if a.len() < 2 {
        return Ok(None);
    }
    let ranks_a = fractional_ranks(a);
    let ranks_b = fractional_ranks(b);
    Ok(pearson(&ranks_a, &ranks_b))
}

fn fold(word: &str) -> String {
    word.trim().to_lowercase()
}

/// Reward for a ranked-list response against the empirical frequency order:
/// parse the response, keep only ground-truth words, map both sides to rank
/// indices, and correlate. Undefined correlations (no overlap, singleton
/// overlap) score -1.0 so the reward is total.
pub fn ranking_reward(response_text: &str, ground_truth: &[String]) -> f64 {
    let parsed = parse_ranked_response(response_text);
    ranking_reward_from_words(&parsed.ordered_words, ground_truth)
}

/// Reward over an already-parsed predicted word list.
pub fn ranking_reward_from_words(predicted: &[String], ground_truth: &[String]) -> f64 {
    let gt_index: HashMap<String, usize> = ground_truth
        .iter()
        .enumerate()
        .map(|(i, w)| (fold(w), i))
        .collect();

    let mut pred_ranks = Vec::new();
    let mut gt_ranks = Vec::new();
    let mut seen = HashSet::new();
    for word in predicted {
        let word = fold(word);
        if !seen.insert(word.clone()) {
            continue;
        }
        if let Some(&gt_rank) = gt_index.get(word.as_str()) {
            pred_ranks.push(pred_ranks.len() as f64);
            gt_ranks.push(gt_rank as f64);
        }
    }

    match spearman(&pred_ranks, &gt_ranks) {
        Ok(Some(score)) => score,
        _ => -1.0,
    }
}

/// Fraction of the first `min(k, |generated|)` generated words found in the
/// human top-K list, over a denominator of `k`. Matching is case-insensitive
/// after trimming; duplicate generated words count once.
pub fn precision_at_k(generated: &[String], human_top_k: &[String], k: usize) -> f64 {
    if k == 0 {
        return 0.0;
    }
    let human: HashSet<String> = human_top_k.iter().map(|w| fold(w)).collect();
    let mut seen = HashSet::new();
    let mut hits = 0usize;
    let mut taken = 0usize;
    for word in generated {
        let w = fold(word);
        if w.is_empty() || !seen.insert(w.clone()) {
            continue;
        }
        taken += 1;
        if human.contains(&w) {
            hits += 1;
        }
        if taken == k {
            break;
        }
    }
    hits as f64 / k as f64
}

/// Correlate generation order against human order on the intersection of the
/// two lists. `None` when fewer than two words are shared.
pub fn generation_spearman(generated: &[String], human_order: &[String]) -> Option<f64> {
    let mut gen_order = Vec::new();
    let mut seen = HashSet::new();
    for w in generated {
        let w = fold(w);
        if !w.is_empty() && seen.insert(w.clone()) {
            gen_order.push(w);
        }
    }
    let gen_set: HashSet<&String> = gen_order.iter().collect();

    let mut human_restricted = Vec::new();
    let mut seen_h = HashSet::new();
    for w in human_order {
        let w = fold(w);
        if gen_set.contains(&w) && seen_h.insert(w.clone()) {
            human_restricted.push(w);
        }
    }
    let human_pos: HashMap<&String, usize> = human_restricted
        .iter()
        .enumerate()
        .map(|(i, w)| (w, i))
        .collect();

    let mut ranks_gen = Vec::new();
    let mut ranks_human = Vec::new();
    for w in &gen_order {
        if let Some(&pos) = human_pos.get(w) {
            ranks_gen.push(ranks_gen.len() as f64);
            ranks_human.push(pos as f64);
        }
    }
    spearman(&ranks_gen, &ranks_human).ok().flatten()
}

/// Per-cue generation metrics.
#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct CueMetrics {
    pub precision_at_k: BTreeMap<usize, f64>,
    pub spearman: Option<f64>,
}

/// Generation-quality report over a batch of cues.
#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct GenerationEvalReport {
    pub per_cue: BTreeMap<String, CueMetrics>,
    pub mean_precision_at_k: BTreeMap<usize, f64>,
    /// Mean over cues with a defined correlation only.
    pub mean_spearman: Option<f64>,
    pub spearman_defined_cues: usize,
    /// Cues absent from the table, excluded from all means.
    pub unknown_cues: Vec<String>,
}

pub const DEFAULT_KS: [usize; 5] = [5, 10, 20, 30, 40];

/// Score a generation run against the association table: Precision@K for
/// each requested K plus the intersection-order Spearman per cue, with
/// arithmetic means across cues.
pub fn evaluate_generation_run(
    generations: &BTreeMap<String, Vec<String>>,
    table: &AssociationTable,
    ks: &[usize],
) -> GenerationEvalReport {
    let mut per_cue = BTreeMap::new();
    let mut unknown_cues = Vec::new();

    for (cue, words) in generations {
        let Some(human_full) = table.responses(cue) else {
            unknown_cues.push(cue.clone());
            continue;
        };
        let human_words: Vec<String> = human_full.iter().map(|(w, _)| w.clone()).collect();
        let mut precision = BTreeMap::new();
        for &k in ks {
            let top = table.top_k(cue, k).expect("cue known");
            precision.insert(k, precision_at_k(words, &top, k));
        }
        per_cue.insert(
            cue.clone(),
            CueMetrics {
                precision_at_k: precision,
                spearman: generation_spearman(words, &human_words),
            },
        );
    }

    let n = per_cue.len();
    let mut mean_precision_at_k = BTreeMap::new();
    if n > 0 {
        for &k in ks {
            let sum: f64 = per_cue.values().map(|m| m.precision_at_k[&k]).sum();
            mean_precision_at_k.insert(k, sum / n as f64);
        }
    }
    let defined: Vec<f64> = per_cue.values().filter_map(|m| m.spearman).collect();
    let mean_spearman = if defined.is_empty() {
        None
    } else {
        Some(defined.iter().sum::<f64>() / defined.len() as f64)
    };

    GenerationEvalReport {
        per_cue,
        mean_precision_at_k,
        mean_spearman,
        spearman_defined_cues: defined.len(),
        unknown_cues,
    }
}

impl GenerationEvalReport {
    /// One row per cue; spearman left empty when undefined.
    pub fn write_csv<W: Write>(&self, ks: &[usize], w: W) -> Result<(), MetricsError> {
        let mut writer = csv::Writer::from_writer(w);
        let mut header = vec!["cue".to_string()];
        header.extend(ks.iter().map(|k| format!("prec@{k}")));
        header.push("spearman".to_string());
        writer.write_record(&header)?;
        for (cue, m) in &self.per_cue {
            let mut row = vec![cue.clone()];
            row.extend(ks.iter().map(|k| m.precision_at_k[k].to_string()));
            row.push(m.spearman.map(|s| s.to_string()).unwrap_or_default());
            writer.write_record(&row)?;
        }
        writer.flush().map_err(csv::Error::from)?;
        Ok(())
    }
}
