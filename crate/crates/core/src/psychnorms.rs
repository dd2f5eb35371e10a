//! Psycholinguistic scoring of generated associations against norm lexicons
//! (valence, arousal, concreteness), cross-scale rescaling, per-cue profile
//! computation, and the paired Wilcoxon signed-rank test used to compare
//! model profiles with the human baseline.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use thiserror::Error;

use crate::corpus::RowError;
use crate::Language;

#[derive(Debug, Error)]
pub enum PsychError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("invalid scale: {0}")]
    InvalidScale(String),
    #[error("lexicon file {0} is empty")]
    EmptyLexicon(String),
    #[error("at least one pair is required")]
    EmptyPairs,
    #[error("no overlapping cues with defined '{metric}' medians")]
    EmptyIntersection { metric: String },
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

/// Declared range and direction of a lexicon's raw scores plus the span
/// they are rescaled onto.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ScaleSpec {
    pub source_min: f64,
    pub source_max: f64,
    pub target_min: f64,
    pub target_max: f64,
    #[serde(default)]
    pub inverted: bool,
}

impl ScaleSpec {
    pub fn identity(min: f64, max: f64) -> Self {
        ScaleSpec {
            source_min: min,
            source_max: max,
            target_min: min,
            target_max: max,
            inverted: false,
        }
    }

    pub fn validate(&self) -> Result<(), PsychError> {
        if self.source_min >= self.source_max {
            return Err(PsychError::InvalidScale(format!(
                "sourceMin {} must be < sourceMax {}",
                self.source_min, self.source_max
            )));
        }
        if self.target_min >= self.target_max {
            return Err(PsychError::InvalidScale(format!(
                "targetMin {} must be < targetMax {}",
                self.target_min, self.target_max
            )));
        }
        Ok(())
    }

    /// Affine map onto the target span; inverted scales are flipped within
    /// the source span first.
    pub fn rescale(&self, score: f64) -> f64 {
        let s = if self.inverted {
            self.source_max + self.source_min - score
        } else {
            score
        };
        self.target_min
            + (s - self.source_min) * (self.target_max - self.target_min)
                / (self.source_max - self.source_min)
    }

    pub fn target_midpoint(&self) -> f64 {
        (self.target_min + self.target_max) / 2.0
    }

    /// Conventional sidecar location: the lexicon path with its extension
    /// replaced by `scale.json`.
    pub fn sidecar_path(lexicon_path: &Path) -> PathBuf {
        lexicon_path.with_extension("scale.json")
    }

    pub fn from_sidecar(lexicon_path: &Path) -> Result<Self, PsychError> {
        let text = fs::read_to_string(Self::sidecar_path(lexicon_path))?;
        let spec: ScaleSpec = serde_json::from_str(&text)?;
        spec.validate()?;
        Ok(spec)
    }
}

/// Word -> rescaled score map for one psycholinguistic attribute.
#[derive(Debug, Clone)]
pub struct NormLexicon {
    scores: HashMap<String, f64>,
    pub scale: ScaleSpec,
    pub language: Language,
}

impl NormLexicon {
    pub fn from_entries(
        entries: impl IntoIterator<Item = (String, f64)>,
        scale: ScaleSpec,
        language: Language,
    ) -> Result<Self, PsychError> {
        scale.validate()?;
        let scores = entries
            .into_iter()
            .map(|(w, s)| (normalize_token(&w, language, None), scale.rescale(s)))
            .collect();
        Ok(NormLexicon {
            scores,
            scale,
            language,
        })
    }

    pub fn score(&self, normalized_word: &str) -> Option<f64> {
        self.scores.get(normalized_word).copied()
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }
}

#[derive(Debug, Default)]
pub struct LexiconLoadReport {
    pub loaded: usize,
    pub row_errors: Vec<RowError>,
    /// Duplicate words (first kept).
    pub duplicates: usize,
}

/// Load a two-column word/score TSV (header required) and rescale every
/// score onto the target span. Out-of-range scores become row errors;
/// duplicate words keep the first occurrence.
pub fn load_lexicon(
    path: &Path,
    scale: ScaleSpec,
    language: Language,
) -> Result<(NormLexicon, LexiconLoadReport), PsychError> {
    scale.validate()?;
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines().enumerate();
    lines
        .by_ref()
        .find(|(_, l)| !l.trim().is_empty())
        .ok_or_else(|| PsychError::EmptyLexicon(path.display().to_string()))?;

    let mut scores: HashMap<String, f64> = HashMap::new();
    let mut report = LexiconLoadReport::default();
    for (lineno, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let mut parts = line.splitn(2, '\t');
        let word = parts.next().unwrap_or("").trim();
        let raw = parts.next().unwrap_or("").trim();
        let Ok(score) = raw.parse::<f64>() else {
            report.row_errors.push(RowError {
                line: lineno + 1,
                message: format!("invalid score '{raw}'"),
            });
            continue;
        };
        if word.is_empty() {
            report.row_errors.push(RowError {
                line: lineno + 1,
                message: "empty word".to_string(),
            });
            continue;
        }
        if score < scale.source_min || score > scale.source_max {
            report.row_errors.push(RowError {
                line: lineno + 1,
                message: format!(
                    "score {score} outside declared range [{}, {}]",
                    scale.source_min, scale.source_max
                ),
            });
            continue;
        }
        let key = normalize_token(word, language, None);
        if scores.contains_key(&key) {
            report.duplicates += 1;
            continue;
        }
        scores.insert(key, scale.rescale(score));
    }
    report.loaded = scores.len();
    Ok((
        NormLexicon {
            scores,
            scale,
            language,
        },
        report,
    ))
}

/// Load a surface -> lemma TSV. A `surface<TAB>lemma` header row is skipped
/// when present.
pub fn load_lemma_table(path: &Path) -> Result<HashMap<String, String>, PsychError> {
    let text = fs::read_to_string(path)?;
    let mut map = HashMap::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let mut parts = line.splitn(2, '\t');
        let surface = parts.next().unwrap_or("").trim().to_lowercase();
        let lemma = parts.next().unwrap_or("").trim().to_lowercase();
        if i == 0 && surface == "surface" && lemma == "lemma" {
            continue;
        }
        if !surface.is_empty() && !lemma.is_empty() {
            map.entry(surface).or_insert(lemma);
        }
    }
    Ok(map)
}

const CJK_PUNCT: &[char] = &[
    '，', '。', '！', '？', '；', '：', '、', '·', '「', '」', '『', '』', '（', '）', '《', '》',
    '〈', '〉', '【', '】', '…', '—', '～', '‘', '’', '“', '”', '¿', '¡',
];

fn is_strippable(c: char) -> bool {
    c.is_ascii_punctuation() || CJK_PUNCT.contains(&c)
}

/// Lower-case and strip leading/trailing punctuation. English tokens are
/// additionally replaced by their lemma when the lemma table has an entry;
/// Mandarin tokens stay in surface form.
pub fn normalize_token(
    token: &str,
    language: Language,
    lemmas: Option<&HashMap<String, String>>,
) -> String {
    let cleaned = token
        .trim()
        .to_lowercase()
        .trim_matches(is_strippable)
        .trim()
        .to_string();
    if language == Language::En {
        if let Some(map) = lemmas {
            if let Some(lemma) = map.get(&cleaned) {
                return lemma.clone();
            }
        }
    }
    cleaned
}

/// Valence and arousal lexicons, matched over the same token stream.
#[derive(Debug, Clone)]
pub struct AffectLexicons {
    pub valence: NormLexicon,
    pub arousal: NormLexicon,
}

/// Knobs for profile computation.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ProfileThresholds {
    /// Concreteness score at or above which a word counts as concrete.
    pub conc_boundary: f64,
    /// Minimum |valence - span midpoint| for a word to count as emotional.
    pub emotional_delta: f64,
}

impl Default for ProfileThresholds {
    fn default() -> Self {
        ProfileThresholds {
            conc_boundary: 4.0,
            emotional_delta: 1.0,
        }
    }
}

/// Psycholinguistic profile of one cue's association list.
#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct CueProfile {
    pub cue: String,
    pub median_valence: Option<f64>,
    pub median_arousal: Option<f64>,
    pub median_concreteness: Option<f64>,
    /// Fraction of valence-matched words displaced from the span midpoint
    /// by at least the emotional delta.
    pub emotional_pct: f64,
    pub conc_pct: f64,
    pub abs_pct: f64,
    pub unk_pct: f64,
    pub matched_valence: usize,
    pub matched_arousal: usize,
    pub matched_concreteness: usize,
}

fn median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(|a, b| a.total_cmp(b));
    let n = values.len();
    if n % 2 == 1 {
        Some(values[n / 2])
    } else {
        Some((values[n / 2 - 1] + values[n / 2]) / 2.0)
    }
}

/// Score a cue's association list (typically the top-10 generated words)
/// against the lexicons. Words absent from a lexicon are ignored for that
/// metric; coverage percentages are fractions of the full word list.
pub fn cue_profile(
    cue: &str,
    words: &[String],
    affect: &AffectLexicons,
    concreteness: &NormLexicon,
    thresholds: &ProfileThresholds,
    lemmas: Option<&HashMap<String, String>>,
) -> CueProfile {
    let language = affect.valence.language;
    let midpoint = affect.valence.scale.target_midpoint();

    let mut valences = Vec::new();
    let mut arousals = Vec::new();
    let mut concs = Vec::new();
    let mut emotional = 0usize;
    let mut concrete = 0usize;
    let mut abstract_ = 0usize;

    for word in words {
        let token = normalize_token(word, language, lemmas);
        if let Some(v) = affect.valence.score(&token) {
            if (v - midpoint).abs() >= thresholds.emotional_delta {
                emotional += 1;
            }
            valences.push(v);
        }
        if let Some(a) = affect.arousal.score(&token) {
            arousals.push(a);
        }
        if let Some(c) = concreteness.score(&token) {
            if c >= thresholds.conc_boundary {
                concrete += 1;
            } else {
                abstract_ += 1;
            }
            concs.push(c);
        }
    }

    let total = words.len();
    let (conc_pct, abs_pct, unk_pct) = if total == 0 {
        (0.0, 0.0, 1.0)
    } else {
        let conc = concrete as f64 / total as f64;
        let abs = abstract_ as f64 / total as f64;
        (conc, abs, 1.0 - conc - abs)
    };
    let emotional_pct = if valences.is_empty() {
        0.0
    } else {
        emotional as f64 / valences.len() as f64
    };

    let matched_valence = valences.len();
    let matched_arousal = arousals.len();
    let matched_concreteness = concs.len();
    CueProfile {
        cue: cue.to_string(),
        median_valence: median(&mut valences),
        median_arousal: median(&mut arousals),
        median_concreteness: median(&mut concs),
        emotional_pct,
        conc_pct,
        abs_pct,
        unk_pct,
        matched_valence,
        matched_arousal,
        matched_concreteness,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum WilcoxonMethod {
    Exact,
    NormalApprox,
}

/// Outcome of a paired Wilcoxon signed-rank test.
#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct WilcoxonResult {
    /// W = min(W+, W-).
    pub statistic: f64,
    /// Pairs with a non-zero difference.
    pub n_effective: usize,
    /// Two-sided p-value.
    pub p_value: f64,
    pub method: WilcoxonMethod,
}

/// Exact enumeration is used up to this many non-zero differences.
pub const DEFAULT_EXACT_CUTOFF: usize = 12;

struct SignedRanks {
    ranks: Vec<f64>,
    w_plus: f64,
    w_minus: f64,
}

fn signed_ranks(pairs: &[(f64, f64)]) -> SignedRanks {
    let diffs: Vec<f64> = pairs
        .iter()
        .map(|(a, b)| a - b)
        .filter(|d| *d != 0.0)
        .collect();
    let abs: Vec<f64> = diffs.iter().map(|d| d.abs()).collect();
    let ranks = crate::metrics::fractional_ranks(&abs);
    let mut w_plus = 0.0;
    let mut w_minus = 0.0;
    for (d, r) in diffs.iter().zip(&ranks) {
        if *d > 0.0 {
            w_plus += r;
        } else {
            w_minus += r;
        }
    }
    SignedRanks {
        ranks,
        w_plus,
        w_minus,
    }
}

/// P(T <= w) where T is the sum of a uniformly random subset of `ranks`.
fn exact_tail_probability(ranks: &[f64], w: f64) -> f64 {
    let n = ranks.len();
    let mut count = 0u64;
    for mask in 0u64..(1u64 << n) {
        let mut t = 0.0;
        for (i, r) in ranks.iter().enumerate() {
            if mask >> i & 1 == 1 {
                t += r;
            }
        }
        if t <= w + 1e-9 {
            count += 1;
        }
    }
    count as f64 / (1u64 << n) as f64
}

fn tie_groups(abs_diffs_sorted: &[f64]) -> Vec<usize> {
    let mut groups = Vec::new();
    let mut i = 0;
    while i < abs_diffs_sorted.len() {
        let mut j = i;
        while j + 1 < abs_diffs_sorted.len() && abs_diffs_sorted[j + 1] == abs_diffs_sorted[i] {
            j += 1;
        }
        groups.push(j - i + 1);
        i = j + 1;
    }
    groups
}

fn normal_two_sided(pairs: &[(f64, f64)], w_plus: f64, n: usize) -> f64 {
    let nf = n as f64;
    let mu = nf * (nf + 1.0) / 4.0;
    let mut abs: Vec<f64> = pairs
        .iter()
        .map(|(a, b)| (a - b).abs())
        .filter(|d| *d != 0.0)
        .collect();
    abs.sort_by(|a, b| a.total_cmp(b));
    let tie_term: f64 = tie_groups(&abs)
        .iter()
        .map(|&t| {
            let t = t as f64;
            t * t * t - t
        })
        .sum();
    let sigma = (nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_term / 48.0).sqrt();
    let centered = w_plus - mu;
    let correction = if centered > 0.0 {
        0.5
    } else if centered < 0.0 {
        -0.5
    } else {
        0.0
    };
    let z = (centered - correction) / sigma;
    let normal = Normal::new(0.0, 1.0).unwrap();
    (2.0 * (1.0 - normal.cdf(z.abs()))).min(1.0)
}

/// Paired Wilcoxon signed-rank test, two-sided. Zero differences are
/// dropped; |differences| are ranked with fractional ties; the exact null
/// distribution is enumerated over all 2^n sign assignments when the
/// effective sample is small, otherwise a tie- and continuity-corrected
/// normal approximation is used.
pub fn wilcoxon_signed_rank(pairs: &[(f64, f64)]) -> Result<WilcoxonResult, PsychError> {
    wilcoxon_signed_rank_with_cutoff(pairs, DEFAULT_EXACT_CUTOFF)
}

pub fn wilcoxon_signed_rank_with_cutoff(
    pairs: &[(f64, f64)],
    exact_cutoff: usize,
) -> Result<WilcoxonResult, PsychError> {
    if pairs.is_empty() {
        return Err(PsychError::EmptyPairs);
    }
    let sr = signed_ranks(pairs);
    let n = sr.ranks.len();
    if n == 0 {
        return Ok(WilcoxonResult {
            statistic: 0.0,
            n_effective: 0,
            p_value: 1.0,
            method: WilcoxonMethod::Exact,
        });
    }
    let w = sr.w_plus.min(sr.w_minus);
    if n <= exact_cutoff {
        let p = (2.0 * exact_tail_probability(&sr.ranks, w)).min(1.0);
        Ok(WilcoxonResult {
            statistic: w,
            n_effective: n,
            p_value: p,
            method: WilcoxonMethod::Exact,
        })
    } else {
        Ok(WilcoxonResult {
            statistic: w,
            n_effective: n,
            p_value: normal_two_sided(pairs, sr.w_plus, n),
            method: WilcoxonMethod::NormalApprox,
        })
    }
}

/// One-sided p for the alternative "first element of each pair is smaller"
/// (small W+ is extreme).
pub fn wilcoxon_one_sided_less(
    pairs: &[(f64, f64)],
    exact_cutoff: usize,
) -> Result<(f64, WilcoxonMethod), PsychError> {
    if pairs.is_empty() {
        return Err(PsychError::EmptyPairs);
    }
    let sr = signed_ranks(pairs);
    let n = sr.ranks.len();
    if n == 0 {
        return Ok((1.0, WilcoxonMethod::Exact));
    }
    if n <= exact_cutoff {
        Ok((
            exact_tail_probability(&sr.ranks, sr.w_plus),
            WilcoxonMethod::Exact,
        ))
    } else {
        let nf = n as f64;
        let mu = nf * (nf + 1.0) / 4.0;
        let mut abs: Vec<f64> = pairs
            .iter()
            .map(|(a, b)| (a - b).abs())
            .filter(|d| *d != 0.0)
            .collect();
        abs.sort_by(|a, b| a.total_cmp(b));
        let tie_term: f64 = tie_groups(&abs)
            .iter()
            .map(|&t| {
                let t = t as f64;
                t * t * t - t
            })
            .sum();
        let sigma = (nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_term / 48.0).sqrt();
        let z = (sr.w_plus - mu + 0.5) / sigma;
        let normal = Normal::new(0.0, 1.0).unwrap();
        Ok((normal.cdf(z).min(1.0), WilcoxonMethod::NormalApprox))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum PsychMetric {
    Valence,
    Arousal,
    Concreteness,
}

impl PsychMetric {
    pub fn all() -> [PsychMetric; 3] {
        [
            PsychMetric::Valence,
            PsychMetric::Arousal,
            PsychMetric::Concreteness,
        ]
    }

    pub fn name(&self) -> &'static str {
        match self {
            PsychMetric::Valence => "valence",
            PsychMetric::Arousal => "arousal",
            PsychMetric::Concreteness => "concreteness",
        }
    }

    fn of(&self, profile: &CueProfile) -> Option<f64> {
        match self {
            PsychMetric::Valence => profile.median_valence,
            PsychMetric::Arousal => profile.median_arousal,
            PsychMetric::Concreteness => profile.median_concreteness,
        }
    }
}

/// Model-vs-human comparison for one metric: medians of per-cue medians and
/// the paired test verdict.
#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ProfileComparison {
    pub metric: PsychMetric,
    pub model_median: f64,
    pub human_median: f64,
    pub n_pairs: usize,
    pub wilcoxon: WilcoxonResult,
    /// True when p >= 0.05: the model profile is statistically
    /// indistinguishable from the human baseline.
    pub indistinguishable: bool,
}

/// Pair per-cue medians on the cue intersection and run the signed-rank
/// test. Cues where either side lacks a defined median are skipped.
pub fn compare_profiles(
    model: &BTreeMap<String, CueProfile>,
    human: &BTreeMap<String, CueProfile>,
    metric: PsychMetric,
) -> Result<ProfileComparison, PsychError> {
    let mut pairs = Vec::new();
    let mut model_values = Vec::new();
    let mut human_values = Vec::new();
    for (cue, m) in model {
        let Some(h) = human.get(cue) else { continue };
        let (Some(mv), Some(hv)) = (metric.of(m), metric.of(h)) else {
            continue;
        };
        pairs.push((mv, hv));
        model_values.push(mv);
        human_values.push(hv);
    }
    if pairs.is_empty() {
        return Err(PsychError::EmptyIntersection {
            metric: metric.name().to_string(),
        });
    }
    let wilcoxon = wilcoxon_signed_rank(&pairs)?;
    let indistinguishable = wilcoxon.p_value >= 0.05;
    Ok(ProfileComparison {
        metric,
        model_median: median(&mut model_values).unwrap(),
        human_median: median(&mut human_values).unwrap(),
        n_pairs: pairs.len(),
        wilcoxon,
        indistinguishable,
    })
}
