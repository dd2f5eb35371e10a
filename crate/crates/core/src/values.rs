//! Survey-based value-alignment analytics: answer distributions over ordered
//! options, Jensen-Shannon / Earth Mover divergences and their hybrid combo
//! score, threshold curves, tension-set selection, and cross-cultural shift
//! analysis.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::psychnorms::{
    wilcoxon_one_sided_less, wilcoxon_signed_rank, PsychError, WilcoxonResult, DEFAULT_EXACT_CUTOFF,
};

#[derive(Debug, Error)]
pub enum ValuesError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("question {question}: {message}")]
    InvalidQuestion { question: String, message: String },
    #[error("distribution failed to normalize: {0}")]
    BadDistribution(String),
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("threshold grid is not sorted ascending")]
    UnsortedGrid,
    #[error("question {question} lacks population '{population}'")]
    MissingPopulation {
        question: String,
        population: String,
    },
    #[error("question keys differ: {0} only in baseline, {1} only in treated")]
    KeyMismatch(usize, usize),
    #[error(transparent)]
    Psych(#[from] PsychError),
}

/// Normalized probability vector aligned to a question's ordered options.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct AnswerDistribution {
    probs: Vec<f64>,
}

impl TryFrom<Vec<f64>> for AnswerDistribution {
    type Error = ValuesError;

    fn try_from(probs: Vec<f64>) -> Result<Self, ValuesError> {
        AnswerDistribution::from_probs(probs)
    }
}

impl From<AnswerDistribution> for Vec<f64> {
    fn from(d: AnswerDistribution) -> Vec<f64> {
        d.probs
    }
}

impl AnswerDistribution {
    /// Validate an already-normalized vector.
    pub fn from_probs(probs: Vec<f64>) -> Result<Self, ValuesError> {
        if probs.len() < 2 {
            return Err(ValuesError::BadDistribution(format!(
                "need at least 2 options, got {}",
                probs.len()
            )));
        }
        if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(ValuesError::BadDistribution(
                "negative or non-finite probability".to_string(),
            ));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(ValuesError::BadDistribution(format!(
                "probabilities sum to {sum}, expected 1"
            )));
        }
        Ok(AnswerDistribution { probs })
    }

    /// Normalize raw counts (or unnormalized weights) by their total.
    pub fn from_counts(counts: &[f64]) -> Result<Self, ValuesError> {
        if counts.len() < 2 {
            return Err(ValuesError::BadDistribution(format!(
                "need at least 2 options, got {}",
                counts.len()
            )));
        }
        if counts.iter().any(|c| !c.is_finite() || *c < 0.0) {
            return Err(ValuesError::BadDistribution(
                "negative or non-finite count".to_string(),
            ));
        }
        let total: f64 = counts.iter().sum();
        if total <= 0.0 {
            return Err(ValuesError::BadDistribution(
                "counts sum to zero".to_string(),
            ));
        }
        let probs = counts.iter().map(|c| c / total).collect();
        Ok(AnswerDistribution { probs })
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }
}

/// One survey question with per-population human answer distributions.
#[derive(Debug, Clone)]
pub struct SurveyQuestion {
    pub id: String,
    pub text: String,
    pub options: Vec<String>,
    pub topic: Option<String>,
    pub human: BTreeMap<String, AnswerDistribution>,
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "camelCase")]
struct RawSurveyQuestion {
    id: String,
    #[serde(default)]
    text: String,
    options: Vec<String>,
    populations: BTreeMap<String, Vec<f64>>,
    #[serde(default)]
    topic: Option<String>,
}

/// Loading knobs. Options whose label matches `drop_options`
/// (case-insensitive) are removed before normalization, since categories
/// like "Don't know" have no ordinal position.
#[derive(Debug, Clone, Default)]
pub struct SurveyLoadOptions {
    pub drop_options: Vec<String>,
}

/// Load a survey JSON array: `[{id, text, options[], populations: {US:
/// counts[], CN: counts[]}, topic?}]`. Counts are normalized by their total;
/// already-normalized vectors pass through unchanged.
pub fn load_survey(
    path: &Path,
    load_options: &SurveyLoadOptions,
) -> Result<Vec<SurveyQuestion>, ValuesError> {
    let text = fs::read_to_string(path)?;
    let raw: Vec<RawSurveyQuestion> = serde_json::from_str(&text)?;
    let drop: Vec<String> = load_options
        .drop_options
        .iter()
        .map(|s| s.trim().to_lowercase())
        .filter(|s| !s.is_empty())
        .collect();

    let mut questions = Vec::with_capacity(raw.len());
    for q in raw {
        let keep: Vec<usize> = q
            .options
            .iter()
            .enumerate()
            .filter(|(_, label)| !drop.contains(&label.trim().to_lowercase()))
            .map(|(i, _)| i)
            .collect();
        let options: Vec<String> = keep.iter().map(|&i| q.options[i].clone()).collect();
        if options.len() < 2 {
            return Err(ValuesError::InvalidQuestion {
                question: q.id,
                message: format!("needs at least 2 options, has {}", options.len()),
            });
        }
        let mut human = BTreeMap::new();
        for (population, counts) in q.populations {
            if counts.len() != q.options.len() {
                return Err(ValuesError::InvalidQuestion {
                    question: q.id,
                    message: format!(
                        "population '{population}' has {} values for {} options",
                        counts.len(),
                        q.options.len()
                    ),
                });
            }
            let kept: Vec<f64> = keep.iter().map(|&i| counts[i]).collect();
            let dist = AnswerDistribution::from_counts(&kept).map_err(|e| {
                ValuesError::InvalidQuestion {
                    question: q.id.clone(),
                    message: format!("population '{population}': {e}"),
                }
            })?;
            human.insert(population, dist);
        }
        questions.push(SurveyQuestion {
            id: q.id,
            text: q.text,
            options,
            topic: q.topic,
            human,
        });
    }
    Ok(questions)
}

/// Softmax over option log-scores with stable max-subtraction. `-inf`
/// entries (missing options) get probability zero; at least one score must
/// be finite.
pub fn renormalize_log_scores(log_scores: &[f64]) -> Result<AnswerDistribution, ValuesError> {
    if log_scores.len() < 2 {
        return Err(ValuesError::BadDistribution(format!(
            "need at least 2 option scores, got {}",
            log_scores.len()
        )));
    }
    if log_scores.iter().any(|l| l.is_nan() || *l == f64::INFINITY) {
        return Err(ValuesError::BadDistribution(
            "log scores must be finite or -inf".to_string(),
        ));
    }
    let max = log_scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return Err(ValuesError::BadDistribution(
            "all option scores are -inf".to_string(),
        ));
    }
    let weights: Vec<f64> = log_scores.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = weights.iter().sum();
    AnswerDistribution::from_probs(weights.iter().map(|w| w / total).collect())
}

fn check_lengths(p: &AnswerDistribution, q: &AnswerDistribution) -> Result<(), ValuesError> {
    if p.len() != q.len() {
        return Err(ValuesError::LengthMismatch(p.len(), q.len()));
    }
    Ok(())
}

/// Jensen-Shannon distance with base-2 logarithms: the square root of the
/// symmetrized KL divergence to the midpoint, bounded by 1.
pub fn js_distance(p: &AnswerDistribution, q: &AnswerDistribution) -> Result<f64, ValuesError> {
    check_lengths(p, q)?;
    let mut divergence = 0.0;
    for (&a, &b) in p.probs().iter().zip(q.probs()) {
        let mid = (a + b) / 2.0;
        if a > 0.0 {
            divergence += 0.5 * a * (a / mid).log2();
        }
        if b > 0.0 {
            divergence += 0.5 * b * (b / mid).log2();
        }
    }
    Ok(divergence.max(0.0).sqrt().min(1.0))
}

/// Normalized 1-D Earth Mover's distance over options at consecutive
/// integer positions: the summed CDF gap divided by (n - 1), in [0, 1].
pub fn emd_normalized(p: &AnswerDistribution, q: &AnswerDistribution) -> Result<f64, ValuesError> {
    check_lengths(p, q)?;
    let n = p.len();
    let mut cdf_p = 0.0;
    let mut cdf_q = 0.0;
    let mut transport = 0.0;
    for (&a, &b) in p.probs().iter().zip(q.probs()) {
        cdf_p += a;
        cdf_q += b;
        transport += (cdf_p - cdf_q).abs();
    }
    Ok((transport / (n - 1) as f64).clamp(0.0, 1.0))
}

/// Per-question divergence triple. The combo score is the plain average of
/// the entropy-sensitive and the location-aware component.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct DivergenceScore {
    pub js: f64,
    pub emd: f64,
    pub combo: f64,
}

pub fn combo_divergence(
    p: &AnswerDistribution,
    q: &AnswerDistribution,
) -> Result<DivergenceScore, ValuesError> {
    let js = js_distance(p, q)?;
    let emd = emd_normalized(p, q)?;
    Ok(DivergenceScore {
        js,
        emd,
        combo: 0.5 * js + 0.5 * emd,
    })
}

/// Which divergence drives an analysis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DistanceMetric {
    Combo,
    Js,
    Emd,
}

impl DistanceMetric {
    pub fn compute(
        &self,
        p: &AnswerDistribution,
        q: &AnswerDistribution,
    ) -> Result<f64, ValuesError> {
        match self {
            DistanceMetric::Combo => Ok(combo_divergence(p, q)?.combo),
            DistanceMetric::Js => js_distance(p, q),
            DistanceMetric::Emd => emd_normalized(p, q),
        }
    }
}

impl std::str::FromStr for DistanceMetric {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "combo" => Ok(DistanceMetric::Combo),
            "js" => Ok(DistanceMetric::Js),
            "emd" => Ok(DistanceMetric::Emd),
            other => Err(format!(
                "unknown metric '{other}' (expected combo, js, or emd)"
            )),
        }
    }
}

impl std::fmt::Display for DistanceMetric {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            DistanceMetric::Combo => write!(f, "combo"),
            DistanceMetric::Js => write!(f, "js"),
            DistanceMetric::Emd => write!(f, "emd"),
        }
    }
}

/// Fraction of questions with distance <= t for each grid threshold.
/// The grid must be sorted ascending; the curve is monotone non-decreasing.
pub fn threshold_curve(
    distances: &BTreeMap<String, f64>,
    grid: &[f64],
) -> Result<Vec<(f64, f64)>, ValuesError> {
    if grid.windows(2).any(|w| w[0] > w[1]) {
        return Err(ValuesError::UnsortedGrid);
    }
    let n = distances.len();
    Ok(grid
        .iter()
        .map(|&t| {
            let within = distances.values().filter(|&&d| d <= t).count();
            let fraction = if n == 0 {
                0.0
            } else {
                within as f64 / n as f64
            };
            (t, fraction)
        })
        .collect())
}

/// One question of the tension set with its cross-population divergence.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TensionEntry {
    pub id: String,
    pub score: DivergenceScore,
}

/// The top-N questions where two populations diverge most under the combo
/// score.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TensionSet {
    pub pop_a: String,
    pub pop_b: String,
    pub requested: usize,
    /// True when fewer questions were available than requested.
    pub truncated: bool,
    pub entries: Vec<TensionEntry>,
}

/// Rank questions by combo divergence between two populations (descending,
/// ties by id ascending) and keep the first `n`. Requesting more questions
/// than exist returns the full ordering with `truncated` set.
pub fn select_tension_set(
    questions: &[SurveyQuestion],
    pop_a: &str,
    pop_b: &str,
    n: usize,
) -> Result<TensionSet, ValuesError> {
    let mut entries = Vec::with_capacity(questions.len());
    for q in questions {
        let a = q
            .human
            .get(pop_a)
            .ok_or_else(|| ValuesError::MissingPopulation {
                question: q.id.clone(),
                population: pop_a.to_string(),
            })?;
        let b = q
            .human
            .get(pop_b)
            .ok_or_else(|| ValuesError::MissingPopulation {
                question: q.id.clone(),
                population: pop_b.to_string(),
            })?;
        entries.push(TensionEntry {
            id: q.id.clone(),
            score: combo_divergence(a, b)?,
        });
    }
    entries.sort_by(|x, y| {
        y.score
            .combo
            .total_cmp(&x.score.combo)
            .then_with(|| x.id.cmp(&y.id))
    });
    let truncated = n > entries.len();
    entries.truncate(n);
    Ok(TensionSet {
        pop_a: pop_a.to_string(),
        pop_b: pop_b.to_string(),
        requested: n,
        truncated,
        entries,
    })
}

/// Which culture a model's answer distribution sits closer to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Leaning {
    Us,
    Target,
    Tie,
}

/// Per-question distances to the two reference populations.
#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ShiftPoint {
    pub question_id: String,
    pub d_us: f64,
    pub d_target: f64,
    pub leaning: Leaning,
}

/// Shift analysis over a question set.
#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ShiftReport {
    pub metric: DistanceMetric,
    pub points: Vec<ShiftPoint>,
    pub us_count: usize,
    pub target_count: usize,
    pub tie_count: usize,
    /// Questions without a model distribution, excluded from the counts.
    pub missing: Vec<String>,
}

const LEANING_TIE_EPS: f64 = 1e-12;

/// For every question, measure the model's distance to both populations and
/// tally which culture it leans toward. Ties within 1e-12 count separately.
pub fn shift_analysis(
    model: &BTreeMap<String, AnswerDistribution>,
    questions: &[SurveyQuestion],
    metric: DistanceMetric,
    pop_us: &str,
    pop_target: &str,
) -> Result<ShiftReport, ValuesError> {
    let mut points = Vec::new();
    let mut missing = Vec::new();
    let mut us_count = 0;
    let mut target_count = 0;
    let mut tie_count = 0;

    for q in questions {
        let us = q
            .human
            .get(pop_us)
            .ok_or_else(|| ValuesError::MissingPopulation {
                question: q.id.clone(),
                population: pop_us.to_string(),
            })?;
        let target = q
            .human
            .get(pop_target)
            .ok_or_else(|| ValuesError::MissingPopulation {
                question: q.id.clone(),
                population: pop_target.to_string(),
            })?;
        let Some(model_dist) = model.get(&q.id) else {
            missing.push(q.id.clone());
            continue;
        };
        let d_us = metric.compute(model_dist, us)?;
        let d_target = metric.compute(model_dist, target)?;
        let leaning = if (d_target - d_us).abs() <= LEANING_TIE_EPS {
            tie_count += 1;
            Leaning::Tie
        } else if d_target < d_us {
            target_count += 1;
            Leaning::Target
        } else {
            us_count += 1;
            Leaning::Us
        };
        points.push(ShiftPoint {
            question_id: q.id.clone(),
            d_us,
            d_target,
            leaning,
        });
    }

    Ok(ShiftReport {
        metric,
        points,
        us_count,
        target_count,
        tie_count,
        missing,
    })
}

/// Paired comparison of per-question distances between a baseline and a
/// treated model.
#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct PairedImprovement {
    /// Two-sided signed-rank test over (treated, baseline) pairs.
    pub wilcoxon: WilcoxonResult,
    /// One-sided p for the alternative that treated distances are smaller.
    pub one_sided_p_less: f64,
}

/// Test whether treated distances improve on the baseline over the same
/// questions.
pub fn paired_improvement(
    baseline: &BTreeMap<String, f64>,
    treated: &BTreeMap<String, f64>,
) -> Result<PairedImprovement, ValuesError> {
    let only_baseline = baseline
        .keys()
        .filter(|k| !treated.contains_key(*k))
        .count();
    let only_treated = treated
        .keys()
        .filter(|k| !baseline.contains_key(*k))
        .count();
    if only_baseline > 0 || only_treated > 0 {
        return Err(ValuesError::KeyMismatch(only_baseline, only_treated));
    }
    let pairs: Vec<(f64, f64)> = baseline.iter().map(|(k, &b)| (treated[k], b)).collect();
    let wilcoxon = wilcoxon_signed_rank(&pairs)?;
    let (one_sided_p_less, _) = wilcoxon_one_sided_less(&pairs, DEFAULT_EXACT_CUTOFF)?;
    Ok(PairedImprovement {
        wilcoxon,
        one_sided_p_less,
    })
}
