//! Synthesis of the three task corpora from an association table: SFT
//! association-prediction examples, ranking examples for preference
//! optimization, and MCQ items with four distractor categories.
//!
//! Prompt wording lives in plain-text template files with bracketed
//! placeholders (`[CUE WORD]`, `[LOWER BOUND SIZE]`, `[UPPER BOUND SIZE]`,
//! `[LIST SIZE]`, `[CANDIDATE WORDS]`); English and Chinese defaults ship
//! with the crate and can be overridden per run.

use std::collections::BTreeSet;
use std::fs;
use std::io::{BufRead, Write};
use std::path::Path;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::AssociationTable;
use crate::Language;

#[derive(Debug, Error)]
pub enum PromptError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("unknown cue '{0}'")]
    UnknownCue(String),
    #[error("cue '{cue}' has {have} responses, need {need}")]
    NotEnoughResponses {
        cue: String,
        have: usize,
        need: usize,
    },
    #[error("cue '{cue}': not enough {category} candidates ({have} of {need})")]
    InsufficientCategory {
        cue: String,
        category: &'static str,
        have: usize,
        need: usize,
    },
    #[error("invalid bounds policy: {0}")]
    InvalidBounds(String),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

/// A prompt template with bracketed placeholders.
#[derive(Debug, Clone)]
pub struct PromptTemplate {
    text: String,
}

impl PromptTemplate {
    pub fn builtin_sft(language: Language) -> Self {
        let text = match language {
            Language::En => include_str!("templates/sft_en.txt"),
            Language::Zh => include_str!("templates/sft_zh.txt"),
        };
        PromptTemplate {
            text: text.to_string(),
        }
    }

    pub fn builtin_rank(language: Language) -> Self {
        let text = match language {
            Language::En => include_str!("templates/rank_en.txt"),
            Language::Zh => include_str!("templates/rank_zh.txt"),
        };
        PromptTemplate {
            text: text.to_string(),
        }
    }

    pub fn from_file(path: &Path) -> Result<Self, PromptError> {
        Ok(PromptTemplate {
            text: fs::read_to_string(path)?,
        })
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    fn render(&self, substitutions: &[(&str, String)]) -> String {
        let mut out = self.text.clone();
        for (placeholder, value) in substitutions {
            out = out.replace(placeholder, value);
        }
        out.trim_end().to_string()
    }
}

/// Ranges for drawing the SFT prompt's lower and upper association-count
/// bounds. Randomized per example so no fixed length pattern can be
/// memorized.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct BoundsPolicy {
    pub min_lower: u32,
    pub max_lower: u32,
    pub min_upper: u32,
    pub max_upper: u32,
}

impl Default for BoundsPolicy {
    fn default() -> Self {
        BoundsPolicy {
            min_lower: 10,
            max_lower: 20,
            min_upper: 40,
            max_upper: 80,
        }
    }
}

impl BoundsPolicy {
    pub fn validate(&self) -> Result<(), PromptError> {
        if self.min_lower == 0 || self.min_lower > self.max_lower {
            return Err(PromptError::InvalidBounds(format!(
                "lower range [{}, {}]",
                self.min_lower, self.max_lower
            )));
        }
        if self.min_upper > self.max_upper {
            return Err(PromptError::InvalidBounds(format!(
                "upper range [{}, {}]",
                self.min_upper, self.max_upper
            )));
        }
        if self.min_upper < self.max_lower {
            return Err(PromptError::InvalidBounds(format!(
                "upper range must start at or above the lower range ({} < {})",
                self.min_upper, self.max_lower
            )));
        }
        Ok(())
    }
}

/// One association-prediction training example: cue prompt plus the full
/// frequency-ordered response list as the target.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SftExample {
    pub cue: String,
    /// Frequency order from the table, most frequent first.
    pub ordered_responses: Vec<String>,
    pub lower_bound: u32,
    pub upper_bound: u32,
    pub rendered_prompt: String,
    /// Comma-joined `ordered_responses`.
    pub target: String,
}

/// Render an SFT example for a cue, drawing the size bounds uniformly from
/// the policy ranges.
pub fn make_sft_example<R: Rng>(
    cue: &str,
    table: &AssociationTable,
    policy: &BoundsPolicy,
    template: &PromptTemplate,
    rng: &mut R,
) -> Result<SftExample, PromptError> {
    policy.validate()?;
    let responses = table
        .responses(cue)
        .ok_or_else(|| PromptError::UnknownCue(cue.to_string()))?;
    let ordered_responses: Vec<String> = responses.iter().map(|(w, _)| w.clone()).collect();

    let lower_bound = rng.random_range(policy.min_lower..=policy.max_lower);
    let upper_bound = rng.random_range(policy.min_upper.max(lower_bound)..=policy.max_upper);

    let rendered_prompt = template.render(&[
        ("[LOWER BOUND SIZE]", lower_bound.to_string()),
        ("[UPPER BOUND SIZE]", upper_bound.to_string()),
        ("[CUE WORD]", cue.to_string()),
    ]);
    let target = ordered_responses.join(", ");
    Ok(SftExample {
        cue: cue.to_string(),
        ordered_responses,
        lower_bound,
        upper_bound,
        rendered_prompt,
        target,
    })
}

/// One ranking example: shuffled candidates in the prompt, frequency order
/// as the ground truth.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RankExample {
    pub cue: String,
    /// Candidates as presented, a seeded shuffle of the ground truth.
    pub candidates: Vec<String>,
    /// The table's frequency order for the same words.
    pub ground_truth_ranking: Vec<String>,
    pub rendered_prompt: String,
}

/// Render a ranking example over the cue's top-`n` responses. Candidates are
/// shuffled so the target order does not leak into the prompt.
pub fn make_rank_example<R: Rng>(
    cue: &str,
    table: &AssociationTable,
    n: usize,
    template: &PromptTemplate,
    rng: &mut R,
) -> Result<RankExample, PromptError> {
    if !table.contains_cue(cue) {
        return Err(PromptError::UnknownCue(cue.to_string()));
    }
    let ground_truth_ranking = table.top_k(cue, n).expect("cue checked above");
    if ground_truth_ranking.len() < n {
        return Err(PromptError::NotEnoughResponses {
            cue: cue.to_string(),
            have: ground_truth_ranking.len(),
            need: n,
        });
    }
    let mut candidates = ground_truth_ranking.clone();
    candidates.shuffle(rng);

    let rendered_prompt = template.render(&[
        ("[LIST SIZE]", n.to_string()),
        ("[CUE WORD]", cue.to_string()),
        ("[CANDIDATE WORDS]", candidates.join(", ")),
    ]);
    Ok(RankExample {
        cue: cue.to_string(),
        candidates,
        ground_truth_ranking,
        rendered_prompt,
    })
}

/// Option-set sizes for MCQ generation.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct McqConfig {
    pub k_high: usize,
    pub k_low: usize,
    pub k_indirect: usize,
    pub k_random: usize,
    /// How many of the cue's top associates to expand for indirect words.
    pub fanout: usize,
}

impl Default for McqConfig {
    fn default() -> Self {
        McqConfig {
            k_high: 4,
            k_low: 4,
            k_indirect: 3,
            k_random: 4,
            fanout: 3,
        }
    }
}

/// A four-category multiple-choice item. The correct option set is always
/// the high-frequency direct associations.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct McqItem {
    pub cue: String,
    pub high_freq_direct: Vec<String>,
    pub low_freq_direct: Vec<String>,
    /// Frequent associations of the cue's frequent associates, excluding
    /// anything directly associated with the cue.
    pub indirect: Vec<String>,
    /// Vocabulary words related to the cue neither directly nor indirectly.
    pub random: Vec<String>,
}

/// Build an MCQ item: top responses, a sample from the bottom half of the
/// response list, second-order associations, and unrelated vocabulary words.
pub fn make_mcq_item<R: Rng>(
    cue: &str,
    table: &AssociationTable,
    config: &McqConfig,
    rng: &mut R,
) -> Result<McqItem, PromptError> {
    let responses = table
        .responses(cue)
        .ok_or_else(|| PromptError::UnknownCue(cue.to_string()))?;
    let direct: Vec<String> = responses.iter().map(|(w, _)| w.clone()).collect();
    let direct_set: BTreeSet<&str> = direct.iter().map(String::as_str).collect();
    let cue_folded = cue.trim().to_lowercase();

    if direct.len() < config.k_high + config.k_low {
        return Err(PromptError::NotEnoughResponses {
            cue: cue.to_string(),
            have: direct.len(),
            need: config.k_high + config.k_low,
        });
    }
    let high_freq_direct: Vec<String> = direct[..config.k_high].to_vec();

    let bottom_half = &direct[direct.len() / 2..];
    let low_pool: Vec<&String> = bottom_half
        .iter()
        .filter(|w| !high_freq_direct.contains(w))
        .collect();
    if low_pool.len() < config.k_low {
        return Err(PromptError::InsufficientCategory {
            cue: cue.to_string(),
            category: "lowFreqDirect",
            have: low_pool.len(),
            need: config.k_low,
        });
    }
    let low_freq_direct: Vec<String> = low_pool
        .choose_multiple(rng, config.k_low)
        .map(|w| (*w).clone())
        .collect();

    // Second-order associations: walk the top associates in rank order and
    // collect their responses, skipping anything directly tied to the cue.
    let mut indirect_candidates: Vec<String> = Vec::new();
    let mut indirect_seen: BTreeSet<String> = BTreeSet::new();
    for associate in direct.iter().take(config.fanout) {
        let Some(assoc_responses) = table.responses(associate) else {
            continue;
        };
        for (word, _) in assoc_responses {
            if direct_set.contains(word.as_str()) || *word == cue_folded || word == cue {
                continue;
            }
            if indirect_seen.insert(word.clone()) {
                indirect_candidates.push(word.clone());
            }
        }
    }
    if indirect_candidates.len() < config.k_indirect {
        return Err(PromptError::InsufficientCategory {
            cue: cue.to_string(),
            category: "indirect",
            have: indirect_candidates.len(),
            need: config.k_indirect,
        });
    }
    let indirect: Vec<String> = indirect_candidates[..config.k_indirect].to_vec();

    let random_pool: Vec<String> = table
        .vocabulary()
        .into_iter()
        .filter(|w| {
            !direct_set.contains(w.as_str())
                && !indirect_seen.contains(w)
                && *w != cue_folded
                && w != cue
        })
        .collect();
    if random_pool.len() < config.k_random {
        return Err(PromptError::InsufficientCategory {
            cue: cue.to_string(),
            category: "random",
            have: random_pool.len(),
            need: config.k_random,
        });
    }
    let random: Vec<String> = random_pool
        .choose_multiple(rng, config.k_random)
        .cloned()
        .collect();

    Ok(McqItem {
        cue: cue.to_string(),
        high_freq_direct,
        low_freq_direct,
        indirect,
        random,
    })
}

/// Any synthesized example, ready for export.
#[derive(Debug, Clone)]
pub enum CorpusExample {
    Sft(SftExample),
    Rank(RankExample),
    Mcq(McqItem),
}

/// JSON-lines wire form of a [`CorpusExample`].
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind")]
pub enum ExportedExample {
    #[serde(rename = "sft", rename_all = "camelCase")]
    Sft {
        cue: String,
        prompt: String,
        target: String,
    },
    #[serde(rename = "rank", rename_all = "camelCase")]
    Rank {
        cue: String,
        prompt: String,
        ground_truth: Vec<String>,
    },
    #[serde(rename = "mcq", rename_all = "camelCase")]
    Mcq {
        cue: String,
        options: McqOptions,
        correct_category: String,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(rename_all = "camelCase")]
pub struct McqOptions {
    pub high_freq_direct: Vec<String>,
    pub low_freq_direct: Vec<String>,
    pub indirect: Vec<String>,
    pub random: Vec<String>,
}

impl From<&CorpusExample> for ExportedExample {
    fn from(example: &CorpusExample) -> Self {
        match example {
            CorpusExample::Sft(e) => ExportedExample::Sft {
                cue: e.cue.clone(),
                prompt: e.rendered_prompt.clone(),
                target: e.target.clone(),
            },
            CorpusExample::Rank(e) => ExportedExample::Rank {
                cue: e.cue.clone(),
                prompt: e.rendered_prompt.clone(),
                ground_truth: e.ground_truth_ranking.clone(),
            },
            CorpusExample::Mcq(e) => ExportedExample::Mcq {
                cue: e.cue.clone(),
                options: McqOptions {
                    high_freq_direct: e.high_freq_direct.clone(),
                    low_freq_direct: e.low_freq_direct.clone(),
                    indirect: e.indirect.clone(),
                    random: e.random.clone(),
                },
                correct_category: "highFreqDirect".to_string(),
            },
        }
    }
}

/// Write one JSON object per example. Returns the number of lines written;
/// an empty input produces an empty file.
pub fn export_corpus<W: Write>(examples: &[CorpusExample], mut w: W) -> Result<usize, PromptError> {
    for example in examples {
        let line = serde_json::to_string(&ExportedExample::from(example))?;
        writeln!(w, "{line}")?;
    }
    Ok(examples.len())
}

/// Read back a corpus file written by [`export_corpus`].
pub fn read_corpus<R: BufRead>(r: R) -> Result<Vec<ExportedExample>, PromptError> {
    let mut examples = Vec::new();
    for line in r.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        examples.push(serde_json::from_str(&line)?);
    }
    Ok(examples)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{aggregate, AssociationRecord, ResponsePosition};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn record(cue: &str, response: &str, count: usize) -> Vec<AssociationRecord> {
        (0..count)
            .map(|_| AssociationRecord {
                cue: cue.to_string(),
                response: response.to_string(),
                participant_id: None,
                country: None,
                native_language: None,
                position: ResponsePosition::Unknown,
            })
            .collect()
    }

    fn table_with(entries: &[(&str, &[&str])]) -> AssociationTable {
        let mut records = Vec::new();
        for (cue, responses) in entries {
            for (i, response) in responses.iter().enumerate() {
                records.extend(record(cue, response, responses.len() - i + 1));
            }
        }
        aggregate(&records).unwrap()
    }

    fn apple_table() -> AssociationTable {
        table_with(&[
            (
                "apple",
                &[
                    "fruit", "red", "pear", "tree", "computer", "pie", "stem", "sauce", "farm",
                    "healthy", "core", "juice",
                ],
            ),
            ("computer", &["internet", "mouse", "machine", "screen"]),
            ("fruit", &["banana", "orange", "salad"]),
            ("red", &["blue", "color", "rose"]),
            ("noise", &["loud", "sound", "quiet"]),
        ])
    }

    #[test]
    fn sft_example_renders_bounds_and_target() {
        let table = apple_table();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let policy = BoundsPolicy {
            min_lower: 12,
            max_lower: 12,
            min_upper: 50,
            max_upper: 50,
        };
        let tpl = PromptTemplate::builtin_sft(Language::En);
        let e = make_sft_example("apple", &table, &policy, &tpl, &mut rng).unwrap();
        assert_eq!(e.lower_bound, 12);
        assert_eq!(e.upper_bound, 50);
        assert!(e
            .rendered_prompt
            .contains("List a target of 12 to 50 words"));
        assert!(e.rendered_prompt.contains("apple"));
        assert!(!e.rendered_prompt.contains("[LOWER BOUND SIZE]"));
        assert!(!e.rendered_prompt.contains("[CUE WORD]"));
        assert!(e.target.starts_with("fruit, "));
    }

    #[test]
    fn sft_single_response_target() {
        let table = table_with(&[("lone", &["only"])]);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let tpl = PromptTemplate::builtin_sft(Language::En);
        let e = make_sft_example("lone", &table, &BoundsPolicy::default(), &tpl, &mut rng).unwrap();
        assert_eq!(e.target, "only");
    }

    #[test]
    fn sft_is_deterministic_per_seed() {
        let table = apple_table();
        let tpl = PromptTemplate::builtin_sft(Language::En);
        let mut a = ChaCha8Rng::seed_from_u64(9);
        let mut b = ChaCha8Rng::seed_from_u64(9);
        let ea = make_sft_example("apple", &table, &BoundsPolicy::default(), &tpl, &mut a).unwrap();
        let eb = make_sft_example("apple", &table, &BoundsPolicy::default(), &tpl, &mut b).unwrap();
        assert_eq!(ea, eb);
    }

    #[test]
    fn sft_unknown_cue_errors() {
        let table = apple_table();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let tpl = PromptTemplate::builtin_sft(Language::En);
        assert!(matches!(
            make_sft_example("ghost", &table, &BoundsPolicy::default(), &tpl, &mut rng),
            Err(PromptError::UnknownCue(_))
        ));
    }

    #[test]
    fn rank_example_is_permutation() {
        let table = apple_table();
        let tpl = PromptTemplate::builtin_rank(Language::En);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let e = make_rank_example("apple", &table, 10, &tpl, &mut rng).unwrap();
        assert_eq!(e.candidates.len(), 10);
        let mut sorted_c = e.candidates.clone();
        let mut sorted_g = e.ground_truth_ranking.clone();
        sorted_c.sort();
        sorted_g.sort();
        assert_eq!(sorted_c, sorted_g);
        assert!(e.rendered_prompt.contains("Final Ranking:"));
        assert!(e.rendered_prompt.contains("rank 10"));
        assert!(e.rendered_prompt.contains(&e.candidates.join(", ")));
    }

    #[test]
    fn rank_same_seed_same_shuffle() {
        let table = apple_table();
        let tpl = PromptTemplate::builtin_rank(Language::En);
        let mut a = ChaCha8Rng::seed_from_u64(3);
        let mut b = ChaCha8Rng::seed_from_u64(3);
        assert_eq!(
            make_rank_example("apple", &table, 10, &tpl, &mut a).unwrap(),
            make_rank_example("apple", &table, 10, &tpl, &mut b).unwrap()
        );
    }

    #[test]
    fn rank_too_few_responses_errors() {
        let table = apple_table();
        let tpl = PromptTemplate::builtin_rank(Language::En);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        assert!(matches!(
            make_rank_example("computer", &table, 10, &tpl, &mut rng),
            Err(PromptError::NotEnoughResponses {
                have: 4,
                need: 10,
                ..
            })
        ));
    }

    #[test]
    fn mcq_categories_follow_the_graph() {
        let table = apple_table();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let config = McqConfig {
            k_high: 4,
            k_low: 3,
            k_indirect: 10,
            k_random: 3,
            fanout: 5,
        };
        let item = make_mcq_item("apple", &table, &config, &mut rng).unwrap();
        assert_eq!(item.high_freq_direct, vec!["fruit", "red", "pear", "tree"]);
        // "computer" is a frequent associate; its responses feed the
        // indirect pool
        assert!(item.indirect.contains(&"internet".to_string()));
        // disjointness across all four categories
        let mut all: Vec<&String> = item
            .high_freq_direct
            .iter()
            .chain(&item.low_freq_direct)
            .chain(&item.indirect)
            .chain(&item.random)
            .collect();
        let before = all.len();
        all.sort();
        all.dedup();
        assert_eq!(all.len(), before);
    }

    #[test]
    fn mcq_insufficient_candidates_names_category() {
        let table = table_with(&[("tiny", &["a", "b", "c", "d"])]);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let config = McqConfig::default();
        match make_mcq_item("tiny", &table, &config, &mut rng) {
            Err(PromptError::NotEnoughResponses { .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
        // enough direct words but no second-order graph
        let table = table_with(&[("flat", &["a", "b", "c", "d", "e", "f", "g", "h", "i", "j"])]);
        match make_mcq_item("flat", &table, &config, &mut rng) {
            Err(PromptError::InsufficientCategory {
                category: "indirect",
                ..
            }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn export_and_read_round_trip() {
        let table = apple_table();
        let tpl_sft = PromptTemplate::builtin_sft(Language::En);
        let tpl_rank = PromptTemplate::builtin_rank(Language::En);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let examples = vec![
            CorpusExample::Sft(
                make_sft_example(
                    "apple",
                    &table,
                    &BoundsPolicy::default(),
                    &tpl_sft,
                    &mut rng,
                )
                .unwrap(),
            ),
            CorpusExample::Rank(
                make_rank_example("apple", &table, 10, &tpl_rank, &mut rng).unwrap(),
            ),
            CorpusExample::Mcq(
                make_mcq_item(
                    "apple",
                    &table,
                    &McqConfig {
                        k_low: 3,
                        k_random: 3,
                        fanout: 5,
                        ..McqConfig::default()
                    },
                    &mut rng,
                )
                .unwrap(),
            ),
        ];
        let mut buf = Vec::new();
        let written = export_corpus(&examples, &mut buf).unwrap();
        assert_eq!(written, 3);
        assert_eq!(buf.iter().filter(|&&b| b == b'\n').count(), 3);
        let back = read_corpus(&buf[..]).unwrap();
        assert_eq!(back.len(), 3);
        match &back[0] {
            ExportedExample::Sft { cue, target, .. } => {
                assert_eq!(cue, "apple");
                assert!(target.starts_with("fruit"));
            }
            other => panic!("unexpected {other:?}"),
        }
        match &back[1] {
            ExportedExample::Rank { ground_truth, .. } => assert_eq!(ground_truth.len(), 10),
            other => panic!("unexpected {other:?}"),
        }

        let empty = export_corpus(&[], &mut Vec::new()).unwrap();
        assert_eq!(empty, 0);
    }

    #[test]
    fn zh_templates_render() {
        let tpl = PromptTemplate::builtin_sft(Language::Zh);
        let table = apple_table();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let e =
            make_sft_example("apple", &table, &BoundsPolicy::default(), &tpl, &mut rng).unwrap();
        assert!(e.rendered_prompt.contains("提示词"));
        assert!(!e.rendered_prompt.contains("[LOWER BOUND SIZE]"));
    }
}
