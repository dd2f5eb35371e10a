//! Run configuration: a single TOML file with one section per subcommand.
//! Every key can be overridden by the CLI flag of the same name; flags win
//! over config values, which win over built-in defaults. Relative paths in
//! the file resolve against the config file's directory.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::commands::CliError;

#[derive(Debug, Clone, Default, Deserialize, Serialize)]
#[serde(rename_all = "kebab-case", default, deny_unknown_fields)]
pub struct Config {
    pub ingest: IngestSection,
    pub split: SplitSection,
    pub gen_prompts: GenPromptsSection,
    pub eval_assoc: EvalAssocSection,
    pub eval_rank: EvalRankSection,
    pub eval_psych: EvalPsychSection,
    pub eval_values: EvalValuesSection,
    pub tension_set: TensionSetSection,
    pub shift: ShiftSection,
    pub collect: CollectSection,
    pub endpoint: EndpointSection,
}

#[derive(Debug, Clone, Default, Deserialize, Serialize)]
#[serde(rename_all = "kebab-case", default, deny_unknown_fields)]
pub struct IngestSection {
    pub input: Option<PathBuf>,
    pub format: Option<String>,
    pub country: Option<String>,
    pub native_language: Option<String>,
}

#[derive(Debug, Clone, Default, Deserialize, Serialize)]
#[serde(rename_all = "kebab-case", default, deny_unknown_fields)]
pub struct SplitSection {
    pub seed: Option<u64>,
    pub ratios: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Default, Deserialize, Serialize)]
#[serde(rename_all = "kebab-case", default, deny_unknown_fields)]
pub struct GenPromptsSection {
    pub kinds: Option<String>,
    pub subset: Option<String>,
    pub language: Option<String>,
    pub seed: Option<u64>,
    pub rank_n: Option<usize>,
    pub lower_min: Option<u32>,
    pub lower_max: Option<u32>,
    pub upper_min: Option<u32>,
    pub upper_max: Option<u32>,
    pub mcq_high: Option<usize>,
    pub mcq_low: Option<usize>,
    pub mcq_indirect: Option<usize>,
    pub mcq_random: Option<usize>,
    pub mcq_fanout: Option<usize>,
    pub sft_template: Option<PathBuf>,
    pub rank_template: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Deserialize, Serialize)]
#[serde(rename_all = "kebab-case", default, deny_unknown_fields)]
pub struct EvalAssocSection {
    pub generations: Option<PathBuf>,
    pub ks: Option<String>,
    pub label: Option<String>,
}

#[derive(Debug, Clone, Default, Deserialize, Serialize)]
#[serde(rename_all = "kebab-case", default, deny_unknown_fields)]
pub struct EvalRankSection {
    pub responses: Option<PathBuf>,
    pub rank_n: Option<usize>,
    pub label: Option<String>,
}

#[derive(Debug, Clone, Default, Deserialize, Serialize)]
#[serde(rename_all = "kebab-case", default, deny_unknown_fields)]
pub struct EvalPsychSection {
    pub generations: Option<PathBuf>,
    pub valence_lexicon: Option<PathBuf>,
    pub arousal_lexicon: Option<PathBuf>,
    pub concreteness_lexicon: Option<PathBuf>,
    pub lemmas: Option<PathBuf>,
    pub language: Option<String>,
    pub top_n: Option<usize>,
    pub conc_boundary: Option<f64>,
    pub emotional_delta: Option<f64>,
    pub label: Option<String>,
}

#[derive(Debug, Clone, Default, Deserialize, Serialize)]
#[serde(rename_all = "kebab-case", default, deny_unknown_fields)]
pub struct EvalValuesSection {
    pub survey: Option<PathBuf>,
    pub scores: Option<PathBuf>,
    pub label: Option<String>,
    pub metric: Option<String>,
    pub drop_options: Option<String>,
    pub grid_step: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize, Serialize)]
#[serde(rename_all = "kebab-case", default, deny_unknown_fields)]
pub struct TensionSetSection {
    pub survey: Option<PathBuf>,
    pub pop_a: Option<String>,
    pub pop_b: Option<String>,
    pub tension_n: Option<usize>,
    pub drop_options: Option<String>,
}

#[derive(Debug, Clone, Default, Deserialize, Serialize)]
#[serde(rename_all = "kebab-case", default, deny_unknown_fields)]
pub struct ShiftSection {
    pub survey: Option<PathBuf>,
    pub scores: Option<PathBuf>,
    pub tension_set: Option<PathBuf>,
    pub metric: Option<String>,
    pub pop_us: Option<String>,
    pub pop_target: Option<String>,
    pub label: Option<String>,
    pub drop_options: Option<String>,
}

#[derive(Debug, Clone, Default, Deserialize, Serialize)]
#[serde(rename_all = "kebab-case", default, deny_unknown_fields)]
pub struct CollectSection {
    pub kind: Option<String>,
    pub prompts: Option<PathBuf>,
    pub survey: Option<PathBuf>,
    pub journal: Option<PathBuf>,
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Deserialize, Serialize)]
#[serde(rename_all = "kebab-case", default, deny_unknown_fields)]
pub struct EndpointSection {
    pub base_url: Option<String>,
    pub api_key_env: Option<String>,
    pub model_name: Option<String>,
    pub max_concurrent_requests: Option<usize>,
    pub timeout_secs: Option<u64>,
    pub max_retries: Option<u32>,
    pub initial_backoff_ms: Option<u64>,
    pub temperature: Option<f64>,
    pub max_tokens: Option<u32>,
    pub top_logprobs: Option<u32>,
}

impl Config {
    pub fn load(path: Option<&Path>) -> Result<Config, CliError> {
        let Some(path) = path else {
            return Ok(Config::default());
        };
        let text = std::fs::read_to_string(path).map_err(|e| {
            CliError::Validation(format!("cannot read config {}: {e}", path.display()))
        })?;
        let mut config: Config = toml::from_str(&text)
            .map_err(|e| CliError::Validation(format!("invalid config {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        config.resolve_paths(base);
        Ok(config)
    }

    /// Anchor every relative path in the file at the config's directory.
    fn resolve_paths(&mut self, base: &Path) {
        fn fix(base: &Path, p: &mut Option<PathBuf>) {
            if let Some(path) = p {
                if path.is_relative() {
                    *path = base.join(&path);
                }
            }
        }
        fix(base, &mut self.ingest.input);
        fix(base, &mut self.gen_prompts.sft_template);
        fix(base, &mut self.gen_prompts.rank_template);
        fix(base, &mut self.eval_assoc.generations);
        fix(base, &mut self.eval_rank.responses);
        fix(base, &mut self.eval_psych.generations);
        fix(base, &mut self.eval_psych.valence_lexicon);
        fix(base, &mut self.eval_psych.arousal_lexicon);
        fix(base, &mut self.eval_psych.concreteness_lexicon);
        fix(base, &mut self.eval_psych.lemmas);
        fix(base, &mut self.eval_values.survey);
        fix(base, &mut self.eval_values.scores);
        fix(base, &mut self.tension_set.survey);
        fix(base, &mut self.shift.survey);
        fix(base, &mut self.shift.scores);
        fix(base, &mut self.shift.tension_set);
        fix(base, &mut self.collect.prompts);
        fix(base, &mut self.collect.survey);
        fix(base, &mut self.collect.journal);
        fix(base, &mut self.collect.out);
    }
}

/// Parse a comma-separated list like `5,10,20,30,40`.
pub fn parse_usize_list(raw: &str) -> Result<Vec<usize>, CliError> {
    raw.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<usize>()
                .map_err(|_| CliError::Validation(format!("invalid integer '{s}' in list")))
        })
        .collect()
}

pub fn parse_ratio_list(raw: &str) -> Result<Vec<f64>, CliError> {
    raw.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<f64>()
                .map_err(|_| CliError::Validation(format!("invalid ratio '{s}' in list")))
        })
        .collect()
}

pub fn parse_string_list(raw: &str) -> Vec<String> {
    raw.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(str::to_string)
        .collect()
}
