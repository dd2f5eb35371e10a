//! Value-alignment subcommands: eval-values, tension-set, shift, collect.

use std::collections::BTreeMap;
use std::io::BufRead;
use std::path::PathBuf;

use clap::Args;
use serde::{Deserialize, Serialize};

use culture_probe_core::modelio::{
    self, collect as collect_jobs, read_option_scores, EndpointConfig, OptionScoreRecord,
    OutputKind, PromptJob, RetryPolicy,
};
use culture_probe_core::values::{
    load_survey, renormalize_log_scores, select_tension_set, shift_analysis, threshold_curve,
    AnswerDistribution, DistanceMetric, DivergenceScore, SurveyLoadOptions, SurveyQuestion,
    TensionSet,
};

use crate::commands::{require, to_json_bytes, write_artifact, CliError, RunPaths};
use crate::config::{parse_string_list, Config};
use crate::manifest::RunManifest;

fn survey_options(drop: Option<&str>) -> SurveyLoadOptions {
    SurveyLoadOptions {
        drop_options: drop.map(parse_string_list).unwrap_or_default(),
    }
}

/// Normalized model distributions keyed by question, validated against the
/// survey's option counts.
fn model_distributions(
    records: Vec<OptionScoreRecord>,
    questions: &[SurveyQuestion],
) -> (BTreeMap<String, AnswerDistribution>, Vec<String>) {
    let by_id: BTreeMap<&str, &SurveyQuestion> =
        questions.iter().map(|q| (q.id.as_str(), q)).collect();
    let mut distributions = BTreeMap::new();
    let mut problems = Vec::new();
    for record in records {
        let Some(question) = by_id.get(record.question_id.as_str()) else {
            problems.push(format!(
                "question '{}' not in the survey; excluded",
                record.question_id
            ));
            continue;
        };
        if record.log_scores.len() != question.options.len() {
            problems.push(format!(
                "question '{}': {} scores for {} options; excluded",
                record.question_id,
                record.log_scores.len(),
                question.options.len()
            ));
            continue;
        }
        if distributions.contains_key(&record.question_id) {
            problems.push(format!(
                "duplicate scores for question '{}'; first kept",
                record.question_id
            ));
            continue;
        }
        match renormalize_log_scores(&record.log_scores) {
            Ok(distribution) => {
                distributions.insert(record.question_id, distribution);
            }
            Err(e) => problems.push(format!("question '{}': {e}", record.question_id)),
        }
    }
    (distributions, problems)
}

#[derive(Debug, Args)]
pub struct EvalValuesArgs {
    /// Survey JSON with per-population answer counts
    #[arg(long)]
    pub survey: Option<PathBuf>,
    /// Model option scores: JSON lines {questionId, logScores[] | probs[]}
    #[arg(long)]
    pub scores: Option<PathBuf>,
    #[arg(long)]
    pub label: Option<String>,
    /// Distance for the threshold curve: combo | js | emd
    #[arg(long)]
    pub metric: Option<String>,
    /// Comma list of option labels to drop before normalization
    #[arg(long)]
    pub drop_options: Option<String>,
    /// Threshold grid step in (0, 1]
    #[arg(long)]
    pub grid_step: Option<f64>,
}

#[derive(Debug, Serialize)]
#[serde(rename_all = "camelCase")]
struct PopulationMeans {
    mean_js: f64,
    mean_emd: f64,
    mean_combo: f64,
    questions: usize,
}

#[derive(Debug, Serialize)]
#[serde(rename_all = "camelCase")]
struct ValuesSummary {
    label: String,
    metric: DistanceMetric,
    per_population: BTreeMap<String, PopulationMeans>,
    missing_scores: Vec<String>,
    problems: Vec<String>,
}

pub fn cmd_eval_values(
    args: &EvalValuesArgs,
    config: &Config,
    paths: &RunPaths,
    manifest: &mut RunManifest,
) -> Result<(), CliError> {
    let section = &config.eval_values;
    let survey_path = require(args.survey.clone().or(section.survey.clone()), "survey")?;
    let scores_path = require(args.scores.clone().or(section.scores.clone()), "scores")?;
    let label = args
        .label
        .clone()
        .or(section.label.clone())
        .unwrap_or_else(|| "model".to_string());
    let metric: DistanceMetric = args
        .metric
        .clone()
        .or(section.metric.clone())
        .unwrap_or_else(|| "js".to_string())
        .parse()
        .map_err(CliError::Validation)?;
    let grid_step = args.grid_step.or(section.grid_step).unwrap_or(0.05);
    if !(0.0..=1.0).contains(&grid_step) || grid_step <= 0.0 {
        return Err(CliError::Validation(format!(
            "--grid-step must be in (0, 1], got {grid_step}"
        )));
    }
    let drop = args.drop_options.clone().or(section.drop_options.clone());

    manifest.record_input(&survey_path)?;
    manifest.record_input(&scores_path)?;
    let questions = load_survey(&survey_path, &survey_options(drop.as_deref()))?;
    let (records, line_errors) = read_option_scores(&scores_path)?;
    for error in &line_errors {
        eprintln!("warning: scores line {}: {}", error.line, error.message);
    }
    let (distributions, problems) = model_distributions(records, &questions);
    for problem in &problems {
        eprintln!("warning: {problem}");
    }

    let populations: Vec<String> = questions
        .iter()
        .flat_map(|q| q.human.keys().cloned())
        .collect::<std::collections::BTreeSet<_>>()
        .into_iter()
        .collect();

    // per-question divergences to every population
    let mut rows: Vec<(String, Option<String>, BTreeMap<String, DivergenceScore>)> = Vec::new();
    let mut missing_scores = Vec::new();
    for question in &questions {
        let Some(model) = distributions.get(&question.id) else {
            missing_scores.push(question.id.clone());
            continue;
        };
        let mut scores = BTreeMap::new();
        for population in &populations {
            if let Some(human) = question.human.get(population) {
                scores.insert(
                    population.clone(),
                    culture_probe_core::values::combo_divergence(model, human)?,
                );
            }
        }
        rows.push((question.id.clone(), question.topic.clone(), scores));
    }
    rows.sort_by(|a, b| a.0.cmp(&b.0));
    if rows.is_empty() {
        return Err(CliError::Validation(
            "no model scores matched the survey questions".to_string(),
        ));
    }

    // CSV: one row per question, js/emd/combo per population
    let mut csv_writer = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["questionId".to_string(), "topic".to_string()];
    for population in &populations {
        header.push(format!("js_{population}"));
        header.push(format!("emd_{population}"));
        header.push(format!("combo_{population}"));
    }
    csv_writer
        .write_record(&header)
        .map_err(|e| CliError::Io(e.to_string()))?;
    for (id, topic, scores) in &rows {
        let mut row = vec![id.clone(), topic.clone().unwrap_or_default()];
        for population in &populations {
            match scores.get(population) {
                Some(score) => {
                    row.push(score.js.to_string());
                    row.push(score.emd.to_string());
                    row.push(score.combo.to_string());
                }
                None => {
                    row.push(String::new());
                    row.push(String::new());
                    row.push(String::new());
                }
            }
        }
        csv_writer
            .write_record(&row)
            .map_err(|e| CliError::Io(e.to_string()))?;
    }
    let csv_bytes = csv_writer
        .into_inner()
        .map_err(|e| CliError::Io(e.to_string()))?;
    write_artifact(&paths.values_csv(&label), &csv_bytes)?;

    // summary means per population
    let mut per_population = BTreeMap::new();
    for population in &populations {
        let scores: Vec<&DivergenceScore> = rows
            .iter()
            .filter_map(|(_, _, s)| s.get(population))
            .collect();
        if scores.is_empty() {
            continue;
        }
        let n = scores.len() as f64;
        per_population.insert(
            population.clone(),
            PopulationMeans {
                mean_js: scores.iter().map(|s| s.js).sum::<f64>() / n,
                mean_emd: scores.iter().map(|s| s.emd).sum::<f64>() / n,
                mean_combo: scores.iter().map(|s| s.combo).sum::<f64>() / n,
                questions: scores.len(),
            },
        );
    }
    let summary = ValuesSummary {
        label: label.clone(),
        metric,
        per_population,
        missing_scores,
        problems,
    };
    write_artifact(&paths.values_json(&label), &to_json_bytes(&summary)?)?;

    // threshold curve per population under the configured metric
    let steps = (1.0 / grid_step).round() as usize;
    let grid: Vec<f64> = (0..=steps).map(|i| i as f64 * grid_step).collect();
    let mut curve_writer = csv::Writer::from_writer(Vec::new());
    curve_writer
        .write_record(["population", "threshold", "fraction"])
        .map_err(|e| CliError::Io(e.to_string()))?;
    for population in &populations {
        let distances: BTreeMap<String, f64> = rows
            .iter()
            .filter_map(|(id, _, scores)| {
                scores.get(population).map(|s| {
                    let d = match metric {
                        DistanceMetric::Js => s.js,
                        DistanceMetric::Emd => s.emd,
                        DistanceMetric::Combo => s.combo,
                    };
                    (id.clone(), d)
                })
            })
            .collect();
        for (threshold, fraction) in threshold_curve(&distances, &grid)? {
            curve_writer
                .write_record([
                    population.as_str(),
                    &format!("{threshold:.4}"),
                    &fraction.to_string(),
                ])
                .map_err(|e| CliError::Io(e.to_string()))?;
        }
    }
    let curve_bytes = curve_writer
        .into_inner()
        .map_err(|e| CliError::Io(e.to_string()))?;
    write_artifact(&paths.curve_csv(&label), &curve_bytes)?;

    manifest.record_output(&paths.values_csv(&label))?;
    manifest.record_output(&paths.values_json(&label))?;
    manifest.record_output(&paths.curve_csv(&label))?;
    manifest.snapshot_config(
        "eval-values",
        &serde_json::json!({
            "survey": survey_path.display().to_string(),
            "scores": scores_path.display().to_string(),
            "label": label, "metric": metric.to_string(), "gridStep": grid_step,
        }),
    );

    for (population, means) in &summary.per_population {
        println!(
            "{population}: JS={:.4} EMD={:.4} combo={:.4} over {} questions",
            means.mean_js, means.mean_emd, means.mean_combo, means.questions
        );
    }
    Ok(())
}

#[derive(Debug, Args)]
pub struct TensionSetArgs {
    #[arg(long)]
    pub survey: Option<PathBuf>,
    /// First population (x-axis in shift plots)
    #[arg(long)]
    pub pop_a: Option<String>,
    /// Second population
    #[arg(long)]
    pub pop_b: Option<String>,
    /// How many top-divergence questions to keep
    #[arg(long)]
    pub tension_n: Option<usize>,
    #[arg(long)]
    pub drop_options: Option<String>,
}

pub fn cmd_tension_set(
    args: &TensionSetArgs,
    config: &Config,
    paths: &RunPaths,
    manifest: &mut RunManifest,
) -> Result<(), CliError> {
    let section = &config.tension_set;
    let survey_path = require(args.survey.clone().or(section.survey.clone()), "survey")?;
    let pop_a = args
        .pop_a
        .clone()
        .or(section.pop_a.clone())
        .unwrap_or_else(|| "US".to_string());
    let pop_b = args
        .pop_b
        .clone()
        .or(section.pop_b.clone())
        .unwrap_or_else(|| "CN".to_string());
    let tension_n = args.tension_n.or(section.tension_n).unwrap_or(50);
    let drop = args.drop_options.clone().or(section.drop_options.clone());

    manifest.record_input(&survey_path)?;
    let questions = load_survey(&survey_path, &survey_options(drop.as_deref()))?;
    let set = select_tension_set(&questions, &pop_a, &pop_b, tension_n)?;
    if set.truncated {
        eprintln!(
            "warning: requested {tension_n} questions but the survey has only {}",
            set.entries.len()
        );
    }

    write_artifact(&paths.tension_json(), &to_json_bytes(&set)?)?;
    manifest.record_output(&paths.tension_json())?;
    manifest.snapshot_config(
        "tension-set",
        &serde_json::json!({"survey": survey_path.display().to_string(), "popA": pop_a, "popB": pop_b, "tensionN": tension_n}),
    );

    println!(
        "tension set: top {} of {} questions -> {}",
        set.entries.len(),
        questions.len(),
        paths.tension_json().display()
    );
    Ok(())
}

#[derive(Debug, Args)]
pub struct ShiftArgs {
    #[arg(long)]
    pub survey: Option<PathBuf>,
    /// Model option scores JSON lines
    #[arg(long)]
    pub scores: Option<PathBuf>,
    /// Tension set JSON (defaults to the run's eval/tension_set.json)
    #[arg(long)]
    pub tension_set: Option<PathBuf>,
    /// Distance metric: combo | js | emd
    #[arg(long)]
    pub metric: Option<String>,
    #[arg(long)]
    pub pop_us: Option<String>,
    #[arg(long)]
    pub pop_target: Option<String>,
    #[arg(long)]
    pub label: Option<String>,
    #[arg(long)]
    pub drop_options: Option<String>,
}

pub fn cmd_shift(
    args: &ShiftArgs,
    config: &Config,
    paths: &RunPaths,
    manifest: &mut RunManifest,
) -> Result<(), CliError> {
    let section = &config.shift;
    let survey_path = require(args.survey.clone().or(section.survey.clone()), "survey")?;
    let scores_path = require(args.scores.clone().or(section.scores.clone()), "scores")?;
    let tension_path = args
        .tension_set
        .clone()
        .or(section.tension_set.clone())
        .unwrap_or_else(|| paths.tension_json());
    let metric: DistanceMetric = args
        .metric
        .clone()
        .or(section.metric.clone())
        .unwrap_or_else(|| "combo".to_string())
        .parse()
        .map_err(CliError::Validation)?;
    let pop_us = args
        .pop_us
        .clone()
        .or(section.pop_us.clone())
        .unwrap_or_else(|| "US".to_string());
    let pop_target = args
        .pop_target
        .clone()
        .or(section.pop_target.clone())
        .unwrap_or_else(|| "CN".to_string());
    let label = args
        .label
        .clone()
        .or(section.label.clone())
        .unwrap_or_else(|| "model".to_string());
    let drop = args.drop_options.clone().or(section.drop_options.clone());

    if !tension_path.exists() {
        return Err(CliError::Validation(format!(
            "{} not found; run `culture-probe tension-set` first or pass --tension-set",
            tension_path.display()
        )));
    }
    manifest.record_input(&survey_path)?;
    manifest.record_input(&scores_path)?;
    let questions = load_survey(&survey_path, &survey_options(drop.as_deref()))?;
    let tension_bytes = manifest.read_verified(&tension_path)?;
    let tension: TensionSet = serde_json::from_slice(&tension_bytes)
        .map_err(|e| CliError::Validation(format!("corrupt tension set: {e}")))?;

    // keep tension order
    let by_id: BTreeMap<&str, &SurveyQuestion> =
        questions.iter().map(|q| (q.id.as_str(), q)).collect();
    let mut subset = Vec::new();
    for entry in &tension.entries {
        match by_id.get(entry.id.as_str()) {
            Some(q) => subset.push((*q).clone()),
            None => {
                return Err(CliError::Validation(format!(
                    "tension-set question '{}' missing from the survey",
                    entry.id
                )))
            }
        }
    }

    let (records, line_errors) = read_option_scores(&scores_path)?;
    for error in &line_errors {
        eprintln!("warning: scores line {}: {}", error.line, error.message);
    }
    let (distributions, problems) = model_distributions(records, &questions);
    for problem in &problems {
        eprintln!("warning: {problem}");
    }

    let report = shift_analysis(&distributions, &subset, metric, &pop_us, &pop_target)?;
    for id in &report.missing {
        eprintln!("warning: no model scores for tension question '{id}'; excluded");
    }

    let mut csv_writer = csv::Writer::from_writer(Vec::new());
    csv_writer
        .write_record(["questionId", "dUs", "dTarget", "leaning"])
        .map_err(|e| CliError::Io(e.to_string()))?;
    for point in &report.points {
        let leaning = match point.leaning {
            culture_probe_core::values::Leaning::Us => "us",
            culture_probe_core::values::Leaning::Target => "target",
            culture_probe_core::values::Leaning::Tie => "tie",
        };
        csv_writer
            .write_record([
                point.question_id.as_str(),
                &point.d_us.to_string(),
                &point.d_target.to_string(),
                leaning,
            ])
            .map_err(|e| CliError::Io(e.to_string()))?;
    }
    let csv_bytes = csv_writer
        .into_inner()
        .map_err(|e| CliError::Io(e.to_string()))?;
    write_artifact(&paths.shift_csv(&label), &csv_bytes)?;
    write_artifact(&paths.shift_json(&label), &to_json_bytes(&report)?)?;
    manifest.record_output(&paths.shift_csv(&label))?;
    manifest.record_output(&paths.shift_json(&label))?;
    manifest.snapshot_config(
        "shift",
        &serde_json::json!({
            "survey": survey_path.display().to_string(),
            "scores": scores_path.display().to_string(),
            "metric": metric.to_string(), "popUs": pop_us, "popTarget": pop_target, "label": label,
        }),
    );

    println!(
        "{}: {} {}-leaning / {} us-leaning / {} ties over {} questions",
        label,
        report.target_count,
        pop_target,
        report.us_count,
        report.tie_count,
        report.points.len()
    );
    Ok(())
}

#[derive(Debug, Args)]
pub struct CollectArgs {
    /// What to collect: generations | rankings | option-scores
    #[arg(long)]
    pub kind: Option<String>,
    /// Prompt jobs: JSON lines {cue|questionId, prompt, optionSymbols?}
    #[arg(long)]
    pub prompts: Option<PathBuf>,
    /// Render basic option-score prompts from this survey instead of --prompts
    #[arg(long)]
    pub survey: Option<PathBuf>,
    /// Journal path (defaults to <run-dir>/journal/<kind>.jsonl)
    #[arg(long)]
    pub journal: Option<PathBuf>,
    /// Output records path (defaults to <run-dir>/outputs/<kind>.jsonl)
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub base_url: Option<String>,
    #[arg(long)]
    pub model_name: Option<String>,
    /// Environment variable that holds the API key
    #[arg(long)]
    pub api_key_env: Option<String>,
    #[arg(long)]
    pub max_concurrent_requests: Option<usize>,
    #[arg(long)]
    pub timeout_secs: Option<u64>,
    #[arg(long)]
    pub max_retries: Option<u32>,
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "camelCase")]
struct PromptLine {
    #[serde(alias = "questionId")]
    cue: Option<String>,
    id: Option<String>,
    prompt: String,
    #[serde(default)]
    option_symbols: Option<Vec<String>>,
}

fn endpoint_config(args: &CollectArgs, config: &Config) -> Result<EndpointConfig, CliError> {
    let section = &config.endpoint;
    let endpoint = EndpointConfig {
        base_url: require(
            args.base_url.clone().or(section.base_url.clone()),
            "base-url",
        )?,
        api_key_env: args.api_key_env.clone().or(section.api_key_env.clone()),
        model_name: require(
            args.model_name.clone().or(section.model_name.clone()),
            "model-name",
        )?,
        max_concurrent_requests: args
            .max_concurrent_requests
            .or(section.max_concurrent_requests)
            .unwrap_or(4),
        timeout_secs: args.timeout_secs.or(section.timeout_secs).unwrap_or(60),
        retry: RetryPolicy {
            max_retries: args.max_retries.or(section.max_retries).unwrap_or(3),
            initial_backoff_ms: section.initial_backoff_ms.unwrap_or(500),
        },
        temperature: section.temperature.unwrap_or(0.0),
        max_tokens: section.max_tokens.unwrap_or(1024),
        top_logprobs: section.top_logprobs.unwrap_or(20),
    };
    endpoint.validate()?;
    Ok(endpoint)
}

/// Basic single-message survey prompt: question text plus numbered options.
fn render_survey_prompt(question: &SurveyQuestion) -> String {
    let mut prompt = question.text.clone();
    prompt.push('\n');
    for (i, option) in question.options.iter().enumerate() {
        prompt.push_str(&format!("{}: {option}\n", i + 1));
    }
    prompt.push_str("Answer with the number of your choice only.");
    prompt
}

pub fn cmd_collect(
    args: &CollectArgs,
    config: &Config,
    paths: &RunPaths,
    manifest: &mut RunManifest,
) -> Result<(), CliError> {
    let section = &config.collect;
    let kind_raw = args
        .kind
        .clone()
        .or(section.kind.clone())
        .unwrap_or_else(|| "generations".to_string());
    let kind = match kind_raw.as_str() {
        "generations" => OutputKind::Generation,
        "rankings" => OutputKind::Ranking,
        "option-scores" => OutputKind::OptionScores,
        other => {
            return Err(CliError::Validation(format!(
                "unknown collect kind '{other}' (expected generations, rankings, or option-scores)"
            )))
        }
    };
    let journal = args
        .journal
        .clone()
        .or(section.journal.clone())
        .unwrap_or_else(|| paths.root.join("journal").join(format!("{kind_raw}.jsonl")));
    let out = args
        .out
        .clone()
        .or(section.out.clone())
        .unwrap_or_else(|| paths.root.join("outputs").join(format!("{kind_raw}.jsonl")));
    let endpoint = endpoint_config(args, config)?;

    let mut jobs: Vec<PromptJob> = Vec::new();
    if let Some(prompts_path) = args.prompts.clone().or(section.prompts.clone()) {
        manifest.record_input(&prompts_path)?;
        let file = std::fs::File::open(&prompts_path)
            .map_err(|e| CliError::Io(format!("cannot open {}: {e}", prompts_path.display())))?;
        for (i, line) in std::io::BufReader::new(file).lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let parsed: PromptLine = serde_json::from_str(&line).map_err(|e| {
                CliError::Validation(format!("{} line {}: {e}", prompts_path.display(), i + 1))
            })?;
            let id = parsed.cue.or(parsed.id).ok_or_else(|| {
                CliError::Validation(format!(
                    "{} line {}: missing cue/id/questionId",
                    prompts_path.display(),
                    i + 1
                ))
            })?;
            jobs.push(PromptJob {
                id,
                kind,
                prompt: parsed.prompt,
                option_symbols: parsed.option_symbols.unwrap_or_default(),
            });
        }
    } else if kind == OutputKind::OptionScores {
        let survey_path = require(
            args.survey.clone().or(section.survey.clone()),
            "survey (or --prompts)",
        )?;
        manifest.record_input(&survey_path)?;
        let questions = load_survey(&survey_path, &SurveyLoadOptions::default())?;
        for question in &questions {
            jobs.push(PromptJob {
                id: question.id.clone(),
                kind,
                prompt: render_survey_prompt(question),
                option_symbols: (1..=question.options.len())
                    .map(|i| i.to_string())
                    .collect(),
            });
        }
    } else {
        return Err(CliError::Validation(
            "collect needs --prompts (JSON lines with cue and prompt)".to_string(),
        ));
    }
    if kind == OutputKind::OptionScores {
        for job in &jobs {
            if job.option_symbols.is_empty() {
                return Err(CliError::Validation(format!(
                    "job '{}' lacks optionSymbols required for option-scores",
                    job.id
                )));
            }
        }
    }

    let outcome = collect_jobs(&endpoint, &jobs, &journal)?;
    for id in &outcome.failed {
        eprintln!("warning: job '{id}' failed after retries");
    }

    let mut buffer = Vec::new();
    match kind {
        OutputKind::OptionScores => {
            modelio::write_option_score_outputs(&outcome.option_scores, &mut buffer)?
        }
        _ => modelio::write_generation_outputs(&outcome.generations, &mut buffer)?,
    }
    write_artifact(&out, &buffer)?;
    manifest.record_output(&out)?;
    manifest.snapshot_config(
        "collect",
        &serde_json::json!({
            "kind": kind_raw, "journal": journal.display().to_string(),
            "out": out.display().to_string(), "model": endpoint.model_name,
        }),
    );

    let collected = match kind {
        OutputKind::OptionScores => outcome.option_scores.len(),
        _ => outcome.generations.len(),
    };
    println!(
        "collected {collected} records ({} skipped, {} failed) -> {}",
        outcome.skipped,
        outcome.failed.len(),
        out.display()
    );
    Ok(())
}
