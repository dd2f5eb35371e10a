//! Lexical evaluation subcommands: eval-assoc, eval-rank, eval-psych.

use std::collections::BTreeMap;
use std::path::PathBuf;

use clap::Args;
use serde::Serialize;

use culture_probe_core::corpus::read_aggregated_tsv;
use culture_probe_core::metrics::{evaluate_generation_run, ranking_reward_from_words, DEFAULT_KS};
use culture_probe_core::modelio::{read_generations, read_rankings, GenerationRecord, LineError};
use culture_probe_core::psychnorms::{
    compare_profiles, cue_profile, load_lemma_table, load_lexicon, AffectLexicons, CueProfile,
    ProfileComparison, ProfileThresholds, PsychMetric, ScaleSpec,
};
use culture_probe_core::Language;

use crate::commands::{require, to_json_bytes, write_artifact, CliError, RunPaths};
use crate::config::{parse_usize_list, Config};
use crate::manifest::RunManifest;

fn warn_line_errors(context: &str, errors: &[LineError]) {
    for error in errors {
        eprintln!("warning: {context} line {}: {}", error.line, error.message);
    }
}

/// Fold duplicate cue records, keeping the first occurrence.
fn by_cue(records: Vec<GenerationRecord>) -> BTreeMap<String, Vec<String>> {
    let mut map = BTreeMap::new();
    for record in records {
        if map.contains_key(&record.cue) {
            eprintln!("warning: duplicate cue '{}' ignored", record.cue);
            continue;
        }
        map.insert(record.cue, record.words);
    }
    map
}

fn load_table(
    paths: &RunPaths,
    manifest: &RunManifest,
) -> Result<culture_probe_core::corpus::AssociationTable, CliError> {
    let table_path = paths.aggregated_tsv();
    if !table_path.exists() {
        return Err(CliError::Validation(format!(
            "{} not found; run `culture-probe ingest` first",
            table_path.display()
        )));
    }
    manifest.read_verified(&table_path)?;
    Ok(read_aggregated_tsv(&table_path)?)
}

#[derive(Debug, Args)]
pub struct EvalAssocArgs {
    /// Model generations: JSON lines {cue, words[]} or {cue, rawText}
    #[arg(long)]
    pub generations: Option<PathBuf>,
    /// Comma list of precision cutoffs
    #[arg(long)]
    pub ks: Option<String>,
    /// Model variant label used in output file names
    #[arg(long)]
    pub label: Option<String>,
}

pub fn cmd_eval_assoc(
    args: &EvalAssocArgs,
    config: &Config,
    paths: &RunPaths,
    manifest: &mut RunManifest,
) -> Result<(), CliError> {
    let generations_path = require(
        args.generations
            .clone()
            .or(config.eval_assoc.generations.clone()),
        "generations",
    )?;
    let ks = match args.ks.clone().or(config.eval_assoc.ks.clone()) {
        Some(raw) => parse_usize_list(&raw)?,
        None => DEFAULT_KS.to_vec(),
    };
    let label = args
        .label
        .clone()
        .or(config.eval_assoc.label.clone())
        .unwrap_or_else(|| "model".to_string());

    manifest.record_input(&generations_path)?;
    let (records, errors) = read_generations(&generations_path)?;
    warn_line_errors("generations", &errors);
    let generations = by_cue(records);
    let table = load_table(paths, manifest)?;

    let report = evaluate_generation_run(&generations, &table, &ks);
    for cue in &report.unknown_cues {
        eprintln!("warning: cue '{cue}' not in the association table; excluded");
    }

    write_artifact(&paths.assoc_json(&label), &to_json_bytes(&report)?)?;
    let mut csv = Vec::new();
    report
        .write_csv(&ks, &mut csv)
        .map_err(|e| CliError::Io(e.to_string()))?;
    write_artifact(&paths.assoc_csv(&label), &csv)?;
    manifest.record_output(&paths.assoc_json(&label))?;
    manifest.record_output(&paths.assoc_csv(&label))?;
    manifest.snapshot_config(
        "eval-assoc",
        &serde_json::json!({"generations": generations_path.display().to_string(), "ks": ks, "label": label}),
    );

    let precisions: Vec<String> = ks
        .iter()
        .map(|k| {
            format!(
                "P@{k}={:.4}",
                report.mean_precision_at_k.get(k).copied().unwrap_or(0.0)
            )
        })
        .collect();
    println!(
        "{} cues: {} spearman={}",
        report.per_cue.len(),
        precisions.join(" "),
        report
            .mean_spearman
            .map(|s| format!("{s:.4}"))
            .unwrap_or_else(|| "undefined".to_string())
    );
    Ok(())
}

#[derive(Debug, Args)]
pub struct EvalRankArgs {
    /// Model ranking responses: JSON lines {cue, rawText}
    #[arg(long)]
    pub responses: Option<PathBuf>,
    /// Ground-truth list length
    #[arg(long)]
    pub rank_n: Option<usize>,
    #[arg(long)]
    pub label: Option<String>,
}

#[derive(Debug, Serialize)]
#[serde(rename_all = "camelCase")]
struct RankEvalReport {
    per_cue: BTreeMap<String, f64>,
    mean_reward: f64,
    evaluated: usize,
    unknown_cues: Vec<String>,
    skipped_short: Vec<String>,
}

pub fn cmd_eval_rank(
    args: &EvalRankArgs,
    config: &Config,
    paths: &RunPaths,
    manifest: &mut RunManifest,
) -> Result<(), CliError> {
    let responses_path = require(
        args.responses
            .clone()
            .or(config.eval_rank.responses.clone()),
        "responses",
    )?;
    let rank_n = args.rank_n.or(config.eval_rank.rank_n).unwrap_or(10);
    let label = args
        .label
        .clone()
        .or(config.eval_rank.label.clone())
        .unwrap_or_else(|| "model".to_string());

    manifest.record_input(&responses_path)?;
    let (records, errors) = read_rankings(&responses_path)?;
    warn_line_errors("responses", &errors);
    let responses = by_cue(records);
    let table = load_table(paths, manifest)?;

    let mut per_cue = BTreeMap::new();
    let mut unknown_cues = Vec::new();
    let mut skipped_short = Vec::new();
    for (cue, words) in &responses {
        let Ok(ground_truth) = table.top_k(cue, rank_n) else {
            unknown_cues.push(cue.clone());
            continue;
        };
        if ground_truth.len() < rank_n {
            skipped_short.push(cue.clone());
            continue;
        }
        per_cue.insert(cue.clone(), ranking_reward_from_words(words, &ground_truth));
    }
    for cue in &unknown_cues {
        eprintln!("warning: cue '{cue}' not in the association table; excluded");
    }
    for cue in &skipped_short {
        eprintln!("warning: cue '{cue}' has fewer than {rank_n} responses; excluded");
    }

    let mean_reward = if per_cue.is_empty() {
        0.0
    } else {
        per_cue.values().sum::<f64>() / per_cue.len() as f64
    };
    let report = RankEvalReport {
        evaluated: per_cue.len(),
        mean_reward,
        per_cue,
        unknown_cues,
        skipped_short,
    };

    write_artifact(&paths.rank_json(&label), &to_json_bytes(&report)?)?;
    let mut csv_writer = csv::Writer::from_writer(Vec::new());
    csv_writer
        .write_record(["cue", "reward"])
        .map_err(|e| CliError::Io(e.to_string()))?;
    for (cue, reward) in &report.per_cue {
        csv_writer
            .write_record([cue.as_str(), &reward.to_string()])
            .map_err(|e| CliError::Io(e.to_string()))?;
    }
    let csv_bytes = csv_writer
        .into_inner()
        .map_err(|e| CliError::Io(e.to_string()))?;
    write_artifact(&paths.rank_csv(&label), &csv_bytes)?;
    manifest.record_output(&paths.rank_json(&label))?;
    manifest.record_output(&paths.rank_csv(&label))?;
    manifest.snapshot_config(
        "eval-rank",
        &serde_json::json!({"responses": responses_path.display().to_string(), "rankN": rank_n, "label": label}),
    );

    println!(
        "{} cues: mean reward {:.4}",
        report.evaluated, report.mean_reward
    );
    Ok(())
}

#[derive(Debug, Args)]
pub struct EvalPsychArgs {
    /// Model generations: JSON lines {cue, words[]} or {cue, rawText}
    #[arg(long)]
    pub generations: Option<PathBuf>,
    /// Valence lexicon TSV (sidecar <stem>.scale.json declares the scale)
    #[arg(long)]
    pub valence_lexicon: Option<PathBuf>,
    /// Arousal lexicon TSV
    #[arg(long)]
    pub arousal_lexicon: Option<PathBuf>,
    /// Concreteness lexicon TSV
    #[arg(long)]
    pub concreteness_lexicon: Option<PathBuf>,
    /// Surface->lemma TSV applied to English tokens
    #[arg(long)]
    pub lemmas: Option<PathBuf>,
    /// Token normalization language: en | zh
    #[arg(long)]
    pub language: Option<String>,
    /// How many leading words of each generation to profile
    #[arg(long)]
    pub top_n: Option<usize>,
    /// Concreteness score at or above which a word counts as concrete
    #[arg(long)]
    pub conc_boundary: Option<f64>,
    /// Valence displacement from the midpoint that counts as emotional
    #[arg(long)]
    pub emotional_delta: Option<f64>,
    #[arg(long)]
    pub label: Option<String>,
}

#[derive(Debug, Serialize)]
#[serde(rename_all = "camelCase")]
struct CoverageSummary {
    emotional_pct: f64,
    conc_pct: f64,
    abs_pct: f64,
    unk_pct: f64,
}

#[derive(Debug, Serialize)]
#[serde(rename_all = "camelCase")]
struct PsychSummary {
    label: String,
    cues: usize,
    comparisons: Vec<ProfileComparison>,
    model: CoverageSummary,
    human: CoverageSummary,
}

fn coverage(profiles: &BTreeMap<String, CueProfile>) -> CoverageSummary {
    let n = profiles.len().max(1) as f64;
    CoverageSummary {
        emotional_pct: profiles.values().map(|p| p.emotional_pct).sum::<f64>() / n,
        conc_pct: profiles.values().map(|p| p.conc_pct).sum::<f64>() / n,
        abs_pct: profiles.values().map(|p| p.abs_pct).sum::<f64>() / n,
        unk_pct: profiles.values().map(|p| p.unk_pct).sum::<f64>() / n,
    }
}

fn load_lexicon_with_sidecar(
    path: &std::path::Path,
    language: Language,
) -> Result<culture_probe_core::psychnorms::NormLexicon, CliError> {
    let scale = ScaleSpec::from_sidecar(path).map_err(|e| {
        CliError::Validation(format!(
            "cannot read scale sidecar {} for {}: {e}",
            ScaleSpec::sidecar_path(path).display(),
            path.display()
        ))
    })?;
    let (lexicon, report) = load_lexicon(path, scale, language)?;
    for error in &report.row_errors {
        eprintln!(
            "warning: {} line {}: {}",
            path.display(),
            error.line,
            error.message
        );
    }
    if report.duplicates > 0 {
        eprintln!(
            "warning: {} duplicate word(s) in {} (first kept)",
            report.duplicates,
            path.display()
        );
    }
    Ok(lexicon)
}

pub fn cmd_eval_psych(
    args: &EvalPsychArgs,
    config: &Config,
    paths: &RunPaths,
    manifest: &mut RunManifest,
) -> Result<(), CliError> {
    let section = &config.eval_psych;
    let generations_path = require(
        args.generations.clone().or(section.generations.clone()),
        "generations",
    )?;
    let valence_path = require(
        args.valence_lexicon
            .clone()
            .or(section.valence_lexicon.clone()),
        "valence-lexicon",
    )?;
    let arousal_path = require(
        args.arousal_lexicon
            .clone()
            .or(section.arousal_lexicon.clone()),
        "arousal-lexicon",
    )?;
    let concreteness_path = require(
        args.concreteness_lexicon
            .clone()
            .or(section.concreteness_lexicon.clone()),
        "concreteness-lexicon",
    )?;
    let lemmas_path = args.lemmas.clone().or(section.lemmas.clone());
    let language: Language = args
        .language
        .clone()
        .or(section.language.clone())
        .unwrap_or_else(|| "en".to_string())
        .parse()
        .map_err(CliError::Validation)?;
    let top_n = args.top_n.or(section.top_n).unwrap_or(10);
    let thresholds = ProfileThresholds {
        conc_boundary: args
            .conc_boundary
            .or(section.conc_boundary)
            .unwrap_or(ProfileThresholds::default().conc_boundary),
        emotional_delta: args
            .emotional_delta
            .or(section.emotional_delta)
            .unwrap_or(ProfileThresholds::default().emotional_delta),
    };
    let label = args
        .label
        .clone()
        .or(section.label.clone())
        .unwrap_or_else(|| "model".to_string());

    manifest.record_input(&generations_path)?;
    let (records, errors) = read_generations(&generations_path)?;
    warn_line_errors("generations", &errors);
    let generations = by_cue(records);
    let table = load_table(paths, manifest)?;

    let affect = AffectLexicons {
        valence: load_lexicon_with_sidecar(&valence_path, language)?,
        arousal: load_lexicon_with_sidecar(&arousal_path, language)?,
    };
    let concreteness = load_lexicon_with_sidecar(&concreteness_path, language)?;
    let lemmas = match &lemmas_path {
        Some(path) => Some(load_lemma_table(path)?),
        None => None,
    };

    let mut model_profiles = BTreeMap::new();
    let mut human_profiles = BTreeMap::new();
    for (cue, words) in &generations {
        let Ok(human_top) = table.top_k(cue, top_n) else {
            eprintln!("warning: cue '{cue}' not in the association table; excluded");
            continue;
        };
        let model_top: Vec<String> = words.iter().take(top_n).cloned().collect();
        model_profiles.insert(
            cue.clone(),
            cue_profile(
                cue,
                &model_top,
                &affect,
                &concreteness,
                &thresholds,
                lemmas.as_ref(),
            ),
        );
        human_profiles.insert(
            cue.clone(),
            cue_profile(
                cue,
                &human_top,
                &affect,
                &concreteness,
                &thresholds,
                lemmas.as_ref(),
            ),
        );
    }
    if model_profiles.is_empty() {
        return Err(CliError::Validation(
            "no generations matched cues in the association table".to_string(),
        ));
    }

    let mut comparisons = Vec::new();
    for metric in PsychMetric::all() {
        match compare_profiles(&model_profiles, &human_profiles, metric) {
            Ok(comparison) => comparisons.push(comparison),
            Err(e) => eprintln!("warning: {}: {e}", metric.name()),
        }
    }

    let summary = PsychSummary {
        label: label.clone(),
        cues: model_profiles.len(),
        comparisons,
        model: coverage(&model_profiles),
        human: coverage(&human_profiles),
    };
    write_artifact(&paths.psych_json(&label), &to_json_bytes(&summary)?)?;

    let mut csv_writer = csv::Writer::from_writer(Vec::new());
    csv_writer
        .write_record([
            "cue",
            "modelMedianValence",
            "modelMedianArousal",
            "modelMedianConcreteness",
            "modelEmotionalPct",
            "modelConcPct",
            "modelAbsPct",
            "modelUnkPct",
            "humanMedianValence",
            "humanMedianArousal",
            "humanMedianConcreteness",
            "humanEmotionalPct",
            "humanConcPct",
            "humanAbsPct",
            "humanUnkPct",
        ])
        .map_err(|e| CliError::Io(e.to_string()))?;
    let optional = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for (cue, model) in &model_profiles {
        let human = &human_profiles[cue];
        csv_writer
            .write_record([
                cue.as_str(),
                &optional(model.median_valence),
                &optional(model.median_arousal),
                &optional(model.median_concreteness),
                &model.emotional_pct.to_string(),
                &model.conc_pct.to_string(),
                &model.abs_pct.to_string(),
                &model.unk_pct.to_string(),
                &optional(human.median_valence),
                &optional(human.median_arousal),
                &optional(human.median_concreteness),
                &human.emotional_pct.to_string(),
                &human.conc_pct.to_string(),
                &human.abs_pct.to_string(),
                &human.unk_pct.to_string(),
            ])
            .map_err(|e| CliError::Io(e.to_string()))?;
    }
    let csv_bytes = csv_writer
        .into_inner()
        .map_err(|e| CliError::Io(e.to_string()))?;
    write_artifact(&paths.psych_profiles_csv(&label), &csv_bytes)?;
    manifest.record_output(&paths.psych_json(&label))?;
    manifest.record_output(&paths.psych_profiles_csv(&label))?;
    manifest.snapshot_config(
        "eval-psych",
        &serde_json::json!({
            "generations": generations_path.display().to_string(),
            "language": language.to_string(), "topN": top_n,
            "concBoundary": thresholds.conc_boundary,
            "emotionalDelta": thresholds.emotional_delta, "label": label,
        }),
    );

    for comparison in &summary.comparisons {
        println!(
            "{}: model {:.3} vs human {:.3}, p={:.4} -> {}",
            comparison.metric.name(),
            comparison.model_median,
            comparison.human_median,
            comparison.wilcoxon.p_value,
            if comparison.indistinguishable {
                "indistinguishable"
            } else {
                "distinguishable"
            }
        );
    }
    Ok(())
}
