//! Corpus-side subcommands: ingest, split, gen-prompts.

use std::path::PathBuf;

use clap::Args;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use culture_probe_core::corpus::{
    self, read_aggregated_tsv, CorpusFormat, FilterSpec, SplitManifest,
};
use culture_probe_core::prompts::{
    export_corpus, make_mcq_item, make_rank_example, make_sft_example, BoundsPolicy, CorpusExample,
    McqConfig, PromptError, PromptTemplate,
};
use culture_probe_core::Language;

use crate::commands::{require, to_json_bytes, write_artifact, CliError, RunPaths};
use crate::config::{parse_ratio_list, parse_string_list, Config};
use crate::manifest::RunManifest;

pub const DEFAULT_SEED: u64 = 7;

#[derive(Debug, Args)]
pub struct IngestArgs {
    /// Raw association TSV
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Input layout: long | aggregated
    #[arg(long)]
    pub format: Option<String>,
    /// Keep only respondents from this country
    #[arg(long)]
    pub country: Option<String>,
    /// Keep only respondents with this native language
    #[arg(long)]
    pub native_language: Option<String>,
}

#[derive(Debug, Serialize)]
#[serde(rename_all = "camelCase")]
struct IngestSummary {
    input: String,
    format: String,
    records_ingested: usize,
    row_errors: Vec<culture_probe_core::corpus::RowError>,
    skipped_empty: usize,
    records_after_filter: usize,
    dropped_missing_metadata: usize,
    cue_count: usize,
}

pub fn cmd_ingest(
    args: &IngestArgs,
    config: &Config,
    paths: &RunPaths,
    manifest: &mut RunManifest,
) -> Result<(), CliError> {
    let input = require(args.input.clone().or(config.ingest.input.clone()), "input")?;
    if !input.exists() {
        return Err(CliError::Validation(format!(
            "input file {} does not exist",
            input.display()
        )));
    }
    let format_raw = args
        .format
        .clone()
        .or(config.ingest.format.clone())
        .unwrap_or_else(|| "long".to_string());
    let format: CorpusFormat = format_raw.parse().map_err(CliError::Validation)?;
    let spec = FilterSpec {
        country: args.country.clone().or(config.ingest.country.clone()),
        native_language: args
            .native_language
            .clone()
            .or(config.ingest.native_language.clone()),
    };

    manifest.record_input(&input)?;
    let outcome = corpus::ingest(&input, format)?;
    for error in &outcome.row_errors {
        eprintln!("warning: line {}: {}", error.line, error.message);
    }
    if outcome.skipped_empty > 0 {
        eprintln!(
            "warning: {} row(s) skipped with empty cue or response",
            outcome.skipped_empty
        );
    }
    let ingested = outcome.records.len();

    let filtered = corpus::filter_records(outcome.records, &spec);
    if filtered.dropped_missing > 0 {
        eprintln!(
            "warning: {} record(s) dropped for missing filter metadata",
            filtered.dropped_missing
        );
    }
    let table = corpus::aggregate(&filtered.records)?;

    let mut tsv = Vec::new();
    corpus::write_aggregated_tsv(&table, &mut tsv)?;
    write_artifact(&paths.aggregated_tsv(), &tsv)?;
    manifest.record_output(&paths.aggregated_tsv())?;

    let summary = IngestSummary {
        input: input.display().to_string(),
        format: format_raw,
        records_ingested: ingested,
        row_errors: outcome.row_errors,
        skipped_empty: outcome.skipped_empty,
        records_after_filter: filtered.records.len(),
        dropped_missing_metadata: filtered.dropped_missing,
        cue_count: table.cue_count(),
    };
    write_artifact(&paths.ingest_summary(), &to_json_bytes(&summary)?)?;
    manifest.record_output(&paths.ingest_summary())?;
    manifest.snapshot_config("ingest", &summary);

    println!(
        "ingested {} records ({} cues) -> {}",
        summary.records_after_filter,
        summary.cue_count,
        paths.aggregated_tsv().display()
    );
    Ok(())
}

#[derive(Debug, Args)]
pub struct SplitArgs {
    /// Shuffle seed
    #[arg(long)]
    pub seed: Option<u64>,
    /// Train,valid,test ratios, e.g. 0.8,0.1,0.1
    #[arg(long)]
    pub ratios: Option<String>,
}

pub fn cmd_split(
    args: &SplitArgs,
    config: &Config,
    paths: &RunPaths,
    manifest: &mut RunManifest,
) -> Result<(), CliError> {
    let seed = args.seed.or(config.split.seed).unwrap_or(DEFAULT_SEED);
    let ratios = match &args.ratios {
        Some(raw) => parse_ratio_list(raw)?,
        None => config
            .split
            .ratios
            .clone()
            .unwrap_or_else(|| vec![0.8, 0.1, 0.1]),
    };
    if ratios.len() != 3 {
        return Err(CliError::Validation(format!(
            "--ratios needs exactly 3 values, got {}",
            ratios.len()
        )));
    }

    let table_path = paths.aggregated_tsv();
    if !table_path.exists() {
        return Err(CliError::Validation(format!(
            "{} not found; run `culture-probe ingest` first",
            table_path.display()
        )));
    }
    manifest.read_verified(&table_path)?;
    let table = read_aggregated_tsv(&table_path)?;

    let split = corpus::split_by_cue(&table, [ratios[0], ratios[1], ratios[2]], seed)?;
    let split_manifest = SplitManifest::from(&split);
    write_artifact(&paths.split_json(), &to_json_bytes(&split_manifest)?)?;
    manifest.record_output(&paths.split_json())?;
    manifest.snapshot_config(
        "split",
        &serde_json::json!({"seed": seed, "ratios": ratios}),
    );

    println!(
        "split {} cues into {}/{}/{} -> {}",
        table.cue_count(),
        split.train_cues.len(),
        split.valid_cues.len(),
        split.test_cues.len(),
        paths.split_json().display()
    );
    Ok(())
}

#[derive(Debug, Args)]
pub struct GenPromptsArgs {
    /// Comma list of corpus kinds: sft,rank,mcq
    #[arg(long)]
    pub kinds: Option<String>,
    /// Cue subset to draw from: train | valid | test
    #[arg(long)]
    pub subset: Option<String>,
    /// Template language: en | zh
    #[arg(long)]
    pub language: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Candidate count for ranking examples
    #[arg(long)]
    pub rank_n: Option<usize>,
    #[arg(long)]
    pub lower_min: Option<u32>,
    #[arg(long)]
    pub lower_max: Option<u32>,
    #[arg(long)]
    pub upper_min: Option<u32>,
    #[arg(long)]
    pub upper_max: Option<u32>,
    #[arg(long)]
    pub mcq_high: Option<usize>,
    #[arg(long)]
    pub mcq_low: Option<usize>,
    #[arg(long)]
    pub mcq_indirect: Option<usize>,
    #[arg(long)]
    pub mcq_random: Option<usize>,
    #[arg(long)]
    pub mcq_fanout: Option<usize>,
    /// Override the built-in SFT template file
    #[arg(long)]
    pub sft_template: Option<PathBuf>,
    /// Override the built-in ranking template file
    #[arg(long)]
    pub rank_template: Option<PathBuf>,
}

#[derive(Debug, Serialize)]
#[serde(rename_all = "camelCase")]
struct KindSummary {
    written: usize,
    skipped: usize,
}

pub fn cmd_gen_prompts(
    args: &GenPromptsArgs,
    config: &Config,
    paths: &RunPaths,
    manifest: &mut RunManifest,
) -> Result<(), CliError> {
    let section = &config.gen_prompts;
    let kinds_raw = args
        .kinds
        .clone()
        .or(section.kinds.clone())
        .unwrap_or_else(|| "sft,rank,mcq".to_string());
    let kinds = parse_string_list(&kinds_raw);
    for kind in &kinds {
        if !matches!(kind.as_str(), "sft" | "rank" | "mcq") {
            return Err(CliError::Validation(format!(
                "unknown corpus kind '{kind}' (expected sft, rank, or mcq)"
            )));
        }
    }
    let subset = args
        .subset
        .clone()
        .or(section.subset.clone())
        .unwrap_or_else(|| "train".to_string());
    let language: Language = args
        .language
        .clone()
        .or(section.language.clone())
        .unwrap_or_else(|| "en".to_string())
        .parse()
        .map_err(CliError::Validation)?;
    let seed = args.seed.or(section.seed).unwrap_or(DEFAULT_SEED);
    let rank_n = args.rank_n.or(section.rank_n).unwrap_or(10);
    let bounds = BoundsPolicy {
        min_lower: args.lower_min.or(section.lower_min).unwrap_or(10),
        max_lower: args.lower_max.or(section.lower_max).unwrap_or(20),
        min_upper: args.upper_min.or(section.upper_min).unwrap_or(40),
        max_upper: args.upper_max.or(section.upper_max).unwrap_or(80),
    };
    let mcq = McqConfig {
        k_high: args.mcq_high.or(section.mcq_high).unwrap_or(4),
        k_low: args.mcq_low.or(section.mcq_low).unwrap_or(4),
        k_indirect: args.mcq_indirect.or(section.mcq_indirect).unwrap_or(3),
        k_random: args.mcq_random.or(section.mcq_random).unwrap_or(4),
        fanout: args.mcq_fanout.or(section.mcq_fanout).unwrap_or(3),
    };

    let sft_template = match args.sft_template.clone().or(section.sft_template.clone()) {
        Some(path) => PromptTemplate::from_file(&path)?,
        None => PromptTemplate::builtin_sft(language),
    };
    let rank_template = match args.rank_template.clone().or(section.rank_template.clone()) {
        Some(path) => PromptTemplate::from_file(&path)?,
        None => PromptTemplate::builtin_rank(language),
    };

    let table_path = paths.aggregated_tsv();
    let split_path = paths.split_json();
    for (path, producer) in [(&table_path, "ingest"), (&split_path, "split")] {
        if !path.exists() {
            return Err(CliError::Validation(format!(
                "{} not found; run `culture-probe {producer}` first",
                path.display()
            )));
        }
    }
    manifest.read_verified(&table_path)?;
    let table = read_aggregated_tsv(&table_path)?;
    let split_bytes = manifest.read_verified(&split_path)?;
    let split: SplitManifest = serde_json::from_str(
        std::str::from_utf8(&split_bytes)
            .map_err(|_| CliError::Validation("split manifest is not UTF-8".to_string()))?,
    )
    .map_err(|e| CliError::Validation(format!("corrupt split manifest: {e}")))?;
    let cues = split.subset(&subset).ok_or_else(|| {
        CliError::Validation(format!(
            "unknown subset '{subset}' (expected train, valid, or test)"
        ))
    })?;

    let mut summary = std::collections::BTreeMap::new();
    for kind in &kinds {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut examples = Vec::new();
        let mut skipped = 0usize;
        for cue in cues {
            let result = match kind.as_str() {
                "sft" => make_sft_example(cue, &table, &bounds, &sft_template, &mut rng)
                    .map(CorpusExample::Sft),
                "rank" => make_rank_example(cue, &table, rank_n, &rank_template, &mut rng)
                    .map(CorpusExample::Rank),
                _ => make_mcq_item(cue, &table, &mcq, &mut rng).map(CorpusExample::Mcq),
            };
            match result {
                Ok(example) => examples.push(example),
                Err(
                    e @ (PromptError::NotEnoughResponses { .. }
                    | PromptError::InsufficientCategory { .. }),
                ) => {
                    eprintln!("warning: {kind}: {e}");
                    skipped += 1;
                }
                Err(e) => return Err(e.into()),
            }
        }
        let mut buffer = Vec::new();
        let written = export_corpus(&examples, &mut buffer)?;
        if written == 0 {
            eprintln!("warning: {kind}: no examples generated for subset '{subset}'");
        }
        let out = paths.prompt_file(kind, &subset);
        write_artifact(&out, &buffer)?;
        manifest.record_output(&out)?;
        summary.insert(kind.clone(), KindSummary { written, skipped });
        println!("{kind}: {written} examples -> {}", out.display());
    }

    write_artifact(&paths.prompts_summary(&subset), &to_json_bytes(&summary)?)?;
    manifest.record_output(&paths.prompts_summary(&subset))?;
    manifest.snapshot_config(
        "gen-prompts",
        &serde_json::json!({
            "kinds": kinds, "subset": subset, "language": language.to_string(),
            "seed": seed, "rankN": rank_n, "bounds": bounds, "mcq": mcq,
        }),
    );
    Ok(())
}
