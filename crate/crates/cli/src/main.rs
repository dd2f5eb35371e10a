//! culture-probe: turn word-association norms into training/evaluation
//! corpora and measure how closely model outputs align with a target
//! culture, at the lexical level and the survey value level.
//!
//! Subcommands operate over a run directory holding a manifest plus all
//! intermediate artifacts; every step is deterministic given its inputs,
//! configuration, and seed.

mod commands;
mod config;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::corpus_cmds::{cmd_gen_prompts, cmd_ingest, cmd_split};
use commands::eval_cmds::{cmd_eval_assoc, cmd_eval_psych, cmd_eval_rank};
use commands::report_cmd::cmd_report;
use commands::values_cmds::{cmd_collect, cmd_eval_values, cmd_shift, cmd_tension_set};
use commands::{CliError, RunPaths};
use config::Config;
use manifest::RunManifest;

#[derive(Debug, Parser)]
#[command(
    name = "culture-probe",
    version,
    about = "Word-association corpora and cultural alignment evaluation for language models"
)]
struct Cli {
    /// TOML config file; per-subcommand sections, flags override keys
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Directory for outputs and the run manifest
    #[arg(long, global = true, default_value = "run")]
    run_dir: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Ingest a raw association TSV, filter respondents, build the table
    Ingest(commands::corpus_cmds::IngestArgs),
    /// Deterministically split cues into train/valid/test
    Split(commands::corpus_cmds::SplitArgs),
    /// Synthesize SFT / ranking / MCQ corpora from the table
    GenPrompts(commands::corpus_cmds::GenPromptsArgs),
    /// Score generated associations: Precision@K and Spearman
    EvalAssoc(commands::eval_cmds::EvalAssocArgs),
    /// Score ranked-list responses with the Spearman reward
    EvalRank(commands::eval_cmds::EvalRankArgs),
    /// Valence/arousal/concreteness profiles and Wilcoxon verdicts
    EvalPsych(commands::eval_cmds::EvalPsychArgs),
    /// Survey answer-distribution divergences and threshold curves
    EvalValues(commands::values_cmds::EvalValuesArgs),
    /// Select the most cross-culturally divergent questions
    TensionSet(commands::values_cmds::TensionSetArgs),
    /// Per-question distances to two populations with leaning tallies
    Shift(commands::values_cmds::ShiftArgs),
    /// Collect generations or option scores from an HTTP endpoint
    Collect(commands::values_cmds::CollectArgs),
    /// Bundle evaluation outputs into summary tables and SVG charts
    Report(commands::report_cmd::ReportArgs),
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let config = Config::load(cli.config.as_deref())?;
    let paths = RunPaths::new(&cli.run_dir);
    let mut manifest = RunManifest::load_or_create(&cli.run_dir)?;

    let result = match &cli.command {
        Command::Ingest(args) => cmd_ingest(args, &config, &paths, &mut manifest),
        Command::Split(args) => cmd_split(args, &config, &paths, &mut manifest),
        Command::GenPrompts(args) => cmd_gen_prompts(args, &config, &paths, &mut manifest),
        Command::EvalAssoc(args) => cmd_eval_assoc(args, &config, &paths, &mut manifest),
        Command::EvalRank(args) => cmd_eval_rank(args, &config, &paths, &mut manifest),
        Command::EvalPsych(args) => cmd_eval_psych(args, &config, &paths, &mut manifest),
        Command::EvalValues(args) => cmd_eval_values(args, &config, &paths, &mut manifest),
        Command::TensionSet(args) => cmd_tension_set(args, &config, &paths, &mut manifest),
        Command::Shift(args) => cmd_shift(args, &config, &paths, &mut manifest),
        Command::Collect(args) => cmd_collect(args, &config, &paths, &mut manifest),
        Command::Report(args) => cmd_report(args, &config, &paths, &mut manifest),
    };
    result?;
    manifest.save()
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
