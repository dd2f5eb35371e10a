//! Core library for turning word-association norms into model training and
//! evaluation material, and for measuring how closely model outputs align
//! with a target culture.
//!
//! The pipeline has two tiers:
//!
//! * lexical: association tables built from free-association corpora
//!   ([`corpus`]), synthesized prompt corpora ([`prompts`]), generation and
//!   ranking metrics ([`metrics`]), and psycholinguistic attribute scoring
//!   ([`psychnorms`]);
//! * value-level: survey answer-distribution analytics with divergences,
//!   threshold curves, tension sets, and cross-cultural shift analysis
//!   ([`values`]).
//!
//! [`modelio`] bridges to language models via precomputed output files or a
//! chat-completion-style HTTP endpoint, and [`report`] renders the simple
//! SVG charts used by the reporting layer.

pub mod corpus;
pub mod metrics;
pub mod modelio;
pub mod prompts;
pub mod psychnorms;
pub mod report;
pub mod values;

use serde::{Deserialize, Serialize};

/// Language tag selecting prompt templates and token normalization rules.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Language {
    En,
    Zh,
}

impl std::str::FromStr for Language {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "en" => Ok(Language::En),
            "zh" => Ok(Language::Zh),
            other => Err(format!(
                "unknown language tag '{other}' (expected en or zh)"
            )),
        }
    }
}

impl std::fmt::Display for Language {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Language::En => write!(f, "en"),
            Language::Zh => write!(f, "zh"),
        }
    }
}
