//! Translation stage: per-bubble translation through an adapter, corpus
//! preparation, and the BLEU/METEOR evaluation harness.

mod adapter;
pub mod corpus;
pub mod metrics;

pub use adapter::{CommandTranslator, DictTranslator, HttpTranslator, TranslatorAdapter};
pub use corpus::{
    load_corpus_inputs, prepare_corpus, shuffle, write_splits, CorpusPair, CorpusSplits,
    SplitMix64, SplitRatios,
};
pub use metrics::{
    bleu, corpus_meteor, meteor, meteor_tokens, mt_report, ngram_clipped_precision, stem, tokenize,
    MtReport,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MtError {
    #[error("translator backend: {0}")]
    Backend(String),
    #[error("empty corpus")]
    EmptyCorpus,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("misaligned parallel files: {left} vs {right}")]
    Misaligned { left: String, right: String },
    #[error("bad split ratios: {0}")]
    BadRatios(String),
    #[error("bad corpus inputs: {0}")]
    BadInputs(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One bubble's text before and after translation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranslationUnit {
    pub bubble_index: usize,
    pub source_text: String,
    pub target_text: String,
}

/// Translate one bubble's normalized text.
///
/// Empty text short-circuits to an empty translation without touching
/// the adapter. Adapter failures bubble up; the pipeline records them
/// and passes the source text through instead.
pub fn translate(
    text: &str,
    adapter: &dyn TranslatorAdapter,
    bubble_index: usize,
) -> Result<TranslationUnit, MtError> {
    let target_text = if text.is_empty() {
        String::new()
    } else {
        adapter.translate(text)?
    };
    Ok(TranslationUnit {
        bubble_index,
        source_text: text.to_string(),
        target_text,
    })
}
