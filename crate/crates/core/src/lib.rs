//! Core library for translating comic panels: speech-bubble detection
//! postprocessing, OCR, machine translation and typesetting, plus the
//! evaluation harnesses for each stage (detection P/R/F1/mAP, CER/WER,
//! BLEU/METEOR) and deterministic parallel-corpus preparation.
//!
//! Heavy model backends (the detector, the OCR engine, the translator)
//! sit behind adapter traits; stub adapters replay fixtures so the whole
//! pipeline is testable offline.

pub mod detect;
pub mod geometry;
pub mod ocr;
pub mod pipeline;
pub mod translate;
pub mod typeset;

pub use geometry::{BBox, Detection};
