//! OCR stage: crop preprocessing, engine invocation through an adapter,
//! and text normalization, plus CER/WER evaluation in [`eval`].

mod adapter;
pub mod eval;

pub use adapter::{CropId, FixtureOcr, OcrAdapter, OcrOutput, TesseractCli};

use image::{GrayImage, RgbaImage};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum OcrError {
    #[error("ocr engine: {0}")]
    Engine(String),
    #[error("zero-area crop")]
    EmptyCrop,
    #[error("invalid ocr config: {0}")]
    InvalidConfig(String),
    #[error("empty reference: {0} undefined")]
    EmptyReference(&'static str),
    #[error("transcript file {path}: {message}")]
    Transcript { path: String, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Engine knobs: language plus the engine and page-segmentation modes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OcrConfig {
    pub language: String,
    pub engine_mode: u8,
    pub page_seg_mode: u8,
}

impl Default for OcrConfig {
    fn default() -> Self {
        Self {
            language: "ind".into(),
            engine_mode: 3,
            page_seg_mode: 6,
        }
    }
}

impl OcrConfig {
    pub fn validate(&self) -> Result<(), OcrError> {
        if self.engine_mode > 3 {
            return Err(OcrError::InvalidConfig(format!(
                "engine_mode {} outside 0..=3",
                self.engine_mode
            )));
        }
        if self.page_seg_mode > 13 {
            return Err(OcrError::InvalidConfig(format!(
                "page_seg_mode {} outside 0..=13",
                self.page_seg_mode
            )));
        }
        Ok(())
    }
}

/// Recognized text for one bubble.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OcrResult {
    pub bubble_index: usize,
    /// Engine output, verbatim.
    pub raw_text: String,
    /// `normalize_text(raw_text)`.
    pub text: String,
    /// Engine-reported mean confidence in `[0,100]`, when available.
    pub mean_confidence: Option<f64>,
}

/// Grayscale a crop with the standard luma weights
/// `0.299 R + 0.587 G + 0.114 B`, rounded to the nearest intensity.
/// Dimensions are preserved and nothing else is enhanced.
pub fn preprocess_crop(crop: &RgbaImage) -> Result<GrayImage, OcrError> {
    if crop.width() == 0 || crop.height() == 0 {
        return Err(OcrError::EmptyCrop);
    }
    let mut out = GrayImage::new(crop.width(), crop.height());
    for (src, dst) in crop.pixels().zip(out.pixels_mut()) {
        let [r, g, b, _] = src.0;
        let luma = 0.299 * r as f64 + 0.587 * g as f64 + 0.114 * b as f64;
        dst.0 = [luma.round() as u8];
    }
    Ok(out)
}

/// Flatten raw OCR output into one line of text, in order:
/// hyphen-linebreak pairs join the split word, remaining linebreaks become
/// spaces, whitespace runs collapse, and the result is trimmed. Case is
/// preserved. Idempotent.
pub fn normalize_text(raw: &str) -> String {
    // Pass 1: join words split across lines with a trailing hyphen. The
    // hyphen, the break, and any indentation after it all disappear.
    let mut joined = String::with_capacity(raw.len());
    let mut chars = raw.chars().peekable();
    while let Some(c) = chars.next() {
        if c == '-' {
            // Look past spaces/tabs for a linebreak.
            let mut lookahead = chars.clone();
            while matches!(lookahead.peek(), Some(' ') | Some('\t')) {
                lookahead.next();
            }
            if matches!(lookahead.peek(), Some('\n') | Some('\r')) {
                while matches!(
                    lookahead.peek(),
                    Some('\n') | Some('\r') | Some(' ') | Some('\t')
                ) {
                    lookahead.next();
                }
                chars = lookahead;
                continue;
            }
        }
        joined.push(c);
    }

    // Passes 2-4: linebreaks to spaces, collapse whitespace, trim.
    let mut out = String::with_capacity(joined.len());
    let mut pending_space = false;
    for c in joined.chars() {
        if c.is_whitespace() {
            pending_space = !out.is_empty();
        } else {
            if pending_space {
                out.push(' ');
                pending_space = false;
            }
            out.push(c);
        }
    }
    out
}

/// Run the engine on a preprocessed crop and normalize what comes back.
///
/// Engine failures are returned to the caller; the pipeline records them
/// per bubble and carries on with empty text.
pub fn recognize(
    crop: &GrayImage,
    adapter: &dyn OcrAdapter,
    id: &CropId,
) -> Result<OcrResult, OcrError> {
    let output = adapter.recognize(crop, id)?;
    Ok(OcrResult {
        bubble_index: id.bubble_index,
        text: normalize_text(&output.text),
        raw_text: output.text,
        mean_confidence: output.mean_confidence,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use image::Rgba;

    #[test]
    fn config_bounds_checked() {
        assert!(OcrConfig::default().validate().is_ok());
        assert!(OcrConfig {
            engine_mode: 4,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(OcrConfig {
            page_seg_mode: 14,
            ..Default::default()
        }
        .validate()
        .is_err());
    }

    #[test]
    fn preprocess_white_stays_white() {
        let crop = RgbaImage::from_pixel(4, 3, Rgba([255, 255, 255, 255]));
        let gray = preprocess_crop(&crop).unwrap();
        assert_eq!((gray.width(), gray.height()), (4, 3));
        assert!(gray.pixels().all(|p| p.0[0] == 255));
    }

    #[test]
    fn preprocess_pure_red_is_76() {
        // 0.299 * 255 = 76.245, rounds to 76.
        let crop = RgbaImage::from_pixel(1, 1, Rgba([255, 0, 0, 255]));
        assert_eq!(preprocess_crop(&crop).unwrap().get_pixel(0, 0).0[0], 76);
    }

    #[test]
    fn preprocess_idempotent_on_grayscale() {
        let crop = RgbaImage::from_fn(5, 5, |x, y| {
            let v = ((x * 40 + y * 10) % 256) as u8;
            Rgba([v, v, v, 255])
        });
        let once = preprocess_crop(&crop).unwrap();
        // Feed the grayscale back through as RGB.
        let as_rgba = RgbaImage::from_fn(5, 5, |x, y| {
            let v = once.get_pixel(x, y).0[0];
            Rgba([v, v, v, 255])
        });
        let twice = preprocess_crop(&as_rgba).unwrap();
        assert_eq!(once, twice);
    }

    #[test]
    fn preprocess_rejects_empty() {
        let crop = RgbaImage::new(0, 5);
        assert!(matches!(preprocess_crop(&crop), Err(OcrError::EmptyCrop)));
    }

    #[test]
    fn normalize_basic_rules() {
        assert_eq!(normalize_text(""), "");
        assert_eq!(normalize_text("AKU  PERGI\nKE PASAR"), "AKU PERGI KE PASAR");
        assert_eq!(normalize_text("BER-\nLARI"), "BERLARI");
        assert_eq!(normalize_text("  halo  "), "halo");
        assert_eq!(normalize_text("A\r\nB"), "A B");
        // Hyphen inside a line is kept.
        assert_eq!(normalize_text("tiba-tiba"), "tiba-tiba");
        // Ragged OCR output: spaces around the break still join.
        assert_eq!(normalize_text("BER- \n  LARI"), "BERLARI");
    }

    #[test]
    fn normalize_is_idempotent() {
        for s in [
            "",
            "AKU  PERGI\nKE PASAR",
            "BER-\nLARI",
            "x-\n",
            "a - b",
            "-\n-",
        ] {
            let once = normalize_text(s);
            assert_eq!(normalize_text(&once), once, "input {s:?}");
        }
    }

    #[test]
    fn recognize_normalizes_stub_output() {
        let stub = FixtureOcr::with_default("HALO\nDUNIA");
        let crop = GrayImage::new(10, 10);
        let id = CropId::new("p", 0);
        let result = recognize(&crop, &stub, &id).unwrap();
        assert_eq!(result.raw_text, "HALO\nDUNIA");
        assert_eq!(result.text, "HALO DUNIA");
        assert_eq!(result.bubble_index, 0);
    }

    #[test]
    fn recognize_blank_stub_gives_empty_text() {
        let stub = FixtureOcr::with_default("");
        let crop = GrayImage::new(10, 10);
        let result = recognize(&crop, &stub, &CropId::new("p", 3)).unwrap();
        assert_eq!(result.text, "");
        assert_eq!(result.bubble_index, 3);
    }
}
