//! OCR engine backends. The real engine is an external `tesseract`
//! binary driven per crop; the fixture backend replays canned text keyed
//! by crop id so pipelines run without an engine installed.

use std::collections::HashMap;
use std::fmt;
use std::path::Path;
use std::process::Command;

use image::GrayImage;

use super::{OcrConfig, OcrError};

/// Stable identity of one crop: the panel it came from plus its bubble
/// index in reading order. Renders as `panel#index`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CropId {
    pub panel: String,
    pub bubble_index: usize,
}

impl CropId {
    pub fn new(panel: impl Into<String>, bubble_index: usize) -> Self {
        Self {
            panel: panel.into(),
            bubble_index,
        }
    }
}

impl fmt::Display for CropId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}#{}", self.panel, self.bubble_index)
    }
}

/// What an engine hands back for one crop.
#[derive(Debug, Clone, PartialEq)]
pub struct OcrOutput {
    pub text: String,
    /// Mean word confidence in `[0,100]` when the engine reports one.
    pub mean_confidence: Option<f64>,
}

pub trait OcrAdapter {
    fn recognize(&self, crop: &GrayImage, id: &CropId) -> Result<OcrOutput, OcrError>;
}

/// Replays fixture text keyed by `panel#index`, with an optional default
/// for ids not in the map. No default and no entry is an engine error,
/// which keeps missing fixture rows loud in tests.
#[derive(Debug, Default, Clone)]
pub struct FixtureOcr {
    entries: HashMap<String, String>,
    default: Option<String>,
}

impl FixtureOcr {
    pub fn new(entries: HashMap<String, String>) -> Self {
        Self {
            entries,
            default: None,
        }
    }

    pub fn with_default(text: impl Into<String>) -> Self {
        Self {
            entries: HashMap::new(),
            default: Some(text.into()),
        }
    }

    pub fn insert(&mut self, id: impl Into<String>, text: impl Into<String>) {
        self.entries.insert(id.into(), text.into());
    }

    /// Load a two-column TSV of `crop_id<TAB>text`.
    pub fn from_tsv(path: &Path) -> Result<Self, OcrError> {
        let text = std::fs::read_to_string(path)?;
        let mut entries = HashMap::new();
        for (lineno, line) in text.lines().enumerate() {
            if line.is_empty() {
                continue;
            }
            let (id, value) = line.split_once('\t').ok_or_else(|| OcrError::Transcript {
                path: path.to_string_lossy().into_owned(),
                message: format!("line {}: expected 'crop_id<TAB>text'", lineno + 1),
            })?;
            entries.insert(id.to_string(), value.to_string());
        }
        Ok(Self::new(entries))
    }
}

impl OcrAdapter for FixtureOcr {
    fn recognize(&self, _crop: &GrayImage, id: &CropId) -> Result<OcrOutput, OcrError> {
        let text = self
            .entries
            .get(&id.to_string())
            .cloned()
            .or_else(|| self.default.clone())
            .ok_or_else(|| OcrError::Engine(format!("no fixture text for crop '{id}'")))?;
        Ok(OcrOutput {
            text,
            mean_confidence: None,
        })
    }
}

/// Drives the `tesseract` command-line binary with the configured
/// language, engine mode and page-segmentation mode, one call per crop.
pub struct TesseractCli {
    config: OcrConfig,
    binary: String,
}

impl TesseractCli {
    /// Fails fast when the binary cannot be executed.
    pub fn new(config: OcrConfig) -> Result<Self, OcrError> {
        Self::with_binary(config, "tesseract")
    }

    pub fn with_binary(config: OcrConfig, binary: impl Into<String>) -> Result<Self, OcrError> {
        config.validate()?;
        let binary = binary.into();
        let probe = Command::new(&binary).arg("--version").output();
        match probe {
            Ok(out) if out.status.success() => Ok(Self { config, binary }),
            Ok(out) => Err(OcrError::Engine(format!(
                "'{binary} --version' failed: {}",
                String::from_utf8_lossy(&out.stderr).trim()
            ))),
            Err(e) => Err(OcrError::Engine(format!("cannot run '{binary}': {e}"))),
        }
    }

    /// True when a usable `tesseract` binary is on PATH.
    pub fn available() -> bool {
        Command::new("tesseract")
            .arg("--version")
            .output()
            .map(|o| o.status.success())
            .unwrap_or(false)
    }

    /// Installed language packs, for gating language-specific runs.
    pub fn languages() -> Vec<String> {
        Command::new("tesseract")
            .arg("--list-langs")
            .output()
            .ok()
            .filter(|o| o.status.success())
            .map(|o| {
                String::from_utf8_lossy(&o.stdout)
                    .lines()
                    .skip(1) // header line
                    .map(|l| l.trim().to_string())
                    .filter(|l| !l.is_empty())
                    .collect()
            })
            .unwrap_or_default()
    }
}

impl OcrAdapter for TesseractCli {
    fn recognize(&self, crop: &GrayImage, id: &CropId) -> Result<OcrOutput, OcrError> {
        if crop.width() == 0 || crop.height() == 0 {
            return Err(OcrError::EmptyCrop);
        }
        let dir = tempfile::tempdir()?;
        let input = dir.path().join(format!("crop_{}.png", id.bubble_index));
        crop.save(&input)
            .map_err(|e| OcrError::Engine(format!("writing crop for '{id}': {e}")))?;

        let output = Command::new(&self.binary)
            .arg(&input)
            .arg("stdout")
            .args(["-l", &self.config.language])
            .args(["--oem", &self.config.engine_mode.to_string()])
            .args(["--psm", &self.config.page_seg_mode.to_string()])
            .output()
            .map_err(|e| OcrError::Engine(format!("running {}: {e}", self.binary)))?;
        if !output.status.success() {
            return Err(OcrError::Engine(format!(
                "{} exited with {}: {}",
                self.binary,
                output.status,
                String::from_utf8_lossy(&output.stderr).trim()
            )));
        }
        Ok(OcrOutput {
            text: String::from_utf8_lossy(&output.stdout).into_owned(),
            mean_confidence: None,
        })
    }
}
