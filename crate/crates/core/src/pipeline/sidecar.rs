//! Per-panel sidecar JSON: every intermediate product of the pipeline,
//! one file per panel, schema-versioned and lossless.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::PipelineError;

/// Current sidecar schema version.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetEntry {
    pub x1: f64,
    pub y1: f64,
    pub x2: f64,
    pub y2: f64,
    pub conf: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CropEntry {
    pub x1: f64,
    pub y1: f64,
    pub x2: f64,
    pub y2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OcrEntry {
    pub raw: String,
    pub text: String,
    pub conf: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MtEntry {
    pub src: String,
    pub tgt: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TypesetEntry {
    pub font_size: f32,
    pub lines: Vec<String>,
    pub overflow: bool,
}

/// One bubble, in reading order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BubbleEntry {
    pub index: usize,
    pub det: DetEntry,
    pub crop: CropEntry,
    pub ocr: OcrEntry,
    pub mt: MtEntry,
    pub typeset: TypesetEntry,
    pub errors: Vec<String>,
}

/// Everything the pipeline produced for one panel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PanelRecord {
    pub schema: u32,
    pub panel_id: String,
    pub width: u32,
    pub height: u32,
    pub config_hash: String,
    pub bubbles: Vec<BubbleEntry>,
}

/// Serialize a record to pretty JSON (stable field order, trailing
/// newline) so sidecars diff and byte-compare cleanly.
pub fn sidecar_json(record: &PanelRecord) -> String {
    let mut json = serde_json::to_string_pretty(record).expect("record serializes");
    json.push('\n');
    json
}

pub fn write_sidecar(record: &PanelRecord, path: &Path) -> Result<(), PipelineError> {
    std::fs::write(path, sidecar_json(record))?;
    Ok(())
}

pub fn read_sidecar(path: &Path) -> Result<PanelRecord, PipelineError> {
    let text = std::fs::read_to_string(path)?;
    parse_sidecar(&text, &path.to_string_lossy())
}

pub fn parse_sidecar(json: &str, source: &str) -> Result<PanelRecord, PipelineError> {
    // Peek at the version first so a mismatch names versions, not fields.
    #[derive(Deserialize)]
    struct VersionProbe {
        schema: u32,
    }
    let probe: VersionProbe =
        serde_json::from_str(json).map_err(|e| PipelineError::SidecarParse {
            path: source.to_string(),
            message: e.to_string(),
        })?;
    if probe.schema != SCHEMA_VERSION {
        return Err(PipelineError::SchemaVersion {
            expected: SCHEMA_VERSION,
            found: probe.schema,
        });
    }
    serde_json::from_str(json).map_err(|e| PipelineError::SidecarParse {
        path: source.to_string(),
        message: e.to_string(),
    })
}
