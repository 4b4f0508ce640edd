//! Detector backends behind one adapter trait.
//!
//! The pipeline never talks to a model directly: a [`FixtureDetector`]
//! replays boxes from a JSON file for tests and offline runs, a
//! [`CommandDetector`] bridges to an external trained model by running a
//! program that prints detection JSON.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::Command;

use image::RgbaImage;
use serde::Deserialize;

use super::DetectError;
use crate::geometry::{BBox, Detection};

/// Identity of the panel being processed, as far as adapters care.
#[derive(Debug, Clone)]
pub struct PanelMeta {
    /// Stable identifier, usually the image file stem.
    pub id: String,
    /// Source file on disk, when the panel came from one.
    pub path: Option<PathBuf>,
}

impl PanelMeta {
    pub fn new(id: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            path: None,
        }
    }

    pub fn from_path(path: &Path) -> Self {
        Self {
            id: path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| path.to_string_lossy().into_owned()),
            path: Some(path.to_path_buf()),
        }
    }
}

/// Image in, detections out.
pub trait DetectorAdapter {
    fn detect(&self, image: &RgbaImage, panel: &PanelMeta) -> Result<Vec<Detection>, DetectError>;
}

/// Wire format for one detection, shared by fixtures and command output.
#[derive(Debug, Deserialize)]
struct RawDetection {
    x1: f64,
    y1: f64,
    x2: f64,
    y2: f64,
    conf: f64,
    #[serde(default)]
    class_id: u32,
}

fn raw_to_detections(raw: &[RawDetection], source: &str) -> Result<Vec<Detection>, DetectError> {
    raw.iter()
        .map(|r| {
            let bbox = BBox::new(r.x1, r.y1, r.x2, r.y2).map_err(|e| DetectError::Fixture {
                path: source.to_string(),
                message: e.to_string(),
            })?;
            Detection::new(bbox, r.conf, r.class_id).map_err(|e| DetectError::Fixture {
                path: source.to_string(),
                message: e.to_string(),
            })
        })
        .collect()
}

/// Clamp detections to the image and drop anything that collapses.
///
/// Backends promise in-bounds boxes after clamping; this enforces it in
/// one place so fixture files and external programs can be sloppy.
pub fn sanitize_detections(dets: Vec<Detection>, width: u32, height: u32) -> Vec<Detection> {
    dets.into_iter()
        .filter_map(|d| {
            d.bbox
                .clamp_to(width as f64, height as f64)
                .map(|bbox| Detection { bbox, ..d })
        })
        .collect()
}

/// Parse a detection-fixture JSON file: a map from panel id to a list of
/// `{"x1":..,"y1":..,"x2":..,"y2":..,"conf":..}` objects. The same format
/// the `detect` command prints, so detector output can be re-fed as a
/// fixture or scored directly.
pub fn load_detection_fixture(
    path: &Path,
) -> Result<BTreeMap<String, Vec<Detection>>, DetectError> {
    let text = std::fs::read_to_string(path)?;
    parse_detection_fixture(&text, &path.to_string_lossy())
}

pub fn parse_detection_fixture(
    json: &str,
    source: &str,
) -> Result<BTreeMap<String, Vec<Detection>>, DetectError> {
    let raw: BTreeMap<String, Vec<RawDetection>> =
        serde_json::from_str(json).map_err(|e| DetectError::Fixture {
            path: source.to_string(),
            message: e.to_string(),
        })?;
    let mut panels = BTreeMap::new();
    for (id, dets) in raw {
        let parsed = raw_to_detections(&dets, source)?;
        panels.insert(id, parsed);
    }
    Ok(panels)
}

/// Replays detections from a JSON fixture (see [`load_detection_fixture`]).
/// Panels absent from the map get no detections.
pub struct FixtureDetector {
    panels: BTreeMap<String, Vec<Detection>>,
}

impl FixtureDetector {
    pub fn from_path(path: &Path) -> Result<Self, DetectError> {
        Ok(Self {
            panels: load_detection_fixture(path)?,
        })
    }

    pub fn from_json(json: &str, source: &str) -> Result<Self, DetectError> {
        Ok(Self {
            panels: parse_detection_fixture(json, source)?,
        })
    }
}

impl DetectorAdapter for FixtureDetector {
    fn detect(&self, image: &RgbaImage, panel: &PanelMeta) -> Result<Vec<Detection>, DetectError> {
        let dets = self.panels.get(&panel.id).cloned().unwrap_or_default();
        Ok(sanitize_detections(dets, image.width(), image.height()))
    }
}

/// Bridges to an external detector: runs `program <image-path>` and parses
/// a JSON array of `{x1,y1,x2,y2,conf}` objects from its stdout. This is
/// how a trained model served by another process plugs in.
pub struct CommandDetector {
    program: PathBuf,
}

impl CommandDetector {
    pub fn new(program: impl Into<PathBuf>) -> Self {
        Self {
            program: program.into(),
        }
    }
}

impl DetectorAdapter for CommandDetector {
    fn detect(&self, image: &RgbaImage, panel: &PanelMeta) -> Result<Vec<Detection>, DetectError> {
        let path = panel.path.as_ref().ok_or_else(|| {
            DetectError::Backend(format!(
                "command detector needs a source file for panel '{}'",
                panel.id
            ))
        })?;
        let output = Command::new(&self.program)
            .arg(path)
            .output()
            .map_err(|e| DetectError::Backend(format!("{}: {e}", self.program.display())))?;
        if !output.status.success() {
            return Err(DetectError::Backend(format!(
                "{} exited with {}: {}",
                self.program.display(),
                output.status,
                String::from_utf8_lossy(&output.stderr).trim()
            )));
        }
        let raw: Vec<RawDetection> = serde_json::from_slice(&output.stdout).map_err(|e| {
            DetectError::Backend(format!(
                "{}: bad detection JSON: {e}",
                self.program.display()
            ))
        })?;
        let dets = raw_to_detections(&raw, &self.program.to_string_lossy())?;
        Ok(sanitize_detections(dets, image.width(), image.height()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixture_replays_and_defaults_to_empty() {
        let json = r#"{"p1": [{"x1": 1.0, "y1": 2.0, "x2": 11.0, "y2": 12.0, "conf": 0.9}]}"#;
        let det = FixtureDetector::from_json(json, "inline").unwrap();
        let img = RgbaImage::new(50, 50);
        let found = det.detect(&img, &PanelMeta::new("p1")).unwrap();
        assert_eq!(found.len(), 1);
        assert_eq!(found[0].confidence, 0.9);
        assert!(det
            .detect(&img, &PanelMeta::new("unknown"))
            .unwrap()
            .is_empty());
    }

    #[test]
    fn fixture_clamps_to_image_bounds() {
        let json = r#"{"p1": [{"x1": 40.0, "y1": 40.0, "x2": 80.0, "y2": 80.0, "conf": 0.5},
                              {"x1": 60.0, "y1": 60.0, "x2": 90.0, "y2": 90.0, "conf": 0.5}]}"#;
        let det = FixtureDetector::from_json(json, "inline").unwrap();
        let img = RgbaImage::new(50, 50);
        let found = det.detect(&img, &PanelMeta::new("p1")).unwrap();
        // First box clamps to (40,40,50,50); second falls fully outside.
        assert_eq!(found.len(), 1);
        assert_eq!(found[0].bbox, BBox::new(40.0, 40.0, 50.0, 50.0).unwrap());
    }

    #[test]
    fn fixture_rejects_bad_confidence() {
        let json = r#"{"p1": [{"x1": 1.0, "y1": 2.0, "x2": 3.0, "y2": 4.0, "conf": 1.5}]}"#;
        assert!(FixtureDetector::from_json(json, "inline").is_err());
    }

    #[cfg(unix)]
    #[test]
    fn command_detector_runs_external_program() {
        use std::io::Write;
        use std::os::unix::fs::PermissionsExt;

        let dir = tempfile::tempdir().unwrap();
        let script = dir.path().join("fake_detector.sh");
        let mut f = std::fs::File::create(&script).unwrap();
        writeln!(
            f,
            "#!/bin/sh\necho '[{{\"x1\": 5.0, \"y1\": 5.0, \"x2\": 25.0, \"y2\": 25.0, \"conf\": 0.8}}]'"
        )
        .unwrap();
        drop(f);
        std::fs::set_permissions(&script, std::fs::Permissions::from_mode(0o755)).unwrap();

        let image_path = dir.path().join("panel.png");
        let img = RgbaImage::new(64, 64);
        img.save(&image_path).unwrap();

        let adapter = CommandDetector::new(&script);
        let meta = PanelMeta::from_path(&image_path);
        let dets = adapter.detect(&img, &meta).unwrap();
        assert_eq!(dets.len(), 1);
        assert_eq!(dets[0].bbox, BBox::new(5.0, 5.0, 25.0, 25.0).unwrap());
    }

    #[cfg(unix)]
    #[test]
    fn command_detector_surfaces_failures() {
        use std::io::Write;
        use std::os::unix::fs::PermissionsExt;

        let dir = tempfile::tempdir().unwrap();
        let script = dir.path().join("broken.sh");
        let mut f = std::fs::File::create(&script).unwrap();
        writeln!(f, "#!/bin/sh\necho 'model load failed' >&2\nexit 3").unwrap();
        drop(f);
        std::fs::set_permissions(&script, std::fs::Permissions::from_mode(0o755)).unwrap();

        let image_path = dir.path().join("panel.png");
        RgbaImage::new(8, 8).save(&image_path).unwrap();

        let adapter = CommandDetector::new(&script);
        let err = adapter
            .detect(&RgbaImage::new(8, 8), &PanelMeta::from_path(&image_path))
            .unwrap_err();
        assert!(err.to_string().contains("model load failed"));
    }
}
