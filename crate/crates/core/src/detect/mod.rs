//! Detector output handling: confidence filtering, non-maximum
//! suppression, bubble cropping, and the detection evaluation harness.

mod adapter;
mod eval;

pub use adapter::{
    load_detection_fixture, parse_detection_fixture, sanitize_detections, CommandDetector,
    DetectorAdapter, FixtureDetector, PanelMeta,
};
pub use eval::{
    average_precision, detection_report, f1_score, match_detections, parse_yolo_annotations,
    DetectionReport, EmptyImagePolicy, GroundTruthSet, GtImage, ImageCounts, MatchOutcome,
    MatchedDetection,
};

use crate::geometry::{self, pixel_rect, BBox, Detection};
use image::RgbaImage;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DetectError {
    #[error("detector backend: {0}")]
    Backend(String),
    #[error("detection fixture {path}: {message}")]
    Fixture { path: String, message: String },
    #[error("annotation file {path}:{line}: {message}")]
    Annotation {
        path: String,
        line: usize,
        message: String,
    },
    #[error("no images in ground-truth set")]
    NoImages,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Keep detections with confidence >= `tau`, preserving input order.
pub fn filter_confidence(dets: &[Detection], tau: f64) -> Vec<Detection> {
    debug_assert!((0.0..=1.0).contains(&tau));
    dets.iter()
        .filter(|d| d.confidence >= tau)
        .copied()
        .collect()
}

/// Greedy non-maximum suppression.
///
/// Repeatedly keeps the highest-confidence remaining detection and drops
/// every other detection whose IoU with it exceeds `tau_iou`. Ties on
/// confidence go to the lower original index. Output is sorted by
/// descending confidence. Idempotent.
pub fn nms(dets: &[Detection], tau_iou: f64) -> Vec<Detection> {
    debug_assert!((0.0..=1.0).contains(&tau_iou));
    let mut order: Vec<usize> = (0..dets.len()).collect();
    order.sort_by(|&a, &b| {
        dets[b]
            .confidence
            .partial_cmp(&dets[a].confidence)
            .unwrap()
            .then(a.cmp(&b))
    });

    let mut kept: Vec<Detection> = Vec::new();
    for &i in &order {
        let candidate = &dets[i];
        let suppressed = kept
            .iter()
            .any(|k| geometry::iou(&k.bbox, &candidate.bbox) > tau_iou);
        if !suppressed {
            kept.push(*candidate);
        }
    }
    kept
}

/// One cropped bubble, aligned with the reading order.
#[derive(Debug, Clone)]
pub struct BubbleCrop {
    /// Index into the detection slice passed to [`crop_bubbles`].
    pub detection_index: usize,
    pub detection: Detection,
    /// Padded box clamped to the image, in image coordinates.
    pub region: BBox,
    /// `None` when the padded box collapsed to zero pixels.
    pub image: Option<RgbaImage>,
    pub warning: Option<String>,
}

/// Cut one padded crop per detection, ordered by bubble reading order.
///
/// A detection whose padded box collapses after clamping is kept in the
/// output with `image: None` and a warning instead of aborting the panel.
pub fn crop_bubbles(image: &RgbaImage, dets: &[Detection], pad: f64) -> Vec<BubbleCrop> {
    let (w, h) = (image.width(), image.height());
    let boxes: Vec<BBox> = dets.iter().map(|d| d.bbox).collect();
    let order = geometry::reading_order(&boxes);

    order
        .into_iter()
        .map(|idx| {
            let det = dets[idx];
            match geometry::expand(&det.bbox, pad, w as f64, h as f64) {
                Some(region) => {
                    let (px, py, pw, ph) = pixel_rect(&region, w, h);
                    if pw == 0 || ph == 0 {
                        BubbleCrop {
                            detection_index: idx,
                            detection: det,
                            region,
                            image: None,
                            warning: Some("crop collapsed to zero pixels".into()),
                        }
                    } else {
                        let crop = image::imageops::crop_imm(image, px, py, pw, ph).to_image();
                        BubbleCrop {
                            detection_index: idx,
                            detection: det,
                            region,
                            image: Some(crop),
                            warning: None,
                        }
                    }
                }
                None => BubbleCrop {
                    detection_index: idx,
                    detection: det,
                    region: det.bbox,
                    image: None,
                    warning: Some("box outside image bounds".into()),
                },
            }
        })
        .collect()
}
