//! Detection evaluation: greedy matching, interpolated average precision,
//! and the per-dataset report (mean precision/recall, F1, mAP@0.5,
//! mAP@[.5:.95]).

use std::collections::BTreeMap;
use std::path::Path;

use serde::Serialize;

use super::{filter_confidence, nms, DetectError};
use crate::geometry::{iou, BBox, Detection};

/// Ground-truth boxes for one image. Single class, so just boxes.
#[derive(Debug, Clone)]
pub struct GtImage {
    pub id: String,
    pub boxes: Vec<BBox>,
}

/// Annotated image set; ids unique, iteration order sorted by id.
#[derive(Debug, Clone)]
pub struct GroundTruthSet {
    images: Vec<GtImage>,
}

impl GroundTruthSet {
    pub fn new(mut images: Vec<GtImage>) -> Result<Self, DetectError> {
        images.sort_by(|a, b| a.id.cmp(&b.id));
        for pair in images.windows(2) {
            if pair[0].id == pair[1].id {
                return Err(DetectError::Annotation {
                    path: pair[0].id.clone(),
                    line: 0,
                    message: "duplicate image id".into(),
                });
            }
        }
        Ok(Self { images })
    }

    pub fn images(&self) -> &[GtImage] {
        &self.images
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    /// Load a directory of YOLO-style annotation files: one `<stem>.txt`
    /// per image, lines `class cx cy w h` with coordinates normalized to
    /// `[0,1]`. Image dimensions come from the matching image in
    /// `image_dir` (png/jpg/jpeg), needed to de-normalize the boxes.
    pub fn from_yolo_dir(ann_dir: &Path, image_dir: &Path) -> Result<Self, DetectError> {
        let mut images = Vec::new();
        let mut entries: Vec<_> = std::fs::read_dir(ann_dir)?
            .collect::<Result<Vec<_>, _>>()?
            .into_iter()
            .map(|e| e.path())
            .filter(|p| p.extension().is_some_and(|e| e == "txt"))
            .collect();
        entries.sort();

        for ann_path in entries {
            let stem = ann_path.file_stem().unwrap().to_string_lossy().into_owned();
            let image_path = ["png", "jpg", "jpeg", "PNG", "JPG", "JPEG"]
                .iter()
                .map(|ext| image_dir.join(format!("{stem}.{ext}")))
                .find(|p| p.exists())
                .ok_or_else(|| DetectError::Annotation {
                    path: ann_path.to_string_lossy().into_owned(),
                    line: 0,
                    message: format!("no image named '{stem}.*' in {}", image_dir.display()),
                })?;
            let (w, h) =
                image::image_dimensions(&image_path).map_err(|e| DetectError::Annotation {
                    path: image_path.to_string_lossy().into_owned(),
                    line: 0,
                    message: e.to_string(),
                })?;
            let text = std::fs::read_to_string(&ann_path)?;
            let boxes = parse_yolo_annotations(&text, w, h).map_err(|(line, message)| {
                DetectError::Annotation {
                    path: ann_path.to_string_lossy().into_owned(),
                    line,
                    message,
                }
            })?;
            images.push(GtImage { id: stem, boxes });
        }
        Self::new(images)
    }
}

/// Parse `class cx cy w h` lines (normalized floats) into absolute boxes.
pub fn parse_yolo_annotations(
    text: &str,
    img_w: u32,
    img_h: u32,
) -> Result<Vec<BBox>, (usize, String)> {
    let mut boxes = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 5 {
            return Err((
                lineno + 1,
                format!("expected 5 fields, got {}", fields.len()),
            ));
        }
        let nums: Vec<f64> = fields[1..]
            .iter()
            .map(|f| f.parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| (lineno + 1, e.to_string()))?;
        let (cx, cy, w, h) = (nums[0], nums[1], nums[2], nums[3]);
        if nums.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err((lineno + 1, "normalized coordinates must be in [0,1]".into()));
        }
        let bbox = BBox::new(
            (cx - w / 2.0) * img_w as f64,
            (cy - h / 2.0) * img_h as f64,
            (cx + w / 2.0) * img_w as f64,
            (cy + h / 2.0) * img_h as f64,
        )
        .map_err(|e| (lineno + 1, e.to_string()))?;
        boxes.push(bbox);
    }
    Ok(boxes)
}

/// One detection after matching against ground truth.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchedDetection {
    /// Index into the detection slice handed to [`match_detections`].
    pub detection_index: usize,
    pub confidence: f64,
    pub is_tp: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatchOutcome {
    /// Per-detection labels, in descending-confidence match order.
    pub labels: Vec<MatchedDetection>,
    /// Ground-truth boxes no detection claimed (the FN count).
    pub unmatched_gt: usize,
}

/// Greedy matching at one IoU threshold.
///
/// Detections are visited by descending confidence (ties: lower input
/// index first). Each claims its best-IoU still-unmatched ground truth if
/// that IoU reaches `tau_iou`; otherwise it is a false positive.
pub fn match_detections(dets: &[Detection], gts: &[BBox], tau_iou: f64) -> MatchOutcome {
    let mut order: Vec<usize> = (0..dets.len()).collect();
    order.sort_by(|&a, &b| {
        dets[b]
            .confidence
            .partial_cmp(&dets[a].confidence)
            .unwrap()
            .then(a.cmp(&b))
    });

    let mut gt_taken = vec![false; gts.len()];
    let mut labels = Vec::with_capacity(dets.len());
    for &i in &order {
        let mut best: Option<(usize, f64)> = None;
        for (j, gt) in gts.iter().enumerate() {
            if gt_taken[j] {
                continue;
            }
            let overlap = iou(&dets[i].bbox, gt);
            let better = match best {
                None => overlap > 0.0,
                Some((_, b)) => overlap > b,
            };
            if better {
                best = Some((j, overlap));
            }
        }
        let is_tp = match best {
            Some((j, overlap)) if overlap >= tau_iou => {
                gt_taken[j] = true;
                true
            }
            _ => false,
        };
        labels.push(MatchedDetection {
            detection_index: i,
            confidence: dets[i].confidence,
            is_tp,
        });
    }
    MatchOutcome {
        labels,
        unmatched_gt: gt_taken.iter().filter(|t| !**t).count(),
    }
}

/// 101-point interpolated average precision over `(confidence, is_tp)`
/// labels: the mean over r in {0.00, 0.01, ..., 1.00} of the maximum
/// precision among curve points with recall >= r.
///
/// With no ground truth at all, any detection makes AP 0 and no
/// detections make it vacuously 1.
pub fn average_precision(labeled: &[(f64, bool)], gt_count: usize) -> f64 {
    if gt_count == 0 {
        return if labeled.is_empty() { 1.0 } else { 0.0 };
    }
    let mut points = labeled.to_vec();
    points.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());

    let mut curve = Vec::with_capacity(points.len());
    let (mut tp, mut fp) = (0usize, 0usize);
    for (_, is_tp) in &points {
        if *is_tp {
            tp += 1;
        } else {
            fp += 1;
        }
        let recall = tp as f64 / gt_count as f64;
        let precision = tp as f64 / (tp + fp) as f64;
        curve.push((recall, precision));
    }

    let mut sum = 0.0;
    for step in 0..=100 {
        let r = step as f64 / 100.0;
        let best = curve
            .iter()
            .filter(|(recall, _)| *recall >= r - 1e-12)
            .map(|(_, precision)| *precision)
            .fold(0.0, f64::max);
        sum += best;
    }
    sum / 101.0
}

/// How images with neither ground truth nor detections enter the means.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EmptyImagePolicy {
    /// Count the image as P = R = 1 (vacuously correct).
    #[default]
    CountAsPerfect,
    /// Leave the image out of the precision/recall means.
    Skip,
}

#[derive(Debug, Clone, Serialize)]
pub struct ImageCounts {
    pub id: String,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub missed: usize,
}

/// The five headline detection metrics plus per-image counts.
#[derive(Debug, Clone, Serialize)]
pub struct DetectionReport {
    pub mean_precision: f64,
    pub mean_recall: f64,
    pub f1: f64,
    pub map_50: f64,
    pub map_50_95: f64,
    pub per_image: Vec<ImageCounts>,
}

/// Evaluate raw detector outputs against a ground-truth set.
///
/// Mean precision/recall are per-image means at `conf_tau` with IoU-0.5
/// matching; F1 is their harmonic mean. The AP metrics pool every
/// post-NMS detection with no confidence cut: `map_50` at IoU 0.5 and
/// `map_50_95` averaged over IoU 0.50..0.95 in 0.05 steps.
pub fn detection_report(
    predictions: &BTreeMap<String, Vec<Detection>>,
    gts: &GroundTruthSet,
    conf_tau: f64,
    nms_tau: f64,
    empty_policy: EmptyImagePolicy,
) -> Result<DetectionReport, DetectError> {
    if gts.is_empty() {
        return Err(DetectError::NoImages);
    }

    let postprocessed: Vec<(&GtImage, Vec<Detection>)> = gts
        .images()
        .iter()
        .map(|img| {
            let dets = predictions
                .get(&img.id)
                .map(|d| nms(d, nms_tau))
                .unwrap_or_default();
            (img, dets)
        })
        .collect();

    // Operating-point metrics at conf_tau, IoU 0.5.
    let mut per_image = Vec::new();
    let mut precisions = Vec::new();
    let mut recalls = Vec::new();
    for (img, dets) in &postprocessed {
        let kept = filter_confidence(dets, conf_tau);
        let outcome = match_detections(&kept, &img.boxes, 0.5);
        let tp = outcome.labels.iter().filter(|l| l.is_tp).count();
        let fp = kept.len() - tp;
        let missed = outcome.unmatched_gt;
        per_image.push(ImageCounts {
            id: img.id.clone(),
            tp,
            fp,
            missed,
        });

        let gt_count = img.boxes.len();
        match (gt_count, kept.len()) {
            (0, 0) => {
                if empty_policy == EmptyImagePolicy::CountAsPerfect {
                    precisions.push(1.0);
                    recalls.push(1.0);
                }
            }
            (0, _) => {
                precisions.push(0.0);
                recalls.push(1.0); // nothing to miss
            }
            (_, 0) => {
                precisions.push(0.0);
                recalls.push(0.0);
            }
            _ => {
                precisions.push(tp as f64 / (tp + fp) as f64);
                recalls.push(tp as f64 / gt_count as f64);
            }
        }
    }
    let mean = |v: &[f64]| {
        if v.is_empty() {
            0.0
        } else {
            v.iter().sum::<f64>() / v.len() as f64
        }
    };
    let mean_precision = mean(&precisions);
    let mean_recall = mean(&recalls);
    let f1 = f1_score(mean_precision, mean_recall);

    // Pooled AP across the dataset, no confidence cut.
    let total_gt: usize = gts.images().iter().map(|img| img.boxes.len()).sum();
    let ap_at = |tau_iou: f64| {
        let mut pooled = Vec::new();
        for (img, dets) in &postprocessed {
            let outcome = match_detections(dets, &img.boxes, tau_iou);
            pooled.extend(outcome.labels.iter().map(|l| (l.confidence, l.is_tp)));
        }
        average_precision(&pooled, total_gt)
    };
    let map_50 = ap_at(0.5);
    let map_50_95 = (0..10).map(|i| ap_at(0.5 + 0.05 * i as f64)).sum::<f64>() / 10.0;

    Ok(DetectionReport {
        mean_precision,
        mean_recall,
        f1,
        map_50,
        map_50_95,
        per_image,
    })
}

/// Harmonic mean of precision and recall; 0 when both are 0.
pub fn f1_score(precision: f64, recall: f64) -> f64 {
    if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    }
}
