//! Axis-aligned box arithmetic shared by every pipeline stage: IoU,
//! crop padding and the bubble reading order.
//!
//! Coordinates are continuous pixels, origin top-left, x right, y down.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum GeometryError {
    #[error("invalid box ({x1},{y1},{x2},{y2}): coordinates must be finite, non-negative, with x1 < x2 and y1 < y2")]
    InvalidBox { x1: f64, y1: f64, x2: f64, y2: f64 },
    #[error("confidence {0} outside [0,1]")]
    InvalidConfidence(f64),
}

/// Axis-aligned bounding box with strictly positive area.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BBox {
    pub x1: f64,
    pub y1: f64,
    pub x2: f64,
    pub y2: f64,
}

impl BBox {
    pub fn new(x1: f64, y1: f64, x2: f64, y2: f64) -> Result<Self, GeometryError> {
        let ok = [x1, y1, x2, y2].iter().all(|v| v.is_finite() && *v >= 0.0) && x1 < x2 && y1 < y2;
        if !ok {
            return Err(GeometryError::InvalidBox { x1, y1, x2, y2 });
        }
        Ok(Self { x1, y1, x2, y2 })
    }

    pub fn width(&self) -> f64 {
        self.x2 - self.x1
    }

    pub fn height(&self) -> f64 {
        self.y2 - self.y1
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn center(&self) -> (f64, f64) {
        ((self.x1 + self.x2) / 2.0, (self.y1 + self.y2) / 2.0)
    }

    /// Clamp to `[0,width] x [0,height]`. `None` if nothing remains.
    pub fn clamp_to(&self, width: f64, height: f64) -> Option<BBox> {
        let x1 = self.x1.clamp(0.0, width);
        let y1 = self.y1.clamp(0.0, height);
        let x2 = self.x2.clamp(0.0, width);
        let y2 = self.y2.clamp(0.0, height);
        BBox::new(x1, y1, x2, y2).ok()
    }
}

/// One detector output: a box, a confidence and a class label.
///
/// The bubble dataset is single-class, so `class_id` is 0 throughout.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub bbox: BBox,
    pub confidence: f64,
    #[serde(default)]
    pub class_id: u32,
}

impl Detection {
    pub fn new(bbox: BBox, confidence: f64, class_id: u32) -> Result<Self, GeometryError> {
        if !(0.0..=1.0).contains(&confidence) || !confidence.is_finite() {
            return Err(GeometryError::InvalidConfidence(confidence));
        }
        Ok(Self {
            bbox,
            confidence,
            class_id,
        })
    }
}

/// Intersection-over-union of two boxes. 0 when disjoint.
pub fn iou(a: &BBox, b: &BBox) -> f64 {
    let ix1 = a.x1.max(b.x1);
    let iy1 = a.y1.max(b.y1);
    let ix2 = a.x2.min(b.x2);
    let iy2 = a.y2.min(b.y2);
    if ix2 <= ix1 || iy2 <= iy1 {
        return 0.0;
    }
    let inter = (ix2 - ix1) * (iy2 - iy1);
    inter / (a.area() + b.area() - inter)
}

/// Grow a box by `pad` on every side, clamped to `[0,width] x [0,height]`.
///
/// The result can collapse to zero area only when the input lies entirely
/// outside the bounds; callers that guarantee in-bounds boxes always get
/// a valid box back.
pub fn expand(b: &BBox, pad: f64, width: f64, height: f64) -> Option<BBox> {
    debug_assert!(pad >= 0.0 && width > 0.0 && height > 0.0);
    BBox {
        x1: b.x1 - pad,
        y1: b.y1 - pad,
        x2: b.x2 + pad,
        y2: b.y2 + pad,
    }
    .clamp_to(width, height)
}

/// Integer pixel rectangle `(x, y, w, h)` covering a box within an image:
/// floor on the top-left corner, ceil on the bottom-right, clamped.
pub fn pixel_rect(b: &BBox, img_w: u32, img_h: u32) -> (u32, u32, u32, u32) {
    let x = (b.x1.floor().max(0.0) as u32).min(img_w);
    let y = (b.y1.floor().max(0.0) as u32).min(img_h);
    let x2 = (b.x2.ceil().max(0.0) as u32).min(img_w);
    let y2 = (b.y2.ceil().max(0.0) as u32).min(img_h);
    (x, y, x2.saturating_sub(x), y2.saturating_sub(y))
}

/// Default row-clustering tolerance as a fraction of the median box height.
pub const ROW_TOLERANCE_FACTOR: f64 = 0.5;

/// Reading order of bubbles: rows top to bottom, left to right inside a row.
///
/// Boxes whose vertical centers differ from the row's topmost box by at
/// most `tol_factor x median box height` share a row. A plain y-sort would
/// misorder side-by-side bubbles, hence the clustering. Returns a
/// permutation of `0..boxes.len()`; ties break on the original index.
pub fn reading_order_with_tolerance(boxes: &[BBox], tol_factor: f64) -> Vec<usize> {
    if boxes.is_empty() {
        return Vec::new();
    }

    let mut heights: Vec<f64> = boxes.iter().map(|b| b.height()).collect();
    heights.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median_height = if heights.len() % 2 == 1 {
        heights[heights.len() / 2]
    } else {
        (heights[heights.len() / 2 - 1] + heights[heights.len() / 2]) / 2.0
    };
    let tol = tol_factor * median_height;

    // Top to bottom by center; original index breaks ties.
    let mut by_cy: Vec<usize> = (0..boxes.len()).collect();
    by_cy.sort_by(|&a, &b| {
        let ca = boxes[a].center().1;
        let cb = boxes[b].center().1;
        ca.partial_cmp(&cb).unwrap().then(a.cmp(&b))
    });

    let mut rows: Vec<Vec<usize>> = Vec::new();
    let mut row_seed_cy = f64::NEG_INFINITY;
    for idx in by_cy {
        let cy = boxes[idx].center().1;
        if rows.is_empty() || cy - row_seed_cy > tol {
            rows.push(vec![idx]);
            row_seed_cy = cy;
        } else {
            rows.last_mut().unwrap().push(idx);
        }
    }

    let mut order = Vec::with_capacity(boxes.len());
    for row in &mut rows {
        row.sort_by(|&a, &b| {
            boxes[a]
                .x1
                .partial_cmp(&boxes[b].x1)
                .unwrap()
                .then(a.cmp(&b))
        });
        order.extend_from_slice(row);
    }
    order
}

/// [`reading_order_with_tolerance`] with the default tolerance factor.
pub fn reading_order(boxes: &[BBox]) -> Vec<usize> {
    reading_order_with_tolerance(boxes, ROW_TOLERANCE_FACTOR)
}
