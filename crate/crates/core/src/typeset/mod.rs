//! Typesetting: estimate the bubble interior, clear it, fit the
//! translated text, and render it back onto the panel.

mod font;

pub use font::{FontMetrics, LinearMetrics, PixelFont, TextFace, VectorFont};

use image::RgbaImage;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{pixel_rect, BBox};

#[derive(Debug, Error)]
pub enum TypesetError {
    #[error("mask is {found_w}x{found_h} but the box rasterizes to {expected_w}x{expected_h}")]
    MaskMismatch {
        expected_w: u32,
        expected_h: u32,
        found_w: u32,
        found_h: u32,
    },
    #[error("font {path}: {message}")]
    FontLoad { path: String, message: String },
}

/// Binary mask over a crop-sized pixel grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Mask {
    width: u32,
    height: u32,
    data: Vec<bool>,
}

impl Mask {
    pub fn new(width: u32, height: u32) -> Self {
        Self {
            width,
            height,
            data: vec![false; width as usize * height as usize],
        }
    }

    pub fn filled(width: u32, height: u32) -> Self {
        Self {
            width,
            height,
            data: vec![true; width as usize * height as usize],
        }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn get(&self, x: u32, y: u32) -> bool {
        self.data[y as usize * self.width as usize + x as usize]
    }

    pub fn set(&mut self, x: u32, y: u32, value: bool) {
        self.data[y as usize * self.width as usize + x as usize] = value;
    }

    pub fn count_set(&self) -> usize {
        self.data.iter().filter(|b| **b).count()
    }
}

/// Knobs for [`estimate_bubble_mask`].
#[derive(Debug, Clone, Copy)]
pub struct MaskOptions {
    /// Minimum intensity counted as bubble-white.
    pub intensity_threshold: u8,
    /// Flood fills covering less than this fraction of the crop fall
    /// back to the rectangle mask.
    pub min_fill_fraction: f64,
    /// Border width of the fallback rectangle mask.
    pub fallback_border: u32,
}

impl Default for MaskOptions {
    fn default() -> Self {
        Self {
            intensity_threshold: 230,
            min_fill_fraction: 0.2,
            fallback_border: 2,
        }
    }
}

fn intensity(p: &image::Rgba<u8>) -> u8 {
    (0.299 * p.0[0] as f64 + 0.587 * p.0[1] as f64 + 0.114 * p.0[2] as f64).round() as u8
}

/// Estimate the bubble interior of a crop.
///
/// Flood fills 4-connected near-white pixels from the center; bubbles
/// are canonically light on darker art, so the connected light region is
/// the interior. When the fill covers less than `min_fill_fraction` of
/// the crop (off-center text, dark crop), the fallback is the full
/// rectangle minus a `fallback_border`-pixel frame.
pub fn estimate_bubble_mask(crop: &RgbaImage, opts: MaskOptions) -> Mask {
    let (w, h) = (crop.width(), crop.height());
    if w == 0 || h == 0 {
        return Mask::new(w, h);
    }

    let mut mask = Mask::new(w, h);
    let (cx, cy) = (w / 2, h / 2);
    let mut filled = 0usize;
    if intensity(crop.get_pixel(cx, cy)) >= opts.intensity_threshold {
        let mut queue = std::collections::VecDeque::new();
        mask.set(cx, cy, true);
        filled = 1;
        queue.push_back((cx, cy));
        while let Some((x, y)) = queue.pop_front() {
            let neighbors = [
                (x.wrapping_sub(1), y),
                (x + 1, y),
                (x, y.wrapping_sub(1)),
                (x, y + 1),
            ];
            for (nx, ny) in neighbors {
                if nx < w
                    && ny < h
                    && !mask.get(nx, ny)
                    && intensity(crop.get_pixel(nx, ny)) >= opts.intensity_threshold
                {
                    mask.set(nx, ny, true);
                    filled += 1;
                    queue.push_back((nx, ny));
                }
            }
        }
    }

    if (filled as f64) < opts.min_fill_fraction * (w as f64 * h as f64) {
        let b = opts.fallback_border;
        if w > 2 * b && h > 2 * b {
            let mut fallback = Mask::new(w, h);
            for y in b..h - b {
                for x in b..w - b {
                    fallback.set(x, y, true);
                }
            }
            return fallback;
        }
        return Mask::filled(w, h);
    }
    mask
}

/// Paint the masked pixels inside `bbox` solid white.
///
/// The mask must match the box's rasterized pixel rectangle exactly;
/// pixels outside the mask are untouched.
pub fn clear_region(image: &mut RgbaImage, bbox: &BBox, mask: &Mask) -> Result<(), TypesetError> {
    let (rx, ry, rw, rh) = pixel_rect(bbox, image.width(), image.height());
    if (mask.width(), mask.height()) != (rw, rh) {
        return Err(TypesetError::MaskMismatch {
            expected_w: rw,
            expected_h: rh,
            found_w: mask.width(),
            found_h: mask.height(),
        });
    }
    for my in 0..rh {
        for mx in 0..rw {
            if mask.get(mx, my) {
                image.put_pixel(rx + mx, ry + my, image::Rgba([255, 255, 255, 255]));
            }
        }
    }
    Ok(())
}

/// Fit-search bounds: pixel margin inside the box and the font size range.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitConstraints {
    pub margin: f32,
    pub min_size: f32,
    pub max_size: f32,
    pub size_step: f32,
}

impl Default for FitConstraints {
    fn default() -> Self {
        Self {
            margin: 4.0,
            min_size: 10.0,
            max_size: 48.0,
            size_step: 1.0,
        }
    }
}

/// A fitted layout: the chosen font size, wrapped lines, and one
/// top-left anchor per line. `overflow` marks text that did not fit even
/// at the minimum size; it still renders (clipped) rather than aborting
/// a batch over one verbose bubble.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TypesetPlan {
    pub bbox: BBox,
    pub font_size: f32,
    pub lines: Vec<String>,
    pub line_anchors: Vec<(f32, f32)>,
    pub overflow: bool,
}

/// Greedy word wrap at one size. `None` when some line exceeds the
/// available width (a lone over-wide word fails the size too).
fn try_wrap(
    words: &[&str],
    metrics: &dyn FontMetrics,
    size: f32,
    avail_w: f32,
) -> Option<Vec<String>> {
    let mut lines: Vec<String> = Vec::new();
    let mut current = String::new();
    for word in words {
        if metrics.text_width(word, size) > avail_w {
            return None;
        }
        let candidate = if current.is_empty() {
            (*word).to_string()
        } else {
            format!("{current} {word}")
        };
        if metrics.text_width(&candidate, size) <= avail_w {
            current = candidate;
        } else {
            lines.push(std::mem::take(&mut current));
            current = (*word).to_string();
        }
    }
    if !current.is_empty() {
        lines.push(current);
    }
    Some(lines)
}

/// Wrap at the minimum size without failing: over-wide words sit alone
/// on their line. Used for the overflow plan.
fn forced_wrap(words: &[&str], metrics: &dyn FontMetrics, size: f32, avail_w: f32) -> Vec<String> {
    let mut lines: Vec<String> = Vec::new();
    let mut current = String::new();
    for word in words {
        let candidate = if current.is_empty() {
            (*word).to_string()
        } else {
            format!("{current} {word}")
        };
        if metrics.text_width(&candidate, size) <= avail_w || current.is_empty() {
            current = candidate;
        } else {
            lines.push(std::mem::take(&mut current));
            current = (*word).to_string();
        }
    }
    if !current.is_empty() {
        lines.push(current);
    }
    lines
}

fn build_plan(
    bbox: &BBox,
    metrics: &dyn FontMetrics,
    size: f32,
    lines: Vec<String>,
    overflow: bool,
) -> TypesetPlan {
    let line_height = metrics.line_height(size);
    let block_height = line_height * lines.len() as f32;
    let top = bbox.y1 as f32 + (bbox.height() as f32 - block_height) / 2.0;
    let line_anchors = lines
        .iter()
        .enumerate()
        .map(|(i, line)| {
            let w = metrics.text_width(line, size);
            let x = bbox.x1 as f32 + (bbox.width() as f32 - w) / 2.0;
            (x, top + i as f32 * line_height)
        })
        .collect();
    TypesetPlan {
        bbox: *bbox,
        font_size: size,
        lines,
        line_anchors,
        overflow,
    }
}

/// Find the largest font size in `[min_size, max_size]` (descending by
/// `size_step`) whose greedy word wrap fits inside the box minus margins
/// in both dimensions. Lines center horizontally, the block centers
/// vertically. Nothing fits at `min_size`: return the forced min-size
/// wrap flagged `overflow` instead of failing.
pub fn fit_text(
    text: &str,
    bbox: &BBox,
    metrics: &dyn FontMetrics,
    constraints: &FitConstraints,
) -> TypesetPlan {
    let words: Vec<&str> = text.split_whitespace().collect();
    if words.is_empty() {
        return build_plan(bbox, metrics, constraints.max_size, Vec::new(), false);
    }

    let avail_w = bbox.width() as f32 - 2.0 * constraints.margin;
    let avail_h = bbox.height() as f32 - 2.0 * constraints.margin;

    if avail_w > 0.0 && avail_h > 0.0 {
        let mut size = constraints.max_size;
        loop {
            if let Some(lines) = try_wrap(&words, metrics, size, avail_w) {
                if metrics.line_height(size) * lines.len() as f32 <= avail_h {
                    return build_plan(bbox, metrics, size, lines, false);
                }
            }
            let next = size - constraints.size_step;
            if size <= constraints.min_size {
                break;
            }
            // Always test min_size itself before giving up.
            size = if next < constraints.min_size {
                constraints.min_size
            } else {
                next
            };
        }
    }

    let lines = forced_wrap(&words, metrics, constraints.min_size, avail_w.max(0.0));
    build_plan(bbox, metrics, constraints.min_size, lines, true)
}

/// Draw a fitted plan in black. Pixels outside the plan's box never
/// change; overflow plans simply clip at the box edge.
pub fn render_plan(image: &mut RgbaImage, plan: &TypesetPlan, face: &dyn TextFace) {
    for (line, (x, y)) in plan.lines.iter().zip(&plan.line_anchors) {
        face.draw_line(image, *x, *y, plan.font_size, line, &plan.bbox);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use image::Rgba;

    fn bx(x1: f64, y1: f64, x2: f64, y2: f64) -> BBox {
        BBox::new(x1, y1, x2, y2).unwrap()
    }

    const LINEAR: LinearMetrics = LinearMetrics {
        width_factor: 0.6,
        height_factor: 1.2,
    };

    #[test]
    fn fit_empty_text() {
        let plan = fit_text(
            "",
            &bx(0.0, 0.0, 100.0, 50.0),
            &LINEAR,
            &FitConstraints::default(),
        );
        assert!(plan.lines.is_empty());
        assert!(!plan.overflow);
    }

    #[test]
    fn fit_hi_at_max_size_forty() {
        // 2 chars * 0.6 * 40 = 48 <= 192, 1.2 * 40 = 48 <= 92.
        let constraints = FitConstraints {
            max_size: 40.0,
            ..Default::default()
        };
        let plan = fit_text("HI", &bx(0.0, 0.0, 200.0, 100.0), &LINEAR, &constraints);
        assert_eq!(plan.font_size, 40.0);
        assert_eq!(plan.lines, vec!["HI".to_string()]);
        assert!(!plan.overflow);
    }

    #[test]
    fn fit_ten_char_word_closed_form() {
        // Width bound: 10 * 0.6 * f <= 92 -> f <= 15.33; height bound
        // 1.2 * f <= 42 -> f <= 35. Integer steps from 48 land on 15.
        let plan = fit_text(
            "ABCDEFGHIJ",
            &bx(0.0, 0.0, 100.0, 50.0),
            &LINEAR,
            &FitConstraints::default(),
        );
        assert_eq!(plan.font_size, 15.0);
        assert!(!plan.overflow);
    }

    #[test]
    fn fit_overflow_at_min_size() {
        // A 40-char word cannot fit a 50 px box at size 10
        // (40 * 0.6 * 10 = 240 > 42): forced min-size plan, flagged.
        let long_word = "A".repeat(40);
        let plan = fit_text(
            &long_word,
            &bx(0.0, 0.0, 50.0, 30.0),
            &LINEAR,
            &FitConstraints::default(),
        );
        assert!(plan.overflow);
        assert_eq!(plan.font_size, 10.0);
        assert_eq!(plan.lines.len(), 1);
    }

    #[test]
    fn fit_never_drops_or_reorders_words() {
        let text = "SHE WALKED TO THE MARKET VERY EARLY TODAY";
        let plan = fit_text(
            text,
            &bx(0.0, 0.0, 120.0, 80.0),
            &LINEAR,
            &FitConstraints::default(),
        );
        assert_eq!(plan.lines.join(" "), text);
    }

    #[test]
    fn fit_size_is_maximal() {
        let text = "HELLO WORLD FROM THE PIPELINE";
        let constraints = FitConstraints::default();
        let bbox = bx(0.0, 0.0, 150.0, 90.0);
        let plan = fit_text(text, &bbox, &LINEAR, &constraints);
        assert!(!plan.overflow);
        let words: Vec<&str> = text.split_whitespace().collect();
        let bigger = plan.font_size + constraints.size_step;
        let avail_w = 150.0 - 2.0 * constraints.margin;
        let avail_h = 90.0 - 2.0 * constraints.margin;
        let fits_bigger = try_wrap(&words, &LINEAR, bigger, avail_w)
            .map(|lines| LINEAR.line_height(bigger) * lines.len() as f32 <= avail_h)
            .unwrap_or(false);
        assert!(!fits_bigger, "size {} should have been chosen", bigger);
    }

    #[test]
    fn mask_all_white_fills_everything() {
        let crop = RgbaImage::from_pixel(20, 10, Rgba([255, 255, 255, 255]));
        let mask = estimate_bubble_mask(&crop, MaskOptions::default());
        assert_eq!(mask.count_set(), 200);
    }

    #[test]
    fn mask_all_black_falls_back_to_bordered_rectangle() {
        let crop = RgbaImage::from_pixel(20, 10, Rgba([0, 0, 0, 255]));
        let mask = estimate_bubble_mask(&crop, MaskOptions::default());
        // (20-4) * (10-4) interior.
        assert_eq!(mask.count_set(), 16 * 6);
        assert!(!mask.get(0, 0));
        assert!(mask.get(10, 5));
    }

    #[test]
    fn mask_matches_synthetic_ellipse_within_boundary_band() {
        // White ellipse on black; the fill must recover the ellipse up to
        // a one-pixel boundary band.
        let (w, h) = (60u32, 40u32);
        let (cx, cy, rx, ry) = (30.0f64, 20.0f64, 24.0f64, 14.0f64);
        let inside = |x: u32, y: u32, shrink: f64| {
            let dx = (x as f64 + 0.5 - cx) / (rx + shrink);
            let dy = (y as f64 + 0.5 - cy) / (ry + shrink);
            dx * dx + dy * dy <= 1.0
        };
        let crop = RgbaImage::from_fn(w, h, |x, y| {
            if inside(x, y, 0.0) {
                Rgba([255, 255, 255, 255])
            } else {
                Rgba([0, 0, 0, 255])
            }
        });
        let mask = estimate_bubble_mask(&crop, MaskOptions::default());
        for y in 0..h {
            for x in 0..w {
                if inside(x, y, -1.5) {
                    assert!(mask.get(x, y), "interior pixel ({x},{y}) missing");
                }
                if !inside(x, y, 1.5) {
                    assert!(!mask.get(x, y), "exterior pixel ({x},{y}) set");
                }
            }
        }
    }

    #[test]
    fn clear_region_full_empty_and_half() {
        let base = RgbaImage::from_pixel(30, 30, Rgba([10, 20, 30, 255]));
        let bbox = bx(5.0, 5.0, 25.0, 25.0);

        let mut img = base.clone();
        clear_region(&mut img, &bbox, &Mask::filled(20, 20)).unwrap();
        let white = img.pixels().filter(|p| p.0 == [255, 255, 255, 255]).count();
        assert_eq!(white, 400);

        let mut img = base.clone();
        clear_region(&mut img, &bbox, &Mask::new(20, 20)).unwrap();
        assert_eq!(img, base);

        let mut half = Mask::new(20, 20);
        for y in 0..20 {
            for x in 0..10 {
                half.set(x, y, true);
            }
        }
        let mut img = base.clone();
        clear_region(&mut img, &bbox, &half).unwrap();
        let white = img.pixels().filter(|p| p.0 == [255, 255, 255, 255]).count();
        assert_eq!(white, 200, "exactly the masked pixel count changes");
    }

    #[test]
    fn clear_region_rejects_mismatched_mask() {
        let mut img = RgbaImage::new(30, 30);
        let err =
            clear_region(&mut img, &bx(5.0, 5.0, 25.0, 25.0), &Mask::filled(5, 5)).unwrap_err();
        assert!(matches!(err, TypesetError::MaskMismatch { .. }));
    }

    #[test]
    fn render_zero_lines_changes_nothing() {
        let mut img = RgbaImage::from_pixel(40, 40, Rgba([200, 200, 200, 255]));
        let before = img.clone();
        let plan = fit_text(
            "",
            &bx(0.0, 0.0, 40.0, 40.0),
            &PixelFont,
            &FitConstraints::default(),
        );
        render_plan(&mut img, &plan, &PixelFont);
        assert_eq!(img, before);
    }

    #[test]
    fn render_confines_diff_to_plan_box() {
        let mut img = RgbaImage::from_pixel(100, 100, Rgba([255, 255, 255, 255]));
        let before = img.clone();
        let bbox = bx(20.0, 30.0, 80.0, 70.0);
        let plan = fit_text("HI THERE", &bbox, &PixelFont, &FitConstraints::default());
        render_plan(&mut img, &plan, &PixelFont);

        let mut changed = 0;
        for (x, y, p) in img.enumerate_pixels() {
            if p != before.get_pixel(x, y) {
                changed += 1;
                assert!(
                    (x as f64) >= bbox.x1
                        && (x as f64) < bbox.x2
                        && (y as f64) >= bbox.y1
                        && (y as f64) < bbox.y2,
                    "pixel ({x},{y}) changed outside the box"
                );
            }
        }
        assert!(changed > 0);
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        fn arb_text() -> impl Strategy<Value = String> {
            proptest::collection::vec("[A-Z]{1,10}", 1..12).prop_map(|w| w.join(" "))
        }

        fn arb_bbox() -> impl Strategy<Value = BBox> {
            (0.0f64..40.0, 0.0f64..40.0, 20.0f64..260.0, 15.0f64..160.0)
                .prop_map(|(x, y, w, h)| bx(x, y, x + w, y + h))
        }

        proptest! {
            #[test]
            fn wrap_preserves_words(text in arb_text(), bbox in arb_bbox()) {
                let plan = fit_text(&text, &bbox, &LINEAR, &FitConstraints::default());
                prop_assert_eq!(plan.lines.join(" "), text);
            }

            #[test]
            fn chosen_size_is_maximal(text in arb_text(), bbox in arb_bbox()) {
                let constraints = FitConstraints::default();
                let plan = fit_text(&text, &bbox, &LINEAR, &constraints);
                prop_assume!(!plan.overflow);
                if plan.font_size + constraints.size_step <= constraints.max_size {
                    let bigger = plan.font_size + constraints.size_step;
                    let words: Vec<&str> = text.split_whitespace().collect();
                    let avail_w = bbox.width() as f32 - 2.0 * constraints.margin;
                    let avail_h = bbox.height() as f32 - 2.0 * constraints.margin;
                    let fits = try_wrap(&words, &LINEAR, bigger, avail_w)
                        .map(|lines| LINEAR.line_height(bigger) * lines.len() as f32 <= avail_h)
                        .unwrap_or(false);
                    prop_assert!(!fits);
                }
            }

            #[test]
            fn growing_the_box_never_shrinks_the_font(
                text in arb_text(),
                bbox in arb_bbox(),
                grow_w in 0.0f64..80.0,
                grow_h in 0.0f64..60.0,
            ) {
                let constraints = FitConstraints::default();
                let small = fit_text(&text, &bbox, &LINEAR, &constraints);
                let grown = bx(bbox.x1, bbox.y1, bbox.x2 + grow_w, bbox.y2 + grow_h);
                let large = fit_text(&text, &grown, &LINEAR, &constraints);
                prop_assert!(large.font_size >= small.font_size);
            }

            #[test]
            fn clear_then_render_stays_inside_the_region(
                text in arb_text(),
                x in 4.0f64..30.0,
                y in 4.0f64..30.0,
                w in 30.0f64..70.0,
                h in 24.0f64..60.0,
            ) {
                let bbox = bx(x, y, x + w, y + h);
                let mut img = RgbaImage::from_pixel(120, 110, Rgba([90, 120, 150, 255]));
                let before = img.clone();
                let mask_region = bbox;
                let (rx, ry, rw, rh) = crate::geometry::pixel_rect(&mask_region, 120, 110);
                clear_region(&mut img, &mask_region, &Mask::filled(rw, rh)).unwrap();
                let plan = fit_text(&text, &bbox, &PixelFont, &FitConstraints::default());
                render_plan(&mut img, &plan, &PixelFont);
                for (px, py, p) in img.enumerate_pixels() {
                    if p != before.get_pixel(px, py) {
                        prop_assert!(
                            px >= rx && px < rx + rw && py >= ry && py < ry + rh,
                            "pixel ({}, {}) changed outside the region", px, py
                        );
                    }
                }
            }
        }
    }
}
