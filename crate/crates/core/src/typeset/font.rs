//! Font abstractions for fitting and rendering: string width and line
//! height drive the fit search, and faces that can also rasterize draw
//! the fitted lines.
//!
//! Three implementations: [`LinearMetrics`] (the analytic model used by
//! fit tests), [`PixelFont`] (a built-in 5x7 face, no files needed), and
//! [`VectorFont`] (a real .ttf/.otf via ab_glyph).

use ab_glyph::{Font, FontVec, PxScale, ScaleFont};
use image::RgbaImage;

use super::TypesetError;
use crate::geometry::BBox;

/// Advance width of a string and line height at a font size.
pub trait FontMetrics {
    fn text_width(&self, text: &str, size: f32) -> f32;
    fn line_height(&self, size: f32) -> f32;
}

/// A face that can also draw: renders one line in black, top-left
/// anchored at `(x, top_y)`, clipped to `clip` and the image bounds.
pub trait TextFace: FontMetrics {
    fn draw_line(
        &self,
        image: &mut RgbaImage,
        x: f32,
        top_y: f32,
        size: f32,
        text: &str,
        clip: &BBox,
    );
}

/// Analytic metrics: `width = factor * size * char_count`,
/// `line_height = factor * size`. The fit tests pin 0.6 and 1.2.
#[derive(Debug, Clone, Copy)]
pub struct LinearMetrics {
    pub width_factor: f32,
    pub height_factor: f32,
}

impl Default for LinearMetrics {
    fn default() -> Self {
        Self {
            width_factor: 0.6,
            height_factor: 1.2,
        }
    }
}

impl FontMetrics for LinearMetrics {
    fn text_width(&self, text: &str, size: f32) -> f32 {
        self.width_factor * size * text.chars().count() as f32
    }

    fn line_height(&self, size: f32) -> f32 {
        self.height_factor * size
    }
}

const GLYPH_ROWS: usize = 7;
const GLYPH_COLS: usize = 5;

/// 5x7 bitmap glyph, rows top to bottom, `#` marks an inked cell.
type GlyphRows = [&'static str; GLYPH_ROWS];

fn glyph_rows(c: char) -> GlyphRows {
    let c = c.to_ascii_uppercase();
    match c {
        'A' => [
            ".###.", "#...#", "#...#", "#####", "#...#", "#...#", "#...#",
        ],
        'B' => [
            "####.", "#...#", "#...#", "####.", "#...#", "#...#", "####.",
        ],
        'C' => [
            ".###.", "#...#", "#....", "#....", "#....", "#...#", ".###.",
        ],
        'D' => [
            "####.", "#...#", "#...#", "#...#", "#...#", "#...#", "####.",
        ],
        'E' => [
            "#####", "#....", "#....", "####.", "#....", "#....", "#####",
        ],
        'F' => [
            "#####", "#....", "#....", "####.", "#....", "#....", "#....",
        ],
        'G' => [
            ".###.", "#...#", "#....", "#.###", "#...#", "#...#", ".###.",
        ],
        'H' => [
            "#...#", "#...#", "#...#", "#####", "#...#", "#...#", "#...#",
        ],
        'I' => [
            ".###.", "..#..", "..#..", "..#..", "..#..", "..#..", ".###.",
        ],
        'J' => [
            "..###", "...#.", "...#.", "...#.", "...#.", "#..#.", ".##..",
        ],
        'K' => [
            "#...#", "#..#.", "#.#..", "##...", "#.#..", "#..#.", "#...#",
        ],
        'L' => [
            "#....", "#....", "#....", "#....", "#....", "#....", "#####",
        ],
        'M' => [
            "#...#", "##.##", "#.#.#", "#.#.#", "#...#", "#...#", "#...#",
        ],
        'N' => [
            "#...#", "##..#", "#.#.#", "#..##", "#...#", "#...#", "#...#",
        ],
        'O' => [
            ".###.", "#...#", "#...#", "#...#", "#...#", "#...#", ".###.",
        ],
        'P' => [
            "####.", "#...#", "#...#", "####.", "#....", "#....", "#....",
        ],
        'Q' => [
            ".###.", "#...#", "#...#", "#...#", "#.#.#", "#..#.", ".##.#",
        ],
        'R' => [
            "####.", "#...#", "#...#", "####.", "#.#..", "#..#.", "#...#",
        ],
        'S' => [
            ".####", "#....", "#....", ".###.", "....#", "....#", "####.",
        ],
        'T' => [
            "#####", "..#..", "..#..", "..#..", "..#..", "..#..", "..#..",
        ],
        'U' => [
            "#...#", "#...#", "#...#", "#...#", "#...#", "#...#", ".###.",
        ],
        'V' => [
            "#...#", "#...#", "#...#", "#...#", "#...#", ".#.#.", "..#..",
        ],
        'W' => [
            "#...#", "#...#", "#...#", "#.#.#", "#.#.#", "##.##", "#...#",
        ],
        'X' => [
            "#...#", "#...#", ".#.#.", "..#..", ".#.#.", "#...#", "#...#",
        ],
        'Y' => [
            "#...#", "#...#", ".#.#.", "..#..", "..#..", "..#..", "..#..",
        ],
        'Z' => [
            "#####", "....#", "...#.", "..#..", ".#...", "#....", "#####",
        ],
        '0' => [
            ".###.", "#...#", "#..##", "#.#.#", "##..#", "#...#", ".###.",
        ],
        '1' => [
            "..#..", ".##..", "..#..", "..#..", "..#..", "..#..", ".###.",
        ],
        '2' => [
            ".###.", "#...#", "....#", "...#.", "..#..", ".#...", "#####",
        ],
        '3' => [
            ".###.", "#...#", "....#", "..##.", "....#", "#...#", ".###.",
        ],
        '4' => [
            "...#.", "..##.", ".#.#.", "#..#.", "#####", "...#.", "...#.",
        ],
        '5' => [
            "#####", "#....", "####.", "....#", "....#", "#...#", ".###.",
        ],
        '6' => [
            "..##.", ".#...", "#....", "####.", "#...#", "#...#", ".###.",
        ],
        '7' => [
            "#####", "....#", "...#.", "..#..", ".#...", ".#...", ".#...",
        ],
        '8' => [
            ".###.", "#...#", "#...#", ".###.", "#...#", "#...#", ".###.",
        ],
        '9' => [
            ".###.", "#...#", "#...#", ".####", "....#", "...#.", ".##..",
        ],
        '.' => [
            ".....", ".....", ".....", ".....", ".....", ".##..", ".##..",
        ],
        ',' => [
            ".....", ".....", ".....", ".....", ".##..", "..#..", ".#...",
        ],
        '!' => [
            "..#..", "..#..", "..#..", "..#..", "..#..", ".....", "..#..",
        ],
        '?' => [
            ".###.", "#...#", "....#", "...#.", "..#..", ".....", "..#..",
        ],
        '\'' => [
            "..#..", "..#..", ".#...", ".....", ".....", ".....", ".....",
        ],
        '"' => [
            ".#.#.", ".#.#.", ".....", ".....", ".....", ".....", ".....",
        ],
        '-' => [
            ".....", ".....", ".....", "#####", ".....", ".....", ".....",
        ],
        ':' => [
            ".....", ".##..", ".##..", ".....", ".##..", ".##..", ".....",
        ],
        ';' => [
            ".....", ".##..", ".##..", ".....", ".##..", "..#..", ".#...",
        ],
        ' ' => [
            ".....", ".....", ".....", ".....", ".....", ".....", ".....",
        ],
        // Anything else renders as a hollow box, like missing glyphs do.
        _ => [
            "#####", "#...#", "#...#", "#...#", "#...#", "#...#", "#####",
        ],
    }
}

/// Built-in 5x7 pixel face. Self-contained: no font file required.
///
/// The nominal size maps to a whole-cell scale `k = max(1, round(size/8))`;
/// glyphs are 5k wide with a 1k gap, lines 9k tall. Quantized, so widths
/// grow in steps, but metrics and rasterization always agree.
#[derive(Debug, Clone, Copy, Default)]
pub struct PixelFont;

impl PixelFont {
    fn cell(size: f32) -> u32 {
        ((size / 8.0).round() as i64).max(1) as u32
    }
}

impl FontMetrics for PixelFont {
    fn text_width(&self, text: &str, size: f32) -> f32 {
        let k = Self::cell(size);
        let n = text.chars().count() as u32;
        if n == 0 {
            0.0
        } else {
            (n * (GLYPH_COLS as u32 + 1) * k - k) as f32
        }
    }

    fn line_height(&self, size: f32) -> f32 {
        ((GLYPH_ROWS as u32 + 2) * Self::cell(size)) as f32
    }
}

/// Fill a solid rectangle, clipped to `clip` and the image.
fn fill_rect_clipped(image: &mut RgbaImage, x0: f32, y0: f32, w: f32, h: f32, clip: &BBox) {
    let x_min = (x0 as f64).max(clip.x1).max(0.0).floor() as i64;
    let y_min = (y0 as f64).max(clip.y1).max(0.0).floor() as i64;
    let x_max = ((x0 + w) as f64)
        .min(clip.x2)
        .min(image.width() as f64)
        .ceil() as i64;
    let y_max = ((y0 + h) as f64)
        .min(clip.y2)
        .min(image.height() as f64)
        .ceil() as i64;
    for y in y_min..y_max {
        for x in x_min..x_max {
            if x >= 0 && y >= 0 && (x as u32) < image.width() && (y as u32) < image.height() {
                image.put_pixel(x as u32, y as u32, image::Rgba([0, 0, 0, 255]));
            }
        }
    }
}

impl TextFace for PixelFont {
    fn draw_line(
        &self,
        image: &mut RgbaImage,
        x: f32,
        top_y: f32,
        size: f32,
        text: &str,
        clip: &BBox,
    ) {
        let k = Self::cell(size) as f32;
        let mut pen_x = x;
        let glyph_top = top_y + k; // one cell of leading above the glyph box
        for c in text.chars() {
            let rows = glyph_rows(c);
            for (row, bits) in rows.iter().enumerate() {
                for (col, cell) in bits.chars().enumerate() {
                    if cell == '#' {
                        fill_rect_clipped(
                            image,
                            pen_x + col as f32 * k,
                            glyph_top + row as f32 * k,
                            k,
                            k,
                            clip,
                        );
                    }
                }
            }
            pen_x += (GLYPH_COLS as f32 + 1.0) * k;
        }
    }
}

/// A real vector font loaded from a .ttf/.otf file.
#[derive(Debug)]
pub struct VectorFont {
    font: FontVec,
    source: String,
}

impl VectorFont {
    pub fn from_file(path: &std::path::Path) -> Result<Self, TypesetError> {
        let bytes = std::fs::read(path).map_err(|e| TypesetError::FontLoad {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        let font = FontVec::try_from_vec(bytes).map_err(|e| TypesetError::FontLoad {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Ok(Self {
            font,
            source: path.display().to_string(),
        })
    }

    pub fn source(&self) -> &str {
        &self.source
    }
}

impl FontMetrics for VectorFont {
    fn text_width(&self, text: &str, size: f32) -> f32 {
        let scaled = self.font.as_scaled(PxScale::from(size));
        let mut width = 0.0;
        let mut prev = None;
        for c in text.chars() {
            let id = self.font.glyph_id(c);
            if let Some(p) = prev {
                width += scaled.kern(p, id);
            }
            width += scaled.h_advance(id);
            prev = Some(id);
        }
        width
    }

    fn line_height(&self, size: f32) -> f32 {
        let scaled = self.font.as_scaled(PxScale::from(size));
        scaled.ascent() - scaled.descent() + scaled.line_gap()
    }
}

impl TextFace for VectorFont {
    fn draw_line(
        &self,
        image: &mut RgbaImage,
        x: f32,
        top_y: f32,
        size: f32,
        text: &str,
        clip: &BBox,
    ) {
        let scale = PxScale::from(size);
        let scaled = self.font.as_scaled(scale);
        let baseline = top_y + scaled.ascent();
        let mut pen_x = x;
        let mut prev = None;
        for c in text.chars() {
            let id = self.font.glyph_id(c);
            if let Some(p) = prev {
                pen_x += scaled.kern(p, id);
            }
            let glyph = id.with_scale_and_position(scale, ab_glyph::point(pen_x, baseline));
            if let Some(outlined) = self.font.outline_glyph(glyph) {
                let bounds = outlined.px_bounds();
                outlined.draw(|gx, gy, coverage| {
                    let px = bounds.min.x + gx as f32;
                    let py = bounds.min.y + gy as f32;
                    if px < clip.x1 as f32
                        || px >= clip.x2 as f32
                        || py < clip.y1 as f32
                        || py >= clip.y2 as f32
                    {
                        return;
                    }
                    if px < 0.0
                        || py < 0.0
                        || px >= image.width() as f32
                        || py >= image.height() as f32
                    {
                        return;
                    }
                    let (ix, iy) = (px as u32, py as u32);
                    let dst = image.get_pixel_mut(ix, iy);
                    // Blend toward black by coverage.
                    let keep = 1.0 - coverage.clamp(0.0, 1.0);
                    dst.0[0] = (dst.0[0] as f32 * keep) as u8;
                    dst.0[1] = (dst.0[1] as f32 * keep) as u8;
                    dst.0[2] = (dst.0[2] as f32 * keep) as u8;
                    dst.0[3] = 255;
                });
            }
            pen_x += scaled.h_advance(id);
            prev = Some(id);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_metrics_match_model() {
        let m = LinearMetrics::default();
        assert_eq!(m.text_width("HI", 40.0), 0.6 * 40.0 * 2.0);
        assert_eq!(m.line_height(40.0), 1.2 * 40.0);
        assert_eq!(m.text_width("", 40.0), 0.0);
    }

    #[test]
    fn pixel_font_metrics_consistent() {
        let f = PixelFont;
        // size 16 -> cell 2: width of "AB" = 2*6*2 - 2 = 22, height 18.
        assert_eq!(f.text_width("AB", 16.0), 22.0);
        assert_eq!(f.line_height(16.0), 18.0);
        assert_eq!(f.text_width("", 16.0), 0.0);
        // Every glyph row table is well-formed.
        for c in ('A'..='Z').chain('0'..='9').chain(".,!?'\"-:; x".chars()) {
            for row in glyph_rows(c) {
                assert_eq!(row.len(), 5, "glyph {c:?}");
            }
        }
    }

    #[test]
    fn pixel_font_draws_inside_clip_only() {
        let mut img = RgbaImage::from_pixel(60, 30, image::Rgba([255, 255, 255, 255]));
        let clip = BBox::new(10.0, 5.0, 50.0, 25.0).unwrap();
        PixelFont.draw_line(&mut img, 12.0, 6.0, 8.0, "HI", &clip);
        let mut changed = 0;
        for (x, y, p) in img.enumerate_pixels() {
            if p.0 != [255, 255, 255, 255] {
                changed += 1;
                assert!(
                    (x as f64) >= clip.x1
                        && (x as f64) < clip.x2
                        && (y as f64) >= clip.y1
                        && (y as f64) < clip.y2,
                    "pixel ({x},{y}) outside clip"
                );
            }
        }
        assert!(changed > 0, "glyphs must ink something");
    }

    #[test]
    fn vector_font_loads_when_system_font_present() {
        let path = std::path::Path::new("/usr/share/fonts/truetype/dejavu/DejaVuSans.ttf");
        if !path.exists() {
            return; // environment without fonts; covered by PixelFont elsewhere
        }
        let face = VectorFont::from_file(path).unwrap();
        let w = face.text_width("HELLO", 24.0);
        assert!(w > 0.0);
        assert!(face.line_height(24.0) > 0.0);
        assert!(face.text_width("HELLO", 30.0) > w, "width grows with size");

        let mut img = RgbaImage::from_pixel(200, 60, image::Rgba([255, 255, 255, 255]));
        let clip = BBox::new(0.0, 0.0, 200.0, 60.0).unwrap();
        face.draw_line(&mut img, 4.0, 4.0, 24.0, "HELLO", &clip);
        assert!(img.pixels().any(|p| p.0[0] < 128), "ink expected");
    }

    #[test]
    fn vector_font_error_names_path() {
        let err = VectorFont::from_file(std::path::Path::new("/no/such/font.ttf")).unwrap_err();
        assert!(err.to_string().contains("/no/such/font.ttf"));
    }
}
