//! Symbolic image operations: spatial crops, color pop, background blur,
//! tag labels and emoji stamping. All functions return new images and leave
//! their inputs untouched.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::emoji::EmojiTable;
use crate::error::ImageError;
use crate::font;
use crate::image::{BBox, Image, Mask, ObjectRegion, Rgba};
use crate::par::Exec;

/// Box-blur radius (an 11×11 window).
pub const BLUR_RADIUS: usize = 5;
pub const BLUR_PASSES: usize = 2;
/// Outline width for tagged boxes.
pub const STROKE: u32 = 2;
/// Padding around label text inside its band.
pub const LABEL_PAD: u32 = 2;
pub const LABEL_BAND_H: u32 = font::GLYPH_H + 2 * LABEL_PAD;

const TAG_COLORS: [Rgba; 6] = [
    [230, 25, 75, 255],
    [60, 120, 216, 255],
    [0, 150, 100, 255],
    [145, 30, 180, 255],
    [245, 130, 48, 255],
    [70, 70, 70, 255],
];
const LABEL_TEXT: Rgba = [255, 255, 255, 255];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ImageOpError {
    #[error("crop is empty")]
    EmptyCrop,
    #[error("region {index} has neither tag nor category")]
    UntaggedRegion { index: usize },
    #[error("region {index} has no mask")]
    MissingMask { index: usize },
    #[error("unknown emoji {name:?}; available: {}", available.join(", "))]
    UnknownEmoji { name: String, available: Vec<String> },
    #[error(transparent)]
    Image(#[from] ImageError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    None,
    Left,
    Right,
    Above,
    Below,
    FrontOf,
    Behind,
}

impl FromStr for Relation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s.to_ascii_lowercase().as_str() {
            "none" | "" => Relation::None,
            "left" => Relation::Left,
            "right" => Relation::Right,
            "above" => Relation::Above,
            "below" => Relation::Below,
            "frontof" => Relation::FrontOf,
            "behind" => Relation::Behind,
            other => return Err(format!("unknown relation {other:?}")),
        })
    }
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Relation::None => "none",
            Relation::Left => "left",
            Relation::Right => "right",
            Relation::Above => "above",
            Relation::Below => "below",
            Relation::FrontOf => "frontof",
            Relation::Behind => "behind",
        })
    }
}

/// Pixel rectangle `[x0, x1) × [y0, y1)` that `crop_spatial` would cut out.
pub fn crop_rect(width: u32, height: u32, b: &BBox, rel: Relation) -> (u32, u32, u32, u32) {
    let (bx0, by0, bx1, by1) = b.pixel_span(width, height);
    match rel {
        // No depth model exists, so front-of and behind crop the box itself.
        Relation::None | Relation::FrontOf | Relation::Behind => (bx0, by0, bx1, by1),
        Relation::Left => (0, 0, bx0, height),
        Relation::Right => (bx1, 0, width, height),
        Relation::Above => (0, 0, width, by0),
        Relation::Below => (0, by1, width, height),
    }
}

pub fn crop_spatial(image: &Image, b: &BBox, rel: Relation) -> Result<Image, ImageOpError> {
    let (x0, y0, x1, y1) = crop_rect(image.width(), image.height(), b, rel);
    if x0 >= x1 || y0 >= y1 {
        return Err(ImageOpError::EmptyCrop);
    }
    Ok(image.sub_image(x0, y0, x1, y1)?)
}

/// Union of region masks; every region must carry a mask sized like the image.
pub fn union_mask(image: &Image, objs: &[ObjectRegion]) -> Result<Mask, ImageOpError> {
    let mut m = Mask::empty(image.width(), image.height());
    for (index, r) in objs.iter().enumerate() {
        let rm = r.mask.as_ref().ok_or(ImageOpError::MissingMask { index })?;
        m.union_with(rm)?;
    }
    Ok(m)
}

#[inline]
pub fn luma(px: Rgba) -> u8 {
    (0.299 * px[0] as f64 + 0.587 * px[1] as f64 + 0.114 * px[2] as f64)
        .round()
        .clamp(0.0, 255.0) as u8
}

/// Keeps pixels inside the union of masks; desaturates the rest.
pub fn color_pop(image: &Image, objs: &[ObjectRegion]) -> Result<Image, ImageOpError> {
    let keep = union_mask(image, objs)?;
    let mut out = image.clone();
    let w = image.width();
    for (i, px) in out.pixels_mut().chunks_exact_mut(4).enumerate() {
        let (x, y) = (i as u32 % w, i as u32 / w);
        if !keep.get(x, y) {
            let y = luma([px[0], px[1], px[2], px[3]]);
            px[0] = y;
            px[1] = y;
            px[2] = y;
        }
    }
    Ok(out)
}

/// One 1-D box pass with clamp-to-edge sampling over `len` samples spaced `stride` apart.
fn box_pass_1d(src: &[f32], dst: &mut [f32], len: usize, radius: usize) {
    let window = (2 * radius + 1) as f32;
    let at = |i: isize| src[i.clamp(0, len as isize - 1) as usize];
    let mut sum: f32 = (-(radius as isize)..=radius as isize).map(at).sum();
    for (i, d) in dst.iter_mut().enumerate().take(len) {
        *d = sum / window;
        let i = i as isize;
        sum += at(i + radius as isize + 1) - at(i - radius as isize);
    }
}

/// Two passes of an 11×11 box blur over the RGB channels; alpha is kept.
/// Intermediate values stay in floating point and are rounded once at the end.
pub fn box_blur(image: &Image, exec: Exec) -> Image {
    let (w, h) = (image.width() as usize, image.height() as usize);
    let mut planes: Vec<Vec<f32>> = (0..3)
        .map(|c| image.pixels().chunks_exact(4).map(|p| p[c] as f32).collect())
        .collect();
    for plane in planes.iter_mut() {
        for _ in 0..BLUR_PASSES {
            // Horizontal: rows are contiguous.
            let src = plane.clone();
            exec.for_each_row_mut(plane, w, |y, row| {
                box_pass_1d(&src[y * w..(y + 1) * w], row, w, BLUR_RADIUS);
            });
            // Vertical: transpose, blur rows, transpose back.
            let mut t = vec![0f32; w * h];
            for y in 0..h {
                for x in 0..w {
                    t[x * h + y] = plane[y * w + x];
                }
            }
            let src = t.clone();
            exec.for_each_row_mut(&mut t, h, |x, col| {
                box_pass_1d(&src[x * h..(x + 1) * h], col, h, BLUR_RADIUS);
            });
            for y in 0..h {
                for x in 0..w {
                    plane[y * w + x] = t[x * h + y];
                }
            }
        }
    }
    let mut out = image.clone();
    for (i, px) in out.pixels_mut().chunks_exact_mut(4).enumerate() {
        for c in 0..3 {
            px[c] = planes[c][i].round().clamp(0.0, 255.0) as u8;
        }
    }
    out
}

/// Blurs everything outside the union of masks.
pub fn bg_blur(image: &Image, objs: &[ObjectRegion], exec: Exec) -> Result<Image, ImageOpError> {
    let keep = union_mask(image, objs)?;
    let blurred = box_blur(image, exec);
    let mut out = image.clone();
    let w = image.width();
    for y in 0..image.height() {
        for x in 0..w {
            if !keep.get(x, y) {
                out.put(x, y, blurred.get(x, y));
            }
        }
    }
    Ok(out)
}

/// Rectangle `[x0, x1) × [y0, y1)` (clipped to the image) of the label band
/// drawn for a box: above the box when it fits, otherwise inside its top edge.
pub fn label_band(b: &BBox, text: &str, width: u32, height: u32) -> (u32, u32, u32, u32) {
    let (bx0, by0, _, _) = b.pixel_span(width, height);
    let band_w = font::text_width(text) + 2 * LABEL_PAD;
    let y0 = if by0 >= LABEL_BAND_H { by0 - LABEL_BAND_H } else { by0 };
    (
        bx0,
        y0,
        (bx0 + band_w).min(width),
        (y0 + LABEL_BAND_H).min(height),
    )
}

fn fill_rect(img: &mut Image, (x0, y0, x1, y1): (u32, u32, u32, u32), color: Rgba) {
    for y in y0..y1 {
        for x in x0..x1 {
            img.put(x, y, color);
        }
    }
}

/// Draws a `stroke`-pixel outline just inside the box's pixel span.
pub fn stroke_box(img: &mut Image, b: &BBox, stroke: u32, color: Rgba) {
    let (x0, y0, x1, y1) = b.pixel_span(img.width(), img.height());
    for y in y0..y1 {
        for x in x0..x1 {
            if x < x0 + stroke || x + stroke >= x1 || y < y0 + stroke || y + stroke >= y1 {
                img.put(x, y, color);
            }
        }
    }
}

/// Outlines each region and writes its label next to it.
pub fn tag(image: &Image, objs: &[ObjectRegion]) -> Result<Image, ImageOpError> {
    let labels: Vec<&str> = objs
        .iter()
        .enumerate()
        .map(|(index, r)| r.label().ok_or(ImageOpError::UntaggedRegion { index }))
        .collect::<Result<_, _>>()?;
    let mut out = image.clone();
    let (w, h) = (image.width(), image.height());
    for (i, (r, text)) in objs.iter().zip(labels).enumerate() {
        let color = TAG_COLORS[i % TAG_COLORS.len()];
        stroke_box(&mut out, &r.bbox, STROKE, color);
        let band = label_band(&r.bbox, text, w, h);
        fill_rect(&mut out, band, color);
        font::draw_text(&mut out, (band.0 + LABEL_PAD) as i64, (band.1 + LABEL_PAD) as i64, text, LABEL_TEXT);
    }
    Ok(out)
}

/// Source-over compositing of one pixel.
#[inline]
pub fn blend_over(dst: Rgba, src: Rgba) -> Rgba {
    let a = src[3] as u32;
    if a == 255 {
        return src;
    }
    if a == 0 {
        return dst;
    }
    let inv = 255 - a;
    let mix = |s: u8, d: u8| ((s as u32 * a + d as u32 * inv + 127) / 255) as u8;
    let out_a = a + (dst[3] as u32 * inv + 127) / 255;
    [mix(src[0], dst[0]), mix(src[1], dst[1]), mix(src[2], dst[2]), out_a.min(255) as u8]
}

/// Scales the named glyph to each region's box and composites it on top.
pub fn emoji(image: &Image, objs: &[ObjectRegion], name: &str, table: &EmojiTable) -> Result<Image, ImageOpError> {
    let glyph = table.get(name).ok_or_else(|| ImageOpError::UnknownEmoji {
        name: name.to_string(),
        available: table.names(),
    })?;
    let mut out = image.clone();
    for r in objs {
        let (x0, y0, x1, y1) = r.bbox.pixel_span(image.width(), image.height());
        if x0 >= x1 || y0 >= y1 {
            continue;
        }
        let scaled = glyph.resize_nearest(x1 - x0, y1 - y0)?;
        for y in 0..scaled.height() {
            for x in 0..scaled.width() {
                let (px, py) = (x0 + x, y0 + y);
                out.put(px, py, blend_over(out.get(px, py), scaled.get(x, y)));
            }
        }
    }
    Ok(out)
}
