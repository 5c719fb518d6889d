//! Raster types: RGBA images, boxes, binary masks and object regions.
//!
//! Origin is the top-left corner and y grows downward. Boxes use pixel-edge
//! coordinates, so the box `(0, 0, w, h)` covers a whole `w`×`h` image.

use std::fmt;
use std::io::Cursor;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::ImageError;

/// 8-bit RGBA raster stored row-major.
#[derive(Clone, PartialEq, Eq)]
pub struct Image {
    width: u32,
    height: u32,
    pixels: Vec<u8>,
}

impl fmt::Debug for Image {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Image({}x{}, {})", self.width, self.height, self.id())
    }
}

pub type Rgba = [u8; 4];

impl Image {
    pub fn new(width: u32, height: u32, fill: Rgba) -> Result<Self, ImageError> {
        if width == 0 || height == 0 {
            return Err(ImageError::ZeroSize { width, height });
        }
        let n = width as usize * height as usize;
        let mut pixels = Vec::with_capacity(n * 4);
        for _ in 0..n {
            pixels.extend_from_slice(&fill);
        }
        Ok(Self { width, height, pixels })
    }

    pub fn from_rgba(width: u32, height: u32, pixels: Vec<u8>) -> Result<Self, ImageError> {
        if width == 0 || height == 0 {
            return Err(ImageError::ZeroSize { width, height });
        }
        let expected = width as usize * height as usize * 4;
        if pixels.len() != expected {
            return Err(ImageError::BadLength { expected, actual: pixels.len() });
        }
        Ok(Self { width, height, pixels })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn pixels_mut(&mut self) -> &mut [u8] {
        &mut self.pixels
    }

    pub fn full_box(&self) -> BBox {
        BBox::new(0.0, 0.0, self.width as f64, self.height as f64)
    }

    #[inline]
    fn offset(&self, x: u32, y: u32) -> usize {
        (y as usize * self.width as usize + x as usize) * 4
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> Rgba {
        let o = self.offset(x, y);
        [self.pixels[o], self.pixels[o + 1], self.pixels[o + 2], self.pixels[o + 3]]
    }

    #[inline]
    pub fn put(&mut self, x: u32, y: u32, px: Rgba) {
        let o = self.offset(x, y);
        self.pixels[o..o + 4].copy_from_slice(&px);
    }

    /// Sets a pixel if it lies inside the raster.
    #[inline]
    pub fn put_clipped(&mut self, x: i64, y: i64, px: Rgba) {
        if x >= 0 && y >= 0 && (x as u64) < self.width as u64 && (y as u64) < self.height as u64 {
            self.put(x as u32, y as u32, px);
        }
    }

    /// Content hash over dimensions and samples. Two images with identical
    /// pixels share an id regardless of how they were encoded on disk.
    pub fn id(&self) -> ImageId {
        let mut h = Sha256::new();
        h.update(b"rgba8");
        h.update(self.width.to_be_bytes());
        h.update(self.height.to_be_bytes());
        h.update(&self.pixels);
        ImageId(hex::encode(h.finalize()))
    }

    /// Copies the pixel rectangle `[x0, x1) × [y0, y1)`.
    pub fn sub_image(&self, x0: u32, y0: u32, x1: u32, y1: u32) -> Result<Image, ImageError> {
        let x1 = x1.min(self.width);
        let y1 = y1.min(self.height);
        if x0 >= x1 || y0 >= y1 {
            return Err(ImageError::ZeroSize {
                width: x1.saturating_sub(x0),
                height: y1.saturating_sub(y0),
            });
        }
        let w = x1 - x0;
        let mut pixels = Vec::with_capacity(w as usize * (y1 - y0) as usize * 4);
        for y in y0..y1 {
            let a = self.offset(x0, y);
            pixels.extend_from_slice(&self.pixels[a..a + w as usize * 4]);
        }
        Image::from_rgba(w, y1 - y0, pixels)
    }

    /// Nearest-neighbour resize.
    pub fn resize_nearest(&self, width: u32, height: u32) -> Result<Image, ImageError> {
        let mut out = Image::new(width, height, [0, 0, 0, 0])?;
        for y in 0..height {
            let sy = ((y as u64 * self.height as u64) / height as u64) as u32;
            for x in 0..width {
                let sx = ((x as u64 * self.width as u64) / width as u64) as u32;
                out.put(x, y, self.get(sx, sy));
            }
        }
        Ok(out)
    }

    /// Shrinks so that neither side exceeds `max_side`; smaller images are returned as-is.
    pub fn thumbnail(&self, max_side: u32) -> Image {
        let longest = self.width.max(self.height);
        if longest <= max_side {
            return self.clone();
        }
        let scale = max_side as f64 / longest as f64;
        let w = ((self.width as f64 * scale).round() as u32).max(1);
        let h = ((self.height as f64 * scale).round() as u32).max(1);
        self.resize_nearest(w, h).expect("non-zero thumbnail size")
    }

    pub fn decode(bytes: &[u8]) -> Result<Image, ImageError> {
        let fmt = sniff_format(bytes).ok_or(ImageError::UnsupportedFormat)?;
        let img = image::load_from_memory_with_format(bytes, fmt)
            .map_err(|e| ImageError::Codec(e.to_string()))?
            .to_rgba8();
        let (w, h) = img.dimensions();
        Image::from_rgba(w, h, img.into_raw())
    }

    pub fn to_png(&self) -> Vec<u8> {
        let mut out = Vec::new();
        let buf = image::RgbaImage::from_raw(self.width, self.height, self.pixels.clone())
            .expect("dimensions checked at construction");
        buf.write_to(&mut Cursor::new(&mut out), image::ImageFormat::Png)
            .expect("png encoding into memory cannot fail");
        out
    }
}

/// Recognises PNG and JPEG by magic bytes.
pub fn sniff_format(bytes: &[u8]) -> Option<image::ImageFormat> {
    if bytes.starts_with(&[0x89, b'P', b'N', b'G', 0x0d, 0x0a, 0x1a, 0x0a]) {
        Some(image::ImageFormat::Png)
    } else if bytes.starts_with(&[0xff, 0xd8, 0xff]) {
        Some(image::ImageFormat::Jpeg)
    } else {
        None
    }
}

/// Hex SHA-256 content hash of an image.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ImageId(pub String);

impl fmt::Display for ImageId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl ImageId {
    pub fn as_str(&self) -> &str {
        &self.0
    }

    /// Accepts exactly 64 lowercase hex digits.
    pub fn parse(s: &str) -> Option<ImageId> {
        (s.len() == 64 && s.bytes().all(|b| b.is_ascii_digit() || (b'a'..=b'f').contains(&b)))
            .then(|| ImageId(s.to_string()))
    }
}

/// Axis-aligned box in pixel-edge coordinates. Serialized as `[x1, y1, x2, y2]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 4]", into = "[f64; 4]")]
pub struct BBox {
    pub x1: f64,
    pub y1: f64,
    pub x2: f64,
    pub y2: f64,
}

impl From<[f64; 4]> for BBox {
    fn from(a: [f64; 4]) -> Self {
        BBox { x1: a[0], y1: a[1], x2: a[2], y2: a[3] }
    }
}

impl From<BBox> for [f64; 4] {
    fn from(b: BBox) -> Self {
        [b.x1, b.y1, b.x2, b.y2]
    }
}

impl BBox {
    /// Builds a box, swapping corners if needed so that x1 ≤ x2 and y1 ≤ y2.
    pub fn new(x1: f64, y1: f64, x2: f64, y2: f64) -> Self {
        BBox { x1: x1.min(x2), y1: y1.min(y2), x2: x1.max(x2), y2: y1.max(y2) }
    }

    pub fn width(&self) -> f64 {
        (self.x2 - self.x1).max(0.0)
    }

    pub fn height(&self) -> f64 {
        (self.y2 - self.y1).max(0.0)
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn is_valid(&self) -> bool {
        [self.x1, self.y1, self.x2, self.y2].iter().all(|v| v.is_finite())
            && self.x1 <= self.x2
            && self.y1 <= self.y2
    }

    pub fn clamp_to(&self, width: u32, height: u32) -> BBox {
        let (w, h) = (width as f64, height as f64);
        BBox {
            x1: self.x1.clamp(0.0, w),
            y1: self.y1.clamp(0.0, h),
            x2: self.x2.clamp(0.0, w),
            y2: self.y2.clamp(0.0, h),
        }
    }

    /// Integer pixel span covered by the box after clamping: `[x0, x1) × [y0, y1)`.
    pub fn pixel_span(&self, width: u32, height: u32) -> (u32, u32, u32, u32) {
        let c = self.clamp_to(width, height);
        (
            c.x1.floor() as u32,
            c.y1.floor() as u32,
            c.x2.ceil() as u32,
            c.y2.ceil() as u32,
        )
    }

    pub fn intersection(&self, other: &BBox) -> f64 {
        let w = (self.x2.min(other.x2) - self.x1.max(other.x1)).max(0.0);
        let h = (self.y2.min(other.y2) - self.y1.max(other.y1)).max(0.0);
        w * h
    }
}

/// Binary mask aligned to an image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    width: u32,
    height: u32,
    bits: Vec<bool>,
}

impl Mask {
    pub fn empty(width: u32, height: u32) -> Self {
        Mask { width, height, bits: vec![false; width as usize * height as usize] }
    }

    pub fn full(width: u32, height: u32) -> Self {
        Mask { width, height, bits: vec![true; width as usize * height as usize] }
    }

    pub fn from_bits(width: u32, height: u32, bits: Vec<bool>) -> Result<Self, ImageError> {
        let expected = width as usize * height as usize;
        if bits.len() != expected {
            return Err(ImageError::BadLength { expected, actual: bits.len() });
        }
        Ok(Mask { width, height, bits })
    }

    /// Thresholds a soft mask at 0.5.
    pub fn from_soft(width: u32, height: u32, soft: &[f32]) -> Result<Self, ImageError> {
        Self::from_bits(width, height, soft.iter().map(|&v| v >= 0.5).collect())
    }

    /// Mask covering the pixel span of `b`.
    pub fn from_box(width: u32, height: u32, b: &BBox) -> Self {
        let mut m = Mask::empty(width, height);
        let (x0, y0, x1, y1) = b.pixel_span(width, height);
        for y in y0..y1 {
            for x in x0..x1 {
                m.set(x, y, true);
            }
        }
        m
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> bool {
        self.bits[y as usize * self.width as usize + x as usize]
    }

    #[inline]
    pub fn set(&mut self, x: u32, y: u32, on: bool) {
        let w = self.width as usize;
        self.bits[y as usize * w + x as usize] = on;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|b| **b).count()
    }

    pub fn union_with(&mut self, other: &Mask) -> Result<(), ImageError> {
        if other.width != self.width || other.height != self.height {
            return Err(ImageError::MaskSize {
                expected: (self.width, self.height),
                actual: (other.width, other.height),
            });
        }
        for (a, b) in self.bits.iter_mut().zip(&other.bits) {
            *a |= *b;
        }
        Ok(())
    }

    /// Tight pixel-edge bounding box of the set bits, if any.
    pub fn extent(&self) -> Option<BBox> {
        let (mut x0, mut y0, mut x1, mut y1) = (u32::MAX, u32::MAX, 0u32, 0u32);
        for y in 0..self.height {
            for x in 0..self.width {
                if self.get(x, y) {
                    x0 = x0.min(x);
                    y0 = y0.min(y);
                    x1 = x1.max(x + 1);
                    y1 = y1.max(y + 1);
                }
            }
        }
        (x0 != u32::MAX).then(|| BBox::new(x0 as f64, y0 as f64, x1 as f64, y1 as f64))
    }

    /// Run lengths of alternating values, starting with a run of `false`
    /// (which may be zero-length).
    pub fn to_rle(&self) -> Vec<u32> {
        let mut runs = Vec::new();
        let mut current = false;
        let mut n = 0u32;
        for &b in &self.bits {
            if b == current {
                n += 1;
            } else {
                runs.push(n);
                current = b;
                n = 1;
            }
        }
        runs.push(n);
        runs
    }

    pub fn from_rle(width: u32, height: u32, runs: &[u32]) -> Result<Self, ImageError> {
        let total = width as usize * height as usize;
        let mut bits = Vec::with_capacity(total);
        let mut value = false;
        for &r in runs {
            if bits.len() + r as usize > total {
                return Err(ImageError::BadLength { expected: total, actual: bits.len() + r as usize });
            }
            bits.extend(std::iter::repeat_n(value, r as usize));
            value = !value;
        }
        Mask::from_bits(width, height, bits)
    }
}

/// A detected or segmented object.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectRegion {
    pub bbox: BBox,
    pub mask: Option<Mask>,
    pub score: f64,
    pub category: Option<String>,
    pub tag: Option<String>,
}

impl ObjectRegion {
    pub fn new(bbox: BBox, score: f64) -> Self {
        ObjectRegion { bbox, mask: None, score: score.clamp(0.0, 1.0), category: None, tag: None }
    }

    pub fn with_mask(mut self, mask: Mask) -> Self {
        self.mask = Some(mask);
        self
    }

    pub fn with_category(mut self, category: impl Into<String>) -> Self {
        self.category = Some(category.into());
        self
    }

    pub fn with_tag(mut self, tag: impl Into<String>) -> Self {
        self.tag = Some(tag.into());
        self
    }

    /// Tag if assigned, otherwise the producer's category.
    pub fn label(&self) -> Option<&str> {
        self.tag.as_deref().or(self.category.as_deref())
    }

    /// Checks score range and that the mask extent sits inside the box (1 px slack).
    pub fn check(&self) -> Result<(), ImageError> {
        if !(0.0..=1.0).contains(&self.score) {
            return Err(ImageError::BadRegion(format!("score {} outside [0,1]", self.score)));
        }
        if !self.bbox.is_valid() {
            return Err(ImageError::BadRegion(format!("invalid box {:?}", self.bbox)));
        }
        if let Some(ext) = self.mask.as_ref().and_then(Mask::extent) {
            let b = &self.bbox;
            if ext.x1 < b.x1 - 1.0 || ext.y1 < b.y1 - 1.0 || ext.x2 > b.x2 + 1.0 || ext.y2 > b.y2 + 1.0 {
                return Err(ImageError::BadRegion(format!(
                    "mask extent {ext:?} outside box {b:?}"
                )));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rle_round_trips_and_starts_with_false_run() {
        let m = Mask::from_bits(3, 2, vec![true, true, false, false, true, true]).unwrap();
        assert_eq!(m.to_rle(), vec![0, 2, 2, 2]);
        assert_eq!(Mask::from_rle(3, 2, &m.to_rle()).unwrap(), m);
        assert!(Mask::from_rle(3, 2, &[7]).is_err());
    }

    #[test]
    fn soft_masks_threshold_at_half() {
        let m = Mask::from_soft(4, 1, &[0.1, 0.5, 0.49, 0.9]).unwrap();
        assert_eq!(m.bits(), &[false, true, false, true]);
    }

    #[test]
    fn png_round_trip_keeps_pixels_and_id() {
        let mut img = Image::new(5, 3, [10, 20, 30, 255]).unwrap();
        img.put(2, 1, [1, 2, 3, 4]);
        let back = Image::decode(&img.to_png()).unwrap();
        assert_eq!(back, img);
        assert_eq!(back.id(), img.id());
        assert!(ImageId::parse(img.id().as_str()).is_some());
    }

    #[test]
    fn decode_rejects_unknown_bytes() {
        assert!(matches!(Image::decode(b"hello"), Err(ImageError::UnsupportedFormat)));
    }

    #[test]
    fn zero_sized_images_are_rejected() {
        assert!(Image::new(0, 4, [0; 4]).is_err());
    }

    #[test]
    fn mask_extent_and_region_check() {
        let img_w = 20;
        let b = BBox::new(5.0, 5.0, 10.0, 10.0);
        let m = Mask::from_box(img_w, 20, &b);
        assert_eq!(m.extent(), Some(b));
        assert!(ObjectRegion::new(b, 0.5).with_mask(m.clone()).check().is_ok());
        let narrow = BBox::new(6.0, 6.0, 8.0, 8.0);
        assert!(ObjectRegion::new(narrow, 0.5).with_mask(m).check().is_err());
    }

    #[test]
    fn thumbnail_caps_longest_side() {
        let img = Image::new(600, 300, [0, 0, 0, 255]).unwrap();
        let t = img.thumbnail(256);
        assert_eq!((t.width(), t.height()), (256, 128));
    }
}
