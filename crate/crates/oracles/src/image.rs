//! Direct-sum image filters over plain RGBA buffers.

/// Rec. 601 luma, rounded half away from zero.
pub fn luma(r: u8, g: u8, b: u8) -> u8 {
    let y = (299 * r as u32 + 587 * g as u32 + 114 * b as u32) as f64 / 1000.0;
    y.round() as u8
}

/// `passes` rounds of a (2r+1)-wide box average, horizontal then vertical,
/// edges clamped, computed per output pixel by summing its window. Returns
/// unrounded RGB planes.
pub fn box_blur(w: usize, h: usize, rgba: &[u8], radius: usize, passes: usize) -> [Vec<f64>; 3] {
    let mut planes: [Vec<f64>; 3] = std::array::from_fn(|c| (0..w * h).map(|i| rgba[i * 4 + c] as f64).collect());
    let r = radius as isize;
    let n = (2 * radius + 1) as f64;
    for p in planes.iter_mut() {
        for _ in 0..passes {
            let src = p.clone();
            for y in 0..h {
                for x in 0..w {
                    let s: f64 = (-r..=r).map(|d| src[y * w + (x as isize + d).clamp(0, w as isize - 1) as usize]).sum();
                    p[y * w + x] = s / n;
                }
            }
            let src = p.clone();
            for y in 0..h {
                for x in 0..w {
                    let s: f64 = (-r..=r).map(|d| src[(y as isize + d).clamp(0, h as isize - 1) as usize * w + x]).sum();
                    p[y * w + x] = s / n;
                }
            }
        }
    }
    planes
}
