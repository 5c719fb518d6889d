//! Synthetic scenes of flat-colored shapes.
//!
//! A scene is JSON: either a bare list of shapes or an object with `width`,
//! `height`, optional `background` and `shapes`. Each shape has a `kind`
//! (`circle`, `square`, `rectangle`, `triangle`, `face`), a palette `color`
//! and a `box` `[x1, y1, x2, y2]`. A face is a skin-colored disc with a
//! centered badge square in its `color`.
//!
//! [`analyze`] recovers shapes from pixels alone, so it also works on crops
//! and edited images.

use serde::{Deserialize, Serialize};

use crate::image::{BBox, Image, Mask, Rgba};

pub const PALETTE: &[(&str, Rgba)] = &[
    ("red", [220, 40, 40, 255]),
    ("green", [40, 170, 70, 255]),
    ("blue", [40, 80, 220, 255]),
    ("yellow", [240, 210, 40, 255]),
    ("purple", [140, 60, 190, 255]),
    ("orange", [245, 140, 30, 255]),
    ("cyan", [40, 200, 210, 255]),
    ("pink", [240, 120, 180, 255]),
    ("brown", [130, 80, 40, 255]),
];
pub const SKIN: Rgba = [255, 205, 148, 255];
pub const WHITE: Rgba = [255, 255, 255, 255];
pub const BLACK: Rgba = [0, 0, 0, 255];
pub const DEFAULT_SIZE: (u32, u32) = (160, 120);

pub fn color_rgba(name: &str) -> Option<Rgba> {
    match name {
        "white" => Some(WHITE),
        "black" => Some(BLACK),
        "skin" => Some(SKIN),
        _ => PALETTE.iter().find(|(n, _)| *n == name).map(|(_, c)| *c),
    }
}

pub fn color_name(px: Rgba) -> Option<&'static str> {
    PALETTE.iter().find(|(_, c)| c[..3] == px[..3]).map(|(n, _)| *n)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShapeKind {
    Circle,
    Square,
    Rectangle,
    Triangle,
    Face,
}

impl ShapeKind {
    pub fn name(self) -> &'static str {
        match self {
            ShapeKind::Circle => "circle",
            ShapeKind::Square => "square",
            ShapeKind::Rectangle => "rectangle",
            ShapeKind::Triangle => "triangle",
            ShapeKind::Face => "face",
        }
    }

    pub fn from_word(w: &str) -> Option<ShapeKind> {
        Some(match w {
            "circle" | "circles" | "disc" | "discs" | "ball" | "balls" => ShapeKind::Circle,
            "square" | "squares" => ShapeKind::Square,
            "rectangle" | "rectangles" | "bar" | "bars" => ShapeKind::Rectangle,
            "triangle" | "triangles" => ShapeKind::Triangle,
            "face" | "faces" | "person" | "people" | "persons" => ShapeKind::Face,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Shape {
    pub kind: ShapeKind,
    pub color: String,
    #[serde(rename = "box")]
    pub bbox: BBox,
    /// Free-form annotation (e.g. the identity a face stands for). Not rendered.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    #[serde(default = "default_width")]
    pub width: u32,
    #[serde(default = "default_height")]
    pub height: u32,
    #[serde(default = "default_background")]
    pub background: String,
    pub shapes: Vec<Shape>,
}

fn default_width() -> u32 {
    DEFAULT_SIZE.0
}
fn default_height() -> u32 {
    DEFAULT_SIZE.1
}
fn default_background() -> String {
    "white".into()
}

#[derive(Deserialize)]
#[serde(untagged)]
enum SceneForm {
    Full(Scene),
    Shapes(Vec<Shape>),
}

impl Scene {
    pub fn from_json(s: &str) -> Result<Scene, serde_json::Error> {
        Ok(match serde_json::from_str::<SceneForm>(s)? {
            SceneForm::Full(sc) => sc,
            SceneForm::Shapes(shapes) => Scene {
                width: DEFAULT_SIZE.0,
                height: DEFAULT_SIZE.1,
                background: default_background(),
                shapes,
            },
        })
    }

    pub fn from_value(v: serde_json::Value) -> Result<Scene, serde_json::Error> {
        Scene::from_json(&v.to_string())
    }

    pub fn render(&self) -> Result<Image, String> {
        let bg = color_rgba(&self.background).ok_or_else(|| format!("unknown color {:?}", self.background))?;
        let mut img = Image::new(self.width, self.height, bg).map_err(|e| e.to_string())?;
        for s in &self.shapes {
            let color = color_rgba(&s.color).ok_or_else(|| format!("unknown color {:?}", s.color))?;
            let (x0, y0, x1, y1) = s.bbox.pixel_span(self.width, self.height);
            for y in y0..y1 {
                for x in x0..x1 {
                    if let Some(px) = shape_pixel(s.kind, &s.bbox, x, y, color) {
                        img.put(x, y, px);
                    }
                }
            }
        }
        Ok(img)
    }

    /// Pixel-edge box of each shape as rendered.
    pub fn boxes(&self) -> Vec<BBox> {
        self.shapes.iter().map(|s| s.bbox.clamp_to(self.width, self.height)).collect()
    }
}

fn shape_pixel(kind: ShapeKind, b: &BBox, x: u32, y: u32, color: Rgba) -> Option<Rgba> {
    let (px, py) = (x as f64 + 0.5, y as f64 + 0.5);
    let (cx, cy) = ((b.x1 + b.x2) / 2.0, (b.y1 + b.y2) / 2.0);
    let (rx, ry) = (b.width() / 2.0, b.height() / 2.0);
    let in_ellipse = || ((px - cx) / rx).powi(2) + ((py - cy) / ry).powi(2) <= 1.0;
    match kind {
        ShapeKind::Square | ShapeKind::Rectangle => Some(color),
        ShapeKind::Circle => in_ellipse().then_some(color),
        ShapeKind::Triangle => {
            // Apex at top-center, base along the bottom edge.
            let t = (py + 0.5 - b.y1) / b.height();
            let half = t * rx;
            ((px - cx).abs() <= half).then_some(color)
        }
        ShapeKind::Face => {
            if !in_ellipse() {
                return None;
            }
            let (bw, bh) = (b.width() / 6.0, b.height() / 6.0);
            if (px - cx).abs() <= bw && (py - cy).abs() <= bh {
                Some(color)
            } else {
                Some(SKIN)
            }
        }
    }
}

/// A shape recovered from pixels.
#[derive(Debug, Clone, PartialEq)]
pub struct Component {
    pub kind: Option<ShapeKind>,
    /// Palette color; for faces, the badge color (if found).
    pub color: Option<&'static str>,
    pub bbox: BBox,
    pub mask: Mask,
    pub pixels: usize,
}

impl Component {
    pub fn describe(&self) -> String {
        match (self.color, self.kind) {
            (Some(c), Some(k)) => format!("{c} {}", k.name()),
            (None, Some(k)) => k.name().to_string(),
            (Some(c), None) => c.to_string(),
            (None, None) => "object".to_string(),
        }
    }
}

const MIN_PIXELS: usize = 6;

fn classify_shape(pixels: usize, b: &BBox) -> Option<ShapeKind> {
    let fill = pixels as f64 / b.area();
    let (w, h) = (b.width(), b.height());
    if fill >= 0.9 {
        if (w - h).abs() <= (0.1 * w.max(h)).max(1.0) {
            Some(ShapeKind::Square)
        } else {
            Some(ShapeKind::Rectangle)
        }
    } else if fill >= 0.68 {
        Some(ShapeKind::Circle)
    } else if fill >= 0.3 {
        Some(ShapeKind::Triangle)
    } else {
        None
    }
}

/// Finds 4-connected single-color components of palette or skin pixels.
/// Badge squares inside a skin disc are folded into the face.
pub fn analyze(img: &Image) -> Vec<Component> {
    let (w, h) = (img.width(), img.height());
    let mut seen = vec![false; (w * h) as usize];
    let mut raw: Vec<(Rgba, BBox, Mask, usize)> = Vec::new();
    for sy in 0..h {
        for sx in 0..w {
            let idx = (sy * w + sx) as usize;
            if seen[idx] {
                continue;
            }
            let px = img.get(sx, sy);
            seen[idx] = true;
            if color_name(px).is_none() && px[..3] != SKIN[..3] {
                continue;
            }
            let mut mask = Mask::empty(w, h);
            let mut stack = vec![(sx, sy)];
            let (mut x0, mut y0, mut x1, mut y1) = (sx, sy, sx, sy);
            let mut count = 0;
            while let Some((x, y)) = stack.pop() {
                mask.set(x, y, true);
                count += 1;
                x0 = x0.min(x);
                y0 = y0.min(y);
                x1 = x1.max(x);
                y1 = y1.max(y);
                let mut visit = |nx: u32, ny: u32| {
                    let j = (ny * w + nx) as usize;
                    if !seen[j] && img.get(nx, ny)[..3] == px[..3] {
                        seen[j] = true;
                        stack.push((nx, ny));
                    }
                };
                if x > 0 {
                    visit(x - 1, y);
                }
                if x + 1 < w {
                    visit(x + 1, y);
                }
                if y > 0 {
                    visit(x, y - 1);
                }
                if y + 1 < h {
                    visit(x, y + 1);
                }
            }
            if count >= MIN_PIXELS {
                let b = BBox::new(x0 as f64, y0 as f64, (x1 + 1) as f64, (y1 + 1) as f64);
                raw.push((px, b, mask, count));
            }
        }
    }

    let inside = |inner: &BBox, outer: &BBox| {
        inner.x1 >= outer.x1 && inner.y1 >= outer.y1 && inner.x2 <= outer.x2 && inner.y2 <= outer.y2
    };
    let mut absorbed = vec![false; raw.len()];
    let mut out = Vec::new();
    for (i, (px, b, mask, count)) in raw.iter().enumerate() {
        if px[..3] != SKIN[..3] {
            continue;
        }
        let mut mask = mask.clone();
        let mut count = *count;
        let mut badge: Option<(usize, &'static str)> = None;
        for (j, (qx, qb, qm, qc)) in raw.iter().enumerate() {
            if i != j && qx[..3] != SKIN[..3] && inside(qb, b) && !absorbed[j] {
                absorbed[j] = true;
                mask.union_with(qm).expect("same-size masks");
                count += qc;
                if badge.is_none_or(|(n, _)| *qc > n) {
                    badge = Some((*qc, color_name(*qx).expect("palette pixel")));
                }
            }
        }
        out.push(Component { kind: Some(ShapeKind::Face), color: badge.map(|b| b.1), bbox: *b, mask, pixels: count });
    }
    for (i, (px, b, mask, count)) in raw.into_iter().enumerate() {
        if absorbed[i] || px[..3] == SKIN[..3] {
            continue;
        }
        out.push(Component { kind: classify_shape(count, &b), color: color_name(px), bbox: b, mask, pixels: count });
    }
    out.sort_by(|a, b| {
        (a.bbox.x1, a.bbox.y1)
            .partial_cmp(&(b.bbox.x1, b.bbox.y1))
            .expect("finite coordinates")
    });
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn shape(kind: ShapeKind, color: &str, b: [f64; 4]) -> Shape {
        Shape { kind, color: color.into(), bbox: b.into(), name: None }
    }

    #[test]
    fn scene_json_accepts_bare_lists() {
        let s = Scene::from_json(r#"[{"kind":"circle","color":"blue","box":[10,10,30,30]}]"#).unwrap();
        assert_eq!((s.width, s.height), DEFAULT_SIZE);
        assert_eq!(s.shapes[0].kind, ShapeKind::Circle);
    }

    #[test]
    fn analysis_recovers_rendered_shapes() {
        let scene = Scene {
            width: 160,
            height: 120,
            background: "white".into(),
            shapes: vec![
                shape(ShapeKind::Circle, "blue", [10.0, 10.0, 30.0, 30.0]),
                shape(ShapeKind::Square, "red", [50.0, 10.0, 70.0, 30.0]),
                shape(ShapeKind::Rectangle, "green", [90.0, 10.0, 140.0, 25.0]),
                shape(ShapeKind::Triangle, "yellow", [10.0, 60.0, 40.0, 90.0]),
                shape(ShapeKind::Face, "purple", [60.0, 60.0, 90.0, 90.0]),
            ],
        };
        let comps = analyze(&scene.render().unwrap());
        let found: Vec<(String, [f64; 4])> = comps.iter().map(|c| (c.describe(), c.bbox.into())).collect();
        assert_eq!(
            found,
            vec![
                ("blue circle".to_string(), [10.0, 10.0, 30.0, 30.0]),
                ("yellow triangle".to_string(), [10.0, 60.0, 40.0, 90.0]),
                ("red square".to_string(), [50.0, 10.0, 70.0, 30.0]),
                ("purple face".to_string(), [60.0, 60.0, 90.0, 90.0]),
                ("green rectangle".to_string(), [90.0, 10.0, 140.0, 25.0]),
            ]
        );
        let face = &comps[3];
        assert_eq!(face.mask.extent(), Some(face.bbox));
    }

    #[test]
    fn unknown_colors_are_rejected() {
        let s = Scene { width: 10, height: 10, background: "white".into(), shapes: vec![shape(ShapeKind::Square, "mauve", [0.0, 0.0, 5.0, 5.0])] };
        assert!(s.render().is_err());
    }
}
