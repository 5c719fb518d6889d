//! Backend that answers from pixels of synthetic shape scenes.
//!
//! Queries are read as a color word plus a shape word ("red square",
//! "blue circles", "face"). Words like "shape" or "object" match any shape.
//! Names can be mapped onto descriptors through [`ProceduralConfig::aliases`]
//! (e.g. `"Ruby" -> "red face"`), which is how tagging scenes give faces an
//! identity.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{Backend, BackendError, BackendRequest, BackendResponse, ImageCache};
use crate::image::{BBox, Image, ImageId, ObjectRegion};
use crate::scene::{self, Component, ShapeKind, PALETTE};
use crate::value::{MaskRepr, RegionRepr};

const INPAINT_FALLBACK: [u8; 4] = [128, 128, 128, 255];

const STOPWORDS: &[&str] = &[
    "a", "an", "the", "any", "some", "of", "in", "on", "at", "to", "is", "are", "there", "this", "that", "image",
    "picture", "photo", "colored", "coloured", "with", "and", "all",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProceduralConfig {
    /// Lowercased query → list answer.
    #[serde(default)]
    pub knowledge: BTreeMap<String, Vec<String>>,
    /// Lowercased name → descriptor understood by the scene matcher.
    #[serde(default)]
    pub aliases: BTreeMap<String, String>,
}

impl Default for ProceduralConfig {
    fn default() -> Self {
        let list = |items: &[&str]| items.iter().map(|s| s.to_string()).collect::<Vec<_>>();
        let mut knowledge = BTreeMap::new();
        knowledge.insert("primary colors".into(), list(&["red", "green", "blue"]));
        knowledge.insert("colors".into(), PALETTE.iter().map(|(n, _)| n.to_string()).collect());
        knowledge.insert("shapes".into(), list(&["circle", "square", "rectangle", "triangle", "face"]));
        knowledge.insert("members of the gem trio".into(), list(&["Ruby", "Jade", "Sapphire"]));
        knowledge.insert("members of the gem quartet".into(), list(&["Ruby", "Jade", "Sapphire", "Amber"]));
        knowledge.insert(
            "number words".into(),
            list(&[
                "one", "two", "three", "four", "five", "six", "seven", "eight", "nine", "ten", "eleven", "twelve",
                "thirteen", "fourteen", "fifteen", "sixteen", "seventeen", "eighteen", "nineteen", "twenty",
                "twenty-one", "twenty-two", "twenty-three", "twenty-four", "twenty-five",
            ]),
        );
        let mut aliases = BTreeMap::new();
        for (name, desc) in
            [("ruby", "red face"), ("jade", "green face"), ("sapphire", "blue face"), ("amber", "orange face"), ("amy", "purple face")]
        {
            aliases.insert(name.to_string(), desc.to_string());
        }
        ProceduralConfig { knowledge, aliases }
    }
}

/// A parsed shape query.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Descriptor {
    pub color: Option<&'static str>,
    pub kind: Option<ShapeKind>,
    /// Query names a generic object ("shape", "thing").
    pub any: bool,
    /// Query contains a content word the matcher does not know.
    pub unknown: bool,
}

impl Descriptor {
    fn is_blank(&self) -> bool {
        self.color.is_none() && self.kind.is_none() && !self.any
    }

    /// 1.0 for a full match, 0.5 when only one of color/kind matches, else 0.
    pub fn match_level(&self, c: &Component) -> f64 {
        if self.unknown || self.is_blank() {
            return 0.0;
        }
        let color_ok = self.color.map(|col| c.color == Some(col));
        let kind_ok = self.kind.map(|k| c.kind == Some(k));
        match (color_ok, kind_ok) {
            (None, None) => 1.0,
            (Some(a), None) | (None, Some(a)) => f64::from(u8::from(a)),
            (Some(a), Some(b)) => match (a, b) {
                (true, true) => 1.0,
                (false, false) => 0.0,
                _ => 0.5,
            },
        }
    }

    pub fn matches(&self, c: &Component) -> bool {
        self.match_level(c) == 1.0
    }
}

fn words(text: &str) -> Vec<String> {
    text.split(|ch: char| !(ch.is_alphanumeric() || ch == '-' || ch == '_'))
        .filter(|w| !w.is_empty())
        .map(|w| w.to_lowercase())
        .collect()
}

#[derive(Debug, Default)]
pub struct ProceduralBackend {
    config: ProceduralConfig,
    images: ImageCache,
}

impl ProceduralBackend {
    pub fn new(config: ProceduralConfig) -> Self {
        ProceduralBackend { config, images: ImageCache::default() }
    }

    pub fn config(&self) -> &ProceduralConfig {
        &self.config
    }

    /// Parses a query, resolving aliases first.
    pub fn describe(&self, query: &str) -> Descriptor {
        let norm = words(query).join(" ");
        if let Some(desc) = self.config.aliases.get(&norm) {
            return self.parse_words(&words(desc));
        }
        self.parse_words(&words(query))
    }

    fn parse_words(&self, ws: &[String]) -> Descriptor {
        let mut d = Descriptor::default();
        for w in ws {
            if STOPWORDS.contains(&w.as_str()) {
                continue;
            }
            if let Some((name, _)) = PALETTE.iter().find(|(n, _)| *n == w) {
                d.color.get_or_insert(name);
            } else if let Some(k) = ShapeKind::from_word(w) {
                d.kind.get_or_insert(k);
            } else if matches!(w.as_str(), "shape" | "shapes" | "object" | "objects" | "thing" | "things") {
                d.any = true;
            } else if let Some(desc) = self.config.aliases.get(w) {
                let inner = self.parse_words(&words(desc));
                d.color = d.color.or(inner.color);
                d.kind = d.kind.or(inner.kind);
            } else {
                d.unknown = true;
            }
        }
        d
    }

    fn image(&self, id: &ImageId) -> Result<Arc<Image>, BackendError> {
        self.images.get(id)
    }

    fn region(c: &Component, category: &str) -> RegionRepr {
        RegionRepr::encode(&ObjectRegion::new(c.bbox, 1.0).with_mask(c.mask.clone()).with_category(category))
    }

    fn locate(&self, img: &Image, query: &str) -> Vec<RegionRepr> {
        let d = self.describe(query);
        scene::analyze(img).iter().filter(|c| d.matches(c)).map(|c| Self::region(c, query.trim())).collect()
    }

    fn score(&self, comps: &[Component], b: &BBox, text: &str) -> f64 {
        let d = self.describe(text);
        let inside: Vec<&Component> = comps
            .iter()
            .filter(|c| {
                c.bbox.x1 >= b.x1 - 1.0 && c.bbox.y1 >= b.y1 - 1.0 && c.bbox.x2 <= b.x2 + 1.0 && c.bbox.y2 <= b.y2 + 1.0
            })
            .collect();
        let largest = inside.iter().map(|c| c.pixels).max().unwrap_or(0);
        inside
            .iter()
            .map(|c| d.match_level(c) * c.pixels as f64 / largest as f64)
            .fold(0.0, f64::max)
    }

    fn vqa(&self, img: &Image, question: &str) -> String {
        let ws = words(question);
        let comps = scene::analyze(img);
        let count = |rest: &[String]| {
            let d = self.parse_words(rest);
            comps.iter().filter(|c| d.matches(c)).count()
        };
        match ws.as_slice() {
            [how, many, rest @ ..] if how == "how" && many == "many" => count(rest).to_string(),
            [is, there, rest @ ..] if (is == "is" || is == "are") && there == "there" => {
                if count(rest) > 0 { "yes" } else { "no" }.to_string()
            }
            [what, color, is, rest @ ..] if what == "what" && (color == "color" || color == "colour") && is == "is" => {
                let d = self.parse_words(rest);
                comps
                    .iter()
                    .find(|c| d.matches(c))
                    .and_then(|c| c.color)
                    .unwrap_or("unknown")
                    .to_string()
            }
            _ => "unknown".to_string(),
        }
    }

    fn inpaint(&self, img: &Image, mask: &MaskRepr, prompt: &str) -> Result<Image, BackendError> {
        let mask = mask.decode().map_err(|e| BackendError::Protocol { message: e.to_string() })?;
        if (mask.width(), mask.height()) != (img.width(), img.height()) {
            return Err(BackendError::Protocol { message: "inpaint mask does not match image size".into() });
        }
        let fill = words(prompt)
            .iter()
            .find_map(|w| PALETTE.iter().find(|(n, _)| n == w).map(|(_, c)| *c))
            .unwrap_or(INPAINT_FALLBACK);
        let mut out = img.clone();
        for y in 0..img.height() {
            for x in 0..img.width() {
                if mask.get(x, y) {
                    out.put(x, y, fill);
                }
            }
        }
        Ok(out)
    }

    fn knowledge(&self, query: &str) -> Vec<String> {
        let key = query.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase();
        self.config.knowledge.get(&key).cloned().unwrap_or_default()
    }
}

impl Backend for ProceduralBackend {
    fn name(&self) -> String {
        "procedural".into()
    }

    fn upload(&self, image: &Arc<Image>) -> Result<ImageId, BackendError> {
        Ok(self.images.put(image))
    }

    fn fetch(&self, id: &ImageId) -> Result<Arc<Image>, BackendError> {
        self.images.get(id)
    }

    fn call(&self, req: &BackendRequest) -> Result<BackendResponse, BackendError> {
        Ok(match req {
            BackendRequest::Locate { image, query } => {
                BackendResponse::Regions { regions: self.locate(&*self.image(image)?, query) }
            }
            BackendRequest::DetectFaces { image } => {
                let regions = scene::analyze(&*self.image(image)?)
                    .iter()
                    .filter(|c| c.kind == Some(ShapeKind::Face))
                    .map(|c| Self::region(c, "face"))
                    .collect();
                BackendResponse::Regions { regions }
            }
            BackendRequest::Segment { image } => {
                let regions = scene::analyze(&*self.image(image)?)
                    .iter()
                    .map(|c| Self::region(c, c.kind.map_or("object", ShapeKind::name)))
                    .collect();
                BackendResponse::Regions { regions }
            }
            BackendRequest::Vqa { image, question } => {
                BackendResponse::Answer { text: self.vqa(&*self.image(image)?, question) }
            }
            BackendRequest::ScoreRegions { image, boxes, texts } => {
                let comps = scene::analyze(&*self.image(image)?);
                let matrix = boxes.iter().map(|b| texts.iter().map(|t| self.score(&comps, b, t)).collect()).collect();
                BackendResponse::Scores { matrix }
            }
            BackendRequest::Inpaint { image, mask, prompt } => {
                let out = Arc::new(self.inpaint(&*self.image(image)?, mask, prompt)?);
                BackendResponse::Image { image: self.images.put(&out) }
            }
            BackendRequest::KnowledgeList { query, .. } => BackendResponse::Texts { items: self.knowledge(query) },
        })
    }
}
