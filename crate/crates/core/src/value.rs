//! Runtime values, program state and the canonical JSON encoding.

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{CodecError, StateError};
use crate::image::{BBox, Image, ImageId, Mask, ObjectRegion};

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Text(String),
    Number(f64),
    Boolean(bool),
    Image(Arc<Image>),
    Box(BBox),
    Mask(Arc<Mask>),
    ObjectList(Vec<ObjectRegion>),
    TextList(Vec<String>),
    Null,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValueKind {
    Text,
    Number,
    Boolean,
    Image,
    Box,
    Mask,
    ObjectList,
    TextList,
    Null,
}

impl fmt::Display for ValueKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ValueKind::Text => "text",
            ValueKind::Number => "number",
            ValueKind::Boolean => "boolean",
            ValueKind::Image => "image",
            ValueKind::Box => "box",
            ValueKind::Mask => "mask",
            ValueKind::ObjectList => "object_list",
            ValueKind::TextList => "text_list",
            ValueKind::Null => "null",
        };
        f.write_str(s)
    }
}

impl Value {
    pub fn kind(&self) -> ValueKind {
        match self {
            Value::Text(_) => ValueKind::Text,
            Value::Number(_) => ValueKind::Number,
            Value::Boolean(_) => ValueKind::Boolean,
            Value::Image(_) => ValueKind::Image,
            Value::Box(_) => ValueKind::Box,
            Value::Mask(_) => ValueKind::Mask,
            Value::ObjectList(_) => ValueKind::ObjectList,
            Value::TextList(_) => ValueKind::TextList,
            Value::Null => ValueKind::Null,
        }
    }

    pub fn image(img: Image) -> Value {
        Value::Image(Arc::new(img))
    }

    pub fn text(s: impl Into<String>) -> Value {
        Value::Text(s.into())
    }

    pub fn as_text(&self) -> Option<&str> {
        match self {
            Value::Text(s) => Some(s),
            _ => None,
        }
    }

    pub fn as_image(&self) -> Option<&Arc<Image>> {
        match self {
            Value::Image(i) => Some(i),
            _ => None,
        }
    }

    pub fn as_objects(&self) -> Option<&[ObjectRegion]> {
        match self {
            Value::ObjectList(o) => Some(o),
            _ => None,
        }
    }

    /// Short human-readable rendering used in answers and rationales.
    pub fn summary(&self) -> String {
        match self {
            Value::Text(s) => s.clone(),
            Value::Number(n) => format_number(*n),
            Value::Boolean(b) => if *b { "True" } else { "False" }.to_string(),
            Value::Image(i) => format!("<image {}x{}>", i.width(), i.height()),
            Value::Box(b) => format!(
                "[{}, {}, {}, {}]",
                format_number(b.x1),
                format_number(b.y1),
                format_number(b.x2),
                format_number(b.y2)
            ),
            Value::Mask(m) => format!("<mask {}x{}, {} px>", m.width(), m.height(), m.count()),
            Value::ObjectList(o) => format!("<{} object{}>", o.len(), if o.len() == 1 { "" } else { "s" }),
            Value::TextList(t) => format!("[{}]", t.join(", ")),
            Value::Null => "None".to_string(),
        }
    }
}

/// Canonical number rendering: integer-valued numbers have no decimal point.
pub fn format_number(n: f64) -> String {
    if n == 0.0 {
        "0".to_string()
    } else if n.is_nan() {
        "NaN".to_string()
    } else if n.is_infinite() {
        if n > 0.0 { "inf" } else { "-inf" }.to_string()
    } else {
        // `Display` for f64 is the shortest round-tripping form and omits ".0".
        format!("{n}")
    }
}

/// True for names matching `[A-Z][A-Z0-9_]*`.
pub fn is_identifier(name: &str) -> bool {
    let mut chars = name.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_uppercase())
        && chars.all(|c| c.is_ascii_uppercase() || c.is_ascii_digit() || c == '_')
}

/// Append-only variable bindings for one program execution.
#[derive(Debug, Clone, Default)]
pub struct ProgramState {
    order: Vec<String>,
    bindings: HashMap<String, Value>,
}

impl ProgramState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn bind(&mut self, name: &str, value: Value) -> Result<(), StateError> {
        if !is_identifier(name) {
            return Err(StateError::InvalidIdentifier(name.to_string()));
        }
        if self.bindings.contains_key(name) {
            return Err(StateError::DuplicateBinding(name.to_string()));
        }
        self.order.push(name.to_string());
        self.bindings.insert(name.to_string(), value);
        Ok(())
    }

    /// Case-sensitive lookup. `step` is recorded in the error for diagnostics.
    pub fn lookup(&self, name: &str, step: Option<usize>) -> Result<&Value, StateError> {
        self.bindings
            .get(name)
            .ok_or_else(|| StateError::UnboundVariable { name: name.to_string(), step })
    }

    pub fn contains(&self, name: &str) -> bool {
        self.bindings.contains_key(name)
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    /// Names in binding order.
    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.order.iter().map(String::as_str)
    }
}

/// Anything that can hand back image pixels by content id.
pub trait ImageSource {
    fn image(&self, id: &ImageId) -> Option<Arc<Image>>;
}

/// In-memory content-addressed image map.
#[derive(Debug, Clone, Default)]
pub struct ImageStore {
    images: HashMap<ImageId, Arc<Image>>,
}

impl ImageStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, img: Arc<Image>) -> ImageId {
        let id = img.id();
        self.images.entry(id.clone()).or_insert(img);
        id
    }

    pub fn get(&self, id: &ImageId) -> Option<&Arc<Image>> {
        self.images.get(id)
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&ImageId, &Arc<Image>)> {
        self.images.iter()
    }

    pub fn merge(&mut self, other: ImageStore) {
        for (id, img) in other.images {
            self.images.entry(id).or_insert(img);
        }
    }
}

impl ImageSource for ImageStore {
    fn image(&self, id: &ImageId) -> Option<Arc<Image>> {
        self.images.get(id).cloned()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum NumberRepr {
    Finite(f64),
    Special(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaskRepr {
    pub width: u32,
    pub height: u32,
    pub rle: Vec<u32>,
}

impl MaskRepr {
    pub fn encode(m: &Mask) -> Self {
        MaskRepr { width: m.width(), height: m.height(), rle: m.to_rle() }
    }

    pub fn decode(&self) -> Result<Mask, CodecError> {
        Ok(Mask::from_rle(self.width, self.height, &self.rle)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionRepr {
    #[serde(rename = "box")]
    pub bbox: BBox,
    #[serde(default)]
    pub mask: Option<MaskRepr>,
    pub score: f64,
    #[serde(default)]
    pub category: Option<String>,
    #[serde(default)]
    pub tag: Option<String>,
}

impl RegionRepr {
    pub fn encode(r: &ObjectRegion) -> Self {
        RegionRepr {
            bbox: r.bbox,
            mask: r.mask.as_ref().map(MaskRepr::encode),
            score: r.score,
            category: r.category.clone(),
            tag: r.tag.clone(),
        }
    }

    pub fn decode(&self) -> Result<ObjectRegion, CodecError> {
        Ok(ObjectRegion {
            bbox: self.bbox,
            mask: self.mask.as_ref().map(MaskRepr::decode).transpose()?,
            score: self.score,
            category: self.category.clone(),
            tag: self.tag.clone(),
        })
    }
}

/// Canonical JSON form of a [`Value`]. Images are carried by content id;
/// their pixels travel separately (see [`ImageStore`]).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ValueRepr {
    Text { value: String },
    Number { value: NumberRepr },
    Boolean { value: bool },
    Image { id: ImageId, width: u32, height: u32 },
    Box { value: BBox },
    Mask(MaskRepr),
    ObjectList { value: Vec<RegionRepr> },
    TextList { value: Vec<String> },
    Null,
}

impl ValueRepr {
    /// Encodes `v`, depositing any image pixels into `images`.
    pub fn encode(v: &Value, images: &mut ImageStore) -> ValueRepr {
        match v {
            Value::Text(s) => ValueRepr::Text { value: s.clone() },
            Value::Number(n) => ValueRepr::Number {
                value: if n.is_finite() {
                    NumberRepr::Finite(*n)
                } else {
                    NumberRepr::Special(format_number(*n))
                },
            },
            Value::Boolean(b) => ValueRepr::Boolean { value: *b },
            Value::Image(img) => ValueRepr::Image {
                id: images.insert(img.clone()),
                width: img.width(),
                height: img.height(),
            },
            Value::Box(b) => ValueRepr::Box { value: *b },
            Value::Mask(m) => ValueRepr::Mask(MaskRepr::encode(m)),
            Value::ObjectList(o) => ValueRepr::ObjectList { value: o.iter().map(RegionRepr::encode).collect() },
            Value::TextList(t) => ValueRepr::TextList { value: t.clone() },
            Value::Null => ValueRepr::Null,
        }
    }

    pub fn decode(&self, images: &dyn ImageSource) -> Result<Value, CodecError> {
        Ok(match self {
            ValueRepr::Text { value } => Value::Text(value.clone()),
            ValueRepr::Number { value } => Value::Number(match value {
                NumberRepr::Finite(n) => *n,
                NumberRepr::Special(s) => match s.as_str() {
                    "NaN" => f64::NAN,
                    "inf" => f64::INFINITY,
                    "-inf" => f64::NEG_INFINITY,
                    other => return Err(CodecError::Malformed(format!("number {other:?}"))),
                },
            }),
            ValueRepr::Boolean { value } => Value::Boolean(*value),
            ValueRepr::Image { id, .. } => Value::Image(
                images.image(id).ok_or_else(|| CodecError::MissingImage(id.to_string()))?,
            ),
            ValueRepr::Box { value } => Value::Box(*value),
            ValueRepr::Mask(m) => Value::Mask(Arc::new(m.decode()?)),
            ValueRepr::ObjectList { value } => {
                Value::ObjectList(value.iter().map(RegionRepr::decode).collect::<Result<_, _>>()?)
            }
            ValueRepr::TextList { value } => Value::TextList(value.clone()),
            ValueRepr::Null => Value::Null,
        })
    }
}
