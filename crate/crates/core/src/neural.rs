//! Adapters from neural modules to backend requests.
//!
//! The selection rules used by SELECT and CLASSIFY are exposed as pure
//! functions over score matrices so they can be checked on their own.

use std::sync::Arc;

use thiserror::Error;

use crate::backend::{Backend, BackendError, BackendRequest, BackendResponse};
use crate::image::{BBox, Image, ObjectRegion};
use crate::imageops::{union_mask, ImageOpError};
use crate::value::{MaskRepr, Value};

pub const DEFAULT_LIST_MAX: u32 = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ListConfig {
    default_max: u32,
}

impl ListConfig {
    pub fn new(default_max: u32) -> Option<ListConfig> {
        (default_max >= 1).then_some(ListConfig { default_max })
    }

    pub fn default_max(&self) -> u32 {
        self.default_max
    }
}

impl Default for ListConfig {
    fn default() -> Self {
        ListConfig { default_max: DEFAULT_LIST_MAX }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NeuralError {
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error("no region has category {category:?}")]
    NoCandidates { category: String },
    #[error("query has no phrases")]
    EmptyQuery,
    #[error("no categories given")]
    NoCategories,
    #[error("knowledge query {query:?} produced no items")]
    EmptyList { query: String },
    #[error("list maximum must be a positive integer, got {0}")]
    BadMax(f64),
    #[error(transparent)]
    ImageOp(#[from] ImageOpError),
}

fn protocol(message: impl Into<String>) -> BackendError {
    BackendError::Protocol { message: message.into() }
}

fn regions_from(resp: BackendResponse, image: &Image) -> Result<Vec<ObjectRegion>, NeuralError> {
    let BackendResponse::Regions { regions } = resp else {
        return Err(protocol("expected regions").into());
    };
    regions
        .iter()
        .map(|r| {
            let mut region = r.decode().map_err(|e| protocol(e.to_string()))?;
            region.bbox = region.bbox.clamp_to(image.width(), image.height());
            if let Some(m) = &region.mask {
                if (m.width(), m.height()) != (image.width(), image.height()) {
                    return Err(protocol("region mask does not match image size").into());
                }
            }
            region.check().map_err(|e| protocol(e.to_string()))?;
            Ok(region)
        })
        .collect()
}

fn call(backend: &dyn Backend, req: BackendRequest) -> Result<BackendResponse, NeuralError> {
    Ok(backend.call(&req)?)
}

pub fn loc(backend: &dyn Backend, image: &Arc<Image>, query: &str) -> Result<Vec<ObjectRegion>, NeuralError> {
    let id = backend.upload(image)?;
    regions_from(call(backend, BackendRequest::Locate { image: id, query: query.to_string() })?, image)
}

pub fn face_det(backend: &dyn Backend, image: &Arc<Image>) -> Result<Vec<ObjectRegion>, NeuralError> {
    let id = backend.upload(image)?;
    regions_from(call(backend, BackendRequest::DetectFaces { image: id })?, image)
}

pub fn seg(backend: &dyn Backend, image: &Arc<Image>) -> Result<Vec<ObjectRegion>, NeuralError> {
    let id = backend.upload(image)?;
    regions_from(call(backend, BackendRequest::Segment { image: id })?, image)
}

/// Yes/no style answers become booleans; everything else stays text.
pub fn answer_value(text: &str) -> Value {
    match text.trim().to_ascii_lowercase().as_str() {
        "yes" | "true" => Value::Boolean(true),
        "no" | "false" => Value::Boolean(false),
        _ => Value::Text(text.trim().to_string()),
    }
}

pub fn vqa(backend: &dyn Backend, image: &Arc<Image>, question: &str) -> Result<Value, NeuralError> {
    let id = backend.upload(image)?;
    match call(backend, BackendRequest::Vqa { image: id, question: question.to_string() })? {
        BackendResponse::Answer { text } => Ok(answer_value(&text)),
        _ => Err(protocol("expected an answer").into()),
    }
}

fn score_matrix(
    backend: &dyn Backend,
    image: &Arc<Image>,
    boxes: Vec<BBox>,
    texts: &[String],
) -> Result<Vec<Vec<f64>>, NeuralError> {
    let id = backend.upload(image)?;
    match call(backend, BackendRequest::ScoreRegions { image: id, boxes, texts: texts.to_vec() })? {
        BackendResponse::Scores { matrix } => Ok(matrix),
        _ => Err(protocol("expected scores").into()),
    }
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax(values: impl IntoIterator<Item = f64>) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, v) in values.into_iter().enumerate() {
        if best.is_none_or(|(_, b)| v > b) {
            best = Some((i, v));
        }
    }
    best.map(|(i, _)| i)
}

/// For each phrase (column), the winning region (row).
pub fn select_winners(matrix: &[Vec<f64>], phrases: usize) -> Vec<usize> {
    (0..phrases)
        .map(|j| argmax(matrix.iter().map(|row| row[j])).expect("select needs at least one region"))
        .collect()
}

/// Category index assigned to each region (row), or `None` for untagged.
///
/// With one category only the best region gets it. With several, every
/// region first takes its best category; then each category is kept only by
/// the highest-scoring region that took it.
pub fn classify_assignment(matrix: &[Vec<f64>], categories: usize) -> Vec<Option<usize>> {
    let mut out = vec![None; matrix.len()];
    if matrix.is_empty() || categories == 0 {
        return out;
    }
    if categories == 1 {
        if let Some(i) = argmax(matrix.iter().map(|row| row[0])) {
            out[i] = Some(0);
        }
        return out;
    }
    let best: Vec<usize> = matrix.iter().map(|row| argmax(row.iter().copied()).expect("non-empty row")).collect();
    #[allow(clippy::needless_range_loop)]
    for c in 0..categories {
        let takers = best.iter().enumerate().filter(|(_, b)| **b == c).map(|(i, _)| i);
        let winner = takers.fold(None::<usize>, |acc, i| match acc {
            Some(a) if matrix[a][c] >= matrix[i][c] => Some(a),
            _ => Some(i),
        });
        if let Some(i) = winner {
            out[i] = Some(c);
        }
    }
    out
}

/// Splits a comma-separated phrase list, trimming and dropping empties.
pub fn split_phrases(query: &str) -> Vec<String> {
    query.split(',').map(str::trim).filter(|p| !p.is_empty()).map(str::to_string).collect()
}

pub fn select(
    backend: &dyn Backend,
    image: &Arc<Image>,
    objs: &[ObjectRegion],
    query: &str,
    category: Option<&str>,
) -> Result<Vec<ObjectRegion>, NeuralError> {
    let candidates: Vec<&ObjectRegion> = match category {
        Some(cat) => {
            let want = cat.trim().to_lowercase();
            objs.iter()
                .filter(|o| o.category.as_deref().is_some_and(|c| c.trim().to_lowercase() == want))
                .collect()
        }
        None => objs.iter().collect(),
    };
    if candidates.is_empty() {
        return Err(NeuralError::NoCandidates { category: category.unwrap_or("").to_string() });
    }
    let phrases = split_phrases(query);
    if phrases.is_empty() {
        return Err(NeuralError::EmptyQuery);
    }
    let matrix = score_matrix(backend, image, candidates.iter().map(|o| o.bbox).collect(), &phrases)?;
    Ok(select_winners(&matrix, phrases.len())
        .into_iter()
        .zip(&phrases)
        .map(|(i, p)| candidates[i].clone().with_tag(p.clone()))
        .collect())
}

pub fn classify(
    backend: &dyn Backend,
    image: &Arc<Image>,
    objs: &[ObjectRegion],
    categories: &[String],
) -> Result<Vec<ObjectRegion>, NeuralError> {
    if objs.is_empty() {
        return Ok(Vec::new());
    }
    let categories: Vec<String> =
        categories.iter().map(|c| c.trim().to_string()).filter(|c| !c.is_empty()).collect();
    if categories.is_empty() {
        return Err(NeuralError::NoCategories);
    }
    let matrix = score_matrix(backend, image, objs.iter().map(|o| o.bbox).collect(), &categories)?;
    Ok(classify_assignment(&matrix, categories.len())
        .into_iter()
        .zip(objs)
        .map(|(c, o)| {
            let mut o = o.clone();
            o.tag = c.map(|c| categories[c].clone());
            o
        })
        .collect())
}

/// Effective list length: explicit `max` or the configured default.
pub fn effective_max(max: Option<f64>, config: ListConfig) -> Result<usize, NeuralError> {
    match max {
        None => Ok(config.default_max() as usize),
        Some(m) if m.is_finite() && m >= 1.0 && m.fract() == 0.0 => Ok(m as usize),
        Some(m) => Err(NeuralError::BadMax(m)),
    }
}

/// Trims items, splits comma-joined items, drops empties and truncates.
pub fn clean_list(items: &[String], max: usize) -> Vec<String> {
    items.iter().flat_map(|i| split_phrases(i)).take(max).collect()
}

pub fn knowledge_list(
    backend: &dyn Backend,
    query: &str,
    max: Option<f64>,
    config: ListConfig,
) -> Result<Vec<String>, NeuralError> {
    let limit = effective_max(max, config)?;
    let req = BackendRequest::KnowledgeList { query: query.to_string(), max: max.map(|m| m as u32) };
    let BackendResponse::Texts { items } = call(backend, req)? else {
        return Err(protocol("expected texts").into());
    };
    let out = clean_list(&items, limit);
    if out.is_empty() {
        return Err(NeuralError::EmptyList { query: query.to_string() });
    }
    Ok(out)
}

pub fn replace(
    backend: &dyn Backend,
    image: &Arc<Image>,
    objs: &[ObjectRegion],
    prompt: &str,
) -> Result<Arc<Image>, NeuralError> {
    let mask = union_mask(image, objs)?;
    let id = backend.upload(image)?;
    let req = BackendRequest::Inpaint { image: id, mask: MaskRepr::encode(&mask), prompt: prompt.to_string() };
    let BackendResponse::Image { image: out } = call(backend, req)? else {
        return Err(protocol("expected an image").into());
    };
    let img = backend.fetch(&out)?;
    if (img.width(), img.height()) != (image.width(), image.height()) {
        return Err(protocol("inpainted image changed size").into());
    }
    Ok(img)
}
