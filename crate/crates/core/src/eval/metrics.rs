//! Box matching and scoring.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::dataset::GoldObject;
use crate::image::{BBox, ObjectRegion};

pub const IOU_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetricError {
    #[error("cannot aggregate an empty set")]
    EmptySet,
    #[error("{preds} predictions for {gold} gold answers")]
    LengthMismatch { preds: usize, gold: usize },
}

/// Intersection over union; 0 when the union is empty.
pub fn iou(a: &BBox, b: &BBox) -> f64 {
    let inter = a.intersection(b);
    let union = a.area() + b.area() - inter;
    if union <= 0.0 {
        0.0
    } else {
        (inter / union).clamp(0.0, 1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchMode {
    /// Boxes only.
    Localization,
    /// Boxes and normalized tags.
    Tagging,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchedPair {
    pub pred: usize,
    pub gold: usize,
    pub iou: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchResult {
    pub pairs: Vec<MatchedPair>,
    pub precision: f64,
    pub recall: f64,
}

pub fn normalize_tag(s: &str) -> String {
    s.trim().to_lowercase()
}

/// Greedy one-to-one matching of predictions to gold objects by IoU,
/// highest first; ties keep the lower (pred, gold) indices first. In tagging
/// mode a matched pair only counts when the normalized tags agree, so
/// tagging matches are always a subset of localization matches.
pub fn match_tagging(preds: &[ObjectRegion], gold: &[GoldObject], threshold: f64, mode: MatchMode) -> MatchResult {
    let mut cands: Vec<MatchedPair> = Vec::new();
    for (pi, p) in preds.iter().enumerate() {
        for (gi, g) in gold.iter().enumerate() {
            let v = iou(&p.bbox, &g.bbox);
            if v >= threshold {
                cands.push(MatchedPair { pred: pi, gold: gi, iou: v });
            }
        }
    }
    cands.sort_by(|a, b| b.iou.total_cmp(&a.iou).then(a.pred.cmp(&b.pred)).then(a.gold.cmp(&b.gold)));
    let mut used_p = vec![false; preds.len()];
    let mut used_g = vec![false; gold.len()];
    let mut pairs = Vec::new();
    for c in cands {
        if !used_p[c.pred] && !used_g[c.gold] {
            used_p[c.pred] = true;
            used_g[c.gold] = true;
            pairs.push(c);
        }
    }
    if mode == MatchMode::Tagging {
        pairs.retain(|c| {
            preds[c.pred].label().is_some_and(|l| normalize_tag(l) == normalize_tag(&gold[c.gold].tag))
        });
    }
    let m = pairs.len() as f64;
    let precision = if preds.is_empty() {
        if gold.is_empty() { 1.0 } else { 0.0 }
    } else {
        m / preds.len() as f64
    };
    let recall = if gold.is_empty() { 1.0 } else { m / gold.len() as f64 };
    MatchResult { pairs, precision, recall }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct F1Summary {
    pub avg_precision: f64,
    pub avg_recall: f64,
    pub f1: f64,
}

/// Unweighted mean precision and recall, and their harmonic mean.
pub fn aggregate_f1(per_record: &[(f64, f64)]) -> Result<F1Summary, MetricError> {
    if per_record.is_empty() {
        return Err(MetricError::EmptySet);
    }
    let n = per_record.len() as f64;
    let p = per_record.iter().map(|r| r.0).sum::<f64>() / n;
    let r = per_record.iter().map(|r| r.1).sum::<f64>() / n;
    let f1 = if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) };
    Ok(F1Summary { avg_precision: p, avg_recall: r, f1 })
}

/// Fraction of exact matches after lowercasing and trimming; `None`
/// predictions (failed runs) count as wrong.
pub fn accuracy(preds: &[Option<String>], gold: &[String]) -> Result<f64, MetricError> {
    if preds.len() != gold.len() {
        return Err(MetricError::LengthMismatch { preds: preds.len(), gold: gold.len() });
    }
    if gold.is_empty() {
        return Err(MetricError::EmptySet);
    }
    let hits = preds
        .iter()
        .zip(gold)
        .filter(|(p, g)| p.as_deref().is_some_and(|p| normalize_tag(p) == normalize_tag(g)))
        .count();
    Ok(hits as f64 / gold.len() as f64)
}
