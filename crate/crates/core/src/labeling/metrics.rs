use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::decode::LabelSelection;
use super::hierarchy::{LabelHierarchy, Level};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RelationCounts {
    pub valid: usize,
    pub total: usize,
}

/// Counts parent-child relations in selections.
///
/// A category->GRI relation exists when both levels are selected and is valid
/// when the GRI label's parent is the selected category. A GRI->sentiment
/// relation exists when both are selected and is valid when the
/// (category, GRI) scope it hangs under exists in the hierarchy.
pub fn count_relations(selections: &[LabelSelection], h: &LabelHierarchy) -> Result<RelationCounts> {
    let mut counts = RelationCounts { valid: 0, total: 0 };
    for sel in selections {
        let gri = match &sel.gri {
            Some(id) => Some(h.gri_by_id(id).ok_or_else(|| Error::UnknownLabel(id.clone()))?),
            None => None,
        };
        if let Some(c) = &sel.category {
            h.index_of(Level::Category, c)
                .ok_or_else(|| Error::UnknownLabel(c.clone()))?;
        }
        if let Some(s) = &sel.sentiment {
            h.index_of(Level::Sentiment, s)
                .ok_or_else(|| Error::UnknownLabel(s.clone()))?;
        }
        let scope_ok = match (&sel.category, gri) {
            (Some(c), Some(g)) => &g.parent == c,
            _ => false,
        };
        if sel.category.is_some() && gri.is_some() {
            counts.total += 1;
            counts.valid += scope_ok as usize;
        }
        if gri.is_some() && sel.sentiment.is_some() {
            counts.total += 1;
            counts.valid += scope_ok as usize;
        }
    }
    Ok(counts)
}

/// Hierarchy logic accuracy: valid parent-child relations over all relations.
pub fn hla(selections: &[LabelSelection], h: &LabelHierarchy) -> Result<f64> {
    let c = count_relations(selections, h)?;
    if c.total == 0 {
        return Err(Error::EmptyReference("no parent-child relations to score"));
    }
    Ok(c.valid as f64 / c.total as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MultiLevelF1 {
    pub category: f64,
    pub gri: f64,
    pub sentiment: f64,
    /// Mean of the three level scores.
    pub macro_f1: f64,
}

fn check_keys<K: Ord + std::fmt::Debug, V>(
    predicted: &BTreeMap<K, V>,
    gold: &BTreeMap<K, V>,
) -> Result<()> {
    if predicted.len() != gold.len() || predicted.keys().zip(gold.keys()).any(|(a, b)| a != b) {
        let p: BTreeSet<_> = predicted.keys().collect();
        let g: BTreeSet<_> = gold.keys().collect();
        return Err(Error::ElementMismatch(format!(
            "predicted-only {:?}, gold-only {:?}",
            p.difference(&g).collect::<Vec<_>>(),
            g.difference(&p).collect::<Vec<_>>()
        )));
    }
    Ok(())
}

/// Micro-F1 of single-label picks at one level. An empty pick is no prediction.
fn level_f1<'a>(pairs: impl Iterator<Item = (Option<&'a str>, Option<&'a str>)>) -> f64 {
    let (mut tp, mut fp, mut fneg) = (0usize, 0usize, 0usize);
    for (p, g) in pairs {
        match (p, g) {
            (Some(p), Some(g)) if p == g => tp += 1,
            (Some(_), Some(_)) => {
                fp += 1;
                fneg += 1;
            }
            (Some(_), None) => fp += 1,
            (None, Some(_)) => fneg += 1,
            (None, None) => {}
        }
    }
    f1_from_counts(tp, fp, fneg)
}

/// F1 from confusion counts; 1.0 when there is nothing to predict and nothing predicted.
pub fn f1_from_counts(tp: usize, fp: usize, fneg: usize) -> f64 {
    if tp + fp + fneg == 0 {
        return 1.0;
    }
    if tp == 0 {
        return 0.0;
    }
    let precision = tp as f64 / (tp + fp) as f64;
    let recall = tp as f64 / (tp + fneg) as f64;
    2.0 * precision * recall / (precision + recall)
}

pub fn multilevel_f1<K: Ord + std::fmt::Debug>(
    predicted: &BTreeMap<K, LabelSelection>,
    gold: &BTreeMap<K, LabelSelection>,
) -> Result<MultiLevelF1> {
    check_keys(predicted, gold)?;
    let per_level = |level: Level| {
        level_f1(
            predicted
                .values()
                .zip(gold.values())
                .map(|(p, g)| (p.level(level), g.level(level))),
        )
    };
    let category = per_level(Level::Category);
    let gri = per_level(Level::Gri);
    let sentiment = per_level(Level::Sentiment);
    Ok(MultiLevelF1 {
        category,
        gri,
        sentiment,
        macro_f1: (category + gri + sentiment) / 3.0,
    })
}

/// Per-label F1 averaged over the labels that occur in gold or predictions at `level`.
pub fn label_macro_f1<K: Ord + std::fmt::Debug>(
    predicted: &BTreeMap<K, LabelSelection>,
    gold: &BTreeMap<K, LabelSelection>,
    level: Level,
) -> Result<f64> {
    check_keys(predicted, gold)?;
    let mut labels = BTreeSet::new();
    for s in predicted.values().chain(gold.values()) {
        if let Some(l) = s.level(level) {
            labels.insert(l.to_string());
        }
    }
    if labels.is_empty() {
        return Ok(1.0);
    }
    let mut sum = 0.0;
    for label in &labels {
        let (mut tp, mut fp, mut fneg) = (0, 0, 0);
        for (p, g) in predicted.values().zip(gold.values()) {
            let pl = p.level(level) == Some(label.as_str());
            let gl = g.level(level) == Some(label.as_str());
            match (pl, gl) {
                (true, true) => tp += 1,
                (true, false) => fp += 1,
                (false, true) => fneg += 1,
                _ => {}
            }
        }
        sum += f1_from_counts(tp, fp, fneg);
    }
    Ok(sum / labels.len() as f64)
}
