use serde::{Deserialize, Serialize};

use super::hierarchy::{LabelHierarchy, Level};
use super::loss::ProbabilityTable;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredLabel {
    pub label: String,
    pub probability: f64,
}

/// Decoded category -> GRI -> sentiment path for one block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelPath {
    pub category: Option<ScoredLabel>,
    pub gri: Option<ScoredLabel>,
    pub sentiment: Option<ScoredLabel>,
    pub consistent: bool,
}

impl LabelPath {
    pub fn selection(&self) -> LabelSelection {
        LabelSelection {
            category: self.category.as_ref().map(|l| l.label.clone()),
            gri: self.gri.as_ref().map(|l| l.label.clone()),
            sentiment: self.sentiment.as_ref().map(|l| l.label.clone()),
        }
    }
}

/// Raw per-level picks, without probabilities. `gri` holds the label id.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LabelSelection {
    pub category: Option<String>,
    pub gri: Option<String>,
    pub sentiment: Option<String>,
}

impl LabelSelection {
    pub fn new(category: Option<&str>, gri: Option<&str>, sentiment: Option<&str>) -> Self {
        LabelSelection {
            category: category.map(str::to_string),
            gri: gri.map(str::to_string),
            sentiment: sentiment.map(str::to_string),
        }
    }

    pub fn level(&self, level: Level) -> Option<&str> {
        match level {
            Level::Category => self.category.as_deref(),
            Level::Gri => self.gri.as_deref(),
            Level::Sentiment => self.sentiment.as_deref(),
        }
    }
}

/// Highest probability among `candidates` strictly above `theta`; ties go to
/// the lexicographically smaller label.
fn best_above(
    candidates: impl Iterator<Item = usize>,
    probs: &[f64],
    labels: &[&str],
    theta: f64,
) -> Option<usize> {
    candidates
        .filter(|&i| probs[i] > theta)
        .reduce(|best, i| match probs[i].total_cmp(&probs[best]) {
            std::cmp::Ordering::Greater => i,
            std::cmp::Ordering::Equal if labels[i] < labels[best] => i,
            _ => best,
        })
}

/// Constrained top-down decoding.
///
/// At each level only labels above `theta` whose parent was selected one
/// level up are eligible. The path stops at the first level with no eligible
/// label, and is then marked inconsistent.
pub fn predict_path(p: &ProbabilityTable, theta: f64, h: &LabelHierarchy) -> LabelPath {
    let cat_labels = h.labels(Level::Category);
    let gri_labels = h.labels(Level::Gri);
    let sent_labels = h.labels(Level::Sentiment);
    let scored = |labels: &[&str], probs: &[f64], i: usize| ScoredLabel {
        label: labels[i].to_string(),
        probability: probs[i],
    };

    let mut path = LabelPath {
        category: None,
        gri: None,
        sentiment: None,
        consistent: false,
    };
    let Some(c) = best_above(0..cat_labels.len(), &p.category, &cat_labels, theta) else {
        return path;
    };
    path.category = Some(scored(&cat_labels, &p.category, c));

    let children = (0..gri_labels.len()).filter(|&g| h.parent_index(g) == c);
    let Some(g) = best_above(children, &p.gri, &gri_labels, theta) else {
        return path;
    };
    path.gri = Some(scored(&gri_labels, &p.gri, g));

    let Some(s) = best_above(0..sent_labels.len(), &p.sentiment, &sent_labels, theta) else {
        return path;
    };
    path.sentiment = Some(scored(&sent_labels, &p.sentiment, s));
    path.consistent = true;
    path
}

/// Independent per-level argmax, ignoring both the hierarchy and the threshold.
/// Baseline for measuring how often unconstrained picks break parent links.
pub fn predict_unconstrained(p: &ProbabilityTable, h: &LabelHierarchy) -> LabelSelection {
    let pick = |level: Level| {
        let labels = h.labels(level);
        best_above(0..labels.len(), p.level(level), &labels, f64::NEG_INFINITY)
            .map(|i| labels[i].to_string())
    };
    LabelSelection {
        category: pick(Level::Category),
        gri: pick(Level::Gri),
        sentiment: pick(Level::Sentiment),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_hierarchy() -> LabelHierarchy {
        LabelHierarchy::new(
            &["E", "S", "G", "N"],
            &[("e-gri30", "E"), ("e-gri31", "E"), ("s-gri40", "S")],
            &["positive", "neutral", "negative"],
        )
        .unwrap()
    }

    #[test]
    fn environmental_negative_path() {
        let h = sample_hierarchy();
        let p = ProbabilityTable {
            category: vec![0.9, 0.2, 0.1, 0.1],
            gri: vec![0.8, 0.3, 0.1],
            sentiment: vec![0.1, 0.2, 0.7],
        };
        let path = predict_path(&p, 0.5, &h);
        assert!(path.consistent);
        assert_eq!(
            path.selection(),
            LabelSelection::new(Some("E"), Some("e-gri30"), Some("negative"))
        );
    }

    #[test]
    fn nothing_above_threshold() {
        let h = sample_hierarchy();
        let p = ProbabilityTable {
            category: vec![0.5, 0.2, 0.1, 0.1],
            gri: vec![0.5, 0.3, 0.1],
            sentiment: vec![0.1, 0.2, 0.5],
        };
        let path = predict_path(&p, 0.5, &h);
        assert!(!path.consistent);
        assert_eq!(path.selection(), LabelSelection::default());
    }

    #[test]
    fn cross_parent_gri_is_ineligible() {
        let h = sample_hierarchy();
        let p = ProbabilityTable {
            category: vec![0.9, 0.6, 0.1, 0.1],
            gri: vec![0.55, 0.7, 0.95],
            sentiment: vec![0.8, 0.2, 0.1],
        };
        let path = predict_path(&p, 0.5, &h);
        assert_eq!(path.gri.unwrap().label, "e-gri31");
        let free = predict_unconstrained(&p, &h);
        assert_eq!(free.gri.as_deref(), Some("s-gri40"));
    }

    #[test]
    fn truncation_marks_inconsistent() {
        let h = sample_hierarchy();
        let p = ProbabilityTable {
            category: vec![0.1, 0.1, 0.1, 0.9],
            gri: vec![0.9, 0.9, 0.9],
            sentiment: vec![0.9, 0.1, 0.1],
        };
        let path = predict_path(&p, 0.5, &h);
        assert_eq!(path.category.as_ref().unwrap().label, "N");
        assert!(path.gri.is_none() && path.sentiment.is_none());
        assert!(!path.consistent);
    }

    #[test]
    fn ties_prefer_smaller_label() {
        let h = sample_hierarchy();
        let p = ProbabilityTable {
            category: vec![0.8, 0.8, 0.1, 0.1],
            gri: vec![0.1, 0.1, 0.9],
            sentiment: vec![0.6, 0.6, 0.6],
        };
        let path = predict_path(&p, 0.5, &h);
        assert_eq!(path.category.unwrap().label, "E");
        assert!(path.gri.is_none());
    }
}
