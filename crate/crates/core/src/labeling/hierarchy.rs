use std::collections::{BTreeMap, HashSet};
use std::sync::OnceLock;

use serde::Deserialize;

use crate::error::{Error, Result};

pub const SENTIMENT_LABELS: [&str; 3] = ["Positive", "Neutral", "Negative"];

const BUILTIN_GRI: &str = include_str!("../../assets/labels/gri_labels.v1.json");

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
pub struct Category {
    pub code: String,
    pub name: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
pub struct GriLabel {
    pub id: String,
    pub name: String,
    /// Category code of the parent.
    pub parent: String,
}

/// Three-level label hierarchy: category -> GRI indicator -> sentiment.
///
/// Sentiment labels are scoped under every (category, GRI) pair, so each
/// sentiment's parent is the GRI label selected for the block.
#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
pub struct LabelHierarchy {
    pub version: String,
    pub categories: Vec<Category>,
    #[serde(rename = "labels")]
    pub gri: Vec<GriLabel>,
    pub sentiments: Vec<String>,
}

/// Index of a level in the hierarchy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Level {
    Category,
    Gri,
    Sentiment,
}

impl Level {
    pub const ALL: [Level; 3] = [Level::Category, Level::Gri, Level::Sentiment];
}

impl LabelHierarchy {
    /// The bundled 32-indicator vocabulary.
    pub fn builtin() -> &'static LabelHierarchy {
        static BUILTIN: OnceLock<LabelHierarchy> = OnceLock::new();
        BUILTIN.get_or_init(|| {
            LabelHierarchy::from_json(BUILTIN_GRI.as_bytes()).expect("bundled GRI asset is valid")
        })
    }

    pub fn from_json(raw: &[u8]) -> Result<Self> {
        let h: LabelHierarchy = serde_json::from_slice(raw)?;
        h.check()?;
        Ok(h)
    }

    /// Builds a hierarchy from plain lists (mostly for tests and small demos).
    pub fn new(categories: &[&str], gri: &[(&str, &str)], sentiments: &[&str]) -> Result<Self> {
        let h = LabelHierarchy {
            version: "custom".into(),
            categories: categories
                .iter()
                .map(|c| Category {
                    code: c.to_string(),
                    name: c.to_string(),
                })
                .collect(),
            gri: gri
                .iter()
                .map(|(id, parent)| GriLabel {
                    id: id.to_string(),
                    name: id.to_string(),
                    parent: parent.to_string(),
                })
                .collect(),
            sentiments: sentiments.iter().map(|s| s.to_string()).collect(),
        };
        h.check()?;
        Ok(h)
    }

    fn check(&self) -> Result<()> {
        let mut codes = HashSet::new();
        for c in &self.categories {
            if !codes.insert(c.code.as_str()) {
                return Err(Error::Config(format!("duplicate category `{}`", c.code)));
            }
        }
        let mut ids = HashSet::new();
        let mut names = HashSet::new();
        for g in &self.gri {
            if !ids.insert(g.id.as_str()) || !names.insert(g.name.as_str()) {
                return Err(Error::Config(format!("duplicate GRI label `{}`", g.id)));
            }
            if !codes.contains(g.parent.as_str()) {
                return Err(Error::Config(format!(
                    "GRI label `{}` has unknown parent `{}`",
                    g.id, g.parent
                )));
            }
        }
        if self.categories.is_empty() || self.gri.is_empty() || self.sentiments.is_empty() {
            return Err(Error::Config("every hierarchy level needs at least one label".into()));
        }
        Ok(())
    }

    pub fn level_size(&self, level: Level) -> usize {
        match level {
            Level::Category => self.categories.len(),
            Level::Gri => self.gri.len(),
            Level::Sentiment => self.sentiments.len(),
        }
    }

    /// Label keys of a level, in hierarchy order.
    pub fn labels(&self, level: Level) -> Vec<&str> {
        match level {
            Level::Category => self.categories.iter().map(|c| c.code.as_str()).collect(),
            Level::Gri => self.gri.iter().map(|g| g.id.as_str()).collect(),
            Level::Sentiment => self.sentiments.iter().map(String::as_str).collect(),
        }
    }

    pub fn index_of(&self, level: Level, key: &str) -> Option<usize> {
        match level {
            Level::Category => self.categories.iter().position(|c| c.code == key),
            Level::Gri => self.gri.iter().position(|g| g.id == key),
            Level::Sentiment => self.sentiments.iter().position(|s| s == key),
        }
    }

    /// Category index that parents GRI label `gri_idx`.
    pub fn parent_index(&self, gri_idx: usize) -> usize {
        let parent = &self.gri[gri_idx].parent;
        self.categories
            .iter()
            .position(|c| &c.code == parent)
            .expect("checked at construction")
    }

    pub fn gri_by_name(&self, name: &str) -> Option<&GriLabel> {
        self.gri.iter().find(|g| g.name == name)
    }

    pub fn gri_by_id(&self, id: &str) -> Option<&GriLabel> {
        self.gri.iter().find(|g| g.id == id)
    }

    /// Map of category code to its GRI children, for display and tests.
    pub fn children(&self) -> BTreeMap<&str, Vec<&str>> {
        let mut out: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
        for c in &self.categories {
            out.entry(c.code.as_str()).or_default();
        }
        for g in &self.gri {
            out.entry(g.parent.as_str()).or_default().push(g.id.as_str());
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_has_32_gri_labels_with_single_parents() {
        let h = LabelHierarchy::builtin();
        assert_eq!(h.gri.len(), 32);
        assert_eq!(h.labels(Level::Category), ["E", "S", "G", "N"]);
        assert_eq!(h.sentiments, SENTIMENT_LABELS);
        let energy = h.gri_by_name("Energy").unwrap();
        assert_eq!(energy.parent, "E");
        let total: usize = h.children().values().map(Vec::len).sum();
        assert_eq!(total, 32);
    }

    #[test]
    fn unknown_parent_rejected() {
        assert!(LabelHierarchy::new(&["E"], &[("x", "Q")], &["pos"]).is_err());
        assert!(LabelHierarchy::new(&["E"], &[("x", "E"), ("x", "E")], &["pos"]).is_err());
    }
}
