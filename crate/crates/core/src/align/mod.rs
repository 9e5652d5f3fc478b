//! Binding ToC headings to body blocks: exact anchors, fuzzy and
//! containment matches inside anchor windows, model-guided insertion for
//! the rest, then heading-tree assembly.

mod assemble;
mod cip;
mod stages;

pub use assemble::{assemble_tree, tbta};
pub use cip::{build_cip_prompt, parse_cip_response, stage3_cip, CIP_TEMPLATE, CIP_TEMPLATE_ID, SUMMARY_CHARS};
pub use stages::{anchor_windows, candidate_positions, stage1_exact, stage2_fuzzy, Candidate, HEADING_MAX_CHARS};

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::llm::ModelClient;
use crate::model::{BlockId, ContentBlock, HeadingTree};
use crate::toc::{TocEntry, TocTree};

pub const DEFAULT_FUZZY_THRESHOLD: f64 = 0.8;
/// Shortest normalized string accepted on the contained side of a containment match.
pub const MIN_CONTAINMENT_CHARS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MatchStage {
    Exact,
    Fuzzy,
    Containment,
    Inserted,
}

/// A ToC entry bound to the body block where its heading starts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnchorMatch {
    /// Index of the entry in the ToC.
    pub toc_index: usize,
    pub toc_entry: TocEntry,
    pub block_id: BlockId,
    /// Index of the block in global reading order.
    pub position: usize,
    pub stage: MatchStage,
    pub similarity: f64,
}

/// Blocks strictly between two consecutive anchors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnchorWindow {
    pub start_anchor: Option<AnchorMatch>,
    pub end_anchor: Option<AnchorMatch>,
    pub block_ids: Vec<BlockId>,
    /// Reading-order positions of `block_ids`.
    pub positions: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlignConfig {
    pub fuzzy_threshold: f64,
    pub min_containment: usize,
    /// Run the insertion stage; when off, leftover entries stay unresolved.
    pub cip: bool,
}

impl Default for AlignConfig {
    fn default() -> Self {
        AlignConfig {
            fuzzy_threshold: DEFAULT_FUZZY_THRESHOLD,
            min_containment: MIN_CONTAINMENT_CHARS,
            cip: true,
        }
    }
}

impl AlignConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.fuzzy_threshold > 0.0 && self.fuzzy_threshold <= 1.0) {
            return Err(Error::Config(format!(
                "fuzzy_threshold must be in (0, 1], got {}",
                self.fuzzy_threshold
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignOutcome {
    pub tree: HeadingTree,
    /// Sorted by reading-order position (equivalently, by ToC index).
    pub matches: Vec<AnchorMatch>,
    /// ToC indices no stage could place.
    pub unresolved: Vec<usize>,
    pub notes: Vec<String>,
}

impl AlignOutcome {
    pub fn count(&self, stage: MatchStage) -> usize {
        self.matches.iter().filter(|m| m.stage == stage).count()
    }
}

/// Checks that matches are ordered the same way in the ToC and the body.
pub fn check_monotone(matches: &[AnchorMatch]) -> Result<()> {
    for w in matches.windows(2) {
        if w[1].toc_index <= w[0].toc_index || w[1].position <= w[0].position {
            return Err(Error::Precondition(format!(
                "matches not monotone: entry {} at {} then entry {} at {}",
                w[0].toc_index, w[0].position, w[1].toc_index, w[1].position
            )));
        }
    }
    Ok(())
}

pub(crate) fn insert_sorted(matches: &mut Vec<AnchorMatch>, m: AnchorMatch) {
    let at = matches.partition_point(|x| x.toc_index < m.toc_index);
    matches.insert(at, m);
}

/// Runs all three stages over `ordered` (global reading order) and builds the tree.
pub fn align_document(
    toc: &TocTree,
    ordered: &[ContentBlock],
    client: &ModelClient,
    cfg: &AlignConfig,
) -> Result<AlignOutcome> {
    cfg.validate()?;
    let excluded: BTreeSet<u32> = toc.pages.iter().copied().collect();
    let candidates = candidate_positions(ordered, &excluded);
    let mut notes = Vec::new();

    let mut matches = stage1_exact(toc, ordered, &candidates);
    let fuzzy = stage2_fuzzy(toc, ordered, &candidates, &matches, cfg);
    for m in fuzzy {
        insert_sorted(&mut matches, m);
    }

    let mut unresolved: Vec<usize> = Vec::new();
    let pending: Vec<usize> = (0..toc.entries.len())
        .filter(|i| !matches.iter().any(|m| m.toc_index == *i))
        .collect();
    if cfg.cip {
        let (inserted, declined, cip_notes) = stage3_cip(toc, ordered, &excluded, &matches, &pending, client);
        for m in inserted {
            insert_sorted(&mut matches, m);
        }
        unresolved.extend(declined);
        notes.extend(cip_notes);
    } else {
        unresolved.extend(&pending);
    }
    for &i in &unresolved {
        notes.push(format!("ToC entry {i} {:?} unresolved", toc.entries[i].title));
    }
    check_monotone(&matches)?;

    let (tree, tree_notes) = assemble_tree(&matches, toc, &unresolved, ordered)?;
    notes.extend(tree_notes);
    Ok(AlignOutcome {
        tree,
        matches,
        unresolved,
        notes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{BlockType, BoundingBox};
    use crate::toc::TocSource;

    pub(crate) fn body(items: &[(&str, BlockType)]) -> Vec<ContentBlock> {
        items
            .iter()
            .enumerate()
            .map(|(k, &(text, t))| {
                let y = 0.05 + 0.8 * (k % 10) as f64 / 10.0;
                ContentBlock::new(
                    format!("b{k}"),
                    text,
                    BoundingBox::new(0.1, y, 0.9, y + 0.05).unwrap(),
                    t,
                    3 + (k / 10) as u32,
                )
            })
            .collect()
    }

    pub(crate) fn toc(items: &[(&str, u8)]) -> TocTree {
        TocTree::new(
            items
                .iter()
                .map(|&(t, l)| TocEntry {
                    title: t.into(),
                    level: l,
                    page_hint: None,
                    region_id: 0,
                    line_span: 1,
                })
                .collect(),
            TocSource::Rap,
            vec![],
        )
    }

    #[test]
    fn all_three_stages_offline() {
        use BlockType::*;
        let t = toc(&[("1 Environment", 1), ("1.1 Energy Use", 2), ("1.2 Water", 2), ("2 Social", 1)]);
        let b = body(&[
            ("Cover", Text),
            ("Environment", Title),
            ("We care.", Text),
            ("Energy use", Title),
            ("kWh went down.", Text),
            ("Rainfall is collected on site for reuse.", Text),
            ("Social Responsibility", Title),
            ("Staff.", Text),
        ]);
        let out = align_document(&t, &b, &ModelClient::offline(), &AlignConfig::default()).unwrap();
        let stages: Vec<(usize, MatchStage)> = out.matches.iter().map(|m| (m.position, m.stage)).collect();
        assert_eq!(
            stages,
            [
                (1, MatchStage::Exact),
                (3, MatchStage::Exact),
                (4, MatchStage::Inserted),
                (6, MatchStage::Containment)
            ]
        );
        assert!(out.unresolved.is_empty());
        assert_eq!(out.tree.block_count(), b.len());
    }

    #[test]
    fn cip_off_leaves_entries_unresolved() {
        use BlockType::*;
        let t = toc(&[("A section", 1), ("Missing one", 1)]);
        let b = body(&[("A section", Title), ("text", Text)]);
        let cfg = AlignConfig {
            cip: false,
            ..Default::default()
        };
        let out = align_document(&t, &b, &ModelClient::offline(), &cfg).unwrap();
        assert_eq!(out.unresolved, [1]);
        assert_eq!(out.tree.roots.len(), 2);
        assert!(out.tree.roots[1].blocks.is_empty());
    }

    #[test]
    fn non_monotone_rejected() {
        let e = TocEntry {
            title: "x".into(),
            level: 1,
            page_hint: None,
            region_id: 0,
            line_span: 1,
        };
        let m = |i, p| AnchorMatch {
            toc_index: i,
            toc_entry: e.clone(),
            block_id: BlockId::from("b"),
            position: p,
            stage: MatchStage::Exact,
            similarity: 1.0,
        };
        assert!(check_monotone(&[m(0, 5), m(1, 3)]).is_err());
        assert!(check_monotone(&[m(0, 3), m(1, 5)]).is_ok());
    }
}
