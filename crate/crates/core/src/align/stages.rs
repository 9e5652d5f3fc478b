use std::collections::BTreeSet;

use super::{AlignConfig, AnchorMatch, AnchorWindow, MatchStage};
use crate::model::{BlockType, ContentBlock};
use crate::text::{contains_either, levenshtein_similarity, normalize_title};
use crate::toc::TocTree;

/// Single-line text blocks up to this many normalized characters may be headings.
pub const HEADING_MAX_CHARS: usize = 60;

/// A block that may carry a heading.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub position: usize,
    pub normalized: String,
    pub is_title: bool,
}

/// Heading-like blocks in reading order: titles, and short single-line text
/// blocks. Blocks on `excluded_pages` (the ToC itself) never qualify.
pub fn candidate_positions(ordered: &[ContentBlock], excluded_pages: &BTreeSet<u32>) -> Vec<Candidate> {
    ordered
        .iter()
        .enumerate()
        .filter(|(_, b)| !excluded_pages.contains(&b.page_idx))
        .filter_map(|(position, b)| {
            let is_title = b.block_type == BlockType::Title;
            let short_text = b.block_type == BlockType::Text && !b.content.trim().contains('\n');
            if !is_title && !short_text {
                return None;
            }
            let normalized = normalize_title(&b.content);
            if normalized.is_empty() || (!is_title && normalized.chars().count() > HEADING_MAX_CHARS) {
                return None;
            }
            Some(Candidate {
                position,
                normalized,
                is_title,
            })
        })
        .collect()
}

fn anchor(toc: &TocTree, i: usize, ordered: &[ContentBlock], position: usize, stage: MatchStage, similarity: f64) -> AnchorMatch {
    AnchorMatch {
        toc_index: i,
        toc_entry: toc.entries[i].clone(),
        block_id: ordered[position].id.clone(),
        position,
        stage,
        similarity,
    }
}

/// Exact normalized-title matches. Entries are taken in ToC order; each
/// binds to the earliest equal candidate after the previous anchor, with
/// title blocks preferred over text blocks.
pub fn stage1_exact(toc: &TocTree, ordered: &[ContentBlock], candidates: &[Candidate]) -> Vec<AnchorMatch> {
    let mut out = Vec::new();
    let mut last: Option<usize> = None;
    for (i, e) in toc.entries.iter().enumerate() {
        let t = normalize_title(&e.title);
        if t.is_empty() {
            continue;
        }
        let mut equal = candidates
            .iter()
            .filter(|c| last.is_none_or(|l| c.position > l) && c.normalized == t);
        let Some(first) = equal.next() else { continue };
        let pick = if first.is_title {
            first
        } else {
            equal.find(|c| c.is_title).unwrap_or(first)
        };
        out.push(anchor(toc, i, ordered, pick.position, MatchStage::Exact, 1.0));
        last = Some(pick.position);
    }
    out
}

/// Open interval of positions available to entry `i` given the current anchors.
pub(crate) fn bounds(i: usize, matches: &[AnchorMatch]) -> (Option<usize>, Option<usize>) {
    let lo = matches.iter().filter(|m| m.toc_index < i).map(|m| m.position).max();
    let hi = matches.iter().filter(|m| m.toc_index > i).map(|m| m.position).min();
    (lo, hi)
}

fn inside(p: usize, (lo, hi): (Option<usize>, Option<usize>)) -> bool {
    lo.is_none_or(|l| p > l) && hi.is_none_or(|h| p < h)
}

/// Levenshtein and containment matches for entries stage 1 left open. Each
/// entry searches only between its neighbouring anchors; the best candidate
/// wins by similarity, then by earlier position. Returns the new matches only.
pub fn stage2_fuzzy(
    toc: &TocTree,
    ordered: &[ContentBlock],
    candidates: &[Candidate],
    exact: &[AnchorMatch],
    cfg: &AlignConfig,
) -> Vec<AnchorMatch> {
    let mut all = exact.to_vec();
    let mut out = Vec::new();
    for (i, e) in toc.entries.iter().enumerate() {
        if all.iter().any(|m| m.toc_index == i) {
            continue;
        }
        let t = normalize_title(&e.title);
        if t.is_empty() {
            continue;
        }
        let window = bounds(i, &all);
        let mut best: Option<(f64, usize, MatchStage)> = None;
        for c in candidates.iter().filter(|c| inside(c.position, window)) {
            let sim = levenshtein_similarity(&t, &c.normalized);
            let stage = if sim >= cfg.fuzzy_threshold {
                MatchStage::Fuzzy
            } else if contains_either(&t, &c.normalized, cfg.min_containment) {
                MatchStage::Containment
            } else {
                continue;
            };
            // candidates are in position order, so strict > keeps the earlier one on ties
            if best.is_none_or(|(s, _, _)| sim > s) {
                best = Some((sim, c.position, stage));
            }
        }
        if let Some((sim, position, stage)) = best {
            let m = anchor(toc, i, ordered, position, stage, sim);
            super::insert_sorted(&mut all, m.clone());
            out.push(m);
        }
    }
    out
}

/// Window available to entry `i`: blocks strictly between its neighbouring
/// anchors, skipping blocks on `excluded_pages`.
pub(crate) fn window_for(
    i: usize,
    matches: &[AnchorMatch],
    ordered: &[ContentBlock],
    excluded_pages: &BTreeSet<u32>,
) -> AnchorWindow {
    let b = bounds(i, matches);
    let start_anchor = matches.iter().rfind(|m| m.toc_index < i).cloned();
    let end_anchor = matches.iter().find(|m| m.toc_index > i).cloned();
    let positions: Vec<usize> = (0..ordered.len())
        .filter(|&p| inside(p, b) && !excluded_pages.contains(&ordered[p].page_idx))
        .collect();
    AnchorWindow {
        start_anchor,
        end_anchor,
        block_ids: positions.iter().map(|&p| ordered[p].id.clone()).collect(),
        positions,
    }
}

/// The windows between consecutive anchors (plus before the first and
/// after the last), in reading order. Empty windows are kept.
pub fn anchor_windows(
    matches: &[AnchorMatch],
    ordered: &[ContentBlock],
    excluded_pages: &BTreeSet<u32>,
) -> Vec<AnchorWindow> {
    let mut out = Vec::with_capacity(matches.len() + 1);
    for k in 0..=matches.len() {
        let start_anchor = k.checked_sub(1).map(|j| matches[j].clone());
        let end_anchor = matches.get(k).cloned();
        let lo = start_anchor.as_ref().map(|m| m.position);
        let hi = end_anchor.as_ref().map(|m| m.position);
        let positions: Vec<usize> = (0..ordered.len())
            .filter(|&p| inside(p, (lo, hi)) && !excluded_pages.contains(&ordered[p].page_idx))
            .collect();
        out.push(AnchorWindow {
            start_anchor,
            end_anchor,
            block_ids: positions.iter().map(|&p| ordered[p].id.clone()).collect(),
            positions,
        });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::align::tests::{body, toc};
    use BlockType::*;

    fn run(t: &TocTree, b: &[ContentBlock]) -> (Vec<AnchorMatch>, Vec<AnchorMatch>) {
        let c = candidate_positions(b, &BTreeSet::new());
        let s1 = stage1_exact(t, b, &c);
        let s2 = stage2_fuzzy(t, b, &c, &s1, &AlignConfig::default());
        (s1, s2)
    }

    #[test]
    fn numbering_is_ignored_for_exact() {
        let (s1, _) = run(&toc(&[("1.2 Energy Use", 1)]), &body(&[("Energy Use", Title)]));
        assert_eq!(s1.len(), 1);
        assert_eq!((s1[0].stage, s1[0].similarity), (MatchStage::Exact, 1.0));
    }

    #[test]
    fn duplicate_heading_takes_first_after_previous_anchor() {
        let b = body(&[
            ("Energy", Title),
            ("Overview", Title),
            ("x", Text),
            ("Energy", Title),
            ("Energy", Title),
        ]);
        let (s1, _) = run(&toc(&[("Overview", 1), ("Energy", 1)]), &b);
        let pos: Vec<usize> = s1.iter().map(|m| m.position).collect();
        assert_eq!(pos, [1, 3]);
    }

    #[test]
    fn title_blocks_preferred() {
        let b = body(&[("Energy", Text), ("Energy", Title)]);
        let (s1, _) = run(&toc(&[("Energy", 1)]), &b);
        assert_eq!(s1[0].position, 1);
    }

    #[test]
    fn containment_match() {
        let b = body(&[("Climate Governance Framework", Title)]);
        let (s1, s2) = run(&toc(&[("Climate Governance", 1)]), &b);
        assert!(s1.is_empty());
        assert_eq!(s2[0].stage, MatchStage::Containment);
    }

    #[test]
    fn threshold_boundary() {
        // "abcdefghij" vs "abcdefgxyz": 3 edits of 10 -> 0.7
        let b = body(&[("abcdefgxyz", Title)]);
        let (_, s2) = run(&toc(&[("abcdefghij", 1)]), &b);
        assert!(s2.is_empty());
        // 2 of 10 -> 0.8, accepted
        let b = body(&[("abcdefghyz", Title)]);
        let (_, s2) = run(&toc(&[("abcdefghij", 1)]), &b);
        assert_eq!(s2.len(), 1);
        assert_eq!(s2[0].stage, MatchStage::Fuzzy);
    }

    #[test]
    fn best_similarity_wins() {
        // 18 chars: one edit -> 0.944, two edits -> 0.889; both over the threshold
        let b = body(&[("sustainable fundxx", Title), ("sustainable fundsx", Title)]);
        let (_, s2) = run(&toc(&[("sustainable funds", 1)]), &b);
        assert_eq!(s2[0].position, 1);
    }

    #[test]
    fn fuzzy_respects_window() {
        let b = body(&[("Energy Usage", Title), ("Water", Title), ("x", Text)]);
        let (s1, s2) = run(&toc(&[("Water", 1), ("Energy Use", 1)]), &b);
        assert_eq!(s1.len(), 1);
        assert!(s2.is_empty(), "candidate before the previous anchor must not match");
    }

    #[test]
    fn windows_partition_the_body() {
        let b = body(&[("a", Text), ("A", Title), ("b", Text), ("c", Text), ("B", Title), ("d", Text)]);
        let (s1, _) = run(&toc(&[("A", 1), ("B", 1)]), &b);
        let w = anchor_windows(&s1, &b, &BTreeSet::new());
        let pos: Vec<Vec<usize>> = w.iter().map(|w| w.positions.clone()).collect();
        assert_eq!(pos, [vec![0], vec![2, 3], vec![5]]);
    }
}
