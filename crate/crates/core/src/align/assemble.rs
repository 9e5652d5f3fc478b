use std::collections::HashMap;

use super::{check_monotone, AnchorMatch, MatchStage};
use crate::error::{Error, Result};
use crate::model::{BlockId, ContentBlock, HeadingNode, HeadingOrigin, HeadingTree};
use crate::text::normalize_title;
use crate::toc::TocTree;

struct ArenaNode {
    title: String,
    level: u8,
    origin: HeadingOrigin,
    blocks: Vec<BlockId>,
    children: Vec<usize>,
}

#[derive(Default)]
struct Arena {
    nodes: Vec<ArenaNode>,
    roots: Vec<usize>,
}

impl Arena {
    fn add(&mut self, parent: Option<usize>, title: String, level: u8, origin: HeadingOrigin) -> usize {
        let id = self.nodes.len();
        self.nodes.push(ArenaNode {
            title,
            level,
            origin,
            blocks: Vec::new(),
            children: Vec::new(),
        });
        match parent {
            Some(p) => self.nodes[p].children.push(id),
            None => self.roots.push(id),
        }
        id
    }

    fn build(&self, id: usize) -> HeadingNode {
        let n = &self.nodes[id];
        HeadingNode {
            title: n.title.clone(),
            level: n.level,
            children: n.children.iter().map(|&c| self.build(c)).collect(),
            blocks: n.blocks.clone(),
            origin: n.origin,
        }
    }

    fn into_tree(self) -> HeadingTree {
        HeadingTree {
            roots: self.roots.iter().map(|&r| self.build(r)).collect(),
        }
    }
}

fn origin_of(stage: MatchStage) -> HeadingOrigin {
    match stage {
        MatchStage::Exact => HeadingOrigin::MatchedExact,
        MatchStage::Fuzzy => HeadingOrigin::MatchedFuzzy,
        MatchStage::Containment => HeadingOrigin::MatchedContainment,
        MatchStage::Inserted => HeadingOrigin::Inserted,
    }
}

/// Parent for a heading of `level` under the open chain, and the level it
/// actually gets (at most one below the parent).
fn placement(arena: &Arena, stack: &[usize], level: u8) -> (Option<usize>, u8) {
    let parent = stack.iter().rev().copied().find(|&n| arena.nodes[n].level < level);
    let max = parent.map_or(1, |p| arena.nodes[p].level + 1);
    (parent, level.min(max))
}

/// Builds the heading tree from monotone `matches`.
///
/// A heading node opens at each anchor position and owns the blocks up to
/// the next anchor; blocks before the first anchor go to a front-matter
/// node. Levels come from the ToC, pulled up when they skip a level.
/// `unresolved` entries become empty nodes at their ToC position.
pub fn assemble_tree(
    matches: &[AnchorMatch],
    toc: &TocTree,
    unresolved: &[usize],
    ordered: &[ContentBlock],
) -> Result<(HeadingTree, Vec<String>)> {
    check_monotone(matches)?;
    for m in matches {
        if ordered.get(m.position).map(|b| &b.id) != Some(&m.block_id) {
            return Err(Error::Precondition(format!(
                "match for entry {} names block {} but position {} holds another",
                m.toc_index, m.block_id, m.position
            )));
        }
    }
    let mut notes = Vec::new();
    let mut arena = Arena::default();
    let mut stack: Vec<usize> = Vec::new();
    let mut current: Option<usize> = None;

    // unresolved entries are emitted just before the next resolved anchor in ToC order
    let mut parked: Vec<(usize, usize)> = unresolved
        .iter()
        .map(|&i| {
            let at = matches
                .iter()
                .find(|m| m.toc_index > i)
                .map_or(ordered.len(), |m| m.position);
            (at, i)
        })
        .collect();
    parked.sort_unstable();
    let mut parked = parked.into_iter().peekable();
    let mut anchors = matches.iter().peekable();

    for p in 0..=ordered.len() {
        while let Some(&(_, i)) = parked.peek().filter(|(at, _)| *at == p) {
            parked.next();
            let e = &toc.entries[i];
            let (parent, level) = placement(&arena, &stack, e.level);
            arena.add(parent, e.title.clone(), level, HeadingOrigin::Inserted);
        }
        if p == ordered.len() {
            break;
        }
        if let Some(m) = anchors.next_if(|m| m.position == p) {
            let wanted = m.toc_entry.level;
            let (parent, level) = placement(&arena, &stack, wanted);
            if level != wanted {
                let msg = format!("heading {:?}: level {wanted} clamped to {level}", m.toc_entry.title);
                log::warn!("{msg}");
                notes.push(msg);
            }
            let depth = parent.map_or(0, |pn| stack.iter().position(|&s| s == pn).unwrap() + 1);
            stack.truncate(depth);
            let id = arena.add(parent, m.toc_entry.title.clone(), level, origin_of(m.stage));
            stack.push(id);
            current = Some(id);
        }
        let owner = *current.get_or_insert_with(|| {
            arena.add(None, String::new(), 1, HeadingOrigin::BodyOnly)
        });
        arena.nodes[owner].blocks.push(ordered[p].id.clone());
    }
    Ok((arena.into_tree(), notes))
}

/// A CIP heading the model declined leaves an empty inserted node behind.
fn is_unresolved(n: &HeadingNode) -> bool {
    n.origin == HeadingOrigin::Inserted && n.blocks.is_empty() && n.children.is_empty()
}

fn title_keys(tree: &HeadingTree, skip_unresolved: bool) -> HashMap<(Vec<String>, String, u8), usize> {
    let mut out = HashMap::new();
    for (parents, node) in tree.titled_nodes() {
        if skip_unresolved && is_unresolved(node) {
            continue;
        }
        let key = (
            parents.iter().map(|t| normalize_title(t)).collect(),
            normalize_title(&node.title),
            node.level,
        );
        *out.entry(key).or_insert(0) += 1;
    }
    out
}

/// Share of gold titles found in `predicted` with the same normalized title,
/// level and ancestor titles. Extra predicted titles are not penalized;
/// unresolved inserted headings never count.
pub fn tbta(predicted: &HeadingTree, gold: &HeadingTree) -> Result<f64> {
    let gold_keys = title_keys(gold, false);
    let total: usize = gold_keys.values().sum();
    if total == 0 {
        return Err(Error::EmptyReference("gold tree has no titled headings"));
    }
    let pred_keys = title_keys(predicted, true);
    let correct: usize = gold_keys
        .iter()
        .map(|(k, &n)| n.min(pred_keys.get(k).copied().unwrap_or(0)))
        .sum();
    Ok(correct as f64 / total as f64)
}
