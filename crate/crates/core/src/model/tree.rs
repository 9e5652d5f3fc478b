use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::BlockId;

/// The output schema has four heading columns.
pub const MAX_HEADING_DEPTH: u8 = 4;

/// Which alignment stage produced a heading node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HeadingOrigin {
    MatchedExact,
    MatchedFuzzy,
    MatchedContainment,
    Inserted,
    /// Not tied to a ToC entry: front matter, or trees rebuilt from h-columns.
    BodyOnly,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeadingNode {
    pub title: String,
    pub level: u8,
    pub children: Vec<HeadingNode>,
    pub blocks: Vec<BlockId>,
    pub origin: HeadingOrigin,
}

impl HeadingNode {
    pub fn new(title: impl Into<String>, level: u8, origin: HeadingOrigin) -> Self {
        HeadingNode {
            title: title.into(),
            level,
            children: Vec::new(),
            blocks: Vec::new(),
            origin,
        }
    }

    /// The implicit level-1 node that owns blocks preceding the first heading.
    pub fn front_matter() -> Self {
        HeadingNode::new("", 1, HeadingOrigin::BodyOnly)
    }

    pub fn is_front_matter(&self) -> bool {
        self.title.is_empty() && self.level == 1
    }

    fn visit<'a>(&'a self, path: &mut Vec<&'a HeadingNode>, f: &mut impl FnMut(&[&'a HeadingNode])) {
        path.push(self);
        f(path);
        for c in &self.children {
            c.visit(path, f);
        }
        path.pop();
    }
}

/// Forest of level-1 heading nodes in document order.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct HeadingTree {
    pub roots: Vec<HeadingNode>,
}

impl HeadingTree {
    /// Pre-order walk; the callback receives the ancestor chain ending in the visited node.
    pub fn walk<'a>(&'a self, mut f: impl FnMut(&[&'a HeadingNode])) {
        let mut path = Vec::new();
        for r in &self.roots {
            r.visit(&mut path, &mut f);
        }
    }

    /// Title path (level 1 first) of the node owning each block.
    pub fn owner_paths(&self) -> HashMap<BlockId, Vec<String>> {
        let mut out = HashMap::new();
        self.walk(|path| {
            let node = path[path.len() - 1];
            let titles: Vec<String> = path.iter().map(|n| n.title.clone()).collect();
            for b in &node.blocks {
                out.insert(b.clone(), titles.clone());
            }
        });
        out
    }

    pub fn block_count(&self) -> usize {
        let mut n = 0;
        self.walk(|path| n += path[path.len() - 1].blocks.len());
        n
    }

    /// Every node with a non-empty title as `(ancestor titles, node)`.
    pub fn titled_nodes(&self) -> Vec<(Vec<String>, &HeadingNode)> {
        let mut out = Vec::new();
        self.walk(|path| {
            let node = path[path.len() - 1];
            if !node.title.is_empty() {
                let parents = path[..path.len() - 1].iter().map(|n| n.title.clone()).collect();
                out.push((parents, node));
            }
        });
        out
    }

    /// Rebuilds a tree from per-block heading columns given in document order.
    ///
    /// Consecutive blocks sharing a path prefix share the corresponding nodes;
    /// an all-empty path goes to a front-matter node. Paths must not contain an
    /// empty title followed by a non-empty one.
    pub fn from_paths<I>(rows: I) -> Result<HeadingTree, String>
    where
        I: IntoIterator<Item = (BlockId, [String; 4])>,
    {
        let mut tree = HeadingTree::default();
        // indices into children vectors from the roots down to the open node
        let mut open: Vec<usize> = Vec::new();

        for (id, cols) in rows {
            let depth = cols.iter().rposition(|c| !c.is_empty()).map_or(0, |p| p + 1);
            if cols[..depth].iter().any(|c| c.is_empty()) {
                return Err(format!("block {id}: heading columns skip a level"));
            }
            let path: Vec<&str> = if depth == 0 {
                vec![""]
            } else {
                cols[..depth].iter().map(String::as_str).collect()
            };

            let mut common = 0;
            {
                let mut siblings = &tree.roots;
                for (lvl, &child) in open.iter().enumerate() {
                    let node = &siblings[child];
                    if lvl < path.len() && node.title == path[lvl] {
                        common += 1;
                        siblings = &node.children;
                    } else {
                        break;
                    }
                }
            }
            open.truncate(common);

            let mut siblings = &mut tree.roots;
            for &child in &open {
                siblings = &mut siblings[child].children;
            }
            for (lvl, title) in path.iter().enumerate().skip(common) {
                siblings.push(HeadingNode::new(*title, (lvl + 1) as u8, HeadingOrigin::BodyOnly));
                let idx = siblings.len() - 1;
                open.push(idx);
                siblings = &mut siblings[idx].children;
            }

            node_at_mut(&mut tree.roots, &open).blocks.push(id);
        }
        Ok(tree)
    }
}

fn node_at_mut<'a>(roots: &'a mut [HeadingNode], path: &[usize]) -> &'a mut HeadingNode {
    let (first, rest) = path.split_first().expect("non-empty node path");
    let mut node = &mut roots[*first];
    for &i in rest {
        node = &mut node.children[i];
    }
    node
}

/// Pads a title path to the four heading columns.
pub(crate) fn path_columns(path: &[String]) -> [String; 4] {
    let mut cols: [String; 4] = Default::default();
    for (c, t) in cols.iter_mut().zip(path) {
        *c = t.clone();
    }
    cols
}
