use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap, HashMap, HashSet};

use petgraph::algo::tarjan_scc;
use petgraph::graph::{DiGraph, NodeIndex};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::scorer::SuccessionScorer;
use crate::embedding::EmbeddingProvider;
use crate::error::{Error, Result};
use crate::features::{assemble_pair, block_embedding};
use crate::model::{BlockId, ContentBlock};

pub const DEFAULT_TAU: f64 = 0.3;

/// Sparse succession scores over block indices. Only within-page pairs and
/// pairs from the last raster block of a page into the next page are present.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ScoreMatrix {
    pub ids: Vec<BlockId>,
    pub scores: BTreeMap<(usize, usize), f64>,
}

impl ScoreMatrix {
    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        self.scores.get(&(i, j)).copied()
    }
}

/// Ordered pairs that get scored, in `(i, j)` order.
pub fn candidate_pairs(blocks: &[ContentBlock]) -> Vec<(usize, usize)> {
    let mut by_page: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
    for (i, b) in blocks.iter().enumerate() {
        by_page.entry(b.page_idx).or_default().push(i);
    }
    let mut pairs = Vec::new();
    for members in by_page.values() {
        for &i in members {
            for &j in members {
                if i != j {
                    pairs.push((i, j));
                }
            }
        }
    }
    let pages: Vec<&Vec<usize>> = by_page.values().collect();
    for w in pages.windows(2) {
        let last = *w[0]
            .iter()
            .max_by(|&&a, &&b| blocks[a].raster_cmp(&blocks[b]))
            .expect("page groups are non-empty");
        pairs.extend(w[1].iter().map(|&j| (last, j)));
    }
    pairs.sort_unstable();
    pairs
}

pub fn score_pairs(
    blocks: &[ContentBlock],
    scorer: &dyn SuccessionScorer,
    provider: &dyn EmbeddingProvider,
) -> Result<ScoreMatrix> {
    let embeddings: Vec<Vec<f64>> = blocks
        .par_iter()
        .map(|b| block_embedding(b, provider))
        .collect::<Result<_>>()?;
    let pairs = candidate_pairs(blocks);
    let scores = pairs
        .par_iter()
        .map(|&(i, j)| {
            let f = assemble_pair(&blocks[i], &blocks[j], embeddings[i].clone(), embeddings[j].clone());
            let err = |message: String| Error::Scorer {
                scorer: scorer.name().to_string(),
                from: blocks[i].id.to_string(),
                to: blocks[j].id.to_string(),
                message,
            };
            let s = scorer.score(&f).map_err(|e| err(e.to_string()))?;
            if !(0.0..=1.0).contains(&s) {
                return Err(err(format!("score {s} outside [0,1]")));
            }
            Ok(((i, j), s))
        })
        .collect::<Result<BTreeMap<_, _>>>()?;
    Ok(ScoreMatrix {
        ids: blocks.iter().map(|b| b.id.clone()).collect(),
        scores,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub from: usize,
    pub to: usize,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuccessionGraph {
    pub nodes: Vec<BlockId>,
    /// Sorted by `(from, to)`.
    pub edges: Vec<Edge>,
    pub tau: f64,
}

/// Keeps exactly the pairs with `s > tau`.
pub fn build_graph(scores: &ScoreMatrix, tau: f64) -> Result<SuccessionGraph> {
    if !(0.0..1.0).contains(&tau) {
        return Err(Error::Config(format!("tau must be in [0,1), got {tau}")));
    }
    let edges = scores
        .scores
        .iter()
        .filter(|(_, &s)| s > tau)
        .map(|(&(from, to), &weight)| Edge { from, to, weight })
        .collect();
    Ok(SuccessionGraph {
        nodes: scores.ids.clone(),
        edges,
        tau,
    })
}

fn cyclic_edges(n: usize, edges: &[Edge]) -> Vec<usize> {
    let mut g: DiGraph<(), ()> = DiGraph::with_capacity(n, edges.len());
    for _ in 0..n {
        g.add_node(());
    }
    for e in edges {
        g.add_edge(NodeIndex::new(e.from), NodeIndex::new(e.to), ());
    }
    let mut comp = vec![usize::MAX; n];
    for (c, scc) in tarjan_scc(&g).into_iter().enumerate() {
        if scc.len() > 1 {
            for v in scc {
                comp[v.index()] = c;
            }
        }
    }
    edges
        .iter()
        .enumerate()
        .filter(|(_, e)| comp[e.from] != usize::MAX && comp[e.from] == comp[e.to])
        .map(|(k, _)| k)
        .collect()
}

/// Repeatedly deletes the lightest edge lying on any cycle (ties by
/// `(from, to)`) until the graph is acyclic. Returns the deleted edges.
pub fn break_cycles(n: usize, edges: &mut Vec<Edge>) -> Vec<Edge> {
    let mut removed = Vec::new();
    loop {
        let on_cycle = cyclic_edges(n, edges);
        let Some(&k) = on_cycle.iter().min_by(|&&a, &&b| {
            edges[a]
                .weight
                .total_cmp(&edges[b].weight)
                .then((edges[a].from, edges[a].to).cmp(&(edges[b].from, edges[b].to)))
        }) else {
            return removed;
        };
        removed.push(edges.remove(k));
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Resolution {
    pub order: Vec<BlockId>,
    /// Edges retained after cycle breaking.
    pub edges: Vec<Edge>,
    pub removed: Vec<Edge>,
}

#[derive(PartialEq)]
struct Ready {
    best_in: f64,
    raster_rank: usize,
    node: usize,
}

impl Eq for Ready {}

impl Ord for Ready {
    fn cmp(&self, other: &Self) -> Ordering {
        self.best_in
            .total_cmp(&other.best_in)
            .then(other.raster_rank.cmp(&self.raster_rank))
    }
}

impl PartialOrd for Ready {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Topological order over the graph after cycle breaking. Among ready
/// nodes, the one with the heaviest incoming edge goes first, then raster
/// order (page, y0, x0). Blocks with no edges at all are merged in by
/// raster order: each goes just before the first later-in-raster block.
pub fn resolve_order(g: &SuccessionGraph, blocks: &[ContentBlock]) -> Result<Resolution> {
    let n = blocks.len();
    if g.nodes.len() != n || g.nodes.iter().zip(blocks).any(|(id, b)| *id != b.id) {
        return Err(Error::Precondition("graph nodes do not match the block list".into()));
    }
    let mut seen = HashSet::new();
    if let Some(b) = blocks.iter().find(|b| !seen.insert(&b.id)) {
        return Err(Error::Precondition(format!("duplicate block id {}", b.id)));
    }
    if let Some(e) = g.edges.iter().find(|e| e.from >= n || e.to >= n || e.from == e.to) {
        return Err(Error::Precondition(format!("bad edge {} -> {}", e.from, e.to)));
    }

    let mut edges = g.edges.clone();
    let removed = break_cycles(n, &mut edges);

    let mut raster: Vec<usize> = (0..n).collect();
    raster.sort_by(|&a, &b| blocks[a].raster_cmp(&blocks[b]));
    let mut rank = vec![0; n];
    for (r, &i) in raster.iter().enumerate() {
        rank[i] = r;
    }

    let mut indeg = vec![0usize; n];
    let mut best_in = vec![0.0f64; n];
    let mut out: HashMap<usize, Vec<usize>> = HashMap::new();
    for e in &edges {
        indeg[e.to] += 1;
        best_in[e.to] = best_in[e.to].max(e.weight);
        out.entry(e.from).or_default().push(e.to);
    }
    let mut isolated: Vec<usize> = (0..n).filter(|&i| indeg[i] == 0 && !out.contains_key(&i)).collect();
    isolated.sort_by_key(|&i| rank[i]);
    let mut heap: BinaryHeap<Ready> = (0..n)
        .filter(|&i| indeg[i] == 0 && out.contains_key(&i))
        .map(|i| Ready {
            best_in: best_in[i],
            raster_rank: rank[i],
            node: i,
        })
        .collect();
    let mut order = Vec::with_capacity(n);
    let mut pending = isolated.into_iter().peekable();
    while let Some(Ready { node, .. }) = heap.pop() {
        // blocks without edges slot in at their raster position
        while let Some(i) = pending.next_if(|&i| rank[i] < rank[node]) {
            order.push(blocks[i].id.clone());
        }
        order.push(blocks[node].id.clone());
        for &j in out.get(&node).map(Vec::as_slice).unwrap_or(&[]) {
            indeg[j] -= 1;
            if indeg[j] == 0 {
                heap.push(Ready {
                    best_in: best_in[j],
                    raster_rank: rank[j],
                    node: j,
                });
            }
        }
    }
    order.extend(pending.map(|i| blocks[i].id.clone()));
    debug_assert_eq!(order.len(), n, "graph is acyclic after cycle breaking");
    Ok(Resolution {
        order,
        edges,
        removed,
    })
}
