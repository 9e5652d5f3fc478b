//! Pairwise succession scoring, thresholded graph and global reading order.

mod graph;
mod rokt;
mod scorer;

pub use graph::{
    break_cycles, build_graph, candidate_pairs, resolve_order, score_pairs, Edge, Resolution, ScoreMatrix,
    SuccessionGraph, DEFAULT_TAU,
};
pub use rokt::rokt;
pub use scorer::{
    scorer_from_spec, sigmoid, GeometricScorer, LinearSigmoidScorer, ServiceScorer, SuccessionScorer,
};

use std::collections::HashMap;

use crate::embedding::EmbeddingProvider;
use crate::error::Result;
use crate::model::{BlockId, ContentBlock};

#[derive(Debug, Clone)]
pub struct OrderOutcome {
    /// Blocks in resolved order, pages kept contiguous and ascending.
    pub blocks: Vec<ContentBlock>,
    pub edge_count: usize,
    pub removed_edges: usize,
}

/// Scores, thresholds and resolves; then stably regroups by page so that a
/// stray cross-page edge can never interleave two pages.
pub fn order_blocks(
    blocks: &[ContentBlock],
    scorer: &dyn SuccessionScorer,
    provider: &dyn EmbeddingProvider,
    tau: f64,
) -> Result<OrderOutcome> {
    let scores = score_pairs(blocks, scorer, provider)?;
    let graph = build_graph(&scores, tau)?;
    let res = resolve_order(&graph, blocks)?;
    let by_id: HashMap<&BlockId, &ContentBlock> = blocks.iter().map(|b| (&b.id, b)).collect();
    let mut ordered: Vec<ContentBlock> = res.order.iter().map(|id| by_id[id].clone()).collect();
    ordered.sort_by_key(|b| b.page_idx);
    Ok(OrderOutcome {
        blocks: ordered,
        edge_count: res.edges.len(),
        removed_edges: res.removed.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedding::HashEmbedder;
    use crate::model::{BlockType, BoundingBox};

    fn blk(id: &str, page: u32, x0: f64, y0: f64, x1: f64, y1: f64) -> ContentBlock {
        ContentBlock::new(id, id, BoundingBox::new(x0, y0, x1, y1).unwrap(), BlockType::Text, page)
    }

    fn matrix(ids: &[&str], s: &[((usize, usize), f64)]) -> ScoreMatrix {
        ScoreMatrix {
            ids: ids.iter().map(|&i| BlockId::new(i)).collect(),
            scores: s.iter().copied().collect(),
        }
    }

    fn ids(order: &[BlockId]) -> Vec<&str> {
        order.iter().map(BlockId::as_str).collect()
    }

    #[test]
    fn single_block_has_no_pairs() {
        let b = [blk("a", 1, 0.1, 0.1, 0.9, 0.2)];
        let m = score_pairs(&b, &GeometricScorer::default(), &HashEmbedder::new(4)).unwrap();
        assert!(m.scores.is_empty());
    }

    #[test]
    fn zero_linear_scorer_gives_half() {
        let b = [blk("a", 1, 0.1, 0.1, 0.9, 0.2), blk("b", 1, 0.1, 0.3, 0.9, 0.4)];
        let p = HashEmbedder::new(4);
        let s = LinearSigmoidScorer::zeros(crate::features::PairFeatures::len_for_dim(4));
        let m = score_pairs(&b, &s, &p).unwrap();
        assert_eq!(m.scores.len(), 2);
        assert!(m.scores.values().all(|&v| v == 0.5));
    }

    #[test]
    fn geometric_prefers_top_to_bottom() {
        let b = [blk("a", 1, 0.1, 0.1, 0.9, 0.2), blk("b", 1, 0.1, 0.25, 0.9, 0.35)];
        let m = score_pairs(&b, &GeometricScorer::default(), &HashEmbedder::new(4)).unwrap();
        assert!(m.get(0, 1).unwrap() > m.get(1, 0).unwrap());
    }

    #[test]
    fn strict_threshold() {
        let m = matrix(&["a", "b"], &[((0, 1), 0.5), ((1, 0), 0.5)]);
        assert!(build_graph(&m, 0.5).unwrap().edges.is_empty());
        let m = matrix(&["a", "b"], &[((0, 1), 0.9), ((1, 0), 0.3)]);
        let g = build_graph(&m, 0.3).unwrap();
        assert_eq!(g.edges, vec![Edge { from: 0, to: 1, weight: 0.9 }]);
        assert!(build_graph(&m, 1.0).is_err());
    }

    #[test]
    fn chain_and_raster_fallback() {
        let b = [
            blk("a", 1, 0.1, 0.5, 0.9, 0.6),
            blk("b", 1, 0.1, 0.1, 0.9, 0.2),
            blk("c", 1, 0.1, 0.3, 0.9, 0.4),
        ];
        let chain = matrix(&["a", "b", "c"], &[((0, 1), 0.9), ((1, 2), 0.9)]);
        let g = build_graph(&chain, 0.3).unwrap();
        assert_eq!(ids(&resolve_order(&g, &b).unwrap().order), ["a", "b", "c"]);
        let empty = build_graph(&matrix(&["a", "b", "c"], &[]), 0.3).unwrap();
        assert_eq!(ids(&resolve_order(&empty, &b).unwrap().order), ["b", "c", "a"]);
    }

    #[test]
    fn edgeless_block_keeps_raster_slot() {
        let b = [
            blk("head", 1, 0.1, 0.05, 0.3, 0.1),
            blk("x", 1, 0.1, 0.2, 0.9, 0.3),
            blk("y", 1, 0.1, 0.4, 0.9, 0.5),
            blk("side", 1, 0.6, 0.45, 0.9, 0.5),
            blk("z", 1, 0.1, 0.6, 0.9, 0.7),
        ];
        let m = matrix(&["head", "x", "y", "side", "z"], &[((1, 2), 0.9), ((2, 4), 0.9)]);
        let r = resolve_order(&build_graph(&m, 0.3).unwrap(), &b).unwrap();
        assert_eq!(ids(&r.order), ["head", "x", "y", "side", "z"]);
    }

    #[test]
    fn two_cycle_drops_lighter_edge() {
        let b = [blk("a", 1, 0.1, 0.5, 0.9, 0.6), blk("b", 1, 0.1, 0.1, 0.9, 0.2)];
        let g = build_graph(&matrix(&["a", "b"], &[((0, 1), 0.9), ((1, 0), 0.6)]), 0.3).unwrap();
        let r = resolve_order(&g, &b).unwrap();
        assert_eq!(ids(&r.order), ["a", "b"]);
        assert_eq!(r.removed, vec![Edge { from: 1, to: 0, weight: 0.6 }]);
    }

    #[test]
    fn three_cycle_is_broken() {
        let b = [
            blk("a", 1, 0.1, 0.1, 0.9, 0.2),
            blk("b", 1, 0.1, 0.3, 0.9, 0.4),
            blk("c", 1, 0.1, 0.5, 0.9, 0.6),
        ];
        let m = matrix(&["a", "b", "c"], &[((0, 1), 0.8), ((1, 2), 0.7), ((2, 0), 0.6)]);
        let r = resolve_order(&build_graph(&m, 0.3).unwrap(), &b).unwrap();
        assert_eq!(r.removed.len(), 1);
        assert_eq!(ids(&r.order), ["a", "b", "c"]);
    }

    #[test]
    fn cross_page_pairs_only_from_last_block() {
        let b = [
            blk("p1a", 1, 0.1, 0.1, 0.9, 0.2),
            blk("p1b", 1, 0.1, 0.8, 0.9, 0.9),
            blk("p2a", 2, 0.1, 0.1, 0.9, 0.2),
            blk("p2b", 2, 0.1, 0.3, 0.9, 0.4),
        ];
        let pairs = candidate_pairs(&b);
        assert!(pairs.contains(&(1, 2)) && pairs.contains(&(1, 3)));
        assert!(!pairs.contains(&(0, 2)) && !pairs.contains(&(2, 1)));
        assert_eq!(pairs.len(), 2 + 2 + 2);
    }

    #[test]
    fn two_columns_read_column_major() {
        let b = [
            blk("title", 1, 0.05, 0.05, 0.95, 0.1),
            blk("r1", 1, 0.55, 0.15, 0.95, 0.3),
            blk("l1", 1, 0.05, 0.15, 0.45, 0.3),
            blk("l2", 1, 0.05, 0.32, 0.45, 0.5),
            blk("r2", 1, 0.55, 0.32, 0.95, 0.5),
        ];
        let out = order_blocks(&b, &GeometricScorer::default(), &HashEmbedder::new(8), 0.3).unwrap();
        let got: Vec<&str> = out.blocks.iter().map(|b| b.id.as_str()).collect();
        assert_eq!(got, ["title", "l1", "l2", "r1", "r2"]);
    }
}
