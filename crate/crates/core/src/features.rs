//! Pairwise multimodal features for succession scoring.
//!
//! For an ordered pair of blocks the feature vector concatenates both content
//! embeddings, the center offsets, box IoU, normalized center distance and
//! one-hot block types.

use serde::{Deserialize, Serialize};

use crate::embedding::EmbeddingProvider;
use crate::error::{Error, Result};
use crate::model::{BlockType, BoundingBox, ContentBlock};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Geometry {
    pub dy: f64,
    pub dx: f64,
    pub iou: f64,
    pub dist: f64,
}

/// Offsets are `b - a` between centers; distance is scaled by the page
/// diagonal (sqrt 2 in normalized coordinates).
pub fn geometry_features(a: &BoundingBox, b: &BoundingBox) -> Geometry {
    let (ax, ay) = a.center();
    let (bx, by) = b.center();
    let inter = a.intersection_area(b);
    let union = a.area() + b.area() - inter;
    let iou = if union > 0.0 {
        (inter / union).clamp(0.0, 1.0)
    } else if a == b {
        1.0
    } else {
        0.0
    };
    let (dx, dy) = (bx - ax, by - ay);
    Geometry {
        dy,
        dx,
        iou,
        dist: ((dx * dx + dy * dy).sqrt() / std::f64::consts::SQRT_2).clamp(0.0, 1.0),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairFeatures {
    pub e_i: Vec<f64>,
    pub e_j: Vec<f64>,
    pub dy: f64,
    pub dx: f64,
    pub iou: f64,
    pub dist: f64,
    pub t_i: [f64; BlockType::COUNT],
    pub t_j: [f64; BlockType::COUNT],
    /// Horizontal overlap over the wider width. Side information for
    /// column detection; not part of [`PairFeatures::to_vec`].
    pub x_overlap: f64,
}

pub fn one_hot(t: BlockType) -> [f64; BlockType::COUNT] {
    let mut v = [0.0; BlockType::COUNT];
    v[t.index()] = 1.0;
    v
}

impl PairFeatures {
    pub fn len_for_dim(dim: usize) -> usize {
        2 * dim + 4 + 2 * BlockType::COUNT
    }

    /// Concatenated feature vector.
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(Self::len_for_dim(self.e_i.len()));
        v.extend_from_slice(&self.e_i);
        v.extend_from_slice(&self.e_j);
        v.extend_from_slice(&[self.dy, self.dx, self.iou, self.dist]);
        v.extend_from_slice(&self.t_i);
        v.extend_from_slice(&self.t_j);
        v
    }
}

/// Embedding used for a block's content. Image payloads are paths that only
/// identify the block, so images embed as the empty string.
pub fn block_embedding(block: &ContentBlock, provider: &dyn EmbeddingProvider) -> Result<Vec<f64>> {
    let text = if block.block_type == BlockType::Image {
        ""
    } else {
        block.content.as_str()
    };
    let v = provider.embed(text).map_err(|e| Error::Feature {
        provider: provider.name().to_string(),
        block_id: block.id.to_string(),
        message: e.to_string(),
    })?;
    if v.len() != provider.dim() {
        return Err(Error::Feature {
            provider: provider.name().to_string(),
            block_id: block.id.to_string(),
            message: format!("expected {} values, got {}", provider.dim(), v.len()),
        });
    }
    Ok(v)
}

/// Assembles features from precomputed embeddings.
///
/// Blocks on different pages are placed as if pages were stacked vertically
/// (one unit per page); offsets are then clamped to [-1, 1] and IoU is 0.
pub fn assemble_pair(i: &ContentBlock, j: &ContentBlock, e_i: Vec<f64>, e_j: Vec<f64>) -> PairFeatures {
    let mut g = geometry_features(&i.bbox, &j.bbox);
    let page_gap = f64::from(j.page_idx) - f64::from(i.page_idx);
    if page_gap != 0.0 {
        g.dy += page_gap;
        g.iou = 0.0;
        g.dist = ((g.dx * g.dx + g.dy * g.dy).sqrt() / std::f64::consts::SQRT_2).clamp(0.0, 1.0);
    }
    PairFeatures {
        e_i,
        e_j,
        dy: g.dy.clamp(-1.0, 1.0),
        dx: g.dx.clamp(-1.0, 1.0),
        iou: g.iou,
        dist: g.dist,
        t_i: one_hot(i.block_type),
        t_j: one_hot(j.block_type),
        x_overlap: i.bbox.x_overlap_ratio(&j.bbox),
    }
}

pub fn pair_features(i: &ContentBlock, j: &ContentBlock, provider: &dyn EmbeddingProvider) -> Result<PairFeatures> {
    if i.id == j.id {
        return Err(Error::Precondition(format!("pair of block {} with itself", i.id)));
    }
    let e_i = block_embedding(i, provider)?;
    let e_j = block_embedding(j, provider)?;
    Ok(assemble_pair(i, j, e_i, e_j))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedding::HashEmbedder;

    fn bb(x0: f64, y0: f64, x1: f64, y1: f64) -> BoundingBox {
        BoundingBox::new(x0, y0, x1, y1).unwrap()
    }

    fn block(id: &str, t: BlockType, content: &str, b: BoundingBox) -> ContentBlock {
        ContentBlock::new(id, content, b, t, 1)
    }

    #[test]
    fn identical_boxes() {
        let a = bb(0.1, 0.2, 0.5, 0.6);
        assert_eq!(geometry_features(&a, &a), Geometry { dy: 0.0, dx: 0.0, iou: 1.0, dist: 0.0 });
    }

    #[test]
    fn disjoint_corners() {
        let g = geometry_features(&bb(0.0, 0.0, 0.1, 0.1), &bb(0.9, 0.9, 1.0, 1.0));
        assert_eq!(g.iou, 0.0);
        // centers (0.05,0.05) and (0.95,0.95): distance 0.9*sqrt2, scaled -> 0.9
        assert!((g.dist - 0.9).abs() < 1e-12);
    }

    #[test]
    fn half_overlapping_strips() {
        // intersection [.25,.5]x[0,1] = 0.25; union 0.5 + 0.5 - 0.25 = 0.75
        let g = geometry_features(&bb(0.0, 0.0, 0.5, 1.0), &bb(0.25, 0.0, 0.75, 1.0));
        assert!((g.iou - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn vector_length() {
        let p = HashEmbedder::new(4);
        let a = block("a", BlockType::Text, "alpha", bb(0.1, 0.1, 0.9, 0.2));
        let b = block("b", BlockType::Text, "beta", bb(0.1, 0.3, 0.9, 0.4));
        let f = pair_features(&a, &b, &p).unwrap();
        assert_eq!(f.to_vec().len(), 2 * 4 + 4 + 2 * 8);
        assert_eq!(f.t_i.iter().sum::<f64>(), 1.0);
    }

    #[test]
    fn image_embeds_as_empty_string() {
        let p = HashEmbedder::new(8);
        let a = block("a", BlockType::Text, "alpha", bb(0.1, 0.1, 0.9, 0.2));
        let img = block("b", BlockType::Image, "img/chart.png", bb(0.1, 0.3, 0.9, 0.8));
        let f = pair_features(&a, &img, &p).unwrap();
        assert_eq!(f.e_j, p.embed("").unwrap());
        assert_ne!(f.e_j, p.embed("img/chart.png").unwrap());
    }

    #[test]
    fn swapping_negates_offsets() {
        let p = HashEmbedder::new(8);
        let a = block("a", BlockType::Title, "Energy", bb(0.1, 0.1, 0.4, 0.15));
        let b = block("b", BlockType::Table, "a|b", bb(0.3, 0.5, 0.9, 0.7));
        let ab = pair_features(&a, &b, &p).unwrap();
        let ba = pair_features(&b, &a, &p).unwrap();
        assert_eq!(ab.dy, -ba.dy);
        assert_eq!(ab.dx, -ba.dx);
        assert_eq!(ab.iou, ba.iou);
        assert_eq!(ab.dist, ba.dist);
    }

    #[test]
    fn cross_page_offsets_stack_pages() {
        let p = HashEmbedder::new(4);
        let a = ContentBlock::new("a", "end", bb(0.1, 0.8, 0.9, 0.9), BlockType::Text, 1);
        let b = ContentBlock::new("b", "start", bb(0.1, 0.1, 0.9, 0.2), BlockType::Text, 2);
        let f = pair_features(&a, &b, &p).unwrap();
        assert!((f.dy - 0.3).abs() < 1e-12);
        assert_eq!(f.iou, 0.0);
    }

    #[test]
    fn self_pair_rejected() {
        let p = HashEmbedder::new(4);
        let a = block("a", BlockType::Text, "x", bb(0.1, 0.1, 0.2, 0.2));
        assert!(pair_features(&a, &a, &p).is_err());
    }
}
