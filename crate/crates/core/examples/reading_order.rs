//! Orders a two-column page with the geometric scorer at several thresholds
//! and scores each result against the hand-read order.

use anyhow::Result;
use esgdoc::embedding::HashEmbedder;
use esgdoc::model::{BlockType, BoundingBox, ContentBlock};
use esgdoc::reading_order::{build_graph, order_blocks, rokt, score_pairs, GeometricScorer};

fn block(id: &str, x0: f64, y0: f64, x1: f64, y1: f64) -> Result<ContentBlock> {
    Ok(ContentBlock::new(id, id, BoundingBox::new(x0, y0, x1, y1)?, BlockType::Text, 1))
}

fn main() -> Result<()> {
    let page = vec![
        block("title", 0.05, 0.04, 0.95, 0.09)?,
        block("right-1", 0.55, 0.12, 0.95, 0.40)?,
        block("left-1", 0.05, 0.12, 0.45, 0.30)?,
        block("left-2", 0.05, 0.32, 0.45, 0.55)?,
        block("right-2", 0.55, 0.42, 0.95, 0.60)?,
        block("footnote", 0.05, 0.90, 0.95, 0.94)?,
    ];
    let gold = ["title", "left-1", "left-2", "right-1", "right-2", "footnote"];
    let raster = ["title", "left-1", "right-1", "left-2", "right-2", "footnote"];
    println!("raster order ROKT: {:.3}", rokt(&raster, &gold)?);

    let scorer = GeometricScorer::default();
    let embedder = HashEmbedder::new(16);
    let scores = score_pairs(&page, &scorer, &embedder)?;
    for tau in [0.2, 0.3, 0.4, 0.5] {
        let edges = build_graph(&scores, tau)?.edges.len();
        let out = order_blocks(&page, &scorer, &embedder, tau)?;
        let ids: Vec<&str> = out.blocks.iter().map(|b| b.id.as_str()).collect();
        println!("tau {tau}: {edges:2} edges, ROKT {:.3}  {}", rokt(&ids, &gold)?, ids.join(" > "));
    }
    Ok(())
}
