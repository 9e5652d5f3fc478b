//! Builds the multimodal cluster around each image of a bundled report,
//! prints the prompt for the first one, and narrates all of them from the
//! recorded fixtures.

use std::path::PathBuf;

use anyhow::Result;
use esgdoc::llm::ModelClient;
use esgdoc::model::{BlockType, DataType};
use esgdoc::narration::{block_owners, build_cluster, build_narration_prompt, narrate, DEFAULT_INSTRUCTION, DEFAULT_RADIUS};
use esgdoc::pipeline::{Engine, PipelineConfig};

fn main() -> Result<()> {
    let corpus = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data/corpus");
    let layouts = corpus.join("layouts");
    let client = ModelClient::replay(corpus.join("fixtures"));
    let engine = Engine::with_client(PipelineConfig::default(), ModelClient::replay(corpus.join("fixtures")))?;
    let doc = esgdoc::model::ingest_layout(&std::fs::read(layouts.join("us_exmp_2022.json"))?)?;
    let (ordered, _) = engine.order(&doc)?;
    let toc = engine.toc(&ordered, Some(&layouts))?.tree;
    let aligned = engine.align(ordered, toc)?;

    let blocks = &aligned.layout.blocks;
    let owners = block_owners(&aligned.tree);
    let mut first = true;
    for (pos, b) in blocks.iter().enumerate().filter(|(_, b)| b.block_type == BlockType::Image) {
        let cluster = build_cluster(pos, blocks, &owners, DEFAULT_RADIUS, DEFAULT_INSTRUCTION)?;
        if first {
            println!("{}\n---", build_narration_prompt(&cluster).0);
            first = false;
        }
        let n = narrate(&cluster, &client, Some(&layouts));
        let kinds: Vec<&str> = cluster.elements.iter().map(|e| e.kind.as_str()).collect();
        let images = cluster.elements.iter().filter(|e| e.kind == DataType::Image).count();
        println!("{} [{}; {images} image(s)]{}", b.content, kinds.join(","), if n.fallback { " FALLBACK" } else { "" });
        println!("  {}", n.text);
    }
    Ok(())
}
