//! Aligns a small ToC against a body that has one exact heading, one
//! reworded heading and one heading missing altogether. With no model
//! available the missing heading goes to the start of its window.

use anyhow::Result;
use esgdoc::align::{align_document, AlignConfig, MatchStage};
use esgdoc::llm::ModelClient;
use esgdoc::model::{BlockType, BoundingBox, ContentBlock};
use esgdoc::toc::{TocEntry, TocSource, TocTree};

fn main() -> Result<()> {
    let entries = [("Environment", 1), ("Climate Change Response", 2), ("Water Stewardship", 2), ("Social", 1)]
        .iter()
        .map(|&(title, level)| TocEntry {
            title: title.to_string(),
            level,
            page_hint: None,
            region_id: 0,
            line_span: 1,
        })
        .collect();
    let toc = TocTree::new(entries, TocSource::Rap, vec![]);

    let body = [
        ("Environment", BlockType::Title),
        ("Climate-change response", BlockType::Title),
        ("Emissions fell by a tenth over the year across all plants.", BlockType::Text),
        ("Withdrawals from stressed basins were cut by a third.", BlockType::Text),
        ("Social", BlockType::Title),
        ("Headcount grew to 4,100.", BlockType::Text),
    ];
    let blocks: Vec<ContentBlock> = body
        .iter()
        .enumerate()
        .map(|(k, &(text, kind))| {
            let y = 0.05 + 0.1 * k as f64;
            Ok(ContentBlock::new(format!("p1-b{k}"), text, BoundingBox::new(0.1, y, 0.9, y + 0.08)?, kind, 1))
        })
        .collect::<Result<_>>()?;

    let out = align_document(&toc, &blocks, &ModelClient::offline(), &AlignConfig::default())?;
    for m in &out.matches {
        println!("{:<26} -> {} ({:?}, sim {:.2})", m.toc_entry.title, m.block_id, m.stage, m.similarity);
    }
    println!("inserted: {}", out.count(MatchStage::Inserted));
    for n in &out.notes {
        println!("note: {n}");
    }
    out.tree.walk(|path| {
        let node = path[path.len() - 1];
        if !node.is_front_matter() {
            let ids: Vec<&str> = node.blocks.iter().map(|b| b.as_str()).collect();
            println!("{}{} [{}]", "  ".repeat(path.len() - 1), node.title, ids.join(", "));
        }
    });
    Ok(())
}
