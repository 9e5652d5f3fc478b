//! Ingests a layout file, prints a per-page summary, and round-trips one of
//! the golden output records through the canonical serializer.
//!
//!     cargo run --example ingest_export [layout.json]

use std::path::PathBuf;

use anyhow::Result;
use esgdoc::model::{export_structured, import_structured, ingest_layout};

fn main() -> Result<()> {
    let corpus = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data/corpus");
    let input = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| corpus.join("layouts/us_exmp_2022.json"));

    let doc = ingest_layout(&std::fs::read(&input)?)?;
    println!("{} ({}), {} blocks", doc.metadata.company_name, doc.metadata.market, doc.blocks.len());
    for page in doc.page_indices() {
        let kinds: Vec<&str> = doc.blocks_on_page(page).map(|b| b.block_type.as_str()).collect();
        println!("  page {page}: {}", kinds.join(" "));
    }

    let golden = corpus.join("expected/EXMP-2022.json");
    let bytes = std::fs::read(&golden)?;
    let parsed = import_structured(&bytes)?;
    let again = export_structured(&parsed)?;
    println!(
        "{}: {} blocks, re-export byte-identical: {}",
        golden.file_name().unwrap().to_string_lossy(),
        parsed.block_count(),
        again == bytes
    );
    Ok(())
}
