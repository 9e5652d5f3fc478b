//! Extracts the ToC of each bundled report twice, once from the recorded
//! model answers and once with the rule-based parser, and scores both
//! against the gold ToC.

use std::path::PathBuf;

use anyhow::Result;
use esgdoc::llm::ModelClient;
use esgdoc::model::ingest_layout;
use esgdoc::toc::{extract_toc, toc_metrics, TocMode, TocTree};

fn main() -> Result<()> {
    let corpus = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data/corpus");
    let client = ModelClient::replay(corpus.join("fixtures"));
    let reports = [
        ("cn_600999_2023", "600999.SH-2023"),
        ("hk_0999_2023", "0999.HK-2023"),
        ("us_exmp_2022", "EXMP-2022"),
    ];
    for (layout, name) in reports {
        let path = corpus.join("layouts").join(format!("{layout}.json"));
        let doc = ingest_layout(&std::fs::read(&path)?)?;
        let gold: TocTree = serde_json::from_slice(&std::fs::read(corpus.join(format!("gold/toc/{name}.json")))?)?;
        println!("{name}");
        for mode in [TocMode::Rap, TocMode::Fallback] {
            let out = extract_toc(&doc, mode, &client, path.parent());
            let s = toc_metrics(&out.tree, &gold)?;
            println!("  {mode:?}: {} entries  CC {:.3}  RC {:.3}  HC {:.3}", out.tree.entries.len(), s.cc, s.rc, s.hc);
            if mode == TocMode::Rap {
                for e in &out.tree.entries {
                    println!("    {}{}", "  ".repeat(usize::from(e.level - 1)), e.title);
                }
            }
        }
    }
    Ok(())
}
