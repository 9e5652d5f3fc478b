//! Runs the fused pipeline over the bundled mini-corpus from recorded model
//! answers, then scores the outputs against the gold annotations.
//!
//!     cargo run --example pipeline_eval [output-dir]

use std::path::PathBuf;

use anyhow::Result;
use esgdoc::llm::Mode;
use esgdoc::pipeline::{run_eval, run_pipeline, Engine, PipelineConfig};

fn main() -> Result<()> {
    let corpus = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data/corpus");
    let scratch = tempfile::tempdir()?;
    let out = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| scratch.path().to_path_buf());

    let cfg = PipelineConfig {
        mode: Mode::Replay,
        fixtures: Some(corpus.join("fixtures")),
        ..Default::default()
    };
    let engine = Engine::new(cfg)?;
    let summary = run_pipeline(&engine, &corpus.join("layouts"), &out)?;
    println!("{} report(s) written to {}\n", summary.outputs.len(), out.display());

    let report = run_eval(&out, &corpus.join("gold"))?;
    print!("{}", report.to_table());
    Ok(())
}
