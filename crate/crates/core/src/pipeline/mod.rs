//! Stage composition: ingest, order, ToC, align, narrate, label, export,
//! run per report in a worker pool, plus the evaluation harness.

mod config;
mod eval;

pub use config::{PipelineConfig, ENV_PREFIX};
pub use eval::{
    match_blocks, parsing_counts, run_eval, BlockKey, EvalReport, MetricSummary, ParsingCounts, ReportMetrics,
    DATA_PREFIX_CHARS,
};

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::align::{align_document, AnchorMatch, MatchStage};
use crate::embedding::{self, EmbeddingProvider};
use crate::error::{Error, Result};
use crate::labeling::{self, label_document, LabelHierarchy, LabelProvider};
use crate::llm::{write_atomic, ModelClient};
use crate::model::{
    export_structured, ingest_layout, BlockId, BlockRecord, HeadingNode, HeadingTree, LayoutDocument, PageRecord,
    StructuredDocument,
};
use crate::narration::{narrate_document, NarrationReport};
use crate::reading_order::{order_blocks, scorer_from_spec, SuccessionScorer};
use crate::toc::{extract_toc, TocOutcome, TocTree};

/// Output of the alignment stage, and (with image payloads replaced) of narration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignedDocument {
    /// Blocks in resolved reading order.
    pub layout: LayoutDocument,
    pub toc: TocTree,
    pub tree: HeadingTree,
    pub matches: Vec<AnchorMatch>,
    pub unresolved: Vec<usize>,
    #[serde(default)]
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct OrderStats {
    pub edges: usize,
    pub removed_edges: usize,
}

/// Per-report run record written next to the outputs.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub report: String,
    pub blocks: usize,
    pub dropped_furniture: usize,
    pub timings_ms: BTreeMap<String, f64>,
    pub order: OrderStats,
    pub toc_source: String,
    pub toc_pages: Vec<u32>,
    pub toc_entries: usize,
    pub match_counts: BTreeMap<String, usize>,
    pub unresolved: Vec<String>,
    pub narration: NarrationReport,
    pub notes: Vec<String>,
}

/// Re-keys the tree from layout ids to `p<page>-r<order>` ids.
fn remap_tree(node: &HeadingNode, ids: &BTreeMap<BlockId, BlockId>) -> Result<HeadingNode> {
    let blocks = node
        .blocks
        .iter()
        .map(|b| {
            ids.get(b)
                .cloned()
                .ok_or_else(|| Error::Precondition(format!("tree names unknown block {b}")))
        })
        .collect::<Result<_>>()?;
    Ok(HeadingNode {
        title: node.title.clone(),
        level: node.level,
        children: node.children.iter().map(|c| remap_tree(c, ids)).collect::<Result<_>>()?,
        blocks,
        origin: node.origin,
    })
}

/// Builds the unlabeled output record: pages ascending, blocks in reading
/// order, heading columns taken from the tree.
pub fn to_structured(aligned: &AlignedDocument) -> Result<StructuredDocument> {
    let layout = &aligned.layout;
    let owners = aligned.tree.owner_paths();
    let mut ids = BTreeMap::new();
    let mut pages = Vec::new();
    for page_idx in layout.page_indices() {
        let mut page = PageRecord::new(page_idx);
        if let Some(info) = layout.pages.iter().find(|p| p.page_idx == page_idx) {
            page.page_markdown_url = info.links.markdown_url.clone();
            page.page_file_url = info.links.file_url.clone();
            page.page_relative_path = info.links.relative_path.clone();
            page.page_http_url = info.links.http_url.clone();
        }
        for b in layout.blocks_on_page(page_idx) {
            let Some(data_type) = b.block_type.data_type() else {
                continue;
            };
            let order = page.blocks.len() as u32;
            let mut rec = BlockRecord::new(data_type, b.content.clone(), order);
            rec.markdown_url = b.links.markdown_url.clone();
            rec.file_url = b.links.file_url.clone();
            rec.relative_path = b.links.relative_path.clone();
            rec.http_url = b.links.http_url.clone();
            let path = owners
                .get(&b.id)
                .ok_or_else(|| Error::Precondition(format!("block {} has no heading node", b.id)))?;
            rec.set_heading_path(path);
            ids.insert(b.id.clone(), StructuredDocument::block_id(page_idx, order));
            page.blocks.push(rec);
        }
        pages.push(page);
    }
    let tree = HeadingTree {
        roots: aligned
            .tree
            .roots
            .iter()
            .map(|r| remap_tree(r, &ids))
            .collect::<Result<_>>()?,
    };
    Ok(StructuredDocument {
        metadata: layout.metadata.clone(),
        pages,
        tree,
    })
}

/// Providers and the model client for one run.
pub struct Engine {
    pub cfg: PipelineConfig,
    pub client: ModelClient,
    scorer: Box<dyn SuccessionScorer>,
    embedder: Box<dyn EmbeddingProvider>,
    labeler: Box<dyn LabelProvider>,
    instruction: String,
}

impl Engine {
    pub fn new(cfg: PipelineConfig) -> Result<Self> {
        let client = ModelClient::from_config(&cfg.client_config()?)?;
        Self::with_client(cfg, client)
    }

    pub fn with_client(cfg: PipelineConfig, client: ModelClient) -> Result<Self> {
        cfg.validate()?;
        Ok(Engine {
            scorer: scorer_from_spec(&cfg.scorer)?,
            embedder: embedding::provider_from_spec(&cfg.embedder, cfg.embedding_dim)?,
            labeler: labeling::provider::provider_from_spec(&cfg.label_provider, cfg.embedding_dim)?,
            instruction: cfg.instruction_text()?,
            client,
            cfg,
        })
    }

    pub fn order(&self, doc: &LayoutDocument) -> Result<(LayoutDocument, OrderStats)> {
        let out = order_blocks(&doc.blocks, self.scorer.as_ref(), self.embedder.as_ref(), self.cfg.tau)?;
        let mut ordered = doc.clone();
        ordered.blocks = out.blocks;
        Ok((
            ordered,
            OrderStats {
                edges: out.edge_count,
                removed_edges: out.removed_edges,
            },
        ))
    }

    pub fn toc(&self, doc: &LayoutDocument, asset_dir: Option<&Path>) -> Result<TocOutcome> {
        Ok(extract_toc(doc, self.cfg.toc_mode()?, &self.client, asset_dir))
    }

    pub fn align(&self, ordered: LayoutDocument, toc: TocTree) -> Result<AlignedDocument> {
        let out = align_document(&toc, &ordered.blocks, &self.client, &self.cfg.align_config())?;
        Ok(AlignedDocument {
            layout: ordered,
            toc,
            tree: out.tree,
            matches: out.matches,
            unresolved: out.unresolved,
            notes: out.notes,
        })
    }

    pub fn narrate(&self, aligned: &mut AlignedDocument, asset_dir: Option<&Path>) -> Result<NarrationReport> {
        narrate_document(
            &mut aligned.layout.blocks,
            &aligned.tree,
            &self.client,
            self.cfg.radius,
            &self.instruction,
            asset_dir,
        )
    }

    pub fn label(&self, aligned: &AlignedDocument) -> Result<StructuredDocument> {
        let mut doc = to_structured(aligned)?;
        label_document(&mut doc, self.labeler.as_ref(), self.cfg.theta, LabelHierarchy::builtin())?;
        Ok(doc)
    }

    /// All stages on one layout file. Page images referenced by the input
    /// are resolved against the file's directory.
    pub fn process_file(&self, path: &Path) -> Result<(StructuredDocument, AlignedDocument, Diagnostics)> {
        let raw = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        let asset_dir = path.parent();
        let mut d = Diagnostics {
            report: report_stem(path),
            ..Default::default()
        };
        let mut timed = |name: &str, t: Instant| {
            d.timings_ms.insert(name.to_string(), t.elapsed().as_secs_f64() * 1e3);
        };

        let t = Instant::now();
        let doc = ingest_layout(&raw)?;
        timed("ingest", t);
        let t = Instant::now();
        let (ordered, order_stats) = self.order(&doc)?;
        timed("order", t);
        let t = Instant::now();
        let toc = self.toc(&ordered, asset_dir)?;
        timed("toc", t);
        let t = Instant::now();
        let mut aligned = self.align(ordered, toc.tree)?;
        timed("align", t);
        let t = Instant::now();
        let narration = self.narrate(&mut aligned, asset_dir)?;
        timed("narrate", t);
        let t = Instant::now();
        let structured = self.label(&aligned)?;
        timed("label", t);

        d.blocks = doc.blocks.len();
        d.dropped_furniture = doc.dropped_furniture;
        d.order = order_stats;
        d.toc_source = serde_json::to_value(aligned.toc.source)?.as_str().unwrap_or_default().to_string();
        d.toc_pages = aligned.toc.pages.clone();
        d.toc_entries = aligned.toc.entries.len();
        for stage in [MatchStage::Exact, MatchStage::Fuzzy, MatchStage::Containment, MatchStage::Inserted] {
            let name = serde_json::to_value(stage)?.as_str().unwrap_or_default().to_string();
            d.match_counts
                .insert(name, aligned.matches.iter().filter(|m| m.stage == stage).count());
        }
        d.unresolved = aligned
            .unresolved
            .iter()
            .map(|&i| aligned.toc.entries[i].title.clone())
            .collect();
        d.notes = toc.notes;
        d.notes.extend(aligned.notes.iter().cloned());
        d.notes.extend(narration.notes.iter().cloned());
        d.narration = narration;
        Ok((structured, aligned, d))
    }
}

pub(crate) fn report_stem(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

/// Output file name for a report: `<stock_code>-<report_year>.json`, or the
/// input file name when either is missing.
pub fn output_name(doc: &StructuredDocument, input: &Path) -> String {
    doc.metadata
        .output_file_name()
        .unwrap_or_else(|| format!("{}.json", report_stem(input)))
}

/// `*.json` files directly inside `dir`, sorted by name; a file is returned as is.
pub fn list_inputs(input: &Path) -> Result<Vec<PathBuf>> {
    if input.is_file() {
        return Ok(vec![input.to_path_buf()]);
    }
    let entries = std::fs::read_dir(input).map_err(|e| Error::io(input, e))?;
    let mut files: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.extension().is_some_and(|x| x == "json"))
        .collect();
    files.sort();
    Ok(files)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub outputs: Vec<PathBuf>,
    pub failures: Vec<(PathBuf, String)>,
}

impl RunSummary {
    pub fn ok(&self) -> bool {
        self.failures.is_empty()
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    write_atomic(path, &bytes)
}

/// Runs every report under `input` and writes `<name>.json` to `output`,
/// with `diagnostics/<name>.json` and `toc/<name>.json` beside it. A failing
/// report is recorded and never stops the others.
pub fn run_pipeline(engine: &Engine, input: &Path, output: &Path) -> Result<RunSummary> {
    let inputs = list_inputs(input)?;
    if inputs.is_empty() {
        log::warn!("no input files under {}", input.display());
        return Ok(RunSummary::default());
    }
    for sub in ["", "diagnostics", "toc"] {
        let dir = output.join(sub);
        std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(engine.cfg.jobs)
        .build()
        .map_err(|e| Error::Config(format!("worker pool: {e}")))?;
    let results: Vec<(PathBuf, Result<PathBuf>)> = pool.install(|| {
        inputs
            .par_iter()
            .map(|path| {
                let r = (|| {
                    let (doc, aligned, diag) = engine.process_file(path)?;
                    let name = output_name(&doc, path);
                    let out = output.join(&name);
                    write_atomic(&out, &export_structured(&doc)?)?;
                    write_json(&output.join("diagnostics").join(&name), &diag)?;
                    write_json(&output.join("toc").join(&name), &aligned.toc)?;
                    Ok(out)
                })();
                (path.clone(), r)
            })
            .collect()
    });
    let mut summary = RunSummary::default();
    for (path, r) in results {
        match r {
            Ok(out) => {
                log::info!("{} -> {}", path.display(), out.display());
                summary.outputs.push(out);
            }
            Err(e) => {
                log::error!("{}: {e}", path.display());
                summary.failures.push((path, e.to_string()));
            }
        }
    }
    Ok(summary)
}
