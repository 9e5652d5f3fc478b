//! Table-of-contents extraction: page detection, region-aware prompting with a
//! deterministic fallback parser, and extraction metrics.

mod detect;
mod fallback;
mod metrics;
mod rap;

pub use detect::{cluster_regions, find_toc_pages, is_toc_page, toc_line, REGION_GAP, TOC_TITLES};
pub use fallback::fallback_parse;
pub use metrics::{toc_metrics, TocScores};
pub use rap::{build_rap_prompt, parse_rap_response, RAP_TEMPLATE, RAP_TEMPLATE_ID};

use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::llm::{Attachment, ModelClient, ModelRequest};
use crate::model::{ContentBlock, LayoutDocument, MAX_HEADING_DEPTH};
use crate::text::normalize_title;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TocEntry {
    pub title: String,
    pub level: u8,
    pub page_hint: Option<u32>,
    pub region_id: u32,
    pub line_span: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TocSource {
    Rap,
    Fallback,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TocTree {
    pub entries: Vec<TocEntry>,
    pub source: TocSource,
    /// Pages the entries were read from.
    #[serde(default)]
    pub pages: Vec<u32>,
}

impl TocTree {
    /// Drops entries whose title normalizes to nothing, stably sorts by
    /// region, clamps levels to 1..=4 and forbids skipping down a level.
    pub fn new(entries: Vec<TocEntry>, source: TocSource, pages: Vec<u32>) -> Self {
        let mut entries: Vec<TocEntry> = entries
            .into_iter()
            .filter(|e| {
                let keep = !normalize_title(&e.title).is_empty();
                if !keep {
                    log::warn!("dropping ToC entry with empty title {:?}", e.title);
                }
                keep
            })
            .collect();
        entries.sort_by_key(|e| e.region_id);
        let mut prev = 0u8;
        for e in &mut entries {
            let clamped = e.level.clamp(1, MAX_HEADING_DEPTH).min(prev + 1);
            if clamped != e.level {
                log::warn!("ToC entry {:?}: level {} clamped to {clamped}", e.title, e.level);
            }
            e.level = clamped;
            e.line_span = e.line_span.max(1);
            prev = clamped;
        }
        TocTree {
            entries,
            source,
            pages,
        }
    }

    pub fn empty(source: TocSource) -> Self {
        TocTree {
            entries: Vec::new(),
            source,
            pages: Vec::new(),
        }
    }

    /// Checks the invariants `new` establishes.
    pub fn validate(&self) -> Result<()> {
        let mut prev = 0u8;
        let mut region = 0u32;
        for (k, e) in self.entries.iter().enumerate() {
            let bad = |m: &str| Error::Invariant {
                invariant: "toc-entry",
                detail: format!("entry {k} ({:?}): {m}", e.title),
            };
            if normalize_title(&e.title).is_empty() {
                return Err(bad("empty title"));
            }
            if e.level < 1 || e.level > MAX_HEADING_DEPTH || e.level > prev + 1 {
                return Err(bad("level out of sequence"));
            }
            if e.line_span < 1 {
                return Err(bad("zero line span"));
            }
            if e.region_id < region {
                return Err(bad("regions out of order"));
            }
            prev = e.level;
            region = e.region_id;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TocMode {
    Rap,
    Fallback,
}

impl FromStr for TocMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rap" => Ok(TocMode::Rap),
            "fallback" => Ok(TocMode::Fallback),
            _ => Err(Error::Config(format!("unknown ToC mode `{s}` (rap|fallback)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TocOutcome {
    pub tree: TocTree,
    pub notes: Vec<String>,
}

const RETRY_SUFFIX: &str =
    "\n\nYour previous answer could not be parsed. Reply with the JSON array only, exactly as specified above.";

fn page_blocks(doc: &LayoutDocument, page: u32) -> Vec<&ContentBlock> {
    let mut blocks: Vec<&ContentBlock> = doc.blocks_on_page(page).collect();
    blocks.sort_by(|a, b| a.raster_cmp(b));
    blocks
}

fn rap_page(
    doc: &LayoutDocument,
    page: u32,
    client: &ModelClient,
    asset_dir: Option<&Path>,
) -> Result<Vec<TocEntry>> {
    let blocks = page_blocks(doc, page);
    let prompt = build_rap_prompt(page, &blocks);
    let attachments: Vec<Attachment> = doc
        .pages
        .iter()
        .find(|p| p.page_idx == page)
        .map(|p| p.links.file_url.as_str())
        .filter(|u| !u.is_empty())
        .map(|u| Attachment::load(u, asset_dir))
        .into_iter()
        .collect();
    let first = ModelRequest::new(RAP_TEMPLATE_ID, prompt.clone(), attachments.clone());
    let attempt = client.call(&first).and_then(|raw| parse_rap_response(&raw));
    match attempt {
        Ok(entries) => Ok(entries),
        Err(e @ Error::ModelResponse(_)) => {
            log::warn!("RAP response for page {page} unusable ({e}), retrying");
            let retry = ModelRequest::new(RAP_TEMPLATE_ID, prompt + RETRY_SUFFIX, attachments);
            client.call(&retry).and_then(|raw| parse_rap_response(&raw))
        }
        Err(e) => Err(e),
    }
}

/// Extracts the ToC of `doc`. In RAP mode a page whose model answer is
/// unavailable or unparseable (after one retry) is parsed by the fallback.
/// `asset_dir` resolves page-image references for attachment.
pub fn extract_toc(
    doc: &LayoutDocument,
    mode: TocMode,
    client: &ModelClient,
    asset_dir: Option<&Path>,
) -> TocOutcome {
    let pages = find_toc_pages(doc);
    let mut notes = Vec::new();
    if pages.is_empty() {
        notes.push("no ToC page detected".to_string());
        return TocOutcome {
            tree: TocTree::empty(TocSource::Fallback),
            notes,
        };
    }
    let mut entries = Vec::new();
    let mut used_fallback = mode == TocMode::Fallback;
    let mut region_base = 0u32;
    for &page in &pages {
        let mut page_entries = match mode {
            TocMode::Fallback => fallback_parse(&page_blocks(doc, page)),
            TocMode::Rap => match rap_page(doc, page, client, asset_dir) {
                Ok(e) => e,
                Err(e) => {
                    notes.push(format!("page {page}: RAP failed ({e}); fallback parser used"));
                    used_fallback = true;
                    fallback_parse(&page_blocks(doc, page))
                }
            },
        };
        page_entries.sort_by_key(|e| e.region_id);
        let max_region = page_entries.iter().map(|e| e.region_id).max();
        for e in &mut page_entries {
            e.region_id += region_base;
        }
        if let Some(m) = max_region {
            region_base += m + 1;
        }
        entries.extend(page_entries);
    }
    let source = if used_fallback {
        TocSource::Fallback
    } else {
        TocSource::Rap
    };
    TocOutcome {
        tree: TocTree::new(entries, source, pages),
        notes,
    }
}
