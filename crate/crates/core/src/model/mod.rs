//! Document data model shared by every stage.
//!
//! Layout input arrives as [`LayoutDocument`] (one [`ContentBlock`] per layout
//! element, coordinates normalized to the page). Later stages produce a
//! [`StructuredDocument`], the three-level document/page/block record that is
//! exported as JSON.

mod ingest;
mod schema;
mod tree;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize};

use crate::error::{Error, Result};

pub use ingest::ingest_layout;
pub use schema::{
    export_structured, import_structured, import_structured_verbose, BlockRecord, PageRecord,
    StructuredDocument, BLOCK_FIELDS, DOCUMENT_FIELDS, PAGE_FIELDS,
};
pub use tree::{HeadingNode, HeadingOrigin, HeadingTree, MAX_HEADING_DEPTH};

/// Axis-aligned box in page-normalized coordinates. Origin is the top-left
/// corner and `y` grows downward.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl BoundingBox {
    pub fn new(x0: f64, y0: f64, x1: f64, y1: f64) -> Result<Self> {
        let b = BoundingBox { x0, y0, x1, y1 };
        b.validate().map_err(Error::Validation)?;
        Ok(b)
    }

    pub(crate) fn validate(&self) -> std::result::Result<(), String> {
        let coords = [self.x0, self.y0, self.x1, self.y1];
        if coords.iter().any(|c| !c.is_finite() || *c < 0.0 || *c > 1.0) {
            return Err(format!(
                "bbox [{}, {}, {}, {}] outside [0,1]",
                self.x0, self.y0, self.x1, self.y1
            ));
        }
        if self.x0 > self.x1 {
            return Err(format!("bbox x0 {} > x1 {}", self.x0, self.x1));
        }
        if self.y0 > self.y1 {
            return Err(format!("bbox y0 {} > y1 {}", self.y0, self.y1));
        }
        Ok(())
    }

    pub fn width(&self) -> f64 {
        self.x1 - self.x0
    }

    pub fn height(&self) -> f64 {
        self.y1 - self.y0
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn center(&self) -> (f64, f64) {
        ((self.x0 + self.x1) / 2.0, (self.y0 + self.y1) / 2.0)
    }

    pub fn intersection_area(&self, other: &BoundingBox) -> f64 {
        let w = (self.x1.min(other.x1) - self.x0.max(other.x0)).max(0.0);
        let h = (self.y1.min(other.y1) - self.y0.max(other.y0)).max(0.0);
        w * h
    }

    /// Horizontal overlap divided by the wider of the two widths, so a
    /// full-width block is not "in the same column" as half-width blocks.
    pub fn x_overlap_ratio(&self, other: &BoundingBox) -> f64 {
        let overlap = (self.x1.min(other.x1) - self.x0.max(other.x0)).max(0.0);
        let wide = self.width().max(other.width());
        if wide <= 0.0 {
            // two zero-width boxes overlap iff they sit at the same x
            return if self.x0 == other.x0 { 1.0 } else { 0.0 };
        }
        (overlap / wide).min(1.0)
    }
}

/// Layout element type. Closed vocabulary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BlockType {
    Text,
    Title,
    Table,
    Image,
    Caption,
    Header,
    Footer,
    Toc,
}

impl BlockType {
    pub const ALL: [BlockType; 8] = [
        BlockType::Text,
        BlockType::Title,
        BlockType::Table,
        BlockType::Image,
        BlockType::Caption,
        BlockType::Header,
        BlockType::Footer,
        BlockType::Toc,
    ];

    pub const COUNT: usize = Self::ALL.len();

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            BlockType::Text => "text",
            BlockType::Title => "title",
            BlockType::Table => "table",
            BlockType::Image => "image",
            BlockType::Caption => "caption",
            BlockType::Header => "header",
            BlockType::Footer => "footer",
            BlockType::Toc => "toc",
        }
    }

    /// Projection onto the output `data_type` column. Headers and footers
    /// have no output representation.
    pub fn data_type(self) -> Option<DataType> {
        match self {
            BlockType::Text | BlockType::Title | BlockType::Caption | BlockType::Toc => {
                Some(DataType::Text)
            }
            BlockType::Table => Some(DataType::Table),
            BlockType::Image => Some(DataType::Image),
            BlockType::Header | BlockType::Footer => None,
        }
    }

    pub fn is_page_furniture(self) -> bool {
        matches!(self, BlockType::Header | BlockType::Footer)
    }
}

impl FromStr for BlockType {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        BlockType::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| format!("unknown block type `{s}`"))
    }
}

impl fmt::Display for BlockType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Output `data_type` column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DataType {
    Text,
    Table,
    Image,
}

impl DataType {
    pub fn as_str(self) -> &'static str {
        match self {
            DataType::Text => "text",
            DataType::Table => "table",
            DataType::Image => "image",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BlockId(pub String);

impl BlockId {
    pub fn new(id: impl Into<String>) -> Self {
        BlockId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for BlockId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for BlockId {
    fn from(s: &str) -> Self {
        BlockId(s.to_string())
    }
}

/// Visual resource links carried by table and image blocks.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ResourceLinks {
    pub markdown_url: String,
    pub file_url: String,
    pub relative_path: String,
    pub http_url: String,
}

/// One layout element.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContentBlock {
    pub id: BlockId,
    /// Text payload, pipe-delimited table rows, or an image path placeholder.
    pub content: String,
    pub bbox: BoundingBox,
    pub block_type: BlockType,
    pub page_idx: u32,
    #[serde(default)]
    pub links: ResourceLinks,
}

impl ContentBlock {
    pub fn new(
        id: impl Into<String>,
        content: impl Into<String>,
        bbox: BoundingBox,
        block_type: BlockType,
        page_idx: u32,
    ) -> Self {
        ContentBlock {
            id: BlockId::new(id),
            content: content.into(),
            bbox,
            block_type,
            page_idx,
            links: ResourceLinks::default(),
        }
    }

    /// Raster key used for deterministic fallbacks: page, then top edge, then left edge.
    pub fn raster_cmp(&self, other: &ContentBlock) -> std::cmp::Ordering {
        self.page_idx
            .cmp(&other.page_idx)
            .then(self.bbox.y0.total_cmp(&other.bbox.y0))
            .then(self.bbox.x0.total_cmp(&other.bbox.x0))
            .then_with(|| self.id.cmp(&other.id))
    }

    pub(crate) fn validate(&self) -> std::result::Result<(), String> {
        self.bbox.validate()?;
        if self.page_idx < 1 {
            return Err("page_idx must be >= 1".into());
        }
        if self.block_type == BlockType::Image && self.content.trim().is_empty() {
            return Err("image block without a path placeholder".into());
        }
        Ok(())
    }
}

/// Document-level fields of the output record.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct DocumentMetadata {
    pub stock_code: String,
    pub company_name: String,
    #[serde(deserialize_with = "string_or_number")]
    pub report_year: String,
    pub report_title: String,
    pub report_type: String,
    pub market: String,
    pub original_filename: String,
}

impl DocumentMetadata {
    /// `<stock_code>-<report_year>.json`, or `None` when either part is empty.
    pub fn output_file_name(&self) -> Option<String> {
        if self.stock_code.is_empty() || self.report_year.is_empty() {
            return None;
        }
        Some(format!("{}-{}.json", self.stock_code, self.report_year))
    }
}

fn string_or_number<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<String, D::Error> {
    let v = serde_json::Value::deserialize(d)?;
    Ok(match v {
        serde_json::Value::String(s) => s,
        serde_json::Value::Number(n) => n.to_string(),
        serde_json::Value::Null => String::new(),
        other => return Err(serde::de::Error::custom(format!("expected string, got {other}"))),
    })
}

/// Page-level links.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct PageLinks {
    pub markdown_url: String,
    pub file_url: String,
    pub relative_path: String,
    pub http_url: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PageInfo {
    pub page_idx: u32,
    #[serde(default)]
    pub width: Option<f64>,
    #[serde(default)]
    pub height: Option<f64>,
    #[serde(default)]
    pub links: PageLinks,
}

/// Ingested layout: metadata, page records and the flat block list.
///
/// This is also the intermediate artifact written by the `ingest` and
/// `order` stages; after ordering, `blocks` is in resolved reading order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayoutDocument {
    pub metadata: DocumentMetadata,
    pub pages: Vec<PageInfo>,
    pub blocks: Vec<ContentBlock>,
    /// Header/footer blocks removed during ingestion.
    #[serde(default)]
    pub dropped_furniture: usize,
}

impl LayoutDocument {
    /// Blocks grouped by page, in their current order.
    pub fn blocks_on_page(&self, page_idx: u32) -> impl Iterator<Item = &ContentBlock> {
        self.blocks.iter().filter(move |b| b.page_idx == page_idx)
    }

    pub fn page_indices(&self) -> Vec<u32> {
        let mut pages: Vec<u32> = self.pages.iter().map(|p| p.page_idx).collect();
        for b in &self.blocks {
            if !pages.contains(&b.page_idx) {
                pages.push(b.page_idx);
            }
        }
        pages.sort_unstable();
        pages.dedup();
        pages
    }

    /// Checks id uniqueness and per-block invariants.
    pub fn validate(&self) -> Result<()> {
        let mut seen = std::collections::HashSet::new();
        for (index, b) in self.blocks.iter().enumerate() {
            b.validate()
                .map_err(|message| Error::BlockValidation { index, message })?;
            if !seen.insert(&b.id) {
                return Err(Error::BlockValidation {
                    index,
                    message: format!("duplicate block id `{}`", b.id),
                });
            }
        }
        Ok(())
    }
}
