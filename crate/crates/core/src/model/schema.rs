//! Three-level (document / page / block) output record and its canonical JSON form.

use std::collections::HashSet;

use serde::Serialize;
use serde_json::{Map, Value};

use super::tree::path_columns;
use super::{BlockId, DataType, DocumentMetadata, HeadingTree};
use crate::error::{Error, Result};
use crate::labeling::{LabelHierarchy, SENTIMENT_LABELS};

pub const DOCUMENT_FIELDS: [&str; 8] = [
    "stock_code",
    "company_name",
    "report_year",
    "report_title",
    "report_type",
    "market",
    "original_filename",
    "pages",
];

pub const PAGE_FIELDS: [&str; 6] = [
    "page_idx",
    "page_markdown_url",
    "page_file_url",
    "page_relative_path",
    "page_http_url",
    "blocks",
];

pub const BLOCK_FIELDS: [&str; 14] = [
    "h1",
    "h2",
    "h3",
    "h4",
    "data_type",
    "data",
    "markdown_url",
    "file_url",
    "relative_path",
    "http_url",
    "reading_order",
    "esg_category_label",
    "gri_label",
    "sentiment_label",
];

pub const ESG_CATEGORIES: [&str; 4] = ["E", "S", "G", "N"];

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BlockRecord {
    pub h1: String,
    pub h2: String,
    pub h3: String,
    pub h4: String,
    pub data_type: DataType,
    pub data: String,
    pub markdown_url: String,
    pub file_url: String,
    pub relative_path: String,
    pub http_url: String,
    pub reading_order: u32,
    pub esg_category_label: String,
    pub gri_label: String,
    pub sentiment_label: String,
}

impl BlockRecord {
    pub fn new(data_type: DataType, data: impl Into<String>, reading_order: u32) -> Self {
        BlockRecord {
            h1: String::new(),
            h2: String::new(),
            h3: String::new(),
            h4: String::new(),
            data_type,
            data: data.into(),
            markdown_url: String::new(),
            file_url: String::new(),
            relative_path: String::new(),
            http_url: String::new(),
            reading_order,
            esg_category_label: String::new(),
            gri_label: String::new(),
            sentiment_label: String::new(),
        }
    }

    pub fn heading_columns(&self) -> [String; 4] {
        [
            self.h1.clone(),
            self.h2.clone(),
            self.h3.clone(),
            self.h4.clone(),
        ]
    }

    /// Heading path with trailing empty levels removed.
    pub fn heading_path(&self) -> Vec<String> {
        let cols = self.heading_columns();
        let depth = cols.iter().rposition(|c| !c.is_empty()).map_or(0, |p| p + 1);
        cols[..depth].to_vec()
    }

    pub fn set_heading_path(&mut self, path: &[String]) {
        let [h1, h2, h3, h4] = path_columns(path);
        self.h1 = h1;
        self.h2 = h2;
        self.h3 = h3;
        self.h4 = h4;
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PageRecord {
    pub page_idx: u32,
    pub page_markdown_url: String,
    pub page_file_url: String,
    pub page_relative_path: String,
    pub page_http_url: String,
    pub blocks: Vec<BlockRecord>,
}

impl PageRecord {
    pub fn new(page_idx: u32) -> Self {
        PageRecord {
            page_idx,
            page_markdown_url: String::new(),
            page_file_url: String::new(),
            page_relative_path: String::new(),
            page_http_url: String::new(),
            blocks: Vec::new(),
        }
    }
}

/// A fully structured report: metadata, pages with reading-ordered blocks,
/// and the heading tree that owns every block.
///
/// Blocks are addressed as `p<page_idx>-r<reading_order>` inside the tree.
#[derive(Debug, Clone, PartialEq)]
pub struct StructuredDocument {
    pub metadata: DocumentMetadata,
    pub pages: Vec<PageRecord>,
    pub tree: HeadingTree,
}

#[derive(Serialize)]
struct WireDocument<'a> {
    stock_code: &'a str,
    company_name: &'a str,
    report_year: &'a str,
    report_title: &'a str,
    report_type: &'a str,
    market: &'a str,
    original_filename: &'a str,
    pages: &'a [PageRecord],
}

impl StructuredDocument {
    pub fn block_id(page_idx: u32, reading_order: u32) -> BlockId {
        BlockId(format!("p{page_idx}-r{reading_order}"))
    }

    /// All blocks in document order with their tree ids.
    pub fn blocks(&self) -> impl Iterator<Item = (BlockId, &BlockRecord)> {
        self.pages.iter().flat_map(|p| {
            p.blocks
                .iter()
                .map(move |b| (Self::block_id(p.page_idx, b.reading_order), b))
        })
    }

    pub fn blocks_mut(&mut self) -> impl Iterator<Item = &mut BlockRecord> {
        self.pages.iter_mut().flat_map(|p| p.blocks.iter_mut())
    }

    pub fn block_count(&self) -> usize {
        self.pages.iter().map(|p| p.blocks.len()).sum()
    }

    /// Rebuilds the heading tree from the h-columns, dropping the alignment
    /// origin of each node. Equal to what `import_structured` yields.
    pub fn rebuild_tree(&mut self) -> Result<()> {
        let rows: Vec<_> = self
            .blocks()
            .map(|(id, b)| (id, b.heading_columns()))
            .collect();
        self.tree = HeadingTree::from_paths(rows).map_err(|detail| Error::Invariant {
            invariant: "heading-columns",
            detail,
        })?;
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.validate_with(LabelHierarchy::builtin())
    }

    /// Checks every schema invariant, naming the first one that fails.
    pub fn validate_with(&self, hierarchy: &LabelHierarchy) -> Result<()> {
        let mut last_page = 0u32;
        for page in &self.pages {
            if page.page_idx < 1 || page.page_idx <= last_page {
                return Err(Error::Invariant {
                    invariant: "page-index",
                    detail: format!("page_idx {} after {}", page.page_idx, last_page),
                });
            }
            last_page = page.page_idx;
            for (i, b) in page.blocks.iter().enumerate() {
                if b.reading_order as usize != i {
                    return Err(Error::Invariant {
                        invariant: "reading-order",
                        detail: format!(
                            "page {}: block at position {} has reading_order {}",
                            page.page_idx, i, b.reading_order
                        ),
                    });
                }
                let cols = b.heading_columns();
                let depth = b.heading_path().len();
                if cols[..depth].iter().any(String::is_empty) {
                    return Err(Error::Invariant {
                        invariant: "heading-columns",
                        detail: format!("page {} block {}: empty level inside path", page.page_idx, i),
                    });
                }
                check_label(
                    "esg-category-label",
                    &b.esg_category_label,
                    ESG_CATEGORIES.contains(&b.esg_category_label.as_str()),
                )?;
                check_label(
                    "gri-label",
                    &b.gri_label,
                    hierarchy.gri_by_name(&b.gri_label).is_some(),
                )?;
                check_label(
                    "sentiment-label",
                    &b.sentiment_label,
                    SENTIMENT_LABELS.contains(&b.sentiment_label.as_str()),
                )?;
            }
        }

        let owners = self.tree.owner_paths();
        if self.tree.block_count() != self.block_count() || owners.len() != self.block_count() {
            return Err(Error::Invariant {
                invariant: "tree-columns",
                detail: format!(
                    "tree owns {} blocks, document has {}",
                    self.tree.block_count(),
                    self.block_count()
                ),
            });
        }
        for (id, b) in self.blocks() {
            let Some(path) = owners.get(&id) else {
                return Err(Error::Invariant {
                    invariant: "tree-columns",
                    detail: format!("block {id} has no heading node"),
                });
            };
            if path_columns(path) != b.heading_columns() {
                return Err(Error::Invariant {
                    invariant: "tree-columns",
                    detail: format!("block {id}: columns {:?} but node path {:?}", b.heading_columns(), path),
                });
            }
        }
        Ok(())
    }
}

fn check_label(invariant: &'static str, value: &str, known: bool) -> Result<()> {
    if value.is_empty() || known {
        Ok(())
    } else {
        Err(Error::Invariant {
            invariant,
            detail: format!("unknown label `{value}`"),
        })
    }
}

/// Canonical JSON: fixed key order, two-space indent, LF endings, trailing newline.
pub fn export_structured(doc: &StructuredDocument) -> Result<Vec<u8>> {
    doc.validate()?;
    let m = &doc.metadata;
    let wire = WireDocument {
        stock_code: &m.stock_code,
        company_name: &m.company_name,
        report_year: &m.report_year,
        report_title: &m.report_title,
        report_type: &m.report_type,
        market: &m.market,
        original_filename: &m.original_filename,
        pages: &doc.pages,
    };
    let mut out = serde_json::to_vec_pretty(&wire)?;
    out.push(b'\n');
    Ok(out)
}

/// Parses an exported record. Unknown fields are logged and ignored.
pub fn import_structured(raw: &[u8]) -> Result<StructuredDocument> {
    let (doc, warnings) = import_structured_verbose(raw)?;
    for w in warnings {
        log::warn!("{w}");
    }
    Ok(doc)
}

/// Like [`import_structured`] but returns the unknown-field warnings.
pub fn import_structured_verbose(raw: &[u8]) -> Result<(StructuredDocument, Vec<String>)> {
    let value: Value = serde_json::from_slice(raw).map_err(|e| Error::ingest(raw, &e))?;
    let mut warnings = Vec::new();
    let obj = as_object(&value, "document")?;
    note_unknown(obj, &DOCUMENT_FIELDS, "document", &mut warnings);

    let metadata = DocumentMetadata {
        stock_code: get_str(obj, "stock_code")?,
        company_name: get_str(obj, "company_name")?,
        report_year: get_str(obj, "report_year")?,
        report_title: get_str(obj, "report_title")?,
        report_type: get_str(obj, "report_type")?,
        market: get_str(obj, "market")?,
        original_filename: get_str(obj, "original_filename")?,
    };

    let mut pages = Vec::new();
    for (pi, pv) in get_array(obj, "pages")?.iter().enumerate() {
        let ctx = format!("pages[{pi}]");
        let po = as_object(pv, &ctx)?;
        note_unknown(po, &PAGE_FIELDS, &ctx, &mut warnings);
        let page_idx = get_u32(po, "page_idx")?;
        let mut blocks = Vec::new();
        for (bi, bv) in get_array(po, "blocks")?.iter().enumerate() {
            let ctx = format!("pages[{pi}].blocks[{bi}]");
            let bo = as_object(bv, &ctx)?;
            note_unknown(bo, &BLOCK_FIELDS, &ctx, &mut warnings);
            let data_type = match get_str(bo, "data_type")?.as_str() {
                "text" => DataType::Text,
                "table" => DataType::Table,
                "image" => DataType::Image,
                other => {
                    return Err(Error::Validation(format!(
                        "{ctx}: unknown data_type `{other}`"
                    )))
                }
            };
            blocks.push(BlockRecord {
                h1: get_str(bo, "h1")?,
                h2: get_str(bo, "h2")?,
                h3: get_str(bo, "h3")?,
                h4: get_str(bo, "h4")?,
                data_type,
                data: get_str(bo, "data")?,
                markdown_url: get_str(bo, "markdown_url")?,
                file_url: get_str(bo, "file_url")?,
                relative_path: get_str(bo, "relative_path")?,
                http_url: get_str(bo, "http_url")?,
                reading_order: get_u32(bo, "reading_order")?,
                esg_category_label: get_str(bo, "esg_category_label")?,
                gri_label: get_str(bo, "gri_label")?,
                sentiment_label: get_str(bo, "sentiment_label")?,
            });
        }

        let orders: HashSet<u32> = blocks.iter().map(|b| b.reading_order).collect();
        let n = blocks.len() as u32;
        if orders.len() != blocks.len() || (0..n).any(|i| !orders.contains(&i)) {
            return Err(Error::Validation(format!(
                "page {page_idx}: reading_order is not a permutation of 0..{n}"
            )));
        }
        blocks.sort_by_key(|b| b.reading_order);

        pages.push(PageRecord {
            page_idx,
            page_markdown_url: get_str(po, "page_markdown_url")?,
            page_file_url: get_str(po, "page_file_url")?,
            page_relative_path: get_str(po, "page_relative_path")?,
            page_http_url: get_str(po, "page_http_url")?,
            blocks,
        });
    }

    let mut doc = StructuredDocument {
        metadata,
        pages,
        tree: HeadingTree::default(),
    };
    doc.rebuild_tree()?;
    doc.validate()?;
    Ok((doc, warnings))
}

fn as_object<'a>(v: &'a Value, ctx: &str) -> Result<&'a Map<String, Value>> {
    v.as_object()
        .ok_or_else(|| Error::Validation(format!("{ctx}: expected an object")))
}

fn note_unknown(obj: &Map<String, Value>, known: &[&str], ctx: &str, warnings: &mut Vec<String>) {
    for k in obj.keys() {
        if !known.contains(&k.as_str()) {
            warnings.push(format!("{ctx}: ignoring unknown field `{k}`"));
        }
    }
}

fn get<'a>(obj: &'a Map<String, Value>, key: &str) -> Result<&'a Value> {
    obj.get(key).ok_or_else(|| Error::MissingField(key.to_string()))
}

fn get_str(obj: &Map<String, Value>, key: &str) -> Result<String> {
    match get(obj, key)? {
        Value::String(s) => Ok(s.clone()),
        other => Err(Error::Validation(format!(
            "field `{key}` must be a string, got {other}"
        ))),
    }
}

fn get_u32(obj: &Map<String, Value>, key: &str) -> Result<u32> {
    get(obj, key)?
        .as_u64()
        .and_then(|v| u32::try_from(v).ok())
        .ok_or_else(|| Error::Validation(format!("field `{key}` must be a non-negative integer")))
}

fn get_array<'a>(obj: &'a Map<String, Value>, key: &str) -> Result<&'a Vec<Value>> {
    get(obj, key)?
        .as_array()
        .ok_or_else(|| Error::Validation(format!("field `{key}` must be an array")))
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn minimal_doc() -> StructuredDocument {
        let mut page = PageRecord::new(1);
        let mut b = BlockRecord::new(DataType::Text, "Our 2024 energy use fell.", 0);
        b.set_heading_path(&["Environment".to_string()]);
        page.blocks.push(b);
        let mut doc = StructuredDocument {
            metadata: DocumentMetadata {
                stock_code: "300001.SZ".into(),
                report_year: "2024".into(),
                ..Default::default()
            },
            pages: vec![page],
            tree: HeadingTree::default(),
        };
        doc.rebuild_tree().unwrap();
        doc
    }

    #[test]
    fn minimal_doc_exports_text_data_type() {
        let out = String::from_utf8(export_structured(&minimal_doc()).unwrap()).unwrap();
        assert!(out.contains("\"data_type\": \"text\""));
        assert!(out.ends_with("}\n"));
        assert!(!out.contains('\r'));
    }

    #[test]
    fn image_record_carries_link_fields() {
        let mut doc = minimal_doc();
        let mut img = BlockRecord::new(DataType::Image, "img/1.png", 1);
        img.markdown_url = "![](./temp_images/1.png)".into();
        img.file_url = "/mnt/data/1.png".into();
        img.http_url = "http://example.org/1.png".into();
        img.set_heading_path(&["Environment".to_string()]);
        doc.pages[0].blocks.push(img);
        doc.rebuild_tree().unwrap();
        let out = String::from_utf8(export_structured(&doc).unwrap()).unwrap();
        for key in ["\"markdown_url\": \"![](./temp_images/1.png)\"", "\"file_url\": \"/mnt/data/1.png\"", "\"http_url\": \"http://example.org/1.png\""] {
            assert!(out.contains(key), "missing {key}");
        }
    }

    #[test]
    fn round_trip_is_identity() {
        let doc = minimal_doc();
        let bytes = export_structured(&doc).unwrap();
        let back = import_structured(&bytes).unwrap();
        assert_eq!(back, doc);
        assert_eq!(export_structured(&back).unwrap(), bytes);
    }

    #[test]
    fn export_refuses_bad_labels() {
        let mut doc = minimal_doc();
        doc.pages[0].blocks[0].esg_category_label = "X".into();
        match export_structured(&doc) {
            Err(Error::Invariant { invariant, .. }) => assert_eq!(invariant, "esg-category-label"),
            other => panic!("{other:?}"),
        }
        let mut doc = minimal_doc();
        doc.pages[0].blocks[0].gri_label = "Vibes".into();
        assert!(matches!(export_structured(&doc), Err(Error::Invariant { invariant: "gri-label", .. })));
    }

    #[test]
    fn export_refuses_tree_mismatch() {
        let mut doc = minimal_doc();
        doc.pages[0].blocks[0].h1 = "Social".into();
        assert!(matches!(
            export_structured(&doc),
            Err(Error::Invariant { invariant: "tree-columns", .. })
        ));
    }

    #[test]
    fn import_rejects_non_contiguous_reading_order() {
        let doc = minimal_doc();
        let text = String::from_utf8(export_structured(&doc).unwrap()).unwrap();
        let broken = text.replace("\"reading_order\": 0", "\"reading_order\": 2");
        assert!(matches!(import_structured(broken.as_bytes()), Err(Error::Validation(_))));
    }

    #[test]
    fn import_warns_on_unknown_and_fails_on_missing() {
        let text = String::from_utf8(export_structured(&minimal_doc()).unwrap()).unwrap();
        let extra = text.replacen("\"market\"", "\"colour\": \"blue\",\n  \"market\"", 1);
        let (_, warnings) = import_structured_verbose(extra.as_bytes()).unwrap();
        assert_eq!(warnings.len(), 1);
        assert!(warnings[0].contains("colour"));

        let missing = text.replace("\"gri_label\": \"\",\n", "");
        match import_structured(missing.as_bytes()) {
            Err(Error::MissingField(f)) => assert_eq!(f, "gri_label"),
            other => panic!("{other:?}"),
        }
    }
}
