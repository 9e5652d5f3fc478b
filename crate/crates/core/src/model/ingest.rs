use serde::Deserialize;

use super::{
    BlockId, BlockType, BoundingBox, ContentBlock, DocumentMetadata, LayoutDocument, PageInfo,
    PageLinks, ResourceLinks,
};
use crate::error::{Error, Result};

#[derive(Deserialize)]
struct RawLayout {
    #[serde(default)]
    metadata: DocumentMetadata,
    #[serde(default)]
    pages: Vec<RawPage>,
}

#[derive(Deserialize)]
struct RawPage {
    page_idx: u32,
    #[serde(default)]
    width: Option<f64>,
    #[serde(default)]
    height: Option<f64>,
    #[serde(default)]
    image_urls: RawPageUrls,
    #[serde(default)]
    blocks: Vec<RawBlock>,
}

#[derive(Deserialize, Default)]
#[serde(default)]
struct RawPageUrls {
    #[serde(alias = "page_markdown_url")]
    markdown_url: String,
    #[serde(alias = "page_file_url")]
    file_url: String,
    #[serde(alias = "page_relative_path")]
    relative_path: String,
    #[serde(alias = "page_http_url")]
    http_url: String,
}

#[derive(Deserialize)]
struct RawBlock {
    #[serde(default)]
    content: String,
    bbox: [f64; 4],
    #[serde(rename = "type")]
    block_type: String,
    #[serde(default)]
    markdown_url: Option<String>,
    #[serde(default)]
    file_url: Option<String>,
    #[serde(default)]
    relative_path: Option<String>,
    #[serde(default)]
    http_url: Option<String>,
}

/// Parses the layout JSON input into validated, page-grouped blocks.
///
/// Pixel boxes are normalized with the page's `width`/`height`; pages without
/// dimensions are taken to be normalized already. Header and footer blocks are
/// validated and then dropped. Block ids are `p<page>-b<index on page>`.
pub fn ingest_layout(raw: &[u8]) -> Result<LayoutDocument> {
    let layout: RawLayout = serde_json::from_slice(raw).map_err(|e| Error::ingest(raw, &e))?;

    let mut pages = Vec::with_capacity(layout.pages.len());
    let mut blocks = Vec::new();
    let mut dropped = 0usize;
    let mut index = 0usize;
    let mut raw_pages = layout.pages;
    raw_pages.sort_by_key(|p| p.page_idx);

    for page in raw_pages {
        if page.page_idx < 1 {
            return Err(Error::Validation(format!(
                "page_idx must be >= 1, got {}",
                page.page_idx
            )));
        }
        if pages.iter().any(|p: &PageInfo| p.page_idx == page.page_idx) {
            return Err(Error::Validation(format!(
                "duplicate page_idx {}",
                page.page_idx
            )));
        }
        let (sx, sy) = match (page.width, page.height) {
            (Some(w), Some(h)) if w > 0.0 && h > 0.0 => (w, h),
            (None, None) => (1.0, 1.0),
            (w, h) => {
                return Err(Error::Validation(format!(
                    "page {}: invalid dimensions {:?} x {:?}",
                    page.page_idx, w, h
                )))
            }
        };

        for (pos, rb) in page.blocks.into_iter().enumerate() {
            let block_type: BlockType = rb
                .block_type
                .parse()
                .map_err(|message| Error::BlockValidation { index, message })?;
            let [x0, y0, x1, y1] = rb.bbox;
            let bbox = BoundingBox {
                x0: x0 / sx,
                y0: y0 / sy,
                x1: x1 / sx,
                y1: y1 / sy,
            };
            let mut block = ContentBlock {
                id: BlockId(format!("p{}-b{}", page.page_idx, pos)),
                content: rb.content,
                bbox,
                block_type,
                page_idx: page.page_idx,
                links: ResourceLinks::default(),
            };
            block
                .validate()
                .map_err(|message| Error::BlockValidation { index, message })?;
            block.links = block_links(&block, rb.markdown_url, rb.file_url, rb.relative_path, rb.http_url);
            index += 1;

            if block_type.is_page_furniture() {
                dropped += 1;
                continue;
            }
            blocks.push(block);
        }

        pages.push(PageInfo {
            page_idx: page.page_idx,
            width: page.width,
            height: page.height,
            links: PageLinks {
                markdown_url: page.image_urls.markdown_url,
                file_url: page.image_urls.file_url,
                relative_path: page.image_urls.relative_path,
                http_url: page.image_urls.http_url,
            },
        });
    }

    Ok(LayoutDocument {
        metadata: layout.metadata,
        pages,
        blocks,
        dropped_furniture: dropped,
    })
}

fn block_links(
    block: &ContentBlock,
    markdown_url: Option<String>,
    file_url: Option<String>,
    relative_path: Option<String>,
    http_url: Option<String>,
) -> ResourceLinks {
    let is_image = block.block_type == BlockType::Image;
    let file_url = file_url.unwrap_or_else(|| {
        if is_image {
            block.content.clone()
        } else {
            String::new()
        }
    });
    let relative_path = relative_path.unwrap_or_default();
    let markdown_url = markdown_url.unwrap_or_else(|| {
        let target = if !relative_path.is_empty() {
            relative_path.as_str()
        } else {
            file_url.as_str()
        };
        if target.is_empty() {
            String::new()
        } else {
            format!("![]({target})")
        }
    });
    ResourceLinks {
        markdown_url,
        file_url,
        relative_path,
        http_url: http_url.unwrap_or_default(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const TWO_PAGES: &str = r#"{
      "metadata": {"stock_code": "600000.SH", "report_year": 2023, "company_name": "Acme"},
      "pages": [
        {"page_idx": 2, "width": 1000, "height": 2000, "blocks": [
          {"content": "Energy", "bbox": [100, 100, 900, 200], "type": "title"},
          {"content": "img/2-1.png", "bbox": [100, 300, 900, 900], "type": "image"}
        ]},
        {"page_idx": 1, "width": 1000, "height": 2000, "blocks": [
          {"content": "Report", "bbox": [100, 100, 900, 200], "type": "title"},
          {"content": "Hello", "bbox": [100, 300, 900, 400], "type": "text"},
          {"content": "a|b\n1|2", "bbox": [100, 500, 900, 700], "type": "table"}
        ]}
      ]
    }"#;

    #[test]
    fn two_pages_five_blocks() {
        let doc = ingest_layout(TWO_PAGES.as_bytes()).unwrap();
        assert_eq!(doc.blocks.len(), 5);
        assert!(doc.blocks.iter().all(|b| b.page_idx == 1 || b.page_idx == 2));
        assert_eq!(doc.metadata.report_year, "2023");
        assert_eq!(doc.metadata.report_title, "");
        assert_eq!(doc.blocks[0].id.as_str(), "p1-b0");
        let img = doc.blocks.iter().find(|b| b.block_type == BlockType::Image).unwrap();
        assert_eq!(img.bbox, BoundingBox { x0: 0.1, y0: 0.15, x1: 0.9, y1: 0.45 });
        assert_eq!(img.links.file_url, "img/2-1.png");
        assert_eq!(img.links.markdown_url, "![](img/2-1.png)");
    }

    #[test]
    fn empty_block_list() {
        let doc = ingest_layout(br#"{"metadata": {}, "pages": []}"#).unwrap();
        assert!(doc.blocks.is_empty());
        let doc = ingest_layout(br#"{"pages": [{"page_idx": 1, "blocks": []}]}"#).unwrap();
        assert!(doc.blocks.is_empty());
        assert_eq!(doc.pages.len(), 1);
    }

    #[test]
    fn inverted_bbox_names_block_index() {
        let raw = br#"{"pages": [{"page_idx": 1, "blocks": [
            {"content": "ok", "bbox": [0.1, 0.1, 0.2, 0.2], "type": "text"},
            {"content": "bad", "bbox": [0.5, 0.1, 0.2, 0.2], "type": "text"}
        ]}]}"#;
        match ingest_layout(raw) {
            Err(Error::BlockValidation { index, .. }) => assert_eq!(index, 1),
            other => panic!("expected validation error, got {other:?}"),
        }
    }

    #[test]
    fn unknown_type_rejected() {
        let raw = br#"{"pages": [{"page_idx": 1, "blocks": [
            {"content": "x", "bbox": [0.1, 0.1, 0.2, 0.2], "type": "figure"}
        ]}]}"#;
        assert!(matches!(
            ingest_layout(raw),
            Err(Error::BlockValidation { index: 0, .. })
        ));
    }

    #[test]
    fn malformed_json_reports_offset() {
        let raw = b"{\"pages\": [\n  {\"page_idx\": 1,, }]}";
        match ingest_layout(raw) {
            Err(Error::Ingest { offset, .. }) => {
                assert!(offset > 10 && offset <= raw.len(), "offset {offset}");
                assert_eq!(raw[offset - 1], b',');
            }
            other => panic!("expected ingest error, got {other:?}"),
        }
    }

    #[test]
    fn furniture_dropped_and_counted() {
        let raw = br#"{"pages": [{"page_idx": 1, "blocks": [
            {"content": "ACME ESG 2024", "bbox": [0.1, 0.0, 0.9, 0.03], "type": "header"},
            {"content": "body", "bbox": [0.1, 0.1, 0.9, 0.2], "type": "text"},
            {"content": "3", "bbox": [0.45, 0.97, 0.55, 1.0], "type": "footer"}
        ]}]}"#;
        let doc = ingest_layout(raw).unwrap();
        assert_eq!(doc.blocks.len(), 1);
        assert_eq!(doc.dropped_furniture, 2);
        assert_eq!(doc.blocks[0].id.as_str(), "p1-b1");
    }

    #[test]
    fn empty_image_placeholder_rejected() {
        let raw = br#"{"pages": [{"page_idx": 1, "blocks": [
            {"content": "", "bbox": [0.1, 0.1, 0.2, 0.2], "type": "image"}
        ]}]}"#;
        assert!(matches!(ingest_layout(raw), Err(Error::BlockValidation { index: 0, .. })));
    }
}
