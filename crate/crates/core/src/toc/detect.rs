use std::sync::OnceLock;

use regex::Regex;

use crate::model::{BlockType, ContentBlock, LayoutDocument};
use crate::text::normalize_title;

/// Horizontal gap (page widths) that separates two regions.
pub const REGION_GAP: f64 = 0.15;

/// Normalized titles that mark a ToC page on their own.
pub const TOC_TITLES: [&str; 3] = ["目录", "contents", "table of contents"];

fn line_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r"^\s*(.*?\p{L}.*?)\s*(?:[.．·•…‥⋯_\-–—]{2,}|…)?\s*(\d{1,4})\s*$").unwrap()
    })
}

/// Longest title (in chars) accepted as a ToC line; longer lines are prose.
const MAX_TITLE_CHARS: usize = 80;

/// Splits "title .... 12" into `("title", 12)`. The title must contain a letter.
pub fn toc_line(s: &str) -> Option<(String, u32)> {
    let caps = line_re().captures(s)?;
    let title = caps[1].trim().to_string();
    if title.chars().count() > MAX_TITLE_CHARS {
        return None;
    }
    let page = caps[2].parse().ok()?;
    Some((title, page))
}

/// Block lines that look like ToC entries.
pub(crate) fn entry_lines(blocks: &[&ContentBlock]) -> usize {
    blocks
        .iter()
        .filter(|b| matches!(b.block_type, BlockType::Text | BlockType::Title | BlockType::Toc))
        .flat_map(|b| b.content.lines())
        .filter(|l| toc_line(l).is_some())
        .count()
}

pub fn is_toc_page(blocks: &[&ContentBlock]) -> bool {
    blocks.iter().any(|b| b.block_type == BlockType::Toc)
        || entry_lines(blocks) >= 3
        || blocks
            .iter()
            .any(|b| TOC_TITLES.contains(&normalize_title(&b.content).as_str()))
}

pub fn find_toc_pages(doc: &LayoutDocument) -> Vec<u32> {
    doc.page_indices()
        .into_iter()
        .filter(|&p| {
            let blocks: Vec<&ContentBlock> = doc.blocks_on_page(p).collect();
            is_toc_page(&blocks)
        })
        .collect()
}

/// Single-linkage clustering on x extents: sorted by x0, a block whose left
/// edge is more than `REGION_GAP` right of the current region's right edge
/// starts a new region. Region ids run left to right from 0.
pub fn cluster_regions(blocks: &[&ContentBlock]) -> Vec<u32> {
    let mut idx: Vec<usize> = (0..blocks.len()).collect();
    idx.sort_by(|&a, &b| {
        blocks[a]
            .bbox
            .x0
            .total_cmp(&blocks[b].bbox.x0)
            .then(blocks[a].bbox.y0.total_cmp(&blocks[b].bbox.y0))
    });
    let mut region = vec![0u32; blocks.len()];
    let mut current = 0u32;
    let mut right = f64::NEG_INFINITY;
    for (k, &i) in idx.iter().enumerate() {
        let b = &blocks[i].bbox;
        if k > 0 && b.x0 - right > REGION_GAP {
            current += 1;
            right = b.x1;
        } else {
            right = right.max(b.x1);
        }
        region[i] = current;
    }
    region
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::BoundingBox;

    fn blk(id: &str, content: &str, x0: f64, x1: f64, y0: f64) -> ContentBlock {
        ContentBlock::new(id, content, BoundingBox::new(x0, y0, x1, y0 + 0.03).unwrap(), BlockType::Text, 2)
    }

    #[test]
    fn line_pattern() {
        assert_eq!(toc_line("About Us …… 3"), Some(("About Us".into(), 3)));
        assert_eq!(toc_line("1.2 Energy Use ...... 14"), Some(("1.2 Energy Use".into(), 14)));
        assert_eq!(toc_line("公司治理 12"), Some(("公司治理".into(), 12)));
        assert_eq!(toc_line("2023"), None);
        assert_eq!(toc_line("Contents"), None);
    }

    #[test]
    fn detection_rules() {
        let a = blk("a", "Contents", 0.1, 0.5, 0.05);
        assert!(is_toc_page(&[&a]));
        let lines: Vec<ContentBlock> = (0..3)
            .map(|i| blk(&format!("l{i}"), &format!("Section {i} .... {}", i + 3), 0.1, 0.8, 0.1 * i as f64))
            .collect();
        assert!(is_toc_page(&lines.iter().collect::<Vec<_>>()));
        assert!(!is_toc_page(&lines[..2].iter().collect::<Vec<_>>()));
    }

    #[test]
    fn two_columns_two_regions() {
        let bs = [
            blk("a", "x", 0.05, 0.40, 0.1),
            blk("b", "x", 0.08, 0.42, 0.2),
            blk("c", "x", 0.60, 0.95, 0.1),
            blk("d", "x", 0.62, 0.95, 0.2),
        ];
        let refs: Vec<&ContentBlock> = bs.iter().collect();
        assert_eq!(cluster_regions(&refs), [0, 0, 1, 1]);
    }

    #[test]
    fn small_gap_stays_one_region() {
        let bs = [blk("a", "x", 0.05, 0.40, 0.1), blk("b", "x", 0.50, 0.90, 0.1)];
        let refs: Vec<&ContentBlock> = bs.iter().collect();
        assert_eq!(cluster_regions(&refs), [0, 0]);
    }
}
