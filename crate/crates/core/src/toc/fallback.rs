use super::detect::{cluster_regions, toc_line};
use super::TocEntry;
use crate::model::{BlockType, ContentBlock};

/// Extra indentation credited per leading whitespace character of a line.
const INDENT_PER_SPACE: f64 = 0.01;
/// Indentations closer than this fall into the same step.
const INDENT_TOLERANCE: f64 = 0.01;
const LEVEL_BINS: usize = 3;

/// Maps indentations to levels 1..=3: distinct indentation steps are found
/// with a small tolerance, and steps are split into three equal-count bins
/// (one bin per step when there are at most three).
fn indentation_levels(indents: &[f64]) -> Vec<u8> {
    let mut sorted: Vec<f64> = indents.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut steps: Vec<f64> = Vec::new();
    for x in sorted {
        if steps.last().is_none_or(|&s| x - s > INDENT_TOLERANCE) {
            steps.push(x);
        }
    }
    let k = steps.len();
    indents
        .iter()
        .map(|&x| {
            let rank = steps.iter().rposition(|&s| x >= s - 1e-12).unwrap_or(0);
            let bin = if k <= LEVEL_BINS { rank } else { rank * LEVEL_BINS / k };
            (bin + 1) as u8
        })
        .collect()
}

/// Deterministic ToC parser over one page's blocks (raster order): every
/// line shaped like "title .... page" becomes an entry, levels come from
/// indentation within its region.
pub fn fallback_parse(blocks: &[&ContentBlock]) -> Vec<TocEntry> {
    let regions = cluster_regions(blocks);
    // (region, title, page, indentation x)
    let mut lines: Vec<(u32, String, u32, f64)> = Vec::new();
    for (k, b) in blocks.iter().enumerate() {
        if !matches!(b.block_type, BlockType::Text | BlockType::Title | BlockType::Toc) {
            continue;
        }
        for line in b.content.lines() {
            if let Some((title, page)) = toc_line(line) {
                let lead = line.chars().take_while(|c| c.is_whitespace()).count();
                lines.push((regions[k], title, page, b.bbox.x0 + lead as f64 * INDENT_PER_SPACE));
            }
        }
    }
    let mut levels = vec![1u8; lines.len()];
    let region_ids: std::collections::BTreeSet<u32> = lines.iter().map(|l| l.0).collect();
    for r in region_ids {
        let members: Vec<usize> = (0..lines.len()).filter(|&i| lines[i].0 == r).collect();
        let indents: Vec<f64> = members.iter().map(|&i| lines[i].3).collect();
        for (&i, lvl) in members.iter().zip(indentation_levels(&indents)) {
            levels[i] = lvl;
        }
    }
    let mut entries: Vec<TocEntry> = lines
        .into_iter()
        .zip(levels)
        .map(|((region_id, title, page, _), level)| TocEntry {
            title,
            level,
            page_hint: Some(page),
            region_id,
            line_span: 1,
        })
        .collect();
    entries.sort_by_key(|e| e.region_id);
    entries
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::BoundingBox;

    fn blk(k: usize, text: &str, x0: f64) -> ContentBlock {
        let y0 = 0.1 + 0.05 * k as f64;
        ContentBlock::new(
            format!("b{k}"),
            text,
            BoundingBox::new(x0, y0, (x0 + 0.3).min(1.0), y0 + 0.03).unwrap(),
            BlockType::Text,
            2,
        )
    }

    #[test]
    fn indented_child() {
        let bs = [blk(0, "About Us …… 3", 0.10), blk(1, "  Governance …… 5", 0.14)];
        let e = fallback_parse(&bs.iter().collect::<Vec<_>>());
        assert_eq!(e.len(), 2);
        assert_eq!((e[0].title.as_str(), e[0].level, e[0].page_hint), ("About Us", 1, Some(3)));
        assert_eq!((e[1].title.as_str(), e[1].level, e[1].page_hint), ("Governance", 2, Some(5)));
    }

    #[test]
    fn no_numbered_lines() {
        let bs = [blk(0, "Contents", 0.1), blk(1, "Welcome to our report", 0.1)];
        assert!(fallback_parse(&bs.iter().collect::<Vec<_>>()).is_empty());
    }

    #[test]
    fn duplicates_pass_through() {
        let bs = [blk(0, "Energy .... 4", 0.1), blk(1, "Energy .... 4", 0.1)];
        assert_eq!(fallback_parse(&bs.iter().collect::<Vec<_>>()).len(), 2);
    }

    #[test]
    fn many_steps_binned_into_three() {
        assert_eq!(indentation_levels(&[0.0, 0.05, 0.1, 0.15, 0.2, 0.25]), [1, 1, 2, 2, 3, 3]);
        assert_eq!(indentation_levels(&[0.3, 0.1, 0.305]), [2, 1, 2]);
    }
}
