use std::fmt::Write as _;

use serde_json::Value;

use super::detect::cluster_regions;
use super::TocEntry;
use crate::embedding::is_cjk;
use crate::error::{Error, Result};
use crate::model::{ContentBlock, MAX_HEADING_DEPTH};

pub const RAP_TEMPLATE_ID: &str = "rap.v1";
pub const RAP_TEMPLATE: &str = include_str!("../../assets/prompts/rap.v1.txt");

fn one_line(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Fills the RAP template for one ToC page. `blocks` must be in raster
/// order; their positions become the line numbers the model refers back to.
pub fn build_rap_prompt(page_idx: u32, blocks: &[&ContentBlock]) -> String {
    let regions = cluster_regions(blocks);
    let n_regions = regions.iter().copied().max().map_or(0, |m| m + 1);
    let mut region_text = String::new();
    for r in 0..n_regions {
        let members: Vec<usize> = (0..blocks.len()).filter(|&k| regions[k] == r).collect();
        let x0 = members.iter().map(|&k| blocks[k].bbox.x0).fold(f64::INFINITY, f64::min);
        let x1 = members.iter().map(|&k| blocks[k].bbox.x1).fold(f64::NEG_INFINITY, f64::max);
        let lines: Vec<String> = members.iter().map(|k| k.to_string()).collect();
        let _ = writeln!(
            region_text,
            "region {r}: x {x0:.3}-{x1:.3}, lines {}",
            lines.join(",")
        );
    }
    if n_regions == 0 {
        region_text.push_str("(none)\n");
    }
    let mut block_text = String::new();
    for (k, b) in blocks.iter().enumerate() {
        let bb = &b.bbox;
        let _ = writeln!(
            block_text,
            "[line {k}] region={} type={} bbox=({:.3},{:.3},{:.3},{:.3}) text={}",
            regions[k],
            b.block_type,
            bb.x0,
            bb.y0,
            bb.x1,
            bb.y1,
            serde_json::to_string(&one_line(&b.content)).expect("string serializes")
        );
    }
    if blocks.is_empty() {
        block_text.push_str("(none)\n");
    }
    RAP_TEMPLATE
        .replace("{{PAGE}}", &page_idx.to_string())
        .replace("{{REGIONS}}", region_text.trim_end())
        .replace("{{BLOCKS}}", block_text.trim_end())
}

/// Text between the first code fence pair, or from the first `[` to the last `]`.
fn extract_json(raw: &str) -> Option<&str> {
    if let Some(start) = raw.find("```") {
        let after = &raw[start + 3..];
        let body_start = after.find('\n').map_or(0, |i| i + 1);
        let body = &after[body_start..];
        if let Some(end) = body.find("```") {
            return Some(body[..end].trim());
        }
    }
    let start = raw.find('[')?;
    let end = raw.rfind(']')?;
    (end > start).then(|| &raw[start..=end])
}

fn as_int(v: Option<&Value>) -> Option<i64> {
    match v? {
        Value::Number(n) => n.as_i64().or_else(|| n.as_f64().map(|f| f as i64)),
        Value::String(s) => s.trim().parse().ok(),
        _ => None,
    }
}

struct Parsed {
    title: String,
    level: Option<i64>,
    page_hint: Option<u32>,
    region_id: u32,
    line: Option<i64>,
    span: u32,
}

fn join_fragments(a: &str, b: &str) -> String {
    let glue = match (a.chars().next_back(), b.chars().next()) {
        (Some(x), Some(y)) if is_cjk(x) && is_cjk(y) => "",
        _ => " ",
    };
    format!("{a}{glue}{b}")
}

/// Parses a model answer into ToC entries.
///
/// Accepts fenced or bare JSON. An item with `"level": null` that directly
/// follows an entry in the same region on the next line is merged into it.
/// Other level-less items inherit the previous level. Entries with empty
/// titles are dropped.
pub fn parse_rap_response(raw: &str) -> Result<Vec<TocEntry>> {
    let json = extract_json(raw).ok_or_else(|| Error::ModelResponse("no JSON array in response".into()))?;
    let items: Vec<Value> =
        serde_json::from_str(json).map_err(|e| Error::ModelResponse(format!("invalid JSON: {e}")))?;
    let mut merged: Vec<Parsed> = Vec::new();
    for (k, item) in items.iter().enumerate() {
        let obj = item
            .as_object()
            .ok_or_else(|| Error::ModelResponse(format!("item {k} is not an object")))?;
        let title = obj
            .get("title")
            .and_then(Value::as_str)
            .ok_or_else(|| Error::ModelResponse(format!("item {k} has no title")))?
            .trim()
            .to_string();
        let p = Parsed {
            title,
            level: as_int(obj.get("level")),
            page_hint: as_int(obj.get("page_hint")).and_then(|v| u32::try_from(v).ok()),
            region_id: as_int(obj.get("region_id")).and_then(|v| u32::try_from(v).ok()).unwrap_or(0),
            line: as_int(obj.get("line")),
            span: 1,
        };
        if p.title.is_empty() {
            log::warn!("RAP item {k} has an empty title, dropped");
            continue;
        }
        if p.level.is_none() {
            if let Some(prev) = merged.last_mut() {
                let adjacent = matches!((prev.line, p.line), (Some(a), Some(b)) if b == a + i64::from(prev.span));
                if adjacent && prev.region_id == p.region_id {
                    prev.title = join_fragments(&prev.title, &p.title);
                    prev.span += 1;
                    prev.page_hint = p.page_hint.or(prev.page_hint);
                    continue;
                }
            }
        }
        merged.push(p);
    }
    let mut prev_level = 1i64;
    Ok(merged
        .into_iter()
        .map(|p| {
            let level = p.level.unwrap_or(prev_level).clamp(1, i64::from(MAX_HEADING_DEPTH));
            prev_level = level;
            TocEntry {
                title: p.title,
                level: level as u8,
                page_hint: p.page_hint,
                region_id: p.region_id,
                line_span: p.span,
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{BlockType, BoundingBox};

    fn blk(k: usize, text: &str, x0: f64) -> ContentBlock {
        let y0 = 0.1 + 0.05 * k as f64;
        ContentBlock::new(
            format!("b{k}"),
            text,
            BoundingBox::new(x0, y0, x0 + 0.3, y0 + 0.03).unwrap(),
            BlockType::Text,
            2,
        )
    }

    #[test]
    fn prompt_lists_every_block_and_ends_with_contract() {
        let bs: Vec<ContentBlock> = (0..6).map(|k| blk(k, &format!("Entry {k} .... {k}"), 0.1)).collect();
        let refs: Vec<&ContentBlock> = bs.iter().collect();
        let p = build_rap_prompt(2, &refs);
        for k in 0..6 {
            assert!(p.contains(&format!("[line {k}]")));
            assert!(p.contains(&format!("Entry {k} .... {k}")));
        }
        let sections = [
            "Cross-region entry aggregation",
            "Context-aware label enrichment",
            "Region-based hierarchy inference",
            "Multi-line consolidation",
            "## Output format",
        ];
        let pos: Vec<usize> = sections.iter().map(|s| p.find(s).unwrap()).collect();
        assert!(pos.windows(2).all(|w| w[0] < w[1]));
        assert!(p.trim_end().ends_with("}]"));
    }

    #[test]
    fn prompt_enumerates_columns_as_regions() {
        let bs = [blk(0, "A 1", 0.05), blk(1, "B 2", 0.6)];
        let refs: Vec<&ContentBlock> = bs.iter().collect();
        let p = build_rap_prompt(2, &refs);
        assert!(p.contains("region 0:") && p.contains("region 1:"));
        assert!(!p.contains("region 2:"));
    }

    #[test]
    fn clean_and_fenced() {
        let body = r#"[{"title":"About","level":1,"page_hint":2,"region_id":0,"line":0},
                      {"title":"Energy","level":2,"page_hint":5,"region_id":0,"line":1},
                      {"title":"Water","level":2,"page_hint":"7","region_id":0,"line":2}]"#;
        let a = parse_rap_response(body).unwrap();
        assert_eq!(a.len(), 3);
        assert_eq!(a[2].page_hint, Some(7));
        let fenced = format!("Here you go:\n```json\n{body}\n```\n");
        assert_eq!(parse_rap_response(&fenced).unwrap(), a);
    }

    #[test]
    fn continuation_fragments_merge() {
        let raw = r#"[{"title":"Environmental","level":1,"page_hint":null,"region_id":0,"line":3},
                      {"title":"Management","level":null,"page_hint":8,"region_id":0,"line":4}]"#;
        let e = parse_rap_response(raw).unwrap();
        assert_eq!(e.len(), 1);
        assert_eq!(e[0].title, "Environmental Management");
        assert_eq!((e[0].line_span, e[0].page_hint), (2, Some(8)));
    }

    #[test]
    fn non_adjacent_fragment_is_kept() {
        let raw = r#"[{"title":"A","level":2,"region_id":0,"line":1},
                      {"title":"B","level":null,"region_id":0,"line":5},
                      {"title":"C","level":null,"region_id":1,"line":6}]"#;
        let e = parse_rap_response(raw).unwrap();
        assert_eq!(e.len(), 3);
        assert_eq!(e[1].level, 2);
    }

    #[test]
    fn cjk_fragments_join_without_space() {
        assert_eq!(join_fragments("环境", "管理"), "环境管理");
    }

    #[test]
    fn garbage_is_a_model_response_error() {
        assert!(matches!(parse_rap_response("sorry, no"), Err(Error::ModelResponse(_))));
        assert!(matches!(parse_rap_response("[1,2]"), Err(Error::ModelResponse(_))));
    }

    #[test]
    fn empty_titles_dropped() {
        let e = parse_rap_response(r#"[{"title":"  ","level":1},{"title":"X","level":1}]"#).unwrap();
        assert_eq!(e.len(), 1);
    }
}
