use std::collections::BTreeSet;
use std::fmt::Write as _;

use serde_json::Value;

use super::stages::window_for;
use super::{insert_sorted, AnchorMatch, AnchorWindow, MatchStage};
use crate::error::{Error, Result};
use crate::llm::{ModelClient, ModelRequest};
use crate::model::{BlockId, ContentBlock};
use crate::toc::{TocEntry, TocTree};

pub const CIP_TEMPLATE_ID: &str = "cip.v1";
pub const CIP_TEMPLATE: &str = include_str!("../../assets/prompts/cip.v1.txt");
/// Leading characters of each block shown to the model.
pub const SUMMARY_CHARS: usize = 200;

const RETRY_SUFFIX: &str = "\n\nYour previous answer could not be used. Reply with the JSON object only, \
naming a block id from the list or null.";

fn summary(s: &str) -> String {
    let collapsed = s.split_whitespace().collect::<Vec<_>>().join(" ");
    collapsed.chars().take(SUMMARY_CHARS).collect()
}

fn anchor_label(m: Option<&AnchorMatch>) -> String {
    m.map_or_else(|| "(start of document)".to_string(), |m| m.toc_entry.title.clone())
}

/// Fills the insertion template for one entry and its window.
pub fn build_cip_prompt(entry: &TocEntry, window: &AnchorWindow, ordered: &[ContentBlock]) -> String {
    let mut blocks = String::new();
    for &p in &window.positions {
        let b = &ordered[p];
        let _ = writeln!(blocks, "[{}] {}: {}", b.id, b.block_type, summary(&b.content));
    }
    let next = window
        .end_anchor
        .as_ref()
        .map_or_else(|| "(end of document)".to_string(), |m| m.toc_entry.title.clone());
    CIP_TEMPLATE
        .replace("{{HEADING}}", &entry.title)
        .replace("{{LEVEL}}", &entry.level.to_string())
        .replace("{{PREV}}", &anchor_label(window.start_anchor.as_ref()))
        .replace("{{NEXT}}", &next)
        .replace("{{BLOCKS}}", blocks.trim_end())
}

fn extract_object(raw: &str) -> Option<&str> {
    let start = raw.find('{')?;
    let end = raw.rfind('}')?;
    (end > start).then(|| &raw[start..=end])
}

/// `Some(id)` to insert before that block, `None` when the model declines.
/// An id outside the window is a format error.
pub fn parse_cip_response(raw: &str, window: &AnchorWindow) -> Result<Option<BlockId>> {
    let json = extract_object(raw).ok_or_else(|| Error::ModelResponse("no JSON object in response".into()))?;
    let v: Value = serde_json::from_str(json).map_err(|e| Error::ModelResponse(format!("invalid JSON: {e}")))?;
    match v.get("insert_before_block") {
        Some(Value::Null) => Ok(None),
        Some(Value::String(id)) => {
            let id = BlockId::new(id.trim());
            if window.block_ids.contains(&id) {
                Ok(Some(id))
            } else {
                Err(Error::ModelResponse(format!("block `{id}` is not in the window")))
            }
        }
        _ => Err(Error::ModelResponse("missing `insert_before_block`".into())),
    }
}

fn ask(client: &ModelClient, prompt: String, window: &AnchorWindow) -> Result<Option<BlockId>> {
    let first = ModelRequest::new(CIP_TEMPLATE_ID, prompt.clone(), Vec::new());
    match client.call(&first).and_then(|raw| parse_cip_response(&raw, window)) {
        Err(Error::ModelResponse(m)) => {
            log::warn!("CIP answer unusable ({m}), retrying");
            let retry = ModelRequest::new(CIP_TEMPLATE_ID, prompt + RETRY_SUFFIX, Vec::new());
            client.call(&retry).and_then(|raw| parse_cip_response(&raw, window))
        }
        other => other,
    }
}

/// Places the `pending` entries (ToC indices, ascending) that stages 1 and 2
/// left open. Entries are handled in ToC order so each insertion narrows the
/// windows of later ones. When the model is unavailable or keeps answering
/// badly, the heading goes before the first block of its window.
///
/// Returns the insertions, the entries left unresolved, and notes.
pub fn stage3_cip(
    toc: &TocTree,
    ordered: &[ContentBlock],
    excluded_pages: &BTreeSet<u32>,
    matches: &[AnchorMatch],
    pending: &[usize],
    client: &ModelClient,
) -> (Vec<AnchorMatch>, Vec<usize>, Vec<String>) {
    let mut all = matches.to_vec();
    let mut inserted = Vec::new();
    let mut unresolved = Vec::new();
    let mut notes = Vec::new();
    for &i in pending {
        let entry = &toc.entries[i];
        let window = window_for(i, &all, ordered, excluded_pages);
        if window.positions.is_empty() {
            notes.push(format!("ToC entry {i} {:?}: empty window", entry.title));
            unresolved.push(i);
            continue;
        }
        let prompt = build_cip_prompt(entry, &window, ordered);
        let position = match ask(client, prompt, &window) {
            Ok(Some(id)) => {
                let k = window.block_ids.iter().position(|b| *b == id).expect("validated id");
                window.positions[k]
            }
            Ok(None) => {
                notes.push(format!("ToC entry {i} {:?}: model declined insertion", entry.title));
                unresolved.push(i);
                continue;
            }
            Err(e) => {
                notes.push(format!("ToC entry {i} {:?}: CIP unavailable ({e}); inserted at window start", entry.title));
                window.positions[0]
            }
        };
        let m = AnchorMatch {
            toc_index: i,
            toc_entry: entry.clone(),
            block_id: ordered[position].id.clone(),
            position,
            stage: MatchStage::Inserted,
            similarity: 0.0,
        };
        insert_sorted(&mut all, m.clone());
        inserted.push(m);
    }
    (inserted, unresolved, notes)
}
