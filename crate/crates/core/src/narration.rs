//! Context-aware image narration: each image is packaged with its reading-order
//! neighbours under the same heading, described by a vision model, and the
//! description replaces the image's text payload.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::llm::{Attachment, ModelClient, ModelRequest};
use crate::model::{BlockId, BlockType, ContentBlock, DataType, HeadingTree};

pub const NARRATION_TEMPLATE_ID: &str = "narration.v1";
pub const DEFAULT_INSTRUCTION: &str = include_str!("../assets/prompts/narration_instruction.v1.txt");
pub const DEFAULT_RADIUS: usize = 3;

const RETRY_SUFFIX: &str = "\n\nYour previous answer was empty. Reply with the description text only.";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterElement {
    pub kind: DataType,
    /// Text payload, or the image reference for images.
    pub content: String,
    /// Position in global reading order.
    pub order: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MultimodalCluster {
    pub heading_path: Vec<String>,
    pub elements: Vec<ClusterElement>,
    pub instruction: String,
    /// Index into `elements`.
    pub target_image: usize,
}

impl MultimodalCluster {
    pub fn target(&self) -> &ClusterElement {
        &self.elements[self.target_image]
    }
}

/// Image reference of a block: its file link, else its placeholder payload.
pub fn image_reference(b: &ContentBlock) -> &str {
    if b.links.file_url.is_empty() {
        &b.content
    } else {
        &b.links.file_url
    }
}

/// Owning node (pre-order index) and title path of every block in the tree.
pub fn block_owners(tree: &HeadingTree) -> HashMap<BlockId, (usize, Vec<String>)> {
    let mut out = HashMap::new();
    let mut counter = 0usize;
    tree.walk(|path| {
        let node = path[path.len() - 1];
        let titles: Vec<String> = path.iter().map(|n| n.title.clone()).collect();
        for b in &node.blocks {
            out.insert(b.clone(), (counter, titles.clone()));
        }
        counter += 1;
    });
    out
}

fn element(b: &ContentBlock, order: usize) -> ClusterElement {
    let kind = b.block_type.data_type().unwrap_or(DataType::Text);
    let content = if b.block_type == BlockType::Image {
        image_reference(b).to_string()
    } else {
        b.content.clone()
    };
    ClusterElement { kind, content, order }
}

/// Gathers the image at `position` of `ordered` with up to `radius`
/// neighbours on each side, stopping at the first block owned by a
/// different heading node.
pub fn build_cluster(
    position: usize,
    ordered: &[ContentBlock],
    owners: &HashMap<BlockId, (usize, Vec<String>)>,
    radius: usize,
    instruction: &str,
) -> Result<MultimodalCluster> {
    let image = ordered
        .get(position)
        .ok_or_else(|| Error::Precondition(format!("no block at position {position}")))?;
    if image.block_type != BlockType::Image {
        return Err(Error::Precondition(format!("block {} is not an image", image.id)));
    }
    let (owner, path) = owners
        .get(&image.id)
        .ok_or_else(|| Error::Precondition(format!("image {} is not in the heading tree", image.id)))?;
    let same = |p: usize| owners.get(&ordered[p].id).map(|o| o.0) == Some(*owner);
    let mut lo = position;
    while lo > 0 && position - (lo - 1) <= radius && same(lo - 1) {
        lo -= 1;
    }
    let mut hi = position;
    while hi + 1 < ordered.len() && hi + 1 - position <= radius && same(hi + 1) {
        hi += 1;
    }
    let mut heading_path = path.clone();
    while heading_path.last().is_some_and(String::is_empty) {
        heading_path.pop();
    }
    Ok(MultimodalCluster {
        heading_path,
        elements: (lo..=hi).map(|p| element(&ordered[p], p)).collect(),
        instruction: instruction.trim().to_string(),
        target_image: position - lo,
    })
}

/// Prompt text plus the image references in element order.
pub fn build_narration_prompt(c: &MultimodalCluster) -> (String, Vec<String>) {
    let mut p = String::new();
    let crumb = if c.heading_path.is_empty() {
        "(none)".to_string()
    } else {
        c.heading_path.join(" > ")
    };
    let _ = writeln!(p, "Heading path: {crumb}");
    let _ = writeln!(p, "Elements in reading order:");
    for (k, e) in c.elements.iter().enumerate() {
        let content = if e.kind == DataType::Table {
            // keep row breaks visible for tables
            e.content.lines().map(str::trim).collect::<Vec<_>>().join(" / ")
        } else {
            e.content.split_whitespace().collect::<Vec<_>>().join(" ")
        };
        let _ = writeln!(
            p,
            "[{}] TYPE={} ORDER={} CONTENT={}",
            k + 1,
            e.kind.as_str(),
            e.order,
            content
        );
    }
    let _ = writeln!(p, "Target image: element [{}].", c.target_image + 1);
    p.push('\n');
    p.push_str(&c.instruction);
    let images = c
        .elements
        .iter()
        .filter(|e| e.kind == DataType::Image)
        .map(|e| e.content.clone())
        .collect();
    (p, images)
}

/// Description used when no narration is available.
pub fn placeholder(reference: &str) -> String {
    let name = reference.rsplit(['/', '\\']).next().unwrap_or(reference);
    format!("[image: {name}, no narration available]")
}

fn parse_description(raw: &str) -> Result<String> {
    let trimmed = raw.trim();
    let text = match serde_json::from_str::<Value>(trimmed) {
        Ok(Value::Object(o)) => o
            .get("description")
            .and_then(Value::as_str)
            .map(str::trim)
            .unwrap_or_default()
            .to_string(),
        _ => trimmed.to_string(),
    };
    if text.is_empty() {
        Err(Error::ModelResponse("empty description".into()))
    } else {
        Ok(text)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Narration {
    pub text: String,
    pub fallback: bool,
    pub note: Option<String>,
}

/// Describes the cluster's target image. Never fails: an unavailable model
/// yields the placeholder with a note.
pub fn narrate(c: &MultimodalCluster, client: &ModelClient, asset_dir: Option<&Path>) -> Narration {
    let (prompt, images) = build_narration_prompt(c);
    let attachments: Vec<Attachment> = images.iter().map(|r| Attachment::load(r, asset_dir)).collect();
    let first = ModelRequest::new(NARRATION_TEMPLATE_ID, prompt.clone(), attachments.clone());
    let result = match client.call(&first).and_then(|r| parse_description(&r)) {
        Err(Error::ModelResponse(m)) => {
            log::warn!("narration answer unusable ({m}), retrying");
            let retry = ModelRequest::new(NARRATION_TEMPLATE_ID, prompt + RETRY_SUFFIX, attachments);
            client.call(&retry).and_then(|r| parse_description(&r))
        }
        other => other,
    };
    match result {
        Ok(text) => Narration {
            text,
            fallback: false,
            note: None,
        },
        Err(e) => {
            let reference = &c.target().content;
            Narration {
                text: placeholder(reference),
                fallback: true,
                note: Some(format!("image {reference}: narration unavailable ({e})")),
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct NarrationReport {
    pub images: usize,
    pub fallbacks: usize,
    pub notes: Vec<String>,
}

/// Narrates every image of `ordered` in place. All clusters are built from
/// the unmodified blocks first; model calls run in parallel and results
/// are applied in reading order. The image reference moves to `file_url`
/// when the block had none.
pub fn narrate_document(
    ordered: &mut [ContentBlock],
    tree: &HeadingTree,
    client: &ModelClient,
    radius: usize,
    instruction: &str,
    asset_dir: Option<&Path>,
) -> Result<NarrationReport> {
    let owners = block_owners(tree);
    let clusters: Vec<(usize, MultimodalCluster)> = (0..ordered.len())
        .filter(|&p| ordered[p].block_type == BlockType::Image)
        .map(|p| build_cluster(p, ordered, &owners, radius, instruction).map(|c| (p, c)))
        .collect::<Result<_>>()?;
    let results: Vec<Narration> = clusters
        .par_iter()
        .map(|(_, c)| narrate(c, client, asset_dir))
        .collect();
    let mut report = NarrationReport {
        images: clusters.len(),
        ..Default::default()
    };
    for ((p, _), n) in clusters.iter().zip(results) {
        let b = &mut ordered[*p];
        if b.links.file_url.is_empty() {
            b.links.file_url = b.content.clone();
        }
        b.content = n.text;
        if n.fallback {
            report.fallbacks += 1;
        }
        report.notes.extend(n.note);
    }
    Ok(report)
}
