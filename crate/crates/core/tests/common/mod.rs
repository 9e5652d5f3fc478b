//! Helpers shared by the integration test targets.
#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use esgdoc::llm::Mode;
use esgdoc::model::{BlockType, BoundingBox, ContentBlock};
use esgdoc::pipeline::{Engine, PipelineConfig};
use esgdoc::toc::{TocEntry, TocSource, TocTree};
use rand::seq::SliceRandom;
use rand::Rng;

pub fn corpus() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data/corpus")
}

pub fn replay_config(jobs: usize) -> PipelineConfig {
    PipelineConfig {
        mode: Mode::Replay,
        fixtures: Some(corpus().join("fixtures")),
        jobs,
        ..Default::default()
    }
}

pub fn replay_engine(jobs: usize) -> Engine {
    Engine::new(replay_config(jobs)).expect("replay engine")
}

/// Every file under `dir` keyed by relative path, skipping `diagnostics/`.
pub fn read_tree(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fn go(root: &Path, dir: &Path, out: &mut BTreeMap<String, Vec<u8>>) {
        for entry in std::fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            let rel = path.strip_prefix(root).unwrap().to_string_lossy().replace('\\', "/");
            if path.is_dir() {
                if rel != "diagnostics" {
                    go(root, &path, out);
                }
            } else {
                out.insert(rel, std::fs::read(&path).unwrap());
            }
        }
    }
    let mut out = BTreeMap::new();
    go(dir, dir, &mut out);
    out
}

fn rand_box(rng: &mut impl Rng) -> BoundingBox {
    let x0: f64 = rng.gen_range(0.0..0.8);
    let y0: f64 = rng.gen_range(0.0..0.9);
    let x1 = (x0 + rng.gen_range(0.05..0.5)).min(1.0);
    let y1 = (y0 + rng.gen_range(0.01..0.1)).min(1.0);
    BoundingBox::new(x0, y0, x1, y1).unwrap()
}

/// `n` text blocks with random boxes spread over up to three pages.
pub fn random_blocks(rng: &mut impl Rng, n: usize) -> Vec<ContentBlock> {
    let pages = rng.gen_range(1..=3u32);
    (0..n)
        .map(|i| {
            let page = rng.gen_range(1..=pages);
            ContentBlock::new(format!("b{i}"), format!("block {i}"), rand_box(rng), BlockType::Text, page)
        })
        .collect()
}

const WORDS: [&str; 24] = [
    "energy", "water", "waste", "carbon", "people", "safety", "training", "community", "governance", "ethics",
    "supply", "chain", "climate", "risk", "privacy", "data", "product", "quality", "health", "diversity",
    "biodiversity", "packaging", "emissions", "customers",
];

const FILLER: &str = "This paragraph describes the programme in some detail and is long enough to never look like a heading.";

/// A random ToC and a body in reading order for it. Each heading shows up in
/// the body verbatim, numbered, with one character dropped, wrapped in a
/// longer title, or not at all; distractor copies and filler text are mixed in.
pub fn random_align_case(rng: &mut impl Rng) -> (TocTree, Vec<ContentBlock>) {
    let n = rng.gen_range(1..=8);
    let mut titles: Vec<String> = Vec::new();
    while titles.len() < n {
        let k = rng.gen_range(2..=3);
        let mut words: Vec<&str> = WORDS.choose_multiple(rng, k).copied().collect();
        words.sort_unstable();
        let mut t = words.join(" ");
        t[..1].make_ascii_uppercase();
        if !titles.contains(&t) {
            titles.push(t);
        }
    }
    let mut level = 1u8;
    let entries: Vec<TocEntry> = titles
        .iter()
        .enumerate()
        .map(|(i, t)| {
            level = if i == 0 { 1 } else { rng.gen_range(1..=(level + 1).min(4)) };
            TocEntry {
                title: t.clone(),
                level,
                page_hint: None,
                region_id: 0,
                line_span: i as u32 + 1,
            }
        })
        .collect();
    let toc = TocTree::new(entries, TocSource::Rap, vec![]);

    let mut body: Vec<(String, BlockType)> = vec![("Annual report".into(), BlockType::Title)];
    for (i, t) in titles.iter().enumerate() {
        match rng.gen_range(0..10) {
            0..=3 => body.push((t.clone(), BlockType::Title)),
            4 => body.push((format!("{}.{} {t}", i + 1, rng.gen_range(1..9)), BlockType::Title)),
            5 | 6 => {
                let mut chars: Vec<char> = t.chars().collect();
                chars.remove(rng.gen_range(1..chars.len() - 1));
                body.push((chars.into_iter().collect(), BlockType::Title));
            }
            7 => body.push((format!("Our {t} programme"), BlockType::Title)),
            _ => {}
        }
        for _ in 0..rng.gen_range(0..=3) {
            body.push((FILLER.into(), BlockType::Text));
        }
        if rng.gen_bool(0.15) {
            let other = titles.choose(rng).unwrap();
            body.push((other.clone(), BlockType::Text));
        }
    }
    let blocks = body
        .into_iter()
        .enumerate()
        .map(|(k, (text, ty))| {
            let page = 1 + (k / 4) as u32;
            let y0 = 0.1 + 0.2 * (k % 4) as f64;
            let bbox = BoundingBox::new(0.1, y0, 0.9, y0 + 0.1).unwrap();
            ContentBlock::new(format!("p{page}-b{}", k % 4), text, bbox, ty, page)
        })
        .collect();
    (toc, blocks)
}
