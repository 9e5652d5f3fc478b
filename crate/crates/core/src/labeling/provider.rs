//! Per-block label probability providers.

use std::collections::HashMap;
use std::time::Duration;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

use super::attention::{hierarchical_attention, AttentionParams};
use super::embedding::{compose_embedding, matvec, sinusoidal_position, HeadingPathEncoder};
use super::hierarchy::{LabelHierarchy, Level};
use super::loss::ProbabilityTable;
use crate::embedding::{is_cjk, EmbeddingProvider, HashEmbedder};
use crate::error::{Error, Result};

const BUILTIN_LEXICON: &str = include_str!("../../assets/labels/lexicon.v1.json");

/// What a provider sees of one block.
#[derive(Debug, Clone, Copy)]
pub struct LabelInput<'a> {
    pub text: &'a str,
    pub heading_path: &'a [String],
    /// Global reading-order index within the document.
    pub position: usize,
}

pub trait LabelProvider: Send + Sync {
    fn name(&self) -> &str;
    fn probabilities(&self, input: &LabelInput<'_>, h: &LabelHierarchy) -> Result<ProbabilityTable>;
}

#[derive(Debug, Clone, Deserialize)]
pub struct Lexicon {
    pub version: String,
    /// GRI label id -> keywords.
    pub gri: HashMap<String, Vec<String>>,
    pub positive: Vec<String>,
    pub negative: Vec<String>,
}

impl Lexicon {
    pub fn builtin() -> Lexicon {
        serde_json::from_str(BUILTIN_LEXICON).expect("bundled lexicon is valid")
    }
}

/// Occurrences of `kw` in lowercased `text`. Latin keywords must sit on word
/// boundaries; keywords containing CJK match as plain substrings.
fn keyword_hits(text: &str, kw: &str) -> usize {
    let kw = kw.to_lowercase();
    if kw.is_empty() {
        return 0;
    }
    if kw.chars().any(is_cjk) {
        return text.matches(kw.as_str()).count();
    }
    let boundary = |c: Option<char>| c.is_none_or(|c| !c.is_alphanumeric());
    text.match_indices(kw.as_str())
        .filter(|(i, _)| {
            boundary(text[..*i].chars().next_back()) && boundary(text[i + kw.len()..].chars().next())
        })
        .count()
}

fn saturate(score: f64) -> f64 {
    0.5 + 0.45 * (1.0 - (-score).exp())
}

/// Keyword-count probabilities. Heading-path hits count half. Category
/// probabilities are the max over their children, so decoded paths never
/// violate the hierarchy by construction. Blocks without any hit fall to the
/// general-disclosure label of category `N` when the hierarchy has one.
#[derive(Debug, Clone)]
pub struct LexiconProvider {
    lexicon: Lexicon,
}

impl LexiconProvider {
    pub fn new(lexicon: Lexicon) -> Self {
        LexiconProvider { lexicon }
    }
}

impl Default for LexiconProvider {
    fn default() -> Self {
        Self::new(Lexicon::builtin())
    }
}

const BASELINE: f64 = 0.05;

impl LabelProvider for LexiconProvider {
    fn name(&self) -> &str {
        "lexicon"
    }

    fn probabilities(&self, input: &LabelInput<'_>, h: &LabelHierarchy) -> Result<ProbabilityTable> {
        let text = input.text.to_lowercase();
        let heading = input.heading_path.join(" / ").to_lowercase();
        let mut p = ProbabilityTable::zeros(h);

        let mut any = false;
        for (g, label) in h.gri.iter().enumerate() {
            let score = self.lexicon.gri.get(&label.id).map_or(0.0, |kws| {
                kws.iter()
                    .map(|k| keyword_hits(&text, k) as f64 + 0.5 * keyword_hits(&heading, k) as f64)
                    .sum()
            });
            any |= score > 0.0;
            p.gri[g] = if score > 0.0 { saturate(score) } else { BASELINE };
        }
        if !any {
            if let Some(n) = h.categories.iter().position(|c| c.code == "N") {
                if let Some(g) = (0..h.gri.len()).find(|&g| h.parent_index(g) == n) {
                    p.gri[g] = 0.55;
                }
            }
        }
        for (g, &pg) in p.gri.clone().iter().enumerate() {
            let c = h.parent_index(g);
            p.category[c] = p.category[c].max(pg);
        }
        for c in p.category.iter_mut() {
            *c = c.max(BASELINE);
        }

        let count = |words: &[String]| words.iter().map(|w| keyword_hits(&text, w)).sum::<usize>() as f64;
        let (pos, neg) = (count(&self.lexicon.positive), count(&self.lexicon.negative));
        let (label, score) = if pos > neg {
            ("Positive", saturate(pos - neg))
        } else if neg > pos {
            ("Negative", saturate(neg - pos))
        } else {
            ("Neutral", 0.7)
        };
        for (s, name) in h.sentiments.iter().enumerate() {
            p.sentiment[s] = if name == label { score } else { 0.1 };
        }
        Ok(p)
    }
}

/// Remote provider: POSTs `{"text", "heading_path", "position"}` and expects
/// `{"probabilities": {label: p}}` keyed by category code, GRI id and sentiment.
pub struct ServiceLabelProvider {
    name: String,
    url: String,
    agent: ureq::Agent,
}

impl ServiceLabelProvider {
    pub fn new(url: impl Into<String>) -> Self {
        let url = url.into();
        ServiceLabelProvider {
            name: format!("service:{url}"),
            url,
            agent: ureq::AgentBuilder::new().timeout(Duration::from_secs(60)).build(),
        }
    }
}

#[derive(Deserialize)]
struct ProbabilityResponse {
    probabilities: HashMap<String, f64>,
}

impl LabelProvider for ServiceLabelProvider {
    fn name(&self) -> &str {
        &self.name
    }

    fn probabilities(&self, input: &LabelInput<'_>, h: &LabelHierarchy) -> Result<ProbabilityTable> {
        let resp: ProbabilityResponse = self
            .agent
            .post(&self.url)
            .send_json(serde_json::json!({
                "text": input.text,
                "heading_path": input.heading_path,
                "position": input.position,
            }))
            .map_err(|e| Error::Service(e.to_string()))?
            .into_json()
            .map_err(|e| Error::Service(format!("bad label response: {e}")))?;
        ProbabilityTable::from_map(&resp.probabilities, h)
    }
}

/// Full ternary-embedding -> stacked-attention -> sigmoid-head classifier
/// with seeded, untrained parameters. Weights are meant to be replaced by an
/// external trainer; the default instance exercises the math end to end.
#[derive(Debug, Clone)]
pub struct HierarchicalClassifier {
    text: HashEmbedder,
    path: HeadingPathEncoder,
    attention: Vec<AttentionParams>,
    /// Per level: (rows of W_h, biases).
    heads: Vec<(Vec<Vec<f64>>, Vec<f64>)>,
}

impl HierarchicalClassifier {
    pub fn seeded(dim: usize, h: &LabelHierarchy, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = (3.0 / dim as f64).sqrt();
        let heads = Level::ALL
            .iter()
            .map(|&lvl| {
                let w = (0..h.level_size(lvl))
                    .map(|_| (0..dim).map(|_| rng.gen_range(-a..=a)).collect())
                    .collect();
                (w, vec![0.0; h.level_size(lvl)])
            })
            .collect();
        HierarchicalClassifier {
            text: HashEmbedder::with_seed(dim, seed),
            path: HeadingPathEncoder::new(dim, seed.wrapping_add(1)),
            attention: AttentionParams::seeded_stack(dim, Level::ALL.len(), seed.wrapping_add(2)),
            heads,
        }
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

impl LabelProvider for HierarchicalClassifier {
    fn name(&self) -> &str {
        "classifier"
    }

    fn probabilities(&self, input: &LabelInput<'_>, h: &LabelHierarchy) -> Result<ProbabilityTable> {
        let d = self.text.dim();
        let e = compose_embedding(
            &self.text.embed(input.text)?,
            &self.path.encode(input.heading_path)?,
            &sinusoidal_position(input.position, d),
        )?;
        let steps = hierarchical_attention(&e.e_blk, &e.e_lvl, &self.attention, &[])?;
        let mut p = ProbabilityTable::zeros(h);
        for ((lvl, step), (w, b)) in Level::ALL.iter().zip(&steps).zip(&self.heads) {
            if w.len() != h.level_size(*lvl) {
                return Err(Error::Shape(format!("{lvl:?} head does not fit the hierarchy")));
            }
            let logits = matvec(w, &step.output);
            *p.level_mut(*lvl) = logits.iter().zip(b).map(|(z, b)| sigmoid(z + b)).collect();
        }
        Ok(p)
    }
}

/// `lexicon`, `classifier` or `service:<url>`.
pub fn provider_from_spec(spec: &str, dim: usize) -> Result<Box<dyn LabelProvider>> {
    match spec {
        "lexicon" => Ok(Box::new(LexiconProvider::default())),
        "classifier" => Ok(Box::new(HierarchicalClassifier::seeded(dim, LabelHierarchy::builtin(), 17))),
        s => match s.strip_prefix("service:") {
            Some(url) => Ok(Box::new(ServiceLabelProvider::new(url))),
            None => Err(Error::Config(format!("unknown label provider `{s}`"))),
        },
    }
}
