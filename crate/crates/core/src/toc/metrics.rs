use serde::{Deserialize, Serialize};

use super::TocTree;
use crate::error::{Error, Result};
use crate::text::normalize_title;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TocScores {
    /// Content completeness, `1 - (redundant + missing) / total`, floored at 0.
    pub cc: f64,
    /// Matched entries on the longest gold-consistent order chain over total.
    pub rc: f64,
    /// Matched entries with the gold level over total.
    pub hc: f64,
    pub total: usize,
    pub matched: usize,
    pub missing: usize,
    pub redundant: usize,
}

fn lis_len(seq: &[usize]) -> usize {
    let mut tails: Vec<usize> = Vec::new();
    for &x in seq {
        match tails.binary_search(&x) {
            Ok(_) => {}
            Err(i) if i == tails.len() => tails.push(x),
            Err(i) => tails[i] = x,
        }
    }
    tails.len()
}

/// CC / RC / HC against a gold ToC. Entries are paired by normalized title,
/// each predicted entry taking the earliest unpaired gold entry with the
/// same title. `total` is the gold size for all three ratios.
pub fn toc_metrics(predicted: &TocTree, gold: &TocTree) -> Result<TocScores> {
    if gold.entries.is_empty() {
        return Err(Error::EmptyReference("gold ToC has no entries"));
    }
    let gold_titles: Vec<String> = gold.entries.iter().map(|e| normalize_title(&e.title)).collect();
    let mut used = vec![false; gold.entries.len()];
    // (predicted index, gold index)
    let mut pairs: Vec<(usize, usize)> = Vec::new();
    for (p, e) in predicted.entries.iter().enumerate() {
        let t = normalize_title(&e.title);
        if let Some(g) = (0..gold_titles.len()).find(|&g| !used[g] && gold_titles[g] == t) {
            used[g] = true;
            pairs.push((p, g));
        }
    }
    let total = gold.entries.len();
    let matched = pairs.len();
    let missing = total - matched;
    let redundant = predicted.entries.len() - matched;
    let in_order = lis_len(&pairs.iter().map(|&(_, g)| g).collect::<Vec<_>>());
    let right_level = pairs
        .iter()
        .filter(|&&(p, g)| predicted.entries[p].level == gold.entries[g].level)
        .count();
    let t = total as f64;
    Ok(TocScores {
        cc: (1.0 - (redundant + missing) as f64 / t).max(0.0),
        rc: in_order as f64 / t,
        hc: right_level as f64 / t,
        total,
        matched,
        missing,
        redundant,
    })
}
