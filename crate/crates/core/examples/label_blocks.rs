//! Labels a few blocks with the lexicon provider, then shows why decoding
//! is constrained: on a table whose best GRI label belongs to a different
//! category, the unconstrained picks break the hierarchy and the loss
//! charges the violation.

use std::collections::HashMap;

use anyhow::Result;
use esgdoc::labeling::{
    hinge_hierarchy_loss, hla, predict_path, predict_unconstrained, total_loss, LabelHierarchy, LabelInput,
    LabelProvider, Lexicon, LexiconProvider, ProbabilityTable, DEFAULT_LAMBDA, DEFAULT_THETA,
};

fn main() -> Result<()> {
    let h = LabelHierarchy::builtin();
    let provider = LexiconProvider::new(Lexicon::builtin());
    let samples = [
        ("Scope 1 emissions fell 12% after the boiler upgrade.", vec!["Environment".to_string()]),
        ("Women hold 38% of management roles.", vec!["People".to_string(), "Diversity".to_string()]),
        ("All directors completed anti-corruption training.", vec!["Governance".to_string()]),
    ];
    for (k, (text, path)) in samples.iter().enumerate() {
        let input = LabelInput {
            text,
            heading_path: path,
            position: k,
        };
        let p = provider.probabilities(&input, h)?;
        let decoded = predict_path(&p, DEFAULT_THETA, h);
        let sel = decoded.selection();
        println!("{text}\n  -> {:?} / {:?} / {:?} (consistent: {})", sel.category, sel.gri, sel.sentiment, decoded.consistent);
    }

    // "Energy" (under E) is the strongest GRI label, but category S wins
    let mut map = HashMap::new();
    for (label, p) in [("E", 0.55), ("S", 0.8), ("e-gri302", 0.9), ("s-gri401", 0.7), ("Neutral", 0.6)] {
        map.insert(label.to_string(), p);
    }
    let p = ProbabilityTable::from_map(&map, h)?;
    let constrained = predict_path(&p, DEFAULT_THETA, h).selection();
    let free = predict_unconstrained(&p, h);
    println!("\nconstrained:   {constrained:?}  HLA {:.2}", hla(std::slice::from_ref(&constrained), h)?);
    println!("unconstrained: {free:?}  HLA {:.2}", hla(std::slice::from_ref(&free), h)?);

    let mut y = ProbabilityTable::zeros(h);
    y.category[h.categories.iter().position(|c| c.code == "S").unwrap()] = 1.0;
    y.gri[h.index_of(esgdoc::labeling::Level::Gri, "s-gri401").unwrap()] = 1.0;
    y.sentiment[1] = 1.0;
    println!(
        "hinge penalty {:.3}, total loss {:.4} (lambda {DEFAULT_LAMBDA})",
        hinge_hierarchy_loss(&p, h)?,
        total_loss(&p, &y, DEFAULT_LAMBDA, h)?
    );
    Ok(())
}
