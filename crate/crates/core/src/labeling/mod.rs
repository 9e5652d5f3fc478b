//! Hierarchical multi-level labeling: category -> GRI indicator -> sentiment.

pub mod attention;
pub mod decode;
pub mod embedding;
pub mod hierarchy;
pub mod loss;
pub mod metrics;
pub mod provider;

pub use attention::{attend, hierarchical_attention, softmax, AttentionParams, AttentionStep};
pub use decode::{predict_path, predict_unconstrained, LabelPath, LabelSelection, ScoredLabel};
pub use embedding::{compose_embedding, sinusoidal_position, HeadingPathEncoder, TernaryEmbedding};
pub use hierarchy::{Category, GriLabel, LabelHierarchy, Level, SENTIMENT_LABELS};
pub use loss::{
    hinge_hierarchy_loss, selected_gri, total_loss, total_loss_gradient, ProbabilityTable, EPSILON,
};
pub use metrics::{
    count_relations, f1_from_counts, hla, label_macro_f1, multilevel_f1, MultiLevelF1, RelationCounts,
};
pub use provider::{
    HierarchicalClassifier, LabelInput, LabelProvider, Lexicon, LexiconProvider, ServiceLabelProvider,
};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{BlockId, StructuredDocument};

pub const DEFAULT_THETA: f64 = 0.5;
pub const DEFAULT_LAMBDA: f64 = 0.1;

/// Labels every block of `doc` in place and returns the decoded paths in
/// document order. Labels are written as category code, GRI label name and
/// sentiment; levels the decoder did not reach stay empty.
pub fn label_document(
    doc: &mut StructuredDocument,
    provider: &dyn LabelProvider,
    theta: f64,
    h: &LabelHierarchy,
) -> Result<Vec<(BlockId, LabelPath)>> {
    if !(theta > 0.0 && theta < 1.0) {
        return Err(Error::Config(format!("theta must be in (0,1), got {theta}")));
    }
    let inputs: Vec<(BlockId, String, Vec<String>)> = doc
        .blocks()
        .map(|(id, b)| (id, b.data.clone(), b.heading_path()))
        .collect();
    let paths: Vec<(BlockId, LabelPath)> = inputs
        .par_iter()
        .enumerate()
        .map(|(position, (id, text, path))| {
            let input = LabelInput {
                text,
                heading_path: path,
                position,
            };
            let p = provider.probabilities(&input, h)?;
            p.check_shape(h)?;
            Ok((id.clone(), predict_path(&p, theta, h)))
        })
        .collect::<Result<_>>()?;

    for (block, (_, path)) in doc.blocks_mut().zip(&paths) {
        let sel = path.selection();
        block.esg_category_label = sel.category.unwrap_or_default();
        block.gri_label = sel
            .gri
            .and_then(|id| h.gri_by_id(&id).map(|g| g.name.clone()))
            .unwrap_or_default();
        block.sentiment_label = sel.sentiment.unwrap_or_default();
    }
    Ok(paths)
}

/// Reads back the selections stored on a labeled document, keyed by tree id.
/// GRI names are mapped back to ids.
pub fn stored_selections(
    doc: &StructuredDocument,
    h: &LabelHierarchy,
) -> std::collections::BTreeMap<BlockId, LabelSelection> {
    let opt = |s: &str| (!s.is_empty()).then(|| s.to_string());
    doc.blocks()
        .map(|(id, b)| {
            let gri = h.gri_by_name(&b.gri_label).map(|g| g.id.clone());
            (
                id,
                LabelSelection {
                    category: opt(&b.esg_category_label),
                    gri,
                    sentiment: opt(&b.sentiment_label),
                },
            )
        })
        .collect()
}
