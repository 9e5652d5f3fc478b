//! Hierarchy-aware objective: per-level binary cross-entropy plus the
//! parent-child hinge penalty.

use std::collections::HashMap;

use super::hierarchy::{LabelHierarchy, Level};
use crate::error::{Error, Result};

/// Probability clamp used inside the cross-entropy terms.
pub const EPSILON: f64 = 1e-7;

/// Per-level probabilities (or binary targets), indexed in hierarchy order.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityTable {
    pub category: Vec<f64>,
    pub gri: Vec<f64>,
    pub sentiment: Vec<f64>,
}

impl ProbabilityTable {
    pub fn zeros(h: &LabelHierarchy) -> Self {
        ProbabilityTable {
            category: vec![0.0; h.categories.len()],
            gri: vec![0.0; h.gri.len()],
            sentiment: vec![0.0; h.sentiments.len()],
        }
    }

    /// Builds a table from `label -> probability`; labels not mentioned get 0.
    pub fn from_map(map: &HashMap<String, f64>, h: &LabelHierarchy) -> Result<Self> {
        let mut t = Self::zeros(h);
        for (label, &p) in map {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Validation(format!(
                    "probability for `{label}` outside [0,1]: {p}"
                )));
            }
            let slot = Level::ALL
                .into_iter()
                .find_map(|lvl| h.index_of(lvl, label).map(|i| (lvl, i)))
                .ok_or_else(|| Error::UnknownLabel(label.clone()))?;
            t.level_mut(slot.0)[slot.1] = p;
        }
        Ok(t)
    }

    pub fn level(&self, level: Level) -> &[f64] {
        match level {
            Level::Category => &self.category,
            Level::Gri => &self.gri,
            Level::Sentiment => &self.sentiment,
        }
    }

    pub fn level_mut(&mut self, level: Level) -> &mut Vec<f64> {
        match level {
            Level::Category => &mut self.category,
            Level::Gri => &mut self.gri,
            Level::Sentiment => &mut self.sentiment,
        }
    }

    pub fn check_shape(&self, h: &LabelHierarchy) -> Result<()> {
        for lvl in Level::ALL {
            let (got, expected) = (self.level(lvl).len(), h.level_size(lvl));
            if got != expected {
                return Err(Error::Shape(format!(
                    "{lvl:?} level has {got} entries, hierarchy has {expected}"
                )));
            }
        }
        Ok(())
    }

    fn clamped(&self) -> Self {
        let c = |v: &Vec<f64>| v.iter().map(|p| p.clamp(EPSILON, 1.0 - EPSILON)).collect();
        ProbabilityTable {
            category: c(&self.category),
            gri: c(&self.gri),
            sentiment: c(&self.sentiment),
        }
    }
}

/// Index of the highest-probability GRI label; ties go to the smaller label id.
/// This label is the parent of every sentiment label in the hinge term.
pub fn selected_gri(p: &ProbabilityTable, h: &LabelHierarchy) -> Option<usize> {
    (0..p.gri.len()).reduce(|best, i| {
        match p.gri[i].total_cmp(&p.gri[best]) {
            std::cmp::Ordering::Greater => i,
            std::cmp::Ordering::Equal if h.gri[i].id < h.gri[best].id => i,
            _ => best,
        }
    })
}

/// `sum over non-root labels of max(0, P(label) - P(parent))`.
pub fn hinge_hierarchy_loss(p: &ProbabilityTable, h: &LabelHierarchy) -> Result<f64> {
    p.check_shape(h)?;
    let mut loss = 0.0;
    for (g, &pg) in p.gri.iter().enumerate() {
        loss += (pg - p.category[h.parent_index(g)]).max(0.0);
    }
    if let Some(gs) = selected_gri(p, h) {
        let parent = p.gri[gs];
        for &ps in &p.sentiment {
            loss += (ps - parent).max(0.0);
        }
    }
    Ok(loss)
}

fn bce_mean(p: &[f64], y: &[f64]) -> f64 {
    let n = p.len() as f64;
    p.iter()
        .zip(y)
        .map(|(&p, &y)| -(y * p.ln() + (1.0 - y) * (1.0 - p).ln()))
        .sum::<f64>()
        / n
}

/// Sum of per-level mean BCE plus `lambda` times the hinge penalty.
/// Probabilities are clamped to `[EPSILON, 1 - EPSILON]` first.
pub fn total_loss(
    p: &ProbabilityTable,
    y: &ProbabilityTable,
    lambda: f64,
    h: &LabelHierarchy,
) -> Result<f64> {
    p.check_shape(h)?;
    y.check_shape(h)?;
    if lambda.is_nan() || lambda < 0.0 {
        return Err(Error::Config(format!("lambda must be >= 0, got {lambda}")));
    }
    let pc = p.clamped();
    let bce: f64 = Level::ALL
        .into_iter()
        .map(|l| bce_mean(pc.level(l), y.level(l)))
        .sum();
    Ok(bce + lambda * hinge_hierarchy_loss(&pc, h)?)
}

/// Analytic gradient of [`total_loss`] with respect to every probability.
/// Entries whose probability lies in the clamped region get zero.
pub fn total_loss_gradient(
    p: &ProbabilityTable,
    y: &ProbabilityTable,
    lambda: f64,
    h: &LabelHierarchy,
) -> Result<ProbabilityTable> {
    p.check_shape(h)?;
    y.check_shape(h)?;
    let pc = p.clamped();
    let mut grad = ProbabilityTable::zeros(h);

    for lvl in Level::ALL {
        let n = pc.level(lvl).len() as f64;
        let probs = pc.level(lvl);
        let raw = p.level(lvl);
        let targets = y.level(lvl);
        for (i, g) in grad.level_mut(lvl).iter_mut().enumerate() {
            if raw[i] < EPSILON || raw[i] > 1.0 - EPSILON {
                continue;
            }
            let (pi, yi) = (probs[i], targets[i]);
            *g = (-yi / pi + (1.0 - yi) / (1.0 - pi)) / n;
        }
    }

    let live = |x: f64| (EPSILON..=1.0 - EPSILON).contains(&x);
    for g in 0..pc.gri.len() {
        let c = h.parent_index(g);
        if pc.gri[g] > pc.category[c] {
            if live(p.gri[g]) {
                grad.gri[g] += lambda;
            }
            if live(p.category[c]) {
                grad.category[c] -= lambda;
            }
        }
    }
    if let Some(gs) = selected_gri(&pc, h) {
        for s in 0..pc.sentiment.len() {
            if pc.sentiment[s] > pc.gri[gs] {
                if live(p.sentiment[s]) {
                    grad.sentiment[s] += lambda;
                }
                if live(p.gri[gs]) {
                    grad.gri[gs] -= lambda;
                }
            }
        }
    }
    Ok(grad)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> LabelHierarchy {
        LabelHierarchy::new(&["E", "S"], &[("e1", "E"), ("e2", "E"), ("s1", "S")], &["pos", "neu", "neg"]).unwrap()
    }

    #[test]
    fn hinge_inactive_when_children_below_parents() {
        let h = small();
        let p = ProbabilityTable {
            category: vec![0.9, 0.8],
            gri: vec![0.5, 0.4, 0.7],
            sentiment: vec![0.3, 0.6, 0.1],
        };
        assert_eq!(hinge_hierarchy_loss(&p, &h).unwrap(), 0.0);
    }

    #[test]
    fn single_violation() {
        let h = small();
        let p = ProbabilityTable {
            category: vec![0.4, 0.95],
            gri: vec![0.9, 0.1, 0.2],
            sentiment: vec![0.1, 0.2, 0.3],
        };
        assert!((hinge_hierarchy_loss(&p, &h).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn unknown_label_in_map() {
        let h = small();
        let mut m = HashMap::new();
        m.insert("zz".to_string(), 0.4);
        assert!(matches!(ProbabilityTable::from_map(&m, &h), Err(Error::UnknownLabel(_))));
    }

    #[test]
    fn perfect_prediction_has_near_zero_loss() {
        let h = small();
        let y = ProbabilityTable {
            category: vec![1.0, 0.0],
            gri: vec![1.0, 0.0, 0.0],
            sentiment: vec![0.0, 1.0, 0.0],
        };
        let loss = total_loss(&y, &y, 0.1, &h).unwrap();
        assert!(loss <= 1e-5, "{loss}");
    }

    #[test]
    fn lambda_zero_is_pure_bce_and_loss_grows_with_lambda() {
        let h = small();
        let p = ProbabilityTable {
            category: vec![0.3, 0.6],
            gri: vec![0.8, 0.2, 0.4],
            sentiment: vec![0.9, 0.1, 0.2],
        };
        let y = ProbabilityTable {
            category: vec![1.0, 0.0],
            gri: vec![1.0, 0.0, 0.0],
            sentiment: vec![1.0, 0.0, 0.0],
        };
        let l0 = total_loss(&p, &y, 0.0, &h).unwrap();
        let bce: f64 = Level::ALL.iter().map(|&l| bce_mean(p.level(l), y.level(l))).sum();
        assert!((l0 - bce).abs() < 1e-12);
        let l1 = total_loss(&p, &y, 0.5, &h).unwrap();
        let l2 = total_loss(&p, &y, 1.0, &h).unwrap();
        assert!(l0 < l1 && l1 < l2);
    }

    #[test]
    fn shape_mismatch() {
        let h = small();
        let mut p = ProbabilityTable::zeros(&h);
        p.gri.pop();
        assert!(matches!(total_loss(&p, &ProbabilityTable::zeros(&h), 0.1, &h), Err(Error::Shape(_))));
    }
}
