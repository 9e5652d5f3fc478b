//! Stacked attention over heading-level references.
//!
//! Level `h` attends from the block embedding to a reference set whose first
//! member is the previous level's output `v^(h-1)` (with `v^(0) = E_lvl`).
//! Additional references, one per candidate parent-label context, may be
//! supplied per level.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::embedding::matvec;
use crate::error::{Error, Result};

/// Square `d x d` projections for one attention level.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionParams {
    pub wq: Vec<Vec<f64>>,
    pub wk: Vec<Vec<f64>>,
    pub wv: Vec<Vec<f64>>,
}

impl AttentionParams {
    pub fn identity(d: usize) -> Self {
        let eye: Vec<Vec<f64>> = (0..d)
            .map(|i| (0..d).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect();
        AttentionParams {
            wq: eye.clone(),
            wk: eye.clone(),
            wv: eye,
        }
    }

    pub fn seeded(d: usize, rng: &mut ChaCha8Rng) -> Self {
        let a = (3.0 / d as f64).sqrt();
        let mut m = || -> Vec<Vec<f64>> {
            (0..d)
                .map(|_| (0..d).map(|_| rng.gen_range(-a..=a)).collect())
                .collect()
        };
        AttentionParams {
            wq: m(),
            wk: m(),
            wv: m(),
        }
    }

    pub fn seeded_stack(d: usize, levels: usize, seed: u64) -> Vec<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..levels).map(|_| Self::seeded(d, &mut rng)).collect()
    }

    pub fn dim(&self) -> usize {
        self.wq.len()
    }

    fn check(&self, d: usize) -> Result<()> {
        for m in [&self.wq, &self.wk, &self.wv] {
            if m.len() != d {
                return Err(Error::Dimension { expected: d, got: m.len() });
            }
            if let Some(row) = m.iter().find(|r| r.len() != d) {
                return Err(Error::Dimension { expected: d, got: row.len() });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttentionStep {
    /// Softmax weights over the reference set, in reference order.
    pub weights: Vec<f64>,
    pub output: Vec<f64>,
}

/// Numerically stable softmax.
pub fn softmax(scores: &[f64]) -> Vec<f64> {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
    let z: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / z).collect()
}

/// One attention step: `softmax((Wq q)^T (Wk r) / sqrt d) . Wv r` over refs `r`.
pub fn attend(query: &[f64], refs: &[Vec<f64>], p: &AttentionParams, level: usize) -> Result<AttentionStep> {
    let d = query.len();
    p.check(d)?;
    if refs.is_empty() {
        return Err(Error::Shape(format!("empty reference set at level {level}")));
    }
    if let Some(r) = refs.iter().find(|r| r.len() != d) {
        return Err(Error::Dimension { expected: d, got: r.len() });
    }
    let q = matvec(&p.wq, query);
    let scale = (d as f64).sqrt();
    let scores: Vec<f64> = refs
        .iter()
        .map(|r| {
            let k = matvec(&p.wk, r);
            q.iter().zip(&k).map(|(a, b)| a * b).sum::<f64>() / scale
        })
        .collect();
    let weights = softmax(&scores);
    let mut output = vec![0.0; d];
    for (w, r) in weights.iter().zip(refs) {
        for (o, v) in output.iter_mut().zip(matvec(&p.wv, r)) {
            *o += w * v;
        }
    }
    if weights.iter().chain(&output).any(|x| !x.is_finite()) {
        return Err(Error::Numeric { level });
    }
    Ok(AttentionStep { weights, output })
}

/// Runs `params.len()` levels starting from `v0`. `extra_refs[h-1]`, when
/// present, is appended to level `h`'s reference set after `v^(h-1)`.
pub fn hierarchical_attention(
    e_blk: &[f64],
    v0: &[f64],
    params: &[AttentionParams],
    extra_refs: &[Vec<Vec<f64>>],
) -> Result<Vec<AttentionStep>> {
    if params.is_empty() {
        return Err(Error::Shape("attention needs at least one level".into()));
    }
    let mut steps = Vec::with_capacity(params.len());
    let mut prev = v0.to_vec();
    for (h, p) in params.iter().enumerate() {
        let mut refs = vec![prev];
        if let Some(extra) = extra_refs.get(h) {
            refs.extend(extra.iter().cloned());
        }
        let step = attend(e_blk, &refs, p, h + 1)?;
        prev = step.output.clone();
        steps.push(step);
    }
    Ok(steps)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn singleton_with_identity_is_a_fixed_point() {
        let v0 = vec![0.3, -0.2, 0.9];
        let params = vec![AttentionParams::identity(3); 3];
        let steps = hierarchical_attention(&[1.0, 2.0, 3.0], &v0, &params, &[]).unwrap();
        for s in steps {
            assert_eq!(s.weights, vec![1.0]);
            assert_eq!(s.output, v0);
        }
    }

    #[test]
    fn equal_scores_average_refs() {
        // zero query -> all scores 0 -> uniform weights
        let p = AttentionParams::identity(2);
        let s = attend(&[0.0, 0.0], &[vec![1.0, 0.0], vec![0.0, 3.0]], &p, 1).unwrap();
        assert_eq!(s.weights, vec![0.5, 0.5]);
        assert_eq!(s.output, vec![0.5, 1.5]);
    }

    #[test]
    fn non_finite_reports_level() {
        let p = AttentionParams::identity(1);
        let err = attend(&[f64::NAN], &[vec![1.0]], &p, 2).unwrap_err();
        assert!(matches!(err, Error::Numeric { level: 2 }));
    }

    #[test]
    fn shape_checks() {
        let p = AttentionParams::identity(2);
        assert!(attend(&[0.0, 0.0, 0.0], &[vec![0.0; 3]], &p, 1).is_err());
        assert!(hierarchical_attention(&[0.0], &[0.0], &[], &[]).is_err());
    }
}
