//! Ternary block embedding: text + heading path + reading position.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::embedding::{EmbeddingProvider, HashEmbedder};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TernaryEmbedding {
    pub e_text: Vec<f64>,
    pub e_lvl: Vec<f64>,
    pub e_pos: Vec<f64>,
    pub e_blk: Vec<f64>,
}

pub fn compose_embedding(e_text: &[f64], e_lvl: &[f64], e_pos: &[f64]) -> Result<TernaryEmbedding> {
    let d = e_text.len();
    for v in [e_lvl, e_pos] {
        if v.len() != d {
            return Err(Error::Dimension {
                expected: d,
                got: v.len(),
            });
        }
    }
    let e_blk = (0..d).map(|k| e_text[k] + e_lvl[k] + e_pos[k]).collect();
    Ok(TernaryEmbedding {
        e_text: e_text.to_vec(),
        e_lvl: e_lvl.to_vec(),
        e_pos: e_pos.to_vec(),
        e_blk,
    })
}

/// Transformer-style sinusoidal encoding of a global reading-order index.
pub fn sinusoidal_position(pos: usize, d: usize) -> Vec<f64> {
    (0..d)
        .map(|k| {
            let pair = (k / 2) as f64;
            let angle = pos as f64 / 10000f64.powf(2.0 * pair / d as f64);
            if k % 2 == 0 {
                angle.sin()
            } else {
                angle.cos()
            }
        })
        .collect()
}

/// Heading-path encoder: mean of per-level hash embeddings, projected by a
/// fixed seeded matrix `W_lvl`. Stands in for a recurrent path encoder.
#[derive(Debug, Clone)]
pub struct HeadingPathEncoder {
    embedder: HashEmbedder,
    w_lvl: Vec<Vec<f64>>,
}

impl HeadingPathEncoder {
    pub fn new(dim: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        // uniform entries with variance 1/d
        let a = (3.0 / dim as f64).sqrt();
        let w_lvl = (0..dim)
            .map(|_| (0..dim).map(|_| rng.gen_range(-a..=a)).collect())
            .collect();
        HeadingPathEncoder {
            embedder: HashEmbedder::with_seed(dim, seed ^ 0x1e7e1),
            w_lvl,
        }
    }

    pub fn dim(&self) -> usize {
        self.w_lvl.len()
    }

    /// Empty titles are skipped; an empty path encodes to zeros.
    pub fn encode(&self, path: &[String]) -> Result<Vec<f64>> {
        let d = self.dim();
        let mut mean = vec![0.0; d];
        let titles: Vec<&String> = path.iter().filter(|t| !t.is_empty()).collect();
        if titles.is_empty() {
            return Ok(mean);
        }
        for t in &titles {
            for (m, x) in mean.iter_mut().zip(self.embedder.embed(t)?) {
                *m += x;
            }
        }
        let n = titles.len() as f64;
        mean.iter_mut().for_each(|m| *m /= n);
        Ok(matvec(&self.w_lvl, &mean))
    }
}

pub(crate) fn matvec(m: &[Vec<f64>], v: &[f64]) -> Vec<f64> {
    m.iter()
        .map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_and_cancelling_inputs() {
        let z = vec![0.0; 4];
        assert_eq!(compose_embedding(&z, &z, &z).unwrap().e_blk, z);
        let a = vec![0.5, -1.0, 2.0, 0.25];
        let neg: Vec<f64> = a.iter().map(|x| -x).collect();
        assert_eq!(compose_embedding(&a, &neg, &z).unwrap().e_blk, z);
    }

    #[test]
    fn fixture_sum() {
        let e = compose_embedding(&[1.0, 2.0, 3.0, 4.0], &[0.5, 0.5, 0.5, 0.5], &[0.0, 1.0, 0.0, -1.0]).unwrap();
        assert_eq!(e.e_blk, vec![1.5, 3.5, 3.5, 3.5]);
    }

    #[test]
    fn dimension_mismatch() {
        assert!(matches!(
            compose_embedding(&[1.0, 2.0], &[1.0], &[0.0, 0.0]),
            Err(Error::Dimension { expected: 2, got: 1 })
        ));
    }

    #[test]
    fn position_zero_alternates_sin_cos() {
        assert_eq!(sinusoidal_position(0, 4), vec![0.0, 1.0, 0.0, 1.0]);
        let p = sinusoidal_position(3, 4);
        assert!((p[0] - 3f64.sin()).abs() < 1e-15);
        assert!((p[3] - (3.0 / 100.0f64).cos()).abs() < 1e-15);
    }

    #[test]
    fn path_encoder_is_seeded() {
        let a = HeadingPathEncoder::new(8, 7);
        let b = HeadingPathEncoder::new(8, 7);
        let path = vec!["Environment".to_string(), "Energy".to_string(), String::new()];
        assert_eq!(a.encode(&path).unwrap(), b.encode(&path).unwrap());
        assert_eq!(a.encode(&[]).unwrap(), vec![0.0; 8]);
        assert_ne!(a.encode(&path).unwrap(), HeadingPathEncoder::new(8, 8).encode(&path).unwrap());
    }
}
