use std::time::Duration;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::features::PairFeatures;

/// Probability that block `j` directly follows block `i`.
pub trait SuccessionScorer: Send + Sync {
    fn name(&self) -> &str;
    /// Must return a value in `[0, 1]`.
    fn score(&self, f: &PairFeatures) -> Result<f64>;
}

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// `sigmoid(w . phi + b)` over the raw concatenated feature vector.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearSigmoidScorer {
    pub w: Vec<f64>,
    pub b: f64,
}

impl LinearSigmoidScorer {
    pub fn new(w: Vec<f64>, b: f64) -> Self {
        LinearSigmoidScorer { w, b }
    }

    pub fn zeros(len: usize) -> Self {
        Self::new(vec![0.0; len], 0.0)
    }
}

impl SuccessionScorer for LinearSigmoidScorer {
    fn name(&self) -> &str {
        "linear"
    }

    fn score(&self, f: &PairFeatures) -> Result<f64> {
        let phi = f.to_vec();
        if phi.len() != self.w.len() {
            return Err(Error::Dimension {
                expected: self.w.len(),
                got: phi.len(),
            });
        }
        let z: f64 = self.w.iter().zip(&phi).map(|(w, x)| w * x).sum::<f64>() + self.b;
        Ok(sigmoid(z))
    }
}

/// Hand-set linear head over a small geometric basis:
///
/// * `same_col`: horizontal overlap of at least half the wider box, counted
///   only for a successor within forward reach
/// * `fwd`: closeness of a downward successor, `max(0, 1 - dy / 0.5)` for `dy > 0`
/// * `up`: 1 when `j` sits above `i`
///
/// The default weights favour short downward steps inside a column and
/// push upward steps well below any sensible threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct GeometricScorer {
    pub w_same_col: f64,
    pub w_fwd_in_col: f64,
    pub w_fwd: f64,
    pub w_up: f64,
    pub bias: f64,
}

impl Default for GeometricScorer {
    fn default() -> Self {
        GeometricScorer {
            w_same_col: 1.5,
            w_fwd_in_col: 3.5,
            w_fwd: 1.0,
            w_up: -3.0,
            bias: -2.0,
        }
    }
}

impl GeometricScorer {
    pub const COLUMN_OVERLAP: f64 = 0.5;
    pub const FORWARD_REACH: f64 = 0.5;

    pub fn basis(f: &PairFeatures) -> [f64; 4] {
        let fwd = if f.dy > 0.0 {
            (1.0 - f.dy / Self::FORWARD_REACH).max(0.0)
        } else {
            0.0
        };
        let same_col = if f.x_overlap >= Self::COLUMN_OVERLAP && fwd > 0.0 { 1.0 } else { 0.0 };
        let up = if f.dy < 0.0 { 1.0 } else { 0.0 };
        [same_col, same_col * fwd, fwd, up]
    }
}

impl SuccessionScorer for GeometricScorer {
    fn name(&self) -> &str {
        "geometric"
    }

    fn score(&self, f: &PairFeatures) -> Result<f64> {
        let [same_col, fwd_in_col, fwd, up] = Self::basis(f);
        let z = self.bias
            + self.w_same_col * same_col
            + self.w_fwd_in_col * fwd_in_col
            + self.w_fwd * fwd
            + self.w_up * up;
        Ok(sigmoid(z))
    }
}

/// Remote scorer: POSTs `{"features": [...]}` and expects `{"score": float}`.
pub struct ServiceScorer {
    name: String,
    url: String,
    agent: ureq::Agent,
}

impl ServiceScorer {
    pub fn new(url: impl Into<String>) -> Self {
        let url = url.into();
        ServiceScorer {
            name: format!("service:{url}"),
            url,
            agent: ureq::AgentBuilder::new().timeout(Duration::from_secs(60)).build(),
        }
    }
}

#[derive(Deserialize)]
struct ScoreResponse {
    score: f64,
}

impl SuccessionScorer for ServiceScorer {
    fn name(&self) -> &str {
        &self.name
    }

    fn score(&self, f: &PairFeatures) -> Result<f64> {
        let resp: ScoreResponse = self
            .agent
            .post(&self.url)
            .send_json(serde_json::json!({ "features": f.to_vec() }))
            .map_err(|e| Error::Service(e.to_string()))?
            .into_json()
            .map_err(|e| Error::Service(format!("bad score response: {e}")))?;
        if !(0.0..=1.0).contains(&resp.score) {
            return Err(Error::Service(format!("score {} outside [0,1]", resp.score)));
        }
        Ok(resp.score)
    }
}

/// `geometric` or `service:<url>`.
pub fn scorer_from_spec(spec: &str) -> Result<Box<dyn SuccessionScorer>> {
    match spec {
        "geometric" => Ok(Box::new(GeometricScorer::default())),
        s => match s.strip_prefix("service:") {
            Some(url) => Ok(Box::new(ServiceScorer::new(url))),
            None => Err(Error::Config(format!("unknown scorer `{s}`"))),
        },
    }
}
