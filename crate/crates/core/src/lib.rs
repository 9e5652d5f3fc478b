//! Structure reconstruction for layout-analyzed ESG reports.
//!
//! Blocks from a layout JSON are put into reading order from pairwise
//! succession scores, organized under a heading tree anchored on the
//! report's table of contents, narrated (images) and labeled with an
//! ESG category, a GRI indicator and a sentiment.

pub mod embedding;
pub mod error;
pub mod align;
pub mod features;
pub mod labeling;
pub mod llm;
pub mod model;
pub mod narration;
pub mod pipeline;
pub mod reading_order;
pub mod text;
pub mod toc;

pub use error::{Error, Result};
