//! Recursive optimal transport similarity for sentences.
//!
//! Sentences are bags of weighted word vectors arranged in a tree (a balanced
//! binary split by position, or a dependency parse). ROT compares two
//! sentences level by level down their trees, passing each level's transport
//! plan down as a prior for the next. ROTS does the same with norm-modified
//! weights and a per-level coefficient that ties it to the cosine of the
//! weighted-average sentence vectors.

pub mod cli;
pub mod config;
pub mod embeddings;
pub mod error;
pub mod eval;
mod linalg;
pub mod similarity;
pub mod structure;
pub mod transport;
pub mod treebank;
pub mod weighting;

pub use error::{Error, Result};
pub use linalg::cosine;
