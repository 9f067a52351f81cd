//! Statement-level clone detection for Solidity functions.
//!
//! The pipeline parses functions, splits their bodies into typed statement
//! trees, encodes statement-tree pairs as category-level feature vectors,
//! scores them with a boosted-tree classifier and aggregates the pairwise
//! scores into a function-level verdict with line-level matches.

pub mod classifier;
pub mod corpus;
pub mod error;
pub mod features;
pub mod frontend;
pub mod hpo;
pub mod pipeline;
pub mod rng;
pub mod similarity;
pub mod statement_tree;

pub use error::{Error, Result};
