//! Corpus curation and model post-processing toolkit.
//!
//! The crate covers the whole path from raw web text to a merged model
//! checkpoint: JSONL corpus I/O, rule-based and perplexity filtering,
//! MinHash-LSH deduplication, n-gram decontamination, a hashed-feature
//! relevance classifier with bin-sampled threshold calibration, LLM-driven
//! curation flows, DARE-TIES weight merging, and evaluation metrics.

pub mod classifier;
pub mod corpus;
pub mod curation;
pub mod dedup;
pub mod error;
pub mod eval;
pub mod filters;
pub mod lm;
pub mod merge;
pub mod pipeline;
pub mod tokenize;

pub use error::{Error, Result};
