//! Structure-aware KV-cache compression policy engine for source code.
//!
//! The pipeline chunks a corpus, ranks chunks against a query, builds a small
//! code property graph per selected chunk, turns its structure into a token
//! budget, protects structurally important spans, and fills what is left by
//! attention importance. The output is a [`plan::CompressionPlan`].

pub mod ast;
pub mod attention;
pub mod backend;
pub mod budget;
pub mod canonical;
pub mod chunker;
pub mod config;
pub mod cpg;
pub mod error;
pub mod layout;
pub mod lexer;
pub mod metrics;
pub mod parser;
pub mod pipeline;
pub mod plan;
mod range_serde;
pub mod scalar;
pub mod scoring;
pub mod span;
pub mod synth;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type AllocationConfig = budget::AllocationConfig<f64>;
pub type FeatureWeights = scoring::FeatureWeights<f64>;
pub type ScalingConstants = scoring::ScalingConstants<f64>;
pub type Matrix = attention::Matrix<f64>;
pub type AttentionWindow = attention::AttentionWindow<f64>;
