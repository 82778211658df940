//! Desk-scale universal language representation learning.
//!
//! The pipeline: tokenize a corpus ([`corpus`]), mine n-grams by
//! length-normalized PMI ([`ngram`]), train a small transformer encoder
//! ([`encoder`]) with a compositional objective alongside masked language
//! modeling ([`training`]), then evaluate embeddings on analogy and
//! paraphrase retrieval tasks ([`evaluation`]).

pub mod cli;
pub mod config;
pub mod corpus;
pub mod encoder;
pub mod error;
pub mod evaluation;
pub mod ngram;
pub mod rng;
pub mod synthetic;
pub mod training;

pub use error::{Error, Result};
