//! Field-specific word embeddings and linguistic shift analysis.
//!
//! The pipeline preprocesses one corpus per field ([`corpus`]), trains a
//! skip-gram model with hierarchical softmax sequentially over the fields
//! ([`embed`]), scores every shared word for shift ([`shift`]) and draws a
//! chosen word's trajectory as a scatterplot ([`scatter`]) or a storyline
//! ([`storyline`]). [`cli`] runs the stages from a config file.

pub mod cli;
pub mod corpus;
pub mod embed;
pub mod error;
pub mod sample;
pub mod scatter;
pub mod shift;
pub mod storyline;
pub mod svg;

pub use error::{Error, Result};
