//! Seed-ensembled transformer encoder classifiers for sexism detection.
//!
//! Per-language WordPiece vocabularies feed small transformer encoders trained
//! with Adam. Binary (task1) predictions come from a majority vote over
//! several seed-varied encoders; texts voted sexist cascade into a
//! single five-way (task2) encoder.

pub mod cli;
pub mod corpus;
pub mod encoder;
pub mod ensemble;
pub mod eval;
pub mod pipeline;
pub mod synthetic;
pub mod textprep;
pub mod tokenizer;
pub mod trainer;
