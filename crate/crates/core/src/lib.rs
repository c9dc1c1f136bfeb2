//! Document classification from class names alone.
//!
//! The pipeline turns contextualized token embeddings into class-oriented
//! document vectors, aligns documents to classes with a prior-seeded
//! tied-covariance Gaussian mixture, keeps the most confident assignments as
//! pseudo-labels, and trains a linear classifier on them.
//!
//! Stages, in order:
//!
//! 1. [`corpus`]: load the embedded corpus and average each word's vectors.
//! 2. [`class_rep`]: expand each class name into a ranked keyword list.
//! 3. [`doc_rep`]: weight tokens by fused attention ranks.
//! 4. [`alignment`]: prior labels, PCA, GMM (or k-means).
//! 5. [`selection`] and [`classifier`]: pseudo-labels and the final model.
//!
//! [`pipeline`] strings the stages together and [`hierarchy`] applies them
//! recursively over a class tree.

pub mod alignment;
pub mod artifacts;
pub mod class_rep;
pub mod classifier;
pub mod corpus;
pub mod doc_rep;
pub mod error;
pub mod eval;
pub mod hierarchy;
pub mod pipeline;
pub mod runner;
pub mod selection;
pub mod synth;
pub mod vector;

pub use error::{Error, Result};
