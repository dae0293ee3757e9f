//! # whosai
//!
//! A triplet-network contrastive learning pipeline for deciding whether a
//! text was written by a human or an AI generator (Turing Test) and for
//! attributing it to a specific generator (Authorship Attribution).
//!
//! Training pools token embeddings into sentence embeddings, mines
//! informative pairs online with a multi-similarity scheme, and minimizes a
//! hinge triplet loss under a dynamically increasing margin, with optional
//! token-deletion / span-cropping corruption of the inputs. Inference is
//! nearest-centroid over per-category mean embeddings; new generator
//! categories register incrementally without retraining.
//!
//! The reference encoder is a small trainable character-n-gram model with
//! exact analytic gradients; externally precomputed sentence embeddings can
//! be plugged in through a JSONL adapter instead.

pub mod classify;
pub mod cli;
pub mod contrastive;
pub mod corpus;
pub mod encoder;
pub mod error;
pub mod eval;
pub mod textproc;
pub mod trainer;

pub use error::{Error, Result};
