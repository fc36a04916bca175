//! Training, uncertainty scoring and evaluation of small code models under
//! distribution shift.
//!
//! The pipeline runs in stages, each backed by one module:
//!
//! * [`corpus`] loads a shift manifest and assigns files to train, validation
//!   and shifted test splits.
//! * [`extraction`] tokenizes and parses a Java subset and emits path-context
//!   samples (method-name prediction) and CBOW samples (token completion).
//! * [`nn`] is a small dense network engine with hand-written gradients.
//! * [`tasks`] holds the two classifiers and their training loop.
//! * [`uncertainty`] implements the five confidence estimators.
//! * [`metrics`] computes AUC, AUPR and Brier.
//! * [`evalpipe`] assembles error/success and in-/out-of-distribution reports,
//!   threshold sweeps and runtime input filtering.
//! * [`synth`] generates a hermetic two-style Java corpus with manifests for
//!   all three shift kinds.

pub mod corpus;
pub mod error;
pub mod evalpipe;
pub mod extraction;
pub mod metrics;
pub mod nn;
pub mod seed;
pub mod synth;
pub mod tasks;
pub mod uncertainty;

pub use error::{Error, Result};
