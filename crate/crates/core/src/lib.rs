//! Evaluation harness for attribute-grounded selective reasoning over artworks.
//!
//! The crate is organised around the lifecycle of an evaluation run:
//!
//! - [`corpus`]: artworks, affect labels, salience annotations and manifests.
//! - [`backend`]: pluggable vision-language backends (HTTP, fixture, oracle)
//!   plus a content-addressed response cache.
//! - [`parse`]: turns free-text model output into typed decisions.
//! - [`pipeline`]: the two-stage salience-bottleneck pipeline and the
//!   single-stage baselines, with resumable on-disk run records.
//! - [`metrics`]: Dice/Tversky alignment, accuracies, flooding, compactness
//!   and inter-annotator agreement.
//! - [`report`]: scoring runs against gold data and rendering tables.
//! - [`cli`]: the `agsr` command-line driver.

pub mod backend;
pub mod cli;
pub mod corpus;
pub mod metrics;
pub mod parse;
pub mod pipeline;
pub mod report;

#[cfg(test)]
mod testutil;

pub use corpus::{AttributeId, Dataset, SalienceVector};
pub use metrics::{AttrSet, TverskyParams};
