//! Harness for measuring how input configuration (resolution, frame count,
//! temporal interval, grid layout, presentation mode) changes the way
//! vision-language models read sequential driving scenes.
//!
//! The crate is organized as a pipeline:
//!
//! - [`scene`]: configuration space, annotation schemas, answer keys, manifests
//! - [`frames`]: frame sampling, scaling, collage and GIF composition
//! - [`annotate`]: caption to ground-truth answer key extraction
//! - [`prompt`]: prompt construction and answer-key parsing
//! - [`gateway`]: model endpoints (HTTP adapters and a deterministic mock)
//! - [`protocol`]: phase plans, the evaluation runner and its record store
//! - [`metrics`]: composite score, F1, ANOVA sensitivity and report tables
//! - [`service`]: HTTP service for human baselines and data curation
//!
//! See the `examples/` directory for one runnable program per capability.

pub mod annotate;
pub mod frames;
pub mod gateway;
pub mod metrics;
pub mod prompt;
pub mod protocol;
pub mod scene;
pub mod service;
