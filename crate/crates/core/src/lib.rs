//! Induce a label hierarchy from the co-occurrence structure of a
//! classifier's top-k predictions, then evaluate and diagnose it.
//!
//! The pipeline is: [`ingest`] prediction logs, count label co-occurrences
//! and derive distances ([`cooccur`]), cluster the labels ([`hclust`]) under a
//! [`linkage`] rule, then measure level-wise accuracy ([`evaluate`]) and
//! report late-merging labels ([`diagnose`]). Linkage rules and distance
//! measures are selected by name through [`registry`].

pub mod cache;
pub mod cooccur;
pub mod diagnose;
pub mod error;
pub mod evaluate;
pub mod export;
pub mod hclust;
pub mod ingest;
pub mod linkage;
pub mod pipeline;
pub mod registry;
pub mod synth;

pub use error::{Error, ErrorKind, Result};

/// Crate version, embedded in JSON artifacts.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
