//! Readability engine for force-directed graph drawings.
//!
//! The pipeline generates or samples graphs ([`graphgen`], [`community`]),
//! lays them out ([`layout`]), scores the drawings ([`metrics`]), renders them
//! to fixed-size images ([`render`]) and writes labeled datasets
//! ([`dataset`]). [`evalkit`] holds the statistics and timing harness used to
//! compare coordinate-based scoring against image-based predictors.

pub mod community;
pub mod dataset;
pub mod evalkit;
pub mod geometry;
pub mod graph;
pub mod graphgen;
pub mod layout;
pub mod metrics;
pub mod render;
pub mod seed;

pub use graph::{Graph, GraphError};
