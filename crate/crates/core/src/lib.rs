//! Raster analytics for flood-risk estimation on gridded terrain.
//!
//! The crate covers the full chain from raw rasters to a validated risk map:
//!
//! * grid container and ESRI ASCII I/O ([`grid`], [`ascii`])
//! * connected components and exact Euclidean distance transforms ([`spatial`])
//! * water-body screening and DEM conditioning ([`hydro`])
//! * D8 / multiple-flow-direction routing, accumulation, stream networks
//!   ([`flow`], [`streams`])
//! * watershed delineation under an area threshold ([`watershed`])
//! * indicator rating, natural-breaks classification ([`rating`], [`jenks`])
//! * pairwise-comparison weighting and zonally constrained index assembly
//!   ([`ahp`])
//! * validation metrics against observed flood extents ([`validate`])
//! * a deterministic end-to-end pipeline with a TOML configuration
//!   ([`config`], [`pipeline`])
//!
//! Everything is single threaded and allocation light; reruns over the same
//! inputs produce byte-identical artifacts.

pub mod ahp;
pub mod ascii;
pub mod config;
pub mod error;
pub mod flow;
pub mod grid;
pub mod hydro;
pub mod jenks;
pub mod pipeline;
pub mod rating;
pub mod spatial;
pub mod streams;
pub mod validate;
pub mod watershed;

pub use error::{Error, Result};
pub use grid::{GeoGrid, GridGeometry, Mask, ZoneLabels};
