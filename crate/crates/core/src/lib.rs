//! Terrain analysis and classification for locating likely stagnant-water sites.
//!
//! The crate turns a DEM into hydrologically conditioned terrain features,
//! builds labelled point tables from field-survey inputs, screens features,
//! trains classifiers and renders per-cell probability rasters.

pub mod analysis;
pub mod error;
pub mod eval;
pub mod hydrology;
pub mod learn;
pub mod pipeline;
pub mod raster;
pub mod sampling;
pub mod synthetic;
pub mod terrain;

pub use error::{Error, Result};
pub use raster::{GeoPoint, GeoTransform, Raster, NODATA};
