//! Threshold segmentation and attention-weighted interface analysis for
//! micrographs of layered metal deposits.
//!
//! A particle swarm picks the binarization threshold that minimizes the Canny
//! edge count of the segmented image (with a penalty for near-empty or
//! near-full masks). The resulting interface edges then drive an exact
//! distance transform, attention maps, patch self-attention saliency,
//! interface-quality metrics and false-color renderings.
//!
//! Module map:
//!
//! * [`imaging`]: raster types, PGM/PPM/PNG I/O, histogram, binarize, normalize
//! * [`edges`]: Gaussian blur, Sobel, Canny
//! * [`pso`]: splitmix64, swarm optimizer, segmentation fitness
//! * [`geometry`]: distance transform, components, holes, bands
//! * [`attention`]: attention map, self-attention, interface metrics
//! * [`render`]: colormaps, overlays, multi-channel composite
//! * [`pipeline`]: configs, phantoms, batch analysis, JSON reports

pub mod attention;
pub mod edges;
pub mod error;
pub mod geometry;
pub mod imaging;
pub mod pipeline;
pub mod pso;
pub mod render;

pub use error::{Error, Result};
