// SPDX-License-Identifier: Apache-2.0

//! Density sketches: a fixed-size, mergeable summary of a stream of
//! `d`-dimensional points that answers point density queries and generates
//! synthetic samples distributed approximately like the input.
//!
//! - [`partition`] maps points to grid cells (regular, aligned, l2-LSH).
//! - [`countsketch`] stores signed cell counts in `K x R` counters.
//! - [`topbins`] keeps the `H` heaviest cells for sampling.
//! - [`sketch`] ties them together; [`format`] is the on-disk encoding.
//! - [`oracle`] holds exact reference estimators and the statistical
//!   evaluation harness.
//! - [`io`] parses numeric point streams.

pub mod countsketch;
pub mod error;
pub mod format;
pub mod hash;
pub mod io;
pub mod linalg;
pub mod oracle;
pub mod partition;
pub mod sketch;
pub mod topbins;

pub use countsketch::{CountEstimate, CountSketch, Recovery};
pub use error::{Error, Result};
pub use partition::{BinId, LshPartition, Partitioner, Scheme};
pub use sketch::{DensitySketch, Sampler, SketchConfig};
pub use topbins::TopBins;
