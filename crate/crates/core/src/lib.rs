//! Angle-of-progression measurement engine.
//!
//! The crate turns segmentation network outputs (class logits plus a spatial
//! confidence map) into an angle-of-progression measurement with a
//! reliability score, and carries the unsupervised test-time adaptation
//! objective that is driven by that score. Everything here is pure
//! computation over in-memory rasters; file formats and the command line
//! live in the `aop-tools` crate.
//!
//! Coordinates follow the image convention: `x` is the column, `y` is the
//! row, and continuous pixel centers sit at `(col + 0.5, row + 0.5)`.

#![cfg_attr(not(test), no_std)]
// `!(x > 0.0)` is how NaN gets rejected along with the out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod error;
pub mod geometry;
pub mod metrics;
pub mod morphology;
pub mod phantom;
pub mod raster;
pub mod rng;
pub mod tta;

pub(crate) mod linalg;
pub(crate) mod math;

pub use error::{Error, Result, Stage, StageError};
pub use geometry::{compute_aop, AopResult, Ellipse, Point, PsAxis};
pub use raster::{Class, ConfMap, LabelMask, LogitMap, PixelSpacing, ProbMap};
