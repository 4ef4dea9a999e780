//! Exact-counting workbench for δ-discretized Furstenberg-set geometry in the plane.
//!
//! Plane sets live on a fixed dyadic grid over the window `[-4, 4]²` ([`grid`]),
//! affine lines carry three interchangeable parametrizations ([`linespace`]),
//! and the remaining modules build Furstenberg instances, regularize sets,
//! count incidences and pairs, and replay the projective incidence pipeline.
//!
//! Line and point geometry is generic over the [`Scalar`] type; counting is done
//! in exact integer arithmetic on cells. Concrete aliases for the two float
//! widths are exported at the crate root.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod generators;
pub mod grid;
pub mod linespace;
pub mod pipeline;
pub mod projective;
pub mod regularity;
pub mod scalar;
pub mod statistics;

pub use error::{Error, Result};
pub use grid::{CellIndex, CellSet, Scale};
pub use scalar::{Point, Scalar};

pub type Point64 = scalar::Point<f64>;
pub type Point32 = scalar::Point<f32>;
pub type Line64 = linespace::Line<f64>;
pub type Line32 = linespace::Line<f32>;
pub type SlopeIntercept64 = linespace::SlopeIntercept<f64>;
pub type SlopeIntercept32 = linespace::SlopeIntercept<f32>;
pub type DualPoint64 = linespace::DualPoint<f64>;
pub type DualPoint32 = linespace::DualPoint<f32>;
