//! Rescaled Bowen balls, warped orbit matching and Monte Carlo estimates of
//! metric and topological pressure for flows with singularities.
//!
//! Everything numeric is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases at the crate root fix the scalar.

// `!(x > 0)` style checks deliberately reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod ergodic;
pub mod error;
pub mod flow_core;
pub mod pressure_metric;
pub mod pressure_topo;
pub mod scalar;
pub mod systems;
pub mod warp;

pub use error::{PressureError, Result};
pub use scalar::Scalar;

pub use ergodic::{EmpiricalMeasure, GridPartition, ItineraryWord, SmbEstimate};
pub use flow_core::{Point, Space, SystemSpec, Trajectory};
pub use pressure_metric::{CoverMode, CoverSolution, PotentialShape, PotentialSpec, PressureRow, PressureTable};
pub use pressure_topo::CompactSample;
pub use warp::{BallVariant, WarpBand, WarpPath};

pub type SystemF64 = SystemSpec<f64>;
pub type PointF64 = Point<f64>;
pub type TrajectoryF64 = Trajectory<f64>;
pub type MeasureF64 = EmpiricalMeasure<f64>;
pub type PartitionF64 = GridPartition<f64>;
pub type PotentialF64 = PotentialSpec<f64>;
pub type CompactF64 = CompactSample<f64>;
pub type BandF64 = WarpBand<f64>;

pub type SystemF32 = SystemSpec<f32>;
pub type PointF32 = Point<f32>;
pub type TrajectoryF32 = Trajectory<f32>;
pub type MeasureF32 = EmpiricalMeasure<f32>;
pub type PartitionF32 = GridPartition<f32>;
pub type PotentialF32 = PotentialSpec<f32>;
pub type CompactF32 = CompactSample<f32>;
pub type BandF32 = WarpBand<f32>;
