//! Migration networks of notable individuals and radiation-model
//! simulations of their mobility.
//!
//! The crate is organized as a pipeline:
//!
//! - [`ingest`] parses person, footstep and city tables and filters them to a
//!   time window,
//! - [`geo`] provides great-circle geometry and nearest-city assignment,
//! - [`netbuild`] builds migration networks and fits PageRank, Heaps' law and
//!   trip-count estimators,
//! - [`radiation`] builds single and multilevel radiation kernels,
//! - [`sim`] runs walker ensembles over those kernels,
//! - [`stats`] bins mobility statistics and compares them,
//! - [`pipeline`] and [`cli`] tie everything together.
//!
//! Geometry and kernels are generic over [`Real`] (`f32` or `f64`); the
//! aliases below fix the scalar.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod config;
pub mod error;
pub mod geo;
pub mod ingest;
pub mod netbuild;
pub mod pipeline;
pub mod radiation;
pub mod scalar;
pub mod sim;
pub mod stats;

pub use error::{Error, Result};
pub use scalar::Real;

pub type GeoPoint64 = geo::GeoPoint<f64>;
pub type GeoPoint32 = geo::GeoPoint<f32>;
pub type DistanceMatrix64 = geo::DistanceMatrix<f64>;
pub type DistanceMatrix32 = geo::DistanceMatrix<f32>;
pub type Attractiveness64 = radiation::Attractiveness<f64>;
pub type Attractiveness32 = radiation::Attractiveness<f32>;
pub type RadiationKernel64 = radiation::RadiationKernel<f64>;
pub type RadiationKernel32 = radiation::RadiationKernel<f32>;
pub type MultilevelKernel64 = radiation::MultilevelKernel<f64>;
pub type MultilevelKernel32 = radiation::MultilevelKernel<f32>;
pub type Centrality64 = netbuild::Centrality<f64>;
pub type Centrality32 = netbuild::Centrality<f32>;
pub type HeapsFit64 = netbuild::HeapsFit<f64>;
pub type HeapsFit32 = netbuild::HeapsFit<f32>;
