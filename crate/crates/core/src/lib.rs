//! Simulation and feature pipeline for zone-level UWB positioning.
//!
//! The crate covers everything upstream of the neural networks:
//!
//! - [`geometry`]: sensor/target spaces, sensor placement and the polar zone partition.
//! - [`channel`]: clustered multipath with Nakagami fading and distance-dependent pathloss.
//! - [`pdp`]: energy-detected power delay profiles synthesized bin by bin.
//! - [`features`]: top-F powers with their bin indices, normalization, TOA/RSS baseline features.
//! - [`selection`]: adaptive choice of F from likelihood, acquisition probability and
//!   inter-zone KL divergence.

#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0.0)` also rejects NaN

pub mod channel;
pub mod error;
pub mod features;
pub mod geometry;
pub mod pdp;
pub mod rng;
pub mod selection;
pub mod special;

pub use error::{Error, Result};
pub use geometry::Point3;
