//! Thin-source model of one- and two-photon Young's double-slit interference
//! with a down-converted photon-pair source, plus the Monte Carlo camera model
//! and the frame-reduction pipeline that recovers the coincidence function.
//!
//! The crate is `no_std` (it needs `alloc`). File formats, parallel drivers and
//! the command-line tool live in the `twophoton` crate.
#![no_std]
// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod biphoton;
pub mod error;
pub mod framepipe;
pub mod grid;
mod math;
pub mod optics;
pub mod patterns;
pub mod sensor;
pub mod visibility;

pub use error::{Error, Result};
pub use grid::SpatialGrid;
pub use math::{cabs, sinc};

pub use nalgebra::{Complex, DMatrix};

/// Complex amplitude used throughout.
pub type C64 = Complex<f64>;
