//! Exit times for the tug-of-war with noise in planar wedges.
//!
//! The library builds the explicit solution `u = r² f(θ)` of `Δₚ u = −1` in a wedge,
//! computes the critical aperture beyond which no such solution exists, and simulates the
//! game to check the resulting exit-time bounds.

pub mod error;
pub mod game;
pub mod geom;
pub mod montecarlo;
pub mod numerics;
pub mod profile;
pub mod psolution;
pub mod rng;
pub mod wedge_ode;

pub use error::{Error, Result};
pub use geom::{Sym2, Vec2};
