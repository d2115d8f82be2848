//! Finite-element flows for elastic curves in conformally flat surfaces.

pub mod error;
pub mod exact;
pub mod guide;
pub mod harness;
pub mod mesh;
pub mod metric;
pub mod ode;
pub mod scheme;
pub mod solver;

pub use error::{Error, Result};

/// Planar vector.
pub type Vec2 = nalgebra::Vector2<f64>;
/// Planar 2×2 matrix.
pub type Mat2 = nalgebra::Matrix2<f64>;
/// Ambient three-dimensional vector (embedded surfaces).
pub type Vec3 = nalgebra::Vector3<f64>;
