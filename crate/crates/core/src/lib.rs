//! Polynomial regression on Riemannian manifolds.
//!
//! Geometries ([`sphere`], [`so3`], [`kendall`], and flat
//! [`geometry::Euclidean`]) implement [`Manifold`]. [`polyflow`] integrates
//! polynomial curves forward; [`regress`] fits them to timed data with
//! adjoint gradients.

pub mod cli;
pub mod error;
pub mod geometry;
pub mod kendall;
pub mod landmarks;
pub mod polyflow;
pub mod regress;
pub mod so3;
pub mod sphere;

pub use error::{Error, Result};
pub use geometry::{Euclidean, Manifold, ManifoldKind, Point, Tangent};
