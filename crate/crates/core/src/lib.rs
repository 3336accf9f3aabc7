//! Geodesic optimization on the sphere, the rotation group and the Stiefel
//! manifold, with eigensolvers, matrix gradient flows and subspace tracking
//! built on top.

pub mod eigensolvers;
pub mod error;
pub mod flows;
pub mod linalg;
pub mod manifolds;
pub mod objectives;
pub mod optimizers;
pub mod rng;
pub mod tracking;

pub use error::{Error, Result};
