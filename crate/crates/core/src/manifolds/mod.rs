//! Manifolds with exact geodesics and parallel translation.
//!
//! All three spaces use the metric `<X, Y> = tr X^T Y` on their Lie algebra
//! representation, so the sphere is the `k = 1` Stiefel manifold only up to a
//! factor of two in the metric (the `b` block appears twice in `x`).

use crate::error::Result;
use crate::rng::Rng;

mod product;
mod rotation;
mod sphere;
mod stiefel;

pub use product::Product;
pub use rotation::{so_distance, so_exp, so_transport, Rotation};
pub use sphere::{sphere_distance, sphere_exp, sphere_transport, Sphere};
pub use stiefel::{
    stiefel_change_coset, stiefel_exp, stiefel_exp_transport, stiefel_transport_ode, Coset, Stiefel, StiefelPoint,
    TangentM,
};

/// Geometry consumed by the optimizers.
pub trait Manifold {
    type Point: Clone + std::fmt::Debug;
    type Tangent: Clone + std::fmt::Debug;

    fn dim(&self) -> usize;

    fn inner(&self, p: &Self::Point, x: &Self::Tangent, y: &Self::Tangent) -> f64;

    fn norm(&self, p: &Self::Point, x: &Self::Tangent) -> f64 {
        self.inner(p, x, x).max(0.0).sqrt()
    }

    fn zero(&self, p: &Self::Point) -> Self::Tangent;

    /// `a x + b y` for tangents at the same point.
    fn lincomb(&self, a: f64, x: &Self::Tangent, b: f64, y: &Self::Tangent) -> Self::Tangent;

    fn scale(&self, a: f64, x: &Self::Tangent) -> Self::Tangent {
        self.lincomb(a, x, 0.0, x)
    }

    /// `exp_p(t x)`.
    fn exp(&self, p: &Self::Point, x: &Self::Tangent, t: f64) -> Result<Self::Point>;

    /// `exp_p(t x)` together with the geodesic velocity there, which is the
    /// parallel translate of `x`.
    fn exp_transport(
        &self,
        p: &Self::Point,
        x: &Self::Tangent,
        t: f64,
    ) -> Result<(Self::Point, Self::Tangent)>;

    /// Parallel translation of `w` along `s -> exp_p(s h)` up to `s = t`, when
    /// a closed form is available.
    fn transport(
        &self,
        _p: &Self::Point,
        _h: &Self::Tangent,
        _t: f64,
        _w: &Self::Tangent,
    ) -> Option<Result<Self::Tangent>> {
        None
    }

    fn distance(&self, p: &Self::Point, q: &Self::Point) -> f64;

    fn random_point(&self, rng: &mut Rng) -> Self::Point;

    fn random_tangent(&self, rng: &mut Rng, p: &Self::Point) -> Self::Tangent;
}
