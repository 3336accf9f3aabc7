use super::Manifold;
use crate::error::Result;
use crate::rng::Rng;

/// Riemannian product `M1 x M2` with the sum metric.
#[derive(Debug, Clone, Copy)]
pub struct Product<A, B> {
    pub first: A,
    pub second: B,
}

impl<A, B> Product<A, B> {
    pub fn new(first: A, second: B) -> Self {
        Product { first, second }
    }
}

impl<A: Manifold, B: Manifold> Manifold for Product<A, B> {
    type Point = (A::Point, B::Point);
    type Tangent = (A::Tangent, B::Tangent);

    fn dim(&self) -> usize {
        self.first.dim() + self.second.dim()
    }

    fn inner(&self, p: &Self::Point, x: &Self::Tangent, y: &Self::Tangent) -> f64 {
        self.first.inner(&p.0, &x.0, &y.0) + self.second.inner(&p.1, &x.1, &y.1)
    }

    fn zero(&self, p: &Self::Point) -> Self::Tangent {
        (self.first.zero(&p.0), self.second.zero(&p.1))
    }

    fn lincomb(&self, a: f64, x: &Self::Tangent, b: f64, y: &Self::Tangent) -> Self::Tangent {
        (
            self.first.lincomb(a, &x.0, b, &y.0),
            self.second.lincomb(a, &x.1, b, &y.1),
        )
    }

    fn exp(&self, p: &Self::Point, x: &Self::Tangent, t: f64) -> Result<Self::Point> {
        Ok((self.first.exp(&p.0, &x.0, t)?, self.second.exp(&p.1, &x.1, t)?))
    }

    fn exp_transport(
        &self,
        p: &Self::Point,
        x: &Self::Tangent,
        t: f64,
    ) -> Result<(Self::Point, Self::Tangent)> {
        let (p0, x0) = self.first.exp_transport(&p.0, &x.0, t)?;
        let (p1, x1) = self.second.exp_transport(&p.1, &x.1, t)?;
        Ok(((p0, p1), (x0, x1)))
    }

    fn transport(
        &self,
        p: &Self::Point,
        h: &Self::Tangent,
        t: f64,
        w: &Self::Tangent,
    ) -> Option<Result<Self::Tangent>> {
        let a = self.first.transport(&p.0, &h.0, t, &w.0)?;
        let b = self.second.transport(&p.1, &h.1, t, &w.1)?;
        Some(a.and_then(|a| b.map(|b| (a, b))))
    }

    fn distance(&self, p: &Self::Point, q: &Self::Point) -> f64 {
        self.first
            .distance(&p.0, &q.0)
            .hypot(self.second.distance(&p.1, &q.1))
    }

    fn random_point(&self, rng: &mut Rng) -> Self::Point {
        (self.first.random_point(rng), self.second.random_point(rng))
    }

    fn random_tangent(&self, rng: &mut Rng, p: &Self::Point) -> Self::Tangent {
        (
            self.first.random_tangent(rng, &p.0),
            self.second.random_tangent(rng, &p.1),
        )
    }
}
