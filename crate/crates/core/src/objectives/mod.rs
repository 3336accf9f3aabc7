//! Objective functions with value, Riemannian gradient and the second
//! covariant differential.
//!
//! Objectives are stated in their natural sense (the Rayleigh quotients are
//! maximized); the optimizers minimize, so callers wrap maximization problems
//! in [`Negated`].

use crate::error::{Error, Result};
use crate::manifolds::Manifold;

mod rotation;
mod sphere;
mod stiefel;

pub use rotation::{Jacobi, TraceThetaQN};
pub use sphere::RayleighQ;
pub use stiefel::{grad_from_euclidean, AOp, GenRayleigh, SigmaDouble, SigmaPrime};

/// Smooth function on a manifold.
pub trait Objective<M: Manifold> {
    fn value(&self, p: &M::Point) -> Result<f64>;

    /// Riemannian gradient under the manifold's metric.
    fn gradient(&self, p: &M::Point) -> Result<M::Tangent>;

    fn value_grad(&self, p: &M::Point) -> Result<(f64, M::Tangent)> {
        Ok((self.value(p)?, self.gradient(p)?))
    }

    /// Second covariant differential `(nabla^2 f)_p(x, y)`.
    fn hess(&self, p: &M::Point, x: &M::Tangent, y: &M::Tangent) -> Result<f64>;

    /// `[hess(x, x), hess(x, y), hess(y, y)]`; objectives whose Hessian needs
    /// operator applications override this to share them.
    fn hess_triple(&self, p: &M::Point, x: &M::Tangent, y: &M::Tangent) -> Result<[f64; 3]> {
        Ok([self.hess(p, x, x)?, self.hess(p, x, y)?, self.hess(p, y, y)?])
    }

    /// The self-adjoint operator with `hess(x, y) = <hess_apply(x), y>`.
    fn hess_apply(&self, _p: &M::Point, _x: &M::Tangent) -> Option<Result<M::Tangent>> {
        None
    }

    /// A specialized Newton direction `-(nabla^2 f)^{-1} grad f`.
    fn newton_direction(&self, _p: &M::Point) -> Option<Result<M::Tangent>> {
        None
    }
}

impl<M: Manifold, O: Objective<M> + ?Sized> Objective<M> for &O {
    fn value(&self, p: &M::Point) -> Result<f64> {
        (**self).value(p)
    }
    fn gradient(&self, p: &M::Point) -> Result<M::Tangent> {
        (**self).gradient(p)
    }
    fn value_grad(&self, p: &M::Point) -> Result<(f64, M::Tangent)> {
        (**self).value_grad(p)
    }
    fn hess(&self, p: &M::Point, x: &M::Tangent, y: &M::Tangent) -> Result<f64> {
        (**self).hess(p, x, y)
    }
    fn hess_triple(&self, p: &M::Point, x: &M::Tangent, y: &M::Tangent) -> Result<[f64; 3]> {
        (**self).hess_triple(p, x, y)
    }
    fn hess_apply(&self, p: &M::Point, x: &M::Tangent) -> Option<Result<M::Tangent>> {
        (**self).hess_apply(p, x)
    }
    fn newton_direction(&self, p: &M::Point) -> Option<Result<M::Tangent>> {
        (**self).newton_direction(p)
    }
}

/// `-f`, so that maximization problems can be handed to the minimizers.
#[derive(Debug, Clone)]
pub struct Negated<M, O> {
    pub manifold: M,
    pub inner: O,
}

impl<M, O> Negated<M, O> {
    pub fn new(manifold: M, inner: O) -> Self {
        Negated { manifold, inner }
    }
}

impl<M: Manifold, O: Objective<M>> Objective<M> for Negated<M, O> {
    fn value(&self, p: &M::Point) -> Result<f64> {
        Ok(-self.inner.value(p)?)
    }

    fn gradient(&self, p: &M::Point) -> Result<M::Tangent> {
        Ok(self.manifold.scale(-1.0, &self.inner.gradient(p)?))
    }

    fn value_grad(&self, p: &M::Point) -> Result<(f64, M::Tangent)> {
        let (f, g) = self.inner.value_grad(p)?;
        Ok((-f, self.manifold.scale(-1.0, &g)))
    }

    fn hess(&self, p: &M::Point, x: &M::Tangent, y: &M::Tangent) -> Result<f64> {
        Ok(-self.inner.hess(p, x, y)?)
    }

    fn hess_triple(&self, p: &M::Point, x: &M::Tangent, y: &M::Tangent) -> Result<[f64; 3]> {
        let [a, b, c] = self.inner.hess_triple(p, x, y)?;
        Ok([-a, -b, -c])
    }

    fn hess_apply(&self, p: &M::Point, x: &M::Tangent) -> Option<Result<M::Tangent>> {
        self.inner
            .hess_apply(p, x)
            .map(|r| r.map(|v| self.manifold.scale(-1.0, &v)))
    }

    fn newton_direction(&self, p: &M::Point) -> Option<Result<M::Tangent>> {
        // The Newton step does not depend on the sign of f.
        self.inner.newton_direction(p)
    }
}

/// `d/dt <grad f(exp_p t z), tau z>` at `t = 0` by central differences, which
/// is `hess(z, z)`.
fn fd_hess_diag<M: Manifold, O: Objective<M> + ?Sized>(
    m: &M,
    obj: &O,
    p: &M::Point,
    z: &M::Tangent,
    step: f64,
) -> Result<f64> {
    let nz = m.norm(p, z);
    if nz == 0.0 {
        return Ok(0.0);
    }
    let eps = step / nz;
    let slope = |t: f64| -> Result<f64> {
        let (q, v) = m.exp_transport(p, z, t)?;
        let g = obj.gradient(&q)?;
        Ok(m.inner(&q, &g, &v))
    };
    Ok((slope(eps)? - slope(-eps)?) / (2.0 * eps))
}

/// Second covariant differential from gradients along geodesics, polarized:
/// `hess(x, y) = (h(x + y) - h(x - y)) / 4`.
pub fn fd_hess<M: Manifold, O: Objective<M> + ?Sized>(
    m: &M,
    obj: &O,
    p: &M::Point,
    x: &M::Tangent,
    y: &M::Tangent,
    step: f64,
) -> Result<f64> {
    let plus = m.lincomb(1.0, x, 1.0, y);
    let minus = m.lincomb(1.0, x, -1.0, y);
    Ok(0.25 * (fd_hess_diag(m, obj, p, &plus, step)? - fd_hess_diag(m, obj, p, &minus, step)?))
}

/// Directional derivative `d/dt f(exp_p t x)` at zero by central differences.
pub fn fd_slope<M: Manifold, O: Objective<M> + ?Sized>(
    m: &M,
    obj: &O,
    p: &M::Point,
    x: &M::Tangent,
    h: f64,
) -> Result<f64> {
    let fp = obj.value(&m.exp(p, x, h)?)?;
    let fm = obj.value(&m.exp(p, x, -h)?)?;
    Ok((fp - fm) / (2.0 * h))
}

/// Default finite-difference step for Hessians built from gradients.
pub const FD_HESS_STEP: f64 = 1e-5;

/// Solves `hess_apply(x) = rhs` by linear conjugate gradients in the tangent
/// space. The Hessian only has to be definite (either sign); a change of sign
/// in the curvature `<d, H d>` reports [`Error::Indefinite`].
pub fn hess_solve_cg<M: Manifold, O: Objective<M> + ?Sized>(
    m: &M,
    obj: &O,
    p: &M::Point,
    rhs: &M::Tangent,
    rel_tol: f64,
    max_iter: usize,
) -> Result<M::Tangent> {
    let apply = |x: &M::Tangent| -> Result<M::Tangent> {
        obj.hess_apply(p, x)
            .unwrap_or_else(|| Err(Error::Argument("objective has no Hessian operator".into())))
    };
    let bnorm = m.norm(p, rhs);
    let mut x = m.zero(p);
    if bnorm == 0.0 {
        return Ok(x);
    }
    let mut r = rhs.clone();
    let mut d = r.clone();
    let mut rr = m.inner(p, &r, &r);
    let mut sign = 0.0;
    for _ in 0..max_iter {
        let hd = apply(&d)?;
        let curv = m.inner(p, &d, &hd);
        if curv == 0.0 || !curv.is_finite() {
            return Err(Error::Indefinite);
        }
        if sign == 0.0 {
            sign = curv.signum();
        } else if curv.signum() != sign {
            return Err(Error::Indefinite);
        }
        let alpha = rr / curv;
        x = m.lincomb(1.0, &x, alpha, &d);
        r = m.lincomb(1.0, &r, -alpha, &hd);
        let rr_new = m.inner(p, &r, &r);
        if rr_new.sqrt() <= rel_tol * bnorm {
            return Ok(x);
        }
        d = m.lincomb(1.0, &r, rr_new / rr, &d);
        rr = rr_new;
    }
    Err(Error::Indefinite)
}
