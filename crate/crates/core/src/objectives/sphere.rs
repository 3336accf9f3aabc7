use nalgebra::{DMatrix, DVector};

use super::Objective;
use crate::error::{Error, Result};
use crate::linalg::{check_finite, check_square, check_symmetric};
use crate::manifolds::Sphere;

/// `rho(x) = x^T Q x` on the unit sphere, maximized by the top eigenvector.
#[derive(Debug, Clone)]
pub struct RayleighQ {
    q: DMatrix<f64>,
}

impl RayleighQ {
    pub fn new(q: DMatrix<f64>) -> Result<Self> {
        check_square(&q, "Q")?;
        check_finite(&q, "Q")?;
        check_symmetric(&q)?;
        Ok(RayleighQ { q })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.q
    }

    fn check(&self, x: &DVector<f64>) -> Result<()> {
        if x.len() != self.q.nrows() {
            return Err(Error::Dimension(format!(
                "Q is {0}x{0}, point has length {1}",
                self.q.nrows(),
                x.len()
            )));
        }
        Ok(())
    }

    /// `2 (I - x x^T)(Q - rho I) u`.
    pub fn hess_apply_vec(&self, x: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
        let rho = x.dot(&(&self.q * x));
        let w = &self.q * u - u * rho;
        (&w - x * x.dot(&w)) * 2.0
    }

    /// Tangent `u` with `hess_apply(x, u) = rhs`:
    /// `u = A^{-1}(v - (x^T A^{-1} v)/(x^T A^{-1} x) x)`, `A = Q - rho I`, `v = rhs / 2`.
    pub fn newton_solve(&self, x: &DVector<f64>, rhs: &DVector<f64>) -> Result<DVector<f64>> {
        self.check(x)?;
        let n = x.len();
        let rho = x.dot(&(&self.q * x));
        let a = &self.q - DMatrix::identity(n, n) * rho;
        let lu = a.lu();
        let v = rhs * 0.5;
        let (ainv_v, ainv_x) = match (lu.solve(&v), lu.solve(x)) {
            (Some(s), Some(t)) => (s, t),
            _ => return Err(Error::Singular("shift Q - rho I is singular".into())),
        };
        let denom = x.dot(&ainv_x);
        if denom == 0.0 || !denom.is_finite() {
            return Err(Error::Singular("x^T (Q - rho I)^{-1} x vanishes".into()));
        }
        Ok(&ainv_v - &ainv_x * (x.dot(&ainv_v) / denom))
    }
}

impl Objective<Sphere> for RayleighQ {
    fn value(&self, x: &DVector<f64>) -> Result<f64> {
        self.check(x)?;
        Ok(x.dot(&(&self.q * x)))
    }

    /// `2 (Q x - rho x)`.
    fn gradient(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(self.value_grad(x)?.1)
    }

    fn value_grad(&self, x: &DVector<f64>) -> Result<(f64, DVector<f64>)> {
        self.check(x)?;
        let qx = &self.q * x;
        let rho = x.dot(&qx);
        Ok((rho, (qx - x * rho) * 2.0))
    }

    /// `2 u^T (Q - rho I) v` on tangents.
    fn hess(&self, x: &DVector<f64>, u: &DVector<f64>, v: &DVector<f64>) -> Result<f64> {
        self.check(x)?;
        let rho = x.dot(&(&self.q * x));
        Ok(2.0 * (u.dot(&(&self.q * v)) - rho * u.dot(v)))
    }

    fn hess_apply(&self, x: &DVector<f64>, u: &DVector<f64>) -> Option<Result<DVector<f64>>> {
        Some(self.check(x).map(|_| self.hess_apply_vec(x, u)))
    }

    /// `H = -x + alpha y` with `y = (Q - rho I)^{-1} x`, `alpha = 1 / x^T y`.
    /// An exactly singular shift means `x` is an eigenvector: zero step.
    fn newton_direction(&self, x: &DVector<f64>) -> Option<Result<DVector<f64>>> {
        Some((|| {
            self.check(x)?;
            let n = x.len();
            let rho = x.dot(&(&self.q * x));
            let a = &self.q - DMatrix::identity(n, n) * rho;
            let Some(y) = a.lu().solve(x) else {
                return Ok(DVector::zeros(n));
            };
            let xy = x.dot(&y);
            if xy == 0.0 || !xy.is_finite() || !y.iter().all(|v| v.is_finite()) {
                return Ok(DVector::zeros(n));
            }
            let h = -x + y / xy;
            // Remove the rounding component along x.
            Ok(&h - x * x.dot(&h))
        })())
    }
}
