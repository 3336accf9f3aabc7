use nalgebra::DMatrix;

use super::Manifold;
use crate::error::{Error, Result};
use crate::linalg::{check_skew, skew_canonical, skew_expm, skew_part};
use crate::rng::{random_rotation, random_skew, Rng};

/// The special orthogonal group with tangents stored left-translated:
/// `Omega` skew represents the tangent `Theta Omega` at `Theta`.
#[derive(Debug, Clone, Copy)]
pub struct Rotation {
    pub n: usize,
}

impl Rotation {
    pub fn new(n: usize) -> Self {
        Rotation { n }
    }
}

/// `Theta exp(Omega t)`.
pub fn so_exp(theta: &DMatrix<f64>, omega: &DMatrix<f64>, t: f64) -> Result<DMatrix<f64>> {
    if theta.nrows() != omega.nrows() {
        return Err(Error::Dimension(format!(
            "point is {}x{}, tangent {}x{}",
            theta.nrows(),
            theta.ncols(),
            omega.nrows(),
            omega.ncols()
        )));
    }
    Ok(theta * skew_expm(omega, t)?)
}

/// Translate `y0` along the geodesic with direction `x`:
/// `exp(-t x / 2) y0 exp(t x / 2)`.
pub fn so_transport(x: &DMatrix<f64>, y0: &DMatrix<f64>, t: f64) -> Result<DMatrix<f64>> {
    check_skew(y0)?;
    let c = skew_canonical(x)?;
    let half = c.expm(0.5 * t);
    Ok(half.transpose() * y0 * half)
}

/// `|log(Theta^T Psi)|_F`, the geodesic distance for `<X, Y> = tr X^T Y`.
pub fn so_distance(theta: &DMatrix<f64>, psi: &DMatrix<f64>) -> f64 {
    let r = theta.tr_mul(psi);
    // The skew part of r shares invariant planes with r; its blocks carry sin,
    // the same planes of r carry cos, and atan2 recovers the angles.
    let c = match skew_canonical(&skew_part(&r)) {
        Ok(c) => c,
        Err(_) => return f64::NAN,
    };
    let b = c.theta.tr_mul(&r) * &c.theta;
    let mut sum = 0.0;
    for j in 0..c.sigmas.len() {
        let cs = 0.5 * (b[(2 * j, 2 * j)] + b[(2 * j + 1, 2 * j + 1)]);
        let sn = 0.5 * (b[(2 * j, 2 * j + 1)] - b[(2 * j + 1, 2 * j)]);
        let ang = sn.atan2(cs);
        sum += 2.0 * ang * ang;
    }
    let start = 2 * c.sigmas.len();
    for i in start..r.nrows() {
        let ang = 0.0f64.atan2(b[(i, i)]);
        sum += ang * ang;
    }
    sum.sqrt()
}

impl Manifold for Rotation {
    type Point = DMatrix<f64>;
    type Tangent = DMatrix<f64>;

    fn dim(&self) -> usize {
        self.n * (self.n - 1) / 2
    }

    fn inner(&self, _p: &DMatrix<f64>, x: &DMatrix<f64>, y: &DMatrix<f64>) -> f64 {
        x.dot(y)
    }

    fn zero(&self, _p: &DMatrix<f64>) -> DMatrix<f64> {
        DMatrix::zeros(self.n, self.n)
    }

    fn lincomb(&self, a: f64, x: &DMatrix<f64>, b: f64, y: &DMatrix<f64>) -> DMatrix<f64> {
        x * a + y * b
    }

    fn exp(&self, p: &DMatrix<f64>, x: &DMatrix<f64>, t: f64) -> Result<DMatrix<f64>> {
        so_exp(p, x, t)
    }

    fn exp_transport(
        &self,
        p: &DMatrix<f64>,
        x: &DMatrix<f64>,
        t: f64,
    ) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
        // The left-translated velocity of a one-parameter subgroup is constant.
        Ok((so_exp(p, x, t)?, x.clone()))
    }

    fn transport(
        &self,
        _p: &DMatrix<f64>,
        h: &DMatrix<f64>,
        t: f64,
        w: &DMatrix<f64>,
    ) -> Option<Result<DMatrix<f64>>> {
        Some(so_transport(h, w, t))
    }

    fn distance(&self, p: &DMatrix<f64>, q: &DMatrix<f64>) -> f64 {
        so_distance(p, q)
    }

    fn random_point(&self, rng: &mut Rng) -> DMatrix<f64> {
        random_rotation(rng, self.n)
    }

    fn random_tangent(&self, rng: &mut Rng, _p: &DMatrix<f64>) -> DMatrix<f64> {
        random_skew(rng, self.n)
    }
}
