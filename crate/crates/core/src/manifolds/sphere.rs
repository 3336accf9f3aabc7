use nalgebra::DVector;

use super::Manifold;
use crate::error::{Error, Result};
use crate::rng::{random_unit, random_vector, Rng};

/// The unit sphere `S^{n-1}` in `R^n`.
#[derive(Debug, Clone, Copy)]
pub struct Sphere {
    pub n: usize,
}

impl Sphere {
    pub fn new(n: usize) -> Self {
        Sphere { n }
    }
}

fn check_tangent(x: &DVector<f64>, v: &DVector<f64>) -> Result<()> {
    if x.len() != v.len() {
        return Err(Error::Dimension(format!(
            "point has length {}, tangent {}",
            x.len(),
            v.len()
        )));
    }
    let d = x.dot(v).abs();
    if d > 1e-10 * (1.0 + v.norm()) {
        return Err(Error::NotTangent(d));
    }
    Ok(())
}

/// `x cos(t|v|) + (v/|v|) sin(t|v|)`.
pub fn sphere_exp(x: &DVector<f64>, v: &DVector<f64>, t: f64) -> Result<DVector<f64>> {
    check_tangent(x, v)?;
    let nv = v.norm();
    if nv == 0.0 {
        return Ok(x.clone());
    }
    let (s, c) = (t * nv).sin_cos();
    Ok(x * c + v * (s / nv))
}

/// Translates `w` along the great circle through `x` with unit direction `h`
/// for arc length `t`: `w - (h^T w)(x sin t + h (1 - cos t))`.
pub fn sphere_transport(
    x: &DVector<f64>,
    h: &DVector<f64>,
    t: f64,
    w: &DVector<f64>,
) -> Result<DVector<f64>> {
    check_tangent(x, w)?;
    let nh = h.norm();
    if (nh - 1.0).abs() > 1e-10 {
        return Err(Error::Argument(format!("direction must be unit, has norm {nh}")));
    }
    let (s, c) = t.sin_cos();
    let hw = h.dot(w);
    Ok(w - (x * s + h * (1.0 - c)) * hw)
}

/// Great-circle distance, evaluated through the chord for accuracy near zero.
pub fn sphere_distance(x: &DVector<f64>, y: &DVector<f64>) -> f64 {
    2.0 * (0.5 * (x - y).norm()).min(1.0).asin()
}

impl Manifold for Sphere {
    type Point = DVector<f64>;
    type Tangent = DVector<f64>;

    fn dim(&self) -> usize {
        self.n - 1
    }

    fn inner(&self, _p: &DVector<f64>, x: &DVector<f64>, y: &DVector<f64>) -> f64 {
        x.dot(y)
    }

    fn zero(&self, p: &DVector<f64>) -> DVector<f64> {
        DVector::zeros(p.len())
    }

    fn lincomb(&self, a: f64, x: &DVector<f64>, b: f64, y: &DVector<f64>) -> DVector<f64> {
        x * a + y * b
    }

    fn exp(&self, p: &DVector<f64>, x: &DVector<f64>, t: f64) -> Result<DVector<f64>> {
        sphere_exp(p, x, t)
    }

    fn exp_transport(
        &self,
        p: &DVector<f64>,
        x: &DVector<f64>,
        t: f64,
    ) -> Result<(DVector<f64>, DVector<f64>)> {
        check_tangent(p, x)?;
        let nx = x.norm();
        if nx == 0.0 {
            return Ok((p.clone(), x.clone()));
        }
        let (s, c) = (t * nx).sin_cos();
        let q = p * c + x * (s / nx);
        let v = x * c - p * (nx * s);
        Ok((q, v))
    }

    fn transport(
        &self,
        p: &DVector<f64>,
        h: &DVector<f64>,
        t: f64,
        w: &DVector<f64>,
    ) -> Option<Result<DVector<f64>>> {
        let nh = h.norm();
        if nh == 0.0 {
            return Some(Ok(w.clone()));
        }
        Some(sphere_transport(p, &(h / nh), t * nh, w))
    }

    fn distance(&self, p: &DVector<f64>, q: &DVector<f64>) -> f64 {
        sphere_distance(p, q)
    }

    fn random_point(&self, rng: &mut Rng) -> DVector<f64> {
        random_unit(rng, self.n)
    }

    fn random_tangent(&self, rng: &mut Rng, p: &DVector<f64>) -> DVector<f64> {
        let v = random_vector(rng, self.n);
        &v - p * p.dot(&v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use std::f64::consts::PI;

    fn e(n: usize, i: usize) -> DVector<f64> {
        let mut v = DVector::zeros(n);
        v[i] = 1.0;
        v
    }

    #[test]
    fn exp_trivial_and_quarter_circle() {
        let x = e(3, 0);
        assert_eq!(sphere_exp(&x, &e(3, 1), 0.0).unwrap(), x);
        let y = sphere_exp(&x, &e(3, 1), PI / 2.0).unwrap();
        assert!((y - e(3, 1)).norm() < 1e-15);
        assert!(matches!(sphere_exp(&x, &x, 1.0), Err(Error::NotTangent(_))));
    }

    #[test]
    fn exp_arc_length() {
        let mut rng = seeded(1);
        let s = Sphere::new(6);
        for _ in 0..20 {
            let x = s.random_point(&mut rng);
            let v = s.random_tangent(&mut rng, &x) * 0.4;
            let y = sphere_exp(&x, &v, 1.3).unwrap();
            assert!((y.norm() - 1.0).abs() < 1e-14);
            assert!((sphere_distance(&x, &y) - 1.3 * v.norm()).abs() < 1e-12);
        }
    }

    #[test]
    fn transport_cases() {
        let x = e(3, 0);
        let h = e(3, 1);
        let w = e(3, 2);
        assert_eq!(sphere_transport(&x, &h, 0.7, &w).unwrap(), w);
        let t = 0.7;
        let th = sphere_transport(&x, &h, t, &h).unwrap();
        assert!((th - (&h * t.cos() - &x * t.sin())).norm() < 1e-15);
    }

    #[test]
    fn antipodal_distance() {
        let x = e(4, 2);
        assert!((sphere_distance(&x, &-&x) - PI).abs() < 1e-15);
        assert_eq!(sphere_distance(&x, &x), 0.0);
    }
}
