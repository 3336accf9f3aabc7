//! Seeded random inputs. Every experiment in the crate draws from a ChaCha
//! stream so runs are reproducible across platforms.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::linalg::{gram_schmidt, skew_part, sym_part};

pub type Rng = ChaCha8Rng;

pub fn seeded(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normal(rng: &mut Rng) -> f64 {
    StandardNormal.sample(rng)
}

pub fn random_matrix(rng: &mut Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| normal(rng))
}

pub fn random_vector(rng: &mut Rng, n: usize) -> DVector<f64> {
    DVector::from_fn(n, |_, _| normal(rng))
}

pub fn random_unit(rng: &mut Rng, n: usize) -> DVector<f64> {
    random_vector(rng, n).normalize()
}

pub fn random_skew(rng: &mut Rng, n: usize) -> DMatrix<f64> {
    skew_part(&random_matrix(rng, n, n)) * 2.0
}

pub fn random_symmetric(rng: &mut Rng, n: usize) -> DMatrix<f64> {
    sym_part(&random_matrix(rng, n, n))
}

/// Gram-Schmidt orthonormalization of standard normal columns.
pub fn random_frame(rng: &mut Rng, n: usize, k: usize) -> DMatrix<f64> {
    loop {
        if let Ok(q) = gram_schmidt(&random_matrix(rng, n, k)) {
            return q;
        }
    }
}

/// Random element of SO(n).
pub fn random_rotation(rng: &mut Rng, n: usize) -> DMatrix<f64> {
    let mut q = random_frame(rng, n, n);
    if q.determinant() < 0.0 {
        let c = -q.column(0).into_owned();
        q.set_column(0, &c);
    }
    q
}
