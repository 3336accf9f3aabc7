use nalgebra::{DMatrix, DVector};

use super::{hess_solve_cg, Objective};
use crate::error::{Error, Result};
use crate::linalg::{bracket, check_finite, check_square, check_symmetric};
use crate::manifolds::Rotation;

/// Relative residual for the inner Newton solves on so(n).
const NEWTON_TOL: f64 = 1e-13;

fn check_point(q: &DMatrix<f64>, theta: &DMatrix<f64>) -> Result<()> {
    if theta.nrows() != q.nrows() || theta.ncols() != q.nrows() {
        return Err(Error::Dimension(format!(
            "Q is {0}x{0}, point is {1}x{2}",
            q.nrows(),
            theta.nrows(),
            theta.ncols()
        )));
    }
    Ok(())
}

fn newton_iters(n: usize) -> usize {
    n * (n - 1) / 2 + 20
}

/// `f(Theta) = tr Theta^T Q Theta N` on SO(n), `N` diagonal.
///
/// With `H = Theta^T Q Theta` and tangents `Theta X`, `grad f = [H, N]` and
/// `hess(X, Y) = <L(X), Y> / 2` where `L(X) = [H, [X, N]] - [[X, H], N]`.
#[derive(Debug, Clone)]
pub struct TraceThetaQN {
    q: DMatrix<f64>,
    n: DMatrix<f64>,
}

impl TraceThetaQN {
    pub fn new(q: DMatrix<f64>, n_diag: &DVector<f64>) -> Result<Self> {
        check_square(&q, "Q")?;
        check_finite(&q, "Q")?;
        check_symmetric(&q)?;
        if n_diag.len() != q.nrows() {
            return Err(Error::Dimension(format!(
                "N has {} entries, Q is {}x{}",
                n_diag.len(),
                q.nrows(),
                q.nrows()
            )));
        }
        Ok(TraceThetaQN {
            q,
            n: DMatrix::from_diagonal(n_diag),
        })
    }

    pub fn h(&self, theta: &DMatrix<f64>) -> DMatrix<f64> {
        theta.tr_mul(&(&self.q * theta))
    }

    pub fn n_matrix(&self) -> &DMatrix<f64> {
        &self.n
    }

    /// `L_Theta(X) = [H, [X, N]] - [[X, H], N]`.
    pub fn newton_operator(&self, theta: &DMatrix<f64>, x: &DMatrix<f64>) -> DMatrix<f64> {
        let h = self.h(theta);
        bracket(&h, &bracket(x, &self.n)) - bracket(&bracket(x, &h), &self.n)
    }
}

impl Objective<Rotation> for TraceThetaQN {
    fn value(&self, theta: &DMatrix<f64>) -> Result<f64> {
        check_point(&self.q, theta)?;
        Ok(self.h(theta).dot(&self.n))
    }

    fn gradient(&self, theta: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        check_point(&self.q, theta)?;
        Ok(bracket(&self.h(theta), &self.n))
    }

    fn value_grad(&self, theta: &DMatrix<f64>) -> Result<(f64, DMatrix<f64>)> {
        check_point(&self.q, theta)?;
        let h = self.h(theta);
        Ok((h.dot(&self.n), bracket(&h, &self.n)))
    }

    fn hess(&self, theta: &DMatrix<f64>, x: &DMatrix<f64>, y: &DMatrix<f64>) -> Result<f64> {
        check_point(&self.q, theta)?;
        Ok(0.5 * self.newton_operator(theta, x).dot(y))
    }

    fn hess_apply(&self, theta: &DMatrix<f64>, x: &DMatrix<f64>) -> Option<Result<DMatrix<f64>>> {
        Some(check_point(&self.q, theta).map(|_| self.newton_operator(theta, x) * 0.5))
    }

    /// Solves `L(X) = -2 [H, N]` by inner CG; an indefinite Hessian is
    /// reported so callers can fall back to a gradient step.
    fn newton_direction(&self, theta: &DMatrix<f64>) -> Option<Result<DMatrix<f64>>> {
        Some((|| {
            let g = self.gradient(theta)?;
            let m = Rotation::new(self.q.nrows());
            hess_solve_cg(&m, self, theta, &-g, NEWTON_TOL, newton_iters(m.n))
        })())
    }
}

/// `f(Theta) = tr H pi(H)` with `H = Theta^T Q Theta` and `pi` the diagonal
/// part; maximized where `H` is diagonal.
#[derive(Debug, Clone)]
pub struct Jacobi {
    q: DMatrix<f64>,
}

fn diag_part(m: &DMatrix<f64>) -> DMatrix<f64> {
    DMatrix::from_diagonal(&m.diagonal())
}

impl Jacobi {
    pub fn new(q: DMatrix<f64>) -> Result<Self> {
        check_square(&q, "Q")?;
        check_finite(&q, "Q")?;
        check_symmetric(&q)?;
        Ok(Jacobi { q })
    }

    pub fn h(&self, theta: &DMatrix<f64>) -> DMatrix<f64> {
        theta.tr_mul(&(&self.q * theta))
    }

    /// `2 [H, pi([H, X])] + [[H, X], pi(H)] + [H, [X, pi(H)]]`.
    fn operator(&self, h: &DMatrix<f64>, x: &DMatrix<f64>) -> DMatrix<f64> {
        let d = diag_part(h);
        let hx = bracket(h, x);
        bracket(h, &diag_part(&hx)) * 2.0 + bracket(&hx, &d) + bracket(h, &bracket(x, &d))
    }
}

impl Objective<Rotation> for Jacobi {
    fn value(&self, theta: &DMatrix<f64>) -> Result<f64> {
        check_point(&self.q, theta)?;
        Ok(self.h(theta).diagonal().norm_squared())
    }

    /// `2 [H, pi(H)]`.
    fn gradient(&self, theta: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        check_point(&self.q, theta)?;
        let h = self.h(theta);
        Ok(bracket(&h, &diag_part(&h)) * 2.0)
    }

    /// `2 tr pi([H, X])[H, Y] + tr pi(H)([[H, X], Y] + [[H, Y], X])`.
    fn hess(&self, theta: &DMatrix<f64>, x: &DMatrix<f64>, y: &DMatrix<f64>) -> Result<f64> {
        check_point(&self.q, theta)?;
        let h = self.h(theta);
        let d = h.diagonal();
        let hx = bracket(&h, x);
        let hy = bracket(&h, y);
        let t1: f64 = 2.0 * hx.diagonal().dot(&hy.diagonal());
        let t2 = bracket(&hx, y).diagonal().dot(&d) + bracket(&hy, x).diagonal().dot(&d);
        Ok(t1 + t2)
    }

    fn hess_apply(&self, theta: &DMatrix<f64>, x: &DMatrix<f64>) -> Option<Result<DMatrix<f64>>> {
        Some(check_point(&self.q, theta).map(|_| self.operator(&self.h(theta), x)))
    }

    fn newton_direction(&self, theta: &DMatrix<f64>) -> Option<Result<DMatrix<f64>>> {
        Some((|| {
            let g = self.gradient(theta)?;
            let m = Rotation::new(self.q.nrows());
            hess_solve_cg(&m, self, theta, &-g, NEWTON_TOL, newton_iters(m.n))
        })())
    }
}
