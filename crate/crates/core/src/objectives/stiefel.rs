use std::sync::atomic::{AtomicUsize, Ordering};
use std::collections::VecDeque;
use std::sync::Mutex;

use nalgebra::{DMatrix, DVector};

use super::{fd_hess, Objective, FD_HESS_STEP};
use crate::error::{Error, Result};
use crate::linalg::{check_finite, check_square, check_symmetric, skew_part};
use crate::manifolds::{Product, Stiefel, StiefelPoint, TangentM};

/// Riemannian gradient of `F` on V(n, k) from its Euclidean gradient `e`
/// (`dF = tr pdot^T e`): with `C = g^T e`, `a = skew(C_top)`, `b = C_bot / 2`.
pub fn grad_from_euclidean(pt: &StiefelPoint, e: &DMatrix<f64>) -> Result<TangentM> {
    let (n, k) = (pt.n(), pt.k());
    if e.nrows() != n || e.ncols() != k {
        return Err(Error::Dimension(format!(
            "euclidean gradient is {}x{}, frame is {n}x{k}",
            e.nrows(),
            e.ncols()
        )));
    }
    let c = pt.coset().apply_transpose(e)?;
    Ok(TangentM {
        a: skew_part(&c.rows(0, k).into_owned()),
        b: c.rows(k, n - k) * 0.5,
    })
}

fn check_frame(pt: &StiefelPoint, n: usize, k: usize) -> Result<()> {
    if pt.n() != n || pt.k() != k {
        return Err(Error::Dimension(format!(
            "expected a frame in V({n}, {k}), got V({}, {})",
            pt.n(),
            pt.k()
        )));
    }
    Ok(())
}

/// A symmetric operator known through its action on blocks.
#[derive(Debug, Clone)]
pub enum AOp {
    /// Explicit symmetric matrix.
    Dense(DMatrix<f64>),
    /// `v -> L (L^T v)`, which never forms `L L^T`.
    Factor(DMatrix<f64>),
}

impl AOp {
    pub fn dense(a: DMatrix<f64>) -> Result<Self> {
        check_square(&a, "A")?;
        check_finite(&a, "A")?;
        check_symmetric(&a)?;
        Ok(AOp::Dense(a))
    }

    pub fn factor(l: DMatrix<f64>) -> Result<Self> {
        check_finite(&l, "data factor")?;
        Ok(AOp::Factor(l))
    }

    pub fn dim(&self) -> usize {
        match self {
            AOp::Dense(a) => a.nrows(),
            AOp::Factor(l) => l.nrows(),
        }
    }

    pub fn apply(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        match self {
            AOp::Dense(a) => a * m,
            AOp::Factor(l) => l * l.tr_mul(m),
        }
    }

    /// Explicit matrix; for reference computations.
    pub fn to_dense(&self) -> DMatrix<f64> {
        match self {
            AOp::Dense(a) => a.clone(),
            AOp::Factor(l) => l * l.transpose(),
        }
    }

    /// Frobenius norm of the operator.
    pub fn norm(&self) -> f64 {
        match self {
            AOp::Dense(a) => a.norm(),
            AOp::Factor(l) => (l.transpose() * l).norm(),
        }
    }
}

/// Orthonormal basis `W` with `A W`, reused for blocks lying in its span.
///
/// Iterates of the optimizers move inside `span(p, H)` and the next direction
/// lies in `span(p, tau H, G)`, so once those blocks have been seen only the
/// new gradient directions cost products with `A`.
#[derive(Debug, Clone)]
struct SpanCache {
    w: DMatrix<f64>,
    aw: DMatrix<f64>,
    /// Coordinates in `W` of the most recent requests.
    recent: VecDeque<DMatrix<f64>>,
}

/// Relative size below which a residual outside the cached span is dropped.
const SPAN_TOL: f64 = 1e-13;
const RECENT: usize = 4;

impl SpanCache {
    fn empty(n: usize) -> Self {
        SpanCache {
            w: DMatrix::zeros(n, 0),
            aw: DMatrix::zeros(n, 0),
            recent: VecDeque::new(),
        }
    }

    /// Keeps only the span of the recent requests, with no new products.
    fn rebase(&mut self) {
        let m = self.w.ncols();
        let cols: usize = self.recent.iter().map(|c| c.ncols()).sum();
        let mut stack = DMatrix::zeros(m, cols);
        let mut at = 0;
        for c in &self.recent {
            stack.columns_mut(at, c.ncols()).copy_from(c);
            at += c.ncols();
        }
        let sizes: Vec<f64> = stack.column_iter().map(|c| c.norm()).collect();
        let basis = orthonormal_columns(&stack, &DMatrix::zeros(m, 0), SPAN_TOL, &sizes);
        self.w = &self.w * &basis;
        self.aw = &self.aw * &basis;
        for c in self.recent.iter_mut() {
            *c = basis.tr_mul(c);
        }
    }
}

/// Columns of `r` orthonormalized against `w` and each other (two passes of
/// Gram-Schmidt); a column is dropped when what remains is below `tol` times
/// `sizes[j]`.
fn orthonormal_columns(r: &DMatrix<f64>, w: &DMatrix<f64>, tol: f64, sizes: &[f64]) -> DMatrix<f64> {
    let mut out: Vec<DVector<f64>> = Vec::new();
    for j in 0..r.ncols() {
        let orig = sizes[j];
        if orig == 0.0 {
            continue;
        }
        let mut v = r.column(j).into_owned();
        for _ in 0..2 {
            if w.ncols() > 0 {
                v -= w * w.tr_mul(&v);
            }
            for u in &out {
                v -= u * u.dot(&v);
            }
        }
        let nv = v.norm();
        if nv > tol * orig {
            out.push(v / nv);
        }
    }
    let mut m = DMatrix::zeros(r.nrows(), out.len());
    for (j, v) in out.iter().enumerate() {
        m.set_column(j, v);
    }
    m
}

/// `rho(p) = tr p^T A p N` on V(n, k), `N = diag(nu)`.
///
/// Products with `A` go through a cache of `A W` for a small orthonormal
/// basis `W`; only directions outside its span are applied and counted.
#[derive(Debug)]
pub struct GenRayleigh {
    a: AOp,
    nu: DVector<f64>,
    blocks: AtomicUsize,
    columns: AtomicUsize,
    cache: Mutex<SpanCache>,
}

impl Clone for GenRayleigh {
    fn clone(&self) -> Self {
        GenRayleigh {
            a: self.a.clone(),
            nu: self.nu.clone(),
            blocks: AtomicUsize::new(self.applications()),
            columns: AtomicUsize::new(self.matvecs()),
            cache: Mutex::new(self.cache.lock().expect("cache lock").clone()),
        }
    }
}

impl GenRayleigh {
    pub fn new(a: AOp, nu: DVector<f64>) -> Result<Self> {
        if nu.is_empty() || nu.len() > a.dim() {
            return Err(Error::Dimension(format!(
                "need 1 <= k <= n, got k = {} for n = {}",
                nu.len(),
                a.dim()
            )));
        }
        if !nu.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("N"));
        }
        let n = a.dim();
        Ok(GenRayleigh {
            a,
            nu,
            blocks: AtomicUsize::new(0),
            columns: AtomicUsize::new(0),
            cache: Mutex::new(SpanCache::empty(n)),
        })
    }

    pub fn n(&self) -> usize {
        self.a.dim()
    }

    pub fn k(&self) -> usize {
        self.nu.len()
    }

    pub fn operator(&self) -> &AOp {
        &self.a
    }

    pub fn weights(&self) -> &DVector<f64> {
        &self.nu
    }

    /// False when two weights coincide, in which case maxima are not isolated.
    pub fn has_distinct_weights(&self) -> bool {
        let v = self.nu.as_slice();
        (0..v.len()).all(|i| (i + 1..v.len()).all(|j| v[i] != v[j]))
    }

    /// Replaces `N`; the cached products stay valid.
    pub fn set_weights(&mut self, nu: DVector<f64>) -> Result<()> {
        if nu.len() != self.nu.len() {
            return Err(Error::Dimension("weight count must not change".into()));
        }
        self.nu = nu;
        Ok(())
    }

    /// Replaces `A`, dropping the cache but keeping the counters.
    pub fn set_operator(&mut self, a: AOp) -> Result<()> {
        if a.dim() != self.a.dim() {
            return Err(Error::Dimension("operator dimension must not change".into()));
        }
        self.a = a;
        *self.cache.lock().expect("cache lock") = SpanCache::empty(self.n());
        Ok(())
    }

    /// Number of block applications of `A` so far.
    pub fn applications(&self) -> usize {
        self.blocks.load(Ordering::Relaxed)
    }

    /// Number of matrix-vector products (columns) so far.
    pub fn matvecs(&self) -> usize {
        self.columns.load(Ordering::Relaxed)
    }

    pub fn reset_counters(&self) {
        self.blocks.store(0, Ordering::Relaxed);
        self.columns.store(0, Ordering::Relaxed);
    }

    /// `A y`, applying `A` only to the part of `y` outside the cached span.
    fn apply(&self, y: &DMatrix<f64>) -> DMatrix<f64> {
        let mut c = self.cache.lock().expect("cache lock");
        let n = self.n();
        let k = self.k();
        let mut coef = c.w.tr_mul(y);
        let mut r = y - &c.w * &coef;
        let fix = c.w.tr_mul(&r);
        r -= &c.w * &fix;
        coef += fix;
        let sizes: Vec<f64> = y.column_iter().map(|c| c.norm()).collect();
        let fresh = orthonormal_columns(&r, &c.w, SPAN_TOL, &sizes);
        if fresh.ncols() > 0 {
            self.blocks.fetch_add(1, Ordering::Relaxed);
            self.columns.fetch_add(fresh.ncols(), Ordering::Relaxed);
            let afresh = self.a.apply(&fresh);
            let m = c.w.ncols();
            let j = fresh.ncols();
            let mut w = DMatrix::zeros(n, m + j);
            w.columns_mut(0, m).copy_from(&c.w);
            w.columns_mut(m, j).copy_from(&fresh);
            let mut aw = DMatrix::zeros(n, m + j);
            aw.columns_mut(0, m).copy_from(&c.aw);
            aw.columns_mut(m, j).copy_from(&afresh);
            let mut full = DMatrix::zeros(m + j, y.ncols());
            full.rows_mut(0, m).copy_from(&coef);
            full.rows_mut(m, j).copy_from(&fresh.tr_mul(&r));
            for old in c.recent.iter_mut() {
                *old = old.clone().resize_vertically(m + j, 0.0);
            }
            c.w = w;
            c.aw = aw;
            coef = full;
        }
        let out = &c.aw * &coef;
        let cn = coef.norm();
        let seen = c
            .recent
            .iter()
            .position(|old| old.shape() == coef.shape() && (old - &coef).norm() <= 1e-14 * cn);
        if let Some(i) = seen {
            c.recent.remove(i);
        }
        c.recent.push_back(coef);
        if c.recent.len() > RECENT {
            c.recent.pop_front();
        }
        if c.w.ncols() > (6 * k).min(n) {
            c.rebase();
        }
        out
    }

    /// `A p` for the frame.
    pub fn ap(&self, pt: &StiefelPoint) -> Result<DMatrix<f64>> {
        check_frame(pt, self.n(), self.k())?;
        Ok(self.apply(pt.frame()))
    }

    /// `diag(p^T A p)`, the eigenvalue estimates carried by the frame.
    pub fn diag_estimates(&self, pt: &StiefelPoint) -> Result<DVector<f64>> {
        let ap = self.ap(pt)?;
        Ok(DVector::from_fn(self.k(), |j, _| {
            pt.frame().column(j).dot(&ap.column(j))
        }))
    }

    /// `phi'(0) = 2 tr p^T A g x o N` for the geodesic with direction `x`.
    pub fn phi_prime0(&self, pt: &StiefelPoint, x: &TangentM) -> Result<f64> {
        let b = pt.coset().apply_transpose(&self.ap(pt)?)?;
        let xo = x.stacked();
        Ok(2.0 * (0..self.k()).map(|j| self.nu[j] * b.column(j).dot(&xo.column(j))).sum::<f64>())
    }

    fn weighted(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = m.clone();
        for j in 0..self.k() {
            out.column_mut(j).scale_mut(self.nu[j]);
        }
        out
    }

    /// `x (c over d) = (a c - b^T d over b c)`.
    fn act(x: &TangentM, m: &DMatrix<f64>) -> DMatrix<f64> {
        let k = x.k();
        let n = x.n();
        let c = m.rows(0, k);
        let d = m.rows(k, n - k);
        let mut out = DMatrix::zeros(n, m.ncols());
        out.rows_mut(0, k).copy_from(&(&x.a * c - x.b.tr_mul(&d)));
        out.rows_mut(k, n - k).copy_from(&(&x.b * c));
        out
    }

    /// Part of the Hessian not involving `A` applied to tangents:
    /// `tr B^T (x y o + y x o) N` with `B = g^T A p`.
    fn hess_first(&self, bn: &DMatrix<f64>, x: &TangentM, y: &TangentM) -> f64 {
        let s = Self::act(x, &y.stacked()) + Self::act(y, &x.stacked());
        bn.dot(&s)
    }
}

impl Objective<Stiefel> for GenRayleigh {
    fn value(&self, pt: &StiefelPoint) -> Result<f64> {
        let ap = self.ap(pt)?;
        Ok((0..self.k())
            .map(|j| self.nu[j] * pt.frame().column(j).dot(&ap.column(j)))
            .sum())
    }

    /// From `C = g^T A p N`: `a = C_top - C_top^T`, `b = C_bot`.
    fn gradient(&self, pt: &StiefelPoint) -> Result<TangentM> {
        let c = pt.coset().apply_transpose(&self.weighted(&self.ap(pt)?))?;
        let k = self.k();
        let top = c.rows(0, k);
        Ok(TangentM {
            a: &top - top.transpose(),
            b: c.rows(k, self.n() - k).into_owned(),
        })
    }

    fn value_grad(&self, pt: &StiefelPoint) -> Result<(f64, TangentM)> {
        Ok((self.value(pt)?, self.gradient(pt)?))
    }

    /// `tr B^T (x y + y x) o N + 2 tr X^T A Y N` with ambient `X = g x o`.
    fn hess(&self, pt: &StiefelPoint, x: &TangentM, y: &TangentM) -> Result<f64> {
        let bn = self.weighted(&pt.coset().apply_transpose(&self.ap(pt)?)?);
        let xa = pt.to_ambient(x)?;
        let ay = self.apply(&pt.to_ambient(y)?);
        Ok(self.hess_first(&bn, x, y) + 2.0 * self.weighted(&xa).dot(&ay))
    }

    /// One block application of `A` to `[X | Y]` serves all three values.
    fn hess_triple(&self, pt: &StiefelPoint, x: &TangentM, y: &TangentM) -> Result<[f64; 3]> {
        let k = self.k();
        let bn = self.weighted(&pt.coset().apply_transpose(&self.ap(pt)?)?);
        let xa = pt.to_ambient(x)?;
        let ya = pt.to_ambient(y)?;
        let mut both = DMatrix::zeros(self.n(), 2 * k);
        both.columns_mut(0, k).copy_from(&xa);
        both.columns_mut(k, k).copy_from(&ya);
        let a_both = self.apply(&both);
        let ax = a_both.columns(0, k).into_owned();
        let ay = a_both.columns(k, k).into_owned();
        let xn = self.weighted(&xa);
        let yn = self.weighted(&ya);
        Ok([
            self.hess_first(&bn, x, x) + 2.0 * xn.dot(&ax),
            self.hess_first(&bn, x, y) + 2.0 * xn.dot(&ay),
            self.hess_first(&bn, y, y) + 2.0 * yn.dot(&ay),
        ])
    }
}

fn column_norms(b: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_fn(b.ncols(), |j, _| b.column(j).norm())
}

/// `sigma'(p) = tr q^T A^T p N` with `q` the column-normalized `A^T p`, that
/// is `sum_j nu_j |A^T p_j|`. Maximized by the top left singular vectors.
#[derive(Debug, Clone)]
pub struct SigmaPrime {
    a: DMatrix<f64>,
    nu: DVector<f64>,
}

impl SigmaPrime {
    pub fn new(a: DMatrix<f64>, nu: DVector<f64>) -> Result<Self> {
        check_finite(&a, "A")?;
        if nu.is_empty() || nu.len() > a.nrows() {
            return Err(Error::Dimension(format!(
                "need 1 <= k <= {} rows, got k = {}",
                a.nrows(),
                nu.len()
            )));
        }
        Ok(SigmaPrime { a, nu })
    }

    pub fn manifold(&self) -> Stiefel {
        Stiefel::new(self.a.nrows(), self.nu.len())
    }

    fn parts(&self, pt: &StiefelPoint) -> Result<(DMatrix<f64>, DVector<f64>)> {
        check_frame(pt, self.a.nrows(), self.nu.len())?;
        let b = self.a.tr_mul(pt.frame());
        let norms = column_norms(&b);
        let floor = 1e-12 * self.a.norm();
        if let Some(j) = norms.iter().position(|&v| v < floor) {
            return Err(Error::NonDifferentiable(format!("column {j} of A^T p vanishes")));
        }
        Ok((b, norms))
    }
}

impl Objective<Stiefel> for SigmaPrime {
    fn value(&self, pt: &StiefelPoint) -> Result<f64> {
        let (_, norms) = self.parts(pt)?;
        Ok(norms.dot(&self.nu))
    }

    /// Euclidean gradient `A q N`; the normalization of `q` contributes
    /// nothing because `q_j^T dq_j = 0`.
    fn gradient(&self, pt: &StiefelPoint) -> Result<TangentM> {
        let (mut b, norms) = self.parts(pt)?;
        for j in 0..b.ncols() {
            b.column_mut(j).scale_mut(self.nu[j] / norms[j]);
        }
        grad_from_euclidean(pt, &(&self.a * b))
    }

    fn hess(&self, pt: &StiefelPoint, x: &TangentM, y: &TangentM) -> Result<f64> {
        fd_hess(&self.manifold(), self, pt, x, y, FD_HESS_STEP)
    }
}

/// `sigma''(p, q) = tr p^T A q N` on V(m, k) x V(n, k).
#[derive(Debug, Clone)]
pub struct SigmaDouble {
    a: DMatrix<f64>,
    nu: DVector<f64>,
}

type Pair = Product<Stiefel, Stiefel>;

impl SigmaDouble {
    pub fn new(a: DMatrix<f64>, nu: DVector<f64>) -> Result<Self> {
        check_finite(&a, "A")?;
        let k = nu.len();
        if k == 0 || k > a.nrows() || k > a.ncols() {
            return Err(Error::Dimension(format!(
                "need 1 <= k <= min({}, {}), got k = {k}",
                a.nrows(),
                a.ncols()
            )));
        }
        Ok(SigmaDouble { a, nu })
    }

    pub fn manifold(&self) -> Pair {
        let k = self.nu.len();
        Product::new(Stiefel::new(self.a.nrows(), k), Stiefel::new(self.a.ncols(), k))
    }

    fn check(&self, pq: &(StiefelPoint, StiefelPoint)) -> Result<()> {
        let k = self.nu.len();
        check_frame(&pq.0, self.a.nrows(), k)?;
        check_frame(&pq.1, self.a.ncols(), k)
    }

    fn scale_cols(&self, mut m: DMatrix<f64>) -> DMatrix<f64> {
        for j in 0..m.ncols() {
            m.column_mut(j).scale_mut(self.nu[j]);
        }
        m
    }
}

impl Objective<Pair> for SigmaDouble {
    fn value(&self, pq: &(StiefelPoint, StiefelPoint)) -> Result<f64> {
        self.check(pq)?;
        let aq = &self.a * pq.1.frame();
        Ok((0..self.nu.len())
            .map(|j| self.nu[j] * pq.0.frame().column(j).dot(&aq.column(j)))
            .sum())
    }

    /// Euclidean gradients `A q N` and `A^T p N`.
    fn gradient(&self, pq: &(StiefelPoint, StiefelPoint)) -> Result<(TangentM, TangentM)> {
        self.check(pq)?;
        let ep = self.scale_cols(&self.a * pq.1.frame());
        let eq = self.scale_cols(self.a.tr_mul(pq.0.frame()));
        Ok((grad_from_euclidean(&pq.0, &ep)?, grad_from_euclidean(&pq.1, &eq)?))
    }

    fn hess(
        &self,
        pq: &(StiefelPoint, StiefelPoint),
        x: &(TangentM, TangentM),
        y: &(TangentM, TangentM),
    ) -> Result<f64> {
        fd_hess(&self.manifold(), self, pq, x, y, FD_HESS_STEP)
    }
}
