//! Dense kernels the manifold code is built on.
//!
//! * [`HouseholderQr`] keeps the reflectors in factored form, so a coset
//!   representative of an n-by-k frame costs O(nk) storage and O(nk) work per
//!   applied column.
//! * [`skew_canonical`] splits a skew-symmetric matrix into planar rotation
//!   blocks, which [`skew_expm`] exponentiates in closed form.
//! * [`sym_eig_oracle`] is a cyclic Jacobi solver used as an independent
//!   reference in tests.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Relative tolerance for accepting a matrix as skew-symmetric.
pub const SKEW_TOL: f64 = 1e-10;

/// Commutator `[a, b] = ab - ba`.
pub fn bracket(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    a * b - b * a
}

/// Skew part `(m - m^T) / 2`.
pub fn skew_part(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m - m.transpose()) * 0.5
}

/// Symmetric part `(m + m^T) / 2`.
pub fn sym_part(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// `|m^T m - I|_F`, the departure of the columns of `m` from orthonormality.
pub fn orthonormality_error(m: &DMatrix<f64>) -> f64 {
    let k = m.ncols();
    (m.tr_mul(m) - DMatrix::identity(k, k)).norm()
}

pub fn check_finite(m: &DMatrix<f64>, what: &'static str) -> Result<()> {
    if m.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what))
    }
}

pub fn check_square(m: &DMatrix<f64>, what: &str) -> Result<()> {
    if m.is_square() {
        Ok(())
    } else {
        Err(Error::Dimension(format!(
            "{what} must be square, got {}x{}",
            m.nrows(),
            m.ncols()
        )))
    }
}

/// Rejects `w` unless `|W + W^T|_F <= 1e-10 (1 + |W|_F)`.
pub fn check_skew(w: &DMatrix<f64>) -> Result<()> {
    check_square(w, "skew matrix")?;
    check_finite(w, "skew matrix")?;
    let dev = (w + w.transpose()).norm();
    if dev <= SKEW_TOL * (1.0 + w.norm()) {
        Ok(())
    } else {
        Err(Error::NotSkew(dev))
    }
}

pub fn check_symmetric(s: &DMatrix<f64>) -> Result<()> {
    check_square(s, "symmetric matrix")?;
    check_finite(s, "symmetric matrix")?;
    let dev = (s - s.transpose()).norm();
    if dev <= SKEW_TOL * (1.0 + s.norm()) {
        Ok(())
    } else {
        Err(Error::NotSymmetric(dev))
    }
}

/// Which product [`HouseholderQr::apply`] forms.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    /// `Q M`
    Left,
    /// `Q^T M`
    LeftTranspose,
}

/// Householder QR `F = Q R` with `Q = P_1 P_2 ... P_r` kept as reflectors.
///
/// Reflector `j` is `I - beta_j v_j v_j^T` acting on rows `j..`, with the
/// leading entry of `v_j` equal to one. Signs are chosen so that the diagonal
/// of `R` is nonnegative; a zero pivot column gives an identity reflector.
#[derive(Debug, Clone)]
pub struct HouseholderQr {
    reflectors: Vec<DVector<f64>>,
    betas: Vec<f64>,
    r: DMatrix<f64>,
    rows: usize,
    cols: usize,
}

/// Householder vector for `x` with `P x = |x| e_1`.
fn house(x: &DVector<f64>) -> (DVector<f64>, f64) {
    let m = x.len();
    let x0 = x[0];
    let sigma: f64 = x.rows(1, m - 1).norm_squared();
    let mut v = x.clone();
    v[0] = 1.0;
    if sigma == 0.0 {
        for i in 1..m {
            v[i] = 0.0;
        }
        // x = x0 e_1 already; flip only when x0 is negative.
        let beta = if x0 < 0.0 { 2.0 } else { 0.0 };
        return (v, beta);
    }
    let mu = (x0 * x0 + sigma).sqrt();
    let v0 = if x0 <= 0.0 { x0 - mu } else { -sigma / (x0 + mu) };
    let beta = 2.0 * v0 * v0 / (sigma + v0 * v0);
    for i in 1..m {
        v[i] = x[i] / v0;
    }
    (v, beta)
}

impl HouseholderQr {
    /// Factors an arbitrary `rows x cols` matrix using `min(rows, cols)`
    /// reflectors. `r` is `min(rows, cols) x cols`, upper trapezoidal.
    pub(crate) fn factor_any(f: &DMatrix<f64>) -> Self {
        let rows = f.nrows();
        let cols = f.ncols();
        let steps = rows.min(cols);
        let mut a = f.clone();
        let mut reflectors = Vec::with_capacity(steps);
        let mut betas = Vec::with_capacity(steps);
        for j in 0..steps {
            let x: DVector<f64> = a.view((j, j), (rows - j, 1)).column(0).into_owned();
            let (v, beta) = house(&x);
            if beta != 0.0 {
                let mut sub = a.view_mut((j, j), (rows - j, cols - j));
                let w = sub.tr_mul(&v);
                sub.ger(-beta, &v, &w, 1.0);
            }
            for i in j + 1..rows {
                a[(i, j)] = 0.0;
            }
            reflectors.push(v);
            betas.push(beta);
        }
        let r = a.rows(0, steps).into_owned();
        HouseholderQr {
            reflectors,
            betas,
            r,
            rows,
            cols,
        }
    }

    pub fn nrows(&self) -> usize {
        self.rows
    }

    pub fn ncols(&self) -> usize {
        self.cols
    }

    /// Upper triangular (trapezoidal when `cols > rows`) factor.
    pub fn r(&self) -> &DMatrix<f64> {
        &self.r
    }

    pub fn betas(&self) -> &[f64] {
        &self.betas
    }

    /// Forms `Q M` or `Q^T M` from the reflectors; cost O(rows * r * M.ncols()).
    pub fn apply(&self, m: &DMatrix<f64>, side: Side) -> Result<DMatrix<f64>> {
        let mut out = m.clone();
        self.apply_in_place(&mut out, side)?;
        Ok(out)
    }

    pub fn apply_in_place(&self, m: &mut DMatrix<f64>, side: Side) -> Result<()> {
        if m.nrows() != self.rows {
            return Err(Error::Dimension(format!(
                "reflectors act on {} rows, operand has {}",
                self.rows,
                m.nrows()
            )));
        }
        let ncols = m.ncols();
        let one = |j: usize, m: &mut DMatrix<f64>| {
            let beta = self.betas[j];
            if beta == 0.0 {
                return;
            }
            let v = &self.reflectors[j];
            let mut sub = m.view_mut((j, 0), (self.rows - j, ncols));
            let w = sub.tr_mul(v);
            sub.ger(-beta, v, &w, 1.0);
        };
        match side {
            Side::Left => {
                for j in (0..self.reflectors.len()).rev() {
                    one(j, m);
                }
            }
            Side::LeftTranspose => {
                for j in 0..self.reflectors.len() {
                    one(j, m);
                }
            }
        }
        Ok(())
    }

    /// First `c` columns of `Q`.
    pub fn q_columns(&self, c: usize) -> DMatrix<f64> {
        let c = c.min(self.rows);
        let mut e = DMatrix::zeros(self.rows, c);
        for i in 0..c {
            e[(i, i)] = 1.0;
        }
        self.apply_in_place(&mut e, Side::Left)
            .expect("identity block has matching rows");
        e
    }

    /// The full orthogonal factor; test and debugging use only.
    pub fn q_full(&self) -> DMatrix<f64> {
        self.q_columns(self.rows)
    }
}

/// Householder QR of an `n x k` matrix with `k <= n`.
pub fn householder_qr(f: &DMatrix<f64>) -> Result<HouseholderQr> {
    if f.ncols() > f.nrows() {
        return Err(Error::Dimension(format!(
            "householder_qr needs k <= n, got {}x{}",
            f.nrows(),
            f.ncols()
        )));
    }
    check_finite(f, "QR input")?;
    Ok(HouseholderQr::factor_any(f))
}

/// `W = theta s theta^T` with `s` block diagonal.
///
/// Columns `2j, 2j+1` of `theta` carry the block `[[0, sigma_j], [-sigma_j, 0]]`;
/// the trailing `zero_count` columns span the kernel.
#[derive(Debug, Clone)]
pub struct SkewCanonical {
    pub theta: DMatrix<f64>,
    pub sigmas: Vec<f64>,
    pub zero_count: usize,
}

impl SkewCanonical {
    pub fn dim(&self) -> usize {
        self.theta.nrows()
    }

    /// The block diagonal middle factor `s`.
    pub fn block_matrix(&self) -> DMatrix<f64> {
        let m = self.dim();
        let mut s = DMatrix::zeros(m, m);
        for (j, &sig) in self.sigmas.iter().enumerate() {
            s[(2 * j, 2 * j + 1)] = sig;
            s[(2 * j + 1, 2 * j)] = -sig;
        }
        s
    }

    pub fn reconstruct(&self) -> DMatrix<f64> {
        &self.theta * self.block_matrix() * self.theta.transpose()
    }

    /// `exp(W t) = theta exp(s t) theta^T`.
    pub fn expm(&self, t: f64) -> DMatrix<f64> {
        let mut rotated = self.theta.clone();
        for (j, &sig) in self.sigmas.iter().enumerate() {
            let (s, c) = (sig * t).sin_cos();
            let a = self.theta.column(2 * j).into_owned();
            let b = self.theta.column(2 * j + 1).into_owned();
            // theta * [[c, s], [-s, c]]
            rotated.set_column(2 * j, &(&a * c - &b * s));
            rotated.set_column(2 * j + 1, &(&a * s + &b * c));
        }
        rotated * self.theta.transpose()
    }
}

/// Orthonormal completion: columns of `Q` from a QR of `c` past its rank.
fn complement(c: &DMatrix<f64>) -> DMatrix<f64> {
    let m = c.nrows();
    let used = c.ncols();
    let qr = HouseholderQr::factor_any(c);
    let full = qr.q_full();
    full.columns(used, m - used).into_owned()
}

fn gram_schmidt_against(u: &mut DVector<f64>, basis: &[DVector<f64>]) {
    for _ in 0..2 {
        for b in basis {
            let c = b.dot(u);
            u.axpy(-c, b, 1.0);
        }
    }
}

/// Pairs `(v, u, sigma)` with `W u = sigma v`, `W v = -sigma u`, plus a basis
/// of the remaining invariant subspace. Eigenvectors of `W^T W` with
/// `sigma >= 0.1 sigma_max` are paired here; the rest is handled by recursion
/// on the compressed remainder, which keeps the pairing residual near
/// `eps * sigma_max` at every level.
fn canonical_rec(w: &DMatrix<f64>) -> (DMatrix<f64>, Vec<f64>, usize) {
    let m = w.nrows();
    if m == 0 {
        return (DMatrix::zeros(0, 0), Vec::new(), 0);
    }
    if m == 1 || w.norm() == 0.0 {
        return (DMatrix::identity(m, m), Vec::new(), m);
    }
    if m == 2 {
        let s = 0.5 * (w[(0, 1)] - w[(1, 0)]);
        if s > 0.0 {
            return (DMatrix::identity(2, 2), vec![s], 0);
        } else if s < 0.0 {
            let p = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
            return (p, vec![-s], 0);
        }
        return (DMatrix::identity(2, 2), Vec::new(), 2);
    }

    let gram = w.tr_mul(w);
    let eig = SymmetricEigen::new(gram);
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let sigma_max = eig.eigenvalues[order[0]].max(0.0).sqrt();
    let thresh = 0.1 * sigma_max;

    let mut chosen: Vec<DVector<f64>> = Vec::new();
    let mut sigmas = Vec::new();
    for &i in &order {
        if eig.eigenvalues[i].max(0.0).sqrt() < thresh || chosen.len() + 2 > m {
            break;
        }
        let mut u = eig.eigenvectors.column(i).into_owned();
        gram_schmidt_against(&mut u, &chosen);
        let nu = u.norm();
        if nu < 0.5 {
            continue;
        }
        u /= nu;
        let wu = w * &u;
        let sigma = wu.norm();
        if sigma < 0.5 * thresh {
            continue;
        }
        let mut v = wu / sigma;
        gram_schmidt_against(&mut v, &chosen);
        let uu = u.clone();
        let c = uu.dot(&v);
        v.axpy(-c, &uu, 1.0);
        let nv = v.norm();
        if nv < 0.5 {
            continue;
        }
        v /= nv;
        chosen.push(v);
        chosen.push(u);
        sigmas.push(sigma);
    }

    let paired = chosen.len();
    let mut theta = DMatrix::zeros(m, m);
    for (j, c) in chosen.iter().enumerate() {
        theta.set_column(j, c);
    }
    if paired == m {
        return (theta, sigmas, 0);
    }
    let rest = if paired == 0 {
        DMatrix::identity(m, m)
    } else {
        complement(&DMatrix::from_columns(&chosen))
    };
    let w_rest = rest.tr_mul(w) * &rest;
    let w_rest = skew_part(&w_rest);
    let (basis_rest, sig_rest, zeros) = canonical_rec(&w_rest);
    let lifted = &rest * basis_rest;
    theta.columns_mut(paired, m - paired).copy_from(&lifted);
    sigmas.extend(sig_rest);
    (theta, sigmas, zeros)
}

/// Canonical decomposition of a skew-symmetric matrix; block frequencies are
/// sorted descending, ties keeping their discovery order.
pub fn skew_canonical(w: &DMatrix<f64>) -> Result<SkewCanonical> {
    check_skew(w)?;
    let m = w.nrows();
    let (theta, sigmas, zero_count) = canonical_rec(&skew_part(w));
    let p = sigmas.len();
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&i, &j| sigmas[j].total_cmp(&sigmas[i]));
    let mut sorted = DMatrix::zeros(m, m);
    let mut sorted_sigmas = Vec::with_capacity(p);
    for (dst, &src) in order.iter().enumerate() {
        sorted.set_column(2 * dst, &theta.column(2 * src));
        sorted.set_column(2 * dst + 1, &theta.column(2 * src + 1));
        sorted_sigmas.push(sigmas[src]);
    }
    if zero_count > 0 {
        sorted
            .columns_mut(2 * p, zero_count)
            .copy_from(&theta.columns(2 * p, zero_count));
    }
    Ok(SkewCanonical {
        theta: sorted,
        sigmas: sorted_sigmas,
        zero_count,
    })
}

/// `exp(W t)` for skew `W`, assembled from planar rotations.
pub fn skew_expm(w: &DMatrix<f64>, t: f64) -> Result<DMatrix<f64>> {
    Ok(skew_canonical(w)?.expm(t))
}

/// Eigenvalues (descending) and orthonormal eigenvectors of a symmetric
/// matrix by cyclic Jacobi sweeps. Meant for test-scale reference values.
pub fn sym_eig_oracle(s: &DMatrix<f64>) -> Result<(DVector<f64>, DMatrix<f64>)> {
    check_symmetric(s)?;
    let n = s.nrows();
    let mut a = sym_part(s);
    let mut v = DMatrix::<f64>::identity(n, n);
    let scale = a.norm().max(f64::MIN_POSITIVE);
    for _sweep in 0..100 {
        let mut off = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    off += a[(i, j)] * a[(i, j)];
                }
            }
        }
        if off.sqrt() <= 1e-15 * scale {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let sn = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - sn * akq;
                    a[(k, q)] = sn * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - sn * aqk;
                    a[(q, k)] = sn * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - sn * vkq;
                    v[(k, q)] = sn * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(j, j)].total_cmp(&a[(i, i)]));
    let vals = DVector::from_iterator(n, order.iter().map(|&i| a[(i, i)]));
    let mut vecs = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vecs.set_column(dst, &v.column(src));
    }
    Ok((vals, vecs))
}

/// Closest orthogonal-columned matrix in Frobenius norm (polar factor).
pub fn polar_factor(m: &DMatrix<f64>) -> DMatrix<f64> {
    let svd = m.clone().svd(true, true);
    let u = svd.u.expect("requested U");
    let vt = svd.v_t.expect("requested V^T");
    u * vt
}

/// Modified Gram-Schmidt on the columns of `m`.
pub fn gram_schmidt(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let mut q = m.clone();
    for j in 0..q.ncols() {
        for _ in 0..2 {
            for i in 0..j {
                let c = q.column(i).dot(&q.column(j));
                let qi = q.column(i).into_owned();
                q.column_mut(j).axpy(-c, &qi, 1.0);
            }
        }
        let nrm = q.column(j).norm();
        if nrm <= 1e-14 * (1.0 + m.norm()) {
            return Err(Error::Singular(format!("column {j} is linearly dependent")));
        }
        q.column_mut(j).unscale_mut(nrm);
    }
    Ok(q)
}

/// Singular values, descending.
pub fn singular_values(m: &DMatrix<f64>) -> DVector<f64> {
    let mut s: Vec<f64> = m.clone().svd(false, false).singular_values.iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    DVector::from_vec(s)
}

/// Eigenvalues of a symmetric matrix, descending (fast LAPACK-free path).
pub fn sym_eigenvalues(s: &DMatrix<f64>) -> DVector<f64> {
    let mut v: Vec<f64> = SymmetricEigen::new(sym_part(s)).eigenvalues.iter().copied().collect();
    v.sort_by(|a, b| b.total_cmp(a));
    DVector::from_vec(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{random_matrix, random_skew, random_symmetric, seeded};

    #[test]
    fn qr_orthonormal_input_gives_unit_diagonal() {
        let mut rng = seeded(3);
        let p = gram_schmidt(&random_matrix(&mut rng, 7, 3)).unwrap();
        let qr = householder_qr(&p).unwrap();
        for i in 0..3 {
            assert!((qr.r()[(i, i)] - 1.0).abs() < 1e-12);
            for j in i + 1..3 {
                assert!(qr.r()[(i, j)].abs() < 1e-12);
            }
        }
    }

    #[test]
    fn qr_identity_block() {
        let mut f = DMatrix::zeros(5, 2);
        f[(0, 0)] = 1.0;
        f[(1, 1)] = 1.0;
        let qr = householder_qr(&f).unwrap();
        assert_eq!(qr.r(), &DMatrix::<f64>::identity(2, 2));
        assert!(qr.betas().iter().all(|&b| b == 0.0));
        let m = random_matrix(&mut seeded(1), 5, 4);
        assert_eq!(qr.apply(&m, Side::Left).unwrap(), m);
    }

    #[test]
    fn qr_reconstructs_random() {
        let mut rng = seeded(11);
        let f = random_matrix(&mut rng, 6, 3);
        let qr = householder_qr(&f).unwrap();
        let mut rr = DMatrix::zeros(6, 3);
        rr.rows_mut(0, 3).copy_from(qr.r());
        let back = qr.apply(&rr, Side::Left).unwrap();
        assert!((back - &f).norm() <= 1e-12 * f.norm());
        assert!(qr.r().diagonal().iter().all(|&d| d >= 0.0));
    }

    #[test]
    fn qr_rejects_wide() {
        assert!(matches!(
            householder_qr(&DMatrix::zeros(2, 3)),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn qr_zero_column_gives_zero_pivot() {
        let mut f = DMatrix::zeros(4, 2);
        f[(2, 1)] = -3.0;
        let qr = householder_qr(&f).unwrap();
        assert_eq!(qr.r()[(0, 0)], 0.0);
        assert_eq!(qr.betas()[0], 0.0);
        assert!((qr.r()[(1, 1)] - 3.0).abs() < 1e-15);
    }

    #[test]
    fn apply_q_matches_explicit_and_is_orthogonal() {
        let mut rng = seeded(5);
        let f = random_matrix(&mut rng, 8, 3);
        let qr = householder_qr(&f).unwrap();
        let q = qr.q_full();
        assert!((q.tr_mul(&q) - DMatrix::identity(8, 8)).norm() < 1e-13);
        let m = random_matrix(&mut rng, 8, 4);
        let qm = qr.apply(&m, Side::Left).unwrap();
        assert!((&qm - &q * &m).norm() < 1e-13);
        let back = qr.apply(&qm, Side::LeftTranspose).unwrap();
        assert!((back - m).norm() < 1e-13);
    }

    #[test]
    fn canonical_trivial_cases() {
        let c = skew_canonical(&DMatrix::zeros(4, 4)).unwrap();
        assert!(c.sigmas.is_empty());
        assert_eq!(c.zero_count, 4);
        assert_eq!(c.theta, DMatrix::identity(4, 4));

        let w = DMatrix::from_row_slice(2, 2, &[0.0, 0.7, -0.7, 0.0]);
        let c = skew_canonical(&w).unwrap();
        assert_eq!(c.sigmas, vec![0.7]);
        assert!((c.reconstruct() - &w).norm() < 1e-15);
    }

    #[test]
    fn canonical_matches_eigen_pairs() {
        let mut rng = seeded(21);
        for m in [3, 5, 6, 9] {
            let w = random_skew(&mut rng, m);
            let c = skew_canonical(&w).unwrap();
            assert!((c.reconstruct() - &w).norm() < 1e-13 * (1.0 + w.norm()));
            assert!((c.theta.tr_mul(&c.theta) - DMatrix::identity(m, m)).norm() < 1e-13);
            // Eigenvalues of W are +-i sigma_j, so the singular values come in pairs.
            let sv = singular_values(&w);
            for (j, &s) in c.sigmas.iter().enumerate() {
                assert!((sv[2 * j] - s).abs() < 1e-12 * (1.0 + w.norm()));
                assert!((sv[2 * j + 1] - s).abs() < 1e-12 * (1.0 + w.norm()));
            }
            assert!(c.sigmas.windows(2).all(|p| p[0] >= p[1]));
            let complex = w.clone().complex_eigenvalues();
            let mut ims: Vec<f64> = complex.iter().map(|z| z.im.abs()).collect();
            ims.sort_by(|a, b| b.total_cmp(a));
            for (j, &s) in c.sigmas.iter().enumerate() {
                assert!((ims[2 * j] - s).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn canonical_handles_degenerate_and_graded_spectra() {
        let mut rng = seeded(8);
        let q = gram_schmidt(&random_matrix(&mut rng, 7, 7)).unwrap();
        let mut s = DMatrix::zeros(7, 7);
        for (j, sig) in [2.0, 2.0, 1e-9].iter().enumerate() {
            s[(2 * j, 2 * j + 1)] = *sig;
            s[(2 * j + 1, 2 * j)] = -*sig;
        }
        let w = &q * s * q.transpose();
        let c = skew_canonical(&w).unwrap();
        assert!((c.reconstruct() - &w).norm() < 1e-14 * 4.0);
        assert!((c.sigmas[0] - 2.0).abs() < 1e-13 && (c.sigmas[1] - 2.0).abs() < 1e-13);
        assert!((c.sigmas[2] - 1e-9).abs() < 1e-15);
    }

    #[test]
    fn canonical_rejects_non_skew() {
        let w = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        assert!(matches!(skew_canonical(&w), Err(Error::NotSkew(_))));
    }

    #[test]
    fn expm_basic_cases() {
        let w = random_skew(&mut seeded(2), 4);
        assert!((skew_expm(&w, 0.0).unwrap() - DMatrix::identity(4, 4)).norm() < 1e-15);
        let th = 0.3;
        let w = DMatrix::from_row_slice(2, 2, &[0.0, th, -th, 0.0]);
        let e = skew_expm(&w, 1.0).unwrap();
        let want = DMatrix::from_row_slice(2, 2, &[th.cos(), th.sin(), -th.sin(), th.cos()]);
        assert!((e - want).norm() < 1e-15);
    }

    #[test]
    fn expm_matches_power_series() {
        let mut rng = seeded(13);
        let w = random_skew(&mut rng, 5) * 0.5;
        let e = skew_expm(&w, 1.0).unwrap();
        assert!((e.tr_mul(&e) - DMatrix::identity(5, 5)).norm() < 1e-12);
        let mut series = DMatrix::identity(5, 5);
        let mut term = DMatrix::identity(5, 5);
        for n in 1..40 {
            term = &term * &w / n as f64;
            series += &term;
        }
        assert!((&e - series).norm() < 1e-10);
        assert!((e.determinant() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn expm_one_parameter_subgroup() {
        let w = random_skew(&mut seeded(4), 6);
        let a = skew_expm(&w, 0.4).unwrap() * skew_expm(&w, 0.9).unwrap();
        assert!((a - skew_expm(&w, 1.3).unwrap()).norm() < 1e-11);
    }

    #[test]
    fn oracle_known_cases() {
        let (vals, vecs) = sym_eig_oracle(&DMatrix::from_diagonal(&DVector::from_vec(vec![
            1.0, 3.0, 2.0,
        ])))
        .unwrap();
        assert_eq!(vals.as_slice(), &[3.0, 2.0, 1.0]);
        assert!((vecs[(1, 0)].abs() - 1.0).abs() < 1e-15);
        let (vals, _) = sym_eig_oracle(&DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0])).unwrap();
        assert!((vals[0] - 1.0).abs() < 1e-15 && (vals[1] + 1.0).abs() < 1e-15);
    }

    #[test]
    fn oracle_residual_random() {
        let s = random_symmetric(&mut seeded(9), 8);
        let (vals, vecs) = sym_eig_oracle(&s).unwrap();
        let res = &s * &vecs - &vecs * DMatrix::from_diagonal(&vals);
        assert!(res.norm() <= 1e-10);
        assert!(matches!(
            sym_eig_oracle(&DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 2.0, 0.0])),
            Err(Error::NotSymmetric(_))
        ));
    }
}
