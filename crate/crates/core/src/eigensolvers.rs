//! Eigenvalue and singular value solvers built on the optimizers.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{check_finite, check_square, check_symmetric, orthonormality_error};
use crate::manifolds::{Manifold, Stiefel, StiefelPoint};
use crate::objectives::{AOp, GenRayleigh, Negated, Objective};
use crate::optimizers::{
    sphere_rayleigh_exact_step, CgOptions, CgState, ExactStep, Status,
};
use crate::rng::{random_frame, seeded};

/// One iterate of the sphere conjugate gradient method.
#[derive(Debug, Clone, PartialEq)]
pub struct SphereRecord {
    pub iter: usize,
    pub rho: f64,
    pub grad_norm: f64,
    pub reset: bool,
    /// `<G_{i+1}, tau H_i>`, zero under an exact line search.
    pub orthogonality: f64,
}

#[derive(Debug, Clone)]
pub struct SphereEigResult {
    pub lambda: f64,
    pub x: DVector<f64>,
    pub records: Vec<SphereRecord>,
    pub points: Vec<DVector<f64>>,
    pub matvecs: usize,
    pub status: Status,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SphereCgOptions {
    pub max_iters: usize,
    /// Stop once `|grad rho| <= grad_tol |Q|_F`.
    pub grad_tol: f64,
    /// Steps between resets; `None` uses `n - 1`.
    pub reset_period: Option<usize>,
    /// Force `gamma = 0`, giving steepest ascent with the exact step.
    pub steepest: bool,
    /// Choose `gamma` for conjugacy under the Hessian at the new point
    /// instead of the Polak-Ribiere form.
    pub hessian_gamma: bool,
}

impl Default for SphereCgOptions {
    fn default() -> Self {
        SphereCgOptions {
            max_iters: 500,
            grad_tol: 1e-14,
            reset_period: None,
            steepest: false,
            hessian_gamma: false,
        }
    }
}

fn check_q(q: &DMatrix<f64>) -> Result<()> {
    check_square(q, "Q")?;
    check_finite(q, "Q")?;
    check_symmetric(q)
}

fn unit_start(q: &DMatrix<f64>, x0: &DVector<f64>) -> Result<DVector<f64>> {
    if x0.len() != q.nrows() {
        return Err(Error::Dimension(format!(
            "Q is {0}x{0}, start has length {1}",
            q.nrows(),
            x0.len()
        )));
    }
    let nx = x0.norm();
    if !(nx > 0.0) || !nx.is_finite() {
        return Err(Error::Argument("start vector must be nonzero and finite".into()));
    }
    Ok(x0 / nx)
}

/// Largest eigenpair of symmetric `Q` by conjugate gradient on the sphere with
/// the closed-form maximizing step. One product with `Q` per iteration; `Q x`
/// is updated by the recurrence `Q x+ = Q x c + Q h s` and refreshed at resets.
pub fn extreme_eigpair_sphere(
    q: &DMatrix<f64>,
    x0: &DVector<f64>,
    opts: &SphereCgOptions,
) -> Result<SphereEigResult> {
    check_q(q)?;
    let n = q.nrows();
    let mut x = unit_start(q, x0)?;
    let qnorm = q.norm();
    let period = opts.reset_period.unwrap_or(n.saturating_sub(1)).max(1);
    let mut matvecs = 1;
    let mut qx = q * &x;
    let mut rho = x.dot(&qx);
    let mut g = (&qx - &x * rho) * 2.0;
    let mut h = g.clone();
    let mut since_reset = 0;
    let mut records = vec![SphereRecord {
        iter: 0,
        rho,
        grad_norm: g.norm(),
        reset: true,
        orthogonality: 0.0,
    }];
    let mut points = vec![x.clone()];
    let mut best = rho;
    let mut last_gain = 0;
    let mut status = Status::MaxIters;
    for it in 1..=opts.max_iters {
        if g.norm() <= opts.grad_tol * qnorm.max(f64::MIN_POSITIVE) {
            status = Status::Converged;
            break;
        }
        let hn = h.norm();
        let hu = &h / hn;
        let qh = q * &hu;
        matvecs += 1;
        let (c, s) = match sphere_rayleigh_exact_step(rho, hu.dot(&qh), x.dot(&qh)) {
            ExactStep::Step { c, s } => (c, s),
            ExactStep::Flat => {
                status = Status::Converged;
                break;
            }
        };
        let qx_old = qx.clone();
        let xn = &x * c + &hu * s;
        let nrm = xn.norm();
        let xn = xn / nrm;
        qx = (&qx * c + &qh * s) / nrm;
        let tau_h = &h * c - &x * (hn * s);
        let tau_g = &g - (&x * s + &hu * (1.0 - c)) * hu.dot(&g);
        let gh = g.dot(&h);
        x = xn;
        rho = x.dot(&qx);
        let gn = (&qx - &x * rho) * 2.0;
        let orth = gn.dot(&tau_h);
        since_reset += 1;
        let mut reset = opts.steepest || since_reset >= period;
        let mut hn_next = gn.clone();
        if !reset {
            let gamma = if opts.hessian_gamma {
                // Q tau H comes free from Q x and Q h.
                let qth = (&qh * c - &qx_old * s) * hn;
                let m_th = &qth - &tau_h * rho;
                -m_th.dot(&gn) / m_th.dot(&tau_h)
            } else {
                (&gn - &tau_g).dot(&gn) / gh
            };
            hn_next = &gn + &tau_h * gamma;
            if !gamma.is_finite() || hn_next.dot(&gn) <= 0.0 {
                reset = true;
                hn_next = gn.clone();
            }
        }
        if reset {
            since_reset = 0;
            if !opts.steepest {
                // Refresh the recurrence for Q x.
                qx = q * &x;
                matvecs += 1;
                rho = x.dot(&qx);
                g = (&qx - &x * rho) * 2.0;
                hn_next = g.clone();
            } else {
                g = gn;
            }
        } else {
            g = gn;
        }
        // Keep the direction tangent despite rounding.
        h = &hn_next - &x * x.dot(&hn_next);
        records.push(SphereRecord {
            iter: it,
            rho,
            grad_norm: g.norm(),
            reset,
            orthogonality: orth,
        });
        points.push(x.clone());
        if rho > best + 1e-15 * best.abs() {
            best = rho;
            last_gain = it;
        } else if it - last_gain > 3 * period.max(1) {
            status = Status::ValueStalled;
            break;
        }
    }
    if status == Status::MaxIters && g.norm() <= opts.grad_tol * qnorm {
        status = Status::Converged;
    }
    Ok(SphereEigResult {
        lambda: rho,
        x,
        records,
        points,
        matvecs,
        status,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NewtonVariant {
    /// `x+ = x cos theta + H sin theta / theta`, `H = -x + y / (x^T y)`.
    Geodesic,
    /// Rayleigh quotient iteration `x+ = y / |y|`.
    Rqi,
}

/// One Newton-Rayleigh step; `None` when the shift is singular, meaning `x`
/// is an eigenvector to working precision.
pub fn newton_rayleigh_step(
    q: &DMatrix<f64>,
    x: &DVector<f64>,
    variant: NewtonVariant,
) -> Result<Option<DVector<f64>>> {
    check_q(q)?;
    let x = unit_start(q, x)?;
    let n = x.len();
    let rho = x.dot(&(q * &x));
    let solve = |shift: f64| (q - DMatrix::identity(n, n) * shift).lu().solve(&x);
    // An exactly singular shift is nudged off the eigenvalue.
    let Some(y) = solve(rho).or_else(|| solve(rho - 8.0 * f64::EPSILON * q.norm())) else {
        return Ok(None);
    };
    let xy = x.dot(&y);
    if xy == 0.0 || !xy.is_finite() || !y.iter().all(|v| v.is_finite()) {
        return Ok(None);
    }
    Ok(Some(match variant {
        NewtonVariant::Geodesic => {
            let h = -&x + &y / xy;
            let h = &h - &x * x.dot(&h);
            let th = h.norm();
            if th == 0.0 {
                x
            } else {
                (&x * th.cos() + &h * (th.sin() / th)).normalize()
            }
        }
        // The sign of y is immaterial; align it with x for comparisons.
        NewtonVariant::Rqi => (&y * xy.signum()).normalize(),
    }))
}

#[derive(Debug, Clone)]
pub struct NewtonRayleighResult {
    pub lambda: f64,
    pub x: DVector<f64>,
    pub points: Vec<DVector<f64>>,
    pub status: Status,
}

/// Newton's method for the Rayleigh quotient (or RQI), converging cubically
/// to the eigenvector whose basin contains `x0`.
pub fn newton_rayleigh(
    q: &DMatrix<f64>,
    x0: &DVector<f64>,
    variant: NewtonVariant,
    max_iters: usize,
    tol: f64,
) -> Result<NewtonRayleighResult> {
    check_q(q)?;
    let mut x = unit_start(q, x0)?;
    let mut points = vec![x.clone()];
    let qn = q.norm().max(f64::MIN_POSITIVE);
    let resid = |x: &DVector<f64>| {
        let qx = q * x;
        (&qx - x * x.dot(&qx)).norm()
    };
    let mut status = Status::MaxIters;
    for _ in 0..max_iters {
        if resid(&x) <= tol * qn {
            status = Status::Converged;
            break;
        }
        match newton_rayleigh_step(q, &x, variant)? {
            Some(xn) => {
                x = xn;
                points.push(x.clone());
            }
            None => {
                status = Status::Converged;
                break;
            }
        }
    }
    if resid(&x) <= tol * qn {
        status = Status::Converged;
    }
    Ok(NewtonRayleighResult {
        lambda: x.dot(&(q * &x)),
        x,
        points,
        status,
    })
}

/// Sign-invariant distance between unit vectors, `min |x -+ y|`.
pub fn axis_distance(x: &DVector<f64>, y: &DVector<f64>) -> f64 {
    (x - y).norm().min((x + y).norm())
}

/// True when `d` and `nu` are similarly ordered: `(d_i - d_j)(nu_i - nu_j) >= 0`.
pub fn similarly_ordered(d: &DVector<f64>, nu: &DVector<f64>) -> bool {
    let k = d.len();
    (0..k).all(|i| (i + 1..k).all(|j| (d[i] - d[j]) * (nu[i] - nu[j]) >= 0.0))
}

/// Ranks of `v`, largest first (stable).
fn descending_order(v: &DVector<f64>) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&i, &j| v[j].total_cmp(&v[i]));
    idx
}

/// Permutes `nu` so it is similarly ordered to `d`.
pub fn resort_weights(d: &DVector<f64>, nu: &DVector<f64>) -> DVector<f64> {
    let dk = descending_order(d);
    let mut sorted: Vec<f64> = nu.iter().copied().collect();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut out = DVector::zeros(nu.len());
    for (rank, &pos) in dk.iter().enumerate() {
        out[pos] = sorted[rank];
    }
    out
}

/// Column permutation of `p` making `diag(p^T A p)` (given as `d`) similarly
/// ordered to `nu`.
pub fn sort_frame(p: &DMatrix<f64>, d: &DVector<f64>, nu: &DVector<f64>) -> Result<DMatrix<f64>> {
    if d.len() != p.ncols() || nu.len() != p.ncols() {
        return Err(Error::Dimension("estimates, weights and frame disagree".into()));
    }
    let dk = descending_order(d);
    let nk = descending_order(nu);
    let mut out = p.clone();
    for (rank, &dst) in nk.iter().enumerate() {
        out.set_column(dst, &p.column(dk[rank]));
    }
    Ok(out)
}

/// Flips columns so each one's largest-magnitude entry is positive.
pub fn canonicalize_signs(p: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = p.clone();
    for j in 0..out.ncols() {
        let imax = out.column(j).iamax();
        if out[(imax, j)] < 0.0 {
            out.column_mut(j).neg_mut();
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct EigRecord {
    pub iter: usize,
    pub value: f64,
    pub grad_norm: f64,
    pub step: f64,
    /// Operator block applications spent in this iteration.
    pub applications: usize,
    /// Matrix-vector products spent in this iteration.
    pub matvecs: usize,
    pub estimates: DVector<f64>,
    pub orthonormality: f64,
    pub resorted: bool,
    pub reset: bool,
}

#[derive(Debug, Clone)]
pub struct EigResult {
    /// `diag(p^T A p)` at the final frame.
    pub eigenvalues: DVector<f64>,
    /// The caller's weights; column `j` pairs with `weights[j]`.
    pub weights: DVector<f64>,
    pub frame: StiefelPoint,
    pub records: Vec<EigRecord>,
    pub applications: usize,
    pub matvecs: usize,
    pub status: Status,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TopkOptions {
    pub max_iters: usize,
    /// Stop once `|grad rho| <= grad_tol |A|_F |N|`.
    pub grad_tol: f64,
    pub sort: bool,
    pub cg: CgOptions,
    /// Seed for the default random start.
    pub seed: u64,
}

impl Default for TopkOptions {
    fn default() -> Self {
        TopkOptions {
            max_iters: 500,
            grad_tol: 1e-13,
            sort: true,
            cg: CgOptions::default(),
            seed: 0,
        }
    }
}

/// Default weights `diag(k, k - 1, ..., 1)`.
pub fn default_weights(k: usize) -> DVector<f64> {
    DVector::from_fn(k, |i, _| (k - i) as f64)
}

/// Extreme eigenvectors of `A` by conjugate gradient on V(n, k) maximizing
/// `tr p^T A p N`. Positive weights select the largest eigenvalues, negative
/// ones the smallest. Whenever `diag(p^T A p)` stops being similarly ordered
/// to `N`, the weights are resorted and the direction reset.
pub fn topk_eigpairs_stiefel(
    a: AOp,
    nu: DVector<f64>,
    p0: Option<DMatrix<f64>>,
    opts: &TopkOptions,
) -> Result<EigResult> {
    let n = a.dim();
    let k = nu.len();
    let m = Stiefel::new(n, k);
    let p0 = match p0 {
        Some(p) => p,
        None => random_frame(&mut seeded(opts.seed), n, k),
    };
    let start = StiefelPoint::new(p0)?;
    let scale = a.norm() * nu.norm();
    let nu0 = nu.clone();
    let mut obj = Negated::new(m, GenRayleigh::new(a, nu)?);
    let mut st = CgState::new(&obj, &m, start)?;
    let mut records = Vec::new();
    let mut status = Status::MaxIters;
    let mut step = 0.0;
    let mut reset = true;
    let mut apps_before = 0;
    let mut mvs_before = 0;
    for it in 0..=opts.max_iters {
        let mut resorted = false;
        if opts.sort {
            let d = obj.inner.diag_estimates(&st.point)?;
            if !similarly_ordered(&d, obj.inner.weights()) {
                let w = resort_weights(&d, obj.inner.weights());
                obj.inner.set_weights(w)?;
                st.refresh(&obj, &m)?;
                st.force_reset();
                resorted = true;
            }
        }
        let apps = obj.inner.applications();
        let mvs = obj.inner.matvecs();
        records.push(EigRecord {
            iter: it,
            value: -st.value,
            grad_norm: st.grad_norm(&m),
            step,
            applications: apps - apps_before,
            matvecs: mvs - mvs_before,
            estimates: obj.inner.diag_estimates(&st.point)?,
            orthonormality: orthonormality_error(st.point.frame()),
            resorted,
            reset,
        });
        apps_before = apps;
        mvs_before = mvs;
        if st.grad_norm(&m) <= opts.grad_tol * scale {
            status = Status::Converged;
            break;
        }
        if it == opts.max_iters {
            break;
        }
        let rep = st.step(&obj, &m, &opts.cg)?;
        step = rep.t;
        reset = rep.reset;
        if !rep.line_search_ok && rep.t == 0.0 {
            // A second failure in a row from the gradient direction: give up.
            if rep.reset {
                status = Status::LineSearchFailed;
                break;
            }
        }
    }
    // Undo any resorting so column j pairs with the caller's nu[j].
    let p = sort_frame(st.point.frame(), obj.inner.weights(), &nu0)?;
    let frame = StiefelPoint::new(canonicalize_signs(&p))?;
    let eigenvalues = obj.inner.diag_estimates(&frame)?;
    Ok(EigResult {
        eigenvalues,
        weights: nu0,
        frame,
        applications: obj.inner.applications(),
        matvecs: obj.inner.matvecs(),
        records,
        status,
    })
}

/// Top left singular vectors of `K` through the operator `v -> K (K^T v)`;
/// the eigenvalues returned are squared singular values.
pub fn topk_left_singular(
    kmat: &DMatrix<f64>,
    nu: DVector<f64>,
    p0: Option<DMatrix<f64>>,
    opts: &TopkOptions,
) -> Result<EigResult> {
    topk_eigpairs_stiefel(AOp::factor(kmat.clone())?, nu, p0, opts)
}

/// Value of the generalized Rayleigh quotient at the optimum: the weights
/// paired with the eigenvalues in the same order.
pub fn genray_optimum(eigenvalues_desc: &[f64], nu: &DVector<f64>) -> f64 {
    let mut pos: Vec<f64> = nu.iter().copied().collect();
    pos.sort_by(|a, b| b.total_cmp(a));
    let n = eigenvalues_desc.len();
    // Positive weights take the top of the spectrum, negative ones the bottom.
    let npos = pos.iter().filter(|&&v| v > 0.0).count();
    let mut total = 0.0;
    for (i, &w) in pos.iter().enumerate() {
        let lam = if i < npos {
            eigenvalues_desc[i]
        } else {
            eigenvalues_desc[n - (pos.len() - i)]
        };
        total += w * lam;
    }
    total
}

/// Reference value of `rho` for a symmetric matrix, through the Jacobi oracle.
pub fn genray_reference(a: &DMatrix<f64>, nu: &DVector<f64>) -> Result<f64> {
    let (vals, _) = crate::linalg::sym_eig_oracle(a)?;
    Ok(genray_optimum(vals.as_slice(), nu))
}

/// Gradient norm of the generalized Rayleigh quotient at a frame; exposed for
/// diagnostics and tests.
pub fn genray_grad_norm(a: &AOp, nu: &DVector<f64>, p: &StiefelPoint) -> Result<f64> {
    let f = GenRayleigh::new(a.clone(), nu.clone())?;
    let g = f.gradient(p)?;
    Ok(Stiefel::new(p.n(), p.k()).norm(p, &g))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::sym_eig_oracle;
    use crate::rng::{random_matrix, random_symmetric, random_unit};

    fn ramp(n: usize) -> DVector<f64> {
        DVector::from_fn(n, |i, _| (n - i) as f64)
    }

    fn e(n: usize, i: usize) -> DVector<f64> {
        let mut v = DVector::zeros(n);
        v[i] = 1.0;
        v
    }

    #[test]
    fn sphere_cg_diag21() {
        let q = DMatrix::from_diagonal(&ramp(21));
        let mut rng = seeded(1);
        let mut t = random_unit(&mut rng, 21);
        t[0] = 0.0;
        let x0 = e(21, 0) * 0.9 + t.normalize() * 0.5;
        let r = extreme_eigpair_sphere(&q, &x0, &SphereCgOptions::default()).unwrap();
        assert_eq!(r.status, Status::Converged);
        assert!((r.lambda - 21.0).abs() < 1e-12);
        let hit = r.points.iter().position(|x| axis_distance(x, &e(21, 0)) <= 1e-6).unwrap();
        assert!(hit <= 25, "{hit}");
        for rec in &r.records[1..] {
            let scale = rec.grad_norm.max(1e-300) * 21.0;
            assert!(rec.orthogonality.abs() <= 1e-9 * scale.max(1.0));
        }
        // Roughly one product with Q per iteration.
        assert!(r.matvecs <= 2 * r.records.len());
    }

    #[test]
    fn sphere_cg_identity_and_small() {
        let r = extreme_eigpair_sphere(
            &DMatrix::identity(5, 5),
            &DVector::from_element(5, 1.0),
            &SphereCgOptions::default(),
        )
        .unwrap();
        assert!((r.lambda - 1.0).abs() < 1e-15);
        assert_eq!(r.records.len(), 1);

        // Exact steps on S^2 finish in a handful of iterations.
        let mut rng = seeded(3);
        let q = random_symmetric(&mut rng, 3);
        let top = crate::linalg::sym_eigenvalues(&q)[0];
        let r = extreme_eigpair_sphere(
            &q,
            &random_unit(&mut rng, 3),
            &SphereCgOptions {
                grad_tol: 1e-10,
                ..Default::default()
            },
        )
        .unwrap();
        assert!(r.records.len() <= 6);
        assert!((r.lambda - top).abs() < 1e-10);
    }

    #[test]
    fn sphere_cg_matches_oracle() {
        let mut rng = seeded(4);
        let q = random_symmetric(&mut rng, 50);
        let (vals, _) = sym_eig_oracle(&q).unwrap();
        let r = extreme_eigpair_sphere(&q, &random_unit(&mut rng, 50), &SphereCgOptions::default())
            .unwrap();
        assert!((r.lambda - vals[0]).abs() < 1e-8);
    }

    #[test]
    fn newton_rayleigh_variants() {
        let q = DMatrix::from_diagonal(&ramp(21));
        let mut x0 = e(21, 0) * 0.9;
        x0[1] = (1.0f64 - 0.81).sqrt();
        for v in [NewtonVariant::Geodesic, NewtonVariant::Rqi] {
            let r = newton_rayleigh(&q, &x0, v, 4, 1e-14).unwrap();
            assert!(axis_distance(&r.x, &e(21, 0)) < 1e-12, "{v:?}");
            assert!(r.points.len() <= 5);
        }
        let fixed = newton_rayleigh(&q, &e(21, 3), NewtonVariant::Geodesic, 3, 1e-14).unwrap();
        assert_eq!(fixed.x, e(21, 3));
    }

    #[test]
    fn sorting_helpers() {
        let d = DVector::from_vec(vec![1.0, 3.0, 2.0]);
        let nu = DVector::from_vec(vec![3.0, 2.0, 1.0]);
        assert!(!similarly_ordered(&d, &nu));
        let w = resort_weights(&d, &nu);
        assert_eq!(w, DVector::from_vec(vec![1.0, 3.0, 2.0]));
        assert!(similarly_ordered(&d, &w));

        let p = DMatrix::identity(4, 3);
        let same = sort_frame(&p, &DVector::from_vec(vec![3.0, 2.0, 1.0]), &nu).unwrap();
        assert_eq!(same, p);
        let rev = sort_frame(&p, &DVector::from_vec(vec![1.0, 2.0, 3.0]), &nu).unwrap();
        assert_eq!(rev.column(0), p.column(2));
        assert_eq!(rev.column(2), p.column(0));
    }

    #[test]
    fn sort_frame_matches_brute_force() {
        let mut rng = seeded(5);
        let a = random_symmetric(&mut rng, 6);
        let p = random_frame(&mut rng, 6, 4);
        let nu = DVector::from_vec(vec![0.5, 4.0, -1.0, 2.0]);
        let d = DVector::from_fn(4, |j, _| p.column(j).dot(&(&a * p.column(j))));
        let val = |m: &DMatrix<f64>| (0..4).map(|j| nu[j] * m.column(j).dot(&(&a * m.column(j)))).sum::<f64>();
        let sorted = val(&sort_frame(&p, &d, &nu).unwrap());
        let mut perm = [0usize, 1, 2, 3];
        let mut best = f64::NEG_INFINITY;
        permute(&mut perm, 0, &mut |pm| {
            let m = DMatrix::from_fn(6, 4, |i, j| p[(i, pm[j])]);
            best = best.max(val(&m));
        });
        assert!((sorted - best).abs() < 1e-12);
    }

    fn permute(v: &mut [usize; 4], i: usize, f: &mut dyn FnMut(&[usize; 4])) {
        if i == v.len() {
            f(v);
            return;
        }
        for j in i..v.len() {
            v.swap(i, j);
            permute(v, i + 1, f);
            v.swap(i, j);
        }
    }

    #[test]
    fn topk_counts_new_directions_only() {
        let a = DMatrix::from_diagonal(&ramp(40));
        let r = topk_eigpairs_stiefel(
            AOp::dense(a).unwrap(),
            ramp(3),
            None,
            &TopkOptions {
                max_iters: 30,
                ..Default::default()
            },
        )
        .unwrap();
        for rec in &r.records[1..] {
            assert!(rec.matvecs <= 2 * 3 + 2, "{}", rec.matvecs);
            assert!(rec.orthonormality <= 1e-12);
        }
        assert!(r.records[29].value > r.records[1].value);
    }

    #[test]
    fn topk_identity_converges_immediately() {
        let r = topk_eigpairs_stiefel(
            AOp::dense(DMatrix::identity(6, 6)).unwrap(),
            ramp(2),
            None,
            &TopkOptions::default(),
        )
        .unwrap();
        assert_eq!(r.records.len(), 1);
        assert!((r.records[0].value - 3.0).abs() < 1e-12);
    }

    #[test]
    fn topk_k1_matches_sphere() {
        let mut rng = seeded(6);
        let q = random_symmetric(&mut rng, 20);
        let s = extreme_eigpair_sphere(&q, &random_unit(&mut rng, 20), &Default::default()).unwrap();
        let r = topk_eigpairs_stiefel(AOp::dense(q).unwrap(), ramp(1), None, &TopkOptions::default())
            .unwrap();
        assert_eq!(r.status, Status::Converged);
        assert!((r.eigenvalues[0] - s.lambda).abs() < 1e-9);
        assert!(axis_distance(&r.frame.frame().column(0).into_owned(), &s.x) < 1e-6);
    }

    #[test]
    fn left_singular_cases() {
        let mut k = DMatrix::zeros(5, 3);
        for i in 0..3 {
            k[(i, i)] = (3 - i) as f64;
        }
        let r = topk_left_singular(&k, ramp(2), None, &TopkOptions::default()).unwrap();
        assert!((r.eigenvalues[0] - 9.0).abs() < 1e-9 && (r.eigenvalues[1] - 4.0).abs() < 1e-9);
        assert!((r.frame.frame().column(0) - e(5, 0)).norm() < 1e-6);

        let mut rng = seeded(7);
        let k = random_matrix(&mut rng, 20, 40);
        let (vals, _) = sym_eig_oracle(&(&k * k.transpose())).unwrap();
        let r = topk_left_singular(&k, ramp(3), None, &TopkOptions::default()).unwrap();
        for j in 0..3 {
            assert!((r.eigenvalues[j] - vals[j]).abs() < 1e-7 * vals[0], "{j}");
        }
    }

    #[test]
    fn smallest_eigenvalues_with_negative_weights() {
        let a = DMatrix::from_diagonal(&ramp(8));
        let nu = DVector::from_vec(vec![-1.0, -2.0]);
        let r = topk_eigpairs_stiefel(AOp::dense(a).unwrap(), nu.clone(), None, &TopkOptions::default())
            .unwrap();
        let mut ev: Vec<f64> = r.eigenvalues.iter().copied().collect();
        ev.sort_by(|a, b| a.total_cmp(b));
        assert!((ev[0] - 1.0).abs() < 1e-9 && (ev[1] - 2.0).abs() < 1e-9);
        assert!((r.records.last().unwrap().value - genray_optimum(&ramp(8).as_slice(), &nu)).abs() < 1e-9);
    }
}
