//! Gradient flows integrated with fixed-step RK4, with isospectral monitors
//! and exponential-rate regression.
//!
//! * [`double_bracket_flow`]: `H' = [H, [H, N]]`.
//! * [`so_gradient_flow`]: `Theta' = Theta [Theta^T Q Theta, N]` on SO(n).
//! * [`genray_flow`]: ascent of `tr p^T A p N` on V(n, k) by geodesic Euler steps.
//! * [`svd_flow_sigma`] and [`svd_flow_uv`]: the singular value flows built on
//!   the scaled bracket [`BracketOp`].

use nalgebra::{DMatrix, DVector, Matrix2};

use crate::error::{Error, Result};
use crate::linalg::{
    bracket, check_finite, check_square, check_symmetric, orthonormality_error, polar_factor,
    singular_values, sym_eigenvalues,
};
use crate::manifolds::{stiefel_exp, StiefelPoint};
use crate::objectives::{AOp, GenRayleigh, Objective};

/// Orthogonality drift above which manifold states are re-projected.
pub const PROJECTION_TOL: f64 = 1e-9;

/// State space of the RK4 integrator.
pub trait FlowVec: Clone {
    /// `self + s * other`.
    fn add_scaled(&self, s: f64, other: &Self) -> Self;
    fn all_finite(&self) -> bool;
}

impl FlowVec for f64 {
    fn add_scaled(&self, s: f64, other: &Self) -> Self {
        self + s * other
    }
    fn all_finite(&self) -> bool {
        self.is_finite()
    }
}

impl FlowVec for DMatrix<f64> {
    fn add_scaled(&self, s: f64, other: &Self) -> Self {
        self + other * s
    }
    fn all_finite(&self) -> bool {
        self.iter().all(|v| v.is_finite())
    }
}

impl FlowVec for (DMatrix<f64>, DMatrix<f64>) {
    fn add_scaled(&self, s: f64, other: &Self) -> Self {
        (self.0.add_scaled(s, &other.0), self.1.add_scaled(s, &other.1))
    }
    fn all_finite(&self) -> bool {
        self.0.all_finite() && self.1.all_finite()
    }
}

/// Classical fixed-step RK4 from `t = 0` to `t_end`; the final step is
/// shortened to land on `t_end`.
///
/// `observe(t, y)` runs on the initial state and after every step; it may
/// modify the state (projection) and returns `true` to stop early. Returns
/// the final time and state.
pub fn rk4_integrate<S, F, O>(rhs: F, y0: S, t_end: f64, dt: f64, mut observe: O) -> Result<(f64, S)>
where
    S: FlowVec,
    F: Fn(f64, &S) -> S,
    O: FnMut(f64, &mut S) -> Result<bool>,
{
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::Argument(format!("step must be positive, got {dt}")));
    }
    if !(t_end >= 0.0 && t_end.is_finite()) {
        return Err(Error::Argument(format!("end time must be finite and >= 0, got {t_end}")));
    }
    let mut y = y0;
    if !y.all_finite() {
        return Err(Error::IntegrationAborted(0.0));
    }
    let mut t = 0.0;
    if observe(t, &mut y)? {
        return Ok((t, y));
    }
    let steps = (t_end / dt - 1e-9).ceil().max(0.0) as usize;
    for i in 0..steps {
        let h = if i + 1 == steps { t_end - t } else { dt };
        let k1 = rhs(t, &y);
        let k2 = rhs(t + 0.5 * h, &y.add_scaled(0.5 * h, &k1));
        let k3 = rhs(t + 0.5 * h, &y.add_scaled(0.5 * h, &k2));
        let k4 = rhs(t + h, &y.add_scaled(h, &k3));
        y = y
            .add_scaled(h / 6.0, &k1)
            .add_scaled(h / 3.0, &k2)
            .add_scaled(h / 3.0, &k3)
            .add_scaled(h / 6.0, &k4);
        t = if i + 1 == steps { t_end } else { t + h };
        if !y.all_finite() {
            return Err(Error::IntegrationAborted(t));
        }
        if observe(t, &mut y)? {
            break;
        }
    }
    Ok((t, y))
}

/// Integration controls shared by the flows.
#[derive(Debug, Clone)]
pub struct FlowOptions {
    pub t_end: f64,
    pub dt: f64,
    /// Keep every `record_every`-th step in the trace (the final one always).
    pub record_every: usize,
    /// Stop once the flow's velocity norm falls to this value (0 disables).
    pub stop_speed: f64,
}

impl FlowOptions {
    pub fn new(t_end: f64, dt: f64) -> Self {
        FlowOptions {
            t_end,
            dt,
            record_every: 1,
            stop_speed: 0.0,
        }
    }
}

/// `1e-3 / (max|nu| * max|lambda|)`, the default step for a spectrum/weight pair.
pub fn default_dt(nu_scale: f64, spectrum_scale: f64) -> f64 {
    let s = nu_scale.abs() * spectrum_scale.abs();
    if s > 0.0 && s.is_finite() {
        1e-3 / s
    } else {
        1e-3
    }
}

/// One recorded point of a trajectory.
#[derive(Debug, Clone)]
pub struct FlowState {
    pub t: f64,
    /// Monitored matrix: `H`, `Theta`, `p`, or `Sigma` (for the pair flow
    /// `U^T K V`).
    pub state: DMatrix<f64>,
    /// Eigenvalues (bracket flows, genray) or singular values (SVD flows), descending.
    pub spectrum: DVector<f64>,
    pub objective: f64,
    /// `|spectrum(t) - spectrum(0)|_inf` for the isospectral flows; zero for genray.
    pub drift: f64,
    /// Orthogonality error of the manifold state (zero for `H` and `Sigma`).
    pub orthogonality: f64,
    /// Norm of the flow velocity.
    pub speed: f64,
}

#[derive(Debug, Clone)]
pub struct FlowTrace {
    pub states: Vec<FlowState>,
    /// Final `(U, V)` of [`svd_flow_uv`].
    pub frames: Option<(DMatrix<f64>, DMatrix<f64>)>,
    pub steps: usize,
    pub projections: usize,
}

impl FlowTrace {
    pub fn last(&self) -> &FlowState {
        self.states.last().expect("trace holds the initial state")
    }

    pub fn max_drift(&self) -> f64 {
        self.states.iter().map(|s| s.drift).fold(0.0, f64::max)
    }

    pub fn max_orthogonality(&self) -> f64 {
        self.states.iter().map(|s| s.orthogonality).fold(0.0, f64::max)
    }

    /// Largest decrease of the objective between consecutive records
    /// (zero for a monotone ascent).
    pub fn max_objective_decrease(&self) -> f64 {
        self.states
            .windows(2)
            .map(|w| w[0].objective - w[1].objective)
            .fold(0.0, f64::max)
    }

    /// CSV rows `t, entries..., objective, drift`.
    pub fn csv(&self, entries: &[(usize, usize)]) -> String {
        let mut out = String::from("t");
        for (i, j) in entries {
            out.push_str(&format!(",s{}_{}", i + 1, j + 1));
        }
        out.push_str(",objective,drift\n");
        for s in &self.states {
            out.push_str(&format!("{:.10e}", s.t));
            for &(i, j) in entries {
                out.push_str(&format!(",{:.10e}", s.state[(i, j)]));
            }
            out.push_str(&format!(",{:.10e},{:.3e}\n", s.objective, s.drift));
        }
        out
    }
}

fn inf_diff(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    (a - b).amax()
}

/// Shared recording logic: keeps every `every`-th observation and the last.
struct Recorder {
    every: usize,
    count: usize,
    states: Vec<FlowState>,
    pending: Option<FlowState>,
}

impl Recorder {
    fn new(every: usize) -> Self {
        Recorder {
            every: every.max(1),
            count: 0,
            states: Vec::new(),
            pending: None,
        }
    }

    fn wants(&self) -> bool {
        self.count % self.every == 0
    }

    fn push(&mut self, s: FlowState, keep: bool) {
        if keep {
            self.states.push(s);
            self.pending = None;
        } else {
            self.pending = Some(s);
        }
        self.count += 1;
    }

    fn finish(mut self) -> Vec<FlowState> {
        if let Some(s) = self.pending.take() {
            self.states.push(s);
        }
        self.states
    }
}

/// `H' = [H, [H, N]]` with `N = diag(nu)`.
///
/// The spectrum is recomputed at every recorded step; `tr HN` rises at rate
/// `|[H, N]|^2`.
pub fn double_bracket_flow(h0: &DMatrix<f64>, nu: &DVector<f64>, opts: &FlowOptions) -> Result<FlowTrace> {
    check_square(h0, "H0")?;
    check_finite(h0, "H0")?;
    check_symmetric(h0)?;
    if nu.len() != h0.nrows() {
        return Err(Error::Dimension(format!("N has {} entries, H0 is {}x{}", nu.len(), h0.nrows(), h0.nrows())));
    }
    let n = DMatrix::from_diagonal(nu);
    let spec0 = sym_eigenvalues(h0);
    let mut rec = Recorder::new(opts.record_every);
    let mut steps = 0;
    let rhs = |_t: f64, h: &DMatrix<f64>| bracket(h, &bracket(h, &n));
    let observe = |t: f64, h: &mut DMatrix<f64>| -> Result<bool> {
        let speed = bracket(h, &n).norm();
        let stop = opts.stop_speed > 0.0 && speed <= opts.stop_speed;
        let keep = rec.wants() || stop;
        let spectrum = if keep { sym_eigenvalues(h) } else { spec0.clone() };
        let st = FlowState {
            t,
            drift: inf_diff(&spectrum, &spec0),
            spectrum,
            objective: h.dot(&n),
            orthogonality: 0.0,
            speed,
            state: h.clone(),
        };
        rec.push(st, keep);
        steps += 1;
        Ok(stop)
    };
    rk4_integrate(rhs, h0.clone(), opts.t_end, opts.dt, observe)?;
    let mut states = rec.finish();
    finalize_spectrum(&mut states, &spec0, sym_eigenvalues);
    Ok(FlowTrace {
        states,
        frames: None,
        steps: steps - 1,
        projections: 0,
    })
}

fn finalize_spectrum(states: &mut [FlowState], spec0: &DVector<f64>, f: fn(&DMatrix<f64>) -> DVector<f64>) {
    if let Some(last) = states.last_mut() {
        last.spectrum = f(&last.state);
        last.drift = inf_diff(&last.spectrum, spec0);
    }
}

/// `Theta' = Theta [Theta^T Q Theta, N]`, the gradient ascent of
/// `tr Theta^T Q Theta N` on SO(n).
///
/// `H = Theta^T Q Theta` follows [`double_bracket_flow`] on the same clock.
/// The state is replaced by its polar factor whenever `|Theta^T Theta - I|_F`
/// exceeds [`PROJECTION_TOL`].
pub fn so_gradient_flow(
    q: &DMatrix<f64>,
    nu: &DVector<f64>,
    theta0: &DMatrix<f64>,
    opts: &FlowOptions,
) -> Result<FlowTrace> {
    check_square(q, "Q")?;
    check_finite(q, "Q")?;
    check_symmetric(q)?;
    let dim = q.nrows();
    if nu.len() != dim || theta0.nrows() != dim || theta0.ncols() != dim {
        return Err(Error::Dimension(format!(
            "Q is {dim}x{dim}, N has {} entries, Theta0 is {}x{}",
            nu.len(),
            theta0.nrows(),
            theta0.ncols()
        )));
    }
    let err = orthonormality_error(theta0);
    if err > 1e-10 * (dim as f64) {
        return Err(Error::NotOrthonormal(err));
    }
    if theta0.determinant() < 0.0 {
        return Err(Error::Argument("Theta0 must have determinant +1".into()));
    }
    let n = DMatrix::from_diagonal(nu);
    let h_of = |th: &DMatrix<f64>| th.tr_mul(&(q * th));
    let spec0 = sym_eigenvalues(q);
    let mut rec = Recorder::new(opts.record_every);
    let mut steps = 0;
    let mut projections = 0;
    let rhs = |_t: f64, th: &DMatrix<f64>| th * bracket(&h_of(th), &n);
    let observe = |t: f64, th: &mut DMatrix<f64>| -> Result<bool> {
        let mut orth = orthonormality_error(th);
        if orth > PROJECTION_TOL {
            *th = polar_factor(th);
            projections += 1;
            orth = orthonormality_error(th);
        }
        let h = h_of(th);
        let speed = bracket(&h, &n).norm();
        let stop = opts.stop_speed > 0.0 && speed <= opts.stop_speed;
        let keep = rec.wants() || stop;
        let spectrum = if keep { sym_eigenvalues(&h) } else { spec0.clone() };
        let st = FlowState {
            t,
            drift: inf_diff(&spectrum, &spec0),
            spectrum,
            objective: h.dot(&n),
            orthogonality: orth,
            speed,
            state: th.clone(),
        };
        rec.push(st, keep);
        steps += 1;
        Ok(stop)
    };
    rk4_integrate(rhs, theta0.clone(), opts.t_end, opts.dt, observe)?;
    let mut states = rec.finish();
    if let Some(last) = states.last_mut() {
        last.spectrum = sym_eigenvalues(&h_of(&last.state));
        last.drift = inf_diff(&last.spectrum, &spec0);
    }
    Ok(FlowTrace {
        states,
        frames: None,
        steps: steps - 1,
        projections,
    })
}

/// Ascent of `rho(p) = tr p^T A p N` on V(n, k) by `p <- exp_p(dt grad rho)`.
///
/// Each step is an exact geodesic, so the frame stays on the manifold to
/// rounding; `spectrum` records the eigenvalues of `p^T A p`.
pub fn genray_flow(a: &AOp, nu: &DVector<f64>, p0: &DMatrix<f64>, opts: &FlowOptions) -> Result<FlowTrace> {
    if !(opts.dt > 0.0 && opts.dt.is_finite()) {
        return Err(Error::Argument(format!("step must be positive, got {}", opts.dt)));
    }
    if !(opts.t_end >= 0.0 && opts.t_end.is_finite()) {
        return Err(Error::Argument(format!("end time must be finite and >= 0, got {}", opts.t_end)));
    }
    let f = GenRayleigh::new(a.clone(), nu.clone())?;
    if p0.nrows() != f.n() || p0.ncols() != f.k() {
        return Err(Error::Dimension(format!(
            "start frame is {}x{}, expected {}x{}",
            p0.nrows(),
            p0.ncols(),
            f.n(),
            f.k()
        )));
    }
    let mut pt = StiefelPoint::new(p0.clone())?;
    let every = opts.record_every.max(1);
    let steps = (opts.t_end / opts.dt - 1e-9).ceil().max(0.0) as usize;
    let mut states = Vec::new();
    let mut t = 0.0;
    for i in 0..=steps {
        let (value, grad) = f.value_grad(&pt)?;
        let speed = grad.inner(&grad).sqrt();
        if !value.is_finite() || !speed.is_finite() {
            return Err(Error::IntegrationAborted(t));
        }
        let stop = opts.stop_speed > 0.0 && speed <= opts.stop_speed;
        if i % every == 0 || i == steps || stop {
            let p = pt.frame().clone();
            let h = p.tr_mul(&a.apply(&p));
            states.push(FlowState {
                t,
                spectrum: sym_eigenvalues(&h),
                objective: value,
                drift: 0.0,
                orthogonality: orthonormality_error(&p),
                speed,
                state: p,
            });
        }
        if i == steps || stop {
            return Ok(FlowTrace {
                states,
                frames: None,
                steps: i,
                projections: 0,
            });
        }
        let h = if i + 1 == steps { opts.t_end - t } else { opts.dt };
        pt = stiefel_exp(&pt, &grad, h)?;
        t = if i + 1 == steps { opts.t_end } else { t + h };
    }
    unreachable!("loop returns on its last iteration")
}

/// Scaled bracket `[[A, B]] = (A B^T - B A^T) / (m - 2)` with `m` the row
/// count of `A`; `m - 2` is replaced by 1 when `m <= 2`.
#[derive(Debug, Clone, Copy)]
pub struct BracketOp {
    pub m: usize,
}

impl BracketOp {
    pub fn new(m: usize) -> Self {
        BracketOp { m }
    }

    pub fn scale(&self) -> f64 {
        dim_scale(self.m)
    }

    /// Skew-symmetric `m x m` result.
    pub fn apply(&self, a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
        let abt = a * b.transpose();
        (&abt - abt.transpose()) / self.scale()
    }
}

/// `m - 2`, or 1 when `m <= 2`.
pub fn dim_scale(m: usize) -> f64 {
    if m <= 2 {
        1.0
    } else {
        (m - 2) as f64
    }
}

/// `diag_{n x k}(nu)`.
pub fn rect_diag(n: usize, nu: &DVector<f64>) -> DMatrix<f64> {
    let k = nu.len();
    DMatrix::from_fn(n, k, |i, j| if i == j { nu[i] } else { 0.0 })
}

fn svd_objective(s: &DMatrix<f64>, nu: &DVector<f64>) -> f64 {
    nu.iter().enumerate().map(|(i, v)| v * s[(i, i)]).sum()
}

fn check_rect(s: &DMatrix<f64>, nu: &DVector<f64>, what: &'static str) -> Result<()> {
    check_finite(s, what)?;
    if s.ncols() != nu.len() || s.nrows() < s.ncols() {
        return Err(Error::Dimension(format!(
            "{what} is {}x{}, N has {} entries (need n >= k = |N|)",
            s.nrows(),
            s.ncols(),
            nu.len()
        )));
    }
    Ok(())
}

/// Velocity of the `Sigma` flow: `Sigma [[Sigma^T, N^T]] - [[Sigma, N]] Sigma`.
pub fn svd_sigma_rhs(s: &DMatrix<f64>, n: &DMatrix<f64>) -> DMatrix<f64> {
    let left = BracketOp::new(s.ncols()).apply(&s.transpose(), &n.transpose());
    let right = BracketOp::new(s.nrows()).apply(s, n);
    s * left - right * s
}

/// `Sigma' = Sigma [[Sigma^T, N^T]] - [[Sigma, N]] Sigma` on `n x k` matrices,
/// `N = diag_{n x k}(nu)`. Singular values are invariant and `tr N^T Sigma` rises.
pub fn svd_flow_sigma(sigma0: &DMatrix<f64>, nu: &DVector<f64>, opts: &FlowOptions) -> Result<FlowTrace> {
    check_rect(sigma0, nu, "Sigma0")?;
    let n = rect_diag(sigma0.nrows(), nu);
    let spec0 = singular_values(sigma0);
    let mut rec = Recorder::new(opts.record_every);
    let mut steps = 0;
    let rhs = |_t: f64, s: &DMatrix<f64>| svd_sigma_rhs(s, &n);
    let observe = |t: f64, s: &mut DMatrix<f64>| -> Result<bool> {
        let speed = svd_sigma_rhs(s, &n).norm();
        let stop = opts.stop_speed > 0.0 && speed <= opts.stop_speed;
        let keep = rec.wants() || stop;
        let spectrum = if keep { singular_values(s) } else { spec0.clone() };
        rec.push(
            FlowState {
                t,
                drift: inf_diff(&spectrum, &spec0),
                spectrum,
                objective: svd_objective(s, nu),
                orthogonality: 0.0,
                speed,
                state: s.clone(),
            },
            keep,
        );
        steps += 1;
        Ok(stop)
    };
    rk4_integrate(rhs, sigma0.clone(), opts.t_end, opts.dt, observe)?;
    let mut states = rec.finish();
    finalize_spectrum(&mut states, &spec0, singular_values);
    Ok(FlowTrace {
        states,
        frames: None,
        steps: steps - 1,
        projections: 0,
    })
}

/// `U' = U [[U^T K V, N]]`, `V' = V [[V^T K^T U, N^T]]` on O(n) x O(k).
///
/// Records `Sigma = U^T K V`; both frames are replaced by their polar factors
/// when either departs from orthogonality by more than [`PROJECTION_TOL`].
pub fn svd_flow_uv(
    k: &DMatrix<f64>,
    nu: &DVector<f64>,
    u0: &DMatrix<f64>,
    v0: &DMatrix<f64>,
    opts: &FlowOptions,
) -> Result<FlowTrace> {
    check_rect(k, nu, "K")?;
    let (rows, cols) = (k.nrows(), k.ncols());
    if u0.nrows() != rows || u0.ncols() != rows || v0.nrows() != cols || v0.ncols() != cols {
        return Err(Error::Dimension(format!(
            "K is {rows}x{cols}, U0 is {}x{}, V0 is {}x{}",
            u0.nrows(),
            u0.ncols(),
            v0.nrows(),
            v0.ncols()
        )));
    }
    for m in [u0, v0] {
        let e = orthonormality_error(m);
        if e > 1e-10 * (rows as f64) {
            return Err(Error::NotOrthonormal(e));
        }
    }
    let n = rect_diag(rows, nu);
    let bn = BracketOp::new(rows);
    let bk = BracketOp::new(cols);
    let spec0 = singular_values(k);
    let sigma_of = |uv: &(DMatrix<f64>, DMatrix<f64>)| uv.0.tr_mul(&(k * &uv.1));
    let mut rec = Recorder::new(opts.record_every);
    let mut steps = 0;
    let mut projections = 0;
    let rhs = |_t: f64, uv: &(DMatrix<f64>, DMatrix<f64>)| {
        let s = sigma_of(uv);
        (&uv.0 * bn.apply(&s, &n), &uv.1 * bk.apply(&s.transpose(), &n.transpose()))
    };
    let observe = |t: f64, uv: &mut (DMatrix<f64>, DMatrix<f64>)| -> Result<bool> {
        let mut orth = orthonormality_error(&uv.0).max(orthonormality_error(&uv.1));
        if orth > PROJECTION_TOL {
            uv.0 = polar_factor(&uv.0);
            uv.1 = polar_factor(&uv.1);
            projections += 1;
            orth = orthonormality_error(&uv.0).max(orthonormality_error(&uv.1));
        }
        let s = sigma_of(uv);
        let speed = svd_sigma_rhs(&s, &n).norm();
        let stop = opts.stop_speed > 0.0 && speed <= opts.stop_speed;
        let keep = rec.wants() || stop;
        let spectrum = if keep { singular_values(&s) } else { spec0.clone() };
        rec.push(
            FlowState {
                t,
                drift: inf_diff(&spectrum, &spec0),
                spectrum,
                objective: svd_objective(&s, nu),
                orthogonality: orth,
                speed,
                state: s,
            },
            keep,
        );
        steps += 1;
        Ok(stop)
    };
    let (_, uv) = rk4_integrate(rhs, (u0.clone(), v0.clone()), opts.t_end, opts.dt, observe)?;
    let mut states = rec.finish();
    finalize_spectrum(&mut states, &spec0, singular_values);
    Ok(FlowTrace {
        states,
        frames: Some(uv),
        steps: steps - 1,
        projections,
    })
}

/// Least-squares fit of `log|x(t)| = -rate t + intercept`.
#[derive(Debug, Clone, PartialEq)]
pub struct RateFit {
    pub rate: f64,
    pub intercept: f64,
    /// RMS residual of the log fit.
    pub residual: f64,
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum RateEstimate {
    Fitted(RateFit),
    /// No sample of the fit window lies in the usable magnitude band.
    Unmeasurable,
}

impl RateEstimate {
    pub fn rate(&self) -> Option<f64> {
        match self {
            RateEstimate::Fitted(f) => Some(f.rate),
            RateEstimate::Unmeasurable => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct EntryRate {
    /// Zero-based `(row, column)` of the monitored entry.
    pub entry: (usize, usize),
    pub measured: RateEstimate,
    pub predicted: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct RateReport {
    pub entries: Vec<EntryRate>,
    /// The trace started from a square symmetric matrix. The `Sigma` flow
    /// then runs on a clock `k - 2` times slower than the double-bracket
    /// flow of the same matrix; rates are reported on the `Sigma` clock.
    pub symmetric_square: bool,
}

impl RateReport {
    pub fn get(&self, i: usize, j: usize) -> Option<&EntryRate> {
        self.entries.iter().find(|e| e.entry == (i, j))
    }
}

/// Fraction of the trajectory (from the end) used for rate fits.
pub const FIT_TAIL: f64 = 0.6;
/// Magnitude band of samples used for rate fits.
pub const FIT_BAND: (f64, f64) = (1e-10, 1e-2);

/// Fits a decay rate to the samples of the last [`FIT_TAIL`] of the time
/// span whose magnitude lies in [`FIT_BAND`]; needs at least three.
pub fn fit_rate(times: &[f64], values: &[f64]) -> RateEstimate {
    let (Some(&t0), Some(&t1)) = (times.first(), times.last()) else {
        return RateEstimate::Unmeasurable;
    };
    let start = t1 - FIT_TAIL * (t1 - t0);
    let pts: Vec<(f64, f64)> = times
        .iter()
        .zip(values)
        .filter(|(t, v)| **t >= start && v.abs() >= FIT_BAND.0 && v.abs() <= FIT_BAND.1)
        .map(|(t, v)| (*t, v.abs().ln()))
        .collect();
    if pts.len() < 3 {
        return RateEstimate::Unmeasurable;
    }
    let m = pts.len() as f64;
    let tm = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let ym = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let stt: f64 = pts.iter().map(|p| (p.0 - tm).powi(2)).sum();
    if stt <= 0.0 {
        return RateEstimate::Unmeasurable;
    }
    let sty: f64 = pts.iter().map(|p| (p.0 - tm) * (p.1 - ym)).sum();
    let slope = sty / stt;
    let intercept = ym - slope * tm;
    let residual = (pts.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum::<f64>() / m).sqrt();
    RateEstimate::Fitted(RateFit {
        rate: -slope,
        intercept,
        residual,
        points: pts.len(),
    })
}

/// Fits decay rates of the given state entries (zero-based) along a trace.
pub fn rate_regression(trace: &FlowTrace, entries: &[(usize, usize)]) -> Result<RateReport> {
    let first = &trace.states[0].state;
    for &(i, j) in entries {
        if i >= first.nrows() || j >= first.ncols() {
            return Err(Error::Dimension(format!(
                "entry ({i}, {j}) outside a {}x{} state",
                first.nrows(),
                first.ncols()
            )));
        }
    }
    let times: Vec<f64> = trace.states.iter().map(|s| s.t).collect();
    let report = entries
        .iter()
        .map(|&(i, j)| {
            let vals: Vec<f64> = trace.states.iter().map(|s| s.state[(i, j)]).collect();
            EntryRate {
                entry: (i, j),
                measured: fit_rate(&times, &vals),
                predicted: None,
            }
        })
        .collect();
    let symmetric_square = first.is_square() && (first - first.transpose()).norm() <= 1e-12 * (1.0 + first.norm());
    Ok(RateReport {
        entries: report,
        symmetric_square,
    })
}

/// [`rate_regression`] on an SVD-flow trace, adding the predicted rates at
/// the limit `diag(sigma)` reached by the trace.
pub fn svd_rate_report(trace: &FlowTrace, nu: &DVector<f64>, entries: &[(usize, usize)]) -> Result<RateReport> {
    let mut report = rate_regression(trace, entries)?;
    let last = &trace.last().state;
    let (n, k) = (last.nrows(), last.ncols());
    let sigma = DVector::from_fn(k, |i, _| last[(i, i)].abs());
    for e in &mut report.entries {
        e.predicted = svd_predicted_rate(e.entry.0, e.entry.1, &sigma, nu, n, k);
    }
    Ok(report)
}

/// `R1` for the pair `(sigma_ij, sigma_ji)` of the `Sigma` flow linearized at
/// a diagonal critical point.
pub fn svd_rate_r1(si: f64, ni: f64, sj: f64, nj: f64, n: usize, k: usize) -> Matrix2<f64> {
    let (cn, ck) = (dim_scale(n), dim_scale(k));
    Matrix2::new(
        ni * si / ck + nj * sj / cn,
        -nj * si / ck - ni * sj / cn,
        -nj * si / cn - ni * sj / ck,
        ni * si / cn + nj * sj / ck,
    )
}

/// `R2` for the pair `(gamma_ij, phi_ij)` of the frame flow linearized at an SVD.
pub fn svd_rate_r2(si: f64, ni: f64, sj: f64, nj: f64, n: usize, k: usize) -> Matrix2<f64> {
    let (cn, ck) = (dim_scale(n), dim_scale(k));
    let s = ni * si + nj * sj;
    let c = ni * sj + nj * si;
    Matrix2::new(s / cn, -c / cn, -c / ck, s / ck)
}

/// Eigenvalues of a real 2x2 matrix, ascending by real part; complex pairs
/// yield their common real part twice.
pub fn eig2(m: &Matrix2<f64>) -> (f64, f64) {
    let tr = m.trace();
    let det = m.determinant();
    let half = 0.5 * tr;
    let disc = half * half - det;
    if disc < 0.0 {
        return (half, half);
    }
    let r = disc.sqrt();
    // Stable pair: the larger root directly, the other from the determinant.
    let big = if half >= 0.0 { half + r } else { half - r };
    let small = if big != 0.0 { det / big } else { 0.0 };
    if small <= big {
        (small, big)
    } else {
        (big, small)
    }
}

/// Asymptotic decay rate of `sigma_ij` (zero-based) near `diag(sigma)`: the
/// smaller eigenvalue of `R1` when both indices are below `k`, and
/// `nu_j sigma_j / (n - 2)` for rows below the square block. Diagonal
/// entries have no rate.
pub fn svd_predicted_rate(i: usize, j: usize, sigma: &DVector<f64>, nu: &DVector<f64>, n: usize, k: usize) -> Option<f64> {
    if i == j || j >= k || i >= n {
        return None;
    }
    if i < k {
        let (lo, _) = eig2(&svd_rate_r1(sigma[i], nu[i], sigma[j], nu[j], n, k));
        Some(lo)
    } else {
        Some(nu[j] * sigma[j] / dim_scale(n))
    }
}

/// Initial frames of the 7x5 singular value experiment, as printed to three
/// decimals; [`svd_experiment`] orthonormalizes them.
pub const SVD_EXPERIMENT_U0: [[f64; 7]; 7] = [
    [-0.210, -0.091, 0.455, 0.668, -0.217, 0.490, 0.085],
    [0.495, 0.365, 0.469, 0.291, 0.183, -0.413, -0.335],
    [0.191, 0.647, 0.058, -0.237, -0.578, 0.154, 0.356],
    [0.288, -0.285, 0.403, -0.539, -0.089, 0.461, -0.404],
    [-0.490, -0.022, 0.633, -0.339, 0.130, -0.340, 0.333],
    [-0.426, 0.598, -0.064, -0.088, 0.438, 0.364, -0.353],
    [-0.412, -0.005, -0.046, 0.017, -0.607, -0.325, -0.595],
];

pub const SVD_EXPERIMENT_V0: [[f64; 5]; 5] = [
    [0.679, 0.524, 0.091, -0.438, 0.253],
    [-0.521, 0.427, 0.406, 0.137, 0.602],
    [0.504, -0.108, 0.315, 0.788, 0.120],
    [-0.032, -0.089, 0.839, -0.255, -0.472],
    [0.113, -0.723, 0.156, -0.322, 0.579],
];

/// Data of the 7x5 experiment.
#[derive(Debug, Clone)]
pub struct SvdExperiment {
    /// `diag_{7x5}(1, 2, 3, 4, 5)`.
    pub k: DMatrix<f64>,
    /// `(5, 4, 3, 2, 1)`.
    pub nu: DVector<f64>,
    pub u0: DMatrix<f64>,
    pub v0: DMatrix<f64>,
}

pub fn svd_experiment() -> Result<SvdExperiment> {
    let u = DMatrix::from_fn(7, 7, |i, j| SVD_EXPERIMENT_U0[i][j]);
    let v = DMatrix::from_fn(5, 5, |i, j| SVD_EXPERIMENT_V0[i][j]);
    Ok(SvdExperiment {
        k: rect_diag(7, &DVector::from_vec(vec![1.0, 2.0, 3.0, 4.0, 5.0])),
        nu: DVector::from_vec(vec![5.0, 4.0, 3.0, 2.0, 1.0]),
        u0: crate::linalg::gram_schmidt(&u)?,
        v0: crate::linalg::gram_schmidt(&v)?,
    })
}

/// `|offdiag(m)|_F` over the leading square block plus all rows below it.
pub fn off_diagonal_norm(m: &DMatrix<f64>) -> f64 {
    let mut s = 0.0;
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            if i != j {
                s += m[(i, j)] * m[(i, j)];
            }
        }
    }
    s.sqrt()
}
