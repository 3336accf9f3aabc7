//! Steepest descent, Newton and conjugate gradient along geodesics.
//!
//! Everything here minimizes; maximization problems are wrapped in
//! [`Negated`](crate::objectives::Negated). `G` always denotes the negative
//! gradient and `H` the search direction.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::bracket;
use crate::manifolds::Manifold;
use crate::objectives::{hess_solve_cg, Objective};

/// Wolfe-Powell constants: Armijo fraction `rho`, curvature fraction `sigma`,
/// bracket expansion `tau1` and sectioning fractions `tau2`, `tau3`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineSearchParams {
    pub rho: f64,
    pub sigma: f64,
    pub tau1: f64,
    pub tau2: f64,
    pub tau3: f64,
    pub max_evals: usize,
}

impl Default for LineSearchParams {
    fn default() -> Self {
        LineSearchParams {
            rho: 0.01,
            sigma: 0.1,
            tau1: 9.0,
            tau2: 0.1,
            tau3: 0.5,
            max_evals: 30,
        }
    }
}

impl LineSearchParams {
    pub fn validate(&self) -> Result<()> {
        let ok = 0.0 < self.rho
            && self.rho < self.sigma
            && self.sigma < 1.0
            && self.tau1 > 1.0
            && 0.0 < self.tau2
            && self.tau2 < self.tau3
            && self.tau3 < 1.0
            && self.max_evals > 0;
        if ok {
            Ok(())
        } else {
            Err(Error::Argument(format!("invalid line search parameters {self:?}")))
        }
    }
}

/// Relative value slack under which the line search switches to the
/// derivative form of the sufficient decrease condition.
pub const ROUNDING_SLACK: f64 = 1e-14;

/// Result of a line search. `satisfied` is false when the evaluation budget
/// ran out; `t` is then the best Armijo point seen, or zero.
#[derive(Debug, Clone)]
pub struct LineSearchOutcome<T> {
    pub t: f64,
    pub value: f64,
    pub slope: f64,
    pub payload: Option<T>,
    pub evals: usize,
    pub satisfied: bool,
}

#[derive(Clone)]
struct Sample<T> {
    t: f64,
    f: f64,
    d: f64,
    payload: T,
}

/// Minimizer of the cubic matching values and slopes at `a` and `b`, or
/// `None` when it does not exist.
fn cubic_min(a: f64, fa: f64, da: f64, b: f64, fb: f64, db: f64) -> Option<f64> {
    let d1 = da + db - 3.0 * (fa - fb) / (a - b);
    let disc = d1 * d1 - da * db;
    if !(disc >= 0.0) {
        return None;
    }
    let d2 = (b - a).signum() * disc.sqrt();
    let denom = db - da + 2.0 * d2;
    if denom == 0.0 {
        return None;
    }
    let t = b - (b - a) * (db + d2 - d1) / denom;
    t.is_finite().then_some(t)
}

fn clamp_into(t: Option<f64>, lo: f64, hi: f64, default: f64) -> f64 {
    let (lo, hi) = if lo <= hi { (lo, hi) } else { (hi, lo) };
    match t {
        Some(t) if t >= lo && t <= hi => t,
        Some(t) => t.clamp(lo, hi),
        None => default,
    }
}

/// Bracketing and sectioning search for a step satisfying
/// `phi(t) <= phi(0) + rho t phi'(0)` and `|phi'(t)| <= -sigma phi'(0)`.
///
/// `phi` returns `(phi(t), phi'(t), payload)`; each call counts as one
/// evaluation.
pub fn wolfe_powell<T: Clone>(
    mut phi: impl FnMut(f64) -> Result<(f64, f64, T)>,
    phi0: f64,
    dphi0: f64,
    t_trial: f64,
    params: &LineSearchParams,
) -> Result<LineSearchOutcome<T>> {
    params.validate()?;
    if !(dphi0 < 0.0) {
        return Err(Error::Argument(format!(
            "line search needs a descent direction, phi'(0) = {dphi0:.3e}"
        )));
    }
    if !(t_trial > 0.0) || !t_trial.is_finite() {
        return Err(Error::Argument(format!("trial step must be positive, got {t_trial}")));
    }
    // Once the predicted decrease is below rounding in phi, Armijo is replaced
    // by its derivative form `phi'(t) <= (2 rho - 1) phi'(0)` within a value
    // slack of a few ulps.
    let slack = ROUNDING_SLACK * phi0.abs();
    let armijo = |t: f64, f: f64| f <= phi0 + params.rho * t * dphi0;
    let approx = |f: f64, d: f64| f <= phi0 + slack && d <= (2.0 * params.rho - 1.0) * dphi0;
    let curvature = |d: f64| d.abs() <= -params.sigma * dphi0;
    let mut evals = 0usize;
    let mut best: Option<Sample<T>> = None;
    let note = |s: &Sample<T>, best: &mut Option<Sample<T>>| {
        if armijo(s.t, s.f) && best.as_ref().map_or(true, |b| s.f < b.f) {
            *best = Some(s.clone());
        }
    };
    let done = |s: Sample<T>, evals: usize| LineSearchOutcome {
        t: s.t,
        value: s.f,
        slope: s.d,
        payload: Some(s.payload),
        evals,
        satisfied: true,
    };

    // Bracketing.
    let mut prev_t = 0.0;
    let mut prev_f = phi0;
    let mut prev_d = dphi0;
    let mut prev_payload: Option<T> = None;
    let mut t = t_trial;
    let (mut lo, mut hi): (Sample<Option<T>>, Sample<Option<T>>);
    loop {
        if evals >= params.max_evals {
            return Ok(exhausted(best, evals));
        }
        let (f, d, pl) = phi(t)?;
        evals += 1;
        let s = Sample { t, f, d, payload: pl };
        note(&s, &mut best);
        if curvature(d) && approx(f, d) {
            return Ok(done(s, evals));
        }
        if !f.is_finite() || !armijo(t, f) || (evals > 1 && f >= prev_f) {
            lo = Sample { t: prev_t, f: prev_f, d: prev_d, payload: prev_payload };
            hi = Sample { t, f, d, payload: Some(s.payload) };
            break;
        }
        if curvature(d) {
            return Ok(done(s, evals));
        }
        if d >= 0.0 {
            lo = Sample { t, f, d, payload: Some(s.payload) };
            hi = Sample { t: prev_t, f: prev_f, d: prev_d, payload: prev_payload };
            break;
        }
        let lo_ext = 2.0 * t - prev_t;
        let hi_ext = t + params.tau1 * (t - prev_t);
        let next = clamp_into(cubic_min(prev_t, prev_f, prev_d, t, f, d), lo_ext, hi_ext, hi_ext);
        prev_t = t;
        prev_f = f;
        prev_d = d;
        prev_payload = Some(s.payload);
        t = next;
    }

    // Sectioning: `lo` satisfies Armijo with the lower value, and the
    // interval between `lo` and `hi` contains acceptable points.
    loop {
        if evals >= params.max_evals {
            return Ok(exhausted(best, evals));
        }
        let width = hi.t - lo.t;
        if width.abs() <= 1e-16 * lo.t.abs().max(1e-300) {
            return Ok(exhausted(best, evals));
        }
        let a = lo.t + params.tau2 * width;
        let b = hi.t - params.tau3 * width;
        let guess = if hi.f.is_finite() {
            cubic_min(lo.t, lo.f, lo.d, hi.t, hi.f, hi.d)
        } else {
            None
        };
        let t = clamp_into(guess, a, b, 0.5 * (a + b));
        let (f, d, pl) = phi(t)?;
        evals += 1;
        let s = Sample { t, f, d, payload: pl };
        note(&s, &mut best);
        if curvature(d) && approx(f, d) {
            return Ok(done(s, evals));
        }
        if !f.is_finite() || !armijo(t, f) || f >= lo.f {
            hi = Sample { t, f, d, payload: Some(s.payload) };
            continue;
        }
        if curvature(d) {
            return Ok(done(s, evals));
        }
        if (hi.t - lo.t) * d >= 0.0 {
            hi = lo;
        }
        lo = Sample { t, f, d, payload: Some(s.payload) };
    }
}

fn exhausted<T>(best: Option<Sample<T>>, evals: usize) -> LineSearchOutcome<T> {
    match best {
        Some(s) => LineSearchOutcome {
            t: s.t,
            value: s.f,
            slope: s.d,
            payload: Some(s.payload),
            evals,
            satisfied: false,
        },
        None => LineSearchOutcome {
            t: 0.0,
            value: f64::NAN,
            slope: f64::NAN,
            payload: None,
            evals,
            satisfied: false,
        },
    }
}

/// Trial step `<G, H> / hess(H, H)`, the minimizer of the second-order model
/// of `t -> f(exp_p t H)`; `None` when the model has no minimizer.
pub fn newton_trial_step(g_dot_h: f64, hess_hh: f64, scale: f64) -> Option<f64> {
    if hess_hh > 1e-14 * scale && g_dot_h > 0.0 {
        let t = g_dot_h / hess_hh;
        t.is_finite().then_some(t)
    } else {
        None
    }
}

/// Step bound `2 tr H Omega N / (|[Omega, H]| |[Omega, N]|)` on which
/// `t -> tr Ad_{exp(-Omega t)}(H) N` is non-decreasing.
pub fn brockett_step(h: &DMatrix<f64>, omega: &DMatrix<f64>, n: &DMatrix<f64>) -> Result<f64> {
    let slope = 2.0 * (h * omega * n).trace();
    let scale = h.norm() * omega.norm() * n.norm();
    if !(slope > 1e-14 * scale) {
        return Err(Error::NotAscent(slope));
    }
    let denom = bracket(omega, h).norm() * bracket(omega, n).norm();
    if denom == 0.0 {
        return Err(Error::Singular("commutators vanish".into()));
    }
    Ok(slope / denom)
}

/// Outcome of the closed-form Rayleigh step on the sphere.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExactStep {
    Step { c: f64, s: f64 },
    /// `rho` is constant on the circle.
    Flat,
}

/// `(c, s)` maximizing `rho(x c + h s)` over the great circle through `x`
/// with unit tangent `h`, from `a = 2 x^T Q h`, `b = x^T Q x - h^T Q h`.
pub fn sphere_rayleigh_exact_step(xqx: f64, hqh: f64, xqh: f64) -> ExactStep {
    let a = 2.0 * xqh;
    let b = xqx - hqh;
    let r = a.hypot(b);
    if r == 0.0 {
        return ExactStep::Flat;
    }
    // rho(theta) = (xqx + hqh)/2 + (b cos 2 theta + a sin 2 theta)/2.
    let (c, s) = if b >= 0.0 {
        let c = ((1.0 + b / r) / 2.0).sqrt();
        (c, a / (2.0 * r * c))
    } else {
        let s = ((1.0 - b / r) / 2.0).sqrt() * if a < 0.0 { -1.0 } else { 1.0 };
        (a / (2.0 * r * s), s)
    };
    ExactStep::Step { c, s }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StoppingCriteria {
    /// Stop once `|grad f| <= grad_tol`.
    pub grad_tol: f64,
    pub max_iters: usize,
    /// Stop once `|f_{i+1} - f_i| <= f_tol (1 + |f_i|)`; zero disables.
    pub f_tol: f64,
}

impl Default for StoppingCriteria {
    fn default() -> Self {
        StoppingCriteria {
            grad_tol: 1e-10,
            max_iters: 500,
            f_tol: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Converged,
    MaxIters,
    ValueStalled,
    LineSearchFailed,
    /// Newton fell back to a gradient step because the Hessian was not definite.
    NewtonFallback,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterRecord {
    pub iter: usize,
    pub value: f64,
    pub grad_norm: f64,
    /// Geodesic parameter of the step that produced this iterate.
    pub step: f64,
    pub evals: usize,
    pub reset: bool,
}

/// Iterates and per-iteration records of a run.
#[derive(Debug, Clone)]
pub struct Trace<P> {
    pub records: Vec<IterRecord>,
    pub points: Vec<P>,
    pub status: Status,
}

impl<P> Trace<P> {
    pub fn last_point(&self) -> &P {
        self.points.last().expect("trace holds the initial point")
    }

    pub fn values(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.value).collect()
    }
}

/// Convergence order fitted by least squares to `log d_{i+1}` against
/// `log d_i` over consecutive pairs with both distances in `[lo, hi]`.
pub fn convergence_order(d: &[f64], lo: f64, hi: f64) -> Option<(f64, usize)> {
    let pairs: Vec<(f64, f64)> = d
        .windows(2)
        .filter(|w| w[0] >= lo && w[0] <= hi && w[1] >= lo && w[1] <= hi)
        .map(|w| (w[0].ln(), w[1].ln()))
        .collect();
    if pairs.len() < 2 {
        return None;
    }
    Some((slope(&pairs), pairs.len()))
}

/// Least-squares slope of `y` against `x`.
pub fn slope(xy: &[(f64, f64)]) -> f64 {
    let n = xy.len() as f64;
    let mx = xy.iter().map(|p| p.0).sum::<f64>() / n;
    let my = xy.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = xy.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = xy.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    sxy / sxx
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GammaMode {
    /// `gamma = <G+ - tau G, G+> / <G, H>`; needs closed-form transport.
    TransportedGradient,
    /// `gamma = -hess(tau H, G+) / hess(tau H, tau H)`.
    HessianConjugacy,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgOptions {
    pub line_search: LineSearchParams,
    pub gamma: GammaMode,
    /// Steps between resets; `None` uses the manifold dimension.
    pub reset_period: Option<usize>,
}

impl Default for CgOptions {
    fn default() -> Self {
        CgOptions {
            line_search: LineSearchParams::default(),
            gamma: GammaMode::HessianConjugacy,
            reset_period: None,
        }
    }
}

/// Summary of one conjugate gradient step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgStepReport {
    pub t: f64,
    pub gamma: f64,
    pub reset: bool,
    pub evals: usize,
    pub line_search_ok: bool,
}

/// State of the conjugate gradient iteration between steps.
///
/// `g` is the negative gradient at `point` for the objective last passed to
/// [`CgState::new`] or [`CgState::refresh`]. The previous direction is kept
/// as its translate to `point`.
#[derive(Debug, Clone)]
pub struct CgState<M: Manifold> {
    pub point: M::Point,
    pub value: f64,
    pub g: M::Tangent,
    pub iter: usize,
    pub steps_since_reset: usize,
    prev_h: Option<M::Tangent>,
    prev_g: Option<M::Tangent>,
    prev_gh: f64,
    reset_pending: bool,
}

impl<M: Manifold> CgState<M> {
    pub fn new<O: Objective<M> + ?Sized>(obj: &O, m: &M, point: M::Point) -> Result<Self> {
        let (value, grad) = obj.value_grad(&point)?;
        Ok(CgState {
            g: m.scale(-1.0, &grad),
            point,
            value,
            iter: 0,
            steps_since_reset: 0,
            prev_h: None,
            prev_g: None,
            prev_gh: 0.0,
            reset_pending: true,
        })
    }

    /// Re-evaluates value and gradient after the objective changed.
    pub fn refresh<O: Objective<M> + ?Sized>(&mut self, obj: &O, m: &M) -> Result<()> {
        let (value, grad) = obj.value_grad(&self.point)?;
        self.value = value;
        self.g = m.scale(-1.0, &grad);
        Ok(())
    }

    /// Makes the next direction the negative gradient.
    pub fn force_reset(&mut self) {
        self.reset_pending = true;
    }

    pub fn grad_norm(&self, m: &M) -> f64 {
        m.norm(&self.point, &self.g)
    }

    /// Chooses the direction, searches along it and moves to the new point.
    pub fn step<O: Objective<M> + ?Sized>(
        &mut self,
        obj: &O,
        m: &M,
        opts: &CgOptions,
    ) -> Result<CgStepReport> {
        let period = opts.reset_period.unwrap_or_else(|| m.dim()).max(1);
        let p = &self.point;
        if opts.gamma == GammaMode::TransportedGradient
            && m.transport(p, &self.g, 0.0, &self.g).is_none()
        {
            return Err(Error::Argument(
                "transported-gradient mode needs closed-form transport; use hessian conjugacy".into(),
            ));
        }
        if opts.gamma == GammaMode::TransportedGradient && self.prev_g.is_none() {
            self.reset_pending = true;
        }
        let gg = m.inner(p, &self.g, &self.g);
        let scale = gg.max(1e-300) * (1.0 + self.value.abs());
        let mut reset = self.reset_pending || self.prev_h.is_none() || self.steps_since_reset >= period;
        let mut gamma = 0.0;
        // hess(G, G) and hess(H, H) when the conjugacy step produced them.
        let mut hess_gg: Option<f64> = None;
        let mut hess_hh: Option<f64> = None;
        let mut h = self.g.clone();

        if !reset {
            let th = self.prev_h.as_ref().expect("checked above");
            match opts.gamma {
                GammaMode::HessianConjugacy => {
                    let [xx, xy, yy] = obj.hess_triple(p, th, &self.g)?;
                    let thn = m.inner(p, th, th);
                    hess_gg = Some(yy);
                    if xx.abs() <= 1e-14 * thn * (1.0 + self.value.abs()) || !xx.is_finite() {
                        reset = true;
                    } else {
                        gamma = -xy / xx;
                        hess_hh = Some(yy + 2.0 * gamma * xy + gamma * gamma * xx);
                    }
                }
                GammaMode::TransportedGradient => {
                    let tg = self.prev_g.as_ref().expect("kept in this mode");
                    if self.prev_gh.abs() <= 1e-14 * scale {
                        reset = true;
                    } else {
                        let diff = m.lincomb(1.0, &self.g, -1.0, tg);
                        gamma = m.inner(p, &diff, &self.g) / self.prev_gh;
                    }
                }
            }
            if !reset {
                h = m.lincomb(1.0, &self.g, gamma, th);
                if !(m.inner(p, &self.g, &h) > 0.0) {
                    reset = true;
                }
            }
        }
        if reset {
            gamma = 0.0;
            h = self.g.clone();
            hess_hh = hess_gg;
        }

        let gh = m.inner(p, &self.g, &h);
        let hh = match hess_hh {
            Some(v) => v,
            None => obj.hess(p, &h, &h)?,
        };
        let hn = m.norm(p, &h);
        let t0 = newton_trial_step(gh, hh, m.inner(p, &h, &h) * (1.0 + self.value.abs()))
            .unwrap_or(1.0 / hn);

        let start = self.point.clone();
        let phi = |t: f64| -> Result<(f64, f64, (M::Point, M::Tangent, M::Tangent))> {
            let (q, th) = m.exp_transport(&start, &h, t)?;
            let (f, grad) = obj.value_grad(&q)?;
            let d = m.inner(&q, &grad, &th);
            Ok((f, d, (q, grad, th)))
        };
        let out = wolfe_powell(phi, self.value, -gh, t0, &opts.line_search)?;
        let Some((q, grad, th)) = out.payload else {
            // No decrease found: stay, and restart from the gradient.
            self.reset_pending = true;
            self.iter += 1;
            return Ok(CgStepReport {
                t: 0.0,
                gamma,
                reset,
                evals: out.evals,
                line_search_ok: false,
            });
        };
        if opts.gamma == GammaMode::TransportedGradient {
            let tg = m
                .transport(&start, &h, out.t, &self.g)
                .expect("checked above")?;
            self.prev_g = Some(tg);
            self.prev_gh = gh;
        }
        self.point = q;
        self.value = out.value;
        self.g = m.scale(-1.0, &grad);
        self.prev_h = Some(th);
        self.steps_since_reset = if reset { 1 } else { self.steps_since_reset + 1 };
        self.reset_pending = !out.satisfied;
        self.iter += 1;
        Ok(CgStepReport {
            t: out.t,
            gamma,
            reset,
            evals: out.evals,
            line_search_ok: out.satisfied,
        })
    }
}

fn stop_check(stop: &StoppingCriteria, gnorm: f64, prev_f: Option<f64>, f: f64) -> Option<Status> {
    if gnorm <= stop.grad_tol {
        return Some(Status::Converged);
    }
    if let Some(pf) = prev_f {
        if stop.f_tol > 0.0 && (f - pf).abs() <= stop.f_tol * (1.0 + pf.abs()) {
            return Some(Status::ValueStalled);
        }
    }
    None
}

/// Conjugate gradient with Wolfe-Powell line searches.
pub fn conjugate_gradient<M: Manifold, O: Objective<M> + ?Sized>(
    m: &M,
    obj: &O,
    p0: M::Point,
    opts: &CgOptions,
    stop: &StoppingCriteria,
) -> Result<Trace<M::Point>> {
    let mut st = CgState::new(obj, m, p0)?;
    let mut trace = Trace {
        records: vec![IterRecord {
            iter: 0,
            value: st.value,
            grad_norm: st.grad_norm(m),
            step: 0.0,
            evals: 0,
            reset: false,
        }],
        points: vec![st.point.clone()],
        status: Status::MaxIters,
    };
    let mut prev_f = None;
    let mut failures = 0;
    for _ in 0..stop.max_iters {
        if let Some(s) = stop_check(stop, st.grad_norm(m), prev_f, st.value) {
            trace.status = s;
            return Ok(trace);
        }
        prev_f = Some(st.value);
        let rep = st.step(obj, m, opts)?;
        if rep.line_search_ok {
            failures = 0;
        } else {
            failures += 1;
            if failures >= 2 {
                trace.status = Status::LineSearchFailed;
                return Ok(trace);
            }
        }
        trace.records.push(IterRecord {
            iter: st.iter,
            value: st.value,
            grad_norm: st.grad_norm(m),
            step: rep.t,
            evals: rep.evals,
            reset: rep.reset,
        });
        trace.points.push(st.point.clone());
    }
    if stop_check(stop, st.grad_norm(m), None, st.value).is_some() {
        trace.status = Status::Converged;
    }
    Ok(trace)
}

/// Step size rule for steepest descent.
pub enum SdStep<'a, M: Manifold> {
    WolfePowell(LineSearchParams),
    /// Caller-supplied step `t(p, G)` along the negative gradient.
    Rule(&'a dyn Fn(&M::Point, &M::Tangent) -> Result<f64>),
}

/// Steepest descent `p_{i+1} = exp_{p_i}(t_i G_i)`.
pub fn steepest_descent<M: Manifold, O: Objective<M> + ?Sized>(
    m: &M,
    obj: &O,
    p0: M::Point,
    rule: &SdStep<'_, M>,
    stop: &StoppingCriteria,
) -> Result<Trace<M::Point>> {
    let mut p = p0;
    let (mut f, grad) = obj.value_grad(&p)?;
    let mut g = m.scale(-1.0, &grad);
    let mut trace = Trace {
        records: vec![IterRecord {
            iter: 0,
            value: f,
            grad_norm: m.norm(&p, &g),
            step: 0.0,
            evals: 0,
            reset: true,
        }],
        points: vec![p.clone()],
        status: Status::MaxIters,
    };
    let mut prev_f = None;
    for it in 1..=stop.max_iters {
        if let Some(s) = stop_check(stop, m.norm(&p, &g), prev_f, f) {
            trace.status = s;
            return Ok(trace);
        }
        prev_f = Some(f);
        let (t, evals) = match rule {
            SdStep::Rule(r) => {
                let t = r(&p, &g)?;
                let q = m.exp(&p, &g, t)?;
                let (fq, gq) = obj.value_grad(&q)?;
                p = q;
                f = fq;
                g = m.scale(-1.0, &gq);
                (t, 1)
            }
            SdStep::WolfePowell(params) => {
                let gg = m.inner(&p, &g, &g);
                let hh = obj.hess(&p, &g, &g)?;
                let t0 = newton_trial_step(gg, hh, gg * (1.0 + f.abs()))
                    .unwrap_or(1.0 / gg.sqrt());
                let start = p.clone();
                let dir = g.clone();
                let phi = |t: f64| -> Result<(f64, f64, (M::Point, M::Tangent))> {
                    let (q, th) = m.exp_transport(&start, &dir, t)?;
                    let (fq, gq) = obj.value_grad(&q)?;
                    Ok((fq, m.inner(&q, &gq, &th), (q, gq)))
                };
                let out = wolfe_powell(phi, f, -gg, t0, params)?;
                let Some((q, gq)) = out.payload else {
                    trace.status = Status::LineSearchFailed;
                    return Ok(trace);
                };
                p = q;
                f = out.value;
                g = m.scale(-1.0, &gq);
                (out.t, out.evals)
            }
        };
        trace.records.push(IterRecord {
            iter: it,
            value: f,
            grad_norm: m.norm(&p, &g),
            step: t,
            evals,
            reset: true,
        });
        trace.points.push(p.clone());
    }
    if m.norm(&p, &g) <= stop.grad_tol {
        trace.status = Status::Converged;
    }
    Ok(trace)
}

/// Newton's method `p_{i+1} = exp_{p_i} H_i`, `H_i = -(nabla^2 f)^{-1} grad f`.
///
/// Uses the objective's own Newton direction when it has one, else inner CG on
/// its Hessian operator. When the Hessian is not definite the iteration takes
/// a Wolfe-Powell gradient step instead and reports [`Status::NewtonFallback`]
/// unless it later converges.
pub fn newton<M: Manifold, O: Objective<M> + ?Sized>(
    m: &M,
    obj: &O,
    p0: M::Point,
    stop: &StoppingCriteria,
) -> Result<Trace<M::Point>> {
    let mut p = p0;
    let (mut f, grad) = obj.value_grad(&p)?;
    let mut g = m.scale(-1.0, &grad);
    let mut trace = Trace {
        records: vec![IterRecord {
            iter: 0,
            value: f,
            grad_norm: m.norm(&p, &g),
            step: 0.0,
            evals: 0,
            reset: false,
        }],
        points: vec![p.clone()],
        status: Status::MaxIters,
    };
    let mut fell_back = false;
    let mut prev_f = None;
    for it in 1..=stop.max_iters {
        if let Some(s) = stop_check(stop, m.norm(&p, &g), prev_f, f) {
            trace.status = if fell_back && s != Status::Converged {
                Status::NewtonFallback
            } else {
                s
            };
            return Ok(trace);
        }
        prev_f = Some(f);
        let dir = match obj.newton_direction(&p) {
            Some(r) => r,
            None => {
                let iters = 2 * m.dim() + 20;
                hess_solve_cg(m, obj, &p, &g, 1e-13, iters)
            }
        };
        let (q, step) = match dir {
            Ok(h) => (m.exp(&p, &h, 1.0)?, m.norm(&p, &h)),
            Err(Error::Indefinite) | Err(Error::Singular(_)) => {
                fell_back = true;
                let sd = steepest_descent(
                    m,
                    obj,
                    p.clone(),
                    &SdStep::WolfePowell(LineSearchParams::default()),
                    &StoppingCriteria {
                        grad_tol: stop.grad_tol,
                        max_iters: 1,
                        f_tol: 0.0,
                    },
                )?;
                let r = sd.records.last().expect("initial record").step;
                (sd.last_point().clone(), r)
            }
            Err(e) => return Err(e),
        };
        let (fq, gq) = obj.value_grad(&q)?;
        p = q;
        f = fq;
        g = m.scale(-1.0, &gq);
        trace.records.push(IterRecord {
            iter: it,
            value: f,
            grad_norm: m.norm(&p, &g),
            step,
            evals: 1,
            reset: false,
        });
        trace.points.push(p.clone());
    }
    if m.norm(&p, &g) <= stop.grad_tol {
        trace.status = Status::Converged;
    } else if fell_back {
        trace.status = Status::NewtonFallback;
    }
    Ok(trace)
}

/// Diagonal matrix with the given entries; convenience for callers.
pub fn diag(v: &[f64]) -> DMatrix<f64> {
    DMatrix::from_diagonal(&DVector::from_column_slice(v))
}
