//! Subspace tracking: covariance estimators, step-change scenarios and a
//! tracker that takes one conjugate gradient step per sample.

use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector};

use crate::eigensolvers::{genray_optimum, resort_weights, similarly_ordered};
use crate::error::{Error, Result};
use crate::linalg::{check_finite, check_symmetric, orthonormality_error, sym_eig_oracle, sym_eigenvalues};
use crate::manifolds::{Manifold, Stiefel, StiefelPoint};
use crate::objectives::{AOp, GenRayleigh, Negated};
use crate::optimizers::{CgOptions, CgState};
use crate::rng::{random_frame, seeded, Rng};

/// How a [`CovarianceEstimator`] weighs past samples.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EstimatorMode {
    /// Mean of `x x^T` over the last `l` samples; fewer samples are averaged
    /// by their actual count until the window fills.
    Window(usize),
    /// `P = R + x x^T`, `R <- P / |P|_F`.
    FadingNormalized,
    /// `R <- alpha R + beta x x^T`.
    FadingWeighted { alpha: f64, beta: f64 },
}

/// Running estimate `R` of a covariance matrix.
#[derive(Debug, Clone)]
pub struct CovarianceEstimator {
    mode: EstimatorMode,
    n: usize,
    r: DMatrix<f64>,
    /// Window mode: unnormalized sum of the outer products held in `buf`.
    sum: DMatrix<f64>,
    buf: VecDeque<DVector<f64>>,
}

impl CovarianceEstimator {
    pub fn new(mode: EstimatorMode, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::Dimension("estimator dimension must be positive".into()));
        }
        if let EstimatorMode::Window(0) = mode {
            return Err(Error::Argument("window length must be positive".into()));
        }
        Ok(CovarianceEstimator {
            mode,
            n,
            r: DMatrix::zeros(n, n),
            sum: DMatrix::zeros(n, n),
            buf: VecDeque::new(),
        })
    }

    /// Fading estimators starting from a given symmetric `R0`.
    pub fn with_initial(mode: EstimatorMode, r0: DMatrix<f64>) -> Result<Self> {
        check_finite(&r0, "R0")?;
        check_symmetric(&r0)?;
        let mut e = Self::new(mode, r0.nrows())?;
        e.r = r0;
        Ok(e)
    }

    pub fn mode(&self) -> EstimatorMode {
        self.mode
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn estimate(&self) -> &DMatrix<f64> {
        &self.r
    }

    /// Number of samples currently averaged (window mode).
    pub fn count(&self) -> usize {
        self.buf.len()
    }

    fn check(&self, x: &DVector<f64>) -> Result<()> {
        if x.len() != self.n {
            return Err(Error::Dimension(format!("sample has {} entries, estimator expects {}", x.len(), self.n)));
        }
        if !x.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("sample"));
        }
        Ok(())
    }

    /// Adds a sample according to the estimator's mode.
    pub fn update(&mut self, x: &DVector<f64>) -> Result<()> {
        match self.mode {
            EstimatorMode::Window(_) => self.window_update(x),
            EstimatorMode::FadingNormalized => self.fading_update(x),
            EstimatorMode::FadingWeighted { alpha, beta } => self.weighted_update(x, alpha, beta),
        }
    }

    /// Window mode: adds `x` and drops the oldest sample once `l` are held.
    pub fn window_update(&mut self, x: &DVector<f64>) -> Result<()> {
        self.check(x)?;
        let EstimatorMode::Window(l) = self.mode else {
            return Err(Error::Argument("window update on a fading estimator".into()));
        };
        self.sum.ger(1.0, x, x, 1.0);
        self.buf.push_back(x.clone());
        if self.buf.len() > l {
            let old = self.buf.pop_front().expect("non-empty");
            self.sum.ger(-1.0, &old, &old, 1.0);
        }
        self.r = &self.sum / self.buf.len() as f64;
        Ok(())
    }

    /// `P = R + x x^T`, `R = P / |P|_F`.
    pub fn fading_update(&mut self, x: &DVector<f64>) -> Result<()> {
        self.check(x)?;
        let mut p = self.r.clone();
        p.ger(1.0, x, x, 1.0);
        let nrm = p.norm();
        if nrm == 0.0 {
            return Err(Error::Singular("fading estimate of an all-zero history".into()));
        }
        self.r = p / nrm;
        Ok(())
    }

    /// `R = alpha R + beta x x^T`.
    pub fn weighted_update(&mut self, x: &DVector<f64>, alpha: f64, beta: f64) -> Result<()> {
        self.check(x)?;
        if !(alpha.is_finite() && beta.is_finite()) {
            return Err(Error::NonFinite("fading weights"));
        }
        self.r *= alpha;
        self.r.ger(beta, x, x, 1.0);
        Ok(())
    }

    /// Window mode: the scaled data matrix `X / sqrt(count)` with
    /// `R = X X^T`, so the tracker can avoid forming `R`.
    pub fn data_factor(&self) -> Option<DMatrix<f64>> {
        if !matches!(self.mode, EstimatorMode::Window(_)) || self.buf.is_empty() {
            return None;
        }
        let c = self.buf.len();
        let s = 1.0 / (c as f64).sqrt();
        Some(DMatrix::from_fn(self.n, c, |i, j| self.buf[j][i] * s))
    }

    /// Operator for the tracker: the data factor in window mode, else `R`.
    pub fn operator(&self) -> Result<AOp> {
        match self.data_factor() {
            Some(x) => AOp::factor(x),
            None => AOp::dense(self.r.clone()),
        }
    }
}

/// Time-varying symmetric matrix with one step change.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    /// Samples `i = 0 .. len - 1`.
    pub len: usize,
    /// `A_i` is `before` for `i <= step_at` and `after` afterwards.
    pub step_at: usize,
    pub before: DMatrix<f64>,
    pub after: DMatrix<f64>,
    /// Spectra of the two phases (descending), from the Jacobi oracle.
    pub spectrum_before: DVector<f64>,
    pub spectrum_after: DVector<f64>,
}

impl Scenario {
    pub fn new(name: &str, len: usize, step_at: usize, before: DMatrix<f64>, after: DMatrix<f64>) -> Result<Self> {
        for m in [&before, &after] {
            check_finite(m, "scenario matrix")?;
            check_symmetric(m)?;
        }
        if before.shape() != after.shape() || !before.is_square() {
            return Err(Error::Dimension("scenario phases must be square and of equal size".into()));
        }
        if len == 0 {
            return Err(Error::Argument("scenario needs at least one sample".into()));
        }
        let spectrum_before = sym_eig_oracle(&before)?.0;
        let spectrum_after = if after == before {
            spectrum_before.clone()
        } else {
            sym_eig_oracle(&after)?.0
        };
        Ok(Scenario {
            name: name.to_string(),
            len,
            step_at,
            before,
            after,
            spectrum_before,
            spectrum_after,
        })
    }

    /// A constant matrix.
    pub fn stationary(a: DMatrix<f64>, len: usize) -> Result<Self> {
        Self::new("stationary", len, len, a.clone(), a)
    }

    pub fn n(&self) -> usize {
        self.before.nrows()
    }

    pub fn phase(&self, i: usize) -> usize {
        usize::from(i > self.step_at)
    }

    pub fn matrix(&self, i: usize) -> &DMatrix<f64> {
        if self.phase(i) == 0 {
            &self.before
        } else {
            &self.after
        }
    }

    pub fn spectrum(&self, i: usize) -> &DVector<f64> {
        if self.phase(i) == 0 {
            &self.spectrum_before
        } else {
            &self.spectrum_after
        }
    }

    /// `rho(p_hat_i)` for weights `nu`.
    pub fn optimum(&self, i: usize, nu: &DVector<f64>) -> f64 {
        genray_optimum(self.spectrum(i).as_slice(), nu)
    }
}

/// Samples of the three scenarios: `i = 0 ..= 80`, step after `i = 40`.
pub const SCENARIO_LEN: usize = 81;
pub const SCENARIO_STEP: usize = 40;

fn ramp_diag(n: usize) -> DVector<f64> {
    DVector::from_fn(n, |i, _| (n - i) as f64)
}

/// Rotation by `deg` degrees in the `(i, j)` coordinate plane (zero-based):
/// `[[c, s], [-s, c]]` on rows/columns `i, j`.
pub fn plane_rotation(n: usize, i: usize, j: usize, deg: f64) -> DMatrix<f64> {
    let (s, c) = deg.to_radians().sin_cos();
    let mut r = DMatrix::identity(n, n);
    r[(i, i)] = c;
    r[(i, j)] = s;
    r[(j, i)] = -s;
    r[(j, j)] = c;
    r
}

fn conj(theta: &DMatrix<f64>, d: &DVector<f64>) -> DMatrix<f64> {
    let a = theta * DMatrix::from_diagonal(d) * theta.transpose();
    crate::linalg::sym_part(&a)
}

/// `diag(n, ..., 1)`, then the same matrix with its top eigenvector pair
/// rotated by 135 degrees in the `(e1, e2)` plane.
pub fn scenario_first(n: usize) -> Result<Scenario> {
    if n < 3 {
        return Err(Error::Dimension("first scenario needs n >= 3".into()));
    }
    let d = ramp_diag(n);
    let before = DMatrix::from_diagonal(&d);
    let after = conj(&plane_rotation(n, 0, 1, 135.0), &d);
    Scenario::new("first", SCENARIO_LEN, SCENARIO_STEP, before, after)
}

/// `diag(n, ..., 1)`, then `Theta2 diag(n, n-1, n-2, n+1, n+2, n+3, n-6, ..., 1) Theta2^T`
/// with `Theta2 = R14(135) R25(135) R36(135)`.
pub fn scenario_second(n: usize) -> Result<Scenario> {
    if n < 7 {
        return Err(Error::Dimension("second scenario needs n >= 7".into()));
    }
    let before = DMatrix::from_diagonal(&ramp_diag(n));
    let mut d = ramp_diag(n);
    let top = n as f64;
    d[3] = top + 1.0;
    d[4] = top + 2.0;
    d[5] = top + 3.0;
    let theta = plane_rotation(n, 0, 3, 135.0) * plane_rotation(n, 1, 4, 135.0) * plane_rotation(n, 2, 5, 135.0);
    Scenario::new("second", SCENARIO_LEN, SCENARIO_STEP, before, conj(&theta, &d))
}

/// `diag(n, ..., 1)`, then the top three eigenvalues moved to `e4, e5, e6`:
/// `diag(n-3, n-4, n-5, n, n-1, n-2, n-6, ..., 1)`. The old optimum becomes a saddle.
pub fn scenario_third(n: usize) -> Result<Scenario> {
    if n < 7 {
        return Err(Error::Dimension("third scenario needs n >= 7".into()));
    }
    let before = DMatrix::from_diagonal(&ramp_diag(n));
    let mut d = ramp_diag(n);
    for j in 0..3 {
        d.swap_rows(j, j + 3);
    }
    Scenario::new("third", SCENARIO_LEN, SCENARIO_STEP, before, DMatrix::from_diagonal(&d))
}

pub fn scenario_by_name(name: &str, n: usize) -> Result<Scenario> {
    match name {
        "first" => scenario_first(n),
        "second" => scenario_second(n),
        "third" => scenario_third(n),
        other => Err(Error::Argument(format!("unknown scenario '{other}' (first, second, third)"))),
    }
}

/// Default relative jump in `rho` that triggers a reset when enabled.
pub const DEFAULT_JUMP_THRESHOLD: f64 = 0.1;
/// Size of the symmetry-breaking perturbation of a vanishing gradient.
pub const JITTER_SIZE: f64 = 1e-13;
/// Gradient norm below which the jitter is applied.
pub const JITTER_GRAD: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct TrackerConfig {
    pub nu: DVector<f64>,
    pub steps_per_sample: usize,
    /// Restart CG from the gradient at the first sample after the step.
    pub reset_on_step: bool,
    /// Restart CG when `|rho_i - rho_{i-1}| > threshold |rho_{i-1}|`.
    pub reset_on_jump: Option<f64>,
    /// Seed for the saddle-escape jitter; `None` disables it.
    pub jitter_seed: Option<u64>,
    /// Re-sort `N` when the diagonal estimates fall out of order.
    pub sort: bool,
    pub cg: CgOptions,
}

impl TrackerConfig {
    pub fn new(nu: DVector<f64>) -> Self {
        TrackerConfig {
            nu,
            steps_per_sample: 1,
            reset_on_step: false,
            reset_on_jump: None,
            jitter_seed: None,
            sort: true,
            cg: CgOptions::default(),
        }
    }
}

/// State at sample `i`, before the step(s) taken against `A_i`.
#[derive(Debug, Clone)]
pub struct TrackRecord {
    pub i: usize,
    pub rho: f64,
    pub rho_hat: f64,
    /// `|rho(p_i) - rho(p_hat_i)|`.
    pub gap: f64,
    /// Diagonal of `p_i^T A_i p_i`, in the frame's column order.
    pub estimates: DVector<f64>,
    pub grad_norm: f64,
    pub orthonormality: f64,
    pub resorted: bool,
    /// The step(s) at this sample started from the gradient.
    pub reset: bool,
    pub jittered: bool,
}

impl TrackRecord {
    /// Estimates sorted descending.
    pub fn sorted_estimates(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self.estimates.iter().copied().collect();
        v.sort_by(|a, b| b.total_cmp(a));
        v
    }
}

#[derive(Debug, Clone)]
pub struct TrackResult {
    pub records: Vec<TrackRecord>,
    pub frame: DMatrix<f64>,
    /// Weights as re-sorted by the tracker at the end of the run.
    pub weights: DVector<f64>,
}

impl TrackResult {
    /// CSV rows `i, rho_gap, lambda_est_1..k, resorted, reset`.
    pub fn csv(&self) -> String {
        let k = self.weights.len();
        let mut out = String::from("i,rho_gap");
        for j in 1..=k {
            out.push_str(&format!(",lambda_est_{j}"));
        }
        out.push_str(",resorted,reset\n");
        for r in &self.records {
            out.push_str(&format!("{},{:.6e}", r.i, r.gap));
            for v in r.estimates.iter() {
                out.push_str(&format!(",{v:.12e}"));
            }
            out.push_str(&format!(",{},{}\n", u8::from(r.resorted), u8::from(r.reset)));
        }
        out
    }

    /// First sample index `>= from` whose sorted estimates are all within
    /// `tol` of `target` (descending).
    pub fn first_within(&self, from: usize, target: &[f64], tol: f64) -> Option<usize> {
        self.records.iter().filter(|r| r.i >= from).find_map(|r| {
            let est = r.sorted_estimates();
            let ok = est.len() == target.len() && est.iter().zip(target).all(|(e, t)| (e - t).abs() <= tol);
            ok.then_some(r.i)
        })
    }

    pub fn gap_at(&self, i: usize) -> Option<f64> {
        self.records.iter().find(|r| r.i == i).map(|r| r.gap)
    }
}

/// One sample-driven CG tracker over `V(n, k)`.
pub struct Tracker {
    cfg: TrackerConfig,
    m: Stiefel,
    obj: Negated<Stiefel, GenRayleigh>,
    st: CgState<Stiefel>,
    prev_rho: Option<f64>,
    rng: Option<Rng>,
}

impl Tracker {
    pub fn new(a: AOp, cfg: TrackerConfig, p0: DMatrix<f64>) -> Result<Self> {
        let n = a.dim();
        let k = cfg.nu.len();
        if k == 0 || k > n {
            return Err(Error::Dimension(format!("cannot track {k} eigenpairs of an {n}x{n} matrix")));
        }
        if p0.nrows() != n || p0.ncols() != k {
            return Err(Error::Dimension(format!("start frame is {}x{}, expected {n}x{k}", p0.nrows(), p0.ncols())));
        }
        if cfg.steps_per_sample == 0 {
            return Err(Error::Argument("steps_per_sample must be positive".into()));
        }
        let m = Stiefel::new(n, k);
        let obj = Negated::new(m, GenRayleigh::new(a, cfg.nu.clone())?);
        let st = CgState::new(&obj, &m, StiefelPoint::new(p0)?)?;
        let rng = cfg.jitter_seed.map(seeded);
        Ok(Tracker {
            cfg,
            m,
            obj,
            st,
            prev_rho: None,
            rng,
        })
    }

    pub fn frame(&self) -> &DMatrix<f64> {
        self.st.point.frame()
    }

    pub fn weights(&self) -> &DVector<f64> {
        self.obj.inner.weights()
    }

    /// Swaps in a new operator; `reset` restarts CG from the gradient.
    pub fn set_operator(&mut self, a: AOp, reset: bool) -> Result<()> {
        self.obj.inner.set_operator(a)?;
        self.st.refresh(&self.obj, &self.m)?;
        if reset {
            self.st.force_reset();
        }
        Ok(())
    }

    /// Records the current sample against `rho_hat`, then takes the
    /// configured CG step(s).
    pub fn sample(&mut self, i: usize, rho_hat: f64) -> Result<TrackRecord> {
        let mut resorted = false;
        let mut reset = false;
        if self.cfg.sort {
            let d = self.obj.inner.diag_estimates(&self.st.point)?;
            if !similarly_ordered(&d, self.obj.inner.weights()) {
                let w = resort_weights(&d, self.obj.inner.weights());
                self.obj.inner.set_weights(w)?;
                self.st.refresh(&self.obj, &self.m)?;
                self.st.force_reset();
                resorted = true;
                reset = true;
            }
        }
        let rho = -self.st.value;
        if let (Some(thr), Some(prev)) = (self.cfg.reset_on_jump, self.prev_rho) {
            if (rho - prev).abs() > thr * prev.abs() {
                self.st.force_reset();
                reset = true;
            }
        }
        self.prev_rho = Some(rho);
        let gap = (rho - rho_hat).abs();
        let mut grad_norm = self.st.grad_norm(&self.m);
        let mut jittered = false;
        if let Some(rng) = self.rng.as_mut() {
            if grad_norm < JITTER_GRAD && gap > 1e-6 * (1.0 + rho_hat.abs()) {
                let z = self.m.random_tangent(rng, &self.st.point);
                let zn = self.m.norm(&self.st.point, &z);
                self.st.g = self.m.lincomb(1.0, &self.st.g, JITTER_SIZE / zn, &z);
                self.st.force_reset();
                grad_norm = self.st.grad_norm(&self.m);
                jittered = true;
            }
        }
        let record = TrackRecord {
            i,
            rho,
            rho_hat,
            gap,
            estimates: self.obj.inner.diag_estimates(&self.st.point)?,
            grad_norm,
            orthonormality: orthonormality_error(self.st.point.frame()),
            resorted,
            reset,
            jittered,
        };
        for _ in 0..self.cfg.steps_per_sample {
            if self.st.grad_norm(&self.m) == 0.0 {
                break;
            }
            let rep = self.st.step(&self.obj, &self.m, &self.cfg.cg)?;
            if reset || rep.reset {
                // Reported for the first step only.
                reset = true;
            }
        }
        Ok(TrackRecord { reset, ..record })
    }
}

/// Orthonormalized `I_{n x k} + scale Z` with `Z` a seeded Gaussian matrix:
/// a start frame near the top coordinate frame.
pub fn near_frame(n: usize, k: usize, scale: f64, seed: u64) -> Result<DMatrix<f64>> {
    let z = crate::rng::random_matrix(&mut seeded(seed), n, k);
    crate::linalg::gram_schmidt(&(DMatrix::identity(n, k) + z * scale))
}

/// Runs the tracker over a scenario, one sample per index.
pub fn track(scenario: &Scenario, cfg: &TrackerConfig, p0: Option<DMatrix<f64>>, seed: u64) -> Result<TrackResult> {
    let n = scenario.n();
    let p0 = match p0 {
        Some(p) => p,
        None => random_frame(&mut seeded(seed), n, cfg.nu.len()),
    };
    let nu0 = cfg.nu.clone();
    let mut tr = Tracker::new(AOp::dense(scenario.matrix(0).clone())?, cfg.clone(), p0)?;
    let mut records = Vec::with_capacity(scenario.len);
    for i in 0..scenario.len {
        if i > 0 && scenario.phase(i) != scenario.phase(i - 1) {
            tr.set_operator(AOp::dense(scenario.matrix(i).clone())?, cfg.reset_on_step)?;
        }
        records.push(tr.sample(i, scenario.optimum(i, &nu0))?);
    }
    Ok(TrackResult {
        records,
        frame: tr.frame().clone(),
        weights: tr.weights().clone(),
    })
}

/// Feeds a data stream through an estimator and tracks the principal
/// subspace of the running estimate. The reference `rho(p_hat)` is taken
/// from the estimate at each sample.
pub fn track_from_data(
    stream: &[DVector<f64>],
    estimator: &mut CovarianceEstimator,
    cfg: &TrackerConfig,
    p0: Option<DMatrix<f64>>,
    seed: u64,
) -> Result<TrackResult> {
    let n = estimator.dim();
    let Some(first) = stream.first() else {
        return Err(Error::Argument("empty data stream".into()));
    };
    if first.len() != n {
        return Err(Error::Dimension(format!("samples have {} entries, estimator expects {n}", first.len())));
    }
    let p0 = match p0 {
        Some(p) => p,
        None => random_frame(&mut seeded(seed), n, cfg.nu.len()),
    };
    let nu0 = cfg.nu.clone();
    let mut tr: Option<Tracker> = None;
    let mut records = Vec::with_capacity(stream.len());
    for (i, x) in stream.iter().enumerate() {
        estimator.update(x)?;
        let op = estimator.operator()?;
        match tr.as_mut() {
            Some(t) => t.set_operator(op, false)?,
            None => tr = Some(Tracker::new(op, cfg.clone(), p0.clone())?),
        }
        let spec = sym_eigenvalues(estimator.estimate());
        let rho_hat = genray_optimum(spec.as_slice(), &nu0);
        records.push(tr.as_mut().expect("created above").sample(i, rho_hat)?);
    }
    let t = tr.expect("stream is non-empty");
    Ok(TrackResult {
        records,
        frame: t.frame().clone(),
        weights: t.weights().clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eigensolvers::{topk_eigpairs_stiefel, TopkOptions};
    use crate::rng::{normal, random_vector};

    fn nu3() -> DVector<f64> {
        DVector::from_vec(vec![3.0, 2.0, 1.0])
    }

    #[test]
    fn window_estimator_matches_recompute() {
        let mut rng = seeded(1);
        let mut est = CovarianceEstimator::new(EstimatorMode::Window(4), 3).unwrap();
        let xs: Vec<DVector<f64>> = (0..9).map(|_| random_vector(&mut rng, 3)).collect();
        for (t, x) in xs.iter().enumerate() {
            est.window_update(x).unwrap();
            let lo = (t + 1).saturating_sub(4);
            let mut r = DMatrix::zeros(3, 3);
            for y in &xs[lo..=t] {
                r += y * y.transpose();
            }
            r /= (t + 1 - lo) as f64;
            assert!((est.estimate() - &r).amax() < 1e-12);
            let f = est.data_factor().unwrap();
            assert!((&f * f.transpose() - &r).amax() < 1e-12);
        }
        let x = DVector::from_vec(vec![1.0, -2.0, 0.5]);
        let mut c = CovarianceEstimator::new(EstimatorMode::Window(3), 3).unwrap();
        for _ in 0..5 {
            c.update(&x).unwrap();
        }
        assert!((c.estimate() - &x * x.transpose()).amax() < 1e-14);
        let mut e = CovarianceEstimator::new(EstimatorMode::Window(3), 3).unwrap();
        for j in 0..3 {
            e.update(&DVector::from_fn(3, |i, _| f64::from(u8::from(i == j)))).unwrap();
        }
        assert!((e.estimate() - DMatrix::identity(3, 3) / 3.0).amax() < 1e-15);
        assert!(matches!(e.update(&DVector::zeros(4)), Err(Error::Dimension(_))));
    }

    #[test]
    fn fading_estimators() {
        let r0 = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        let mut f = CovarianceEstimator::with_initial(EstimatorMode::FadingNormalized, r0.clone()).unwrap();
        f.update(&DVector::zeros(2)).unwrap();
        assert!((f.estimate() - &r0 / r0.norm()).amax() < 1e-15);
        f.update(&DVector::zeros(2)).unwrap();
        assert!((f.estimate() - &r0 / r0.norm()).amax() < 1e-15);
        let x1 = DVector::from_vec(vec![1.0, 0.0]);
        let x2 = DVector::from_vec(vec![0.5, -1.0]);
        let mut g = CovarianceEstimator::with_initial(EstimatorMode::FadingNormalized, r0.clone()).unwrap();
        g.update(&x1).unwrap();
        g.update(&x2).unwrap();
        let p1 = &r0 + &x1 * x1.transpose();
        let r1 = &p1 / p1.norm();
        let p2 = &r1 + &x2 * x2.transpose();
        assert!((g.estimate() - &p2 / p2.norm()).amax() < 1e-15);
        assert!((g.estimate().norm() - 1.0).abs() < 1e-15);
        let mut w = CovarianceEstimator::with_initial(EstimatorMode::FadingWeighted { alpha: 1.0, beta: 0.0 }, r0.clone())
            .unwrap();
        w.update(&x1).unwrap();
        assert_eq!(w.estimate(), &r0);
        let mut z = CovarianceEstimator::new(EstimatorMode::FadingNormalized, 2).unwrap();
        assert!(matches!(z.update(&DVector::zeros(2)), Err(Error::Singular(_))));
    }

    #[test]
    fn scenarios_have_the_described_structure() {
        let s1 = scenario_first(100).unwrap();
        assert_eq!(s1.matrix(40), &DMatrix::from_diagonal(&ramp_diag(100)));
        assert!((s1.spectrum(41).rows(0, 3) - DVector::from_vec(vec![100.0, 99.0, 98.0])).amax() < 1e-12);
        // Top-2 invariant subspace is span(e1, e2) before and after.
        let (_, v) = sym_eig_oracle(s1.matrix(41)).unwrap();
        let top = v.columns(0, 2).into_owned();
        let proj = top.rows(0, 2).into_owned();
        assert!((proj.tr_mul(&proj) - DMatrix::identity(2, 2)).norm() < 1e-12);
        let th = plane_rotation(100, 0, 1, 135.0);
        let rotated = th.columns(0, 2).into_owned();
        assert!((rotated.column(0).dot(&top.column(0)).abs() - 1.0).abs() < 1e-12);

        let s2 = scenario_second(100).unwrap();
        assert!((s2.spectrum(41).rows(0, 3) - DVector::from_vec(vec![103.0, 102.0, 101.0])).amax() < 1e-12);
        assert!((s2.optimum(41, &nu3()) - (3.0 * 103.0 + 2.0 * 102.0 + 101.0)).abs() < 1e-10);

        let s3 = scenario_third(100).unwrap();
        let (vals, vecs) = sym_eig_oracle(s3.matrix(41)).unwrap();
        assert!((vals.rows(0, 3) - DVector::from_vec(vec![100.0, 99.0, 98.0])).amax() < 1e-12);
        for j in 0..3 {
            assert!((vecs[(j + 3, j)].abs() - 1.0).abs() < 1e-14);
        }
        assert!(matches!(scenario_by_name("fourth", 10), Err(Error::Argument(_))));
    }

    #[test]
    fn stationary_tracking_is_the_batch_solver() {
        let a = DMatrix::from_diagonal(&ramp_diag(20));
        let p0 = random_frame(&mut seeded(3), 20, 3);
        let res = track(&Scenario::stationary(a.clone(), 15).unwrap(), &TrackerConfig::new(nu3()), Some(p0.clone()), 0)
            .unwrap();
        let opts = TopkOptions {
            max_iters: 14,
            grad_tol: 0.0,
            ..TopkOptions::default()
        };
        let batch = topk_eigpairs_stiefel(AOp::dense(a).unwrap(), nu3(), Some(p0), &opts).unwrap();
        for (r, b) in res.records.iter().zip(&batch.records) {
            assert!((r.rho - b.value).abs() <= 1e-12 * b.value.abs(), "{} vs {}", r.rho, b.value);
        }
    }

    #[test]
    fn first_scenario_recovers_after_the_step() {
        let s = scenario_first(100).unwrap();
        let mut cfg = TrackerConfig::new(nu3());
        cfg.reset_on_step = true;
        let res = track(&s, &cfg, Some(near_frame(100, 3, 1e-6, 1).unwrap()), 0).unwrap();
        assert!(res.records.iter().all(|r| r.orthonormality <= 1e-9));
        let hit = res.first_within(41, &[100.0, 99.0, 98.0], 1e-2).unwrap();
        assert!(hit <= 50, "recovered at {hit}");
    }

    #[test]
    fn saddle_gradient_vanishes() {
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 4.0, 3.0, 2.0]));
        let f = GenRayleigh::new(AOp::dense(a).unwrap(), DVector::from_vec(vec![2.0, 1.0])).unwrap();
        let pt = StiefelPoint::new(DMatrix::identity(4, 2)).unwrap();
        let g = crate::objectives::Objective::gradient(&f, &pt).unwrap();
        assert!(g.inner(&g).sqrt() <= 1e-14);
    }

    #[test]
    fn data_tracking_finds_signal_subspace() {
        let mut rng = seeded(9);
        let n = 8;
        let basis = random_frame(&mut rng, n, 2);
        let stream: Vec<DVector<f64>> = (0..200)
            .map(|_| &basis * DVector::from_vec(vec![3.0 * normal(&mut rng), normal(&mut rng)]))
            .collect();
        let mut est = CovarianceEstimator::new(EstimatorMode::Window(50), n).unwrap();
        let cfg = TrackerConfig::new(DVector::from_vec(vec![2.0, 1.0]));
        let res = track_from_data(&stream, &mut est, &cfg, None, 4).unwrap();
        let p = &res.frame;
        let overlap = basis.tr_mul(p);
        let err = (overlap.tr_mul(&overlap) - DMatrix::identity(2, 2)).norm();
        // The estimate moves every sample, so the frame trails it slightly.
        assert!(err < 1e-3, "subspace error {err:e}");
        let mut bad = CovarianceEstimator::new(EstimatorMode::Window(5), n + 1).unwrap();
        assert!(track_from_data(&stream, &mut bad, &cfg, None, 0).is_err());
        let zeros = vec![DVector::zeros(n); 5];
        let mut ze = CovarianceEstimator::new(EstimatorMode::Window(5), n).unwrap();
        let r = track_from_data(&zeros, &mut ze, &cfg, None, 0).unwrap();
        assert!(r.records.iter().all(|r| r.grad_norm == 0.0 && r.gap == 0.0));
    }
}
