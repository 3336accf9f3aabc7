//! The four subcommands. Each returns CSV rows (without the config header)
//! and a human-readable summary.

use std::fmt::{self, Write as _};
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use riemann_opt::eigensolvers::{
    axis_distance, extreme_eigpair_sphere, genray_optimum, newton_rayleigh, topk_eigpairs_stiefel, NewtonVariant,
    SphereCgOptions, TopkOptions,
};
use riemann_opt::flows::{
    default_dt, double_bracket_flow, genray_flow, off_diagonal_norm, rect_diag, so_gradient_flow, svd_experiment,
    svd_flow_uv, svd_rate_report, FlowOptions, FlowTrace, RateEstimate,
};
use riemann_opt::linalg::sym_eig_oracle;
use riemann_opt::manifolds::{so_exp, stiefel_exp, Manifold, Rotation, Stiefel, StiefelPoint};
use riemann_opt::objectives::{AOp, Negated, TraceThetaQN};
use riemann_opt::optimizers::{
    brockett_step, conjugate_gradient, newton, steepest_descent, CgOptions, SdStep, StoppingCriteria, Trace,
};
use riemann_opt::rng::{random_frame, random_rotation, random_symmetric, random_unit, seeded};
use riemann_opt::tracking::{near_frame, scenario_by_name, track, TrackerConfig};

use crate::config::{parse_list, Config, UsageError};

#[derive(Debug)]
pub enum RunError {
    Usage(UsageError),
    Numerical(riemann_opt::Error),
    Io(String),
}

impl RunError {
    pub fn exit_code(&self) -> u8 {
        match self {
            RunError::Usage(_) => 1,
            RunError::Numerical(_) | RunError::Io(_) => 2,
        }
    }
}

impl fmt::Display for RunError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RunError::Usage(e) => write!(f, "usage: {e}"),
            RunError::Numerical(e) => write!(f, "numerical failure: {e}"),
            RunError::Io(e) => write!(f, "i/o: {e}"),
        }
    }
}

impl From<UsageError> for RunError {
    fn from(e: UsageError) -> Self {
        RunError::Usage(e)
    }
}

impl From<riemann_opt::Error> for RunError {
    fn from(e: riemann_opt::Error) -> Self {
        RunError::Numerical(e)
    }
}

pub struct Output {
    pub csv: String,
    pub summary: String,
}

type Run<T> = Result<T, RunError>;

fn e10(v: f64) -> String {
    format!("{v:.10e}")
}

fn ramp(k: usize) -> DVector<f64> {
    DVector::from_fn(k, |i, _| (k - i) as f64)
}

/// Weights from the config, or `default` when the key is empty.
fn weights_or(cfg: &Config, default: DVector<f64>) -> Result<DVector<f64>, UsageError> {
    if cfg.raw("weights").is_empty() {
        Ok(default)
    } else {
        cfg.vector("weights")
    }
}

/// `R diag(spectrum) R^T` with `R` a seeded rotation, or the diagonal itself.
fn test_matrix(spectrum: &DVector<f64>, rotate: bool, seed: u64) -> DMatrix<f64> {
    let n = spectrum.len();
    let r = if rotate {
        random_rotation(&mut seeded(seed), n)
    } else {
        DMatrix::identity(n, n)
    };
    let a = &r * DMatrix::from_diagonal(spectrum) * r.transpose();
    (&a + a.transpose()) * 0.5
}

// ---------------------------------------------------------------- eig

pub fn eig_defaults() -> Config {
    Config::new(
        "eig",
        &[
            ("manifold", "sphere"),
            ("method", "cg"),
            ("spectrum", "21..1"),
            ("weights", ""),
            ("seed", "0"),
            ("max-iters", "200"),
            ("tol", "1e-13"),
            ("warm", "false"),
            ("warm-scale", "0.02"),
            ("rotate", "false"),
            ("reps", "1"),
        ],
    )
}

struct EigRow {
    iter: usize,
    value: f64,
    grad_norm: f64,
    dist: f64,
    matvecs: usize,
}

struct EigRun {
    rows: Vec<EigRow>,
    status: String,
    matvecs: usize,
}

pub fn cmd_eig(cfg: &Config) -> Run<Output> {
    let manifold = cfg.choice("manifold", &["sphere", "so", "stiefel"])?;
    let method = cfg.raw("method").to_string();
    let allowed: &[&str] = match manifold {
        "sphere" => &["cg", "sd", "newton", "rqi"],
        "so" => &["newton", "sd", "cg"],
        _ => &["cg"],
    };
    if !allowed.contains(&method.as_str()) {
        return Err(UsageError(format!("method '{method}' is not available on {manifold}; use {}", allowed.join("|"))).into());
    }
    let spectrum = cfg.vector("spectrum")?;
    let seed: u64 = cfg.parse("seed")?;
    let max_iters: usize = cfg.parse("max-iters")?;
    let tol: f64 = cfg.parse("tol")?;
    if !(tol >= 0.0) {
        return Err(UsageError(format!("'tol' must be non-negative, got {tol}")).into());
    }
    let warm = cfg.flag("warm")?.then(|| cfg.positive("warm-scale")).transpose()?;
    let rotate = cfg.flag("rotate")?;
    let reps: usize = cfg.parse("reps")?;
    if reps == 0 {
        return Err(UsageError("'reps' must be at least 1".into()).into());
    }
    let n = spectrum.len();
    let a = test_matrix(&spectrum, rotate, seed);
    let weights = match manifold {
        "sphere" => DVector::zeros(0),
        "so" => weights_or(cfg, ramp(n))?,
        _ => weights_or(cfg, ramp(3.min(n)))?,
    };
    if manifold == "so" && weights.len() != n {
        return Err(UsageError(format!("so needs {n} weights, got {}", weights.len())).into());
    }
    if manifold == "stiefel" && (weights.is_empty() || weights.len() > n) {
        return Err(UsageError(format!("stiefel needs 1..={n} weights, got {}", weights.len())).into());
    }
    if manifold == "sphere" && n < 2 {
        return Err(UsageError("sphere needs a spectrum of length >= 2".into()).into());
    }

    let one = |rep: usize| -> Run<EigRun> {
        let rseed = seed + rep as u64;
        match manifold {
            "sphere" => eig_sphere(&a, &method, rseed, max_iters, tol, warm),
            "so" => eig_so(&a, &weights, &method, rseed, max_iters, tol, warm),
            _ => eig_stiefel(&a, &weights, rseed, max_iters, tol, warm),
        }
    };
    // Repetitions are independent; results are gathered in order so the CSV
    // does not depend on scheduling.
    let runs: Vec<Run<EigRun>> = if reps == 1 {
        vec![one(0)]
    } else {
        std::thread::scope(|s| {
            let handles: Vec<_> = (0..reps).map(|rep| s.spawn(move || one(rep))).collect();
            handles.into_iter().map(|h| h.join().expect("worker panicked")).collect()
        })
    };
    let mut csv = String::from("rep,iter,value,grad_norm,dist,matvecs\n");
    let mut summary = String::new();
    for (rep, run) in runs.into_iter().enumerate() {
        let run = run?;
        for row in &run.rows {
            writeln!(
                csv,
                "{rep},{},{},{},{},{}",
                row.iter,
                e10(row.value),
                e10(row.grad_norm),
                e10(row.dist),
                row.matvecs
            )
            .unwrap();
        }
        let last = run.rows.last().expect("runs record the start");
        writeln!(
            summary,
            "rep {rep}: {manifold}/{method} {} iterations, final gap {:.3e}, {} matvecs, status {}",
            last.iter, last.dist, run.matvecs, run.status
        )
        .unwrap();
    }
    Ok(Output { csv, summary })
}

fn eig_sphere(a: &DMatrix<f64>, method: &str, seed: u64, max_iters: usize, tol: f64, warm: Option<f64>) -> Run<EigRun> {
    let n = a.nrows();
    let (_, v) = sym_eig_oracle(a)?;
    let xi = v.column(0).into_owned();
    let mut rng = seeded(seed);
    let x0 = match warm {
        Some(r) => {
            let z = random_unit(&mut rng, n);
            let t = (&z - &xi * xi.dot(&z)).normalize();
            &xi * r.cos() + t * r.sin()
        }
        None => random_unit(&mut rng, n),
    };
    let (points, status, matvecs) = match method {
        "cg" | "sd" => {
            let opts = SphereCgOptions {
                max_iters,
                grad_tol: tol,
                steepest: method == "sd",
                ..SphereCgOptions::default()
            };
            let res = extreme_eigpair_sphere(a, &x0, &opts)?;
            (res.points, format!("{:?}", res.status), res.matvecs)
        }
        _ => {
            let variant = if method == "rqi" {
                NewtonVariant::Rqi
            } else {
                NewtonVariant::Geodesic
            };
            let res = newton_rayleigh(a, &x0, variant, max_iters, tol)?;
            (res.points, format!("{:?}", res.status), 0)
        }
    };
    let rows = points
        .iter()
        .enumerate()
        .map(|(iter, x)| {
            let ax = a * x;
            let rho = x.dot(&ax);
            EigRow {
                iter,
                value: rho,
                grad_norm: 2.0 * (&ax - x * rho).norm(),
                dist: axis_distance(x, &xi),
                matvecs: 0,
            }
        })
        .collect();
    Ok(EigRun { rows, status, matvecs })
}

/// Eigenvector matrix of `a` with the column for the `r`-th largest
/// eigenvalue placed where `nu` has its `r`-th largest entry; a maximizer of
/// `tr Theta^T A Theta N` (determinant fixed to +1).
fn so_optimum(a: &DMatrix<f64>, nu: &DVector<f64>) -> Run<DMatrix<f64>> {
    let (_, v) = sym_eig_oracle(a)?;
    let mut order: Vec<usize> = (0..nu.len()).collect();
    order.sort_by(|&i, &j| nu[j].total_cmp(&nu[i]));
    let mut theta = DMatrix::zeros(a.nrows(), a.ncols());
    for (rank, &col) in order.iter().enumerate() {
        theta.set_column(col, &v.column(rank));
    }
    if theta.determinant() < 0.0 {
        let c = -theta.column(0).into_owned();
        theta.set_column(0, &c);
    }
    Ok(theta)
}

fn eig_so(
    a: &DMatrix<f64>,
    nu: &DVector<f64>,
    method: &str,
    seed: u64,
    max_iters: usize,
    tol: f64,
    warm: Option<f64>,
) -> Run<EigRun> {
    let n = a.nrows();
    let m = Rotation::new(n);
    let f = TraceThetaQN::new(a.clone(), nu)?;
    let nm = f.n_matrix().clone();
    let obj = Negated::new(m, f);
    let mut rng = seeded(seed);
    let theta0 = match warm {
        Some(r) => {
            let om = m.random_tangent(&mut rng, &DMatrix::identity(n, n));
            let om = &om * (r / om.norm());
            so_exp(&so_optimum(a, nu)?, &om, 1.0)?
        }
        None => m.random_point(&mut rng),
    };
    let stop = StoppingCriteria {
        grad_tol: tol * a.norm() * nm.norm(),
        max_iters,
        f_tol: 0.0,
    };
    let trace: Trace<DMatrix<f64>> = match method {
        "newton" => newton(&m, &obj, theta0, &stop)?,
        "cg" => conjugate_gradient(&m, &obj, theta0, &CgOptions::default(), &stop)?,
        _ => {
            let rule = |theta: &DMatrix<f64>, g: &DMatrix<f64>| brockett_step(&obj.inner.h(theta), g, &nm);
            steepest_descent(&m, &obj, theta0, &SdStep::Rule(&rule), &stop)?
        }
    };
    let rows = trace
        .records
        .iter()
        .zip(&trace.points)
        .map(|(rec, theta)| EigRow {
            iter: rec.iter,
            value: -rec.value,
            grad_norm: rec.grad_norm,
            dist: off_diagonal_norm(&obj.inner.h(theta)),
            matvecs: 0,
        })
        .collect();
    Ok(EigRun {
        rows,
        status: format!("{:?}", trace.status),
        matvecs: 0,
    })
}

fn eig_stiefel(
    a: &DMatrix<f64>,
    nu: &DVector<f64>,
    seed: u64,
    max_iters: usize,
    tol: f64,
    warm: Option<f64>,
) -> Run<EigRun> {
    let n = a.nrows();
    let k = nu.len();
    let p0 = match warm {
        Some(r) => {
            let (_, v) = sym_eig_oracle(a)?;
            let top = v.columns(0, k).into_owned();
            let z = random_frame(&mut seeded(seed), n, k);
            riemann_opt::linalg::gram_schmidt(&(top + z * r))?
        }
        None => random_frame(&mut seeded(seed), n, k),
    };
    let opts = TopkOptions {
        max_iters,
        grad_tol: tol,
        seed,
        ..TopkOptions::default()
    };
    let (spec, _) = sym_eig_oracle(a)?;
    let target = genray_optimum(spec.as_slice(), nu);
    let res = topk_eigpairs_stiefel(AOp::dense(a.clone())?, nu.clone(), Some(p0), &opts)?;
    let rows = res
        .records
        .iter()
        .map(|r| EigRow {
            iter: r.iter,
            value: r.value,
            grad_norm: r.grad_norm,
            dist: (r.value - target).abs(),
            matvecs: r.matvecs,
        })
        .collect();
    Ok(EigRun {
        rows,
        status: format!("{:?}", res.status),
        matvecs: res.matvecs,
    })
}

// ---------------------------------------------------------------- flow

pub fn flow_defaults() -> Config {
    Config::new(
        "flow",
        &[
            ("system", "svd"),
            ("t-end", "60"),
            ("dt", "auto"),
            ("record-every", "10"),
            ("stop-speed", "0"),
            ("spectrum", ""),
            ("weights", ""),
            ("n", "6"),
            ("rows", ""),
            ("seed", "0"),
            ("rates", ""),
        ],
    )
}

fn flow_csv(trace: Option<&FlowTrace>, entries: &[(usize, usize)], spec_len: usize) -> String {
    let mut out = String::from("t,objective,drift,orthogonality,speed");
    for j in 1..=spec_len {
        write!(out, ",spectrum_{j}").unwrap();
    }
    for (i, j) in entries {
        write!(out, ",s{}_{}", i + 1, j + 1).unwrap();
    }
    out.push('\n');
    let Some(trace) = trace else {
        return out;
    };
    for s in &trace.states {
        write!(
            out,
            "{},{},{},{},{}",
            e10(s.t),
            e10(s.objective),
            e10(s.drift),
            e10(s.orthogonality),
            e10(s.speed)
        )
        .unwrap();
        for v in s.spectrum.iter() {
            write!(out, ",{}", e10(*v)).unwrap();
        }
        for &(i, j) in entries {
            write!(out, ",{}", e10(s.state[(i, j)])).unwrap();
        }
        out.push('\n');
    }
    out
}

pub fn cmd_flow(cfg: &Config) -> Run<Output> {
    let system = cfg.choice("system", &["svd", "double-bracket", "so", "genray"])?;
    let t_end: f64 = cfg.parse("t-end")?;
    if !(t_end >= 0.0) || !t_end.is_finite() {
        return Err(UsageError(format!("'t-end' must be non-negative, got {t_end}")).into());
    }
    let record_every: usize = cfg.parse("record-every")?;
    let stop_speed: f64 = cfg.parse("stop-speed")?;
    let seed: u64 = cfg.parse("seed")?;
    let custom_spectrum = !cfg.raw("spectrum").is_empty();

    // Initial data for each system.
    enum Setup {
        Svd { k: DMatrix<f64>, u0: DMatrix<f64>, v0: DMatrix<f64> },
        Bracket { h0: DMatrix<f64> },
        So { q: DMatrix<f64> },
        Genray { a: DMatrix<f64>, p0: DMatrix<f64> },
    }
    let (setup, nu, scale) = match system {
        "svd" => {
            if custom_spectrum {
                let s = cfg.vector("spectrum")?;
                let k = s.len();
                let rows = if cfg.raw("rows").is_empty() { k + 2 } else { cfg.parse("rows")? };
                if rows < k {
                    return Err(UsageError(format!("'rows' must be at least {k}")).into());
                }
                let nu = weights_or(cfg, ramp(k))?;
                let mut rng = seeded(seed);
                let u0 = random_rotation(&mut rng, rows);
                let v0 = random_rotation(&mut rng, k);
                let scale = s.amax();
                (Setup::Svd { k: rect_diag(rows, &s), u0, v0 }, nu, scale)
            } else {
                let e = svd_experiment()?;
                let nu = weights_or(cfg, e.nu.clone())?;
                (Setup::Svd { k: e.k, u0: e.u0, v0: e.v0 }, nu, 5.0)
            }
        }
        "double-bracket" | "so" => {
            let q = if custom_spectrum {
                test_matrix(&cfg.vector("spectrum")?, true, seed)
            } else {
                let n: usize = cfg.parse("n")?;
                if n == 0 {
                    return Err(UsageError("'n' must be positive".into()).into());
                }
                random_symmetric(&mut seeded(seed), n)
            };
            let n = q.nrows();
            let nu = weights_or(cfg, ramp(n))?;
            let scale = q.amax();
            if system == "so" {
                (Setup::So { q }, nu, scale)
            } else {
                (Setup::Bracket { h0: q }, nu, scale)
            }
        }
        _ => {
            let s = if custom_spectrum { cfg.vector("spectrum")? } else { ramp(10) };
            let nu = weights_or(cfg, ramp(3.min(s.len())))?;
            if nu.len() > s.len() {
                return Err(UsageError("more weights than eigenvalues".into()).into());
            }
            let p0 = random_frame(&mut seeded(seed), s.len(), nu.len());
            let scale = s.amax();
            (Setup::Genray { a: DMatrix::from_diagonal(&s), p0 }, nu, scale)
        }
    };
    let dt = match cfg.raw("dt") {
        "auto" if system == "svd" => 1e-2,
        "auto" => default_dt(nu.amax(), scale),
        _ => cfg.positive("dt")?,
    };
    let entries: Vec<(usize, usize)> = match &setup {
        Setup::Svd { k, .. } => (0..k.nrows())
            .flat_map(|i| (0..k.ncols()).filter(move |&j| j != i).map(move |j| (i, j)))
            .collect(),
        Setup::Bracket { h0 } => (0..h0.nrows())
            .flat_map(|i| (i + 1..h0.nrows()).map(move |j| (i, j)))
            .collect(),
        _ => Vec::new(),
    };
    let spec_len = match &setup {
        Setup::Svd { k, .. } => k.ncols(),
        Setup::Bracket { h0 } => h0.nrows(),
        Setup::So { q } => q.nrows(),
        Setup::Genray { .. } => nu.len(),
    };
    if t_end == 0.0 {
        return Ok(Output {
            csv: flow_csv(None, &entries, spec_len),
            summary: format!("{system}: t-end is zero, nothing integrated\n"),
        });
    }
    let opts = FlowOptions {
        t_end,
        dt,
        record_every,
        stop_speed,
    };
    let trace = match &setup {
        Setup::Svd { k, u0, v0 } => svd_flow_uv(k, &nu, u0, v0, &opts)?,
        Setup::Bracket { h0 } => double_bracket_flow(h0, &nu, &opts)?,
        Setup::So { q } => so_gradient_flow(q, &nu, &DMatrix::identity(q.nrows(), q.nrows()), &opts)?,
        Setup::Genray { a, p0 } => genray_flow(&AOp::dense(a.clone())?, &nu, p0, &opts)?,
    };
    let last = trace.last();
    let mut summary = format!(
        "{system}: t = {:.4}, {} steps, {} projections, objective {:.10e}, max drift {:.3e}, max orthogonality {:.3e}\n",
        last.t,
        trace.steps,
        trace.projections,
        last.objective,
        trace.max_drift(),
        trace.max_orthogonality()
    );
    if let Setup::Svd { .. } = setup {
        let report = svd_rate_report(&trace, &nu, &entries)?;
        let mut table = String::from("i,j,measured,predicted,points\n");
        for e in &report.entries {
            let (measured, points) = match &e.measured {
                RateEstimate::Fitted(f) => (format!("{:.6}", f.rate), f.points),
                RateEstimate::Unmeasurable => ("unmeasurable".to_string(), 0),
            };
            let predicted = e.predicted.map_or("none".to_string(), |p| format!("{p:.6}"));
            writeln!(table, "{},{},{measured},{predicted},{points}", e.entry.0 + 1, e.entry.1 + 1).unwrap();
        }
        summary.push_str("rates (1-based entries)\n");
        summary.push_str(&table);
        let path = cfg.raw("rates");
        if !path.is_empty() {
            std::fs::write(path, format!("{}{table}", cfg.header())).map_err(|e| RunError::Io(format!("{path}: {e}")))?;
        }
    }
    Ok(Output {
        csv: flow_csv(Some(&trace), &entries, spec_len),
        summary,
    })
}

// ---------------------------------------------------------------- track

pub fn track_defaults() -> Config {
    Config::new(
        "track",
        &[
            ("scenario", "first"),
            ("n", "100"),
            ("weights", "3..1"),
            ("seed", "0"),
            ("start", "near"),
            ("start-scale", "1e-6"),
            ("reset-on-step", "false"),
            ("reset-on-jump", "false"),
            ("jump-threshold", "0.1"),
            ("jitter", "false"),
            ("jitter-seed", "5"),
            ("steps-per-sample", "1"),
        ],
    )
}

pub fn cmd_track(cfg: &Config) -> Run<Output> {
    let name = cfg.choice("scenario", &["first", "second", "third"])?;
    let n: usize = cfg.parse("n")?;
    let nu = cfg.vector("weights")?;
    if n < 6 || nu.len() > n {
        return Err(UsageError(format!("'n' must be at least 6 and at least the number of weights, got {n}")).into());
    }
    let seed: u64 = cfg.parse("seed")?;
    let start = cfg.choice("start", &["near", "random"])?;
    let mut tc = TrackerConfig::new(nu.clone());
    tc.reset_on_step = cfg.flag("reset-on-step")?;
    tc.reset_on_jump = cfg.flag("reset-on-jump")?.then(|| cfg.positive("jump-threshold")).transpose()?;
    tc.jitter_seed = cfg.flag("jitter")?.then(|| cfg.parse("jitter-seed")).transpose()?;
    tc.steps_per_sample = cfg.parse("steps-per-sample")?;
    if tc.steps_per_sample == 0 {
        return Err(UsageError("'steps-per-sample' must be positive".into()).into());
    }
    let scenario = scenario_by_name(name, n)?;
    let p0 = match start {
        "near" => Some(near_frame(n, nu.len(), cfg.positive("start-scale")?, seed)?),
        _ => None,
    };
    let res = track(&scenario, &tc, p0, seed)?;
    let k = nu.len();
    let target: Vec<f64> = scenario.spectrum_after.iter().take(k).copied().collect();
    let after = scenario.step_at + 1;
    let hit = res.first_within(after, &target, 1e-2);
    let last = res.records.last().expect("scenarios are non-empty");
    let summary = format!(
        "{name}: estimates within 1e-2 of [{}] from sample {}, final gap {:.3e}, jittered samples {}\n",
        target.iter().map(|v| format!("{v:.6}")).collect::<Vec<_>>().join(", "),
        hit.map_or("never".to_string(), |i| i.to_string()),
        last.gap,
        res.records.iter().filter(|r| r.jittered).count()
    );
    Ok(Output { csv: res.csv(), summary })
}

// ---------------------------------------------------------------- bench

pub fn bench_defaults() -> Config {
    Config::new(
        "bench",
        &[
            ("grid", "n"),
            ("ns", "128,256,512"),
            ("k", "4"),
            ("ks", "2,4,8"),
            ("n", "512"),
            ("reps", "20"),
            ("seed", "0"),
        ],
    )
}

/// Seconds per `stiefel_exp` call on V(n, k), best of three batches.
pub fn time_stiefel_exp(n: usize, k: usize, reps: usize, seed: u64) -> Run<f64> {
    let m = Stiefel::new(n, k);
    let mut rng = seeded(seed);
    let p: StiefelPoint = m.random_point(&mut rng);
    let x = m.random_tangent(&mut rng, &p);
    let mut best = f64::INFINITY;
    for _ in 0..3 {
        let t0 = Instant::now();
        for _ in 0..reps {
            std::hint::black_box(stiefel_exp(&p, &x, 1.0)?);
        }
        best = best.min(t0.elapsed().as_secs_f64() / reps as f64);
    }
    Ok(best)
}

pub fn cmd_bench(cfg: &Config) -> Run<Output> {
    let grid = cfg.choice("grid", &["n", "k"])?;
    let reps: usize = cfg.parse("reps")?;
    let seed: u64 = cfg.parse("seed")?;
    if reps == 0 {
        return Err(UsageError("'reps' must be positive".into()).into());
    }
    let points: Vec<(usize, usize)> = if grid == "n" {
        let k: usize = cfg.parse("k")?;
        parse_list("ns", cfg.raw("ns"))?.into_iter().map(|n| (n, k)).collect()
    } else {
        let n: usize = cfg.parse("n")?;
        parse_list("ks", cfg.raw("ks"))?.into_iter().map(|k| (n, k)).collect()
    };
    if let Some(&(n, k)) = points.iter().find(|(n, k)| k > n || *k == 0) {
        return Err(UsageError(format!("need 1 <= k <= n, got n = {n}, k = {k}")).into());
    }
    let mut csv = String::from("n,k,seconds_per_call,ratio_to_first\n");
    let mut first = None;
    let mut summary = String::new();
    for (n, k) in points {
        let t = time_stiefel_exp(n, k, reps, seed)?;
        let base = *first.get_or_insert(t);
        writeln!(csv, "{n},{k},{},{:.4}", e10(t), t / base).unwrap();
        writeln!(summary, "stiefel_exp n = {n}, k = {k}: {:.3e} s/call ({:.2}x first)", t, t / base).unwrap();
    }
    Ok(Output { csv, summary })
}
