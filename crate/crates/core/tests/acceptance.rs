//! Acceptance run: one PASS/FAIL line per criterion. Criterion 9 (timing
//! ratios) only warns. The process exits non-zero when a hard criterion fails.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use riemann_opt::eigensolvers::{
    axis_distance, extreme_eigpair_sphere, newton_rayleigh, newton_rayleigh_step, similarly_ordered,
    topk_eigpairs_stiefel, NewtonVariant, SphereCgOptions, TopkOptions,
};
use riemann_opt::flows::{
    double_bracket_flow, eig2, off_diagonal_norm, svd_experiment, svd_flow_uv, svd_rate_r1,
    svd_rate_r2, svd_rate_report, FlowOptions, FlowTrace,
};
use riemann_opt::linalg::{sym_eig_oracle, sym_eigenvalues};
use riemann_opt::manifolds::{
    so_exp, stiefel_exp, stiefel_exp_transport, Manifold, Rotation, Sphere, Stiefel, StiefelPoint,
};
use riemann_opt::objectives::{fd_slope, AOp, GenRayleigh, Negated, Objective, RayleighQ, TraceThetaQN};
use riemann_opt::optimizers::{
    brockett_step, newton, slope, sphere_rayleigh_exact_step, steepest_descent, ExactStep, SdStep, Status,
    StoppingCriteria,
};
use riemann_opt::rng::{random_frame, random_rotation, random_symmetric, random_unit, seeded};
use riemann_opt::tracking::{near_frame, scenario_by_name, track, TrackResult, TrackerConfig};

struct Report {
    hard_failures: usize,
}

impl Report {
    fn record(&mut self, id: u32, ok: bool, detail: String) {
        println!("{} criterion {id}: {detail}", if ok { "PASS" } else { "FAIL" });
        if !ok {
            self.hard_failures += 1;
        }
    }

    fn soft(&mut self, id: u32, ok: bool, detail: String) {
        if ok {
            println!("PASS criterion {id}: {detail}");
        } else {
            println!("WARN criterion {id} (soft, not counted): {detail}");
        }
    }
}

fn ramp(n: usize) -> DVector<f64> {
    DVector::from_fn(n, |i, _| (n - i) as f64)
}

fn e(n: usize, i: usize) -> DVector<f64> {
    let mut v = DVector::zeros(n);
    v[i] = 1.0;
    v
}

/// `xi cos r + t sin r` with `t` a seeded unit vector orthogonal to `xi`.
fn start_at(xi: &DVector<f64>, r: f64, seed: u64) -> DVector<f64> {
    let z = random_unit(&mut seeded(seed), xi.len());
    let t = (&z - xi * xi.dot(&z)).normalize();
    xi * r.cos() + t * r.sin()
}

fn secs(t: Instant) -> f64 {
    t.elapsed().as_secs_f64()
}

// Criterion 1: sphere CG against steepest descent on diag(21, ..., 1).
fn sphere_cg(rep: &mut Report) {
    let clock = Instant::now();
    let n = 21;
    let q = DMatrix::from_diagonal(&ramp(n));
    let xi = e(n, 0);
    let mut cg_hits = 0;
    let mut sd_slow = 0;
    let mut worst_sd: f64 = f64::INFINITY;
    let mut cg_iters = Vec::new();
    for seed in 0..10u64 {
        let x0 = start_at(&xi, 1.0, seed);
        let cg = extreme_eigpair_sphere(
            &q,
            &x0,
            &SphereCgOptions {
                max_iters: 30,
                grad_tol: 0.0,
                ..SphereCgOptions::default()
            },
        )
        .expect("sphere CG runs");
        let first = cg.points.iter().position(|x| axis_distance(x, &xi) <= 1e-6);
        if first.is_some() {
            cg_hits += 1;
        }
        cg_iters.push(first.map_or("-".to_string(), |i| i.to_string()));
        let sd = extreme_eigpair_sphere(
            &q,
            &x0,
            &SphereCgOptions {
                max_iters: 30,
                grad_tol: 0.0,
                steepest: true,
                ..SphereCgOptions::default()
            },
        )
        .expect("steepest descent runs");
        let d30 = sd.points.get(30).map_or(0.0, |x| axis_distance(x, &xi));
        worst_sd = worst_sd.min(d30);
        if d30 > 1e-3 {
            sd_slow += 1;
        }
    }
    let t = secs(clock);
    rep.record(
        1,
        cg_hits >= 9 && sd_slow == 10 && t < 1.0,
        format!(
            "sphere CG within 1e-6 by iteration 30 for {cg_hits}/10 seeds (first hits {}); steepest descent above 1e-3 at 30 for {sd_slow}/10 (min {worst_sd:.2e}); {t:.3} s",
            cg_iters.join(",")
        ),
    );
}

// Criterion 2: cubic convergence of Newton-Rayleigh and RQI.
fn newton_order(rep: &mut Report) {
    let clock = Instant::now();
    let n = 20;
    let q = random_symmetric(&mut seeded(2), n);
    let (_, v) = sym_eig_oracle(&q).expect("oracle");
    let xi = v.column(0).into_owned();
    let radii = [0.01, 0.02, 0.04, 0.07, 0.1];
    let mut orders = Vec::new();
    let mut ok = true;
    for variant in [NewtonVariant::Geodesic, NewtonVariant::Rqi] {
        let mut pairs = Vec::new();
        for (s, &r) in radii.iter().enumerate() {
            let x0 = start_at(&xi, r, 100 + s as u64);
            let res = newton_rayleigh(&q, &x0, variant, 6, 0.0).expect("newton runs");
            let d: Vec<f64> = res.points.iter().map(|x| axis_distance(x, &xi)).collect();
            for w in d.windows(2) {
                if w[0] >= 1e-12 && w[1] >= 1e-12 && w[0] <= 0.1 {
                    pairs.push((w[0].ln(), w[1].ln()));
                }
            }
        }
        let order = if pairs.len() >= 3 { slope(&pairs) } else { f64::NAN };
        ok &= order >= 2.7;
        orders.push(format!("{variant:?} {order:.3} ({} pairs)", pairs.len()));
    }
    // One step of each variant lands within O(d^2) of the other.
    let mut worst_ratio: f64 = 0.0;
    for (s, &r) in radii.iter().enumerate() {
        let x0 = start_at(&xi, r, 100 + s as u64);
        let g = newton_rayleigh_step(&q, &x0, NewtonVariant::Geodesic).unwrap().unwrap();
        let h = newton_rayleigh_step(&q, &x0, NewtonVariant::Rqi).unwrap().unwrap();
        worst_ratio = worst_ratio.max(axis_distance(&g, &h) / (r * r));
    }
    ok &= worst_ratio <= 10.0;
    let t = secs(clock);
    rep.record(
        2,
        ok && t < 1.0,
        format!(
            "fitted orders {}; max |geodesic - RQI| / d0^2 = {worst_ratio:.2e}; {t:.3} s",
            orders.join(", ")
        ),
    );
}

// Criterion 3: Newton on SO(20) and steepest descent with the bounded step.
fn so_newton(rep: &mut Report) {
    let clock = Instant::now();
    let n = 20;
    let d = ramp(n);
    let q = DMatrix::from_diagonal(&d);
    let f = TraceThetaQN::new(q.clone(), &d).expect("objective");
    let m = Rotation::new(n);
    let om = m.random_tangent(&mut seeded(3), &DMatrix::identity(n, n));
    let om = &om * (0.1 / om.norm());
    let th0 = so_exp(&DMatrix::identity(n, n), &om, 1.0).expect("exp");
    let tr = newton(
        &m,
        &f,
        th0,
        &StoppingCriteria {
            grad_tol: 0.0,
            max_iters: 3,
            f_tol: 0.0,
        },
    )
    .expect("newton runs");
    let offs: Vec<f64> = tr.points.iter().map(|th| off_diagonal_norm(&f.h(th))).collect();
    let newton_ok = tr.status != Status::NewtonFallback && offs.iter().take(4).any(|&o| o <= 1e-10);

    let neg = Negated::new(m, TraceThetaQN::new(q, &d).expect("objective"));
    let nm = DMatrix::from_diagonal(&d);
    let rule = |th: &DMatrix<f64>, g: &DMatrix<f64>| brockett_step(&neg.inner.h(th), g, &nm);
    let th_sd = random_rotation(&mut seeded(30), n);
    let sd = steepest_descent(
        &m,
        &neg,
        th_sd,
        &SdStep::Rule(&rule),
        &StoppingCriteria {
            grad_tol: 0.0,
            max_iters: 150,
            f_tol: 0.0,
        },
    );
    let (sd_ok, sd_detail) = match sd {
        Ok(tr) => {
            let vals = tr.values();
            let rises = vals.windows(2).filter(|w| w[1] > w[0]).count();
            (
                rises == 0 && tr.records.len() == 151,
                format!("{} SD iterations, {rises} increases of -f", tr.records.len() - 1),
            )
        }
        Err(err) => (false, format!("SD failed: {err}")),
    };
    let t = secs(clock);
    rep.record(
        3,
        newton_ok && sd_ok && t < 10.0,
        format!(
            "|H_i - D_i| over Newton iterates {}; {sd_detail}; {t:.3} s",
            offs.iter().map(|o| format!("{o:.1e}")).collect::<Vec<_>>().join(" -> ")
        ),
    );
}

// Criterion 4: CG on V(100, 3).
fn stiefel_cg(rep: &mut Report) {
    let clock = Instant::now();
    let n = 100;
    let a = DMatrix::from_diagonal(&ramp(n));
    let nu = DVector::from_vec(vec![3.0, 2.0, 1.0]);
    let target = 596.0;
    let p0 = random_frame(&mut seeded(0), n, 3);
    let res = topk_eigpairs_stiefel(
        AOp::dense(a).expect("operator"),
        nu,
        Some(p0),
        &TopkOptions {
            max_iters: 150,
            grad_tol: 0.0,
            ..TopkOptions::default()
        },
    )
    .expect("stiefel CG runs");
    let rho_at = res
        .records
        .iter()
        .position(|r| (r.value - target).abs() <= 1e-10 * target);
    let est_at = res.records.iter().position(|r| {
        let mut v: Vec<f64> = r.estimates.iter().copied().collect();
        v.sort_by(|a, b| b.total_cmp(a));
        v.iter().zip([100.0, 99.0, 98.0]).all(|(e, t)| (e - t).abs() <= 1e-3)
    });
    let orth = res.records.iter().map(|r| r.orthonormality).fold(0.0, f64::max);
    let max_mv = res.records.iter().skip(1).map(|r| r.matvecs).max().unwrap_or(0);
    let t = secs(clock);
    let ok = rho_at.is_some_and(|i| i <= 60)
        && est_at.is_some_and(|i| i <= 25)
        && orth <= 1e-9
        && max_mv <= 2 * 3 + 2
        && t < 5.0;
    let show = |o: Option<usize>| o.map_or("never".to_string(), |i| i.to_string());
    rep.record(
        4,
        ok,
        format!(
            "rho within 1e-10 relative at iteration {} (need <= 60); estimates within 1e-3 at {} (need <= 25); orthonormality {orth:.1e}; max matvecs/iteration {max_mv}; {t:.3} s",
            show(rho_at),
            show(est_at)
        ),
    );
}

/// Least-squares decay rate of `|x(t)|` over `t in [lo, hi]`.
fn window_rate(trace: &FlowTrace, (i, j): (usize, usize), lo: f64, hi: f64) -> f64 {
    let pts: Vec<(f64, f64)> = trace
        .states
        .iter()
        .filter(|s| s.t >= lo && s.t <= hi)
        .map(|s| (s.t, s.state[(i, j)].abs().ln()))
        .collect();
    -slope(&pts)
}

// Criterion 5: SVD-flow convergence rates on the 7x5 experiment.
fn svd_rates(rep: &mut Report) {
    let clock = Instant::now();
    let ex = svd_experiment().expect("experiment data");
    let mut opts = FlowOptions::new(60.0, 1e-2);
    opts.record_every = 10;
    let trace = svd_flow_uv(&ex.k, &ex.nu, &ex.u0, &ex.v0, &opts).expect("flow runs");
    let targets = [
        ("r12", (0, 1), 0.2498, 0.003),
        ("r43", (3, 2), 0.2494, 0.004),
        ("r31", (2, 0), 0.996, 0.03),
        ("r24", (1, 3), 0.992, 0.02),
        ("r75", (6, 4), 0.200, 0.003),
    ];
    let entries: Vec<(usize, usize)> = targets.iter().map(|t| t.1).collect();
    let report = svd_rate_report(&trace, &ex.nu, &entries).expect("rate report");
    let mut ok = true;
    let mut parts = Vec::new();
    for (name, entry, want, tol) in targets {
        let er = report.get(entry.0, entry.1).expect("entry fitted");
        let got = er.measured.rate();
        let pass = got.is_some_and(|r| (r - want).abs() <= tol);
        ok &= pass;
        let early = window_rate(&trace, entry, 8.0, 18.0);
        parts.push(format!(
            "{name} {} (want {want} +- {tol}, predicted {}, t in [8,18] fit {early:.4}){}",
            got.map_or("unmeasurable".to_string(), |r| format!("{r:.4}")),
            er.predicted.map_or("-".to_string(), |p| format!("{p:.4}")),
            if pass { "" } else { " MISS" }
        ));
    }
    let drift = trace.max_drift();
    let t = secs(clock);
    ok &= drift <= 1e-6 && t < 30.0;
    rep.record(5, ok, format!("{}; singular-value drift {drift:.1e}; {t:.3} s", parts.join("; ")));
}

// Criterion 6: double-bracket flow sorts random 6x6 matrices like N.
fn double_bracket(rep: &mut Report) {
    let clock = Instant::now();
    let n = 6;
    let nu = ramp(n);
    let mut sorted = 0;
    let mut worst_drift: f64 = 0.0;
    let mut worst_decrease: f64 = 0.0;
    let mut worst_off: f64 = 0.0;
    for seed in 0..20u64 {
        let h0 = random_symmetric(&mut seeded(1000 + seed), n);
        let lmax = sym_eigenvalues(&h0).amax();
        let mut opts = FlowOptions::new(1e5, 0.1 / (lmax * nu.amax()));
        opts.record_every = 10;
        opts.stop_speed = 1e-10 * lmax * lmax * nu.amax();
        let tr = double_bracket_flow(&h0, &nu, &opts).expect("flow runs");
        let h = &tr.last().state;
        let off = off_diagonal_norm(h) / h.norm();
        worst_off = worst_off.max(off);
        if off <= 1e-8 && similarly_ordered(&h.diagonal(), &nu) {
            sorted += 1;
        }
        worst_drift = worst_drift.max(tr.max_drift());
        worst_decrease = worst_decrease.max(tr.max_objective_decrease());
    }
    let t = secs(clock);
    rep.record(
        6,
        sorted == 20 && worst_drift <= 1e-6 && worst_decrease <= 1e-12,
        format!(
            "{sorted}/20 runs diagonal (worst relative off-diagonal {worst_off:.1e}) and ordered like N; eigenvalue drift {worst_drift:.1e}; largest decrease of tr HN {worst_decrease:.1e}; {t:.3} s"
        ),
    );
}

fn run_track(name: &str, reset: bool, jitter: bool) -> TrackResult {
    let scenario = scenario_by_name(name, 100).expect("scenario");
    let mut cfg = TrackerConfig::new(DVector::from_vec(vec![3.0, 2.0, 1.0]));
    cfg.reset_on_step = reset;
    cfg.jitter_seed = jitter.then_some(5);
    let p0 = near_frame(100, 3, 1e-6, 0).expect("start frame");
    track(&scenario, &cfg, Some(p0), 0).expect("tracking runs")
}

// Criterion 7: subspace tracking through the three step changes.
fn tracking(rep: &mut Report) {
    let clock = Instant::now();
    let show = |o: Option<usize>| o.map_or("never".to_string(), |i| i.to_string());

    let reset = run_track("first", true, false);
    let plain = run_track("first", false, false);
    let hit1 = reset.first_within(41, &[100.0, 99.0, 98.0], 1e-2);
    let ok1 = hit1.is_some_and(|i| i <= 50);
    let (g_reset, g_plain) = (reset.gap_at(80).unwrap(), plain.gap_at(80).unwrap());
    let tie = 1e-12 * reset.records[80].rho_hat.abs();
    let ok_dom = g_plain + tie >= g_reset;

    let second = run_track("second", true, false);
    let hit2 = second.first_within(41, &[103.0, 102.0, 101.0], 1e-2);
    let ok2 = hit2.is_some_and(|i| i <= 55);

    let third = run_track("third", true, true);
    let escape = third.records.iter().find(|r| r.i > 40 && r.gap < 1e-3).map(|r| r.i);
    let ok3 = escape.is_some_and(|i| i <= 80);
    let leave = third.records.iter().find(|r| r.i > 40 && r.gap < 0.99 * third.records[41].gap).map(|r| r.i);

    let orth = [&reset, &plain, &second, &third]
        .iter()
        .flat_map(|r| r.records.iter().map(|x| x.orthonormality))
        .fold(0.0, f64::max);
    let t = secs(clock);
    rep.record(
        7,
        ok1 && ok_dom && ok2 && ok3 && t < 20.0,
        format!(
            "first: recovered at {} (need <= 50){}; gap at 80 reset {g_reset:.1e} vs no reset {g_plain:.1e}{}; second: recovered at {} (need <= 55){}; third: leaves saddle at {}, gap < 1e-3 at {} (need <= 80, gap at 80 {:.1e}){}; orthonormality {orth:.1e}; {t:.3} s",
            show(hit1),
            if ok1 { "" } else { " MISS" },
            if ok_dom { "" } else { " MISS" },
            show(hit2),
            if ok2 { "" } else { " MISS" },
            show(leave),
            show(escape),
            third.gap_at(80).unwrap(),
            if ok3 { "" } else { " MISS" },
        ),
    );
}

// Criterion 8: fixed-seed sweep of the invariants also covered by the
// randomized property suite.
fn invariants(rep: &mut Report) {
    let clock = Instant::now();
    let mut grad_err: f64 = 0.0;
    let mut iso_err: f64 = 0.0;
    let mut sym_err: f64 = 0.0;
    let mut taylor_min = f64::INFINITY;
    let mut exp_err: f64 = 0.0;
    let mut rate_err: f64 = 0.0;
    let mut ls_err: f64 = 0.0;
    for seed in 0..20u64 {
        let mut rng = seeded(5000 + seed);
        let n = 4 + (seed % 5) as usize;
        let k = 1 + (seed % 3) as usize;
        let q = random_symmetric(&mut rng, n);
        let st = Stiefel::new(n, k);
        let nu = DVector::from_fn(k, |i, _| (k - i) as f64 + 0.5);
        let f = GenRayleigh::new(AOp::dense(q.clone()).unwrap(), nu).unwrap();
        let p: StiefelPoint = st.random_point(&mut rng);
        let z = st.random_tangent(&mut rng, &p);
        let z = st.scale(1.0 / st.norm(&p, &z), &z);
        let y = st.random_tangent(&mut rng, &p);

        let g = f.gradient(&p).unwrap();
        let an = st.inner(&p, &g, &z);
        let fd = fd_slope(&st, &f, &p, &z, 1e-4).unwrap();
        grad_err = grad_err.max((an - fd).abs() / fd.abs().max(st.norm(&p, &g)));

        let s = Sphere::new(n);
        let x: DVector<f64> = s.random_point(&mut rng);
        let h = s.random_tangent(&mut rng, &x).normalize();
        let u = s.random_tangent(&mut rng, &x);
        let tu = s.transport(&x, &h, 1.3, &u).unwrap().unwrap();
        iso_err = iso_err.max((tu.norm() - u.norm()).abs() / u.norm());
        let (pq, v) = stiefel_exp_transport(&p, &z, 1.3).unwrap();
        iso_err = iso_err.max((st.norm(&pq, &v) - 1.0).abs());

        let (a, b) = (f.hess(&p, &z, &y).unwrap(), f.hess(&p, &y, &z).unwrap());
        sym_err = sym_err.max((a - b).abs() / (1.0 + q.norm() * st.norm(&p, &y)));

        let f0 = f.value(&p).unwrap();
        let d2 = f.hess(&p, &z, &z).unwrap();
        let rem = |t: f64| f.value(&st.exp(&p, &z, t).unwrap()).unwrap() - f0 - t * an - 0.5 * t * t * d2;
        let ts = [0.02, 0.01, 0.005, 0.0025, 0.00125];
        for sign in [-1.0, 1.0] {
            let part: Vec<f64> = ts.iter().map(|&t| 0.5 * (rem(t) + sign * rem(-t))).collect();
            if part.iter().all(|v| v.abs() > 1e-11 * (1.0 + f0.abs())) {
                let pts: Vec<(f64, f64)> = ts.iter().zip(&part).map(|(t, v)| (t.ln(), v.abs().ln())).collect();
                taylor_min = taylor_min.min(slope(&pts));
            }
        }

        let got = stiefel_exp(&p, &z, 0.9).unwrap();
        let full = p.coset().matrix() * (z.full() * 0.9).exp();
        exp_err = exp_err.max((got.frame() - full.columns(0, k)).amax());

        let (si, sj, ni, nj) = (1.0 + seed as f64, 0.5 + seed as f64 * 0.3, 3.0, 1.5);
        let (a1, b1) = eig2(&svd_rate_r1(si, ni, sj, nj, 7, 5));
        let (a2, b2) = eig2(&svd_rate_r2(si, ni, sj, nj, 7, 5));
        rate_err = rate_err.max((a1 - a2).abs().max((b1 - b2).abs()) / (1.0 + a1.abs().max(b1.abs())));

        if let ExactStep::Step { c, s: sn } =
            sphere_rayleigh_exact_step(x.dot(&(&q * &x)), h.dot(&(&q * &h)), x.dot(&(&q * &h)))
        {
            let xp = &x * c + &h * sn;
            let th = -&x * sn + &h * c;
            let qx = &q * &xp;
            let gp = (&qx - &xp * xp.dot(&qx)) * 2.0;
            ls_err = ls_err.max(gp.dot(&th).abs() / q.norm());
        }
        let _ = RayleighQ::new(q.clone()).unwrap();
    }
    let ok = grad_err <= 1e-5
        && iso_err <= 1e-10
        && sym_err <= 1e-9
        && taylor_min >= 2.8
        && exp_err <= 1e-10
        && rate_err <= 1e-10
        && ls_err <= 1e-9;
    let t = secs(clock);
    rep.record(
        8,
        ok,
        format!(
            "gradient/FD {grad_err:.1e}; transport isometry {iso_err:.1e}; hess symmetry {sym_err:.1e}; Taylor slope {taylor_min:.2}; exp vs full exponential {exp_err:.1e}; R1/R2 eigenvalues {rate_err:.1e}; exact-step orthogonality {ls_err:.1e}; {t:.3} s"
        ),
    );
}

fn time_exp(n: usize, k: usize) -> f64 {
    let m = Stiefel::new(n, k);
    let mut rng = seeded(9);
    let p: StiefelPoint = m.random_point(&mut rng);
    let x = m.random_tangent(&mut rng, &p);
    let reps = 40;
    let mut best = f64::INFINITY;
    for _ in 0..5 {
        let t0 = Instant::now();
        for _ in 0..reps {
            std::hint::black_box(stiefel_exp(&p, &x, 1.0).unwrap());
        }
        best = best.min(t0.elapsed().as_secs_f64() / reps as f64);
    }
    best
}

// Criterion 9 (soft): geodesic cost scaling in n and k.
fn cost_scaling(rep: &mut Report) {
    let t128 = time_exp(128, 4);
    let t512 = time_exp(512, 4);
    let t512k8 = time_exp(512, 8);
    let rn = t512 / t128;
    let rk = t512k8 / t512;
    rep.soft(
        9,
        (2.5..=6.0).contains(&rn) && (2.5..=10.0).contains(&rk),
        format!("stiefel_exp time ratio n 512/128 at k = 4: {rn:.2} (want 2.5..6); k 8/4 at n = 512: {rk:.2} (want 2.5..10)"),
    );
}

fn main() {
    let mut rep = Report { hard_failures: 0 };
    sphere_cg(&mut rep);
    newton_order(&mut rep);
    so_newton(&mut rep);
    stiefel_cg(&mut rep);
    svd_rates(&mut rep);
    double_bracket(&mut rep);
    tracking(&mut rep);
    invariants(&mut rep);
    cost_scaling(&mut rep);
    if rep.hard_failures > 0 {
        println!("{} hard criteria failed", rep.hard_failures);
        std::process::exit(1);
    }
    println!("all hard criteria passed");
}
