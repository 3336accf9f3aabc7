//! `riemann-opt {eig|flow|track|bench} [--config FILE] [--out FILE] [flags...]`
//!
//! Exit codes: 0 success, 1 usage error, 2 numerical failure.

mod commands;
mod config;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::commands::RunError;
use crate::config::Config;

#[derive(Parser, Debug)]
#[command(name = "riemann-opt", version, about = "Geodesic eigensolvers, matrix flows and subspace tracking")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args, Debug)]
struct Common {
    /// Flat `key = value` file; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// CSV destination (stdout when absent).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Extreme eigenpairs by geodesic optimization.
    Eig(EigArgs),
    /// Integrate a matrix gradient flow.
    Flow(FlowArgs),
    /// Track a principal subspace through a step change.
    Track(TrackArgs),
    /// Time the Stiefel geodesic over an n or k grid.
    Bench(BenchArgs),
}

#[derive(Args, Debug)]
struct EigArgs {
    #[command(flatten)]
    common: Common,
    /// sphere | so | stiefel
    #[arg(long)]
    manifold: Option<String>,
    /// cg | sd | newton | rqi (sphere); newton | sd | cg (so); cg (stiefel)
    #[arg(long)]
    method: Option<String>,
    /// Eigenvalues of A: `a..b`, `diag:v1,...` or `file:<path>`
    #[arg(long)]
    spectrum: Option<String>,
    /// Diagonal of N, same grammar
    #[arg(long)]
    weights: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    max_iters: Option<String>,
    /// Relative gradient tolerance
    #[arg(long)]
    tol: Option<String>,
    /// Start a distance `warm-scale` from the optimum
    #[arg(long)]
    warm: bool,
    #[arg(long)]
    warm_scale: Option<String>,
    /// Conjugate A by a seeded random rotation
    #[arg(long)]
    rotate: bool,
    /// Independent repetitions with seeds seed, seed+1, ...
    #[arg(long)]
    reps: Option<String>,
}

#[derive(Args, Debug)]
struct FlowArgs {
    #[command(flatten)]
    common: Common,
    /// svd | double-bracket | so | genray
    #[arg(long)]
    system: Option<String>,
    #[arg(long)]
    t_end: Option<String>,
    /// Step size or `auto`
    #[arg(long)]
    dt: Option<String>,
    #[arg(long)]
    record_every: Option<String>,
    #[arg(long)]
    stop_speed: Option<String>,
    #[arg(long)]
    spectrum: Option<String>,
    #[arg(long)]
    weights: Option<String>,
    /// Matrix size for random double-bracket/so initial data
    #[arg(long)]
    n: Option<String>,
    /// Row count of K for a custom SVD-flow spectrum
    #[arg(long)]
    rows: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    /// Also write the rate table as CSV here
    #[arg(long)]
    rates: Option<String>,
}

#[derive(Args, Debug)]
struct TrackArgs {
    #[command(flatten)]
    common: Common,
    /// first | second | third
    #[arg(long)]
    scenario: Option<String>,
    #[arg(long)]
    n: Option<String>,
    #[arg(long)]
    weights: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    /// random | near
    #[arg(long)]
    start: Option<String>,
    #[arg(long)]
    start_scale: Option<String>,
    #[arg(long)]
    reset_on_step: bool,
    #[arg(long)]
    reset_on_jump: bool,
    #[arg(long)]
    jump_threshold: Option<String>,
    /// Seeded saddle-escape jitter
    #[arg(long)]
    jitter: bool,
    #[arg(long)]
    jitter_seed: Option<String>,
    #[arg(long)]
    steps_per_sample: Option<String>,
}

#[derive(Args, Debug)]
struct BenchArgs {
    #[command(flatten)]
    common: Common,
    /// n | k
    #[arg(long)]
    grid: Option<String>,
    #[arg(long)]
    ns: Option<String>,
    #[arg(long)]
    k: Option<String>,
    #[arg(long)]
    ks: Option<String>,
    #[arg(long)]
    n: Option<String>,
    #[arg(long)]
    reps: Option<String>,
    #[arg(long)]
    seed: Option<String>,
}

type Overrides = Vec<(&'static str, Option<String>)>;

fn on(b: bool) -> Option<String> {
    b.then(|| "true".to_string())
}

impl EigArgs {
    fn overrides(&self) -> Overrides {
        vec![
            ("manifold", self.manifold.clone()),
            ("method", self.method.clone()),
            ("spectrum", self.spectrum.clone()),
            ("weights", self.weights.clone()),
            ("seed", self.seed.clone()),
            ("max-iters", self.max_iters.clone()),
            ("tol", self.tol.clone()),
            ("warm", on(self.warm)),
            ("warm-scale", self.warm_scale.clone()),
            ("rotate", on(self.rotate)),
            ("reps", self.reps.clone()),
        ]
    }
}

impl FlowArgs {
    fn overrides(&self) -> Overrides {
        vec![
            ("system", self.system.clone()),
            ("t-end", self.t_end.clone()),
            ("dt", self.dt.clone()),
            ("record-every", self.record_every.clone()),
            ("stop-speed", self.stop_speed.clone()),
            ("spectrum", self.spectrum.clone()),
            ("weights", self.weights.clone()),
            ("n", self.n.clone()),
            ("rows", self.rows.clone()),
            ("seed", self.seed.clone()),
            ("rates", self.rates.clone()),
        ]
    }
}

impl TrackArgs {
    fn overrides(&self) -> Overrides {
        vec![
            ("scenario", self.scenario.clone()),
            ("n", self.n.clone()),
            ("weights", self.weights.clone()),
            ("seed", self.seed.clone()),
            ("start", self.start.clone()),
            ("start-scale", self.start_scale.clone()),
            ("reset-on-step", on(self.reset_on_step)),
            ("reset-on-jump", on(self.reset_on_jump)),
            ("jump-threshold", self.jump_threshold.clone()),
            ("jitter", on(self.jitter)),
            ("jitter-seed", self.jitter_seed.clone()),
            ("steps-per-sample", self.steps_per_sample.clone()),
        ]
    }
}

impl BenchArgs {
    fn overrides(&self) -> Overrides {
        vec![
            ("grid", self.grid.clone()),
            ("ns", self.ns.clone()),
            ("k", self.k.clone()),
            ("ks", self.ks.clone()),
            ("n", self.n.clone()),
            ("reps", self.reps.clone()),
            ("seed", self.seed.clone()),
        ]
    }
}

fn resolve(mut cfg: Config, common: &Common, overrides: Overrides) -> Result<Config, RunError> {
    if let Some(path) = &common.config {
        cfg.merge_file(path)?;
    }
    for (k, v) in overrides {
        if let Some(v) = v {
            cfg.set(k, &v)?;
        }
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), RunError> {
    let (common, cfg) = match &cli.cmd {
        Cmd::Eig(a) => (&a.common, resolve(commands::eig_defaults(), &a.common, a.overrides())?),
        Cmd::Flow(a) => (&a.common, resolve(commands::flow_defaults(), &a.common, a.overrides())?),
        Cmd::Track(a) => (&a.common, resolve(commands::track_defaults(), &a.common, a.overrides())?),
        Cmd::Bench(a) => (&a.common, resolve(commands::bench_defaults(), &a.common, a.overrides())?),
    };
    let output = match &cli.cmd {
        Cmd::Eig(_) => commands::cmd_eig(&cfg)?,
        Cmd::Flow(_) => commands::cmd_flow(&cfg)?,
        Cmd::Track(_) => commands::cmd_track(&cfg)?,
        Cmd::Bench(_) => commands::cmd_bench(&cfg)?,
    };
    let text = format!("{}{}", cfg.header(), output.csv);
    match &common.out {
        Some(path) => std::fs::write(path, text).map_err(|e| RunError::Io(format!("{}: {e}", path.display())))?,
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| RunError::Io(e.to_string()))?,
    }
    eprint!("{}", output.summary);
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("riemann-opt: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
