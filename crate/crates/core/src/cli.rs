//! Command-line front end. Every command writes `<command>.json` (the
//! summary, deterministic for a fixed configuration), `<command>.meta.json`
//! (timing and environment) and CSV fields into the output directory.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::{Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{parse_config, RunConfig};
use crate::eigen::{first_eigenpair, EigenPair};
use crate::existence::{
    eta_bar_bound, negative_solutions, newton_cross_check, scaled_box, solve_in_box, super_inequality, existence_run,
    verify_ordered_box, BoxSolution, BoxVerification, HypothesisReport, IterationSettings, Nonlinearity, OrderedBox,
    SamplePlan, ExistenceSettings,
};
use crate::exponents::ExponentField;
use crate::expr::Expr;
use crate::mesh::{GridFunction, Mesh};
use crate::modular::{check_norm_modular, gradient_modular, luxemburg_norm, sobolev_norm};
use crate::multiplicity::{
    annulus_search, boundedness_probe, continuation, nonexistence_probe, triviality_probe, Family, Homotopy,
    HomotopyConfig, NonexistenceConfig, Seed,
};
use crate::newton::NewtonSettings;
use crate::operator::{comparison_check, dirichlet_solve, mean_value_constant, picone, OperatorContext, PiconeMode};
use crate::Error;

pub const SCHEMA: u32 = 1;

pub const EXIT_OK: i32 = 0;
pub const EXIT_VERIFICATION: i32 = 1;
pub const EXIT_NONCONVERGENCE: i32 = 2;
pub const EXIT_CONFIG: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "pxlap", version, about = "Variable-exponent p(x)-Laplacian toolkit")]
pub struct Cli {
    /// Run configuration; built-in defaults when omitted.
    #[arg(long, short, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides `output.dir`.
    #[arg(long, global = true)]
    pub output_dir: Option<PathBuf>,
    /// No summary on stdout.
    #[arg(long, short, global = true)]
    pub quiet: bool,
    /// Overrides `run.rng_seed`.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, Subcommand)]
pub enum Command {
    /// First eigenpair of both exponents.
    Eig,
    /// Modular and norms of `problem.u` under `problem.p1`.
    Norm,
    /// Dirichlet problem `−Δ_{p1} u = problem.rhs`.
    Solve,
    /// Constant-sign solutions from an ordered sub/supersolution box.
    Theorem1,
    /// Homotopy probes and the multistart search for further solutions.
    Theorem2,
    /// Multistart nonexistence probe of the forced scalar reference problem.
    #[command(name = "probe-L9")]
    ProbeL9,
    /// Randomized checks of the norm, Picone, mean-value, comparison and
    /// eigen routines.
    Verify,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Eig => "eig",
            Command::Norm => "norm",
            Command::Solve => "solve",
            Command::Theorem1 => "theorem1",
            Command::Theorem2 => "theorem2",
            Command::ProbeL9 => "probe-L9",
            Command::Verify => "verify",
        }
    }
}

/// Outcome of a command body: JSON result, CSV files and exit status.
struct Outcome {
    result: Value,
    csv: Vec<(String, String)>,
    exit: i32,
}

impl Outcome {
    fn new(result: Value, exit: i32) -> Self {
        Outcome {
            result,
            csv: Vec::new(),
            exit,
        }
    }
}

fn exit_for(e: &Error) -> i32 {
    match e {
        Error::Numerical(_) => EXIT_NONCONVERGENCE,
        Error::Hypothesis(_) | Error::Containment(_) => EXIT_VERIFICATION,
        Error::Domain(_) | Error::MeshMismatch | Error::InvalidInput(_) | Error::Parse { .. } => EXIT_CONFIG,
    }
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    if let Ok(n) = std::env::var("PXLAP_THREADS") {
        match n.parse::<usize>() {
            Ok(n) if n > 0 => {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
            _ => {
                eprintln!("PXLAP_THREADS must be a positive integer, got '{n}'");
                return EXIT_CONFIG;
            }
        }
    }
    run(&cli)
}

pub fn run(cli: &Cli) -> i32 {
    let mut cfg = match &cli.config {
        Some(path) => match parse_config(path) {
            Ok(c) => c,
            Err(e) => {
                eprintln!("{e}");
                return EXIT_CONFIG;
            }
        },
        None => RunConfig::default(),
    };
    if let Some(dir) = &cli.output_dir {
        cfg.output.dir = dir.display().to_string();
    }
    if let Some(seed) = cli.seed {
        cfg.rng_seed = seed;
    }
    let dir = PathBuf::from(&cfg.output.dir);
    if let Err(e) = fs::create_dir_all(&dir) {
        eprintln!("cannot create {}: {e}", dir.display());
        return EXIT_CONFIG;
    }
    let started = SystemTime::now();
    let clock = Instant::now();
    let outcome = execute(cli.command, &cfg);
    let (status, exit, result, error, csv) = match outcome {
        Ok(o) => (status_name(o.exit), o.exit, o.result, None, o.csv),
        Err(e) => ("error", exit_for(&e), Value::Null, Some(e.to_string()), Vec::new()),
    };
    let name = cli.command.name();
    let summary = json!({
        "schema": SCHEMA,
        "command": name,
        "status": status,
        "exit_code": exit,
        "error": error,
        "effective_config": cfg,
        "result": result,
    });
    let meta = json!({
        "schema": SCHEMA,
        "command": name,
        "version": env!("CARGO_PKG_VERSION"),
        "started_unix": started.duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0),
        "elapsed_seconds": clock.elapsed().as_secs_f64(),
        "threads": rayon::current_num_threads(),
    });
    let written = write_json(&dir.join(format!("{name}.json")), &summary)
        .and_then(|_| write_json(&dir.join(format!("{name}.meta.json")), &meta))
        .and_then(|_| {
            if cfg.output.csv {
                for (file, body) in &csv {
                    fs::write(dir.join(file), body)?;
                }
            }
            Ok(())
        });
    if let Err(e) = written {
        eprintln!("cannot write results to {}: {e}", dir.display());
        return EXIT_CONFIG;
    }
    if !cli.quiet {
        match &error {
            Some(msg) => eprintln!("{name}: {msg}"),
            None => println!("{name}: {status} ({})", dir.join(format!("{name}.json")).display()),
        }
    }
    exit
}

fn status_name(exit: i32) -> &'static str {
    match exit {
        EXIT_OK => "ok",
        EXIT_VERIFICATION => "verification-failed",
        EXIT_NONCONVERGENCE => "not-converged",
        _ => "error",
    }
}

fn write_json(path: &Path, v: &Value) -> std::io::Result<()> {
    let mut s = serde_json::to_string_pretty(v).map_err(std::io::Error::other)?;
    s.push('\n');
    fs::write(path, s)
}

fn execute(cmd: Command, cfg: &RunConfig) -> crate::Result<Outcome> {
    match cmd {
        Command::Eig => eig(cfg),
        Command::Norm => norm(cfg),
        Command::Solve => solve(cfg),
        Command::Theorem1 => run_theorem1(cfg),
        Command::Theorem2 => run_theorem2(cfg),
        Command::ProbeL9 => probe(cfg),
        Command::Verify => verify(cfg),
    }
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).unwrap_or(Value::Null)
}

/// Mesh and one operator context per exponent.
pub fn contexts(cfg: &RunConfig) -> crate::Result<(Arc<Mesh>, [OperatorContext; 2])> {
    let mesh = cfg.mesh.build()?;
    let newton = NewtonSettings {
        max_iterations: cfg.solver.max_iterations,
        tolerance: cfg.solver.tolerance,
        max_halvings: cfg.solver.max_halvings,
    };
    let make = |src: &str| -> crate::Result<OperatorContext> {
        OperatorContext::new(ExponentField::from_expr(src, &mesh)?)
            .with_regularization(cfg.solver.eps_reg)?
            .with_newton(newton)
    };
    let c = [make(&cfg.problem.p[0])?, make(&cfg.problem.p[1])?];
    Ok((mesh, c))
}

fn nonlinearity(cfg: &RunConfig) -> crate::Result<Nonlinearity> {
    Nonlinearity::from_exprs(&cfg.problem.f[0], &cfg.problem.f[1], cfg.problem.eta)
}

fn iteration(cfg: &RunConfig) -> IterationSettings {
    IterationSettings {
        max_outer: cfg.solver.outer_max,
        increment_tol: cfg.solver.outer_increment_tol,
        residual_tol: cfg.solver.outer_residual_tol,
    }
}

fn eig(cfg: &RunConfig) -> crate::Result<Outcome> {
    let (_, ctx) = contexts(cfg)?;
    let pairs = [first_eigenpair(&ctx[0])?, first_eigenpair(&ctx[1])?];
    let mut out = Outcome::new(
        json!({
            "lambda1": [pairs[0].lambda, pairs[1].lambda],
            "exponents": [ctx[0].p.describe(), ctx[1].p.describe()],
            "pairs": to_value(&pairs),
        }),
        EXIT_OK,
    );
    for (i, e) in pairs.iter().enumerate() {
        out.csv.push((format!("eig_phi{}.csv", i + 1), e.eigenfunction.to_csv()));
    }
    Ok(out)
}

fn norm(cfg: &RunConfig) -> crate::Result<Outcome> {
    let (mesh, ctx) = contexts(cfg)?;
    let e = Expr::parse(&cfg.problem.u, &["x", "y"])?;
    let u = GridFunction::from_fn(mesh.clone(), |x| e.eval(&x));
    let p = &ctx[0].p;
    let lux = luxemburg_norm(&u, p)?;
    let sobolev = if u.is_dirichlet_zero() { Some(sobolev_norm(&u, p)?) } else { None };
    let check = if lux.norm > 0.0 { Some(check_norm_modular(&u, p)?) } else { None };
    let pass = check.as_ref().is_none_or(|c| c.pass);
    Ok(Outcome::new(
        json!({
            "field": cfg.problem.u,
            "exponent": p.describe(),
            "luxemburg": to_value(&lux),
            "gradient_modular": gradient_modular(&u, p)?,
            "sobolev_norm": sobolev,
            "norm_modular_check": to_value(&check),
        }),
        if pass { EXIT_OK } else { EXIT_VERIFICATION },
    ))
}

fn solve(cfg: &RunConfig) -> crate::Result<Outcome> {
    let (mesh, ctx) = contexts(cfg)?;
    let e = Expr::parse(&cfg.problem.rhs, &["x", "y"])?;
    let rhs = move |x: [f64; 2]| e.eval(&x);
    let s = dirichlet_solve(&ctx[0], &rhs, &GridFunction::zeros(mesh))?;
    let mut out = Outcome::new(
        json!({ "rhs": cfg.problem.rhs, "exponent": ctx[0].p.describe(), "solve": to_value(&s), "max": s.solution.max() }),
        if s.converged { EXIT_OK } else { EXIT_NONCONVERGENCE },
    );
    out.csv.push(("solve_u.csv".into(), s.solution.to_csv()));
    Ok(out)
}

/// Everything the box-based commands need.
struct BoxRun {
    eigen: [EigenPair; 2],
    hypotheses: Option<HypothesisReport>,
    ordered_box: OrderedBox,
    verification: BoxVerification,
    positive: BoxSolution,
    negative: BoxSolution,
    result: Value,
}

fn box_run(cfg: &RunConfig, f: &Nonlinearity, ctx: [&OperatorContext; 2]) -> crate::Result<BoxRun> {
    let settings = ExistenceSettings {
        margin: cfg.solver.margin,
        plan: SamplePlan {
            sub_grid: cfg.solver.sub_grid,
            ..SamplePlan::default()
        },
        iteration: iteration(cfg),
        override_hypotheses: false,
    };
    if let Some(b) = &cfg.manual_box {
        let eigen = [first_eigenpair(ctx[0])?, first_eigenpair(ctx[1])?];
        let mut ordered_box = scaled_box(ctx, [&eigen[0], &eigen[1]], settings.margin, b.lower_scale, b.upper_scale)?;
        let p = [&ctx[0].p, &ctx[1].p];
        let verification = verify_ordered_box(&ordered_box, f, p, cfg.solver.sub_grid)?;
        ordered_box.verification = Some(verification.clone());
        let positive = solve_in_box(&ordered_box, f, ctx, &settings.iteration)?;
        let newton = newton_cross_check(&ordered_box, f, ctx, [&positive.solution[0], &positive.solution[1]])?;
        let (negative, negative_box) = negative_solutions(&ordered_box, f, ctx, &settings.iteration)?;
        let result = json!({
            "box": "manual",
            "eps_sub": ordered_box.eps_sub,
            "constants": to_value(&ordered_box.constants),
            "verification": to_value(&verification),
            "positive": to_value(&positive),
            "newton_cross_check": to_value(&newton),
            "negative": to_value(&negative),
            "negative_box": to_value(&negative_box),
        });
        return Ok(BoxRun {
            eigen,
            hypotheses: None,
            ordered_box,
            verification,
            positive,
            negative,
            result,
        });
    }
    let r = existence_run(f, ctx, &settings)?;
    let verification = r.ordered_box.verification.clone().expect("existence run verifies its box");
    let c = &r.ordered_box.constants;
    let certificate = json!({
        "eta_bar_below_bound": c.eta_bar <= eta_bar_bound(c),
        "eps_inequality": [super_inequality(c, 0, c.eps), super_inequality(c, 1, c.eps)],
        "ordered": verification.ordered,
    });
    let result = json!({
        "box": "constructed",
        "eigen": to_value(&r.eigen),
        "hypotheses": to_value(&r.hypotheses),
        "eps_sub": r.ordered_box.eps_sub,
        "rho_hat": r.ordered_box.rho_hat,
        "constants": to_value(c),
        "certificate": certificate,
        "verification": to_value(&verification),
        "positive": to_value(&r.positive),
        "newton_cross_check": to_value(&r.newton),
        "negative": to_value(&r.negative),
        "negative_box": to_value(&r.negative_box),
    });
    Ok(BoxRun {
        eigen: r.eigen,
        hypotheses: Some(r.hypotheses),
        ordered_box: r.ordered_box,
        verification,
        positive: r.positive,
        negative: r.negative,
        result,
    })
}

fn box_exit(b: &BoxRun) -> i32 {
    if !b.verification.pass || b.hypotheses.as_ref().is_some_and(|h| !h.pass) {
        EXIT_VERIFICATION
    } else if !b.positive.converged || !b.negative.converged {
        EXIT_NONCONVERGENCE
    } else {
        EXIT_OK
    }
}

fn box_csv(b: &BoxRun, prefix: &str) -> Vec<(String, String)> {
    let mut out = Vec::new();
    for i in 0..2 {
        let k = i + 1;
        out.push((format!("{prefix}_lower{k}.csv"), b.ordered_box.lower[i].to_csv()));
        out.push((format!("{prefix}_upper{k}.csv"), b.ordered_box.upper[i].to_csv()));
        out.push((format!("{prefix}_positive{k}.csv"), b.positive.solution[i].to_csv()));
        out.push((format!("{prefix}_negative{k}.csv"), b.negative.solution[i].to_csv()));
    }
    out
}

fn run_theorem1(cfg: &RunConfig) -> crate::Result<Outcome> {
    let (_, ctx) = contexts(cfg)?;
    let f = nonlinearity(cfg)?;
    let b = box_run(cfg, &f, [&ctx[0], &ctx[1]])?;
    let mut out = Outcome::new(b.result.clone(), box_exit(&b));
    out.csv = box_csv(&b, "theorem1");
    Ok(out)
}

fn homotopy_config(cfg: &RunConfig, eigen: [&EigenPair; 2], p: [&ExponentField; 2], family: Family) -> HomotopyConfig {
    let mut h = HomotopyConfig::new(family, eigen, p);
    for i in 0..2 {
        if let Some(j) = cfg.homotopy.j[i] {
            h.j[i] = j;
        }
    }
    h.delta = if family == Family::WithDelta { cfg.homotopy.delta } else { 0.0 };
    h.t_grid = cfg.homotopy.t_grid.clone();
    h.r = cfg.homotopy.r;
    h.r_tilde = cfg.homotopy.r_tilde;
    h.r_hat = cfg.homotopy.r_hat;
    h.seeds = cfg.homotopy.seeds;
    h.rng_seed = cfg.rng_seed;
    h
}

fn run_theorem2(cfg: &RunConfig) -> crate::Result<Outcome> {
    let (_, ctx) = contexts(cfg)?;
    let ctx = [&ctx[0], &ctx[1]];
    let p = [&ctx[0].p, &ctx[1].p];
    let f = nonlinearity(cfg)?;
    let b = box_run(cfg, &f, ctx)?;
    let eigen = [&b.eigen[0], &b.eigen[1]];
    let box_seed = Seed::new("box-solution", b.positive.solution.to_vec());

    let trivial_cfg = homotopy_config(cfg, eigen, p, Family::Tilde);
    let trivial_h = Homotopy::new(&trivial_cfg, &f, ctx, eigen)?;
    let trivial = triviality_probe(&trivial_h, cfg.homotopy.seeds, cfg.rng_seed, 1e-8)?;

    let hcfg = homotopy_config(cfg, eigen, p, cfg.homotopy.family);
    let h = Homotopy::new(&hcfg, &f, ctx, eigen)?;
    let trace = continuation(&h, std::slice::from_ref(&box_seed))?;
    let bounded = boundedness_probe(&trace, cfg.homotopy.r_tilde);

    let forced = probe_runs(cfg, ctx[0], eigen[0])?;
    let annulus = annulus_search(&hcfg, &f, ctx, eigen, &b.ordered_box, [&b.positive.solution[0], &b.positive.solution[1]])?;

    let flags = json!({
        "box_verified": b.verification.pass,
        "bounded": bounded.pass,
        "trivial_start": trivial.pass,
        "forced_start_without_solutions": forced.iter().all(|r| r.pass),
        "second_solution_found": annulus.second_solution_found,
    });
    let exit = if !b.verification.pass || !bounded.pass || !trivial.pass {
        EXIT_VERIFICATION
    } else {
        box_exit(&b)
    };
    let mut out = Outcome::new(
        json!({
            "homotopy": to_value(&hcfg),
            "box": b.result,
            "triviality": to_value(&trivial),
            "trace": to_value(&trace),
            "boundedness": to_value(&bounded),
            "forced_probe": to_value(&forced),
            "annulus": to_value(&annulus),
            "flags": flags,
        }),
        exit,
    );
    out.csv = box_csv(&b, "theorem2");
    let mut trace_csv = String::from("t,index,pair_norm,residual\n");
    for r in &trace.records {
        for (k, s) in r.solutions.iter().enumerate() {
            trace_csv.push_str(&format!("{},{k},{:e},{:e}\n", r.t, s.pair_norm, s.residual));
        }
    }
    out.csv.push(("theorem2_trace.csv".into(), trace_csv));
    for (k, s) in annulus.solutions.iter().enumerate() {
        for (i, u) in s.solution.iter().enumerate() {
            out.csv.push((format!("theorem2_solution{k}_u{}.csv", i + 1), u.to_csv()));
        }
    }
    Ok(out)
}

fn probe_runs(cfg: &RunConfig, ctx: &OperatorContext, eigen: &EigenPair) -> crate::Result<Vec<crate::multiplicity::NonexistenceReport>> {
    let j = cfg.probe.j.unwrap_or(0.5 * eigen.lambda * (ctx.p.p_minus() - 1.0));
    cfg.probe
        .deltas
        .iter()
        .map(|&delta| {
            let pc = NonexistenceConfig {
                j,
                delta,
                seeds: cfg.probe.seeds,
                rng_seed: cfg.rng_seed,
            };
            nonexistence_probe(&pc, ctx, eigen)
        })
        .collect()
}

fn probe(cfg: &RunConfig) -> crate::Result<Outcome> {
    let (_, ctx) = contexts(cfg)?;
    let eigen = first_eigenpair(&ctx[0])?;
    let reports = probe_runs(cfg, &ctx[0], &eigen)?;
    let applicable = reports.iter().all(|r| r.applicable);
    let pass = reports.iter().all(|r| r.pass);
    Ok(Outcome::new(
        json!({
            "exponent": ctx[0].p.describe(),
            "lambda1": eigen.lambda,
            "probes": to_value(&reports),
            "applicable": applicable,
            "pass": pass,
        }),
        if applicable && !pass { EXIT_VERIFICATION } else { EXIT_OK },
    ))
}

#[derive(Debug, Serialize)]
struct SuiteEntry {
    name: &'static str,
    cases: usize,
    failures: usize,
    /// Worst value of the quantity the check bounds.
    worst: f64,
    pass: bool,
}

fn random_interior(mesh: &Arc<Mesh>, rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> GridFunction {
    let mut u = GridFunction::zeros(mesh.clone());
    for &i in mesh.interior_nodes() {
        u.values_mut()[i] = rng.gen_range(lo..hi);
    }
    u
}

fn suite_entry(name: &'static str, outcomes: &[(bool, f64)], worst_is_max: bool) -> SuiteEntry {
    let failures = outcomes.iter().filter(|(ok, _)| !ok).count();
    let worst = outcomes.iter().map(|&(_, v)| v).fold(
        if worst_is_max { f64::NEG_INFINITY } else { f64::INFINITY },
        |a, b| if worst_is_max { a.max(b) } else { a.min(b) },
    );
    SuiteEntry {
        name,
        cases: outcomes.len(),
        failures,
        worst,
        pass: failures == 0,
    }
}

fn verify(cfg: &RunConfig) -> crate::Result<Outcome> {
    let (mesh, ctx) = contexts(cfg)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let p = &ctx[0].p;
    let mut suite = Vec::new();

    // norm-modular chains, worst relative slack
    let mut cases = Vec::new();
    for _ in 0..200 {
        let amp = 10f64.powf(rng.gen_range(-2.0..2.0));
        let u = random_interior(&mesh, &mut rng, -amp, amp);
        let c = check_norm_modular(&u, p)?;
        cases.push((c.pass, c.lower_slack.min(c.upper_slack)));
    }
    suite.push(suite_entry("norm-modular", &cases, false));

    // Picone, worst relative gap
    let mut cases = Vec::new();
    for _ in 0..50 {
        let w1 = GridFunction::new(mesh.clone(), (0..mesh.node_count()).map(|_| rng.gen_range(0.0..3.0)).collect())?;
        let w2 = GridFunction::new(mesh.clone(), (0..mesh.node_count()).map(|_| rng.gen_range(0.05..3.0)).collect())?;
        let fields = picone(&w1, &w2, p, PiconeMode::Frozen)?;
        let top = fields.scale.iter().fold(1.0f64, |a, b| a.max(*b));
        let gap = fields.max_relative_gap();
        cases.push((gap <= 1e-8 && fields.min_l1() >= -1e-10 * top, gap));
    }
    suite.push(suite_entry("picone", &cases, true));

    // mean value, distance of k̂ inside (m, M)
    let phi = first_eigenpair(&ctx[0])?;
    let mut cases = Vec::new();
    for _ in 0..20 {
        let (a, b, w) = (rng.gen_range(1.0..2.0), rng.gen_range(-0.5..0.5), rng.gen_range(1.0..6.0));
        let k = move |x: [f64; 2]| a + b * (w * x[0]).sin();
        let (m, big) = (a - b.abs() - 0.01, a + b.abs() + 0.01);
        let h0 = rng.gen_range(0.5..2.0);
        let h = move |x: [f64; 2]| h0 + x[0] * x[0];
        let r = mean_value_constant(&ctx[0], &k, (m, big), &h, &phi.eigenfunction)?;
        cases.push((r.within_bounds, (r.k_hat - m).min(big - r.k_hat)));
    }
    suite.push(suite_entry("mean-value", &cases, false));

    // comparison, worst max(u₁ − u₂)
    let mut cases = Vec::new();
    for _ in 0..10 {
        let (c1, c2) = (rng.gen_range(-1.0..1.0), rng.gen_range(0.0..1.0));
        let h1 = move |x: [f64; 2]| c1 + (3.0 * x[0]).sin();
        let h2 = move |x: [f64; 2]| c1 + c2 + (3.0 * x[0]).sin() + x[0] * x[0];
        let r = comparison_check(&ctx[0], &h1, &h2)?;
        cases.push((r.pass, r.max_difference));
    }
    suite.push(suite_entry("comparison", &cases, true));

    // eigen residual and positivity
    let interior_positive = mesh.interior_nodes().iter().all(|&i| phi.eigenfunction.values()[i] > 0.0);
    suite.push(SuiteEntry {
        name: "eigen",
        cases: 1,
        failures: usize::from(!(interior_positive && (phi.consistent || !p.is_constant()))),
        worst: phi.residual,
        pass: interior_positive && (phi.consistent || !p.is_constant()),
    });

    let pass = suite.iter().all(|s| s.pass);
    Ok(Outcome::new(
        json!({ "exponent": p.describe(), "lambda1": phi.lambda, "checks": to_value(&suite), "pass": pass }),
        if pass { EXIT_OK } else { EXIT_VERIFICATION },
    ))
}
