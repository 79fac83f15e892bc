//! Acceptance suite. Each test prints one `criterion N: PASS|FAIL` line and
//! then asserts, so a failing criterion still reports its measurements.

use std::f64::consts::PI;
use std::io::Write;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use pxlap::eigen::first_eigenpair;
use pxlap::existence::{
    eta_bar_bound, scaled_box, solve_in_box, existence_run, verify_ordered_box, IterationSettings, Nonlinearity,
    ExistenceReport, ExistenceSettings,
};
use pxlap::exponents::ExponentField;
use pxlap::mesh::{build_interval_mesh, build_rectangle_mesh, GridFunction, Mesh};
use pxlap::modular::{check_norm_modular, sobolev_norm};
use pxlap::multiplicity::{
    annulus_radii, annulus_search_from, annulus_seeds, boundedness_probe, continuation, nonexistence_probe, summarize,
    triviality_probe, Family, FoundSolution, Homotopy, HomotopyConfig, NonexistenceConfig, Seed,
};
use pxlap::newton::NewtonProblem;
use pxlap::operator::{
    assemble_jacobian, assemble_residual, comparison_check, mean_value_constant, picone, weak_residual,
    OperatorContext, PiconeMode, Sampled, StateFn, System,
};

fn report(n: u32, pass: bool, detail: String) {
    // written past the test harness capture so every verdict shows in the log
    let line = format!("criterion {n}: {} | {detail}\n", if pass { "PASS" } else { "FAIL" });
    std::io::stdout().write_all(line.as_bytes()).unwrap();
    assert!(pass, "criterion {n} failed: {detail}");
}

fn interval(n: usize) -> Arc<Mesh> {
    Arc::new(build_interval_mesh(0.0, 1.0, n).unwrap())
}

fn ctx_on(mesh: &Arc<Mesh>, p: &str) -> OperatorContext {
    OperatorContext::new(ExponentField::from_expr(p, mesh).unwrap())
}

fn pair_distance(a: &[GridFunction], b: &[GridFunction], p: [&ExponentField; 2]) -> f64 {
    (0..2)
        .map(|i| {
            let d: Vec<f64> = a[i].values().iter().zip(b[i].values()).map(|(x, y)| x - y).collect();
            sobolev_norm(&GridFunction::new(a[i].mesh().clone(), d).unwrap(), p[i]).unwrap()
        })
        .sum()
}

/// First Dirichlet eigenvalue of the 1D p-Laplacian on (0, 1) by shooting:
/// `u' = |v|^{1/(p−1)} sign v`, `v' = −λ|u|^{p−2}u` from `u = 0, v = 1`,
/// bisecting on λ until the first zero of `u` sits at `x = 1`.
fn shooting_eigenvalue(p: f64) -> f64 {
    let first_zero = |lambda: f64| -> f64 {
        let rhs = |s: [f64; 2]| {
            let (u, v) = (s[0], s[1]);
            [v.abs().powf(1.0 / (p - 1.0)) * v.signum(), -lambda * u.abs().powf(p - 2.0) * u]
        };
        let h = 1e-4;
        let mut s = [0.0, 1.0];
        let mut x = 0.0;
        while x < 3.0 {
            let k1 = rhs(s);
            let k2 = rhs([s[0] + 0.5 * h * k1[0], s[1] + 0.5 * h * k1[1]]);
            let k3 = rhs([s[0] + 0.5 * h * k2[0], s[1] + 0.5 * h * k2[1]]);
            let k4 = rhs([s[0] + h * k3[0], s[1] + h * k3[1]]);
            let next = [
                s[0] + h / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
                s[1] + h / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
            ];
            if x > h && next[0] <= 0.0 {
                return x + h * s[0] / (s[0] - next[0]);
            }
            s = next;
            x += h;
        }
        f64::INFINITY
    };
    let (mut lo, mut hi) = (1.0, 200.0);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if first_zero(mid) > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[test]
fn criterion_01_eigenvalues() {
    let mut lines = Vec::new();
    let mut pass = true;
    let cases: Vec<(&str, Arc<Mesh>, f64, f64)> = vec![
        ("2", interval(256), PI * PI, 0.01),
        ("3", interval(512), shooting_eigenvalue(3.0), 0.02),
        ("2", Arc::new(build_rectangle_mesh(0.0, 0.0, 1.0, 1.0, 16, 16).unwrap()), 2.0 * PI * PI, 0.03),
    ];
    for (p, mesh, expected, tol) in cases {
        let start = Instant::now();
        let e = first_eigenpair(&ctx_on(&mesh, p)).unwrap();
        let elapsed = start.elapsed();
        let rel = (e.lambda - expected).abs() / expected;
        let ok = rel <= tol && elapsed < Duration::from_secs(30);
        pass &= ok;
        lines.push(format!("p={p} d={} λ={:.6} ref={expected:.6} rel={rel:.2e} t={:.2}s", mesh.dimension(), e.lambda, elapsed.as_secs_f64()));
    }
    report(1, pass, lines.join("; "));
}

#[test]
fn criterion_02_norm_modular() {
    let mesh = interval(64);
    let p = ExponentField::from_expr("2 + x", &mesh).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let start = Instant::now();
    let (mut worst_slack, mut worst_unit) = (f64::INFINITY, 0.0f64);
    let mut failures = 0;
    for _ in 0..1000 {
        let amp = 10f64.powf(rng.gen_range(-3.0..3.0));
        let values = (0..mesh.node_count()).map(|_| rng.gen_range(-amp..amp)).collect();
        let u = GridFunction::new(mesh.clone(), values).unwrap();
        let c = check_norm_modular(&u, &p).unwrap();
        worst_slack = worst_slack.min(c.lower_slack).min(c.upper_slack);
        worst_unit = worst_unit.max(c.unit_residual);
        failures += usize::from(!c.pass);
    }
    let elapsed = start.elapsed();
    let pass = failures == 0 && worst_slack >= -1e-12 && worst_unit <= 1e-10 && elapsed < Duration::from_secs(10);
    report(
        2,
        pass,
        format!("1000 fields, worst chain slack {worst_slack:.2e}, worst unit residual {worst_unit:.2e}, t={:.2}s", elapsed.as_secs_f64()),
    );
}

#[test]
fn criterion_03_picone() {
    let mesh = interval(32);
    let p = ExponentField::from_expr("2 + x", &mesh).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (mut worst_gap, mut worst_l1) = (0.0f64, f64::INFINITY);
    for _ in 0..100 {
        let w1 = GridFunction::new(mesh.clone(), (0..mesh.node_count()).map(|_| rng.gen_range(0.0..3.0)).collect()).unwrap();
        let w2 = GridFunction::new(mesh.clone(), (0..mesh.node_count()).map(|_| rng.gen_range(0.05..3.0)).collect()).unwrap();
        let f = picone(&w1, &w2, &p, PiconeMode::Frozen).unwrap();
        worst_gap = worst_gap.max(f.max_relative_gap());
        // L₁ relative to the size of its own terms at each point
        for (l1, s) in f.l1.iter().zip(&f.scale) {
            worst_l1 = worst_l1.min(l1 / s.max(1.0));
        }
    }
    report(
        3,
        worst_gap <= 1e-8 && worst_l1 >= -1e-10,
        format!("100 pairs, max relative |L1-L2| {worst_gap:.2e}, min scaled L1 {worst_l1:.2e}"),
    );
}

#[test]
fn criterion_04_mean_value() {
    let mesh = interval(64);
    let c = ctx_on(&mesh, "2 + x");
    let phi = first_eigenpair(&c).unwrap().eigenfunction;
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut inside = 0;
    let mut closest = f64::INFINITY;
    for _ in 0..100 {
        let (m, big) = (rng.gen_range(0.5..1.5), rng.gen_range(2.0..4.0));
        let (a, w, ph) = (rng.gen_range(0.0..1.0), rng.gen_range(1.0..8.0), rng.gen_range(0.0..6.0));
        let k = move |x: [f64; 2]| m + (big - m) * (0.01 + 0.98 * (a * (w * x[0] + ph).sin().powi(2) + (1.0 - a) * x[0]));
        let h0 = rng.gen_range(0.1..3.0);
        let h = move |x: [f64; 2]| h0 + (5.0 * x[0]).cos().powi(2);
        let r = mean_value_constant(&c, &k, (m, big), &h, &phi).unwrap();
        inside += usize::from(r.within_bounds);
        closest = closest.min((r.k_hat - m).min(big - r.k_hat));
    }
    let k0 = 2.75;
    let r = mean_value_constant(&c, &|_: [f64; 2]| k0, (1.0, 4.0), &|_: [f64; 2]| 1.0, &phi).unwrap();
    let constant_error = (r.k_hat - k0).abs();
    report(
        4,
        inside == 100 && constant_error <= 1e-12,
        format!("{inside}/100 strictly inside, closest approach {closest:.3e}, constant k error {constant_error:.1e}"),
    );
}

#[test]
fn criterion_05_comparison() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mesh = interval(128);
    let mut worst = f64::NEG_INFINITY;
    let mut failures = 0;
    for p in ["2", "3", "2 + x"] {
        let c = ctx_on(&mesh, p);
        let count = if p == "2 + x" { 16 } else { 17 };
        for _ in 0..count {
            let (a, b, w) = (rng.gen_range(-2.0..2.0), rng.gen_range(0.0..2.0), rng.gen_range(1.0..10.0));
            let gap = rng.gen_range(0.0..1.0);
            let h1 = move |x: [f64; 2]| a + b * (w * x[0]).sin();
            let h2 = move |x: [f64; 2]| a + b * (w * x[0]).sin() + gap * x[0] * (1.0 - x[0]);
            let r = comparison_check(&c, &h1, &h2).unwrap();
            worst = worst.max(r.max_difference);
            failures += usize::from(!r.pass);
        }
    }
    report(5, failures == 0 && worst <= 1e-8, format!("50 pairs over p = 2, 3, 2+x, worst max(u1 - u2) = {worst:.2e}"));
}

fn benchmark_run(n: usize) -> (Arc<Mesh>, OperatorContext, Nonlinearity, ExistenceReport) {
    let mesh = interval(n);
    let c = ctx_on(&mesh, "2");
    let f = Nonlinearity::benchmark([20.0, 20.0], [2.0, 2.0]);
    let r = existence_run(&f, [&c, &c], &ExistenceSettings::default()).unwrap();
    (mesh, c, f, r)
}

#[test]
fn criterion_06_existence_pipeline() {
    let start = Instant::now();
    let (mesh, c, f, r) = benchmark_run(256);
    let elapsed = start.elapsed();
    let k = &r.ordered_box.constants;
    let mut checks = Vec::new();

    // η̄ against the bound recomputed from its ingredients
    let bound = (0..2)
        .map(|i| 0.5 * k.lambda_tilde[i] * k.tau[i].powf(k.p_plus[i] - 1.0) / k.phi_tilde_max[i].powf(k.p_minus[i] - 1.0))
        .fold(f64::INFINITY, f64::min);
    checks.push(("eta_bar", k.eta_bar > 0.0 && k.eta_bar <= bound && (bound - eta_bar_bound(k)).abs() <= 1e-12 * bound));

    // ε inequality
    let eps_ok = (0..2).all(|i| k.eps.powf(-(k.p_minus[i] - 1.0)) * 0.5 * k.lambda_tilde[i] * k.tau[i].powf(k.p_plus[i] - 1.0) >= k.c_rho);
    checks.push(("eps", eps_ok));

    // |f| ≤ η̄|s|^{p⁻−1} beyond ρ and |f| ≤ c_ρ inside, on fresh random samples
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let (mut beyond, mut within) = (true, true);
    for _ in 0..20_000 {
        let x = [rng.gen_range(0.0..1.0), 0.0];
        let i = rng.gen_range(0..2);
        let sj = rng.gen_range(-1e4..1e4);
        let big = k.rho * 10f64.powf(rng.gen_range(0.0..(1e4f64 / k.rho).log10()));
        let mut s = [sj, sj];
        s[i] = if rng.gen_bool(0.5) { big } else { -big };
        beyond &= f.eval(i, x, s).abs() <= k.eta_bar * big.powf(k.p_minus[i] - 1.0) * (1.0 + 1e-12);
        s[i] = rng.gen_range(-k.rho..k.rho);
        within &= f.eval(i, x, s).abs() <= k.c_rho * (1.0 + 1e-12);
    }
    checks.push(("rho", beyond));
    checks.push(("c_rho", within));

    // weak inequalities of the box on a finer sub-grid than the library uses
    let p = [&c.p, &c.p];
    let fine = verify_ordered_box(&r.ordered_box, &f, p, 9).unwrap();
    checks.push(("box", fine.pass));
    let ordered = (0..2).all(|i| {
        r.ordered_box.lower[i]
            .values()
            .iter()
            .zip(r.ordered_box.upper[i].values())
            .all(|(a, b)| a <= b)
    });
    checks.push(("ordered", ordered));

    // subsolution against η_i u̲^{p⁻−1} recomputed directly
    let sub_ok = (0..2).all(|i| {
        let lower = &r.ordered_box.lower[i];
        let load = Sampled(lower.at_qp().iter().map(|&v| f.eta[i] * v.max(0.0)).collect());
        weak_residual(&c.p, 0.0, lower, &load).unwrap().into_iter().all(|v| v <= 1e-10)
    });
    checks.push(("subsolution", sub_ok));

    let pos = &r.positive;
    checks.push(("iteration", pos.converged && pos.iterations <= 200 && pos.residual <= 1e-8));
    let interior = mesh.interior_nodes();
    checks.push(("positive", (0..2).all(|i| interior.iter().all(|&k| pos.solution[i].values()[k] > 0.0))));
    let neg_gap = (0..2)
        .map(|i| r.negative.solution[i].max_distance(&pos.solution[i].scaled(-1.0)).unwrap())
        .fold(0.0, f64::max);
    checks.push(("negative", r.negative.converged && neg_gap <= 1e-9));
    checks.push(("runtime", elapsed < Duration::from_secs(120)));

    let failed: Vec<&str> = checks.iter().filter(|(_, ok)| !ok).map(|(n, _)| *n).collect();
    report(
        6,
        failed.is_empty(),
        format!(
            "eps={} eta_bar={:.4} rho={:.3} c_rho={:.3} eps_sub={} iterations={} residual={:.2e} |neg + pos|={neg_gap:.1e} t={:.1}s failed={failed:?}",
            k.eps,
            k.eta_bar,
            k.rho,
            k.c_rho,
            r.ordered_box.eps_sub,
            pos.iterations,
            pos.residual,
            elapsed.as_secs_f64()
        ),
    );
}

#[test]
fn criterion_07_forced_problem_nonexistence() {
    let mesh = interval(256);
    let c = ctx_on(&mesh, "2");
    let e = first_eigenpair(&c).unwrap();
    let mut pass = true;
    let mut lines = Vec::new();
    for delta in [1e-2, 1e-3] {
        let cfg = NonexistenceConfig {
            j: 0.5 * e.lambda,
            delta,
            seeds: 50,
            rng_seed: 42,
        };
        let r = nonexistence_probe(&cfg, &c, &e).unwrap();
        pass &= r.applicable && r.attempts.len() == 50 && r.converged_count == 0 && r.separation >= 10.0;
        lines.push(format!(
            "delta={delta}: {}/50 converged, min residual {:.2e}, residual/tolerance {:.2e}",
            r.converged_count, r.min_residual, r.separation
        ));
    }
    report(7, pass, lines.join("; "));
}

#[test]
fn criterion_08_unforced_start_is_trivial() {
    let mesh = interval(128);
    let c = ctx_on(&mesh, "2");
    let e = first_eigenpair(&c).unwrap();
    let f = Nonlinearity::benchmark([20.0, 20.0], [2.0, 2.0]);
    let cfg = HomotopyConfig::new(Family::Tilde, [&e, &e], [&c.p, &c.p]);
    let h = Homotopy::new(&cfg, &f, [&c, &c], [&e, &e]).unwrap();
    let r = triviality_probe(&h, 30, 42, 1e-8).unwrap();
    let largest_seed = r.attempts.iter().map(|a| a.seed_norm).fold(0.0, f64::max);
    report(
        8,
        r.pass,
        format!(
            "{} attempts, all converged: {}, max final pair norm {:.2e}, largest seed norm {largest_seed:.2e}",
            r.attempts.len(),
            r.all_converged,
            r.max_norm
        ),
    );
}

#[test]
fn criterion_09_continuation() {
    let (_, c, f, r) = benchmark_run(256);
    let e = [&r.eigen[0], &r.eigen[1]];
    let cfg = HomotopyConfig::new(Family::Tilde, e, [&c.p, &c.p]);
    assert_eq!(cfg.t_grid.len(), 11);
    let h = Homotopy::new(&cfg, &f, [&c, &c], e).unwrap();
    let seed = Seed::new("box-solution", r.positive.solution.to_vec());
    let trace = continuation(&h, &[seed]).unwrap();
    let bounded = boundedness_probe(&trace, None);
    let invariant = trace
        .records
        .iter()
        .all(|rec| rec.solutions.iter().all(|s| s.residual <= s.tolerance));
    let last = trace.at(1.0).unwrap();
    let distance = last
        .solutions
        .iter()
        .map(|s| pair_distance(&s.solution, &r.positive.solution, [&c.p, &c.p]))
        .fold(f64::INFINITY, f64::min);
    report(
        9,
        bounded.pass && invariant && distance <= 1e-7,
        format!(
            "max pair norm {:.4} < auto radius {:.4}, distance to existence solution at t=1 {distance:.2e}",
            bounded.max_norm, bounded.radius
        ),
    );
}

fn engineered() -> Nonlinearity {
    let term = |s: &str| format!("{s}*(12/(1 + abs({s})) + 40*(abs({s})/20)^4/(1 + (abs({s})/20)^6))");
    Nonlinearity::from_exprs(&term("s1"), &term("s2"), [9.9, 9.9]).unwrap()
}

fn same_set(a: &[FoundSolution], b: &[FoundSolution]) -> bool {
    // symmetric solutions share a pair norm, so the listing order is not canonical
    let close = |x: &FoundSolution, y: &FoundSolution| (0..2).all(|i| x.solution[i].max_distance(&y.solution[i]).unwrap() < 1e-6);
    a.len() == b.len() && a.iter().all(|x| b.iter().any(|y| close(x, y))) && b.iter().all(|y| a.iter().any(|x| close(x, y)))
}

#[test]
fn criterion_10_annulus_search() {
    let mesh = interval(128);
    let c = ctx_on(&mesh, "2");
    let e = first_eigenpair(&c).unwrap();
    let f = engineered();
    let ctx = [&c, &c];
    let mut b = scaled_box(ctx, [&e, &e], 0.25, 0.01, 3.5).unwrap();
    let v = verify_ordered_box(&b, &f, [&c.p, &c.p], 5).unwrap();
    assert!(v.pass, "{v:?}");
    b.verification = Some(v);
    let inside = solve_in_box(&b, &f, ctx, &IterationSettings::default()).unwrap();
    assert!(inside.converged);
    let reference = [&inside.solution[0], &inside.solution[1]];

    let mut cfg = HomotopyConfig::new(Family::Tilde, [&e, &e], [&c.p, &c.p]);
    cfg.seeds = 40;
    let radii = annulus_radii(&cfg, &b, [&c.p, &c.p]).unwrap();
    let seeds = annulus_seeds(&cfg, &b, [&e, &e], [&c.p, &c.p], radii).unwrap();
    let found = annulus_search_from(&f, ctx, &b, reference, &seeds).unwrap();
    let r = summarize(&cfg, radii, seeds.len(), found);

    let mut shuffled = seeds.clone();
    shuffled.reverse();
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    for k in (1..shuffled.len()).rev() {
        shuffled.swap(k, rng.gen_range(0..=k));
    }
    let again = annulus_search_from(&f, ctx, &b, reference, &shuffled).unwrap();

    let positive: Vec<&FoundSolution> = r.solutions.iter().filter(|s| s.positive).collect();
    let in_box = positive.iter().find(|s| s.inside_box);
    let outside = positive.iter().find(|s| s.pair_norm > r.r_hat && s.distance_to_reference > 1e-3);
    let separated = match (in_box, outside) {
        (Some(a), Some(b)) => (0..2).map(|i| a.solution[i].max_distance(&b.solution[i]).unwrap()).fold(0.0, f64::max) > 1e-3,
        _ => false,
    };
    let stable = same_set(&r.solutions, &again);
    report(
        10,
        positive.len() >= 2 && in_box.is_some() && outside.is_some() && separated && r.second_solution_found && stable,
        format!(
            "{} distinct solutions ({} positive), R_hat={:.3}, largest positive pair norm {:.3}, permutation stable: {stable}",
            r.solutions.len(),
            positive.len(),
            r.r_hat,
            positive.iter().map(|s| s.pair_norm).fold(0.0, f64::max)
        ),
    );
}

#[test]
fn criterion_11_hygiene() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst = 0.0f64;
    let directional = |jd: &[f64], rp: &[f64], rm: &[f64], step: f64| {
        let scale = jd.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
        jd.iter()
            .zip(rp.iter().zip(rm))
            .map(|(j, (a, b))| ((a - b) / (2.0 * step) - j).abs() / scale)
            .fold(0.0, f64::max)
    };
    // ten scalar states with a state-dependent load
    for k in 0..10 {
        let mesh = if k % 2 == 0 { interval(16) } else { Arc::new(build_rectangle_mesh(0.0, 0.0, 1.0, 1.0, 5, 4).unwrap()) };
        let c = ctx_on(&mesh, if k % 2 == 0 { "2 + x" } else { "1.8 + 0.5*x*y" }).with_regularization(1e-6).unwrap();
        let rhs = StateFn(|x: [f64; 2], u: f64| (x[0] + u.sin(), u.cos()));
        let mut u = GridFunction::zeros(mesh.clone());
        for &i in mesh.interior_nodes() {
            u.values_mut()[i] = rng.gen_range(-1.0..1.0);
        }
        let jac = assemble_jacobian(&c, &u, &rhs, c.eps_reg).unwrap();
        let base = u.dofs();
        let dir: Vec<f64> = base.iter().map(|_| rng.gen_range(-1.0..1.0)).collect();
        let step = 1e-6;
        let shift = |s: f64| {
            let v: Vec<f64> = base.iter().zip(&dir).map(|(a, d)| a + s * d).collect();
            assemble_residual(&c, &GridFunction::from_dofs(mesh.clone(), &v), &rhs).unwrap()
        };
        worst = worst.max(directional(&jac.mul_vec(&dir), &shift(step), &shift(-step), step));
    }
    // ten coupled states of the benchmark system
    let mesh = interval(16);
    let p = ExponentField::from_expr("2.5 + 0.5*x", &mesh).unwrap();
    let f = Nonlinearity::benchmark([20.0, 15.0], [2.5, 2.5]);
    let sys = System::new(&mesh, vec![&p, &p], 1e-6, &f).unwrap();
    for _ in 0..10 {
        let x: Vec<f64> = (0..sys.size()).map(|_| rng.gen_range(0.1..2.0)).collect();
        let dir: Vec<f64> = x.iter().map(|_| rng.gen_range(-1.0..1.0)).collect();
        let jac = sys.jacobian(&x, 1e-6);
        let step = 1e-6;
        let shift = |s: f64| sys.residual(&x.iter().zip(&dir).map(|(a, d)| a + s * d).collect::<Vec<_>>());
        worst = worst.max(directional(&jac.mul_vec(&dir), &shift(step), &shift(-step), step));
    }

    // two runs with the same seed into the same directory
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("run.cfg");
    std::fs::write(&cfg_path, "[mesh]\nn = 64\n[homotopy]\nseeds = 8\n[probe]\nseeds = 8\ndeltas = 1e-2\n").unwrap();
    let out = dir.path().join("out");
    let run = |cmd: &str| {
        let args = ["pxlap", cmd, "--quiet", "--seed", "7", "--config", cfg_path.to_str().unwrap(), "--output-dir", out.to_str().unwrap()];
        let code = pxlap::cli::main_with_args(args);
        (code, std::fs::read(out.join(format!("{cmd}.json"))).unwrap())
    };
    let mut identical = true;
    for cmd in ["theorem1", "verify", "theorem2"] {
        let (c1, a) = run(cmd);
        let (c2, b) = run(cmd);
        identical &= a == b && c1 == c2;
    }
    report(11, worst <= 1e-5 && identical, format!("20 Jacobian checks, worst relative error {worst:.2e}; repeated JSON identical: {identical}"));
}
