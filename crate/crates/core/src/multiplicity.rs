//! Homotopy families joining the coupled system to reference problems with a
//! known solution structure, continuation in the homotopy parameter, and the
//! probes standing in for the degree argument: boundedness of the solution
//! sets, nonexistence with a positive forcing term, triviality without it,
//! and a multistart search for solutions outside the ordered box.
//!
//! The reference term for component `i` is
//! `J_i (u_i⁺)^{p_i(x)−1} / max{1, ‖u_i‖}^{p_i(x)−1} + δ λ₁,p_i φ₁,p_i^{p_i(x)−1}`
//! where `‖u_i‖` is the Sobolev norm of the component alone and the `δ` term
//! is present only in the forced family.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::eigen::EigenPair;
use crate::existence::{Nonlinearity, OrderedBox};
use crate::exponents::ExponentField;
use crate::mesh::{Geometry, GridFunction, Mesh};
use crate::modular::{gradient_magnitude_qp, luxemburg_of_samples, sobolev_norm};
use crate::newton::{self, NewtonProblem, NewtonSettings};
use crate::operator::{dual_norm, solve_system, OperatorContext, System, SystemSource};
use crate::{Error, Result};

/// Convention used for the norm denominators, named in every report.
pub const DENOMINATOR_CONVENTION: &str = "max{1, ||u_i||}^(p_i(x)-1) with ||u_i|| the Sobolev norm of component i";

const MAX_PICARD: usize = 20;
/// Two converged solutions closer than this in pair norm are the same.
pub const DEDUP_DISTANCE: f64 = 1e-4;
/// Nodal distance from the box solution above which a solution is new.
pub const DISTINCT_DISTANCE: f64 = 1e-3;
/// Interior values at or below this do not count as positive; Newton leaves
/// round-off of either sign in components that converge to zero.
const POSITIVE_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    /// Reference problem with the positive forcing `δ λ₁ φ₁^{p−1}`.
    WithDelta,
    /// Reference problem without forcing; only the zero pair solves it.
    Tilde,
}

#[derive(Debug, Clone, Serialize)]
pub struct HomotopyConfig {
    pub family: Family,
    pub j: [f64; 2],
    pub delta: f64,
    pub t_grid: Vec<f64>,
    /// Outer radius of the annulus search; auto-sized when absent.
    pub r: Option<f64>,
    /// Radius bounding the continuation trace; auto-sized when absent.
    pub r_tilde: Option<f64>,
    /// Radius of the ball containing the box; auto-sized when absent.
    pub r_hat: Option<f64>,
    /// Multistart attempts per search.
    pub seeds: usize,
    pub rng_seed: u64,
}

impl HomotopyConfig {
    /// Defaults: 11 equally spaced `t`, `J_i` at half their bound, `δ = 1e−3`
    /// for the forced family.
    pub fn new(family: Family, eigen: [&EigenPair; 2], p: [&ExponentField; 2]) -> Self {
        let j = [0, 1].map(|i| 0.5 * j_bound(eigen[i].lambda, p[i].p_minus()));
        HomotopyConfig {
            family,
            j,
            delta: if family == Family::WithDelta { 1e-3 } else { 0.0 },
            t_grid: (0..=10).map(|k| k as f64 / 10.0).collect(),
            r: None,
            r_tilde: None,
            r_hat: None,
            seeds: 40,
            rng_seed: 42,
        }
    }

    /// Checks every invariant against the eigenvalues, collecting all failures.
    pub fn validate(&self, lambda: [f64; 2], p_minus: [f64; 2]) -> Result<()> {
        let mut errors = Vec::new();
        for i in 0..2 {
            let bound = j_bound(lambda[i], p_minus[i]);
            if !(self.j[i] > 0.0 && self.j[i] < bound) {
                errors.push(format!("J{} = {} must lie in (0, {bound}) = (0, lambda1·min(1, p- - 1))", i + 1, self.j[i]));
            }
        }
        if let (Some(r_hat), Some(r)) = (self.r_hat, self.r) {
            if !(r_hat < r) {
                errors.push(format!("R_hat = {r_hat} must be smaller than R = {r}"));
            }
        }
        for (name, r) in [("R", self.r), ("R_tilde", self.r_tilde), ("R_hat", self.r_hat)] {
            if let Some(r) = r {
                if !(r > 0.0) {
                    errors.push(format!("{name} must be positive, got {r}"));
                }
            }
        }
        if let Err(e) = check_t_grid(&self.t_grid) {
            errors.push(e);
        }
        match self.family {
            Family::WithDelta if !(self.delta > 0.0) => errors.push(format!("delta must be positive, got {}", self.delta)),
            Family::Tilde if self.delta != 0.0 => errors.push("delta is only meaningful for the forced family".into()),
            _ => {}
        }
        if self.seeds == 0 {
            errors.push("at least one seed is required".into());
        }
        if errors.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidInput(errors.join("; ")))
        }
    }
}

/// `λ₁ · min{1, p⁻ − 1}`.
pub fn j_bound(lambda: f64, p_minus: f64) -> f64 {
    lambda * (p_minus - 1.0).min(1.0)
}

/// Sorted, inside `[0, 1]`, starting at 0 and ending at 1.
pub fn check_t_grid(t: &[f64]) -> std::result::Result<(), String> {
    if t.is_empty() {
        return Err("t-grid is empty".into());
    }
    if let Some(bad) = t.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(format!("t-grid value {bad} lies outside [0, 1]"));
    }
    if t.windows(2).any(|w| !(w[0] < w[1])) {
        return Err("t-grid must be strictly increasing".into());
    }
    if t[0] != 0.0 || t[t.len() - 1] != 1.0 {
        return Err("t-grid must start at 0 and end at 1".into());
    }
    Ok(())
}

struct Part<'a> {
    p: &'a ExponentField,
    j: f64,
    lambda: f64,
    /// `φ₁^{p(x)−1}` at the quadrature points.
    phi_pow: Vec<f64>,
}

/// A homotopy family on a fixed mesh: one or two components, the
/// nonlinearity used at `t > 0`, and the solver settings.
pub struct Homotopy<'a> {
    family: Family,
    delta: f64,
    t_grid: Vec<f64>,
    f: Option<&'a Nonlinearity>,
    parts: Vec<Part<'a>>,
    eps: f64,
    newton: NewtonSettings,
    mesh: &'a Mesh,
}

fn phi_power(eigen: &EigenPair, p: &ExponentField) -> Vec<f64> {
    eigen
        .eigenfunction
        .at_qp()
        .iter()
        .zip(p.qp_values())
        .map(|(&v, &q)| v.max(0.0).powf(q - 1.0))
        .collect()
}

impl<'a> Homotopy<'a> {
    pub fn new(cfg: &HomotopyConfig, f: &'a Nonlinearity, ctx: [&'a OperatorContext; 2], eigen: [&EigenPair; 2]) -> Result<Self> {
        if !ctx[0].mesh.same_as(&ctx[1].mesh) {
            return Err(Error::MeshMismatch);
        }
        cfg.validate([eigen[0].lambda, eigen[1].lambda], [ctx[0].p.p_minus(), ctx[1].p.p_minus()])?;
        let parts = (0..2)
            .map(|i| Part {
                p: &ctx[i].p,
                j: cfg.j[i],
                lambda: eigen[i].lambda,
                phi_pow: phi_power(eigen[i], &ctx[i].p),
            })
            .collect();
        Ok(Homotopy {
            family: cfg.family,
            delta: cfg.delta,
            t_grid: cfg.t_grid.clone(),
            f: Some(f),
            parts,
            eps: ctx[0].eps_reg,
            newton: ctx[0].newton,
            mesh: &ctx[0].mesh,
        })
    }

    /// The scalar forced reference problem, `t = 0` only.
    fn scalar(j: f64, delta: f64, ctx: &'a OperatorContext, eigen: &EigenPair) -> Self {
        Homotopy {
            family: Family::WithDelta,
            delta,
            t_grid: vec![0.0],
            f: None,
            parts: vec![Part {
                p: &ctx.p,
                j,
                lambda: eigen.lambda,
                phi_pow: phi_power(eigen, &ctx.p),
            }],
            eps: ctx.eps_reg,
            newton: ctx.newton,
            mesh: &ctx.mesh,
        }
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn t_grid(&self) -> &[f64] {
        &self.t_grid
    }

    fn exponents(&self) -> Vec<&'a ExponentField> {
        self.parts.iter().map(|p| p.p).collect()
    }

    /// Component Sobolev norms; NaN for fields with non-finite values.
    fn norms(&self, u: &[GridFunction]) -> Result<Vec<f64>> {
        u.iter()
            .zip(&self.parts)
            .map(|(ui, part)| {
                if ui.values().iter().all(|v| v.is_finite()) {
                    sobolev_norm(ui, part.p)
                } else {
                    Ok(f64::NAN)
                }
            })
            .collect()
    }

    /// The right-hand sides at parameter `t`, with denominators taken from
    /// the norms of `u`.
    pub fn rhs(&self, t: f64, u: &[&GridFunction]) -> Result<HomotopyRhs<'_>> {
        if u.len() != self.parts.len() {
            return Err(Error::InvalidInput(format!("expected {} components", self.parts.len())));
        }
        if u.iter().any(|ui| !ui.mesh().same_as(self.mesh)) {
            return Err(Error::MeshMismatch);
        }
        let owned: Vec<GridFunction> = u.iter().map(|v| (*v).clone()).collect();
        let norms = self.norms(&owned)?;
        self.rhs_frozen(t, &norms)
    }

    /// The right-hand sides with the norms in the denominators fixed.
    pub fn rhs_frozen(&self, t: f64, norms: &[f64]) -> Result<HomotopyRhs<'_>> {
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::InvalidInput(format!("t = {t} lies outside [0, 1]")));
        }
        if t > 0.0 && self.f.is_none() {
            return Err(Error::InvalidInput("this reference problem has no nonlinearity for t > 0".into()));
        }
        let denom_pow = self
            .parts
            .iter()
            .zip(norms)
            .map(|(part, &n)| part.p.qp_values().iter().map(|&q| n.max(1.0).powf(q - 1.0)).collect())
            .collect();
        Ok(HomotopyRhs {
            h: self,
            t,
            norms: norms.to_vec(),
            denom_pow,
        })
    }

    /// Newton on the frozen-denominator problem inside an outer update of
    /// the denominators, from `seed`.
    pub fn solve_at(&self, t: f64, seed: &Seed) -> Result<Attempt> {
        let m = self.parts.len();
        if seed.fields.len() != m {
            return Err(Error::InvalidInput(format!("seed '{}' has {} components, expected {m}", seed.tag, seed.fields.len())));
        }
        let mut u: Vec<GridFunction> = seed.fields.iter().map(with_zero_boundary).collect();
        let seed_norm: f64 = self.norms(&u)?.iter().sum();
        let mut norms = self.norms(&u)?;
        let exps = self.exponents();
        let mut attempt = Attempt {
            tag: seed.tag.clone(),
            converged: false,
            residual: f64::INFINITY,
            tolerance: self.newton.tolerance,
            seed_norm,
            norm: f64::NAN,
            picard_sweeps: 0,
            newton_iterations: 0,
            solution: u.clone(),
        };
        for sweep in 1..=MAX_PICARD {
            attempt.picard_sweeps = sweep;
            let rhs = self.rhs_frozen(t, &norms)?;
            let sys = System::new(self.mesh, exps.clone(), self.eps, &rhs)?;
            let fields: Vec<&[f64]> = u.iter().map(|v| v.values()).collect();
            let out = newton::solve(&sys, &sys.pack(&fields), &self.newton);
            attempt.newton_iterations += out.iterations;
            u = sys
                .unpack(&out.x)
                .into_iter()
                .map(|v| GridFunction::new(self.mesh_arc(), v))
                .collect::<Result<_>>()?;
            attempt.solution = u.clone();
            attempt.residual = out.residual;
            attempt.tolerance = out.tolerance;
            norms = self.norms(&u)?;
            attempt.norm = norms.iter().sum();
            if !out.converged || !attempt.norm.is_finite() {
                return Ok(attempt);
            }
            // the full nonlocal residual, denominators from the new state
            let rhs = self.rhs_frozen(t, &norms)?;
            let sys = System::new(self.mesh, exps.clone(), self.eps, &rhs)?;
            let x = sys.pack(&u.iter().map(|v| v.values()).collect::<Vec<_>>());
            attempt.residual = dual_norm(self.mesh, &sys.residual(&x));
            attempt.tolerance = self.newton.tolerance * sys.scale(&x).max(1.0);
            if attempt.residual <= attempt.tolerance {
                attempt.converged = true;
                return Ok(attempt);
            }
        }
        Ok(attempt)
    }

    fn mesh_arc(&self) -> std::sync::Arc<Mesh> {
        self.parts[0].p.mesh().clone()
    }

    /// Attempts from every seed, run concurrently and returned in seed order.
    pub fn solve_all(&self, t: f64, seeds: &[Seed]) -> Result<Vec<Attempt>> {
        seeds.par_iter().map(|s| self.solve_at(t, s)).collect()
    }
}

fn with_zero_boundary(u: &GridFunction) -> GridFunction {
    let mut out = u.clone();
    for k in u.mesh().boundary_nodes() {
        out.values_mut()[k] = 0.0;
    }
    out
}

/// Right-hand sides of a homotopy family at fixed `t` and fixed norm
/// denominators.
pub struct HomotopyRhs<'h> {
    h: &'h Homotopy<'h>,
    t: f64,
    norms: Vec<f64>,
    denom_pow: Vec<Vec<f64>>,
}

impl HomotopyRhs<'_> {
    pub fn t(&self) -> f64 {
        self.t
    }

    /// The norms feeding the denominators.
    pub fn norms(&self) -> &[f64] {
        &self.norms
    }

    /// The reference term and its partials at quadrature point `q`.
    fn reference(&self, comp: usize, q: usize, s: [f64; 2]) -> (f64, [f64; 2]) {
        let part = &self.h.parts[comp];
        let p = part.p.qp_values()[q];
        let si = s[comp];
        let (pos, dpos) = if si > 0.0 {
            (si.powf(p - 1.0), (p - 1.0) * si.powf(p - 2.0))
        } else {
            (0.0, 0.0)
        };
        let d = self.denom_pow[comp][q];
        let mut value = part.j * pos / d;
        let mut der = [0.0; 2];
        der[comp] = part.j * dpos / d;
        if self.h.family == Family::WithDelta {
            value += self.h.delta * part.lambda * part.phi_pow[q];
        }
        (value, der)
    }

    pub fn value(&self, comp: usize, q: usize, x: [f64; 2], s: [f64; 2]) -> f64 {
        SystemSource::eval(self, comp, q, x, s).0
    }
}

impl SystemSource for HomotopyRhs<'_> {
    fn eval(&self, comp: usize, q: usize, x: [f64; 2], s: [f64; 2]) -> (f64, [f64; 2]) {
        let t = self.t;
        match self.h.f {
            Some(f) if t == 1.0 => (f.eval(comp, x, s), f.partials(comp, x, s)),
            Some(f) if t > 0.0 => {
                let (r, dr) = self.reference(comp, q, s);
                let (fv, df) = (f.eval(comp, x, s), f.partials(comp, x, s));
                (t * fv + (1.0 - t) * r, [t * df[0] + (1.0 - t) * dr[0], t * df[1] + (1.0 - t) * dr[1]])
            }
            _ => self.reference(comp, q, s),
        }
    }
}

/// A start point for a multistart attempt.
#[derive(Debug, Clone)]
pub struct Seed {
    pub tag: String,
    pub fields: Vec<GridFunction>,
}

impl Seed {
    pub fn new(tag: impl Into<String>, fields: Vec<GridFunction>) -> Self {
        Seed { tag: tag.into(), fields }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Attempt {
    pub tag: String,
    pub converged: bool,
    /// Dual norm of the full residual, denominators included.
    pub residual: f64,
    pub tolerance: f64,
    /// Sum of component Sobolev norms of the seed and of the final iterate.
    pub seed_norm: f64,
    pub norm: f64,
    pub picard_sweeps: usize,
    pub newton_iterations: usize,
    #[serde(skip)]
    pub solution: Vec<GridFunction>,
}

/// Sum of component Sobolev norms of the difference.
fn pair_distance(a: &[GridFunction], b: &[GridFunction], p: &[&ExponentField]) -> Result<f64> {
    let mut d = 0.0;
    for ((u, v), q) in a.iter().zip(b).zip(p) {
        let diff = GridFunction::new(u.mesh().clone(), u.values().iter().zip(v.values()).map(|(x, y)| x - y).collect())?;
        d += sobolev_norm(&diff, q)?;
    }
    Ok(d)
}

fn nodal_distance(a: &[GridFunction], b: &[GridFunction]) -> Result<f64> {
    let mut d = 0.0f64;
    for (u, v) in a.iter().zip(b) {
        d = d.max(u.max_distance(v)?);
    }
    Ok(d)
}

/// Luxemburg norm of `|∇u|` without requiring zero boundary values.
fn gradient_norm(u: &GridFunction, p: &ExponentField) -> Result<f64> {
    let mesh = u.mesh();
    Ok(luxemburg_of_samples(&gradient_magnitude_qp(mesh, u.values()), p.qp_values(), mesh.qp_weights())?.norm)
}

#[derive(Debug, Clone, Serialize)]
pub struct TraceSolution {
    /// Seeds that converged to this solution, in seed order.
    pub tags: Vec<String>,
    pub norms: Vec<f64>,
    pub pair_norm: f64,
    pub residual: f64,
    pub tolerance: f64,
    #[serde(skip)]
    pub solution: Vec<GridFunction>,
}

/// Converged attempts merged when closer than [`DEDUP_DISTANCE`], sorted by
/// pair norm so the result does not depend on the seed order.
fn deduplicate(attempts: &[Attempt], p: &[&ExponentField]) -> Result<Vec<TraceSolution>> {
    let mut kept: Vec<TraceSolution> = Vec::new();
    for a in attempts.iter().filter(|a| a.converged) {
        let mut merged = false;
        for k in kept.iter_mut() {
            if pair_distance(&a.solution, &k.solution, p)? < DEDUP_DISTANCE {
                k.tags.push(a.tag.clone());
                merged = true;
                break;
            }
        }
        if !merged {
            let norms = a
                .solution
                .iter()
                .zip(p)
                .map(|(u, q)| sobolev_norm(u, q))
                .collect::<Result<Vec<_>>>()?;
            kept.push(TraceSolution {
                tags: vec![a.tag.clone()],
                pair_norm: norms.iter().sum(),
                norms,
                residual: a.residual,
                tolerance: a.tolerance,
                solution: a.solution.clone(),
            });
        }
    }
    kept.sort_by(|a, b| a.pair_norm.total_cmp(&b.pair_norm));
    Ok(kept)
}

#[derive(Debug, Clone, Serialize)]
pub struct TraceRecord {
    pub t: f64,
    pub solutions: Vec<TraceSolution>,
    pub attempts: Vec<Attempt>,
}

#[derive(Debug, Clone, Serialize)]
pub struct HomotopyTrace {
    pub family: Family,
    pub denominators: &'static str,
    pub records: Vec<TraceRecord>,
}

impl HomotopyTrace {
    pub fn at(&self, t: f64) -> Option<&TraceRecord> {
        self.records.iter().find(|r| r.t == t)
    }
}

/// Marches the `t`-grid. At every `t` the seeds are the distinct solutions
/// found at the previous `t`, the zero pair and `extra`.
pub fn continuation(h: &Homotopy, extra: &[Seed]) -> Result<HomotopyTrace> {
    let zero = Seed::new("zero", vec![GridFunction::zeros(h.mesh_arc()); h.parts.len()]);
    let mut previous: Vec<Seed> = Vec::new();
    let mut records = Vec::new();
    for &t in h.t_grid() {
        let mut seeds = previous.clone();
        seeds.push(zero.clone());
        seeds.extend(extra.iter().cloned());
        let attempts = h.solve_all(t, &seeds)?;
        let solutions = deduplicate(&attempts, &h.exponents())?;
        previous = solutions
            .iter()
            .enumerate()
            .map(|(k, s)| Seed::new(format!("previous#{k}"), s.solution.clone()))
            .collect();
        records.push(TraceRecord { t, solutions, attempts });
    }
    Ok(HomotopyTrace {
        family: h.family(),
        denominators: DENOMINATOR_CONVENTION,
        records,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundednessReport {
    pub max_norm: f64,
    /// `t` at which the largest norm occurs.
    pub max_at: Option<f64>,
    pub radius: f64,
    pub auto_sized: bool,
    /// `2 × (max + 1)`.
    pub suggested: f64,
    /// First `t` with a solution of norm ≥ radius.
    pub witness_t: Option<f64>,
    pub pass: bool,
}

pub fn boundedness_probe(trace: &HomotopyTrace, radius: Option<f64>) -> BoundednessReport {
    let mut max_norm = 0.0f64;
    let mut max_at = None;
    for r in &trace.records {
        for s in &r.solutions {
            if s.pair_norm > max_norm || max_at.is_none() {
                max_norm = max_norm.max(s.pair_norm);
                max_at = Some(r.t);
            }
        }
    }
    let suggested = 2.0 * (max_norm + 1.0);
    let radius_used = radius.unwrap_or(suggested);
    let witness_t = trace
        .records
        .iter()
        .find(|r| r.solutions.iter().any(|s| !(s.pair_norm < radius_used)))
        .map(|r| r.t);
    BoundednessReport {
        max_norm,
        max_at,
        radius: radius_used,
        auto_sized: radius.is_none(),
        suggested,
        witness_t,
        pass: witness_t.is_none(),
    }
}

/// Smooth random field vanishing on the boundary: a random combination of
/// the first few sine modes of the bounding interval or rectangle.
fn random_field(mesh: &std::sync::Arc<Mesh>, rng: &mut ChaCha8Rng, positive: bool) -> GridFunction {
    let modes = 4;
    let mut coef = vec![vec![0.0; modes]; modes];
    for (a, row) in coef.iter_mut().enumerate() {
        for (b, c) in row.iter_mut().enumerate() {
            *c = rng.gen_range(-1.0..1.0) / ((a + 1) * (b + 1)) as f64;
        }
    }
    if positive {
        coef[0][0] = 1.0 + rng.gen_range(0.0..1.0);
        for (a, row) in coef.iter_mut().enumerate() {
            for (b, c) in row.iter_mut().enumerate() {
                if a + b > 0 {
                    *c *= 0.3;
                }
            }
        }
    }
    let geometry = *mesh.geometry();
    let field = GridFunction::from_fn(mesh.clone(), |x| {
        let (sx, sy): (Vec<f64>, Vec<f64>) = match geometry {
            Geometry::Interval { a, b, .. } => {
                let r = (x[0] - a) / (b - a);
                ((1..=modes).map(|k| (k as f64 * std::f64::consts::PI * r).sin()).collect(), {
                    let mut v = vec![0.0; modes];
                    v[0] = 1.0;
                    v
                })
            }
            Geometry::Rectangle { ax, ay, bx, by, .. } => {
                let (r, s) = ((x[0] - ax) / (bx - ax), (x[1] - ay) / (by - ay));
                (
                    (1..=modes).map(|k| (k as f64 * std::f64::consts::PI * r).sin()).collect(),
                    (1..=modes).map(|k| (k as f64 * std::f64::consts::PI * s).sin()).collect(),
                )
            }
        };
        let mut v = 0.0;
        for a in 0..modes {
            for b in 0..modes {
                v += coef[a][b] * sx[a] * sy[b];
            }
        }
        v
    });
    with_zero_boundary(&field)
}

/// `count` values log-spaced strictly inside `(lo, hi)`.
fn log_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    (0..count)
        .map(|k| (lo.ln() + (k as f64 + 0.5) / count as f64 * (hi.ln() - lo.ln())).exp())
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct NonexistenceConfig {
    pub j: f64,
    pub delta: f64,
    pub seeds: usize,
    pub rng_seed: u64,
}

impl Default for NonexistenceConfig {
    fn default() -> Self {
        NonexistenceConfig {
            j: 0.0,
            delta: 1e-3,
            seeds: 50,
            rng_seed: 42,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct NonexistenceReport {
    pub applicable: bool,
    pub reason: Option<String>,
    pub j: f64,
    pub delta: f64,
    pub lambda: f64,
    /// `λ₁ (p⁻ − 1)`; `J` must lie below it.
    pub j_limit: f64,
    pub rng_seed: u64,
    pub attempts: Vec<Attempt>,
    /// Attempts reaching the tolerance; each one is a falsification event.
    pub converged_count: usize,
    pub min_residual: f64,
    /// Smallest ratio residual / tolerance over all attempts.
    pub separation: f64,
    /// Largest ratio of final to seed norm.
    pub max_growth: f64,
    pub pass: bool,
}

/// Multistart Newton on the scalar forced reference problem
/// `−Δ_{p(x)} u = J (u⁺/max{1, ‖u‖})^{p(x)−1} + δ λ₁ φ₁^{p(x)−1}`, which has no
/// solution when `0 < J < λ₁ (p⁻ − 1)` and `δ > 0` is small. Seeds are zero,
/// `±c φ₁` for `c` log-spaced in `[1e−3, 1e2]` and random smooth fields.
pub fn nonexistence_probe(cfg: &NonexistenceConfig, ctx: &OperatorContext, eigen: &EigenPair) -> Result<NonexistenceReport> {
    if !(cfg.delta > 0.0) {
        return Err(Error::InvalidInput(format!(
            "delta must be positive (with delta = 0 the zero function solves the problem), got {}",
            cfg.delta
        )));
    }
    if cfg.seeds == 0 {
        return Err(Error::InvalidInput("at least one seed is required".into()));
    }
    let j_limit = eigen.lambda * (ctx.p.p_minus() - 1.0);
    let mut report = NonexistenceReport {
        applicable: true,
        reason: None,
        j: cfg.j,
        delta: cfg.delta,
        lambda: eigen.lambda,
        j_limit,
        rng_seed: cfg.rng_seed,
        attempts: Vec::new(),
        converged_count: 0,
        min_residual: f64::NAN,
        separation: f64::NAN,
        max_growth: f64::NAN,
        pass: false,
    };
    if !(cfg.j > 0.0 && cfg.j < j_limit) {
        report.applicable = false;
        report.reason = Some(format!("J = {} lies outside (0, lambda1·(p- - 1)) = (0, {j_limit})", cfg.j));
        return Ok(report);
    }
    let h = Homotopy::scalar(cfg.j, cfg.delta, ctx, eigen);
    let seeds = probe_seeds(ctx, eigen, cfg.seeds, cfg.rng_seed);
    let attempts = h.solve_all(0.0, &seeds)?;
    report.converged_count = attempts.iter().filter(|a| a.converged).count();
    report.min_residual = attempts.iter().map(|a| a.residual).fold(f64::INFINITY, f64::min);
    report.separation = attempts.iter().map(|a| a.residual / a.tolerance).fold(f64::INFINITY, f64::min);
    report.max_growth = attempts
        .iter()
        .filter(|a| a.seed_norm > 0.0)
        .map(|a| a.norm / a.seed_norm)
        .fold(0.0, f64::max);
    report.pass = report.converged_count == 0;
    report.attempts = attempts;
    Ok(report)
}

fn probe_seeds(ctx: &OperatorContext, eigen: &EigenPair, count: usize, rng_seed: u64) -> Vec<Seed> {
    let mut seeds = vec![Seed::new("zero", vec![GridFunction::zeros(ctx.mesh.clone())])];
    let scaled = (count.saturating_sub(1) / 2) / 2;
    for c in log_grid(1e-3, 1e2, scaled) {
        for sign in [1.0, -1.0] {
            seeds.push(Seed::new(format!("{:+e}*phi1", sign * c), vec![eigen.eigenfunction.scaled(sign * c)]));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut k = 0;
    while seeds.len() < count {
        let field = random_field(&ctx.mesh, &mut rng, false);
        let amp = 10f64.powf(rng.gen_range(-3.0..2.0));
        let n = field.max_abs();
        let field = if n > 0.0 { field.scaled(amp / n) } else { field };
        seeds.push(Seed::new(format!("random#{k}"), vec![field]));
        k += 1;
    }
    seeds
}

#[derive(Debug, Clone, Serialize)]
pub struct TrivialityReport {
    pub rng_seed: u64,
    pub attempts: Vec<Attempt>,
    pub all_converged: bool,
    /// Largest pair norm among the converged attempts.
    pub max_norm: f64,
    pub pass: bool,
}

/// Multistart on the unforced family at `t = 0`, where only the zero pair
/// solves. Passes if every attempt converges to pair norm ≤ `zero_tol`.
pub fn triviality_probe(h: &Homotopy, seeds: usize, rng_seed: u64, zero_tol: f64) -> Result<TrivialityReport> {
    if h.family() != Family::Tilde {
        return Err(Error::InvalidInput("the triviality probe needs the unforced family".into()));
    }
    let mesh = h.mesh_arc();
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut list = vec![Seed::new("zero", vec![GridFunction::zeros(mesh.clone()); h.parts.len()])];
    let mut k = 0;
    while list.len() < seeds.max(1) {
        let amp = 10f64.powf(rng.gen_range(-2.0..2.0));
        let fields = (0..h.parts.len())
            .map(|_| {
                let f = random_field(&mesh, &mut rng, k % 2 == 0);
                let n = f.max_abs();
                if n > 0.0 {
                    f.scaled(amp / n)
                } else {
                    f
                }
            })
            .collect();
        list.push(Seed::new(format!("random#{k}"), fields));
        k += 1;
    }
    let attempts = h.solve_all(0.0, &list)?;
    let all_converged = attempts.iter().all(|a| a.converged);
    let max_norm = attempts.iter().filter(|a| a.converged).map(|a| a.norm).fold(0.0, f64::max);
    Ok(TrivialityReport {
        rng_seed,
        pass: all_converged && max_norm <= zero_tol,
        attempts,
        all_converged,
        max_norm,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct FoundSolution {
    pub tags: Vec<String>,
    pub norms: Vec<f64>,
    pub pair_norm: f64,
    pub residual: f64,
    pub positive: bool,
    pub inside_box: bool,
    /// Max nodal distance to the box solution.
    pub distance_to_reference: f64,
    #[serde(skip)]
    pub solution: Vec<GridFunction>,
}

#[derive(Debug, Clone, Serialize)]
pub struct AnnulusReport {
    pub r_hat: f64,
    pub r: f64,
    pub r_hat_auto: bool,
    pub r_auto: bool,
    pub rng_seed: u64,
    pub attempts: usize,
    pub converged: usize,
    pub solutions: Vec<FoundSolution>,
    pub outside_box: usize,
    /// Some solution has pair norm above `R̂` and differs from the box
    /// solution by more than [`DISTINCT_DISTANCE`] nodally.
    pub second_solution_found: bool,
}

/// `R̂` and `R` for the annulus: configured values, or `1.5 ×` the pair
/// norm of the box's upper corner and `10 R̂`.
pub fn annulus_radii(cfg: &HomotopyConfig, b: &OrderedBox, p: [&ExponentField; 2]) -> Result<(f64, f64)> {
    let r_hat = match cfg.r_hat {
        Some(r) => r,
        None => 1.5 * (gradient_norm(&b.upper[0], p[0])? + gradient_norm(&b.upper[1], p[1])?),
    };
    let r = cfg.r.unwrap_or(10.0 * r_hat);
    if !(r_hat > 0.0 && r_hat < r) {
        return Err(Error::InvalidInput(format!("annulus radii must satisfy 0 < R_hat < R, got {r_hat} and {r}")));
    }
    Ok((r_hat, r))
}

/// Seeds for the annulus search: the middle of the box, then `c (φ₁, φ₂)`
/// with pair norm log-spaced in `(R̂, R)` and random positive pairs scaled
/// into the same range; `cfg.seeds` in total.
pub fn annulus_seeds(cfg: &HomotopyConfig, b: &OrderedBox, eigen: [&EigenPair; 2], p: [&ExponentField; 2], radii: (f64, f64)) -> Result<Vec<Seed>> {
    let (r_hat, r) = radii;
    let mid: Vec<GridFunction> = (0..2)
        .map(|i| {
            let (lo, hi) = (b.lower[i].values(), b.upper[i].values());
            let v = lo.iter().zip(hi).map(|(a, c)| 0.5 * (a + c)).collect();
            GridFunction::new(b.lower[i].mesh().clone(), v).map(|g| with_zero_boundary(&g))
        })
        .collect::<Result<_>>()?;
    let mut seeds = vec![Seed::new("box-middle", mid)];
    let phi_norm = sobolev_norm(&eigen[0].eigenfunction, p[0])? + sobolev_norm(&eigen[1].eigenfunction, p[1])?;
    let rest = cfg.seeds.saturating_sub(1);
    for c in log_grid(r_hat, r, rest / 2) {
        let s = c / phi_norm;
        seeds.push(Seed::new(
            format!("{s:e}*phi"),
            vec![eigen[0].eigenfunction.scaled(s), eigen[1].eigenfunction.scaled(s)],
        ));
    }
    let mesh = b.lower[0].mesh().clone();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let mut k = 0;
    while seeds.len() < cfg.seeds {
        let target = (r_hat.ln() + rng.gen_range(0.0..1.0) * (r.ln() - r_hat.ln())).exp();
        let share = rng.gen_range(0.2..0.8);
        let fields = (0..2)
            .map(|i| {
                let f = random_field(&mesh, &mut rng, true);
                let n = sobolev_norm(&f, p[i])?;
                let want = target * if i == 0 { share } else { 1.0 - share };
                Ok(if n > 0.0 { f.scaled(want / n) } else { f })
            })
            .collect::<Result<_>>()?;
        seeds.push(Seed::new(format!("random#{k}"), fields));
        k += 1;
    }
    Ok(seeds)
}

/// Damped Newton on the full system from each seed; converged solutions
/// are deduplicated and classified against the box and the box solution.
pub fn annulus_search_from(
    f: &Nonlinearity,
    ctx: [&OperatorContext; 2],
    b: &OrderedBox,
    reference: [&GridFunction; 2],
    seeds: &[Seed],
) -> Result<Vec<FoundSolution>> {
    let p = [&ctx[0].p, &ctx[1].p];
    let attempts: Vec<Attempt> = seeds
        .par_iter()
        .map(|s| -> Result<Attempt> {
            let r = solve_system(p, ctx[0].eps_reg, &ctx[0].newton, f, [&s.fields[0], &s.fields[1]])?;
            let [u1, u2] = r.solution;
            Ok(Attempt {
                tag: s.tag.clone(),
                converged: r.converged,
                residual: r.residual,
                tolerance: r.tolerance,
                seed_norm: f64::NAN,
                norm: f64::NAN,
                picard_sweeps: 0,
                newton_iterations: r.iterations,
                solution: vec![u1, u2],
            })
        })
        .collect::<Result<_>>()?;
    let reference = [reference[0].clone(), reference[1].clone()];
    let interior = ctx[0].mesh.interior_nodes();
    deduplicate(&attempts, &p)?
        .into_iter()
        .map(|s| {
            let positive = s.solution.iter().all(|u| interior.iter().all(|&k| u.values()[k] > POSITIVE_FLOOR));
            let inside_box = b.contains([&s.solution[0], &s.solution[1]], 1e-8);
            Ok(FoundSolution {
                distance_to_reference: nodal_distance(&s.solution, &reference)?,
                tags: s.tags,
                norms: s.norms,
                pair_norm: s.pair_norm,
                residual: s.residual,
                positive,
                inside_box,
                solution: s.solution,
            })
        })
        .collect()
}

/// Multistart search at `t = 1` for solutions beyond the ball containing
/// the ordered box.
pub fn annulus_search(
    cfg: &HomotopyConfig,
    f: &Nonlinearity,
    ctx: [&OperatorContext; 2],
    eigen: [&EigenPair; 2],
    b: &OrderedBox,
    reference: [&GridFunction; 2],
) -> Result<AnnulusReport> {
    let p = [&ctx[0].p, &ctx[1].p];
    let radii = annulus_radii(cfg, b, p)?;
    let seeds = annulus_seeds(cfg, b, eigen, p, radii)?;
    let solutions = annulus_search_from(f, ctx, b, reference, &seeds)?;
    Ok(summarize(cfg, radii, seeds.len(), solutions))
}

pub fn summarize(cfg: &HomotopyConfig, radii: (f64, f64), attempts: usize, solutions: Vec<FoundSolution>) -> AnnulusReport {
    let (r_hat, r) = radii;
    AnnulusReport {
        r_hat,
        r,
        r_hat_auto: cfg.r_hat.is_none(),
        r_auto: cfg.r.is_none(),
        rng_seed: cfg.rng_seed,
        attempts,
        converged: solutions.iter().map(|s| s.tags.len()).sum(),
        outside_box: solutions.iter().filter(|s| !s.inside_box).count(),
        second_solution_found: solutions
            .iter()
            .any(|s| s.pair_norm > r_hat && s.distance_to_reference > DISTINCT_DISTANCE),
        solutions,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eigen::first_eigenpair;
    use crate::existence::scaled_box;
    use crate::mesh::build_interval_mesh;
    use std::sync::Arc;

    fn ctx(n: usize, p: &str) -> OperatorContext {
        let m = Arc::new(build_interval_mesh(0.0, 1.0, n).unwrap());
        OperatorContext::new(ExponentField::from_expr(p, &m).unwrap())
    }

    #[test]
    fn family_values() {
        let c = ctx(32, "2");
        let e = first_eigenpair(&c).unwrap();
        let f = Nonlinearity::benchmark([20.0, 20.0], [2.0, 2.0]);
        let tilde_cfg = HomotopyConfig::new(Family::Tilde, [&e, &e], [&c.p, &c.p]);
        let delta_cfg = HomotopyConfig::new(Family::WithDelta, [&e, &e], [&c.p, &c.p]);
        let tilde = Homotopy::new(&tilde_cfg, &f, [&c, &c], [&e, &e]).unwrap();
        let forced = Homotopy::new(&delta_cfg, &f, [&c, &c], [&e, &e]).unwrap();
        let u = e.eigenfunction.scaled(3.0);
        let xs = c.mesh.qp_coords();
        let uq = u.at_qp();
        let phi = e.eigenfunction.at_qp();
        let zero = GridFunction::zeros(c.mesh.clone());
        for t in [0.0, 0.3, 1.0] {
            let a = tilde.rhs(t, &[&u, &u]).unwrap();
            let b = forced.rhs(t, &[&u, &u]).unwrap();
            let a0 = tilde.rhs(t, &[&zero, &zero]).unwrap();
            let b0 = forced.rhs(t, &[&zero, &zero]).unwrap();
            for q in 0..c.mesh.qp_count() {
                let s = [uq[q], 0.5 * uq[q]];
                let (va, vb) = (a.value(0, q, xs[q], s), b.value(0, q, xs[q], s));
                if t == 1.0 {
                    assert!((va - f.eval(0, xs[q], s)).abs() <= 1e-14);
                    assert!((va - vb).abs() <= 1e-14);
                } else {
                    let gap = (1.0 - t) * 1e-3 * e.lambda * phi[q];
                    assert!((vb - va - gap).abs() < 1e-12);
                    if phi[q] > 0.0 {
                        assert!(vb > va);
                    }
                }
                if t == 0.0 {
                    assert_eq!(a0.value(1, q, xs[q], [0.0, 0.0]), 0.0);
                    let forcing = b0.value(1, q, xs[q], [0.0, 0.0]);
                    assert!((forcing - 1e-3 * e.lambda * phi[q]).abs() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn config_gates() {
        let c = ctx(32, "2");
        let e = first_eigenpair(&c).unwrap();
        let base = HomotopyConfig::new(Family::Tilde, [&e, &e], [&c.p, &c.p]);
        let lam = [e.lambda, e.lambda];
        assert!(base.validate(lam, [2.0, 2.0]).is_ok());
        let mut bad = base.clone();
        bad.j[1] = e.lambda;
        assert!(bad.validate(lam, [2.0, 2.0]).is_err());
        // the bound shrinks with p⁻ below 2
        let mut low = base.clone();
        low.j = [0.6 * e.lambda, 0.1];
        assert!(low.validate(lam, [2.0, 2.0]).is_ok());
        assert!(low.validate(lam, [1.5, 2.0]).is_err());
        let mut grid = base.clone();
        grid.t_grid = vec![0.0, 0.5, 1.5];
        assert!(grid.validate(lam, [2.0, 2.0]).unwrap_err().to_string().contains("1.5"));
        let mut radii = base.clone();
        radii.r_hat = Some(5.0);
        radii.r = Some(4.0);
        assert!(radii.validate(lam, [2.0, 2.0]).is_err());
        let mut delta = base.clone();
        delta.family = Family::WithDelta;
        assert!(delta.validate(lam, [2.0, 2.0]).is_err());
    }

    /// With `p ≡ 2` and `J < λ₁` the forced scalar problem is linear while
    /// `‖u‖ ≤ 1`, and `u = δλ₁/(λ₁ − J) φ₁` solves it.
    #[test]
    fn forced_problem_has_the_explicit_solution() {
        let c = ctx(128, "2");
        let e = first_eigenpair(&c).unwrap();
        let cfg = NonexistenceConfig {
            j: 0.5 * e.lambda,
            delta: 1e-3,
            seeds: 12,
            rng_seed: 42,
        };
        let r = nonexistence_probe(&cfg, &c, &e).unwrap();
        assert!(r.applicable);
        assert!(r.converged_count > 0 && !r.pass);
        let exact = e.eigenfunction.scaled(2e-3);
        assert!(sobolev_norm(&exact, &c.p).unwrap() < 1.0);
        for a in r.attempts.iter().filter(|a| a.converged) {
            assert!(a.solution[0].max_distance(&exact).unwrap() < 1e-8, "{}", a.tag);
        }
    }

    #[test]
    fn probe_gates() {
        let c = ctx(32, "2");
        let e = first_eigenpair(&c).unwrap();
        let above = NonexistenceConfig {
            j: 1.5 * e.lambda,
            ..Default::default()
        };
        let r = nonexistence_probe(&above, &c, &e).unwrap();
        assert!(!r.applicable && r.attempts.is_empty() && r.reason.is_some());
        let degenerate = NonexistenceConfig {
            j: 0.5 * e.lambda,
            delta: 0.0,
            ..Default::default()
        };
        assert!(nonexistence_probe(&degenerate, &c, &e).is_err());
        let seeds = probe_seeds(&c, &e, 50, 42);
        assert_eq!(seeds.len(), 50);
        assert_eq!(seeds[0].tag, "zero");
    }

    #[test]
    fn unforced_start_is_trivial() {
        let c = ctx(64, "2");
        let e = first_eigenpair(&c).unwrap();
        let f = Nonlinearity::benchmark([20.0, 20.0], [2.0, 2.0]);
        let cfg = HomotopyConfig::new(Family::Tilde, [&e, &e], [&c.p, &c.p]);
        let h = Homotopy::new(&cfg, &f, [&c, &c], [&e, &e]).unwrap();
        let r = triviality_probe(&h, 12, 42, 1e-8).unwrap();
        assert!(r.pass, "{:?}", r.attempts.iter().map(|a| (a.converged, a.norm)).collect::<Vec<_>>());
    }

    #[test]
    fn boundedness_thresholds() {
        let trace = HomotopyTrace {
            family: Family::Tilde,
            denominators: DENOMINATOR_CONVENTION,
            records: vec![
                TraceRecord {
                    t: 0.0,
                    solutions: vec![],
                    attempts: vec![],
                },
                TraceRecord {
                    t: 0.5,
                    solutions: vec![TraceSolution {
                        tags: vec!["zero".into()],
                        norms: vec![1.0, 3.0],
                        pair_norm: 4.0,
                        residual: 0.0,
                        tolerance: 1e-10,
                        solution: vec![],
                    }],
                    attempts: vec![],
                },
            ],
        };
        let auto = boundedness_probe(&trace, None);
        assert!(auto.pass && auto.auto_sized);
        assert_eq!(auto.suggested, 10.0);
        assert_eq!(auto.max_at, Some(0.5));
        let tight = boundedness_probe(&trace, Some(2.0));
        assert!(!tight.pass);
        assert_eq!(tight.witness_t, Some(0.5));
        let empty = HomotopyTrace {
            records: vec![],
            ..trace
        };
        let e = boundedness_probe(&empty, Some(1e-3));
        assert!(e.pass && e.max_norm == 0.0);
    }

    #[test]
    fn zero_nonlinearity_has_only_the_zero_solution() {
        let c = ctx(64, "2");
        let e = first_eigenpair(&c).unwrap();
        let f = Nonlinearity::from_exprs("0", "0", [1.0, 1.0]).unwrap();
        let b = scaled_box([&c, &c], [&e, &e], 0.25, 0.01, 1.0).unwrap();
        let mut cfg = HomotopyConfig::new(Family::Tilde, [&e, &e], [&c.p, &c.p]);
        cfg.seeds = 10;
        let zero = GridFunction::zeros(c.mesh.clone());
        let r = annulus_search(&cfg, &f, [&c, &c], [&e, &e], &b, [&zero, &zero]).unwrap();
        assert_eq!(r.solutions.len(), 1);
        assert!(r.solutions[0].pair_norm < 1e-10);
        assert!(!r.second_solution_found);
        assert_eq!(r.converged, 10);
    }
}
