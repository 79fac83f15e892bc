//! Variable exponents `p(x)` with cached bounds, conjugates and the
//! directional monotonicity check used to guarantee the first eigenvalue.

use std::sync::Arc;

use serde::Serialize;

use crate::expr::Expr;
use crate::mesh::{GridFunction, Mesh};
use crate::{Error, Result};

const MONOTONE_TOL: f64 = 1e-12;

#[derive(Debug, Clone)]
enum Rule {
    Expr { expr: Expr, source: String },
    Table(GridFunction),
}

/// A variable exponent sampled on a mesh. Construction enforces
/// `1 < p⁻ ≤ p⁺ < ∞` over every node and quadrature point.
#[derive(Debug, Clone)]
pub struct ExponentField {
    rule: Rule,
    conjugations: u32,
    mesh: Arc<Mesh>,
    nodal: Vec<f64>,
    qp: Vec<f64>,
    p_minus: f64,
    p_plus: f64,
}

fn conj(p: f64) -> f64 {
    p / (p - 1.0)
}

impl ExponentField {
    /// Parses an expression in `x` and `y`.
    pub fn from_expr(src: &str, mesh: &Arc<Mesh>) -> Result<Self> {
        let expr = Expr::parse(src, &["x", "y"])?;
        Self::build(
            Rule::Expr {
                expr,
                source: src.trim().to_string(),
            },
            0,
            mesh.clone(),
        )
    }

    pub fn constant(q: f64, mesh: &Arc<Mesh>) -> Result<Self> {
        Self::from_expr(&format!("{q:?}"), mesh)
    }

    /// Nodal table, interpolated piecewise-linearly.
    pub fn from_table(table: GridFunction) -> Result<Self> {
        let mesh = table.mesh().clone();
        Self::build(Rule::Table(table), 0, mesh)
    }

    fn build(rule: Rule, conjugations: u32, mesh: Arc<Mesh>) -> Result<Self> {
        let eval_at = |p: [f64; 2]| -> f64 { eval_rule(&rule, conjugations, p).unwrap_or(f64::NAN) };
        let nodal: Vec<f64> = match &rule {
            Rule::Table(t) if t.mesh().same_as(&mesh) => {
                let mut v = t.values().to_vec();
                for _ in 0..conjugations {
                    v.iter_mut().for_each(|p| *p = conj(*p));
                }
                v
            }
            _ => mesh.nodes().iter().map(|&p| eval_at(p)).collect(),
        };
        let qp: Vec<f64> = match &rule {
            Rule::Table(_) => mesh.nodal_to_qp(&nodal),
            Rule::Expr { .. } => mesh.qp_coords().iter().map(|&p| eval_at(p)).collect(),
        };
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for &v in nodal.iter().chain(&qp) {
            if !v.is_finite() {
                return Err(Error::Hypothesis(format!("exponent is not finite (value {v})")));
            }
            lo = lo.min(v);
            hi = hi.max(v);
        }
        if lo <= 1.0 {
            return Err(Error::Hypothesis(format!("exponent infimum {lo} must exceed 1")));
        }
        Ok(ExponentField {
            rule,
            conjugations,
            mesh,
            nodal,
            qp,
            p_minus: lo,
            p_plus: hi,
        })
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    /// `(p⁻, p⁺)` over all nodes and quadrature points.
    pub fn bounds(&self) -> (f64, f64) {
        (self.p_minus, self.p_plus)
    }

    pub fn p_minus(&self) -> f64 {
        self.p_minus
    }

    pub fn p_plus(&self) -> f64 {
        self.p_plus
    }

    pub fn is_constant(&self) -> bool {
        self.p_plus - self.p_minus <= 1e-14 * self.p_plus
    }

    pub fn qp_values(&self) -> &[f64] {
        &self.qp
    }

    pub fn nodal_values(&self) -> &[f64] {
        &self.nodal
    }

    /// Pointwise evaluation; `None` outside the table's mesh.
    pub fn eval(&self, p: [f64; 2]) -> Option<f64> {
        eval_rule(&self.rule, self.conjugations, p)
    }

    /// Central-difference gradient of the exponent at `p`.
    pub fn gradient(&self, p: [f64; 2]) -> [f64; 2] {
        let h = 1e-6 * self.mesh.geometry().diameter().max(1.0);
        let d = |dx: f64, dy: f64| {
            let a = self.eval([p[0] + dx, p[1] + dy]);
            let b = self.eval([p[0] - dx, p[1] - dy]);
            match (a, b) {
                (Some(a), Some(b)) => (a - b) / (2.0 * h),
                _ => 0.0,
            }
        };
        if self.mesh.dimension() == 1 {
            [d(h, 0.0), 0.0]
        } else {
            [d(h, 0.0), d(0.0, h)]
        }
    }

    /// Pointwise conjugate exponent `p/(p−1)`.
    pub fn conjugate(&self) -> ExponentField {
        let mut nodal = self.nodal.clone();
        nodal.iter_mut().for_each(|p| *p = conj(*p));
        let mut qp = self.qp.clone();
        qp.iter_mut().for_each(|p| *p = conj(*p));
        let (lo, hi) = nodal
            .iter()
            .chain(&qp)
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| (l.min(v), h.max(v)));
        ExponentField {
            rule: self.rule.clone(),
            conjugations: self.conjugations + 1,
            mesh: self.mesh.clone(),
            nodal,
            qp,
            p_minus: lo,
            p_plus: hi,
        }
    }

    /// The same exponent sampled on another mesh. Tables must cover it.
    pub fn on_mesh(&self, mesh: &Arc<Mesh>) -> Result<ExponentField> {
        match &self.rule {
            Rule::Expr { .. } => Self::build(self.rule.clone(), self.conjugations, mesh.clone()),
            Rule::Table(t) => {
                let restricted = t.restrict(mesh)?;
                Self::build(Rule::Table(restricted), self.conjugations, mesh.clone())
            }
        }
    }

    /// Human-readable description of the evaluation rule.
    pub fn describe(&self) -> String {
        let base = match &self.rule {
            Rule::Expr { source, .. } => source.clone(),
            Rule::Table(t) => format!("table[{} nodes]", t.values().len()),
        };
        (0..self.conjugations).fold(base, |s, _| format!("conj({s})"))
    }

    /// Sobolev-embedding condition `p⁺ < N`; it cannot hold in 1D and is
    /// reported, never enforced.
    pub fn embedding_warning(&self) -> Option<String> {
        let n = self.mesh.dimension() as f64;
        (self.p_plus >= n).then(|| format!("p⁺ = {} is not below the dimension N = {n}", self.p_plus))
    }
}

fn eval_rule(rule: &Rule, conjugations: u32, p: [f64; 2]) -> Option<f64> {
    let mut v = match rule {
        Rule::Expr { expr, .. } => expr.eval(&p),
        Rule::Table(t) => t.mesh().evaluate(t.values(), p)?,
    };
    for _ in 0..conjugations {
        v = conj(v);
    }
    Some(v)
}

/// `(min, max)` of the exponent over the nodes and quadrature points of
/// `mesh`, failing when the minimum does not exceed 1.
pub fn bounds(p: &ExponentField, mesh: &Arc<Mesh>) -> Result<(f64, f64)> {
    if p.mesh().same_as(mesh) {
        Ok(p.bounds())
    } else {
        Ok(p.on_mesh(mesh)?.bounds())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct LineCheck {
    pub direction: [f64; 2],
    pub lines: usize,
    pub monotone: bool,
    /// Largest sampled decrease-and-increase along a single line
    /// (`min(total rise, total drop)` of the worst line).
    pub worst_violation: f64,
    pub witness: Option<[f64; 2]>,
}

#[derive(Debug, Clone, Serialize)]
pub struct HpReport {
    pub checks: Vec<LineCheck>,
    pub verdict: bool,
}

fn monotone_violation(vals: &[f64]) -> f64 {
    // largest reversal against either monotone direction, over all pairs
    let (mut hi, mut lo) = (f64::NEG_INFINITY, f64::INFINITY);
    let (mut worst_up, mut worst_down) = (0.0f64, 0.0f64);
    for &v in vals {
        hi = hi.max(v);
        lo = lo.min(v);
        worst_up = worst_up.max(hi - v);
        worst_down = worst_down.max(v - lo);
    }
    worst_up.min(worst_down)
}

fn chord(mesh: &Mesh, base: [f64; 2], dir: [f64; 2]) -> (f64, f64) {
    use crate::mesh::Geometry;
    let (lo, hi) = match *mesh.geometry() {
        Geometry::Interval { a, b, .. } => ([a, 0.0], [b, 0.0]),
        Geometry::Rectangle { ax, ay, bx, by, .. } => ([ax, ay], [bx, by]),
    };
    let mut t0 = f64::NEG_INFINITY;
    let mut t1 = f64::INFINITY;
    for k in 0..mesh.dimension() {
        if dir[k].abs() < 1e-15 {
            continue;
        }
        let a = (lo[k] - base[k]) / dir[k];
        let b = (hi[k] - base[k]) / dir[k];
        t0 = t0.max(a.min(b));
        t1 = t1.min(a.max(b));
    }
    (t0, t1)
}

fn sample_line(p: &ExponentField, base: [f64; 2], dir: [f64; 2], t0: f64, t1: f64, step: f64) -> Vec<f64> {
    let m = (((t1 - t0) / step).ceil() as usize).max(2);
    (0..=m)
        .filter_map(|k| {
            let t = t0 + (t1 - t0) * k as f64 / m as f64;
            p.eval([base[0] + t * dir[0], base[1] + t * dir[1]])
        })
        .collect()
}

/// Checks monotonicity of `p` along lines `x + t·l` through the mesh nodes
/// for every direction `l`; the verdict holds when some direction passes.
pub fn check_hp(p: &ExponentField, mesh: &Mesh, directions: &[[f64; 2]]) -> Result<HpReport> {
    check_hp_with_density(p, mesh, directions, 4)
}

/// As [`check_hp`], sampling each line `per_cell` times per element length.
pub fn check_hp_with_density(
    p: &ExponentField,
    mesh: &Mesh,
    directions: &[[f64; 2]],
    per_cell: usize,
) -> Result<HpReport> {
    if directions.is_empty() {
        return Err(Error::InvalidInput("check_hp needs at least one direction".into()));
    }
    let step = mesh.spacing() / per_cell.max(1) as f64;
    let mut checks = Vec::with_capacity(directions.len());
    for &d in directions {
        let len = d[0].hypot(if mesh.dimension() == 1 { 0.0 } else { d[1] });
        if !(len > 0.0) {
            return Err(Error::InvalidInput(format!("direction {d:?} is zero in this dimension")));
        }
        let dir = if mesh.dimension() == 1 { [d[0] / len, 0.0] } else { [d[0] / len, d[1] / len] };
        let mut worst = 0.0f64;
        let mut witness = None;
        let mut lines = 0;
        for &base in mesh.nodes() {
            let (t0, t1) = chord(mesh, base, dir);
            if !(t1 > t0) {
                continue;
            }
            lines += 1;
            let vals = sample_line(p, base, dir, t0, t1, step);
            let v = monotone_violation(&vals);
            if v > worst {
                worst = v;
                witness = Some(base);
            }
            if mesh.dimension() == 1 {
                // every base point lies on the same line
                break;
            }
        }
        checks.push(LineCheck {
            direction: dir,
            lines,
            monotone: worst <= MONOTONE_TOL,
            worst_violation: worst,
            witness,
        });
    }
    let verdict = checks.iter().any(|c| c.monotone);
    Ok(HpReport { checks, verdict })
}

/// Ray variant: monotonicity of `t ↦ p(center + t·w)` for `rays` unit
/// directions `w`, where `center` lies outside the closed domain.
pub fn check_hp_rays(p: &ExponentField, mesh: &Mesh, center: [f64; 2], rays: usize) -> Result<HpReport> {
    if mesh.locate(center).is_some() {
        return Err(Error::InvalidInput(format!("ray center {center:?} must lie outside the domain")));
    }
    let dirs: Vec<[f64; 2]> = if mesh.dimension() == 1 {
        vec![[1.0, 0.0], [-1.0, 0.0]]
    } else {
        (0..rays.max(1))
            .map(|k| {
                let a = std::f64::consts::TAU * k as f64 / rays.max(1) as f64;
                [a.cos(), a.sin()]
            })
            .collect()
    };
    let step = mesh.spacing() / 4.0;
    let mut worst = 0.0f64;
    let mut witness = None;
    let mut lines = 0;
    for dir in &dirs {
        let (t0, t1) = chord(mesh, center, *dir);
        let t0 = t0.max(0.0);
        if !(t1 > t0) {
            continue;
        }
        lines += 1;
        let v = monotone_violation(&sample_line(p, center, *dir, t0, t1, step));
        if v > worst {
            worst = v;
            witness = Some(*dir);
        }
    }
    let check = LineCheck {
        direction: [f64::NAN, f64::NAN],
        lines,
        monotone: worst <= MONOTONE_TOL,
        worst_violation: worst,
        witness,
    };
    let verdict = check.monotone;
    Ok(HpReport { checks: vec![check], verdict })
}
