//! Discrete `−Δ_{p(x)}` on P1 elements: residual and Jacobian assembly,
//! damped-Newton Dirichlet solves, and the comparison, mean-value and
//! Picone checks built on them.

use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::band::BandMatrix;
use crate::exponents::ExponentField;
use crate::mesh::{GridFunction, Mesh};
use crate::newton::{self, NewtonProblem, NewtonSettings};
use crate::{Error, Result};

/// Right-hand side of a scalar equation, evaluated at quadrature point `q`
/// (global index) with coordinates `x` and state `u`. Returns the value and
/// its derivative in `u`.
pub trait Source: Sync {
    fn eval(&self, q: usize, x: [f64; 2], u: f64) -> (f64, f64);
}

impl<F: Fn([f64; 2]) -> f64 + Sync> Source for F {
    fn eval(&self, _q: usize, x: [f64; 2], _u: f64) -> (f64, f64) {
        (self(x), 0.0)
    }
}

/// A right-hand side given by its values at every quadrature point.
#[derive(Debug, Clone)]
pub struct Sampled(pub Vec<f64>);

impl Source for Sampled {
    fn eval(&self, q: usize, _x: [f64; 2], _u: f64) -> (f64, f64) {
        (self.0[q], 0.0)
    }
}

/// A right-hand side depending on the state, `f(x, u) -> (f, ∂f/∂u)`.
pub struct StateFn<F>(pub F);

impl<F: Fn([f64; 2], f64) -> (f64, f64) + Sync> Source for StateFn<F> {
    fn eval(&self, _q: usize, x: [f64; 2], u: f64) -> (f64, f64) {
        (self.0)(x, u)
    }
}

/// Right-hand sides of a two-component system. `eval` returns `f_comp` and
/// its partial derivatives with respect to both states.
pub trait SystemSource: Sync {
    fn eval(&self, comp: usize, q: usize, x: [f64; 2], s: [f64; 2]) -> (f64, [f64; 2]);
}

struct Scalar<'a>(&'a dyn Source);

impl SystemSource for Scalar<'_> {
    fn eval(&self, _comp: usize, q: usize, x: [f64; 2], s: [f64; 2]) -> (f64, [f64; 2]) {
        let (v, d) = self.0.eval(q, x, s[0]);
        (v, [d, 0.0])
    }
}

#[derive(Debug, Clone)]
pub struct OperatorContext {
    pub mesh: Arc<Mesh>,
    pub p: ExponentField,
    pub eps_reg: f64,
    pub newton: NewtonSettings,
}

impl OperatorContext {
    pub fn new(p: ExponentField) -> Self {
        OperatorContext {
            mesh: p.mesh().clone(),
            p,
            eps_reg: 1e-10,
            newton: NewtonSettings::default(),
        }
    }

    pub fn with_regularization(mut self, eps: f64) -> Result<Self> {
        if !(eps >= 0.0) {
            return Err(Error::InvalidInput(format!("regularization must be ≥ 0, got {eps}")));
        }
        self.eps_reg = eps;
        Ok(self)
    }

    pub fn with_newton(mut self, settings: NewtonSettings) -> Result<Self> {
        if !(settings.tolerance > 0.0) {
            return Err(Error::InvalidInput("Newton tolerance must be positive".into()));
        }
        self.newton = settings;
        Ok(self)
    }

    fn check(&self, u: &GridFunction) -> Result<()> {
        if !u.mesh().same_as(&self.mesh) {
            return Err(Error::MeshMismatch);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SolveReport {
    #[serde(skip)]
    pub solution: GridFunction,
    /// Discrete dual norm of the residual at the regularization in use.
    pub residual: f64,
    /// Absolute tolerance applied: the configured one times
    /// `max(1, dual norm of the load)`.
    pub tolerance: f64,
    /// The same norm recomputed without regularization.
    pub residual_unregularized: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Euclidean norm of a dof vector scaled by `h^{d/2}`.
pub fn dual_norm(mesh: &Mesh, r: &[f64]) -> f64 {
    let l2 = r.iter().map(|v| v * v).sum::<f64>().sqrt();
    l2 / mesh.spacing().powf(mesh.dimension() as f64 / 2.0)
}

/// One or two coupled equations `−Δ_{p_c(x)} u_c = f_c(x, u)` with dofs
/// interleaved as `m·k + c`.
pub struct System<'a> {
    mesh: &'a Mesh,
    exponents: Vec<&'a [f64]>,
    eps: f64,
    source: &'a dyn SystemSource,
}

struct Local {
    res: Vec<f64>,
    jac: Vec<f64>,
}

impl<'a> System<'a> {
    pub fn new(mesh: &'a Mesh, exponents: Vec<&'a ExponentField>, eps: f64, source: &'a dyn SystemSource) -> Result<Self> {
        if exponents.is_empty() || exponents.len() > 2 {
            return Err(Error::InvalidInput("systems have one or two components".into()));
        }
        if exponents.iter().any(|p| !p.mesh().same_as(mesh)) {
            return Err(Error::MeshMismatch);
        }
        Ok(System {
            mesh,
            exponents: exponents.iter().map(|p| p.qp_values()).collect(),
            eps,
            source,
        })
    }

    fn components(&self) -> usize {
        self.exponents.len()
    }

    /// Nodal fields (zero on the boundary) from an interleaved dof vector.
    pub fn unpack(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let m = self.components();
        let mut out = vec![vec![0.0; self.mesh.node_count()]; m];
        for (k, &node) in self.mesh.interior_nodes().iter().enumerate() {
            for (c, field) in out.iter_mut().enumerate() {
                field[node] = x[m * k + c];
            }
        }
        out
    }

    pub fn pack(&self, fields: &[&[f64]]) -> Vec<f64> {
        let m = self.components();
        let mut x = vec![0.0; m * self.mesh.dof_count()];
        for (k, &node) in self.mesh.interior_nodes().iter().enumerate() {
            for c in 0..m {
                x[m * k + c] = fields[c][node];
            }
        }
        x
    }

    fn local(&self, e: usize, fields: &[Vec<f64>], reg: f64, with_jac: bool) -> Local {
        let mesh = self.mesh;
        let m = self.components();
        let cell = mesh.cell(e);
        let nv = cell.len();
        let grads = mesh.cell_basis_gradients(e);
        let size = m * nv;
        let mut res = vec![0.0; size];
        let mut jac = if with_jac { vec![0.0; size * size] } else { Vec::new() };
        let g: Vec<[f64; 2]> = fields.iter().map(|f| mesh.cell_gradient(e, f)).collect();
        let nq = mesh.qp_per_cell();
        let dot = |a: [f64; 2], b: [f64; 2]| a[0] * b[0] + a[1] * b[1];
        for j in 0..nq {
            let q = e * nq + j;
            let w = mesh.qp_weights()[q];
            let x = mesh.qp_coords()[q];
            let basis = mesh.qp_basis(j);
            let mut s = [0.0; 2];
            for (c, f) in fields.iter().enumerate() {
                s[c] = cell.iter().zip(basis).map(|(&v, b)| f[v] * b).sum();
            }
            for c in 0..m {
                let p = self.exponents[c][q];
                let gc = g[c];
                let (f, df) = self.source.eval(c, q, x, s);
                let s_res = dot(gc, gc) + self.eps * self.eps;
                let a_res = if s_res > 0.0 { s_res.powf(0.5 * (p - 2.0)) } else { 0.0 };
                for a in 0..nv {
                    res[m * a + c] += w * (a_res * dot(gc, grads[a]) - f * basis[a]);
                }
                if !with_jac {
                    continue;
                }
                let s_jac = dot(gc, gc) + reg * reg;
                let (a_jac, b_jac) = if s_jac > 0.0 {
                    let a = s_jac.powf(0.5 * (p - 2.0));
                    (a, (p - 2.0) * a / s_jac)
                } else {
                    (0.0, 0.0)
                };
                for a in 0..nv {
                    let row = m * a + c;
                    for b in 0..nv {
                        let stiff = a_jac * dot(grads[b], grads[a]) + b_jac * dot(gc, grads[b]) * dot(gc, grads[a]);
                        jac[row * size + m * b + c] += w * stiff;
                        for d in 0..m {
                            jac[row * size + m * b + d] -= w * df[d] * basis[b] * basis[a];
                        }
                    }
                }
            }
        }
        Local { res, jac }
    }

    fn assemble(&self, x: &[f64], reg: f64, with_jac: bool) -> (Vec<f64>, Option<BandMatrix>) {
        self.assemble_fields(&self.unpack(x), reg, with_jac)
    }

    fn assemble_fields(&self, fields: &[Vec<f64>], reg: f64, with_jac: bool) -> (Vec<f64>, Option<BandMatrix>) {
        let locals: Vec<Local> = (0..self.mesh.cell_count())
            .into_par_iter()
            .map(|e| self.local(e, fields, reg, with_jac))
            .collect();
        let m = self.components();
        let n = m * self.mesh.dof_count();
        let bw = m * (self.mesh.dof_bandwidth() + 1) - 1;
        let mut r = vec![0.0; n];
        let mut jac = with_jac.then(|| BandMatrix::zeros(n, bw, bw));
        for (e, loc) in locals.iter().enumerate() {
            let cell = self.mesh.cell(e);
            let size = m * cell.len();
            for (a, &va) in cell.iter().enumerate() {
                let Some(ka) = self.mesh.dof(va) else { continue };
                for c in 0..m {
                    let row = m * a + c;
                    r[m * ka + c] += loc.res[row];
                    if let Some(jm) = jac.as_mut() {
                        for (b, &vb) in cell.iter().enumerate() {
                            let Some(kb) = self.mesh.dof(vb) else { continue };
                            for d in 0..m {
                                let v = loc.jac[row * size + m * b + d];
                                if v != 0.0 {
                                    jm.add(m * ka + c, m * kb + d, v);
                                }
                            }
                        }
                    }
                }
            }
        }
        (r, jac)
    }

    /// Residual recomputed with a different regularization.
    pub fn residual_with(&self, x: &[f64], eps: f64) -> Vec<f64> {
        System { eps, ..self.clone_shallow() }.residual(x)
    }

    fn clone_shallow(&self) -> System<'a> {
        System {
            mesh: self.mesh,
            exponents: self.exponents.clone(),
            eps: self.eps,
            source: self.source,
        }
    }
}

impl NewtonProblem for System<'_> {
    fn size(&self) -> usize {
        self.components() * self.mesh.dof_count()
    }

    fn residual(&self, x: &[f64]) -> Vec<f64> {
        self.assemble(x, self.eps, false).0
    }

    fn jacobian(&self, x: &[f64], reg: f64) -> BandMatrix {
        self.assemble(x, reg, true).1.unwrap()
    }

    fn norm(&self, r: &[f64]) -> f64 {
        dual_norm(self.mesh, r)
    }

    fn base_regularization(&self) -> f64 {
        self.eps
    }

    fn scale(&self, x: &[f64]) -> f64 {
        // dual norm of the load alone
        let fields = self.unpack(x);
        let mesh = self.mesh;
        let m = self.components();
        let mut load = vec![0.0; m * mesh.dof_count()];
        let nq = mesh.qp_per_cell();
        for e in 0..mesh.cell_count() {
            let cell = mesh.cell(e);
            for j in 0..nq {
                let q = e * nq + j;
                let basis = mesh.qp_basis(j);
                let mut s = [0.0; 2];
                for (c, f) in fields.iter().enumerate() {
                    s[c] = cell.iter().zip(basis).map(|(&v, b)| f[v] * b).sum();
                }
                for c in 0..m {
                    let f = self.source.eval(c, q, mesh.qp_coords()[q], s).0;
                    for (&v, b) in cell.iter().zip(basis) {
                        if let Some(k) = mesh.dof(v) {
                            load[m * k + c] += mesh.qp_weights()[q] * f * b;
                        }
                    }
                }
            }
        }
        dual_norm(mesh, &load)
    }
}

/// Weak residual `∫|∇u|^{p−2}∇u·∇φ_k − ∫rhs·φ_k` for every interior hat
/// function `φ_k`, with `u` taken at all nodes (boundary values included).
pub fn weak_residual(p: &ExponentField, eps: f64, u: &GridFunction, rhs: &dyn Source) -> Result<Vec<f64>> {
    if !u.mesh().same_as(p.mesh()) {
        return Err(Error::MeshMismatch);
    }
    let src = Scalar(rhs);
    let sys = System::new(u.mesh(), vec![p], eps, &src)?;
    Ok(sys.assemble_fields(&[u.values().to_vec()], eps, false).0)
}

/// Per-interior-node residual of `−Δ_{p(x)} u = rhs` in dof order.
pub fn assemble_residual(ctx: &OperatorContext, u: &GridFunction, rhs: &dyn Source) -> Result<Vec<f64>> {
    ctx.check(u)?;
    let src = Scalar(rhs);
    let sys = System::new(&ctx.mesh, vec![&ctx.p], ctx.eps_reg, &src)?;
    Ok(sys.residual(&u.dofs()))
}

/// Jacobian of [`assemble_residual`] with gradient regularization `reg`.
pub fn assemble_jacobian(ctx: &OperatorContext, u: &GridFunction, rhs: &dyn Source, reg: f64) -> Result<BandMatrix> {
    ctx.check(u)?;
    let src = Scalar(rhs);
    let sys = System::new(&ctx.mesh, vec![&ctx.p], ctx.eps_reg, &src)?;
    Ok(sys.jacobian(&u.dofs(), reg))
}

/// Solves `−Δ_{p(x)} u = rhs`, `u = 0` on the boundary, from `initial`.
/// Non-convergence is reported through the flag, not as an error.
pub fn dirichlet_solve(ctx: &OperatorContext, rhs: &dyn Source, initial: &GridFunction) -> Result<SolveReport> {
    ctx.check(initial)?;
    let src = Scalar(rhs);
    let sys = System::new(&ctx.mesh, vec![&ctx.p], ctx.eps_reg, &src)?;
    let out = newton::solve(&sys, &initial.dofs(), &ctx.newton);
    let raw = dual_norm(&ctx.mesh, &sys.residual_with(&out.x, 0.0));
    Ok(SolveReport {
        solution: GridFunction::from_dofs(ctx.mesh.clone(), &out.x),
        residual: out.residual,
        tolerance: out.tolerance,
        residual_unregularized: raw,
        iterations: out.iterations,
        converged: out.converged,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct SystemReport {
    #[serde(skip)]
    pub solution: [GridFunction; 2],
    pub residual: f64,
    pub tolerance: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Newton solve of the coupled pair `−Δ_{p_i(x)} u_i = f_i(x, u₁, u₂)`.
pub fn solve_system(
    p: [&ExponentField; 2],
    eps: f64,
    settings: &NewtonSettings,
    source: &dyn SystemSource,
    initial: [&GridFunction; 2],
) -> Result<SystemReport> {
    let mesh = p[0].mesh().clone();
    if initial.iter().any(|u| !u.mesh().same_as(&mesh)) {
        return Err(Error::MeshMismatch);
    }
    let sys = System::new(&mesh, p.to_vec(), eps, source)?;
    let x0 = sys.pack(&[initial[0].values(), initial[1].values()]);
    let out = newton::solve(&sys, &x0, settings);
    let fields = sys.unpack(&out.x);
    let mut it = fields.into_iter();
    let u1 = GridFunction::new(mesh.clone(), it.next().unwrap())?;
    let u2 = GridFunction::new(mesh.clone(), it.next().unwrap())?;
    Ok(SystemReport {
        solution: [u1, u2],
        residual: out.residual,
        tolerance: out.tolerance,
        iterations: out.iterations,
        converged: out.converged,
    })
}

/// Residual norm of the coupled pair at a given state.
pub fn system_residual(p: [&ExponentField; 2], eps: f64, source: &dyn SystemSource, u: [&GridFunction; 2]) -> Result<f64> {
    let mesh = p[0].mesh();
    let sys = System::new(mesh, p.to_vec(), eps, source)?;
    let x = sys.pack(&[u[0].values(), u[1].values()]);
    Ok(dual_norm(mesh, &sys.residual(&x)))
}

#[derive(Debug, Clone, Serialize)]
pub struct ComparisonReport {
    /// `max(u₁ − u₂)` over nodes.
    pub max_difference: f64,
    pub first: SolveReport,
    pub second: SolveReport,
    pub conclusive: bool,
    pub pass: bool,
}

/// Accepted positive part of `u₁ − u₂`.
pub const COMPARISON_TOL: f64 = 1e-8;

/// Solves with `h1 ≤ h2` and checks `u₁ ≤ u₂`.
pub fn comparison_check(ctx: &OperatorContext, h1: &dyn Source, h2: &dyn Source) -> Result<ComparisonReport> {
    let mesh = &ctx.mesh;
    for (q, &x) in mesh.qp_coords().iter().enumerate() {
        let (a, b) = (h1.eval(q, x, 0.0).0, h2.eval(q, x, 0.0).0);
        if a > b {
            return Err(Error::Hypothesis(format!("h1 > h2 at ({:.4}, {:.4})", x[0], x[1])));
        }
    }
    let zero = GridFunction::zeros(mesh.clone());
    let first = dirichlet_solve(ctx, h1, &zero)?;
    let second = dirichlet_solve(ctx, h2, &first.solution)?;
    let max_difference = first
        .solution
        .values()
        .iter()
        .zip(second.solution.values())
        .map(|(a, b)| a - b)
        .fold(f64::NEG_INFINITY, f64::max);
    let conclusive = first.converged && second.converged;
    Ok(ComparisonReport {
        max_difference,
        conclusive,
        pass: conclusive && max_difference <= COMPARISON_TOL,
        first,
        second,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct MeanValueReport {
    pub k_hat: f64,
    pub numerator: f64,
    pub denominator: f64,
    pub positive_denominator: bool,
    pub within_bounds: bool,
    pub solve: SolveReport,
}

/// Solves `−Δ_{p(x)} u = h` and forms
/// `k̂ = ∫k|∇u|^{p−2}∇u·∇φ / ∫|∇u|^{p−2}∇u·∇φ`, checking `m < k̂ < M`.
pub fn mean_value_constant(
    ctx: &OperatorContext,
    k: &dyn Fn([f64; 2]) -> f64,
    bounds: (f64, f64),
    h: &dyn Source,
    phi: &GridFunction,
) -> Result<MeanValueReport> {
    ctx.check(phi)?;
    let mesh = &ctx.mesh;
    let (lo, hi) = bounds;
    if phi.values().iter().any(|&v| v < 0.0) || phi.max() <= 0.0 {
        return Err(Error::Hypothesis("φ must be nonnegative and not identically zero".into()));
    }
    for (q, &x) in mesh.qp_coords().iter().enumerate() {
        if !(h.eval(q, x, 0.0).0 > 0.0) {
            return Err(Error::Hypothesis(format!("h is not positive at ({:.4}, {:.4})", x[0], x[1])));
        }
        let kv = k(x);
        if !(lo < kv && kv < hi) {
            return Err(Error::Hypothesis(format!("k = {kv} leaves ({lo}, {hi})")));
        }
    }
    let solve = dirichlet_solve(ctx, h, &GridFunction::zeros(mesh.clone()))?;
    if !solve.converged {
        return Err(Error::Numerical(format!(
            "Dirichlet solve did not converge (residual {:.3e})",
            solve.residual
        )));
    }
    let u = solve.solution.values();
    let nq = mesh.qp_per_cell();
    let (mut num, mut den) = (0.0, 0.0);
    for e in 0..mesh.cell_count() {
        let g = mesh.cell_gradient(e, u);
        let gp = mesh.cell_gradient(e, phi.values());
        let gg = g[0].hypot(g[1]);
        if gg == 0.0 {
            continue;
        }
        let flux = g[0] * gp[0] + g[1] * gp[1];
        for j in 0..nq {
            let q = e * nq + j;
            let v = mesh.qp_weights()[q] * gg.powf(ctx.p.qp_values()[q] - 2.0) * flux;
            num += k(mesh.qp_coords()[q]) * v;
            den += v;
        }
    }
    let k_hat = num / den;
    Ok(MeanValueReport {
        k_hat,
        numerator: num,
        denominator: den,
        positive_denominator: den > 0.0,
        within_bounds: den > 0.0 && lo < k_hat && k_hat < hi,
        solve,
    })
}

/// How the gradient of `w₁^{p}/w₂^{p−1}` treats a varying exponent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum PiconeMode {
    /// `p` frozen at each point.
    Frozen,
    /// Adds the `ln(w₁/w₂)∇p` contribution.
    WithLogTerm,
}

/// Both sides of Picone's identity at every quadrature point.
#[derive(Debug, Clone)]
pub struct PiconeFields {
    pub l1: Vec<f64>,
    pub l2: Vec<f64>,
    /// Sum of the absolute values of the terms entering `L₁` and `L₂`,
    /// used to measure their difference relatively.
    pub scale: Vec<f64>,
}

impl PiconeFields {
    pub fn min_l1(&self) -> f64 {
        self.l1.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_relative_gap(&self) -> f64 {
        self.l1
            .iter()
            .zip(&self.l2)
            .zip(&self.scale)
            .map(|((a, b), s)| if *s > 0.0 { (a - b).abs() / s } else { (a - b).abs() })
            .fold(0.0, f64::max)
    }
}

/// Smallest admissible value of `w₂` at quadrature points.
pub const PICONE_FLOOR: f64 = 1e-12;

/// Evaluates
/// `L₁ = |∇w₁|^p + (p−1)(w₁/w₂)^p|∇w₂|^p − p(w₁/w₂)^{p−1}|∇w₂|^{p−2}∇w₂·∇w₁` and
/// `L₂ = |∇w₁|^p − |∇w₂|^{p−2}∇w₂·∇(w₁^p/w₂^{p−1})`.
pub fn picone(w1: &GridFunction, w2: &GridFunction, p: &ExponentField, mode: PiconeMode) -> Result<PiconeFields> {
    let mesh = w1.mesh();
    if !w2.mesh().same_as(mesh) || !p.mesh().same_as(mesh) {
        return Err(Error::MeshMismatch);
    }
    if w1.values().iter().any(|&v| v < 0.0) {
        return Err(Error::Hypothesis("w1 must be nonnegative".into()));
    }
    let a_qp = w1.at_qp();
    let b_qp = w2.at_qp();
    if let Some(v) = b_qp.iter().find(|&&v| !(v >= PICONE_FLOOR)) {
        return Err(Error::Hypothesis(format!("w2 touches zero ({v:e}) at a quadrature point")));
    }
    let nq = mesh.qp_per_cell();
    let nqp = mesh.qp_count();
    let (mut l1, mut l2, mut scale) = (Vec::with_capacity(nqp), Vec::with_capacity(nqp), Vec::with_capacity(nqp));
    for e in 0..mesh.cell_count() {
        let g1 = mesh.cell_gradient(e, w1.values());
        let g2 = mesh.cell_gradient(e, w2.values());
        let n1 = g1[0].hypot(g1[1]);
        let n2 = g2[0].hypot(g2[1]);
        let cross = g2[0] * g1[0] + g2[1] * g1[1];
        let self2 = n2 * n2;
        for j in 0..nq {
            let q = e * nq + j;
            let pq = p.qp_values()[q];
            let (a, b) = (a_qp[q], b_qp[q]);
            let t = a / b;
            let n1p = n1.powf(pq);
            let n2pm2 = if n2 > 0.0 { n2.powf(pq - 2.0) } else { 0.0 };
            let tp1 = t.powf(pq - 1.0);
            let tp = t.powf(pq);
            let term2 = (pq - 1.0) * tp * n2pm2 * self2;
            let term3 = pq * tp1 * n2pm2 * cross;
            l1.push(n1p + term2 - term3);
            // ∇(w₁^p/w₂^{p−1}) = p t^{p−1}∇w₁ − (p−1) t^p ∇w₂ [+ w₂ t^p ln t ∇p]
            let mut inner = term3 - term2;
            let mut extra = 0.0;
            if mode == PiconeMode::WithLogTerm && t > 0.0 {
                let gp = p.gradient(mesh.qp_coords()[q]);
                extra = n2pm2 * b * tp * t.ln() * (g2[0] * gp[0] + g2[1] * gp[1]);
                inner += extra;
            }
            l2.push(n1p - inner);
            scale.push(n1p + term2.abs() + term3.abs() + extra.abs());
        }
    }
    Ok(PiconeFields { l1, l2, scale })
}
