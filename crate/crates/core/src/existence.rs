//! Constant-sign solutions of the coupled system
//! `−Δ_{p_i(x)} u_i = f_i(x, u₁, u₂)` by sub- and supersolutions: hypothesis
//! probes, construction and verification of the ordered box, and monotone
//! iteration inside it.

use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::eigen::{enlarged_eigenpair, first_eigenpair, EigenPair};
use crate::exponents::ExponentField;
use crate::expr::Expr;
use crate::mesh::{GridFunction, Mesh};
use crate::operator::{dirichlet_solve, solve_system, system_residual, weak_residual, OperatorContext, Sampled, SystemSource};
use crate::{Error, Result};

type Closure = Arc<dyn Fn([f64; 2], [f64; 2]) -> f64 + Send + Sync>;

#[derive(Clone)]
enum Component {
    Expr { f: Expr, d: [Expr; 2], source: String },
    Closure(Closure),
    Reflected(Box<Component>),
}

impl Component {
    fn eval(&self, x: [f64; 2], s: [f64; 2]) -> f64 {
        match self {
            Component::Expr { f, .. } => f.eval(&[x[0], x[1], s[0], s[1]]),
            Component::Closure(c) => c(x, s),
            Component::Reflected(c) => -c.eval(x, [-s[0], -s[1]]),
        }
    }

    fn partials(&self, x: [f64; 2], s: [f64; 2]) -> [f64; 2] {
        match self {
            Component::Expr { d, .. } => {
                let v = [x[0], x[1], s[0], s[1]];
                [d[0].eval(&v), d[1].eval(&v)]
            }
            Component::Closure(c) => {
                let mut out = [0.0; 2];
                for (j, o) in out.iter_mut().enumerate() {
                    let h = 1e-7 * s[j].abs().max(1.0);
                    let (mut a, mut b) = (s, s);
                    a[j] += h;
                    b[j] -= h;
                    *o = (c(x, a) - c(x, b)) / (2.0 * h);
                }
                out
            }
            Component::Reflected(c) => c.partials(x, [-s[0], -s[1]]),
        }
    }

    fn describe(&self) -> String {
        match self {
            Component::Expr { source, .. } => source.clone(),
            Component::Closure(_) => "<closure>".into(),
            Component::Reflected(c) => format!("-f(x, -s1, -s2) with f = {}", c.describe()),
        }
    }
}

/// The pair `f₁, f₂` with the declared small-`s` constants `η₁, η₂`.
#[derive(Clone)]
pub struct Nonlinearity {
    comps: [Component; 2],
    pub eta: [f64; 2],
    /// Declared `f_i ≥ 0`; checked by the hypothesis probe.
    pub nonnegative: bool,
}

impl fmt::Debug for Nonlinearity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Nonlinearity")
            .field("f1", &self.comps[0].describe())
            .field("f2", &self.comps[1].describe())
            .field("eta", &self.eta)
            .finish()
    }
}

/// Variable names available to nonlinearity expressions.
pub const VARIABLES: [&str; 4] = ["x", "y", "s1", "s2"];

impl Nonlinearity {
    pub fn from_exprs(f1: &str, f2: &str, eta: [f64; 2]) -> Result<Self> {
        let comp = |src: &str| -> Result<Component> {
            let f = Expr::parse(src, &VARIABLES)?;
            let d = [f.derivative("s1")?, f.derivative("s2")?];
            Ok(Component::Expr {
                f,
                d,
                source: src.trim().to_string(),
            })
        };
        Ok(Nonlinearity {
            comps: [comp(f1)?, comp(f2)?],
            eta,
            nonnegative: false,
        })
    }

    /// Closures `f_i(x, [s₁, s₂])`; derivatives by central differences.
    pub fn from_fns<F1, F2>(f1: F1, f2: F2, eta: [f64; 2]) -> Self
    where
        F1: Fn([f64; 2], [f64; 2]) -> f64 + Send + Sync + 'static,
        F2: Fn([f64; 2], [f64; 2]) -> f64 + Send + Sync + 'static,
    {
        Nonlinearity {
            comps: [Component::Closure(Arc::new(f1)), Component::Closure(Arc::new(f2))],
            eta,
            nonnegative: false,
        }
    }

    /// `f_i = a_i |s_i|^{q_i−2} s_i/(1 + |s_i|) · (1 + s_j²/(1 + s_j²))` with
    /// `q_i = p_i⁻`, declaring `η_i = 0.99 a_i`. Odd in `s_i`, even in `s_j`.
    pub fn benchmark(a: [f64; 2], p_minus: [f64; 2]) -> Self {
        let term = |i: usize| {
            let (si, sj) = if i == 0 { ("s1", "s2") } else { ("s2", "s1") };
            let power = if p_minus[i] == 2.0 {
                si.to_string()
            } else {
                format!("abs({si})^({:?})*{si}", p_minus[i] - 2.0)
            };
            format!("{:?}*{power}/(1 + abs({si}))*(1 + {sj}^2/(1 + {sj}^2))", a[i])
        };
        Self::from_exprs(&term(0), &term(1), [0.99 * a[0], 0.99 * a[1]]).expect("benchmark expressions parse")
    }

    pub fn eval(&self, i: usize, x: [f64; 2], s: [f64; 2]) -> f64 {
        self.comps[i].eval(x, s)
    }

    pub fn partials(&self, i: usize, x: [f64; 2], s: [f64; 2]) -> [f64; 2] {
        self.comps[i].partials(x, s)
    }

    /// `f̌_i(x, s) = −f_i(x, −s)`, whose positive solutions are the negated
    /// negative solutions of the original system.
    pub fn reflected(&self) -> Nonlinearity {
        Nonlinearity {
            comps: [
                Component::Reflected(Box::new(self.comps[0].clone())),
                Component::Reflected(Box::new(self.comps[1].clone())),
            ],
            eta: self.eta,
            nonnegative: false,
        }
    }

    pub fn describe(&self, i: usize) -> String {
        self.comps[i].describe()
    }
}

impl SystemSource for Nonlinearity {
    fn eval(&self, comp: usize, _q: usize, x: [f64; 2], s: [f64; 2]) -> (f64, [f64; 2]) {
        (self.comps[comp].eval(x, s), self.comps[comp].partials(x, s))
    }
}

/// Sampling resolution for the hypothesis probes and constant extraction.
#[derive(Debug, Clone, Serialize)]
pub struct SamplePlan {
    /// `|s_i|` levels probing the small-`s` hypothesis.
    pub small: Vec<f64>,
    /// `|s_i|` levels probing the large-`s` hypothesis.
    pub large: Vec<f64>,
    pub s_min: f64,
    pub s_max: f64,
    /// Log-grid density for the `s_i` scans.
    pub per_decade: usize,
    /// Log-grid density for the other component.
    pub coupling_per_decade: usize,
    /// Points per axis when bounding `f` over the box at a quadrature point.
    pub sub_grid: usize,
}

impl Default for SamplePlan {
    fn default() -> Self {
        SamplePlan {
            small: vec![1e-2, 1e-3, 1e-4],
            large: vec![1e2, 1e3, 1e4],
            s_min: 1e-4,
            s_max: 1e4,
            per_decade: 8,
            coupling_per_decade: 2,
            sub_grid: 5,
        }
    }
}

fn log_grid(lo: f64, hi: f64, per_decade: usize) -> Vec<f64> {
    let decades = (hi / lo).log10();
    let n = (decades * per_decade.max(1) as f64).round().max(1.0) as usize;
    (0..=n).map(|k| lo * 10f64.powf(decades * k as f64 / n as f64)).collect()
}

impl SamplePlan {
    fn levels(&self) -> Vec<f64> {
        log_grid(self.s_min, self.s_max, self.per_decade)
    }

    fn coupling(&self) -> Vec<f64> {
        log_grid(self.s_min, self.s_max, self.coupling_per_decade)
    }

    /// `0` and `±` the coupling grid.
    fn coupling_signed(&self) -> Vec<f64> {
        let c = self.coupling();
        let mut out: Vec<f64> = c.iter().rev().map(|v| -v).collect();
        out.push(0.0);
        out.extend(c);
        out
    }
}

fn with_comp(i: usize, si: f64, sj: f64) -> [f64; 2] {
    if i == 0 {
        [si, sj]
    } else {
        [sj, si]
    }
}

/// A sample point and the probed value there.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Witness {
    pub x: [f64; 2],
    pub s: [f64; 2],
    pub value: f64,
}

fn pick(a: Option<Witness>, b: Option<Witness>, min: bool) -> Option<Witness> {
    match (a, b) {
        (None, w) | (w, None) => w,
        (Some(a), Some(b)) => {
            let b_better = if min { b.value < a.value } else { b.value > a.value };
            Some(if b_better { b } else { a })
        }
    }
}

/// Extreme of `g(x, s)` over all quadrature points and the given `s` pairs.
/// Non-finite values win, so they are never hidden.
fn extreme(xs: &[[f64; 2]], pairs: &[[f64; 2]], min: bool, g: &(dyn Fn([f64; 2], [f64; 2]) -> f64 + Sync)) -> Option<Witness> {
    xs.par_iter()
        .map(|&x| {
            let mut best: Option<Witness> = None;
            for &s in pairs {
                let mut value = g(x, s);
                if value.is_nan() {
                    value = if min { f64::NEG_INFINITY } else { f64::INFINITY };
                }
                best = pick(best, Some(Witness { x, s, value }), min);
            }
            best
        })
        .reduce(|| None, |a, b| pick(a, b, min))
}

#[derive(Debug, Clone, Serialize)]
pub struct HypothesisCheck {
    pub name: String,
    pub component: usize,
    pub pass: bool,
    pub detail: String,
    pub witness: Option<Witness>,
}

#[derive(Debug, Clone, Serialize)]
pub struct HypothesisReport {
    pub checks: Vec<HypothesisCheck>,
    /// `λ₁,p_i · ‖φ₁,p_i‖_∞^{p_i⁺−1}`, the lower bound `η_i` must exceed.
    pub eta_threshold: [f64; 2],
    /// Small-`s` radius on which `f_i ≥ η_i s_i^{p_i⁻−1}` held on the grid
    /// (positive branch); `None` when no grid level qualifies.
    pub rho_hat: Option<f64>,
    /// The same for the negative branch.
    pub rho_hat_negative: Option<f64>,
    pub probed_range: [f64; 2],
    pub note: String,
    pub pass: bool,
}

impl HypothesisReport {
    pub fn passed(&self, name: &str) -> bool {
        self.checks.iter().filter(|c| c.name == name).all(|c| c.pass)
    }
}

fn signed_power(s: f64, q: f64) -> f64 {
    s.abs().powf(q - 2.0) * s
}

/// Largest grid level `ρ̂` with `f_i/|s_i|^{p_i⁻−2}s_i ≥ η_i` for all grid
/// `|s_i|, |s_j| ≤ ρ̂` of the given sign and every quadrature point.
fn small_radius(f: &Nonlinearity, p_minus: [f64; 2], xs: &[[f64; 2]], plan: &SamplePlan, sign: f64) -> Option<f64> {
    let levels = plan.levels();
    let n = levels.len();
    // ok[a][b]: the inequality holds for both components at |s_i| = levels[a], |s_j| = levels[b]
    let ok: Vec<Vec<bool>> = (0..n)
        .into_par_iter()
        .map(|a| {
            (0..n)
                .map(|b| {
                    (0..2).all(|i| {
                        let si = sign * levels[a];
                        let sj = sign * levels[b];
                        xs.iter().all(|&x| {
                            let v = f.eval(i, x, with_comp(i, si, sj)) / signed_power(si, p_minus[i]);
                            v >= f.eta[i]
                        })
                    })
                })
                .collect()
        })
        .collect();
    let mut best = None;
    for k in 0..n {
        let square_ok = (0..=k).all(|a| ok[a][k] && ok[k][a]);
        if !square_ok {
            break;
        }
        best = Some(levels[k]);
    }
    best
}

/// Probes the small-`s` lower bound, the large-`s` decay, boundedness and
/// (if declared) nonnegativity on the sample plan.
pub fn check_hypotheses(
    f: &Nonlinearity,
    p: [&ExponentField; 2],
    eigen: [&EigenPair; 2],
    plan: &SamplePlan,
) -> Result<HypothesisReport> {
    let mesh = p[0].mesh();
    if !p[1].mesh().same_as(mesh) {
        return Err(Error::MeshMismatch);
    }
    let xs = mesh.qp_coords();
    let p_minus = [p[0].p_minus(), p[1].p_minus()];
    let p_plus = [p[0].p_plus(), p[1].p_plus()];
    let mut threshold = [0.0; 2];
    let mut checks = Vec::new();
    let coupling = plan.coupling();
    for i in 0..2 {
        threshold[i] = eigen[i].lambda * eigen[i].eigenfunction.max_abs().powf(p_plus[i] - 1.0);
        let eta_ok = f.eta[i] > threshold[i];
        checks.push(HypothesisCheck {
            name: "eta threshold".into(),
            component: i + 1,
            pass: eta_ok,
            detail: format!(
                "eta = {:.6e}, lambda1*|phi1|^(p+-1) = {:.6e}, margin {:.6e}",
                f.eta[i],
                threshold[i],
                f.eta[i] - threshold[i]
            ),
            witness: None,
        });
        for (branch, sign) in [("small-state growth, positive", 1.0), ("small-state growth, negative", -1.0)] {
            let pairs: Vec<[f64; 2]> = plan
                .small
                .iter()
                .flat_map(|&si| coupling.iter().map(move |&sj| with_comp(i, sign * si, sign * sj)))
                .collect();
            let q = p_minus[i];
            let w = extreme(xs, &pairs, true, &|x, s| f.eval(i, x, s) / signed_power(s[i], q));
            let pass = w.is_some_and(|w| w.value >= f.eta[i]);
            checks.push(HypothesisCheck {
                name: branch.into(),
                component: i + 1,
                pass,
                detail: format!(
                    "min ratio {:.6e} vs eta {:.6e} over |s_i| in {:?}",
                    w.map_or(f64::NAN, |w| w.value),
                    f.eta[i],
                    plan.small
                ),
                witness: w,
            });
        }
        // decay: the supremum of the ratio must shrink toward zero
        let signed = plan.coupling_signed();
        let mut sups = Vec::new();
        let mut last = None;
        for &level in &plan.large {
            let pairs: Vec<[f64; 2]> = [level, -level]
                .iter()
                .flat_map(|&si| signed.iter().map(move |&sj| with_comp(i, si, sj)))
                .collect();
            let q = p_minus[i];
            let w = extreme(xs, &pairs, false, &|x, s| f.eval(i, x, s) / signed_power(s[i], q));
            sups.push(w.map_or(f64::NAN, |w| w.value));
            last = w;
        }
        let first = sups.first().copied().unwrap_or(f64::NAN);
        let top = sups.last().copied().unwrap_or(f64::NAN);
        let decays = top.is_finite() && (top <= 1e-6 || top <= 0.1 * first.max(0.0));
        checks.push(HypothesisCheck {
            name: "large-state decay".into(),
            component: i + 1,
            pass: decays,
            detail: format!("sup ratio at |s_i| = {:?}: {:?}", plan.large, sups),
            witness: last,
        });
        // boundedness on the sampled box
        let levels = plan.levels();
        let pairs: Vec<[f64; 2]> = levels
            .iter()
            .flat_map(|&a| [a, -a])
            .flat_map(|si| signed.iter().map(move |&sj| with_comp(i, si, sj)))
            .collect();
        let w = extreme(xs, &pairs, false, &|x, s| f.eval(i, x, s).abs());
        checks.push(HypothesisCheck {
            name: "bounded on compacts".into(),
            component: i + 1,
            pass: w.is_some_and(|w| w.value.is_finite()),
            detail: format!("max |f| {:.6e} for |s| <= {:e}", w.map_or(f64::NAN, |w| w.value), plan.s_max),
            witness: w,
        });
        if f.nonnegative {
            let w = extreme(xs, &pairs, true, &|x, s| f.eval(i, x, s));
            checks.push(HypothesisCheck {
                name: "nonnegative".into(),
                component: i + 1,
                pass: w.is_some_and(|w| w.value >= 0.0),
                detail: format!("min f {:.6e}", w.map_or(f64::NAN, |w| w.value)),
                witness: w,
            });
        }
    }
    let rho_hat = small_radius(f, p_minus, xs, plan, 1.0);
    let rho_hat_negative = small_radius(f, p_minus, xs, plan, -1.0);
    let pass = checks.iter().all(|c| c.pass);
    Ok(HypothesisReport {
        checks,
        eta_threshold: threshold,
        rho_hat,
        rho_hat_negative,
        probed_range: [plan.s_min, plan.s_max],
        note: "limits are probed on a finite grid: a failure falsifies a hypothesis, a pass does not prove it".into(),
        pass,
    })
}

/// Constants certifying the supersolution.
#[derive(Debug, Clone, Serialize)]
pub struct SuperConstants {
    pub eps: f64,
    pub tau: [f64; 2],
    pub eta_bar: f64,
    pub rho: f64,
    pub c_rho: f64,
    pub lambda_tilde: [f64; 2],
    /// `‖φ̃₁,p_i‖_∞` over the enlarged domain.
    pub phi_tilde_max: [f64; 2],
    pub p_minus: [f64; 2],
    pub p_plus: [f64; 2],
    pub margin: f64,
}

#[derive(Debug, Clone)]
pub struct Supersolution {
    pub upper: [GridFunction; 2],
    /// The restricted enlarged eigenfunctions `φ̃₁,p_i` on the original mesh.
    pub phi_tilde: [GridFunction; 2],
    pub constants: SuperConstants,
}

/// `η̄ = 0.99 · min_i (λ̃_i/2) τ_i^{p_i⁺−1} ‖φ̃_i‖_∞^{−(p_i⁻−1)}`.
pub fn eta_bar_bound(c: &SuperConstants) -> f64 {
    (0..2)
        .map(|i| 0.5 * c.lambda_tilde[i] * c.tau[i].powf(c.p_plus[i] - 1.0) * c.phi_tilde_max[i].powf(-(c.p_minus[i] - 1.0)))
        .fold(f64::INFINITY, f64::min)
}

/// Builds `ū_i = ε⁻¹ φ̃₁,p_i` from eigenpairs on the domain dilated by
/// `margin`, with `ρ`, `c_ρ` read off samples of `f`.
pub fn construct_supersolution(f: &Nonlinearity, ctx: [&OperatorContext; 2], margin: f64, plan: &SamplePlan) -> Result<Supersolution> {
    let big = [enlarged_eigenpair(ctx[0], margin)?, enlarged_eigenpair(ctx[1], margin)?];
    let p_minus = [ctx[0].p.p_minus(), ctx[1].p.p_minus()];
    let p_plus = [ctx[0].p.p_plus(), ctx[1].p.p_plus()];
    let mut c = SuperConstants {
        eps: 0.0,
        tau: [big[0].tau, big[1].tau],
        eta_bar: 0.0,
        rho: 0.0,
        c_rho: 0.0,
        lambda_tilde: [big[0].pair.lambda, big[1].pair.lambda],
        phi_tilde_max: [big[0].pair.eigenfunction.max(), big[1].pair.eigenfunction.max()],
        p_minus,
        p_plus,
        margin,
    };
    c.eta_bar = 0.99 * eta_bar_bound(&c);

    let xs = ctx[0].mesh.qp_coords();
    let levels = plan.levels();
    let signed = plan.coupling_signed();
    // ρ: the first grid level from which every level has |f_i| ≤ η̄|s_i|^{p_i⁻−1}
    let mut rho = levels[0];
    for i in 0..2 {
        let eta_bar = c.eta_bar;
        let violating: Vec<bool> = levels
            .par_iter()
            .map(|&a| {
                xs.iter().any(|&x| {
                    [a, -a].iter().any(|&si| {
                        signed.iter().any(|&sj| {
                            let v = f.eval(i, x, with_comp(i, si, sj)).abs();
                            !(v <= eta_bar * a.powf(p_minus[i] - 1.0))
                        })
                    })
                })
            })
            .collect();
        if let Some(k) = violating.iter().rposition(|&v| v) {
            if k + 1 == levels.len() {
                return Err(Error::Hypothesis(format!(
                    "|f{}| exceeds eta_bar·|s|^(p-1) up to the largest sampled |s| = {:e}",
                    i + 1,
                    plan.s_max
                )));
            }
            rho = rho.max(levels[k + 1]);
        }
    }
    c.rho = rho;
    // c_ρ: max |f_i| over |s_i| ≤ ρ, s_j anywhere on the sample grid
    let mut inner: Vec<f64> = levels.iter().copied().filter(|&a| a <= rho).flat_map(|a| [a, -a]).collect();
    inner.push(0.0);
    let mut c_rho = 0.0f64;
    for i in 0..2 {
        let pairs: Vec<[f64; 2]> = inner
            .iter()
            .flat_map(|&si| signed.iter().map(move |&sj| with_comp(i, si, sj)))
            .collect();
        if let Some(w) = extreme(xs, &pairs, false, &|x, s| f.eval(i, x, s).abs()) {
            c_rho = c_rho.max(w.value);
        }
    }
    if !c_rho.is_finite() {
        return Err(Error::Hypothesis("f is unbounded on the sampled box".into()));
    }
    c.c_rho = c_rho;

    let mut eps = 0.5;
    while !(0..2).all(|i| super_inequality(&c, i, eps)) {
        eps *= 0.5;
        if eps < 1e-12 {
            return Err(Error::Hypothesis(format!(
                "no eps >= 1e-12 satisfies eps^-(p-1)·lambda~/2·tau^(p+-1) >= c_rho = {c_rho:e}"
            )));
        }
    }
    c.eps = eps;
    let [b0, b1] = big;
    let phi_tilde = [b0.restricted, b1.restricted];
    let upper = [phi_tilde[0].scaled(1.0 / eps), phi_tilde[1].scaled(1.0 / eps)];
    Ok(Supersolution {
        upper,
        phi_tilde,
        constants: c,
    })
}

/// The box `[ε φ₁,p_i, C φ̃₁,p_i]` for given scalings `ε = lower_scale` and
/// `C = upper_scale`, for nonlinearities whose global hypotheses fail but
/// which still admit a small ordered box. Only the eigen-derived constants
/// are filled in (`eta_bar`, `rho` and `c_rho` are NaN); check the result
/// with [`verify_ordered_box`].
pub fn scaled_box(ctx: [&OperatorContext; 2], eigen: [&EigenPair; 2], margin: f64, lower_scale: f64, upper_scale: f64) -> Result<OrderedBox> {
    if !(lower_scale > 0.0 && upper_scale > 0.0) {
        return Err(Error::InvalidInput("box scalings must be positive".into()));
    }
    let big = [enlarged_eigenpair(ctx[0], margin)?, enlarged_eigenpair(ctx[1], margin)?];
    let constants = SuperConstants {
        eps: 1.0 / upper_scale,
        tau: [big[0].tau, big[1].tau],
        eta_bar: f64::NAN,
        rho: f64::NAN,
        c_rho: f64::NAN,
        lambda_tilde: [big[0].pair.lambda, big[1].pair.lambda],
        phi_tilde_max: [big[0].pair.eigenfunction.max(), big[1].pair.eigenfunction.max()],
        p_minus: [ctx[0].p.p_minus(), ctx[1].p.p_minus()],
        p_plus: [ctx[0].p.p_plus(), ctx[1].p.p_plus()],
        margin,
    };
    Ok(OrderedBox {
        lower: [eigen[0].eigenfunction.scaled(lower_scale), eigen[1].eigenfunction.scaled(lower_scale)],
        upper: [big[0].restricted.scaled(upper_scale), big[1].restricted.scaled(upper_scale)],
        eps_sub: lower_scale,
        rho_hat: f64::NAN,
        constants,
        verification: None,
    })
}

/// `ε^{−(p_i⁻−1)} · ½ λ̃_i · τ_i^{p_i⁺−1} ≥ c_ρ`.
pub fn super_inequality(c: &SuperConstants, i: usize, eps: f64) -> bool {
    eps.powf(-(c.p_minus[i] - 1.0)) * 0.5 * c.lambda_tilde[i] * c.tau[i].powf(c.p_plus[i] - 1.0) >= c.c_rho
}

#[derive(Debug, Clone)]
pub struct Subsolution {
    pub lower: [GridFunction; 2],
    pub eps: f64,
    pub rho_hat: f64,
    /// Worst `∫|∇u̲_i|^{p−2}∇u̲_i·∇φ_k − ∫η_i u̲_i^{p⁻−1}φ_k` (must be ≤ 0).
    pub margin: [f64; 2],
}

/// Weak-inequality slack tolerated in box checks.
pub const MARGIN_SLACK: f64 = 1e-10;

fn sub_margin(p: &ExponentField, eta: f64, u: &GridFunction) -> Result<f64> {
    let q = p.p_minus();
    let rhs = Sampled(u.at_qp().iter().map(|&v| eta * v.max(0.0).powf(q - 1.0)).collect());
    Ok(weak_residual(p, 0.0, u, &rhs)?.into_iter().fold(f64::NEG_INFINITY, f64::max))
}

/// Builds `u̲_i = ε φ₁,p_i`, halving `ε` from ½ until `ε‖φ₁,p_i‖_∞ ≤ ρ̂`
/// and the weak inequality against `η_i u̲_i^{p_i⁻−1}` holds.
pub fn construct_subsolution(f: &Nonlinearity, p: [&ExponentField; 2], eigen: [&EigenPair; 2], rho_hat: f64) -> Result<Subsolution> {
    if !(rho_hat > 0.0) {
        return Err(Error::Hypothesis(format!("small-s radius must be positive, got {rho_hat}")));
    }
    let mut eps = 0.5;
    loop {
        let lower = [eigen[0].eigenfunction.scaled(eps), eigen[1].eigenfunction.scaled(eps)];
        let fits = (0..2).all(|i| lower[i].max() <= rho_hat);
        if fits {
            let margin = [sub_margin(p[0], f.eta[0], &lower[0])?, sub_margin(p[1], f.eta[1], &lower[1])?];
            if margin.iter().all(|&m| m <= MARGIN_SLACK) {
                return Ok(Subsolution {
                    lower,
                    eps,
                    rho_hat,
                    margin,
                });
            }
        }
        eps *= 0.5;
        if eps < 1e-12 {
            return Err(Error::Hypothesis(
                "no eps >= 1e-12 makes eps·phi1 a subsolution (eps·|phi1| <= rho_hat and the weak inequality)".into(),
            ));
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BoxVerification {
    /// Worst sub margin per component (max over test functions, ≤ 0 passes).
    pub sub_margin: [f64; 2],
    /// Worst super margin per component (min over test functions, ≥ 0 passes).
    pub super_margin: [f64; 2],
    pub ordered: bool,
    pub lower_positive: bool,
    pub upper_positive: bool,
    pub sub_grid: usize,
    pub pass: bool,
}

#[derive(Debug, Clone)]
pub struct OrderedBox {
    pub lower: [GridFunction; 2],
    pub upper: [GridFunction; 2],
    pub eps_sub: f64,
    pub rho_hat: f64,
    pub constants: SuperConstants,
    pub verification: Option<BoxVerification>,
}

impl OrderedBox {
    pub fn new(sub: &Subsolution, sup: &Supersolution) -> Self {
        OrderedBox {
            lower: sub.lower.clone(),
            upper: sup.upper.clone(),
            eps_sub: sub.eps,
            rho_hat: sub.rho_hat,
            constants: sup.constants.clone(),
            verification: None,
        }
    }

    pub fn contains(&self, u: [&GridFunction; 2], slack: f64) -> bool {
        (0..2).all(|i| {
            u[i].values()
                .iter()
                .zip(self.lower[i].values().iter().zip(self.upper[i].values()))
                .all(|(v, (lo, hi))| *v >= lo - slack && *v <= hi + slack)
        })
    }
}

/// Per quadrature point, the min and max of `f_i` over a `k × k` grid of the
/// box `[u̲₁(x), ū₁(x)] × [u̲₂(x), ū₂(x)]`.
fn box_bounds(f: &Nonlinearity, i: usize, mesh: &Mesh, lower: [&[f64]; 2], upper: [&[f64]; 2], k: usize) -> (Vec<f64>, Vec<f64>) {
    let k = k.max(2);
    let xs = mesh.qp_coords();
    (0..mesh.qp_count())
        .into_par_iter()
        .map(|q| {
            let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
            for a in 0..k {
                let t = a as f64 / (k - 1) as f64;
                let s1 = lower[0][q] + t * (upper[0][q] - lower[0][q]);
                for b in 0..k {
                    let r = b as f64 / (k - 1) as f64;
                    let s2 = lower[1][q] + r * (upper[1][q] - lower[1][q]);
                    let v = f.eval(i, xs[q], [s1, s2]);
                    lo = lo.min(v);
                    hi = hi.max(v);
                }
            }
            (lo, hi)
        })
        .unzip()
}

/// Checks the weak sub/supersolution inequalities against every interior
/// hat function, bounding `f` over the box on a `sub_grid²` sample per point.
pub fn verify_ordered_box(b: &OrderedBox, f: &Nonlinearity, p: [&ExponentField; 2], sub_grid: usize) -> Result<BoxVerification> {
    let mesh = p[0].mesh();
    let lower_qp = [b.lower[0].at_qp(), b.lower[1].at_qp()];
    let upper_qp = [b.upper[0].at_qp(), b.upper[1].at_qp()];
    let mut sub_margin = [0.0; 2];
    let mut super_margin = [0.0; 2];
    for i in 0..2 {
        let (fmin, fmax) = box_bounds(f, i, mesh, [&lower_qp[0], &lower_qp[1]], [&upper_qp[0], &upper_qp[1]], sub_grid);
        sub_margin[i] = weak_residual(p[i], 0.0, &b.lower[i], &Sampled(fmin))?
            .into_iter()
            .fold(f64::NEG_INFINITY, f64::max);
        super_margin[i] = weak_residual(p[i], 0.0, &b.upper[i], &Sampled(fmax))?
            .into_iter()
            .fold(f64::INFINITY, f64::min);
    }
    let interior = mesh.interior_nodes();
    let ordered = (0..2).all(|i| {
        let (lo, hi) = (b.lower[i].values(), b.upper[i].values());
        lo.iter().zip(hi).all(|(a, c)| a <= c) && interior.iter().all(|&k| lo[k] < hi[k])
    });
    let lower_positive = (0..2).all(|i| interior.iter().all(|&k| b.lower[i].values()[k] > 0.0));
    let upper_positive = (0..2).all(|i| b.upper[i].values().iter().all(|&v| v > 0.0));
    let pass = ordered
        && lower_positive
        && upper_positive
        && sub_margin.iter().all(|&m| m <= MARGIN_SLACK)
        && super_margin.iter().all(|&m| m >= -MARGIN_SLACK);
    Ok(BoxVerification {
        sub_margin,
        super_margin,
        ordered,
        lower_positive,
        upper_positive,
        sub_grid,
        pass,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct IterationSettings {
    pub max_outer: usize,
    pub increment_tol: f64,
    pub residual_tol: f64,
}

impl Default for IterationSettings {
    fn default() -> Self {
        IterationSettings {
            max_outer: 200,
            increment_tol: 1e-9,
            residual_tol: 1e-8,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BoxSolution {
    #[serde(skip)]
    pub solution: [GridFunction; 2],
    pub iterations: usize,
    pub converged: bool,
    /// Coupled-system residual after each outer sweep.
    pub residual_history: Vec<f64>,
    pub residual: f64,
    /// Largest distance by which an untruncated inner solve left the box.
    pub max_box_violation: f64,
}

fn truncate(u: &GridFunction, lo: &GridFunction, hi: &GridFunction) -> (GridFunction, f64) {
    let mut out = u.clone();
    let mut worst = 0.0f64;
    for ((v, a), b) in out.values_mut().iter_mut().zip(lo.values()).zip(hi.values()) {
        worst = worst.max(*a - *v).max(*v - *b);
        *v = v.clamp(*a, *b);
    }
    (out, worst)
}

/// Monotone Gauss-Seidel iteration from the lower corner of the box:
/// `u₁ ← S₁ f₁(·, u₁, u₂)`, then `u₂ ← S₂ f₂(·, u₁, u₂)` with the fresh `u₁`,
/// each truncated into the box.
pub fn solve_in_box(b: &OrderedBox, f: &Nonlinearity, ctx: [&OperatorContext; 2], settings: &IterationSettings) -> Result<BoxSolution> {
    solve_in_box_from(b, f, ctx, settings, [&b.lower[0], &b.lower[1]])
}

pub fn solve_in_box_from(
    b: &OrderedBox,
    f: &Nonlinearity,
    ctx: [&OperatorContext; 2],
    settings: &IterationSettings,
    start: [&GridFunction; 2],
) -> Result<BoxSolution> {
    let mesh = ctx[0].mesh.clone();
    let xs = mesh.qp_coords();
    let mut u = [start[0].clone(), start[1].clone()];
    // inner solves need zero boundary values; the box lower corner has them
    for ui in u.iter_mut() {
        for k in mesh.boundary_nodes() {
            ui.values_mut()[k] = 0.0;
        }
    }
    let mut history = Vec::new();
    let mut worst_violation = 0.0f64;
    let p = [&ctx[0].p, &ctx[1].p];
    for outer in 1..=settings.max_outer {
        let mut increment = [0.0; 2];
        for i in 0..2 {
            let a = u[0].at_qp();
            let c = u[1].at_qp();
            let rhs = Sampled((0..mesh.qp_count()).map(|q| f.eval(i, xs[q], [a[q], c[q]])).collect());
            let s = dirichlet_solve(ctx[i], &rhs, &u[i])?;
            if !s.converged {
                return Err(Error::Numerical(format!(
                    "inner solve for u{} failed at sweep {outer} (residual {:.3e})",
                    i + 1,
                    s.residual
                )));
            }
            let (next, violation) = truncate(&s.solution, &b.lower[i], &b.upper[i]);
            worst_violation = worst_violation.max(violation);
            increment[i] = next.max_distance(&u[i])?;
            u[i] = next;
        }
        let residual = system_residual(p, ctx[0].eps_reg, f, [&u[0], &u[1]])?;
        history.push(residual);
        if increment.iter().all(|&d| d <= settings.increment_tol) && residual <= settings.residual_tol {
            return Ok(BoxSolution {
                solution: u,
                iterations: outer,
                converged: true,
                residual,
                residual_history: history,
                max_box_violation: worst_violation,
            });
        }
    }
    let residual = history.last().copied().unwrap_or(f64::NAN);
    Ok(BoxSolution {
        solution: u,
        iterations: settings.max_outer,
        converged: false,
        residual,
        residual_history: history,
        max_box_violation: worst_violation,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct NewtonCrossCheck {
    pub converged: bool,
    pub residual: f64,
    pub iterations: usize,
    /// Max nodal distance to the monotone-iteration solution.
    pub distance: f64,
}

/// Damped Newton on the coupled system from the middle of the box.
pub fn newton_cross_check(b: &OrderedBox, f: &Nonlinearity, ctx: [&OperatorContext; 2], reference: [&GridFunction; 2]) -> Result<NewtonCrossCheck> {
    let mid: Vec<GridFunction> = (0..2)
        .map(|i| {
            let mut m = b.lower[i].clone();
            for (v, h) in m.values_mut().iter_mut().zip(b.upper[i].values()) {
                *v = 0.5 * (*v + h);
            }
            m
        })
        .collect();
    let r = solve_system([&ctx[0].p, &ctx[1].p], ctx[0].eps_reg, &ctx[0].newton, f, [&mid[0], &mid[1]])?;
    let distance = r.solution[0]
        .max_distance(reference[0])?
        .max(r.solution[1].max_distance(reference[1])?);
    Ok(NewtonCrossCheck {
        converged: r.converged,
        residual: r.residual,
        iterations: r.iterations,
        distance,
    })
}

/// Negative solution pair: the reflected system `f̌_i(x, s) = −f_i(x, −s)`
/// is solved in the same positive box and the result negated.
pub fn negative_solutions(b: &OrderedBox, f: &Nonlinearity, ctx: [&OperatorContext; 2], settings: &IterationSettings) -> Result<(BoxSolution, BoxVerification)> {
    let reflected = f.reflected();
    let verification = verify_ordered_box(b, &reflected, [&ctx[0].p, &ctx[1].p], 5)?;
    let mut s = solve_in_box(b, &reflected, ctx, settings)?;
    s.solution = [s.solution[0].scaled(-1.0), s.solution[1].scaled(-1.0)];
    Ok((s, verification))
}

#[derive(Debug, Clone, Serialize)]
pub struct ExistenceSettings {
    pub margin: f64,
    pub plan: SamplePlan,
    pub iteration: IterationSettings,
    /// Continue past failed hypothesis probes.
    pub override_hypotheses: bool,
}

impl Default for ExistenceSettings {
    fn default() -> Self {
        ExistenceSettings {
            margin: 0.25,
            plan: SamplePlan::default(),
            iteration: IterationSettings::default(),
            override_hypotheses: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExistenceReport {
    pub eigen: [EigenPair; 2],
    pub hypotheses: HypothesisReport,
    pub ordered_box: OrderedBox,
    pub phi_tilde: [GridFunction; 2],
    pub positive: BoxSolution,
    pub newton: NewtonCrossCheck,
    pub negative: BoxSolution,
    pub negative_box: BoxVerification,
}

/// The full pipeline: eigenpairs, hypothesis probes, box construction and
/// verification, positive and negative solutions.
pub fn existence_run(f: &Nonlinearity, ctx: [&OperatorContext; 2], settings: &ExistenceSettings) -> Result<ExistenceReport> {
    if !ctx[0].mesh.same_as(&ctx[1].mesh) {
        return Err(Error::MeshMismatch);
    }
    let eigen = [first_eigenpair(ctx[0])?, first_eigenpair(ctx[1])?];
    let p = [&ctx[0].p, &ctx[1].p];
    let hypotheses = check_hypotheses(f, p, [&eigen[0], &eigen[1]], &settings.plan)?;
    if !hypotheses.pass && !settings.override_hypotheses {
        let failed: Vec<String> = hypotheses
            .checks
            .iter()
            .filter(|c| !c.pass)
            .map(|c| format!("{} (f{}): {}", c.name, c.component, c.detail))
            .collect();
        return Err(Error::Hypothesis(failed.join("; ")));
    }
    let rho_hat = hypotheses
        .rho_hat
        .ok_or_else(|| Error::Hypothesis("no small-s radius found on the sample grid".into()))?;
    let sup = construct_supersolution(f, ctx, settings.margin, &settings.plan)?;
    let sub = construct_subsolution(f, p, [&eigen[0], &eigen[1]], rho_hat)?;
    let mut ordered_box = OrderedBox::new(&sub, &sup);
    let verification = verify_ordered_box(&ordered_box, f, p, settings.plan.sub_grid)?;
    ordered_box.verification = Some(verification);
    let positive = solve_in_box(&ordered_box, f, ctx, &settings.iteration)?;
    let newton = newton_cross_check(&ordered_box, f, ctx, [&positive.solution[0], &positive.solution[1]])?;
    let (negative, negative_box) = negative_solutions(&ordered_box, f, ctx, &settings.iteration)?;
    Ok(ExistenceReport {
        eigen,
        hypotheses,
        ordered_box,
        phi_tilde: sup.phi_tilde,
        positive,
        newton,
        negative,
        negative_box,
    })
}
