//! The modular `ρ(u) = ∫|u|^{p(x)}` and the Luxemburg norm
//! `inf{τ > 0 : ρ(u/τ) ≤ 1}`.

use serde::Serialize;

use crate::exponents::ExponentField;
use crate::mesh::{GridFunction, Mesh};
use crate::{Error, Result};

const MAX_BRACKET_STEPS: usize = 200;
const MAX_BISECTIONS: usize = 400;
const RESIDUAL_TARGET: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModularReport {
    pub modular: f64,
    pub norm: f64,
    pub iterations: usize,
    /// `|ρ(u/‖u‖) − 1|`, zero for the zero field.
    pub residual: f64,
}

fn check_mesh(u: &GridFunction, p: &ExponentField) -> Result<()> {
    if u.mesh().same_as(p.mesh()) {
        Ok(())
    } else {
        Err(Error::MeshMismatch)
    }
}

fn modular_of_samples(samples: &[f64], p: &[f64], weights: &[f64], scale: f64) -> f64 {
    samples
        .iter()
        .zip(p)
        .zip(weights)
        .map(|((&v, &q), &w)| {
            let a = (v * scale).abs();
            if a == 0.0 {
                0.0
            } else {
                w * a.powf(q)
            }
        })
        .sum()
}

/// Luxemburg norm of a function sampled at quadrature points.
pub fn luxemburg_of_samples(samples: &[f64], p: &[f64], weights: &[f64]) -> Result<ModularReport> {
    let modular = modular_of_samples(samples, p, weights, 1.0);
    if samples.iter().all(|&v| v == 0.0) {
        return Ok(ModularReport {
            modular: 0.0,
            norm: 0.0,
            iterations: 0,
            residual: 0.0,
        });
    }
    let rho = |tau: f64| modular_of_samples(samples, p, weights, 1.0 / tau);
    let mut iterations = 0;
    let (mut lo, mut hi);
    let mut tau = 1.0f64;
    if rho(tau) > 1.0 {
        loop {
            iterations += 1;
            if iterations > MAX_BRACKET_STEPS {
                return Err(Error::Numerical("Luxemburg bracket failed to close".into()));
            }
            lo = tau;
            tau *= 2.0;
            if rho(tau) <= 1.0 {
                hi = tau;
                break;
            }
        }
    } else {
        loop {
            iterations += 1;
            if iterations > MAX_BRACKET_STEPS {
                return Err(Error::Numerical("Luxemburg bracket failed to close".into()));
            }
            hi = tau;
            tau *= 0.5;
            if rho(tau) > 1.0 {
                lo = tau;
                break;
            }
        }
    }
    // invariant: rho(lo) > 1 >= rho(hi)
    let mut best = hi;
    let mut best_res = (rho(hi) - 1.0).abs();
    for _ in 0..MAX_BISECTIONS {
        if best_res <= RESIDUAL_TARGET {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        iterations += 1;
        let r = rho(mid);
        if r > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        let res = (r - 1.0).abs();
        if res < best_res {
            best = mid;
            best_res = res;
        }
    }
    Ok(ModularReport {
        modular,
        norm: best,
        iterations,
        residual: best_res,
    })
}

/// `∫|u|^{p(x)}` by quadrature.
pub fn modular(u: &GridFunction, p: &ExponentField) -> Result<f64> {
    check_mesh(u, p)?;
    let mesh = u.mesh();
    Ok(modular_of_samples(&u.at_qp(), p.qp_values(), mesh.qp_weights(), 1.0))
}

pub fn luxemburg_norm(u: &GridFunction, p: &ExponentField) -> Result<ModularReport> {
    check_mesh(u, p)?;
    luxemburg_of_samples(&u.at_qp(), p.qp_values(), u.mesh().qp_weights())
}

/// `|∇u|` at every quadrature point (constant on each cell).
pub fn gradient_magnitude_qp(mesh: &Mesh, values: &[f64]) -> Vec<f64> {
    let nq = mesh.qp_per_cell();
    let mut out = Vec::with_capacity(mesh.qp_count());
    for e in 0..mesh.cell_count() {
        let g = mesh.cell_gradient(e, values);
        let m = g[0].hypot(g[1]);
        out.extend(std::iter::repeat_n(m, nq));
    }
    out
}

/// `∫|∇u|^{p(x)}`.
pub fn gradient_modular(u: &GridFunction, p: &ExponentField) -> Result<f64> {
    check_mesh(u, p)?;
    let mesh = u.mesh();
    Ok(modular_of_samples(
        &gradient_magnitude_qp(mesh, u.values()),
        p.qp_values(),
        mesh.qp_weights(),
        1.0,
    ))
}

/// Norm of `W₀^{1,p(x)}`: the Luxemburg norm of `|∇u|`.
pub fn sobolev_norm(u: &GridFunction, p: &ExponentField) -> Result<f64> {
    check_mesh(u, p)?;
    if !u.is_dirichlet_zero() {
        return Err(Error::InvalidInput("Sobolev norm requires zero boundary values".into()));
    }
    let mesh = u.mesh();
    Ok(luxemburg_of_samples(&gradient_magnitude_qp(mesh, u.values()), p.qp_values(), mesh.qp_weights())?.norm)
}

/// Product-space norm `‖(u₁, u₂)‖ = ‖u₁‖ + ‖u₂‖`.
pub fn pair_norm(u1: &GridFunction, p1: &ExponentField, u2: &GridFunction, p2: &ExponentField) -> Result<f64> {
    Ok(sobolev_norm(u1, p1)? + sobolev_norm(u2, p2)?)
}

#[derive(Debug, Clone, Serialize)]
pub struct NormModularCheck {
    pub norm: f64,
    pub modular: f64,
    pub p_minus: f64,
    pub p_plus: f64,
    pub norm_above_one: bool,
    /// `(ρ − lower)/ρ` for the active chain; nonnegative when it holds.
    pub lower_slack: f64,
    /// `(upper − ρ)/ρ`.
    pub upper_slack: f64,
    /// `|ρ(u/‖u‖) − 1|`.
    pub unit_residual: f64,
    pub pass: bool,
}

/// Relative slack accepted on the two inequality chains.
pub const CHAIN_SLACK: f64 = 1e-12;
/// Largest accepted `|ρ(u/‖u‖) − 1|`.
pub const UNIT_RESIDUAL_TOL: f64 = 1e-10;

/// Checks the norm-modular inequalities
/// `‖u‖^{p⁻} ≤ ρ(u) ≤ ‖u‖^{p⁺}` when `‖u‖ > 1`, the reversed chain when
/// `‖u‖ ≤ 1`, and `ρ(u/‖u‖) = 1`.
pub fn check_norm_modular(u: &GridFunction, p: &ExponentField) -> Result<NormModularCheck> {
    let report = luxemburg_norm(u, p)?;
    if report.norm == 0.0 {
        return Err(Error::InvalidInput("norm-modular check requires u ≠ 0".into()));
    }
    let (lo_p, hi_p) = p.bounds();
    let n = report.norm;
    let rho = report.modular;
    let above = n > 1.0;
    let (lower, upper) = if above {
        (n.powf(lo_p), n.powf(hi_p))
    } else {
        (n.powf(hi_p), n.powf(lo_p))
    };
    let lower_slack = (rho - lower) / rho;
    let upper_slack = (upper - rho) / rho;
    let unit = modular(&u.scaled(1.0 / n), p)?;
    let unit_residual = (unit - 1.0).abs();
    Ok(NormModularCheck {
        norm: n,
        modular: rho,
        p_minus: lo_p,
        p_plus: hi_p,
        norm_above_one: above,
        lower_slack,
        upper_slack,
        unit_residual,
        pass: lower_slack >= -CHAIN_SLACK && upper_slack >= -CHAIN_SLACK && unit_residual <= UNIT_RESIDUAL_TOL,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::build_interval_mesh;
    use proptest::prelude::*;
    use std::sync::Arc;

    fn unit(n: usize) -> Arc<Mesh> {
        Arc::new(build_interval_mesh(0.0, 1.0, n).unwrap())
    }

    #[test]
    fn modular_examples() {
        let m = unit(16);
        let p = ExponentField::constant(3.0, &m).unwrap();
        let c = GridFunction::from_fn(m.clone(), |_| -1.7);
        assert!((modular(&c, &p).unwrap() - 1.7f64.powi(3)).abs() < 1e-13);
        assert_eq!(modular(&GridFunction::zeros(m.clone()), &p).unwrap(), 0.0);
        let p2 = ExponentField::constant(2.0, &m).unwrap();
        let x = GridFunction::from_fn(m.clone(), |q| q[0]);
        assert!((modular(&x, &p2).unwrap() - 1.0 / 3.0).abs() < 1e-14);
        let other = unit(8);
        assert!(matches!(
            modular(&GridFunction::zeros(other), &p),
            Err(Error::MeshMismatch)
        ));
    }

    #[test]
    fn norm_examples() {
        let m = unit(32);
        let p2 = ExponentField::constant(2.0, &m).unwrap();
        let r = luxemburg_norm(&GridFunction::zeros(m.clone()), &p2).unwrap();
        assert_eq!(r.norm, 0.0);
        let one = GridFunction::from_fn(m.clone(), |_| 1.0);
        let r = luxemburg_norm(&one, &p2).unwrap();
        assert!((r.norm - 1.0).abs() < 1e-14);
        assert!(r.residual <= 1e-10);
    }

    /// Independent route: adaptive Simpson for ∫₀¹ (2/τ)^{2+x} dx and a
    /// secant/Illinois root search in τ.
    fn oracle_norm_of_two() -> f64 {
        fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
            let c = 0.5 * (a + b);
            let whole = (b - a) / 6.0 * (f(a) + 4.0 * f(c) + f(b));
            let l = (c - a) / 6.0 * (f(a) + 4.0 * f(0.5 * (a + c)) + f(c));
            let r = (b - c) / 6.0 * (f(c) + 4.0 * f(0.5 * (c + b)) + f(b));
            if depth == 0 || (l + r - whole).abs() < 15.0 * tol {
                l + r + (l + r - whole) / 15.0
            } else {
                simpson(f, a, c, tol / 2.0, depth - 1) + simpson(f, c, b, tol / 2.0, depth - 1)
            }
        }
        let g = |tau: f64| simpson(&|x: f64| (2.0 / tau).powf(2.0 + x), 0.0, 1.0, 1e-15, 40) - 1.0;
        let (mut a, mut b) = (1.0, 4.0);
        let (mut fa, mut fb) = (g(a), g(b));
        assert!(fa > 0.0 && fb < 0.0);
        let mut side = 0;
        for _ in 0..200 {
            let c = (a * fb - b * fa) / (fb - fa);
            let fc = g(c);
            if fc.abs() < 1e-15 || (b - a).abs() < 1e-15 {
                return c;
            }
            if fc * fb > 0.0 {
                b = c;
                fb = fc;
                if side == -1 {
                    fa /= 2.0;
                }
                side = -1;
            } else {
                a = c;
                fa = fc;
                if side == 1 {
                    fb /= 2.0;
                }
                side = 1;
            }
        }
        0.5 * (a + b)
    }

    #[test]
    fn norm_of_constant_two_with_variable_exponent() {
        let expected = oracle_norm_of_two();
        let m = unit(64);
        let p = ExponentField::from_expr("2 + x", &m).unwrap();
        let two = GridFunction::from_fn(m.clone(), |_| 2.0);
        let r = luxemburg_norm(&two, &p).unwrap();
        // the integrand is smooth; degree-5 Gauss on 64 cells is far below 1e-10
        assert!((r.norm - expected).abs() < 1e-10, "{} vs {expected}", r.norm);
    }

    #[test]
    fn norm_modular_chains() {
        let m = unit(32);
        let p = ExponentField::from_expr("2 + x", &m).unwrap();
        for scale in [0.1, 1.0, 7.0] {
            let u = GridFunction::from_fn(m.clone(), |q| scale * (1.0 + (5.0 * q[0]).sin()));
            let c = check_norm_modular(&u, &p).unwrap();
            assert!(c.pass, "{c:?}");
        }
        let q = ExponentField::constant(3.0, &m).unwrap();
        let u = GridFunction::from_fn(m.clone(), |x| x[0] - 0.3);
        let c = check_norm_modular(&u, &q).unwrap();
        assert!(c.pass && c.lower_slack.abs() < 1e-12 && c.upper_slack.abs() < 1e-12);
        assert!(check_norm_modular(&GridFunction::zeros(m), &q).is_err());
    }

    #[test]
    fn sobolev_examples() {
        let m = unit(64);
        let p2 = ExponentField::constant(2.0, &m).unwrap();
        assert_eq!(sobolev_norm(&GridFunction::zeros(m.clone()), &p2).unwrap(), 0.0);
        let hat = GridFunction::from_fn(m.clone(), |q| 1.0 - (2.0 * q[0] - 1.0).abs());
        assert!((sobolev_norm(&hat, &p2).unwrap() - 2.0).abs() < 1e-13);
        let p3 = ExponentField::constant(3.0, &m).unwrap();
        // |u'| = 2 everywhere: (∫ 2^3)^{1/3} = 2
        assert!((sobolev_norm(&hat, &p3).unwrap() - 2.0).abs() < 1e-13);
        let one = GridFunction::from_fn(m.clone(), |_| 1.0);
        assert!(sobolev_norm(&one, &p2).is_err());
    }

    #[test]
    fn pair_norm_triangle_inequality() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let m = unit(24);
        let p1 = ExponentField::from_expr("2 + x", &m).unwrap();
        let p2 = ExponentField::from_expr("1.6 + 0.5*x", &m).unwrap();
        let mut random = || {
            let mut v: Vec<f64> = (0..25).map(|_| rng.gen_range(-2.0..2.0)).collect();
            v[0] = 0.0;
            v[24] = 0.0;
            GridFunction::new(m.clone(), v).unwrap()
        };
        for _ in 0..100 {
            let (a1, a2, b1, b2) = (random(), random(), random(), random());
            let add = |x: &GridFunction, y: &GridFunction| {
                GridFunction::new(m.clone(), x.values().iter().zip(y.values()).map(|(s, t)| s + t).collect()).unwrap()
            };
            let lhs = pair_norm(&add(&a1, &b1), &p1, &add(&a2, &b2), &p2).unwrap();
            let rhs = pair_norm(&a1, &p1, &a2, &p2).unwrap() + pair_norm(&b1, &p1, &b2, &p2).unwrap();
            assert!(lhs <= rhs * (1.0 + 1e-12), "{lhs} > {rhs}");
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn norm_is_homogeneous(vals in proptest::collection::vec(-3.0f64..3.0, 17), c in 0.01f64..50.0) {
            let m = unit(16);
            let p = ExponentField::from_expr("2 + x", &m).unwrap();
            let u = GridFunction::new(m.clone(), vals).unwrap();
            let n = luxemburg_norm(&u, &p).unwrap().norm;
            prop_assume!(n > 0.0);
            let nc = luxemburg_norm(&u.scaled(c), &p).unwrap().norm;
            prop_assert!((nc - c * n).abs() <= 1e-9 * c * n);
        }

        #[test]
        fn norm_and_modular_are_monotone(vals in proptest::collection::vec(0.0f64..3.0, 17),
                                          extra in proptest::collection::vec(0.0f64..2.0, 17)) {
            let m = unit(16);
            let p = ExponentField::from_expr("1.5 + x", &m).unwrap();
            let u = GridFunction::new(m.clone(), vals.clone()).unwrap();
            let big: Vec<f64> = vals.iter().zip(&extra).map(|(v, e)| v + e).collect();
            let v = GridFunction::new(m.clone(), big).unwrap();
            prop_assert!(modular(&u, &p).unwrap() <= modular(&v, &p).unwrap() * (1.0 + 1e-14));
            prop_assert!(luxemburg_norm(&u, &p).unwrap().norm <= luxemburg_norm(&v, &p).unwrap().norm * (1.0 + 1e-12));
        }
    }
}
