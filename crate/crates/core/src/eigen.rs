//! First eigenpair of `−Δ_{p(x)}` by inverse power iteration.

use std::sync::Arc;

use serde::Serialize;

use crate::exponents::ExponentField;
use crate::mesh::{dilate_domain, GridFunction};
use crate::modular::{gradient_modular, luxemburg_norm, modular};
use crate::operator::{assemble_residual, dirichlet_solve, dual_norm, OperatorContext, Sampled};
use crate::{Error, Result};

const MAX_SWEEPS: usize = 500;
const RAYLEIGH_TOL: f64 = 1e-9;
const SHAPE_TOL: f64 = 1e-9;
/// Largest eigen-equation residual for which the pair counts as consistent.
pub const RESIDUAL_TOL: f64 = 1e-7;

#[derive(Debug, Clone, Serialize)]
pub struct EigenPair {
    /// The Rayleigh value at the computed minimizer.
    pub lambda: f64,
    #[serde(skip)]
    pub eigenfunction: GridFunction,
    /// `ρ(φ₁)`, equal to 1 up to the norm bisection.
    pub modular: f64,
    pub rayleigh: f64,
    /// Least-squares `λ` in `−Δ_{p(x)}φ = λ|φ|^{p−2}φ` for the computed `φ`.
    pub equation_lambda: f64,
    /// Dual norm of `−Δ_{p(x)}φ − λ|φ|^{p−2}φ` with `λ = lambda`.
    pub residual: f64,
    /// Whether `lambda` also solves the eigen-equation within tolerance.
    /// Constant exponents always should; variable ones need not.
    pub consistent: bool,
    pub iterations: usize,
    /// Sign restarts taken during the iteration.
    pub restarts: usize,
}

/// `∫|∇u|^{p(x)} / ∫|u|^{p(x)}`.
pub fn rayleigh_quotient(u: &GridFunction, p: &ExponentField) -> Result<f64> {
    let den = modular(u, p)?;
    if den == 0.0 {
        return Err(Error::InvalidInput("Rayleigh quotient of the zero field".into()));
    }
    Ok(gradient_modular(u, p)? / den)
}

fn power_load(u: &GridFunction, p: &ExponentField, scale: f64) -> Sampled {
    Sampled(
        u.at_qp()
            .iter()
            .zip(p.qp_values())
            .map(|(&v, &q)| scale * v.abs().powf(q - 2.0) * v)
            .collect(),
    )
}

fn normalize(u: &GridFunction, p: &ExponentField) -> Result<GridFunction> {
    let n = luxemburg_norm(u, p)?.norm;
    if !(n > 0.0) {
        return Err(Error::Numerical("eigen iterate collapsed to zero".into()));
    }
    Ok(u.scaled(1.0 / n))
}

/// Positive start: the solution of `−Δu = 1`.
fn initial_guess(ctx: &OperatorContext) -> Result<GridFunction> {
    let linear = OperatorContext {
        p: ExponentField::constant(2.0, &ctx.mesh)?,
        ..ctx.clone()
    };
    let s = dirichlet_solve(&linear, &|_: [f64; 2]| 1.0, &GridFunction::zeros(ctx.mesh.clone()))?;
    Ok(s.solution)
}

pub fn first_eigenpair(ctx: &OperatorContext) -> Result<EigenPair> {
    let u0 = initial_guess(ctx)?;
    first_eigenpair_from(ctx, &u0)
}

/// Inverse power iteration from a given nonnegative start.
pub fn first_eigenpair_from(ctx: &OperatorContext, initial: &GridFunction) -> Result<EigenPair> {
    let p = &ctx.p;
    if ctx.mesh.dof_count() == 0 {
        return Err(Error::InvalidInput("mesh has no interior nodes".into()));
    }
    let mut u = normalize(&initial.map(f64::abs), p)?;
    let mut r = rayleigh_quotient(&u, p)?;
    let mut restarts = 0;
    let mut rises = 0;
    for sweep in 1..=MAX_SWEEPS {
        let rhs = power_load(&u, p, r);
        let solve = dirichlet_solve(ctx, &rhs, &u)?;
        if !solve.converged {
            return Err(Error::Numerical(format!(
                "inner solve failed at sweep {sweep} (residual {:.3e})",
                solve.residual
            )));
        }
        let mut w = solve.solution;
        if ctx.mesh.interior_nodes().iter().any(|&i| w.values()[i] <= 0.0) {
            w = w.map(f64::abs);
            restarts += 1;
        }
        let next = normalize(&w, p)?;
        let r_next = rayleigh_quotient(&next, p)?;
        let shape = next.max_distance(&u)? / next.max_abs();
        if r_next > r * (1.0 + 1e-8) {
            rises += 1;
            if rises > 10 {
                return Err(Error::Numerical(format!(
                    "Rayleigh quotient keeps increasing ({r} -> {r_next})"
                )));
            }
        }
        let done = (r_next - r).abs() <= RAYLEIGH_TOL * r && shape <= SHAPE_TOL;
        u = next;
        r = r_next;
        if done {
            return finish(ctx, u, r, sweep, restarts);
        }
    }
    Err(Error::Numerical(format!(
        "inverse iteration did not settle in {MAX_SWEEPS} sweeps (λ ≈ {r})"
    )))
}

fn finish(ctx: &OperatorContext, u: GridFunction, r: f64, iterations: usize, restarts: usize) -> Result<EigenPair> {
    let p = &ctx.p;
    let stiff = assemble_residual(ctx, &u, &|_: [f64; 2]| 0.0)?;
    let load = assemble_residual(ctx, &GridFunction::zeros(ctx.mesh.clone()), &power_load(&u, p, -1.0))?;
    let kl: f64 = stiff.iter().zip(&load).map(|(a, b)| a * b).sum();
    let ll: f64 = load.iter().map(|b| b * b).sum();
    let equation_lambda = kl / ll;
    let res: Vec<f64> = stiff.iter().zip(&load).map(|(a, b)| a - r * b).collect();
    let residual = dual_norm(&ctx.mesh, &res);
    Ok(EigenPair {
        lambda: r,
        modular: modular(&u, p)?,
        rayleigh: r,
        equation_lambda,
        residual,
        consistent: residual <= RESIDUAL_TOL,
        eigenfunction: u,
        iterations,
        restarts,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct EnlargedEigen {
    pub pair: EigenPair,
    #[serde(skip)]
    pub restricted: GridFunction,
    pub tau: f64,
    pub margin: f64,
}

/// Eigenpair on the domain dilated by `margin`, its restriction to the
/// original mesh, and `τ = ½ min φ̃` over the original nodes.
pub fn enlarged_eigenpair(ctx: &OperatorContext, margin: f64) -> Result<EnlargedEigen> {
    if !(margin > 0.0) {
        return Err(Error::Domain(format!("margin must be positive, got {margin}")));
    }
    let big = Arc::new(dilate_domain(&ctx.mesh, margin)?);
    let big_ctx = OperatorContext {
        mesh: big.clone(),
        p: ctx.p.on_mesh(&big)?,
        ..ctx.clone()
    };
    let pair = first_eigenpair(&big_ctx)?;
    let restricted = pair.eigenfunction.restrict(&ctx.mesh)?;
    let tau = 0.5 * restricted.min();
    if !(tau > 0.0) {
        return Err(Error::Containment(format!(
            "restricted eigenfunction is not positive on the closed domain (τ = {tau:e})"
        )));
    }
    Ok(EnlargedEigen {
        pair,
        restricted,
        tau,
        margin,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_interval_mesh, build_rectangle_mesh, Mesh};
    use std::f64::consts::PI;

    fn ctx(p: &str, mesh: Mesh) -> OperatorContext {
        let m = Arc::new(mesh);
        OperatorContext::new(ExponentField::from_expr(p, &m).unwrap())
    }

    #[test]
    fn laplacian_interval() {
        let e = first_eigenpair(&ctx("2", build_interval_mesh(0.0, 1.0, 256).unwrap())).unwrap();
        assert!((e.lambda - PI * PI).abs() < 0.01 * PI * PI, "{}", e.lambda);
        assert!((e.modular - 1.0).abs() < 1e-10);
        assert!(e.consistent && e.residual < RESIDUAL_TOL, "{e:?}");
    }

    #[test]
    fn laplacian_square() {
        let e = first_eigenpair(&ctx("2", build_rectangle_mesh(0.0, 0.0, 1.0, 1.0, 16, 16).unwrap())).unwrap();
        assert!((e.lambda - 2.0 * PI * PI).abs() < 0.03 * 2.0 * PI * PI, "{}", e.lambda);
    }

    /// `π_p` by quadrature of `∫₀¹ (1 − s^p)^{−1/p} ds`, substituting
    /// `s = 1 − t²` near the endpoint singularity.
    fn pi_p_quadrature(p: f64) -> f64 {
        let n = 200_000;
        let h = 1.0 / n as f64;
        let mut sum = 0.0;
        for i in 0..n {
            let t = (i as f64 + 0.5) * h;
            let s = 1.0 - t * t;
            sum += 2.0 * t * (1.0 - s.powf(p)).powf(-1.0 / p) * h;
        }
        2.0 * sum
    }

    #[test]
    fn cubic_exponent_interval() {
        let p: f64 = 3.0;
        let pi_p = pi_p_quadrature(p);
        let closed = 2.0 * PI / (p * (PI / p).sin());
        assert!((pi_p - closed).abs() < 1e-6);
        let expected = (p - 1.0) * pi_p.powf(p);
        let e = first_eigenpair(&ctx("3", build_interval_mesh(0.0, 1.0, 512).unwrap())).unwrap();
        assert!((e.lambda - expected).abs() < 0.02 * expected, "{} vs {expected}", e.lambda);
        assert!(e.residual < RESIDUAL_TOL, "{e:?}");
    }

    #[test]
    fn enlarged_interval() {
        let c = ctx("2", build_interval_mesh(0.0, 1.0, 128).unwrap());
        let big = enlarged_eigenpair(&c, 0.25).unwrap();
        let expected = PI * PI / 2.25;
        assert!((big.pair.lambda - expected).abs() < 0.01 * expected);
        assert!(big.restricted.values().iter().all(|&v| v > big.tau));
        let bigger = enlarged_eigenpair(&c, 0.5).unwrap();
        assert!(bigger.pair.lambda < big.pair.lambda);
        assert!(enlarged_eigenpair(&c, 0.0).is_err());
    }

    #[test]
    fn eigenfunction_shape() {
        let c = ctx("2 + x", build_interval_mesh(0.0, 1.0, 64).unwrap());
        let e = first_eigenpair(&c).unwrap();
        let v = e.eigenfunction.values();
        let mesh = &c.mesh;
        assert!(mesh.interior_nodes().iter().all(|&i| v[i] > 0.0));
        // increasing away from both ends
        assert!(v[1] < v[2] && v[2] < v[3]);
        let n = v.len() - 1;
        assert!(v[n - 1] < v[n - 2] && v[n - 2] < v[n - 3]);
        let scaled = first_eigenpair_from(&c, &e.eigenfunction.scaled(10.0)).unwrap();
        assert!((scaled.lambda - e.lambda).abs() <= 1e-8 * e.lambda);
        assert!(scaled.eigenfunction.max_distance(&e.eigenfunction).unwrap() < 1e-6);
    }
}
