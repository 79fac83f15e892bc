//! Damped Newton iteration with a banded Jacobian.

use crate::band::BandMatrix;

/// A nonlinear system `F(x) = 0` with a banded Jacobian.
pub trait NewtonProblem {
    fn size(&self) -> usize;
    fn residual(&self, x: &[f64]) -> Vec<f64>;
    /// Jacobian at `x`; `reg` is the gradient regularization to use, which
    /// may be larger than the one in the residual while far from a root.
    fn jacobian(&self, x: &[f64], reg: f64) -> BandMatrix;
    fn norm(&self, r: &[f64]) -> f64;
    /// Regularization the residual itself uses.
    fn base_regularization(&self) -> f64;
    /// Magnitude of the data at `x`; the tolerance is relative to
    /// `max(1, scale)` so that round-off in large loads does not stall it.
    fn scale(&self, _x: &[f64]) -> f64 {
        1.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonSettings {
    pub max_iterations: usize,
    pub tolerance: f64,
    pub max_halvings: usize,
}

impl Default for NewtonSettings {
    fn default() -> Self {
        NewtonSettings {
            max_iterations: 200,
            tolerance: 1e-10,
            max_halvings: 30,
        }
    }
}

#[derive(Debug, Clone)]
pub struct NewtonOutcome {
    pub x: Vec<f64>,
    pub residual: f64,
    /// The absolute tolerance actually applied.
    pub tolerance: f64,
    pub iterations: usize,
    pub converged: bool,
}

pub fn solve<P: NewtonProblem + ?Sized>(problem: &P, x0: &[f64], settings: &NewtonSettings) -> NewtonOutcome {
    let mut x = x0.to_vec();
    let mut r = problem.residual(&x);
    let mut norm = problem.norm(&r);
    let base = problem.base_regularization();
    let mut reg = base;
    let tol = settings.tolerance * problem.scale(&x).max(1.0);
    let mut iterations = 0;
    while iterations < settings.max_iterations {
        if norm <= tol {
            break;
        }
        if !norm.is_finite() {
            break;
        }
        iterations += 1;
        let step = match problem.jacobian(&x, reg).factor() {
            Ok(lu) => lu.solve(&r),
            Err(_) => {
                if reg >= 1.0 {
                    break;
                }
                reg = (reg.max(1e-12) * 100.0).min(1.0);
                continue;
            }
        };
        let mut alpha = 1.0;
        let mut accepted = false;
        for _ in 0..=settings.max_halvings {
            let trial: Vec<f64> = x.iter().zip(&step).map(|(xi, si)| xi - alpha * si).collect();
            let rt = problem.residual(&trial);
            let nt = problem.norm(&rt);
            if nt.is_finite() && nt <= (1.0 - 1e-4 * alpha) * norm {
                x = trial;
                r = rt;
                norm = nt;
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if accepted {
            reg = (reg / 10.0).max(base);
        } else if reg >= 1.0 {
            break;
        } else {
            reg = (reg.max(1e-12) * 100.0).min(1.0);
        }
    }
    NewtonOutcome {
        converged: norm <= tol,
        x,
        residual: norm,
        tolerance: tol,
        iterations,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    // x_i^3 + x_i - b_i = 0, decoupled, so the Jacobian is diagonal
    struct Cubic(Vec<f64>);

    impl NewtonProblem for Cubic {
        fn size(&self) -> usize {
            self.0.len()
        }
        fn residual(&self, x: &[f64]) -> Vec<f64> {
            x.iter().zip(&self.0).map(|(x, b)| x * x * x + x - b).collect()
        }
        fn jacobian(&self, x: &[f64], _reg: f64) -> BandMatrix {
            let mut j = BandMatrix::zeros(x.len(), 0, 0);
            for (i, xi) in x.iter().enumerate() {
                j.add(i, i, 3.0 * xi * xi + 1.0);
            }
            j
        }
        fn norm(&self, r: &[f64]) -> f64 {
            r.iter().map(|v| v * v).sum::<f64>().sqrt()
        }
        fn base_regularization(&self) -> f64 {
            0.0
        }
    }

    #[test]
    fn solves_cubic_from_far_away() {
        let p = Cubic(vec![2.0, -10.0, 1000.0]);
        let out = solve(&p, &[100.0, 100.0, -50.0], &NewtonSettings::default());
        assert!(out.converged, "{out:?}");
        assert!((out.x[0] - 1.0).abs() < 1e-10);
        assert!((out.x[1] + 2.0).abs() < 1e-10);
        assert!((out.x[2] - 9.966666).abs() < 1e-5);
    }

    #[test]
    fn reports_non_convergence() {
        let p = Cubic(vec![2.0]);
        let s = NewtonSettings {
            max_iterations: 1,
            ..Default::default()
        };
        let out = solve(&p, &[1e6], &s);
        assert!(!out.converged);
        assert_eq!(out.iterations, 1);
    }
}
