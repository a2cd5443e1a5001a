//! Shooting: parametrise by the initial vector `c`, integrate `x' = f(t,x)`,
//! `x(0) = c` with classical RK4 on the problem grid and solve
//!
//! ```text
//! F_n(c) = c_n - <alpha_n, (x_c)_n |[0,t0]> = 0.
//! ```
//!
//! Newton with a finite-difference Jacobian is used up to
//! [`NEWTON_MAX_DIM`] components; otherwise, and whenever a Newton step is
//! unusable, the rearranged fixed-point map
//! `c <- (1 - <alpha,1>)^{-1} <alpha, (x_c - c)|[0,t0]>` is applied.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::Trajectory;
use crate::operator::{solution_seminorms, FixedPointOperator, Method, SolveResult};
use crate::problem::ProblemSpec;

/// Largest system solved with Newton steps.
pub const NEWTON_MAX_DIM: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ShootingSettings {
    /// Threshold on `||F(c)||_inf`.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for ShootingSettings {
    fn default() -> Self {
        ShootingSettings {
            tol: 1e-11,
            max_iter: 100,
        }
    }
}

/// `c` together with `F(c)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ShootResidual {
    pub c: Vec<f64>,
    pub residual: Vec<f64>,
}

impl ShootResidual {
    pub fn norm(&self) -> f64 {
        self.residual.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Classical fourth-order Runge–Kutta on the nodes of the problem grid.
pub fn integrate_ivp(c: &[f64], spec: &ProblemSpec) -> Result<Trajectory> {
    let n = spec.truncation();
    if c.len() != n {
        return Err(Error::Index { index: c.len(), len: n });
    }
    let nodes = spec.grid().nodes();
    let mut values = Vec::with_capacity(nodes.len() * n);
    values.extend_from_slice(c);
    let mut y = c.to_vec();
    let (mut k1, mut k2, mut k3, mut k4) = (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    let mut stage = vec![0.0; n];
    for w in nodes.windows(2) {
        let (t, h) = (w[0], w[1] - w[0]);
        spec.eval_rhs(t, &y, &mut k1)?;
        for j in 0..n {
            stage[j] = y[j] + 0.5 * h * k1[j];
        }
        spec.eval_rhs(t + 0.5 * h, &stage, &mut k2)?;
        for j in 0..n {
            stage[j] = y[j] + 0.5 * h * k2[j];
        }
        spec.eval_rhs(t + 0.5 * h, &stage, &mut k3)?;
        for j in 0..n {
            stage[j] = y[j] + h * k3[j];
        }
        spec.eval_rhs(w[1], &stage, &mut k4)?;
        for j in 0..n {
            y[j] += h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
        }
        values.extend_from_slice(&y);
    }
    Trajectory::from_values(Arc::clone(spec.grid()), n, values)
}

struct Shooter<'a> {
    spec: &'a ProblemSpec,
    op: FixedPointOperator<'a>,
    /// `<alpha_n, 1>` as seen by the discrete functional.
    discrete_one: Vec<f64>,
}

impl<'a> Shooter<'a> {
    fn new(spec: &'a ProblemSpec) -> Result<Self> {
        let op = FixedPointOperator::new(spec)?;
        let discrete_one = op.functionals().iter().map(|a| a.weights().iter().sum()).collect();
        Ok(Shooter { spec, op, discrete_one })
    }

    fn residual_of(&self, c: &[f64], x: &Trajectory) -> Vec<f64> {
        let n = self.spec.truncation();
        self.op
            .functionals()
            .iter()
            .enumerate()
            .map(|(j, a)| c[j] - a.apply_strided(x.values(), n, j))
            .collect()
    }

    fn eval(&self, c: &[f64]) -> Result<(Vec<f64>, Trajectory)> {
        let x = integrate_ivp(c, self.spec)?;
        Ok((self.residual_of(c, &x), x))
    }

    fn jacobian(&self, c: &[f64], f0: &[f64]) -> Result<DMatrix<f64>> {
        let n = c.len();
        let columns: Vec<Vec<f64>> = (0..n)
            .into_par_iter()
            .map(|j| {
                let step = f64::EPSILON.sqrt() * (1.0 + c[j].abs());
                let mut cj = c.to_vec();
                cj[j] += step;
                let step = cj[j] - c[j];
                let (fj, _) = self.eval(&cj)?;
                Ok(fj.iter().zip(f0).map(|(a, b)| (a - b) / step).collect())
            })
            .collect::<Result<_>>()?;
        Ok(DMatrix::from_fn(n, n, |i, j| columns[j][i]))
    }

    /// `c - F(c) / (1 - <alpha,1>)`, exact in one step when `F` is affine
    /// with the diagonal slope of an `x`-independent right-hand side.
    fn fixed_point_step(&self, c: &[f64], f: &[f64]) -> Vec<f64> {
        c.iter()
            .zip(f)
            .zip(&self.discrete_one)
            .map(|((c, f), a)| c - f / (1.0 - a))
            .collect()
    }
}

/// `F(c)`.
pub fn residual(c: &[f64], spec: &ProblemSpec) -> Result<ShootResidual> {
    let shooter = Shooter::new(spec)?;
    let (r, _) = shooter.eval(c)?;
    Ok(ShootResidual {
        c: c.to_vec(),
        residual: r,
    })
}

fn sup(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Solves `F(c) = 0` from `c = 0`.
pub fn solve_shooting(spec: &ProblemSpec, settings: &ShootingSettings) -> Result<SolveResult> {
    if !(settings.tol.is_finite() && settings.tol > 0.0) || settings.max_iter == 0 {
        return Err(Error::config("shooting needs tol > 0 and max_iter >= 1"));
    }
    let shooter = Shooter::new(spec)?;
    let n = spec.truncation();
    let mut warnings = shooter.op.warnings().to_vec();
    let mut c = vec![0.0; n];
    let (mut f, mut x) = shooter.eval(&c)?;
    let mut history = vec![sup(&f)];
    let mut iterations = 0;
    while sup(&f) > settings.tol {
        if iterations >= settings.max_iter {
            return Err(Error::NonConvergence {
                iterations,
                last_residual: sup(&f),
                history,
            });
        }
        iterations += 1;
        let current = sup(&f);
        let mut accepted = None;
        if n <= NEWTON_MAX_DIM {
            let jac = shooter.jacobian(&c, &f)?;
            let rhs = DVector::from_iterator(n, f.iter().map(|v| -v));
            match jac.lu().solve(&rhs).filter(|d| d.iter().all(|v| v.is_finite())) {
                Some(delta) => {
                    let mut scale = 1.0;
                    for _ in 0..8 {
                        let trial: Vec<f64> = c.iter().zip(delta.iter()).map(|(c, d)| c + scale * d).collect();
                        let (ft, xt) = shooter.eval(&trial)?;
                        if sup(&ft) < current {
                            accepted = Some((trial, ft, xt));
                            break;
                        }
                        scale *= 0.5;
                    }
                    if accepted.is_none() {
                        warnings.push(format!(
                            "iteration {iterations}: Newton step gave no decrease; fixed-point step used"
                        ));
                    }
                }
                None => warnings.push(format!(
                    "iteration {iterations}: singular Jacobian; fixed-point step used"
                )),
            }
        }
        let (nc, nf, nx) = match accepted {
            Some(step) => step,
            None => {
                let trial = shooter.fixed_point_step(&c, &f);
                let (ft, xt) = shooter.eval(&trial)?;
                (trial, ft, xt)
            }
        };
        c = nc;
        f = nf;
        x = nx;
        history.push(sup(&f));
    }
    let nonlocal_residuals = shooter.op.nonlocal_residuals(&x);
    let seminorms = solution_seminorms(&x, spec)?;
    Ok(SolveResult {
        method: Method::Shoot,
        trajectory: x,
        iterations,
        final_residual: sup(&f),
        nonlocal_residuals,
        seminorms,
        residual_history: history,
        initial_guess: "zero".into(),
        warnings,
    })
}

/// One application of the fixed-point map on `c`.
pub fn fixed_point_step(c: &[f64], spec: &ProblemSpec) -> Result<Vec<f64>> {
    let shooter = Shooter::new(spec)?;
    let (f, _) = shooter.eval(c)?;
    Ok(shooter.fixed_point_step(c, &f))
}
