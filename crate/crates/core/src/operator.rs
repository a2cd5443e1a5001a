//! The Volterra operator `R(v)(t) = int_0^t f(s, v(s)) ds`, the fixed-point
//! operator
//!
//! ```text
//! T(v)_n(t) = (1 - <alpha_n, 1>)^{-1} <alpha_n, R(v)_n |[0,t0]> + R(v)_n(t)
//! ```
//!
//! whose fixed points are the solutions of the nonlocal problem, and a
//! damped Picard iteration on `T`.

use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::functionals::DiscreteFunctional;
use crate::grid::Trajectory;
use crate::hypothesis::ILL_CONDITIONED;
use crate::problem::ProblemSpec;
use crate::seminorm::{seminorms_with, SeminormTriple};

/// Smallest damping factor reached by automatic halving.
pub const MIN_DAMPING: f64 = 1.0 / 16.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PicardSettings {
    /// Threshold on the relative change between iterates.
    pub tol: f64,
    pub max_iter: usize,
    /// Initial damping `lambda` in `(0, 1]`.
    pub damping: f64,
}

impl Default for PicardSettings {
    fn default() -> Self {
        PicardSettings {
            tol: 1e-12,
            max_iter: 500,
            damping: 1.0,
        }
    }
}

impl PicardSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol.is_finite() && self.tol > 0.0) {
            return Err(Error::config(format!("tol must be positive, got {}", self.tol)));
        }
        if self.max_iter == 0 {
            return Err(Error::config("max_iter must be at least 1"));
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(Error::config(format!("damping must lie in (0, 1], got {}", self.damping)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Picard,
    Shoot,
}

/// A converged solution with diagnostics.
#[derive(Debug, Clone, Serialize)]
pub struct SolveResult {
    pub method: Method,
    #[serde(skip)]
    pub trajectory: Trajectory,
    pub iterations: usize,
    pub final_residual: f64,
    /// `|x_n(0) - <alpha_n, x_n|[0,t0]>|` per component.
    pub nonlocal_residuals: Vec<f64>,
    /// Seminorms of the solution; `n_p` is capped at the truncation level.
    pub seminorms: Vec<SeminormTriple>,
    pub residual_history: Vec<f64>,
    pub initial_guess: String,
    pub warnings: Vec<String>,
}

/// `T` bound to one problem: node weights of every `alpha_n` and the
/// factors `(1 - <alpha_n,1>)^{-1}`.
#[derive(Debug, Clone)]
pub struct FixedPointOperator<'a> {
    spec: &'a ProblemSpec,
    functionals: Vec<DiscreteFunctional>,
    inverse_denominators: Vec<f64>,
    warnings: Vec<String>,
}

impl<'a> FixedPointOperator<'a> {
    pub fn new(spec: &'a ProblemSpec) -> Result<Self> {
        let mut functionals = Vec::with_capacity(spec.truncation());
        let mut inverse_denominators = Vec::with_capacity(spec.truncation());
        let mut warnings = Vec::new();
        for (j, alpha) in spec.active_functionals().iter().enumerate() {
            let denom = 1.0 - alpha.one_value();
            if denom == 0.0 {
                return Err(Error::HypothesisViolation {
                    component: j + 1,
                    detail: "<alpha_n, 1> = 1".into(),
                });
            }
            if denom.abs() < ILL_CONDITIONED {
                warnings.push(format!(
                    "component {}: |1 - <alpha_n, 1>| = {:e} is ill-conditioned",
                    j + 1,
                    denom.abs()
                ));
            }
            functionals.push(alpha.discretize(spec.grid())?);
            inverse_denominators.push(1.0 / denom);
        }
        Ok(FixedPointOperator {
            spec,
            functionals,
            inverse_denominators,
            warnings,
        })
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub fn functionals(&self) -> &[DiscreteFunctional] {
        &self.functionals
    }

    /// `R(v)` by the cumulative composite trapezoidal rule.
    pub fn integrate_rhs(&self, v: &Trajectory) -> Result<Trajectory> {
        integrate_rhs(v, self.spec)
    }

    /// `T(v)`.
    pub fn apply(&self, v: &Trajectory) -> Result<Trajectory> {
        let r = self.integrate_rhs(v)?;
        let n = self.spec.truncation();
        let shift: Vec<f64> = self
            .functionals
            .iter()
            .zip(&self.inverse_denominators)
            .enumerate()
            .map(|(j, (alpha, inv))| inv * alpha.apply_strided(r.values(), n, j))
            .collect();
        let values = r
            .values()
            .chunks_exact(n)
            .flat_map(|row| row.iter().zip(&shift).map(|(x, c)| x + c))
            .collect();
        Trajectory::from_values(Arc::clone(r.grid()), n, values)
    }

    /// `|x_n(0) - <alpha_n, x_n|[0,t0]>|` for every component.
    pub fn nonlocal_residuals(&self, x: &Trajectory) -> Vec<f64> {
        let n = self.spec.truncation();
        self.functionals
            .iter()
            .enumerate()
            .map(|(j, alpha)| (x.value(0, j) - alpha.apply_strided(x.values(), n, j)).abs())
            .collect()
    }
}

fn check_shape(v: &Trajectory, spec: &ProblemSpec) -> Result<()> {
    if v.n_components() != spec.truncation() || v.grid().nodes() != spec.grid().nodes() {
        return Err(Error::config(format!(
            "trajectory ({} components, {} nodes) does not match the problem ({} components, {} nodes)",
            v.n_components(),
            v.grid().len(),
            spec.truncation(),
            spec.grid().len()
        )));
    }
    Ok(())
}

/// `R(v)(t) = int_0^t f(s, v(s)) ds` at every node, componentwise, by the
/// cumulative composite trapezoidal rule; `R(v)(0) = 0`.
pub fn integrate_rhs(v: &Trajectory, spec: &ProblemSpec) -> Result<Trajectory> {
    check_shape(v, spec)?;
    let n = spec.truncation();
    let nodes = spec.grid().nodes();
    let mut f = vec![0.0; v.values().len()];
    f.par_chunks_mut(n)
        .enumerate()
        .try_for_each(|(i, out)| spec.eval_rhs(nodes[i], v.row(i), out))?;
    let mut values = vec![0.0; f.len()];
    for i in 1..nodes.len() {
        let half = 0.5 * (nodes[i] - nodes[i - 1]);
        for j in 0..n {
            values[i * n + j] = values[(i - 1) * n + j] + half * (f[(i - 1) * n + j] + f[i * n + j]);
        }
    }
    Trajectory::from_values(Arc::clone(spec.grid()), n, values)
}

/// `T(v)`.
pub fn apply_t(v: &Trajectory, spec: &ProblemSpec) -> Result<Trajectory> {
    FixedPointOperator::new(spec)?.apply(v)
}

/// Relative change used to stop both the Picard iteration and its
/// diagnostics: the largest of `R_p(new - old) / (1 + R_p(old))` over the
/// configured `p` (with `n_p` capped at `N`) and the plain sup-norm ratio
/// over all components and the whole horizon.
pub fn relative_change(new: &Trajectory, old: &Trajectory, spec: &ProblemSpec) -> Result<f64> {
    let diff = new.sub(old)?;
    let cfg = spec.seminorms();
    let capped = cfg.capped_n(spec.truncation());
    let d = seminorms_with(&diff, &capped, cfg, spec.t0())?;
    let o = seminorms_with(old, &capped, cfg, spec.t0())?;
    let weighted = d
        .iter()
        .zip(&o)
        .map(|(d, o)| d.r_value / (1.0 + o.r_value))
        .fold(0.0, f64::max);
    let sup = diff.sup_norm() / (1.0 + old.sup_norm());
    Ok(weighted.max(sup))
}

/// Seminorms of `x` under the problem's configuration, `n_p` capped at `N`.
pub fn solution_seminorms(x: &Trajectory, spec: &ProblemSpec) -> Result<Vec<SeminormTriple>> {
    let cfg = spec.seminorms();
    seminorms_with(x, &cfg.capped_n(spec.truncation()), cfg, spec.t0())
}

/// Picard iteration `v <- (1 - lambda) v + lambda T(v)` from `initial`
/// (zero by default).
pub fn solve_picard(
    spec: &ProblemSpec,
    settings: &PicardSettings,
    initial: Option<&Trajectory>,
) -> Result<SolveResult> {
    solve_picard_observed(spec, settings, initial, |_, _| {})
}

/// [`solve_picard`], calling `observe(k, &v_k)` after every iterate.
pub fn solve_picard_observed(
    spec: &ProblemSpec,
    settings: &PicardSettings,
    initial: Option<&Trajectory>,
    mut observe: impl FnMut(usize, &Trajectory),
) -> Result<SolveResult> {
    settings.validate()?;
    let op = FixedPointOperator::new(spec)?;
    let (mut v, initial_guess) = match initial {
        Some(v0) => {
            check_shape(v0, spec)?;
            (v0.clone(), "user-supplied".to_string())
        }
        None => (Trajectory::zeros(Arc::clone(spec.grid()), spec.truncation()), "zero".to_string()),
    };
    let mut warnings = op.warnings().to_vec();
    let mut lambda = settings.damping;
    let mut history = Vec::new();
    let mut rises = 0;
    for k in 1..=settings.max_iter {
        let tv = op.apply(&v)?;
        let next = if lambda == 1.0 { tv } else { v.lincomb(1.0 - lambda, &tv, lambda)? };
        let residual = relative_change(&next, &v, spec)?;
        observe(k, &next);
        v = next;
        if history.last().is_some_and(|&prev| residual > prev) {
            rises += 1;
        } else {
            rises = 0;
        }
        history.push(residual);
        if residual <= settings.tol {
            let nonlocal_residuals = op.nonlocal_residuals(&v);
            let seminorms = solution_seminorms(&v, spec)?;
            return Ok(SolveResult {
                method: Method::Picard,
                trajectory: v,
                iterations: k,
                final_residual: residual,
                nonlocal_residuals,
                seminorms,
                residual_history: history,
                initial_guess,
                warnings,
            });
        }
        if rises >= 2 && lambda > MIN_DAMPING {
            lambda = (lambda / 2.0).max(MIN_DAMPING);
            rises = 0;
            warnings.push(format!("iteration {k}: residual rose twice, damping lowered to {lambda}"));
        }
    }
    Err(Error::NonConvergence {
        iterations: settings.max_iter,
        last_residual: history.last().copied().unwrap_or(f64::NAN),
        history,
    })
}
