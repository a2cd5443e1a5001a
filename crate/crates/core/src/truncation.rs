//! Finite truncations of infinite systems, padding of finite systems into
//! infinite ones, and truncation convergence studies.

use std::fmt::Write as _;
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::Trajectory;
use crate::operator::{solve_picard, PicardSettings, SolveResult};
use crate::problem::{ProblemSpec, SeminormChoice};
use crate::rhs::Padded;
use crate::seminorm::seminorms_with;
use crate::shooting::{solve_shooting, ShootingSettings};

pub use crate::rhs::{Closure, CouplingBand};

/// The first `n` equations of `spec`'s family, with `closure` substituted
/// for components beyond `n`.
pub fn truncate(spec: &ProblemSpec, n: usize, closure: Closure) -> Result<ProblemSpec> {
    spec.with_truncation(n, closure)
}

/// Extends the finite system of `finite` (its `N = truncation()` equations
/// `g_n` and functionals `eta_n`) to the infinite family
/// `(g_1, .., g_N, g_N, ..)`, `(eta_1, .., eta_N, eta_N, ..)`, with seminorm
/// indices `n_p = N + p - 1`.
pub fn pad_finite(finite: &ProblemSpec) -> Result<ProblemSpec> {
    let n = finite.truncation();
    for (j, eta) in finite.active_functionals().iter().enumerate() {
        if eta.one_value() == 1.0 {
            return Err(Error::HypothesisViolation {
                component: j + 1,
                detail: "<eta_n, 1> = 1".into(),
            });
        }
    }
    let rhs = Arc::new(Padded::new(Arc::clone(finite.rhs()), n)?);
    let functionals = finite.functionals().padded(n)?;
    let cfg = finite.seminorms();
    let choice = SeminormChoice::Explicit {
        n_seq: (1..=cfg.len()).map(|p| n + p - 1).collect(),
        t_seq: cfg.t_seq().to_vec(),
        theta: match finite.seminorm_choice() {
            SeminormChoice::Explicit { theta: Some(th), .. } => Some(th.clone()),
            _ => None,
        },
    };
    finite.replace_parts(rhs, functionals, choice)
}

/// Solver used at each truncation level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum StudySolver {
    Picard(PicardSettings),
    Shoot(ShootingSettings),
}

impl StudySolver {
    pub fn solve(&self, spec: &ProblemSpec) -> Result<SolveResult> {
        match self {
            StudySolver::Picard(s) => solve_picard(spec, s, None),
            StudySolver::Shoot(s) => solve_shooting(spec, s),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StudyRow {
    #[serde(rename = "N")]
    pub n: usize,
    /// Distance to the next truncation level; `None` for the last level or
    /// when either solve failed.
    pub d: Option<f64>,
    pub iterations: Option<usize>,
    pub status: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StudyTable {
    pub rows: Vec<StudyRow>,
    /// Levels `N` at which `d` increased relative to the previous level.
    pub non_monotone: Vec<usize>,
}

impl StudyTable {
    pub fn all_converged(&self) -> bool {
        self.rows.iter().all(|r| r.status == "converged")
    }

    /// `N,d,iterations,status`, with empty cells for missing values.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("N,d,iterations,status\n");
        for r in &self.rows {
            let d = r.d.map(|v| format!("{v:.16e}")).unwrap_or_default();
            let it = r.iterations.map(|v| v.to_string()).unwrap_or_default();
            let _ = writeln!(out, "{},{},{},{}", r.n, d, it, r.status);
        }
        out
    }
}

/// `max_p R_p(a - b)` over the leading components both share, with `n_p`
/// capped at that count.
pub fn truncation_distance(a: &Trajectory, b: &Trajectory, spec: &ProblemSpec) -> Result<f64> {
    let shared = a.n_components().min(b.n_components());
    let diff = a.restrict_components(shared)?.sub(&b.restrict_components(shared)?)?;
    let cfg = spec.seminorms();
    let triples = seminorms_with(&diff, &cfg.capped_n(shared), cfg, spec.t0())?;
    Ok(triples.iter().map(|t| t.r_value).fold(0.0, f64::max))
}

/// Solves at each `N` (independently, in parallel) and reports the
/// distance between consecutive levels. Failed solves are recorded in the
/// table; the study itself only fails on an invalid level list.
pub fn convergence_study(
    spec: &ProblemSpec,
    levels: &[usize],
    solver: StudySolver,
) -> Result<StudyTable> {
    if levels.is_empty() || levels.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::config("truncation levels must be non-empty and strictly increasing"));
    }
    let solved: Vec<Result<SolveResult>> = levels
        .par_iter()
        .map(|&n| {
            let s = spec.with_truncation(n, spec.closure())?;
            solver.solve(&s)
        })
        .collect();
    let mut rows = Vec::with_capacity(levels.len());
    for (i, (&n, result)) in levels.iter().zip(&solved).enumerate() {
        let (iterations, status) = match result {
            Ok(r) => (Some(r.iterations), "converged".to_string()),
            Err(Error::NonConvergence { iterations, .. }) => (Some(*iterations), "non-convergence".to_string()),
            Err(e) => (None, format!("failed: {e}").replace(',', ";")),
        };
        let d = match (result, solved.get(i + 1)) {
            (Ok(a), Some(Ok(b))) => Some(truncation_distance(&a.trajectory, &b.trajectory, spec)?),
            _ => None,
        };
        rows.push(StudyRow {
            n,
            d,
            iterations,
            status,
        });
    }
    let mut non_monotone = Vec::new();
    let mut prev: Option<f64> = None;
    for r in &rows {
        if let Some(d) = r.d {
            if prev.is_some_and(|p| d > p) {
                non_monotone.push(r.n);
            }
            prev = Some(d);
        }
    }
    Ok(StudyTable { rows, non_monotone })
}
