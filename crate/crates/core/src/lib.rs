//! Solvers and existence-hypothesis checks for (possibly infinite) systems
//! of first-order ODEs on the half line with nonlocal initial conditions
//!
//! ```text
//! x_n'(t) = f_n(t, x_1(t), x_2(t), ...),   x_n(0) = <alpha_n, x_n|[0,t0]>,
//! ```
//!
//! where each `alpha_n` is a continuous linear functional on `C[0, t0]`.
//!
//! All computation happens on a finite horizon `[0, t_max]` and a fixed
//! grid. The main pieces:
//!
//! * [`problem::ProblemSpec`] bundles the right-hand-side family, the
//!   functionals, grid, truncation level and growth envelopes.
//! * [`operator`] applies the fixed-point operator `T` and runs Picard
//!   iteration; [`shooting`] solves the same problem by root-finding on the
//!   initial vector, as an independent check.
//! * [`hypothesis`] evaluates the existence constants `G_p`, `theta_p`,
//!   `M_p`, `K_p`, `rho_p` and the inequality `G_p ||A_p||_{L1} < 1`.
//! * [`truncation`] truncates infinite systems, pads finite ones and runs
//!   convergence studies over the truncation level.
//! * [`dsl`] parses right-hand sides and rules from text.

pub mod builtins;
pub mod dsl;
pub mod error;
pub mod functionals;
pub mod grid;
pub mod hypothesis;
pub mod operator;
pub mod poly;
pub mod problem;
pub mod rhs;
pub mod seminorm;
pub mod shooting;
pub mod truncation;

pub use error::{Error, Result};
pub use functionals::{FunctionalFamily, PointMass, StieltjesFunctional};
pub use grid::{Grid, Trajectory};
pub use hypothesis::{GrowthEnvelope, HypothesisReport};
pub use operator::{solve_picard, PicardSettings, SolveResult};
pub use problem::{ProblemSpec, SeminormChoice};
pub use seminorm::{evaluate_seminorms, seminorm_bracket, SeminormConfig};
pub use shooting::{solve_shooting, ShootingSettings};
