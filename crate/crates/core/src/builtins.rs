//! Named, versioned problems. Each returns a [`ProblemBuilder`] with the
//! right-hand side, functionals and (where one is known) growth envelope
//! filled in; truncation and seminorms are left to the caller.

use std::sync::Arc;

use crate::dsl::{parse, Param, Params};
use crate::error::{Error, Result};
use crate::functionals::{FunctionalFamily, FunctionalGenerator, MassRule, PieceRule, StieltjesFunctional};
use crate::hypothesis::GrowthEnvelope;
use crate::problem::{ProblemBuilder, ProblemSpec};
use crate::rhs::{ConstantRhs, Example35Rhs, FiniteAffine, UncoupledLinear};

pub const NAMES: [&str; 4] = ["example35", "constant_rhs_oracle", "finite_affine", "uncoupled_exp"];

/// Time horizon shared by every builtin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Horizon {
    pub t0: f64,
    pub t_max: f64,
    pub h: f64,
}

impl Horizon {
    pub fn new(t0: f64, t_max: f64, h: f64) -> Self {
        Horizon { t0, t_max, h }
    }

    fn builder(&self) -> ProblemBuilder {
        ProblemSpec::builder(self.t0, self.t_max, self.h)
    }
}

fn params_with_t0(t0: f64) -> Params {
    let mut p = Params::new();
    p.set_scalar("t0", t0);
    p
}

/// `x_n' = k_n/(1+t^2) x_n + t cos x_{n+1}`,
/// `x_n(0) = 1/(n+t0) int_0^t0 x_n(s) ds`, with envelope
/// `A_p = [k]_p/(1+t^2)`, `B_p = t0`, `C_p = [k]_p + t_p`.
pub fn example35(k: Param, horizon: Horizon) -> Result<ProblemBuilder> {
    let t0 = horizon.t0;
    let generator = FunctionalGenerator {
        masses: Vec::new(),
        pieces: vec![PieceRule {
            from: parse("0")?,
            to: parse("t0")?,
            coeffs: vec![parse("1/(n+t0)")?],
        }],
        params: params_with_t0(t0),
    };
    let mut env_params = Params::new();
    env_params.set("k", k.clone());
    let envelope = GrowthEnvelope::parse("maxabs(k, p)/(1+t^2)", "t0", "maxabs(k, p) + t", env_params)?;
    Ok(horizon
        .builder()
        .rhs(Arc::new(Example35Rhs::new(k)))
        .functionals(FunctionalFamily::generated(t0, generator)?)
        .envelope(envelope))
}

/// Closed form of the `example35` envelope inequality,
/// `[k]_p (1 + t0) atan(t0)`.
pub fn example35_lhs(k_bracket: f64, t0: f64) -> f64 {
    k_bracket * (1.0 + t0) * t0.atan()
}

/// Scalar `x' = value`, `x(0) = weight * x(mass_t)`. Exact solution
/// `x(t) = c + value * t` with `c = weight * value * mass_t / (1 - weight)`.
pub fn constant_rhs_oracle(value: f64, mass_t: f64, weight: f64, horizon: Horizon) -> Result<ProblemBuilder> {
    let t0 = horizon.t0;
    let alpha = StieltjesFunctional::point_mass(t0, mass_t, weight)?;
    let envelope = GrowthEnvelope::parse("0", &format!("{:?}", value.abs()), &format!("{:?}", value.abs()), Params::new())?;
    Ok(horizon
        .builder()
        .rhs(Arc::new(ConstantRhs(value)))
        .functionals(FunctionalFamily::new(
            t0,
            vec![alpha],
            crate::functionals::FunctionalTail::RepeatLast,
        )?)
        .envelope(envelope))
}

pub fn constant_rhs_exact(value: f64, mass_t: f64, weight: f64, t: f64) -> f64 {
    weight * value * mass_t / (1.0 - weight) + value * t
}

/// `x_n' = -x_n / n + 1`, `x_n(0) = x_n(t0/2) / 2`: uncoupled, so every
/// truncation is exact.
pub fn uncoupled_exp(horizon: Horizon) -> Result<ProblemBuilder> {
    let t0 = horizon.t0;
    let generator = FunctionalGenerator {
        masses: vec![MassRule {
            t: parse("t0/2")?,
            weight: parse("0.5")?,
        }],
        pieces: Vec::new(),
        params: params_with_t0(t0),
    };
    let envelope = GrowthEnvelope::parse("1", "1", "1", Params::new())?;
    Ok(horizon
        .builder()
        .rhs(Arc::new(UncoupledLinear::new(parse("-1/n")?, 1.0, Params::new())?))
        .functionals(FunctionalFamily::generated(t0, generator)?)
        .envelope(envelope))
}

/// Exact `x_n(t)` for [`uncoupled_exp`].
pub fn uncoupled_exp_exact(n: usize, t: f64, t0: f64) -> f64 {
    let rate = -1.0 / n as f64;
    let tau = 0.5 * t0;
    let decay = (rate * tau).exp();
    let c = 0.5 * (decay - 1.0) / rate / (1.0 - 0.5 * decay);
    c * (rate * t).exp() + ((rate * t).exp() - 1.0) / rate
}

/// `x' = A(t) x + b(t)` with the given functionals (one per equation).
pub fn finite_affine(
    matrix: &[&[&str]],
    forcing: &[&str],
    functionals: Vec<StieltjesFunctional>,
    horizon: Horizon,
) -> Result<ProblemBuilder> {
    if functionals.len() != forcing.len() {
        return Err(Error::config(format!(
            "{} functionals for {} equations",
            functionals.len(),
            forcing.len()
        )));
    }
    let rhs = FiniteAffine::parse(matrix, forcing, Params::new())?;
    Ok(horizon
        .builder()
        .rhs(Arc::new(rhs))
        .functionals(FunctionalFamily::listed(horizon.t0, functionals)?))
}
