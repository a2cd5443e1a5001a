//! The full problem: right-hand sides, nonlocal functionals, horizon and
//! grid, truncation level, growth envelopes and seminorm sequences.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::functionals::{FunctionalFamily, StieltjesFunctional};
use crate::grid::Grid;
use crate::hypothesis::{self, GrowthEnvelope};
use crate::rhs::{self, Closure, RhsFamily};
use crate::seminorm::SeminormConfig;

/// How the seminorm sequences are chosen.
#[derive(Debug, Clone, PartialEq)]
pub enum SeminormChoice {
    /// `n_p = p`, `t_p = t0 + p (t_max - t0) / P`.
    Default { count: usize },
    /// Explicit `(n_p)`, `(t_p)`; `theta` when given, otherwise derived
    /// from the growth envelope where the existence inequality holds.
    Explicit {
        n_seq: Vec<usize>,
        t_seq: Vec<f64>,
        theta: Option<Vec<f64>>,
    },
}

impl Default for SeminormChoice {
    fn default() -> Self {
        SeminormChoice::Default { count: 4 }
    }
}

/// A truncated (finite, `N`-component) instance of a possibly infinite
/// nonlocal initial value problem.
#[derive(Debug, Clone)]
pub struct ProblemSpec {
    t0: f64,
    t_max: f64,
    h: f64,
    grid: Arc<Grid>,
    rhs: Arc<dyn RhsFamily>,
    functionals: FunctionalFamily,
    truncation: usize,
    closure: Closure,
    envelope: Option<GrowthEnvelope>,
    seminorm_choice: SeminormChoice,
    seminorms: SeminormConfig,
    /// Functionals `alpha_1 .. alpha_N`, cached.
    active: Vec<StieltjesFunctional>,
}

/// Builder for [`ProblemSpec`].
#[derive(Debug, Clone)]
pub struct ProblemBuilder {
    t0: f64,
    t_max: f64,
    h: f64,
    rhs: Option<Arc<dyn RhsFamily>>,
    functionals: Option<FunctionalFamily>,
    truncation: usize,
    closure: Closure,
    envelope: Option<GrowthEnvelope>,
    seminorms: SeminormChoice,
}

impl ProblemBuilder {
    pub fn rhs(mut self, rhs: Arc<dyn RhsFamily>) -> Self {
        self.rhs = Some(rhs);
        self
    }

    pub fn functionals(mut self, functionals: FunctionalFamily) -> Self {
        self.functionals = Some(functionals);
        self
    }

    pub fn truncation(mut self, n: usize, closure: Closure) -> Self {
        self.truncation = n;
        self.closure = closure;
        self
    }

    pub fn envelope(mut self, envelope: GrowthEnvelope) -> Self {
        self.envelope = Some(envelope);
        self
    }

    pub fn seminorms(mut self, choice: SeminormChoice) -> Self {
        self.seminorms = choice;
        self
    }

    pub fn build(self) -> Result<ProblemSpec> {
        let rhs = self.rhs.ok_or_else(|| Error::config("problem has no right-hand side"))?;
        let functionals = self
            .functionals
            .ok_or_else(|| Error::config("problem has no nonlocal functionals"))?;
        ProblemSpec::assemble(
            self.t0,
            self.t_max,
            self.h,
            rhs,
            functionals,
            self.truncation,
            self.closure,
            self.envelope,
            self.seminorms,
        )
    }
}

impl ProblemSpec {
    pub fn builder(t0: f64, t_max: f64, h: f64) -> ProblemBuilder {
        ProblemBuilder {
            t0,
            t_max,
            h,
            rhs: None,
            functionals: None,
            truncation: 1,
            closure: Closure::Zero,
            envelope: None,
            seminorms: SeminormChoice::default(),
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn assemble(
        t0: f64,
        t_max: f64,
        h: f64,
        rhs: Arc<dyn RhsFamily>,
        functionals: FunctionalFamily,
        truncation: usize,
        closure: Closure,
        envelope: Option<GrowthEnvelope>,
        seminorm_choice: SeminormChoice,
    ) -> Result<Self> {
        if !(t0.is_finite() && t0 > 0.0) {
            return Err(Error::config(format!("t0 must be positive, got {t0}")));
        }
        if !(t_max.is_finite() && t0 < t_max) {
            return Err(Error::config(format!("need t0 < t_max, got t0 = {t0}, t_max = {t_max}")));
        }
        if functionals.t0() != t0 {
            return Err(Error::config("functionals are defined for a different t0"));
        }
        if truncation == 0 {
            return Err(Error::config("truncation N must be at least 1"));
        }
        let band = rhs.band();
        if truncation < band.reach() {
            return Err(Error::config(format!(
                "truncation N = {truncation} is below the coupling reach {}",
                band.reach()
            )));
        }
        if let Some(a) = rhs.absolute_reach() {
            if a > truncation {
                return Err(Error::BandViolation {
                    component: truncation,
                    index: a as i64,
                    lo: 1,
                    hi: truncation as i64,
                });
            }
        }
        if let Some(d) = rhs.finite_dim() {
            if truncation > d {
                return Err(Error::config(format!(
                    "truncation N = {truncation} exceeds the {d} equations of a finite system; pad it first"
                )));
            }
        }
        let active = functionals.first(truncation)?;

        let seminorms = match &seminorm_choice {
            SeminormChoice::Default { count } => {
                if *count == 0 {
                    return Err(Error::config("seminorm count P must be at least 1"));
                }
                SeminormConfig::default_rule(*count, t0, t_max)?
            }
            SeminormChoice::Explicit { n_seq, t_seq, theta } => SeminormConfig::new(
                n_seq.clone(),
                t_seq.clone(),
                theta.clone().unwrap_or_else(|| vec![1.0; n_seq.len()]),
                t0,
            )?,
        };
        if let Some(&tp) = seminorms.t_seq().last() {
            if tp > t_max {
                return Err(Error::config(format!("t_P = {tp} exceeds t_max = {t_max}")));
            }
        }

        let mut required = vec![t0];
        required.extend(seminorms.t_seq());
        for a in &active {
            required.extend(a.required_nodes());
        }
        let grid = Arc::new(Grid::with_nodes(t_max, h, &required)?);

        let mut spec = ProblemSpec {
            t0,
            t_max,
            h,
            grid,
            rhs,
            functionals,
            truncation,
            closure,
            envelope,
            seminorm_choice,
            seminorms,
            active,
        };
        let explicit_theta = matches!(
            &spec.seminorm_choice,
            SeminormChoice::Explicit { theta: Some(_), .. }
        );
        if !explicit_theta && spec.envelope.is_some() {
            let thetas = (1..=spec.seminorms.len())
                .map(|p| hypothesis::select_theta(&spec, p).unwrap_or(1.0))
                .collect();
            spec.seminorms = spec.seminorms.with_thetas(thetas)?;
        }
        Ok(spec)
    }

    fn rebuild(&self, truncation: usize, closure: Closure, choice: SeminormChoice) -> Result<Self> {
        Self::assemble(
            self.t0,
            self.t_max,
            self.h,
            Arc::clone(&self.rhs),
            self.functionals.clone(),
            truncation,
            closure,
            self.envelope.clone(),
            choice,
        )
    }

    /// Same problem at a different truncation level.
    pub fn with_truncation(&self, truncation: usize, closure: Closure) -> Result<Self> {
        self.rebuild(truncation, closure, self.seminorm_choice.clone())
    }

    pub fn with_seminorms(&self, choice: SeminormChoice) -> Result<Self> {
        self.rebuild(self.truncation, self.closure, choice)
    }

    /// Same problem on a grid of step `h`.
    pub fn with_step(&self, h: f64) -> Result<Self> {
        let mut copy = self.clone();
        copy.h = h;
        copy.rebuild(self.truncation, self.closure, self.seminorm_choice.clone())
    }

    pub fn with_envelope(&self, envelope: Option<GrowthEnvelope>) -> Result<Self> {
        let mut copy = self.clone();
        copy.envelope = envelope;
        copy.rebuild(self.truncation, self.closure, self.seminorm_choice.clone())
    }

    pub(crate) fn replace_parts(
        &self,
        rhs: Arc<dyn RhsFamily>,
        functionals: FunctionalFamily,
        choice: SeminormChoice,
    ) -> Result<Self> {
        Self::assemble(
            self.t0,
            self.t_max,
            self.h,
            rhs,
            functionals,
            self.truncation,
            self.closure,
            self.envelope.clone(),
            choice,
        )
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn t_max(&self) -> f64 {
        self.t_max
    }

    pub fn step(&self) -> f64 {
        self.h
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn rhs(&self) -> &Arc<dyn RhsFamily> {
        &self.rhs
    }

    pub fn functionals(&self) -> &FunctionalFamily {
        &self.functionals
    }

    /// `alpha_1 .. alpha_N`.
    pub fn active_functionals(&self) -> &[StieltjesFunctional] {
        &self.active
    }

    pub fn truncation(&self) -> usize {
        self.truncation
    }

    pub fn closure(&self) -> Closure {
        self.closure
    }

    pub fn envelope(&self) -> Option<&GrowthEnvelope> {
        self.envelope.as_ref()
    }

    pub fn seminorms(&self) -> &SeminormConfig {
        &self.seminorms
    }

    pub fn seminorm_choice(&self) -> &SeminormChoice {
        &self.seminorm_choice
    }

    /// `f_1 .. f_N` at `(t, x)` with the truncation closure applied.
    pub fn eval_rhs(&self, t: f64, x: &[f64], out: &mut [f64]) -> Result<()> {
        if x.len() != self.truncation || out.len() != self.truncation {
            return Err(Error::Index {
                index: x.len().max(out.len()),
                len: self.truncation,
            });
        }
        rhs::eval_system(self.rhs.as_ref(), self.closure, t, x, out)
    }
}
