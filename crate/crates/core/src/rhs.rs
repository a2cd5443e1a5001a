//! Right-hand-side families `f_n(t, x)`, `n = 1, 2, ...`, and the state
//! accessor that applies truncation closures and enforces coupling bands.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::dsl::{DslError, Env, Expr, Param, Params, StateAccess};
use crate::error::{Error, Result};

/// `f_n` may read `x_m` only for `n - lower <= m <= n + upper`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct CouplingBand {
    pub lower: usize,
    pub upper: usize,
}

impl CouplingBand {
    pub fn new(lower: usize, upper: usize) -> Self {
        CouplingBand { lower, upper }
    }

    pub fn union(self, other: CouplingBand) -> Self {
        CouplingBand::new(self.lower.max(other.lower), self.upper.max(other.upper))
    }

    pub fn reach(&self) -> usize {
        self.lower.max(self.upper)
    }
}

/// Substitution for components beyond the truncation level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Closure {
    /// `x_m := 0` for `m > N`.
    #[default]
    Zero,
    /// `x_m := x_N` for `m > N`.
    Freeze,
}

/// A family of right-hand sides. Implementations must be pure: `eval` is
/// called concurrently from several threads.
pub trait RhsFamily: Send + Sync + fmt::Debug {
    /// `f_n(t, x)` for one-based `n`; `x.read(m)` yields `x_m`.
    fn eval(&self, n: usize, t: f64, x: &dyn StateAccess) -> Result<f64, DslError>;

    /// Relative coupling band.
    fn band(&self) -> CouplingBand;

    /// Largest absolute index `x[c]` any component reads.
    fn absolute_reach(&self) -> Option<usize> {
        None
    }

    /// Component count when the family only defines finitely many `f_n`.
    fn finite_dim(&self) -> Option<usize> {
        None
    }

    /// Inclusive window of state indices component `n` may read.
    fn reach(&self, n: usize) -> (i64, i64) {
        let band = self.band();
        let (mut lo, mut hi) = (n as i64 - band.lower as i64, (n + band.upper) as i64);
        if let Some(a) = self.absolute_reach() {
            lo = lo.min(1);
            hi = hi.max(a as i64);
        }
        (lo, hi)
    }

    fn describe(&self) -> String {
        format!("{self:?}")
    }
}

/// State view of a truncated system: `N` stored values, closure beyond,
/// zero below index 1, band enforced.
pub(crate) struct TruncatedState<'a> {
    pub row: &'a [f64],
    pub closure: Closure,
    pub lo: i64,
    pub hi: i64,
}

impl StateAccess for TruncatedState<'_> {
    fn read(&self, index: i64) -> Result<f64, DslError> {
        if index < self.lo || index > self.hi {
            return Err(DslError::OutOfBand {
                index,
                lo: self.lo,
                hi: self.hi,
            });
        }
        if index < 1 {
            return Ok(0.0);
        }
        let m = index as usize;
        let n = self.row.len();
        Ok(if m <= n {
            self.row[m - 1]
        } else {
            match self.closure {
                Closure::Zero => 0.0,
                Closure::Freeze => self.row[n - 1],
            }
        })
    }
}

/// Evaluates `f_1 .. f_N` at `(t, row)` into `out`.
pub(crate) fn eval_system(
    rhs: &dyn RhsFamily,
    closure: Closure,
    t: f64,
    row: &[f64],
    out: &mut [f64],
) -> Result<()> {
    for (j, slot) in out.iter_mut().enumerate() {
        let n = j + 1;
        let (lo, hi) = rhs.reach(n);
        let state = TruncatedState { row, closure, lo, hi };
        *slot = rhs.eval(n, t, &state).map_err(|e| match e {
            DslError::OutOfBand { index, lo, hi } => Error::BandViolation {
                component: n,
                index,
                lo,
                hi,
            },
            source => Error::Evaluation {
                t,
                component: n,
                source,
            },
        })?;
        if !slot.is_finite() {
            return Err(Error::Evaluation {
                t,
                component: n,
                source: DslError::domain("right-hand side is not finite"),
            });
        }
    }
    Ok(())
}

/// One expression with index variable `n` defining every `f_n`.
#[derive(Debug, Clone)]
pub struct DslFamily {
    expr: Expr,
    params: Params,
}

impl DslFamily {
    pub fn new(expr: Expr, params: Params) -> Result<Self> {
        params.check_bound(&expr)?;
        Ok(DslFamily { expr, params })
    }

    pub fn parse(source: &str, params: Params) -> Result<Self> {
        Self::new(crate::dsl::parse(source)?, params)
    }

    pub fn expr(&self) -> &Expr {
        &self.expr
    }
}

impl RhsFamily for DslFamily {
    fn eval(&self, n: usize, t: f64, x: &dyn StateAccess) -> Result<f64, DslError> {
        let env = Env::new(&self.params).with_t(t).with_n(n as f64).with_state(x);
        self.expr.eval(&env)
    }

    fn band(&self) -> CouplingBand {
        self.expr.band()
    }

    fn absolute_reach(&self) -> Option<usize> {
        self.expr.max_absolute_index().map(|c| c.max(1) as usize)
    }

    fn describe(&self) -> String {
        format!("dsl: {}", self.expr)
    }
}

/// A finite system `g_1 .. g_N`, one expression per component.
#[derive(Debug, Clone)]
pub struct DslSystem {
    exprs: Vec<Expr>,
    params: Params,
}

impl DslSystem {
    pub fn new(exprs: Vec<Expr>, params: Params) -> Result<Self> {
        if exprs.is_empty() {
            return Err(Error::config("a finite system needs at least one equation"));
        }
        for e in &exprs {
            params.check_bound(e)?;
        }
        Ok(DslSystem { exprs, params })
    }
}

impl RhsFamily for DslSystem {
    fn eval(&self, n: usize, t: f64, x: &dyn StateAccess) -> Result<f64, DslError> {
        let e = self.exprs.get(n - 1).ok_or_else(|| {
            DslError::domain(format!("component {n} beyond the {}-equation system", self.exprs.len()))
        })?;
        let env = Env::new(&self.params).with_t(t).with_n(n as f64).with_state(x);
        e.eval(&env)
    }

    fn band(&self) -> CouplingBand {
        self.exprs
            .iter()
            .fold(CouplingBand::default(), |b, e| b.union(e.band()))
    }

    fn absolute_reach(&self) -> Option<usize> {
        self.exprs
            .iter()
            .filter_map(Expr::max_absolute_index)
            .max()
            .map(|c| c.max(1) as usize)
    }

    fn finite_dim(&self) -> Option<usize> {
        Some(self.exprs.len())
    }
}

/// `x' = A(t) x + b(t)` with entries given as expressions in `t`.
#[derive(Debug, Clone)]
pub struct FiniteAffine {
    matrix: Vec<Vec<Expr>>,
    forcing: Vec<Expr>,
    params: Params,
}

impl FiniteAffine {
    pub fn new(matrix: Vec<Vec<Expr>>, forcing: Vec<Expr>, params: Params) -> Result<Self> {
        let dim = forcing.len();
        if dim == 0 || matrix.len() != dim || matrix.iter().any(|r| r.len() != dim) {
            return Err(Error::config("affine system needs a square A(t) matching b(t)"));
        }
        for e in matrix.iter().flatten().chain(&forcing) {
            params.check_bound(e)?;
            if e.reads_state() {
                return Err(Error::config("entries of A(t) and b(t) must not read x"));
            }
        }
        Ok(FiniteAffine {
            matrix,
            forcing,
            params,
        })
    }

    pub fn parse(matrix: &[&[&str]], forcing: &[&str], params: Params) -> Result<Self> {
        let m = matrix
            .iter()
            .map(|row| row.iter().map(|s| crate::dsl::parse(s)).collect::<Result<Vec<_>, _>>())
            .collect::<Result<Vec<_>, _>>()?;
        let b = forcing
            .iter()
            .map(|s| crate::dsl::parse(s))
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(m, b, params)
    }
}

impl RhsFamily for FiniteAffine {
    fn eval(&self, n: usize, t: f64, x: &dyn StateAccess) -> Result<f64, DslError> {
        let row = self.matrix.get(n - 1).ok_or_else(|| {
            DslError::domain(format!("component {n} beyond the {}-equation system", self.forcing.len()))
        })?;
        let env = Env::new(&self.params).with_t(t).with_n(n as f64);
        let mut acc = self.forcing[n - 1].eval(&env)?;
        for (m, a) in row.iter().enumerate() {
            acc += a.eval(&env)? * x.read(m as i64 + 1)?;
        }
        Ok(acc)
    }

    fn band(&self) -> CouplingBand {
        CouplingBand::default()
    }

    fn absolute_reach(&self) -> Option<usize> {
        Some(self.forcing.len())
    }

    fn finite_dim(&self) -> Option<usize> {
        Some(self.forcing.len())
    }
}

/// `f_n(t, x) = k_n / (1 + t^2) x_n + t cos x_{n+1}`.
#[derive(Debug, Clone)]
pub struct Example35Rhs {
    params: Params,
}

impl Example35Rhs {
    /// `k` is a scalar, a list, or a rule in `n`.
    pub fn new(k: Param) -> Self {
        let mut params = Params::new();
        params.set("k", k);
        Example35Rhs { params }
    }

    pub fn k(&self, n: usize) -> Result<f64, DslError> {
        Expr::Element("k".into(), Box::new(Expr::Num(n as f64))).eval(&Env::new(&self.params))
    }
}

impl RhsFamily for Example35Rhs {
    fn eval(&self, n: usize, t: f64, x: &dyn StateAccess) -> Result<f64, DslError> {
        let k = self.k(n)?;
        let own = x.read(n as i64)?;
        let next = x.read(n as i64 + 1)?;
        Ok(k / (1.0 + t * t) * own + t * next.cos())
    }

    fn band(&self) -> CouplingBand {
        CouplingBand::new(0, 1)
    }

    fn describe(&self) -> String {
        "example35: k_n/(1+t^2) x_n + t cos x_{n+1}".into()
    }
}

/// `f_n = c` for every component.
#[derive(Debug, Clone, Copy)]
pub struct ConstantRhs(pub f64);

impl RhsFamily for ConstantRhs {
    fn eval(&self, _n: usize, _t: f64, _x: &dyn StateAccess) -> Result<f64, DslError> {
        Ok(self.0)
    }

    fn band(&self) -> CouplingBand {
        CouplingBand::default()
    }
}

/// `f_n = lambda_n x_n + forcing`, with `lambda_n` a rule in `n`.
#[derive(Debug, Clone)]
pub struct UncoupledLinear {
    rate: Expr,
    forcing: f64,
    params: Params,
}

impl UncoupledLinear {
    pub fn new(rate: Expr, forcing: f64, params: Params) -> Result<Self> {
        params.check_bound(&rate)?;
        if rate.reads_state() {
            return Err(Error::config("rate must not read x"));
        }
        Ok(UncoupledLinear {
            rate,
            forcing,
            params,
        })
    }

    pub fn rate(&self, n: usize) -> Result<f64, DslError> {
        self.rate.eval(&Env::new(&self.params).with_n(n as f64))
    }
}

impl RhsFamily for UncoupledLinear {
    fn eval(&self, n: usize, _t: f64, x: &dyn StateAccess) -> Result<f64, DslError> {
        Ok(self.rate(n)? * x.read(n as i64)? + self.forcing)
    }

    fn band(&self) -> CouplingBand {
        CouplingBand::default()
    }
}

/// `(g_1, .., g_N, g_N, g_N, ..)`: component `n > N` evaluates `g_N` on
/// the same state.
#[derive(Debug, Clone)]
pub struct Padded {
    inner: Arc<dyn RhsFamily>,
    dim: usize,
}

impl Padded {
    pub fn new(inner: Arc<dyn RhsFamily>, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::config("padding needs at least one equation"));
        }
        if let Some(d) = inner.finite_dim() {
            if dim > d {
                return Err(Error::config(format!(
                    "cannot pad at {dim}: the system has only {d} equations"
                )));
            }
        }
        Ok(Padded { inner, dim })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
}

impl RhsFamily for Padded {
    fn eval(&self, n: usize, t: f64, x: &dyn StateAccess) -> Result<f64, DslError> {
        self.inner.eval(n.min(self.dim), t, x)
    }

    fn band(&self) -> CouplingBand {
        self.inner.band()
    }

    fn absolute_reach(&self) -> Option<usize> {
        self.inner.absolute_reach()
    }

    fn reach(&self, n: usize) -> (i64, i64) {
        self.inner.reach(n.min(self.dim))
    }

    fn describe(&self) -> String {
        format!("padded at {}: {}", self.dim, self.inner.describe())
    }
}
