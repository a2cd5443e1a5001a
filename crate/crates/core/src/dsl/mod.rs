//! A small expression language for right-hand sides, functional
//! generators and growth envelopes.
//!
//! ```text
//! k[n]/(1+t^2)*x[n] + t*cos(x[n+1])
//! ```
//!
//! Variables `t`, `n`, `p`; state references `x[n+c]` (offset relative to
//! the component index) or `x[c]` (absolute); named parameters, either
//! scalars or sequences indexed as `k[...]`; operators `+ - * / ^` with the
//! usual precedence (`^` right-associative and binding tighter than unary
//! minus); functions `sin cos exp log abs atan sqrt min max`, plus
//! `maxabs(k, m)` for `max_{1 <= i <= m} |k_i|`.

mod eval;
mod parse;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

pub use eval::{Env, StateAccess};
pub use parse::parse;

use crate::rhs::CouplingBand;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DslError {
    #[error("syntax error at line {line}, column {column}: expected {}, found {found}", expected.join(" or "))]
    Syntax {
        line: usize,
        column: usize,
        expected: Vec<String>,
        found: String,
    },
    #[error("unknown name `{name}`")]
    Name { name: String },
    #[error("{0}")]
    Domain(String),
    #[error("state index x[{index}] outside the readable window [{lo}, {hi}]")]
    OutOfBand { index: i64, lo: i64, hi: i64 },
}

impl DslError {
    pub fn name(name: impl Into<String>) -> Self {
        DslError::Name { name: name.into() }
    }

    pub fn domain(msg: impl Into<String>) -> Self {
        DslError::Domain(msg.into())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Var {
    T,
    N,
    P,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Log,
    Abs,
    Atan,
    Sqrt,
    Min,
    Max,
}

impl Func {
    pub fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "exp" => Func::Exp,
            "log" => Func::Log,
            "abs" => Func::Abs,
            "atan" => Func::Atan,
            "sqrt" => Func::Sqrt,
            "min" => Func::Min,
            "max" => Func::Max,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Abs => "abs",
            Func::Atan => "atan",
            Func::Sqrt => "sqrt",
            Func::Min => "min",
            Func::Max => "max",
        }
    }

    fn is_variadic(self) -> bool {
        matches!(self, Func::Min | Func::Max)
    }
}

/// Index of a state reference.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StateIndex {
    /// `x[n + offset]`
    Relative(i64),
    /// `x[index]`
    Absolute(i64),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Var(Var),
    Param(String),
    /// Sequence parameter element, `k[e]`.
    Element(String, Box<Expr>),
    State(StateIndex),
    Neg(Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Vec<Expr>),
    /// `maxabs(k, m)`
    MaxAbs(String, Box<Expr>),
}

impl Expr {
    fn walk(&self, visit: &mut impl FnMut(&Expr)) {
        visit(self);
        match self {
            Expr::Element(_, e) | Expr::Neg(e) | Expr::MaxAbs(_, e) => e.walk(visit),
            Expr::Binary(_, l, r) => {
                l.walk(visit);
                r.walk(visit);
            }
            Expr::Call(_, args) => args.iter().for_each(|a| a.walk(visit)),
            Expr::Num(_) | Expr::Var(_) | Expr::Param(_) | Expr::State(_) => {}
        }
    }

    /// Coupling window `(l, u)` of the relative state references:
    /// `x[n-l] .. x[n+u]`. `(0, 0)` when no state is read.
    pub fn band(&self) -> CouplingBand {
        let (mut lower, mut upper) = (0u32, 0u32);
        self.walk(&mut |e| {
            if let Expr::State(StateIndex::Relative(k)) = e {
                if *k < 0 {
                    lower = lower.max(k.unsigned_abs() as u32);
                } else {
                    upper = upper.max(*k as u32);
                }
            }
        });
        CouplingBand::new(lower as usize, upper as usize)
    }

    /// Largest absolute state index `x[c]`, if any.
    pub fn max_absolute_index(&self) -> Option<i64> {
        let mut m: Option<i64> = None;
        self.walk(&mut |e| {
            if let Expr::State(StateIndex::Absolute(c)) = e {
                m = Some(m.map_or(*c, |v| v.max(*c)));
            }
        });
        m
    }

    pub fn reads_state(&self) -> bool {
        let mut found = false;
        self.walk(&mut |e| found |= matches!(e, Expr::State(_)));
        found
    }

    pub fn uses_var(&self, var: Var) -> bool {
        let mut found = false;
        self.walk(&mut |e| found |= *e == Expr::Var(var));
        found
    }

    /// Parameter names referenced anywhere in the tree.
    pub fn param_names(&self) -> BTreeSet<String> {
        let mut names = BTreeSet::new();
        self.walk(&mut |e| match e {
            Expr::Param(s) | Expr::Element(s, _) | Expr::MaxAbs(s, _) => {
                names.insert(s.clone());
            }
            _ => {}
        });
        names
    }
}

impl fmt::Display for Expr {
    /// Fully parenthesised output that parses back to the same tree.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(v) => write!(f, "{v:?}"),
            Expr::Var(Var::T) => f.write_str("t"),
            Expr::Var(Var::N) => f.write_str("n"),
            Expr::Var(Var::P) => f.write_str("p"),
            Expr::Param(s) => f.write_str(s),
            Expr::Element(s, e) => write!(f, "{s}[{e}]"),
            Expr::State(StateIndex::Relative(0)) => f.write_str("x[n]"),
            Expr::State(StateIndex::Relative(k)) if *k > 0 => write!(f, "x[n+{k}]"),
            Expr::State(StateIndex::Relative(k)) => write!(f, "x[n-{}]", k.unsigned_abs()),
            Expr::State(StateIndex::Absolute(c)) => write!(f, "x[{c}]"),
            Expr::Neg(e) => write!(f, "(-{e})"),
            Expr::Binary(op, l, r) => {
                let sym = match op {
                    BinOp::Add => "+",
                    BinOp::Sub => "-",
                    BinOp::Mul => "*",
                    BinOp::Div => "/",
                    BinOp::Pow => "^",
                };
                write!(f, "({l} {sym} {r})")
            }
            Expr::Call(func, args) => {
                write!(f, "{}(", func.name())?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{a}")?;
                }
                f.write_str(")")
            }
            Expr::MaxAbs(s, e) => write!(f, "maxabs({s}, {e})"),
        }
    }
}

/// A named parameter value.
#[derive(Debug, Clone, PartialEq)]
pub enum Param {
    /// A scalar; indexing it yields the same value for every index.
    Scalar(f64),
    /// `k_1, k_2, ...` listed explicitly.
    List(Vec<f64>),
    /// `k_i` given by an expression in `n` (bound to `i`).
    Rule(Expr),
}

/// Named parameters available to expressions.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Params {
    map: BTreeMap<String, Param>,
}

impl Params {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set(&mut self, name: impl Into<String>, value: Param) -> &mut Self {
        self.map.insert(name.into(), value);
        self
    }

    pub fn set_scalar(&mut self, name: impl Into<String>, value: f64) -> &mut Self {
        self.set(name, Param::Scalar(value))
    }

    pub fn get(&self, name: &str) -> Option<&Param> {
        self.map.get(name)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.map.contains_key(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.map.keys().map(String::as_str)
    }

    /// Fails with a name error for the first parameter `e` references that
    /// is not bound here.
    pub fn check_bound(&self, e: &Expr) -> Result<(), DslError> {
        match e.param_names().into_iter().find(|n| !self.contains(n)) {
            Some(name) => Err(DslError::name(name)),
            None => Ok(()),
        }
    }
}
