use super::{BinOp, DslError, Expr, Func, Param, Params, StateIndex, Var};

/// Read access to the state vector `x_1, x_2, ...` (one-based indices).
pub trait StateAccess {
    fn read(&self, index: i64) -> Result<f64, DslError>;
}

impl StateAccess for [f64] {
    fn read(&self, index: i64) -> Result<f64, DslError> {
        if index < 1 || index as usize > self.len() {
            return Err(DslError::OutOfBand {
                index,
                lo: 1,
                hi: self.len() as i64,
            });
        }
        Ok(self[index as usize - 1])
    }
}

impl StateAccess for Vec<f64> {
    fn read(&self, index: i64) -> Result<f64, DslError> {
        self.as_slice().read(index)
    }
}

impl<const N: usize> StateAccess for [f64; N] {
    fn read(&self, index: i64) -> Result<f64, DslError> {
        self.as_slice().read(index)
    }
}

const MAX_RULE_DEPTH: usize = 16;

/// Bindings for one evaluation.
#[derive(Clone, Copy)]
pub struct Env<'a> {
    t: Option<f64>,
    n: Option<f64>,
    p: Option<f64>,
    params: &'a Params,
    state: Option<&'a dyn StateAccess>,
}

impl<'a> Env<'a> {
    pub fn new(params: &'a Params) -> Self {
        Env {
            t: None,
            n: None,
            p: None,
            params,
            state: None,
        }
    }

    pub fn with_t(mut self, t: f64) -> Self {
        self.t = Some(t);
        self
    }

    pub fn with_n(mut self, n: f64) -> Self {
        self.n = Some(n);
        self
    }

    pub fn with_p(mut self, p: f64) -> Self {
        self.p = Some(p);
        self
    }

    pub fn with_state(mut self, state: &'a dyn StateAccess) -> Self {
        self.state = Some(state);
        self
    }
}

fn finite(v: f64, what: &str) -> Result<f64, DslError> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(DslError::domain(format!("{what} produced a non-finite value")))
    }
}

fn as_index(v: f64, what: &str) -> Result<i64, DslError> {
    let r = v.round();
    if (v - r).abs() > 1e-9 || r < 1.0 {
        return Err(DslError::domain(format!("{what} index {v} is not a positive integer")));
    }
    Ok(r as i64)
}

impl Expr {
    /// Evaluates under `env`. Domain violations (division by zero, `log` of
    /// a non-positive number, any non-finite intermediate) are errors.
    pub fn eval(&self, env: &Env<'_>) -> Result<f64, DslError> {
        eval(self, env, 0)
    }
}

fn element(name: &str, i: i64, env: &Env<'_>, depth: usize) -> Result<f64, DslError> {
    match env.params.get(name) {
        None => Err(DslError::name(name)),
        Some(Param::Scalar(v)) => Ok(*v),
        Some(Param::List(vs)) => vs.get(i as usize - 1).copied().ok_or_else(|| {
            DslError::domain(format!("{name}[{i}] beyond the {} listed values", vs.len()))
        }),
        Some(Param::Rule(rule)) => {
            if depth >= MAX_RULE_DEPTH {
                return Err(DslError::domain(format!("parameter rule `{name}` recurses too deeply")));
            }
            let inner = Env::new(env.params).with_n(i as f64);
            eval(rule, &inner, depth + 1)
        }
    }
}

fn eval(e: &Expr, env: &Env<'_>, depth: usize) -> Result<f64, DslError> {
    match e {
        Expr::Num(v) => Ok(*v),
        Expr::Var(var) => {
            let (value, name) = match var {
                Var::T => (env.t, "t"),
                Var::N => (env.n, "n"),
                Var::P => (env.p, "p"),
            };
            value.ok_or_else(|| DslError::name(name))
        }
        Expr::Param(name) => match env.params.get(name) {
            Some(Param::Scalar(v)) => Ok(*v),
            Some(_) => Err(DslError::domain(format!("sequence parameter `{name}` needs an index"))),
            None => Err(DslError::name(name.clone())),
        },
        Expr::Element(name, idx) => {
            let i = as_index(eval(idx, env, depth)?, name)?;
            element(name, i, env, depth)
        }
        Expr::MaxAbs(name, count) => {
            let m = as_index(eval(count, env, depth)?, "maxabs")?;
            let mut best = 0.0f64;
            for i in 1..=m {
                best = best.max(element(name, i, env, depth)?.abs());
            }
            Ok(best)
        }
        Expr::State(idx) => {
            let state = env.state.ok_or_else(|| DslError::name("x"))?;
            let index = match idx {
                StateIndex::Absolute(c) => *c,
                StateIndex::Relative(k) => {
                    let n = env.n.ok_or_else(|| DslError::name("n"))?;
                    as_index(n, "component")? + k
                }
            };
            state.read(index)
        }
        Expr::Neg(inner) => Ok(-eval(inner, env, depth)?),
        Expr::Binary(op, l, r) => {
            let a = eval(l, env, depth)?;
            let b = eval(r, env, depth)?;
            match op {
                BinOp::Add => finite(a + b, "addition"),
                BinOp::Sub => finite(a - b, "subtraction"),
                BinOp::Mul => finite(a * b, "multiplication"),
                BinOp::Div => {
                    if b == 0.0 {
                        Err(DslError::domain("division by zero"))
                    } else {
                        finite(a / b, "division")
                    }
                }
                BinOp::Pow => finite(a.powf(b), "power"),
            }
        }
        Expr::Call(func, args) => {
            let x = eval(&args[0], env, depth)?;
            let v = match func {
                Func::Sin => x.sin(),
                Func::Cos => x.cos(),
                Func::Exp => x.exp(),
                Func::Log => {
                    if x <= 0.0 {
                        return Err(DslError::domain(format!("log of non-positive value {x}")));
                    }
                    x.ln()
                }
                Func::Abs => x.abs(),
                Func::Atan => x.atan(),
                Func::Sqrt => {
                    if x < 0.0 {
                        return Err(DslError::domain(format!("sqrt of negative value {x}")));
                    }
                    x.sqrt()
                }
                Func::Min | Func::Max => {
                    let mut acc = x;
                    for a in &args[1..] {
                        let y = eval(a, env, depth)?;
                        acc = if *func == Func::Min { acc.min(y) } else { acc.max(y) };
                    }
                    acc
                }
            };
            finite(v, func.name())
        }
    }
}
