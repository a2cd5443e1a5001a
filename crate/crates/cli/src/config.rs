//! The JSON configuration document and its translation into a
//! [`ProblemSpec`].

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use nlivp::builtins::{self, Horizon};
use nlivp::dsl::{parse, Expr, Param, Params};
use nlivp::functionals::{
    FunctionalFamily, FunctionalGenerator, FunctionalTail, MassRule, PieceRule, StieltjesFunctional,
};
use nlivp::hypothesis::{EnvelopeDensity, GrowthEnvelope};
use nlivp::poly::{PiecewisePoly, PolyPiece, Polynomial};
use nlivp::problem::ProblemBuilder;
use nlivp::rhs::{Closure, DslFamily, DslSystem};
use nlivp::{PointMass, ProblemSpec, SeminormChoice};
use serde::de::DeserializeOwned;
use serde::Deserialize;
use serde_json::Value;

use crate::CliError;

pub const VERSION: u32 = 1;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigDocument {
    pub version: u32,
    pub problem: ProblemDoc,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemDoc {
    pub t0: f64,
    pub t_max: f64,
    pub grid: GridDoc,
    pub truncation: TruncationDoc,
    pub rhs: RhsDoc,
    /// A list of functionals, or `{list, generator, repeat_last}`.
    #[serde(default)]
    pub functionals: Option<Value>,
    #[serde(default)]
    pub envelopes: Option<EnvelopeDoc>,
    #[serde(default)]
    pub seminorms: Option<SeminormDoc>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridDoc {
    pub h: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TruncationDoc {
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(default)]
    pub closure: Closure,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RhsDoc {
    pub kind: RhsKind,
    /// One expression in `n` for an infinite family.
    #[serde(default)]
    pub source: Option<String>,
    /// One expression per equation of a finite system.
    #[serde(default)]
    pub sources: Option<Vec<String>>,
    /// Builtin problem name.
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default)]
    pub params: BTreeMap<String, Value>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RhsKind {
    Dsl,
    Builtin,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct MassDoc {
    t: f64,
    w: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct PieceDoc {
    from: f64,
    to: f64,
    coeffs: Vec<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct FunctionalDoc {
    #[serde(default)]
    masses: Vec<MassDoc>,
    #[serde(default)]
    density: Vec<PieceDoc>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum NumOrExpr {
    Num(f64),
    Expr(String),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct MassRuleDoc {
    t: NumOrExpr,
    w: NumOrExpr,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct PieceRuleDoc {
    from: NumOrExpr,
    to: NumOrExpr,
    coeffs: Vec<NumOrExpr>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct GeneratorDoc {
    #[serde(default)]
    masses: Vec<MassRuleDoc>,
    #[serde(default)]
    density: Vec<PieceRuleDoc>,
    #[serde(default)]
    params: BTreeMap<String, Value>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct FamilyDoc {
    #[serde(default)]
    list: Vec<FunctionalDoc>,
    #[serde(default)]
    generator: Option<GeneratorDoc>,
    #[serde(default)]
    repeat_last: bool,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvelopeDoc {
    /// An expression in `p` and `t`, or a list of pieces.
    #[serde(rename = "A")]
    a: Value,
    #[serde(rename = "B")]
    b: NumOrExpr,
    #[serde(rename = "C")]
    c: NumOrExpr,
    #[serde(default)]
    params: BTreeMap<String, Value>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeminormDoc {
    #[serde(rename = "P", default)]
    count: Option<usize>,
    /// A list, or an expression in `p`.
    #[serde(default)]
    n_seq: Option<Value>,
    /// A list, or an expression in `p` (with `t0`, `t_max`, `P` bound).
    #[serde(default)]
    t_seq: Option<Value>,
    #[serde(default)]
    theta: Option<Vec<f64>>,
}

fn config_err(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

fn from_value<T: DeserializeOwned>(v: &Value, path: &str) -> Result<T, CliError> {
    serde_path_to_error::deserialize(v.clone()).map_err(|e| {
        let inner = e.path().to_string();
        let at = if inner == "." { path.to_string() } else { format!("{path}.{inner}") };
        config_err(format!("{at}: {}", e.inner()))
    })
}

fn expr(src: &str, path: &str) -> Result<Expr, CliError> {
    parse(src).map_err(|e| config_err(format!("{path}: {e}")))
}

fn num_or_expr(v: &NumOrExpr, path: &str) -> Result<Expr, CliError> {
    match v {
        NumOrExpr::Num(x) => Ok(Expr::Num(*x)),
        NumOrExpr::Expr(s) => expr(s, path),
    }
}

impl ConfigDocument {
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn from_str(text: &str) -> Result<Self, CliError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let doc: ConfigDocument = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            config_err(format!("{path}: {}", e.into_inner()))
        })?;
        if doc.version != VERSION {
            return Err(config_err(format!("version: expected {VERSION}, got {}", doc.version)));
        }
        let p = &doc.problem;
        for (name, v) in [("problem.t0", p.t0), ("problem.t_max", p.t_max), ("problem.grid.h", p.grid.h)] {
            if !v.is_finite() {
                return Err(config_err(format!("{name}: must be finite")));
            }
        }
        if !(p.grid.h > 0.0) {
            return Err(config_err("problem.grid.h: must be positive"));
        }
        if !(p.t0 > 0.0 && p.t0 < p.t_max) {
            return Err(config_err("problem.t0: need 0 < t0 < t_max"));
        }
        Ok(doc)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| config_err(format!("cannot read {}: {e}", path.display())))?;
        Self::from_str(&text)
    }

    /// The problem, with `P` overridden by `p_max` when given.
    pub fn build(&self, p_max: Option<usize>) -> Result<ProblemSpec, CliError> {
        let p = &self.problem;
        let horizon = Horizon::new(p.t0, p.t_max, p.grid.h);
        let rhs_params = rhs_params(&p.rhs)?;
        let mut builder = match p.rhs.kind {
            RhsKind::Builtin => builtin(&p.rhs, horizon)?,
            RhsKind::Dsl => dsl(&p.rhs, &rhs_params, horizon)?,
        };
        match &p.functionals {
            Some(v) => builder = builder.functionals(functionals(v, p.t0)?),
            None if p.rhs.kind == RhsKind::Dsl => {
                return Err(config_err("problem.functionals: required for dsl right-hand sides"))
            }
            None => {}
        }
        if let Some(env) = &p.envelopes {
            builder = builder.envelope(envelope(env, &rhs_params)?);
        }
        builder = builder
            .truncation(p.truncation.n, p.truncation.closure)
            .seminorms(seminorms(p.seminorms.as_ref(), p_max, p.t0, p.t_max)?);
        Ok(builder.build()?)
    }
}

fn param(v: &Value, path: &str) -> Result<Param, CliError> {
    match v {
        Value::Number(_) => Ok(Param::Scalar(from_value(v, path)?)),
        Value::Array(_) => Ok(Param::List(from_value(v, path)?)),
        Value::String(s) => Ok(Param::Rule(expr(s, path)?)),
        _ => Err(config_err(format!("{path}: expected a number, a list of numbers or a rule in n"))),
    }
}

fn params(map: &BTreeMap<String, Value>, path: &str) -> Result<Params, CliError> {
    let mut out = Params::new();
    for (name, v) in map {
        out.set(name.clone(), param(v, &format!("{path}.{name}"))?);
    }
    Ok(out)
}

/// Parameters of a dsl right-hand side; empty for builtins, whose
/// parameters are interpreted per problem.
fn rhs_params(rhs: &RhsDoc) -> Result<Params, CliError> {
    match rhs.kind {
        RhsKind::Dsl => params(&rhs.params, "problem.rhs.params"),
        RhsKind::Builtin => {
            let mut out = Params::new();
            for (name, v) in &rhs.params {
                if let Ok(p) = param(v, "") {
                    out.set(name.clone(), p);
                }
            }
            Ok(out)
        }
    }
}

fn dsl(rhs: &RhsDoc, params: &Params, horizon: Horizon) -> Result<ProblemBuilder, CliError> {
    if rhs.name.is_some() {
        return Err(config_err("problem.rhs.name: only valid for builtin right-hand sides"));
    }
    let builder = ProblemSpec::builder(horizon.t0, horizon.t_max, horizon.h);
    match (&rhs.source, &rhs.sources) {
        (Some(src), None) => {
            let e = expr(src, "problem.rhs.source")?;
            Ok(builder.rhs(Arc::new(DslFamily::new(e, params.clone())?)))
        }
        (None, Some(list)) => {
            let exprs = list
                .iter()
                .enumerate()
                .map(|(i, s)| expr(s, &format!("problem.rhs.sources[{i}]")))
                .collect::<Result<Vec<_>, _>>()?;
            Ok(builder.rhs(Arc::new(DslSystem::new(exprs, params.clone())?)))
        }
        _ => Err(config_err("problem.rhs: give exactly one of `source` or `sources`")),
    }
}

fn scalar_param(rhs: &RhsDoc, name: &str, default: f64) -> Result<f64, CliError> {
    match rhs.params.get(name) {
        None => Ok(default),
        Some(v) => from_value(v, &format!("problem.rhs.params.{name}")),
    }
}

fn builtin(rhs: &RhsDoc, horizon: Horizon) -> Result<ProblemBuilder, CliError> {
    if rhs.source.is_some() || rhs.sources.is_some() {
        return Err(config_err("problem.rhs: `source`/`sources` are only valid for dsl right-hand sides"));
    }
    let name = rhs.name.as_deref().ok_or_else(|| config_err("problem.rhs.name: required for builtins"))?;
    let allowed: &[&str] = match name {
        "example35" => &["k"],
        "constant_rhs_oracle" => &["value", "mass_t", "weight"],
        "uncoupled_exp" => &[],
        "finite_affine" => &["A", "b"],
        other => {
            return Err(config_err(format!(
                "problem.rhs.name: unknown builtin `{other}` (known: {})",
                builtins::NAMES.join(", ")
            )))
        }
    };
    if let Some(extra) = rhs.params.keys().find(|k| !allowed.contains(&k.as_str())) {
        return Err(config_err(format!("problem.rhs.params.{extra}: not a parameter of `{name}`")));
    }
    Ok(match name {
        "example35" => {
            let k = rhs
                .params
                .get("k")
                .ok_or_else(|| config_err("problem.rhs.params.k: required for example35"))?;
            builtins::example35(param(k, "problem.rhs.params.k")?, horizon)?
        }
        "constant_rhs_oracle" => builtins::constant_rhs_oracle(
            scalar_param(rhs, "value", 1.0)?,
            scalar_param(rhs, "mass_t", 0.5)?,
            scalar_param(rhs, "weight", 0.5)?,
            horizon,
        )?,
        "uncoupled_exp" => builtins::uncoupled_exp(horizon)?,
        _ => {
            let a: Vec<Vec<NumOrExpr>> = from_value(
                rhs.params.get("A").ok_or_else(|| config_err("problem.rhs.params.A: required for finite_affine"))?,
                "problem.rhs.params.A",
            )?;
            let b: Vec<NumOrExpr> = from_value(
                rhs.params.get("b").ok_or_else(|| config_err("problem.rhs.params.b: required for finite_affine"))?,
                "problem.rhs.params.b",
            )?;
            let text = |v: &NumOrExpr| match v {
                NumOrExpr::Num(x) => format!("{x:?}"),
                NumOrExpr::Expr(s) => s.clone(),
            };
            let rows: Vec<Vec<String>> = a.iter().map(|r| r.iter().map(text).collect()).collect();
            let row_refs: Vec<Vec<&str>> = rows.iter().map(|r| r.iter().map(String::as_str).collect()).collect();
            let matrix: Vec<&[&str]> = row_refs.iter().map(Vec::as_slice).collect();
            let forcing: Vec<String> = b.iter().map(text).collect();
            let forcing: Vec<&str> = forcing.iter().map(String::as_str).collect();
            // Functionals come from the config; start from zero functionals.
            let zeros = (0..forcing.len())
                .map(|_| StieltjesFunctional::zero(horizon.t0))
                .collect::<Result<Vec<_>, _>>()?;
            builtins::finite_affine(&matrix, &forcing, zeros, horizon)?
        }
    })
}

fn functional(doc: &FunctionalDoc, t0: f64) -> Result<StieltjesFunctional, CliError> {
    let masses = doc.masses.iter().map(|m| PointMass { t: m.t, weight: m.w }).collect();
    let pieces = doc
        .density
        .iter()
        .map(|p| PolyPiece {
            from: p.from,
            to: p.to,
            poly: Polynomial::new(p.coeffs.clone()),
        })
        .collect();
    Ok(StieltjesFunctional::new(t0, masses, PiecewisePoly::new(pieces)?)?)
}

fn functionals(v: &Value, t0: f64) -> Result<FunctionalFamily, CliError> {
    let listed = |docs: &[FunctionalDoc], path: &str| {
        docs.iter()
            .enumerate()
            .map(|(i, d)| functional(d, t0).map_err(|e| config_err(format!("{path}[{i}]: {e}"))))
            .collect::<Result<Vec<_>, _>>()
    };
    match v {
        Value::Array(_) => {
            let docs: Vec<FunctionalDoc> = from_value(v, "problem.functionals")?;
            Ok(FunctionalFamily::listed(t0, listed(&docs, "problem.functionals")?)?)
        }
        Value::Object(_) => {
            let doc: FamilyDoc = from_value(v, "problem.functionals")?;
            let list = listed(&doc.list, "problem.functionals.list")?;
            let tail = match (doc.generator, doc.repeat_last) {
                (Some(_), true) => {
                    return Err(config_err("problem.functionals: `generator` and `repeat_last` are exclusive"))
                }
                (Some(g), false) => FunctionalTail::Generator(generator(&g, t0)?),
                (None, true) => FunctionalTail::RepeatLast,
                (None, false) => FunctionalTail::None,
            };
            Ok(FunctionalFamily::new(t0, list, tail)?)
        }
        _ => Err(config_err("problem.functionals: expected a list or an object")),
    }
}

fn generator(doc: &GeneratorDoc, t0: f64) -> Result<FunctionalGenerator, CliError> {
    let path = "problem.functionals.generator";
    let mut p = params(&doc.params, &format!("{path}.params"))?;
    p.set_scalar("t0", t0);
    let masses = doc
        .masses
        .iter()
        .enumerate()
        .map(|(i, m)| {
            Ok(MassRule {
                t: num_or_expr(&m.t, &format!("{path}.masses[{i}].t"))?,
                weight: num_or_expr(&m.w, &format!("{path}.masses[{i}].w"))?,
            })
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let pieces = doc
        .density
        .iter()
        .enumerate()
        .map(|(i, pc)| piece_rule(pc, &format!("{path}.density[{i}]")))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(FunctionalGenerator {
        masses,
        pieces,
        params: p,
    })
}

fn piece_rule(pc: &PieceRuleDoc, path: &str) -> Result<PieceRule, CliError> {
    Ok(PieceRule {
        from: num_or_expr(&pc.from, &format!("{path}.from"))?,
        to: num_or_expr(&pc.to, &format!("{path}.to"))?,
        coeffs: pc
            .coeffs
            .iter()
            .enumerate()
            .map(|(j, c)| num_or_expr(c, &format!("{path}.coeffs[{j}]")))
            .collect::<Result<_, _>>()?,
    })
}

fn envelope(doc: &EnvelopeDoc, rhs_params: &Params) -> Result<GrowthEnvelope, CliError> {
    let path = "problem.envelopes";
    let mut p = rhs_params.clone();
    for (name, v) in &doc.params {
        p.set(name.clone(), param(v, &format!("{path}.params.{name}"))?);
    }
    let a = match &doc.a {
        Value::String(s) => EnvelopeDensity::Expr(expr(s, &format!("{path}.A"))?),
        Value::Number(_) => EnvelopeDensity::Expr(Expr::Num(from_value(&doc.a, &format!("{path}.A"))?)),
        Value::Array(_) => {
            let pieces: Vec<PieceRuleDoc> = from_value(&doc.a, &format!("{path}.A"))?;
            EnvelopeDensity::Pieces(
                pieces
                    .iter()
                    .enumerate()
                    .map(|(i, pc)| piece_rule(pc, &format!("{path}.A[{i}]")))
                    .collect::<Result<_, _>>()?,
            )
        }
        _ => return Err(config_err(format!("{path}.A: expected an expression or a list of pieces"))),
    };
    let b = num_or_expr(&doc.b, &format!("{path}.B"))?;
    let c = num_or_expr(&doc.c, &format!("{path}.C"))?;
    GrowthEnvelope::new(a, b, c, p).map_err(|e| config_err(format!("{path}: {e}")))
}

fn sequence<T: DeserializeOwned>(
    v: &Value,
    count: Option<usize>,
    path: &str,
    bind: &Params,
    convert: impl Fn(f64) -> Option<T>,
) -> Result<Vec<T>, CliError> {
    match v {
        Value::Array(_) => from_value(v, path),
        Value::String(s) => {
            let e = expr(s, path)?;
            let count = count.ok_or_else(|| config_err(format!("{path}: a rule needs `P`")))?;
            (1..=count)
                .map(|p| {
                    let x = e
                        .eval(&nlivp::dsl::Env::new(bind).with_p(p as f64))
                        .map_err(|err| config_err(format!("{path} at p = {p}: {err}")))?;
                    convert(x).ok_or_else(|| config_err(format!("{path} at p = {p}: invalid value {x}")))
                })
                .collect()
        }
        _ => Err(config_err(format!("{path}: expected a list or a rule in p"))),
    }
}

fn seminorms(doc: Option<&SeminormDoc>, p_max: Option<usize>, t0: f64, t_max: f64) -> Result<SeminormChoice, CliError> {
    let path = "problem.seminorms";
    let doc = doc.cloned().unwrap_or_default();
    let count = p_max.or(doc.count);
    if doc.n_seq.is_none() && doc.t_seq.is_none() {
        if doc.theta.is_some() {
            return Err(config_err(format!("{path}.theta: needs explicit n_seq and t_seq")));
        }
        return Ok(match count {
            Some(count) => SeminormChoice::Default { count },
            None => SeminormChoice::default(),
        });
    }
    let (Some(n_doc), Some(t_doc)) = (&doc.n_seq, &doc.t_seq) else {
        return Err(config_err(format!("{path}: give both n_seq and t_seq")));
    };
    let mut bind = Params::new();
    bind.set_scalar("t0", t0);
    bind.set_scalar("t_max", t_max);
    if let Some(c) = count {
        bind.set_scalar("P", c as f64);
    }
    let mut n_seq: Vec<usize> = sequence(n_doc, count, &format!("{path}.n_seq"), &bind, |x| {
        (x >= 1.0 && x.fract() == 0.0).then_some(x as usize)
    })?;
    let mut t_seq: Vec<f64> = sequence(t_doc, count, &format!("{path}.t_seq"), &bind, Some)?;
    let mut theta = doc.theta;
    if let Some(p) = p_max {
        if n_seq.len() < p || t_seq.len() < p || theta.as_ref().is_some_and(|t| t.len() < p) {
            return Err(config_err(format!("{path}: fewer than --p-max = {p} entries")));
        }
        n_seq.truncate(p);
        t_seq.truncate(p);
        if let Some(t) = theta.as_mut() {
            t.truncate(p);
        }
    }
    Ok(SeminormChoice::Explicit { n_seq, t_seq, theta })
}
