//! Constants of the existence argument and the checks built on them.
//!
//! For each `p` (with `n_p`, `t_p` from the seminorm configuration):
//!
//! ```text
//! G_p   = max_{n<=n_p} |1 - <alpha_n,1>|^{-1} * max_{n<=n_p} ||alpha_n|| + 1
//! lhs_p = G_p ||A_p||_{L1(0,t0)}                  (existence needs lhs_p < 1)
//! M_p   = lhs_p + C_p / theta_p                   (theta_p chosen so M_p < 1)
//! K_p   = G_p t0 B_p + C_p (t_p - t0)
//! rho_p = K_p / (1 - M_p)
//! ```
//!
//! `A_p`, `B_p`, `C_p` come from a user-declared [`GrowthEnvelope`]
//! bounding `[f(t,x)]_{n_p}` by `A_p(t)[x]_{n_p} + B_p` on `[0,t0]` and by
//! `C_p([x]_{n_p} + 1)` on `[t0,t_p]`.

use std::cell::Cell;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::dsl::{DslError, Env, Expr, Params, StateAccess};
use crate::error::{Error, Result};
use crate::functionals::PieceRule;
use crate::poly::{PiecewisePoly, PolyPiece, Polynomial};
use crate::problem::ProblemSpec;
use crate::seminorm::bracket_unchecked;

/// Values of `lhs` within this distance of 1 are flagged as marginal.
pub const MARGINAL_BAND: f64 = 1e-9;

/// Below this, `|1 - <alpha_n, 1>|` is reported as ill-conditioned.
pub const ILL_CONDITIONED: f64 = 1e-8;

const L1_TOLERANCE: f64 = 1e-15;

/// The density `A_p` on `[0, t0]`.
#[derive(Debug, Clone, PartialEq)]
pub enum EnvelopeDensity {
    /// Piecewise polynomial whose bounds and coefficients are expressions
    /// in `p`; integrated in closed form.
    Pieces(Vec<PieceRule>),
    /// Expression in `p` and `t`; integrated by Clenshaw–Curtis
    /// quadrature.
    Expr(Expr),
}

/// Growth bounds `A_p(t)`, `B_p` and `C_p`. In `C` the variable `t` is
/// bound to `t_p`. The parameter `t0` is always available.
#[derive(Debug, Clone, PartialEq)]
pub struct GrowthEnvelope {
    a: EnvelopeDensity,
    b: Expr,
    c: Expr,
    params: Params,
}

impl GrowthEnvelope {
    pub fn new(a: EnvelopeDensity, b: Expr, c: Expr, params: Params) -> Result<Self> {
        let exprs: Vec<&Expr> = match &a {
            EnvelopeDensity::Expr(e) => vec![e],
            EnvelopeDensity::Pieces(pieces) => pieces
                .iter()
                .flat_map(|pc| [&pc.from, &pc.to].into_iter().chain(pc.coeffs.iter()))
                .collect(),
        };
        for e in exprs.into_iter().chain([&b, &c]) {
            if e.reads_state() {
                return Err(Error::config("envelope expressions must not read x"));
            }
            for name in e.param_names() {
                if name != "t0" && !params.contains(&name) {
                    return Err(DslError::name(name).into());
                }
            }
        }
        Ok(GrowthEnvelope { a, b, c, params })
    }

    /// Parses `A` as an expression in `p`, `t`.
    pub fn parse(a: &str, b: &str, c: &str, params: Params) -> Result<Self> {
        Self::new(
            EnvelopeDensity::Expr(crate::dsl::parse(a)?),
            crate::dsl::parse(b)?,
            crate::dsl::parse(c)?,
            params,
        )
    }

    pub fn density(&self) -> &EnvelopeDensity {
        &self.a
    }

    /// `A_p`, `B_p`, `C_p` multiplied by `lambda` in `A` only.
    pub fn scale_a(&self, lambda: f64) -> Self {
        let scale = |e: &Expr| Expr::Binary(crate::dsl::BinOp::Mul, Box::new(Expr::Num(lambda)), Box::new(e.clone()));
        let a = match &self.a {
            EnvelopeDensity::Expr(e) => EnvelopeDensity::Expr(scale(e)),
            EnvelopeDensity::Pieces(pieces) => EnvelopeDensity::Pieces(
                pieces
                    .iter()
                    .map(|pc| PieceRule {
                        from: pc.from.clone(),
                        to: pc.to.clone(),
                        coeffs: pc.coeffs.iter().map(scale).collect(),
                    })
                    .collect(),
            ),
        };
        GrowthEnvelope { a, ..self.clone() }
    }

    fn params_for(&self, t0: f64) -> Params {
        let mut params = self.params.clone();
        params.set_scalar("t0", t0);
        params
    }

    fn pieces_at(&self, p: usize, t0: f64) -> Result<Option<PiecewisePoly>> {
        let EnvelopeDensity::Pieces(rules) = &self.a else {
            return Ok(None);
        };
        let params = self.params_for(t0);
        let env = Env::new(&params).with_p(p as f64);
        let ev = |e: &Expr| -> Result<f64> { Ok(e.eval(&env)?) };
        let pieces = rules
            .iter()
            .map(|pc| {
                Ok(PolyPiece {
                    from: ev(&pc.from)?,
                    to: ev(&pc.to)?,
                    poly: Polynomial::new(pc.coeffs.iter().map(ev).collect::<Result<_>>()?),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Some(PiecewisePoly::new(pieces)?))
    }

    /// `A_p(t)`.
    pub fn a_at(&self, p: usize, t: f64, t0: f64) -> Result<f64> {
        match &self.a {
            EnvelopeDensity::Expr(e) => {
                let params = self.params_for(t0);
                Ok(e.eval(&Env::new(&params).with_p(p as f64).with_t(t))?)
            }
            EnvelopeDensity::Pieces(_) => Ok(self.pieces_at(p, t0)?.expect("pieces").eval(t)),
        }
    }

    /// `||A_p||_{L1(0,t0)}`; fails if `A_p` is negative somewhere.
    pub fn a_l1(&self, p: usize, t0: f64) -> Result<f64> {
        match &self.a {
            EnvelopeDensity::Pieces(_) => {
                let d = self.pieces_at(p, t0)?.expect("pieces");
                if let Some((a, b)) = d.support() {
                    if a < 0.0 || b > t0 {
                        return Err(Error::config(format!("A_{p} support [{a}, {b}] leaves [0, t0]")));
                    }
                }
                if !d.is_zero() && d.min_value() < 0.0 {
                    return Err(Error::config(format!("A_{p} takes negative values")));
                }
                Ok(d.abs_integral())
            }
            EnvelopeDensity::Expr(e) => {
                let params = self.params_for(t0);
                let failure: Cell<Option<DslError>> = Cell::new(None);
                let negative = Cell::new(false);
                let f = |t: f64| match e.eval(&Env::new(&params).with_p(p as f64).with_t(t)) {
                    Ok(v) => {
                        if v < 0.0 {
                            negative.set(true);
                        }
                        v.abs()
                    }
                    Err(err) => {
                        failure.set(Some(err));
                        0.0
                    }
                };
                let out = quadrature::clenshaw_curtis::integrate(f, 0.0, t0, L1_TOLERANCE);
                if let Some(err) = failure.take() {
                    return Err(err.into());
                }
                if negative.get() {
                    return Err(Error::config(format!("A_{p} takes negative values")));
                }
                Ok(out.integral)
            }
        }
    }

    pub fn b(&self, p: usize, t0: f64) -> Result<f64> {
        let params = self.params_for(t0);
        let v = self.b.eval(&Env::new(&params).with_p(p as f64))?;
        nonneg(v, "B", p)
    }

    pub fn c(&self, p: usize, tp: f64, t0: f64) -> Result<f64> {
        let params = self.params_for(t0);
        let v = self.c.eval(&Env::new(&params).with_p(p as f64).with_t(tp))?;
        nonneg(v, "C", p)
    }
}

fn nonneg(v: f64, what: &str, p: usize) -> Result<f64> {
    if v < 0.0 {
        Err(Error::config(format!("{what}_{p} = {v} is negative")))
    } else {
        Ok(v)
    }
}

fn envelope(spec: &ProblemSpec) -> Result<&GrowthEnvelope> {
    spec.envelope()
        .ok_or_else(|| Error::config("problem declares no growth envelope"))
}

fn check_p(spec: &ProblemSpec, p: usize) -> Result<()> {
    if p == 0 || p > spec.seminorms().len() {
        return Err(Error::Index {
            index: p,
            len: spec.seminorms().len(),
        });
    }
    Ok(())
}

/// `G_p`. Fails naming the first `n <= n_p` with `<alpha_n, 1> = 1`.
pub fn compute_g(spec: &ProblemSpec, p: usize) -> Result<f64> {
    check_p(spec, p)?;
    let n_p = spec.seminorms().n(p);
    let (mut inv, mut norm) = (0.0f64, 0.0f64);
    for n in 1..=n_p {
        let alpha = spec.functionals().get(n)?;
        let denom = 1.0 - alpha.one_value();
        if denom == 0.0 {
            return Err(Error::HypothesisViolation {
                component: n,
                detail: "<alpha_n, 1> = 1".into(),
            });
        }
        inv = inv.max(1.0 / denom.abs());
        norm = norm.max(alpha.dual_norm());
    }
    Ok(inv * norm + 1.0)
}

/// `(lhs, lhs < 1)` with `lhs = G_p ||A_p||_{L1}`.
pub fn check_inequality(spec: &ProblemSpec, p: usize) -> Result<(f64, bool)> {
    let env = envelope(spec)?;
    let g = compute_g(spec, p)?;
    let lhs = g * env.a_l1(p, spec.t0())?;
    Ok((lhs, lhs < 1.0))
}

/// Midpoint choice `theta = 2 C / (1 - lhs)`, so that
/// `M = lhs + (1 - lhs) / 2`; `theta = 1` when `C = 0`.
#[allow(clippy::neg_cmp_op_on_partial_ord)]
pub fn theta_rule(lhs: f64, c: f64) -> Result<f64> {
    if !(lhs < 1.0) {
        return Err(Error::HypothesisViolation {
            component: 0,
            detail: format!("inequality fails (lhs = {lhs}); no admissible theta"),
        });
    }
    Ok(if c == 0.0 { 1.0 } else { 2.0 * c / (1.0 - lhs) })
}

pub fn select_theta(spec: &ProblemSpec, p: usize) -> Result<f64> {
    let (lhs, _) = check_inequality(spec, p)?;
    let env = envelope(spec)?;
    let c = env.c(p, spec.seminorms().t(p), spec.t0())?;
    theta_rule(lhs, c)
}

/// `M_p`, `K_p` and the minimal invariant radius `rho_p`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Constants {
    #[serde(rename = "M")]
    pub m: f64,
    #[serde(rename = "K")]
    pub k: f64,
    pub rho: f64,
}

/// The constants from already-known inputs.
#[allow(clippy::too_many_arguments)]
#[allow(clippy::neg_cmp_op_on_partial_ord)]
pub fn constants_from(g: f64, norm_a: f64, b: f64, c: f64, theta: f64, t0: f64, tp: f64) -> Result<Constants> {
    let m = g * norm_a + c / theta;
    if !(m < 1.0) {
        return Err(Error::Internal(format!("M = {m} is not below 1")));
    }
    let k = g * t0 * b + c * (tp - t0);
    Ok(Constants {
        m,
        k,
        rho: k / (1.0 - m),
    })
}

pub fn compute_constants(spec: &ProblemSpec, p: usize) -> Result<Constants> {
    let env = envelope(spec)?;
    let t0 = spec.t0();
    let tp = spec.seminorms().t(p);
    let g = compute_g(spec, p)?;
    let norm_a = env.a_l1(p, t0)?;
    let c = env.c(p, tp, t0)?;
    let theta = theta_rule(g * norm_a, c)?;
    constants_from(g, norm_a, env.b(p, t0)?, c, theta, t0, tp)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HypothesisRecord {
    pub p: usize,
    pub n_p: usize,
    pub t_p: f64,
    #[serde(rename = "G_p")]
    pub g: f64,
    #[serde(rename = "normA_p")]
    pub norm_a: f64,
    #[serde(rename = "B_p")]
    pub b: f64,
    #[serde(rename = "C_p")]
    pub c: f64,
    pub theta_p: Option<f64>,
    #[serde(rename = "M_p")]
    pub m: Option<f64>,
    #[serde(rename = "K_p")]
    pub k: Option<f64>,
    pub rho_p: Option<f64>,
    pub lhs: f64,
    pub pass: bool,
    pub marginal: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HypothesisReport {
    pub records: Vec<HypothesisRecord>,
    /// `<alpha_n, 1> != 1` for every `n` examined.
    pub hyp_2_5_pass: bool,
    pub hyp_violation: Option<String>,
    /// Components with `|1 - <alpha_n, 1>|` below the conditioning threshold.
    pub ill_conditioned: Vec<usize>,
    pub overall: bool,
}

/// Evaluates every constant for `p = 1 ..= P`. A violated `<alpha_n,1> != 1`
/// condition is recorded, not raised.
pub fn report(spec: &ProblemSpec) -> Result<HypothesisReport> {
    let env = envelope(spec)?;
    let t0 = spec.t0();
    let cfg = spec.seminorms();
    let n_max = cfg.n(cfg.len());
    let mut ill_conditioned = Vec::new();
    for n in 1..=n_max {
        let denom = 1.0 - spec.functionals().get(n)?.one_value();
        if denom == 0.0 {
            return Ok(HypothesisReport {
                records: Vec::new(),
                hyp_2_5_pass: false,
                hyp_violation: Some(format!("<alpha_{n}, 1> = 1")),
                ill_conditioned,
                overall: false,
            });
        }
        if denom.abs() < ILL_CONDITIONED {
            ill_conditioned.push(n);
        }
    }
    let mut records = Vec::with_capacity(cfg.len());
    for p in 1..=cfg.len() {
        let tp = cfg.t(p);
        let g = compute_g(spec, p)?;
        let norm_a = env.a_l1(p, t0)?;
        let b = env.b(p, t0)?;
        let c = env.c(p, tp, t0)?;
        let lhs = g * norm_a;
        let pass = lhs < 1.0;
        let (theta, consts) = if pass {
            let theta = theta_rule(lhs, c)?;
            (Some(theta), Some(constants_from(g, norm_a, b, c, theta, t0, tp)?))
        } else {
            (None, None)
        };
        records.push(HypothesisRecord {
            p,
            n_p: cfg.n(p),
            t_p: tp,
            g,
            norm_a,
            b,
            c,
            theta_p: theta,
            m: consts.map(|k| k.m),
            k: consts.map(|k| k.k),
            rho_p: consts.map(|k| k.rho),
            lhs,
            pass,
            marginal: (lhs - 1.0).abs() <= MARGINAL_BAND,
        });
    }
    let overall = records.iter().all(|r| r.pass);
    Ok(HypothesisReport {
        records,
        hyp_2_5_pass: true,
        hyp_violation: None,
        ill_conditioned,
        overall,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnvelopeViolation {
    pub p: usize,
    pub t: f64,
    pub tail: &'static str,
    pub value: f64,
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SamplingReport {
    pub samples: usize,
    pub evaluations: usize,
    pub radius: f64,
    pub seed: u64,
    pub violations: Vec<EnvelopeViolation>,
}

struct SampledState<'a> {
    head: &'a [f64],
    tail: &'a [f64],
}

impl StateAccess for SampledState<'_> {
    fn read(&self, index: i64) -> Result<f64, DslError> {
        if index < 1 {
            return Ok(0.0);
        }
        let m = index as usize;
        if m <= self.head.len() {
            Ok(self.head[m - 1])
        } else {
            Ok(self.tail.get(m - self.head.len() - 1).copied().unwrap_or(0.0))
        }
    }
}

/// Random search for points where `[f(t,x)]_{n_p}` exceeds the declared
/// envelope by a relative margin above `1e-12`. Every `p` receives
/// `samples` draws; each draw is checked once with the components beyond
/// `n_p` set to zero and once with them at `+-radius`.
pub fn validate_envelope_by_sampling(
    spec: &ProblemSpec,
    samples: usize,
    radius: f64,
    seed: u64,
) -> Result<SamplingReport> {
    let env = envelope(spec)?;
    let t0 = spec.t0();
    let cfg = spec.seminorms();
    let rhs = spec.rhs();
    let tail_len = rhs.band().upper + 1;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut violations = Vec::new();
    let mut evaluations = 0;
    for p in 1..=cfg.len() {
        let n_p = cfg.n(p);
        let tp = cfg.t(p);
        let b = env.b(p, t0)?;
        let c = env.c(p, tp, t0)?;
        let mut head = vec![0.0; n_p];
        let mut signed_tail = vec![0.0; tail_len];
        let zero_tail = vec![0.0; tail_len];
        for _ in 0..samples {
            let t = rng.gen_range(0.0..=tp);
            for v in head.iter_mut() {
                *v = rng.gen_range(-radius..=radius);
            }
            for v in signed_tail.iter_mut() {
                *v = if rng.gen_bool(0.5) { radius } else { -radius };
            }
            let bracket = bracket_unchecked(&head, n_p);
            let bound = if t <= t0 {
                env.a_at(p, t, t0)? * bracket + b
            } else {
                c * (bracket + 1.0)
            };
            for (label, tail) in [("zero", &zero_tail), ("radius", &signed_tail)] {
                let state = SampledState { head: &head, tail };
                let mut value = 0.0f64;
                for n in 1..=n_p {
                    let fv = rhs.eval(n, t, &state).map_err(|source| Error::Evaluation {
                        t,
                        component: n,
                        source,
                    })?;
                    value = value.max(fv.abs());
                }
                evaluations += 1;
                if value - bound > 1e-12 * bound.abs() {
                    violations.push(EnvelopeViolation {
                        p,
                        t,
                        tail: label,
                        value,
                        bound,
                    });
                }
            }
        }
    }
    Ok(SamplingReport {
        samples,
        evaluations,
        radius,
        seed,
        violations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn theta_rule_cases() {
        assert_eq!(theta_rule(0.3, 0.0).unwrap(), 1.0);
        assert_eq!(theta_rule(0.0, 1.0).unwrap(), 2.0);
        assert!(theta_rule(1.0, 1.0).is_err());
        let k = constants_from(1.0, 0.0, 0.0, 1.0, 2.0, 1.0, 2.0).unwrap();
        assert_eq!(k.m, 0.5);
    }

    #[test]
    fn constants_arithmetic() {
        let k = constants_from(1.0, 0.5, 1.0, 0.0, 1.0, 1.0, 2.0).unwrap();
        assert_eq!((k.m, k.k, k.rho), (0.5, 1.0, 2.0));
        let z = constants_from(1.0, 0.0, 0.0, 0.0, 1.0, 1.0, 2.0).unwrap();
        assert_eq!((z.m, z.k, z.rho), (0.0, 0.0, 0.0));
        assert!(matches!(
            constants_from(2.0, 0.5, 0.0, 0.0, 1.0, 1.0, 2.0),
            Err(Error::Internal(_))
        ));
    }

    #[test]
    fn piecewise_envelope_norm_is_exact() {
        let env = GrowthEnvelope::new(
            EnvelopeDensity::Pieces(vec![PieceRule {
                from: crate::dsl::parse("0").unwrap(),
                to: crate::dsl::parse("t0").unwrap(),
                coeffs: vec![crate::dsl::parse("p/10").unwrap(), crate::dsl::parse("1").unwrap()],
            }]),
            crate::dsl::parse("0").unwrap(),
            crate::dsl::parse("0").unwrap(),
            Params::new(),
        )
        .unwrap();
        // int_0^2 (0.3 + s) ds = 0.6 + 2
        assert!((env.a_l1(3, 2.0).unwrap() - 2.6).abs() < 1e-15);
    }

    #[test]
    fn expression_envelope_norm_matches_arctan() {
        let mut params = Params::new();
        params.set_scalar("k", 0.5);
        let env = GrowthEnvelope::parse("maxabs(k, p)/(1+t^2)", "t0", "maxabs(k, p) + t", params).unwrap();
        for t0 in [0.5, 1.0, 2.0] {
            let got = env.a_l1(2, t0).unwrap();
            let want = 0.5 * f64::atan(t0);
            assert!(((got - want) / want).abs() < 1e-14, "t0 = {t0}: {got} vs {want}");
        }
        assert_eq!(env.b(1, 1.0).unwrap(), 1.0);
        assert_eq!(env.c(1, 2.0, 1.0).unwrap(), 2.5);
    }

    #[test]
    fn negative_density_rejected() {
        let env = GrowthEnvelope::parse("t - 0.5", "0", "0", Params::new()).unwrap();
        assert!(matches!(env.a_l1(1, 1.0), Err(Error::Config(_))));
    }

    #[test]
    fn unbound_parameter_rejected() {
        assert!(GrowthEnvelope::parse("q", "0", "0", Params::new()).is_err());
    }
}
