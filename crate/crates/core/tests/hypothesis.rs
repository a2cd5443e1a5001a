use std::sync::Arc;

use nlivp::builtins::{self, Horizon};
use nlivp::dsl::{Param, Params};
use nlivp::functionals::FunctionalFamily;
use nlivp::hypothesis::{
    check_inequality, compute_constants, compute_g, report, select_theta, validate_envelope_by_sampling,
};
use nlivp::rhs::ConstantRhs;
use nlivp::truncation::Closure;
use nlivp::{Error, GrowthEnvelope, ProblemSpec, SeminormChoice, StieltjesFunctional};

fn example35(k: Param, t0: f64, count: usize) -> ProblemSpec {
    builtins::example35(k, Horizon::new(t0, t0 + 2.0, 1e-2))
        .unwrap()
        .truncation(count.max(2), Closure::Zero)
        .seminorms(SeminormChoice::Default { count })
        .build()
        .unwrap()
}

fn scalar(value: f64, alpha: StieltjesFunctional, envelope: GrowthEnvelope) -> ProblemSpec {
    ProblemSpec::builder(1.0, 2.0, 1e-2)
        .rhs(Arc::new(ConstantRhs(value)))
        .functionals(FunctionalFamily::listed(1.0, vec![alpha]).unwrap())
        .envelope(envelope)
        .seminorms(SeminormChoice::Default { count: 1 })
        .build()
        .unwrap()
}

fn env(a: &str, b: &str, c: &str) -> GrowthEnvelope {
    GrowthEnvelope::parse(a, b, c, Params::new()).unwrap()
}

#[test]
fn g_examples() {
    let spec = example35(Param::Scalar(0.5), 1.0, 8);
    for p in 1..=8 {
        assert!((compute_g(&spec, p).unwrap() - 2.0).abs() < 1e-15);
    }
    let zero = scalar(1.0, StieltjesFunctional::zero(1.0).unwrap(), env("0", "1", "1"));
    assert_eq!(compute_g(&zero, 1).unwrap(), 1.0);
    let mass = scalar(1.0, StieltjesFunctional::point_mass(1.0, 0.5, 0.5).unwrap(), env("0", "1", "1"));
    assert_eq!(compute_g(&mass, 1).unwrap(), 2.0);
    let unit = scalar(1.0, StieltjesFunctional::point_mass(1.0, 0.5, 1.0).unwrap(), env("0", "1", "1"));
    assert!(matches!(compute_g(&unit, 1), Err(Error::HypothesisViolation { component: 1, .. })));
}

#[test]
fn g_is_nondecreasing_in_p() {
    let spec = builtins::uncoupled_exp(Horizon::new(1.0, 3.0, 1e-2))
        .unwrap()
        .truncation(6, Closure::Zero)
        .seminorms(SeminormChoice::Default { count: 6 })
        .build()
        .unwrap();
    let g: Vec<f64> = (1..=6).map(|p| compute_g(&spec, p).unwrap()).collect();
    assert!(g.windows(2).all(|w| w[1] >= w[0]));
}

#[test]
fn example35_lhs_closed_form_for_several_t0() {
    for t0 in [0.5_f64, 1.0, 2.0] {
        let spec = example35(Param::List(vec![0.1, -0.3, 0.2, 0.05, 0.4, 0.1, -0.1, 0.2]), t0, 8);
        let mut bracket = 0.0_f64;
        let k = [0.1_f64, -0.3, 0.2, 0.05, 0.4, 0.1, -0.1, 0.2];
        for p in 1..=8 {
            bracket = bracket.max(k[p - 1].abs());
            let want = bracket * (1.0 + t0) * t0.atan();
            let (lhs, pass) = check_inequality(&spec, p).unwrap();
            assert!(((lhs - want) / want).abs() <= 1e-12, "t0 {t0}, p {p}: {lhs} vs {want}");
            assert_eq!(pass, lhs < 1.0);
        }
    }
}

#[test]
fn zero_envelope_passes() {
    let spec = scalar(0.0, StieltjesFunctional::zero(1.0).unwrap(), env("0", "0", "0"));
    assert_eq!(check_inequality(&spec, 1).unwrap(), (0.0, true));
    assert_eq!(select_theta(&spec, 1).unwrap(), 1.0);
    let c = compute_constants(&spec, 1).unwrap();
    assert_eq!((c.m, c.k, c.rho), (0.0, 0.0, 0.0));
}

#[test]
fn theta_fails_when_inequality_fails() {
    let spec = example35(Param::Scalar(0.7), 1.0, 2);
    assert!(matches!(select_theta(&spec, 1), Err(Error::HypothesisViolation { .. })));
    let r = report(&spec).unwrap();
    assert!(!r.overall);
    assert!(r.records.iter().all(|rec| !rec.pass && rec.rho_p.is_none()));
}

#[test]
fn lhs_scales_with_a() {
    let spec = example35(Param::Scalar(0.3), 1.0, 3);
    for lambda in [0.25, 2.0, 3.7] {
        let scaled = spec.with_envelope(Some(spec.envelope().unwrap().scale_a(lambda))).unwrap();
        for p in 1..=3 {
            let (a, _) = check_inequality(&spec, p).unwrap();
            let (b, _) = check_inequality(&scaled, p).unwrap();
            assert!((b - lambda * a).abs() <= 1e-15 * b.abs().max(1.0));
        }
    }
}

#[test]
fn rho_nonincreasing_as_a_shrinks() {
    let spec = example35(Param::Scalar(0.5), 1.0, 2);
    let mut last = f64::INFINITY;
    for lambda in [1.0, 0.8, 0.5, 0.2, 0.0] {
        let s = spec.with_envelope(Some(spec.envelope().unwrap().scale_a(lambda))).unwrap();
        let rho = compute_constants(&s, 1).unwrap().rho;
        assert!(rho >= 0.0 && rho <= last, "lambda {lambda}: {rho} > {last}");
        last = rho;
    }
}

#[test]
fn report_records() {
    let spec = example35(Param::Scalar(0.5), 1.0, 4);
    let r = report(&spec).unwrap();
    assert!(r.overall && r.hyp_2_5_pass);
    assert!(r.ill_conditioned.is_empty());
    for rec in &r.records {
        let m = rec.m.unwrap();
        assert!(m < 1.0);
        assert!((rec.rho_p.unwrap() - rec.k.unwrap() / (1.0 - m)).abs() < 1e-12);
        assert!(!rec.marginal);
        assert_eq!(rec.n_p, rec.p);
    }
    let unit = scalar(1.0, StieltjesFunctional::point_mass(1.0, 0.5, 1.0).unwrap(), env("0", "1", "1"));
    let r = report(&unit).unwrap();
    assert!(!r.hyp_2_5_pass && !r.overall && r.hyp_violation.is_some());
}

#[test]
fn marginal_flag() {
    // lhs = G ||A|| = 1 * 1 exactly.
    let spec = scalar(0.0, StieltjesFunctional::zero(1.0).unwrap(), env("1", "0", "0"));
    let r = report(&spec).unwrap();
    assert!(r.records[0].marginal && !r.records[0].pass);
}

#[test]
fn sampling_finds_false_envelopes_only() {
    let bad = scalar(1.0, StieltjesFunctional::zero(1.0).unwrap(), env("0", "0", "0"));
    let r = validate_envelope_by_sampling(&bad, 100, 5.0, 7).unwrap();
    assert!(!r.violations.is_empty());

    let zero = scalar(0.0, StieltjesFunctional::zero(1.0).unwrap(), env("0", "0", "0"));
    assert!(validate_envelope_by_sampling(&zero, 100, 5.0, 7).unwrap().violations.is_empty());

    for seed in [1, 2, 3] {
        let spec = example35(Param::Rule(nlivp::dsl::parse("0.6*sin(n)").unwrap()), 1.0, 4);
        assert!(validate_envelope_by_sampling(&spec, 500, 20.0, seed).unwrap().violations.is_empty());
    }
}

#[test]
fn sampling_is_deterministic() {
    let spec = example35(Param::Scalar(0.5), 1.0, 2);
    let broken = spec.with_envelope(Some(spec.envelope().unwrap().scale_a(0.5))).unwrap();
    let a = validate_envelope_by_sampling(&broken, 300, 3.0, 42).unwrap();
    let b = validate_envelope_by_sampling(&broken, 300, 3.0, 42).unwrap();
    assert_eq!(a, b);
    assert!(!a.violations.is_empty());
}
