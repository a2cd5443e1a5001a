use std::sync::Arc;

use nlivp::builtins::{self, Horizon};
use nlivp::functionals::{FunctionalFamily, FunctionalTail};
use nlivp::operator::{apply_t, integrate_rhs, relative_change, solution_seminorms, solve_picard_observed};
use nlivp::rhs::{ConstantRhs, DslFamily, RhsFamily};
use nlivp::shooting::{fixed_point_step, integrate_ivp, residual};
use nlivp::truncation::Closure;
use nlivp::dsl::{Param, Params};
use nlivp::{
    solve_picard, solve_shooting, Error, PicardSettings, ProblemSpec, SeminormChoice, ShootingSettings,
    StieltjesFunctional, Trajectory,
};

fn scalar(rhs: Arc<dyn RhsFamily>, alpha: StieltjesFunctional, t0: f64, t_max: f64, h: f64) -> ProblemSpec {
    ProblemSpec::builder(t0, t_max, h)
        .rhs(rhs)
        .functionals(FunctionalFamily::new(t0, vec![alpha], FunctionalTail::RepeatLast).unwrap())
        .truncation(1, Closure::Zero)
        .build()
        .unwrap()
}

fn dsl(src: &str) -> Arc<dyn RhsFamily> {
    Arc::new(DslFamily::parse(src, Params::new()).unwrap())
}

fn oracle_spec() -> ProblemSpec {
    builtins::constant_rhs_oracle(1.0, 0.5, 0.5, Horizon::new(1.0, 2.0, 1e-3))
        .unwrap()
        .truncation(1, Closure::Zero)
        .build()
        .unwrap()
}

fn wiggle(spec: &ProblemSpec) -> Trajectory {
    Trajectory::from_fn(Arc::clone(spec.grid()), spec.truncation(), |t, j| (3.0 * t + j as f64).sin() * 4.0).unwrap()
}

#[test]
fn integrate_zero_rhs() {
    let spec = scalar(Arc::new(ConstantRhs(0.0)), StieltjesFunctional::zero(1.0).unwrap(), 1.0, 2.0, 0.01);
    let r = integrate_rhs(&wiggle(&spec), &spec).unwrap();
    assert_eq!(r.sup_norm(), 0.0);
}

#[test]
fn trapezoid_exact_on_constants_and_linears() {
    let spec = scalar(Arc::new(ConstantRhs(1.0)), StieltjesFunctional::zero(0.5).unwrap(), 0.5, 1.0, 0.1);
    let r = integrate_rhs(&wiggle(&spec), &spec).unwrap();
    for (i, &t) in spec.grid().nodes().iter().enumerate() {
        assert!((r.value(i, 0) - t).abs() < 1e-15);
    }
    let spec = ProblemSpec::builder(0.5, 1.0, 0.5)
        .rhs(dsl("t"))
        .functionals(FunctionalFamily::listed(0.5, vec![StieltjesFunctional::zero(0.5).unwrap()]).unwrap())
        .seminorms(SeminormChoice::Explicit {
            n_seq: vec![1],
            t_seq: vec![1.0],
            theta: Some(vec![1.0]),
        })
        .build()
        .unwrap();
    let r = integrate_rhs(&Trajectory::zeros(Arc::clone(spec.grid()), 1), &spec).unwrap();
    assert_eq!(spec.grid().len(), 3);
    assert_eq!(r.value(2, 0), 0.5);
}

#[test]
fn t_is_constant_for_x_independent_rhs() {
    let spec = oracle_spec();
    for v in [Trajectory::zeros(Arc::clone(spec.grid()), 1), wiggle(&spec)] {
        let tv = apply_t(&v, &spec).unwrap();
        for (i, &t) in spec.grid().nodes().iter().enumerate() {
            assert!((tv.value(i, 0) - (0.5 + t)).abs() < 1e-13);
        }
    }
    let spec = scalar(Arc::new(ConstantRhs(0.0)), StieltjesFunctional::point_mass(1.0, 0.3, 2.0).unwrap(), 1.0, 2.0, 0.01);
    assert_eq!(apply_t(&wiggle(&spec), &spec).unwrap().sup_norm(), 0.0);
}

#[test]
fn unit_functional_is_a_hypothesis_violation() {
    let spec = scalar(Arc::new(ConstantRhs(1.0)), StieltjesFunctional::point_mass(1.0, 0.5, 1.0).unwrap(), 1.0, 2.0, 0.01);
    let v = Trajectory::zeros(Arc::clone(spec.grid()), 1);
    assert!(matches!(apply_t(&v, &spec), Err(Error::HypothesisViolation { component: 1, .. })));
    assert!(matches!(
        solve_picard(&spec, &PicardSettings::default(), None),
        Err(Error::HypothesisViolation { .. })
    ));
}

#[test]
fn near_unit_functional_warns() {
    let spec = scalar(
        Arc::new(ConstantRhs(0.0)),
        StieltjesFunctional::point_mass(1.0, 0.5, 1.0 - 1e-9).unwrap(),
        1.0,
        2.0,
        0.01,
    );
    let res = solve_picard(&spec, &PicardSettings::default(), None).unwrap();
    assert!(res.warnings.iter().any(|w| w.contains("ill-conditioned")));
}

#[test]
fn nonfinite_rhs_reports_location() {
    let spec = scalar(dsl("1/(t - 0.5)"), StieltjesFunctional::zero(1.0).unwrap(), 1.0, 2.0, 0.25);
    let v = Trajectory::zeros(Arc::clone(spec.grid()), 1);
    match integrate_rhs(&v, &spec) {
        Err(Error::Evaluation { t, component, .. }) => {
            assert_eq!(t, 0.5);
            assert_eq!(component, 1);
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn picard_oracle_in_one_step() {
    let spec = oracle_spec();
    let res = solve_picard(&spec, &PicardSettings::default(), Some(&wiggle(&spec))).unwrap();
    // One step reaches the fixed point; the next confirms it.
    assert_eq!(res.iterations, 2);
    assert_eq!(res.initial_guess, "user-supplied");
    assert!(res.nonlocal_residuals[0] < 1e-14);
    for (i, &t) in spec.grid().nodes().iter().enumerate() {
        assert!((res.trajectory.value(i, 0) - (0.5 + t)).abs() < 1e-13);
    }
}

#[test]
fn picard_zero_rhs_gives_zero() {
    let spec = scalar(Arc::new(ConstantRhs(0.0)), StieltjesFunctional::constant_density(1.0, 0.3).unwrap(), 1.0, 2.0, 0.01);
    let res = solve_picard(&spec, &PicardSettings::default(), None).unwrap();
    assert_eq!(res.trajectory.sup_norm(), 0.0);
    assert_eq!(res.initial_guess, "zero");
}

#[test]
fn picard_nonconvergence_carries_history() {
    let spec = builtins::example35(Param::Scalar(0.5), Horizon::new(1.0, 2.0, 1e-2))
        .unwrap()
        .truncation(4, Closure::Zero)
        .build()
        .unwrap();
    let settings = PicardSettings {
        max_iter: 3,
        ..PicardSettings::default()
    };
    match solve_picard(&spec, &settings, None) {
        Err(Error::NonConvergence { iterations, last_residual, history }) => {
            assert_eq!(iterations, 3);
            assert_eq!(history.len(), 3);
            assert_eq!(history[2], last_residual);
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn picard_rejects_bad_settings() {
    let spec = oracle_spec();
    for s in [
        PicardSettings { tol: 0.0, ..Default::default() },
        PicardSettings { max_iter: 0, ..Default::default() },
        PicardSettings { damping: 1.5, ..Default::default() },
    ] {
        assert!(matches!(solve_picard(&spec, &s, None), Err(Error::Config(_))));
    }
}

#[test]
fn fixed_point_property_holds_at_convergence() {
    let spec = builtins::example35(Param::Scalar(0.5), Horizon::new(1.0, 2.0, 1e-2))
        .unwrap()
        .truncation(8, Closure::Zero)
        .build()
        .unwrap();
    let settings = PicardSettings::default();
    let res = solve_picard(&spec, &settings, None).unwrap();
    let tx = apply_t(&res.trajectory, &spec).unwrap();
    let diff = solution_seminorms(&tx.sub(&res.trajectory).unwrap(), &spec).unwrap();
    let own = solution_seminorms(&res.trajectory, &spec).unwrap();
    for (d, x) in diff.iter().zip(&own) {
        assert!(d.r_value <= 10.0 * settings.tol * (1.0 + x.r_value), "{d:?} vs {x:?}");
    }
    assert!(relative_change(&tx, &res.trajectory, &spec).unwrap() <= 10.0 * settings.tol);
}

#[test]
fn damped_iteration_reaches_the_same_fixed_point() {
    let spec = builtins::example35(Param::Scalar(0.5), Horizon::new(1.0, 2.0, 1e-2))
        .unwrap()
        .truncation(6, Closure::Zero)
        .build()
        .unwrap();
    let plain = solve_picard(&spec, &PicardSettings::default(), None).unwrap();
    let damped = solve_picard(
        &spec,
        &PicardSettings {
            damping: 0.5,
            max_iter: 2000,
            ..Default::default()
        },
        None,
    )
    .unwrap();
    assert!(damped.trajectory.sup_distance(&plain.trajectory).unwrap() < 1e-9);
    assert!(damped.iterations > plain.iterations);
}

#[test]
fn iterates_stay_in_invariant_set() {
    for k in [0.2, 0.5, 0.6] {
        let spec = builtins::example35(Param::Scalar(k), Horizon::new(1.0, 3.0, 1e-2))
            .unwrap()
            .truncation(8, Closure::Zero)
            .seminorms(SeminormChoice::Default { count: 3 })
            .build()
            .unwrap();
        let rho: Vec<f64> = (1..=3).map(|p| nlivp::hypothesis::compute_constants(&spec, p).unwrap().rho).collect();
        let mut count = 0;
        solve_picard_observed(&spec, &PicardSettings::default(), None, |_, v| {
            count += 1;
            for (s, r) in solution_seminorms(v, &spec).unwrap().iter().zip(&rho) {
                assert!(s.r_value <= r * (1.0 + 1e-4), "k = {k}: {s:?} vs rho {r}");
            }
        })
        .unwrap();
        assert!(count > 1);
    }
}

#[test]
fn rk4_examples() {
    let spec = ProblemSpec::builder(0.5, 1.0, 0.1)
        .rhs(Arc::new(ConstantRhs(0.0)))
        .functionals(FunctionalFamily::new(0.5, vec![StieltjesFunctional::zero(0.5).unwrap()], FunctionalTail::RepeatLast).unwrap())
        .truncation(2, Closure::Zero)
        .build()
        .unwrap();
    let x = integrate_ivp(&[1.0, 2.0], &spec).unwrap();
    assert!(x.rows().all(|r| r == [1.0, 2.0]));
    assert!(matches!(integrate_ivp(&[1.0], &spec), Err(Error::Index { .. })));

    let spec = scalar(Arc::new(ConstantRhs(1.0)), StieltjesFunctional::zero(0.5).unwrap(), 0.5, 1.0, 0.1);
    let x = integrate_ivp(&[0.0], &spec).unwrap();
    for (i, &t) in spec.grid().nodes().iter().enumerate() {
        assert!((x.value(i, 0) - t).abs() < 1e-15);
    }

    let spec = scalar(dsl("x[n]"), StieltjesFunctional::zero(0.5).unwrap(), 0.5, 1.0, 1e-3);
    let x = integrate_ivp(&[1.0], &spec).unwrap();
    let last = spec.grid().len() - 1;
    assert!((x.value(last, 0) - std::f64::consts::E).abs() < 1e-10);
}

#[test]
fn residual_examples() {
    let spec = oracle_spec();
    for c in [-1.0, 0.0, 0.5, 2.0] {
        let r = residual(&[c], &spec).unwrap();
        assert!((r.residual[0] - (0.5 * c - 0.25)).abs() < 1e-13);
    }
    assert!(residual(&[0.5], &spec).unwrap().norm() < 1e-13);

    let spec = scalar(Arc::new(ConstantRhs(0.0)), StieltjesFunctional::constant_density(1.0, 0.3).unwrap(), 1.0, 2.0, 0.01);
    let r = residual(&[2.0], &spec).unwrap();
    assert!((r.residual[0] - 2.0 * 0.7).abs() < 1e-14);

    let spec = scalar(dsl("sin(t) * x[n]"), StieltjesFunctional::zero(1.0).unwrap(), 1.0, 2.0, 0.01);
    assert_eq!(residual(&[1.7], &spec).unwrap().residual, vec![1.7]);
}

#[test]
fn residual_is_affine_for_linear_systems() {
    let spec = builtins::finite_affine(
        &[&["-0.5", "0.2*t", "0"], &["0.1", "cos(t)", "0.3"], &["0", "0.4", "-t"]],
        &["1", "t", "exp(-t)"],
        vec![
            StieltjesFunctional::point_mass(1.0, 0.5, 0.5).unwrap(),
            StieltjesFunctional::constant_density(1.0, 0.2).unwrap(),
            StieltjesFunctional::point_mass(1.0, 1.0, -0.4).unwrap(),
        ],
        Horizon::new(1.0, 2.0, 1e-2),
    )
    .unwrap()
    .truncation(3, Closure::Zero)
    .build()
    .unwrap();
    let f = |c: &[f64]| residual(c, &spec).unwrap().residual;
    for d in [[0.3, -1.2, 0.7], [2.0, 0.5, -0.25]] {
        let base: Vec<Vec<f64>> = [[0.0, 0.0, 0.0], [1.5, -2.0, 0.25]]
            .iter()
            .map(|c| {
                let shifted: Vec<f64> = c.iter().zip(&d).map(|(a, b)| a + b).collect();
                f(&shifted).iter().zip(f(c)).map(|(a, b)| a - b).collect()
            })
            .collect();
        for (a, b) in base[0].iter().zip(&base[1]) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }
}

#[test]
fn one_fixed_point_step_is_exact_for_state_free_rhs() {
    let spec = oracle_spec();
    for c in [-3.0, 0.0, 10.0] {
        let next = fixed_point_step(&[c], &spec).unwrap();
        assert!((next[0] - 0.5).abs() < 1e-13 * (1.0 + c.abs()), "{c}: {}", next[0]);
    }
}

#[test]
fn shooting_examples() {
    let res = solve_shooting(&oracle_spec(), &ShootingSettings::default()).unwrap();
    assert!((res.trajectory.value(0, 0) - 0.5).abs() < 1e-12);

    let spec = scalar(Arc::new(ConstantRhs(0.0)), StieltjesFunctional::constant_density(1.0, 0.3).unwrap(), 1.0, 2.0, 0.01);
    let res = solve_shooting(&spec, &ShootingSettings::default()).unwrap();
    assert_eq!(res.iterations, 0);
    assert_eq!(res.trajectory.sup_norm(), 0.0);
}

#[test]
fn shooting_agrees_with_picard_on_builtins() {
    let h = 1e-2;
    let specs = [
        oracle_spec(),
        builtins::uncoupled_exp(Horizon::new(1.0, 2.0, h)).unwrap().truncation(5, Closure::Zero).build().unwrap(),
        builtins::example35(Param::Scalar(0.5), Horizon::new(1.0, 2.0, h))
            .unwrap()
            .truncation(6, Closure::Freeze)
            .build()
            .unwrap(),
    ];
    for spec in &specs {
        let p = solve_picard(spec, &PicardSettings::default(), None).unwrap();
        let s = solve_shooting(spec, &ShootingSettings::default()).unwrap();
        let d = p.trajectory.sup_distance(&s.trajectory).unwrap();
        assert!(d <= 10.0 * h * h, "{d:e}");
    }
}

#[test]
fn uncoupled_exp_matches_closed_form() {
    let t0 = 1.0;
    let spec = builtins::uncoupled_exp(Horizon::new(t0, 3.0, 1e-3)).unwrap().truncation(4, Closure::Zero).build().unwrap();
    let s = solve_shooting(&spec, &ShootingSettings::default()).unwrap();
    let p = solve_picard(&spec, &PicardSettings::default(), None).unwrap();
    for (i, &t) in spec.grid().nodes().iter().enumerate() {
        for n in 1..=4 {
            let exact = builtins::uncoupled_exp_exact(n, t, t0);
            assert!((s.trajectory.value(i, n - 1) - exact).abs() < 1e-10);
            assert!((p.trajectory.value(i, n - 1) - exact).abs() < 1e-6);
        }
    }
}

#[test]
fn solve_result_serialises_diagnostics() {
    let res = solve_picard(&oracle_spec(), &PicardSettings::default(), None).unwrap();
    let json = format!("{:?}", (res.method, res.seminorms.len()));
    assert!(json.contains("Picard"));
    assert_eq!(res.residual_history.len(), res.iterations);
}
