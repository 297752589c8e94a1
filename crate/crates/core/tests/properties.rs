use funceq_core::corpus;
use funceq_core::expr::Func;
use funceq_core::hypotheses::{check_c1, check_sum_conditions, compute_l, estimate_c, estimate_k};
use funceq_core::operator::{verify_change_of_variables, EquationSpec, MapSpec};
use funceq_core::solver::{apriori_error, neumann_solve, picard_solve, residual, NeumannSeries, Status};
use funceq_core::{differentiate, parse, Expr, GridFunction};
use proptest::prelude::*;

const M: usize = 512;

const MAP_POOL: [&str; 11] = [
    "x",
    "x/2",
    "(x+1)/2",
    "mod1(2*x)",
    "mod1(3*x)",
    "x^1.25",
    "x^1.5",
    "4*x*(1-x)",
    "1-x",
    "abs(2*x-1)",
    "x^2",
];

fn expr_strategy() -> impl Strategy<Value = Expr> {
    let leaf = prop_oneof![
        Just(Expr::Var),
        (-4i32..=4, 1u32..=4).prop_map(|(n, d)| Expr::Const(n as f64 / d as f64)),
    ];
    leaf.prop_recursive(3, 16, 2, |inner| {
        prop_oneof![
            inner.clone().prop_map(|e| Expr::Neg(Box::new(e))),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::Add(Box::new(a), Box::new(b))),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::Sub(Box::new(a), Box::new(b))),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::Mul(Box::new(a), Box::new(b))),
            (inner.clone(), 2u32..=3).prop_map(|(a, p)| Expr::Pow(Box::new(a), p as f64)),
            // denominators bounded away from zero
            (inner.clone(), inner.clone()).prop_map(|(a, b)| {
                let den = Expr::Add(Box::new(Expr::Const(1.0)), Box::new(Expr::Pow(Box::new(b), 2.0)));
                Expr::Div(Box::new(a), Box::new(den))
            }),
        ]
    })
}

fn kinked_strategy() -> impl Strategy<Value = Expr> {
    (
        expr_strategy(),
        prop_oneof![Just(Func::Abs), Just(Func::Mod1), Just(Func::Floor), Just(Func::Sign)],
    )
        .prop_map(|(e, f)| Expr::Mul(Box::new(Expr::Call(f, vec![e.clone()])), Box::new(e)))
}

fn sec5(a: f64, b: f64, m: usize) -> EquationSpec {
    corpus::build("sec5", &[("a", a), ("b", b)], m).unwrap().spec
}

fn same(u: f64, v: f64) -> bool {
    u == v || (u.is_nan() && v.is_nan())
}

#[test]
fn corpus_expressions_round_trip() {
    for inst in corpus::defaults(64).unwrap() {
        let spec = &inst.spec;
        let mut exprs: Vec<&Expr> = spec.maps().iter().map(MapSpec::expr).collect();
        exprs.extend(spec.coeffs());
        exprs.extend(inst.oracle.as_ref());
        for e in exprs {
            let back = parse(&e.to_string()).unwrap();
            for i in 0..=100 {
                let x = i as f64 / 100.0;
                assert!(same(back.eval(x), e.eval(x)), "{e} at {x}");
            }
        }
    }
}

#[test]
fn corpus_oracles_meet_threshold() {
    for record in corpus::run_all_at(1024, 1e-6, 5000).unwrap() {
        assert!(record.passed, "{record:?}");
    }
}

#[test]
fn blow_up_across_eps() {
    for eps in [0.5, 0.25, 0.125, 0.0625] {
        let inst = corpus::build("ex4_2", &[("eps", eps)], 1024).unwrap();
        let r = neumann_solve(&inst.spec, 1e-6, 5000, Some(1.0 - eps)).unwrap();
        assert!((r.phi0.l1_norm() - 1.0 / eps).abs() <= 1e-4);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn print_parse_round_trip(e in kinked_strategy()) {
        let back = parse(&e.to_string()).unwrap();
        for i in 0..=100 {
            let x = i as f64 / 100.0;
            prop_assert!(same(back.eval(x), e.eval(x)), "{} vs {} at {}", e, back, x);
        }
    }

    #[test]
    fn derivative_matches_central_difference(e in expr_strategy()) {
        let d = differentiate(&e).unwrap();
        let delta = 1e-5;
        for i in 1..=97 {
            let x = i as f64 / 98.0;
            let fd = (e.eval(x + delta) - e.eval(x - delta)) / (2.0 * delta);
            let err = (d.eval(x) - fd).abs();
            prop_assert!(err <= 1e-6 * (1.0 + fd.abs()), "{}: {} vs {} at {}", e, d.eval(x), fd, x);
        }
    }

    #[test]
    fn indicatrix_integrates_derivative(i in 0..MAP_POOL.len(), a in 0.0..0.5f64, w in 0.05..0.5f64) {
        let map = MapSpec::new(parse(MAP_POOL[i]).unwrap(), 1024).unwrap();
        let cov = verify_change_of_variables(&map, &Expr::Const(1.0), (a, a + w), 1024).unwrap();
        prop_assert!(cov.defect() <= 1e-6, "{}: {} vs {}", MAP_POOL[i], cov.lhs, cov.rhs);
    }

    #[test]
    fn change_of_variables_for_powers(i in 0..MAP_POOL.len(), p in 0u32..4) {
        let map = MapSpec::new(parse(MAP_POOL[i]).unwrap(), 4096).unwrap();
        let h = Expr::Pow(Box::new(Expr::Var), p as f64);
        let cov = verify_change_of_variables(&map, &h, (0.0, 1.0), 4096).unwrap();
        prop_assert!(cov.defect() <= 1e-6, "{} with y^{}: {} vs {}", MAP_POOL[i], p, cov.lhs, cov.rhs);
    }

    #[test]
    fn scaling_coefficients_scales_c(i in 0..MAP_POOL.len(), j in 0..MAP_POOL.len(), t in 0.0..3.0f64) {
        let spec = EquationSpec::from_strs(&[MAP_POOL[i], MAP_POOL[j]], &["x/2", "0.3"], "1", M).unwrap();
        let scaled: Vec<Expr> = spec.coeffs().iter().map(|c| Expr::Mul(Box::new(Expr::Const(t)), Box::new(c.clone()))).collect();
        let scaled = spec.with_coeffs(scaled).unwrap();
        let (k, l) = (estimate_k(&spec), compute_l(&spec));
        prop_assert_eq!((estimate_k(&scaled), compute_l(&scaled)), (k, l));
        let (c0, c1) = (estimate_c(&spec, k, l), estimate_c(&scaled, k, l));
        if c0.is_finite() {
            prop_assert!((c1 - t * c0).abs() <= 1e-12 * (1.0 + c1.abs()), "{} vs {}", c1, t * c0);
        }
    }

    #[test]
    fn adding_a_map_never_decreases_l(i in 0..MAP_POOL.len(), j in 0..MAP_POOL.len(), n in 0..MAP_POOL.len()) {
        let spec = EquationSpec::from_strs(&[MAP_POOL[i], MAP_POOL[j]], &["0.1", "0.1"], "1", M).unwrap();
        let map = MapSpec::new(parse(MAP_POOL[n]).unwrap(), M).unwrap();
        let bigger = spec.with_term(map, Expr::Const(0.1)).unwrap();
        prop_assert!(compute_l(&bigger) >= compute_l(&spec));
    }

    #[test]
    fn weak_inequality_bounds_total_weight(i in 0..MAP_POOL.len(), j in 0..MAP_POOL.len(), c1 in -1.0..1.0f64, c2 in -1.0..1.0f64) {
        let coeffs = [format!("{c1}*x"), format!("{c2}")];
        let spec = EquationSpec::from_strs(&[MAP_POOL[i], MAP_POOL[j]], &[&coeffs[0], &coeffs[1]], "1", M).unwrap();
        let (k, l) = (estimate_k(&spec), compute_l(&spec));
        if check_c1(&spec, k, l) {
            prop_assert!(check_sum_conditions(&spec).sum_int_gn < 1.0 + 1e-6);
        }
    }

    #[test]
    fn c_bounds_observed_operator_ratio(
        i in 0..MAP_POOL.len(),
        j in 0..MAP_POOL.len(),
        knots in proptest::collection::vec(-1.0..1.0f64, 9),
    ) {
        let spec = EquationSpec::from_strs(&[MAP_POOL[i], MAP_POOL[j]], &["x/2", "0.25"], "1", M).unwrap();
        let c = estimate_c(&spec, estimate_k(&spec), compute_l(&spec));
        let h = GridFunction::from_fn(M, |x| {
            let s = x * 8.0;
            let j = (s.floor() as usize).min(7);
            knots[j] + (s - j as f64) * (knots[j + 1] - knots[j])
        }).unwrap();
        let (nh, nph) = (h.l1_norm(), spec.apply(&h).unwrap().l1_norm());
        prop_assert!(nph <= c * nh + 10.0 / M as f64 * nh, "{} > {}", nph, c * nh);
    }

    #[test]
    fn tail_bound_and_decay(a in -0.45..0.45f64, b in -3.0..3.0f64) {
        let spec = sec5(a, b, M);
        let c = 2.0 * a.abs();
        let g_norm = spec.g().l1_norm();
        let steps: Vec<_> = NeumannSeries::new(&spec).take(61).map(|s| s.unwrap()).collect();
        let eps = 100.0 / M as f64;
        for m in 1..=30 {
            let d = steps[60].partial_sum.l1_distance(&steps[m].partial_sum).unwrap();
            prop_assert!(d <= apriori_error(c, m, g_norm).unwrap() + eps);
        }
        for w in steps.windows(2) {
            prop_assert!(w[1].term.l1_norm() <= c * w[0].term.l1_norm() + eps);
        }
    }

    #[test]
    fn tail_bound_for_power_maps(eps in 0.05..0.45f64) {
        let inst = corpus::build("ex4_3", &[("eps", eps)], M).unwrap();
        let c = 1.0 / (1.0 + eps);
        let g_norm = inst.spec.g().l1_norm();
        let sums: Vec<_> = NeumannSeries::new(&inst.spec).take(61).map(|s| s.unwrap().partial_sum).collect();
        for m in 1..=30 {
            let d = sums[60].l1_distance(&sums[m]).unwrap();
            prop_assert!(d <= apriori_error(c, m, g_norm).unwrap() + 100.0 / M as f64);
        }
    }

    #[test]
    fn converged_solution_has_small_residual(a in -0.45..0.45f64, b in -3.0..3.0f64, tol in 1e-9..1e-3f64) {
        let spec = sec5(a, b, M);
        let c = 2.0 * a.abs();
        let r = neumann_solve(&spec, tol, 10_000, Some(c)).unwrap();
        if r.status == Status::Converged {
            prop_assert!(r.residual <= tol * (1.0 + c), "{} > {}", r.residual, tol * (1.0 + c));
            prop_assert!((residual(&spec, &r.phi0).unwrap() - r.residual).abs() == 0.0);
        }
    }

    #[test]
    fn picard_starts_agree(a in -0.45..0.45f64, s1 in -5.0..5.0f64, s2 in -5.0..5.0f64) {
        let spec = sec5(a, 1.0, M);
        let c = 2.0 * a.abs();
        let tol = 1e-7;
        let p1 = picard_solve(&spec, GridFunction::from_fn(M, |x| s1 * x).unwrap(), tol, 10_000, c).unwrap();
        let p2 = picard_solve(&spec, GridFunction::constant(M, s2).unwrap(), tol, 10_000, c).unwrap();
        prop_assert!(p1.phi0.l1_distance(&p2.phi0).unwrap() <= 2.0 * tol + 100.0 / M as f64);
    }
}
