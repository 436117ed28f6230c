use proptest::prelude::*;

use pia::calculus::{cc, equal};
use pia::coupled::{coupled_corrections, frame_invariants, Hermiticity};
use pia::expr::Func;
use pia::jet::rel_err;
use pia::job::{fixture, fixture_script_parsed, Problem, FIXTURES};
use pia::normal::Ctx;
use pia::oracle::value_at;
use pia::render::{fortran, plain, tex};
use pia::{parse_expr, Expr};

fn leaf() -> impl Strategy<Value = Expr> {
    prop_oneof![
        (-9i64..10, 1i64..6).prop_map(|(n, d)| Expr::frac(n, d)),
        Just(Expr::i()),
        Just(Expr::symbol("x")),
        Just(Expr::symbol("k")),
        (0u32..3).prop_map(|o| Expr::opaque("h", o, Expr::symbol("x"))),
    ]
}

fn tree() -> impl Strategy<Value = Expr> {
    leaf().prop_recursive(4, 48, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| a + b),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| a - b),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| a * b),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| if b.is_zero() { a } else { a / b }),
            (inner.clone(), -3i64..4, 1i64..3).prop_map(|(a, n, d)| if a.is_zero() { a } else { a.pow(&Expr::frac(n, d)) }),
            inner.clone().prop_map(|a| -a),
            inner.clone().prop_map(|a| a.sqrt()),
            (inner, 0usize..5).prop_map(|(a, f)| Expr::apply([Func::Sin, Func::Cos, Func::Tan, Func::Exp, Func::Log][f], a)),
        ]
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn plain_render_round_trips(e in tree()) {
        let text = plain(&e);
        let back = parse_expr(&text).unwrap();
        prop_assert_eq!(&back, &e, "{}", text);
        prop_assert_eq!(plain(&back), text);
    }

    #[test]
    fn other_forms_render(e in tree()) {
        prop_assert!(!tex(&e).is_empty());
        prop_assert!(!fortran(&e).is_empty());
    }
}

#[test]
fn frame_identities_on_every_coupled_fixture() {
    for name in FIXTURES {
        let job = fixture(name).unwrap();
        let Problem::Coupled(p) = &job.problem else { continue };
        for (what, ok) in frame_invariants(p).unwrap() {
            assert!(ok, "{name}: {what}");
        }
    }
}

/// `s_m = cp_m spv + c_m s0v`, seen through the projections on `spv` and
/// `s0v` (both of squared length `asqr`, and orthogonal).
#[test]
fn s_m_decomposes_along_the_frame() {
    for name in FIXTURES {
        let job = fixture(name).unwrap();
        let Problem::Coupled(p) = &job.problem else { continue };
        let script = fixture_script_parsed(name).unwrap();
        let setup = job.oracle_setup(script.as_ref()).unwrap();
        let s = coupled_corrections(p).unwrap();
        let f = &s.frame;
        for o in &s.orders {
            for &x in &job.check.points {
                let v = |e: &Expr| value_at(e, &setup, "x", x).unwrap();
                let a = v(&f.asqr);
                let dot = |u: &[Expr; 2]| v(&u[0]).conj() * v(&o.sv[0]) + v(&u[1]).conj() * v(&o.sv[1]);
                assert!(rel_err(dot(&f.spv), v(&o.cp) * a) < 1e-10, "{name} m = {} at {x}", o.m);
                assert!(rel_err(dot(&f.s0v), v(&o.c) * a) < 1e-10, "{name} m = {} at {x}", o.m);
            }
        }
    }
}

#[test]
fn conjugation_is_an_involution() {
    let mut assumptions = pia::Assumptions::new();
    assumptions.declare_positive("x").unwrap();
    let mut ctx = Ctx::new(assumptions);
    for src in ["i*sqrt(x)/(x - 1)", "(cos(x) + i*sin(x))*exp(x) + h(x)", "(1 + i*x)^2*log(x)", "sqrt(-x)"] {
        let e = parse_expr(src).unwrap();
        let once = cc(&mut ctx, &e).unwrap();
        let twice = cc(&mut ctx, &once).unwrap();
        assert!(equal(&mut ctx, &twice, &e).unwrap(), "{src}");
    }
    let out_of_scope = parse_expr("exp(i*x)").unwrap();
    assert!(matches!(cc(&mut ctx, &out_of_scope), Err(pia::Error::NotLinearInI(_))));
    for name in ["A", "C1", "C4"] {
        let job = fixture(name).unwrap();
        let Problem::Coupled(p) = &job.problem else { unreachable!() };
        let s = coupled_corrections(p).unwrap();
        let mut ctx = Ctx::new(p.assumptions.clone());
        for q in [&s.frame.s0v[0], &s.frame.s0v[1], &s.order(1).cp, &s.order(2).y, &s.order(2).cp] {
            let once = cc(&mut ctx, q).unwrap();
            let twice = cc(&mut ctx, &once).unwrap();
            assert!(equal(&mut ctx, &twice, q).unwrap(), "{name}");
        }
    }
}

#[test]
fn non_hermitian_example_is_flagged() {
    let job = fixture("D").unwrap();
    let Problem::Coupled(p) = &job.problem else { unreachable!() };
    assert_eq!(p.hermitian, Hermiticity::NonHermitian);
    let s = coupled_corrections(p).unwrap();
    let setup = job.oracle_setup(None).unwrap();
    // Y1 from the non-hermitian formula is finite and not forced to zero
    let y1 = value_at(&s.order(1).y, &setup, "x", 2.5).unwrap();
    assert!(y1.norm().is_finite());
}
