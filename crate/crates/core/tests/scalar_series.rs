#![allow(clippy::needless_range_loop)]

use num_complex::Complex64;

use pia::calculus::equal;
use pia::jet::{rel_err, Hp, Scalar};
use pia::normal::Ctx;
use pia::oracle::{scalar_corrections_jet, value_at, Setup};
use pia::scalar::{scalar_corrections, ScalarProblem, Variable};
use pia::{parse_expr, Expr};

fn e(s: &str) -> Expr {
    parse_expr(s).unwrap()
}

#[test]
fn general_x_mode_low_orders() {
    let s = scalar_corrections(&ScalarProblem::general(Variable::X, 2)).unwrap();
    let mut ctx = Ctx::default();
    assert!(equal(&mut ctx, &s.y[&2], &e("eps0(x)/2")).unwrap());
    // Y4 picks up Q^2 derivatives in the x variable
    assert!(s.y[&4].opaque_names().iter().any(|n| n.as_ref() == "Qsqr"));
}

#[test]
fn y_scales_with_the_depth_of_r() {
    // R -> lam^2 R leaves eps0 scaled by lam^-2 and Y_2n by lam^-2n
    let r = e("1 + 1/(1 + exp(x))");
    let lam: f64 = 3.0;
    let base = scalar_corrections(&ScalarProblem::explicit(r.clone(), 3)).unwrap();
    let scaled = scalar_corrections(&ScalarProblem::explicit(Expr::int(9) * r, 3)).unwrap();
    let setup = Setup::default();
    for x in [-1.0, 0.3, 2.0] {
        for n in 1..=3usize {
            let a = value_at(&base.y[&(2 * n)], &setup, "x", x).unwrap();
            let b = value_at(&scaled.y[&(2 * n)], &setup, "x", x).unwrap();
            let expect = a * lam.powi(-2 * n as i32);
            assert!(rel_err(b, expect) < 1e-10, "Y{} at {x}: {b} vs {expect}", 2 * n);
        }
    }
}

#[test]
fn explicit_mode_against_jets() {
    let p = ScalarProblem::explicit(e("x^2 + 1/x"), 3);
    let s = scalar_corrections(&p).unwrap();
    let setup = Setup::default();
    for x in [0.7, 1.3, 2.9] {
        let j = scalar_corrections_jet(&p, &setup, Complex64::new(x, 0.0)).unwrap();
        for n in 1..=3 {
            let v = value_at(&s.y[&(2 * n)], &setup, "x", x).unwrap();
            assert!(rel_err(v, j[n]) < 1e-10, "Y{} at {x}", 2 * n);
        }
    }
}

#[test]
fn high_precision_jets_agree_with_doubles() {
    let p = ScalarProblem::explicit(e("2*(x^2 - 1)"), 4);
    let setup = Setup::default();
    let d = scalar_corrections_jet(&p, &setup, Complex64::new(2.5, 0.0)).unwrap();
    let h = scalar_corrections_jet(&p, &setup, Hp::from_f64(2.5)).unwrap();
    for n in 1..=4 {
        assert!(rel_err(d[n], h[n].to_c64()) < 1e-12, "Y{}", 2 * n);
    }
}

#[test]
fn auxiliary_function_enters_q_and_eps0() {
    let mut p = ScalarProblem::explicit(e("x^2"), 1);
    p.af = e("1/(4*x^2)");
    let s = scalar_corrections(&p).unwrap();
    let mut ctx = Ctx::default();
    assert!(equal(&mut ctx, &s.qsq, &e("x^2 - 1/(4*x^2)")).unwrap());
}
