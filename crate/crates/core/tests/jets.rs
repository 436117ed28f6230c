//! Jet arithmetic against central differences.

use num_complex::Complex64;

use pia::jet::{eval_jet, eval_value, Env};
use pia::parse_expr;

fn value(src: &str, x: f64) -> Complex64 {
    eval_value(&parse_expr(src).unwrap(), &Env::new("x", Complex64::new(x, 0.0)).param("a", Complex64::new(0.7, 0.0))).unwrap()
}

#[test]
fn derivatives_match_finite_differences() {
    let cases = [
        "sin(x)^2*exp(-x/3)",
        "sqrt(1 + x^2)/(2 + cos(a*x))",
        "log(x)*x^(3/2)",
        "tan(x/4) + (x + a)^(-2)",
        "exp(i*x)*(1 + i*x)^(1/3)",
    ];
    let h = 1e-3;
    for src in cases {
        for x0 in [0.6, 1.4, 2.3] {
            let env = Env::new("x", Complex64::new(x0, 0.0)).param("a", Complex64::new(0.7, 0.0));
            let j = eval_jet(&parse_expr(src).unwrap(), &env, 3).unwrap();
            let f = |k: f64| value(src, x0 + k * h);
            // fourth-order stencils
            let d1 = (f(-2.0) - f(2.0) + (f(1.0) - f(-1.0)) * 8.0) / (12.0 * h);
            let d2 = (-f(2.0) - f(-2.0) + (f(1.0) + f(-1.0)) * 16.0 - f(0.0) * 30.0) / (12.0 * h * h);
            let scale = 1.0 + j.derivative_value(1).norm();
            assert!((j.derivative_value(1) - d1).norm() < 1e-8 * scale, "{src} at {x0}: {} vs {d1}", j.derivative_value(1));
            let scale = 1.0 + j.derivative_value(2).norm();
            assert!((j.derivative_value(2) - d2).norm() < 1e-5 * scale, "{src}'' at {x0}: {} vs {d2}", j.derivative_value(2));
        }
    }
}

#[test]
fn poles_are_reported() {
    let env = Env::new("x", Complex64::new(1.0, 0.0));
    assert!(eval_jet(&parse_expr("1/(x - 1)").unwrap(), &env, 2).is_err());
    assert!(eval_jet(&parse_expr("log(x - 1)").unwrap(), &env, 2).is_err());
}
