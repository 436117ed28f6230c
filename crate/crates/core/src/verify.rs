//! Symbolic results against the jet oracle at sample points.

use num_complex::Complex64;

use crate::coupled::{CoupledCorrectionSeries, CoupledProblem};
use crate::error::Result;
use crate::expr::Expr;
use crate::jet::{eval_value, rel_err, Env};
use crate::oracle::{coupled_corrections_jet, scalar_corrections_jet, Setup};
use crate::scalar::{ScalarCorrectionSeries, ScalarProblem};

#[derive(Clone, Debug, PartialEq)]
pub struct Comparison {
    pub quantity: String,
    pub point: f64,
    pub symbolic: Complex64,
    pub jet: Complex64,
    pub rel_err: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Report {
    pub rows: Vec<Comparison>,
    pub rel_tol: f64,
}

pub const DEFAULT_REL_TOL: f64 = 1e-10;

impl Report {
    pub fn new(rel_tol: f64) -> Report {
        Report { rows: Vec::new(), rel_tol }
    }

    pub fn push(&mut self, quantity: &str, point: f64, symbolic: Complex64, jet: Complex64) {
        let r = rel_err(symbolic, jet);
        self.rows.push(Comparison { quantity: quantity.into(), point, symbolic, jet, rel_err: r });
    }

    pub fn worst(&self) -> Option<&Comparison> {
        self.rows.iter().max_by(|a, b| a.rel_err.partial_cmp(&b.rel_err).unwrap_or(std::cmp::Ordering::Greater))
    }

    pub fn passed(&self) -> bool {
        self.rows.iter().all(|r| r.rel_err <= self.rel_tol)
    }

    pub fn summary(&self) -> String {
        let mut s = String::new();
        for r in &self.rows {
            s.push_str(&format!(
                "{:<8} x = {:<8} symbolic {}  jet {}  rel {:.2e}\n",
                r.quantity,
                r.point,
                crate::output::complex(r.symbolic),
                crate::output::complex(r.jet),
                r.rel_err
            ));
        }
        match self.worst() {
            Some(w) => s.push_str(&format!(
                "{}: worst {} at x = {} (rel {:.2e}, tolerance {:.0e})\n",
                if self.passed() { "PASS" } else { "FAIL" },
                w.quantity,
                w.point,
                w.rel_err,
                self.rel_tol
            )),
            None => s.push_str("PASS: nothing to compare\n"),
        }
        s
    }
}

fn value(e: &Expr, setup: &Setup, var: &str, x0: f64) -> Result<Complex64> {
    let mut env: Env<Complex64> = Env::new(var, Complex64::new(x0, 0.0));
    env.params = setup.params.clone();
    env.defs = setup.defs.clone();
    eval_value(e, &env)
}

pub fn verify_scalar(
    p: &ScalarProblem,
    s: &ScalarCorrectionSeries,
    setup: &Setup,
    points: &[f64],
    rel_tol: f64,
) -> Result<Report> {
    let var = p.variable.name();
    let mut report = Report::new(rel_tol);
    for &x0 in points {
        let jets = scalar_corrections_jet(p, setup, Complex64::new(x0, 0.0))?;
        for n in 1..=p.nmax {
            let sym = value(&s.y[&(2 * n)], setup, var, x0)?;
            report.push(&format!("Y{}", 2 * n), x0, sym, jets[n]);
        }
    }
    Ok(report)
}

/// The oracle's integration constants are matched to the symbolic `c_m` at
/// the anchor, so both sides use the same antiderivative.
pub fn verify_coupled(
    p: &CoupledProblem,
    s: &CoupledCorrectionSeries,
    setup: &Setup,
    points: &[f64],
    rel_tol: f64,
) -> Result<Report> {
    let mut setup = setup.clone();
    setup.offsets = s.orders.iter().map(|o| value(&o.c, &setup, "x", setup.anchor)).collect::<Result<_>>()?;
    let mut report = Report::new(rel_tol);
    for &x0 in points {
        let j = coupled_corrections_jet(p, &setup, x0)?;
        report.push("Q", x0, value(&s.frame.q, &setup, "x", x0)?, j.q);
        report.push("eps0", x0, value(&s.frame.eps0, &setup, "x", x0)?, j.eps0);
        for o in &s.orders {
            let m = o.m;
            report.push(&format!("Y{m}"), x0, value(&o.y, &setup, "x", x0)?, j.y[m]);
            report.push(&format!("cp{m}"), x0, value(&o.cp, &setup, "x", x0)?, j.cp[m]);
            report.push(&format!("c{m}"), x0, value(&o.c, &setup, "x", x0)?, j.c[m]);
        }
    }
    Ok(report)
}
