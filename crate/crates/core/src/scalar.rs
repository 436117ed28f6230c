//! Higher-order phase-integral corrections for a single equation
//! `u'' + R u = 0`.

use std::collections::BTreeMap;

use cpu_time::ProcessTime;
use num_bigint::BigInt;
use num_rational::BigRational;

use crate::domain::{Domain, NfDomain};
use crate::error::{Error, Result};
use crate::expr::{Assumptions, Expr};
use crate::render::RenderSpec;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InputMode {
    /// `R` and `af` are given explicitly.
    Explicit,
    /// Results are expressed through uninterpreted `eps0` and `Qsqr`.
    General,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Variable {
    X,
    /// Phase variable: `Q^2 = 1` throughout the recurrence.
    Zeta,
}

impl Variable {
    pub fn name(self) -> &'static str {
        match self {
            Variable::X => "x",
            Variable::Zeta => "z",
        }
    }
}

#[derive(Clone, Debug)]
pub struct ScalarProblem {
    pub r: Expr,
    pub af: Expr,
    pub nmax: usize,
    pub input_mode: InputMode,
    pub variable: Variable,
    pub render: RenderSpec,
    pub assumptions: Assumptions,
    /// Replaces the computed `eps0` verbatim.
    pub eps0_override: Option<Expr>,
}

impl ScalarProblem {
    pub fn explicit(r: Expr, nmax: usize) -> ScalarProblem {
        ScalarProblem {
            r,
            af: Expr::zero(),
            nmax,
            input_mode: InputMode::Explicit,
            variable: Variable::X,
            render: RenderSpec::default(),
            assumptions: Assumptions::new(),
            eps0_override: None,
        }
    }

    pub fn general(variable: Variable, nmax: usize) -> ScalarProblem {
        ScalarProblem {
            input_mode: InputMode::General,
            variable,
            ..ScalarProblem::explicit(Expr::zero(), nmax)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.nmax == 0 {
            return Err(Error::InvalidProblem("nmax must be at least 1".into()));
        }
        Ok(())
    }
}

/// Numeric weights of the recurrence. Only [`ScalarWeights::default`] is
/// correct; the fields exist so that tests can check that each one matters.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarWeights {
    /// Overall factor in front of the three sums.
    pub overall: BigRational,
    /// Weight of `Q^-2 Y_a' Y_b'`.
    pub slope_product: BigRational,
    /// Weight of the `Y_a Q^-2 (...)` bracket.
    pub curvature: BigRational,
    /// Weight of `Q^-2 (Q^2)' Y_b'` inside the bracket.
    pub q_slope: BigRational,
}

impl Default for ScalarWeights {
    fn default() -> Self {
        let r = |n: i64, d: i64| BigRational::new(BigInt::from(n), BigInt::from(d));
        ScalarWeights { overall: r(1, 2), slope_product: r(3, 4), curvature: r(1, 2), q_slope: r(1, 2) }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Timings {
    pub compute: f64,
    pub simplify: f64,
}

#[derive(Clone, Debug)]
pub struct ScalarCorrectionSeries {
    pub eps0: Expr,
    pub qsq: Expr,
    /// Even orders only, with `Y_0 = 1`.
    pub y: BTreeMap<usize, Expr>,
    pub timings: Timings,
    pub non_rigorous: bool,
}

/// `Q^2 = R - af` and `eps0 = ((5/16)(Q2'/Q2)^2 - (1/4) Q2''/Q2 + af)/Q2`.
pub fn eps0_scalar<D: Domain>(dom: &mut D, r: &Expr, af: &Expr) -> Result<(D::V, D::V)> {
    let rv = dom.lift(r)?;
    let afv = dom.lift(af)?;
    let qsq = dom.sub(&rv, &afv);
    let eps0 = eps0_from_qsq(dom, &qsq, &afv)?;
    Ok((qsq, eps0))
}

pub(crate) fn eps0_from_qsq<D: Domain>(dom: &mut D, qsq: &D::V, af: &D::V) -> Result<D::V> {
    let d1 = dom.diff(qsq)?;
    let d2 = dom.diff(&d1)?;
    let ratio = dom.div(&d1, qsq)?;
    let sq = dom.mul(&ratio, &ratio);
    let t1 = dom.scale(&sq, &BigRational::new(5.into(), 16.into()));
    let c = dom.div(&d2, qsq)?;
    let t2 = dom.scale(&c, &BigRational::new(1.into(), 4.into()));
    let s = dom.sub(&t1, &t2);
    let s = dom.add(&s, af);
    dom.div(&s, qsq)
}

/// Runs the recurrence in normal form.
pub fn scalar_corrections(p: &ScalarProblem) -> Result<ScalarCorrectionSeries> {
    let mut dom = NfDomain::new(p.variable.name(), p.assumptions.clone());
    scalar_corrections_in(p, &mut dom, &ScalarWeights::default())
}

pub fn scalar_corrections_in<D: Domain>(
    p: &ScalarProblem,
    dom: &mut D,
    w: &ScalarWeights,
) -> Result<ScalarCorrectionSeries> {
    p.validate()?;
    let t0 = ProcessTime::now();
    let v = Expr::symbol(p.variable.name());
    let (qsq, eps0) = match p.input_mode {
        InputMode::Explicit => eps0_scalar(dom, &p.r, &p.af)?,
        InputMode::General => {
            let q = dom.lift(&Expr::opaque("Qsqr", 0, v.clone()))?;
            let e = dom.lift(&Expr::opaque("eps0", 0, v.clone()))?;
            (q, e)
        }
    };
    let eps0 = match &p.eps0_override {
        Some(e) => dom.lift(e)?,
        None => eps0,
    };
    let qsqor1 = match p.variable {
        Variable::X => qsq.clone(),
        Variable::Zeta => dom.one(),
    };
    let one = dom.one();
    let qm2 = dom.div(&one, &qsqor1)?;
    let dq = dom.diff(&qsqor1)?;

    // y[k], y'[k], y''[k] for even k
    let mut y: Vec<D::V> = vec![dom.one()];
    let mut dy: Vec<D::V> = vec![dom.zero()];
    let mut d2y: Vec<D::V> = vec![dom.zero()];
    for n in 1..=p.nmax {
        let m = 2 * n;
        let idx = |k: usize| k / 2;
        let evens: Vec<usize> = (0..=m - 2).step_by(2).collect();

        let mut sum1 = dom.zero();
        for &a in &evens {
            for &b in &evens {
                if a + b == m {
                    let t = dom.mul(&y[idx(a)], &y[idx(b)]);
                    sum1 = dom.add(&sum1, &t);
                }
            }
        }
        let mut sum2 = dom.zero();
        for &a in &evens {
            for &b in &evens {
                for &g in &evens {
                    if a + b + g > m {
                        continue;
                    }
                    let d = m - a - b - g;
                    if d > m - 2 {
                        continue;
                    }
                    let t = dom.product(&[&y[idx(a)], &y[idx(b)], &y[idx(g)], &y[idx(d)]]);
                    sum2 = dom.add(&sum2, &t);
                }
            }
        }
        let mut sum3 = dom.zero();
        for &a in &evens {
            for &b in &evens {
                if a + b != m - 2 {
                    continue;
                }
                let (ya, yb) = (&y[idx(a)], &y[idx(b)]);
                let t1 = dom.product(&[&eps0, ya, yb]);
                let t2 = dom.product(&[&qm2, &dy[idx(a)], &dy[idx(b)]]);
                let t2 = dom.scale(&t2, &w.slope_product);
                let inner = dom.product(&[&qm2, &dq, &dy[idx(b)]]);
                let inner = dom.scale(&inner, &w.q_slope);
                let bracket = dom.sub(&d2y[idx(b)], &inner);
                let t3 = dom.product(&[ya, &qm2, &bracket]);
                let t3 = dom.scale(&t3, &w.curvature);
                let t = dom.add(&t1, &t2);
                let t = dom.sub(&t, &t3);
                sum3 = dom.add(&sum3, &t);
            }
        }
        let s = dom.sub(&sum1, &sum2);
        let s = dom.add(&s, &sum3);
        let ym = dom.scale(&s, &w.overall);
        let ym = dom.settle(ym, m)?;
        let d1 = dom.diff(&ym)?;
        let d2 = dom.diff(&d1)?;
        y.push(ym);
        dy.push(d1);
        d2y.push(d2);
    }
    let compute = t0.elapsed().as_secs_f64();
    let t1 = ProcessTime::now();
    let mut out = BTreeMap::new();
    for (k, val) in y.iter().enumerate() {
        out.insert(2 * k, dom.to_expr(val));
    }
    let eps0_e = dom.to_expr(&eps0);
    let qsq_e = dom.to_expr(&qsq);
    Ok(ScalarCorrectionSeries {
        eps0: eps0_e,
        qsq: qsq_e,
        y: out,
        timings: Timings { compute, simplify: t1.elapsed().as_secs_f64() },
        non_rigorous: dom.non_rigorous(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calculus::equal;
    use crate::normal::Ctx;
    use crate::parse::parse_expr;

    fn p(s: &str) -> Expr {
        parse_expr(s).unwrap()
    }

    #[test]
    fn zeta_mode_low_orders() {
        let s = scalar_corrections(&ScalarProblem::general(Variable::Zeta, 2)).unwrap();
        let mut ctx = Ctx::default();
        assert!(equal(&mut ctx, &s.y[&2], &p("eps0(z)/2")).unwrap());
        assert!(equal(&mut ctx, &s.y[&4], &p("-(eps0(z)^2 + eps0''(z))/8")).unwrap());
        assert_eq!(s.y[&0], Expr::one());
        assert_eq!(s.y.len(), 3);
    }

    #[test]
    fn parabolic_eps0() {
        let s = scalar_corrections(&ScalarProblem::explicit(p("coef*(x^2 - x1^2)"), 1)).unwrap();
        let mut ctx = Ctx::default();
        assert!(equal(&mut ctx, &s.eps0, &p("(3*x^2 + 2*x1^2)/(4*coef*(x^2 - x1^2)^3)")).unwrap());
    }

    #[test]
    fn constant_coefficient_has_no_corrections() {
        let s = scalar_corrections(&ScalarProblem::explicit(p("c"), 3)).unwrap();
        assert!(s.eps0.is_zero());
        for n in 1..=3 {
            assert!(s.y[&(2 * n)].is_zero());
        }
    }

    #[test]
    fn x_mode_with_unit_q_matches_zeta_mode() {
        let mut xp = ScalarProblem::general(Variable::X, 2);
        xp.variable = Variable::X;
        let sx = scalar_corrections(&xp).unwrap();
        let sz = scalar_corrections(&ScalarProblem::general(Variable::Zeta, 2)).unwrap();
        let mut bind = std::collections::HashMap::new();
        bind.insert("z".into(), p("x"));
        let mut ctx = Ctx::default();
        for m in [2, 4] {
            // set Qsqr = 1: all its derivatives vanish
            let yx = sx.y[&m].map_bottom_up(&mut |e| match e.node() {
                crate::Node::Opaque { name, order, .. } if &**name == "Qsqr" => {
                    Some(if *order == 0 { Expr::one() } else { Expr::zero() })
                }
                _ => None,
            });
            let yz = sz.y[&m].substitute(&bind);
            assert!(equal(&mut ctx, &yx, &yz).unwrap(), "order {m}");
        }
    }
}
