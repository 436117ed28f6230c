//! Numeric re-implementation of both recurrences in jet arithmetic.
//!
//! Nothing here goes through the normal-form code: inputs are evaluated
//! straight from the expression trees, every derivative is a jet shift,
//! and `c_m` integrals are done as one ODE system (adaptive Dormand-Prince)
//! from an anchor point.

use std::collections::HashMap;

use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::ToPrimitive;

use crate::coupled::{Branch, CoupledProblem, CoupledWeights, Hermiticity, Theory};
use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::jet::{eval_jet, eval_value, Env, FunctionDef, Jet, Scalar};
use crate::scalar::{InputMode, ScalarProblem, ScalarWeights, Variable};

/// Where and how to evaluate.
#[derive(Clone, Debug, Default)]
pub struct Setup {
    pub params: HashMap<String, Complex64>,
    pub defs: HashMap<String, FunctionDef>,
    /// Lower limit of the `c_m` quadratures.
    pub anchor: f64,
    /// `c_m(anchor)` for m = 1, 2, ...; missing entries are 0.
    pub offsets: Vec<Complex64>,
}

impl Setup {
    pub fn param(mut self, name: &str, v: f64) -> Setup {
        self.params.insert(name.to_string(), Complex64::new(v, 0.0));
        self
    }

    pub fn define(mut self, name: &str, param: &str, body: Expr) -> Setup {
        self.defs.insert(name.to_string(), FunctionDef { param: param.to_string(), body });
        self
    }

    fn env<T: Scalar>(&self, var: &str, point: T) -> Env<T> {
        let mut env = Env::new(var, point);
        for (k, v) in &self.params {
            env.params.insert(k.clone(), T::from_f64(v.re).add(&T::i().mul(&T::from_f64(v.im))));
        }
        env.defs = self.defs.clone();
        env
    }
}

fn half() -> BigRational {
    BigRational::new(1.into(), 2.into())
}

fn c<T: Scalar>(x: f64) -> T {
    T::from_f64(x)
}

fn konst<T: Scalar>(v: T, len: usize) -> Jet<T> {
    Jet::constant(v, len)
}

fn eps0_jet<T: Scalar>(qsq: &Jet<T>, af: &Jet<T>) -> Result<Jet<T>> {
    let d1 = qsq.derivative();
    let d2 = d1.derivative();
    let r = d1.div(qsq)?;
    let t1 = r.mul(&r).scale(&c(5.0 / 16.0));
    let t2 = d2.div(qsq)?.scale(&c(0.25));
    t1.sub(&t2).add(af).div(qsq)
}

// ------------------------------------------------------------ scalar ----

/// `Y_0, Y_2, ..., Y_2nmax` at `x0`. General-mode problems need definitions
/// for `eps0` (and `Qsqr` in x mode) in `setup`.
pub fn scalar_corrections_jet<T: Scalar>(p: &ScalarProblem, setup: &Setup, x0: T) -> Result<Vec<T>> {
    scalar_corrections_jet_weighted(p, setup, x0, &ScalarWeights::default())
}

/// Same recurrence with altered constants (for mutation tests).
pub fn scalar_corrections_jet_weighted<T: Scalar>(
    p: &ScalarProblem,
    setup: &Setup,
    x0: T,
    w: &ScalarWeights,
) -> Result<Vec<T>> {
    let f = |r: &BigRational| c::<T>(r.to_f64().unwrap_or(f64::NAN));
    let (overall, slope_product, curvature, q_slope) = (f(&w.overall), f(&w.slope_product), f(&w.curvature), f(&w.q_slope));
    let var = p.variable.name();
    let env = setup.env(var, x0);
    let len = 2 * p.nmax + 3;
    let (qsq, eps0) = match p.input_mode {
        InputMode::Explicit => {
            let r = eval_jet(&p.r, &env, len + 2)?;
            let af = eval_jet(&p.af, &env, len + 2)?;
            let qsq = r.sub(&af);
            let e = eps0_jet(&qsq, &af)?;
            (qsq, e)
        }
        InputMode::General => {
            let v = Expr::symbol(var);
            let q = match p.variable {
                Variable::X => eval_jet(&Expr::opaque("Qsqr", 0, v.clone()), &env, len)?,
                Variable::Zeta => konst(T::one(), len + 1),
            };
            (q, eval_jet(&Expr::opaque("eps0", 0, v), &env, len)?)
        }
    };
    let eps0 = match &p.eps0_override {
        Some(e) => eval_jet(e, &env, len)?,
        None => eps0,
    };
    let q = match p.variable {
        Variable::X => qsq,
        Variable::Zeta => konst(T::one(), len + 1),
    };
    let qm2 = konst(T::one(), q.len()).div(&q)?;
    let dq = q.derivative();
    let mut ys: Vec<Jet<T>> = vec![konst(T::one(), eps0.len())];
    for n in 1..=p.nmax {
        let m = 2 * n;
        let get = |k: usize| &ys[k / 2];
        let mut s1 = konst(T::zero(), eps0.len());
        let mut s2 = s1.clone();
        let mut s3 = s1.clone();
        for a in (0..=m - 2).step_by(2) {
            for b in (0..=m - 2).step_by(2) {
                if a + b == m {
                    s1 = s1.add(&get(a).mul(get(b)));
                }
                if a + b == m - 2 {
                    let ya = get(a);
                    let yb = get(b);
                    let (dya, dyb) = (ya.derivative(), yb.derivative());
                    let d2yb = dyb.derivative();
                    let t = eps0.mul(ya).mul(yb);
                    let t = t.add(&qm2.mul(&dya).mul(&dyb).scale(&slope_product));
                    let br = d2yb.sub(&qm2.mul(&dq).mul(&dyb).scale(&q_slope));
                    let t = t.sub(&ya.mul(&qm2).mul(&br).scale(&curvature));
                    s3 = s3.add(&t);
                }
                for g in (0..=m - 2).step_by(2) {
                    for d in (0..=m - 2).step_by(2) {
                        if a + b + g + d == m {
                            s2 = s2.add(&get(a).mul(get(b)).mul(get(g)).mul(get(d)));
                        }
                    }
                }
            }
        }
        ys.push(s1.sub(&s2).add(&s3).scale(&overall));
    }
    Ok(ys.into_iter().map(|j| j.c[0].clone()).collect())
}

// ----------------------------------------------------------- coupled ----

/// Numeric counterpart of the symbolic series at one point.
#[derive(Clone, Debug)]
pub struct CoupledJetValues<T> {
    pub qsq: T,
    pub q: T,
    pub eps0: T,
    pub coef: T,
    pub den: T,
    pub s0v: [T; 2],
    /// Index m = 1..=mmax (index 0 unused).
    pub y: Vec<T>,
    pub cp: Vec<T>,
    pub c: Vec<T>,
    pub integrand: Vec<T>,
    pub bv: Vec<[T; 2]>,
}

type JV<T> = [Jet<T>; 2];

fn jdot<T: Scalar>(a: &JV<T>, b: &JV<T>) -> Jet<T> {
    a[0].mul(&b[0]).add(&a[1].mul(&b[1]))
}

fn jsc<T: Scalar>(k: &Jet<T>, v: &JV<T>) -> JV<T> {
    [k.mul(&v[0]), k.mul(&v[1])]
}

fn jadd<T: Scalar>(a: &JV<T>, b: &JV<T>) -> JV<T> {
    [a[0].add(&b[0]), a[1].add(&b[1])]
}

fn jsub<T: Scalar>(a: &JV<T>, b: &JV<T>) -> JV<T> {
    [a[0].sub(&b[0]), a[1].sub(&b[1])]
}

fn jd<T: Scalar>(a: &JV<T>) -> JV<T> {
    [a[0].derivative(), a[1].derivative()]
}

fn jconj<T: Scalar>(a: &JV<T>) -> JV<T> {
    [a[0].conj(), a[1].conj()]
}

/// Sign of `Q^2` at the `parrepls` point, computed from the raw entries.
/// Symbols not fixed by `parrepls` take their values from the setup.
fn sign_at_parrepls(p: &CoupledProblem, setup: &Setup) -> i8 {
    if let (Some(o), false) = (&p.overrides, p.automatic) {
        return o.sign_qsq;
    }
    let mut map = HashMap::new();
    for (k, v) in &p.parrepls {
        map.insert(k.as_str().into(), v.clone());
    }
    let env: Env<Complex64> = setup.env("", Complex64::new(0.0, 0.0));
    let ev = |e: &Expr| -> Option<Complex64> { eval_value(&e.substitute(&map), &env).ok() };
    let (Some(r11), Some(r12), Some(r21), Some(r22), Some(af)) = (ev(&p.r11), ev(&p.r12), ev(&p.r21), ev(&p.r22), ev(&p.af))
    else {
        return 1;
    };
    let g11 = r11 - af;
    let g22 = r22 - af;
    let delta = (g11 - g22) * (g11 - g22) + 4.0 * r12 * r21;
    let root = delta.sqrt();
    let qsq = match p.branch {
        Branch::Minus => (g11 + g22 - root) / 2.0,
        Branch::Plus => (g11 + g22 + root) / 2.0,
    };
    if qsq.im.abs() <= 1e-12 * qsq.re.abs().max(1.0) && qsq.re < 0.0 {
        -1
    } else {
        1
    }
}

struct Pipeline<'a> {
    p: &'a CoupledProblem,
    setup: &'a Setup,
    sign: i8,
    w: Weights,
}

/// Recurrence constants as doubles.
#[derive(Clone, Copy)]
struct Weights {
    overall: f64,
    gauge: f64,
    slope: f64,
    curvature: f64,
    slope_product: f64,
    extraction: f64,
    coef: f64,
}

impl From<&CoupledWeights> for Weights {
    fn from(w: &CoupledWeights) -> Self {
        let f = |r: &BigRational| r.to_f64().unwrap_or(f64::NAN);
        Weights {
            overall: f(&w.overall),
            gauge: f(&w.gauge),
            slope: f(&w.slope),
            curvature: f(&w.curvature),
            slope_product: f(&w.slope_product),
            extraction: f(&w.extraction),
            coef: f(&w.coef),
        }
    }
}

impl Pipeline<'_> {
    /// Runs orders 1..=upto at `x0`; `cval(m, x0)` supplies `c_m(x0)` for
    /// the non-simplified theories.
    fn run<T: Scalar>(
        &self,
        x0: T,
        upto: usize,
        cmax: usize,
        cval: &mut dyn FnMut(usize, &T) -> Result<T>,
    ) -> Result<CoupledJetValues<T>> {
        let p = self.p;
        let env = self.setup.env("x", x0.clone());
        let len = 2 * upto + 6;
        let ev = |e: &Expr| eval_jet(e, &env, len);
        let af = ev(&p.af)?;
        let g11 = ev(&p.r11)?.sub(&af);
        let g12 = ev(&p.r12)?;
        let g21 = ev(&p.r21)?;
        let g22 = ev(&p.r22)?.sub(&af);
        let root = match (&p.overrides, p.automatic) {
            (Some(o), false) => ev(&o.sqrt_del)?,
            _ => {
                let d = g11.sub(&g22);
                let delta = d.mul(&d).add(&g12.mul(&g21).scale(&c(4.0)));
                delta.pow_rational(&half())?
            }
        };
        let tr = g11.add(&g22);
        let qsq = match p.branch {
            Branch::Minus => tr.sub(&root),
            Branch::Plus => tr.add(&root),
        }
        .scale(&c(0.5));
        let eps0 = match &p.eps0_override {
            Some(e) => ev(e)?,
            None => eps0_jet(&qsq, &af)?,
        };
        let q = if self.sign < 0 {
            qsq.neg().pow_rational(&half())?.scale(&T::i().neg())
        } else {
            qsq.pow_rational(&half())?
        };
        let one = konst(T::one(), len);
        let qm1 = one.div(&q)?;
        let qm2 = qm1.mul(&qm1);
        let dq = q.derivative();

        let ratio = qsq.sub(&g11).div(&g12)?;
        let g = ev(&p.g_factor)?;
        let mut s0: JV<T> = [g.clone(), g.mul(&ratio)];
        let mut asqr = jdot(&jconj(&s0), &s0);
        if p.normalize {
            let ms = asqr.pow_rational(&half())?;
            s0 = [s0[0].div(&ms)?, s0[1].div(&ms)?];
            asqr = konst(T::one(), len);
            let intg = jdot(&jconj(&s0), &jd(&s0));
            if p.integrate_theta && intg.c.iter().any(|v| v.abs() > 1e-10) {
                return Err(Error::InvalidProblem("the jet oracle does not evaluate the theta phase".into()));
            }
        }
        let cs0 = jconj(&s0);
        let spv: JV<T> = [cs0[1].neg(), cs0[0].clone()];
        let m1 = s0[0].mul(&cs0[0]);
        let m2 = s0[1].mul(&cs0[1]);
        let den = m1
            .mul(&g22.sub(&qsq))
            .add(&m2.mul(&g11.sub(&qsq)))
            .sub(&cs0[0].mul(&s0[1]).mul(&g12))
            .sub(&s0[0].mul(&cs0[1]).mul(&g21));
        let coef = qsq.div(&den)?.scale(&c(self.w.coef));
        let perp: JV<T> = [s0[1].neg(), s0[0].clone()];
        let ds0 = jd(&s0);
        let ccds0 = jconj(&ds0);

        let theory = p.effective_theory();
        let mut ys: Vec<Jet<T>> = vec![konst(T::one(), len)];
        let mut sv: Vec<JV<T>> = vec![s0.clone()];
        let mut bv: Vec<JV<T>> = vec![[konst(T::zero(), len), konst(T::zero(), len)], jsc(&qm1.scale(&T::i()), &ds0)];
        let mut out = CoupledJetValues {
            qsq: qsq.c[0].clone(),
            q: q.c[0].clone(),
            eps0: eps0.c[0].clone(),
            coef: coef.c[0].clone(),
            den: den.c[0].clone(),
            s0v: [s0[0].c[0].clone(), s0[1].c[0].clone()],
            y: vec![T::one()],
            cp: vec![T::zero()],
            c: vec![T::zero()],
            integrand: vec![T::zero()],
            bv: vec![[T::zero(), T::zero()]],
        };
        for m in 2..=upto + 1 {
            let m1 = m - 1;
            let b = bv[m1].clone();
            let cp = coef.mul(&jdot(&perp, &b));
            let (integrand, cm) = if theory == Theory::Simplified {
                (konst(T::zero(), cp.len()), konst(T::zero(), cp.len()))
            } else {
                let x = cp.mul(&jdot(&ccds0, &spv));
                let mut it = if m1 % 2 == 1 && theory == Theory::Wronskian {
                    x.add(&x.conj())
                } else {
                    x.sub(&x.conj())
                };
                for alpha in 1..m1 {
                    let t = jdot(&jconj(&sv[alpha]), &jd(&sv[m1 - alpha]));
                    it = if alpha % 2 == 1 && theory == Theory::Wronskian { it.add(&t) } else { it.sub(&t) };
                }
                let c0 = if m1 <= cmax { cval(m1, &x0)? } else { T::zero() };
                let cm = it.integral(c0);
                (it, cm)
            };
            let svm = jadd(&jsc(&cp, &spv), &jsc(&cm, &s0));
            let y = match p.hermitian {
                Hermiticity::Hermitian => jdot(&cs0, &b).div(&asqr)?,
                Hermiticity::NonHermitian => {
                    let t = qm2.mul(&cp).mul(&g12).mul(&asqr).div(&s0[0].scale(&c(self.w.extraction)))?;
                    t.add(&b[0]).div(&s0[0])?
                }
            };
            out.y.push(y.c[0].clone());
            out.cp.push(cp.c[0].clone());
            out.c.push(cm.c[0].clone());
            out.integrand.push(integrand.c[0].clone());
            out.bv.push([b[0].c[0].clone(), b[1].c[0].clone()]);
            ys.push(y);
            sv.push(svm);
            if m == upto + 1 {
                break;
            }
            // b_m from the six sums
            let n = len;
            let zero = || konst(T::zero(), n);
            let mut s1 = [zero(), zero()];
            let mut s2 = [zero(), zero()];
            let mut s3 = zero();
            let mut s4 = zero();
            let mut s5 = [zero(), zero()];
            let mut s6 = [zero(), zero()];
            for a in 0..m {
                for bb in 0..m {
                    if a + bb == m && a >= 1 && bb >= 1 {
                        s3 = s3.add(&ys[a].mul(&ys[bb]));
                    }
                    for s in 1..m {
                        if a + bb + s == m {
                            let inner = jadd(&sv[s], &jsub(&jsc(&ys[s], &sv[0]), &bv[s]).map(|j| j.scale(&c(self.w.gauge))));
                            s1 = jadd(&s1, &jsc(&ys[a].mul(&ys[bb]), &inner));
                        }
                    }
                    for g in 0..m {
                        for d in 0..m {
                            if a + bb + g + d == m {
                                s4 = s4.add(&ys[a].mul(&ys[bb]).mul(&ys[g]).mul(&ys[d]));
                            }
                            for s in 1..m {
                                if a + bb + g + d + s == m {
                                    let k = ys[a].mul(&ys[bb]).mul(&ys[g]).mul(&ys[d]);
                                    s2 = jadd(&s2, &jsc(&k, &sv[s]));
                                }
                            }
                        }
                        for s in 0..m {
                            if a + bb + g + s == m - 1 {
                                let k = ys[a].mul(&ys[bb]).mul(&ys[g]).mul(&qm1);
                                s5 = jadd(&s5, &jsc(&k, &jd(&sv[s])));
                            }
                        }
                    }
                }
            }
            for a in 0..=m - 2 {
                for bb in 0..=m - 2 {
                    for s in 0..=m - 2 {
                        if a + bb + s != m - 2 {
                            continue;
                        }
                        let (ya, yb) = (&ys[a], &ys[bb]);
                        let (dya, dyb) = (ya.derivative(), yb.derivative());
                        let d2yb = dyb.derivative();
                        let dsv = jd(&sv[s]);
                        let d2sv = jd(&dsv);
                        let qd = qm1.mul(&dq);
                        let mut t = [zero(), zero()];
                        for k in 0..2 {
                            let inner = qm2.mul(&d2sv[k].sub(&qd.mul(&dsv[k]))).add(&eps0.mul(&sv[s][k]));
                            let x = yb.mul(&inner);
                            let x = x.sub(&qm2.mul(&dyb).mul(&dsv[k]));
                            let x = x.sub(&qm2.mul(&d2yb.sub(&qd.mul(&dyb))).mul(&sv[s][k]).scale(&c(self.w.curvature)));
                            t[k] = ya.mul(&x).add(&qm2.mul(&dya).mul(&dyb).mul(&sv[s][k]).scale(&c(self.w.slope_product)));
                        }
                        s6 = jadd(&s6, &t);
                    }
                }
            }
            let mid = jsc(&s3.sub(&s4), &sv[0]);
            let tot = jadd(&jadd(&jadd(&jsub(&s1, &s2), &mid), &s5.map(|j| j.scale(&T::i().mul(&c(self.w.slope))))), &s6);
            bv.push(tot.map(|j| j.scale(&c(self.w.overall))));
        }
        Ok(out)
    }
}

/// Values of the coupled pipeline at the real point `x0`.
pub fn coupled_corrections_jet(p: &CoupledProblem, setup: &Setup, x0: f64) -> Result<CoupledJetValues<Complex64>> {
    coupled_corrections_jet_weighted(p, setup, x0, &CoupledWeights::default())
}

/// Same pipeline with altered recurrence constants (for mutation tests).
pub fn coupled_corrections_jet_weighted(
    p: &CoupledProblem,
    setup: &Setup,
    x0: f64,
    w: &CoupledWeights,
) -> Result<CoupledJetValues<Complex64>> {
    p.validate()?;
    let pipe = Pipeline { p, setup, sign: sign_at_parrepls(p, setup), w: w.into() };
    let cs = c_values(&pipe, x0)?;
    let mut cval = |m: usize, _: &Complex64| -> Result<Complex64> { Ok(cs[m]) };
    pipe.run(Complex64::new(x0, 0.0), p.mmax, p.mmax, &mut cval)
}

/// High-precision variant; the `c_m` values still come from a double
/// precision integration.
pub fn coupled_corrections_jet_hp<T: Scalar>(p: &CoupledProblem, setup: &Setup, x0: T) -> Result<CoupledJetValues<T>> {
    p.validate()?;
    let pipe = Pipeline { p, setup, sign: sign_at_parrepls(p, setup), w: (&CoupledWeights::default()).into() };
    let cs = c_values(&pipe, x0.to_c64().re)?;
    let mut cval = |m: usize, _: &T| -> Result<T> { Ok(T::from_f64(cs[m].re).add(&T::i().mul(&T::from_f64(cs[m].im)))) };
    pipe.run(x0, p.mmax, p.mmax, &mut cval)
}

/// `c_1(x) .. c_mmax(x)` (index 0 unused). Each `c_m'` depends only on the
/// lower `c_k`, so the whole set is integrated as one ODE system from the
/// anchor (adaptive Dormand-Prince 5(4)).
fn c_values(pipe: &Pipeline<'_>, x: f64) -> Result<Vec<Complex64>> {
    let n = pipe.p.mmax;
    let zero = Complex64::new(0.0, 0.0);
    if pipe.p.effective_theory() == Theory::Simplified || n == 0 {
        return Ok(vec![zero; n + 1]);
    }
    let mut init = vec![zero; n + 1];
    for (k, v) in pipe.setup.offsets.iter().enumerate().take(n) {
        init[k + 1] = *v;
    }
    let rhs = |t: f64, c: &[Complex64]| -> Result<Vec<Complex64>> {
        let mut cv = |m: usize, _: &Complex64| -> Result<Complex64> { Ok(c[m]) };
        let v = pipe.run(Complex64::new(t, 0.0), n, n, &mut cv)?;
        let mut d = v.integrand;
        d.resize(n + 1, zero);
        Ok(d)
    };
    dopri5(rhs, pipe.setup.anchor, x, init, 1e-13)
}

/// Dormand-Prince 5(4) with embedded error control on a complex state.
pub fn dopri5(
    mut f: impl FnMut(f64, &[Complex64]) -> Result<Vec<Complex64>>,
    a: f64,
    b: f64,
    y0: Vec<Complex64>,
    tol: f64,
) -> Result<Vec<Complex64>> {
    const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
    const A: [[f64; 6]; 7] = [
        [0.0; 6],
        [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
        [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
        [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
        [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
        [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
    ];
    const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
    const B4: [f64; 7] =
        [5179.0 / 57600.0, 0.0, 7571.0 / 16695.0, 393.0 / 640.0, -92097.0 / 339200.0, 187.0 / 2100.0, 1.0 / 40.0];
    let span = b - a;
    if span == 0.0 {
        return Ok(y0);
    }
    let dir = span.signum();
    let mut t = a;
    let mut y = y0;
    let mut h = span / 16.0;
    let mut steps = 0;
    while (b - t) * dir > 0.0 {
        steps += 1;
        if steps > 20_000 {
            return Err(Error::SingularPoint(format!("integration stalled near {t}")));
        }
        if (t + h - b) * dir > 0.0 {
            h = b - t;
        }
        let mut k: Vec<Vec<Complex64>> = Vec::with_capacity(7);
        for s in 0..7 {
            let ys: Vec<Complex64> = (0..y.len())
                .map(|j| y[j] + (0..s).map(|r| k[r][j] * A[s][r]).sum::<Complex64>() * h)
                .collect();
            k.push(f(t + C[s] * h, &ys)?);
        }
        let y5: Vec<Complex64> =
            (0..y.len()).map(|j| y[j] + (0..7).map(|r| k[r][j] * B5[r]).sum::<Complex64>() * h).collect();
        let err = (0..y.len())
            .map(|j| {
                let e = (0..7).map(|r| k[r][j] * (B5[r] - B4[r])).sum::<Complex64>() * h;
                e.norm() / (tol * (1.0 + y[j].norm().max(y5[j].norm())))
            })
            .fold(0.0, f64::max);
        if !err.is_finite() {
            h /= 4.0;
            continue;
        }
        if err <= 1.0 {
            t += h;
            y = y5;
        }
        h *= if err == 0.0 { 4.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 4.0) };
    }
    Ok(y)
}

/// Numeric value of `e` at `x0` with the setup's parameters and
/// definitions.
pub fn value_at(e: &Expr, setup: &Setup, var: &str, x0: f64) -> Result<Complex64> {
    eval_value(e, &setup.env(var, Complex64::new(x0, 0.0)))
}
