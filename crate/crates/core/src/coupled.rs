//! Coupled pairs of equations `u'' + R u = 0` with a 2x2 matrix `R`:
//! eigen-split, eigenvector frame, the `b_m` recurrence and extraction of
//! `cp_m`, `c_m`, `s_m`, `Y_m`.

use std::collections::HashMap;

use cpu_time::ProcessTime;
use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;

use crate::domain::{Domain, NfDomain, TreeDomain};
use crate::error::{Error, Result};
use crate::expr::{Assumptions, Expr};
use crate::jet::{self, Env};
use crate::render::RenderSpec;
use crate::scalar::{eps0_from_qsq, Timings};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Branch {
    Minus,
    Plus,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Hermiticity {
    Hermitian,
    NonHermitian,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Theory {
    Simplified,
    Fulling,
    Wronskian,
}

impl Theory {
    pub fn letter(self) -> char {
        match self {
            Theory::Simplified => 's',
            Theory::Fulling => 'f',
            Theory::Wronskian => 'w',
        }
    }
}

/// Values supplied by hand when the eigen-split is not automatic.
#[derive(Clone, Debug)]
pub struct Overrides {
    pub delta: Expr,
    pub sqrt_del: Expr,
    pub sign_qsq: i8,
}

#[derive(Clone, Debug)]
pub struct CoupledProblem {
    pub r11: Expr,
    pub r12: Expr,
    pub r21: Expr,
    pub r22: Expr,
    pub af: Expr,
    pub mmax: usize,
    pub branch: Branch,
    pub automatic: bool,
    pub parrepls: Vec<(String, Expr)>,
    pub overrides: Option<Overrides>,
    pub g_factor: Expr,
    pub normalize: bool,
    pub integrate_theta: bool,
    pub hermitian: Hermiticity,
    pub theory: Theory,
    pub trig_expand: bool,
    pub render: RenderSpec,
    pub assumptions: Assumptions,
    pub eps0_override: Option<Expr>,
    /// Orders above this are kept unsimplified (tree arithmetic); `None`
    /// simplifies everything.
    pub simplify_upto: Option<usize>,
}

impl CoupledProblem {
    pub fn new(r11: Expr, r12: Expr, r21: Expr, r22: Expr) -> CoupledProblem {
        CoupledProblem {
            r11,
            r12,
            r21,
            r22,
            af: Expr::zero(),
            mmax: 2,
            branch: Branch::Minus,
            automatic: true,
            parrepls: Vec::new(),
            overrides: None,
            g_factor: Expr::one(),
            normalize: false,
            integrate_theta: false,
            hermitian: Hermiticity::Hermitian,
            theory: Theory::Simplified,
            trig_expand: false,
            render: RenderSpec::default(),
            assumptions: Assumptions::new(),
            eps0_override: None,
            simplify_upto: None,
        }
    }

    /// Theory actually used: non-hermitian runs are always simplified.
    pub fn effective_theory(&self) -> Theory {
        match self.hermitian {
            Hermiticity::Hermitian => self.theory,
            Hermiticity::NonHermitian => Theory::Simplified,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.mmax == 0 {
            return Err(Error::InvalidProblem("mmax must be at least 1".into()));
        }
        if !self.automatic && self.overrides.is_none() {
            return Err(Error::InvalidProblem("non-automatic runs need Delta, sqrtDel and signQsq".into()));
        }
        if let Some(o) = &self.overrides {
            if o.sign_qsq != 1 && o.sign_qsq != -1 {
                return Err(Error::InvalidProblem("signQsq must be 1 or -1".into()));
            }
        }
        if self.automatic && self.parrepls.is_empty() {
            return Err(Error::SignUndeterminable("automatic run without parrepls".into()));
        }
        Ok(())
    }
}

/// Numeric weights of the `b_m` recurrence and of the extraction step. Only
/// the defaults are correct; tests perturb them one at a time.
#[derive(Clone, Debug, PartialEq)]
pub struct CoupledWeights {
    pub overall: BigRational,
    /// Factor of `(Y_s s_0 - b_s)` in the first sum.
    pub gauge: BigRational,
    /// Factor of `i sum5`.
    pub slope: BigRational,
    /// Weight of `(Y_b'' - ...) s_s` in the last sum.
    pub curvature: BigRational,
    /// Weight of `Q^-2 Y_a' Y_b' s_s`.
    pub slope_product: BigRational,
    /// Weight in the non-hermitian extraction `Q^-2 cp G12 asqr / (w s01)`.
    pub extraction: BigRational,
    /// Overall factor of `coef`.
    pub coef: BigRational,
}

impl Default for CoupledWeights {
    fn default() -> Self {
        let r = |n: i64, d: i64| BigRational::new(BigInt::from(n), BigInt::from(d));
        CoupledWeights {
            overall: r(1, 2),
            gauge: r(2, 1),
            slope: r(2, 1),
            curvature: r(1, 2),
            slope_product: r(3, 4),
            extraction: r(2, 1),
            coef: r(-2, 1),
        }
    }
}

#[derive(Clone, Debug)]
pub struct EigenFrame {
    pub delta: Expr,
    pub sqrt_del: Expr,
    pub qsq: Expr,
    pub sign_qsq: i8,
    pub q: Expr,
    pub eps0: Expr,
    pub s02os01: Expr,
    pub s0v: [Expr; 2],
    pub spv: [Expr; 2],
    pub asqr: Expr,
    /// Gauge integrand after normalization (`None` without normalization).
    pub intg: Option<Expr>,
    pub theta: Option<Expr>,
    pub den: Expr,
    pub coef: Expr,
}

/// One order of the series.
#[derive(Clone, Debug)]
pub struct Order {
    pub m: usize,
    pub bv: [Expr; 2],
    pub cp: Expr,
    pub c: Expr,
    pub sv: [Expr; 2],
    pub y: Expr,
    pub integrand: Expr,
}

#[derive(Clone, Debug)]
pub struct CoupledCorrectionSeries {
    pub frame: EigenFrame,
    pub orders: Vec<Order>,
    pub timings: Timings,
    pub non_rigorous: bool,
}

impl CoupledCorrectionSeries {
    pub fn order(&self, m: usize) -> &Order {
        &self.orders[m - 1]
    }
}

type V2<V> = [V; 2];

struct Frame<V> {
    g: [[V; 2]; 2],
    qsq: V,
    q: V,
    qm1: V,
    qm2: V,
    dq: V,
    eps0: V,
    s0v: V2<V>,
    ds0v: V2<V>,
    spv: V2<V>,
    asqr: V,
    coef: V,
    public: EigenFrame,
}

/// Evaluates `e` under the bindings; `None` when not numerically decidable.
fn numeric_under(e: &Expr, parrepls: &[(String, Expr)]) -> Option<Complex64> {
    let mut map = HashMap::new();
    for (k, v) in parrepls {
        map.insert(k.as_str().into(), v.clone());
    }
    let substituted = e.substitute(&map);
    let env: Env<Complex64> = Env::new("", Complex64::new(0.0, 0.0));
    jet::eval_value(&substituted, &env).ok()
}

/// Sign of `Q^2` under `parrepls`: -1 when it is a negative real, else +1
/// (including when the evaluation is inconclusive).
pub fn sign_under(qsq: &Expr, parrepls: &[(String, Expr)]) -> i8 {
    match numeric_under(qsq, parrepls) {
        Some(v) if v.im.abs() <= 1e-12 * v.re.abs().max(1.0) && v.re < 0.0 => -1,
        _ => 1,
    }
}

fn frame<D: Domain>(p: &CoupledProblem, dom: &mut D, w: &CoupledWeights) -> Result<Frame<D::V>> {
    let af = dom.lift(&p.af)?;
    let r11 = dom.lift(&p.r11)?;
    let r22 = dom.lift(&p.r22)?;
    let g11 = dom.sub(&r11, &af);
    let g12 = dom.lift(&p.r12)?;
    let g21 = dom.lift(&p.r21)?;
    let g22 = dom.sub(&r22, &af);

    let (delta, sqrt_del) = match (&p.overrides, p.automatic) {
        (Some(o), false) => (dom.lift(&o.delta)?, dom.lift(&o.sqrt_del)?),
        _ => {
            let d = dom.sub(&g11, &g22);
            let d2 = dom.mul(&d, &d);
            let off = dom.mul(&g12, &g21);
            let off = dom.scale(&off, &BigRational::from_integer(4.into()));
            let delta = dom.add(&d2, &off);
            let root = dom.sqrt(&delta)?;
            (delta, root)
        }
    };
    if dom.is_zero(&delta)? {
        return Err(Error::Degenerate("Delta vanishes identically: coincident eigenvalues".into()));
    }
    let trace = dom.add(&g11, &g22);
    let qsq = match p.branch {
        Branch::Minus => dom.sub(&trace, &sqrt_del),
        Branch::Plus => dom.add(&trace, &sqrt_del),
    };
    let qsq = dom.scale(&qsq, &BigRational::new(1.into(), 2.into()));
    let qsq_e = dom.to_expr(&qsq);
    let sign_qsq = match (&p.overrides, p.automatic) {
        (Some(o), false) => o.sign_qsq,
        _ => sign_under(&qsq_e, &p.parrepls),
    };
    let eps0 = match &p.eps0_override {
        Some(e) => dom.lift(e)?,
        None => eps0_from_qsq(dom, &qsq, &af)?,
    };
    let q = if sign_qsq < 0 {
        let neg = dom.neg(&qsq);
        let r = dom.sqrt(&neg)?;
        let i = dom.i();
        let t = dom.mul(&i, &r);
        dom.neg(&t)
    } else {
        dom.sqrt(&qsq)?
    };
    let one = dom.one();
    let qm1 = dom.div(&one, &q)?;
    let qm2 = dom.mul(&qm1, &qm1);
    let dq = dom.diff(&q)?;

    if dom.is_zero(&g12)? {
        return Err(Error::InvalidProblem("R12 vanishes identically; the eigenvector ratio is undefined".into()));
    }
    let t = dom.sub(&qsq, &g11);
    let ratio = dom.div(&t, &g12)?;
    let g = dom.lift(&p.g_factor)?;
    let mut s01 = g.clone();
    let mut s02 = dom.mul(&g, &ratio);
    let mut asqr = abs2_sum(dom, &s01, &s02)?;
    let mut intg_e = None;
    let mut theta_e = None;
    if p.normalize {
        let ms = dom.sqrt(&asqr)?;
        s01 = dom.div(&s01, &ms)?;
        s02 = dom.div(&s02, &ms)?;
        asqr = dom.one();
        let c1 = dom.cc(&s01)?;
        let c2 = dom.cc(&s02)?;
        let d1 = dom.diff(&s01)?;
        let d2 = dom.diff(&s02)?;
        let a = dom.mul(&c1, &d1);
        let b = dom.mul(&c2, &d2);
        let intg = dom.add(&a, &b);
        intg_e = Some(dom.to_expr(&intg));
        if !dom.is_zero(&intg)? && p.integrate_theta {
            let integral = dom.integrate(&intg)?;
            let i = dom.i();
            let theta = dom.mul(&i, &integral);
            let th = dom.to_expr(&theta);
            let phasf = th.cos() + Expr::i() * th.sin();
            let phasf = dom.lift(&phasf)?;
            s01 = dom.mul(&s01, &phasf);
            s02 = dom.mul(&s02, &phasf);
            theta_e = Some(th);
        }
    }
    let c1 = dom.cc(&s01)?;
    let c2 = dom.cc(&s02)?;
    let spv = [dom.neg(&c2), c1.clone()];

    let m1 = dom.mul(&s01, &c1);
    let m2 = dom.mul(&s02, &c2);
    let a = dom.sub(&g22, &qsq);
    let b = dom.sub(&g11, &qsq);
    let t1 = dom.mul(&m1, &a);
    let t2 = dom.mul(&m2, &b);
    let t3 = dom.product(&[&c1, &s02, &g12]);
    let t4 = dom.product(&[&s01, &c2, &g21]);
    let den = dom.add(&t1, &t2);
    let den = dom.sub(&den, &t3);
    let den = dom.sub(&den, &t4);
    if dom.is_zero(&den)? {
        return Err(Error::ZeroDenominator);
    }
    let coef = dom.div(&qsq, &den)?;
    let coef = dom.scale(&coef, &w.coef);
    let ds0v = [dom.diff(&s01)?, dom.diff(&s02)?];

    let public = EigenFrame {
        delta: dom.to_expr(&delta),
        sqrt_del: dom.to_expr(&sqrt_del),
        qsq: qsq_e,
        sign_qsq,
        q: dom.to_expr(&q),
        eps0: dom.to_expr(&eps0),
        s02os01: dom.to_expr(&ratio),
        s0v: [dom.to_expr(&s01), dom.to_expr(&s02)],
        spv: [dom.to_expr(&spv[0]), dom.to_expr(&spv[1])],
        asqr: dom.to_expr(&asqr),
        intg: intg_e,
        theta: theta_e,
        den: dom.to_expr(&den),
        coef: dom.to_expr(&coef),
    };
    Ok(Frame {
        g: [[g11, g12], [g21, g22]],
        qsq,
        q,
        qm1,
        qm2,
        dq,
        eps0,
        s0v: [s01, s02],
        ds0v,
        spv,
        asqr,
        coef,
        public,
    })
}

fn abs2_sum<D: Domain>(dom: &mut D, a: &D::V, b: &D::V) -> Result<D::V> {
    let ca = dom.cc(a)?;
    let cb = dom.cc(b)?;
    let x = dom.mul(a, &ca);
    let y = dom.mul(b, &cb);
    Ok(dom.add(&x, &y))
}

fn dot<D: Domain>(dom: &mut D, a: &V2<D::V>, b: &V2<D::V>) -> D::V {
    let x = dom.mul(&a[0], &b[0]);
    let y = dom.mul(&a[1], &b[1]);
    dom.add(&x, &y)
}

fn vscale<D: Domain>(dom: &mut D, c: &D::V, v: &V2<D::V>) -> V2<D::V> {
    [dom.mul(c, &v[0]), dom.mul(c, &v[1])]
}

fn vadd<D: Domain>(dom: &mut D, a: &V2<D::V>, b: &V2<D::V>) -> V2<D::V> {
    [dom.add(&a[0], &b[0]), dom.add(&a[1], &b[1])]
}

fn vsub<D: Domain>(dom: &mut D, a: &V2<D::V>, b: &V2<D::V>) -> V2<D::V> {
    [dom.sub(&a[0], &b[0]), dom.sub(&a[1], &b[1])]
}

fn vdiff<D: Domain>(dom: &mut D, a: &V2<D::V>) -> Result<V2<D::V>> {
    Ok([dom.diff(&a[0])?, dom.diff(&a[1])?])
}

fn vzero<D: Domain>(dom: &mut D) -> V2<D::V> {
    [dom.zero(), dom.zero()]
}

/// Shared state of the `b_m` recurrence: vector `s_k` and scalar `Y_k`
/// sequences with cached first and second derivatives. Works for both the
/// concrete pipeline (true 2-vectors) and the abstract one (where the second
/// component is unused and identically zero).
pub(crate) struct BState<V> {
    pub y: Vec<V>,
    pub dy: Vec<V>,
    pub d2y: Vec<V>,
    pub sv: Vec<V2<V>>,
    pub dsv: Vec<V2<V>>,
    pub d2sv: Vec<V2<V>>,
    /// `bv[0]` is a placeholder.
    pub bv: Vec<V2<V>>,
}

pub(crate) struct BConst<'a, V> {
    pub qm1: &'a V,
    pub qm2: &'a V,
    pub dq: &'a V,
    pub eps0: &'a V,
}

/// `bv[m]` from all lower orders.
pub(crate) fn b_step<D: Domain>(
    dom: &mut D,
    st: &BState<D::V>,
    k: &BConst<'_, D::V>,
    m: usize,
    w: &CoupledWeights,
) -> Result<V2<D::V>> {
    let y = &st.y;
    // sum1: a+b+s = m, s >= 1
    let mut sum1 = vzero(dom);
    for s in 1..m {
        for a in 0..m {
            if a + s > m {
                continue;
            }
            let b = m - a - s;
            if b > m - 1 {
                continue;
            }
            let yy = dom.mul(&y[a], &y[b]);
            if dom.is_zero(&yy)? {
                continue;
            }
            let ys0 = vscale(dom, &y[s], &st.sv[0]);
            let corr = vsub(dom, &ys0, &st.bv[s]);
            let corr = [dom.scale(&corr[0], &w.gauge), dom.scale(&corr[1], &w.gauge)];
            let inner = vadd(dom, &st.sv[s], &corr);
            let t = vscale(dom, &yy, &inner);
            sum1 = vadd(dom, &sum1, &t);
        }
    }
    // y4[n] = sum over a+b+g+d = n of Y_a Y_b Y_g Y_d, indices <= m-1
    let quad = |dom: &mut D, n: usize| -> D::V {
        let mut acc = dom.zero();
        for a in 0..=n.min(m - 1) {
            for b in 0..=(n - a).min(m - 1) {
                for g in 0..=(n - a - b).min(m - 1) {
                    let d = n - a - b - g;
                    if d > m - 1 {
                        continue;
                    }
                    let t = dom.product(&[&y[a], &y[b], &y[g], &y[d]]);
                    acc = dom.add(&acc, &t);
                }
            }
        }
        acc
    };
    // sum2: a+b+g+d+s = m, s >= 1
    let mut sum2 = vzero(dom);
    for s in 1..m {
        let q4 = quad(dom, m - s);
        let t = vscale(dom, &q4, &st.sv[s]);
        sum2 = vadd(dom, &sum2, &t);
    }
    // sum3: a+b = m, a,b >= 1
    let mut sum3 = dom.zero();
    for a in 1..m {
        let t = dom.mul(&y[a], &y[m - a]);
        sum3 = dom.add(&sum3, &t);
    }
    let sum4 = quad(dom, m);
    // sum5: a+b+g+s = m-1
    let mut sum5 = vzero(dom);
    for s in 0..m {
        let n = m - 1 - s;
        let mut y3 = dom.zero();
        for a in 0..=n {
            for b in 0..=(n - a) {
                let g = n - a - b;
                let t = dom.product(&[&y[a], &y[b], &y[g]]);
                y3 = dom.add(&y3, &t);
            }
        }
        let c = dom.mul(&y3, k.qm1);
        let t = vscale(dom, &c, &st.dsv[s]);
        sum5 = vadd(dom, &sum5, &t);
    }
    // sum6: a+b+s = m-2
    let mut sum6 = vzero(dom);
    for a in 0..=m - 2 {
        for b in 0..=(m - 2 - a) {
            let s = m - 2 - a - b;
            let mut term = vzero(dom);
            for c in 0..2 {
                let qd = dom.mul(k.qm1, k.dq);
                let t = dom.mul(&qd, &st.dsv[s][c]);
                let inner = dom.sub(&st.d2sv[s][c], &t);
                let inner = dom.mul(k.qm2, &inner);
                let e = dom.mul(k.eps0, &st.sv[s][c]);
                let inner = dom.add(&inner, &e);
                let part1 = dom.mul(&y[b], &inner);
                let part2 = dom.product(&[k.qm2, &st.dy[b], &st.dsv[s][c]]);
                let t = dom.mul(&qd, &st.dy[b]);
                let br = dom.sub(&st.d2y[b], &t);
                let part3 = dom.product(&[k.qm2, &br, &st.sv[s][c]]);
                let part3 = dom.scale(&part3, &w.curvature);
                let x = dom.sub(&part1, &part2);
                let x = dom.sub(&x, &part3);
                let x = dom.mul(&y[a], &x);
                let z = dom.product(&[k.qm2, &st.dy[a], &st.dy[b], &st.sv[s][c]]);
                let z = dom.scale(&z, &w.slope_product);
                term[c] = dom.add(&x, &z);
            }
            sum6 = vadd(dom, &sum6, &term);
        }
    }
    let d34 = dom.sub(&sum3, &sum4);
    let mid = vscale(dom, &d34, &st.sv[0]);
    let i = dom.i();
    let i2 = dom.scale(&i, &w.slope);
    let s5 = vscale(dom, &i2, &sum5);
    let mut tot = vsub(dom, &sum1, &sum2);
    tot = vadd(dom, &tot, &mid);
    tot = vadd(dom, &tot, &s5);
    tot = vadd(dom, &tot, &sum6);
    Ok([dom.scale(&tot[0], &w.overall), dom.scale(&tot[1], &w.overall)])
}

pub fn coupled_corrections(p: &CoupledProblem) -> Result<CoupledCorrectionSeries> {
    coupled_corrections_weighted(p, &CoupledWeights::default())
}

/// Chooses the arithmetic from `simplify_upto`.
pub fn coupled_corrections_weighted(p: &CoupledProblem, w: &CoupledWeights) -> Result<CoupledCorrectionSeries> {
    match p.simplify_upto {
        None => coupled_corrections_in(p, &mut NfDomain::new("x", p.assumptions.clone()), w),
        Some(k) => coupled_corrections_in(p, &mut TreeDomain::new("x", p.assumptions.clone(), k), w),
    }
}

pub fn coupled_corrections_in<D: Domain>(
    p: &CoupledProblem,
    dom: &mut D,
    w: &CoupledWeights,
) -> Result<CoupledCorrectionSeries> {
    p.validate()?;
    let t0 = ProcessTime::now();
    let f = frame(p, dom, w)?;
    let theory = p.effective_theory();

    let i = dom.i();
    let ib = dom.mul(&i, &f.qm1);
    let bv1 = vscale(dom, &ib, &f.ds0v);
    let d2s0 = vdiff(dom, &f.ds0v)?;
    let mut st = BState {
        y: vec![dom.one()],
        dy: vec![dom.zero()],
        d2y: vec![dom.zero()],
        sv: vec![f.s0v.clone()],
        dsv: vec![f.ds0v.clone()],
        d2sv: vec![d2s0],
        bv: vec![vzero(dom), bv1],
    };
    let cc_ds0 = [dom.cc(&f.ds0v[0])?, dom.cc(&f.ds0v[1])?];
    let cc_s0 = [dom.cc(&f.s0v[0])?, dom.cc(&f.s0v[1])?];
    let perp = [dom.neg(&f.s0v[1]), f.s0v[0].clone()];
    let mut raw: Vec<(D::V, D::V, D::V)> = Vec::new();

    for m in 2..=p.mmax + 1 {
        let m1 = m - 1;
        let bm = st.bv[m1].clone();
        let cp = dot(dom, &perp, &bm);
        let cp = dom.mul(&f.coef, &cp);
        let cp = dom.settle(cp, m1)?;

        let integrand = if theory == Theory::Simplified {
            dom.zero()
        } else {
            let d = dot(dom, &cc_ds0, &f.spv);
            let x = dom.mul(&cp, &d);
            let mut it = if m1 % 2 == 1 && theory == Theory::Wronskian {
                let r = dom.re(&x)?;
                dom.scale(&r, &BigRational::from_integer(2.into()))
            } else {
                let im = dom.im(&x)?;
                let t = dom.mul(&i, &im);
                dom.scale(&t, &BigRational::from_integer(2.into()))
            };
            for alpha in 1..m1 {
                let ca = [dom.cc(&st.sv[alpha][0])?, dom.cc(&st.sv[alpha][1])?];
                let t = dot(dom, &ca, &st.dsv[m1 - alpha]);
                if alpha % 2 == 1 && theory == Theory::Wronskian {
                    it = dom.add(&it, &t);
                } else {
                    it = dom.sub(&it, &t);
                }
            }
            dom.settle(it, m1)?
        };
        let c = if theory == Theory::Simplified {
            dom.zero()
        } else {
            dom.integrate(&integrand).map_err(|e| match e {
                Error::NotIntegrable(what) => Error::NotIntegrable(format!(
                    "{what} (order {m1}); rerun with theory = s"
                )),
                other => other,
            })?
        };
        let a = vscale(dom, &cp, &f.spv);
        let b = vscale(dom, &c, &f.s0v);
        let svm = vadd(dom, &a, &b);
        let svm = [dom.settle(svm[0].clone(), m1)?, dom.settle(svm[1].clone(), m1)?];

        let ym = match p.hermitian {
            Hermiticity::Hermitian => {
                let t = dot(dom, &cc_s0, &bm);
                dom.div(&t, &f.asqr)?
            }
            Hermiticity::NonHermitian => {
                let num = dom.product(&[&f.qm2, &cp, &f.g[0][1], &f.asqr]);
                let den = dom.scale(&f.s0v[0], &w.extraction);
                let t = dom.div(&num, &den)?;
                let t = dom.add(&t, &bm[0]);
                dom.div(&t, &f.s0v[0])?
            }
        };
        let ym = dom.settle(ym, m1)?;
        let dy = dom.diff(&ym)?;
        let d2y = dom.diff(&dy)?;
        st.y.push(ym);
        st.dy.push(dy);
        st.d2y.push(d2y);
        let dsv = vdiff(dom, &svm)?;
        let d2sv = vdiff(dom, &dsv)?;
        st.sv.push(svm);
        st.dsv.push(dsv);
        st.d2sv.push(d2sv);
        raw.push((cp, c, integrand));

        if m < p.mmax + 1 {
            let k = BConst { qm1: &f.qm1, qm2: &f.qm2, dq: &f.dq, eps0: &f.eps0 };
            let bv = b_step(dom, &st, &k, m, w)?;
            let bv = [dom.settle(bv[0].clone(), m)?, dom.settle(bv[1].clone(), m)?];
            st.bv.push(bv);
        }
    }
    let compute = t0.elapsed().as_secs_f64();
    let t1 = ProcessTime::now();
    let mut orders = Vec::with_capacity(p.mmax);
    for (k, (cp, c, it)) in raw.iter().enumerate() {
        let m = k + 1;
        orders.push(Order {
            m,
            bv: [dom.to_expr(&st.bv[m][0]), dom.to_expr(&st.bv[m][1])],
            cp: dom.to_expr(cp),
            c: dom.to_expr(c),
            sv: [dom.to_expr(&st.sv[m][0]), dom.to_expr(&st.sv[m][1])],
            y: dom.to_expr(&st.y[m]),
            integrand: dom.to_expr(it),
        });
    }
    let _ = (&f.q, &f.qsq);
    Ok(CoupledCorrectionSeries {
        frame: f.public,
        orders,
        timings: Timings { compute, simplify: t1.elapsed().as_secs_f64() },
        non_rigorous: dom.non_rigorous(),
    })
}

/// The abstract `b_m` recurrence: `Y_a` and `s_s` uninterpreted (named
/// `Y1, Y2, ...` and `sv0, sv1, ...`), `Q` uninterpreted in x mode and 1 in
/// zeta mode. Returns `b_1..b_mmax`.
pub fn abstract_b(mmax: usize, zeta: bool, y1_zero: bool) -> Result<Vec<Expr>> {
    abstract_b_weighted(mmax, zeta, y1_zero, &CoupledWeights::default())
}

pub fn abstract_b_weighted(mmax: usize, zeta: bool, y1_zero: bool, w: &CoupledWeights) -> Result<Vec<Expr>> {
    if mmax == 0 {
        return Err(Error::InvalidProblem("mmax must be at least 1".into()));
    }
    let var = if zeta { "z" } else { "x" };
    let mut dom = NfDomain::new(var, Assumptions::new());
    let v = Expr::symbol(var);
    let q = if zeta { dom.one() } else { dom.lift(&Expr::opaque("Q", 0, v.clone()))? };
    let one = dom.one();
    let qm1 = dom.div(&one, &q)?;
    let qm2 = dom.mul(&qm1, &qm1);
    let dq = dom.diff(&q)?;
    let eps0 = dom.lift(&Expr::opaque("eps0", 0, v.clone()))?;

    let mut st = BState { y: vec![], dy: vec![], d2y: vec![], sv: vec![], dsv: vec![], d2sv: vec![], bv: vec![] };
    for k in 0..mmax {
        let yk = if k == 0 {
            dom.one()
        } else if k == 1 && y1_zero {
            dom.zero()
        } else {
            dom.lift(&Expr::opaque(&format!("Y{k}"), 0, v.clone()))?
        };
        let d1 = dom.diff(&yk)?;
        let d2 = dom.diff(&d1)?;
        st.y.push(yk);
        st.dy.push(d1);
        st.d2y.push(d2);
        let s = dom.lift(&Expr::opaque(&format!("sv{k}"), 0, v.clone()))?;
        let d1 = dom.diff(&s)?;
        let d2 = dom.diff(&d1)?;
        st.sv.push([s, dom.zero()]);
        st.dsv.push([d1, dom.zero()]);
        st.d2sv.push([d2, dom.zero()]);
    }
    let i = dom.i();
    let ib = dom.mul(&i, &qm1);
    let b1 = dom.mul(&ib, &st.dsv[0][0]);
    st.bv.push(vzero(&mut dom));
    st.bv.push([b1, dom.zero()]);
    let k = BConst { qm1: &qm1, qm2: &qm2, dq: &dq, eps0: &eps0 };
    for m in 2..=mmax {
        let bv = b_step(&mut dom, &st, &k, m, w)?;
        st.bv.push(bv);
    }
    Ok(st.bv[1..].iter().map(|b| dom.to_expr(&b[0])).collect())
}

/// Checks of the frame identities; each entry is (name, holds).
pub fn frame_invariants(p: &CoupledProblem) -> Result<Vec<(&'static str, bool)>> {
    let mut dom = NfDomain::new("x", p.assumptions.clone());
    let w = CoupledWeights::default();
    let f = frame(p, &mut dom, &w)?;
    let mut out = Vec::new();
    // Q^4 - tr Q^2 + det
    let q4 = dom.mul(&f.qsq, &f.qsq);
    let tr = dom.add(&f.g[0][0], &f.g[1][1]);
    let trq = dom.mul(&tr, &f.qsq);
    let det1 = dom.mul(&f.g[0][0], &f.g[1][1]);
    let det2 = dom.mul(&f.g[0][1], &f.g[1][0]);
    let det = dom.sub(&det1, &det2);
    let ch = dom.sub(&q4, &trq);
    let ch = dom.add(&ch, &det);
    out.push(("characteristic identity", ch.is_zero()));
    // (G - Q^2) s0
    let mut ok = true;
    for r in 0..2 {
        let a = dom.sub(&f.g[r][r], &f.qsq);
        let (x, y) = if r == 0 { (&a, &f.g[0][1]) } else { (&f.g[1][0], &a) };
        let t1 = dom.mul(x, &f.s0v[0]);
        let t2 = dom.mul(y, &f.s0v[1]);
        let res = dom.add(&t1, &t2);
        ok &= res.is_zero();
    }
    out.push(("eigenvector residual", ok));
    let c0 = dom.cc(&f.spv[0])?;
    let c1 = dom.cc(&f.spv[1])?;
    let o = dot(&mut dom, &[c0, c1], &f.s0v);
    out.push(("spv orthogonality", o.is_zero()));
    let expected = dom.scale(&f.qsq, &BigRational::from_integer((-2).into()));
    let den = dom.lift(&f.public.den)?;
    let prod = dom.mul(&f.coef, &den);
    let d = dom.sub(&prod, &expected);
    out.push(("coef = -2 Q^2/D", d.is_zero()));
    if p.normalize {
        out.push(("normalized asqr", {
            let a = abs2_sum(&mut dom, &f.s0v[0], &f.s0v[1])?;
            let one = dom.one();
            dom.sub(&a, &one).is_zero()
        }));
    }
    let _ = (&f.q, &f.ds0v, &f.asqr);
    Ok(out)
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

    fn example_a(branch: Branch) -> CoupledProblem {
        let mut pr = CoupledProblem::new(
            p("x*cos(x)^2 + sin(x)^2"),
            p("(x - 1)*cos(x)*sin(x)"),
            p("(x - 1)*cos(x)*sin(x)"),
            p("x*sin(x)^2 + cos(x)^2"),
        );
        pr.branch = branch;
        pr.parrepls = vec![("x".into(), Expr::int(2))];
        pr.assumptions.declare_positive("x").unwrap();
        pr.g_factor = p("cos(x)");
        pr.mmax = 1;
        pr
    }

    #[test]
    fn example_a_plus_first_order() {
        let s = coupled_corrections(&example_a(Branch::Plus)).unwrap();
        let mut ctx = Ctx::default();
        let f = &s.frame;
        assert!(equal(&mut ctx, &f.delta, &p("(x - 1)^2")).unwrap());
        assert_eq!(f.qsq, p("x"));
        assert_eq!(f.sign_qsq, 1);
        assert!(equal(&mut ctx, &f.s02os01, &p("tan(x)")).unwrap());
        assert!(equal(&mut ctx, &f.den, &p("1 - x")).unwrap());
        assert!(equal(&mut ctx, &f.coef, &p("2*x/(x - 1)")).unwrap());
        assert!(equal(&mut ctx, &f.asqr, &p("1")).unwrap());
        let o = s.order(1);
        assert!(equal(&mut ctx, &o.bv[0], &p("-i*sin(x)/sqrt(x)")).unwrap());
        assert!(equal(&mut ctx, &o.bv[1], &p("i*cos(x)/sqrt(x)")).unwrap());
        assert!(equal(&mut ctx, &o.cp, &p("2*i*sqrt(x)/(x - 1)")).unwrap());
        assert!(o.y.is_zero());
        assert!(o.c.is_zero());
    }

    #[test]
    fn example_a_minus_branch() {
        let mut pr = example_a(Branch::Minus);
        pr.g_factor = p("sin(x)");
        let s = coupled_corrections(&pr).unwrap();
        assert_eq!(s.frame.qsq, Expr::one());
        assert!(s.order(1).y.is_zero());
    }

    #[test]
    fn frame_identities_hold() {
        for b in [Branch::Minus, Branch::Plus] {
            for (name, ok) in frame_invariants(&example_a(b)).unwrap() {
                assert!(ok, "{name} fails on branch {b:?}");
            }
        }
    }

    #[test]
    fn nonhermitian_agrees_at_first_order() {
        let mut pr = example_a(Branch::Plus);
        pr.hermitian = Hermiticity::NonHermitian;
        let s = coupled_corrections(&pr).unwrap();
        assert!(s.order(1).y.is_zero());
    }

    #[test]
    fn abstract_first_orders() {
        let b = abstract_b(2, true, false).unwrap();
        assert_eq!(b[0], p("i*sv0'(z)"));
        assert!(!b[1].is_zero());
        let b0 = abstract_b(2, true, true).unwrap();
        assert_ne!(b[1], b0[1]);
    }

    #[test]
    fn validation_errors() {
        let mut pr = example_a(Branch::Plus);
        pr.automatic = false;
        assert!(matches!(coupled_corrections(&pr), Err(Error::InvalidProblem(_))));
        let mut pr = example_a(Branch::Plus);
        pr.parrepls.clear();
        assert!(matches!(coupled_corrections(&pr), Err(Error::SignUndeterminable(_))));
        let mut pr = example_a(Branch::Plus);
        pr.r12 = Expr::zero();
        pr.r21 = Expr::zero();
        assert!(coupled_corrections(&pr).is_err());
    }
}
