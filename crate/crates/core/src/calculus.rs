//! Differentiation, normalization (together / apart / trig expansion /
//! simplify) and the restricted integrator.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rustc_hash::FxHashMap;

use crate::error::{Error, Result};
use crate::expr::{Expr, Func, Node, Sym};
use crate::normal::{Ctx, KernelKind, Nf};
use crate::poly::{Poly, Var};

/// Exact k-th derivative by the tree rules; the result is canonical but not
/// normalized.
pub fn differentiate(e: &Expr, v: &str, k: u32) -> Expr {
    let mut r = e.clone();
    for _ in 0..k {
        let mut memo = FxHashMap::default();
        r = diff_rec(&r, v, &mut memo);
    }
    r
}

fn diff_rec(e: &Expr, v: &str, memo: &mut FxHashMap<usize, Expr>) -> Expr {
    if let Some(d) = memo.get(&e.id()) {
        return d.clone();
    }
    let d = match e.node() {
        Node::Rational(_) | Node::ImaginaryUnit => Expr::zero(),
        Node::Symbol(s) => {
            if &**s == v {
                Expr::one()
            } else {
                Expr::zero()
            }
        }
        Node::Sum(ts) => Expr::sum(ts.iter().map(|t| diff_rec(t, v, memo)).collect::<Vec<_>>()),
        Node::Product(fs) => {
            let mut terms = Vec::with_capacity(fs.len());
            for (k, f) in fs.iter().enumerate() {
                let df = diff_rec(f, v, memo);
                if df.is_zero() {
                    continue;
                }
                let mut parts: Vec<Expr> = Vec::with_capacity(fs.len());
                parts.extend(fs[..k].iter().cloned());
                parts.push(df);
                parts.extend(fs[k + 1..].iter().cloned());
                terms.push(Expr::product(parts));
            }
            Expr::sum(terms)
        }
        Node::Power(b, ex) => {
            let db = diff_rec(b, v, memo);
            if !ex.depends_on(v) {
                if db.is_zero() {
                    Expr::zero()
                } else {
                    Expr::product([ex.clone(), b.pow(&(ex - &Expr::one())), db])
                }
            } else {
                let dx = diff_rec(ex, v, memo);
                e * &(dx * b.log() + ex * &db / b)
            }
        }
        Node::Apply(f, u) => {
            let du = diff_rec(u, v, memo);
            if du.is_zero() {
                Expr::zero()
            } else {
                let outer = match f {
                    Func::Sin => u.cos(),
                    Func::Cos => -u.sin(),
                    Func::Tan => u.cos().powi(-2),
                    Func::Exp => e.clone(),
                    Func::Log => u.recip(),
                };
                outer * du
            }
        }
        Node::Opaque { name, order, arg } => {
            let da = diff_rec(arg, v, memo);
            if da.is_zero() {
                Expr::zero()
            } else {
                Expr::opaque(name, order + 1, arg.clone()) * da
            }
        }
    };
    memo.insert(e.id(), d.clone());
    d
}

/// Single fraction with coprime numerator and denominator.
pub fn together(ctx: &mut Ctx, e: &Expr) -> Result<Expr> {
    let v = ctx.to_nf(e)?;
    Ok(ctx.to_expr(&v))
}

/// Rewrites products and powers of `sin` and `cos` so that `sin` appears at
/// most linearly; everything else is normalized along the way.
pub fn trig_expand(ctx: &mut Ctx, e: &Expr) -> Result<Expr> {
    together(ctx, e)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Simplified {
    pub expr: Expr,
    /// Set when the result relied on a step outside the class where the
    /// zero test is exact (towers of radicals, general powers, or the
    /// randomized numeric zero test).
    pub non_rigorous: bool,
}

/// Fixed pipeline: normalize the imaginary unit, reduce trigonometric
/// content, put over a common denominator. Never searches.
pub fn simplify(ctx: &mut Ctx, e: &Expr) -> Result<Simplified> {
    let before = ctx.non_rigorous();
    let v = ctx.to_nf(e)?;
    let out = ctx.to_expr(&v);
    let flagged = ctx.non_rigorous() && !before;
    if flagged && !v.is_zero() && crate::jet::numerically_zero(&out, 20, 1e-10) {
        return Ok(Simplified { expr: Expr::zero(), non_rigorous: true });
    }
    Ok(Simplified { expr: out, non_rigorous: flagged })
}

/// Real part with every symbol taken as real.
pub fn re(ctx: &mut Ctx, e: &Expr) -> Result<Expr> {
    let v = ctx.to_nf(e)?;
    let r = ctx.re(&v)?;
    Ok(ctx.to_expr(&r))
}

pub fn im(ctx: &mut Ctx, e: &Expr) -> Result<Expr> {
    let v = ctx.to_nf(e)?;
    let r = ctx.im(&v)?;
    Ok(ctx.to_expr(&r))
}

pub fn cc(ctx: &mut Ctx, e: &Expr) -> Result<Expr> {
    let v = ctx.to_nf(e)?;
    let r = ctx.cc(&v)?;
    Ok(ctx.to_expr(&r))
}

// ------------------------------------------------------------- apart ----

/// Univariate polynomial in one kernel variable, coefficients in normal form.
#[derive(Clone, Debug)]
struct UPoly(Vec<Nf>);

impl UPoly {
    fn trim(mut self) -> UPoly {
        while self.0.last().is_some_and(Nf::is_zero) {
            self.0.pop();
        }
        self
    }

    fn degree(&self) -> Option<usize> {
        if self.0.is_empty() {
            None
        } else {
            Some(self.0.len() - 1)
        }
    }

    fn is_zero(&self) -> bool {
        self.0.is_empty()
    }

    fn from_poly(ctx: &Ctx, p: &Poly, v: Var) -> UPoly {
        UPoly(p.coeffs_in(v).into_iter().map(|c| ctx.from_poly(c)).collect()).trim()
    }

    fn add(&self, ctx: &mut Ctx, o: &UPoly) -> UPoly {
        let n = self.0.len().max(o.0.len());
        let mut out = Vec::with_capacity(n);
        for k in 0..n {
            let a = self.0.get(k).cloned().unwrap_or_else(Nf::zero);
            let b = o.0.get(k).cloned().unwrap_or_else(Nf::zero);
            out.push(ctx.add(&a, &b));
        }
        UPoly(out).trim()
    }

    fn sub(&self, ctx: &mut Ctx, o: &UPoly) -> UPoly {
        let neg = UPoly(o.0.iter().map(Nf::neg).collect());
        self.add(ctx, &neg)
    }

    fn mul(&self, ctx: &mut Ctx, o: &UPoly) -> UPoly {
        if self.is_zero() || o.is_zero() {
            return UPoly(Vec::new());
        }
        let mut out = vec![Nf::zero(); self.0.len() + o.0.len() - 1];
        for (i, a) in self.0.iter().enumerate() {
            for (j, b) in o.0.iter().enumerate() {
                let t = ctx.mul(a, b);
                out[i + j] = ctx.add(&out[i + j], &t);
            }
        }
        UPoly(out).trim()
    }

    fn scale(&self, ctx: &mut Ctx, c: &Nf) -> UPoly {
        UPoly(self.0.iter().map(|a| ctx.mul(a, c)).collect()).trim()
    }

    fn divmod(&self, ctx: &mut Ctx, d: &UPoly) -> Result<(UPoly, UPoly)> {
        let dd = d.degree().ok_or(Error::DivisionByZero)?;
        let lead_inv = ctx.inv(&d.0[dd])?;
        let mut r = self.clone();
        let mut q = vec![Nf::zero(); self.0.len().saturating_sub(dd).max(1)];
        while let Some(rd) = r.degree() {
            if rd < dd {
                break;
            }
            let c = ctx.mul(&r.0[rd], &lead_inv);
            q[rd - dd] = c.clone();
            let mut shifted = vec![Nf::zero(); rd - dd];
            shifted.extend(d.0.iter().map(|x| ctx.mul(x, &c)));
            r = r.sub(ctx, &UPoly(shifted));
            // guard against a leading term that failed to cancel exactly
            if r.degree() == Some(rd) {
                r.0.pop();
            }
        }
        Ok((UPoly(q).trim(), r))
    }

    /// Inverse of `self` modulo `m` (assumed coprime).
    fn inverse_mod(&self, ctx: &mut Ctx, m: &UPoly) -> Result<UPoly> {
        let (mut r0, mut r1) = (m.clone(), self.divmod(ctx, m)?.1);
        let (mut s0, mut s1) = (UPoly(Vec::new()), UPoly(vec![Nf::one()]));
        while !r1.is_zero() {
            let (q, r) = r0.divmod(ctx, &r1)?;
            let qs = q.mul(ctx, &s1);
            let s2 = s0.sub(ctx, &qs);
            r0 = r1;
            r1 = r;
            s0 = s1;
            s1 = s2;
        }
        if r0.degree() != Some(0) {
            return Err(Error::InvalidProblem("partial fractions need coprime factors".into()));
        }
        let c = ctx.inv(&r0.0[0])?;
        let s = s0.scale(ctx, &c);
        Ok(s.divmod(ctx, m)?.1)
    }

    fn to_nf(&self, ctx: &mut Ctx, v: Var) -> Nf {
        let x = ctx.from_poly(Poly::var(v));
        let mut acc = Nf::zero();
        for c in self.0.iter().rev() {
            acc = ctx.mul(&acc, &x);
            acc = ctx.add(&acc, c);
        }
        acc
    }
}

/// One partial-fraction term `numerator / factor^power` (power 0 for the
/// polynomial part).
#[derive(Clone, Debug)]
pub struct PartialTerm {
    pub numerator: Nf,
    pub factor: Option<Poly>,
    pub power: u32,
}

/// Partial fraction decomposition with respect to symbol `var`.
pub fn apart_terms(ctx: &mut Ctx, value: &Nf, var: &str) -> Result<Vec<PartialTerm>> {
    let v = ctx.symbol_var(var);
    let (coeff, factors) = ctx.den_factors(value);
    let mut konst_den = Poly::constant(coeff);
    let mut dep: Vec<(Poly, u32)> = Vec::new();
    for (f, e) in factors {
        if f.degree(v) == 0 {
            konst_den = konst_den.mul(&f.pow(e));
        } else {
            if f.degree(v) > 2 {
                return Err(Error::FactorizationOutOfScope {
                    var: var.to_string(),
                    together: ctx.to_expr(value).to_string(),
                });
            }
            dep.push((f, e));
        }
    }
    let k = ctx.from_parts(Poly::one(), &konst_den)?;
    let num = UPoly::from_poly(ctx, value.numerator(), v);
    if dep.is_empty() {
        let whole = num.to_nf(ctx, v);
        return Ok(vec![PartialTerm { numerator: ctx.mul(&whole, &k), factor: None, power: 0 }]);
    }
    let gs: Vec<UPoly> = dep.iter().map(|(f, e)| UPoly::from_poly(ctx, &f.pow(*e), v)).collect();
    let mut dv = UPoly(vec![Nf::one()]);
    for g in &gs {
        dv = dv.mul(ctx, g);
    }
    let (q, r) = num.divmod(ctx, &dv)?;
    let mut out = Vec::new();
    if !q.is_zero() {
        let qn = q.to_nf(ctx, v);
        out.push(PartialTerm { numerator: ctx.mul(&qn, &k), factor: None, power: 0 });
    }
    for (j, (f, e)) in dep.iter().enumerate() {
        let mut rest = UPoly(vec![Nf::one()]);
        for (l, g) in gs.iter().enumerate() {
            if l != j {
                rest = rest.mul(ctx, g);
            }
        }
        let inv = rest.inverse_mod(ctx, &gs[j])?;
        let aj = r.mul(ctx, &inv).divmod(ctx, &gs[j])?.1;
        // f-adic expansion of aj
        let fu = UPoly::from_poly(ctx, f, v);
        let mut cur = aj;
        let mut k_pow = 0u32;
        while !cur.is_zero() && k_pow < *e {
            let (qq, rr) = cur.divmod(ctx, &fu)?;
            if !rr.is_zero() {
                let rn = rr.to_nf(ctx, v);
                out.push(PartialTerm { numerator: ctx.mul(&rn, &k), factor: Some(f.clone()), power: e - k_pow });
            }
            cur = qq;
            k_pow += 1;
        }
    }
    Ok(out)
}

/// Sum of partial fractions with respect to `var`, as an expression.
pub fn apart(ctx: &mut Ctx, e: &Expr, var: &str) -> Result<Expr> {
    let value = ctx.to_nf(e)?;
    let terms = apart_terms(ctx, &value, var)?;
    Ok(terms_expr(ctx, &terms))
}

fn terms_expr(ctx: &mut Ctx, terms: &[PartialTerm]) -> Expr {
    let parts: Vec<Expr> = terms
        .iter()
        .map(|t| {
            let n = ctx.to_expr(&t.numerator);
            match &t.factor {
                None => n,
                Some(f) => n * ctx.poly_to_expr(f).powi(-(t.power as i64)),
            }
        })
        .collect();
    Expr::sum(parts)
}

// --------------------------------------------------------- integrate ----

/// Antiderivative with constant of integration 0, verified by
/// differentiation.
pub fn integrate(ctx: &mut Ctx, e: &Expr, var: &str) -> Result<Expr> {
    let value = ctx.to_nf(e)?;
    let f = integrate_nf(ctx, &value, var)?;
    Ok(ctx.to_expr(&f))
}

pub fn integrate_nf(ctx: &mut Ctx, value: &Nf, var: &str) -> Result<Nf> {
    let sym: Sym = var.into();
    if value.is_zero() {
        return Ok(Nf::zero());
    }
    let not_integrable = |ctx: &Ctx| Error::NotIntegrable(ctx.to_expr(value).to_string());
    let v = ctx.symbol_var(var);
    let candidate = if has_sqrt_of_var(ctx, value, v) {
        integrate_by_root_substitution(ctx, value, var)?
    } else {
        let trig = trig_kernels(ctx, value, &sym, v).ok_or_else(|| not_integrable(ctx))?;
        integrate_direct(ctx, value, var, v, &trig)?
    };
    let back = ctx.diff(&candidate, &sym)?;
    let check = ctx.sub(&back, value);
    if !check.is_zero() {
        return Err(not_integrable(ctx));
    }
    Ok(candidate)
}

fn integrate_direct(ctx: &mut Ctx, value: &Nf, var: &str, v: Var, trig: &[(Var, KernelKind)]) -> Result<Nf> {
    Ok(if trig.is_empty() {
        integrate_rational(ctx, value, var, v)?
    } else {
        integrate_trig(ctx, value, var, v, trig)?
    })
}

fn has_sqrt_of_var(ctx: &Ctx, value: &Nf, v: Var) -> bool {
    let mut vars = value.numerator().vars();
    for (f, _) in ctx.den_factors(value).1 {
        vars.extend(f.vars());
    }
    vars.iter().any(|&w| matches!(&ctx.kernels()[w as usize].kind, KernelKind::Sqrt { radicand } if *radicand == Poly::var(v)))
}

/// `∫ R(x, sqrt(x)) dx = ∫ R(t^2, t) 2t dt` with `t = sqrt(x)`.
fn integrate_by_root_substitution(ctx: &mut Ctx, value: &Nf, var: &str) -> Result<Nf> {
    let tname = format!("{var}__root");
    let t = Expr::symbol(&tname);
    let e = ctx.to_expr(value);
    let halves = e.map_bottom_up(&mut |n| match n.node() {
        Node::Power(b, ex) if b.as_symbol().is_some_and(|s| &**s == var) => match ex.node() {
            Node::Rational(r) if *r.denom() == BigInt::from(2) => Some(t.pow(&Expr::rational(r * BigRational::from_integer(2.into())))),
            _ => None,
        },
        _ => None,
    });
    let mut to_t = std::collections::HashMap::new();
    to_t.insert(var.into(), t.powi(2));
    let in_t = halves.substitute(&to_t) * Expr::int(2) * t.clone();
    if in_t.depends_on(var) {
        return Err(Error::NotIntegrable(e.to_string()));
    }
    let nf_t = ctx.to_nf(&in_t)?;
    let tv = ctx.symbol_var(&tname);
    let sym_t: Sym = tname.as_str().into();
    let trig = trig_kernels(ctx, &nf_t, &sym_t, tv).ok_or_else(|| Error::NotIntegrable(e.to_string()))?;
    let anti = integrate_direct(ctx, &nf_t, &tname, tv, &trig)?;
    let mut back = std::collections::HashMap::new();
    back.insert(sym_t, Expr::symbol(var).sqrt());
    let ex = ctx.to_expr(&anti).substitute(&back);
    ctx.to_nf(&ex)
}

/// Kernels of the integrand that depend on the variable, other than the
/// variable itself. Only `sin`/`cos` of one common argument are admitted;
/// `None` means the integrand is outside the supported class.
fn trig_kernels(ctx: &mut Ctx, value: &Nf, sym: &Sym, v: Var) -> Option<Vec<(Var, KernelKind)>> {
    let mut vars = value.numerator().vars();
    let (_, factors) = ctx.den_factors(value);
    let mut den_vars = Vec::new();
    for (f, _) in &factors {
        den_vars.extend(f.vars());
    }
    vars.extend(den_vars.iter().copied());
    vars.sort_unstable();
    vars.dedup();
    let mut out = Vec::new();
    let mut arg: Option<Expr> = None;
    for w in vars {
        if w == v {
            continue;
        }
        let k = ctx.kernels()[w as usize].clone();
        if !k.expr.depends_on(sym) {
            continue;
        }
        let Node::Apply(f, u) = k.expr.node() else { return None };
        if !matches!(f, Func::Sin | Func::Cos) || den_vars.contains(&w) {
            return None;
        }
        match &arg {
            None => arg = Some(u.clone()),
            Some(a) if a == u => {}
            _ => return None,
        }
        out.push((w, k.kind));
    }
    if let Some(a) = &arg {
        // argument must be c*var with c independent of var
        let c = (a / &Expr::symbol(sym)).clone();
        if c.depends_on(sym) {
            return None;
        }
    }
    Some(out)
}

fn integrate_rational(ctx: &mut Ctx, value: &Nf, var: &str, v: Var) -> Result<Nf> {
    let terms = apart_terms(ctx, value, var).map_err(|e| match e {
        Error::FactorizationOutOfScope { together, .. } => Error::NotIntegrable(together),
        other => other,
    })?;
    let sym: Sym = var.into();
    let mut acc = Nf::zero();
    for t in terms {
        match &t.factor {
            None => {
                let up = poly_in(ctx, &t.numerator, v)?;
                for (k, c) in up.0.iter().enumerate() {
                    let x = ctx.from_poly(Poly::var(v).pow(k as u32 + 1));
                    let term = ctx.mul(c, &x);
                    let term = ctx.scale(&term, &BigRational::new(BigInt::one(), BigInt::from(k + 1)));
                    acc = ctx.add(&acc, &term);
                }
            }
            Some(f) => {
                let fu = UPoly::from_poly(ctx, f, v);
                let fnf = ctx.from_poly(f.clone());
                if fu.degree() == Some(1) {
                    let alpha = fu.0[1].clone();
                    let a = t.numerator.clone();
                    let a_over = ctx.div(&a, &alpha)?;
                    let piece = if t.power == 1 {
                        let log_f = ctx.to_nf(&log_oriented(ctx, f, v))?;
                        ctx.mul(&a_over, &log_f)
                    } else {
                        let p = t.power as i64;
                        let fp = ctx.pow(&fnf, 1 - p)?;
                        let s = ctx.scale(&a_over, &BigRational::new(BigInt::one(), BigInt::from(1 - p)));
                        ctx.mul(&s, &fp)
                    };
                    acc = ctx.add(&acc, &piece);
                } else if fu.degree() == Some(2) && t.power == 1 {
                    // a1*f'/(2*alpha) part integrates to a log; the rest needs atan
                    let num = poly_in(ctx, &t.numerator, v)?;
                    let a1 = num.0.get(1).cloned().unwrap_or_else(Nf::zero);
                    let alpha = fu.0[2].clone();
                    let half = ctx.div(&a1, &alpha)?;
                    let half = ctx.scale(&half, &BigRational::new(BigInt::one(), BigInt::from(2)));
                    let df = ctx.diff(&fnf, &sym)?;
                    let log_part = ctx.mul(&half, &df);
                    let rest_num = ctx.sub(&t.numerator, &log_part);
                    if !rest_num.is_zero() {
                        return Err(Error::NotIntegrable(ctx.to_expr(value).to_string()));
                    }
                    let log_f = ctx.to_nf(&log_oriented(ctx, f, v))?;
                    let piece = ctx.mul(&half, &log_f);
                    acc = ctx.add(&acc, &piece);
                } else {
                    return Err(Error::NotIntegrable(ctx.to_expr(value).to_string()));
                }
            }
        }
    }
    Ok(acc)
}

/// `log(f)` with `f` oriented so its leading coefficient in `v` is positive
/// (the two orientations differ by a constant).
fn log_oriented(ctx: &Ctx, f: &Poly, v: Var) -> Expr {
    let lead = f.coeffs_in(v).pop().unwrap_or_else(Poly::zero);
    let f = if lead.leading_coeff().is_negative() { f.neg() } else { f.clone() };
    ctx.poly_to_expr(&f).log()
}

/// Writes a denominator-free-in-`v` value as a polynomial in `v`.
fn poly_in(ctx: &mut Ctx, value: &Nf, v: Var) -> Result<UPoly> {
    let (coeff, factors) = ctx.den_factors(value);
    let mut den = Poly::constant(coeff);
    for (f, e) in factors {
        if f.degree(v) > 0 {
            return Err(Error::NotIntegrable(ctx.to_expr(value).to_string()));
        }
        den = den.mul(&f.pow(e));
    }
    let inv_den = ctx.from_parts(Poly::one(), &den)?;
    let up = UPoly::from_poly(ctx, value.numerator(), v);
    Ok(up.scale(ctx, &inv_den))
}

/// Gaussian rational `a + b i`.
type Gauss = (BigRational, BigRational);

fn gmul(a: &Gauss, b: &Gauss) -> Gauss {
    (&a.0 * &b.0 - &a.1 * &b.1, &a.0 * &b.1 + &a.1 * &b.0)
}

/// Laurent polynomial in `E = exp(i u)` for `cos(u)^a sin(u)^b`.
fn fourier(a: u32, b: u32) -> FxHashMap<i64, Gauss> {
    let half = BigRational::new(BigInt::one(), BigInt::from(2));
    let mut poly: FxHashMap<i64, Gauss> = FxHashMap::default();
    poly.insert(0, (BigRational::one(), BigRational::zero()));
    let cos_terms = [(1i64, (half.clone(), BigRational::zero())), (-1, (half.clone(), BigRational::zero()))];
    // sin = (E - 1/E)/(2i) = -i/2 E + i/2 E^-1
    let sin_terms = [(1i64, (BigRational::zero(), -half.clone())), (-1, (BigRational::zero(), half.clone()))];
    let mult = |poly: &FxHashMap<i64, Gauss>, terms: &[(i64, Gauss)]| {
        let mut out: FxHashMap<i64, Gauss> = FxHashMap::default();
        for (k, c) in poly {
            for (dk, dc) in terms {
                let p = gmul(c, dc);
                let slot = out.entry(k + dk).or_insert((BigRational::zero(), BigRational::zero()));
                slot.0 += p.0;
                slot.1 += p.1;
            }
        }
        out
    };
    for _ in 0..a {
        poly = mult(&poly, &cos_terms);
    }
    for _ in 0..b {
        poly = mult(&poly, &sin_terms);
    }
    poly
}

fn integrate_trig(ctx: &mut Ctx, value: &Nf, var: &str, v: Var, trig: &[(Var, KernelKind)]) -> Result<Nf> {
    let sym: Sym = var.into();
    let fail = |ctx: &Ctx| Error::NotIntegrable(ctx.to_expr(value).to_string());
    let mut sin_v = None;
    let mut cos_v = None;
    for (w, kind) in trig {
        match kind {
            KernelKind::Sin { cos } => {
                sin_v = Some(*w);
                cos_v = Some(*cos);
            }
            _ => cos_v = Some(*w),
        }
    }
    let cvar = cos_v.ok_or_else(|| fail(ctx))?;
    let arg = match ctx.kernels()[cvar as usize].expr.node() {
        Node::Apply(_, u) => u.clone(),
        _ => return Err(fail(ctx)),
    };
    let scale_expr = &arg / &Expr::symbol(var);
    let omega = ctx.to_nf(&scale_expr)?;

    // group the numerator by trig monomial cos^a sin^b
    let (coeff, factors) = ctx.den_factors(value);
    let mut den = Poly::constant(coeff);
    for (f, e) in factors {
        den = den.mul(&f.pow(e));
    }
    let inv_den = ctx.from_parts(Poly::one(), &den)?;
    let mut groups: FxHashMap<(u32, u32), Poly> = FxHashMap::default();
    for (m, c) in value.numerator().terms() {
        let a = m.degree(cvar);
        let b = sin_v.map_or(0, |s| m.degree(s));
        let mut rest = m.clone();
        if a > 0 {
            rest = rest.split_var(cvar).1;
        }
        if b > 0 {
            rest = rest.split_var(sin_v.unwrap()).1;
        }
        let slot = groups.entry((a, b)).or_default();
        *slot = slot.add(&Poly::monomial(rest, c.clone()));
    }
    // accumulate p_k(v) cos(k u) and q_k(v) sin(k u)
    let mut cos_parts: FxHashMap<i64, Nf> = FxHashMap::default();
    let mut sin_parts: FxHashMap<i64, Nf> = FxHashMap::default();
    for ((a, b), p) in groups {
        let pn = ctx.from_poly(p);
        let pn = ctx.mul(&pn, &inv_den);
        for (k, (re, im)) in fourier(a, b) {
            // c E^k + c' E^-k with E^k = cos(k u) + i sin(k u)
            if k < 0 {
                continue;
            }
            let (c_re, c_im) = (re, im);
            let (d_re, d_im) = if k == 0 {
                (BigRational::zero(), BigRational::zero())
            } else {
                fourier(a, b).get(&-k).cloned().unwrap_or((BigRational::zero(), BigRational::zero()))
            };
            // (c + d) cos + i (c - d) sin
            let cos_c = (&c_re + &d_re, &c_im + &d_im);
            let sin_c = (-(&c_im - &d_im), &c_re - &d_re);
            let gauss_nf = |ctx: &mut Ctx, g: &Gauss| {
                let r = Nf::rational(&g.0);
                let i = ctx.i();
                let im = ctx.scale(&i, &g.1);
                ctx.add(&r, &im)
            };
            let cn = gauss_nf(ctx, &cos_c);
            let sn = gauss_nf(ctx, &sin_c);
            let ct = ctx.mul(&pn, &cn);
            let st = ctx.mul(&pn, &sn);
            let e1 = cos_parts.entry(k).or_insert_with(Nf::zero).clone();
            let e1 = ctx.add(&e1, &ct);
            cos_parts.insert(k, e1);
            if k > 0 {
                let e2 = sin_parts.entry(k).or_insert_with(Nf::zero).clone();
                let e2 = ctx.add(&e2, &st);
                sin_parts.insert(k, e2);
            }
        }
    }
    let mut acc = Nf::zero();
    for (k, p) in cos_parts {
        if p.is_zero() {
            continue;
        }
        if k == 0 {
            let piece = integrate_rational(ctx, &p, var, v)?;
            acc = ctx.add(&acc, &piece);
        } else {
            let piece = tabular(ctx, &p, k, &omega, &arg, &sym, v, true)?;
            acc = ctx.add(&acc, &piece);
        }
    }
    for (k, p) in sin_parts {
        if p.is_zero() {
            continue;
        }
        let piece = tabular(ctx, &p, k, &omega, &arg, &sym, v, false)?;
        acc = ctx.add(&acc, &piece);
    }
    Ok(acc)
}

/// `∫ p(v) cos(k u)` or `∫ p(v) sin(k u)` with `u = omega v`, by repeated
/// integration by parts (p must be polynomial in v).
#[allow(clippy::too_many_arguments)]
fn tabular(ctx: &mut Ctx, p: &Nf, k: i64, omega: &Nf, arg: &Expr, sym: &Sym, v: Var, is_cos: bool) -> Result<Nf> {
    poly_in(ctx, p, v)?;
    let ku = Expr::int(k) * arg.clone();
    let s = ctx.to_nf(&ku.sin())?;
    let c = ctx.to_nf(&ku.cos())?;
    let kw = ctx.scale(omega, &BigRational::from_integer(BigInt::from(k)));
    let inv_kw = ctx.inv(&kw)?;
    // ∫ p cos = p sin/w + p' cos/w^2 - p'' sin/w^3 - ...
    // ∫ p sin = -p cos/w + p' sin/w^2 + p'' cos/w^3 - ...
    let mut acc = Nf::zero();
    let mut d = p.clone();
    let mut wpow = inv_kw.clone();
    let mut step = 0usize;
    while !d.is_zero() {
        let (trig, sign) = match (is_cos, step % 4) {
            (true, 0) => (&s, 1),
            (true, 1) => (&c, 1),
            (true, 2) => (&s, -1),
            (true, _) => (&c, -1),
            (false, 0) => (&c, -1),
            (false, 1) => (&s, 1),
            (false, 2) => (&c, 1),
            (false, _) => (&s, -1),
        };
        let t = ctx.mul(&d, trig);
        let t = ctx.mul(&t, &wpow);
        acc = if sign > 0 { ctx.add(&acc, &t) } else { ctx.sub(&acc, &t) };
        d = ctx.diff(&d, sym)?;
        wpow = ctx.mul(&wpow, &inv_kw);
        step += 1;
        if step > 64 {
            return Err(Error::NotIntegrable(ctx.to_expr(p).to_string()));
        }
    }
    Ok(acc)
}

/// Whether `a - b` normalizes to zero.
pub fn equal(ctx: &mut Ctx, a: &Expr, b: &Expr) -> Result<bool> {
    let x = ctx.to_nf(a)?;
    let y = ctx.to_nf(b)?;
    Ok(ctx.sub(&x, &y).is_zero())
}

/// Rational value of an expression that normalizes to a constant.
pub fn as_rational(ctx: &mut Ctx, e: &Expr) -> Result<Option<BigRational>> {
    Ok(ctx.to_nf(e)?.as_rational())
}

#[allow(dead_code)]
fn small(r: &BigRational) -> Option<i64> {
    if r.is_integer() && r.abs() < BigRational::from_integer(1000.into()) {
        r.to_integer().to_i64()
    } else {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parse::parse_expr;

    fn p(s: &str) -> Expr {
        parse_expr(s).unwrap()
    }

    #[test]
    fn derivative_examples() {
        let mut ctx = Ctx::default();
        let d = differentiate(&p("coef*(x^2 - x1^2)"), "x", 1);
        assert!(equal(&mut ctx, &d, &p("2*coef*x")).unwrap());
        let d = differentiate(&p("sin(x)*cos(x)"), "x", 1);
        assert!(equal(&mut ctx, &d, &p("cos(x)^2 - sin(x)^2")).unwrap());
        let d = differentiate(&p("coef*x/(x - p)"), "x", 2);
        assert!(equal(&mut ctx, &d, &p("2*coef*p/(x - p)^3")).unwrap());
    }

    #[test]
    fn together_and_apart() {
        let mut ctx = Ctx::default();
        let t = together(&mut ctx, &p("1/x + 1/(x - 1)")).unwrap();
        assert!(equal(&mut ctx, &t, &p("(2*x - 1)/(x*(x - 1))")).unwrap());
        let a = apart(&mut ctx, &p("1/(x^2 - x1^2)"), "x").unwrap();
        let want = p("(1/(2*x1))*(1/(x - x1) - 1/(x + x1))");
        assert!(equal(&mut ctx, &a, &want).unwrap());
        match a.node() {
            Node::Sum(ts) => assert_eq!(ts.len(), 2),
            _ => panic!("apart did not split: {a}"),
        }
    }

    #[test]
    fn apart_rejects_cubic_factors() {
        let mut ctx = Ctx::default();
        let r = apart(&mut ctx, &p("1/(x^3 + x + 1)"), "x");
        assert!(matches!(r, Err(Error::FactorizationOutOfScope { .. })));
    }

    #[test]
    fn integrals() {
        let mut ctx = Ctx::default();
        for (f, _) in [("sin(x)*cos(x)", ""), ("cos(x)^2 - sin(x)^2", ""), ("1/(x - p)", ""), ("x^2*cos(x)", ""), ("3*x^2 + 1", ""), ("sin(2*x)*x", "")] {
            let e = p(f);
            let r = integrate(&mut ctx, &e, "x").unwrap();
            let back = differentiate(&r, "x", 1);
            assert!(equal(&mut ctx, &back, &e).unwrap(), "{f} -> {r}");
        }
        let e = p("sqrt(x)/(x - 1)");
        let r = integrate(&mut ctx, &e, "x").unwrap();
        assert!(equal(&mut ctx, &differentiate(&r, "x", 1), &e).unwrap(), "{r}");
        let r = integrate(&mut ctx, &p("1/(x - p)"), "x").unwrap();
        assert_eq!(r, p("log(x - p)"));
        assert!(matches!(integrate(&mut ctx, &p("cos(x)/x"), "x"), Err(Error::NotIntegrable(_))));
    }

    #[test]
    fn re_im_cc_examples() {
        let mut ctx = Ctx::default();
        assert_eq!(re(&mut ctx, &p("x + i*sin(x)")).unwrap(), p("x"));
        assert_eq!(im(&mut ctx, &p("x + i*sin(x)")).unwrap(), p("sin(x)"));
        let e = p("2*i*(x - 1)*cos(x)*sin(x)");
        let ie = im(&mut ctx, &e).unwrap();
        assert!(equal(&mut ctx, &ie, &p("2*(x - 1)*cos(x)*sin(x)")).unwrap());
        let c = cc(&mut ctx, &p("(1 + i)/sqrt(2)*(x - 1)*cos(x)*sin(x)")).unwrap();
        assert!(equal(&mut ctx, &c, &p("(1 - i)/sqrt(2)*(x - 1)*cos(x)*sin(x)")).unwrap());
        assert_eq!(re(&mut ctx, &p("1/(1 + i)")).unwrap(), Expr::frac(1, 2));
    }

    #[test]
    fn trig_expand_examples() {
        let mut ctx = Ctx::default();
        let d = p("((x - 1)*(cos(x)^2 - sin(x)^2))^2 + 4*(x - 1)^2*cos(x)^2*sin(x)^2");
        let t = trig_expand(&mut ctx, &d).unwrap();
        assert!(equal(&mut ctx, &t, &p("(x - 1)^2")).unwrap());
        let s = trig_expand(&mut ctx, &p("sin(x)^2")).unwrap();
        assert_eq!(s, p("1 - cos(x)^2"));
    }
}
