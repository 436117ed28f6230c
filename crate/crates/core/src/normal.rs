//! Rational-trigonometric normal form.
//!
//! An expression is mapped to a rational function whose variables are
//! *kernels*: symbols, `cos u`, `exp u`, `log u`, uninterpreted functions and
//! a few algebraic kernels that satisfy quadratic relations:
//!
//! * the imaginary unit, `i^2 = -1`,
//! * `sin u`, with `sin^2 u = 1 - cos^2 u`,
//! * square roots `t = sqrt(P)`, with `t^2 = P`.
//!
//! Numerators are reduced to degree at most one in every algebraic kernel and
//! denominators are kept free of algebraic kernels (they are rationalized by
//! conjugation). Denominators are stored as an integer times a product of
//! entries of a shared factor base. Within that class a value is zero exactly
//! when its numerator is the zero polynomial.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rustc_hash::FxHashMap;
use smallvec::SmallVec;

use crate::calculus;
use crate::error::{Error, Result};
use crate::expr::{Assumptions, Expr, Func, Node, Sym};
use crate::poly::{self, Mono, Poly, Var};

/// Largest integer multiple of an angle that is expanded into powers of
/// `sin` and `cos` of the base angle.
const MAX_MULTIPLE_ANGLE: i64 = 12;

#[derive(Clone, Debug, PartialEq, Eq, Hash, Default)]
pub struct Den {
    coeff: BigInt,
    factors: SmallVec<[(u32, u32); 4]>,
}

impl Den {
    fn one() -> Den {
        Den { coeff: BigInt::one(), factors: SmallVec::new() }
    }

    pub fn is_one(&self) -> bool {
        self.coeff.is_one() && self.factors.is_empty()
    }

    fn exponent(&self, id: u32) -> u32 {
        self.factors.iter().find(|(f, _)| *f == id).map_or(0, |(_, e)| *e)
    }

    fn mul(&self, other: &Den) -> Den {
        let mut map: BTreeMap<u32, u32> = self.factors.iter().copied().collect();
        for &(f, e) in &other.factors {
            *map.entry(f).or_insert(0) += e;
        }
        Den { coeff: &self.coeff * &other.coeff, factors: map.into_iter().filter(|(_, e)| *e > 0).collect() }
    }

    fn lcm(&self, other: &Den) -> Den {
        let mut map: BTreeMap<u32, u32> = self.factors.iter().copied().collect();
        for &(f, e) in &other.factors {
            let slot = map.entry(f).or_insert(0);
            *slot = (*slot).max(e);
        }
        Den { coeff: self.coeff.lcm(&other.coeff), factors: map.into_iter().collect() }
    }
}

/// A value in normal form. Only meaningful together with the [`Ctx`] that
/// produced it.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Default)]
pub struct Nf {
    num: Poly,
    den: Den,
}

impl Nf {
    pub fn zero() -> Nf {
        Nf { num: Poly::zero(), den: Den::one() }
    }

    pub fn one() -> Nf {
        Nf::int(1)
    }

    pub fn int(n: i64) -> Nf {
        Nf { num: Poly::constant(BigInt::from(n)), den: Den::one() }
    }

    pub fn rational(r: &BigRational) -> Nf {
        Nf {
            num: Poly::constant(r.numer().clone()),
            den: Den { coeff: r.denom().clone(), factors: SmallVec::new() },
        }
    }

    pub fn is_zero(&self) -> bool {
        self.num.is_zero()
    }

    pub fn as_rational(&self) -> Option<BigRational> {
        if !self.den.factors.is_empty() {
            return None;
        }
        let n = self.num.constant_value()?;
        Some(BigRational::new(n, self.den.coeff.clone()))
    }

    pub fn neg(&self) -> Nf {
        Nf { num: self.num.neg(), den: self.den.clone() }
    }

    pub fn numerator(&self) -> &Poly {
        &self.num
    }

    pub fn denominator(&self) -> &Den {
        &self.den
    }

    /// Number of numerator terms, a rough size measure.
    pub fn size(&self) -> usize {
        self.num.len()
    }
}

#[derive(Clone, Debug)]
pub enum KernelKind {
    Imaginary,
    /// An algebraically independent kernel.
    Free,
    /// `sin u`, paired with the kernel of `cos u`.
    Sin { cos: Var },
    /// `sqrt(P)` with a polynomial radicand in lower kernels.
    Sqrt { radicand: Poly },
}

#[derive(Clone, Debug)]
pub struct Kernel {
    pub expr: Expr,
    pub kind: KernelKind,
}

/// Kernel registry, factor base and caches for one computation.
pub struct Ctx {
    kernels: Vec<Kernel>,
    index: FxHashMap<Expr, Var>,
    algebraic: Vec<(Var, Poly)>,
    factors: Vec<Poly>,
    factor_exprs: Vec<Expr>,
    factor_index: FxHashMap<Poly, u32>,
    factor_pow: FxHashMap<(u32, u32), Poly>,
    memo: FxHashMap<Expr, Nf>,
    kernel_deriv: FxHashMap<(Var, Sym), Nf>,
    factor_log_deriv: FxHashMap<(u32, Sym), Nf>,
    assumptions: Assumptions,
    non_rigorous: bool,
}

impl Default for Ctx {
    fn default() -> Self {
        Ctx::new(Assumptions::new())
    }
}

impl Ctx {
    pub fn new(assumptions: Assumptions) -> Ctx {
        let mut ctx = Ctx {
            kernels: Vec::new(),
            index: FxHashMap::default(),
            algebraic: Vec::new(),
            factors: Vec::new(),
            factor_exprs: Vec::new(),
            factor_index: FxHashMap::default(),
            factor_pow: FxHashMap::default(),
            memo: FxHashMap::default(),
            kernel_deriv: FxHashMap::default(),
            factor_log_deriv: FxHashMap::default(),
            assumptions,
            non_rigorous: false,
        };
        let i = ctx.register(Expr::i(), KernelKind::Imaginary);
        debug_assert_eq!(i, 0);
        ctx.algebraic.push((0, Poly::constant(BigInt::from(-1))));
        ctx
    }

    pub fn assumptions(&self) -> &Assumptions {
        &self.assumptions
    }

    /// True once any step left the class where the zero test is a proof.
    pub fn non_rigorous(&self) -> bool {
        self.non_rigorous
    }

    pub fn mark_non_rigorous(&mut self) {
        self.non_rigorous = true;
    }

    pub fn kernels(&self) -> &[Kernel] {
        &self.kernels
    }

    fn register(&mut self, expr: Expr, kind: KernelKind) -> Var {
        if let Some(&v) = self.index.get(&expr) {
            return v;
        }
        let v = self.kernels.len() as Var;
        if let KernelKind::Sin { .. } | KernelKind::Sqrt { .. } = kind {
            let rel = match &kind {
                KernelKind::Sin { cos } => Poly::one().sub(&Poly::var(*cos).pow(2)),
                KernelKind::Sqrt { radicand } => radicand.clone(),
                _ => unreachable!(),
            };
            self.algebraic.push((v, rel));
        }
        self.kernels.push(Kernel { expr: expr.clone(), kind });
        self.index.insert(expr, v);
        v
    }

    fn is_algebraic(&self, v: Var) -> bool {
        !matches!(self.kernels[v as usize].kind, KernelKind::Free)
    }

    fn kernel_nf(v: Var) -> Nf {
        Nf { num: Poly::var(v), den: Den::one() }
    }

    pub fn i(&self) -> Nf {
        Ctx::kernel_nf(0)
    }

    // ------------------------------------------------------------ algebra --

    /// Applies the quadratic relations until every algebraic kernel appears
    /// at most linearly.
    fn reduce(&self, p: Poly) -> Poly {
        let mut p = p;
        for (t, rel) in self.algebraic.iter().rev() {
            if p.degree(*t) < 2 {
                continue;
            }
            let cs = p.coeffs_in(*t);
            let mut even = Poly::zero();
            let mut odd = Poly::zero();
            let mut rel_pow = Poly::one();
            for (k, c) in cs.iter().enumerate() {
                if k >= 2 && k % 2 == 0 {
                    rel_pow = rel_pow.mul(rel);
                }
                if c.is_zero() {
                    continue;
                }
                let term = c.mul(&rel_pow);
                if k % 2 == 0 {
                    even = even.add(&term);
                } else {
                    odd = odd.add(&term);
                }
            }
            p = even.add(&odd.mul(&Poly::var(*t)));
        }
        p
    }

    fn factor_power(&mut self, id: u32, e: u32) -> Poly {
        if e == 0 {
            return Poly::one();
        }
        if e == 1 {
            return self.factors[id as usize].clone();
        }
        if let Some(p) = self.factor_pow.get(&(id, e)) {
            return p.clone();
        }
        let p = self.factor_power(id, e - 1).mul(&self.factors[id as usize]);
        self.factor_pow.insert((id, e), p.clone());
        p
    }

    /// Expands `target / den` for a denominator `target` that `den` divides.
    fn den_ratio(&mut self, target: &Den, den: &Den) -> Poly {
        let mut p = Poly::constant(&target.coeff / &den.coeff);
        for &(f, e) in &target.factors {
            let k = e - den.exponent(f);
            if k > 0 {
                let fp = self.factor_power(f, k);
                p = p.mul(&fp);
            }
        }
        p
    }

    fn den_poly(&mut self, den: &Den) -> Poly {
        let mut p = Poly::constant(den.coeff.clone());
        for &(f, e) in &den.factors.clone() {
            let fp = self.factor_power(f, e);
            p = p.mul(&fp);
        }
        p
    }

    fn normalize(&self, num: Poly, den: Den) -> Nf {
        if num.is_zero() {
            return Nf::zero();
        }
        let mut num = num;
        let mut factors = SmallVec::new();
        for &(f, e) in &den.factors {
            let mut e = e;
            let fp = &self.factors[f as usize];
            while e > 0 {
                match num.div_exact(fp) {
                    Some(q) => {
                        num = q;
                        e -= 1;
                    }
                    None => break,
                }
            }
            if e > 0 {
                factors.push((f, e));
            }
        }
        let g = num.content().gcd(&den.coeff);
        let (num, coeff) = if g.is_one() { (num, den.coeff) } else { (num.div_int(&g), &den.coeff / &g) };
        Nf { num, den: Den { coeff, factors } }
    }

    pub fn add(&mut self, a: &Nf, b: &Nf) -> Nf {
        if a.is_zero() {
            return b.clone();
        }
        if b.is_zero() {
            return a.clone();
        }
        if a.den == b.den {
            return self.normalize(a.num.add(&b.num), a.den.clone());
        }
        let l = a.den.lcm(&b.den);
        let ma = self.den_ratio(&l, &a.den);
        let mb = self.den_ratio(&l, &b.den);
        let num = a.num.mul(&ma).add(&b.num.mul(&mb));
        self.normalize(num, l)
    }

    pub fn sub(&mut self, a: &Nf, b: &Nf) -> Nf {
        self.add(a, &b.neg())
    }

    pub fn mul(&mut self, a: &Nf, b: &Nf) -> Nf {
        if a.is_zero() || b.is_zero() {
            return Nf::zero();
        }
        // cancel crosswise first to keep the product small
        let a1 = self.normalize(a.num.clone(), b.den.clone());
        let b1 = self.normalize(b.num.clone(), a.den.clone());
        let num = self.reduce(a1.num.mul(&b1.num));
        let den = a1.den.mul(&b1.den);
        self.normalize(num, den)
    }

    pub fn scale(&mut self, a: &Nf, r: &BigRational) -> Nf {
        let c = Nf::rational(r);
        self.mul(a, &c)
    }

    /// Registers the factors of an algebraic-kernel-free polynomial and
    /// returns it as `sign * den` with a positive denominator coefficient.
    #[allow(clippy::wrong_self_convention)]
    fn to_den(&mut self, p: &Poly) -> (bool, Den) {
        let (c, prim) = p.primitive();
        let mut coeff = c;
        let mut found: BTreeMap<u32, u32> = BTreeMap::new();
        let mut rest = prim;
        // cheap path: divide by factors that are already known
        if !rest.is_constant() {
            let vars = rest.vars();
            for id in 0..self.factors.len() as u32 {
                let f = &self.factors[id as usize];
                if f.vars().iter().any(|v| !vars.contains(v)) {
                    continue;
                }
                while let Some(q) = rest.div_exact(f) {
                    rest = q;
                    *found.entry(id).or_insert(0) += 1;
                }
                if rest.is_constant() {
                    break;
                }
            }
        }
        if let Some(k) = rest.constant_value() {
            coeff *= k;
        } else {
            let (c2, prim2) = rest.primitive();
            coeff *= c2;
            let split = poly::split_factors(&prim2);
            let mut check = Poly::one();
            for (f, e) in split {
                check = check.mul(&f.pow(e));
                let id = self.factor_id(f);
                *found.entry(id).or_insert(0) += e;
            }
            // the split is exact up to an integer unit
            if let Some(u) = prim2.div_exact(&check).and_then(|q| q.constant_value()) {
                coeff *= u;
            }
        }
        let negative = coeff.is_negative();
        (negative, Den { coeff: coeff.abs(), factors: found.into_iter().collect() })
    }

    fn factor_id(&mut self, f: Poly) -> u32 {
        if let Some(&id) = self.factor_index.get(&f) {
            return id;
        }
        let id = self.factors.len() as u32;
        let e = self.poly_expr(&f);
        self.factors.push(f.clone());
        self.factor_exprs.push(e);
        self.factor_index.insert(f, id);
        id
    }

    /// Multiplies `p` by conjugates until no algebraic kernel is left.
    /// Returns `(multiplier, rationalized)` with `p * multiplier = rationalized`.
    fn rationalize(&self, p: &Poly) -> Result<(Poly, Poly)> {
        let mut mult = Poly::one();
        let mut cur = p.clone();
        loop {
            let top = cur.vars().into_iter().rev().find(|v| self.is_algebraic(*v));
            let Some(t) = top else { break };
            let cs = cur.coeffs_in(t);
            let a = cs[0].clone();
            let b = cs.get(1).cloned().unwrap_or_else(Poly::zero);
            let conj = a.sub(&b.mul(&Poly::var(t)));
            cur = self.reduce(cur.mul(&conj));
            mult = self.reduce(mult.mul(&conj));
            if cur.is_zero() {
                return Err(Error::DegenerateRadical(self.poly_expr_ro(p).to_string()));
            }
        }
        Ok((mult, cur))
    }

    pub fn inv(&mut self, a: &Nf) -> Result<Nf> {
        if a.is_zero() {
            return Err(Error::DivisionByZero);
        }
        let (mult, rat) = self.rationalize(&a.num)?;
        let (sign, den) = self.to_den(&rat);
        let dp = self.den_poly(&a.den);
        let mut num = self.reduce(dp.mul(&mult));
        if sign {
            num = num.neg();
        }
        Ok(self.normalize(num, den))
    }

    pub fn div(&mut self, a: &Nf, b: &Nf) -> Result<Nf> {
        let ib = self.inv(b)?;
        Ok(self.mul(a, &ib))
    }

    pub fn pow(&mut self, a: &Nf, n: i64) -> Result<Nf> {
        if n < 0 {
            let ia = self.inv(a)?;
            return self.pow(&ia, -n);
        }
        let mut result = Nf::one();
        let mut base = a.clone();
        let mut k = n as u64;
        while k > 0 {
            if k & 1 == 1 {
                result = self.mul(&result, &base);
            }
            k >>= 1;
            if k > 0 {
                base = self.mul(&base, &base);
            }
        }
        Ok(result)
    }

    // ----------------------------------------------------- conjugation ----

    fn check_real_kernels(&self, p: &Poly) -> Result<()> {
        for v in p.vars() {
            if v != 0 && self.kernels[v as usize].expr.contains_i() {
                return Err(Error::NotLinearInI(self.kernels[v as usize].expr.to_string()));
            }
        }
        Ok(())
    }

    fn split_i(&self, a: &Nf) -> Result<(Poly, Poly)> {
        self.check_real_kernels(&a.num)?;
        let cs = a.num.coeffs_in(0);
        let re = cs.first().cloned().unwrap_or_else(Poly::zero);
        let im = cs.get(1).cloned().unwrap_or_else(Poly::zero);
        Ok((re, im))
    }

    /// Real part, treating every kernel other than `i` as real.
    pub fn re(&self, a: &Nf) -> Result<Nf> {
        let (re, _) = self.split_i(a)?;
        Ok(self.normalize(re, a.den.clone()))
    }

    pub fn im(&self, a: &Nf) -> Result<Nf> {
        let (_, im) = self.split_i(a)?;
        Ok(self.normalize(im, a.den.clone()))
    }

    pub fn cc(&self, a: &Nf) -> Result<Nf> {
        let (re, im) = self.split_i(a)?;
        Ok(Nf { num: re.sub(&im.mul(&Poly::var(0))), den: a.den.clone() })
    }

    // ------------------------------------------------------- conversion ---

    fn poly_expr_ro(&self, p: &Poly) -> Expr {
        let terms = p.terms().iter().map(|(m, c)| {
            let mut fs = vec![Expr::rational(BigRational::from_integer(c.clone()))];
            for &(v, e) in m.entries() {
                fs.push(self.kernels[v as usize].expr.powi(e as i64));
            }
            Expr::product(fs)
        });
        Expr::sum(terms.collect::<Vec<_>>())
    }

    fn poly_expr(&mut self, p: &Poly) -> Expr {
        self.poly_expr_ro(p)
    }

    /// Converts back to a canonical expression tree: numerator over a
    /// product of denominator factors.
    pub fn to_expr(&self, a: &Nf) -> Expr {
        let num = self.poly_expr_ro(&a.num);
        if a.den.is_one() {
            return num;
        }
        let mut fs = vec![num, Expr::rational(BigRational::new(BigInt::one(), a.den.coeff.clone()))];
        for &(f, e) in &a.den.factors {
            fs.push(self.factor_exprs[f as usize].powi(-(e as i64)));
        }
        Expr::product(fs)
    }

    /// Numerator and denominator as separate expressions.
    pub fn to_fraction(&mut self, a: &Nf) -> (Expr, Expr) {
        let num = self.poly_expr_ro(&a.num);
        let mut fs = vec![Expr::rational(BigRational::from_integer(a.den.coeff.clone()))];
        for &(f, e) in &a.den.factors {
            fs.push(self.factor_exprs[f as usize].powi(e as i64));
        }
        (num, Expr::product(fs))
    }

    /// Denominator factors as `(polynomial, exponent)` plus the integer part.
    pub fn den_factors(&self, a: &Nf) -> (BigInt, Vec<(Poly, u32)>) {
        (
            a.den.coeff.clone(),
            a.den.factors.iter().map(|&(f, e)| (self.factors[f as usize].clone(), e)).collect(),
        )
    }

    pub fn poly_to_expr(&self, p: &Poly) -> Expr {
        self.poly_expr_ro(p)
    }

    pub fn from_poly(&self, p: Poly) -> Nf {
        let p = self.reduce(p);
        Nf { num: p, den: Den::one() }
    }

    /// Builds `num / den` from polynomials over the kernels of this context.
    pub fn from_parts(&mut self, num: Poly, den: &Poly) -> Result<Nf> {
        let n = self.from_poly(num);
        let d = self.from_poly(den.clone());
        self.div(&n, &d)
    }

    /// Looks up the kernel index of a kernel expression, if registered.
    pub fn kernel_of(&self, e: &Expr) -> Option<Var> {
        self.index.get(e).copied()
    }

    /// The kernel index of symbol `name`, registering it if necessary.
    pub fn symbol_var(&mut self, name: &str) -> Var {
        self.register(Expr::symbol(name), KernelKind::Free)
    }

    pub fn to_nf(&mut self, e: &Expr) -> Result<Nf> {
        if let Some(v) = self.memo.get(e) {
            return Ok(v.clone());
        }
        let v = self.to_nf_uncached(e)?;
        self.memo.insert(e.clone(), v.clone());
        Ok(v)
    }

    #[allow(clippy::wrong_self_convention)]
    fn to_nf_uncached(&mut self, e: &Expr) -> Result<Nf> {
        match e.node() {
            Node::Rational(r) => Ok(Nf::rational(r)),
            Node::ImaginaryUnit => Ok(self.i()),
            Node::Symbol(_) => Ok(Ctx::kernel_nf(self.register(e.clone(), KernelKind::Free))),
            Node::Sum(ts) => {
                let mut parts = Vec::with_capacity(ts.len());
                for t in ts {
                    parts.push(self.to_nf(t)?);
                }
                Ok(self.sum_balanced(parts))
            }
            Node::Product(fs) => {
                let mut acc = Nf::one();
                let mut dens = Vec::new();
                for f in fs {
                    match f.node() {
                        Node::Power(b, ex) if ex.as_rational().is_some_and(|r| r.is_integer() && r.is_negative()) => {
                            dens.push(b.powi(-ex.as_rational().unwrap().to_integer().to_i64().unwrap()));
                        }
                        _ => {
                            let v = self.to_nf(f)?;
                            acc = self.mul(&acc, &v);
                        }
                    }
                }
                if !dens.is_empty() {
                    let d = self.to_nf(&Expr::product(dens))?;
                    acc = self.div(&acc, &d)?;
                }
                Ok(acc)
            }
            Node::Power(b, ex) => self.power_nf(b, ex),
            Node::Apply(f, u) => self.apply_nf(*f, u),
            Node::Opaque { name, order, arg } => {
                let a = self.to_nf(arg)?;
                let ac = self.to_expr(&a);
                let k = Expr::opaque(name, *order, ac);
                Ok(Ctx::kernel_nf(self.register(k, KernelKind::Free)))
            }
        }
    }

    fn sum_balanced(&mut self, mut parts: Vec<Nf>) -> Nf {
        // group by denominator first: same-denominator additions are cheap
        parts.sort_by(|a, b| a.den.factors.cmp(&b.den.factors).then_with(|| a.den.coeff.cmp(&b.den.coeff)));
        while parts.len() > 1 {
            let mut next = Vec::with_capacity(parts.len().div_ceil(2));
            let mut it = parts.into_iter();
            while let Some(a) = it.next() {
                match it.next() {
                    Some(b) => next.push(self.add(&a, &b)),
                    None => next.push(a),
                }
            }
            parts = next;
        }
        parts.pop().unwrap_or_else(Nf::zero)
    }

    fn power_nf(&mut self, b: &Expr, ex: &Expr) -> Result<Nf> {
        if let Some(r) = ex.as_rational() {
            if r.is_integer() {
                let n = r.to_integer().to_i64().ok_or_else(|| Error::InvalidProblem("exponent too large".into()))?;
                let bv = self.to_nf(b)?;
                return self.pow(&bv, n);
            }
            if r.denom() == &BigInt::from(2) {
                let bv = self.to_nf(b)?;
                let s = self.sqrt(&bv)?;
                let n = r.numer().to_i64().ok_or_else(|| Error::InvalidProblem("exponent too large".into()))?;
                return self.pow(&s, n);
            }
            // other rational powers: kernel b^(1/q), raised to p
            self.non_rigorous = true;
            let bv = self.to_nf(b)?;
            let bc = self.to_expr(&bv);
            let q = r.denom().to_i64().unwrap();
            let k = Expr::rational(BigRational::new(BigInt::one(), BigInt::from(q)));
            let kern = bc.pow(&k);
            let v = Ctx::kernel_nf(self.register(kern, KernelKind::Free));
            let p = r.numer().to_i64().unwrap();
            return self.pow(&v, p);
        }
        self.non_rigorous = true;
        let bv = self.to_nf(b)?;
        let bc = self.to_expr(&bv);
        let xv = self.to_nf(ex)?;
        let xc = self.to_expr(&xv);
        let kern = bc.pow(&xc);
        Ok(Ctx::kernel_nf(self.register(kern, KernelKind::Free)))
    }

    fn canonical_arg(&mut self, u: &Expr) -> Result<Expr> {
        let v = self.to_nf(u)?;
        Ok(self.to_expr(&v))
    }

    fn sin_cos_kernels(&mut self, u: &Expr) -> (Var, Var) {
        let c = self.register(Expr::apply(Func::Cos, u.clone()), KernelKind::Free);
        let s = self.register(Expr::apply(Func::Sin, u.clone()), KernelKind::Sin { cos: c });
        (s, c)
    }

    /// `sin(n u)` and `cos(n u)` from de Moivre's formula.
    fn multiple_angle(&mut self, base: &Expr, n: i64) -> (Nf, Nf) {
        let (s, c) = self.sin_cos_kernels(base);
        let z = Nf { num: Poly::var(c).add(&Poly::var(0).mul(&Poly::var(s))), den: Den::one() };
        let zn = self.pow(&z, n).expect("positive power");
        let re = self.re(&zn).expect("kernels are real");
        let im = self.im(&zn).expect("kernels are real");
        (im, re)
    }

    fn apply_nf(&mut self, f: Func, u: &Expr) -> Result<Nf> {
        let arg = self.canonical_arg(u)?;
        match f {
            Func::Sin | Func::Cos => {
                if arg.is_zero() {
                    return Ok(if f == Func::Sin { Nf::zero() } else { Nf::one() });
                }
                if arg.has_negative_sign() {
                    let v = self.apply_nf(f, &arg.negated())?;
                    return Ok(if f == Func::Sin { v.neg() } else { v });
                }
                let (c, rest) = arg.split_coeff();
                if c.is_integer() && c > BigRational::one() && c <= BigRational::from_integer(MAX_MULTIPLE_ANGLE.into()) {
                    let n = c.to_integer().to_i64().unwrap();
                    let (sn, cn) = self.multiple_angle(&rest, n);
                    return Ok(if f == Func::Sin { sn } else { cn });
                }
                let (s, cv) = self.sin_cos_kernels(&arg);
                Ok(Ctx::kernel_nf(if f == Func::Sin { s } else { cv }))
            }
            Func::Tan => {
                let s = self.apply_nf(Func::Sin, &arg)?;
                let c = self.apply_nf(Func::Cos, &arg)?;
                self.div(&s, &c)
            }
            Func::Exp => {
                if arg.is_zero() {
                    return Ok(Nf::one());
                }
                if let Node::Apply(Func::Log, inner) = arg.node() {
                    return self.to_nf(inner);
                }
                Ok(Ctx::kernel_nf(self.register(Expr::apply(Func::Exp, arg), KernelKind::Free)))
            }
            Func::Log => {
                if arg.is_one() {
                    return Ok(Nf::zero());
                }
                Ok(Ctx::kernel_nf(self.register(Expr::apply(Func::Log, arg), KernelKind::Free)))
            }
        }
    }

    fn poly_symbols_positive(&self, p: &Poly) -> bool {
        p.vars().iter().all(|&v| {
            let k = &self.kernels[v as usize];
            matches!(k.kind, KernelKind::Free)
                && k.expr.as_symbol().is_some_and(|s| self.assumptions.is_positive(s))
        })
    }

    fn sqrt_kernel(&mut self, radicand: Poly) -> Var {
        let key = self.poly_expr_ro(&radicand).pow(&Expr::frac(1, 2));
        self.register(key, KernelKind::Sqrt { radicand })
    }

    /// Square root with the blunt `sqrt(u^2) = u` rule restricted to factors
    /// whose symbols are all declared positive.
    pub fn sqrt(&mut self, a: &Nf) -> Result<Nf> {
        if a.is_zero() {
            return Ok(Nf::zero());
        }
        // sqrt(N / (S^2 T)) = sqrt(N T) / (S T)
        let mut s_den = Den::one();
        let mut t_den = Den::one();
        let (dc_root, dc_rest) = square_part(&a.den.coeff);
        s_den.coeff = dc_root;
        t_den.coeff = dc_rest;
        for &(f, e) in &a.den.factors {
            if e / 2 > 0 {
                s_den.factors.push((f, e / 2));
            }
            if e % 2 == 1 {
                t_den.factors.push((f, 1));
            }
        }
        let t_poly = self.den_poly(&t_den);
        let radicand = self.reduce(a.num.mul(&t_poly));
        let outside_den = s_den.mul(&t_den);

        let (c, prim) = radicand.primitive();
        let negative = c.is_negative();
        let (out_int, in_int) = square_part(&c);
        let mut outside = Poly::constant(out_int);
        let mut inside = prim;

        let mono = inside.monomial_content();
        if !mono.is_one() {
            inside = inside.div_mono(&mono);
            let mut keep = Mono::one();
            for &(v, e) in mono.entries() {
                if self.poly_symbols_positive(&Poly::var(v)) {
                    outside = outside.mul(&Poly::monomial(Mono::var(v, e / 2), BigInt::one()));
                    keep = keep.with_var(v, e % 2);
                } else {
                    keep = keep.with_var(v, e);
                }
            }
            inside = inside.mul(&Poly::monomial(keep, BigInt::one()));
        }
        let alg_free = inside.vars().iter().all(|&v| !self.is_algebraic(v));
        if alg_free {
            if !inside.is_constant() {
                for (f, k) in poly::squarefree(&inside) {
                    if k >= 2 && self.poly_symbols_positive(&f) {
                        let half = f.pow(k / 2);
                        outside = outside.mul(&half);
                        inside = inside.div_exact(&half.mul(&half)).expect("square factor divides");
                    }
                }
            }
        } else {
            self.non_rigorous = true;
        }
        let mut root = outside;
        if negative {
            let positive_monomial =
                inside.len() == 1 && inside.leading_coeff().is_positive() && self.poly_symbols_positive(&inside);
            if inside.is_one() || positive_monomial {
                root = root.mul(&Poly::var(0));
            } else {
                inside = inside.neg();
            }
        }
        if !in_int.is_one() {
            let t = self.sqrt_kernel(Poly::constant(in_int));
            root = root.mul(&Poly::var(t));
        }
        if !inside.is_one() {
            let t = self.sqrt_kernel(inside);
            root = root.mul(&Poly::var(t));
        }
        let root = Nf { num: self.reduce(root), den: Den::one() };
        let od = Nf { num: Poly::one(), den: outside_den };
        Ok(self.mul(&root, &od))
    }

    // --------------------------------------------------------- calculus ---

    fn kernel_derivative(&mut self, v: Var, var: &Sym) -> Result<Nf> {
        if let Some(d) = self.kernel_deriv.get(&(v, var.clone())) {
            return Ok(d.clone());
        }
        let k = self.kernels[v as usize].clone();
        let d = match (&k.kind, k.expr.node()) {
            (KernelKind::Imaginary, _) => Nf::zero(),
            (_, Node::Symbol(s)) => {
                if s == var {
                    Nf::one()
                } else {
                    Nf::zero()
                }
            }
            (KernelKind::Sqrt { radicand }, _) => {
                // (sqrt P)' = P' sqrt(P) / (2 P)
                let p = self.from_poly(radicand.clone());
                let dp = self.diff(&p, var)?;
                let t = Ctx::kernel_nf(v);
                let num = self.mul(&dp, &t);
                let two_p = self.scale(&p, &BigRational::from_integer(2.into()));
                self.div(&num, &two_p)?
            }
            _ => {
                let de = calculus::differentiate(&k.expr, var, 1);
                self.to_nf(&de)?
            }
        };
        self.kernel_deriv.insert((v, var.clone()), d.clone());
        Ok(d)
    }

    fn poly_derivative(&mut self, p: &Poly, var: &Sym) -> Result<Nf> {
        let mut acc = Vec::new();
        for v in p.vars() {
            let dk = self.kernel_derivative(v, var)?;
            if dk.is_zero() {
                continue;
            }
            let partial = self.from_poly(p.derivative(v));
            acc.push(self.mul(&partial, &dk));
        }
        Ok(self.sum_balanced(acc))
    }

    /// `f' / f` for a base factor.
    fn factor_log_derivative(&mut self, id: u32, var: &Sym) -> Result<Nf> {
        if let Some(d) = self.factor_log_deriv.get(&(id, var.clone())) {
            return Ok(d.clone());
        }
        let f = self.factors[id as usize].clone();
        let df = self.poly_derivative(&f, var)?;
        let fd = Nf { num: Poly::one(), den: Den { coeff: BigInt::one(), factors: SmallVec::from_slice(&[(id, 1)]) } };
        let d = self.mul(&df, &fd);
        self.factor_log_deriv.insert((id, var.clone()), d.clone());
        Ok(d)
    }

    pub fn diff(&mut self, a: &Nf, var: &Sym) -> Result<Nf> {
        if a.is_zero() {
            return Ok(Nf::zero());
        }
        let inv_den = Nf { num: Poly::one(), den: a.den.clone() };
        let dnum = self.poly_derivative(&a.num, var)?;
        let mut result = self.mul(&dnum, &inv_den);
        if !a.den.factors.is_empty() {
            let mut logd = Vec::new();
            for &(f, e) in &a.den.factors.clone() {
                let ld = self.factor_log_derivative(f, var)?;
                if !ld.is_zero() {
                    logd.push(self.scale(&ld, &BigRational::from_integer(BigInt::from(e))));
                }
            }
            let s = self.sum_balanced(logd);
            if !s.is_zero() {
                let whole = Nf { num: a.num.clone(), den: a.den.clone() };
                let t = self.mul(&whole, &s);
                result = self.sub(&result, &t);
            }
        }
        Ok(result)
    }

    pub fn diff_n(&mut self, a: &Nf, var: &Sym, k: u32) -> Result<Nf> {
        let mut r = a.clone();
        for _ in 0..k {
            r = self.diff(&r, var)?;
        }
        Ok(r)
    }

    /// True when `a` does not depend on `var`.
    pub fn is_free_of(&mut self, a: &Nf, var: &Sym) -> bool {
        let vars: Vec<Var> = a.num.vars();
        let mut dvars: Vec<Var> = Vec::new();
        for &(f, _) in &a.den.factors {
            dvars.extend(self.factors[f as usize].vars());
        }
        vars.into_iter().chain(dvars).all(|v| !self.kernels[v as usize].expr.depends_on(var))
    }
}

/// Splits `n > 0` as `r^2 * s` with `s` square-free (by trial division).
fn square_part(n: &BigInt) -> (BigInt, BigInt) {
    if n.is_zero() {
        return (BigInt::zero(), BigInt::one());
    }
    let mut r = BigInt::one();
    let mut s = BigInt::one();
    let mut rest = n.abs();
    let mut p = BigInt::from(2);
    let limit = BigInt::from(100_000);
    while &p * &p <= rest && p < limit {
        let mut k = 0u32;
        while (&rest % &p).is_zero() {
            rest /= &p;
            k += 1;
        }
        r *= num_traits::pow(p.clone(), (k / 2) as usize);
        if k % 2 == 1 {
            s *= &p;
        }
        p += 1;
    }
    let root = num_integer::Roots::sqrt(&rest);
    if &root * &root == rest {
        r *= root;
    } else {
        s *= rest;
    }
    (r, s)
}

/// Normalizes `e` and converts it back: the together-form canonical value.
pub fn normal_expr(ctx: &mut Ctx, e: &Expr) -> Result<Expr> {
    let v = ctx.to_nf(e)?;
    Ok(ctx.to_expr(&v))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parse::parse_expr;

    fn nf_eq(a: &str, b: &str) -> bool {
        let mut ctx = Ctx::default();
        let x = ctx.to_nf(&parse_expr(a).unwrap()).unwrap();
        let y = ctx.to_nf(&parse_expr(b).unwrap()).unwrap();
        let d = ctx.sub(&x, &y);
        d.is_zero()
    }

    fn simp(s: &str) -> Expr {
        let mut ctx = Ctx::default();
        normal_expr(&mut ctx, &parse_expr(s).unwrap()).unwrap()
    }

    #[test]
    fn pythagoras_and_fractions() {
        assert!(nf_eq("sin(x)^2 + cos(x)^2", "1"));
        assert!(nf_eq("(x^2 - 1)/(x - 1)", "x + 1"));
        assert!(nf_eq("1/x + 1/(x - 1)", "(2*x - 1)/(x*(x - 1))"));
        assert!(nf_eq("sin(2*x)", "2*sin(x)*cos(x)"));
        assert!(nf_eq("tan(x)*cos(x)", "sin(x)"));
    }

    #[test]
    fn example_a_discriminant() {
        let d = "((x*cos(x)^2 + sin(x)^2) - (x*sin(x)^2 + cos(x)^2))^2 + 4*((x - 1)*cos(x)*sin(x))^2";
        assert!(nf_eq(d, "(x - 1)^2"));
    }

    #[test]
    fn radicals() {
        assert!(nf_eq("sqrt(x)^2", "x"));
        assert!(nf_eq("1/sqrt(x)", "sqrt(x)/x"));
        assert!(nf_eq("sqrt(8)", "2*sqrt(2)"));
        assert!(nf_eq("1/(1 + sqrt(2))", "sqrt(2) - 1"));
        assert_eq!(simp("sqrt(-1)"), Expr::i());
    }

    #[test]
    fn positivity_extracts_squares() {
        let mut asm = Assumptions::new();
        asm.declare_positive("x").unwrap();
        let mut ctx = Ctx::new(asm);
        let e = parse_expr("sqrt((x - 1)^2)").unwrap();
        let v = ctx.to_nf(&e).unwrap();
        assert_eq!(ctx.to_expr(&v), parse_expr("x - 1").unwrap());
        let mut plain = Ctx::default();
        let w = plain.to_nf(&e).unwrap();
        assert_ne!(plain.to_expr(&w), parse_expr("x - 1").unwrap());
    }

    #[test]
    fn imaginary_parts() {
        let mut ctx = Ctx::default();
        let v = ctx.to_nf(&parse_expr("1/(1 + i)").unwrap()).unwrap();
        let re = ctx.re(&v).unwrap();
        let im = ctx.im(&v).unwrap();
        assert_eq!(ctx.to_expr(&re), Expr::frac(1, 2));
        assert_eq!(ctx.to_expr(&im), Expr::frac(-1, 2));
        let c = ctx.cc(&v).unwrap();
        let cc = ctx.cc(&c).unwrap();
        assert_eq!(cc, v);
    }

    #[test]
    fn derivatives() {
        let mut ctx = Ctx::default();
        let x: Sym = "x".into();
        let v = ctx.to_nf(&parse_expr("coef*x/(x - p)").unwrap()).unwrap();
        let d2 = ctx.diff_n(&v, &x, 2).unwrap();
        let want = ctx.to_nf(&parse_expr("2*coef*p/(x - p)^3").unwrap()).unwrap();
        assert_eq!(d2, want);
        let s = ctx.to_nf(&parse_expr("sqrt(x)").unwrap()).unwrap();
        let ds = ctx.diff(&s, &x).unwrap();
        let want = ctx.to_nf(&parse_expr("1/(2*sqrt(x))").unwrap()).unwrap();
        assert_eq!(ds, want);
    }

    #[test]
    fn opaque_functions_chain_rule() {
        let mut ctx = Ctx::default();
        let x: Sym = "x".into();
        let v = ctx.to_nf(&parse_expr("h(x^2)").unwrap()).unwrap();
        let d = ctx.diff(&v, &x).unwrap();
        let want = ctx.to_nf(&parse_expr("2*x*h'(x^2)").unwrap()).unwrap();
        assert_eq!(d, want);
    }
}
