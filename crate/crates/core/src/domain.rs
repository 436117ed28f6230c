//! Arithmetic back ends for the recurrences.
//!
//! [`NfDomain`] keeps every intermediate value in normal form, so sums
//! collapse as they are built and the zero test is exact. [`TreeDomain`]
//! keeps plain canonical trees and only normalizes values of orders up to a
//! threshold; it is the cheap path for inputs whose higher orders are too
//! large to be worth simplifying.

use num_bigint::BigInt;
use num_rational::BigRational;

use crate::calculus;
use crate::error::Result;
use crate::expr::{Assumptions, Expr, Sym};
use crate::normal::{Ctx, Nf};

pub trait Domain {
    type V: Clone + std::fmt::Debug;

    /// The independent variable.
    fn var(&self) -> &Sym;
    fn lift(&mut self, e: &Expr) -> Result<Self::V>;
    fn to_expr(&mut self, a: &Self::V) -> Expr;

    fn zero(&self) -> Self::V;
    fn one(&self) -> Self::V;
    fn i(&mut self) -> Self::V;
    fn rational(&mut self, r: &BigRational) -> Self::V;

    fn add(&mut self, a: &Self::V, b: &Self::V) -> Self::V;
    fn sub(&mut self, a: &Self::V, b: &Self::V) -> Self::V;
    fn mul(&mut self, a: &Self::V, b: &Self::V) -> Self::V;
    fn div(&mut self, a: &Self::V, b: &Self::V) -> Result<Self::V>;
    fn scale(&mut self, a: &Self::V, r: &BigRational) -> Self::V;
    fn neg(&mut self, a: &Self::V) -> Self::V;
    fn sqrt(&mut self, a: &Self::V) -> Result<Self::V>;

    fn diff(&mut self, a: &Self::V) -> Result<Self::V>;
    fn integrate(&mut self, a: &Self::V) -> Result<Self::V>;
    fn cc(&mut self, a: &Self::V) -> Result<Self::V>;
    fn re(&mut self, a: &Self::V) -> Result<Self::V>;
    fn im(&mut self, a: &Self::V) -> Result<Self::V>;

    fn is_zero(&mut self, a: &Self::V) -> Result<bool>;

    /// Hook applied to each stored order-`order` quantity.
    fn settle(&mut self, a: Self::V, _order: usize) -> Result<Self::V> {
        Ok(a)
    }

    /// Whether any step left the exactly decidable class.
    fn non_rigorous(&self) -> bool;

    fn int(&mut self, n: i64) -> Self::V {
        self.rational(&BigRational::from_integer(BigInt::from(n)))
    }

    fn product(&mut self, xs: &[&Self::V]) -> Self::V {
        let mut acc = self.one();
        for x in xs {
            acc = self.mul(&acc, x);
        }
        acc
    }
}

pub struct NfDomain {
    pub ctx: Ctx,
    var: Sym,
}

impl NfDomain {
    pub fn new(var: &str, assumptions: Assumptions) -> NfDomain {
        NfDomain { ctx: Ctx::new(assumptions), var: var.into() }
    }
}

impl Domain for NfDomain {
    type V = Nf;

    fn var(&self) -> &Sym {
        &self.var
    }
    fn lift(&mut self, e: &Expr) -> Result<Nf> {
        self.ctx.to_nf(e)
    }
    fn to_expr(&mut self, a: &Nf) -> Expr {
        self.ctx.to_expr(a)
    }
    fn zero(&self) -> Nf {
        Nf::zero()
    }
    fn one(&self) -> Nf {
        Nf::one()
    }
    fn i(&mut self) -> Nf {
        self.ctx.i()
    }
    fn rational(&mut self, r: &BigRational) -> Nf {
        Nf::rational(r)
    }
    fn add(&mut self, a: &Nf, b: &Nf) -> Nf {
        self.ctx.add(a, b)
    }
    fn sub(&mut self, a: &Nf, b: &Nf) -> Nf {
        self.ctx.sub(a, b)
    }
    fn mul(&mut self, a: &Nf, b: &Nf) -> Nf {
        self.ctx.mul(a, b)
    }
    fn div(&mut self, a: &Nf, b: &Nf) -> Result<Nf> {
        self.ctx.div(a, b)
    }
    fn scale(&mut self, a: &Nf, r: &BigRational) -> Nf {
        self.ctx.scale(a, r)
    }
    fn neg(&mut self, a: &Nf) -> Nf {
        a.neg()
    }
    fn sqrt(&mut self, a: &Nf) -> Result<Nf> {
        self.ctx.sqrt(a)
    }
    fn diff(&mut self, a: &Nf) -> Result<Nf> {
        let v = self.var.clone();
        self.ctx.diff(a, &v)
    }
    fn integrate(&mut self, a: &Nf) -> Result<Nf> {
        let v = self.var.clone();
        calculus::integrate_nf(&mut self.ctx, a, &v)
    }
    fn cc(&mut self, a: &Nf) -> Result<Nf> {
        self.ctx.cc(a)
    }
    fn re(&mut self, a: &Nf) -> Result<Nf> {
        self.ctx.re(a)
    }
    fn im(&mut self, a: &Nf) -> Result<Nf> {
        self.ctx.im(a)
    }
    fn is_zero(&mut self, a: &Nf) -> Result<bool> {
        Ok(a.is_zero())
    }
    fn non_rigorous(&self) -> bool {
        self.ctx.non_rigorous()
    }
}

/// Canonical trees; values of order `<= simplify_upto` are normalized when
/// stored, the rest are kept as built.
pub struct TreeDomain {
    pub ctx: Ctx,
    var: Sym,
    pub simplify_upto: usize,
}

impl TreeDomain {
    pub fn new(var: &str, assumptions: Assumptions, simplify_upto: usize) -> TreeDomain {
        TreeDomain { ctx: Ctx::new(assumptions), var: var.into(), simplify_upto }
    }

    fn normal(&mut self, e: &Expr) -> Result<Expr> {
        let v = self.ctx.to_nf(e)?;
        Ok(self.ctx.to_expr(&v))
    }
}

impl Domain for TreeDomain {
    type V = Expr;

    fn var(&self) -> &Sym {
        &self.var
    }
    fn lift(&mut self, e: &Expr) -> Result<Expr> {
        Ok(e.clone())
    }
    fn to_expr(&mut self, a: &Expr) -> Expr {
        a.clone()
    }
    fn zero(&self) -> Expr {
        Expr::zero()
    }
    fn one(&self) -> Expr {
        Expr::one()
    }
    fn i(&mut self) -> Expr {
        Expr::i()
    }
    fn rational(&mut self, r: &BigRational) -> Expr {
        Expr::rational(r.clone())
    }
    fn add(&mut self, a: &Expr, b: &Expr) -> Expr {
        a + b
    }
    fn sub(&mut self, a: &Expr, b: &Expr) -> Expr {
        a - b
    }
    fn mul(&mut self, a: &Expr, b: &Expr) -> Expr {
        a * b
    }
    fn div(&mut self, a: &Expr, b: &Expr) -> Result<Expr> {
        if b.is_zero() {
            return Err(crate::Error::DivisionByZero);
        }
        Ok(a / b)
    }
    fn scale(&mut self, a: &Expr, r: &BigRational) -> Expr {
        a * &Expr::rational(r.clone())
    }
    fn neg(&mut self, a: &Expr) -> Expr {
        -a
    }
    fn sqrt(&mut self, a: &Expr) -> Result<Expr> {
        let v = self.ctx.to_nf(a)?;
        let r = self.ctx.sqrt(&v)?;
        Ok(self.ctx.to_expr(&r))
    }
    fn diff(&mut self, a: &Expr) -> Result<Expr> {
        Ok(calculus::differentiate(a, &self.var, 1))
    }
    fn integrate(&mut self, a: &Expr) -> Result<Expr> {
        let v = self.var.clone();
        calculus::integrate(&mut self.ctx, a, &v)
    }
    fn cc(&mut self, a: &Expr) -> Result<Expr> {
        if a.symbols().iter().any(|s| !self.ctx.assumptions().is_real(s)) {
            return calculus::cc(&mut self.ctx, a);
        }
        Ok(a.conjugate_formal())
    }
    fn re(&mut self, a: &Expr) -> Result<Expr> {
        let c = self.cc(a)?;
        Ok((a + &c) * Expr::frac(1, 2))
    }
    fn im(&mut self, a: &Expr) -> Result<Expr> {
        let c = self.cc(a)?;
        Ok((a - &c) * (Expr::i() * Expr::frac(-1, 2)))
    }
    fn is_zero(&mut self, a: &Expr) -> Result<bool> {
        Ok(self.ctx.to_nf(a)?.is_zero())
    }
    fn settle(&mut self, a: Expr, order: usize) -> Result<Expr> {
        if order <= self.simplify_upto {
            self.normal(&a)
        } else {
            Ok(a)
        }
    }
    fn non_rigorous(&self) -> bool {
        self.ctx.non_rigorous()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parse::parse_expr;

    fn check<D: Domain>(d: &mut D) {
        let a = d.lift(&parse_expr("x*sin(x) + i").unwrap()).unwrap();
        let da = d.diff(&a).unwrap();
        let want = d.lift(&parse_expr("sin(x) + x*cos(x)").unwrap()).unwrap();
        let diff = d.sub(&da, &want);
        assert!(d.is_zero(&diff).unwrap());
        let re = d.re(&a).unwrap();
        let im = d.im(&a).unwrap();
        let i = d.i();
        let back = d.mul(&i, &im);
        let back = d.add(&re, &back);
        let diff = d.sub(&back, &a);
        assert!(d.is_zero(&diff).unwrap());
    }

    #[test]
    fn both_domains_agree_on_basics() {
        check(&mut NfDomain::new("x", Assumptions::new()));
        check(&mut TreeDomain::new("x", Assumptions::new(), 0));
    }
}
