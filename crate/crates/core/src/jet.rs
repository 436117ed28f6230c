//! Truncated Taylor series ("jets") evaluated directly from expression
//! trees. This path shares nothing with the normal-form machinery and is
//! used to cross-check it.

use std::collections::HashMap;

use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rug::ops::Pow;
use rustc_hash::FxHashMap;

use crate::error::{Error, Result};
use crate::expr::{Expr, Func, Node};

/// Below this modulus a base is treated as zero where a branch point or a
/// pole would follow.
pub const SINGULAR_EPS: f64 = 1e-12;

pub trait Scalar: Clone + std::fmt::Debug {
    fn zero() -> Self;
    fn one() -> Self;
    fn i() -> Self;
    fn from_f64(x: f64) -> Self;
    fn from_rational(r: &BigRational) -> Self;
    fn add(&self, o: &Self) -> Self;
    fn sub(&self, o: &Self) -> Self;
    fn mul(&self, o: &Self) -> Self;
    fn div(&self, o: &Self) -> Self;
    fn neg(&self) -> Self;
    fn exp(&self) -> Self;
    fn ln(&self) -> Self;
    fn sin(&self) -> Self;
    fn cos(&self) -> Self;
    /// Principal branch of `self^r`.
    fn pow_rational(&self, r: &BigRational) -> Self;
    fn conj(&self) -> Self;
    fn abs(&self) -> f64;
    fn to_c64(&self) -> Complex64;

    fn scale_int(&self, k: i64) -> Self {
        self.mul(&Self::from_f64(k as f64))
    }
}

impl Scalar for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn one() -> Self {
        Complex64::new(1.0, 0.0)
    }
    fn i() -> Self {
        Complex64::new(0.0, 1.0)
    }
    fn from_f64(x: f64) -> Self {
        Complex64::new(x, 0.0)
    }
    fn from_rational(r: &BigRational) -> Self {
        Complex64::new(r.to_f64().unwrap_or(f64::NAN), 0.0)
    }
    fn add(&self, o: &Self) -> Self {
        self + o
    }
    fn sub(&self, o: &Self) -> Self {
        self - o
    }
    fn mul(&self, o: &Self) -> Self {
        self * o
    }
    fn div(&self, o: &Self) -> Self {
        self / o
    }
    fn neg(&self) -> Self {
        -self
    }
    fn exp(&self) -> Self {
        Complex64::exp(*self)
    }
    fn ln(&self) -> Self {
        Complex64::ln(*self)
    }
    fn sin(&self) -> Self {
        Complex64::sin(*self)
    }
    fn cos(&self) -> Self {
        Complex64::cos(*self)
    }
    fn pow_rational(&self, r: &BigRational) -> Self {
        if r.is_integer() {
            if let Some(k) = r.to_integer().to_i32() {
                return self.powi(k);
            }
        }
        if *r == BigRational::new(1.into(), 2.into()) {
            return Complex64::sqrt(*self);
        }
        self.powf(r.to_f64().unwrap_or(f64::NAN))
    }
    fn conj(&self) -> Self {
        Complex64::conj(self)
    }
    fn abs(&self) -> f64 {
        self.norm()
    }
    fn to_c64(&self) -> Complex64 {
        *self
    }
}

/// Multiple-precision complex scalar.
#[derive(Clone, Debug)]
pub struct Hp(pub rug::Complex);

pub const HP_BITS: u32 = 192;

impl Hp {
    fn wrap(c: rug::Complex) -> Hp {
        Hp(c)
    }
}

fn big_to_rug(n: &BigInt) -> rug::Integer {
    n.to_string().parse().expect("integer conversion")
}

impl Scalar for Hp {
    fn zero() -> Self {
        Hp(rug::Complex::new(HP_BITS))
    }
    fn one() -> Self {
        Hp(rug::Complex::with_val(HP_BITS, 1))
    }
    fn i() -> Self {
        Hp(rug::Complex::with_val(HP_BITS, (0, 1)))
    }
    fn from_f64(x: f64) -> Self {
        Hp(rug::Complex::with_val(HP_BITS, x))
    }
    fn from_rational(r: &BigRational) -> Self {
        let q = rug::Rational::from((big_to_rug(r.numer()), big_to_rug(r.denom())));
        Hp(rug::Complex::with_val(HP_BITS, q))
    }
    fn add(&self, o: &Self) -> Self {
        Hp::wrap(rug::Complex::with_val(HP_BITS, &self.0 + &o.0))
    }
    fn sub(&self, o: &Self) -> Self {
        Hp::wrap(rug::Complex::with_val(HP_BITS, &self.0 - &o.0))
    }
    fn mul(&self, o: &Self) -> Self {
        Hp::wrap(rug::Complex::with_val(HP_BITS, &self.0 * &o.0))
    }
    fn div(&self, o: &Self) -> Self {
        Hp::wrap(rug::Complex::with_val(HP_BITS, &self.0 / &o.0))
    }
    fn neg(&self) -> Self {
        Hp::wrap(rug::Complex::with_val(HP_BITS, -&self.0))
    }
    fn exp(&self) -> Self {
        Hp(self.0.clone().exp())
    }
    fn ln(&self) -> Self {
        Hp(self.0.clone().ln())
    }
    fn sin(&self) -> Self {
        Hp(self.0.clone().sin())
    }
    fn cos(&self) -> Self {
        Hp(self.0.clone().cos())
    }
    fn pow_rational(&self, r: &BigRational) -> Self {
        if r.is_integer() {
            if let Some(k) = r.to_integer().to_i32() {
                return Hp(self.0.clone().pow(k));
            }
        }
        if *r == BigRational::new(1.into(), 2.into()) {
            return Hp(self.0.clone().sqrt());
        }
        let e = Hp::from_rational(r);
        Hp(self.0.clone().pow(&e.0))
    }
    fn conj(&self) -> Self {
        Hp(self.0.clone().conj())
    }
    fn abs(&self) -> f64 {
        self.to_c64().norm()
    }
    fn to_c64(&self) -> Complex64 {
        Complex64::new(self.0.real().to_f64(), self.0.imag().to_f64())
    }
}

/// Taylor coefficients `c[k] = f^(k)(x0)/k!`.
#[derive(Clone, Debug)]
pub struct Jet<T: Scalar> {
    pub c: Vec<T>,
}

impl<T: Scalar> Jet<T> {
    pub fn constant(v: T, len: usize) -> Jet<T> {
        let mut c = vec![T::zero(); len];
        c[0] = v;
        Jet { c }
    }

    pub fn variable(x0: T, len: usize) -> Jet<T> {
        let mut j = Jet::constant(x0, len);
        if len > 1 {
            j.c[1] = T::one();
        }
        j
    }

    pub fn len(&self) -> usize {
        self.c.len()
    }

    pub fn is_empty(&self) -> bool {
        self.c.is_empty()
    }

    pub fn value(&self) -> &T {
        &self.c[0]
    }

    /// k-th derivative at the expansion point.
    pub fn derivative_value(&self, k: usize) -> T {
        let mut f = 1.0f64;
        for j in 2..=k {
            f *= j as f64;
        }
        self.c[k].mul(&T::from_f64(f))
    }

    fn zip(&self, o: &Jet<T>, f: impl Fn(&T, &T) -> T) -> Jet<T> {
        let n = self.len().min(o.len());
        Jet { c: (0..n).map(|k| f(&self.c[k], &o.c[k])).collect() }
    }

    pub fn add(&self, o: &Jet<T>) -> Jet<T> {
        self.zip(o, T::add)
    }

    pub fn sub(&self, o: &Jet<T>) -> Jet<T> {
        self.zip(o, T::sub)
    }

    pub fn neg(&self) -> Jet<T> {
        Jet { c: self.c.iter().map(T::neg).collect() }
    }

    pub fn scale(&self, s: &T) -> Jet<T> {
        Jet { c: self.c.iter().map(|a| a.mul(s)).collect() }
    }

    pub fn mul(&self, o: &Jet<T>) -> Jet<T> {
        let n = self.len().min(o.len());
        let mut c = Vec::with_capacity(n);
        for k in 0..n {
            let mut s = T::zero();
            for j in 0..=k {
                s = s.add(&self.c[j].mul(&o.c[k - j]));
            }
            c.push(s);
        }
        Jet { c }
    }

    pub fn div(&self, o: &Jet<T>) -> Result<Jet<T>> {
        if self.is_empty() || o.is_empty() {
            return Ok(Jet { c: Vec::new() });
        }
        if o.c[0].abs() < SINGULAR_EPS {
            return Err(Error::SingularPoint("division by a vanishing series".into()));
        }
        let n = self.len().min(o.len());
        let mut q: Vec<T> = Vec::with_capacity(n);
        for k in 0..n {
            let mut s = self.c[k].clone();
            for j in 1..=k {
                s = s.sub(&o.c[j].mul(&q[k - j]));
            }
            q.push(s.div(&o.c[0]));
        }
        Ok(Jet { c: q })
    }

    pub fn exp(&self) -> Jet<T> {
        let n = self.len();
        let mut e = vec![self.c[0].exp()];
        for k in 1..n {
            let mut s = T::zero();
            for j in 1..=k {
                s = s.add(&self.c[j].mul(&e[k - j]).scale_int(j as i64));
            }
            e.push(s.div(&T::from_f64(k as f64)));
        }
        Jet { c: e }
    }

    pub fn ln(&self) -> Result<Jet<T>> {
        if self.c[0].abs() < SINGULAR_EPS {
            return Err(Error::SingularPoint("logarithm of a vanishing series".into()));
        }
        if self.len() == 1 {
            return Ok(Jet { c: vec![self.c[0].ln()] });
        }
        let d = self.derivative().div(&self.truncate(self.len() - 1))?;
        Ok(d.integral(self.c[0].ln()))
    }

    /// Joint recurrence for `(sin, cos)`.
    pub fn sin_cos(&self) -> (Jet<T>, Jet<T>) {
        let n = self.len();
        let mut s = vec![self.c[0].sin()];
        let mut c = vec![self.c[0].cos()];
        for k in 1..n {
            let mut ss = T::zero();
            let mut cc = T::zero();
            for j in 1..=k {
                let ja = self.c[j].scale_int(j as i64);
                ss = ss.add(&ja.mul(&c[k - j]));
                cc = cc.sub(&ja.mul(&s[k - j]));
            }
            let kk = T::from_f64(k as f64);
            s.push(ss.div(&kk));
            c.push(cc.div(&kk));
        }
        (Jet { c: s }, Jet { c })
    }

    pub fn powi(&self, n: i64) -> Result<Jet<T>> {
        if n < 0 {
            let p = self.powi(-n)?;
            return Jet::constant(T::one(), self.len()).div(&p);
        }
        let mut acc = Jet::constant(T::one(), self.len());
        let mut base = self.clone();
        let mut k = n;
        while k > 0 {
            if k & 1 == 1 {
                acc = acc.mul(&base);
            }
            base = base.mul(&base);
            k >>= 1;
        }
        Ok(acc)
    }

    /// `self^r` on the principal branch at the expansion point.
    pub fn pow_rational(&self, r: &BigRational) -> Result<Jet<T>> {
        if r.is_integer() {
            if let Some(k) = r.to_integer().to_i64() {
                return self.powi(k);
            }
        }
        let a0 = &self.c[0];
        if a0.abs() < SINGULAR_EPS {
            return Err(Error::SingularPoint("fractional power at a branch point".into()));
        }
        let rf = T::from_rational(r);
        let n = self.len();
        let mut p = vec![a0.pow_rational(r)];
        for k in 1..n {
            let mut s = T::zero();
            for j in 1..=k {
                let w = rf.scale_int(j as i64).sub(&T::from_f64((k - j) as f64));
                s = s.add(&w.mul(&self.c[j]).mul(&p[k - j]));
            }
            p.push(s.div(&a0.scale_int(k as i64)));
        }
        Ok(Jet { c: p })
    }

    pub fn derivative(&self) -> Jet<T> {
        Jet { c: (1..self.len()).map(|k| self.c[k].scale_int(k as i64)).collect() }
    }

    pub fn integral(&self, c0: T) -> Jet<T> {
        let mut c = vec![c0];
        for (k, a) in self.c.iter().enumerate() {
            c.push(a.div(&T::from_f64((k + 1) as f64)));
        }
        Jet { c }
    }

    pub fn truncate(&self, len: usize) -> Jet<T> {
        Jet { c: self.c[..len.min(self.len())].to_vec() }
    }

    /// Coefficient-wise conjugate; valid along a real variable.
    pub fn conj(&self) -> Jet<T> {
        Jet { c: self.c.iter().map(T::conj).collect() }
    }

    /// `f(u)` where `f` is given by its Taylor coefficients about `u.c[0]`.
    pub fn compose(f: &Jet<T>, u: &Jet<T>) -> Jet<T> {
        let n = u.len();
        let mut du = u.clone();
        du.c[0] = T::zero();
        let mut acc = Jet::constant(f.c[f.len() - 1].clone(), n);
        for k in (0..f.len() - 1).rev() {
            acc = acc.mul(&du);
            acc.c[0] = acc.c[0].add(&f.c[k]);
        }
        acc
    }
}

/// A user function `name(param) := body`.
#[derive(Clone, Debug)]
pub struct FunctionDef {
    pub param: String,
    pub body: Expr,
}

/// Evaluation environment: one expansion variable, numeric parameters and
/// definitions for uninterpreted functions.
#[derive(Clone, Debug)]
pub struct Env<T: Scalar> {
    pub var: String,
    pub point: T,
    pub params: HashMap<String, T>,
    pub defs: HashMap<String, FunctionDef>,
}

impl<T: Scalar> Env<T> {
    pub fn new(var: &str, point: T) -> Env<T> {
        Env { var: var.to_string(), point, params: HashMap::new(), defs: HashMap::new() }
    }

    pub fn param(mut self, name: &str, v: T) -> Env<T> {
        self.params.insert(name.to_string(), v);
        self
    }

    pub fn define(mut self, name: &str, param: &str, body: Expr) -> Env<T> {
        self.defs.insert(name.to_string(), FunctionDef { param: param.to_string(), body });
        self
    }
}

/// Jet of `e` with `order + 1` coefficients.
pub fn eval_jet<T: Scalar>(e: &Expr, env: &Env<T>, order: usize) -> Result<Jet<T>> {
    let mut memo = FxHashMap::default();
    eval_rec(e, env, order + 1, &mut memo, 0)
}

/// Plain value of `e` at the environment's point.
pub fn eval_value<T: Scalar>(e: &Expr, env: &Env<T>) -> Result<T> {
    Ok(eval_jet(e, env, 0)?.c[0].clone())
}

fn eval_rec<T: Scalar>(
    e: &Expr,
    env: &Env<T>,
    len: usize,
    memo: &mut FxHashMap<usize, Jet<T>>,
    depth: usize,
) -> Result<Jet<T>> {
    if let Some(j) = memo.get(&e.id()) {
        return Ok(j.clone());
    }
    let j = match e.node() {
        Node::Rational(r) => Jet::constant(T::from_rational(r), len),
        Node::ImaginaryUnit => Jet::constant(T::i(), len),
        Node::Symbol(s) => {
            if **s == *env.var {
                Jet::variable(env.point.clone(), len)
            } else if let Some(v) = env.params.get(&**s) {
                Jet::constant(v.clone(), len)
            } else {
                return Err(Error::UnboundSymbol(s.to_string()));
            }
        }
        Node::Sum(ts) => {
            let mut acc = Jet::constant(T::zero(), len);
            for t in ts.iter() {
                acc = acc.add(&eval_rec(t, env, len, memo, depth)?);
            }
            acc
        }
        Node::Product(fs) => {
            // divide once by the product of negative-power factors
            let mut num = Jet::constant(T::one(), len);
            let mut den = Jet::constant(T::one(), len);
            for f in fs.iter() {
                match f.node() {
                    Node::Power(b, ex) if matches!(ex.node(), Node::Rational(r) if r.is_integer() && *r < BigRational::zero()) => {
                        let Node::Rational(r) = ex.node() else { unreachable!() };
                        let k = (-r).to_integer().to_i64().unwrap_or(i64::MAX);
                        let bj = eval_rec(b, env, len, memo, depth)?;
                        den = den.mul(&bj.powi(k)?);
                    }
                    _ => num = num.mul(&eval_rec(f, env, len, memo, depth)?),
                }
            }
            num.div(&den)?
        }
        Node::Power(b, ex) => {
            let bj = eval_rec(b, env, len, memo, depth)?;
            match ex.node() {
                Node::Rational(r) => bj.pow_rational(r)?,
                _ => {
                    let xj = eval_rec(ex, env, len, memo, depth)?;
                    xj.mul(&bj.ln()?).exp()
                }
            }
        }
        Node::Apply(f, u) => {
            let uj = eval_rec(u, env, len, memo, depth)?;
            match f {
                Func::Sin => uj.sin_cos().0,
                Func::Cos => uj.sin_cos().1,
                Func::Tan => {
                    let (s, c) = uj.sin_cos();
                    s.div(&c)?
                }
                Func::Exp => uj.exp(),
                Func::Log => uj.ln()?,
            }
        }
        Node::Opaque { name, order, arg } => {
            let def = env.defs.get(&**name).ok_or_else(|| Error::UnboundFunction(name.to_string()))?;
            if depth > 32 {
                return Err(Error::UnboundFunction(format!("{name} (recursive definition)")));
            }
            let uj = eval_rec(arg, env, len, memo, depth)?;
            let inner = Env {
                var: def.param.clone(),
                point: uj.c[0].clone(),
                params: env.params.clone(),
                defs: env.defs.clone(),
            };
            let mut fj = eval_rec(&def.body, &inner, len + *order as usize, &mut FxHashMap::default(), depth + 1)?;
            for _ in 0..*order {
                fj = fj.derivative();
            }
            Jet::compose(&fj, &uj)
        }
    };
    memo.insert(e.id(), j.clone());
    Ok(j)
}

/// Randomized zero test: evaluates `e` at `points` random real assignments
/// of its symbols in [1.1, 2.9]. Expressions with uninterpreted functions
/// are never declared zero.
pub fn numerically_zero(e: &Expr, points: usize, tol: f64) -> bool {
    if !e.opaque_names().is_empty() {
        return false;
    }
    let syms = e.symbols();
    let mut rng = rand::rngs::StdRng::seed_from_u64(0x5eed);
    for _ in 0..points {
        let mut env: Env<Complex64> = Env::new("", Complex64::new(0.0, 0.0));
        for s in &syms {
            env.params.insert(s.to_string(), Complex64::new(rng.gen_range(1.1..2.9), 0.0));
        }
        match eval_value(e, &env) {
            Ok(v) if v.norm() < tol => {}
            _ => return false,
        }
    }
    true
}

/// Relative discrepancy used by all cross-checks: `|a-b| / max(|a|,|b|)`,
/// reported as 0 when both sides are below 1e-12.
pub fn rel_err(a: Complex64, b: Complex64) -> f64 {
    let scale = a.norm().max(b.norm());
    if scale < 1e-12 {
        0.0
    } else {
        (a - b).norm() / scale
    }
}

/// Worst case of [`rel_err`] over paired samples, with its index.
pub fn compare(a: &[Complex64], b: &[Complex64]) -> (f64, usize) {
    let mut worst = (0.0, 0);
    for (k, (x, y)) in a.iter().zip(b).enumerate() {
        let r = rel_err(*x, *y);
        if r > worst.0 || r.is_nan() {
            worst = (r, k);
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parse::parse_expr;

    fn c(x: f64) -> Complex64 {
        Complex64::new(x, 0.0)
    }

    #[test]
    fn elementary_series() {
        let env = Env::new("x", c(0.0));
        let j = eval_jet(&parse_expr("exp(x)").unwrap(), &env, 5).unwrap();
        assert!((j.c[5].re - 1.0 / 120.0).abs() < 1e-15);
        let j = eval_jet(&parse_expr("sin(x)").unwrap(), &env, 3).unwrap();
        assert!((j.c[3].re + 1.0 / 6.0).abs() < 1e-15);
        let j = eval_jet(&parse_expr("log(1 + x)").unwrap(), &env, 4).unwrap();
        assert!((j.c[4].re + 0.25).abs() < 1e-15);
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let e = parse_expr("sqrt(x)*cos(x)^2/(x - 1/3) + exp(-x^2)").unwrap();
        let x0 = 1.3;
        let j = eval_jet(&e, &Env::new("x", c(x0)), 2).unwrap();
        let f = |x: f64| eval_value(&e, &Env::new("x", c(x))).unwrap().re;
        let h = 1e-4;
        let d1 = (f(x0 + h) - f(x0 - h)) / (2.0 * h);
        let d2 = (f(x0 + h) - 2.0 * f(x0) + f(x0 - h)) / (h * h);
        assert!((j.derivative_value(1).re - d1).abs() < 1e-7);
        assert!((j.derivative_value(2).re - d2).abs() < 1e-5);
    }

    #[test]
    fn opaque_definitions_compose() {
        let env = Env::new("x", c(0.7)).define("h", "t", parse_expr("t^3").unwrap());
        let j = eval_jet(&parse_expr("h''(2*x)").unwrap(), &env, 1).unwrap();
        // h''(2x) = 12x  -> value 8.4, slope 12
        assert!((j.c[0].re - 8.4).abs() < 1e-12);
        assert!((j.c[1].re - 12.0).abs() < 1e-12);
    }

    #[test]
    fn high_precision_agrees() {
        let e = parse_expr("sqrt(x)*sin(x)/(1 + x^2)").unwrap();
        let a = eval_jet(&e, &Env::new("x", c(1.7)), 4).unwrap();
        let b = eval_jet(&e, &Env::new("x", Hp::from_f64(1.7)), 4).unwrap();
        for k in 0..5 {
            assert!(rel_err(a.c[k], b.c[k].to_c64()) < 1e-13);
        }
    }

    #[test]
    fn singular_points_reported() {
        let env = Env::new("x", c(1.0));
        assert!(matches!(eval_jet(&parse_expr("1/(x - 1)").unwrap(), &env, 2), Err(Error::SingularPoint(_))));
        assert!(matches!(eval_jet(&parse_expr("sqrt(x - 1)").unwrap(), &env, 2), Err(Error::SingularPoint(_))));
        assert!(matches!(eval_jet(&parse_expr("y").unwrap(), &env, 0), Err(Error::UnboundSymbol(_))));
    }

    #[test]
    fn zero_test() {
        assert!(numerically_zero(&parse_expr("sin(x)^2 + cos(x)^2 - 1").unwrap(), 20, 1e-10));
        assert!(!numerically_zero(&parse_expr("sin(x) - x").unwrap(), 20, 1e-10));
    }
}
