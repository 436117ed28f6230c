//! Immutable canonical expression trees.
//!
//! Every constructor canonicalizes: sums and products are flattened, rational
//! constants are merged, like terms and like powers are collected, operands are
//! sorted under a fixed total order, and integer powers of the imaginary unit
//! are reduced on the spot. Two expressions that are built from the same value
//! along different routes therefore compare equal structurally as long as the
//! value is reachable by these local rules; deeper identities are the job of
//! [`crate::normal`].

use std::cmp::Ordering;
use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::hash::{Hash, Hasher};
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::sync::Arc;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rustc_hash::{FxHashMap, FxHasher};

use crate::error::{Error, Result};

pub type Sym = Arc<str>;

/// Elementary functions known to the engine. `sqrt` is not listed: it is
/// represented as a power with exponent 1/2.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Func {
    Sin,
    Cos,
    Tan,
    Exp,
    Log,
}

impl Func {
    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Tan => "tan",
            Func::Exp => "exp",
            Func::Log => "log",
        }
    }

    pub fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "tan" => Func::Tan,
            "exp" => Func::Exp,
            "log" => Func::Log,
            _ => return None,
        })
    }
}

#[derive(Debug)]
pub enum Node {
    Rational(BigRational),
    ImaginaryUnit,
    Symbol(Sym),
    Apply(Func, Expr),
    /// `name^(order)(arg)`: an uninterpreted function and its derivatives.
    Opaque {
        name: Sym,
        order: u32,
        arg: Expr,
    },
    Power(Expr, Expr),
    Product(Vec<Expr>),
    Sum(Vec<Expr>),
}

impl Node {
    fn rank(&self) -> u8 {
        match self {
            Node::Rational(_) => 0,
            Node::ImaginaryUnit => 1,
            Node::Symbol(_) => 2,
            Node::Apply(..) => 3,
            Node::Opaque { .. } => 4,
            Node::Power(..) => 5,
            Node::Product(_) => 6,
            Node::Sum(_) => 7,
        }
    }
}

#[derive(Debug)]
struct Inner {
    node: Node,
    hash: u64,
}

#[derive(Clone)]
pub struct Expr(Arc<Inner>);

impl fmt::Debug for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Expr({})", crate::render::plain(self))
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&crate::render::plain(self))
    }
}

impl Hash for Expr {
    fn hash<H: Hasher>(&self, state: &mut H) {
        state.write_u64(self.0.hash);
    }
}

impl PartialEq for Expr {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.0, &other.0)
            || (self.0.hash == other.0.hash && self.cmp(other) == Ordering::Equal)
    }
}

impl Eq for Expr {}

impl PartialOrd for Expr {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Expr {
    fn cmp(&self, other: &Self) -> Ordering {
        if Arc::ptr_eq(&self.0, &other.0) {
            return Ordering::Equal;
        }
        let (a, b) = (self.node(), other.node());
        match a.rank().cmp(&b.rank()) {
            Ordering::Equal => {}
            o => return o,
        }
        match (a, b) {
            (Node::Rational(x), Node::Rational(y)) => x.cmp(y),
            (Node::ImaginaryUnit, Node::ImaginaryUnit) => Ordering::Equal,
            (Node::Symbol(x), Node::Symbol(y)) => x.cmp(y),
            (Node::Apply(f, x), Node::Apply(g, y)) => f.cmp(g).then_with(|| x.cmp(y)),
            (
                Node::Opaque { name: n1, order: o1, arg: a1 },
                Node::Opaque { name: n2, order: o2, arg: a2 },
            ) => n1.cmp(n2).then(o1.cmp(o2)).then_with(|| a1.cmp(a2)),
            (Node::Power(b1, e1), Node::Power(b2, e2)) => b1.cmp(b2).then_with(|| e1.cmp(e2)),
            (Node::Product(x), Node::Product(y)) | (Node::Sum(x), Node::Sum(y)) => x.cmp(y),
            _ => unreachable!("ranks matched"),
        }
    }
}

fn hash_node(node: &Node) -> u64 {
    let mut h = FxHasher::default();
    node.rank().hash(&mut h);
    match node {
        Node::Rational(r) => r.hash(&mut h),
        Node::ImaginaryUnit => {}
        Node::Symbol(s) => s.hash(&mut h),
        Node::Apply(f, a) => {
            f.hash(&mut h);
            a.hash(&mut h);
        }
        Node::Opaque { name, order, arg } => {
            name.hash(&mut h);
            order.hash(&mut h);
            arg.hash(&mut h);
        }
        Node::Power(b, e) => {
            b.hash(&mut h);
            e.hash(&mut h);
        }
        Node::Product(v) | Node::Sum(v) => {
            v.len().hash(&mut h);
            for x in v {
                x.hash(&mut h);
            }
        }
    }
    h.finish()
}

fn mk(node: Node) -> Expr {
    let hash = hash_node(&node);
    Expr(Arc::new(Inner { node, hash }))
}

pub fn rat(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

impl Expr {
    pub fn node(&self) -> &Node {
        &self.0.node
    }

    /// Stable identity of this node, used to memoize traversals of shared DAGs.
    pub fn id(&self) -> usize {
        Arc::as_ptr(&self.0) as usize
    }

    pub fn rational(r: BigRational) -> Expr {
        mk(Node::Rational(r))
    }

    pub fn int(n: i64) -> Expr {
        Expr::rational(BigRational::from_integer(BigInt::from(n)))
    }

    pub fn frac(n: i64, d: i64) -> Expr {
        Expr::rational(rat(n, d))
    }

    pub fn zero() -> Expr {
        Expr::int(0)
    }

    pub fn one() -> Expr {
        Expr::int(1)
    }

    pub fn i() -> Expr {
        mk(Node::ImaginaryUnit)
    }

    pub fn symbol(name: &str) -> Expr {
        mk(Node::Symbol(Arc::from(name)))
    }

    pub fn sym(name: &Sym) -> Expr {
        mk(Node::Symbol(name.clone()))
    }

    pub fn opaque(name: &str, order: u32, arg: Expr) -> Expr {
        mk(Node::Opaque { name: Arc::from(name), order, arg })
    }

    pub fn as_rational(&self) -> Option<&BigRational> {
        match self.node() {
            Node::Rational(r) => Some(r),
            _ => None,
        }
    }

    pub fn as_symbol(&self) -> Option<&Sym> {
        match self.node() {
            Node::Symbol(s) => Some(s),
            _ => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.node(), Node::Rational(r) if r.is_zero())
    }

    pub fn is_one(&self) -> bool {
        matches!(self.node(), Node::Rational(r) if r.is_one())
    }

    pub fn sum<I: IntoIterator<Item = Expr>>(terms: I) -> Expr {
        build_sum(terms)
    }

    pub fn product<I: IntoIterator<Item = Expr>>(factors: I) -> Expr {
        build_product(factors.into_iter().collect())
    }

    pub fn pow(&self, exp: &Expr) -> Expr {
        build_power(self.clone(), exp.clone())
    }

    pub fn powi(&self, n: i64) -> Expr {
        build_power(self.clone(), Expr::int(n))
    }

    pub fn sqrt(&self) -> Expr {
        build_power(self.clone(), Expr::frac(1, 2))
    }

    pub fn recip(&self) -> Expr {
        self.powi(-1)
    }

    pub fn apply(f: Func, arg: Expr) -> Expr {
        build_apply(f, arg)
    }

    pub fn sin(&self) -> Expr {
        build_apply(Func::Sin, self.clone())
    }

    pub fn cos(&self) -> Expr {
        build_apply(Func::Cos, self.clone())
    }

    pub fn tan(&self) -> Expr {
        build_apply(Func::Tan, self.clone())
    }

    pub fn exp(&self) -> Expr {
        build_apply(Func::Exp, self.clone())
    }

    pub fn log(&self) -> Expr {
        build_apply(Func::Log, self.clone())
    }

    pub fn scale(&self, r: &BigRational) -> Expr {
        build_product(vec![Expr::rational(r.clone()), self.clone()])
    }

    /// Splits off the rational coefficient of a term: `3*x*y` gives `(3, x*y)`.
    pub fn split_coeff(&self) -> (BigRational, Expr) {
        match self.node() {
            Node::Rational(r) => (r.clone(), Expr::one()),
            Node::Product(fs) => match fs[0].node() {
                Node::Rational(r) => {
                    let rest = if fs.len() == 2 {
                        fs[1].clone()
                    } else {
                        mk(Node::Product(fs[1..].to_vec()))
                    };
                    (r.clone(), rest)
                }
                _ => (BigRational::one(), self.clone()),
            },
            _ => (BigRational::one(), self.clone()),
        }
    }

    /// True when the leading coefficient is negative, used to pick a sign
    /// representative for odd and even functions.
    pub fn has_negative_sign(&self) -> bool {
        match self.node() {
            Node::Rational(r) => r.is_negative(),
            Node::Product(_) => self.split_coeff().0.is_negative(),
            Node::Sum(ts) => ts
                .iter()
                .find(|t| t.as_rational().is_none())
                .is_some_and(|t| t.has_negative_sign()),
            _ => false,
        }
    }

    /// `-self`, distributed over the terms of a sum so that the result of
    /// negating a sum with [`Expr::has_negative_sign`] does not report a
    /// negative sign again.
    pub fn negated(&self) -> Expr {
        match self.node() {
            Node::Sum(ts) => build_sum(ts.iter().map(|t| -t)),
            _ => -self,
        }
    }

    pub fn contains_i(&self) -> bool {
        let mut memo = FxHashMap::default();
        contains_i_rec(self, &mut memo)
    }

    pub fn symbols(&self) -> BTreeSet<Sym> {
        let mut out = BTreeSet::new();
        let mut seen = FxHashMap::default();
        collect_symbols(self, &mut out, &mut seen);
        out
    }

    pub fn depends_on(&self, v: &str) -> bool {
        let mut memo = FxHashMap::default();
        depends_rec(self, v, &mut memo)
    }

    /// Names of opaque functions occurring anywhere in the tree.
    pub fn opaque_names(&self) -> BTreeSet<Sym> {
        let mut out = BTreeSet::new();
        let mut seen = FxHashMap::default();
        collect_opaque(self, &mut out, &mut seen);
        out
    }

    /// Rebuilds the tree bottom-up, giving `f` the chance to replace each
    /// (already rebuilt) leaf or node. Shared subtrees are visited once.
    pub fn map_bottom_up(&self, f: &mut dyn FnMut(&Expr) -> Option<Expr>) -> Expr {
        let mut memo = FxHashMap::default();
        map_rec(self, f, &mut memo)
    }

    /// Simultaneous substitution of symbols, followed by canonicalization.
    pub fn substitute(&self, bindings: &HashMap<Sym, Expr>) -> Expr {
        if bindings.is_empty() {
            return self.clone();
        }
        self.map_bottom_up(&mut |e| match e.node() {
            Node::Symbol(s) => bindings.get(s).cloned(),
            _ => None,
        })
    }

    /// Formal complex conjugate: every symbol and function is taken to be
    /// real, so conjugation maps `i` to `-i` and rebuilds.
    pub fn conjugate_formal(&self) -> Expr {
        self.map_bottom_up(&mut |e| match e.node() {
            Node::ImaginaryUnit => Some(-Expr::i()),
            _ => None,
        })
    }

    /// Number of distinct nodes in the DAG.
    pub fn node_count(&self) -> usize {
        let mut seen = FxHashMap::default();
        count_rec(self, &mut seen);
        seen.len()
    }

    pub fn children(&self) -> Vec<Expr> {
        match self.node() {
            Node::Rational(_) | Node::ImaginaryUnit | Node::Symbol(_) => vec![],
            Node::Apply(_, a) => vec![a.clone()],
            Node::Opaque { arg, .. } => vec![arg.clone()],
            Node::Power(b, e) => vec![b.clone(), e.clone()],
            Node::Product(v) | Node::Sum(v) => v.clone(),
        }
    }
}

/// Canonical re-assembly of a node from (possibly new) children.
pub fn rebuild(e: &Expr, kids: Vec<Expr>) -> Expr {
    match e.node() {
        Node::Rational(_) | Node::ImaginaryUnit | Node::Symbol(_) => e.clone(),
        Node::Apply(f, _) => build_apply(*f, kids.into_iter().next().unwrap()),
        Node::Opaque { name, order, .. } => mk(Node::Opaque {
            name: name.clone(),
            order: *order,
            arg: kids.into_iter().next().unwrap(),
        }),
        Node::Power(..) => {
            let mut it = kids.into_iter();
            let b = it.next().unwrap();
            let x = it.next().unwrap();
            build_power(b, x)
        }
        Node::Product(_) => build_product(kids),
        Node::Sum(_) => build_sum(kids),
    }
}

fn map_rec(
    e: &Expr,
    f: &mut dyn FnMut(&Expr) -> Option<Expr>,
    memo: &mut FxHashMap<usize, Expr>,
) -> Expr {
    if let Some(r) = memo.get(&e.id()) {
        return r.clone();
    }
    let kids = e.children();
    let rebuilt = if kids.is_empty() {
        e.clone()
    } else {
        let new_kids: Vec<Expr> = kids.iter().map(|k| map_rec(k, f, memo)).collect();
        if new_kids.iter().zip(&kids).all(|(a, b)| a.id() == b.id()) {
            e.clone()
        } else {
            rebuild(e, new_kids)
        }
    };
    let out = f(&rebuilt).unwrap_or(rebuilt);
    memo.insert(e.id(), out.clone());
    out
}

fn contains_i_rec(e: &Expr, memo: &mut FxHashMap<usize, bool>) -> bool {
    if let Some(&b) = memo.get(&e.id()) {
        return b;
    }
    let r = match e.node() {
        Node::ImaginaryUnit => true,
        _ => e.children().iter().any(|k| contains_i_rec(k, memo)),
    };
    memo.insert(e.id(), r);
    r
}

fn depends_rec(e: &Expr, v: &str, memo: &mut FxHashMap<usize, bool>) -> bool {
    if let Some(&b) = memo.get(&e.id()) {
        return b;
    }
    let r = match e.node() {
        Node::Symbol(s) => &**s == v,
        _ => e.children().iter().any(|k| depends_rec(k, v, memo)),
    };
    memo.insert(e.id(), r);
    r
}

fn collect_symbols(e: &Expr, out: &mut BTreeSet<Sym>, seen: &mut FxHashMap<usize, ()>) {
    if seen.insert(e.id(), ()).is_some() {
        return;
    }
    if let Node::Symbol(s) = e.node() {
        out.insert(s.clone());
    }
    for k in e.children() {
        collect_symbols(&k, out, seen);
    }
}

fn collect_opaque(e: &Expr, out: &mut BTreeSet<Sym>, seen: &mut FxHashMap<usize, ()>) {
    if seen.insert(e.id(), ()).is_some() {
        return;
    }
    if let Node::Opaque { name, .. } = e.node() {
        out.insert(name.clone());
    }
    for k in e.children() {
        collect_opaque(&k, out, seen);
    }
}

fn count_rec(e: &Expr, seen: &mut FxHashMap<usize, ()>) {
    if seen.insert(e.id(), ()).is_some() {
        return;
    }
    for k in e.children() {
        count_rec(&k, seen);
    }
}

fn with_coeff(c: BigRational, rest: Expr) -> Expr {
    if c.is_one() {
        return rest;
    }
    if rest.is_one() {
        return Expr::rational(c);
    }
    match rest.node() {
        Node::Product(fs) => {
            let mut v = Vec::with_capacity(fs.len() + 1);
            v.push(Expr::rational(c));
            v.extend(fs.iter().cloned());
            mk(Node::Product(v))
        }
        _ => mk(Node::Product(vec![Expr::rational(c), rest])),
    }
}

fn build_sum<I: IntoIterator<Item = Expr>>(terms: I) -> Expr {
    let mut constant = BigRational::zero();
    let mut acc: FxHashMap<Expr, BigRational> = FxHashMap::default();
    let mut stack: Vec<Expr> = terms.into_iter().collect();
    while let Some(t) = stack.pop() {
        match t.node() {
            Node::Rational(r) => constant += r,
            Node::Sum(ts) => stack.extend(ts.iter().cloned()),
            _ => {
                let (c, rest) = t.split_coeff();
                *acc.entry(rest).or_insert_with(BigRational::zero) += c;
            }
        }
    }
    let mut pairs: Vec<(Expr, BigRational)> =
        acc.into_iter().filter(|(_, c)| !c.is_zero()).collect();
    pairs.sort_by(|a, b| a.0.cmp(&b.0).then_with(|| a.1.cmp(&b.1)));
    let mut out: Vec<Expr> = Vec::with_capacity(pairs.len() + 1);
    if !constant.is_zero() {
        out.push(Expr::rational(constant));
    }
    out.extend(pairs.into_iter().map(|(rest, c)| with_coeff(c, rest)));
    match out.len() {
        0 => Expr::zero(),
        1 => out.pop().unwrap(),
        _ => mk(Node::Sum(out)),
    }
}

fn build_product(factors: Vec<Expr>) -> Expr {
    let mut coeff = BigRational::one();
    let mut queue = factors;
    for _pass in 0..16 {
        let mut bases: FxHashMap<Expr, Vec<Expr>> = FxHashMap::default();
        let mut order: Vec<Expr> = Vec::new();
        while let Some(f) = queue.pop() {
            match f.node() {
                Node::Rational(r) => {
                    if r.is_zero() {
                        return Expr::zero();
                    }
                    coeff *= r;
                }
                Node::Product(fs) => queue.extend(fs.iter().cloned()),
                Node::Power(b, e) => {
                    let slot = bases.entry(b.clone()).or_insert_with(|| {
                        order.push(b.clone());
                        Vec::new()
                    });
                    slot.push(e.clone());
                }
                _ => {
                    let slot = bases.entry(f.clone()).or_insert_with(|| {
                        order.push(f.clone());
                        Vec::new()
                    });
                    slot.push(Expr::one());
                }
            }
        }
        let mut out = Vec::with_capacity(order.len());
        let mut again = false;
        for b in order {
            let es = bases.remove(&b).unwrap();
            let e = if es.len() == 1 { es.into_iter().next().unwrap() } else { build_sum(es) };
            let p = if e.is_one() { b } else { build_power(b, e) };
            match p.node() {
                Node::Rational(r) => {
                    if r.is_zero() {
                        return Expr::zero();
                    }
                    coeff *= r;
                }
                Node::Product(_) => {
                    again = true;
                    out.push(p);
                }
                _ => out.push(p),
            }
        }
        if again {
            queue = out;
            continue;
        }
        out.sort();
        if out.is_empty() {
            return Expr::rational(coeff);
        }
        if coeff.is_one() && out.len() == 1 {
            return out.pop().unwrap();
        }
        if !coeff.is_one() {
            out.insert(0, Expr::rational(coeff));
        }
        return mk(Node::Product(out));
    }
    unreachable!("product canonicalization did not stabilize")
}

fn i_power(n: &BigInt) -> Expr {
    let k = n.mod_floor(&BigInt::from(4)).to_u8().unwrap();
    match k {
        0 => Expr::one(),
        1 => Expr::i(),
        2 => Expr::int(-1),
        _ => mk(Node::Product(vec![Expr::int(-1), Expr::i()])),
    }
}

fn build_power(base: Expr, exp: Expr) -> Expr {
    let Some(e) = exp.as_rational() else {
        if base.is_one() {
            return Expr::one();
        }
        return mk(Node::Power(base, exp));
    };
    if e.is_zero() {
        return Expr::one();
    }
    if e.is_one() {
        return base;
    }
    match base.node() {
        Node::Rational(b) => rational_power(b, e),
        Node::ImaginaryUnit => {
            if e.is_integer() {
                i_power(e.numer())
            } else {
                mk(Node::Power(base, exp))
            }
        }
        Node::Power(b2, e2) => {
            let inner_ok = e.is_integer()
                || e2
                    .as_rational()
                    .is_some_and(|r| r > &rat(-1, 1) && r <= &BigRational::one());
            if inner_ok {
                let prod = build_product(vec![e2.clone(), exp.clone()]);
                build_power(b2.clone(), prod)
            } else {
                mk(Node::Power(base, exp))
            }
        }
        Node::Product(fs) => {
            if e.is_integer() {
                build_product(fs.iter().map(|f| build_power(f.clone(), exp.clone())).collect())
            } else {
                let (c, rest) = base.split_coeff();
                if c.abs().is_one() {
                    mk(Node::Power(base, exp))
                } else {
                    let signed_rest = if c.is_negative() { -rest } else { rest };
                    build_product(vec![
                        rational_power(&c.abs(), e),
                        build_power(signed_rest, exp.clone()),
                    ])
                }
            }
        }
        _ => mk(Node::Power(base, exp)),
    }
}

/// Largest `m` with `m^q | n`, returned as `(m, n / m^q)`.
fn extract_power(n: &BigInt, q: u32) -> (BigInt, BigInt) {
    let mut m = BigInt::one();
    let mut rest = n.clone();
    let mut p = BigInt::from(2);
    let bound = BigInt::from(50_000);
    while p < bound {
        let pq = num_traits::pow(p.clone(), q as usize);
        if pq > rest {
            break;
        }
        while (&rest % &pq).is_zero() {
            rest /= &pq;
            m *= &p;
        }
        p += if p == BigInt::from(2) { 1 } else { 2 };
    }
    let r = rest.nth_root(q);
    if num_traits::pow(r.clone(), q as usize) == rest && !rest.is_one() {
        m *= &r;
        rest = BigInt::one();
    }
    (m, rest)
}

fn rational_power(b: &BigRational, e: &BigRational) -> Expr {
    if e.is_integer() {
        if b.is_zero() {
            if e.is_positive() {
                return Expr::zero();
            }
            return mk(Node::Power(Expr::rational(b.clone()), Expr::rational(e.clone())));
        }
        let n = e.to_integer().to_i32().expect("exponent too large");
        return Expr::rational(num_traits::pow::Pow::pow(b, n));
    }
    if b.is_zero() {
        if e.is_positive() {
            return Expr::zero();
        }
        return mk(Node::Power(Expr::rational(b.clone()), Expr::rational(e.clone())));
    }
    if b.is_one() {
        return Expr::one();
    }
    let k = e.floor();
    let f = e - &k;
    let kint = k.to_integer().to_i32().expect("exponent too large");
    let int_part = Expr::rational(num_traits::pow::Pow::pow(b, kint));
    let q = f.denom().to_u32().expect("root index too large");
    let a = f.numer().to_u32().unwrap();
    if b.is_negative() {
        if q == 2 {
            return build_product(vec![int_part, Expr::i(), rational_power(&b.abs(), &f)]);
        }
        return build_product(vec![
            int_part,
            mk(Node::Power(Expr::rational(b.clone()), Expr::rational(f))),
        ]);
    }
    let n = b.numer();
    let d = b.denom();
    let big = num_traits::pow(n.clone(), a as usize) * num_traits::pow(d.clone(), (q - a) as usize);
    let (m, s) = extract_power(&big, q);
    let c = num_traits::pow::Pow::pow(b, kint) * BigRational::new(m, d.clone());
    if s.is_one() {
        return Expr::rational(c);
    }
    let root = mk(Node::Power(Expr::rational(BigRational::from_integer(s)), Expr::frac(1, q as i64)));
    if c.is_one() {
        root
    } else {
        mk(Node::Product(vec![Expr::rational(c), root]))
    }
}

fn build_apply(f: Func, arg: Expr) -> Expr {
    match f {
        Func::Sin | Func::Tan => {
            if arg.is_zero() {
                return Expr::zero();
            }
            if arg.has_negative_sign() {
                return -build_apply(f, arg.negated());
            }
        }
        Func::Cos => {
            if arg.is_zero() {
                return Expr::one();
            }
            if arg.has_negative_sign() {
                return build_apply(f, arg.negated());
            }
        }
        Func::Exp => {
            if arg.is_zero() {
                return Expr::one();
            }
            if let Node::Apply(Func::Log, u) = arg.node() {
                return u.clone();
            }
        }
        Func::Log => {
            if arg.is_one() {
                return Expr::zero();
            }
        }
    }
    mk(Node::Apply(f, arg))
}

impl From<i64> for Expr {
    fn from(n: i64) -> Self {
        Expr::int(n)
    }
}

impl From<BigRational> for Expr {
    fn from(r: BigRational) -> Self {
        Expr::rational(r)
    }
}

macro_rules! binop {
    ($tr:ident, $m:ident, $body:expr) => {
        impl $tr<Expr> for Expr {
            type Output = Expr;
            fn $m(self, rhs: Expr) -> Expr {
                let f: fn(Expr, Expr) -> Expr = $body;
                f(self, rhs)
            }
        }
        impl $tr<&Expr> for &Expr {
            type Output = Expr;
            fn $m(self, rhs: &Expr) -> Expr {
                let f: fn(Expr, Expr) -> Expr = $body;
                f(self.clone(), rhs.clone())
            }
        }
        impl $tr<&Expr> for Expr {
            type Output = Expr;
            fn $m(self, rhs: &Expr) -> Expr {
                let f: fn(Expr, Expr) -> Expr = $body;
                f(self, rhs.clone())
            }
        }
        impl $tr<Expr> for &Expr {
            type Output = Expr;
            fn $m(self, rhs: Expr) -> Expr {
                let f: fn(Expr, Expr) -> Expr = $body;
                f(self.clone(), rhs)
            }
        }
    };
}

binop!(Add, add, |a, b| build_sum([a, b]));
binop!(Sub, sub, |a, b| build_sum([a, build_product(vec![Expr::int(-1), b])]));
binop!(Mul, mul, |a, b| build_product(vec![a, b]));
binop!(Div, div, |a, b| build_product(vec![a, build_power(b, Expr::int(-1))]));

impl Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        build_product(vec![Expr::int(-1), self])
    }
}

impl Neg for &Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        build_product(vec![Expr::int(-1), self.clone()])
    }
}

/// Re-canonicalizes `e`. Integer powers of `i` are reduced by the even/odd
/// rule (`i^n = (-1)^(n/2)` for even `n`, `i (-1)^((n-1)/2)` for odd `n`), so
/// the result mentions `i` only to the first power.
pub fn normalize_i(e: &Expr) -> Expr {
    let mut memo = FxHashMap::default();
    renormalize(e, &mut memo)
}

fn renormalize(e: &Expr, memo: &mut FxHashMap<usize, Expr>) -> Expr {
    if let Some(r) = memo.get(&e.id()) {
        return r.clone();
    }
    let kids = e.children();
    let out = if kids.is_empty() {
        e.clone()
    } else {
        rebuild(e, kids.iter().map(|k| renormalize(k, memo)).collect())
    };
    memo.insert(e.id(), out.clone());
    out
}

/// Per-symbol flags. Every symbol is real unless declared otherwise; none is
/// positive unless declared. The imaginary unit is not a symbol and can never
/// be registered.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Assumptions {
    positive: BTreeSet<Sym>,
    complex: BTreeSet<Sym>,
}

impl Assumptions {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn declare_positive(&mut self, name: &str) -> Result<()> {
        check_registrable(name)?;
        self.complex.remove(name);
        self.positive.insert(Arc::from(name));
        Ok(())
    }

    pub fn declare_complex(&mut self, name: &str) -> Result<()> {
        check_registrable(name)?;
        self.positive.remove(name);
        self.complex.insert(Arc::from(name));
        Ok(())
    }

    pub fn is_positive(&self, name: &str) -> bool {
        self.positive.contains(name)
    }

    pub fn is_real(&self, name: &str) -> bool {
        !self.complex.contains(name)
    }

    pub fn positive_symbols(&self) -> impl Iterator<Item = &Sym> {
        self.positive.iter()
    }

    /// True when every symbol of `e` is declared positive.
    pub fn all_positive(&self, e: &Expr) -> bool {
        e.symbols().iter().all(|s| self.is_positive(s))
    }
}

fn check_registrable(name: &str) -> Result<()> {
    if name == "i" {
        return Err(Error::Assumption("the imaginary unit cannot carry assumptions".into()));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn x() -> Expr {
        Expr::symbol("x")
    }

    #[test]
    fn odd_functions_of_negated_sums() {
        let u = Expr::frac(-1, 2) * x() + Expr::frac(1, 4) / x();
        let s = Expr::apply(Func::Sin, -&u);
        assert_eq!(s, -Expr::apply(Func::Sin, u.clone()));
        assert_eq!(Expr::apply(Func::Cos, -&u), Expr::apply(Func::Cos, u));
    }

    #[test]
    fn i_power_rules() {
        assert_eq!(Expr::i().powi(2), Expr::int(-1));
        assert_eq!(Expr::i().powi(3), -Expr::i());
        assert_eq!(Expr::i().powi(4), Expr::one());
        assert_eq!(Expr::i().powi(-1), -Expr::i());
        assert_eq!(Expr::i().powi(0) * x(), x());
        assert_eq!(Expr::i() * Expr::i() * Expr::i(), -Expr::i());
    }

    #[test]
    fn like_terms_and_powers_collect() {
        let e = x() + x() + Expr::int(3) * x();
        assert_eq!(e, Expr::int(5) * x());
        assert_eq!(x() * x() * x(), x().powi(3));
        assert!((x() - x()).is_zero());
        assert_eq!(x().sqrt() * x().sqrt(), x());
        assert_eq!(x().powi(2) / x(), x());
    }

    #[test]
    fn order_independent() {
        let y = Expr::symbol("y");
        let a = Expr::sum([x(), y.clone(), Expr::int(2)]);
        let b = Expr::sum([Expr::int(2), y.clone(), x()]);
        assert_eq!(a, b);
        assert_eq!(x() * y.clone(), y * x());
    }

    #[test]
    fn rational_powers() {
        assert_eq!(Expr::int(4).sqrt(), Expr::int(2));
        assert_eq!(Expr::int(8).sqrt(), Expr::int(2) * Expr::int(2).sqrt());
        assert_eq!(Expr::int(-1).sqrt(), Expr::i());
        assert_eq!(Expr::int(2).sqrt() * Expr::int(2).sqrt(), Expr::int(2));
        assert_eq!(Expr::frac(1, 4).sqrt(), Expr::frac(1, 2));
        let r = Expr::frac(2, 3).sqrt();
        assert_eq!(r, Expr::frac(1, 3) * Expr::int(6).sqrt());
    }

    #[test]
    fn trig_parity() {
        assert_eq!((-x()).sin(), -x().sin());
        assert_eq!((-x()).cos(), x().cos());
        assert!(Expr::zero().sin().is_zero());
        assert!(Expr::zero().cos().is_one());
    }

    #[test]
    fn substitution_is_simultaneous() {
        let y = Expr::symbol("y");
        let mut b = HashMap::new();
        b.insert(Arc::from("x"), y.clone());
        b.insert(Arc::from("y"), x());
        assert_eq!((x() - y.clone()).substitute(&b), y - x());
        let mut c = HashMap::new();
        c.insert(Arc::from("x"), Expr::int(3));
        assert_eq!(x().powi(2).substitute(&c), Expr::int(9));
    }

    #[test]
    fn parrepls_rational_exact() {
        let om = Expr::symbol("om");
        let e = om + x().powi(-2);
        let mut b = HashMap::new();
        b.insert(Arc::from("x"), Expr::int(55));
        b.insert(Arc::from("om"), Expr::frac(26041, 10_000_000));
        let v = e.substitute(&b);
        assert_eq!(v, Expr::rational(rat(26041, 10_000_000) + rat(1, 3025)));
    }

    #[test]
    fn formal_conjugate_is_involution() {
        let e = Expr::i() * x() + Expr::int(2) * x().sin();
        assert_eq!(e.conjugate_formal().conjugate_formal(), e);
        assert_eq!(x().conjugate_formal(), x());
    }

    #[test]
    fn imaginary_unit_not_registrable() {
        let mut a = Assumptions::new();
        assert!(a.declare_positive("i").is_err());
        a.declare_positive("x").unwrap();
        assert!(a.is_positive("x"));
        assert!(a.is_real("x"));
    }
}
