//! Sparse multivariate polynomials over the integers.
//!
//! Variables are plain indices; higher indices are more significant in the
//! lexicographic term order. Terms are kept sorted with the leading term first
//! and carry no zero coefficients.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};
use rustc_hash::FxHashMap;
use smallvec::SmallVec;

pub type Var = u32;

#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct Mono(SmallVec<[(Var, u32); 4]>);

impl fmt::Debug for Mono {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return write!(f, "1");
        }
        let parts: Vec<String> = self.0.iter().map(|(v, e)| format!("v{v}^{e}")).collect();
        write!(f, "{}", parts.join("*"))
    }
}

impl Ord for Mono {
    fn cmp(&self, other: &Self) -> Ordering {
        let (a, b) = (&self.0, &other.0);
        let n = a.len().max(b.len());
        for i in 0..n {
            match (a.get(i), b.get(i)) {
                (Some(_), None) => return Ordering::Greater,
                (None, Some(_)) => return Ordering::Less,
                (Some(&(va, ea)), Some(&(vb, eb))) => {
                    if va != vb {
                        return va.cmp(&vb);
                    }
                    if ea != eb {
                        return ea.cmp(&eb);
                    }
                }
                (None, None) => unreachable!(),
            }
        }
        Ordering::Equal
    }
}

impl PartialOrd for Mono {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Mono {
    pub fn one() -> Mono {
        Mono(SmallVec::new())
    }

    pub fn var(v: Var, e: u32) -> Mono {
        if e == 0 {
            return Mono::one();
        }
        let mut s = SmallVec::new();
        s.push((v, e));
        Mono(s)
    }

    pub fn is_one(&self) -> bool {
        self.0.is_empty()
    }

    pub fn entries(&self) -> &[(Var, u32)] {
        &self.0
    }

    pub fn degree(&self, v: Var) -> u32 {
        self.0.iter().find(|(w, _)| *w == v).map_or(0, |(_, e)| *e)
    }

    pub fn total_degree(&self) -> u32 {
        self.0.iter().map(|(_, e)| e).sum()
    }

    pub fn mul(&self, other: &Mono) -> Mono {
        let (a, b) = (&self.0, &other.0);
        let mut out = SmallVec::with_capacity(a.len() + b.len());
        let (mut i, mut j) = (0, 0);
        while i < a.len() && j < b.len() {
            match a[i].0.cmp(&b[j].0) {
                Ordering::Greater => {
                    out.push(a[i]);
                    i += 1;
                }
                Ordering::Less => {
                    out.push(b[j]);
                    j += 1;
                }
                Ordering::Equal => {
                    out.push((a[i].0, a[i].1 + b[j].1));
                    i += 1;
                    j += 1;
                }
            }
        }
        out.extend_from_slice(&a[i..]);
        out.extend_from_slice(&b[j..]);
        Mono(out)
    }

    /// `self / other` when `other` divides `self`.
    pub fn div(&self, other: &Mono) -> Option<Mono> {
        let mut out = SmallVec::with_capacity(self.0.len());
        let mut j = 0;
        let b = &other.0;
        for &(v, e) in &self.0 {
            if j < b.len() && b[j].0 > v {
                return None;
            }
            if j < b.len() && b[j].0 == v {
                if b[j].1 > e {
                    return None;
                }
                if e > b[j].1 {
                    out.push((v, e - b[j].1));
                }
                j += 1;
            } else {
                out.push((v, e));
            }
        }
        if j < b.len() {
            return None;
        }
        Some(Mono(out))
    }

    /// Removes variable `v`, returning its exponent and the rest.
    pub fn split_var(&self, v: Var) -> (u32, Mono) {
        let mut e = 0;
        let mut out = SmallVec::with_capacity(self.0.len());
        for &(w, k) in &self.0 {
            if w == v {
                e = k;
            } else {
                out.push((w, k));
            }
        }
        (e, Mono(out))
    }

    pub fn with_var(&self, v: Var, e: u32) -> Mono {
        self.mul(&Mono::var(v, e))
    }

    pub fn gcd(&self, other: &Mono) -> Mono {
        let mut out = SmallVec::new();
        for &(v, e) in &self.0 {
            let f = other.degree(v);
            if f > 0 {
                out.push((v, e.min(f)));
            }
        }
        Mono(out)
    }

    pub fn max_var(&self) -> Option<Var> {
        self.0.first().map(|(v, _)| *v)
    }
}

#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct Poly {
    terms: Vec<(Mono, BigInt)>,
}

impl fmt::Debug for Poly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let parts: Vec<String> = self.terms.iter().map(|(m, c)| format!("{c}*{m:?}")).collect();
        write!(f, "{}", parts.join(" + "))
    }
}

impl Poly {
    pub fn zero() -> Poly {
        Poly { terms: Vec::new() }
    }

    pub fn one() -> Poly {
        Poly::constant(BigInt::one())
    }

    pub fn constant(c: BigInt) -> Poly {
        if c.is_zero() {
            return Poly::zero();
        }
        Poly { terms: vec![(Mono::one(), c)] }
    }

    pub fn var(v: Var) -> Poly {
        Poly { terms: vec![(Mono::var(v, 1), BigInt::one())] }
    }

    pub fn monomial(m: Mono, c: BigInt) -> Poly {
        if c.is_zero() {
            return Poly::zero();
        }
        Poly { terms: vec![(m, c)] }
    }

    /// Builds from unsorted terms, merging duplicates.
    pub fn from_terms(terms: Vec<(Mono, BigInt)>) -> Poly {
        let mut map: FxHashMap<Mono, BigInt> = FxHashMap::default();
        for (m, c) in terms {
            *map.entry(m).or_insert_with(BigInt::zero) += c;
        }
        Poly::from_map(map)
    }

    fn from_map(map: FxHashMap<Mono, BigInt>) -> Poly {
        let mut terms: Vec<(Mono, BigInt)> = map.into_iter().filter(|(_, c)| !c.is_zero()).collect();
        terms.sort_unstable_by(|a, b| b.0.cmp(&a.0));
        Poly { terms }
    }

    pub fn terms(&self) -> &[(Mono, BigInt)] {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_constant(&self) -> bool {
        self.terms.is_empty() || (self.terms.len() == 1 && self.terms[0].0.is_one())
    }

    pub fn constant_value(&self) -> Option<BigInt> {
        if self.terms.is_empty() {
            Some(BigInt::zero())
        } else if self.is_constant() {
            Some(self.terms[0].1.clone())
        } else {
            None
        }
    }

    pub fn is_one(&self) -> bool {
        self.constant_value().is_some_and(|c| c.is_one())
    }

    pub fn leading(&self) -> Option<&(Mono, BigInt)> {
        self.terms.first()
    }

    pub fn leading_coeff(&self) -> BigInt {
        self.terms.first().map_or_else(BigInt::zero, |t| t.1.clone())
    }

    pub fn vars(&self) -> Vec<Var> {
        let mut vs: Vec<Var> = self.terms.iter().flat_map(|(m, _)| m.0.iter().map(|p| p.0)).collect();
        vs.sort_unstable();
        vs.dedup();
        vs
    }

    pub fn max_var(&self) -> Option<Var> {
        self.terms.iter().filter_map(|(m, _)| m.max_var()).max()
    }

    pub fn contains_var(&self, v: Var) -> bool {
        self.terms.iter().any(|(m, _)| m.degree(v) > 0)
    }

    pub fn degree(&self, v: Var) -> u32 {
        self.terms.iter().map(|(m, _)| m.degree(v)).max().unwrap_or(0)
    }

    pub fn neg(&self) -> Poly {
        Poly { terms: self.terms.iter().map(|(m, c)| (m.clone(), -c)).collect() }
    }

    pub fn scale(&self, k: &BigInt) -> Poly {
        if k.is_zero() {
            return Poly::zero();
        }
        Poly { terms: self.terms.iter().map(|(m, c)| (m.clone(), c * k)).collect() }
    }

    pub fn mul_mono(&self, m: &Mono, k: &BigInt) -> Poly {
        if k.is_zero() {
            return Poly::zero();
        }
        Poly { terms: self.terms.iter().map(|(n, c)| (n.mul(m), c * k)).collect() }
    }

    /// Exact division of every coefficient by `k`.
    pub fn div_int(&self, k: &BigInt) -> Poly {
        Poly { terms: self.terms.iter().map(|(m, c)| (m.clone(), c / k)).collect() }
    }

    pub fn add(&self, other: &Poly) -> Poly {
        let (a, b) = (&self.terms, &other.terms);
        let mut out = Vec::with_capacity(a.len() + b.len());
        let (mut i, mut j) = (0, 0);
        while i < a.len() && j < b.len() {
            match a[i].0.cmp(&b[j].0) {
                Ordering::Greater => {
                    out.push(a[i].clone());
                    i += 1;
                }
                Ordering::Less => {
                    out.push(b[j].clone());
                    j += 1;
                }
                Ordering::Equal => {
                    let c = &a[i].1 + &b[j].1;
                    if !c.is_zero() {
                        out.push((a[i].0.clone(), c));
                    }
                    i += 1;
                    j += 1;
                }
            }
        }
        out.extend_from_slice(&a[i..]);
        out.extend_from_slice(&b[j..]);
        Poly { terms: out }
    }

    pub fn sub(&self, other: &Poly) -> Poly {
        self.add(&other.neg())
    }

    pub fn mul(&self, other: &Poly) -> Poly {
        if self.is_zero() || other.is_zero() {
            return Poly::zero();
        }
        if other.terms.len() == 1 {
            let (m, c) = &other.terms[0];
            return self.mul_mono(m, c);
        }
        if self.terms.len() == 1 {
            let (m, c) = &self.terms[0];
            return other.mul_mono(m, c);
        }
        let mut map: FxHashMap<Mono, BigInt> =
            FxHashMap::with_capacity_and_hasher(self.terms.len() * other.terms.len(), Default::default());
        for (ma, ca) in &self.terms {
            for (mb, cb) in &other.terms {
                let m = ma.mul(mb);
                match map.get_mut(&m) {
                    Some(c) => *c += ca * cb,
                    None => {
                        map.insert(m, ca * cb);
                    }
                }
            }
        }
        Poly::from_map(map)
    }

    pub fn pow(&self, n: u32) -> Poly {
        let mut result = Poly::one();
        let mut base = self.clone();
        let mut k = n;
        while k > 0 {
            if k & 1 == 1 {
                result = result.mul(&base);
            }
            k >>= 1;
            if k > 0 {
                base = base.mul(&base);
            }
        }
        result
    }

    /// Exact quotient `self / d`, or `None` when `d` does not divide `self`
    /// over the integers.
    pub fn div_exact(&self, d: &Poly) -> Option<Poly> {
        if d.is_zero() {
            return None;
        }
        if self.is_zero() {
            return Some(Poly::zero());
        }
        if let Some(c) = d.constant_value() {
            if self.terms.iter().all(|(_, k)| k.is_multiple_of(&c)) {
                return Some(self.div_int(&c));
            }
            return None;
        }
        if d.terms.len() > self.terms.len() {
            return None;
        }
        for &(v, e) in d.terms.iter().flat_map(|(m, _)| m.0.iter()) {
            if self.degree(v) < e {
                return None;
            }
        }
        let (ldm, ldc) = &d.terms[0];
        let mut rem: BTreeMap<Mono, BigInt> = self.terms.iter().cloned().collect();
        let mut quot: Vec<(Mono, BigInt)> = Vec::new();
        while let Some((m, c)) = rem.pop_last() {
            let qm = m.div(ldm)?;
            let (qc, r) = c.div_rem(ldc);
            if !r.is_zero() {
                return None;
            }
            for (dm, dc) in &d.terms[1..] {
                let mm = dm.mul(&qm);
                let delta = dc * &qc;
                match rem.get_mut(&mm) {
                    Some(x) => {
                        *x -= delta;
                        if x.is_zero() {
                            rem.remove(&mm);
                        }
                    }
                    None => {
                        rem.insert(mm, -delta);
                    }
                }
            }
            quot.push((qm, qc));
        }
        quot.sort_unstable_by(|a, b| b.0.cmp(&a.0));
        Some(Poly { terms: quot })
    }

    /// Positive gcd of the integer coefficients.
    pub fn content(&self) -> BigInt {
        let mut g = BigInt::zero();
        for (_, c) in &self.terms {
            g = g.gcd(c);
            if g.is_one() {
                break;
            }
        }
        g
    }

    /// Divides out the integer content and makes the leading coefficient
    /// positive. Returns the removed signed factor as well.
    pub fn primitive(&self) -> (BigInt, Poly) {
        if self.is_zero() {
            return (BigInt::one(), Poly::zero());
        }
        let mut c = self.content();
        if self.leading_coeff().is_negative() {
            c = -c;
        }
        (c.clone(), self.div_int(&c))
    }

    pub fn derivative(&self, v: Var) -> Poly {
        let terms = self
            .terms
            .iter()
            .filter_map(|(m, c)| {
                let (e, rest) = m.split_var(v);
                if e == 0 {
                    None
                } else {
                    Some((rest.with_var(v, e - 1), c * BigInt::from(e)))
                }
            })
            .collect();
        Poly::from_terms(terms)
    }

    /// Coefficients with respect to `v`, indexed by exponent.
    pub fn coeffs_in(&self, v: Var) -> Vec<Poly> {
        let deg = self.degree(v) as usize;
        let mut buckets: Vec<Vec<(Mono, BigInt)>> = vec![Vec::new(); deg + 1];
        for (m, c) in &self.terms {
            let (e, rest) = m.split_var(v);
            buckets[e as usize].push((rest, c.clone()));
        }
        buckets.into_iter().map(Poly::from_terms).collect()
    }

    pub fn from_coeffs_in(v: Var, coeffs: &[Poly]) -> Poly {
        let mut terms = Vec::new();
        for (e, c) in coeffs.iter().enumerate() {
            for (m, k) in &c.terms {
                terms.push((m.with_var(v, e as u32), k.clone()));
            }
        }
        Poly::from_terms(terms)
    }

    /// Replaces variable `v` by `value`.
    pub fn substitute(&self, v: Var, value: &Poly) -> Poly {
        if !self.contains_var(v) {
            return self.clone();
        }
        let coeffs = self.coeffs_in(v);
        let mut acc = Poly::zero();
        for c in coeffs.iter().rev() {
            acc = acc.mul(value).add(c);
        }
        acc
    }

    /// Greatest common monomial divisor of all terms.
    pub fn monomial_content(&self) -> Mono {
        let mut it = self.terms.iter();
        let Some((first, _)) = it.next() else {
            return Mono::one();
        };
        let mut g = first.clone();
        for (m, _) in it {
            g = g.gcd(m);
            if g.is_one() {
                break;
            }
        }
        g
    }

    pub fn div_mono(&self, m: &Mono) -> Poly {
        Poly {
            terms: self
                .terms
                .iter()
                .map(|(n, c)| (n.div(m).expect("monomial divides"), c.clone()))
                .collect(),
        }
    }
}

/// Content with respect to `v`: gcd of the coefficients in `v`.
pub fn content_in(p: &Poly, v: Var) -> Poly {
    let mut g = Poly::zero();
    for c in p.coeffs_in(v) {
        if c.is_zero() {
            continue;
        }
        g = gcd(&g, &c);
        if g.is_one() {
            break;
        }
    }
    g
}

fn normalize_gcd(p: Poly) -> Poly {
    p.primitive().1
}

/// Greatest common divisor, primitive with positive leading coefficient.
pub fn gcd(a: &Poly, b: &Poly) -> Poly {
    if a.is_zero() {
        return normalize_gcd(b.clone());
    }
    if b.is_zero() {
        return normalize_gcd(a.clone());
    }
    if a.is_constant() || b.is_constant() {
        return Poly::constant(a.content().gcd(&b.content()));
    }
    if a == b {
        return normalize_gcd(a.clone());
    }
    if a.len() == 1 && b.len() == 1 {
        let m = a.terms[0].0.gcd(&b.terms[0].0);
        return Poly::monomial(m, a.terms[0].1.gcd(&b.terms[0].1));
    }
    let v = a.max_var().max(b.max_var()).unwrap();
    let da = a.degree(v);
    let db = b.degree(v);
    if da == 0 {
        return gcd(a, &content_in(b, v));
    }
    if db == 0 {
        return gcd(&content_in(a, v), b);
    }
    let ca = content_in(a, v);
    let cb = content_in(b, v);
    let pa = a.div_exact(&ca).expect("content divides");
    let pb = b.div_exact(&cb).expect("content divides");
    let c = gcd(&ca, &cb);
    let g = if da >= db { subresultant_gcd(&pa, &pb, v) } else { subresultant_gcd(&pb, &pa, v) };
    normalize_gcd(c.mul(&g))
}

/// Pseudo-remainder of `a` by `b` with respect to `v`.
pub fn prem(a: &Poly, b: &Poly, v: Var) -> Poly {
    let db = b.degree(v);
    let bc = b.coeffs_in(v);
    let lb = bc[db as usize].clone();
    let mut r = a.clone();
    let mut k = a.degree(v) as i64 - db as i64 + 1;
    while !r.is_zero() && r.degree(v) >= db {
        let dr = r.degree(v);
        let lr = r.coeffs_in(v)[dr as usize].clone();
        let shifted = b.mul(&lr).mul(&Poly::monomial(Mono::var(v, dr - db), BigInt::one()));
        r = r.mul(&lb).sub(&shifted);
        k -= 1;
    }
    if k > 0 {
        r = r.mul(&lb.pow(k as u32));
    }
    r
}

/// GCD of two polynomials primitive in `v`, with `deg_v(a) >= deg_v(b)`.
fn subresultant_gcd(a: &Poly, b: &Poly, v: Var) -> Poly {
    let mut a = a.clone();
    let mut b = b.clone();
    let mut g = Poly::one();
    let mut h = Poly::one();
    loop {
        let d = a.degree(v) - b.degree(v);
        let r = prem(&a, &b, v);
        if r.is_zero() {
            break;
        }
        if r.degree(v) == 0 {
            return Poly::one();
        }
        a = b;
        let divisor = g.mul(&h.pow(d));
        b = r.div_exact(&divisor).expect("subresultant division is exact");
        g = a.coeffs_in(v).last().unwrap().clone();
        if d == 0 {
            // h unchanged
        } else if d == 1 {
            h = g.clone();
        } else {
            h = g.pow(d).div_exact(&h.pow(d - 1)).expect("exact");
        }
    }
    let cb = content_in(&b, v);
    b.div_exact(&cb).expect("content divides")
}

/// Square-free decomposition: returns `(factor, multiplicity)` pairs whose
/// product equals `p` up to an integer constant.
pub fn squarefree(p: &Poly) -> Vec<(Poly, u32)> {
    if p.is_constant() {
        return Vec::new();
    }
    let mono = p.monomial_content();
    let p = p.div_mono(&mono);
    let mut out: Vec<(Poly, u32)> = mono.0.iter().map(|&(v, e)| (Poly::var(v), e)).collect();
    if p.is_constant() {
        return out;
    }
    let v = p.max_var().unwrap();
    let c = content_in(&p, v);
    let pp = p.div_exact(&c).expect("content divides");
    out.extend(squarefree(&c));
    let d = pp.derivative(v);
    let b1 = gcd(&pp, &d);
    let mut ci = pp.div_exact(&b1).expect("gcd divides");
    let mut di = d.div_exact(&b1).expect("gcd divides").sub(&ci.derivative(v));
    let mut i = 1;
    while ci.degree(v) > 0 {
        let ai = gcd(&ci, &di);
        let next = ci.div_exact(&ai).expect("gcd divides");
        di = di.div_exact(&ai).expect("gcd divides").sub(&next.derivative(v));
        if !ai.is_constant() {
            out.push((ai.primitive().1, i));
        }
        ci = next;
        i += 1;
    }
    out
}

/// Exact square root over the integers, if `p` is a perfect square.
pub fn sqrt(p: &Poly) -> Option<Poly> {
    if p.is_zero() {
        return Some(Poly::zero());
    }
    let (lm, lc) = p.leading()?;
    if lc.is_negative() {
        return None;
    }
    let mut root_mono = SmallVec::new();
    for &(v, e) in &lm.0 {
        if e % 2 != 0 {
            return None;
        }
        root_mono.push((v, e / 2));
    }
    let rc = lc.sqrt();
    if &(&rc * &rc) != lc {
        return None;
    }
    let lead = (Mono(root_mono), rc);
    let two_lead = Poly::monomial(lead.0.clone(), &lead.1 * BigInt::from(2));
    let mut s = Poly::monomial(lead.0.clone(), lead.1.clone());
    for _ in 0..=p.len() {
        let r = p.sub(&s.mul(&s));
        if r.is_zero() {
            return Some(s);
        }
        let (rm, rcf) = r.leading().unwrap();
        let (tl, tc) = two_lead.leading().unwrap();
        let qm = rm.div(tl)?;
        if qm >= lead.0 {
            return None;
        }
        let (qc, rr) = rcf.div_rem(tc);
        if !rr.is_zero() {
            return None;
        }
        s = s.add(&Poly::monomial(qm, qc));
    }
    None
}

/// True when `p` is provably irreducible: it has degree one in some variable
/// and is primitive with respect to it.
pub fn is_provably_irreducible(p: &Poly) -> bool {
    if p.is_constant() {
        return false;
    }
    if p.content() != BigInt::one() {
        return false;
    }
    p.vars().into_iter().any(|v| p.degree(v) == 1 && content_in(p, v).is_constant())
}

/// Splits a primitive polynomial into factors using monomial content,
/// content with respect to each variable, square-free decomposition, the
/// quadratic formula with a perfect-square discriminant, and rational roots
/// built from monomial divisors. Factors that survive are treated as
/// irreducible. Returned factors are primitive with positive leading
/// coefficient, paired with multiplicities.
pub fn split_factors(p: &Poly) -> Vec<(Poly, u32)> {
    let mut out = Vec::new();
    for (f, k) in squarefree(p) {
        for g in split_squarefree(&f) {
            out.push((g, k));
        }
    }
    // merge duplicates
    let mut merged: Vec<(Poly, u32)> = Vec::new();
    for (f, k) in out {
        if let Some(slot) = merged.iter_mut().find(|(g, _)| *g == f) {
            slot.1 += k;
        } else {
            merged.push((f, k));
        }
    }
    merged
}

fn split_squarefree(p: &Poly) -> Vec<Poly> {
    let p = p.primitive().1;
    if p.is_constant() {
        return Vec::new();
    }
    let mono = p.monomial_content();
    if !mono.is_one() {
        let mut out: Vec<Poly> = mono.0.iter().map(|&(v, _)| Poly::var(v)).collect();
        out.extend(split_squarefree(&p.div_mono(&mono)));
        return out;
    }
    let vars = p.vars();
    for &v in &vars {
        if p.degree(v) == 0 {
            continue;
        }
        let c = content_in(&p, v);
        if !c.is_constant() {
            let rest = p.div_exact(&c).expect("content divides");
            let mut out = split_squarefree(&c);
            out.extend(split_squarefree(&rest));
            return out;
        }
    }
    if is_provably_irreducible(&p) {
        return vec![p];
    }
    for &v in &vars {
        let d = p.degree(v);
        if d == 2 {
            let cs = p.coeffs_in(v);
            let (c0, b, a) = (&cs[0], &cs[1], &cs[2]);
            let disc = b.mul(b).sub(&a.mul(c0).scale(&BigInt::from(4)));
            if let Some(s) = sqrt(&disc) {
                let two_a_v = a.scale(&BigInt::from(2)).mul(&Poly::var(v));
                let f1 = two_a_v.add(b).sub(&s).primitive().1;
                let f2 = p.div_exact(&f1);
                if let Some(f2) = f2 {
                    let mut out = split_squarefree(&f1);
                    out.extend(split_squarefree(&f2));
                    return out;
                }
            }
        } else if d >= 3 {
            if let Some(lin) = find_linear_factor(&p, v) {
                let rest = p.div_exact(&lin).expect("root gives a factor");
                let mut out = vec![lin];
                out.extend(split_squarefree(&rest));
                return out;
            }
        }
    }
    vec![p]
}

fn monomial_divisors(p: &Poly, limit: usize) -> Option<Vec<Poly>> {
    if p.len() != 1 {
        return None;
    }
    let (m, c) = &p.terms[0];
    let c = c.abs();
    let mut ints = Vec::new();
    let mut k = BigInt::one();
    let cap = BigInt::from(10_000);
    while k <= c && k <= cap {
        if c.is_multiple_of(&k) {
            ints.push(k.clone());
        }
        k += 1;
    }
    let mut monos = vec![Mono::one()];
    for &(v, e) in &m.0 {
        let mut next = Vec::new();
        for base in &monos {
            for j in 0..=e {
                next.push(base.with_var(v, j));
            }
        }
        monos = next;
        if monos.len() > limit {
            return None;
        }
    }
    let mut out = Vec::new();
    for i in &ints {
        for mm in &monos {
            out.push(Poly::monomial(mm.clone(), i.clone()));
            if out.len() > limit {
                return None;
            }
        }
    }
    Some(out)
}

fn find_linear_factor(p: &Poly, v: Var) -> Option<Poly> {
    let cs = p.coeffs_in(v);
    let a0 = cs.first()?;
    let an = cs.last()?;
    if a0.is_zero() {
        return Some(Poly::var(v));
    }
    let us = monomial_divisors(a0, 200)?;
    let ws = monomial_divisors(an, 200)?;
    let deg = cs.len() - 1;
    for u in &us {
        for w in &ws {
            for sign in [1, -1] {
                let u = u.scale(&BigInt::from(sign));
                let mut acc = Poly::zero();
                for (k, c) in cs.iter().enumerate() {
                    acc = acc.add(&c.mul(&u.pow(k as u32)).mul(&w.pow((deg - k) as u32)));
                }
                if acc.is_zero() {
                    let lin = w.mul(&Poly::var(v)).sub(&u).primitive().1;
                    return Some(lin);
                }
            }
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    fn x() -> Poly {
        Poly::var(0)
    }
    fn y() -> Poly {
        Poly::var(1)
    }
    fn c(k: i64) -> Poly {
        Poly::constant(BigInt::from(k))
    }

    #[test]
    fn exact_division_round_trip() {
        let a = x().add(&y()).add(&c(1));
        let b = x().sub(&y().mul(&y()));
        let p = a.mul(&b);
        assert_eq!(p.div_exact(&a).unwrap(), b);
        assert_eq!(p.div_exact(&b).unwrap(), a);
        assert!(p.div_exact(&x().add(&c(7))).is_none());
    }

    #[test]
    fn gcd_of_products() {
        let f = x().sub(&y());
        let g = x().add(&c(2)).mul(&y());
        let h = x().mul(&x()).add(&y());
        let a = f.mul(&g).mul(&f);
        let b = f.mul(&h);
        assert_eq!(gcd(&a, &b), f.primitive().1);
        assert!(gcd(&g, &h).is_one());
    }

    #[test]
    fn squarefree_and_sqrt() {
        let f = x().sub(&c(1));
        let p = f.mul(&f).mul(&x());
        let sf = squarefree(&p);
        assert!(sf.contains(&(f.clone(), 2)));
        assert!(sf.contains(&(x(), 1)));
        let s = sqrt(&f.mul(&f)).unwrap();
        assert_eq!(s, f);
        assert!(sqrt(&p).is_none());
    }

    #[test]
    fn splits_difference_of_squares() {
        let p = x().mul(&x()).sub(&y().mul(&y()));
        let fs = split_factors(&p);
        assert_eq!(fs.len(), 2);
        let prod = fs.iter().fold(Poly::one(), |acc, (f, _)| acc.mul(f));
        assert_eq!(prod.primitive().1, p.primitive().1);
    }

    #[test]
    fn cubic_root_found() {
        // x^3 - y^3 = (x - y)(x^2 + x y + y^2)
        let p = x().pow(3).sub(&y().pow(3));
        let fs = split_factors(&p);
        assert!(fs.iter().any(|(f, _)| *f == x().sub(&y()).primitive().1));
    }
}
