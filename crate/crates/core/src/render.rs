//! Text renderers: a plain syntax that parses back, a TeX math fragment, and
//! Fortran expressions.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed};

use crate::expr::{Expr, Func, Node};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Form {
    #[default]
    Plain,
    TeX,
    Fortran,
}

impl Form {
    /// The dialog letter `o`, `t` or `f`.
    pub fn from_letter(s: &str) -> Option<Form> {
        match s {
            "o" => Some(Form::Plain),
            "t" => Some(Form::TeX),
            "f" => Some(Form::Fortran),
            _ => None,
        }
    }

    pub fn extension(self) -> &'static str {
        match self {
            Form::Plain => "res",
            Form::TeX => "resTeX",
            Form::Fortran => "resFor",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum FractionStyle {
    SimpleFractions,
    #[default]
    CommonDenominator,
    None,
}

impl FractionStyle {
    pub fn from_letter(s: &str) -> Option<FractionStyle> {
        match s {
            "s" => Some(FractionStyle::SimpleFractions),
            "c" => Some(FractionStyle::CommonDenominator),
            "n" => Some(FractionStyle::None),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub struct RenderSpec {
    pub form: Form,
    pub fraction_style: FractionStyle,
}

impl RenderSpec {
    pub fn new(form: Form, fraction_style: FractionStyle) -> Self {
        RenderSpec { form, fraction_style }
    }
}

/// Formats `e` in the given form without any algebraic preprocessing.
pub fn format(e: &Expr, form: Form) -> String {
    match form {
        Form::Plain => plain(e),
        Form::TeX => tex(e),
        Form::Fortran => fortran(e),
    }
}

// Precedence levels shared by all three printers.
const SUM: u8 = 1;
const PRODUCT: u8 = 2;
const POWER: u8 = 3;
const ATOM: u8 = 4;

fn precedence(e: &Expr) -> u8 {
    match e.node() {
        Node::Sum(_) => SUM,
        Node::Product(_) => PRODUCT,
        Node::Rational(r) => {
            if r.is_integer() && !r.is_negative() {
                ATOM
            } else {
                PRODUCT
            }
        }
        Node::Power(_, ex) => {
            if is_sqrt_exp(ex) {
                ATOM
            } else if is_recip_like(ex) {
                PRODUCT
            } else {
                POWER
            }
        }
        _ => ATOM,
    }
}

fn is_sqrt_exp(ex: &Expr) -> bool {
    ex.as_rational().is_some_and(|r| *r == BigRational::new(1.into(), 2.into()))
}

fn is_recip_like(ex: &Expr) -> bool {
    ex.as_rational().is_some_and(|r| r.is_negative())
}

/// A factor list split into numerator and denominator parts, with the
/// rational coefficient separated.
struct Fraction {
    negative: bool,
    num_coeff: BigInt,
    den_coeff: BigInt,
    num: Vec<Expr>,
    den: Vec<Expr>,
}

fn split_fraction(e: &Expr) -> Fraction {
    let factors: Vec<Expr> = match e.node() {
        Node::Product(fs) => fs.clone(),
        _ => vec![e.clone()],
    };
    let mut fr = Fraction {
        negative: false,
        num_coeff: BigInt::one(),
        den_coeff: BigInt::one(),
        num: Vec::new(),
        den: Vec::new(),
    };
    for f in factors {
        match f.node() {
            Node::Rational(r) => {
                fr.negative ^= r.is_negative();
                fr.num_coeff *= r.numer().abs();
                fr.den_coeff *= r.denom();
            }
            Node::Power(b, ex) if is_recip_like(ex) => {
                let flipped = b.pow(&-ex.clone());
                fr.den.push(flipped);
            }
            _ => fr.num.push(f),
        }
    }
    fr
}

// ---------------------------------------------------------------- plain --

pub fn plain(e: &Expr) -> String {
    let mut s = String::new();
    plain_into(e, &mut s);
    s
}

fn plain_wrapped(e: &Expr, min_prec: u8, out: &mut String) {
    if precedence(e) < min_prec {
        out.push('(');
        plain_into(e, out);
        out.push(')');
    } else {
        plain_into(e, out);
    }
}

fn plain_into(e: &Expr, out: &mut String) {
    match e.node() {
        Node::Rational(r) => {
            out.push_str(&r.numer().to_string());
            if !r.is_integer() {
                out.push('/');
                out.push_str(&r.denom().to_string());
            }
        }
        Node::ImaginaryUnit => out.push('i'),
        Node::Symbol(s) => out.push_str(s),
        Node::Apply(f, a) => {
            out.push_str(f.name());
            out.push('(');
            plain_into(a, out);
            out.push(')');
        }
        Node::Opaque { name, order, arg } => {
            out.push_str(name);
            for _ in 0..*order {
                out.push('\'');
            }
            out.push('(');
            plain_into(arg, out);
            out.push(')');
        }
        Node::Power(b, ex) => {
            if is_sqrt_exp(ex) {
                out.push_str("sqrt(");
                plain_into(b, out);
                out.push(')');
            } else if is_recip_like(ex) {
                plain_product(e, out);
            } else {
                plain_wrapped(b, ATOM, out);
                out.push('^');
                plain_exponent(ex, out);
            }
        }
        Node::Product(_) => plain_product(e, out),
        Node::Sum(ts) => {
            for (k, t) in ts.iter().enumerate() {
                if t.has_negative_sign() {
                    out.push_str(if k == 0 { "-" } else { " - " });
                    plain_wrapped(&-t.clone(), PRODUCT, out);
                } else {
                    if k > 0 {
                        out.push_str(" + ");
                    }
                    plain_wrapped(t, PRODUCT, out);
                }
            }
        }
    }
}

fn plain_exponent(ex: &Expr, out: &mut String) {
    match ex.as_rational() {
        Some(r) if r.is_integer() && !r.is_negative() => out.push_str(&r.to_string()),
        _ => {
            out.push('(');
            plain_into(ex, out);
            out.push(')');
        }
    }
}

fn plain_factor_list(coeff: &BigInt, fs: &[Expr], out: &mut String) {
    let mut first = true;
    if !coeff.is_one() || fs.is_empty() {
        out.push_str(&coeff.to_string());
        first = false;
    }
    for f in fs {
        if !first {
            out.push('*');
        }
        first = false;
        plain_wrapped(f, POWER, out);
    }
}

fn plain_product(e: &Expr, out: &mut String) {
    let fr = split_fraction(e);
    if fr.negative {
        out.push('-');
    }
    plain_factor_list(&fr.num_coeff, &fr.num, out);
    let den_count = fr.den.len() + usize::from(!fr.den_coeff.is_one());
    if den_count == 0 {
        return;
    }
    out.push('/');
    if den_count == 1 {
        if fr.den.is_empty() {
            out.push_str(&fr.den_coeff.to_string());
        } else {
            plain_wrapped(&fr.den[0], POWER, out);
        }
    } else {
        out.push('(');
        plain_factor_list(&fr.den_coeff, &fr.den, out);
        out.push(')');
    }
}

// ------------------------------------------------------------------ TeX --

pub fn tex(e: &Expr) -> String {
    let mut s = String::new();
    tex_into(e, &mut s);
    s
}

fn tex_symbol(name: &str, out: &mut String) {
    let greek = [
        "alpha", "beta", "gamma", "delta", "epsilon", "zeta", "eta", "theta", "kappa", "lambda",
        "mu", "nu", "xi", "pi", "rho", "sigma", "tau", "phi", "chi", "psi", "omega",
    ];
    if name.chars().count() == 1 {
        out.push_str(name);
    } else if greek.contains(&name) {
        out.push('\\');
        out.push_str(name);
    } else {
        let split = name.find(|c: char| c.is_ascii_digit());
        match split {
            Some(k) if k > 0 && name[k..].chars().all(|c| c.is_ascii_digit()) => {
                let (head, digits) = name.split_at(k);
                if head.chars().count() == 1 {
                    out.push_str(head);
                } else {
                    out.push_str("\\mathrm{");
                    out.push_str(head);
                    out.push('}');
                }
                out.push_str("_{");
                out.push_str(digits);
                out.push('}');
            }
            _ => {
                out.push_str("\\mathrm{");
                out.push_str(name);
                out.push('}');
            }
        }
    }
}

fn tex_wrapped(e: &Expr, min_prec: u8, out: &mut String) {
    if precedence(e) < min_prec {
        out.push_str("\\left(");
        tex_into(e, out);
        out.push_str("\\right)");
    } else {
        tex_into(e, out);
    }
}

fn tex_into(e: &Expr, out: &mut String) {
    match e.node() {
        Node::Rational(r) => {
            if r.is_integer() {
                out.push_str(&r.numer().to_string());
            } else {
                if r.is_negative() {
                    out.push('-');
                }
                out.push_str(&format!("\\frac{{{}}}{{{}}}", r.numer().abs(), r.denom()));
            }
        }
        Node::ImaginaryUnit => out.push('i'),
        Node::Symbol(s) => tex_symbol(s, out),
        Node::Apply(f, a) => {
            out.push('\\');
            out.push_str(f.name());
            out.push_str("\\left(");
            tex_into(a, out);
            out.push_str("\\right)");
        }
        Node::Opaque { name, order, arg } => {
            tex_symbol(name, out);
            for _ in 0..*order {
                out.push('\'');
            }
            out.push_str("\\left(");
            tex_into(arg, out);
            out.push_str("\\right)");
        }
        Node::Power(b, ex) => {
            if is_sqrt_exp(ex) {
                out.push_str("\\sqrt{");
                tex_into(b, out);
                out.push('}');
            } else if is_recip_like(ex) {
                tex_product(e, out);
            } else {
                tex_wrapped(b, ATOM, out);
                out.push_str("^{");
                tex_into(ex, out);
                out.push('}');
            }
        }
        Node::Product(_) => tex_product(e, out),
        Node::Sum(ts) => {
            for (k, t) in ts.iter().enumerate() {
                if t.has_negative_sign() {
                    out.push_str(if k == 0 { "-" } else { " - " });
                    tex_wrapped(&-t.clone(), PRODUCT, out);
                } else {
                    if k > 0 {
                        out.push_str(" + ");
                    }
                    tex_wrapped(t, PRODUCT, out);
                }
            }
        }
    }
}

fn tex_factor_list(coeff: &BigInt, fs: &[Expr], out: &mut String) {
    let mut first = true;
    if !coeff.is_one() || fs.is_empty() {
        out.push_str(&coeff.to_string());
        first = false;
    }
    for f in fs {
        if !first {
            out.push_str("\\,");
        }
        first = false;
        tex_wrapped(f, POWER, out);
    }
}

fn tex_product(e: &Expr, out: &mut String) {
    let fr = split_fraction(e);
    if fr.negative {
        out.push('-');
    }
    if fr.den.is_empty() && fr.den_coeff.is_one() {
        tex_factor_list(&fr.num_coeff, &fr.num, out);
        return;
    }
    out.push_str("\\frac{");
    tex_factor_list(&fr.num_coeff, &fr.num, out);
    out.push_str("}{");
    tex_factor_list(&fr.den_coeff, &fr.den, out);
    out.push('}');
}

// -------------------------------------------------------------- Fortran --

pub fn fortran(e: &Expr) -> String {
    let mut s = String::new();
    fortran_into(e, &mut s);
    s
}

fn fortran_int(n: &BigInt, out: &mut String) {
    out.push_str(&n.to_string());
    out.push_str(".d0");
}

fn fortran_wrapped(e: &Expr, min_prec: u8, out: &mut String) {
    if precedence(e) < min_prec {
        out.push('(');
        fortran_into(e, out);
        out.push(')');
    } else {
        fortran_into(e, out);
    }
}

fn fortran_into(e: &Expr, out: &mut String) {
    match e.node() {
        Node::Rational(r) => {
            if r.is_integer() {
                fortran_int(r.numer(), out);
            } else {
                out.push('(');
                fortran_int(r.numer(), out);
                out.push('/');
                fortran_int(r.denom(), out);
                out.push(')');
            }
        }
        Node::ImaginaryUnit => out.push_str("(0.d0,1.d0)"),
        Node::Symbol(s) => out.push_str(s),
        Node::Apply(f, a) => {
            out.push_str(match f {
                Func::Sin => "SIN",
                Func::Cos => "COS",
                Func::Tan => "TAN",
                Func::Exp => "EXP",
                Func::Log => "LOG",
            });
            out.push('(');
            fortran_into(a, out);
            out.push(')');
        }
        Node::Opaque { name, order, arg } => {
            out.push_str(name);
            if *order > 0 {
                out.push_str(&format!("_d{order}"));
            }
            out.push('(');
            fortran_into(arg, out);
            out.push(')');
        }
        Node::Power(b, ex) => {
            if is_sqrt_exp(ex) {
                out.push_str("SQRT(");
                fortran_into(b, out);
                out.push(')');
            } else if is_recip_like(ex) {
                fortran_product(e, out);
            } else {
                fortran_wrapped(b, ATOM, out);
                out.push_str("**");
                match ex.as_rational() {
                    Some(r) if r.is_integer() => out.push_str(&r.to_string()),
                    _ => {
                        out.push('(');
                        fortran_into(ex, out);
                        out.push(')');
                    }
                }
            }
        }
        Node::Product(_) => fortran_product(e, out),
        Node::Sum(ts) => {
            for (k, t) in ts.iter().enumerate() {
                if t.has_negative_sign() {
                    out.push_str(if k == 0 { "-" } else { " - " });
                    fortran_wrapped(&-t.clone(), PRODUCT, out);
                } else {
                    if k > 0 {
                        out.push_str(" + ");
                    }
                    fortran_wrapped(t, PRODUCT, out);
                }
            }
        }
    }
}

fn fortran_factor_list(coeff: &BigInt, fs: &[Expr], out: &mut String) {
    let mut first = true;
    if !coeff.is_one() || fs.is_empty() {
        fortran_int(coeff, out);
        first = false;
    }
    for f in fs {
        if !first {
            out.push('*');
        }
        first = false;
        fortran_wrapped(f, POWER, out);
    }
}

fn fortran_product(e: &Expr, out: &mut String) {
    let fr = split_fraction(e);
    if fr.negative {
        out.push('-');
    }
    fortran_factor_list(&fr.num_coeff, &fr.num, out);
    let den_count = fr.den.len() + usize::from(!fr.den_coeff.is_one());
    if den_count == 0 {
        return;
    }
    out.push('/');
    out.push('(');
    fortran_factor_list(&fr.den_coeff, &fr.den, out);
    out.push(')');
}

/// Breaks a long Fortran expression into fixed-form continuation lines.
pub fn fortran_lines(expr: &str, width: usize) -> String {
    let width = width.max(20);
    let mut lines = Vec::new();
    let mut rest = expr;
    let mut first = true;
    while !rest.is_empty() {
        let prefix = if first { "        " } else { "     -  " };
        let room = width - prefix.len();
        if rest.len() <= room {
            lines.push(format!("{prefix}{rest}"));
            break;
        }
        let window = &rest[..room];
        let cut = window
            .rfind(['+', '-', '*', '/', ','])
            .filter(|&k| k > 0)
            .unwrap_or(room);
        lines.push(format!("{prefix}{}", &rest[..cut]));
        rest = &rest[cut..];
        first = false;
    }
    lines.join("\n")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::Expr;

    fn x() -> Expr {
        Expr::symbol("x")
    }

    #[test]
    fn plain_shapes() {
        assert_eq!(plain(&x().powi(2)), "x^2");
        assert_eq!(plain(&(Expr::symbol("eps0") / Expr::int(2))), "eps0/2");
        assert_eq!(plain(&x().sqrt()), "sqrt(x)");
        assert_eq!(plain(&(Expr::one() / (x() - Expr::int(1)))), "1/(-1 + x)");
        assert_eq!(plain(&-(x() * Expr::i())), "-i*x");
    }

    #[test]
    fn fortran_shapes() {
        assert_eq!(fortran(&x().powi(2)), "x**2");
        assert_eq!(fortran(&(x() * Expr::frac(1, 2))), "x/(2.d0)");
        assert_eq!(fortran(&Expr::frac(1, 2)), "(1.d0/2.d0)");
        assert_eq!(fortran(&x().sin()), "SIN(x)");
    }

    #[test]
    fn tex_shapes() {
        assert_eq!(tex(&(x() / Expr::symbol("y"))), "\\frac{x}{y}");
        assert_eq!(tex(&x().sqrt()), "\\sqrt{x}");
        assert_eq!(tex(&Expr::symbol("x1").powi(2)), "x_{1}^{2}");
    }

    #[test]
    fn long_fortran_lines_wrap() {
        let s = "a + b".repeat(40);
        let w = fortran_lines(&s, 72);
        assert!(w.lines().all(|l| l.len() <= 72));
    }
}
