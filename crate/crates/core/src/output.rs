//! Result files in the three output forms.
//!
//! Timing lines always start with ` CPU time`, so two runs of the same job
//! differ only on those lines.

use crate::calculus::{apart, together};
use crate::coupled::{Branch, CoupledCorrectionSeries, CoupledProblem, Hermiticity};
use crate::error::Result;
use crate::expr::Expr;
use crate::normal::Ctx;
use crate::render::{format, fortran_lines, Form, FractionStyle, RenderSpec};
use crate::scalar::{InputMode, ScalarCorrectionSeries, ScalarProblem};
use crate::script::Appended;

/// Applies the fraction style: partial fractions in `var`, one common
/// denominator, or nothing. Partial fractions fall back to a common
/// denominator when the denominator does not split over the rationals.
pub fn prepare(ctx: &mut Ctx, e: &Expr, style: FractionStyle, var: &str) -> Result<Expr> {
    match style {
        FractionStyle::None => Ok(e.clone()),
        FractionStyle::CommonDenominator => together(ctx, e),
        FractionStyle::SimpleFractions => match apart(ctx, e, var) {
            Ok(v) => Ok(v),
            Err(crate::Error::FactorizationOutOfScope { .. }) => together(ctx, e),
            Err(err) => Err(err),
        },
    }
}

pub struct ResultWriter {
    spec: RenderSpec,
    var: String,
    ctx: Ctx,
    out: String,
}

impl ResultWriter {
    pub fn new(spec: RenderSpec, var: &str, ctx: Ctx) -> ResultWriter {
        ResultWriter { spec, var: var.into(), ctx, out: String::new() }
    }

    pub fn text(&mut self, s: &str) {
        self.out.push_str(s);
    }

    fn render(&self, e: &Expr) -> String {
        let s = format(e, self.spec.form);
        match self.spec.form {
            Form::Fortran => fortran_lines(&s, 72),
            _ => s,
        }
    }

    /// `label = ` followed by the expression on its own line, printed as is.
    pub fn raw(&mut self, label: &str, e: &Expr) {
        let r = self.render(e);
        self.out.push_str(&format!("\n {label} = \n{r}\n"));
    }

    /// Like [`ResultWriter::raw`] after applying the fraction style.
    pub fn quantity(&mut self, label: &str, e: &Expr) -> Result<()> {
        let var = self.var.clone();
        let p = prepare(&mut self.ctx, e, self.spec.fraction_style, &var)?;
        self.raw(label, &p);
        Ok(())
    }

    /// The common-denominator form when it renders shorter than the input.
    fn tidy(&mut self, e: &Expr) -> String {
        let raw = self.render(e);
        match together(&mut self.ctx, e) {
            Ok(v) => {
                let n = self.render(&v);
                if n.len() <= raw.len() {
                    n
                } else {
                    raw
                }
            }
            Err(_) => raw,
        }
    }

    pub fn normalized(&mut self, label: &str, e: &Expr) {
        let r = self.tidy(e);
        self.out.push_str(&format!("\n {label} = \n{r}\n"));
    }

    pub fn vector(&mut self, label: &str, v: &[Expr; 2]) {
        let parts = [self.tidy(&v[0]), self.tidy(&v[1])];
        self.out.push_str(&format!("\n {label} = \n{{{}}}\n", parts.join(", ")));
    }

    pub fn inline(&mut self, label: &str, value: &str) {
        self.out.push_str(&format!("\n {label} = {value}\n"));
    }

    pub fn cpu(&mut self, what: &str, seconds: f64) {
        self.out.push_str(&format!("\n CPU time used for {what} (seconds) = {seconds:.3}\n"));
    }

    pub fn appended(&mut self, items: &[Appended]) -> Result<()> {
        for item in items {
            match item {
                Appended::Symbolic(name, e) => {
                    let v = together(&mut self.ctx, e)?;
                    self.raw(name, &v);
                }
                Appended::Numeric(label, v) => self.inline(label, &complex(*v)),
                Appended::Point(b) => {
                    let list: Vec<String> = b.iter().map(|(k, v)| format!("{k} -> {}", format(v, Form::Plain))).collect();
                    self.out.push_str(&format!("\n {{{}}}\n", list.join(", ")));
                }
            }
        }
        Ok(())
    }

    pub fn finish(self) -> String {
        self.out
    }
}

/// `a + b i` with 16 significant digits.
pub fn complex(v: num_complex::Complex64) -> String {
    if v.im == 0.0 {
        format!("{:.15e}", v.re)
    } else if v.re == 0.0 {
        format!("{:.15e} i", v.im)
    } else {
        let sign = if v.im < 0.0 { '-' } else { '+' };
        format!("{:.15e} {sign} {:.15e} i", v.re, v.im.abs())
    }
}

pub fn scalar_result(p: &ScalarProblem, s: &ScalarCorrectionSeries, appended: &[Appended]) -> Result<String> {
    let var = p.variable.name();
    let mut w = ResultWriter::new(p.render, var, Ctx::new(p.assumptions.clone()));
    w.text("\n Formulas for corrections Y2n as functions of x or z (= zeta variable). \n");
    w.inline("nmax", &p.nmax.to_string());
    match p.input_mode {
        InputMode::Explicit => {
            w.text("\n Y2n[x] for \n");
            w.raw("R[x]", &p.r);
            w.raw("Auxiliary function a[x]", &p.af);
            w.quantity("eps0[x]", &s.eps0)?;
        }
        InputMode::General => match p.variable {
            crate::scalar::Variable::X => {
                w.text("\n Y2n[x] as functions of eps0[x], Qsqr[x] = Q^2[x] and derivatives \n")
            }
            crate::scalar::Variable::Zeta => w.text("\n Y2n[z] as functions of eps0[z] and derivatives \n"),
        },
    }
    w.cpu("computation", s.timings.compute);
    for n in 1..=p.nmax {
        w.inline("n", &n.to_string());
        w.quantity("Y2n", &s.y[&(2 * n)])?;
    }
    w.appended(appended)?;
    w.cpu("computation & simplification", s.timings.compute + s.timings.simplify);
    Ok(w.finish())
}

pub fn coupled_result(p: &CoupledProblem, s: &CoupledCorrectionSeries, appended: &[Appended]) -> Result<String> {
    let f = &s.frame;
    let mut w = ResultWriter::new(p.render, "x", Ctx::new(p.assumptions.clone()));
    w.text("\n Formulas for corrections Y_m, cp_m and c_m as functions of x. \n");
    w.inline("mmax", &p.mmax.to_string());
    w.raw("R11", &p.r11);
    w.raw("R12", &p.r12);
    w.raw("R21", &p.r21);
    w.raw("R22", &p.r22);
    w.raw("af", &p.af);
    if p.automatic {
        let list: Vec<String> = p.parrepls.iter().map(|(k, v)| format!("{k} -> {}", format(v, Form::Plain))).collect();
        w.inline("paramter replacement list", &format!("{{{}}}", list.join(", ")));
    } else {
        w.text("\n *** Non-automatic calculation *** \n");
    }
    w.text(match p.branch {
        Branch::Minus => "\n Qsqr with minus Sqrt[ Delta ] \n",
        Branch::Plus => "\n Qsqr with plus Sqrt[ Delta ] \n",
    });
    w.raw("Delta", &f.delta);
    w.inline("signQsq", &f.sign_qsq.to_string());
    w.normalized("Qsq", &f.qsq);
    w.normalized("eps0", &f.eps0);
    w.normalized("Q", &f.q);
    w.normalized("s02/s01", &f.s02os01);
    w.raw("Factor g[x]", &p.g_factor);
    if let Some(theta) = &f.theta {
        w.raw("theta", theta);
    }
    w.vector("s0v", &f.s0v);
    w.vector("spv", &f.spv);
    w.normalized("D", &f.den);
    w.text(&format!(
        "\n *** {} {} theory *** \n",
        match p.hermitian {
            Hermiticity::Hermitian => "Hermitian",
            Hermiticity::NonHermitian => "Non-hermitian",
        },
        match p.effective_theory() {
            crate::coupled::Theory::Simplified => "simplified",
            crate::coupled::Theory::Fulling => "Fulling",
            crate::coupled::Theory::Wronskian => "Wronskian-conserving",
        }
    ));
    w.cpu("computation", s.timings.compute);
    let limit = p.simplify_upto.unwrap_or(usize::MAX);
    for o in &s.orders {
        w.inline("m", &o.m.to_string());
        for (label, e) in [("Y_m", &o.y), ("cp_m", &o.cp), ("c_m", &o.c)] {
            if o.m <= limit {
                w.quantity(label, e)?;
            } else {
                w.raw(label, e);
            }
        }
    }
    w.appended(appended)?;
    w.cpu("computation & simplification", s.timings.compute + s.timings.simplify);
    Ok(w.finish())
}

pub fn bvm_result(mmax: usize, zeta: bool, y1_zero: bool, b: &[Expr], seconds: f64) -> String {
    let var = if zeta { "z" } else { "x" };
    let mut w = ResultWriter::new(RenderSpec::default(), var, Ctx::default());
    w.text("\n Formulas for vectors bvm as functions of x or z (= zeta variable). \n");
    w.inline("mmax", &mmax.to_string());
    w.inline("variable", var);
    if y1_zero {
        w.text(&format!("\n Y[{var}, 1] = 0 \n"));
    }
    for (k, e) in b.iter().enumerate() {
        w.inline("m", &(k + 1).to_string());
        w.raw("bv[m]", e);
    }
    w.cpu("computation", seconds);
    w.finish()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parse::parse_expr;

    #[test]
    fn fraction_styles() {
        let mut ctx = Ctx::default();
        let e = parse_expr("1/(x^2 - 1)").unwrap();
        let s = prepare(&mut ctx, &e, FractionStyle::SimpleFractions, "x").unwrap();
        assert_eq!(crate::render::plain(&s).matches('/').count(), 2);
        let c = prepare(&mut ctx, &s, FractionStyle::CommonDenominator, "x").unwrap();
        assert!(crate::calculus::equal(&mut ctx, &c, &e).unwrap());
        let cubic = parse_expr("1/(x^3 - 2)").unwrap();
        assert!(prepare(&mut ctx, &cubic, FractionStyle::SimpleFractions, "x").is_ok());
    }

    #[test]
    fn complex_numbers() {
        assert_eq!(complex(num_complex::Complex64::new(0.5, 0.0)), "5.000000000000000e-1");
        assert_eq!(complex(num_complex::Complex64::new(1.0, -2.0)), "1.000000000000000e0 - 2.000000000000000e0 i");
    }
}
