//! Line-oriented job files: one `key = value` per line, `#` starts a
//! comment. Expression values use the plain syntax of [`parse_expr`].

use std::collections::BTreeSet;

use num_complex::Complex64;

use crate::coupled::{Branch, CoupledProblem, Hermiticity, Overrides, Theory};
use crate::error::{Error, Result};
use crate::expr::{Assumptions, Expr};
use crate::jet::{eval_value, Env};
use crate::oracle::Setup;
use crate::parse::{parse_bindings, parse_expr};
use crate::render::{Form, FractionStyle, RenderSpec};
use crate::scalar::{InputMode, ScalarProblem, Variable};
use crate::script::{parse_script, Script};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Kind {
    Scalar,
    Coupled,
}

#[derive(Clone, Debug)]
pub enum Problem {
    Scalar(ScalarProblem),
    Coupled(CoupledProblem),
}

/// Numeric-check hints: where the jet oracle may be evaluated.
#[derive(Clone, Debug, Default)]
pub struct CheckHints {
    /// Lower limit for `c_m` integrations.
    pub anchor: Option<f64>,
    pub points: Vec<f64>,
    /// Values for free parameters other than the variable.
    pub params: Vec<(String, Expr)>,
}

#[derive(Clone, Debug)]
pub struct JobFile {
    pub problem: Problem,
    /// Assumption `Y_1 = 0` for abstract runs.
    pub y1_zero: bool,
    pub check: CheckHints,
}

impl JobFile {
    pub fn kind(&self) -> Kind {
        match self.problem {
            Problem::Scalar(_) => Kind::Scalar,
            Problem::Coupled(_) => Kind::Coupled,
        }
    }

    pub fn render(&self) -> RenderSpec {
        match &self.problem {
            Problem::Scalar(p) => p.render,
            Problem::Coupled(p) => p.render,
        }
    }

    pub fn set_render(&mut self, spec: RenderSpec) {
        match &mut self.problem {
            Problem::Scalar(p) => p.render = spec,
            Problem::Coupled(p) => p.render = spec,
        }
    }

    /// Oracle setup from the check hints, with definitions and extra
    /// parameter values taken from an evaluation script when given.
    pub fn oracle_setup(&self, script: Option<&Script>) -> Result<Setup> {
        let var = match &self.problem {
            Problem::Scalar(p) => p.variable.name(),
            Problem::Coupled(_) => "x",
        };
        let mut setup = Setup { anchor: self.check.anchor.unwrap_or(0.0), ..Setup::default() };
        let point = Env::new("", Complex64::new(0.0, 0.0));
        let mut bind = |k: &str, v: &Expr| -> Result<()> {
            if k != var {
                setup.params.insert(k.to_string(), eval_value(v, &point)?);
            }
            Ok(())
        };
        if let Some(s) = script {
            for (k, v) in &s.parrepls {
                bind(k, v)?;
            }
        }
        for (k, v) in &self.check.params {
            bind(k, v)?;
        }
        if let Some(s) = script {
            setup.defs = s.defs.clone();
        }
        Ok(setup)
    }

    pub fn assumptions(&self) -> &Assumptions {
        match &self.problem {
            Problem::Scalar(p) => &p.assumptions,
            Problem::Coupled(p) => &p.assumptions,
        }
    }
}

const COMMON: &[&str] = &["kind", "af", "positive", "output", "fractions", "anchor", "sample_points", "sample_params"];
const SCALAR: &[&str] = &["R", "nmax", "variable", "input_mode", "eps0"];
const COUPLED: &[&str] = &[
    "R11",
    "R12",
    "R21",
    "R22",
    "mmax",
    "branch",
    "hermitian",
    "theory",
    "normalize",
    "integrate_theta",
    "trig_expand",
    "y1_zero",
    "automatic",
    "g_factor",
    "parrepls",
    "Delta",
    "sqrtDel",
    "signQsq",
    "eps0",
    "simplify_upto",
];

struct Fields {
    entries: Vec<(String, String, usize)>,
}

impl Fields {
    fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().rev().find(|(k, _, _)| k == key).map(|(_, v, _)| v.as_str())
    }

    fn expr(&self, key: &str) -> Result<Option<Expr>> {
        self.get(key).map(|v| parse_expr(v).map_err(|e| mismatch(key, &e.to_string()))).transpose()
    }

    fn required_expr(&self, key: &str) -> Result<Expr> {
        self.expr(key)?.ok_or_else(|| Error::MissingRequiredField(key.into()))
    }

    fn usize(&self, key: &str, default: usize) -> Result<usize> {
        match self.get(key) {
            None => Ok(default),
            Some(v) => v.parse().map_err(|_| mismatch(key, "expected a non-negative integer")),
        }
    }

    fn flag(&self, key: &str, default: bool) -> Result<bool> {
        match self.get(key) {
            None => Ok(default),
            Some("y" | "yes" | "true" | "True") => Ok(true),
            Some("n" | "no" | "false" | "False") => Ok(false),
            Some(_) => Err(mismatch(key, "expected y/n or true/false")),
        }
    }

    fn letter<T>(&self, key: &str, default: T, options: &[(&str, T)]) -> Result<T>
    where
        T: Copy,
    {
        match self.get(key) {
            None => Ok(default),
            Some(v) => options.iter().find(|(l, _)| *l == v).map(|(_, t)| *t).ok_or_else(|| {
                let allowed: Vec<&str> = options.iter().map(|(l, _)| *l).collect();
                mismatch(key, &format!("expected one of {}", allowed.join("/")))
            }),
        }
    }

    fn number(&self, key: &str) -> Result<Option<f64>> {
        self.get(key).map(|v| parse_number(v).ok_or_else(|| mismatch(key, "expected a number"))).transpose()
    }
}

fn mismatch(field: &str, message: &str) -> Error {
    Error::TypeMismatch { field: field.into(), message: message.into() }
}

fn parse_number(v: &str) -> Option<f64> {
    if let Ok(x) = v.trim().parse::<f64>() {
        return Some(x);
    }
    let e = parse_expr(v).ok()?;
    let r = e.as_rational()?;
    num_traits::ToPrimitive::to_f64(r)
}

/// Parses a job file, applying the documented defaults.
pub fn parse_job(text: &str) -> Result<JobFile> {
    let mut entries = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(Error::Syntax { position: n + 1, expected: "`key = value` on this line".into() });
        };
        entries.push((k.trim().to_string(), v.trim().to_string(), n + 1));
    }
    let f = Fields { entries };
    let kind = match f.get("kind") {
        Some("scalar") => Kind::Scalar,
        Some("coupled") => Kind::Coupled,
        Some(_) => return Err(mismatch("kind", "expected scalar or coupled")),
        None => return Err(Error::MissingRequiredField("kind".into())),
    };
    let allowed: BTreeSet<&str> =
        COMMON.iter().chain(if kind == Kind::Scalar { SCALAR } else { COUPLED }).copied().collect();
    if let Some((k, _, _)) = f.entries.iter().find(|(k, _, _)| !allowed.contains(k.as_str())) {
        return Err(Error::UnknownKey(k.clone()));
    }

    let mut assumptions = Assumptions::new();
    if let Some(list) = f.get("positive") {
        for name in list.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            assumptions.declare_positive(name).map_err(|e| mismatch("positive", &e.to_string()))?;
        }
    }
    let render = RenderSpec::new(
        f.letter("output", Form::Plain, &[("o", Form::Plain), ("t", Form::TeX), ("f", Form::Fortran)])?,
        f.letter(
            "fractions",
            FractionStyle::CommonDenominator,
            &[("s", FractionStyle::SimpleFractions), ("c", FractionStyle::CommonDenominator), ("n", FractionStyle::None)],
        )?,
    );
    let af = f.expr("af")?.unwrap_or_else(Expr::zero);
    let check = CheckHints {
        anchor: f.number("anchor")?,
        points: match f.get("sample_points") {
            None => Vec::new(),
            Some(v) => v
                .split(',')
                .map(|s| parse_number(s).ok_or_else(|| mismatch("sample_points", "expected numbers")))
                .collect::<Result<_>>()?,
        },
        params: match f.get("sample_params") {
            None => Vec::new(),
            Some(v) => parse_bindings(v).map_err(|e| mismatch("sample_params", &e.to_string()))?,
        },
    };

    let problem = match kind {
        Kind::Scalar => {
            let input_mode = f.letter("input_mode", InputMode::Explicit, &[("i", InputMode::Explicit), ("g", InputMode::General)])?;
            let r = match input_mode {
                InputMode::Explicit => f.required_expr("R")?,
                InputMode::General => f.expr("R")?.unwrap_or_else(Expr::zero),
            };
            Problem::Scalar(ScalarProblem {
                r,
                af,
                nmax: f.usize("nmax", 2)?,
                input_mode,
                variable: f.letter("variable", Variable::X, &[("x", Variable::X), ("z", Variable::Zeta)])?,
                render,
                assumptions,
                eps0_override: f.expr("eps0")?,
            })
        }
        Kind::Coupled => {
            let mut p = CoupledProblem::new(
                f.required_expr("R11")?,
                f.required_expr("R12")?,
                f.required_expr("R21")?,
                f.required_expr("R22")?,
            );
            p.af = af;
            p.mmax = f.usize("mmax", 2)?;
            p.branch = f.letter("branch", Branch::Minus, &[("m", Branch::Minus), ("p", Branch::Plus)])?;
            p.hermitian =
                f.letter("hermitian", Hermiticity::Hermitian, &[("h", Hermiticity::Hermitian), ("n", Hermiticity::NonHermitian)])?;
            p.theory = f.letter(
                "theory",
                Theory::Simplified,
                &[("s", Theory::Simplified), ("f", Theory::Fulling), ("w", Theory::Wronskian)],
            )?;
            p.normalize = f.flag("normalize", false)?;
            p.integrate_theta = f.flag("integrate_theta", false)?;
            p.trig_expand = f.flag("trig_expand", false)?;
            p.automatic = f.flag("automatic", true)?;
            if let Some(g) = f.expr("g_factor")? {
                p.g_factor = g;
            }
            if let Some(v) = f.get("parrepls") {
                p.parrepls = parse_bindings(v).map_err(|e| mismatch("parrepls", &e.to_string()))?;
            }
            if !p.automatic {
                let sign = match f.get("signQsq") {
                    Some("1" | "+1") => 1,
                    Some("-1") => -1,
                    Some(_) => return Err(mismatch("signQsq", "expected -1 or 1")),
                    None => return Err(Error::MissingRequiredField("signQsq".into())),
                };
                p.overrides = Some(Overrides {
                    delta: f.required_expr("Delta")?,
                    sqrt_del: f.required_expr("sqrtDel")?,
                    sign_qsq: sign,
                });
            }
            p.eps0_override = f.expr("eps0")?;
            p.simplify_upto = f.get("simplify_upto").map(|_| f.usize("simplify_upto", 0)).transpose()?;
            p.render = render;
            p.assumptions = assumptions;
            Problem::Coupled(p)
        }
    };
    Ok(JobFile { y1_zero: f.flag("y1_zero", false)?, problem, check })
}

/// Names of the bundled fixtures.
pub const FIXTURES: &[&str] = &["parabolic", "budden", "A", "B", "C1", "C2", "C3", "C4", "D", "E", "X"];

/// Text of a bundled job file.
pub fn fixture_text(name: &str) -> Option<&'static str> {
    Some(match name {
        "parabolic" => include_str!("../fixtures/parabolic.job"),
        "budden" => include_str!("../fixtures/budden.job"),
        "A" => include_str!("../fixtures/A.job"),
        "B" => include_str!("../fixtures/B.job"),
        "C1" => include_str!("../fixtures/C1.job"),
        "C2" => include_str!("../fixtures/C2.job"),
        "C3" => include_str!("../fixtures/C3.job"),
        "C4" => include_str!("../fixtures/C4.job"),
        "D" => include_str!("../fixtures/D.job"),
        "E" => include_str!("../fixtures/E.job"),
        "X" => include_str!("../fixtures/X.job"),
        _ => return None,
    })
}

/// Appended evaluation script shipped with a fixture, if any.
pub fn fixture_script(name: &str) -> Option<&'static str> {
    match name {
        "E" => Some(include_str!("../fixtures/E.ap")),
        _ => None,
    }
}

pub fn fixture_script_parsed(name: &str) -> Result<Option<Script>> {
    fixture_script(name).map(parse_script).transpose()
}

pub fn fixture(name: &str) -> Result<JobFile> {
    let text = fixture_text(name).ok_or_else(|| Error::InvalidProblem(format!("no bundled example `{name}`")))?;
    parse_job(text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_applied() {
        let j = parse_job("kind = scalar\nR = coef*(x^2 - x1^2)\n").unwrap();
        let Problem::Scalar(p) = j.problem else { panic!() };
        assert!(p.af.is_zero());
        assert_eq!(p.input_mode, InputMode::Explicit);
        assert_eq!(p.variable, Variable::X);
        let j = parse_job("kind = coupled\nR11 = 1\nR12 = x\nR21 = x\nR22 = 2\nparrepls = x -> 2").unwrap();
        let Problem::Coupled(p) = j.problem else { panic!() };
        assert_eq!(p.branch, Branch::Minus);
        assert_eq!(p.theory, Theory::Simplified);
        assert_eq!(p.hermitian, Hermiticity::Hermitian);
        assert!(p.automatic && !p.normalize && !p.trig_expand && !j.y1_zero);
        assert_eq!(p.parrepls.len(), 1);
    }

    #[test]
    fn errors() {
        assert_eq!(parse_job("kind = scalar\nR = x\nbogus = 1").unwrap_err(), Error::UnknownKey("bogus".into()));
        assert_eq!(parse_job("kind = scalar\nR = x\nmmax = 1").unwrap_err(), Error::UnknownKey("mmax".into()));
        assert_eq!(parse_job("R = x").unwrap_err(), Error::MissingRequiredField("kind".into()));
        assert_eq!(parse_job("kind = scalar").unwrap_err(), Error::MissingRequiredField("R".into()));
        assert!(matches!(parse_job("kind = scalar\nR = x\nnmax = two"), Err(Error::TypeMismatch { .. })));
        assert!(matches!(parse_job("kind = coupled\nR11 = 1\nR12 = x\nR21 = x\nR22 = 2\nbranch = q"), Err(Error::TypeMismatch { .. })));
        assert_eq!(
            parse_job("kind = coupled\nR11 = 1\nR12 = x\nR21 = x\nR22 = 2\nautomatic = false\nsignQsq = -1\nDelta = 4").unwrap_err(),
            Error::MissingRequiredField("sqrtDel".into())
        );
    }

    #[test]
    fn every_fixture_parses() {
        for name in FIXTURES {
            fixture(name).unwrap_or_else(|e| panic!("{name}: {e}"));
        }
    }
}
