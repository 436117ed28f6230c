//! Post-run evaluation scripts.
//!
//! ```text
//! show Y1                       # print a result, brought to one denominator
//! h0(x) := -1 - k^2 + d0(x)     # define an uninterpreted function
//! parrepls = x -> 55, k -> 1/25 # numeric point
//! print Q, eps0/2, Y2           # numeric values at that point
//! ```
//!
//! Names refer to computed quantities (`Q`, `Qsq`, `eps0`, `Y2`, `cp1`, ...).

use std::collections::{BTreeMap, HashMap};

use num_complex::Complex64;

use crate::coupled::CoupledCorrectionSeries;
use crate::error::{Error, Result};
use crate::expr::{Expr, Node};
use crate::jet::{eval_value, Env, FunctionDef};
use crate::parse::{parse_bindings, parse_expr};
use crate::scalar::ScalarCorrectionSeries;

#[derive(Clone, Debug)]
pub enum Step {
    Show(String),
    Print(Vec<(String, Expr)>),
}

#[derive(Clone, Debug, Default)]
pub struct Script {
    pub defs: HashMap<String, FunctionDef>,
    pub parrepls: Vec<(String, Expr)>,
    pub steps: Vec<Step>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Appended {
    Symbolic(String, Expr),
    Numeric(String, Complex64),
    Point(Vec<(String, Expr)>),
}

fn script_err(line: usize, msg: &str) -> Error {
    Error::Script(format!("line {line}: {msg}"))
}

pub fn parse_script(text: &str) -> Result<Script> {
    let mut s = Script::default();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        let n = n + 1;
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix("show ") {
            s.steps.push(Step::Show(rest.trim().to_string()));
        } else if let Some(rest) = line.strip_prefix("print ") {
            let mut items = Vec::new();
            for item in split_top_level(rest) {
                let e = parse_expr(&item).map_err(|e| script_err(n, &e.to_string()))?;
                items.push((item.trim().to_string(), e));
            }
            s.steps.push(Step::Print(items));
        } else if let Some((lhs, rhs)) = line.split_once(":=") {
            let lhs = lhs.trim();
            let (name, param) = lhs
                .strip_suffix(')')
                .and_then(|l| l.split_once('('))
                .ok_or_else(|| script_err(n, "expected `name(param) := body`"))?;
            let body = parse_expr(rhs).map_err(|e| script_err(n, &e.to_string()))?;
            s.defs.insert(name.trim().into(), FunctionDef { param: param.trim().into(), body });
        } else if let Some(rest) = line.strip_prefix("parrepls") {
            let rest = rest.trim_start().strip_prefix('=').ok_or_else(|| script_err(n, "expected `parrepls = ...`"))?;
            s.parrepls = parse_bindings(rest).map_err(|e| script_err(n, &e.to_string()))?;
            s.steps.push(Step::Print(Vec::new()));
        } else {
            return Err(script_err(n, "expected show, print, parrepls or a definition"));
        }
    }
    Ok(s)
}

/// Splits on commas outside parentheses.
fn split_top_level(s: &str) -> Vec<String> {
    let mut out = vec![String::new()];
    let mut depth = 0i32;
    for ch in s.chars() {
        match ch {
            '(' => depth += 1,
            ')' => depth -= 1,
            ',' if depth == 0 => {
                out.push(String::new());
                continue;
            }
            _ => {}
        }
        out.last_mut().unwrap().push(ch);
    }
    out.retain(|x| !x.trim().is_empty());
    out
}

/// Runs `script` against named quantities in variable `var`.
pub fn run_script(script: &Script, quantities: &BTreeMap<String, Expr>, var: &str) -> Result<Vec<Appended>> {
    let mut out = Vec::new();
    let mut current: Vec<(String, Expr)> = Vec::new();
    for step in &script.steps {
        match step {
            Step::Show(name) => {
                let q = quantities.get(name).ok_or_else(|| Error::UndefinedQuantity(name.clone()))?;
                out.push(Appended::Symbolic(name.clone(), q.clone()));
            }
            Step::Print(items) if items.is_empty() => {
                current = script.parrepls.clone();
                out.push(Appended::Point(current.clone()));
            }
            Step::Print(items) => {
                let env = numeric_env(script, &current, var)?;
                for (label, e) in items {
                    let v = evaluate(e, quantities, &env)?;
                    out.push(Appended::Numeric(label.clone(), v));
                }
            }
        }
    }
    Ok(out)
}

fn numeric_env(script: &Script, point: &[(String, Expr)], var: &str) -> Result<Env<Complex64>> {
    let empty: Env<Complex64> = Env::new("", Complex64::new(0.0, 0.0));
    let mut x0 = None;
    let mut params = HashMap::new();
    for (k, v) in point {
        let val = eval_value(v, &empty).map_err(|e| Error::Script(format!("parrepls `{k}`: {e}")))?;
        if k == var {
            x0 = Some(val);
        } else {
            params.insert(k.clone(), val);
        }
    }
    let x0 = x0.ok_or_else(|| Error::Script(format!("parrepls gives no value for `{var}`")))?;
    Ok(Env { var: var.into(), point: x0, params, defs: script.defs.clone() })
}

fn evaluate(e: &Expr, quantities: &BTreeMap<String, Expr>, env: &Env<Complex64>) -> Result<Complex64> {
    let mut env = env.clone();
    for s in e.symbols() {
        if *s == *env.var || env.params.contains_key(&*s) {
            continue;
        }
        let q = quantities.get(&*s).ok_or_else(|| Error::UndefinedQuantity(s.to_string()))?;
        check_bound(q, &env)?;
        let v = eval_value(q, &env)?;
        env.params.insert(s.to_string(), v);
    }
    for f in e.opaque_names() {
        if !env.defs.contains_key(&*f) {
            return Err(Error::UndefinedQuantity(f.to_string()));
        }
    }
    eval_value(e, &env)
}

fn check_bound(q: &Expr, env: &Env<Complex64>) -> Result<()> {
    for s in q.symbols() {
        if *s != *env.var && !env.params.contains_key(&*s) {
            return Err(Error::UndefinedQuantity(s.to_string()));
        }
    }
    let mut missing = None;
    q.map_bottom_up(&mut |n| {
        if let Node::Opaque { name, .. } = n.node() {
            if !env.defs.contains_key(&**name) {
                missing.get_or_insert(name.to_string());
            }
        }
        None
    });
    match missing {
        Some(m) => Err(Error::UndefinedQuantity(m)),
        None => Ok(()),
    }
}

/// Names a script may refer to in a scalar run.
pub fn scalar_quantities(s: &ScalarCorrectionSeries) -> BTreeMap<String, Expr> {
    let mut q = BTreeMap::new();
    q.insert("eps0".into(), s.eps0.clone());
    q.insert("Qsq".into(), s.qsq.clone());
    for (k, y) in &s.y {
        q.insert(format!("Y{k}"), y.clone());
    }
    q
}

/// Names a script may refer to in a coupled run: frame quantities plus
/// `Ym`, `cpm`, `cm` for every computed order.
pub fn coupled_quantities(s: &CoupledCorrectionSeries) -> BTreeMap<String, Expr> {
    let f = &s.frame;
    let mut q = BTreeMap::new();
    for (k, v) in [
        ("Q", &f.q),
        ("Qsq", &f.qsq),
        ("eps0", &f.eps0),
        ("Delta", &f.delta),
        ("sqrtDel", &f.sqrt_del),
        ("D", &f.den),
        ("coef", &f.coef),
        ("s0v1", &f.s0v[0]),
        ("s0v2", &f.s0v[1]),
    ] {
        q.insert(k.to_string(), v.clone());
    }
    for o in &s.orders {
        q.insert(format!("Y{}", o.m), o.y.clone());
        q.insert(format!("cp{}", o.m), o.cp.clone());
        q.insert(format!("c{}", o.m), o.c.clone());
    }
    q
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quantities() -> BTreeMap<String, Expr> {
        let mut q = BTreeMap::new();
        q.insert("Y1".to_string(), parse_expr("h(x)/x").unwrap());
        q
    }

    #[test]
    fn evaluates_with_definitions() {
        let s = parse_script("show Y1\nh(x) := a*x^2\nparrepls = x -> 2, a -> 1/2\nprint Y1, 2*Y1").unwrap();
        let out = run_script(&s, &quantities(), "x").unwrap();
        assert_eq!(out.len(), 4);
        assert!(matches!(&out[0], Appended::Symbolic(n, _) if n == "Y1"));
        let Appended::Numeric(_, v) = out[3] else { panic!() };
        assert!((v - Complex64::new(2.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn empty_script_appends_nothing() {
        assert!(run_script(&parse_script("").unwrap(), &quantities(), "x").unwrap().is_empty());
    }

    #[test]
    fn undefined_names_are_reported() {
        let s = parse_script("h(x) := x\nparrepls = x -> 2\nprint Y7").unwrap();
        assert_eq!(run_script(&s, &quantities(), "x").unwrap_err(), Error::UndefinedQuantity("Y7".into()));
        let s = parse_script("parrepls = x -> 2\nprint Y1").unwrap();
        assert_eq!(run_script(&s, &quantities(), "x").unwrap_err(), Error::UndefinedQuantity("h".into()));
        assert!(matches!(parse_script("bogus"), Err(Error::Script(_))));
    }
}
