//! Acceptance run: one PASS/FAIL line per criterion, with the measured
//! numbers next to it.
//!
//! `cargo test -p pia-core --test acceptance`

use std::collections::BTreeMap;
use std::process::ExitCode;

use cpu_time::ProcessTime;
use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use pia::calculus::{cc, equal};
use pia::coupled::{
    coupled_corrections, coupled_corrections_weighted, frame_invariants, Branch, CoupledCorrectionSeries,
    CoupledProblem, CoupledWeights, Hermiticity, Theory,
};
use pia::domain::NfDomain;
use pia::expr::Func;
use pia::jet::{eval_jet, rel_err, Env};
use pia::job::{fixture, fixture_script_parsed, JobFile, Problem, FIXTURES};
use pia::normal::Ctx;
use pia::oracle::{
    coupled_corrections_jet_weighted, scalar_corrections_jet_weighted, value_at, Setup,
};
use pia::render::plain;
use pia::scalar::{scalar_corrections_in, ScalarProblem, ScalarWeights, Variable};
use pia::script::{coupled_quantities, run_script, Appended};
use pia::{parse_expr, Expr};

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: impl Into<String>) -> Outcome {
        Outcome { pass, detail: detail.into() }
    }
}

fn e(s: &str) -> Expr {
    parse_expr(s).unwrap()
}

fn rat(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

fn coupled_fixture(name: &str) -> (CoupledProblem, JobFile) {
    let job = fixture(name).unwrap();
    match &job.problem {
        Problem::Coupled(p) => (p.clone(), job.clone()),
        Problem::Scalar(_) => panic!("{name} is scalar"),
    }
}

fn setup_for(name: &str, job: &JobFile) -> Setup {
    let script = fixture_script_parsed(name).unwrap();
    job.oracle_setup(script.as_ref()).unwrap()
}

fn secs(t: ProcessTime) -> f64 {
    t.elapsed().as_secs_f64()
}

// ------------------------------------------------------------------ 1 ----

fn universal_scalar(w: &ScalarWeights) -> Outcome {
    let t0 = ProcessTime::now();
    let p = ScalarProblem::general(Variable::Zeta, 3);
    let s = match scalar_corrections_in(&p, &mut NfDomain::new("z", p.assumptions.clone()), w) {
        Ok(s) => s,
        Err(err) => return Outcome::new(false, format!("engine error: {err}")),
    };
    let mut ctx = Ctx::default();
    let y2 = equal(&mut ctx, &s.y[&2], &e("eps0(z)/2")).unwrap_or(false);
    let y4 = equal(&mut ctx, &s.y[&4], &e("-(eps0(z)^2 + eps0''(z))/8")).unwrap_or(false);
    let setup = Setup::default().define("eps0", "z", e("(1 + z/3)/(2 + sin(z)^2)"));
    let mut rng = StdRng::seed_from_u64(7);
    let mut worst: f64 = 0.0;
    for _ in 0..5 {
        let z = rng.gen_range(-3.0..3.0);
        let jets = scalar_corrections_jet_weighted(&p, &setup, Complex64::new(z, 0.0), &ScalarWeights::default());
        let sym = value_at(&s.y[&6], &setup, "z", z);
        match (jets, sym) {
            (Ok(j), Ok(v)) => worst = worst.max(rel_err(v, j[3])),
            _ => worst = f64::INFINITY,
        }
    }
    let t = secs(t0);
    Outcome::new(
        y2 && y4 && worst <= 1e-10 && t < 10.0,
        format!("Y2 exact {y2}, Y4 exact {y4}, Y6 rel {worst:.1e} (tol 1e-10), {t:.2} s (limit 10 s)"),
    )
}

// ------------------------------------------------------------------ 2 ----

fn eps0_jet(r: &Expr, env: &Env<Complex64>) -> Complex64 {
    let q = eval_jet(r, env, 4).unwrap();
    let d1 = q.derivative();
    let d2 = d1.derivative();
    let (q0, q1, q2) = (q.c[0], d1.c[0], d2.c[0]);
    (5.0 / 16.0 * (q1 / q0) * (q1 / q0) - 0.25 * q2 / q0) / q0
}

fn model_problems() -> Outcome {
    let Problem::Scalar(parabolic) = fixture("parabolic").unwrap().problem else { unreachable!() };
    let mut ctx = Ctx::new(parabolic.assumptions.clone());
    let s = pia::scalar::scalar_corrections(&parabolic).unwrap();
    let exact = equal(&mut ctx, &s.eps0, &e("(3*x^2 + 2*x1^2)/(4*coef*(x^2 - x1^2)^3)")).unwrap_or(false);

    let job = fixture("budden").unwrap();
    let Problem::Scalar(budden) = &job.problem else { unreachable!() };
    let s = pia::scalar::scalar_corrections(budden).unwrap();
    let setup = job.oracle_setup(None).unwrap();
    let mut worst: f64 = 0.0;
    for &x in job.check.points.iter().take(3) {
        let mut env = Env::new("x", Complex64::new(x, 0.0));
        env.params = setup.params.clone();
        let j = eps0_jet(&budden.r, &env);
        let v = value_at(&s.eps0, &setup, "x", x).unwrap();
        worst = worst.max(rel_err(v, j));
    }
    Outcome::new(
        exact && worst <= 1e-12,
        format!("parabolic eps0 exact {exact}, Budden eps0 rel {worst:.1e} at 3 points (tol 1e-12)"),
    )
}

// ------------------------------------------------------------------ 3 ----

fn example_a(w: &CoupledWeights) -> Outcome {
    let (mut p, _) = coupled_fixture("A");
    let t0 = ProcessTime::now();
    let s = match coupled_corrections_weighted(&p, w) {
        Ok(s) => s,
        Err(err) => return Outcome::new(false, format!("engine error: {err}")),
    };
    let t = secs(t0);
    let mut ctx = Ctx::new(p.assumptions.clone());
    let mut eq = |a: &Expr, b: &str| equal(&mut ctx, a, &e(b)).unwrap_or(false);
    let f = &s.frame;
    let mut failed = Vec::new();
    let mut check = |name: &str, ok: bool| {
        if !ok {
            failed.push(name.to_string());
        }
    };
    check("Delta", eq(&f.delta, "(x - 1)^2"));
    check("Qsq+", eq(&f.qsq, "x"));
    check("s0v", eq(&f.s0v[0], "cos(x)") && eq(&f.s0v[1], "sin(x)"));
    check("asqr", eq(&f.asqr, "1"));
    check("den", eq(&f.den, "1 - x"));
    check("coef", eq(&f.coef, "2*x/(x - 1)"));
    check("cp1", eq(&s.order(1).cp, "2*i*sqrt(x)/(x - 1)"));
    check("Y1", s.order(1).y.is_zero());
    p.branch = Branch::Minus;
    p.g_factor = e("sin(x)");
    p.mmax = 1;
    match coupled_corrections_weighted(&p, w) {
        Ok(m) => check("Qsq-", eq(&m.frame.qsq, "1")),
        Err(_) => check("Qsq-", false),
    }
    let ok = failed.is_empty() && t < 30.0;
    let what = if failed.is_empty() { "all closed forms exact".to_string() } else { format!("mismatch: {}", failed.join(", ")) };
    Outcome::new(ok, format!("{what}, mmax 2 in {t:.2} s (limit 30 s)"))
}

// ------------------------------------------------------------------ 4 ----

fn hermitian_agreement() -> Outcome {
    let mut parts = Vec::new();
    let mut ok = true;
    for name in ["A", "C1", "E"] {
        let (mut p, job) = coupled_fixture(name);
        p.mmax = 3;
        p.theory = Theory::Simplified;
        p.hermitian = Hermiticity::Hermitian;
        let h = coupled_corrections(&p);
        p.hermitian = Hermiticity::NonHermitian;
        let n = coupled_corrections(&p);
        let (h, n) = match (h, n) {
            (Ok(h), Ok(n)) => (h, n),
            (Err(err), _) | (_, Err(err)) => {
                ok = false;
                parts.push(format!("{name}: {err}"));
                continue;
            }
        };
        let setup = setup_for(name, &job);
        let mut ctx = Ctx::new(p.assumptions.clone());
        let mut exact = 0;
        let mut worst: f64 = 0.0;
        for m in 1..=3 {
            let (a, b) = (&h.order(m).y, &n.order(m).y);
            if p.simplify_upto.is_none() && equal(&mut ctx, a, b).unwrap_or(false) {
                exact += 1;
                continue;
            }
            for &x in &job.check.points {
                let va = value_at(a, &setup, "x", x).unwrap_or(Complex64::new(f64::NAN, 0.0));
                let vb = value_at(b, &setup, "x", x).unwrap_or(Complex64::new(f64::NAN, 0.0));
                let r = rel_err(va, vb);
                worst = if r.is_nan() { f64::INFINITY } else { worst.max(r) };
            }
        }
        ok &= worst < 1e-10;
        parts.push(format!("{name}: {exact}/3 exact, worst rel {worst:.1e}"));
    }
    Outcome::new(ok, parts.join("; "))
}

// ------------------------------------------------------------------ 5 ----

const HERMITIAN: &[&str] = &["A", "B", "C1", "C2", "C3", "C4", "E", "X"];

/// The theory that keeps odd orders at zero depends on the sign of `Q^2`:
/// Fulling for real `Q`, Wronskian-conserving for imaginary `Q`.
fn conserving(sign_qsq: i8) -> Theory {
    if sign_qsq > 0 {
        Theory::Fulling
    } else {
        Theory::Wronskian
    }
}

fn odd_orders(w: &CoupledWeights) -> Outcome {
    let mut worst: (f64, String) = (0.0, String::new());
    let mut ok = true;
    let mut notes = Vec::new();
    for name in HERMITIAN {
        let (mut p, job) = coupled_fixture(name);
        assert_eq!(p.hermitian, Hermiticity::Hermitian);
        p.mmax = 1;
        let s: CoupledCorrectionSeries = match coupled_corrections_weighted(&p, w) {
            Ok(s) => s,
            Err(err) => {
                ok = false;
                notes.push(format!("{name}: {err}"));
                continue;
            }
        };
        if !s.order(1).y.is_zero() {
            ok = false;
            notes.push(format!("{name}: Y1 not exactly 0"));
        }
        p.mmax = 3;
        p.theory = conserving(s.frame.sign_qsq);
        let setup = setup_for(name, &job);
        for &x in &job.check.points {
            match coupled_corrections_jet_weighted(&p, &setup, x, w) {
                Ok(j) => {
                    let y3 = j.y[3].norm();
                    // written negated so that NaN counts as a failure
                    #[allow(clippy::neg_cmp_op_on_partial_ord)]
                    if !(y3 < 1e-10) {
                        ok = false;
                    }
                    if y3 > worst.0 || y3.is_nan() {
                        worst = (y3, format!("{name} at x = {x}"));
                    }
                }
                Err(err) => {
                    ok = false;
                    notes.push(format!("{name} at {x}: {err}"));
                }
            }
        }
    }
    let mut detail = format!("Y1 exact 0 on {} fixtures; max |Y3| {:.1e} ({}) (tol 1e-10)", HERMITIAN.len(), worst.0, worst.1);
    if !notes.is_empty() {
        detail.push_str(&format!("; {}", notes.join("; ")));
    }
    Outcome::new(ok, detail)
}

// ------------------------------------------------------------------ 6 ----

fn example_e() -> Outcome {
    let (p, job) = coupled_fixture("E");
    let script = fixture_script_parsed("E").unwrap().unwrap();
    let t0 = ProcessTime::now();
    let s = match coupled_corrections(&p) {
        Ok(s) => s,
        Err(err) => return Outcome::new(false, format!("engine error: {err}")),
    };
    let appended = match run_script(&script, &coupled_quantities(&s), "x") {
        Ok(a) => a,
        Err(err) => return Outcome::new(false, format!("script error: {err}")),
    };
    let t = secs(t0);
    let mut ctx = Ctx::default();
    let overrides = p.overrides.as_ref().unwrap();
    let honored = s.frame.sign_qsq == -1
        && equal(&mut ctx, &s.frame.delta, &overrides.delta).unwrap_or(false)
        && equal(&mut ctx, &s.frame.qsq, &e("h0(x) - sqrt(h1(x)^2 + h2(x)^2)")).unwrap_or(false);

    let numbers: BTreeMap<String, Complex64> = appended
        .iter()
        .filter_map(|a| match a {
            Appended::Numeric(k, v) => Some((k.clone(), *v)),
            _ => None,
        })
        .collect();
    let setup = job.oracle_setup(Some(&script)).unwrap();
    let mut worst: f64 = 0.0;
    let mut finite = true;
    let mut missing = Vec::new();
    match pia::oracle::coupled_corrections_jet(&p, &setup, 55.0) {
        Ok(j) => {
            for (label, jet) in [
                ("Q", j.q),
                ("eps0/2", j.eps0 / 2.0),
                ("Y1", j.y[1]),
                ("Y2", j.y[2]),
                ("cp1", j.cp[1]),
                ("cp2", j.cp[2]),
            ] {
                match numbers.get(label) {
                    Some(v) => {
                        finite &= v.re.is_finite() && v.im.is_finite();
                        worst = worst.max(rel_err(*v, jet));
                    }
                    None => missing.push(label),
                }
            }
        }
        Err(err) => return Outcome::new(false, format!("oracle error: {err}")),
    }
    Outcome::new(
        honored && finite && missing.is_empty() && worst <= 1e-8 && t < 120.0,
        format!(
            "overrides honored {honored}, values finite {finite}{}, symbolic vs jet rel {worst:.1e} (tol 1e-8), {t:.2} s (limit 120 s)",
            if missing.is_empty() { String::new() } else { format!(", missing {}", missing.join(" ")) }
        ),
    )
}

// ------------------------------------------------------------------ 7 ----

fn random_tree(rng: &mut StdRng, depth: u32) -> Expr {
    let leaf = depth == 0 || rng.gen_bool(0.25);
    if leaf {
        return match rng.gen_range(0..6) {
            0 => Expr::frac(rng.gen_range(-9..10), rng.gen_range(1..5)),
            1 => Expr::i(),
            2 => Expr::symbol("y"),
            3 => Expr::opaque("h", rng.gen_range(0..3), Expr::symbol("x")),
            _ => Expr::symbol("x"),
        };
    }
    let a = random_tree(rng, depth - 1);
    match rng.gen_range(0..7) {
        0 => a + random_tree(rng, depth - 1),
        1 => a - random_tree(rng, depth - 1),
        2 => a * random_tree(rng, depth - 1),
        // keep clear of 1/0, which has no textual form
        3 => match random_tree(rng, depth - 1) {
            b if b.is_zero() => a,
            b => a / b,
        },
        4 if a.is_zero() => a,
        4 => a.pow(&Expr::frac(rng.gen_range(-3..4), rng.gen_range(1..3))),
        5 => -a,
        _ => {
            if rng.gen_bool(0.2) {
                return a.sqrt();
            }
            let f = [Func::Sin, Func::Cos, Func::Tan, Func::Exp, Func::Log][rng.gen_range(0..5)];
            Expr::apply(f, a)
        }
    }
}

fn invariants() -> Outcome {
    let mut failures = Vec::new();
    let mut checked = 0;
    for name in FIXTURES {
        let job = fixture(name).unwrap();
        let Problem::Coupled(p) = &job.problem else { continue };
        match frame_invariants(p) {
            Ok(list) => {
                for (what, ok) in list {
                    checked += 1;
                    if !ok {
                        failures.push(format!("{name}: {what}"));
                    }
                }
            }
            Err(err) => failures.push(format!("{name}: {err}")),
        }
        let s = match coupled_corrections(p) {
            Ok(s) => s,
            Err(err) => {
                failures.push(format!("{name}: {err}"));
                continue;
            }
        };
        let setup = setup_for(name, &job);
        let f = &s.frame;
        let mut ctx = Ctx::new(p.assumptions.clone());
        for o in &s.orders {
            // s_m = cp_m spv + c_m s0v, checked through both projections
            checked += 1;
            let proj = |a: &[Expr; 2], b: &[Expr; 2], ctx: &mut Ctx| -> Expr {
                let c0 = cc(ctx, &a[0]).unwrap_or_else(|_| a[0].conjugate_formal());
                let c1 = cc(ctx, &a[1]).unwrap_or_else(|_| a[1].conjugate_formal());
                c0 * &b[0] + c1 * &b[1]
            };
            let on_spv = proj(&f.spv, &o.sv, &mut ctx);
            let on_s0 = proj(&f.s0v, &o.sv, &mut ctx);
            let mut ok = true;
            for &x in &job.check.points {
                let v = |e: &Expr| value_at(e, &setup, "x", x).unwrap_or(Complex64::new(f64::NAN, 0.0));
                let a = v(&f.asqr);
                ok &= rel_err(v(&on_spv), v(&o.cp) * a) < 1e-10 && rel_err(v(&on_s0), v(&o.c) * a) < 1e-10;
            }
            if !ok {
                failures.push(format!("{name}: s_{} decomposition", o.m));
            }
        }
        // cc is an involution on every printed quantity
        for q in [&f.qsq, &f.eps0, &f.s0v[0], &f.s0v[1], &s.order(1).cp, &s.order(1).y] {
            checked += 1;
            let twice = cc(&mut ctx, q).and_then(|c| cc(&mut ctx, &c));
            let ok = match twice {
                Ok(t) => {
                    p.simplify_upto.is_some() && job.check.points.iter().all(|&x| {
                        let a = value_at(&t, &setup, "x", x).unwrap();
                        let b = value_at(q, &setup, "x", x).unwrap();
                        rel_err(a, b) < 1e-12
                    }) || equal(&mut ctx, &t, q).unwrap_or(false)
                }
                Err(_) => false,
            };
            if !ok {
                failures.push(format!("{name}: cc involution"));
            }
        }
    }
    let mut rng = StdRng::seed_from_u64(2024);
    let mut round_trip = 0;
    for _ in 0..100 {
        let t = random_tree(&mut rng, 4);
        match parse_expr(&plain(&t)) {
            Ok(back) if back == t => round_trip += 1,
            _ => failures.push(format!("round trip of {}", plain(&t))),
        }
    }
    Outcome::new(
        failures.is_empty(),
        if failures.is_empty() {
            format!("{checked} frame/decomposition/cc checks, {round_trip}/100 render round trips")
        } else {
            format!("{} failures: {}", failures.len(), failures.join("; "))
        },
    )
}

// ------------------------------------------------------------------ 8 ----

fn mutations() -> Outcome {
    let mut caught = Vec::new();
    let mut escaped = Vec::new();
    let bump = |r: &BigRational| r - rat(1, 12);

    let base = ScalarWeights::default();
    let scalar: Vec<(&str, ScalarWeights)> = vec![
        ("scalar overall", ScalarWeights { overall: bump(&base.overall), ..base.clone() }),
        ("scalar slope_product", ScalarWeights { slope_product: bump(&base.slope_product), ..base.clone() }),
        ("scalar curvature", ScalarWeights { curvature: bump(&base.curvature), ..base.clone() }),
        ("scalar q_slope", ScalarWeights { q_slope: bump(&base.q_slope), ..base.clone() }),
    ];
    for (name, w) in scalar {
        // the oracle keeps the true recurrence, the engine gets the mutant
        if universal_scalar(&w).pass {
            escaped.push(name);
        } else {
            caught.push(name);
        }
    }

    let base = CoupledWeights::default();
    let coupled: Vec<(&str, CoupledWeights)> = vec![
        ("coupled overall", CoupledWeights { overall: bump(&base.overall), ..base.clone() }),
        ("coupled gauge", CoupledWeights { gauge: bump(&base.gauge), ..base.clone() }),
        ("coupled slope", CoupledWeights { slope: bump(&base.slope), ..base.clone() }),
        ("coupled curvature", CoupledWeights { curvature: bump(&base.curvature), ..base.clone() }),
        ("coupled slope_product", CoupledWeights { slope_product: bump(&base.slope_product), ..base.clone() }),
    ];
    for (name, w) in coupled {
        if example_a(&w).pass && odd_orders(&w).pass {
            escaped.push(name);
        } else {
            caught.push(name);
        }
    }
    Outcome::new(
        escaped.is_empty(),
        if escaped.is_empty() {
            format!("all {} single-coefficient mutants rejected", caught.len())
        } else {
            format!("{} of {} rejected; not detected: {}", caught.len(), caught.len() + escaped.len(), escaped.join(", "))
        },
    )
}

/// Criteria that cannot hold as stated. They are still run and reported;
/// the process fails if any other criterion fails or if one of these starts
/// passing (so the list has to be revisited).
///
/// 8: the coupled `gauge`, `curvature` and `slope_product` weights first
/// touch `cp_3` and `Y_4` once `Y_1 = 0` and `s_0` is unit-normalized with a
/// constant phase (which `Y_1 = 0` requires), so criteria 3 and 5, which
/// stop at `cp_1` and `Y_3`, cannot see them; the scalar `q_slope` term
/// vanishes identically in the zeta variable used by criterion 1.
const KNOWN_UNATTAINABLE: &[usize] = &[8];

fn main() -> ExitCode {
    type Criterion = (&'static str, fn() -> Outcome);
    let criteria: Vec<Criterion> = vec![
        ("universal scalar formulas", || universal_scalar(&ScalarWeights::default())),
        ("parabolic and Budden eps0", model_problems),
        ("example A eigen pipeline", || example_a(&CoupledWeights::default())),
        ("hermitian / non-hermitian agreement", hermitian_agreement),
        ("odd orders vanish", || odd_orders(&CoupledWeights::default())),
        ("example E end to end", example_e),
        ("structural invariants", invariants),
        ("mutation sanity", mutations),
    ];
    let mut failed = 0;
    let mut unexpected = Vec::new();
    for (k, (name, run)) in criteria.iter().enumerate() {
        let id = k + 1;
        let o = run();
        if !o.pass {
            failed += 1;
        }
        if o.pass == KNOWN_UNATTAINABLE.contains(&id) {
            unexpected.push(id);
        }
        println!("{} {id}. {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if unexpected.is_empty() {
        ExitCode::SUCCESS
    } else {
        println!("unexpected outcome for criteria {unexpected:?} (known unattainable: {KNOWN_UNATTAINABLE:?})");
        ExitCode::FAILURE
    }
}
