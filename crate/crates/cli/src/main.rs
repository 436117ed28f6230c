use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use cpu_time::ProcessTime;

use pia::coupled::{abstract_b, coupled_corrections, Branch, Hermiticity, Theory};
use pia::job::{fixture, fixture_script, parse_job, JobFile, Problem};
use pia::output::{bvm_result, coupled_result, scalar_result};
use pia::scalar::{scalar_corrections, InputMode, Variable};
use pia::script::{parse_script, run_script, Script};
use pia::verify::{verify_coupled, verify_scalar, DEFAULT_REL_TOL};
use pia::{parse_expr, Error, Form, FractionStyle, RenderSpec};

const EXIT_USAGE: u8 = 2;
const EXIT_JOB: u8 = 3;
const EXIT_ENGINE: u8 = 4;
const EXIT_VERIFY: u8 = 5;

#[derive(Parser)]
#[command(name = "pia", version, about = "Higher-order phase-integral corrections for one or two coupled equations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Corrections Y2n for u'' + R u = 0.
    Scalar(RunArgs),
    /// Corrections Y_m, cp_m, c_m for two coupled equations.
    Coupled(RunArgs),
    /// The vectors b_m of the coupled recurrence in abstract form.
    Bvm {
        #[arg(long, default_value_t = 3)]
        mmax: usize,
        #[arg(long, value_parser = ["x", "z"], default_value = "x")]
        variable: String,
        #[arg(long)]
        y1_zero: bool,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
    /// Compare symbolic results with the jet oracle.
    Verify {
        #[command(flatten)]
        run: RunArgs,
        /// Sample point; repeat for several. Defaults to the job's sample points.
        #[arg(long = "at")]
        at: Vec<f64>,
        #[arg(long, default_value_t = DEFAULT_REL_TOL)]
        rel_tol: f64,
    },
}

#[derive(Args, Clone)]
struct RunArgs {
    /// Job file.
    job: Option<PathBuf>,
    /// Bundled example instead of a job file.
    #[arg(long)]
    example: Option<String>,
    #[arg(long, value_parser = ["o", "t", "f"])]
    output: Option<String>,
    #[arg(long, value_parser = ["s", "c", "n"])]
    fractions: Option<String>,
    #[arg(long)]
    nmax: Option<usize>,
    #[arg(long)]
    mmax: Option<usize>,
    #[arg(long, value_parser = ["i", "g"])]
    input_mode: Option<String>,
    #[arg(long, value_parser = ["x", "z"])]
    variable: Option<String>,
    #[arg(long, value_parser = ["m", "p"])]
    branch: Option<String>,
    #[arg(long, value_parser = ["h", "n"])]
    hermitian: Option<String>,
    #[arg(long, value_parser = ["s", "f", "w"])]
    theory: Option<String>,
    #[arg(long)]
    normalize: bool,
    #[arg(long)]
    trig_expand: bool,
    #[arg(long)]
    g_factor: Option<String>,
    #[arg(long)]
    y1_zero: bool,
    /// Evaluation script run after the corrections.
    #[arg(long)]
    append: Option<PathBuf>,
    /// Raise the order limit (default 6 for nmax, 4 for mmax).
    #[arg(long)]
    max_order: Option<usize>,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Failure {
        Failure { code: EXIT_USAGE, message: message.into() }
    }
    fn job(e: impl std::fmt::Display) -> Failure {
        Failure { code: EXIT_JOB, message: e.to_string() }
    }
    fn engine(e: Error) -> Failure {
        let hint = match &e {
            Error::NotIntegrable(_) => "\nhint: rerun with --theory s (c_m = 0) or use `verify` for numbers",
            _ => "",
        };
        Failure { code: EXIT_ENGINE, message: format!("{e}{hint}") }
    }
}

type Outcome<T> = std::result::Result<T, Failure>;

fn load(args: &RunArgs) -> Outcome<(String, JobFile, Option<Script>)> {
    let (name, mut job, mut script) = match (&args.job, &args.example) {
        (Some(_), Some(_)) => return Err(Failure::usage("give either a job file or --example, not both")),
        (None, None) => return Err(Failure::usage("a job file or --example is required")),
        (Some(path), None) => {
            let text = std::fs::read_to_string(path).map_err(|e| Failure::job(format!("{}: {e}", path.display())))?;
            let job = parse_job(&text).map_err(|e| Failure::job(format!("{}: {e}", path.display())))?;
            let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "job".into());
            (stem, job, None)
        }
        (None, Some(name)) => {
            let job = fixture(name).map_err(Failure::job)?;
            let script = fixture_script(name).map(parse_script).transpose().map_err(Failure::job)?;
            (name.clone(), job, script)
        }
    };
    if let Some(path) = &args.append {
        let text = std::fs::read_to_string(path).map_err(|e| Failure::job(format!("{}: {e}", path.display())))?;
        script = Some(parse_script(&text).map_err(Failure::job)?);
    }
    apply_flags(&mut job, args)?;
    Ok((name, job, script))
}

fn apply_flags(job: &mut JobFile, a: &RunArgs) -> Outcome<()> {
    let mut spec = job.render();
    if let Some(o) = &a.output {
        spec.form = Form::from_letter(o).unwrap_or_default();
    }
    if let Some(f) = &a.fractions {
        spec.fraction_style = FractionStyle::from_letter(f).unwrap_or_default();
    }
    job.set_render(spec);
    if a.y1_zero {
        job.y1_zero = true;
    }
    match &mut job.problem {
        Problem::Scalar(p) => {
            let coupled_only = a.mmax.is_some()
                || a.branch.is_some()
                || a.hermitian.is_some()
                || a.theory.is_some()
                || a.normalize
                || a.trig_expand
                || a.g_factor.is_some();
            if coupled_only {
                return Err(Failure::usage("coupled-only flag given for a scalar job"));
            }
            if let Some(n) = a.nmax {
                p.nmax = n;
            }
            if let Some(m) = &a.input_mode {
                p.input_mode = if m == "g" { InputMode::General } else { InputMode::Explicit };
            }
            if let Some(v) = &a.variable {
                p.variable = if v == "z" { Variable::Zeta } else { Variable::X };
            }
            let limit = a.max_order.unwrap_or(6);
            if p.nmax > limit {
                return Err(Failure::usage(format!("nmax = {} exceeds the limit {limit} (raise with --max-order)", p.nmax)));
            }
        }
        Problem::Coupled(p) => {
            if a.nmax.is_some() || a.input_mode.is_some() || a.variable.is_some() {
                return Err(Failure::usage("scalar-only flag given for a coupled job"));
            }
            if let Some(m) = a.mmax {
                p.mmax = m;
            }
            if let Some(b) = &a.branch {
                p.branch = if b == "p" { Branch::Plus } else { Branch::Minus };
            }
            if let Some(h) = &a.hermitian {
                p.hermitian = if h == "n" { Hermiticity::NonHermitian } else { Hermiticity::Hermitian };
            }
            if let Some(t) = &a.theory {
                p.theory = match t.as_str() {
                    "f" => Theory::Fulling,
                    "w" => Theory::Wronskian,
                    _ => Theory::Simplified,
                };
            }
            p.normalize |= a.normalize;
            p.trig_expand |= a.trig_expand;
            if let Some(g) = &a.g_factor {
                p.g_factor = parse_expr(g).map_err(|e| Failure::usage(format!("--g-factor: {e}")))?;
            }
            let limit = a.max_order.unwrap_or(4);
            if p.mmax > limit {
                return Err(Failure::usage(format!("mmax = {} exceeds the limit {limit} (raise with --max-order)", p.mmax)));
            }
        }
    }
    Ok(())
}

fn write_result(dir: &Path, name: &str, spec: RenderSpec, text: &str) -> Outcome<PathBuf> {
    std::fs::create_dir_all(dir).map_err(|e| Failure { code: EXIT_ENGINE, message: format!("{}: {e}", dir.display()) })?;
    let path = dir.join(format!("{name}.{}", spec.form.extension()));
    std::fs::write(&path, text).map_err(|e| Failure { code: EXIT_ENGINE, message: format!("{}: {e}", path.display()) })?;
    Ok(path)
}

fn run(cli: Cli) -> Outcome<()> {
    match cli.command {
        Command::Scalar(args) => {
            let (name, job, script) = load(&args)?;
            let Problem::Scalar(p) = &job.problem else {
                return Err(Failure::usage(format!("`{name}` is a coupled job; use `pia coupled`")));
            };
            let s = scalar_corrections(p).map_err(Failure::engine)?;
            let appended = match &script {
                Some(sc) => run_script(sc, &pia::script::scalar_quantities(&s), p.variable.name()).map_err(Failure::engine)?,
                None => Vec::new(),
            };
            let text = scalar_result(p, &s, &appended).map_err(Failure::engine)?;
            let path = write_result(&args.out_dir, &name, p.render, &text)?;
            report(&path, s.timings.compute, s.timings.simplify, s.non_rigorous);
        }
        Command::Coupled(args) => {
            let (name, job, script) = load(&args)?;
            let Problem::Coupled(p) = &job.problem else {
                return Err(Failure::usage(format!("`{name}` is a scalar job; use `pia scalar`")));
            };
            let s = coupled_corrections(p).map_err(Failure::engine)?;
            let appended = match &script {
                Some(sc) => run_script(sc, &pia::script::coupled_quantities(&s), "x").map_err(Failure::engine)?,
                None => Vec::new(),
            };
            let text = coupled_result(p, &s, &appended).map_err(Failure::engine)?;
            let path = write_result(&args.out_dir, &name, p.render, &text)?;
            report(&path, s.timings.compute, s.timings.simplify, s.non_rigorous);
        }
        Command::Bvm { mmax, variable, y1_zero, out_dir } => {
            if mmax == 0 {
                return Err(Failure::usage("mmax must be at least 1"));
            }
            let t0 = ProcessTime::now();
            let b = abstract_b(mmax, variable == "z", y1_zero).map_err(Failure::engine)?;
            let secs = t0.elapsed().as_secs_f64();
            let text = bvm_result(mmax, variable == "z", y1_zero, &b, secs);
            let path = write_result(&out_dir, "bvm", RenderSpec::default(), &text)?;
            report(&path, secs, 0.0, false);
        }
        Command::Verify { run, at, rel_tol } => {
            let (name, job, script) = load(&run)?;
            let setup = job.oracle_setup(script.as_ref()).map_err(Failure::job)?;
            let points = if at.is_empty() { job.check.points.clone() } else { at };
            if points.is_empty() {
                return Err(Failure::usage(format!("no sample points for `{name}`; pass --at")));
            }
            let rep = match &job.problem {
                Problem::Scalar(p) => {
                    let s = scalar_corrections(p).map_err(Failure::engine)?;
                    verify_scalar(p, &s, &setup, &points, rel_tol)
                }
                Problem::Coupled(p) => {
                    let s = coupled_corrections(p).map_err(Failure::engine)?;
                    verify_coupled(p, &s, &setup, &points, rel_tol)
                }
            }
            .map_err(Failure::engine)?;
            print!("{}", rep.summary());
            if !rep.passed() {
                return Err(Failure { code: EXIT_VERIFY, message: format!("verification of `{name}` failed") });
            }
        }
    }
    Ok(())
}

fn report(path: &Path, compute: f64, simplify: f64, non_rigorous: bool) {
    println!("wrote {}", path.display());
    println!("cpu: compute {compute:.3} s, simplify {simplify:.3} s");
    if non_rigorous {
        println!("note: some simplifications left the exactly decidable class");
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
