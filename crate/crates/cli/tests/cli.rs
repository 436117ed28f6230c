use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn pia(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pia")).args(args).arg("--out-dir").arg(dir).output().unwrap()
}

fn pia_bare(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pia")).args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn without_cpu_lines(text: &str) -> String {
    text.lines().filter(|l| !l.starts_with(" CPU time")).collect::<Vec<_>>().join("\n")
}

#[test]
fn scalar_example_writes_result() {
    let dir = TempDir::new().unwrap();
    let o = pia(&["scalar", "--example", "parabolic"], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(dir.path().join("parabolic.res")).unwrap();
    assert!(text.contains(" nmax = 2"));
    assert!(text.contains(" eps0[x] = "));
    assert_eq!(text.matches(" Y2n = ").count(), 2);
    assert!(text.trim_end().lines().last().unwrap().starts_with(" CPU time used for computation & simplification"));
}

#[test]
fn repeated_runs_differ_only_in_cpu_lines() {
    let a = TempDir::new().unwrap();
    let b = TempDir::new().unwrap();
    for (kind, name) in [("coupled", "A"), ("coupled", "E"), ("scalar", "budden")] {
        assert_eq!(code(&pia(&[kind, "--example", name], a.path())), 0);
        assert_eq!(code(&pia(&[kind, "--example", name], b.path())), 0);
        let file = format!("{name}.res");
        let x = std::fs::read_to_string(a.path().join(&file)).unwrap();
        let y = std::fs::read_to_string(b.path().join(&file)).unwrap();
        assert_eq!(without_cpu_lines(&x), without_cpu_lines(&y), "{name}");
    }
}

#[test]
fn output_forms_pick_the_extension() {
    let dir = TempDir::new().unwrap();
    assert_eq!(code(&pia(&["coupled", "--example", "A", "--output", "t"], dir.path())), 0);
    assert_eq!(code(&pia(&["coupled", "--example", "A", "--output", "f", "--fractions", "c"], dir.path())), 0);
    let tex = std::fs::read_to_string(dir.path().join("A.resTeX")).unwrap();
    assert!(tex.contains("\\frac") || tex.contains("\\sqrt"));
    let f = std::fs::read_to_string(dir.path().join("A.resFor")).unwrap();
    assert!(f.lines().all(|l| l.len() <= 72), "Fortran lines must fit in 72 columns");
}

#[test]
fn missing_output_directory_is_created() {
    let dir = TempDir::new().unwrap();
    let nested = dir.path().join("a/b");
    assert_eq!(code(&pia(&["scalar", "--example", "budden"], &nested)), 0);
    assert!(nested.join("budden.res").exists());
}

#[test]
fn job_file_and_flags() {
    let dir = TempDir::new().unwrap();
    let job = dir.path().join("well.job");
    std::fs::write(&job, "kind = scalar\nR = 1 - x^2\nnmax = 1\n").unwrap();
    let o = pia(&["scalar", job.to_str().unwrap(), "--nmax", "3"], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(dir.path().join("well.res")).unwrap();
    assert_eq!(text.matches(" Y2n = ").count(), 3);
}

#[test]
fn usage_errors_exit_2() {
    let dir = TempDir::new().unwrap();
    assert_eq!(code(&pia_bare(&["scalar", "--bogus"])), 2);
    assert_eq!(code(&pia(&["scalar"], dir.path())), 2);
    assert_eq!(code(&pia(&["scalar", "--example", "parabolic", "--mmax", "2"], dir.path())), 2);
    assert_eq!(code(&pia(&["coupled", "--example", "A", "--nmax", "2"], dir.path())), 2);
    assert_eq!(code(&pia(&["coupled", "--example", "A", "--mmax", "9"], dir.path())), 2);
    assert_eq!(code(&pia(&["scalar", "--example", "A"], dir.path())), 2);
}

#[test]
fn job_errors_exit_3() {
    let dir = TempDir::new().unwrap();
    let job = dir.path().join("bad.job");
    std::fs::write(&job, "kind = scalar\nR = x\ncolour = blue\n").unwrap();
    let o = pia(&["scalar", job.to_str().unwrap()], dir.path());
    assert_eq!(code(&o), 3);
    assert!(String::from_utf8_lossy(&o.stderr).contains("colour"));
    std::fs::write(&job, "kind = scalar\n").unwrap();
    assert_eq!(code(&pia(&["scalar", job.to_str().unwrap()], dir.path())), 3);
    assert_eq!(code(&pia(&["scalar", "--example", "nope"], dir.path())), 3);
    assert_eq!(code(&pia(&["scalar", "/nonexistent/x.job"], dir.path())), 3);
}

#[test]
fn engine_errors_exit_4_with_a_hint() {
    let dir = TempDir::new().unwrap();
    let o = pia(&["coupled", "--example", "A", "--theory", "f", "--mmax", "3"], dir.path());
    assert_eq!(code(&o), 4);
    assert!(String::from_utf8_lossy(&o.stderr).contains("--theory s"));
}

#[test]
fn verify_passes_and_fails() {
    let o = pia_bare(&["verify", "--example", "C4"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    assert!(String::from_utf8_lossy(&o.stdout).contains("PASS"));
    let o = pia_bare(&["verify", "--example", "budden", "--at", "2.5", "--at", "3.5"]);
    assert_eq!(code(&o), 0);
    let o = pia_bare(&["verify", "--example", "A", "--rel-tol", "0"]);
    assert_eq!(code(&o), 5);
    assert!(String::from_utf8_lossy(&o.stdout).contains("FAIL"));
}

#[test]
fn appended_scripts() {
    let dir = TempDir::new().unwrap();
    let script = dir.path().join("a.ap");
    std::fs::write(&script, "show cp1\nparrepls = x -> 3\nprint Y1, cp1\n").unwrap();
    let o = pia(&["coupled", "--example", "A", "--append", script.to_str().unwrap()], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(dir.path().join("A.res")).unwrap();
    assert!(text.contains(" {x -> 3}"));
    // cp1 = 2 i sqrt(3)/2 at x = 3
    assert!(text.contains(" cp1 = 1.732050807568877e0 i"), "{text}");

    std::fs::write(&script, "").unwrap();
    let o = pia(&["coupled", "--example", "A", "--append", script.to_str().unwrap()], dir.path());
    assert_eq!(code(&o), 0);

    std::fs::write(&script, "parrepls = x -> 3\nprint Y9\n").unwrap();
    let o = pia(&["coupled", "--example", "A", "--append", script.to_str().unwrap()], dir.path());
    assert_eq!(code(&o), 4);
    assert!(String::from_utf8_lossy(&o.stderr).contains("Y9"));

    std::fs::write(&script, "frobnicate Y1\n").unwrap();
    let o = pia(&["coupled", "--example", "A", "--append", script.to_str().unwrap()], dir.path());
    assert_eq!(code(&o), 3);
}

#[test]
fn example_e_appended_numbers() {
    let dir = TempDir::new().unwrap();
    assert_eq!(code(&pia(&["coupled", "--example", "E"], dir.path())), 0);
    let text = std::fs::read_to_string(dir.path().join("E.res")).unwrap();
    for label in ["Q", "eps0/2", "Y1", "Y2", "cp1", "cp2"] {
        let line = text.lines().find(|l| l.starts_with(&format!(" {label} = "))).unwrap_or_else(|| panic!("{label}"));
        assert!(!line.contains("NaN") && !line.contains("inf"), "{line}");
    }
}

#[test]
fn bvm_listing() {
    let dir = TempDir::new().unwrap();
    let o = pia(&["bvm", "--mmax", "3", "--variable", "z", "--y1-zero"], dir.path());
    assert_eq!(code(&o), 0);
    let text = std::fs::read_to_string(dir.path().join("bvm.res")).unwrap();
    assert_eq!(text.matches(" bv[m] = ").count(), 3);
    assert!(text.contains("Y[z, 1] = 0"));
}
