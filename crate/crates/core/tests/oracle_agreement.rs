//! Every bundled example, through order 4, against the jet oracle.

use pia::coupled::coupled_corrections;
use pia::job::{fixture, fixture_script_parsed, Problem, FIXTURES};
use pia::scalar::scalar_corrections;
use pia::verify::{verify_coupled, verify_scalar, DEFAULT_REL_TOL};

fn check(name: &str) {
    let mut job = fixture(name).unwrap();
    let script = fixture_script_parsed(name).unwrap();
    let setup = job.oracle_setup(script.as_ref()).unwrap();
    let points = job.check.points.clone();
    assert_eq!(points.len(), 5, "{name} should list five sample points");
    let report = match &mut job.problem {
        Problem::Scalar(p) => {
            p.nmax = 4;
            let s = scalar_corrections(p).unwrap();
            verify_scalar(p, &s, &setup, &points, DEFAULT_REL_TOL).unwrap()
        }
        Problem::Coupled(p) => {
            p.mmax = 4;
            let s = coupled_corrections(p).unwrap();
            verify_coupled(p, &s, &setup, &points, DEFAULT_REL_TOL).unwrap()
        }
    };
    assert!(report.passed(), "{name}\n{}", report.summary());
}

#[test]
fn scalar_models_through_y8() {
    check("parabolic");
    check("budden");
}

#[test]
fn rotated_examples() {
    for name in ["A", "B", "C1", "C2", "C3", "C4", "D"] {
        check(name);
    }
}

#[test]
fn crossing_channels() {
    check("X");
}

#[test]
fn example_e() {
    check("E");
}

#[test]
fn every_fixture_is_covered() {
    let covered = ["parabolic", "budden", "A", "B", "C1", "C2", "C3", "C4", "D", "X", "E"];
    for f in FIXTURES {
        assert!(covered.contains(f), "{f} has no agreement test");
    }
}
