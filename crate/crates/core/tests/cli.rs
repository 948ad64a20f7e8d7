use std::io::Write as _;
use std::process::{Command, Output};

use tempfile::NamedTempFile;

fn input(text: &str) -> NamedTempFile {
    let mut f = NamedTempFile::new().unwrap();
    f.write_all(text.as_bytes()).unwrap();
    f
}

fn chainfree(args: &[&str], file: &NamedTempFile) -> Output {
    Command::new(env!("CARGO_BIN_EXE_chainfree"))
        .args(args)
        .arg(file.path())
        .env_remove("CHAINFREE_BACKEND")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

const SQUARE: &str = "(declare-alphabet a b)\n(declare-str x y z)\n(assert (= (concat x y) (concat z z)))\n";

const IDENTITY: &str = "(declare-alphabet a b)\n(declare-str x y)\n\
    (define-aut Id :tapes 2 :states (q) :init (q) :final (q) :trans ((q (a a) q) (q (b b) q)))\n\
    (assert (and (rel Id x y) (< (len x) (len y))))\n";

const SELF: &str = "(declare-alphabet a b)\n(declare-str x)\n\
    (define-aut T :tapes 2 :states (q) :init (q) :final (q) :trans ((q (a b) q) (q (b _) q)))\n\
    (assert (rel T x x))\n";

#[test]
fn sat_with_model() {
    let f = input("(declare-alphabet a b)\n(declare-str x y z)\n\
        (assert (and (= (concat x y) (concat z z)) (=len (len z) 2) (<= 1 (len x)) (<= 1 (len y))))\n");
    let o = chainfree(&["--model"], &f);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    assert!(out.starts_with("verdict: sat\nclause 1: chain-free\n"), "{out}");
    let z = out.lines().find_map(|l| l.strip_prefix("model: z = ")).unwrap().trim_matches('"');
    let x = out.lines().find_map(|l| l.strip_prefix("model: x = ")).unwrap().trim_matches('"');
    let y = out.lines().find_map(|l| l.strip_prefix("model: y = ")).unwrap().trim_matches('"');
    assert_eq!(format!("{x}{y}"), format!("{z}{z}"));
    assert_eq!(z.len(), 2);
}

#[test]
fn square_is_sat() {
    let o = chainfree(&[], &input(SQUARE));
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).starts_with("verdict: sat"));
}

#[test]
fn unsat_exit_code() {
    let o = chainfree(&[], &input(IDENTITY));
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).starts_with("verdict: unsat\n"));
}

#[test]
fn out_of_fragment_prints_witness() {
    let o = chainfree(&[], &input(SELF));
    assert_eq!(o.status.code(), Some(2));
    let out = stdout(&o);
    assert!(out.contains("clause 1: chaining"), "{out}");
    assert!(out.contains("out-of-fragment: non-benign chain x@c1."), "{out}");
}

#[test]
fn classify_only() {
    let f = input("(declare-alphabet a b)\n(declare-str x y z u v)\n\
        (assert (and (= x (concat z y)) (= y (concat x u v))))\n");
    let o = chainfree(&["--classify-only"], &f);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o), "class: weakly-chaining\nclause 1: weakly-chaining\n");
}

#[test]
fn oracle_mode() {
    let f = input("(declare-alphabet a b)\n(declare-str x y z)\n\
        (assert (and (= (concat x y) (concat z z)) (=len (len z) 1)))\n");
    let o = chainfree(&["--oracle", "--bound", "2", "--model"], &f);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o), "verdict: sat\nmodel: x = \"\"\nmodel: y = \"aa\"\nmodel: z = \"a\"\n");
    let o = chainfree(&["--oracle", "--bound", "1"], &input(IDENTITY));
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn emit_lia_writes_smtlib() {
    let out = NamedTempFile::new().unwrap();
    let path = out.path().to_str().unwrap();
    let o = chainfree(&["--emit-lia", path], &input(IDENTITY));
    assert_eq!(o.status.code(), Some(1));
    let text = std::fs::read_to_string(path).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "(set-logic QF_LIA)");
    assert_eq!(*lines.last().unwrap(), "(check-sat)");
    assert!(lines[1..lines.len() - 1]
        .iter()
        .all(|l| l.starts_with("(declare-const ") && l.ends_with(" Int)") || l.starts_with("(assert ")));
}

#[test]
fn trace_does_not_change_the_verdict() {
    let f = input("(declare-alphabet a b)\n(declare-str x y z u v)\n\
        (assert (and (= x (concat z y)) (= y (concat x u v)) (<= 1 (len z))))\n");
    let plain = chainfree(&[], &f);
    let traced = chainfree(&["--trace"], &f);
    assert_eq!(plain.status.code(), Some(1));
    assert_eq!(traced.status.code(), Some(1));
    let out = stdout(&traced);
    assert!(out.contains("trace: clause 1: benign chain"), "{out}");
    assert!(out.contains("trace: clause 1: eliminate"), "{out}");
}

#[test]
fn backend_from_environment() {
    let f = input(IDENTITY);
    let o = Command::new(env!("CARGO_BIN_EXE_chainfree"))
        .arg(f.path())
        .env("CHAINFREE_BACKEND", "quantum")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("unknown backend"));
}

#[test]
fn errors_exit_3() {
    let o = chainfree(&[], &input("(declare-str x)\n(assert (= x y))\n"));
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("chainfree:"));
    let o = Command::new(env!("CARGO_BIN_EXE_chainfree")).arg("/nonexistent/input").output().unwrap();
    assert_eq!(o.status.code(), Some(3));
    let o = Command::new(env!("CARGO_BIN_EXE_chainfree")).arg("--no-such-flag").output().unwrap();
    assert_eq!(o.status.code(), Some(3));
    let o = Command::new(env!("CARGO_BIN_EXE_chainfree")).arg("--help").output().unwrap();
    assert_eq!(o.status.code(), Some(0));
}
