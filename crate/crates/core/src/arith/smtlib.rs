//! SMT-LIB2 (QF_LIA) output and an external solver process.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::io::Write as _;
use std::process::{Command, Stdio};

use crate::sexpr::{parse_all, SExpr};

use super::{LiaProblem, LiaResult, LinAtom, LinExpr, LinearFormula, Rel};

fn simple_symbol(s: &str) -> String {
    let mut out: String = s.chars().map(|c| if c.is_ascii_alphanumeric() || c == '_' { c } else { '_' }).collect();
    if !out.starts_with(|c: char| c.is_ascii_alphabetic()) {
        out.insert(0, 'v');
    }
    out
}

/// SMT-LIB names for the variables: sanitized and made unique.
pub(crate) fn smt_names(p: &LiaProblem) -> Vec<String> {
    let mut seen: HashMap<String, usize> = HashMap::new();
    p.names()
        .iter()
        .map(|n| {
            let base = simple_symbol(n);
            let count = seen.entry(base.clone()).or_insert(0);
            *count += 1;
            if *count == 1 {
                base
            } else {
                format!("{base}_{count}")
            }
        })
        .collect()
}

fn int(v: i64) -> String {
    if v < 0 {
        format!("(- {})", v.unsigned_abs())
    } else {
        v.to_string()
    }
}

fn sum(e: &LinExpr, names: &[String]) -> String {
    let parts: Vec<String> = e
        .terms
        .iter()
        .map(|(&v, &c)| if c == 1 { names[v].clone() } else { format!("(* {} {})", int(c), names[v]) })
        .collect();
    match parts.len() {
        0 => "0".to_string(),
        1 => parts.into_iter().next().unwrap(),
        _ => format!("(+ {})", parts.join(" ")),
    }
}

fn atom(a: &LinAtom, names: &[String]) -> String {
    let op = match a.rel {
        Rel::Le => "<=",
        Rel::Eq => "=",
    };
    format!("({op} {} {})", sum(&a.expr, names), int(-a.expr.constant))
}

fn formula(f: &LinearFormula, names: &[String]) -> String {
    match f {
        LinearFormula::Atom(a) => atom(a, names),
        LinearFormula::And(fs) if fs.is_empty() => "true".into(),
        LinearFormula::Or(fs) if fs.is_empty() => "false".into(),
        LinearFormula::And(fs) | LinearFormula::Or(fs) if fs.len() == 1 => formula(&fs[0], names),
        LinearFormula::And(fs) | LinearFormula::Or(fs) => {
            let op = if matches!(f, LinearFormula::And(_)) { "and" } else { "or" };
            let parts: Vec<String> = fs.iter().map(|g| formula(g, names)).collect();
            format!("({op} {})", parts.join(" "))
        }
    }
}

/// The problem as QF_LIA text ending in `(check-sat)`.
pub fn emit_smtlib(p: &LiaProblem) -> String {
    let names = smt_names(p);
    let mut out = String::from("(set-logic QF_LIA)\n");
    for n in &names {
        let _ = writeln!(out, "(declare-const {n} Int)");
    }
    for c in p.constraints() {
        let _ = writeln!(out, "(assert {})", formula(c, &names));
    }
    out.push_str("(check-sat)\n");
    out
}

/// A solver command line such as `z3 -in`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExternalSolver {
    pub program: String,
    pub args: Vec<String>,
}

impl ExternalSolver {
    pub fn new(command: &str) -> Self {
        let mut parts = command.split_whitespace().map(String::from);
        ExternalSolver { program: parts.next().unwrap_or_default(), args: parts.collect() }
    }
}

pub fn solve_external(p: &LiaProblem, solver: &ExternalSolver) -> LiaResult {
    let child = Command::new(&solver.program)
        .args(&solver.args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn();
    let mut child = match child {
        Ok(c) => c,
        Err(e) => return LiaResult::Unknown(format!("cannot start {}: {e}", solver.program)),
    };
    let input = emit_smtlib(p) + "(get-model)\n(exit)\n";
    let mut stdin = child.stdin.take().expect("piped stdin");
    let writer = std::thread::spawn(move || stdin.write_all(input.as_bytes()));
    let output = match child.wait_with_output() {
        Ok(o) => o,
        Err(e) => return LiaResult::Unknown(format!("solver process failed: {e}")),
    };
    if let Ok(Err(e)) = writer.join() {
        return LiaResult::Unknown(format!("cannot write to solver: {e}"));
    }
    let reply = String::from_utf8_lossy(&output.stdout);
    match parse_reply(&reply, p) {
        LiaResult::Unknown(why) if !output.stderr.is_empty() => {
            LiaResult::Unknown(format!("{why}; stderr: {}", String::from_utf8_lossy(&output.stderr).trim()))
        }
        r => r,
    }
}

fn integer(e: &SExpr) -> Option<i64> {
    match e {
        SExpr::Symbol(s, _) => s.parse().ok(),
        SExpr::List(items, _) => match items.as_slice() {
            [SExpr::Symbol(m, _), x] if m == "-" => integer(x).map(|v| -v),
            _ => None,
        },
        SExpr::Str(..) => None,
    }
}

/// Reads a `check-sat` answer followed by a `get-model` answer. A model
/// that does not satisfy the problem gives `Unknown`.
pub fn parse_reply(text: &str, p: &LiaProblem) -> LiaResult {
    let items = match parse_all(text) {
        Ok(items) => items,
        Err(e) => return LiaResult::Unknown(format!("malformed solver reply: {e}")),
    };
    match items.first().and_then(SExpr::as_symbol) {
        Some("unsat") => return LiaResult::Unsat,
        Some("unknown") => return LiaResult::Unknown("solver answered unknown".into()),
        Some("sat") => {}
        _ => return LiaResult::Unknown(format!("unexpected solver reply: {}", text.trim())),
    }
    let Some(model) = items.get(1).and_then(SExpr::as_list) else {
        return LiaResult::Unknown("solver gave no model".into());
    };
    let index: HashMap<String, usize> = smt_names(p).into_iter().enumerate().map(|(i, n)| (n, i)).collect();
    let mut values = vec![0i64; p.num_vars()];
    for def in model {
        let Some(parts) = def.as_list() else { continue };
        match parts {
            [SExpr::Symbol(kw, _), SExpr::Symbol(name, _), _, _, value] if kw == "define-fun" => {
                let Some(&i) = index.get(name) else { continue };
                let Some(v) = integer(value) else {
                    return LiaResult::Unknown(format!("unreadable value for {name}: {value}"));
                };
                values[i] = v;
            }
            _ => {}
        }
    }
    if p.holds(&values) {
        LiaResult::Sat(values)
    } else {
        LiaResult::Unknown("solver model does not satisfy the problem".into())
    }
}
