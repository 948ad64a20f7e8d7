//! Printing problems back into the input format.

use std::fmt::Write;

use super::{ArithTerm, Atom, CmpOp, Formula, NamedAut, Problem, Relation, StrTerm};

fn term(t: &StrTerm) -> String {
    match t.vars() {
        [] => "\"\"".to_string(),
        [v] => v.to_string(),
        vs => {
            let parts: Vec<&str> = vs.iter().map(|v| &**v).collect();
            format!("(concat {})", parts.join(" "))
        }
    }
}

fn aterm(t: &ArithTerm) -> String {
    let mut parts: Vec<String> = t
        .coeffs
        .iter()
        .map(|(v, c)| if *c == 1 { format!("(len {v})") } else { format!("(* {c} (len {v}))") })
        .collect();
    if t.constant != 0 || parts.is_empty() {
        parts.push(t.constant.to_string());
    }
    if parts.len() == 1 {
        parts.pop().unwrap()
    } else {
        format!("(+ {})", parts.join(" "))
    }
}

fn atom(a: &Atom) -> String {
    match a {
        Atom::Member { term: t, aut } => format!("(in {} {})", term(t), aut.name),
        Atom::Rel { lhs, rhs, rel: Relation::Equality } => format!("(= {} {})", term(lhs), term(rhs)),
        Atom::Rel { lhs, rhs, rel: Relation::Aut(r) } => format!("(rel {} {} {})", r.name, term(lhs), term(rhs)),
        Atom::Arith(a) => {
            let op = match a.op {
                CmpOp::Le => "<=",
                CmpOp::Lt => "<",
                CmpOp::Eq => "=len",
            };
            format!("({op} {} {})", aterm(&a.lhs), aterm(&a.rhs))
        }
    }
}

pub fn print_formula(f: &Formula) -> String {
    match f {
        Formula::Atom(a) => atom(a),
        Formula::Not(g) => format!("(not {})", print_formula(g)),
        Formula::And(gs) if gs.is_empty() => "true".to_string(),
        Formula::Or(gs) if gs.is_empty() => "false".to_string(),
        Formula::And(gs) | Formula::Or(gs) => {
            let op = if matches!(f, Formula::And(_)) { "and" } else { "or" };
            let parts: Vec<String> = gs.iter().map(print_formula).collect();
            format!("({op} {})", parts.join(" "))
        }
    }
}

fn automaton(out: &mut String, a: &NamedAut) {
    let aut = &a.aut;
    let states: Vec<String> = (0..aut.num_states()).map(|q| format!("q{q}")).collect();
    let list = |qs: &[usize]| qs.iter().map(|q| format!("q{q}")).collect::<Vec<_>>().join(" ");
    let trans: Vec<String> = aut
        .transitions()
        .iter()
        .map(|t| {
            let label: Vec<String> = t
                .label
                .iter()
                .map(|c| c.as_ref().map_or("_".to_string(), |s| s.to_string()))
                .collect();
            format!("(q{} ({}) q{})", t.from, label.join(" "), t.to)
        })
        .collect();
    let _ = writeln!(
        out,
        "(define-aut {} :tapes {} :states ({}) :init ({}) :final ({}) :trans ({}) :length-preserving {})",
        a.name,
        aut.tapes(),
        states.join(" "),
        list(aut.initial()),
        list(aut.accepting()),
        trans.join(" "),
        aut.is_length_preserving()
    );
}

/// Renders a problem in the input format; literal variables are declared
/// like ordinary ones.
pub fn print_problem(p: &Problem) -> String {
    let mut out = String::new();
    let letters: Vec<String> = p.alphabet.letters().iter().map(|l| l.to_string()).collect();
    let _ = writeln!(out, "(declare-alphabet {})", letters.join(" "));
    for v in p.all_vars() {
        let _ = writeln!(out, "(declare-str {v})");
    }
    for a in &p.automata {
        automaton(&mut out, a);
    }
    for f in &p.assertions {
        let _ = writeln!(out, "(assert {})", print_formula(f));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formula::parse;

    #[test]
    fn round_trip() {
        let src = "(declare-alphabet a b)(declare-str x y z)\n\
                   (define-aut T :tapes 2 :states (p q) :init (p) :final (q) :trans ((p (a _) q) (q (b b) q)))\n\
                   (assert (and (rel T x (concat y z)) (not (<= (+ (len x) 2) (* 3 (len y))))))\n\
                   (assert (or (= x \"ab\") (=len (len z) 0) (< 1 (len x)) true))";
        let p = parse(src).unwrap();
        let q = parse(&print_problem(&p)).unwrap();
        assert_eq!(p.assertions, q.assertions);
        assert_eq!(p.alphabet, q.alphabet);
        assert_eq!(print_problem(&p), print_problem(&q));
    }
}
