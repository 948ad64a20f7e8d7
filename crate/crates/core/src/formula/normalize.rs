//! Negation elimination, DNF and the left-sided normal form.

use crate::automata::Automaton;
use crate::symbol::Alphabet;

use super::{
    ArithAtom, ArithTerm, Atom, Clause, CmpOp, Formula, FormulaError, FreshNames, NamedAut, Relation, StrTerm,
};

fn lt(a: ArithTerm, b: ArithTerm) -> Formula {
    Formula::Atom(Atom::Arith(ArithAtom::new(a, CmpOp::Lt, b)))
}

/// The negation of an atom as a negation-free formula.
///
/// Memberships are complemented, equalities and length-preserving relations
/// become a length mismatch or an aligned difference, and arithmetic
/// comparisons are flipped. Other relations cannot be negated.
pub fn negate_atom(atom: &Atom, alphabet: &Alphabet) -> Result<Formula, FormulaError> {
    match atom {
        Atom::Member { term, aut } => {
            let c = aut.aut.complement1(alphabet).expect("membership automata have one tape");
            Ok(Formula::Atom(Atom::member(term.clone(), NamedAut::new(format!("~{}", aut.name), c))))
        }
        Atom::Rel { lhs, rhs, rel } => {
            let differ = match rel {
                Relation::Equality => NamedAut::new("diff", Automaton::disequality(alphabet)),
                Relation::Aut(a) if a.aut.is_length_preserving() => {
                    let c = a.aut.complement_lp(alphabet).expect("checked length-preserving");
                    NamedAut::new(format!("~{}", a.name), c)
                }
                Relation::Aut(_) => return Err(FormulaError::NegatedNonInvertibleAtom(atom.to_string())),
            };
            let (l, r) = (ArithTerm::length(lhs), ArithTerm::length(rhs));
            Ok(Formula::Or(vec![
                lt(l.clone(), r.clone()),
                lt(r, l),
                Formula::Atom(Atom::rel(lhs.clone(), rhs.clone(), Relation::Aut(differ))),
            ]))
        }
        Atom::Arith(a) => Ok(match a.op {
            CmpOp::Le => lt(a.rhs.clone(), a.lhs.clone()),
            CmpOp::Lt => Formula::Atom(Atom::Arith(ArithAtom::new(a.rhs.clone(), CmpOp::Le, a.lhs.clone()))),
            CmpOp::Eq => Formula::Or(vec![lt(a.lhs.clone(), a.rhs.clone()), lt(a.rhs.clone(), a.lhs.clone())]),
        }),
    }
}

fn nnf(f: &Formula, positive: bool, alphabet: &Alphabet) -> Result<Formula, FormulaError> {
    Ok(match f {
        Formula::Atom(a) if positive => Formula::Atom(a.clone()),
        Formula::Atom(a) => negate_atom(a, alphabet)?,
        Formula::Not(g) => nnf(g, !positive, alphabet)?,
        Formula::And(gs) | Formula::Or(gs) => {
            let gs = gs.iter().map(|g| nnf(g, positive, alphabet)).collect::<Result<Vec<_>, _>>()?;
            if matches!(f, Formula::And(_)) == positive {
                Formula::And(gs)
            } else {
                Formula::Or(gs)
            }
        }
    })
}

fn dnf(f: &Formula) -> Vec<Clause> {
    match f {
        Formula::Atom(a) => vec![Clause::new([a.clone()])],
        Formula::Not(_) => unreachable!("negation-free input"),
        Formula::Or(gs) => gs.iter().flat_map(dnf).collect(),
        Formula::And(gs) => {
            let mut acc = vec![Clause::default()];
            for g in gs {
                let parts = dnf(g);
                let mut next = Vec::with_capacity(acc.len() * parts.len());
                for c in &acc {
                    for p in &parts {
                        let mut merged = c.clone();
                        for a in p.atoms() {
                            merged.push(a.clone());
                        }
                        next.push(merged);
                    }
                }
                acc = next;
            }
            acc
        }
    }
}

/// Disjunctive normal form with negations eliminated atom by atom.
pub fn to_dnf(f: &Formula, alphabet: &Alphabet) -> Result<Vec<Clause>, FormulaError> {
    let mut out: Vec<Clause> = Vec::new();
    for c in dnf(&nnf(f, true, alphabet)?) {
        if !out.contains(&c) {
            out.push(c);
        }
    }
    Ok(out)
}

/// Rewrites atoms with an empty string side: ground atoms are decided,
/// `ε = t` becomes `|t| = 0`, and `R(ε, t)` becomes a membership of `t`.
pub fn eliminate_empty_sides(clause: &Clause) -> Clause {
    let mut out = Clause::default();
    for a in clause.atoms() {
        match a {
            Atom::Member { term, aut } if term.is_empty() => {
                if !aut.aut.accepts(&[vec![]]).expect("one tape") {
                    out.push(Atom::Arith(ArithAtom::falsum()));
                }
            }
            Atom::Rel { lhs, rhs, rel } if lhs.is_empty() || rhs.is_empty() => {
                let (empty_tape, other) = if lhs.is_empty() { (0, rhs) } else { (1, lhs) };
                match rel {
                    Relation::Equality => out.push(Atom::Arith(ArithAtom::empty_term(other))),
                    Relation::Aut(r) => {
                        let restricted = r.aut.restrict_tape_empty(empty_tape).expect("two tapes");
                        let name = if empty_tape == 0 { format!("{}[_,]", r.name) } else { format!("{}[,_]", r.name) };
                        let m = Atom::member(other.clone(), NamedAut::new(name, restricted));
                        if other.is_empty() {
                            out.extend_from(&eliminate_empty_sides(&Clause::new([m])));
                        } else {
                            out.push(m);
                        }
                    }
                }
            }
            _ => out.push(a.clone()),
        }
    }
    out
}

impl Clause {
    fn extend_from(&mut self, other: &Clause) {
        for a in other.atoms() {
            self.push(a.clone());
        }
    }
}

/// Rewrites every relational atom `R(t, t')` whose left side is not a single
/// variable into `R(f, t') ∧ f = t` with `f` fresh.
pub fn to_left_sided(clause: &Clause, fresh: &mut FreshNames) -> Clause {
    let mut out = Clause::default();
    for a in clause.atoms() {
        match a {
            Atom::Rel { lhs, rhs, rel } if lhs.len() != 1 => {
                let f = fresh.fresh();
                out.push(Atom::rel(StrTerm::single(f.clone()), rhs.clone(), rel.clone()));
                if lhs.is_empty() {
                    out.push(Atom::Arith(ArithAtom::empty_term(&StrTerm::single(f))));
                } else {
                    out.push(Atom::eq(StrTerm::single(f), lhs.clone()));
                }
            }
            _ => out.push(a.clone()),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formula::{eval_clause, evaluate, parse, var, Interpretation};
    use crate::symbol::word;
    use std::collections::BTreeSet;

    fn atom(name: &str) -> Formula {
        Formula::Atom(Atom::Arith(ArithAtom::new(
            ArithTerm::length(&StrTerm::of(&[name])),
            CmpOp::Le,
            ArithTerm::constant(1),
        )))
    }

    #[test]
    fn dnf_distributes() {
        let f = Formula::And(vec![atom("a"), Formula::Or(vec![atom("b"), atom("c")])]);
        let clauses = to_dnf(&f, &Alphabet::from_chars("ab")).unwrap();
        assert_eq!(clauses.len(), 2);
        assert_eq!(clauses[0].len(), 2);
        let names: Vec<String> = clauses.iter().map(|c| c.to_string()).collect();
        assert_eq!(names, vec!["|a| ≤ 1 ∧ |b| ≤ 1", "|a| ≤ 1 ∧ |c| ≤ 1"]);
    }

    #[test]
    fn negated_membership_is_complement() {
        let p = parse(
            "(declare-alphabet a b)(declare-str x)\n\
             (define-aut A :tapes 1 :states (q) :init (q) :final (q) :trans ((q a q)))\n\
             (assert (not (in x A)))",
        )
        .unwrap();
        let clauses = to_dnf(&p.formula(), &p.alphabet).unwrap();
        assert_eq!(clauses.len(), 1);
        let Atom::Member { aut, .. } = &clauses[0].atoms()[0] else { panic!() };
        let original = p.automaton("A").unwrap();
        for w in p.alphabet.words_up_to(3) {
            let inside = original.aut.accepts(std::slice::from_ref(&w)).unwrap();
            assert_ne!(inside, aut.aut.accepts(&[w]).unwrap());
        }
    }

    #[test]
    fn negated_equality_splits_three_ways() {
        let p = parse("(declare-alphabet a b)(declare-str x y)(assert (not (= x y)))").unwrap();
        let clauses = to_dnf(&p.formula(), &p.alphabet).unwrap();
        assert_eq!(clauses.len(), 3);
        let ws = p.alphabet.words_up_to(2);
        for u in &ws {
            for v in &ws {
                let eta: Interpretation = [(var("x"), u.clone()), (var("y"), v.clone())].into_iter().collect();
                let direct = evaluate(&p.formula(), &eta).unwrap();
                let via: bool = clauses.iter().any(|c| eval_clause(c, &eta).unwrap());
                assert_eq!(direct, via, "x={u:?} y={v:?}");
                let d = clauses[2].atoms()[0].clone();
                if u.len() == v.len() {
                    assert_eq!(eval_clause(&Clause::new([d]), &eta).unwrap(), u != v);
                }
            }
        }
    }

    #[test]
    fn left_sided_rewrites() {
        let mut fresh = FreshNames::new([var("x"), var("y"), var("z")]);
        let c = Clause::new([Atom::eq(StrTerm::of(&["x", "y"]), StrTerm::of(&["z", "z"]))]);
        let ls = to_left_sided(&c, &mut fresh);
        assert_eq!(ls.to_string(), "_f1 = z∘z ∧ _f1 = x∘y");
        let already = Clause::new([Atom::eq(StrTerm::of(&["x"]), StrTerm::of(&["y", "z"]))]);
        assert_eq!(to_left_sided(&already, &mut fresh), already);
    }

    #[test]
    fn empty_sides() {
        let c = Clause::new([Atom::eq(StrTerm::default(), StrTerm::of(&["x", "y"]))]);
        assert_eq!(eliminate_empty_sides(&c).to_string(), "|x| + |y| = 0");
        let a = NamedAut::new("A", Automaton::word(&word("a")));
        let c = Clause::new([Atom::member(StrTerm::default(), a)]);
        assert_eq!(eliminate_empty_sides(&c).to_string(), "1 ≤ 0");
        let vars: BTreeSet<_> = c.vars().into_iter().collect();
        assert!(vars.is_empty());
    }
}
