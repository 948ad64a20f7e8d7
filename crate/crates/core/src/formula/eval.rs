//! Truth of formulas under an interpretation of the string variables.

use std::collections::BTreeMap;

use crate::symbol::Word;

use super::{Atom, Clause, Formula, FormulaError, Relation, StrTerm, Var};

pub type Interpretation = BTreeMap<Var, Word>;

fn value(t: &StrTerm, eta: &Interpretation) -> Option<Word> {
    let mut out = Vec::new();
    for v in t.vars() {
        out.extend(eta.get(v)?.iter().cloned());
    }
    Some(out)
}

/// Truth of an atom, or `None` if some variable is unassigned.
fn try_atom(a: &Atom, eta: &Interpretation) -> Option<bool> {
    Some(match a {
        Atom::Member { term, aut } => aut.aut.accepts(&[value(term, eta)?]).expect("one tape"),
        Atom::Rel { lhs, rhs, rel } => {
            let (l, r) = (value(lhs, eta)?, value(rhs, eta)?);
            match rel {
                Relation::Equality => l == r,
                Relation::Aut(a) => a.aut.accepts(&[l, r]).expect("two tapes"),
            }
        }
        Atom::Arith(a) => {
            for v in a.lhs.vars().chain(a.rhs.vars()) {
                eta.get(v)?;
            }
            a.holds(|v| eta[v].len() as i64)
        }
    })
}

fn missing(a: &Atom, eta: &Interpretation) -> FormulaError {
    let v = a.vars().into_iter().find(|v| !eta.contains_key(v)).expect("some variable is missing");
    FormulaError::MissingVariable(v.to_string())
}

pub fn eval_atom(a: &Atom, eta: &Interpretation) -> Result<bool, FormulaError> {
    try_atom(a, eta).ok_or_else(|| missing(a, eta))
}

pub fn eval_clause(c: &Clause, eta: &Interpretation) -> Result<bool, FormulaError> {
    for a in c.atoms() {
        if !eval_atom(a, eta)? {
            return Ok(false);
        }
    }
    Ok(true)
}

pub fn evaluate(f: &Formula, eta: &Interpretation) -> Result<bool, FormulaError> {
    match f {
        Formula::Atom(a) => eval_atom(a, eta),
        Formula::Not(g) => Ok(!evaluate(g, eta)?),
        Formula::And(gs) => {
            for g in gs {
                if !evaluate(g, eta)? {
                    return Ok(false);
                }
            }
            Ok(true)
        }
        Formula::Or(gs) => {
            for g in gs {
                if evaluate(g, eta)? {
                    return Ok(true);
                }
            }
            Ok(false)
        }
    }
}

/// Three-valued evaluation: `None` when the assigned variables do not
/// determine the truth value.
pub fn partial_evaluate(f: &Formula, eta: &Interpretation) -> Option<bool> {
    match f {
        Formula::Atom(a) => try_atom(a, eta),
        Formula::Not(g) => partial_evaluate(g, eta).map(|b| !b),
        Formula::And(gs) => {
            let mut unknown = false;
            for g in gs {
                match partial_evaluate(g, eta) {
                    Some(false) => return Some(false),
                    None => unknown = true,
                    Some(true) => {}
                }
            }
            (!unknown).then_some(true)
        }
        Formula::Or(gs) => {
            let mut unknown = false;
            for g in gs {
                match partial_evaluate(g, eta) {
                    Some(true) => return Some(true),
                    None => unknown = true,
                    Some(false) => {}
                }
            }
            (!unknown).then_some(false)
        }
    }
}
