//! Brute-force search for models with bounded word lengths.

use crate::formula::{partial_evaluate, Formula, Interpretation, Problem, Var};
use crate::symbol::{Alphabet, Word};

/// The first model of `f` (assigning `vars` in order, each word drawn
/// shortest first) in which every word has length at most `bound`.
pub fn bounded_sat_formula(f: &Formula, vars: &[Var], alphabet: &Alphabet, bound: usize) -> Option<Interpretation> {
    let words = alphabet.words_up_to(bound);
    let mut eta = Interpretation::new();
    search(f, vars, &words, &mut eta).then_some(eta)
}

fn search(f: &Formula, vars: &[Var], words: &[Word], eta: &mut Interpretation) -> bool {
    let Some((x, rest)) = vars.split_first() else {
        return partial_evaluate(f, eta) == Some(true);
    };
    for w in words {
        eta.insert(x.clone(), w.clone());
        if partial_evaluate(f, eta) != Some(false) && search(f, rest, words, eta) {
            return true;
        }
    }
    eta.remove(x);
    false
}

/// [`bounded_sat_formula`] on the conjunction of a problem's assertions,
/// over its declared and literal variables.
pub fn bounded_sat(problem: &Problem, bound: usize) -> Option<Interpretation> {
    let f = problem.formula();
    let mut vars = problem.all_vars();
    for v in f.vars() {
        if !vars.contains(&v) {
            vars.push(v);
        }
    }
    bounded_sat_formula(&f, &vars, &problem.alphabet, bound)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formula::{evaluate, parse, var};
    use crate::symbol::word;

    #[test]
    fn finds_shortest_first() {
        let p = parse("(declare-alphabet a b) (declare-str x y) (assert (and (= (concat x y) (concat y x)) (not (= x y)) (<= 1 (len y))))").unwrap();
        let m = bounded_sat(&p, 2).unwrap();
        assert!(evaluate(&p.formula(), &m).unwrap());
        assert_eq!(m[&var("x")], word(""));
        assert_eq!(m[&var("y")], word("a"));
    }

    #[test]
    fn respects_the_bound() {
        let p = parse("(declare-alphabet a b) (declare-str x) (assert (<= 3 (len x)))").unwrap();
        assert!(bounded_sat(&p, 2).is_none());
        assert_eq!(bounded_sat(&p, 3).unwrap()[&var("x")], word("aaa"));
    }
}
