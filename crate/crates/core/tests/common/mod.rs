#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use chainfree::arith::{Backend, LiaProblem, LinExpr, LinearFormula};
use chainfree::automata::{Automaton, Label, Transition};
use chainfree::formula::{Atom, Interpretation, Problem};
use chainfree::symbol::Symbol;
use rand::seq::SliceRandom;
use rand::Rng;

pub type TestRng = rand_chacha::ChaCha8Rng;

pub const LETTERS: [&str; 2] = ["a", "b"];

fn slot(rng: &mut TestRng, epsilon: bool) -> Option<&'static str> {
    if epsilon && rng.gen_bool(0.3) {
        None
    } else {
        Some(LETTERS[rng.gen_range(0..2)])
    }
}

/// A random label; never all-ε.
pub fn random_label(rng: &mut TestRng, tapes: usize, epsilon: bool) -> Vec<Option<&'static str>> {
    loop {
        let l: Vec<Option<&'static str>> = (0..tapes).map(|_| slot(rng, epsilon)).collect();
        if l.iter().any(Option::is_some) {
            return l;
        }
    }
}

pub struct RandomAut {
    pub states: usize,
    pub initial: Vec<usize>,
    pub accepting: Vec<usize>,
    pub trans: Vec<(usize, Vec<Option<&'static str>>, usize)>,
}

impl RandomAut {
    pub fn new(rng: &mut TestRng, tapes: usize, max_states: usize, epsilon: bool) -> Self {
        let states = rng.gen_range(1..=max_states);
        let mut initial: Vec<usize> = (1..states).filter(|_| rng.gen_bool(0.2)).collect();
        initial.insert(0, 0);
        let mut accepting: Vec<usize> = (0..states).filter(|_| rng.gen_bool(0.4)).collect();
        if accepting.is_empty() {
            accepting.push(rng.gen_range(0..states));
        }
        let n = rng.gen_range(1..=2 * states + 2);
        let trans = (0..n)
            .map(|_| (rng.gen_range(0..states), random_label(rng, tapes, epsilon), rng.gen_range(0..states)))
            .collect();
        RandomAut { states, initial, accepting, trans }
    }

    pub fn automaton(&self, tapes: usize) -> Automaton {
        let lp = self.trans.iter().all(|(_, l, _)| l.iter().all(Option::is_some));
        let trans = self.trans.iter().map(|(p, l, q)| Transition {
            from: *p,
            label: l.iter().map(|c| c.map(Symbol::base)).collect(),
            to: *q,
        });
        Automaton::new(tapes, self.states, self.initial.clone(), self.accepting.clone(), trans, lp).unwrap()
    }

    pub fn define(&self, name: &str, tapes: usize) -> String {
        let states: Vec<String> = (0..self.states).map(|q| format!("q{q}")).collect();
        let init: Vec<String> = self.initial.iter().map(|q| format!("q{q}")).collect();
        let fin: Vec<String> = self.accepting.iter().map(|q| format!("q{q}")).collect();
        let mut trans = String::new();
        for (p, l, q) in &self.trans {
            let letters: Vec<&str> = l.iter().map(|c| c.unwrap_or("_")).collect();
            let label = if tapes == 1 { letters[0].to_string() } else { format!("({})", letters.join(" ")) };
            let _ = write!(trans, " (q{p} {label} q{q})");
        }
        format!(
            "(define-aut {name} :tapes {tapes} :states ({}) :init ({}) :final ({}) :trans ({}))\n",
            states.join(" "),
            init.join(" "),
            fin.join(" "),
            trans.trim_start()
        )
    }
}

pub const VARS: [&str; 4] = ["x", "y", "z", "w"];

fn term(rng: &mut TestRng, max: usize) -> String {
    let n = rng.gen_range(1..=max);
    let vs: Vec<&str> = (0..n).map(|_| *VARS.choose(rng).unwrap()).collect();
    if n == 1 {
        vs[0].to_string()
    } else {
        format!("(concat {})", vs.join(" "))
    }
}

/// A random conjunction: 1–4 relational atoms over `x y z w` with terms of
/// at most 3 variables and automata of at most 3 states over `{a, b}`,
/// plus a few memberships, length constraints and disequalities.
pub fn random_problem_text(rng: &mut TestRng) -> String {
    let mut header = String::from("(declare-alphabet a b)\n(declare-str x y z w)\n");
    let mut atoms = Vec::new();
    let mut auts = 0;
    let mut fresh_aut = |header: &mut String, rng: &mut TestRng, tapes: usize, epsilon: bool| {
        auts += 1;
        let name = format!("A{auts}");
        header.push_str(&RandomAut::new(rng, tapes, 3, epsilon).define(&name, tapes));
        name
    };
    let rels = rng.gen_range(1..=4);
    for _ in 0..rels {
        let lhs = if rng.gen_bool(0.8) { VARS.choose(rng).unwrap().to_string() } else { term(rng, 2) };
        let rhs = term(rng, 3);
        match rng.gen_range(0..10) {
            0..=5 => atoms.push(format!("(= {lhs} {rhs})")),
            6..=8 => {
                let name = fresh_aut(&mut header, rng, 2, false);
                atoms.push(format!("(rel {name} {lhs} {rhs})"));
            }
            _ => {
                let name = fresh_aut(&mut header, rng, 2, true);
                atoms.push(format!("(rel {name} {lhs} {rhs})"));
            }
        }
    }
    for _ in 0..rng.gen_range(0..=2) {
        match rng.gen_range(0..4) {
            0 => {
                let name = fresh_aut(&mut header, rng, 1, false);
                atoms.push(format!("(in {} {name})", VARS.choose(rng).unwrap()));
            }
            1 if rng.gen_bool(0.5) => {
                atoms.push(format!("(<= (len {}) {})", VARS.choose(rng).unwrap(), rng.gen_range(0..4)))
            }
            1 => atoms.push(format!("(<= {} (len {}))", rng.gen_range(1..3), VARS.choose(rng).unwrap())),
            2 => atoms.push(format!("(< (len {}) (len {}))", term(rng, 2), term(rng, 2))),
            _ => atoms.push(format!("(not (= {} {}))", VARS.choose(rng).unwrap(), VARS.choose(rng).unwrap())),
        }
    }
    format!("{header}(assert (and {}))\n", atoms.join(" "))
}

/// Values for literal variables: the unique word of their literal automaton.
pub fn complete_hidden(problem: &Problem, model: &mut Interpretation) {
    let formula = problem.formula();
    for h in &problem.hidden {
        for a in formula.atoms() {
            if let Atom::Member { term, aut } = a {
                if term.vars() == std::slice::from_ref(h) {
                    let run = aut.aut.shortest_run().expect("literal automata are nonempty");
                    model.insert(h.clone(), aut.aut.read_run(&run).remove(0));
                }
            }
        }
    }
}

/// Parses `model: x = "..."` lines over single-letter alphabets.
pub fn read_model(output: &str) -> Interpretation {
    output
        .lines()
        .filter_map(|l| l.strip_prefix("model: "))
        .map(|l| {
            let (v, w) = l.split_once(" = ").unwrap();
            let w = w.trim_matches('"');
            (chainfree::formula::var(v), chainfree::symbol::word(w))
        })
        .collect()
}

/// Label-count vectors of accepting runs with at most `max` transitions,
/// by explicit run enumeration.
pub fn run_label_counts(aut: &Automaton, max: usize) -> BTreeSet<BTreeMap<Label, usize>> {
    let mut out = BTreeSet::new();
    let mut counts: BTreeMap<Label, usize> = BTreeMap::new();
    fn go(
        aut: &Automaton,
        q: usize,
        left: usize,
        counts: &mut BTreeMap<Label, usize>,
        out: &mut BTreeSet<BTreeMap<Label, usize>>,
    ) {
        if aut.is_accepting(q) {
            out.insert(counts.clone());
        }
        if left == 0 {
            return;
        }
        for t in aut.transitions().iter().filter(|t| t.from == q) {
            *counts.entry(t.label.clone()).or_insert(0) += 1;
            go(aut, t.to, left - 1, counts, out);
            let c = counts.get_mut(&t.label).unwrap();
            *c -= 1;
            if *c == 0 {
                counts.remove(&t.label);
            }
        }
    }
    for &q in aut.initial() {
        go(aut, q, max, &mut counts, &mut out);
    }
    out
}

pub fn external_backend() -> Option<Backend> {
    if let Ok(spec) = std::env::var("CHAINFREE_BACKEND") {
        if spec.starts_with("external:") {
            return Backend::parse(&spec);
        }
    }
    let found = std::env::var_os("PATH")
        .map(|p| std::env::split_paths(&p).any(|d| d.join("z3").is_file()))
        .unwrap_or(false);
    found.then(|| Backend::External("z3 -in".into()))
}

/// A random QF_LIA problem: up to 8 variables boxed in [-8, 8],
/// coefficients in [-3, 3], atoms joined by conjunction and disjunction.
pub fn random_lia(rng: &mut TestRng) -> LiaProblem {
    let mut p = LiaProblem::new();
    let n = rng.gen_range(1..=8);
    let vars: Vec<usize> = (0..n).map(|i| p.new_var(format!("v{i}"))).collect();
    for &v in &vars {
        p.assert(LinearFormula::ge(LinExpr::var(v), &LinExpr::constant(-8)));
        p.assert(LinearFormula::le(LinExpr::var(v), &LinExpr::constant(8)));
    }
    let atom = |rng: &mut TestRng| {
        let mut e = LinExpr::constant(0);
        for &v in &vars {
            if rng.gen_bool(0.5) {
                e.add_term(rng.gen_range(-3..=3), v);
            }
        }
        let c = LinExpr::constant(rng.gen_range(-10..=10));
        match rng.gen_range(0..3) {
            0 => LinearFormula::le(e, &c),
            1 => LinearFormula::ge(e, &c),
            _ => LinearFormula::eq(e, &c),
        }
    };
    for _ in 0..rng.gen_range(1..=6) {
        if rng.gen_bool(0.3) {
            let k = rng.gen_range(2..=3);
            p.assert(LinearFormula::Or((0..k).map(|_| atom(rng)).collect()));
        } else {
            p.assert(atom(rng));
        }
    }
    p
}
