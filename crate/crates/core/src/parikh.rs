//! Deciding concatenation-free, chain-free clauses: the string atoms are
//! synchronized into one multi-tape automaton whose Parikh image, together
//! with the length constraints, becomes a linear integer problem.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::arith::{Backend, LiaProblem, LiaResult, LinExpr, LinearFormula, SolverOptions, VarId};
use crate::automata::{Automaton, AutomatonError, Label, StateId};
use crate::formula::{
    eliminate_empty_sides, eval_clause, ArithAtom, ArithTerm, Atom, Clause, CmpOp, Interpretation, Var,
};
use crate::symbol::{Alphabet, Word};

#[derive(Debug, Error)]
pub enum ParikhError {
    #[error("atom `{0}` is not concatenation-free")]
    NotConcatFree(String),
    #[error("string atoms share variables {0:?} along a cycle")]
    Cyclic(Vec<String>),
    #[error("relation `{0}` applied to one variable twice is not length-preserving")]
    SelfRelation(String),
    #[error(transparent)]
    Automaton(#[from] AutomatonError),
    #[error("no Eulerian run for the solver's transition counts")]
    NoRun,
}

/// A multi-tape automaton whose tape `k` constrains `vars[k]`.
#[derive(Clone, Debug)]
pub struct Synchronized {
    pub aut: Automaton,
    pub vars: Vec<Var>,
}

impl Synchronized {
    fn unit() -> Self {
        Synchronized { aut: Automaton::epsilon(0), vars: Vec::new() }
    }
}

fn atom_constraint(a: &Atom, alphabet: &Alphabet) -> Result<Option<Synchronized>, ParikhError> {
    match a {
        Atom::Arith(_) => Ok(None),
        Atom::Member { term, aut } => match term.vars() {
            [x] => Ok(Some(Synchronized { aut: (*aut.aut).clone(), vars: vec![x.clone()] })),
            _ => Err(ParikhError::NotConcatFree(a.to_string())),
        },
        Atom::Rel { lhs, rhs, rel } => match (lhs.vars(), rhs.vars()) {
            ([x], [y]) if x == y => {
                if !rel.is_length_preserving() {
                    return Err(ParikhError::SelfRelation(rel.name().to_string()));
                }
                let aut = rel.automaton(alphabet).identify_tapes(0, 1)?;
                Ok(Some(Synchronized { aut, vars: vec![x.clone()] }))
            }
            ([x], [y]) => Ok(Some(Synchronized {
                aut: (*rel.automaton(alphabet)).clone(),
                vars: vec![x.clone(), y.clone()],
            })),
            _ => Err(ParikhError::NotConcatFree(a.to_string())),
        },
    }
}

/// Joins the string atoms of a clause on their shared variables and takes
/// the product of the resulting components. The atoms must have no empty
/// sides; two atoms may share at most one variable per component.
pub fn synchronize(atoms: &[Atom], alphabet: &Alphabet) -> Result<Synchronized, ParikhError> {
    let mut components: Vec<Synchronized> = Vec::new();
    for a in atoms {
        let Some(mut c) = atom_constraint(a, alphabet)? else { continue };
        let mut k = 0;
        while k < components.len() {
            let shared: Vec<Var> = components[k].vars.iter().filter(|v| c.vars.contains(v)).cloned().collect();
            match shared.as_slice() {
                [] => k += 1,
                [v] => {
                    let comp = components.remove(k);
                    let i = comp.vars.iter().position(|w| w == v).unwrap();
                    let j = c.vars.iter().position(|w| w == v).unwrap();
                    let aut = comp.aut.join(i, &c.aut, j)?;
                    let mut vars = comp.vars;
                    vars.extend(c.vars.iter().enumerate().filter(|&(t, _)| t != j).map(|(_, w)| w.clone()));
                    c = Synchronized { aut, vars };
                }
                many => return Err(ParikhError::Cyclic(many.iter().map(|v| v.to_string()).collect())),
            }
        }
        components.push(c);
    }
    let mut components = components.into_iter();
    let mut out = components.next().unwrap_or_else(Synchronized::unit);
    for c in components {
        out.aut = out.aut.loose_product(&c.aut);
        out.vars.extend(c.vars);
    }
    Ok(out)
}

/// Variables of the Parikh encoding of one automaton.
#[derive(Clone, Debug)]
pub struct ParikhEncoding {
    /// Number of times each transition is taken.
    pub transitions: Vec<VarId>,
    /// Number of times each label is read.
    pub labels: BTreeMap<Label, VarId>,
    /// 0/1 selectors of the initial state the run starts in.
    pub initial: Vec<(StateId, VarId)>,
    /// 0/1 selectors of the accepting state the run ends in.
    pub accepting: Vec<(StateId, VarId)>,
}

fn show_label(l: &Label) -> String {
    let parts: Vec<String> = l.iter().map(|c| c.as_ref().map_or("_".to_string(), |s| s.to_string())).collect();
    format!("({})", parts.join(","))
}

fn selectors(states: &[StateId], prefix: &str, p: &mut LiaProblem) -> Vec<(StateId, VarId)> {
    let sel: Vec<(StateId, VarId)> = states.iter().map(|&q| (q, p.new_nat(format!("{prefix}{q}")))).collect();
    for &(_, v) in &sel {
        p.assert(LinearFormula::le(LinExpr::var(v), &LinExpr::constant(1)));
    }
    p.assert(LinearFormula::eq(LinExpr::sum(sel.iter().map(|&(_, v)| v)), &LinExpr::constant(1)));
    sel
}

/// Adds to `p` constraints whose solutions, projected to the label counts,
/// are exactly the Parikh vectors of accepting runs of `aut`.
pub fn parikh_formula(aut: &Automaton, p: &mut LiaProblem) -> ParikhEncoding {
    let trans = aut.transitions();
    let transitions: Vec<VarId> = (0..trans.len()).map(|e| p.new_nat(format!("t{e}"))).collect();
    let initial = selectors(aut.initial(), "init", p);
    let accepting = selectors(aut.accepting(), "fin", p);
    let n = aut.num_states();
    let sel_of = |sel: &[(StateId, VarId)], q: StateId| sel.iter().find(|&&(s, _)| s == q).map(|&(_, v)| v);

    let mut incoming: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut outgoing: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (e, t) in trans.iter().enumerate() {
        incoming[t.to].push(e);
        outgoing[t.from].push(e);
    }
    // in - out = fin - init
    for q in 0..n {
        let mut flow = LinExpr::sum(incoming[q].iter().map(|&e| transitions[e]));
        for &e in &outgoing[q] {
            flow.add_term(-1, transitions[e]);
        }
        if let Some(s) = sel_of(&initial, q) {
            flow.add_term(1, s);
        }
        if let Some(f) = sel_of(&accepting, q) {
            flow.add_term(-1, f);
        }
        p.assert(LinearFormula::eq(flow, &LinExpr::constant(0)));
    }

    // every used state is reached from the chosen initial state along
    // strictly increasing distances
    let dist: Vec<VarId> = (0..n).map(|q| p.new_nat(format!("d{q}"))).collect();
    for q in 0..n {
        p.assert(LinearFormula::le(LinExpr::var(dist[q]), &LinExpr::constant(n as i64)));
        let d = LinExpr::var(dist[q]);
        let zero = LinExpr::constant(0);
        let one = LinExpr::constant(1);
        let mut cases = Vec::new();
        let chosen_not = |cases: &mut Vec<LinearFormula>| {
            if let Some(s) = sel_of(&initial, q) {
                cases.push(LinearFormula::eq(LinExpr::var(s), &zero));
            }
        };
        if let Some(s) = sel_of(&initial, q) {
            cases.push(LinearFormula::And(vec![
                LinearFormula::eq(LinExpr::var(s), &one),
                LinearFormula::eq(d.clone(), &one),
            ]));
        }
        let mut unused = Vec::new();
        chosen_not(&mut unused);
        unused.push(LinearFormula::eq(LinExpr::sum(incoming[q].iter().map(|&e| transitions[e])), &zero));
        unused.push(LinearFormula::eq(d.clone(), &zero));
        cases.push(LinearFormula::And(unused));
        for &e in &incoming[q] {
            let from = trans[e].from;
            if from == q {
                continue;
            }
            let mut reached = Vec::new();
            chosen_not(&mut reached);
            reached.push(LinearFormula::ge(LinExpr::var(transitions[e]), &one));
            reached.push(LinearFormula::ge(LinExpr::var(dist[from]), &one));
            reached.push(LinearFormula::ge(d.clone(), &LinExpr::var(dist[from]).plus(&one)));
            cases.push(LinearFormula::And(reached));
        }
        p.assert(LinearFormula::Or(cases));
    }

    let mut by_label: BTreeMap<Label, Vec<usize>> = BTreeMap::new();
    for (e, t) in trans.iter().enumerate() {
        by_label.entry(t.label.clone()).or_default().push(e);
    }
    let labels = by_label
        .into_iter()
        .map(|(l, es)| {
            let v = p.new_nat(format!("#{}", show_label(&l)));
            p.assert(LinearFormula::eq(LinExpr::var(v), &LinExpr::sum(es.iter().map(|&e| transitions[e]))));
            (l, v)
        })
        .collect();
    ParikhEncoding { transitions, labels, initial, accepting }
}

/// `lengths[k] = Σ #α` over the labels `α` that read a letter on tape `k`.
pub fn length_link(enc: &ParikhEncoding, lengths: &[VarId], p: &mut LiaProblem) {
    for (k, &len) in lengths.iter().enumerate() {
        let reading = enc.labels.iter().filter(|(l, _)| l[k].is_some()).map(|(_, &v)| v);
        p.assert(LinearFormula::eq(LinExpr::var(len), &LinExpr::sum(reading)));
    }
}

/// Walks every transition exactly `counts[e]` times from `start` to `end`.
pub fn eulerian_run(aut: &Automaton, counts: &[i64], start: StateId, end: StateId) -> Result<Vec<usize>, ParikhError> {
    let trans = aut.transitions();
    let mut outgoing: Vec<Vec<usize>> = vec![Vec::new(); aut.num_states()];
    for (e, t) in trans.iter().enumerate() {
        if counts[e] < 0 {
            return Err(ParikhError::NoRun);
        }
        if counts[e] > 0 {
            outgoing[t.from].push(e);
        }
    }
    let mut left = counts.to_vec();
    let mut cursor = vec![0usize; aut.num_states()];
    let mut stack: Vec<(StateId, Option<usize>)> = vec![(start, None)];
    let mut run = Vec::new();
    while let Some(&(q, via)) = stack.last() {
        while cursor[q] < outgoing[q].len() && left[outgoing[q][cursor[q]]] == 0 {
            cursor[q] += 1;
        }
        if let Some(&e) = outgoing[q].get(cursor[q]) {
            left[e] -= 1;
            stack.push((trans[e].to, Some(e)));
        } else {
            stack.pop();
            run.extend(via);
        }
    }
    run.reverse();
    let total: i64 = counts.iter().sum();
    let ends_right = run.last().map_or(start, |&e| trans[e].to) == end;
    if run.len() as i64 != total || !ends_right || run.first().is_some_and(|&e| trans[e].from != start) {
        return Err(ParikhError::NoRun);
    }
    Ok(run)
}

#[derive(Clone, Debug, Default)]
pub struct DecideOptions {
    pub backend: Backend,
    pub solver: SolverOptions,
    /// Always build the linear problem, even when an emptiness check suffices.
    pub force_lia: bool,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Verdict {
    Sat(Interpretation),
    Unsat,
    Unknown(String),
}

impl Verdict {
    pub fn is_sat(&self) -> bool {
        matches!(self, Verdict::Sat(_))
    }
}

#[derive(Clone, Debug)]
pub struct Decision {
    pub verdict: Verdict,
    /// The linear problem handed to the solver, if one was built.
    pub lia: Option<LiaProblem>,
    /// States of the synchronized automaton.
    pub states: usize,
}

fn arith_formula(a: &ArithAtom, lengths: &BTreeMap<Var, VarId>) -> LinearFormula {
    let expr = |t: &ArithTerm| {
        let mut e = LinExpr::constant(t.constant);
        for (v, &c) in &t.coeffs {
            e.add_term(c, lengths[v]);
        }
        e
    };
    let (l, r) = (expr(&a.lhs), expr(&a.rhs));
    match a.op {
        CmpOp::Le => LinearFormula::le(l, &r),
        CmpOp::Lt => LinearFormula::le(l.plus(&LinExpr::constant(1)), &r),
        CmpOp::Eq => LinearFormula::eq(l, &r),
    }
}

fn filler(alphabet: &Alphabet, n: i64) -> Word {
    match alphabet.letters().first() {
        Some(a) => vec![a.clone(); n as usize],
        None => Vec::new(),
    }
}

/// Decides a concatenation-free clause whose string atoms form no cycle of
/// shared variables. A satisfying verdict carries a model of every variable
/// in the clause.
pub fn decide_clause(clause: &Clause, alphabet: &Alphabet, options: &DecideOptions) -> Result<Decision, ParikhError> {
    let clause = eliminate_empty_sides(clause);
    let sync = synchronize(clause.atoms(), alphabet)?;
    let aut = sync.aut.trim();
    let states = aut.num_states();
    if aut.is_empty() && !options.force_lia {
        return Ok(Decision { verdict: Verdict::Unsat, lia: None, states });
    }
    let arith: Vec<&ArithAtom> = clause
        .atoms()
        .iter()
        .filter_map(|a| match a {
            Atom::Arith(x) => Some(x),
            _ => None,
        })
        .collect();
    let all_vars = clause.vars();
    let finish = |mut model: Interpretation| -> Verdict {
        for v in &all_vars {
            model.entry(v.clone()).or_default();
        }
        match eval_clause(&clause, &model) {
            Ok(true) => Verdict::Sat(model),
            Ok(false) => Verdict::Unknown("extracted model does not satisfy the clause".into()),
            Err(e) => Verdict::Unknown(e.to_string()),
        }
    };

    if arith.is_empty() && !options.force_lia {
        let run = aut.shortest_run().ok_or(ParikhError::NoRun)?;
        let words = aut.read_run(&run);
        let model = sync.vars.iter().cloned().zip(words).collect();
        return Ok(Decision { verdict: finish(model), lia: None, states });
    }

    let mut p = LiaProblem::new();
    let enc = parikh_formula(&aut, &mut p);
    let mut lengths: BTreeMap<Var, VarId> = BTreeMap::new();
    let tape_lengths: Vec<VarId> = sync.vars.iter().map(|v| p.new_nat(format!("|{v}|"))).collect();
    length_link(&enc, &tape_lengths, &mut p);
    lengths.extend(sync.vars.iter().cloned().zip(tape_lengths.iter().copied()));
    let mut free: BTreeSet<Var> = BTreeSet::new();
    for a in &arith {
        for v in a.lhs.vars().chain(a.rhs.vars()) {
            if !lengths.contains_key(v) {
                let id = p.new_nat(format!("|{v}|"));
                if alphabet.is_empty() {
                    p.assert(LinearFormula::eq(LinExpr::var(id), &LinExpr::constant(0)));
                }
                lengths.insert(v.clone(), id);
                free.insert(v.clone());
            }
        }
    }
    for a in &arith {
        p.assert(arith_formula(a, &lengths));
    }

    let verdict = match options.backend.solve(&p, &options.solver) {
        LiaResult::Unsat => Verdict::Unsat,
        LiaResult::Unknown(why) => Verdict::Unknown(why),
        LiaResult::Sat(values) => {
            let pick = |sel: &[(StateId, VarId)]| sel.iter().find(|&&(_, v)| values[v] == 1).map(|&(q, _)| q);
            let (Some(start), Some(end)) = (pick(&enc.initial), pick(&enc.accepting)) else {
                return Err(ParikhError::NoRun);
            };
            let counts: Vec<i64> = enc.transitions.iter().map(|&v| values[v]).collect();
            let run = eulerian_run(&aut, &counts, start, end)?;
            let words = aut.read_run(&run);
            let mut model: Interpretation = sync.vars.iter().cloned().zip(words).collect();
            for v in free {
                model.insert(v.clone(), filler(alphabet, values[lengths[&v]]));
            }
            finish(model)
        }
    };
    Ok(Decision { verdict, lia: Some(p), states })
}

/// Label-count vectors of the words accepted by `aut`, keyed by label.
pub fn label_counts(aut: &Automaton, run: &[usize]) -> BTreeMap<Label, usize> {
    let mut out = BTreeMap::new();
    for &e in run {
        *out.entry(aut.transitions()[e].label.clone()).or_insert(0) += 1;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formula::{parse, to_dnf, Relation, StrTerm};
    use crate::symbol::word;

    fn decide(text: &str) -> Verdict {
        let problem = parse(text).unwrap();
        let options = DecideOptions { force_lia: true, ..Default::default() };
        let mut out = Verdict::Unsat;
        for c in to_dnf(&problem.formula(), &problem.alphabet).unwrap() {
            out = decide_clause(&c, &problem.alphabet, &options).unwrap().verdict;
            if out.is_sat() {
                break;
            }
        }
        out
    }

    #[test]
    fn membership_with_lengths() {
        let sat = decide(
            "(declare-alphabet a b) (declare-str x y) (define-aut A :tapes 1 :states (p q) :init (p) :final (p) :trans ((p a q) (q b p)))\n\
             (assert (and (in x A) (=len (len x) 4) (< (len y) (len x))))",
        );
        let Verdict::Sat(m) = sat else { panic!("{sat:?}") };
        assert_eq!(m[&crate::formula::var("x")], word("abab"));
        assert!(m[&crate::formula::var("y")].len() < 4);
        let unsat = decide(
            "(declare-alphabet a b) (declare-str x) (define-aut A :tapes 1 :states (p q) :init (p) :final (p) :trans ((p a q) (q b p)))\n\
             (assert (and (in x A) (=len (len x) 3)))",
        );
        assert_eq!(unsat, Verdict::Unsat);
    }

    #[test]
    fn joined_relations() {
        let v = decide(
            "(declare-alphabet a b) (declare-str x y z)\n\
             (assert (and (= x y) (not (= y z)) (=len (len x) 2) (=len (len z) 2)))",
        );
        let Verdict::Sat(m) = v else { panic!("{v:?}") };
        let get = |n: &str| m[&crate::formula::var(n)].clone();
        assert_eq!(get("x"), get("y"));
        assert_ne!(get("y"), get("z"));
    }

    #[test]
    fn shared_pair_is_rejected() {
        let x = crate::formula::var("x");
        let y = crate::formula::var("y");
        let atoms = [
            Atom::eq(StrTerm::single(x.clone()), StrTerm::single(y.clone())),
            Atom::rel(StrTerm::single(y), StrTerm::single(x), Relation::Equality),
        ];
        let r = synchronize(&atoms, &Alphabet::from_chars("ab"));
        assert!(matches!(r, Err(ParikhError::Cyclic(_))));
    }

    #[test]
    fn euler_walk_uses_every_count() {
        let problem = parse(
            "(declare-alphabet a b) (define-aut A :tapes 1 :states (p q) :init (p) :final (q) :trans ((p a q) (q b p) (q a q)))",
        )
        .unwrap();
        let aut = &problem.automaton("A").unwrap().aut;
        let count = |from: usize, a: &str, to: usize, n: i64| {
            let label = vec![Some(crate::symbol::Symbol::base(a))];
            aut.transitions().iter().map(|t| if (t.from, &t.label, t.to) == (from, &label, to) { n } else { 0 }).collect::<Vec<i64>>()
        };
        let add = |u: Vec<i64>, v: Vec<i64>| u.iter().zip(&v).map(|(a, b)| a + b).collect::<Vec<i64>>();
        let counts = add(add(count(0, "a", 1, 2), count(1, "b", 0, 1)), count(1, "a", 1, 3));
        let run = eulerian_run(aut, &counts, 0, 1).unwrap();
        assert_eq!(run.len(), 6);
        assert!(aut.accepts(&aut.read_run(&run)).unwrap());
        let counts = add(count(0, "a", 1, 1), count(1, "b", 0, 1));
        assert!(eulerian_run(aut, &counts, 0, 1).is_err());
    }
}
