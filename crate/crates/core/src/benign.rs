//! Elimination of benign chains.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::automata::{Automaton, AutomatonError};
use crate::formula::{ArithAtom, Atom, Clause, FreshNames, NamedAut, Relation, StrTerm, Var};
use crate::fragment::{ChainWitness, FragmentClass, Position, Side, SplittingGraph};
use crate::symbol::{Alphabet, Symbol};

#[derive(Debug, Error)]
pub enum BenignError {
    #[error("clause is chaining: {0}")]
    Chaining(ChainWitness),
    #[error("benign chains remain but none uses only left positions")]
    NoLeftComponent,
    #[error("elimination did not terminate within {0} steps")]
    NoProgress(usize),
    #[error(transparent)]
    Automaton(#[from] AutomatonError),
}

/// One elimination step, for tracing.
#[derive(Clone, Debug)]
pub struct Step {
    pub positions: Vec<Position>,
    pub vars: Vec<Var>,
    /// `None` in the branch where the chain forces its variables to ε.
    pub tuple_var: Option<Var>,
    pub states: usize,
    pub added: Vec<Atom>,
}

impl fmt::Display for Step {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let ps: Vec<String> = self.positions.iter().map(|p| p.to_string()).collect();
        let vs: Vec<&str> = self.vars.iter().map(|v| &**v).collect();
        write!(f, "S = {{{}}}, vars = [{}]", ps.join(", "), vs.join(", "))?;
        match &self.tuple_var {
            Some(v) => write!(f, ", tuple variable {v}, {} states", self.states)?,
            None => f.write_str(", all chain variables empty")?,
        }
        for a in &self.added {
            write!(f, "\n    + {a}")?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default)]
pub struct BenignReport {
    /// Constraints labelling benign chains before the first step.
    pub initial_b: usize,
    pub applications: usize,
    /// B before each step and after the last one.
    pub b_trace: Vec<usize>,
    pub steps: Vec<Step>,
    /// Fresh variables over tuple letters.
    pub fresh: Vec<Var>,
}

fn rel_atoms(c: &Clause) -> Vec<usize> {
    c.atoms().iter().enumerate().filter(|(_, a)| a.is_relational()).map(|(i, _)| i).collect()
}

/// Removes one family of benign chains: the strongly connected component
/// of left positions containing the smallest such position.
pub fn eliminate_one(
    c: &Clause,
    g: &SplittingGraph,
    alphabet: &Alphabet,
    fresh: &mut FreshNames,
) -> Result<(Clause, Step), BenignError> {
    let scc = g
        .cyclic_sccs()
        .into_iter()
        .find(|scc| scc.iter().all(|&p| g.positions()[p].side == Side::Left))
        .ok_or(BenignError::NoLeftComponent)?;
    let rel_index = rel_atoms(c);
    let members: BTreeSet<usize> = scc.iter().map(|&p| g.con(p)).collect();
    let mut vars: Vec<Var> = Vec::new();
    for &p in &scc {
        if !vars.contains(g.var(p)) {
            vars.push(g.var(p).clone());
        }
    }
    let idx: BTreeMap<&Var, usize> = vars.iter().enumerate().map(|(i, v)| (v, i)).collect();

    struct Member<'a> {
        x: Var,
        rhs: &'a StrTerm,
        rel: &'a Relation,
    }
    let parts: Vec<Member> = members
        .iter()
        .map(|&j| match &c.atoms()[rel_index[j]] {
            Atom::Rel { lhs, rhs, rel } => Member { x: lhs.vars()[0].clone(), rhs, rel },
            _ => unreachable!("relational index"),
        })
        .collect();
    let degenerate = parts.iter().any(|m| m.rhs.vars().iter().filter(|v| idx.contains_key(v)).count() > 1);

    let mut out = Clause::default();
    for (i, a) in c.atoms().iter().enumerate() {
        let j = rel_index.iter().position(|&r| r == i);
        if !j.is_some_and(|j| members.contains(&j)) {
            out.push(a.clone());
        }
    }
    let mut added = Vec::new();
    let positions = scc.iter().map(|&p| g.positions()[p]).collect();
    if degenerate {
        for v in &vars {
            added.push(Atom::Arith(ArithAtom::empty_term(&StrTerm::single(v.clone()))));
        }
        for m in &parts {
            let rest: Vec<Var> = m.rhs.vars().iter().filter(|v| !idx.contains_key(v)).cloned().collect();
            let aut = m.rel.automaton(alphabet).restrict_tape_empty(0)?;
            let name = format!("{}[_,]", m.rel.name());
            let atom = Atom::member(StrTerm(rest), NamedAut::new(name, aut));
            added.extend(crate::formula::eliminate_empty_sides(&Clause::new([atom])).into_atoms());
        }
        for a in &added {
            out.push(a.clone());
        }
        let step = Step { positions, vars, tuple_var: None, states: 0, added };
        return Ok((out, step));
    }

    let k = vars.len();
    let mut product: Option<Automaton> = None;
    for m in &parts {
        let y = m.rhs.vars().iter().find(|v| idx.contains_key(v)).expect("component is strongly connected");
        let mut rest = m.rhs.vars().to_vec();
        let at = rest.iter().position(|v| v == y).unwrap();
        rest.remove(at);
        if !rest.is_empty() {
            added.push(Atom::Arith(ArithAtom::empty_term(&StrTerm(rest))));
        }
        let lifted = m.rel.automaton(alphabet).lift_lp(k, &[idx[&m.x], idx[y]], alphabet)?;
        product = Some(match product {
            None => lifted.trim(),
            Some(p) => p.intersect_lp(&lifted)?.trim(),
        });
    }
    let tuples = product.expect("component has constraints").to_tuple_letters()?;
    let letters: Vec<Symbol> = tuples.letters_on_tape(0).into_iter().collect();
    let f = fresh.fresh();
    let states = tuples.num_states();
    added.push(Atom::member(StrTerm::single(f.clone()), NamedAut::new(format!("chain[{f}]"), tuples)));
    for (j, v) in vars.iter().enumerate() {
        let pi = NamedAut::new(format!("pi{}[{f}]", j + 1), Automaton::projection(j, &letters));
        added.push(Atom::rel(StrTerm::single(v.clone()), StrTerm::single(f.clone()), Relation::Aut(pi)));
    }
    for a in &added {
        out.push(a.clone());
    }
    Ok((out, Step { positions, vars, tuple_var: Some(f), states, added }))
}

/// Eliminates benign chains until the clause is chain-free. The clause
/// must be left-sided.
pub fn to_chain_free(
    c: &Clause,
    alphabet: &Alphabet,
    fresh: &mut FreshNames,
) -> Result<(Clause, BenignReport), BenignError> {
    let mut report = BenignReport::default();
    let mut cur = c.clone();
    loop {
        let g = SplittingGraph::of_clause(&cur);
        let class = g.classify();
        let b = g.benign_constraints().len();
        if report.b_trace.is_empty() {
            report.initial_b = b;
        }
        report.b_trace.push(b);
        match class.class {
            FragmentClass::ChainFree => return Ok((cur, report)),
            FragmentClass::Chaining => {
                let w = class.witnesses.into_iter().find(|w| !w.benign).expect("non-benign witness");
                return Err(BenignError::Chaining(w));
            }
            FragmentClass::WeaklyChaining => {}
        }
        if report.applications > report.initial_b {
            return Err(BenignError::NoProgress(report.applications));
        }
        let (next, step) = eliminate_one(&cur, &g, alphabet, fresh)?;
        if let Some(f) = &step.tuple_var {
            report.fresh.push(f.clone());
        }
        report.applications += 1;
        report.steps.push(step);
        cur = next;
    }
}
