//! Splitting a chain-free clause into concatenation-free clauses.

use std::cmp::Ordering;
use std::collections::BTreeSet;
use std::ops::ControlFlow;

use thiserror::Error;

use crate::formula::{Atom, Clause, FreshNames, Interpretation, NamedAut, Relation, StrTerm, Var};
use crate::fragment::{shapes, FragmentClass, Side, SplittingGraph};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SplitError {
    #[error("more than {0} live clauses")]
    TooManyClauses(usize),
    #[error("more than {0} splitting steps on one branch")]
    TooDeep(usize),
    #[error("reminder without a root constraint: {0}")]
    NoRoot(String),
}

#[derive(Clone, Debug)]
pub struct SplitOptions {
    pub max_clauses: usize,
    pub max_depth: usize,
    /// Classify every intermediate clause and record the ones that are not
    /// chain-free.
    pub check_chain_free: bool,
    pub trace: bool,
}

impl Default for SplitOptions {
    fn default() -> Self {
        SplitOptions { max_clauses: 100_000, max_depth: 10_000, check_chain_free: false, trace: false }
    }
}

#[derive(Clone, Debug, Default)]
pub struct SplitStats {
    pub phase1_steps: usize,
    pub phase2_steps: usize,
    pub membership_steps: usize,
    pub leaves: usize,
    /// Parent/child pairs whose measure was compared.
    pub phase1_checks: usize,
    pub phase2_checks: usize,
    pub phase1_violations: Vec<String>,
    pub phase2_violations: Vec<String>,
    pub chain_checks: usize,
    pub chain_violations: Vec<String>,
    pub max_live: usize,
    pub stopped_early: bool,
    pub trace: Vec<String>,
}

/// A concatenation-free clause and the definitions `x = x1∘x2` that link
/// it to the variables of the input.
#[derive(Clone, Debug)]
pub struct Leaf {
    pub clause: Clause,
    pub defs: Vec<(Var, Var, Var)>,
}

impl Leaf {
    /// Assigns every split variable from its parts.
    pub fn extend_model(&self, eta: &mut Interpretation) {
        for (x, x1, x2) in self.defs.iter().rev() {
            let mut w = eta.get(x1).cloned().unwrap_or_default();
            w.extend(eta.get(x2).cloned().unwrap_or_default());
            eta.insert(x.clone(), w);
        }
    }
}

#[derive(Clone, Debug)]
struct Tracked {
    atom: Atom,
    reminder: bool,
    /// Level at which the atom left the reminder.
    level: usize,
    /// Outer side while the atom is a root of the reminder, and after.
    outer: Option<Side>,
    parent: Option<usize>,
}

#[derive(Clone, Debug)]
struct Node {
    rels: Vec<Tracked>,
    others: Vec<Atom>,
    defs: Vec<(Var, Var, Var)>,
    next_level: usize,
    l: i64,
    depth: usize,
}

fn sides(a: &Atom) -> (&StrTerm, &StrTerm) {
    match a {
        Atom::Rel { lhs, rhs, .. } => (lhs, rhs),
        _ => unreachable!("relational atom"),
    }
}

fn side_len(a: &Atom, s: Side) -> usize {
    let (l, r) = sides(a);
    match s {
        Side::Left => l.len(),
        Side::Right => r.len(),
    }
}

impl Node {
    fn clause(&self) -> Clause {
        Clause::new(self.rels.iter().map(|t| t.atom.clone()).chain(self.others.iter().cloned()))
    }

    fn reminder(&self) -> Vec<usize> {
        (0..self.rels.len()).filter(|&i| self.rels[i].reminder).collect()
    }

    /// Outer side of every reminder atom, `None` for non-roots. A root
    /// keeps the outer side it inherited when both sides are roots.
    fn roots(&self) -> Vec<(usize, Option<Side>)> {
        let idx = self.reminder();
        let atoms: Vec<Atom> = idx.iter().map(|&i| self.rels[i].atom.clone()).collect();
        let g = SplittingGraph::new(shapes(&atoms));
        idx.iter()
            .enumerate()
            .map(|(c, &i)| {
                let outer = match (g.side_is_root(c, Side::Left), g.side_is_root(c, Side::Right)) {
                    (false, false) => None,
                    (true, false) => Some(Side::Left),
                    (false, true) => Some(Side::Right),
                    (true, true) => Some(self.rels[i].outer.unwrap_or(Side::Left)),
                };
                (i, outer)
            })
            .collect()
    }

    /// Drops concatenation-free root constraints from the reminder until
    /// none is left; each round is a new level. Returns the dropped atoms.
    fn cleanup(&mut self) -> Vec<usize> {
        let mut dropped = Vec::new();
        loop {
            let roots = self.roots();
            for &(i, outer) in &roots {
                self.rels[i].outer = outer;
            }
            let round: Vec<usize> = roots
                .into_iter()
                .filter(|&(i, outer)| outer.is_some() && self.rels[i].atom.is_concat_free())
                .map(|(i, _)| i)
                .collect();
            if round.is_empty() {
                return dropped;
            }
            for i in round {
                let t = &mut self.rels[i];
                t.reminder = false;
                t.level = self.next_level;
                dropped.push(i);
            }
            self.next_level += 1;
        }
    }

    fn measure1(&self) -> (i64, usize, usize) {
        let (mut o, mut i) = (0, 0);
        for t in self.rels.iter().filter(|t| t.reminder) {
            if let Some(s) = t.outer {
                o += side_len(&t.atom, s);
                i += side_len(&t.atom, s.opposite());
            }
        }
        (self.l, o, i)
    }

    fn measure2(&self) -> Vec<usize> {
        let mut v = vec![0; self.next_level];
        for t in &self.rels {
            if !t.reminder && !t.atom.is_concat_free() {
                let outer = t.outer.expect("dropped atoms have an outer side");
                v[t.level] += side_len(&t.atom, outer.opposite());
            }
        }
        v
    }
}

/// Lexicographic order with the last component most significant.
fn cmp_levels(a: &[usize], b: &[usize]) -> Ordering {
    let n = a.len().max(b.len());
    for k in (0..n).rev() {
        let (x, y) = (a.get(k).copied().unwrap_or(0), b.get(k).copied().unwrap_or(0));
        if x != y {
            return x.cmp(&y);
        }
    }
    Ordering::Equal
}

/// One disjunct of a split: two atoms and the substitution `x ↦ x1∘x2`.
#[derive(Clone, Debug)]
pub struct Disjunct {
    pub parts: [Atom; 2],
    pub def: (Var, Var, Var),
}

fn state_splits(aut: &NamedAut) -> Vec<(NamedAut, NamedAut)> {
    aut.aut
        .split_at_states()
        .into_iter()
        .enumerate()
        .filter_map(|(q, (pre, suf))| {
            let (pre, suf) = (pre.trim(), suf.trim());
            if pre.is_empty() || suf.is_empty() {
                return None;
            }
            Some((
                NamedAut::new(format!("{}[..{q}]", aut.name), pre),
                NamedAut::new(format!("{}[{q}..]", aut.name), suf),
            ))
        })
        .collect()
}

fn rel_atom(l: Vec<Var>, r: Vec<Var>, rel: Relation) -> Atom {
    Atom::rel(StrTerm(l), StrTerm(r), rel)
}

/// The left and right splits of `R(x∘t, y∘t')`. Disjuncts whose automata
/// are empty are left out.
pub fn split_relational(atom: &Atom, fresh: &mut FreshNames) -> Vec<Disjunct> {
    let Atom::Rel { lhs, rhs, rel } = atom else { return vec![] };
    if lhs.is_empty() || rhs.is_empty() || atom.is_concat_free() {
        return vec![];
    }
    let (x, t) = (&lhs.vars()[0], &lhs.vars()[1..]);
    let (y, t2) = (&rhs.vars()[0], &rhs.vars()[1..]);
    let pairs: Vec<(Relation, Relation)> = match rel {
        Relation::Equality => vec![(Relation::Equality, Relation::Equality)],
        Relation::Aut(a) => state_splits(a).into_iter().map(|(p, s)| (Relation::Aut(p), Relation::Aut(s))).collect(),
    };
    let mut out = Vec::new();
    if !t2.is_empty() {
        let (x1, x2) = (fresh.fresh(), fresh.fresh());
        let by = [x1.clone(), x2.clone()];
        for (pre, suf) in &pairs {
            let first = rel_atom(vec![x1.clone()], vec![y.clone()], pre.clone());
            let mut rest = vec![x2.clone()];
            rest.extend(t.iter().cloned());
            let second = rel_atom(rest, t2.to_vec(), suf.clone());
            out.push(Disjunct {
                parts: [first.substitute(x, &by), second.substitute(x, &by)],
                def: (x.clone(), x1.clone(), x2.clone()),
            });
        }
    }
    if !t.is_empty() {
        let (y1, y2) = (fresh.fresh(), fresh.fresh());
        let by = [y1.clone(), y2.clone()];
        for (pre, suf) in &pairs {
            let first = rel_atom(vec![x.clone()], vec![y1.clone()], pre.clone());
            let mut rest = vec![y2.clone()];
            rest.extend(t2.iter().cloned());
            let second = rel_atom(t.to_vec(), rest, suf.clone());
            out.push(Disjunct {
                parts: [first.substitute(y, &by), second.substitute(y, &by)],
                def: (y.clone(), y1.clone(), y2.clone()),
            });
        }
    }
    out
}

/// `x∘t ∈ A` as `⋁_q x ∈ A[..q] ∧ t ∈ A[q..]`.
pub fn split_membership(atom: &Atom) -> Vec<[Atom; 2]> {
    let Atom::Member { term, aut } = atom else { return vec![] };
    if term.len() < 2 {
        return vec![];
    }
    let (x, t) = (&term.vars()[0], &term.vars()[1..]);
    state_splits(aut)
        .into_iter()
        .map(|(pre, suf)| [Atom::member(StrTerm::single(x.clone()), pre), Atom::member(StrTerm(t.to_vec()), suf)])
        .collect()
}

fn apply(node: &Node, at: usize, d: &Disjunct) -> Node {
    let (x, x1, x2) = &d.def;
    let by = [x1.clone(), x2.clone()];
    let mut rels = Vec::with_capacity(node.rels.len() + 1);
    for (j, t) in node.rels.iter().enumerate() {
        if j == at {
            for p in &d.parts {
                rels.push(Tracked { atom: p.clone(), parent: Some(j), ..t.clone() });
            }
        } else {
            rels.push(Tracked { atom: t.atom.substitute(x, &by), parent: Some(j), ..t.clone() });
        }
    }
    let mut defs = node.defs.clone();
    defs.push(d.def.clone());
    Node {
        rels,
        others: node.others.iter().map(|a| a.substitute(x, &by)).collect(),
        defs,
        next_level: node.next_level,
        l: node.l,
        depth: node.depth + 1,
    }
}

fn show_measure1(m: (i64, usize, usize)) -> String {
    format!("({}, {}, {})", m.0, m.1, m.2)
}

/// Runs the splitting algorithm depth-first and hands every
/// concatenation-free leaf to `visit`, which may stop the search.
pub fn explore(
    clause: &Clause,
    fresh: &mut FreshNames,
    options: &SplitOptions,
    mut visit: impl FnMut(Leaf) -> ControlFlow<()>,
) -> Result<SplitStats, SplitError> {
    let mut stats = SplitStats::default();
    let rels: Vec<Tracked> = clause
        .relational()
        .map(|a| Tracked { atom: a.clone(), reminder: true, level: 0, outer: None, parent: None })
        .collect();
    let mut root = Node {
        l: rels.len() as i64,
        rels,
        others: clause.atoms().iter().filter(|a| !a.is_relational()).cloned().collect(),
        defs: Vec::new(),
        next_level: 0,
        depth: 0,
    };
    root.cleanup();
    let mut stack = vec![root];
    while let Some(node) = stack.pop() {
        if options.check_chain_free {
            stats.chain_checks += 1;
            let c = node.clause();
            let class = SplittingGraph::of_clause(&c).classify();
            if class.class != FragmentClass::ChainFree {
                stats.chain_violations.push(c.to_string());
            }
        }
        if node.depth > options.max_depth {
            return Err(SplitError::TooDeep(options.max_depth));
        }
        let mut children = Vec::new();
        if node.rels.iter().any(|t| t.reminder) {
            let reminder = node.reminder();
            let nonroot: BTreeSet<usize> =
                reminder.iter().copied().filter(|&i| node.rels[i].outer.is_none()).collect();
            let Some(&at) = reminder.iter().find(|&&i| node.rels[i].outer.is_some()) else {
                return Err(SplitError::NoRoot(node.clause().to_string()));
            };
            stats.phase1_steps += 1;
            let before = node.measure1();
            let disjuncts = split_relational(&node.rels[at].atom, fresh);
            for d in &disjuncts {
                let mut child = apply(&node, at, d);
                let dropped = child.cleanup();
                let became_root: BTreeSet<usize> = (0..child.rels.len())
                    .filter(|&i| child.rels[i].reminder && child.rels[i].outer.is_some())
                    .chain(dropped)
                    .collect();
                let events = became_root
                    .iter()
                    .filter(|&&i| child.rels[i].parent.is_some_and(|p| nonroot.contains(&p)))
                    .count();
                child.l -= events as i64;
                let after = child.measure1();
                stats.phase1_checks += 1;
                if after >= before {
                    stats.phase1_violations.push(format!(
                        "{} -> {} splitting {}",
                        show_measure1(before),
                        show_measure1(after),
                        node.rels[at].atom
                    ));
                }
                if options.trace {
                    stats.trace.push(format!(
                        "phase 1: split {} into {} ∧ {}, measure {} -> {}",
                        node.rels[at].atom,
                        d.parts[0],
                        d.parts[1],
                        show_measure1(before),
                        show_measure1(after)
                    ));
                }
                children.push(child);
            }
        } else if let Some(at) = node.rels.iter().position(|t| !t.atom.is_concat_free()) {
            stats.phase2_steps += 1;
            let before = node.measure2();
            for d in &split_relational(&node.rels[at].atom, fresh) {
                let child = apply(&node, at, d);
                let after = child.measure2();
                stats.phase2_checks += 1;
                if cmp_levels(&after, &before) != Ordering::Less {
                    stats.phase2_violations.push(format!(
                        "{before:?} -> {after:?} splitting {}",
                        node.rels[at].atom
                    ));
                }
                if options.trace {
                    stats.trace.push(format!(
                        "phase 2: split {} into {} ∧ {}, measure {before:?} -> {after:?}",
                        node.rels[at].atom, d.parts[0], d.parts[1]
                    ));
                }
                children.push(child);
            }
        } else if let Some(at) = node.others.iter().position(|a| !a.is_concat_free()) {
            stats.membership_steps += 1;
            for parts in split_membership(&node.others[at]) {
                let mut child = node.clone();
                child.depth += 1;
                child.others.splice(at..=at, parts);
                children.push(child);
            }
        } else {
            stats.leaves += 1;
            if visit(Leaf { clause: node.clause(), defs: node.defs }).is_break() {
                stats.stopped_early = true;
                return Ok(stats);
            }
            continue;
        }
        stack.extend(children.into_iter().rev());
        stats.max_live = stats.max_live.max(stack.len());
        if stack.len() > options.max_clauses {
            return Err(SplitError::TooManyClauses(options.max_clauses));
        }
    }
    Ok(stats)
}

/// All leaves of the splitting algorithm.
pub fn to_concat_free(
    clause: &Clause,
    fresh: &mut FreshNames,
    options: &SplitOptions,
) -> Result<(Vec<Leaf>, SplitStats), SplitError> {
    let mut leaves = Vec::new();
    let stats = explore(clause, fresh, options, |leaf| {
        leaves.push(leaf);
        ControlFlow::Continue(())
    })?;
    Ok((leaves, stats))
}
