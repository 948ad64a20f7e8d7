//! Splitting graphs, chains and fragment classification.

use std::collections::{BTreeSet, HashMap, VecDeque};
use std::fmt;

use crate::formula::{to_dnf, to_left_sided, Atom, Clause, FormulaError, Problem, StrTerm, Var};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Side {
    Left,
    Right,
}

impl Side {
    pub fn opposite(self) -> Side {
        match self {
            Side::Left => Side::Right,
            Side::Right => Side::Left,
        }
    }
}

/// An occurrence of a variable in a relational atom. Indices are 0-based
/// and displayed 1-based.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Position {
    pub constraint: usize,
    pub side: Side,
    pub slot: usize,
}

impl fmt::Display for Position {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self.side {
            Side::Left => 'L',
            Side::Right => 'R',
        };
        write!(f, "c{}.{}{}", self.constraint + 1, s, self.slot + 1)
    }
}

/// What the splitting graph needs to know about a relational atom.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConstraintShape {
    pub lhs: StrTerm,
    pub rhs: StrTerm,
    pub length_preserving: bool,
}

impl ConstraintShape {
    pub fn side(&self, s: Side) -> &StrTerm {
        match s {
            Side::Left => &self.lhs,
            Side::Right => &self.rhs,
        }
    }

    pub fn left_sided(&self) -> bool {
        self.lhs.len() == 1
    }
}

/// Shapes of the relational atoms of a clause, in order.
pub fn shapes(atoms: &[Atom]) -> Vec<ConstraintShape> {
    atoms
        .iter()
        .filter_map(|a| match a {
            Atom::Rel { lhs, rhs, rel } => Some(ConstraintShape {
                lhs: lhs.clone(),
                rhs: rhs.clone(),
                length_preserving: rel.is_length_preserving(),
            }),
            _ => None,
        })
        .collect()
}

#[derive(Clone, Debug)]
pub struct SplittingGraph {
    constraints: Vec<ConstraintShape>,
    positions: Vec<Position>,
    vars: Vec<Var>,
    succ: Vec<Vec<usize>>,
    pred: Vec<Vec<usize>>,
}

impl SplittingGraph {
    pub fn of_clause(c: &Clause) -> Self {
        Self::new(shapes(c.atoms()))
    }

    pub fn new(constraints: Vec<ConstraintShape>) -> Self {
        let mut positions = Vec::new();
        let mut vars = Vec::new();
        for (j, c) in constraints.iter().enumerate() {
            for side in [Side::Left, Side::Right] {
                for (i, v) in c.side(side).vars().iter().enumerate() {
                    positions.push(Position { constraint: j, side, slot: i });
                    vars.push(v.clone());
                }
            }
        }
        let mut by_var: HashMap<&Var, Vec<usize>> = HashMap::new();
        for (p, v) in vars.iter().enumerate() {
            by_var.entry(v).or_default().push(p);
        }
        let mut succ: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); positions.len()];
        for p in 0..positions.len() {
            let pp = positions[p];
            for opp in 0..positions.len() {
                let po = positions[opp];
                if po.constraint != pp.constraint || po.side == pp.side {
                    continue;
                }
                for &target in &by_var[&vars[opp]] {
                    if target != opp {
                        succ[p].insert(target);
                    }
                }
            }
        }
        let succ: Vec<Vec<usize>> = succ.into_iter().map(|s| s.into_iter().collect()).collect();
        let mut pred = vec![Vec::new(); positions.len()];
        for (p, ss) in succ.iter().enumerate() {
            for &q in ss {
                pred[q].push(p);
            }
        }
        SplittingGraph { constraints, positions, vars, succ, pred }
    }

    pub fn constraints(&self) -> &[ConstraintShape] {
        &self.constraints
    }

    pub fn positions(&self) -> &[Position] {
        &self.positions
    }

    pub fn var(&self, p: usize) -> &Var {
        &self.vars[p]
    }

    pub fn successors(&self, p: usize) -> &[usize] {
        &self.succ[p]
    }

    pub fn in_degree(&self, p: usize) -> usize {
        self.pred[p].len()
    }

    pub fn has_edge(&self, p: usize, q: usize) -> bool {
        self.succ[p].binary_search(&q).is_ok()
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.succ.iter().enumerate().flat_map(|(p, ss)| ss.iter().map(move |&q| (p, q)))
    }

    pub fn edge_count(&self) -> usize {
        self.succ.iter().map(Vec::len).sum()
    }

    /// Index of the constraint labelling edge `(p, _)`.
    pub fn con(&self, p: usize) -> usize {
        self.positions[p].constraint
    }

    pub fn index_of(&self, pos: Position) -> Option<usize> {
        self.positions.iter().position(|&q| q == pos)
    }

    /// Positions of one side of a constraint.
    pub fn side_positions(&self, constraint: usize, side: Side) -> impl Iterator<Item = usize> + '_ {
        (0..self.positions.len())
            .filter(move |&p| self.positions[p].constraint == constraint && self.positions[p].side == side)
    }

    /// True when every position of that side has no incoming edge.
    pub fn side_is_root(&self, constraint: usize, side: Side) -> bool {
        self.side_positions(constraint, side).all(|p| self.in_degree(p) == 0)
    }

    /// Strongly connected components, each sorted, in order of their
    /// smallest position.
    pub fn sccs(&self) -> Vec<Vec<usize>> {
        let n = self.positions.len();
        let mut index = vec![usize::MAX; n];
        let mut low = vec![0; n];
        let mut on_stack = vec![false; n];
        let mut stack = Vec::new();
        let mut out = Vec::new();
        let mut counter = 0;
        for root in 0..n {
            if index[root] != usize::MAX {
                continue;
            }
            let mut work: Vec<(usize, usize)> = vec![(root, 0)];
            index[root] = counter;
            low[root] = counter;
            counter += 1;
            stack.push(root);
            on_stack[root] = true;
            while let Some(&mut (v, ref mut next)) = work.last_mut() {
                if *next < self.succ[v].len() {
                    let w = self.succ[v][*next];
                    *next += 1;
                    if index[w] == usize::MAX {
                        index[w] = counter;
                        low[w] = counter;
                        counter += 1;
                        stack.push(w);
                        on_stack[w] = true;
                        work.push((w, 0));
                    } else if on_stack[w] {
                        low[v] = low[v].min(index[w]);
                    }
                } else {
                    work.pop();
                    if let Some(&(parent, _)) = work.last() {
                        low[parent] = low[parent].min(low[v]);
                    }
                    if low[v] == index[v] {
                        let mut comp = Vec::new();
                        loop {
                            let w = stack.pop().unwrap();
                            on_stack[w] = false;
                            comp.push(w);
                            if w == v {
                                break;
                            }
                        }
                        comp.sort_unstable();
                        out.push(comp);
                    }
                }
            }
        }
        out.sort();
        out
    }

    /// Components that contain a cycle (including a self-loop).
    pub fn cyclic_sccs(&self) -> Vec<Vec<usize>> {
        self.sccs()
            .into_iter()
            .filter(|c| c.len() > 1 || self.has_edge(c[0], c[0]))
            .collect()
    }

    /// Shortest path from `from` to `to` using only positions in `within`,
    /// as the list of positions after `from` (ending with `to`).
    fn path(&self, from: usize, to: usize, within: &[usize]) -> Vec<usize> {
        let mut prev: HashMap<usize, usize> = HashMap::new();
        let mut queue = VecDeque::from([from]);
        let mut seen: BTreeSet<usize> = BTreeSet::from([from]);
        while let Some(p) = queue.pop_front() {
            for &q in &self.succ[p] {
                if q == to {
                    let mut path = vec![q];
                    let mut cur = p;
                    while cur != from {
                        path.push(cur);
                        cur = prev[&cur];
                    }
                    path.reverse();
                    return path;
                }
                if within.binary_search(&q).is_ok() && seen.insert(q) {
                    prev.insert(q, p);
                    queue.push_back(q);
                }
            }
        }
        unreachable!("positions of a component are mutually reachable")
    }

    /// A closed walk starting at `from` through `via`.
    fn cycle_through(&self, from: usize, via: usize, within: &[usize]) -> Vec<usize> {
        let mut cycle = vec![from];
        if from != via {
            cycle.extend(self.path(from, via, within));
        }
        let back = self.path(via, from, within);
        cycle.extend(&back[..back.len() - 1]);
        cycle
    }

    fn witness(&self, cycle: Vec<usize>, benign: bool, reason: Option<NonBenign>) -> ChainWitness {
        ChainWitness {
            cycle: cycle.into_iter().map(|p| (self.positions[p], self.vars[p].clone())).collect(),
            benign,
            reason,
        }
    }

    /// Checks one cyclic component; every chain inside it is benign iff the
    /// returned witness is benign.
    pub fn classify_scc(&self, scc: &[usize]) -> ChainWitness {
        for &p in scc {
            let c = &self.constraints[self.con(p)];
            let reason = if !c.left_sided() {
                Some(NonBenign::NotLeftSided { constraint: self.con(p) })
            } else if !c.length_preserving {
                Some(NonBenign::NotLengthPreserving { constraint: self.con(p) })
            } else {
                None
            };
            if let Some(reason) = reason {
                let q = *self.succ[p].iter().find(|q| scc.binary_search(q).is_ok()).expect("cyclic component");
                return self.witness(self.cycle_through(p, q, scc), false, Some(reason));
            }
        }
        let left = scc.iter().find(|&&p| self.positions[p].side == Side::Left);
        let right = scc.iter().find(|&&p| self.positions[p].side == Side::Right);
        if let (Some(&l), Some(&r)) = (left, right) {
            return self.witness(self.cycle_through(l, r, scc), false, Some(NonBenign::MixedSides));
        }
        let p = scc[0];
        let cycle = if self.has_edge(p, p) { vec![p] } else { self.cycle_through(p, p, scc) };
        self.witness(cycle, true, None)
    }

    /// One witness per cyclic strongly connected component.
    pub fn find_chains(&self) -> Vec<ChainWitness> {
        self.cyclic_sccs().iter().map(|scc| self.classify_scc(scc)).collect()
    }

    /// Indices of constraints labelling edges inside benign cyclic components.
    pub fn benign_constraints(&self) -> BTreeSet<usize> {
        let mut out = BTreeSet::new();
        for scc in self.cyclic_sccs() {
            if self.classify_scc(&scc).benign {
                for &p in &scc {
                    if self.succ[p].iter().any(|q| scc.binary_search(q).is_ok()) {
                        out.insert(self.con(p));
                    }
                }
            }
        }
        out
    }

    pub fn classify(&self) -> ClauseClass {
        let witnesses = self.find_chains();
        let class = if witnesses.is_empty() {
            FragmentClass::ChainFree
        } else if witnesses.iter().all(|w| w.benign) {
            FragmentClass::WeaklyChaining
        } else {
            FragmentClass::Chaining
        };
        ClauseClass { class, witnesses }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NonBenign {
    NotLeftSided { constraint: usize },
    NotLengthPreserving { constraint: usize },
    MixedSides,
}

impl fmt::Display for NonBenign {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NonBenign::NotLeftSided { constraint } => write!(f, "constraint c{} is not left-sided", constraint + 1),
            NonBenign::NotLengthPreserving { constraint } => {
                write!(f, "constraint c{} is not length-preserving", constraint + 1)
            }
            NonBenign::MixedSides => f.write_str("chain mixes left and right positions"),
        }
    }
}

/// A chain `(p0,p1),(p1,p2),...,(pn,p0)` given by its positions.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ChainWitness {
    pub cycle: Vec<(Position, Var)>,
    pub benign: bool,
    pub reason: Option<NonBenign>,
}

impl fmt::Display for ChainWitness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (p, v) in &self.cycle {
            write!(f, "{v}@{p} -> ")?;
        }
        let (p, v) = &self.cycle[0];
        write!(f, "{v}@{p}")?;
        if let Some(r) = &self.reason {
            write!(f, " ({r})")?;
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum FragmentClass {
    ChainFree,
    WeaklyChaining,
    Chaining,
}

impl fmt::Display for FragmentClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FragmentClass::ChainFree => "chain-free",
            FragmentClass::WeaklyChaining => "weakly-chaining",
            FragmentClass::Chaining => "chaining",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ClauseClass {
    pub class: FragmentClass,
    pub witnesses: Vec<ChainWitness>,
}

/// Classification of every DNF clause (in left-sided form) of a problem.
#[derive(Clone, Debug)]
pub struct Classification {
    pub class: FragmentClass,
    pub clauses: Vec<(Clause, ClauseClass)>,
}

pub fn classify_clause(c: &Clause) -> ClauseClass {
    SplittingGraph::of_clause(c).classify()
}

/// Classifies a problem: each clause of its DNF is put in left-sided form
/// and classified; the formula takes the worst class.
pub fn classify(problem: &Problem) -> Result<Classification, FormulaError> {
    let mut fresh = problem.fresh_names();
    let mut clauses = Vec::new();
    let mut class = FragmentClass::ChainFree;
    for c in to_dnf(&problem.formula(), &problem.alphabet)? {
        let ls = to_left_sided(&c, &mut fresh);
        let cc = classify_clause(&ls);
        class = class.max(cc.class);
        clauses.push((ls, cc));
    }
    Ok(Classification { class, clauses })
}
