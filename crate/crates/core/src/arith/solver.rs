//! Depth-first search over disjunctions and integer branches on top of the
//! simplex.

use std::collections::{BTreeMap, HashMap};

use num_integer::Integer;
use num_rational::BigRational;

use super::simplex::{Scalar, Simplex};
use super::{LiaProblem, LiaResult, LinAtom, LinearFormula, Rel};

#[derive(Clone, Debug)]
pub struct SolverOptions {
    pub node_limit: u64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions { node_limit: 1_000_000 }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Stats {
    pub nodes: u64,
    pub pivots: u64,
    pub disjunction_branches: u64,
    pub integer_branches: u64,
}

#[derive(Clone, Debug)]
enum Norm {
    True,
    False,
    /// `(var, is_upper, bound)`
    Bounds(Vec<(usize, bool, i64)>),
}

#[derive(Clone, Debug, Default)]
struct Alt {
    atoms: Vec<usize>,
    disjs: Vec<usize>,
}

struct Compiler {
    sx_rows: Vec<BTreeMap<usize, i64>>,
    forms: HashMap<BTreeMap<usize, i64>, usize>,
    atoms: Vec<Norm>,
    atom_ids: HashMap<LinAtom, usize>,
    disjs: Vec<Vec<Alt>>,
    n: usize,
}

impl Compiler {
    fn form(&mut self, coeffs: BTreeMap<usize, i64>) -> usize {
        if coeffs.len() == 1 {
            if let Some((&v, &1)) = coeffs.iter().next() {
                return v;
            }
        }
        if let Some(&s) = self.forms.get(&coeffs) {
            return s;
        }
        let s = self.n + self.sx_rows.len();
        self.sx_rows.push(coeffs.clone());
        self.forms.insert(coeffs, s);
        s
    }

    fn normalize(&mut self, a: &LinAtom) -> Norm {
        let mut k = -a.expr.constant;
        let mut coeffs = a.expr.terms.clone();
        if coeffs.is_empty() {
            let holds = match a.rel {
                Rel::Le => 0 <= k,
                Rel::Eq => k == 0,
            };
            return if holds { Norm::True } else { Norm::False };
        }
        let g = coeffs.values().fold(0i64, |g, c| g.gcd(c));
        // Σ c·v ⋈ k with the first coefficient made positive; ≤ turns into ≥
        let negate = *coeffs.values().next().unwrap() < 0;
        if negate {
            k = -k;
        }
        for c in coeffs.values_mut() {
            *c = if negate { -*c / g } else { *c / g };
        }
        let v = self.form(coeffs);
        match a.rel {
            Rel::Le if negate => Norm::Bounds(vec![(v, false, -(-k).div_euclid(g))]),
            Rel::Le => Norm::Bounds(vec![(v, true, k.div_euclid(g))]),
            Rel::Eq if k % g != 0 => Norm::False,
            Rel::Eq => Norm::Bounds(vec![(v, true, k / g), (v, false, k / g)]),
        }
    }

    fn atom(&mut self, a: &LinAtom) -> usize {
        if let Some(&id) = self.atom_ids.get(a) {
            return id;
        }
        let norm = self.normalize(a);
        self.atoms.push(norm);
        let id = self.atoms.len() - 1;
        self.atom_ids.insert(a.clone(), id);
        id
    }

    fn is_false(&self, alt: &Alt) -> bool {
        alt.atoms.iter().any(|&a| matches!(self.atoms[a], Norm::False))
    }

    fn flatten(&mut self, f: &LinearFormula, alt: &mut Alt) {
        match f {
            LinearFormula::Atom(a) => {
                let id = self.atom(a);
                if !matches!(self.atoms[id], Norm::True) && !alt.atoms.contains(&id) {
                    alt.atoms.push(id);
                }
            }
            LinearFormula::And(fs) => {
                for g in fs {
                    self.flatten(g, alt);
                }
            }
            LinearFormula::Or(fs) if fs.len() == 1 => self.flatten(&fs[0], alt),
            LinearFormula::Or(fs) => {
                let mut alts = Vec::new();
                for g in fs {
                    let mut a = Alt::default();
                    self.flatten(g, &mut a);
                    if !self.is_false(&a) {
                        alts.push(a);
                    }
                }
                if alts.iter().any(|a| a.atoms.is_empty() && a.disjs.is_empty()) {
                    return;
                }
                match alts.len() {
                    0 => {
                        self.atoms.push(Norm::False);
                        alt.atoms.push(self.atoms.len() - 1);
                    }
                    1 => {
                        let a = alts.pop().unwrap();
                        alt.atoms.extend(a.atoms);
                        alt.disjs.extend(a.disjs);
                    }
                    _ => {
                        self.disjs.push(alts);
                        alt.disjs.push(self.disjs.len() - 1);
                    }
                }
            }
        }
    }
}

pub fn solve(p: &LiaProblem) -> LiaResult {
    solve_with(p, &SolverOptions::default()).0
}

pub fn solve_with(p: &LiaProblem, options: &SolverOptions) -> (LiaResult, Stats) {
    solve_generic::<BigRational>(p, options)
}

struct Node<S> {
    mark: usize,
    atoms: Vec<usize>,
    bound: Option<(usize, bool, S)>,
    pending: Vec<usize>,
}

struct Search<S: Scalar> {
    sx: Simplex<S>,
    atoms: Vec<Norm>,
    disjs: Vec<Vec<Alt>>,
}

impl<S: Scalar> Search<S> {
    fn assert_atom(&mut self, a: usize) -> bool {
        match &self.atoms[a] {
            Norm::True => true,
            Norm::False => false,
            Norm::Bounds(bs) => {
                for &(v, upper, b) in bs {
                    let ok = if upper {
                        self.sx.assert_upper(v, S::from_int(b))
                    } else {
                        self.sx.assert_lower(v, S::from_int(b))
                    };
                    if !ok {
                        return false;
                    }
                }
                true
            }
        }
    }

    fn atom_holds(&self, a: usize) -> bool {
        match &self.atoms[a] {
            Norm::True => true,
            Norm::False => false,
            Norm::Bounds(bs) => bs.iter().all(|&(v, upper, b)| {
                let b = S::from_int(b);
                if upper {
                    *self.sx.value(v) <= b
                } else {
                    *self.sx.value(v) >= b
                }
            }),
        }
    }

    fn disj_holds(&self, d: usize) -> bool {
        self.disjs[d]
            .iter()
            .any(|alt| alt.atoms.iter().all(|&a| self.atom_holds(a)) && alt.disjs.iter().all(|&e| self.disj_holds(e)))
    }
}

/// The solver over any exact scalar type.
pub fn solve_generic<S: Scalar>(p: &LiaProblem, options: &SolverOptions) -> (LiaResult, Stats) {
    let n = p.num_vars();
    let mut c = Compiler {
        sx_rows: Vec::new(),
        forms: HashMap::new(),
        atoms: Vec::new(),
        atom_ids: HashMap::new(),
        disjs: Vec::new(),
        n,
    };
    let mut root = Alt::default();
    c.flatten(&p.formula(), &mut root);
    let mut sx = Simplex::<S>::new(n);
    for row in &c.sx_rows {
        sx.add_row(row);
    }
    let mut search = Search { sx, atoms: c.atoms, disjs: c.disjs };
    let mut stats = Stats::default();
    let mut stack = vec![Node::<S> { mark: 0, atoms: root.atoms, bound: None, pending: root.disjs }];
    let result = loop {
        let Some(node) = stack.pop() else { break LiaResult::Unsat };
        stats.nodes += 1;
        if stats.nodes > options.node_limit {
            break LiaResult::Unknown(format!("node limit {} reached", options.node_limit));
        }
        search.sx.backtrack(node.mark);
        let mut ok = node.atoms.iter().all(|&a| search.assert_atom(a));
        if let Some((v, upper, b)) = node.bound {
            ok = ok && if upper { search.sx.assert_upper(v, b) } else { search.sx.assert_lower(v, b) };
        }
        if !ok || !search.sx.check() {
            continue;
        }
        let mark = search.sx.mark();
        if let Some(pos) = node.pending.iter().position(|&d| !search.disj_holds(d)) {
            stats.disjunction_branches += 1;
            let d = node.pending[pos];
            let mut rest = node.pending.clone();
            rest.remove(pos);
            for alt in search.disjs[d].iter().rev() {
                let mut pending = rest.clone();
                pending.extend(&alt.disjs);
                stack.push(Node { mark, atoms: alt.atoms.clone(), bound: None, pending });
            }
            continue;
        }
        let half = S::one() / (S::one() + S::one());
        let mut best: Option<(usize, S)> = None;
        for v in 0..n {
            let x = search.sx.value(v);
            if x.is_int() {
                continue;
            }
            let dist = (x.clone() - x.floor_int() - half.clone()).abs();
            if best.as_ref().is_none_or(|(_, d)| dist < *d) {
                best = Some((v, dist));
            }
        }
        if let Some((v, _)) = best {
            stats.integer_branches += 1;
            let x = search.sx.value(v).clone();
            stack.push(Node { mark, atoms: vec![], bound: Some((v, false, x.ceil_int())), pending: node.pending.clone() });
            stack.push(Node { mark, atoms: vec![], bound: Some((v, true, x.floor_int())), pending: node.pending });
            continue;
        }
        let values: Option<Vec<i64>> = (0..n).map(|v| search.sx.value(v).to_i64_exact()).collect();
        break match values {
            Some(values) if p.holds(&values) => LiaResult::Sat(values),
            Some(_) => LiaResult::Unknown("assignment failed re-validation".into()),
            None => LiaResult::Unknown("value out of i64 range".into()),
        };
    };
    stats.pivots = search.sx.pivots();
    (result, stats)
}
