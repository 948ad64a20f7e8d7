//! Quantifier-free linear integer arithmetic.

mod simplex;
mod smtlib;
mod solver;

use std::collections::{BTreeMap, HashMap};
use std::fmt;

pub use simplex::{Scalar, Simplex};
pub use smtlib::{emit_smtlib, parse_reply, solve_external, ExternalSolver};
pub use solver::{solve, solve_generic, solve_with, SolverOptions, Stats};

pub type VarId = usize;

/// `constant + Σ coeff·var`.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LinExpr {
    pub constant: i64,
    pub terms: BTreeMap<VarId, i64>,
}

impl LinExpr {
    pub fn constant(c: i64) -> Self {
        LinExpr { constant: c, terms: BTreeMap::new() }
    }

    pub fn var(v: VarId) -> Self {
        LinExpr::term(1, v)
    }

    pub fn term(c: i64, v: VarId) -> Self {
        let mut e = LinExpr::default();
        e.add_term(c, v);
        e
    }

    pub fn sum(vars: impl IntoIterator<Item = VarId>) -> Self {
        let mut e = LinExpr::default();
        for v in vars {
            e.add_term(1, v);
        }
        e
    }

    pub fn add_term(&mut self, c: i64, v: VarId) {
        let entry = self.terms.entry(v).or_insert(0);
        *entry += c;
        if *entry == 0 {
            self.terms.remove(&v);
        }
    }

    pub fn plus(mut self, other: &LinExpr) -> LinExpr {
        self.constant += other.constant;
        for (&v, &c) in &other.terms {
            self.add_term(c, v);
        }
        self
    }

    pub fn minus(self, other: &LinExpr) -> LinExpr {
        self.plus(&other.scale(-1))
    }

    pub fn scale(&self, k: i64) -> LinExpr {
        LinExpr {
            constant: self.constant * k,
            terms: self.terms.iter().filter(|_| k != 0).map(|(&v, &c)| (v, c * k)).collect(),
        }
    }

    pub fn eval(&self, values: &[i64]) -> i128 {
        self.terms
            .iter()
            .fold(self.constant as i128, |acc, (&v, &c)| acc + c as i128 * values[v] as i128)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Rel {
    Le,
    Eq,
}

/// `expr ⋈ 0`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LinAtom {
    pub expr: LinExpr,
    pub rel: Rel,
}

impl LinAtom {
    pub fn holds(&self, values: &[i64]) -> bool {
        let v = self.expr.eval(values);
        match self.rel {
            Rel::Le => v <= 0,
            Rel::Eq => v == 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum LinearFormula {
    Atom(LinAtom),
    And(Vec<LinearFormula>),
    Or(Vec<LinearFormula>),
}

impl LinearFormula {
    pub fn tt() -> Self {
        LinearFormula::And(vec![])
    }

    pub fn ff() -> Self {
        LinearFormula::Or(vec![])
    }

    /// `a ≤ b`
    pub fn le(a: LinExpr, b: &LinExpr) -> Self {
        LinearFormula::Atom(LinAtom { expr: a.minus(b), rel: Rel::Le })
    }

    /// `a ≥ b`
    pub fn ge(a: LinExpr, b: &LinExpr) -> Self {
        LinearFormula::Atom(LinAtom { expr: b.clone().minus(&a), rel: Rel::Le })
    }

    /// `a = b`
    pub fn eq(a: LinExpr, b: &LinExpr) -> Self {
        LinearFormula::Atom(LinAtom { expr: a.minus(b), rel: Rel::Eq })
    }

    pub fn holds(&self, values: &[i64]) -> bool {
        match self {
            LinearFormula::Atom(a) => a.holds(values),
            LinearFormula::And(fs) => fs.iter().all(|f| f.holds(values)),
            LinearFormula::Or(fs) => fs.iter().any(|f| f.holds(values)),
        }
    }

    pub fn atoms(&self) -> Vec<&LinAtom> {
        let mut out = Vec::new();
        let mut stack = vec![self];
        while let Some(f) = stack.pop() {
            match f {
                LinearFormula::Atom(a) => out.push(a),
                LinearFormula::And(fs) | LinearFormula::Or(fs) => stack.extend(fs.iter().rev()),
            }
        }
        out
    }
}

/// Variables with display names and a conjunction of constraints.
#[derive(Clone, Debug, Default)]
pub struct LiaProblem {
    names: Vec<String>,
    taken: HashMap<String, usize>,
    constraints: Vec<LinearFormula>,
}

impl LiaProblem {
    pub fn new() -> Self {
        LiaProblem::default()
    }

    /// Declares a variable; repeated names get a numeric suffix.
    pub fn new_var(&mut self, name: impl Into<String>) -> VarId {
        let mut name = name.into();
        if let Some(n) = self.taken.get_mut(&name) {
            *n += 1;
            name = format!("{name}_{n}");
        }
        self.taken.insert(name.clone(), 0);
        self.names.push(name);
        self.names.len() - 1
    }

    /// A variable constrained to be non-negative.
    pub fn new_nat(&mut self, name: impl Into<String>) -> VarId {
        let v = self.new_var(name);
        self.assert(LinearFormula::ge(LinExpr::var(v), &LinExpr::constant(0)));
        v
    }

    pub fn assert(&mut self, f: LinearFormula) {
        self.constraints.push(f);
    }

    pub fn num_vars(&self) -> usize {
        self.names.len()
    }

    pub fn name(&self, v: VarId) -> &str {
        &self.names[v]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn constraints(&self) -> &[LinearFormula] {
        &self.constraints
    }

    pub fn formula(&self) -> LinearFormula {
        LinearFormula::And(self.constraints.clone())
    }

    pub fn holds(&self, values: &[i64]) -> bool {
        values.len() == self.num_vars() && self.constraints.iter().all(|f| f.holds(values))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum LiaResult {
    Sat(Vec<i64>),
    Unsat,
    Unknown(String),
}

impl LiaResult {
    pub fn is_sat(&self) -> bool {
        matches!(self, LiaResult::Sat(_))
    }
}

impl fmt::Display for LiaResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LiaResult::Sat(_) => f.write_str("sat"),
            LiaResult::Unsat => f.write_str("unsat"),
            LiaResult::Unknown(why) => write!(f, "unknown ({why})"),
        }
    }
}

/// Which solver decides the arithmetic part.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub enum Backend {
    #[default]
    Internal,
    External(String),
}

impl Backend {
    pub fn parse(spec: &str) -> Option<Backend> {
        match spec {
            "internal" => Some(Backend::Internal),
            _ => spec
                .strip_prefix("external:")
                .filter(|cmd| !cmd.trim().is_empty())
                .map(|cmd| Backend::External(cmd.to_string())),
        }
    }

    pub fn solve(&self, p: &LiaProblem, options: &SolverOptions) -> LiaResult {
        match self {
            Backend::Internal => solve_with(p, options).0,
            Backend::External(cmd) => solve_external(p, &ExternalSolver::new(cmd)),
        }
    }
}
