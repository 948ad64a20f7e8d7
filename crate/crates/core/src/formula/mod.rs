//! String formulas: terms, atoms, boolean structure and problems.

mod eval;
mod normalize;
mod parse;
mod print;

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::automata::{Automaton, AutomatonError};
use crate::sexpr::{Pos, SyntaxError};
use crate::symbol::{Alphabet, Symbol};

pub use eval::{eval_atom, eval_clause, evaluate, partial_evaluate, Interpretation};
pub use normalize::{eliminate_empty_sides, negate_atom, to_dnf, to_left_sided};
pub use parse::parse;
pub use print::{print_formula, print_problem};

pub type Var = Arc<str>;

pub fn var(name: &str) -> Var {
    Arc::from(name)
}

/// A concatenation of variables; the empty list is ε.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct StrTerm(pub Vec<Var>);

impl StrTerm {
    pub fn single(v: Var) -> Self {
        StrTerm(vec![v])
    }

    pub fn of(names: &[&str]) -> Self {
        StrTerm(names.iter().map(|n| var(n)).collect())
    }

    pub fn vars(&self) -> &[Var] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Replaces every occurrence of `x` by the term `by`.
    pub fn substitute(&self, x: &Var, by: &[Var]) -> StrTerm {
        let mut out = Vec::with_capacity(self.0.len());
        for v in &self.0 {
            if v == x {
                out.extend(by.iter().cloned());
            } else {
                out.push(v.clone());
            }
        }
        StrTerm(out)
    }
}

impl fmt::Display for StrTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return f.write_str("ε");
        }
        for (i, v) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str("∘")?;
            }
            f.write_str(v)?;
        }
        Ok(())
    }
}

/// An automaton together with the name it is referred to by. Names of
/// derived automata are built from the names of their sources, so two
/// handles with the same name and structure denote the same relation.
#[derive(Clone, Debug)]
pub struct NamedAut {
    pub name: Arc<str>,
    pub aut: Arc<Automaton>,
}

impl NamedAut {
    pub fn new(name: impl AsRef<str>, aut: Automaton) -> Self {
        NamedAut {
            name: Arc::from(name.as_ref()),
            aut: Arc::new(aut),
        }
    }
}

impl PartialEq for NamedAut {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name && (Arc::ptr_eq(&self.aut, &other.aut) || self.aut == other.aut)
    }
}

impl Eq for NamedAut {}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Relation {
    Equality,
    Aut(NamedAut),
}

impl Relation {
    pub fn is_length_preserving(&self) -> bool {
        match self {
            Relation::Equality => true,
            Relation::Aut(a) => a.aut.is_length_preserving(),
        }
    }

    pub fn name(&self) -> &str {
        match self {
            Relation::Equality => "=",
            Relation::Aut(a) => &a.name,
        }
    }

    /// The relation as a two-tape automaton; equality becomes the identity
    /// over `alphabet`.
    pub fn automaton(&self, alphabet: &Alphabet) -> Arc<Automaton> {
        match self {
            Relation::Equality => Arc::new(Automaton::identity(alphabet)),
            Relation::Aut(a) => a.aut.clone(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CmpOp {
    Le,
    Lt,
    Eq,
}

/// `constant + Σ coeff·|x|`, with no zero coefficients stored.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct ArithTerm {
    pub constant: i64,
    pub coeffs: BTreeMap<Var, i64>,
}

impl ArithTerm {
    pub fn constant(c: i64) -> Self {
        ArithTerm { constant: c, coeffs: BTreeMap::new() }
    }

    /// `|t|` for a string term.
    pub fn length(t: &StrTerm) -> Self {
        let mut out = ArithTerm::default();
        for v in t.vars() {
            out.add_coeff(v.clone(), 1);
        }
        out
    }

    pub fn add_coeff(&mut self, v: Var, c: i64) {
        let e = self.coeffs.entry(v.clone()).or_insert(0);
        *e += c;
        if *e == 0 {
            self.coeffs.remove(&v);
        }
    }

    pub fn plus(&self, other: &ArithTerm) -> ArithTerm {
        let mut out = self.clone();
        out.constant += other.constant;
        for (v, c) in &other.coeffs {
            out.add_coeff(v.clone(), *c);
        }
        out
    }

    pub fn scale(&self, k: i64) -> ArithTerm {
        if k == 0 {
            return ArithTerm::default();
        }
        ArithTerm {
            constant: self.constant * k,
            coeffs: self.coeffs.iter().map(|(v, c)| (v.clone(), c * k)).collect(),
        }
    }

    pub fn minus(&self, other: &ArithTerm) -> ArithTerm {
        self.plus(&other.scale(-1))
    }

    /// Rewrites `|x|` into `|x1| + ... + |xn|`.
    pub fn substitute(&self, x: &Var, by: &[Var]) -> ArithTerm {
        let Some(&c) = self.coeffs.get(x) else {
            return self.clone();
        };
        let mut out = self.clone();
        out.coeffs.remove(x);
        for v in by {
            out.add_coeff(v.clone(), c);
        }
        out
    }

    pub fn vars(&self) -> impl Iterator<Item = &Var> {
        self.coeffs.keys()
    }
}

impl fmt::Display for ArithTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (v, c) in &self.coeffs {
            let (sign, mag) = if *c < 0 { ("-", -c) } else { ("+", *c) };
            if first {
                if sign == "-" {
                    f.write_str("-")?;
                }
            } else {
                write!(f, " {sign} ")?;
            }
            if mag != 1 {
                write!(f, "{mag}·")?;
            }
            write!(f, "|{v}|")?;
            first = false;
        }
        if first {
            write!(f, "{}", self.constant)
        } else if self.constant != 0 {
            let sign = if self.constant < 0 { "-" } else { "+" };
            write!(f, " {sign} {}", self.constant.abs())
        } else {
            Ok(())
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ArithAtom {
    pub lhs: ArithTerm,
    pub op: CmpOp,
    pub rhs: ArithTerm,
}

impl ArithAtom {
    pub fn new(lhs: ArithTerm, op: CmpOp, rhs: ArithTerm) -> Self {
        ArithAtom { lhs, op, rhs }
    }

    /// The unsatisfiable atom `1 ≤ 0`.
    pub fn falsum() -> Self {
        ArithAtom::new(ArithTerm::constant(1), CmpOp::Le, ArithTerm::constant(0))
    }

    /// `|t| = 0`.
    pub fn empty_term(t: &StrTerm) -> Self {
        ArithAtom::new(ArithTerm::length(t), CmpOp::Eq, ArithTerm::constant(0))
    }

    pub fn substitute(&self, x: &Var, by: &[Var]) -> ArithAtom {
        ArithAtom::new(self.lhs.substitute(x, by), self.op, self.rhs.substitute(x, by))
    }

    pub fn holds(&self, len: impl Fn(&Var) -> i64) -> bool {
        let value = |t: &ArithTerm| t.constant + t.coeffs.iter().map(|(v, c)| c * len(v)).sum::<i64>();
        let (l, r) = (value(&self.lhs), value(&self.rhs));
        match self.op {
            CmpOp::Le => l <= r,
            CmpOp::Lt => l < r,
            CmpOp::Eq => l == r,
        }
    }
}

impl fmt::Display for ArithAtom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let op = match self.op {
            CmpOp::Le => "≤",
            CmpOp::Lt => "<",
            CmpOp::Eq => "=",
        };
        write!(f, "{} {op} {}", self.lhs, self.rhs)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Atom {
    Member { term: StrTerm, aut: NamedAut },
    Rel { lhs: StrTerm, rhs: StrTerm, rel: Relation },
    Arith(ArithAtom),
}

impl Atom {
    pub fn member(term: StrTerm, aut: NamedAut) -> Self {
        Atom::Member { term, aut }
    }

    pub fn rel(lhs: StrTerm, rhs: StrTerm, rel: Relation) -> Self {
        Atom::Rel { lhs, rhs, rel }
    }

    pub fn eq(lhs: StrTerm, rhs: StrTerm) -> Self {
        Atom::Rel { lhs, rhs, rel: Relation::Equality }
    }

    pub fn is_relational(&self) -> bool {
        matches!(self, Atom::Rel { .. })
    }

    /// String variables occurring in the atom, in order of appearance.
    pub fn vars(&self) -> Vec<Var> {
        let mut out: Vec<Var> = Vec::new();
        let mut push = |v: &Var| {
            if !out.contains(v) {
                out.push(v.clone());
            }
        };
        match self {
            Atom::Member { term, .. } => term.vars().iter().for_each(&mut push),
            Atom::Rel { lhs, rhs, .. } => lhs.vars().iter().chain(rhs.vars()).for_each(&mut push),
            Atom::Arith(a) => a.lhs.vars().chain(a.rhs.vars()).for_each(&mut push),
        }
        out
    }

    /// Applies `[x/by]` to every string term and length occurrence.
    pub fn substitute(&self, x: &Var, by: &[Var]) -> Atom {
        match self {
            Atom::Member { term, aut } => Atom::Member {
                term: term.substitute(x, by),
                aut: aut.clone(),
            },
            Atom::Rel { lhs, rhs, rel } => Atom::Rel {
                lhs: lhs.substitute(x, by),
                rhs: rhs.substitute(x, by),
                rel: rel.clone(),
            },
            Atom::Arith(a) => Atom::Arith(a.substitute(x, by)),
        }
    }

    /// No string term of the atom has more than one variable.
    pub fn is_concat_free(&self) -> bool {
        match self {
            Atom::Member { term, .. } => term.len() <= 1,
            Atom::Rel { lhs, rhs, .. } => lhs.len() <= 1 && rhs.len() <= 1,
            Atom::Arith(_) => true,
        }
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Atom::Member { term, aut } => write!(f, "{term} ∈ {}", aut.name),
            Atom::Rel { lhs, rhs, rel: Relation::Equality } => write!(f, "{lhs} = {rhs}"),
            Atom::Rel { lhs, rhs, rel: Relation::Aut(a) } => write!(f, "{}({lhs}, {rhs})", a.name),
            Atom::Arith(a) => write!(f, "{a}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Formula {
    Atom(Atom),
    Not(Box<Formula>),
    And(Vec<Formula>),
    Or(Vec<Formula>),
}

impl Formula {
    pub fn not(f: Formula) -> Formula {
        Formula::Not(Box::new(f))
    }

    pub fn tt() -> Formula {
        Formula::And(Vec::new())
    }

    pub fn ff() -> Formula {
        Formula::Or(Vec::new())
    }

    pub fn atoms(&self) -> Vec<&Atom> {
        let mut out = Vec::new();
        let mut stack = vec![self];
        while let Some(f) = stack.pop() {
            match f {
                Formula::Atom(a) => out.push(a),
                Formula::Not(g) => stack.push(g),
                Formula::And(gs) | Formula::Or(gs) => stack.extend(gs.iter().rev()),
            }
        }
        out
    }

    pub fn vars(&self) -> Vec<Var> {
        let mut out: Vec<Var> = Vec::new();
        for a in self.atoms() {
            for v in a.vars() {
                if !out.contains(&v) {
                    out.push(v);
                }
            }
        }
        out
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Formula::Atom(a) => write!(f, "{a}"),
            Formula::Not(g) => write!(f, "¬({g})"),
            Formula::And(gs) | Formula::Or(gs) => {
                let (sep, unit) = if matches!(self, Formula::And(_)) { (" ∧ ", "true") } else { (" ∨ ", "false") };
                if gs.is_empty() {
                    return f.write_str(unit);
                }
                f.write_str("(")?;
                for (i, g) in gs.iter().enumerate() {
                    if i > 0 {
                        f.write_str(sep)?;
                    }
                    write!(f, "{g}")?;
                }
                f.write_str(")")
            }
        }
    }
}

/// A conjunction of atoms without duplicates.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Clause {
    atoms: Vec<Atom>,
}

impl Clause {
    pub fn new(atoms: impl IntoIterator<Item = Atom>) -> Self {
        let mut c = Clause::default();
        for a in atoms {
            c.push(a);
        }
        c
    }

    pub fn push(&mut self, a: Atom) {
        if !self.atoms.contains(&a) {
            self.atoms.push(a);
        }
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn into_atoms(self) -> Vec<Atom> {
        self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn relational(&self) -> impl Iterator<Item = &Atom> {
        self.atoms.iter().filter(|a| a.is_relational())
    }

    pub fn vars(&self) -> Vec<Var> {
        let mut out: Vec<Var> = Vec::new();
        for a in &self.atoms {
            for v in a.vars() {
                if !out.contains(&v) {
                    out.push(v);
                }
            }
        }
        out
    }
}

impl fmt::Display for Clause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.atoms.is_empty() {
            return f.write_str("true");
        }
        for (i, a) in self.atoms.iter().enumerate() {
            if i > 0 {
                f.write_str(" ∧ ")?;
            }
            write!(f, "{a}")?;
        }
        Ok(())
    }
}

/// Deterministic fresh names `_f1`, `_f2`, ... avoiding names in use.
#[derive(Clone, Debug, Default)]
pub struct FreshNames {
    next: usize,
    used: HashSet<Var>,
}

impl FreshNames {
    pub fn new(used: impl IntoIterator<Item = Var>) -> Self {
        FreshNames { next: 1, used: used.into_iter().collect() }
    }

    pub fn reserve(&mut self, v: &Var) {
        self.used.insert(v.clone());
    }

    pub fn fresh(&mut self) -> Var {
        loop {
            let v = var(&format!("_f{}", self.next));
            self.next += 1;
            if self.used.insert(v.clone()) {
                return v;
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FormulaError {
    #[error(transparent)]
    Syntax(#[from] SyntaxError),
    #[error("{pos}: undeclared variable `{name}`")]
    UndeclaredVariable { name: String, pos: Pos },
    #[error("{pos}: undeclared automaton `{name}`")]
    UndeclaredAutomaton { name: String, pos: Pos },
    #[error("{pos}: letter `{letter}` is not in the alphabet")]
    UndeclaredLetter { letter: String, pos: Pos },
    #[error("{pos}: negated non-invertible constraint")]
    NegatedNonInvertible { pos: Pos },
    #[error("negated non-invertible constraint `{0}`")]
    NegatedNonInvertibleAtom(String),
    #[error("{pos}: automaton `{name}` has {found} tapes, expected {expected}")]
    TapeCount { name: String, expected: usize, found: usize, pos: Pos },
    #[error("{pos}: invalid automaton `{name}`: {source}")]
    Automaton { name: String, pos: Pos, source: AutomatonError },
    #[error("variable `{0}` has no value")]
    MissingVariable(String),
}

/// A parsed input: alphabet, declarations, automata and assertions.
#[derive(Clone, Debug, Default)]
pub struct Problem {
    pub alphabet: Alphabet,
    /// User-declared string variables in declaration order.
    pub vars: Vec<Var>,
    /// Variables introduced for string literals, in creation order.
    pub hidden: Vec<Var>,
    /// Named automata in definition order, including literal automata.
    pub automata: Vec<NamedAut>,
    pub assertions: Vec<Formula>,
}

impl Problem {
    /// Conjunction of all assertions.
    pub fn formula(&self) -> Formula {
        if self.assertions.len() == 1 {
            self.assertions[0].clone()
        } else {
            Formula::And(self.assertions.clone())
        }
    }

    /// Declared then hidden variables.
    pub fn all_vars(&self) -> Vec<Var> {
        self.vars.iter().chain(self.hidden.iter()).cloned().collect()
    }

    pub fn automaton(&self, name: &str) -> Option<&NamedAut> {
        self.automata.iter().find(|a| &*a.name == name)
    }

    /// A fresh-name generator avoiding every name in the problem.
    pub fn fresh_names(&self) -> FreshNames {
        let mut used: BTreeSet<Var> = self.all_vars().into_iter().collect();
        used.extend(self.formula().vars());
        FreshNames::new(used)
    }
}

/// The automaton accepting exactly the word `letters`, named after it.
pub fn literal_automaton(letters: &[Symbol]) -> NamedAut {
    let name: Vec<String> = letters.iter().map(|s| s.to_string()).collect();
    NamedAut::new(format!("lit:{}", name.join(".")), Automaton::word(letters))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn arith_terms_are_canonical() {
        let x = var("x");
        let mut t = ArithTerm::length(&StrTerm::of(&["x", "y", "x"]));
        assert_eq!(t.coeffs.get(&x), Some(&2));
        t.add_coeff(x.clone(), -2);
        assert!(!t.coeffs.contains_key(&x));
        let s = ArithTerm::length(&StrTerm::of(&["x"])).substitute(&x, &[var("a"), var("b")]);
        assert_eq!(s.coeffs.len(), 2);
    }

    #[test]
    fn fresh_names_skip_used() {
        let mut f = FreshNames::new([var("_f1")]);
        assert_eq!(&*f.fresh(), "_f2");
        assert_eq!(&*f.fresh(), "_f3");
    }

    #[test]
    fn clause_dedups() {
        let a = Atom::eq(StrTerm::of(&["x"]), StrTerm::of(&["y"]));
        let c = Clause::new([a.clone(), a]);
        assert_eq!(c.len(), 1);
    }
}
