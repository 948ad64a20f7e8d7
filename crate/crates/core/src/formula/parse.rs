//! Reader for the parenthesized input format.

use std::collections::{HashMap, HashSet};

use crate::automata::{Automaton, Transition};
use crate::sexpr::{parse_all, Pos, SExpr, SyntaxError};
use crate::symbol::{Alphabet, Symbol};

use super::{
    literal_automaton, var, ArithAtom, ArithTerm, Atom, CmpOp, FormulaError, Formula, FreshNames, NamedAut,
    Problem, Relation, StrTerm, Var,
};

type Result<T> = std::result::Result<T, FormulaError>;

fn syntax(pos: Pos, msg: impl Into<String>) -> FormulaError {
    FormulaError::Syntax(SyntaxError::new(pos, msg))
}

struct Parser {
    problem: Problem,
    declared: HashSet<Var>,
    fresh: FreshNames,
    literal_atoms: Vec<Formula>,
}

/// Parses a complete input file.
pub fn parse(text: &str) -> Result<Problem> {
    let items = parse_all(text)?;

    let mut alphabet = Alphabet::default();
    let mut declared_alphabet = false;
    let mut names = Vec::new();
    for item in &items {
        match item.head() {
            Some("declare-alphabet") => {
                declared_alphabet = true;
                for l in &item.as_list().unwrap()[1..] {
                    let s = l.as_symbol().ok_or_else(|| syntax(l.pos(), "expected a letter"))?;
                    if s == "_" {
                        return Err(syntax(l.pos(), "`_` is reserved for ε"));
                    }
                    alphabet.insert(Symbol::base(s));
                }
            }
            Some("declare-str") => {
                for v in &item.as_list().unwrap()[1..] {
                    if let Some(s) = v.as_symbol() {
                        names.push(var(s));
                    }
                }
            }
            _ => {}
        }
    }
    if !declared_alphabet {
        infer_alphabet(&items, &mut alphabet);
    }

    let mut parser = Parser {
        problem: Problem { alphabet, ..Problem::default() },
        declared: HashSet::new(),
        fresh: FreshNames::new(names),
        literal_atoms: Vec::new(),
    };
    for item in &items {
        parser.command(item)?;
    }
    let literal_atoms = std::mem::take(&mut parser.literal_atoms);
    parser.problem.assertions.extend(literal_atoms);
    Ok(parser.problem)
}

/// Collects letters from automaton labels and string literals, in order of
/// first appearance, when no alphabet is declared.
fn infer_alphabet(items: &[SExpr], alphabet: &mut Alphabet) {
    fn literals(e: &SExpr, alphabet: &mut Alphabet) {
        match e {
            SExpr::Str(s, _) => {
                for c in s.chars() {
                    alphabet.insert(Symbol::base(&c.to_string()));
                }
            }
            SExpr::List(items, _) => items.iter().for_each(|i| literals(i, alphabet)),
            SExpr::Symbol(..) => {}
        }
    }
    for item in items {
        if item.head() == Some("define-aut") {
            let list = item.as_list().unwrap();
            let mut i = 0;
            while i < list.len() {
                if list[i].as_symbol() == Some(":trans") {
                    if let Some(trans) = list.get(i + 1).and_then(SExpr::as_list) {
                        for t in trans {
                            // the label is the middle element of (q (label) q')
                            if let Some(parts) = t.as_list() {
                                if parts.len() == 3 {
                                    walk_label(&parts[1], alphabet);
                                }
                            }
                        }
                    }
                }
                i += 1;
            }
        } else if item.head() == Some("assert") {
            literals(item, alphabet);
        }
    }

    fn walk_label(e: &SExpr, alphabet: &mut Alphabet) {
        match e {
            SExpr::Symbol(s, _) if s != "_" => {
                alphabet.insert(Symbol::base(s));
            }
            SExpr::List(items, _) => items.iter().for_each(|i| walk_label(i, alphabet)),
            _ => {}
        }
    }
}

impl Parser {
    fn command(&mut self, e: &SExpr) -> Result<()> {
        let list = e.as_list().ok_or_else(|| syntax(e.pos(), "expected a command"))?;
        match e.head() {
            Some("declare-alphabet") => Ok(()),
            Some("declare-str") => {
                if list.len() < 2 {
                    return Err(syntax(e.pos(), "declare-str needs a variable name"));
                }
                for v in &list[1..] {
                    let s = v.as_symbol().ok_or_else(|| syntax(v.pos(), "expected a variable name"))?;
                    let v = var(s);
                    if self.declared.insert(v.clone()) {
                        self.problem.vars.push(v);
                    }
                }
                Ok(())
            }
            Some("define-aut") => self.define_aut(list, e.pos()),
            Some("assert") => {
                if list.len() != 2 {
                    return Err(syntax(e.pos(), "assert takes exactly one formula"));
                }
                let f = self.formula(&list[1], true)?;
                self.problem.assertions.push(f);
                Ok(())
            }
            Some(other) => Err(syntax(e.pos(), format!("unknown command `{other}`"))),
            None => Err(syntax(e.pos(), "expected a command")),
        }
    }

    fn define_aut(&mut self, list: &[SExpr], pos: Pos) -> Result<()> {
        let name = list
            .get(1)
            .and_then(SExpr::as_symbol)
            .ok_or_else(|| syntax(pos, "define-aut needs a name"))?
            .to_string();
        let mut fields: HashMap<&str, &SExpr> = HashMap::new();
        let mut i = 2;
        while i < list.len() {
            let key = list[i]
                .as_symbol()
                .filter(|k| k.starts_with(':'))
                .ok_or_else(|| syntax(list[i].pos(), "expected a keyword"))?;
            let value = list.get(i + 1).ok_or_else(|| syntax(list[i].pos(), format!("missing value for {key}")))?;
            fields.insert(key, value);
            i += 2;
        }
        let field = |k: &str| fields.get(k).copied().ok_or_else(|| syntax(pos, format!("define-aut `{name}` lacks {k}")));

        let tapes_e = field(":tapes")?;
        let tapes: usize = tapes_e
            .as_symbol()
            .and_then(|s| s.parse().ok())
            .filter(|&k| k >= 1)
            .ok_or_else(|| syntax(tapes_e.pos(), "expected a positive tape count"))?;
        let states_e = field(":states")?;
        let states = states_e.as_list().ok_or_else(|| syntax(states_e.pos(), "expected a state list"))?;
        let mut index: HashMap<&str, usize> = HashMap::new();
        for s in states {
            let n = s.as_symbol().ok_or_else(|| syntax(s.pos(), "expected a state name"))?;
            let next = index.len();
            index.entry(n).or_insert(next);
        }
        let state = |e: &SExpr| -> Result<usize> {
            e.as_symbol()
                .and_then(|s| index.get(s).copied())
                .ok_or_else(|| syntax(e.pos(), format!("unknown state `{e}`")))
        };
        let state_list = |e: &SExpr| -> Result<Vec<usize>> {
            match e {
                SExpr::List(items, _) => items.iter().map(state).collect(),
                other => Ok(vec![state(other)?]),
            }
        };
        let initial = state_list(field(":init")?)?;
        let accepting = state_list(field(":final")?)?;
        let mut transitions = Vec::new();
        if let Some(trans) = fields.get(":trans") {
            let trans = trans.as_list().ok_or_else(|| syntax(trans.pos(), "expected a transition list"))?;
            for t in trans {
                let parts = t
                    .as_list()
                    .filter(|p| p.len() == 3)
                    .ok_or_else(|| syntax(t.pos(), "expected (state label state)"))?;
                let label_items: Vec<&SExpr> = match &parts[1] {
                    SExpr::List(items, _) => items.iter().collect(),
                    other => vec![other],
                };
                if label_items.len() != tapes {
                    return Err(syntax(parts[1].pos(), format!("label must have {tapes} components")));
                }
                let mut label = Vec::with_capacity(tapes);
                for l in label_items {
                    let s = l.as_symbol().ok_or_else(|| syntax(l.pos(), "expected a letter or `_`"))?;
                    if s == "_" {
                        label.push(None);
                    } else {
                        let sym = Symbol::base(s);
                        if !self.problem.alphabet.contains(&sym) {
                            return Err(FormulaError::UndeclaredLetter { letter: s.to_string(), pos: l.pos() });
                        }
                        label.push(Some(sym));
                    }
                }
                transitions.push(Transition { from: state(&parts[0])?, label, to: state(&parts[2])? });
            }
        }
        let lp = match fields.get(":length-preserving") {
            None => transitions.iter().all(|t| t.label.iter().all(Option::is_some)),
            Some(e) => match e.as_symbol() {
                Some("true") => true,
                Some("false") => false,
                _ => return Err(syntax(e.pos(), "expected true or false")),
            },
        };
        let aut = Automaton::new(tapes, index.len(), initial, accepting, transitions, lp)
            .map_err(|source| FormulaError::Automaton { name: name.clone(), pos, source })?;
        if self.problem.automaton(&name).is_some() {
            return Err(syntax(pos, format!("automaton `{name}` defined twice")));
        }
        self.problem.automata.push(NamedAut::new(&name, aut));
        Ok(())
    }

    fn automaton(&self, e: &SExpr, tapes: usize) -> Result<NamedAut> {
        let name = e.as_symbol().ok_or_else(|| syntax(e.pos(), "expected an automaton name"))?;
        let aut = self
            .problem
            .automaton(name)
            .ok_or_else(|| FormulaError::UndeclaredAutomaton { name: name.to_string(), pos: e.pos() })?;
        if aut.aut.tapes() != tapes {
            return Err(FormulaError::TapeCount {
                name: name.to_string(),
                expected: tapes,
                found: aut.aut.tapes(),
                pos: e.pos(),
            });
        }
        Ok(aut.clone())
    }

    fn formula(&mut self, e: &SExpr, positive: bool) -> Result<Formula> {
        if let Some(s) = e.as_symbol() {
            return match s {
                "true" => Ok(Formula::tt()),
                "false" => Ok(Formula::ff()),
                _ => Err(syntax(e.pos(), format!("expected a formula, found `{s}`"))),
            };
        }
        let list = e.as_list().ok_or_else(|| syntax(e.pos(), "expected a formula"))?;
        let head = e.head().ok_or_else(|| syntax(e.pos(), "expected an operator"))?;
        let args = &list[1..];
        let arity = |n: usize| -> Result<()> {
            if args.len() == n {
                Ok(())
            } else {
                Err(syntax(e.pos(), format!("`{head}` takes {n} arguments")))
            }
        };
        match head {
            "and" | "or" => {
                let gs = args.iter().map(|a| self.formula(a, positive)).collect::<Result<Vec<_>>>()?;
                Ok(if head == "and" { Formula::And(gs) } else { Formula::Or(gs) })
            }
            "not" => {
                arity(1)?;
                Ok(Formula::not(self.formula(&args[0], !positive)?))
            }
            "=" => {
                arity(2)?;
                let lhs = self.term(&args[0])?;
                let rhs = self.term(&args[1])?;
                Ok(Formula::Atom(Atom::eq(lhs, rhs)))
            }
            "in" => {
                arity(2)?;
                let term = self.term(&args[0])?;
                let aut = self.automaton(&args[1], 1)?;
                Ok(Formula::Atom(Atom::member(term, aut)))
            }
            "rel" => {
                arity(3)?;
                let aut = self.automaton(&args[0], 2)?;
                if !positive && !aut.aut.is_length_preserving() {
                    return Err(FormulaError::NegatedNonInvertible { pos: e.pos() });
                }
                let lhs = self.term(&args[1])?;
                let rhs = self.term(&args[2])?;
                Ok(Formula::Atom(Atom::rel(lhs, rhs, Relation::Aut(aut))))
            }
            "<=" | "<" | "=len" => {
                arity(2)?;
                let lhs = self.aterm(&args[0])?;
                let rhs = self.aterm(&args[1])?;
                let op = match head {
                    "<=" => CmpOp::Le,
                    "<" => CmpOp::Lt,
                    _ => CmpOp::Eq,
                };
                Ok(Formula::Atom(Atom::Arith(ArithAtom::new(lhs, op, rhs))))
            }
            other => Err(syntax(e.pos(), format!("unknown operator `{other}`"))),
        }
    }

    fn term(&mut self, e: &SExpr) -> Result<StrTerm> {
        match e {
            SExpr::Symbol(s, pos) => {
                let v = var(s);
                if !self.declared.contains(&v) {
                    return Err(FormulaError::UndeclaredVariable { name: s.clone(), pos: *pos });
                }
                Ok(StrTerm::single(v))
            }
            SExpr::Str(s, pos) => {
                if s.is_empty() {
                    return Ok(StrTerm::default());
                }
                let letters = self.split_literal(s, *pos)?;
                let v = self.fresh.fresh();
                let aut = match self.problem.automata.iter().find(|a| a.name == literal_automaton(&letters).name) {
                    Some(a) => a.clone(),
                    None => {
                        let a = literal_automaton(&letters);
                        self.problem.automata.push(a.clone());
                        a
                    }
                };
                self.problem.hidden.push(v.clone());
                self.declared.insert(v.clone());
                self.literal_atoms
                    .push(Formula::Atom(Atom::member(StrTerm::single(v.clone()), aut)));
                Ok(StrTerm::single(v))
            }
            SExpr::List(items, pos) => {
                if e.head() != Some("concat") {
                    return Err(syntax(*pos, "expected a string term"));
                }
                let mut out = Vec::new();
                for it in &items[1..] {
                    out.extend(self.term(it)?.0);
                }
                Ok(StrTerm(out))
            }
        }
    }

    /// Splits a literal into declared letters, longest match first.
    fn split_literal(&self, s: &str, pos: Pos) -> Result<Vec<Symbol>> {
        let mut out = Vec::new();
        let mut rest = s;
        while !rest.is_empty() {
            let best = self
                .problem
                .alphabet
                .letters()
                .iter()
                .filter_map(|l| match l {
                    Symbol::Base(name) if rest.starts_with(&**name) => Some((name.len(), l.clone())),
                    _ => None,
                })
                .max_by_key(|(n, _)| *n);
            match best {
                Some((n, sym)) => {
                    out.push(sym);
                    rest = &rest[n..];
                }
                None => {
                    let c = rest.chars().next().unwrap();
                    return Err(FormulaError::UndeclaredLetter { letter: c.to_string(), pos });
                }
            }
        }
        Ok(out)
    }

    fn aterm(&mut self, e: &SExpr) -> Result<ArithTerm> {
        if let Some(s) = e.as_symbol() {
            return s
                .parse::<i64>()
                .map(ArithTerm::constant)
                .map_err(|_| syntax(e.pos(), format!("expected an integer, found `{s}`")));
        }
        let list = e.as_list().ok_or_else(|| syntax(e.pos(), "expected an arithmetic term"))?;
        match e.head() {
            Some("len") if list.len() == 2 => Ok(ArithTerm::length(&self.term(&list[1])?)),
            Some("+") => {
                let mut out = ArithTerm::default();
                for a in &list[1..] {
                    out = out.plus(&self.aterm(a)?);
                }
                Ok(out)
            }
            Some("*") if list.len() == 3 => {
                let k: i64 = list[1]
                    .as_symbol()
                    .and_then(|s| s.parse().ok())
                    .ok_or_else(|| syntax(list[1].pos(), "expected an integer factor"))?;
                Ok(self.aterm(&list[2])?.scale(k))
            }
            _ => Err(syntax(e.pos(), "expected an arithmetic term")),
        }
    }
}
