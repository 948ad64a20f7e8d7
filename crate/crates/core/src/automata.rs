//! Nondeterministic n-tape automata over `(Σ ∪ {ε})^n`.
//!
//! A single type covers finite automata (one tape), transducers (two tapes)
//! and the wider products built while synchronizing constraints. Tape and
//! state indices are 0-based throughout.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet, VecDeque};

use thiserror::Error;

use crate::symbol::{Alphabet, Symbol, Word};

pub type StateId = usize;

/// One component per tape; `None` is ε on that tape.
pub type Label = Vec<Option<Symbol>>;

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Transition {
    pub from: StateId,
    pub label: Label,
    pub to: StateId,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AutomatonError {
    #[error("arity mismatch: expected {expected} tapes, found {found}")]
    ArityMismatch { expected: usize, found: usize },
    #[error("label width {found} does not match {expected} tapes")]
    LabelWidth { expected: usize, found: usize },
    #[error("state {0} out of range")]
    StateOutOfRange(StateId),
    #[error("tape {tape} out of range for a {tapes}-tape automaton")]
    TapeOutOfRange { tape: usize, tapes: usize },
    #[error("operation requires a length-preserving automaton")]
    NotLengthPreserving,
    #[error("automaton flagged length-preserving has an ε component")]
    EpsilonInLengthPreserving,
    #[error("operation requires a single-tape automaton, got {0} tapes")]
    NotSingleTape(usize),
    #[error("invalid tape permutation {0:?}")]
    InvalidPermutation(Vec<usize>),
    #[error("cannot cylindrify {tapes} tapes down to {requested}")]
    TooFewTapes { requested: usize, tapes: usize },
}

pub type Result<T> = std::result::Result<T, AutomatonError>;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Automaton {
    tapes: usize,
    states: usize,
    initial: Vec<StateId>,
    accepting: Vec<StateId>,
    transitions: Vec<Transition>,
    length_preserving: bool,
}

impl Automaton {
    pub fn new(
        tapes: usize,
        states: usize,
        initial: impl IntoIterator<Item = StateId>,
        accepting: impl IntoIterator<Item = StateId>,
        transitions: impl IntoIterator<Item = Transition>,
        length_preserving: bool,
    ) -> Result<Self> {
        let mut initial: Vec<StateId> = initial.into_iter().collect();
        let mut accepting: Vec<StateId> = accepting.into_iter().collect();
        let mut transitions: Vec<Transition> = transitions.into_iter().collect();
        for &q in initial.iter().chain(accepting.iter()) {
            if q >= states {
                return Err(AutomatonError::StateOutOfRange(q));
            }
        }
        for t in &transitions {
            if t.from >= states {
                return Err(AutomatonError::StateOutOfRange(t.from));
            }
            if t.to >= states {
                return Err(AutomatonError::StateOutOfRange(t.to));
            }
            if t.label.len() != tapes {
                return Err(AutomatonError::LabelWidth {
                    expected: tapes,
                    found: t.label.len(),
                });
            }
            if length_preserving && t.label.iter().any(Option::is_none) {
                return Err(AutomatonError::EpsilonInLengthPreserving);
            }
        }
        initial.sort_unstable();
        initial.dedup();
        accepting.sort_unstable();
        accepting.dedup();
        transitions.sort();
        transitions.dedup();
        Ok(Automaton {
            tapes,
            states,
            initial,
            accepting,
            transitions,
            length_preserving,
        })
    }

    /// Internal constructor for results of operations known to be well formed.
    fn build(
        tapes: usize,
        states: usize,
        initial: Vec<StateId>,
        accepting: Vec<StateId>,
        transitions: Vec<Transition>,
        length_preserving: bool,
    ) -> Self {
        Self::new(tapes, states, initial, accepting, transitions, length_preserving)
            .expect("automaton construction invariant")
    }

    pub fn tapes(&self) -> usize {
        self.tapes
    }

    pub fn num_states(&self) -> usize {
        self.states
    }

    pub fn initial(&self) -> &[StateId] {
        &self.initial
    }

    pub fn accepting(&self) -> &[StateId] {
        &self.accepting
    }

    pub fn transitions(&self) -> &[Transition] {
        &self.transitions
    }

    pub fn is_length_preserving(&self) -> bool {
        self.length_preserving
    }

    pub fn is_initial(&self, q: StateId) -> bool {
        self.initial.binary_search(&q).is_ok()
    }

    pub fn is_accepting(&self, q: StateId) -> bool {
        self.accepting.binary_search(&q).is_ok()
    }

    /// Distinct labels used on transitions.
    pub fn labels(&self) -> BTreeSet<Label> {
        self.transitions.iter().map(|t| t.label.clone()).collect()
    }

    /// Letters occurring on tape `tape`.
    pub fn letters_on_tape(&self, tape: usize) -> BTreeSet<Symbol> {
        self.transitions
            .iter()
            .filter_map(|t| t.label[tape].clone())
            .collect()
    }

    fn outgoing(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.states];
        for (i, t) in self.transitions.iter().enumerate() {
            out[t.from].push(i);
        }
        out
    }

    // ----- constructors -------------------------------------------------

    /// The empty relation (no states at all).
    pub fn empty(tapes: usize) -> Self {
        Self::build(tapes, 0, vec![], vec![], vec![], true)
    }

    /// Accepts exactly the tuple of empty words.
    pub fn epsilon(tapes: usize) -> Self {
        Self::build(tapes, 1, vec![0], vec![0], vec![], true)
    }

    /// `(Σ*)^tapes`.
    pub fn universal(tapes: usize, alphabet: &Alphabet) -> Self {
        let mut trans = Vec::new();
        for t in 0..tapes {
            for a in alphabet.letters() {
                let mut label = vec![None; tapes];
                label[t] = Some(a.clone());
                trans.push(Transition { from: 0, label, to: 0 });
            }
        }
        Self::build(tapes, 1, vec![0], vec![0], trans, tapes <= 1)
    }

    /// The single word `w` on one tape.
    pub fn word(w: &[Symbol]) -> Self {
        let trans = w
            .iter()
            .enumerate()
            .map(|(i, a)| Transition {
                from: i,
                label: vec![Some(a.clone())],
                to: i + 1,
            })
            .collect();
        Self::build(1, w.len() + 1, vec![0], vec![w.len()], trans, true)
    }

    /// The identity relation on `Σ*`, used for word equations.
    pub fn identity(alphabet: &Alphabet) -> Self {
        let trans = alphabet
            .letters()
            .iter()
            .map(|a| Transition {
                from: 0,
                label: vec![Some(a.clone()), Some(a.clone())],
                to: 0,
            })
            .collect();
        Self::build(2, 1, vec![0], vec![0], trans, true)
    }

    /// Pairs of equal-length words differing at some aligned position.
    pub fn disequality(alphabet: &Alphabet) -> Self {
        let mut trans = Vec::new();
        for a in alphabet.letters() {
            for b in alphabet.letters() {
                let label = vec![Some(a.clone()), Some(b.clone())];
                if a == b {
                    trans.push(Transition { from: 0, label: label.clone(), to: 0 });
                } else {
                    trans.push(Transition { from: 0, label: label.clone(), to: 1 });
                }
                trans.push(Transition { from: 1, label, to: 1 });
            }
        }
        Self::build(2, 2, vec![0], vec![1], trans, true)
    }

    /// The projection transducer accepting `(w_j, (w_1..w_k))` where the
    /// second tape is spelled with the given tuple letters.
    pub fn projection(component: usize, tuple_letters: &[Symbol]) -> Self {
        let trans = tuple_letters
            .iter()
            .map(|t| {
                let parts = t.components().expect("projection needs tuple letters");
                Transition {
                    from: 0,
                    label: vec![Some(parts[component].clone()), Some(t.clone())],
                    to: 0,
                }
            })
            .collect();
        Self::build(2, 1, vec![0], vec![0], trans, true)
    }

    // ----- queries --------------------------------------------------------

    /// Membership of a word tuple in the recognized relation.
    pub fn accepts(&self, tuple: &[Word]) -> Result<bool> {
        if tuple.len() != self.tapes {
            return Err(AutomatonError::ArityMismatch {
                expected: self.tapes,
                found: tuple.len(),
            });
        }
        let out = self.outgoing();
        let mut seen: HashSet<(StateId, Vec<usize>)> = HashSet::new();
        let mut queue = VecDeque::new();
        for &q in &self.initial {
            let cfg = (q, vec![0; self.tapes]);
            if seen.insert(cfg.clone()) {
                queue.push_back(cfg);
            }
        }
        while let Some((q, pos)) = queue.pop_front() {
            if self.is_accepting(q) && pos.iter().zip(tuple).all(|(p, w)| *p == w.len()) {
                return Ok(true);
            }
            'trans: for &ti in &out[q] {
                let t = &self.transitions[ti];
                let mut next = pos.clone();
                for (k, c) in t.label.iter().enumerate() {
                    if let Some(c) = c {
                        if next[k] < tuple[k].len() && &tuple[k][next[k]] == c {
                            next[k] += 1;
                        } else {
                            continue 'trans;
                        }
                    }
                }
                let cfg = (t.to, next);
                if seen.insert(cfg.clone()) {
                    queue.push_back(cfg);
                }
            }
        }
        Ok(false)
    }

    fn reachable_from(&self, starts: &[StateId], forward: bool) -> Vec<bool> {
        let mut adj = vec![Vec::new(); self.states];
        for t in &self.transitions {
            if forward {
                adj[t.from].push(t.to);
            } else {
                adj[t.to].push(t.from);
            }
        }
        let mut seen = vec![false; self.states];
        let mut stack: Vec<StateId> = starts.to_vec();
        for &s in starts {
            seen[s] = true;
        }
        while let Some(q) = stack.pop() {
            for &r in &adj[q] {
                if !seen[r] {
                    seen[r] = true;
                    stack.push(r);
                }
            }
        }
        seen
    }

    /// True iff no accepting state is reachable from an initial state.
    pub fn is_empty(&self) -> bool {
        let reach = self.reachable_from(&self.initial, true);
        !self.accepting.iter().any(|&q| reach[q])
    }

    /// All accepted tuples whose components have length at most `max_len`.
    pub fn enumerate(&self, max_len: usize) -> BTreeSet<Vec<Word>> {
        let out = self.outgoing();
        let mut result = BTreeSet::new();
        let mut seen: HashSet<(StateId, Vec<Word>)> = HashSet::new();
        let mut stack = Vec::new();
        for &q in &self.initial {
            let cfg = (q, vec![Vec::new(); self.tapes]);
            if seen.insert(cfg.clone()) {
                stack.push(cfg);
            }
        }
        while let Some((q, words)) = stack.pop() {
            if self.is_accepting(q) {
                result.insert(words.clone());
            }
            'trans: for &ti in &out[q] {
                let t = &self.transitions[ti];
                let mut next = words.clone();
                for (k, c) in t.label.iter().enumerate() {
                    if let Some(c) = c {
                        if next[k].len() >= max_len {
                            continue 'trans;
                        }
                        next[k].push(c.clone());
                    }
                }
                let cfg = (t.to, next);
                if seen.insert(cfg.clone()) {
                    stack.push(cfg);
                }
            }
        }
        result
    }

    /// A shortest accepting run (by transition count) as transition indices.
    pub fn shortest_run(&self) -> Option<Vec<usize>> {
        let out = self.outgoing();
        let mut pred: Vec<Option<(StateId, usize)>> = vec![None; self.states];
        let mut seen = vec![false; self.states];
        let mut queue = VecDeque::new();
        for &q in &self.initial {
            seen[q] = true;
            queue.push_back(q);
        }
        while let Some(q) = queue.pop_front() {
            if self.is_accepting(q) {
                let mut path = Vec::new();
                let mut cur = q;
                while let Some((p, ti)) = pred[cur] {
                    path.push(ti);
                    cur = p;
                }
                path.reverse();
                return Some(path);
            }
            for &ti in &out[q] {
                let r = self.transitions[ti].to;
                if !seen[r] {
                    seen[r] = true;
                    pred[r] = Some((q, ti));
                    queue.push_back(r);
                }
            }
        }
        None
    }

    /// Reads the word tuple spelled by a sequence of transitions.
    pub fn read_run(&self, run: &[usize]) -> Vec<Word> {
        let mut words = vec![Vec::new(); self.tapes];
        for &ti in run {
            for (k, c) in self.transitions[ti].label.iter().enumerate() {
                if let Some(c) = c {
                    words[k].push(c.clone());
                }
            }
        }
        words
    }

    // ----- structural operations ----------------------------------------

    /// Removes states that are unreachable or cannot reach acceptance.
    pub fn trim(&self) -> Self {
        let fwd = self.reachable_from(&self.initial, true);
        let bwd = self.reachable_from(&self.accepting, false);
        let mut map = vec![usize::MAX; self.states];
        let mut n = 0;
        for q in 0..self.states {
            if fwd[q] && bwd[q] {
                map[q] = n;
                n += 1;
            }
        }
        let keep = |q: StateId| map[q] != usize::MAX;
        Self::build(
            self.tapes,
            n,
            self.initial.iter().filter(|&&q| keep(q)).map(|&q| map[q]).collect(),
            self.accepting.iter().filter(|&&q| keep(q)).map(|&q| map[q]).collect(),
            self.transitions
                .iter()
                .filter(|t| keep(t.from) && keep(t.to))
                .map(|t| Transition {
                    from: map[t.from],
                    label: t.label.clone(),
                    to: map[t.to],
                })
                .collect(),
            self.length_preserving,
        )
    }

    pub fn with_initial(&self, initial: &[StateId]) -> Self {
        let mut a = self.clone();
        a.initial = initial.to_vec();
        a.initial.sort_unstable();
        a
    }

    pub fn with_accepting(&self, accepting: &[StateId]) -> Self {
        let mut a = self.clone();
        a.accepting = accepting.to_vec();
        a.accepting.sort_unstable();
        a
    }

    /// For every state `q`, the pair `(T_q, qT)`: the automaton with its
    /// accepting states replaced by `{q}`, and with its initial states
    /// replaced by `{q}`. Every accepted tuple factors through some `q`.
    pub fn split_at_states(&self) -> Vec<(Automaton, Automaton)> {
        (0..self.states)
            .map(|q| (self.with_accepting(&[q]), self.with_initial(&[q])))
            .collect()
    }

    /// Synchronous product of two length-preserving automata.
    pub fn intersect_lp(&self, other: &Automaton) -> Result<Self> {
        if self.tapes != other.tapes {
            return Err(AutomatonError::ArityMismatch {
                expected: self.tapes,
                found: other.tapes,
            });
        }
        if !self.length_preserving || !other.length_preserving {
            return Err(AutomatonError::NotLengthPreserving);
        }
        let mut by_label: HashMap<StateId, BTreeMap<&Label, Vec<StateId>>> = HashMap::new();
        for t in &other.transitions {
            by_label
                .entry(t.from)
                .or_default()
                .entry(&t.label)
                .or_default()
                .push(t.to);
        }
        let out_a = self.outgoing();
        let mut product = ProductBuilder::default();
        for &p in &self.initial {
            for &q in &other.initial {
                product.state((p, q));
            }
        }
        let initial: Vec<StateId> = (0..product.len()).collect();
        let mut trans = Vec::new();
        let mut i = 0;
        while i < product.len() {
            let (p, q) = product.pairs[i];
            for &ti in &out_a[p] {
                let t = &self.transitions[ti];
                if let Some(targets) = by_label.get(&q).and_then(|m| m.get(&t.label)) {
                    for &q2 in targets {
                        let to = product.state((t.to, q2));
                        trans.push(Transition { from: i, label: t.label.clone(), to });
                    }
                }
            }
            i += 1;
        }
        let accepting = product
            .pairs
            .iter()
            .enumerate()
            .filter(|(_, (p, q))| self.is_accepting(*p) && other.is_accepting(*q))
            .map(|(i, _)| i)
            .collect();
        Ok(Self::build(self.tapes, product.len(), initial, accepting, trans, true).trim())
    }

    fn determinize_complement(&self, letters: &[Label], length_preserving: bool) -> Self {
        let is_eps = |l: &Label| l.iter().all(Option::is_none);
        let out = self.outgoing();
        let closure = |set: &BTreeSet<StateId>| -> BTreeSet<StateId> {
            let mut result = set.clone();
            let mut stack: Vec<StateId> = set.iter().copied().collect();
            while let Some(q) = stack.pop() {
                for &ti in &out[q] {
                    let t = &self.transitions[ti];
                    if is_eps(&t.label) && result.insert(t.to) {
                        stack.push(t.to);
                    }
                }
            }
            result
        };
        let start = closure(&self.initial.iter().copied().collect());
        let mut index: HashMap<BTreeSet<StateId>, StateId> = HashMap::new();
        let mut subsets = vec![start.clone()];
        index.insert(start, 0);
        let mut trans = Vec::new();
        let mut i = 0;
        while i < subsets.len() {
            let current = subsets[i].clone();
            for letter in letters {
                let mut next = BTreeSet::new();
                for &q in &current {
                    for &ti in &out[q] {
                        let t = &self.transitions[ti];
                        if &t.label == letter {
                            next.insert(t.to);
                        }
                    }
                }
                let next = closure(&next);
                let to = match index.get(&next) {
                    Some(&j) => j,
                    None => {
                        let j = subsets.len();
                        index.insert(next.clone(), j);
                        subsets.push(next);
                        j
                    }
                };
                trans.push(Transition { from: i, label: letter.clone(), to });
            }
            i += 1;
        }
        let accepting = subsets
            .iter()
            .enumerate()
            .filter(|(_, s)| !s.iter().any(|&q| self.is_accepting(q)))
            .map(|(i, _)| i)
            .collect();
        Self::build(self.tapes, subsets.len(), vec![0], accepting, trans, length_preserving)
    }

    /// Complement of a one-tape automaton relative to `Σ*`: ε-removal and
    /// subset construction, completed, with accepting states flipped.
    pub fn complement1(&self, alphabet: &Alphabet) -> Result<Self> {
        if self.tapes != 1 {
            return Err(AutomatonError::NotSingleTape(self.tapes));
        }
        let letters: Vec<Label> = alphabet.letters().iter().map(|a| vec![Some(a.clone())]).collect();
        Ok(self.determinize_complement(&letters, true))
    }

    /// Complement of a length-preserving automaton within the equal-length
    /// tuples over `Σ`, i.e. as a language over the letters of `Σ^n`.
    pub fn complement_lp(&self, alphabet: &Alphabet) -> Result<Self> {
        if !self.length_preserving {
            return Err(AutomatonError::NotLengthPreserving);
        }
        let mut letters: Vec<Label> = vec![vec![]];
        for _ in 0..self.tapes {
            letters = letters
                .into_iter()
                .flat_map(|prefix| {
                    alphabet.letters().iter().map(move |a| {
                        let mut l = prefix.clone();
                        l.push(Some(a.clone()));
                        l
                    })
                })
                .collect();
        }
        Ok(self.determinize_complement(&letters, true))
    }

    /// Composition synchronizing tape `i` of `self` with tape `j` of `other`.
    ///
    /// The result has `n + m - 1` tapes: the tapes of `self` followed by the
    /// tapes of `other` without `j`. Either side moves alone when its label
    /// has ε on the shared tape; otherwise both consume the same letter.
    pub fn join(&self, i: usize, other: &Automaton, j: usize) -> Result<Self> {
        if i >= self.tapes {
            return Err(AutomatonError::TapeOutOfRange { tape: i, tapes: self.tapes });
        }
        if j >= other.tapes {
            return Err(AutomatonError::TapeOutOfRange { tape: j, tapes: other.tapes });
        }
        let n = self.tapes;
        let m = other.tapes;
        let rest = |label: &Label| -> Vec<Option<Symbol>> {
            label
                .iter()
                .enumerate()
                .filter(|&(k, _)| k != j)
                .map(|(_, c)| c.clone())
                .collect()
        };
        let out_a = self.outgoing();
        let out_b = other.outgoing();
        let mut product = ProductBuilder::default();
        for &p in &self.initial {
            for &q in &other.initial {
                product.state((p, q));
            }
        }
        let initial: Vec<StateId> = (0..product.len()).collect();
        let mut trans = Vec::new();
        let mut s = 0;
        while s < product.len() {
            let (p, q) = product.pairs[s];
            for &ta in &out_a[p] {
                let ta = &self.transitions[ta];
                match &ta.label[i] {
                    None => {
                        let mut label = ta.label.clone();
                        label.extend(std::iter::repeat_n(None, m - 1));
                        let to = product.state((ta.to, q));
                        trans.push(Transition { from: s, label, to });
                    }
                    Some(c) => {
                        for &tb in &out_b[q] {
                            let tb = &other.transitions[tb];
                            if tb.label[j].as_ref() == Some(c) {
                                let mut label = ta.label.clone();
                                label.extend(rest(&tb.label));
                                let to = product.state((ta.to, tb.to));
                                trans.push(Transition { from: s, label, to });
                            }
                        }
                    }
                }
            }
            for &tb in &out_b[q] {
                let tb = &other.transitions[tb];
                if tb.label[j].is_none() {
                    let mut label = vec![None; n];
                    label.extend(rest(&tb.label));
                    let to = product.state((p, tb.to));
                    trans.push(Transition { from: s, label, to });
                }
            }
            s += 1;
        }
        let accepting = product
            .pairs
            .iter()
            .enumerate()
            .filter(|(_, (p, q))| self.is_accepting(*p) && other.is_accepting(*q))
            .map(|(i, _)| i)
            .collect();
        let lp = self.length_preserving && other.length_preserving;
        Ok(Self::build(n + m - 1, product.len(), initial, accepting, trans, lp).trim())
    }

    /// Cartesian product of relations: tapes of `self` then tapes of `other`,
    /// no synchronization. `self` runs to completion, then `other`.
    pub fn loose_product(&self, other: &Automaton) -> Self {
        let n = self.tapes;
        let m = other.tapes;
        let off = self.states;
        let mut trans: Vec<Transition> = self
            .transitions
            .iter()
            .map(|t| {
                let mut label = t.label.clone();
                label.extend(std::iter::repeat_n(None, m));
                Transition { from: t.from, label, to: t.to }
            })
            .collect();
        let lift_b = |label: &Label| {
            let mut l: Label = vec![None; n];
            l.extend(label.iter().cloned());
            l
        };
        for t in &other.transitions {
            trans.push(Transition {
                from: t.from + off,
                label: lift_b(&t.label),
                to: t.to + off,
            });
            if other.is_initial(t.from) {
                for &f in &self.accepting {
                    trans.push(Transition { from: f, label: lift_b(&t.label), to: t.to + off });
                }
            }
        }
        let mut accepting: Vec<StateId> = other.accepting.iter().map(|q| q + off).collect();
        if other.initial.iter().any(|&q| other.is_accepting(q)) {
            accepting.extend(self.accepting.iter().copied());
        }
        let lp = (n == 0 || m == 0) && self.length_preserving && other.length_preserving;
        Self::build(n + m, self.states + other.states, self.initial.clone(), accepting, trans, lp)
            .trim()
    }

    /// Reorders tapes: tape `k` of the result is tape `sigma[k]` of `self`.
    pub fn permute(&self, sigma: &[usize]) -> Result<Self> {
        let mut seen = vec![false; self.tapes];
        if sigma.len() != self.tapes {
            return Err(AutomatonError::InvalidPermutation(sigma.to_vec()));
        }
        for &s in sigma {
            if s >= self.tapes || seen[s] {
                return Err(AutomatonError::InvalidPermutation(sigma.to_vec()));
            }
            seen[s] = true;
        }
        let trans = self
            .transitions
            .iter()
            .map(|t| Transition {
                from: t.from,
                label: sigma.iter().map(|&s| t.label[s].clone()).collect(),
                to: t.to,
            })
            .collect();
        Ok(Self::build(
            self.tapes,
            self.states,
            self.initial.clone(),
            self.accepting.clone(),
            trans,
            self.length_preserving,
        ))
    }

    /// Extends to `k` tapes whose extra components range freely over `Σ*`,
    /// independently of the original tapes.
    pub fn cylindrify(&self, k: usize, alphabet: &Alphabet) -> Result<Self> {
        if k < self.tapes {
            return Err(AutomatonError::TooFewTapes { requested: k, tapes: self.tapes });
        }
        if k == self.tapes {
            return Ok(self.clone());
        }
        let mut trans: Vec<Transition> = self
            .transitions
            .iter()
            .map(|t| {
                let mut label = t.label.clone();
                label.resize(k, None);
                Transition { from: t.from, label, to: t.to }
            })
            .collect();
        for q in 0..self.states {
            for tape in self.tapes..k {
                for a in alphabet.letters() {
                    let mut label = vec![None; k];
                    label[tape] = Some(a.clone());
                    trans.push(Transition { from: q, label, to: q });
                }
            }
        }
        Ok(Self::build(k, self.states, self.initial.clone(), self.accepting.clone(), trans, false))
    }

    /// Length-preserving cylindrification: every transition is extended by
    /// every choice of letters on the new tapes, so all components keep
    /// equal length.
    pub fn cylindrify_lp(&self, k: usize, alphabet: &Alphabet) -> Result<Self> {
        if !self.length_preserving {
            return Err(AutomatonError::NotLengthPreserving);
        }
        if k < self.tapes {
            return Err(AutomatonError::TooFewTapes { requested: k, tapes: self.tapes });
        }
        let mut trans = Vec::new();
        for t in &self.transitions {
            let mut labels = vec![t.label.clone()];
            for _ in self.tapes..k {
                labels = labels
                    .into_iter()
                    .flat_map(|l| {
                        alphabet.letters().iter().map(move |a| {
                            let mut l2 = l.clone();
                            l2.push(Some(a.clone()));
                            l2
                        })
                    })
                    .collect();
            }
            trans.extend(labels.into_iter().map(|label| Transition { from: t.from, label, to: t.to }));
        }
        Ok(Self::build(k, self.states, self.initial.clone(), self.accepting.clone(), trans, true))
    }

    /// Merges tape `j` into tape `i` of a length-preserving automaton: keeps
    /// only transitions agreeing on both and drops tape `j`.
    pub fn identify_tapes(&self, i: usize, j: usize) -> Result<Self> {
        if !self.length_preserving {
            return Err(AutomatonError::NotLengthPreserving);
        }
        for t in [i, j] {
            if t >= self.tapes {
                return Err(AutomatonError::TapeOutOfRange { tape: t, tapes: self.tapes });
            }
        }
        if i == j {
            return Ok(self.clone());
        }
        let trans = self
            .transitions
            .iter()
            .filter(|t| t.label[i] == t.label[j])
            .map(|t| {
                let mut label = t.label.clone();
                label.remove(j);
                Transition { from: t.from, label, to: t.to }
            })
            .collect();
        Ok(Self::build(
            self.tapes - 1,
            self.states,
            self.initial.clone(),
            self.accepting.clone(),
            trans,
            true,
        )
        .trim())
    }

    /// Lifts a length-preserving automaton to `k` tapes, placing source tape
    /// `t` at target tape `targets[t]`. Sources sharing a target are
    /// identified; unmentioned targets are free but of equal length.
    pub fn lift_lp(&self, k: usize, targets: &[usize], alphabet: &Alphabet) -> Result<Self> {
        if targets.len() != self.tapes {
            return Err(AutomatonError::ArityMismatch { expected: self.tapes, found: targets.len() });
        }
        if let Some(&bad) = targets.iter().find(|&&t| t >= k) {
            return Err(AutomatonError::TapeOutOfRange { tape: bad, tapes: k });
        }
        let mut aut = self.clone();
        let mut targets = targets.to_vec();
        // collapse sources with a common target
        let mut a = 0;
        while a < targets.len() {
            let mut b = a + 1;
            while b < targets.len() {
                if targets[a] == targets[b] {
                    aut = aut.identify_tapes(a, b)?;
                    targets.remove(b);
                } else {
                    b += 1;
                }
            }
            a += 1;
        }
        let n = targets.len();
        let aut = aut.cylindrify_lp(k, alphabet)?;
        let mut sigma = vec![usize::MAX; k];
        for (src, &tgt) in targets.iter().enumerate() {
            sigma[tgt] = src;
        }
        let mut free = n;
        for s in sigma.iter_mut() {
            if *s == usize::MAX {
                *s = free;
                free += 1;
            }
        }
        aut.permute(&sigma)
    }

    /// Componentwise concatenation `Rel(self)·Rel(other)`. Accepting states of
    /// `self` take over the initial moves of `other`, so no ε-labels are
    /// introduced and length preservation is kept.
    pub fn concat(&self, other: &Automaton) -> Result<Self> {
        if self.tapes != other.tapes {
            return Err(AutomatonError::ArityMismatch {
                expected: self.tapes,
                found: other.tapes,
            });
        }
        let off = self.states;
        let mut trans = self.transitions.clone();
        for t in &other.transitions {
            trans.push(Transition { from: t.from + off, label: t.label.clone(), to: t.to + off });
            if other.is_initial(t.from) {
                for &f in &self.accepting {
                    trans.push(Transition { from: f, label: t.label.clone(), to: t.to + off });
                }
            }
        }
        let mut accepting: Vec<StateId> = other.accepting.iter().map(|q| q + off).collect();
        if other.initial.iter().any(|&q| other.is_accepting(q)) {
            accepting.extend(self.accepting.iter().copied());
        }
        Ok(Self::build(
            self.tapes,
            self.states + other.states,
            self.initial.clone(),
            accepting,
            trans,
            self.length_preserving && other.length_preserving,
        ))
    }

    /// Restricts tape `tape` to the empty word and removes it.
    pub fn restrict_tape_empty(&self, tape: usize) -> Result<Self> {
        if tape >= self.tapes {
            return Err(AutomatonError::TapeOutOfRange { tape, tapes: self.tapes });
        }
        let trans = self
            .transitions
            .iter()
            .filter(|t| t.label[tape].is_none())
            .map(|t| {
                let mut label = t.label.clone();
                label.remove(tape);
                Transition { from: t.from, label, to: t.to }
            })
            .collect();
        Ok(Self::build(
            self.tapes - 1,
            self.states,
            self.initial.clone(),
            self.accepting.clone(),
            trans,
            self.length_preserving,
        )
        .trim())
    }

    /// Reads a length-preserving n-tape automaton as a one-tape automaton
    /// over tuple letters.
    pub fn to_tuple_letters(&self) -> Result<Self> {
        if !self.length_preserving {
            return Err(AutomatonError::NotLengthPreserving);
        }
        let trans = self
            .transitions
            .iter()
            .map(|t| Transition {
                from: t.from,
                label: vec![Some(Symbol::tuple(
                    t.label.iter().map(|c| c.clone().expect("length-preserving")).collect(),
                ))],
                to: t.to,
            })
            .collect();
        Ok(Self::build(1, self.states, self.initial.clone(), self.accepting.clone(), trans, true))
    }
}

#[derive(Default)]
struct ProductBuilder {
    pairs: Vec<(StateId, StateId)>,
    index: HashMap<(StateId, StateId), StateId>,
}

impl ProductBuilder {
    fn state(&mut self, pair: (StateId, StateId)) -> StateId {
        if let Some(&i) = self.index.get(&pair) {
            return i;
        }
        let i = self.pairs.len();
        self.pairs.push(pair);
        self.index.insert(pair, i);
        i
    }

    fn len(&self) -> usize {
        self.pairs.len()
    }
}
