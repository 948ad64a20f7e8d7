//! Letters, words and alphabets.

use std::fmt;
use std::sync::Arc;

/// A letter. Base letters are declared by the user; tuple letters are
/// created when a benign chain family is collapsed into one variable over
/// the product alphabet.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Symbol {
    Base(Arc<str>),
    Tuple(Arc<[Symbol]>),
}

impl Symbol {
    pub fn base(name: &str) -> Self {
        Symbol::Base(Arc::from(name))
    }

    pub fn tuple(parts: Vec<Symbol>) -> Self {
        Symbol::Tuple(Arc::from(parts))
    }

    pub fn is_base(&self) -> bool {
        matches!(self, Symbol::Base(_))
    }

    /// Components of a tuple letter, `None` for base letters.
    pub fn components(&self) -> Option<&[Symbol]> {
        match self {
            Symbol::Base(_) => None,
            Symbol::Tuple(parts) => Some(parts),
        }
    }
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Symbol::Base(name) => f.write_str(name),
            Symbol::Tuple(parts) => {
                f.write_str("<")?;
                for (i, p) in parts.iter().enumerate() {
                    if i > 0 {
                        f.write_str(",")?;
                    }
                    write!(f, "{p}")?;
                }
                f.write_str(">")
            }
        }
    }
}

impl fmt::Debug for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

pub type Word = Vec<Symbol>;

/// Renders a word by juxtaposing its letters.
pub fn show_word(w: &[Symbol]) -> String {
    w.iter().map(|s| s.to_string()).collect()
}

/// Parses a word over single-character base letters, e.g. `word("abba")`.
pub fn word(s: &str) -> Word {
    s.chars().map(|c| Symbol::base(&c.to_string())).collect()
}

/// A finite alphabet. Letter order is declaration order and defines the
/// lexicographic order used when enumerating words.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Alphabet {
    letters: Vec<Symbol>,
}

impl Alphabet {
    pub fn new(letters: impl IntoIterator<Item = Symbol>) -> Self {
        let mut out = Alphabet::default();
        for l in letters {
            out.insert(l);
        }
        out
    }

    /// Alphabet of single-character base letters.
    pub fn from_chars(s: &str) -> Self {
        Alphabet::new(s.chars().map(|c| Symbol::base(&c.to_string())))
    }

    pub fn insert(&mut self, s: Symbol) -> bool {
        if self.letters.contains(&s) {
            false
        } else {
            self.letters.push(s);
            true
        }
    }

    pub fn contains(&self, s: &Symbol) -> bool {
        self.letters.contains(s)
    }

    pub fn letters(&self) -> &[Symbol] {
        &self.letters
    }

    pub fn len(&self) -> usize {
        self.letters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.letters.is_empty()
    }

    /// All words of length at most `max_len`, shortest first and
    /// lexicographic within one length.
    pub fn words_up_to(&self, max_len: usize) -> Vec<Word> {
        let mut out = vec![Vec::new()];
        let mut layer = vec![Vec::new()];
        for _ in 0..max_len {
            let mut next = Vec::with_capacity(layer.len() * self.letters.len());
            for w in &layer {
                for l in &self.letters {
                    let mut w2: Word = w.clone();
                    w2.push(l.clone());
                    next.push(w2);
                }
            }
            out.extend(next.iter().cloned());
            layer = next;
        }
        out
    }
}
