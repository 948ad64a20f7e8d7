//! Decision procedure for weakly chaining string constraints.

pub mod arith;
pub mod automata;
pub mod benign;
pub mod cli;
pub mod formula;
pub mod fragment;
pub mod oracle;
pub mod parikh;
pub mod pipeline;
pub mod sexpr;
pub mod split;
pub mod symbol;
