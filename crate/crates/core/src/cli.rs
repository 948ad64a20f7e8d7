//! Command-line front end.

use std::fmt::Write as _;
use std::path::PathBuf;

use clap::Parser;
use thiserror::Error;

use crate::arith::{emit_smtlib, Backend};
use crate::formula::{parse, FormulaError, Interpretation, Problem};
use crate::fragment::classify;
use crate::oracle::bounded_sat;
use crate::pipeline::{run, Outcome, PipelineError, PipelineOptions, Report};
use crate::symbol::show_word;

#[derive(Debug, Parser)]
#[command(name = "chainfree", version, about = "Decide weakly chaining string constraints")]
pub struct Args {
    /// Input problem file.
    pub input: PathBuf,
    /// Only report the fragment class of each clause.
    #[arg(long, conflicts_with = "oracle")]
    pub classify_only: bool,
    /// Search for a model by enumeration instead of deciding.
    #[arg(long)]
    pub oracle: bool,
    /// Maximal word length for `--oracle`.
    #[arg(long, default_value_t = 3)]
    pub bound: usize,
    #[arg(long)]
    pub trace: bool,
    /// Print a satisfying assignment.
    #[arg(long)]
    pub model: bool,
    /// `internal` or `external:<command>`.
    #[arg(long, env = "CHAINFREE_BACKEND", default_value = "internal")]
    pub backend: String,
    /// Write the linear problem of the last decided leaf as SMT-LIB.
    #[arg(long, value_name = "PATH")]
    pub emit_lia: Option<PathBuf>,
    /// Bound on live clauses while splitting.
    #[arg(long, value_name = "N")]
    pub max_clauses: Option<usize>,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("cannot write {path}: {source}")]
    Write { path: PathBuf, source: std::io::Error },
    #[error("unknown backend `{0}` (expected `internal` or `external:<command>`)")]
    Backend(String),
    #[error(transparent)]
    Formula(#[from] FormulaError),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
}

pub const EXIT_SAT: i32 = 0;
pub const EXIT_UNSAT: i32 = 1;
pub const EXIT_UNKNOWN: i32 = 2;
pub const EXIT_ERROR: i32 = 3;

fn model_lines(out: &mut String, problem: &Problem, model: &Interpretation) {
    for v in &problem.vars {
        let w = model.get(v).map(|w| show_word(w)).unwrap_or_default();
        let _ = writeln!(out, "model: {v} = \"{w}\"");
    }
}

fn trace_lines(out: &mut String, report: &Report) {
    for (i, c) in report.clauses.iter().enumerate() {
        let n = i + 1;
        let _ = writeln!(out, "trace: clause {n}: {}", c.clause);
        for w in &c.witnesses {
            let kind = if w.benign { "benign" } else { "non-benign" };
            let _ = writeln!(out, "trace: clause {n}: {kind} chain {w}");
        }
        if let Some(b) = &c.benign {
            for s in &b.steps {
                let _ = writeln!(out, "trace: clause {n}: eliminate {s}");
            }
        }
        if let Some(cf) = &c.chain_free {
            let _ = writeln!(out, "trace: clause {n}: chain-free {cf}");
        }
        if let Some(s) = &c.split {
            for line in &s.trace {
                let _ = writeln!(out, "trace: clause {n}: {line}");
            }
            let _ = writeln!(
                out,
                "trace: clause {n}: {} phase-1 and {} phase-2 splits, {} leaves, {} decided",
                s.phase1_steps, s.phase2_steps, s.leaves, c.leaves_decided
            );
        }
    }
}

/// Runs the command and returns its report and exit code.
pub fn execute(args: &Args) -> Result<(String, i32), CliError> {
    let text = std::fs::read_to_string(&args.input)
        .map_err(|source| CliError::Read { path: args.input.clone(), source })?;
    let problem = parse(&text)?;
    let mut out = String::new();

    if args.classify_only {
        let c = classify(&problem)?;
        let _ = writeln!(out, "class: {}", c.class);
        for (i, (clause, class)) in c.clauses.iter().enumerate() {
            let _ = writeln!(out, "clause {}: {}", i + 1, class.class);
            if args.trace {
                let _ = writeln!(out, "trace: clause {}: {clause}", i + 1);
                for w in &class.witnesses {
                    let _ = writeln!(out, "trace: clause {}: chain {w}", i + 1);
                }
            }
        }
        return Ok((out, EXIT_SAT));
    }

    if args.oracle {
        return Ok(match bounded_sat(&problem, args.bound) {
            Some(model) => {
                out.push_str("verdict: sat\n");
                if args.model {
                    model_lines(&mut out, &problem, &model);
                }
                (out, EXIT_SAT)
            }
            None => {
                let _ = writeln!(out, "verdict: unknown\nreason: no witness within bound {}", args.bound);
                (out, EXIT_UNKNOWN)
            }
        });
    }

    let backend = Backend::parse(&args.backend).ok_or_else(|| CliError::Backend(args.backend.clone()))?;
    let mut options = PipelineOptions::default();
    options.decide.backend = backend;
    options.decide.force_lia = args.emit_lia.is_some();
    options.keep_lia = args.emit_lia.is_some();
    options.split.trace = args.trace;
    if let Some(n) = args.max_clauses {
        options.split.max_clauses = n;
    }
    let report = run(&problem, &options)?;

    let _ = writeln!(out, "verdict: {}", report.outcome.keyword());
    for (i, c) in report.clauses.iter().enumerate() {
        let _ = writeln!(out, "clause {}: {}", i + 1, c.class);
    }
    let code = match &report.outcome {
        Outcome::Sat(model) => {
            if args.model {
                model_lines(&mut out, &problem, model);
            }
            EXIT_SAT
        }
        Outcome::Unsat => EXIT_UNSAT,
        Outcome::Unknown(why) => {
            let _ = writeln!(out, "reason: {why}");
            EXIT_UNKNOWN
        }
        Outcome::OutOfFragment(w) => {
            let _ = writeln!(out, "out-of-fragment: non-benign chain {w}");
            EXIT_UNKNOWN
        }
    };
    if args.trace {
        trace_lines(&mut out, &report);
    }
    if let Some(path) = &args.emit_lia {
        match report.lia.last() {
            Some(p) => std::fs::write(path, emit_smtlib(p))
                .map_err(|source| CliError::Write { path: path.clone(), source })?,
            None => eprintln!("chainfree: no linear problem was built; {} not written", path.display()),
        }
    }
    Ok((out, code))
}

/// Entry point of the binary.
pub fn main() -> i32 {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_ERROR } else { EXIT_SAT };
        }
    };
    match execute(&args) {
        Ok((out, code)) => {
            print!("{out}");
            code
        }
        Err(e) => {
            eprintln!("chainfree: {e}");
            EXIT_ERROR
        }
    }
}
