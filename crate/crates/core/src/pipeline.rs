//! The whole decision procedure: DNF, classification, benign-chain
//! elimination, splitting and the arithmetic decision of every leaf.

use std::ops::ControlFlow;

use thiserror::Error;

use crate::arith::LiaProblem;
use crate::benign::{to_chain_free, BenignError, BenignReport};
use crate::formula::{evaluate, to_dnf, to_left_sided, Clause, FormulaError, Interpretation, Problem};
use crate::fragment::{classify_clause, ChainWitness, FragmentClass};
use crate::parikh::{decide_clause, DecideOptions, ParikhError, Verdict};
use crate::split::{explore, SplitError, SplitOptions, SplitStats};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Formula(#[from] FormulaError),
    #[error("clause {clause}: {source}")]
    Benign { clause: usize, source: BenignError },
    #[error("clause {clause}: {source}")]
    Split { clause: usize, source: SplitError },
    #[error("clause {clause}: {source}")]
    Parikh { clause: usize, source: ParikhError },
}

#[derive(Clone, Debug, Default)]
pub struct PipelineOptions {
    pub decide: DecideOptions,
    pub split: SplitOptions,
    /// Keep the linear problem of every decided leaf.
    pub keep_lia: bool,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Outcome {
    Sat(Interpretation),
    Unsat,
    Unknown(String),
    OutOfFragment(ChainWitness),
}

impl Outcome {
    pub fn is_sat(&self) -> bool {
        matches!(self, Outcome::Sat(_))
    }

    pub fn keyword(&self) -> &'static str {
        match self {
            Outcome::Sat(_) => "sat",
            Outcome::Unsat => "unsat",
            Outcome::Unknown(_) => "unknown",
            Outcome::OutOfFragment(_) => "out-of-fragment",
        }
    }
}

#[derive(Clone, Debug)]
pub struct ClauseReport {
    /// The clause in left-sided form.
    pub clause: Clause,
    pub class: FragmentClass,
    pub witnesses: Vec<ChainWitness>,
    pub chain_free: Option<Clause>,
    pub benign: Option<BenignReport>,
    pub split: Option<SplitStats>,
    pub leaves_decided: usize,
    pub outcome: Outcome,
}

#[derive(Clone, Debug)]
pub struct Report {
    pub outcome: Outcome,
    pub clauses: Vec<ClauseReport>,
    /// Linear problems of the decided leaves, in order.
    pub lia: Vec<LiaProblem>,
}

impl Report {
    pub fn class(&self) -> FragmentClass {
        self.clauses.iter().map(|c| c.class).max().unwrap_or(FragmentClass::ChainFree)
    }
}

fn decide_one(
    index: usize,
    clause: Clause,
    problem: &Problem,
    fresh: &mut crate::formula::FreshNames,
    options: &PipelineOptions,
    lia: &mut Vec<LiaProblem>,
) -> Result<ClauseReport, PipelineError> {
    let class = classify_clause(&clause);
    let mut report = ClauseReport {
        clause: clause.clone(),
        class: class.class,
        witnesses: class.witnesses.clone(),
        chain_free: None,
        benign: None,
        split: None,
        leaves_decided: 0,
        outcome: Outcome::Unsat,
    };
    if class.class == FragmentClass::Chaining {
        let w = class.witnesses.into_iter().find(|w| !w.benign).expect("non-benign witness");
        report.outcome = Outcome::OutOfFragment(w);
        return Ok(report);
    }
    let (chain_free, benign) = match to_chain_free(&clause, &problem.alphabet, fresh) {
        Ok(r) => r,
        Err(BenignError::Chaining(w)) => {
            report.outcome = Outcome::OutOfFragment(w);
            return Ok(report);
        }
        Err(source) => return Err(PipelineError::Benign { clause: index, source }),
    };
    report.chain_free = Some(chain_free.clone());
    report.benign = Some(benign);

    let mut outcome = Outcome::Unsat;
    let mut failure = None;
    let mut decided = 0;
    let split = explore(&chain_free, fresh, &options.split, |leaf| {
        decided += 1;
        let decision = match decide_clause(&leaf.clause, &problem.alphabet, &options.decide) {
            Ok(d) => d,
            Err(e) => {
                failure = Some(e);
                return ControlFlow::Break(());
            }
        };
        if options.keep_lia {
            lia.extend(decision.lia);
        }
        match decision.verdict {
            Verdict::Sat(mut m) => {
                leaf.extend_model(&mut m);
                outcome = Outcome::Sat(m);
                ControlFlow::Break(())
            }
            Verdict::Unknown(why) => {
                outcome = Outcome::Unknown(why);
                ControlFlow::Continue(())
            }
            Verdict::Unsat => ControlFlow::Continue(()),
        }
    });
    if let Some(source) = failure {
        return Err(PipelineError::Parikh { clause: index, source });
    }
    match split {
        Ok(stats) => report.split = Some(stats),
        Err(e @ (SplitError::TooManyClauses(_) | SplitError::TooDeep(_))) if !outcome.is_sat() => {
            outcome = Outcome::Unknown(e.to_string());
        }
        Err(SplitError::TooManyClauses(_) | SplitError::TooDeep(_)) => {}
        Err(source) => return Err(PipelineError::Split { clause: index, source }),
    }
    report.leaves_decided = decided;
    report.outcome = outcome;
    Ok(report)
}

/// Decides a problem. The formula is satisfiable iff some clause of its DNF
/// is; a satisfying outcome carries a model of the whole formula.
pub fn run(problem: &Problem, options: &PipelineOptions) -> Result<Report, PipelineError> {
    let formula = problem.formula();
    let mut fresh = problem.fresh_names();
    let mut clauses = Vec::new();
    let mut lia = Vec::new();
    let mut outcome = None;
    for (i, c) in to_dnf(&formula, &problem.alphabet)?.into_iter().enumerate() {
        let clause = to_left_sided(&c, &mut fresh);
        let report = decide_one(i + 1, clause, problem, &mut fresh, options, &mut lia)?;
        let sat = report.outcome.is_sat();
        if let Outcome::Sat(m) = &report.outcome {
            let mut model = m.clone();
            for v in problem.all_vars().into_iter().chain(formula.vars()) {
                model.entry(v).or_default();
            }
            outcome = Some(match evaluate(&formula, &model) {
                Ok(true) => Outcome::Sat(model),
                Ok(false) => Outcome::Unknown("model does not satisfy the formula".into()),
                Err(e) => Outcome::Unknown(e.to_string()),
            });
        }
        clauses.push(report);
        if sat {
            break;
        }
    }
    let outcome = outcome.unwrap_or_else(|| {
        let unknown = clauses.iter().find_map(|c| match &c.outcome {
            Outcome::Unknown(why) => Some(why.clone()),
            _ => None,
        });
        let chain = clauses.iter().find_map(|c| match &c.outcome {
            Outcome::OutOfFragment(w) => Some(w.clone()),
            _ => None,
        });
        match (unknown, chain) {
            (Some(why), _) => Outcome::Unknown(why),
            (None, Some(w)) => Outcome::OutOfFragment(w),
            (None, None) => Outcome::Unsat,
        }
    });
    Ok(Report { outcome, clauses, lia })
}
