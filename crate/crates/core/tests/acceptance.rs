//! One pass/fail line per acceptance criterion.

mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write as _;
use std::path::PathBuf;
use std::time::{Duration, Instant};

use chainfree::arith::{solve_with, Backend, LiaProblem, LiaResult, LinExpr, LinearFormula, Rel, SolverOptions};
use chainfree::automata::Label;
use chainfree::cli::{execute, Args};
use chainfree::formula::{evaluate, parse, var, Atom, FreshNames, StrTerm};
use chainfree::fragment::{classify, FragmentClass};
use chainfree::oracle::bounded_sat;
use chainfree::parikh::parikh_formula;
use chainfree::pipeline::{run, Outcome, PipelineOptions};
use chainfree::split::{split_relational, to_concat_free, SplitStats};
use common::{complete_hidden, external_backend, random_lia, random_problem_text, read_model, RandomAut, TestRng};
use rand::{Rng, SeedableRng};

const FIGURE: &str = "(declare-alphabet a b)\n(declare-str x y z u v)\n\
    (assert (and (= x (concat z y)) (= y (concat x u v))))\n";

const SELF_TRANSDUCTION: &str = "(declare-alphabet a b)\n(declare-str x)\n\
    (define-aut T :tapes 2 :states (s) :init (s) :final (s) :trans ((s (a b) s) (s (b _) s)))\n\
    (assert (rel T x x))\n";

const SANITIZER: &str = "(declare-alphabet c q)\n\
    (declare-str newIn oldIn new old pass query user)\n\
    (define-aut T :tapes 2 :states (s t) :init (s) :final (s) :trans ((s (c c) s) (s (_ c) t) (t (q q) s)))\n\
    (define-aut Bad :tapes 1 :states (p0 p1 p2) :init (p0) :final (p2)\n\
      :trans ((p0 c p0) (p0 q p1) (p1 c p0) (p1 q p2) (p2 c p2) (p2 q p2)))\n\
    (assert (and (rel T newIn new) (rel T oldIn old) (= pass old) (not (= new old))\n\
      (= query (concat \"c\" new \"q\" user)) (in query Bad)))\n";

const SQUARE: &str = "(declare-alphabet a b)\n(declare-str x y z)\n\
    (assert (and (= (concat x y) (concat z z)) (<= 1 (len x)) (<= 1 (len y))))\n";

struct Line {
    criterion: usize,
    pass: bool,
    detail: String,
}

fn report(lines: &[Line]) {
    let mut out = std::io::stdout().lock();
    for l in lines {
        let verdict = if l.pass { "PASS" } else { "FAIL" };
        let _ = writeln!(out, "criterion {}: {verdict} {}", l.criterion, l.detail);
    }
}

fn class_of(text: &str) -> FragmentClass {
    classify(&parse(text).unwrap()).unwrap().class
}

fn criterion_1() -> Line {
    let start = Instant::now();
    let got = [class_of(FIGURE), class_of(SELF_TRANSDUCTION), class_of(SANITIZER)];
    let want = [FragmentClass::WeaklyChaining, FragmentClass::Chaining, FragmentClass::ChainFree];
    let elapsed = start.elapsed();
    Line {
        criterion: 1,
        pass: got == want && elapsed < Duration::from_secs(1),
        detail: format!("classes {got:?} (want {want:?}) in {elapsed:.2?}, limit 1s"),
    }
}

/// Renders atoms with every variable outside `keep` renamed by first
/// occurrence.
fn canonical(atoms: &[Atom], keep: &[&str]) -> String {
    let text: Vec<String> = atoms.iter().map(|a| a.to_string()).collect();
    let text = text.join(" ∧ ");
    let mut names: Vec<String> = Vec::new();
    let mut out = String::new();
    let mut ident = String::new();
    let flush = |ident: &mut String, out: &mut String, names: &mut Vec<String>| {
        if ident.is_empty() {
            return;
        }
        if keep.contains(&ident.as_str()) {
            out.push_str(ident);
        } else {
            let k = names.iter().position(|n| n == ident).unwrap_or_else(|| {
                names.push(ident.clone());
                names.len() - 1
            });
            out.push_str(&format!("#{}", k + 1));
        }
        ident.clear();
    };
    for ch in text.chars() {
        if ch.is_alphanumeric() || ch == '_' {
            ident.push(ch);
        } else {
            flush(&mut ident, &mut out, &mut names);
            out.push(ch);
        }
    }
    flush(&mut ident, &mut out, &mut names);
    out
}

fn criterion_2() -> Line {
    let start = Instant::now();
    let atom = Atom::eq(StrTerm::of(&["x", "y"]), StrTerm::of(&["z", "z"]));
    let mut fresh = FreshNames::new([var("x"), var("y"), var("z")]);
    let disjuncts = split_relational(&atom, &mut fresh);
    let got: BTreeSet<String> = disjuncts.iter().map(|d| canonical(&d.parts, &["x", "y", "z"])).collect();
    let want: BTreeSet<String> =
        ["#1 = z ∧ #2∘y = z".to_string(), "x = #1 ∧ y = #2∘#1∘#2".to_string()].into_iter().collect();
    let defs_ok = disjuncts.len() == 2 && &*disjuncts[0].def.0 == "x" && &*disjuncts[1].def.0 == "z";
    let elapsed = start.elapsed();
    Line {
        criterion: 2,
        pass: got == want && defs_ok && elapsed < Duration::from_secs(1),
        detail: format!("disjuncts {got:?} in {elapsed:.2?}, limit 1s"),
    }
}

/// Runs the command line with `--model` and evaluates the printed model.
fn cli_model_holds(text: &str) -> Result<bool, String> {
    let mut file = tempfile::NamedTempFile::new().map_err(|e| e.to_string())?;
    file.write_all(text.as_bytes()).map_err(|e| e.to_string())?;
    let args = Args {
        input: PathBuf::from(file.path()),
        classify_only: false,
        oracle: false,
        bound: 3,
        trace: false,
        model: true,
        backend: "internal".into(),
        emit_lia: None,
        max_clauses: None,
    };
    let (out, code) = execute(&args).map_err(|e| e.to_string())?;
    if code != 0 {
        return Err(format!("exit {code}: {out}"));
    }
    let problem = parse(text).map_err(|e| e.to_string())?;
    let mut model = read_model(&out);
    complete_hidden(&problem, &mut model);
    evaluate(&problem.formula(), &model).map_err(|e| e.to_string())
}

#[derive(Default)]
struct Differential {
    formulas: usize,
    sat: usize,
    unsat: usize,
    unknown: usize,
    disagreements: Vec<String>,
    errors: Vec<String>,
    phase1_checks: usize,
    phase2_checks: usize,
    measure_violations: Vec<String>,
    chain_checks: usize,
    chain_violations: Vec<String>,
    benign_runs: usize,
    benign_applications: usize,
    benign_violations: Vec<String>,
    sat_texts: Vec<String>,
    elapsed: Duration,
}

fn differential() -> Differential {
    let start = Instant::now();
    let mut d = Differential::default();
    let mut rng = TestRng::seed_from_u64(0x5eed_0003);
    let mut attempts = 0;
    while d.formulas < 300 && attempts < 100_000 {
        attempts += 1;
        let text = random_problem_text(&mut rng);
        let problem = parse(&text).unwrap();
        if classify(&problem).unwrap().class != FragmentClass::WeaklyChaining {
            continue;
        }
        d.formulas += 1;
        let mut options = PipelineOptions::default();
        options.split.check_chain_free = true;
        options.decide.force_lia = rng.gen_bool(0.5);
        let report = match run(&problem, &options) {
            Ok(r) => r,
            Err(e) => {
                d.errors.push(format!("{e}\n{text}"));
                continue;
            }
        };
        for c in &report.clauses {
            let mut stats: Vec<SplitStats> = c.split.iter().cloned().collect();
            if let Some(cf) = &c.chain_free {
                // the pipeline stops at the first satisfiable leaf; also
                // explore the whole tree
                let mut fresh = FreshNames::new(cf.vars().into_iter().chain(problem.all_vars()));
                match to_concat_free(cf, &mut fresh, &options.split) {
                    Ok((_, s)) => stats.push(s),
                    Err(e) => d.errors.push(format!("{e}\n{text}")),
                }
            }
            for s in &stats {
                d.phase1_checks += s.phase1_checks;
                d.phase2_checks += s.phase2_checks;
                d.measure_violations.extend(s.phase1_violations.iter().cloned());
                d.measure_violations.extend(s.phase2_violations.iter().cloned());
                d.chain_checks += s.chain_checks;
                d.chain_violations.extend(s.chain_violations.iter().cloned());
            }
            if let Some(b) = &c.benign {
                d.benign_runs += 1;
                d.benign_applications += b.applications;
                if b.applications > b.initial_b {
                    d.benign_violations.push(format!("{} > {}: {}", b.applications, b.initial_b, c.clause));
                }
            }
        }
        let witness = bounded_sat(&problem, 3);
        match &report.outcome {
            Outcome::Sat(_) => {
                d.sat += 1;
                d.sat_texts.push(text.clone());
            }
            Outcome::Unsat => {
                d.unsat += 1;
                if witness.is_some() || bounded_sat(&problem, 4).is_some() {
                    d.disagreements.push(format!("pipeline unsat, oracle found a witness\n{text}"));
                }
            }
            Outcome::Unknown(_) | Outcome::OutOfFragment(_) => d.unknown += 1,
        }
        if witness.is_some() && !report.outcome.is_sat() {
            d.disagreements.push(format!("oracle witness, pipeline {}\n{text}", report.outcome.keyword()));
        }
    }
    d.elapsed = start.elapsed();
    d
}

fn criterion_3(d: &Differential) -> Line {
    let ok = d.formulas >= 300 && d.disagreements.is_empty() && d.errors.is_empty();
    let mut detail = format!(
        "{} weakly chaining formulas ({} sat, {} unsat, {} unknown), {} disagreements, {} errors in {:.2?}, limit 600s",
        d.formulas,
        d.sat,
        d.unsat,
        d.unknown,
        d.disagreements.len(),
        d.errors.len(),
        d.elapsed
    );
    for x in d.disagreements.iter().chain(&d.errors).take(3) {
        detail.push_str(&format!("\n  {x}"));
    }
    Line { criterion: 3, pass: ok && d.elapsed < Duration::from_secs(600), detail }
}

/// Parikh vectors (label → count, zero counts omitted) of the solutions of
/// the encoding with at most `max` letters in total, by checking every
/// candidate vector.
fn encoding_vectors(aut: &chainfree::automata::Automaton, max: usize) -> BTreeSet<BTreeMap<Label, usize>> {
    let mut base = LiaProblem::new();
    let enc = parikh_formula(aut, &mut base);
    let labels: Vec<(Label, usize)> = enc.labels.iter().map(|(l, &v)| (l.clone(), v)).collect();
    let mut out = BTreeSet::new();
    let mut counts = vec![0usize; labels.len()];
    fn next(counts: &mut [usize], max: usize) -> bool {
        for i in 0..counts.len() {
            counts[i] += 1;
            if counts.iter().sum::<usize>() <= max {
                return true;
            }
            counts[i] = 0;
        }
        false
    }
    loop {
        let mut p = base.clone();
        for (&(_, v), &c) in labels.iter().zip(&counts) {
            p.assert(LinearFormula::eq(LinExpr::var(v), &LinExpr::constant(c as i64)));
        }
        if let (LiaResult::Sat(_), _) = solve_with(&p, &SolverOptions::default()) {
            let vector: BTreeMap<Label, usize> =
                labels.iter().zip(&counts).filter(|(_, &c)| c > 0).map(|((l, _), &c)| (l.clone(), c)).collect();
            out.insert(vector);
        }
        if !next(&mut counts, max) {
            break;
        }
    }
    out
}

fn criterion_4() -> Line {
    let start = Instant::now();
    let mut rng = TestRng::seed_from_u64(0x5eed_0004);
    let mut disagreements = Vec::new();
    let mut vectors = 0;
    for _ in 0..100 {
        let tapes = rng.gen_range(1..=2);
        let epsilon = tapes == 2 && rng.gen_bool(0.5);
        let aut = RandomAut::new(&mut rng, tapes, 5, epsilon).automaton(tapes);
        let runs = common::run_label_counts(&aut, 6);
        let solutions = encoding_vectors(&aut, 6);
        vectors += runs.len();
        if runs != solutions {
            disagreements.push(format!("{aut:?}: runs {} vs encoding {}", runs.len(), solutions.len()));
        }
    }
    let elapsed = start.elapsed();
    let mut detail = format!(
        "100 automata, {vectors} vectors, {} disagreements in {elapsed:.2?}, limit 300s",
        disagreements.len()
    );
    for x in disagreements.iter().take(3) {
        detail.push_str(&format!("\n  {x}"));
    }
    Line { criterion: 4, pass: disagreements.is_empty() && elapsed < Duration::from_secs(300), detail }
}

fn criterion_5(d: &Differential) -> Line {
    let mut detail = format!(
        "{} phase-1 and {} phase-2 steps checked, {} violations",
        d.phase1_checks,
        d.phase2_checks,
        d.measure_violations.len()
    );
    for x in d.measure_violations.iter().take(3) {
        detail.push_str(&format!("\n  {x}"));
    }
    Line { criterion: 5, pass: d.measure_violations.is_empty() && d.phase1_checks > 0, detail }
}

fn criterion_6(d: &Differential) -> Line {
    let mut detail = format!("{} intermediate clauses checked, {} not chain-free", d.chain_checks, d.chain_violations.len());
    for x in d.chain_violations.iter().take(3) {
        detail.push_str(&format!("\n  {x}"));
    }
    Line { criterion: 6, pass: d.chain_violations.is_empty() && d.chain_checks > 0, detail }
}

fn criterion_7(d: &Differential) -> Line {
    let mut detail = format!(
        "{} clauses, {} chain-family eliminations, {} runs exceeded the initial count",
        d.benign_runs,
        d.benign_applications,
        d.benign_violations.len()
    );
    for x in d.benign_violations.iter().take(3) {
        detail.push_str(&format!("\n  {x}"));
    }
    Line { criterion: 7, pass: d.benign_violations.is_empty() && d.benign_runs > 0, detail }
}

/// Truth of a linear problem, computed directly from its atoms.
fn lia_holds(p: &LiaProblem, values: &[i64]) -> bool {
    fn holds(f: &LinearFormula, values: &[i64]) -> bool {
        match f {
            LinearFormula::Atom(a) => {
                let v: i128 = a.expr.constant as i128
                    + a.expr.terms.iter().map(|(&x, &c)| c as i128 * values[x] as i128).sum::<i128>();
                match a.rel {
                    Rel::Le => v <= 0,
                    Rel::Eq => v == 0,
                }
            }
            LinearFormula::And(fs) => fs.iter().all(|g| holds(g, values)),
            LinearFormula::Or(fs) => fs.iter().any(|g| holds(g, values)),
        }
    }
    values.len() == p.num_vars() && p.constraints().iter().all(|f| holds(f, values))
}

/// Exhaustive search over the box [-8, 8] for problems with few variables.
fn lia_box_sat(p: &LiaProblem) -> bool {
    let n = p.num_vars();
    let mut values = vec![-8i64; n];
    loop {
        if lia_holds(p, &values) {
            return true;
        }
        let mut i = 0;
        loop {
            if i == n {
                return false;
            }
            values[i] += 1;
            if values[i] <= 8 {
                break;
            }
            values[i] = -8;
            i += 1;
        }
    }
}

fn criterion_8() -> Line {
    let start = Instant::now();
    let mut rng = TestRng::seed_from_u64(0x5eed_0008);
    let external = external_backend();
    let (mut sat, mut unsat, mut unknown, mut compared) = (0, 0, 0, 0);
    let mut problems = Vec::new();
    let mut failures = Vec::new();
    let mut internal_time = Duration::ZERO;
    for i in 0..500 {
        let p = random_lia(&mut rng);
        let t = Instant::now();
        let (r, _) = solve_with(&p, &SolverOptions::default());
        internal_time += t.elapsed();
        match &r {
            LiaResult::Sat(values) => {
                sat += 1;
                if !lia_holds(&p, values) {
                    failures.push(format!("problem {i}: assignment does not satisfy the problem"));
                }
            }
            LiaResult::Unsat => {
                unsat += 1;
                if p.num_vars() <= 3 && lia_box_sat(&p) {
                    failures.push(format!("problem {i}: unsat but the box search finds a solution"));
                }
            }
            LiaResult::Unknown(_) => unknown += 1,
        }
        problems.push((p, r));
    }
    if let Some(backend @ Backend::External(_)) = &external {
        for (i, (p, r)) in problems.iter().enumerate() {
            let e = backend.solve(p, &SolverOptions::default());
            if matches!(r, LiaResult::Unknown(_)) || matches!(e, LiaResult::Unknown(_)) {
                continue;
            }
            compared += 1;
            if r.is_sat() != e.is_sat() {
                failures.push(format!("problem {i}: internal {r} vs external {e}"));
            }
        }
    }
    let backend = match &external {
        Some(Backend::External(cmd)) => format!("external `{cmd}` compared on {compared}"),
        _ => "no external solver configured".to_string(),
    };
    let mut detail = format!(
        "500 problems ({sat} sat, {unsat} unsat, {unknown} unknown), {backend}, {} failures, internal {internal_time:.2?} (limit 120s), total {:.2?}",
        failures.len(),
        start.elapsed()
    );
    for x in failures.iter().take(3) {
        detail.push_str(&format!("\n  {x}"));
    }
    Line { criterion: 8, pass: failures.is_empty() && internal_time < Duration::from_secs(120), detail }
}

fn criterion_9(d: &Differential) -> Line {
    let mut checked = 0;
    let mut failures = Vec::new();
    for text in [SANITIZER, SQUARE].iter().copied().chain(d.sat_texts.iter().map(String::as_str)) {
        checked += 1;
        match cli_model_holds(text) {
            Ok(true) => {}
            Ok(false) => failures.push(format!("model is not a solution\n{text}")),
            Err(e) => failures.push(format!("{e}\n{text}")),
        }
    }
    let mut detail = format!("{checked} models checked, {} invalid", failures.len());
    for x in failures.iter().take(3) {
        detail.push_str(&format!("\n  {x}"));
    }
    Line { criterion: 9, pass: failures.is_empty(), detail }
}

#[test]
fn acceptance() {
    let d = differential();
    let lines = vec![
        criterion_1(),
        criterion_2(),
        criterion_3(&d),
        criterion_4(),
        criterion_5(&d),
        criterion_6(&d),
        criterion_7(&d),
        criterion_8(),
        criterion_9(&d),
    ];
    report(&lines);
    let failed: Vec<usize> = lines.iter().filter(|l| !l.pass).map(|l| l.criterion).collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
