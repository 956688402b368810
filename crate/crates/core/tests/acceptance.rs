//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if
//! any criterion fails. Time limits are pinned below.

use std::collections::{BTreeMap, BTreeSet};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use klpa::corpus::{
    all_simple_expressions, bounded_graphs_of_automaton, bounded_graphs_of_expression, random_interpretation,
    random_simple_expression, random_simple_term,
};
use klpa::expr::{Expr, Letter};
use klpa::graph::{compose_homomorphisms, eval_relational, is_homomorphism, GraphKey};
use klpa::petri::{PetriAutomaton, Run};
use klpa::reading::graph_in_run_language;
use klpa::simulate::Verdict;
use klpa::{
    check_sp_constraint, compile, decide_leq, extract_expression, find_homomorphism, fixtures, graph_of_term,
    membership, membership_oracle, parse_expr, Alphabet, Graph,
};

const HOM_LIMIT: Duration = Duration::from_millis(10);
const DECIDE_LIMIT: Duration = Duration::from_secs(1);
const COMPILE_LIMIT: Duration = Duration::from_secs(120);
const ORACLE_LIMIT: Duration = Duration::from_secs(300);
const EXTRACT_LIMIT: Duration = Duration::from_secs(600);

const CORPUS_OPS: usize = 3;
const MAX_VERTICES: usize = 8;
const SEED: u64 = 0x5eed;

type Outcome = Result<String, String>;

fn e(s: &str) -> Expr {
    parse_expr(s, &Alphabet::lowercase()).expect("fixture parses")
}

fn gr(s: &str) -> Graph {
    graph_of_term(&e(s)).expect("fixture is a term")
}

fn corpus() -> Vec<Expr> {
    all_simple_expressions(&['a', 'b'], CORPUS_OPS)
}

fn within(limit: Duration, start: Instant) -> Result<(), String> {
    let took = start.elapsed();
    if took <= limit {
        Ok(())
    } else {
        Err(format!("took {took:.2?}, limit {limit:?}"))
    }
}

fn homomorphism_witness() -> Outcome {
    let target = gr("a(b&c)&d");
    let source = gr("ab&ac");
    let start = Instant::now();
    let phi = find_homomorphism(&target, &source).ok_or("no witness")?;
    within(HOM_LIMIT, start)?;
    if !is_homomorphism(&phi, &source, &target) {
        return Err(format!("invalid witness {phi:?}"));
    }
    let start = Instant::now();
    if find_homomorphism(&source, &target).is_some() {
        return Err("swapped direction has a witness".into());
    }
    within(HOM_LIMIT, start)?;
    Ok(format!("witness {phi:?}"))
}

fn running_example_trace() -> Outcome {
    let a = fixtures::running_example();
    let r = a.run_from(&a.initial_state(), &[0, 1, 2, 3, 2, 4, 7]).map_err(|x| x.to_string())?;
    if !r.end.is_empty() {
        return Err("run is not accepting".into());
    }
    let g = a.trace_of_run(&r);
    let expected = fixtures::running_example_trace();
    if g.vertices.len() == 7 && g.edges.len() == 9 && g.is_isomorphic(&expected) {
        Ok("7 vertices, 9 edges, isomorphic".into())
    } else {
        Err(format!("trace {g:?}"))
    }
}

fn decision_fixtures() -> Outcome {
    let cases = [("a(b&c)", "ab&ac", true), ("a&bc", "ac&b", false), ("ac&b", "a&bc", false), ("a&b", "0", false)];
    for (x, y, expected) in cases {
        let start = Instant::now();
        let v = decide_leq(&e(x), &e(y)).map_err(|err| err.to_string())?;
        within(DECIDE_LIMIT, start)?;
        if v.holds() != expected {
            return Err(format!("{x} <= {y}: got {v:?}"));
        }
        if let ("a&b", Verdict::No(g)) = (x, &v) {
            if !g.is_isomorphic(&gr("a&b")) {
                return Err(format!("counterexample {g:?} is not Gr(a&b)"));
            }
        }
    }
    Ok(format!("{} fixtures", cases.len()))
}

fn compile_correctness(all: &[Expr]) -> Outcome {
    let start = Instant::now();
    for x in all {
        let a = compile(x).map_err(|err| err.to_string())?;
        let from_runs = bounded_graphs_of_automaton(&a, MAX_VERTICES);
        let from_terms = bounded_graphs_of_expression(x, MAX_VERTICES);
        if !from_runs.keys().eq(from_terms.keys()) {
            return Err(format!("{x}: {} run graphs vs {} term graphs", from_runs.len(), from_terms.len()));
        }
    }
    within(COMPILE_LIMIT, start)?;
    Ok(format!("{} expressions in {:.1?}", all.len(), start.elapsed()))
}

fn small_random_graph(rng: &mut StdRng, max_vertices: usize) -> Graph {
    loop {
        let ops = rng.gen_range(0..=4);
        let g = graph_of_term(&random_simple_term(rng, &['a', 'b', 'c'], ops)).expect("term");
        if g.vertices.len() <= max_vertices {
            return g;
        }
    }
}

fn oracle_agreement() -> Outcome {
    let mut rng = StdRng::seed_from_u64(SEED);
    let start = Instant::now();
    let (mut yes, mut no) = (0, 0);
    for _ in 0..500 {
        let g = small_random_graph(&mut rng, 6);
        let ops = rng.gen_range(0..=4);
        let f = random_simple_expression(&mut rng, &['a', 'b', 'c'], ops);
        let exact = membership(&g, &compile(&f).expect("simple")).map_err(|err| err.to_string())?;
        let brute = membership_oracle(&g, &f).map_err(|err| err.to_string())?;
        if exact != brute {
            return Err(format!("{f} on {g:?}: exact {exact}, oracle {brute}"));
        }
        if exact {
            yes += 1;
        } else {
            no += 1;
        }
    }
    within(ORACLE_LIMIT, start)?;
    Ok(format!("500 pairs agree ({yes} members, {no} non-members) in {:.1?}", start.elapsed()))
}

fn relational_soundness() -> Outcome {
    let mut rng = StdRng::seed_from_u64(SEED + 1);
    let letters = ['a', 'b'];
    let mut pairs: Vec<(Expr, Expr)> = ["a(b&c)", "a&b", "a(b|c)", "(a&b)+", "a+a"]
        .iter()
        .zip(["ab&ac", "a", "ab|ac", "a+&b+", "a+"])
        .map(|(x, y)| (e(x), e(y)))
        .collect();
    for _ in 0..150 {
        let (i, j) = (rng.gen_range(0..=3), rng.gen_range(0..=3));
        let x = random_simple_expression(&mut rng, &letters, i);
        let y = random_simple_expression(&mut rng, &letters, j);
        pairs.push((x.clone(), Expr::union(x.clone(), y.clone())));
        pairs.push((Expr::inter(x.clone(), y.clone()), x.clone()));
        pairs.push((x, y));
    }
    let mut checked = 0;
    for (x, y) in &pairs {
        if !decide_leq(x, y).map_err(|err| err.to_string())?.holds() {
            continue;
        }
        checked += 1;
        for _ in 0..200 {
            let n = rng.gen_range(1..=4);
            let sigma = random_interpretation(&mut rng, &['a', 'b', 'c'], n, 0.4);
            if !eval_relational(x, &sigma, n).is_subset(&eval_relational(y, &sigma, n)) {
                return Err(format!("{x} <= {y} fails under {sigma:?}"));
            }
        }
    }
    Ok(format!("{checked} inclusions of {} pairs, 200 interpretations each", pairs.len()))
}

fn extraction_round_trip(all: &[Expr]) -> Outcome {
    let start = Instant::now();
    for x in all {
        let y = extract_expression(&compile(x).expect("simple")).map_err(|err| format!("{x}: {err}"))?;
        let gx = bounded_graphs_of_expression(x, MAX_VERTICES);
        let gy = bounded_graphs_of_expression(&y, MAX_VERTICES);
        if !gx.keys().eq(gy.keys()) {
            return Err(format!("{x} extracted as {y}: {} vs {} graphs", gx.len(), gy.len()));
        }
    }
    within(EXTRACT_LIMIT, start)?;
    Ok(format!("{} expressions in {:.1?}", all.len(), start.elapsed()))
}

fn constraint_checks(all: &[Expr]) -> Outcome {
    for x in all {
        let a = compile(x).expect("simple");
        if !a.check_safety().is_safe() {
            return Err(format!("{x}: compiled automaton is unsafe"));
        }
        check_sp_constraint(&a).map_err(|v| format!("{x}: {v}"))?;
    }
    let unsafe_witness = match check_sp_constraint(&fixtures::unsafe_self_feed()) {
        Err(v @ klpa::ConstraintViolation::Unsafe { .. }) => v,
        other => return Err(format!("unsafe net accepted: {other:?}")),
    };
    let sp_witness = match check_sp_constraint(&fixtures::n_shaped()) {
        Err(v @ klpa::ConstraintViolation::NotSeriesParallel { .. }) => v,
        other => return Err(format!("N-shaped automaton accepted: {other:?}")),
    };
    // Replay both witnesses.
    for (a, v) in [(fixtures::unsafe_self_feed(), &unsafe_witness), (fixtures::n_shaped(), &sp_witness)] {
        let r = v.run();
        let replay = a.run_from(&a.initial_state(), &r.fired).map_err(|err| err.to_string())?;
        if !a.enabled(&replay.end, v.transition()) {
            return Err(format!("witness transition not enabled: {v}"));
        }
    }
    Ok(format!("{} compiled automata pass; unsafe and N-shaped fixtures rejected", all.len()))
}

/// A run up to renaming of places: transitions as (inputs, outputs) with
/// places numbered in order of first appearance.
type RunShape = Vec<(Vec<usize>, Vec<(Letter, usize)>)>;

fn run_shape(a: &PetriAutomaton, r: &Run) -> RunShape {
    let mut names: BTreeMap<usize, usize> = BTreeMap::from([(a.initial, 0)]);
    let mut shape = Vec::new();
    for &t in &r.fired {
        let tr = &a.transitions[t];
        let mut name = |p: usize| {
            let next = names.len();
            *names.entry(p).or_insert(next)
        };
        let inputs: Vec<usize> = tr.inputs.iter().map(|&p| name(p)).collect();
        let mut outputs: Vec<(Letter, usize)> = tr.outputs.iter().map(|&(x, p)| (x, name(p))).collect();
        outputs.sort();
        let mut inputs = inputs;
        inputs.sort();
        shape.push((inputs, outputs));
    }
    shape
}

fn reading_duality(all: &[Expr]) -> Outcome {
    let mut graphs: BTreeMap<GraphKey, Graph> = BTreeMap::new();
    let mut runs: BTreeMap<RunShape, (PetriAutomaton, Run)> = BTreeMap::new();
    for x in all {
        graphs.extend(bounded_graphs_of_expression(x, 5));
        let a = compile(x).expect("simple");
        for r in a.enumerate_accepting_runs(6) {
            runs.entry(run_shape(&a, &r)).or_insert_with(|| (a.clone(), r));
        }
    }
    let start = Instant::now();
    let mut accepted = 0usize;
    for (a, r) in runs.values() {
        for g in graphs.values() {
            if graph_in_run_language(g, a, r).map_err(|err| err.to_string())? {
                accepted += 1;
            }
        }
    }
    Ok(format!(
        "{} distinct runs × {} graphs agree ({accepted} accepted) in {:.1?}",
        runs.len(),
        graphs.len(),
        start.elapsed()
    ))
}

fn preorder_laws() -> Outcome {
    let mut rng = StdRng::seed_from_u64(SEED + 2);
    let letters = ['a', 'b'];
    let pool: Vec<Graph> = (0..200).map(|_| small_random_graph(&mut rng, 7)).collect();
    for g in &pool {
        let phi = find_homomorphism(g, g).ok_or("not reflexive")?;
        if !is_homomorphism(&phi, g, g) {
            return Err("invalid reflexivity witness".into());
        }
    }
    let mut chains = 0;
    for i in 0..200 {
        // K ≳ H ≳ G by construction, plus random triples from the pool.
        let ops = rng.gen_range(0..=2);
        let t = random_simple_term(&mut rng, &letters, ops);
        let ops = rng.gen_range(0..=2);
        let s = random_simple_term(&mut rng, &letters, ops);
        let ops = rng.gen_range(0..=2);
        let u = random_simple_term(&mut rng, &letters, ops);
        let k = graph_of_term(&t).expect("term");
        let h = graph_of_term(&Expr::inter(t.clone(), s.clone())).expect("term");
        let g = graph_of_term(&Expr::inter(Expr::inter(t, s), u)).expect("term");
        let triples = [(g, h, k), (pool[i].clone(), pool[(i * 7 + 3) % 200].clone(), pool[(i * 13 + 5) % 200].clone())];
        for (g, h, k) in triples {
            let (Some(phi), Some(psi)) = (find_homomorphism(&g, &h), find_homomorphism(&h, &k)) else {
                continue;
            };
            // psi: K → H, phi: H → G
            let chi = compose_homomorphisms(&psi, &phi);
            if !is_homomorphism(&chi, &k, &g) {
                return Err(format!("composite witness invalid: {k:?} → {g:?}"));
            }
            chains += 1;
        }
    }
    if chains < 200 {
        return Err(format!("only {chains} transitive instances checked"));
    }
    Ok(format!("200 graphs reflexive, {chains} composed witnesses valid"))
}

type Criterion<'a> = (&'static str, Box<dyn Fn() -> Outcome + 'a>);

fn main() -> ExitCode {
    let all = corpus();
    let criteria: Vec<Criterion> = vec![
        ("homomorphism witness and its absence", Box::new(homomorphism_witness)),
        ("trace of the running example run", Box::new(running_example_trace)),
        ("decision fixtures", Box::new(decision_fixtures)),
        ("compile correctness up to 8 vertices", Box::new(|| compile_correctness(&all))),
        ("exact membership agrees with the oracle", Box::new(oracle_agreement)),
        ("relational soundness of inclusions", Box::new(relational_soundness)),
        ("extraction round trip up to 8 vertices", Box::new(|| extraction_round_trip(&all))),
        ("safety and series-parallel constraints", Box::new(|| constraint_checks(&all))),
        ("reading and homomorphism duality", Box::new(|| reading_duality(&all))),
        ("preorder laws", Box::new(preorder_laws)),
    ];
    let filter: BTreeSet<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let n = i + 1;
        if !filter.is_empty() && !filter.contains(&n) {
            continue;
        }
        match run() {
            Ok(detail) => println!("PASS {n:>2} {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL {n:>2} {name}: {detail}");
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
