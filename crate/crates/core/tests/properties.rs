use std::collections::{BTreeMap, BTreeSet};

use proptest::prelude::*;

use klpa::construct::place_bound;
use klpa::corpus::{bounded_graphs_of_expression, random_interpretation};
use klpa::expr::{detype, is_simple, retype_expr, terms_of, Expr, Letter};
use klpa::extract::{box_of_run, box_of_transition, prepare, type_check, PortBox, TreeType};
use klpa::graph::{
    compose_homomorphisms, eval_relational, find_homomorphism, interpretation_graph, is_homomorphism, par_compose,
    retype_graph, var_graph,
};
use klpa::petri::Run;
use klpa::reading::{read_graph_along_run, Reading};
use klpa::sp::{reduce_with, LabeledDag, RuleOrder};
use klpa::{
    check_sp_constraint, compile, decide_inclusion, decide_leq, graph_of_term, is_series_parallel, membership,
    term_of_graph, Inclusion, PetriAutomaton, Verdict,
};

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

fn var() -> impl Strategy<Value = Expr> {
    prop_oneof![Just(Expr::var('a')), Just(Expr::var('b')), Just(Expr::var('c'))]
}

/// Simple terms: sequence and intersection of letters.
fn simple_term() -> impl Strategy<Value = Expr> {
    var().prop_recursive(3, 8, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(x, y)| Expr::seq(x, y)),
            (inner.clone(), inner).prop_map(|(x, y)| Expr::inter(x, y)),
        ]
    })
}

/// Simple expressions over `a`, `b`, `c` and `0`.
fn simple_expr() -> impl Strategy<Value = Expr> {
    prop_oneof![4 => var(), 1 => Just(Expr::Zero)].prop_recursive(3, 8, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(x, y)| Expr::union(x, y)),
            (inner.clone(), inner.clone()).prop_map(|(x, y)| Expr::seq(x, y)),
            (inner.clone(), inner.clone()).prop_map(|(x, y)| Expr::inter(x, y)),
            inner.prop_map(Expr::plus),
        ]
    })
}

/// Terms with converse, `1` and `top` constructors.
fn full_term() -> impl Strategy<Value = Expr> {
    prop_oneof![4 => var(), 1 => Just(Expr::One), 1 => Just(Expr::Top)].prop_recursive(3, 6, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(x, y)| Expr::seq(x, y)),
            (inner.clone(), inner.clone()).prop_map(|(x, y)| Expr::inter(x, y)),
            inner.prop_map(Expr::converse),
        ]
    })
}

/// Full expressions: every constructor.
fn full_expr() -> impl Strategy<Value = Expr> {
    prop_oneof![4 => var(), 1 => Just(Expr::Zero), 1 => Just(Expr::One), 1 => Just(Expr::Top)].prop_recursive(
        4,
        12,
        2,
        |inner| {
            prop_oneof![
                (inner.clone(), inner.clone()).prop_map(|(x, y)| Expr::union(x, y)),
                (inner.clone(), inner.clone()).prop_map(|(x, y)| Expr::seq(x, y)),
                (inner.clone(), inner.clone()).prop_map(|(x, y)| Expr::inter(x, y)),
                inner.clone().prop_map(Expr::plus),
                inner.prop_map(Expr::converse),
            ]
        },
    )
}

/// Simple expressions over the extended alphabet.
fn extended_simple_expr() -> impl Strategy<Value = Expr> {
    let letter = prop_oneof![
        Just(Letter::Var('a')),
        Just(Letter::Var('b')),
        Just(Letter::Conv('a')),
        Just(Letter::Conv('b')),
        Just(Letter::One),
        Just(Letter::Top),
    ];
    prop_oneof![5 => letter.prop_map(Expr::Atom), 1 => Just(Expr::Zero)].prop_recursive(3, 8, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(x, y)| Expr::union(x, y)),
            (inner.clone(), inner.clone()).prop_map(|(x, y)| Expr::seq(x, y)),
            (inner.clone(), inner.clone()).prop_map(|(x, y)| Expr::inter(x, y)),
            inner.prop_map(Expr::plus),
        ]
    })
}

fn has_non_simple_constructor(e: &Expr) -> bool {
    match e {
        Expr::One | Expr::Top | Expr::Converse(_) => true,
        Expr::Zero | Expr::Atom(_) => false,
        Expr::Plus(x) => has_non_simple_constructor(x),
        Expr::Union(x, y) | Expr::Seq(x, y) | Expr::Inter(x, y) => {
            has_non_simple_constructor(x) || has_non_simple_constructor(y)
        }
    }
}

/// One sequence of states along `fired`, with the box of every step.
fn step_boxes(a: &PetriAutomaton, fired: &[usize], final_port: usize) -> Vec<PortBox> {
    let mut s = a.initial_state();
    let mut out = Vec::new();
    for &t in fired {
        out.push(box_of_transition(a, t, &s, final_port).unwrap());
        s = a.fire(&s, t).unwrap();
    }
    out
}

fn erase(b: &PortBox) -> PortBox {
    PortBox { edges: b.edges.iter().map(|(u, _, v)| (*u, Expr::One, *v)).collect(), ..b.clone() }
}

/// Check the reading conditions directly, for graphs over plain letters.
fn is_reading(g: &klpa::Graph, a: &PetriAutomaton, r: &Run, rho: &Reading) -> bool {
    let maps = &rho.0;
    if maps.len() != r.fired.len() + 1 || maps[0] != BTreeMap::from([(a.initial, g.input)]) {
        return false;
    }
    for (k, &t) in r.fired.iter().enumerate() {
        let tr = &a.transitions[t];
        let (now, next) = (&maps[k], &maps[k + 1]);
        let at: BTreeSet<usize> = tr.inputs.iter().filter_map(|p| now.get(p).copied()).collect();
        if at.len() != 1 || !tr.inputs.iter().all(|p| now.contains_key(p)) {
            return false;
        }
        let v = *at.first().unwrap();
        if tr.outputs.is_empty() && v != g.output {
            return false;
        }
        for (p, w) in now {
            if !tr.inputs.contains(p) && next.get(p) != Some(w) {
                return false;
            }
        }
        for (x, q) in &tr.outputs {
            let Letter::Var(_) = x else { return false };
            match next.get(q) {
                Some(&w) if g.edges.contains(&(v, *x, w)) => {}
                _ => return false,
            }
        }
        let expected: BTreeSet<usize> =
            now.keys().filter(|p| !tr.inputs.contains(p)).copied().chain(tr.output_places()).collect();
        if next.keys().copied().collect::<BTreeSet<_>>() != expected {
            return false;
        }
    }
    true
}

fn active(a: &PetriAutomaton, r: &Run, rho: &Reading, k: usize) -> usize {
    let p = a.transitions[r.fired[k]].inputs.first().copied().expect("transitions consume");
    rho.0[k][&p]
}

/// The reading along the run with steps `k` and `k + 1` swapped.
fn exchanged_reading(a: &PetriAutomaton, r: &Run, rho: &Reading, k: usize) -> Reading {
    let later = &a.transitions[r.fired[k + 1]];
    let mut maps = rho.0.clone();
    let mut mid = BTreeMap::new();
    for (&p, &v) in &rho.0[k] {
        if !later.inputs.contains(&p) {
            mid.insert(p, v);
        }
    }
    for q in later.output_places() {
        mid.insert(q, rho.0[k + 2][&q]);
    }
    maps[k + 1] = mid;
    Reading(maps)
}

/// A random linear extension of the edges of `g`, as vertex positions.
fn random_topological_positions(g: &klpa::Graph, rng: &mut StdRng) -> BTreeMap<usize, usize> {
    let mut indegree: BTreeMap<usize, usize> = g.vertices.iter().map(|&v| (v, 0)).collect();
    for &(_, _, v) in &g.edges {
        *indegree.get_mut(&v).unwrap() += 1;
    }
    let mut ready: Vec<usize> = indegree.iter().filter(|(_, &d)| d == 0).map(|(&v, _)| v).collect();
    let mut pos = BTreeMap::new();
    while !ready.is_empty() {
        let v = ready.swap_remove(rng.gen_range(0..ready.len()));
        pos.insert(v, pos.len());
        for &(u, _, w) in &g.edges {
            if u == v {
                let d = indegree.get_mut(&w).unwrap();
                *d -= 1;
                if *d == 0 {
                    ready.push(w);
                }
            }
        }
    }
    pos
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 256, ..ProptestConfig::default() })]

    #[test]
    fn detype_removes_non_simple_constructors(e in full_expr()) {
        let d = detype(&e);
        prop_assert!(is_simple(&d));
        prop_assert!(!has_non_simple_constructor(&d));
    }

    #[test]
    fn detype_inverts_retype(e in extended_simple_expr()) {
        prop_assert_eq!(detype(&retype_expr(&e)), e);
    }

    #[test]
    fn terms_are_monotone_in_the_unroll_bound(e in simple_expr()) {
        for k in 1..3 {
            prop_assert!(terms_of(&e, k).is_subset(&terms_of(&e, k + 1)));
        }
    }

    #[test]
    fn terms_have_series_parallel_graphs(e in simple_expr()) {
        for u in terms_of(&e, 2) {
            let g = graph_of_term(&u).unwrap();
            prop_assert!(is_series_parallel(&g));
            let back = graph_of_term(&term_of_graph(&g).unwrap()).unwrap();
            prop_assert!(back.is_isomorphic(&g));
        }
    }

    #[test]
    fn term_graphs_are_enumerated_by_their_expression(e in simple_expr()) {
        let graphs = bounded_graphs_of_expression(&e, 7);
        for u in terms_of(&e, 2) {
            let g = graph_of_term(&u).unwrap();
            if g.vertex_count() <= 7 {
                prop_assert!(graphs.contains_key(&g.canonical_key()));
            }
        }
    }

    #[test]
    fn reduction_is_confluent(u in simple_term(), s1 in any::<u64>(), s2 in any::<u64>()) {
        let g = LabeledDag::from_graph(&graph_of_term(&u).unwrap());
        let protected = BTreeSet::from([g.input, g.output]);
        let reduce = |seed| reduce_with(&g.vertices, g.edges.clone(), &protected, RuleOrder::Shuffled(seed));
        let (v1, e1) = reduce(s1);
        let (v2, e2) = reduce(s2);
        prop_assert_eq!(v1.len(), 2);
        prop_assert_eq!(&v1, &v2);
        prop_assert_eq!(e1, e2);
    }

    #[test]
    fn retyping_commutes_with_graphs(u in full_term()) {
        let direct = graph_of_term(&u).unwrap();
        let via = retype_graph(&graph_of_term(&detype(&u)).unwrap());
        prop_assert!(via.is_isomorphic(&direct), "{}", u);
    }

    #[test]
    fn relations_are_read_by_homomorphisms(v in simple_term(), seed in any::<u64>(), n in 1usize..=4) {
        let mut rng = StdRng::seed_from_u64(seed);
        let sigma = random_interpretation(&mut rng, &['a', 'b', 'c'], n, 0.4);
        let r = eval_relational(&v, &sigma, n);
        let gv = graph_of_term(&v).unwrap();
        for i in 0..n {
            for j in 0..n {
                let h = find_homomorphism(&interpretation_graph(&sigma, n, i, j), &gv);
                prop_assert_eq!(r.contains(i, j), h.is_some());
            }
        }
    }

    #[test]
    fn preorder_witnesses_compose(x in simple_term(), y in simple_term(), z in simple_term()) {
        let (gx, gy, gz) = (graph_of_term(&x).unwrap(), graph_of_term(&y).unwrap(), graph_of_term(&z).unwrap());
        let id = find_homomorphism(&gx, &gx).unwrap();
        prop_assert!(is_homomorphism(&id, &gx, &gx));
        // x ≥ x&y ≥ (x&y)&z, witnessed by embeddings
        let gxy = par_compose(&gx, &gy);
        let gxyz = par_compose(&gxy, &gz);
        let phi = find_homomorphism(&gxy, &gx).unwrap();
        let psi = find_homomorphism(&gxyz, &gxy).unwrap();
        prop_assert!(is_homomorphism(&compose_homomorphisms(&phi, &psi), &gx, &gxyz));
    }

    #[test]
    fn compiled_automata_satisfy_the_constraints(e in simple_expr()) {
        let a = compile(&e).unwrap();
        prop_assert!(a.places.len() <= place_bound(&e));
        prop_assert!(a.check_safety().is_safe());
        prop_assert!(check_sp_constraint(&a).is_ok());
        for r in a.enumerate_accepting_runs(6) {
            let g = a.trace_of_run(&r);
            prop_assert!(is_series_parallel(&g));
            for (k, &t) in r.fired.iter().enumerate() {
                let sink = !g.edges.iter().any(|e| e.0 == k);
                prop_assert_eq!(sink, a.transitions[t].outputs.is_empty());
            }
        }
    }

    #[test]
    fn exchange_preserves_readings(e in simple_expr()) {
        let a = compile(&e).unwrap();
        for r in a.enumerate_accepting_runs(5) {
            let g = a.trace_of_run(&r);
            prop_assert!(read_graph_along_run(&g, &a, &r).is_some());
            for k in 0..r.fired.len().saturating_sub(1) {
                if a.exchangeable(&r, k) {
                    let swapped = a.exchange_transitions(&r, k).unwrap();
                    prop_assert!(read_graph_along_run(&g, &a, &swapped).is_some());
                }
            }
        }
    }

    #[test]
    fn readings_can_follow_any_topological_order(e in simple_expr(), seed in any::<u64>()) {
        let a = compile(&e).unwrap();
        let mut rng = StdRng::seed_from_u64(seed);
        for r in a.enumerate_accepting_runs(6) {
            let g = a.trace_of_run(&r);
            let pos = random_topological_positions(&g, &mut rng);
            let mut run = r.clone();
            let mut rho = read_graph_along_run(&g, &a, &run).unwrap();
            prop_assert!(is_reading(&g, &a, &run, &rho));
            let n = run.fired.len();
            for _ in 0..n * n {
                let Some(k) = (0..n.saturating_sub(1))
                    .find(|&k| pos[&active(&a, &run, &rho, k + 1)] < pos[&active(&a, &run, &rho, k)])
                else {
                    break;
                };
                prop_assert!(a.exchangeable(&run, k));
                rho = exchanged_reading(&a, &run, &rho, k);
                run = a.exchange_transitions(&run, k).unwrap();
                prop_assert!(is_reading(&g, &a, &run, &rho));
            }
            for k in 0..n.saturating_sub(1) {
                prop_assert!(pos[&active(&a, &run, &rho, k)] <= pos[&active(&a, &run, &rho, k + 1)]);
            }
        }
    }

    #[test]
    fn languages_are_downward_closed(f in simple_expr(), extra in simple_term()) {
        let a = compile(&f).unwrap();
        let h = graph_of_term(&extra).unwrap();
        for u in terms_of(&f, 2).into_iter().take(4) {
            let g = graph_of_term(&u).unwrap();
            prop_assert!(membership(&g, &a).unwrap());
            prop_assert!(membership(&par_compose(&g, &h), &a).unwrap());
            prop_assert!(membership(&par_compose(&g, &var_graph(Letter::Var('c'))), &a).unwrap());
        }
    }

    #[test]
    fn decisions_agree_with_traces(e in simple_expr(), f in simple_expr()) {
        let (a1, a2) = (compile(&e).unwrap(), compile(&f).unwrap());
        let yes = matches!(decide_inclusion(&a1, &a2).unwrap(), Inclusion::Yes);
        if yes {
            for r in a1.enumerate_accepting_runs(8) {
                prop_assert!(membership(&a1.trace_of_run(&r), &a2).unwrap());
            }
        }
        match decide_leq(&e, &f).unwrap() {
            Verdict::Yes => prop_assert!(yes),
            Verdict::No(g) => {
                prop_assert!(!yes);
                let n = g.vertex_count();
                let graphs = bounded_graphs_of_expression(&e, n);
                prop_assert!(graphs.contains_key(&g.canonical_key()));
                let from_terms = terms_of(&e, n + 1)
                    .iter()
                    .any(|u| graph_of_term(u).unwrap().is_isomorphic(&g));
                prop_assert!(from_terms);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 128, ..ProptestConfig::default() })]

    #[test]
    fn boxes_form_a_category(e in simple_expr()) {
        let a = compile(&e).unwrap();
        let p = prepare(&a);
        let (a, f) = (&p.automaton, p.final_place);
        for r in a.enumerate_accepting_runs(6) {
            let boxes = step_boxes(a, &r.fired, f);
            for w in boxes.windows(3) {
                let left = w[0].compose(&w[1]).unwrap().compose(&w[2]).unwrap();
                let right = w[0].compose(&w[1].compose(&w[2]).unwrap()).unwrap();
                prop_assert_eq!(left.key(), right.key());
            }
            for b in &boxes {
                let id_in = PortBox::identity(&b.input_ports());
                let id_out = PortBox::identity(&b.output_ports());
                prop_assert_eq!(id_in.compose(b).unwrap().key(), b.key());
                prop_assert_eq!(b.compose(&id_out).unwrap().key(), b.key());
            }
            for w in boxes.windows(2) {
                let glued = w[0].compose(&w[1]).unwrap();
                prop_assert_eq!(erase(&glued).key(), erase(&w[0]).compose(&erase(&w[1])).unwrap().key());
            }

            let whole = box_of_run(a, &r, f).unwrap();
            let g = whole.dag_graph(whole.pin[&a.initial], whole.pout[&f]).unwrap();
            prop_assert!(g.is_isomorphic(&a.trace_of_run(&r)));
        }
    }

    #[test]
    fn typed_boxes_compose(e in simple_expr()) {
        let a = compile(&e).unwrap();
        let p = prepare(&a);
        let (a, f) = (&p.automaton, p.final_place);
        for r in a.enumerate_accepting_runs(6) {
            let boxes = step_boxes(a, &r.fired, f);
            let mut types = vec![TreeType::Leaf(a.initial)];
            for b in &boxes {
                let next = type_check(types.last().unwrap(), b);
                prop_assert!(next.is_some());
                types.push(next.unwrap());
            }
            for i in 0..boxes.len() {
                for j in i + 1..boxes.len() {
                    let mut glued = boxes[i].clone();
                    for b in &boxes[i + 1..=j] {
                        glued = glued.compose(b).unwrap();
                    }
                    prop_assert_eq!(type_check(&types[i], &glued), Some(types[j + 1].clone()));
                }
            }
        }
    }
}
