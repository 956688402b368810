//! Expression corpora, random generators and bounded graph sets used for
//! cross-validation.

use std::collections::BTreeMap;

use rand::Rng;

use crate::expr::{simple_terms_within, Expr, TermBound};
use crate::graph::{graph_of_term, Graph, GraphKey, Interpretation, Relation};
use crate::petri::PetriAutomaton;

/// All simple expressions over `letters` and `0` with at most `max_ops`
/// operators, by increasing operator count.
pub fn all_simple_expressions(letters: &[char], max_ops: usize) -> Vec<Expr> {
    let mut by_ops: Vec<Vec<Expr>> = vec![letters.iter().map(|&c| Expr::var(c)).chain([Expr::Zero]).collect()];
    for k in 1..=max_ops {
        let mut layer: Vec<Expr> = by_ops[k - 1].iter().cloned().map(Expr::plus).collect();
        for i in 0..k {
            let j = k - 1 - i;
            for x in &by_ops[i] {
                for y in &by_ops[j] {
                    layer.push(Expr::union(x.clone(), y.clone()));
                    layer.push(Expr::seq(x.clone(), y.clone()));
                    layer.push(Expr::inter(x.clone(), y.clone()));
                }
            }
        }
        by_ops.push(layer);
    }
    by_ops.into_iter().flatten().collect()
}

/// A random simple expression with exactly `ops` operators.
pub fn random_simple_expression(rng: &mut impl Rng, letters: &[char], ops: usize) -> Expr {
    if ops == 0 {
        return if rng.gen_ratio(1, 12) { Expr::Zero } else { Expr::var(letters[rng.gen_range(0..letters.len())]) };
    }
    match rng.gen_range(0..4) {
        0 => Expr::plus(random_simple_expression(rng, letters, ops - 1)),
        k => {
            let left = rng.gen_range(0..ops);
            let x = random_simple_expression(rng, letters, left);
            let y = random_simple_expression(rng, letters, ops - 1 - left);
            match k {
                1 => Expr::union(x, y),
                2 => Expr::seq(x, y),
                _ => Expr::inter(x, y),
            }
        }
    }
}

/// A random simple term (sequence and intersection of letters) with
/// exactly `ops` operators.
pub fn random_simple_term(rng: &mut impl Rng, letters: &[char], ops: usize) -> Expr {
    if ops == 0 {
        return Expr::var(letters[rng.gen_range(0..letters.len())]);
    }
    let left = rng.gen_range(0..ops);
    let x = random_simple_term(rng, letters, left);
    let y = random_simple_term(rng, letters, ops - 1 - left);
    if rng.gen_bool(0.5) {
        Expr::seq(x, y)
    } else {
        Expr::inter(x, y)
    }
}

/// Each pair is related with probability `density`, independently.
pub fn random_interpretation(rng: &mut impl Rng, letters: &[char], carrier: usize, density: f64) -> Interpretation {
    letters
        .iter()
        .map(|&c| {
            let mut r = Relation::empty(carrier);
            for i in 0..carrier {
                for j in 0..carrier {
                    if rng.gen_bool(density) {
                        r.insert(i, j);
                    }
                }
            }
            (c, r)
        })
        .collect()
}

/// Graphs of the terms of a simple expression with at most `max_vertices`
/// vertices, one per isomorphism class.
pub fn bounded_graphs_of_expression(e: &Expr, max_vertices: usize) -> BTreeMap<GraphKey, Graph> {
    simple_terms_within(e, TermBound::vertices(max_vertices, max_vertices))
        .into_iter()
        .map(|(u, _)| {
            let g = graph_of_term(&u).expect("simple term");
            (g.canonical_key(), g)
        })
        .collect()
}

/// Traces of accepting runs with at most `max_vertices` vertices, one per
/// isomorphism class. An accepting run has one trace vertex per transition.
pub fn bounded_graphs_of_automaton(a: &PetriAutomaton, max_vertices: usize) -> BTreeMap<GraphKey, Graph> {
    a.enumerate_accepting_runs(max_vertices)
        .into_iter()
        .map(|r| {
            let g = a.trace_of_run(&r);
            (g.canonical_key(), g)
        })
        .collect()
}
