//! Reading a graph along a run, and membership in the language of an
//! automaton, `L(A) = ↓Gr(A)`.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::construct::compile;
use crate::expr::{simple_terms_within, Expr, Letter, TermBound};
use crate::graph::{find_homomorphism, graph_of_term, retype_graph, Graph, Vertex};
use crate::petri::{PetriAutomaton, Place, Run, State};
use crate::simulate::{decide_inclusion, Inclusion, SimulateError};
use crate::sp::{term_of_graph, SpError};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ReadingError {
    #[error("graph is not series-parallel: {0}")]
    NotSeriesParallel(#[from] SpError),
    #[error("reading search and homomorphism search disagree on run {run:?} (reading: {by_reading})")]
    Inconsistent { run: Run, by_reading: bool },
    #[error(transparent)]
    Simulate(#[from] SimulateError),
}

/// One token-to-vertex map per state of the run, `ρ₀ … ρₙ`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Reading(pub Vec<BTreeMap<Place, Vertex>>);

/// A reading of `g` along the run `r` of `a`, if one exists.
///
/// The run must start from `{ι}`. Output labels are read as follows: a
/// variable needs a forward edge, a converse letter a backward edge, `1`
/// forces both tokens onto the same vertex and `top` asks nothing.
pub fn read_graph_along_run(g: &Graph, a: &PetriAutomaton, r: &Run) -> Option<Reading> {
    if r.start != a.initial_state() {
        return None;
    }
    let rho0 = BTreeMap::from([(a.initial, g.input)]);
    let mut failed: BTreeSet<(usize, BTreeMap<Place, Vertex>)> = BTreeSet::new();
    let mut trail = vec![rho0.clone()];
    if extend(g, a, r, 0, &rho0, &mut failed, &mut trail) {
        Some(Reading(trail))
    } else {
        None
    }
}

fn extend(
    g: &Graph,
    a: &PetriAutomaton,
    r: &Run,
    k: usize,
    rho: &BTreeMap<Place, Vertex>,
    failed: &mut BTreeSet<(usize, BTreeMap<Place, Vertex>)>,
    trail: &mut Vec<BTreeMap<Place, Vertex>>,
) -> bool {
    if k == r.fired.len() {
        return true;
    }
    if failed.contains(&(k, rho.clone())) {
        return false;
    }
    let t = &a.transitions[r.fired[k]];
    let mut at = t.inputs.iter().map(|p| rho.get(p));
    let Some(Some(&v)) = at.next() else { return false };
    if !at.all(|w| w == Some(&v)) {
        failed.insert((k, rho.clone()));
        return false;
    }
    if t.is_final() && v != g.output {
        failed.insert((k, rho.clone()));
        return false;
    }
    let kept: BTreeMap<Place, Vertex> =
        rho.iter().filter(|(p, _)| !t.inputs.contains(p)).map(|(&p, &w)| (p, w)).collect();
    // Candidate vertices for each output place, intersecting all labels.
    let mut choices: Vec<(Place, Vec<Vertex>)> = Vec::new();
    for q in t.output_places() {
        let cands: Vec<Vertex> = g
            .vertices
            .iter()
            .copied()
            .filter(|&w| {
                t.outputs.iter().filter(|o| o.1 == q).all(|&(x, _)| match x {
                    Letter::Var(_) => g.edges.contains(&(v, x, w)),
                    Letter::Conv(c) => g.edges.contains(&(w, Letter::Var(c), v)),
                    Letter::One => v == w,
                    Letter::Top => true,
                })
            })
            .collect();
        if cands.is_empty() {
            failed.insert((k, rho.clone()));
            return false;
        }
        choices.push((q, cands));
    }
    let mut idx = vec![0usize; choices.len()];
    loop {
        let mut next = kept.clone();
        for (i, (q, cands)) in choices.iter().enumerate() {
            next.insert(*q, cands[idx[i]]);
        }
        trail.push(next.clone());
        if extend(g, a, r, k + 1, &next, failed, trail) {
            return true;
        }
        trail.pop();
        // advance the odometer
        let mut i = 0;
        loop {
            if i == idx.len() {
                failed.insert((k, rho.clone()));
                return false;
            }
            idx[i] += 1;
            if idx[i] < choices[i].1.len() {
                break;
            }
            idx[i] = 0;
            i += 1;
        }
    }
}

/// `G ∈ L(R)`, computed by reading search and by a homomorphism from the
/// retyped trace; the two answers must agree.
pub fn graph_in_run_language(g: &Graph, a: &PetriAutomaton, r: &Run) -> Result<bool, ReadingError> {
    let by_reading = read_graph_along_run(g, a, r).is_some();
    let trace = retype_graph(&a.trace_of_run(r));
    let by_hom = find_homomorphism(g, &trace).is_some();
    if by_reading != by_hom {
        return Err(ReadingError::Inconsistent { run: r.clone(), by_reading });
    }
    Ok(by_reading)
}

/// Exact membership of a series-parallel graph in `L(A)` for an automaton
/// over the base alphabet: the automaton of `trm(G)` has `G` as its only
/// trace, so membership is an inclusion question.
pub fn membership(g: &Graph, a: &PetriAutomaton) -> Result<bool, ReadingError> {
    let u = term_of_graph(g)?;
    let ag = compile(&u).expect("terms of graphs are simple");
    Ok(matches!(decide_inclusion(&ag, a)?, Inclusion::Yes))
}

/// Brute-force membership of `G` in `↓Gr(f)`: expand `f` into terms whose
/// graphs are no deeper than the longest path of `G` and search for a
/// homomorphism from each. Deeper term graphs cannot map into `G`.
pub fn membership_oracle(g: &Graph, f: &Expr) -> Result<bool, ReadingError> {
    let depth = g.longest_path().ok_or(SpError::Cycle)?;
    let bound = TermBound { unroll: depth + 1, max_vertices: usize::MAX, max_depth: depth };
    Ok(simple_terms_within(f, bound).iter().any(|(u, _)| {
        let h = graph_of_term(u).expect("simple term");
        find_homomorphism(g, &h).is_some()
    }))
}

/// Semi-decision for automata over the extended alphabet: an accepting
/// run of at most `max_len` transitions along which `g` can be read.
pub fn bounded_membership(g: &Graph, a: &PetriAutomaton, max_len: usize) -> Option<(Run, Reading)> {
    a.enumerate_accepting_runs(max_len).into_iter().find_map(|r| read_graph_along_run(g, a, &r).map(|rd| (r, rd)))
}

impl Reading {
    /// Vertices holding a token at each step.
    pub fn active(&self, k: usize) -> BTreeSet<Vertex> {
        self.0[k].values().copied().collect()
    }

    pub fn states(&self) -> Vec<State> {
        self.0.iter().map(|m| m.keys().copied().collect()).collect()
    }
}
