//! SP-rewriting: the parallel rule merges edges with the same endpoints,
//! the series rule contracts an unprotected vertex with exactly one
//! incoming and one outgoing edge. Two-terminal graphs that reduce to a
//! single edge are series-parallel; the label of that edge is their term.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::expr::{inter_canon, seq_flat, Expr};
use crate::graph::{Graph, Vertex};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SpError {
    #[error("graph has a cycle")]
    Cycle,
    #[error("graph must have the input as its only source, found sources {0:?}")]
    Sources(Vec<Vertex>),
    #[error("graph must have the output as its only sink, found sinks {0:?}")]
    Sinks(Vec<Vertex>),
    #[error("input and output coincide")]
    Degenerate,
    #[error("graph reduces to an irreducible core with {vertices} vertices and {edges} edges")]
    Irreducible { vertices: usize, edges: usize },
}

/// A two-terminal graph whose edges carry expressions. Edges form a
/// multiset so that parallel copies of a non-letter label stay apart
/// until the parallel rule merges them.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabeledDag {
    pub vertices: BTreeSet<Vertex>,
    pub edges: Vec<(Vertex, Expr, Vertex)>,
    pub input: Vertex,
    pub output: Vertex,
}

impl LabeledDag {
    pub fn from_graph(g: &Graph) -> LabeledDag {
        LabeledDag {
            vertices: g.vertices.clone(),
            edges: g.edges.iter().map(|&(u, a, v)| (u, Expr::Atom(a), v)).collect(),
            input: g.input,
            output: g.output,
        }
    }
}

/// Rule-application order for [`reduce_with`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RuleOrder {
    /// Parallel rule to saturation before every series step.
    EagerParallel,
    /// Pick among applicable rule instances using a seeded generator.
    Shuffled(u64),
}

/// Reduce to the normal form, protecting the input and output.
pub fn sp_reduce(g: &LabeledDag) -> LabeledDag {
    let protected = BTreeSet::from([g.input, g.output]);
    let (vertices, edges) = reduce_with(&g.vertices, g.edges.clone(), &protected, RuleOrder::EagerParallel);
    LabeledDag { vertices, edges, input: g.input, output: g.output }
}

/// Reduce a labelled multigraph, never contracting a `protected` vertex.
pub fn reduce_with(
    vertices: &BTreeSet<Vertex>,
    mut edges: Vec<(Vertex, Expr, Vertex)>,
    protected: &BTreeSet<Vertex>,
    order: RuleOrder,
) -> (BTreeSet<Vertex>, Vec<(Vertex, Expr, Vertex)>) {
    use rand::{rngs::StdRng, Rng, SeedableRng};
    let mut vertices = vertices.clone();
    let mut rng = match order {
        RuleOrder::Shuffled(seed) => Some(StdRng::seed_from_u64(seed)),
        RuleOrder::EagerParallel => None,
    };
    loop {
        let parallel = parallel_pairs(&edges);
        let series = series_vertices(&vertices, &edges, protected);
        if parallel.is_empty() && series.is_empty() {
            break;
        }
        let do_parallel = match &mut rng {
            None => !parallel.is_empty(),
            Some(r) => {
                if parallel.is_empty() {
                    false
                } else if series.is_empty() {
                    true
                } else {
                    r.gen_bool(0.5)
                }
            }
        };
        if do_parallel {
            let (i, j) = match &mut rng {
                None => parallel[0],
                Some(r) => parallel[r.gen_range(0..parallel.len())],
            };
            let (u, f, v) = edges.remove(j);
            let (_, e, _) = edges.remove(i);
            edges.push((u, inter_canon([e, f]), v));
        } else {
            let x = match &mut rng {
                None => series[0],
                Some(r) => series[r.gen_range(0..series.len())],
            };
            let i = edges.iter().position(|e| e.2 == x).expect("one incoming edge");
            let (u, e, _) = edges.remove(i);
            let j = edges.iter().position(|e| e.0 == x).expect("one outgoing edge");
            let (_, f, w) = edges.remove(j);
            edges.push((u, seq_flat(&e, &f), w));
            vertices.remove(&x);
        }
    }
    edges.sort();
    (vertices, edges)
}

/// Index pairs `(i, j)`, `i < j`, of edges sharing both endpoints.
fn parallel_pairs(edges: &[(Vertex, Expr, Vertex)]) -> Vec<(usize, usize)> {
    let mut first: BTreeMap<(Vertex, Vertex), usize> = BTreeMap::new();
    let mut out = Vec::new();
    for (j, (u, _, v)) in edges.iter().enumerate() {
        match first.get(&(*u, *v)) {
            Some(&i) => out.push((i, j)),
            None => {
                first.insert((*u, *v), j);
            }
        }
    }
    out
}

fn series_vertices(
    vertices: &BTreeSet<Vertex>,
    edges: &[(Vertex, Expr, Vertex)],
    protected: &BTreeSet<Vertex>,
) -> Vec<Vertex> {
    let mut indeg: BTreeMap<Vertex, usize> = BTreeMap::new();
    let mut outdeg: BTreeMap<Vertex, usize> = BTreeMap::new();
    for (u, _, v) in edges {
        *outdeg.entry(*u).or_default() += 1;
        *indeg.entry(*v).or_default() += 1;
    }
    vertices
        .iter()
        .copied()
        .filter(|v| {
            !protected.contains(v)
                && indeg.get(v) == Some(&1)
                && outdeg.get(v) == Some(&1)
                && !edges.iter().any(|(a, _, b)| a == v && b == v)
        })
        .collect()
}

/// Structural obstruction to being series-parallel, if any.
pub fn sp_obstruction(g: &Graph) -> Option<SpError> {
    if g.input == g.output {
        return Some(SpError::Degenerate);
    }
    if g.topological_order().is_none() {
        return Some(SpError::Cycle);
    }
    let sources: Vec<Vertex> = g.vertices.iter().copied().filter(|&v| !g.edges.iter().any(|e| e.2 == v)).collect();
    if sources != [g.input] {
        return Some(SpError::Sources(sources));
    }
    let sinks: Vec<Vertex> = g.vertices.iter().copied().filter(|&v| !g.edges.iter().any(|e| e.0 == v)).collect();
    if sinks != [g.output] {
        return Some(SpError::Sinks(sinks));
    }
    let r = sp_reduce(&LabeledDag::from_graph(g));
    if r.vertices.len() != 2 || r.edges.len() != 1 {
        return Some(SpError::Irreducible { vertices: r.vertices.len(), edges: r.edges.len() });
    }
    None
}

pub fn is_series_parallel(g: &Graph) -> bool {
    sp_obstruction(g).is_none()
}

/// The canonical simple term of a series-parallel graph.
pub fn term_of_graph(g: &Graph) -> Result<Expr, SpError> {
    if let Some(err) = sp_obstruction(g) {
        return Err(err);
    }
    let r = sp_reduce(&LabeledDag::from_graph(g));
    Ok(r.edges.into_iter().next().expect("single edge").1)
}

/// Canonical term of a two-terminal labelled dag, if it reduces to one edge.
pub fn term_of_dag(g: &LabeledDag) -> Option<Expr> {
    let r = sp_reduce(g);
    (r.vertices.len() == 2 && r.edges.len() == 1 && r.edges[0].0 == g.input && r.edges[0].2 == g.output)
        .then(|| r.edges[0].1.clone())
}
