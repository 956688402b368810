//! JSON formats for graphs and automata.
//!
//! Graphs: `{"vertices":[..], "edges":[[src,"label",dst]], "input":v, "output":v}`.
//! Automata: `{"places":[..], "initial":"p", "transitions":[{"inputs":[..],
//! "outputs":[{"label":"a","place":"p"}]}]}`. Labels are `a`, `a'`, `1`, `top`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expr::Letter;
use crate::graph::{Graph, Vertex};
use crate::parse::Alphabet;
use crate::petri::{PetriAutomaton, PetriError, Transition};

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("malformed JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unknown label `{0}`")]
    Label(String),
    #[error("letter `{letter}` is not in the alphabet {{{alphabet}}}")]
    Alphabet { letter: char, alphabet: String },
    #[error("unknown place `{0}`")]
    Place(String),
    #[error("invalid graph: {0}")]
    Graph(#[from] crate::graph::GraphError),
    #[error("invalid automaton: {0}")]
    Automaton(#[from] PetriError),
}

#[derive(Serialize, Deserialize)]
struct GraphJson {
    vertices: Vec<Vertex>,
    edges: Vec<(Vertex, String, Vertex)>,
    input: Vertex,
    output: Vertex,
}

#[derive(Serialize, Deserialize)]
struct OutputJson {
    label: String,
    place: String,
}

#[derive(Serialize, Deserialize)]
struct TransitionJson {
    inputs: Vec<String>,
    outputs: Vec<OutputJson>,
}

#[derive(Serialize, Deserialize)]
struct AutomatonJson {
    places: Vec<String>,
    initial: String,
    transitions: Vec<TransitionJson>,
}

fn letter(s: &str, alphabet: Option<&Alphabet>) -> Result<Letter, FormatError> {
    let l = Letter::parse_label(s).ok_or_else(|| FormatError::Label(s.to_string()))?;
    if let (Some(alpha), Some(c)) = (alphabet, l.var()) {
        if !alpha.contains(c) {
            return Err(FormatError::Alphabet { letter: c, alphabet: alpha.to_string() });
        }
    }
    Ok(l)
}

pub fn graph_to_json(g: &Graph) -> String {
    let j = GraphJson {
        vertices: g.vertices.iter().copied().collect(),
        edges: g.edges.iter().map(|&(u, a, v)| (u, a.to_string(), v)).collect(),
        input: g.input,
        output: g.output,
    };
    serde_json::to_string_pretty(&j).expect("serialisable")
}

/// Parse a graph; letters are checked against `alphabet` when given.
pub fn graph_from_json(s: &str, alphabet: Option<&Alphabet>) -> Result<Graph, FormatError> {
    let j: GraphJson = serde_json::from_str(s)?;
    let mut edges = Vec::with_capacity(j.edges.len());
    for (u, l, v) in j.edges {
        edges.push((u, letter(&l, alphabet)?, v));
    }
    Ok(Graph::new(j.vertices, edges, j.input, j.output)?)
}

pub fn automaton_to_json(a: &PetriAutomaton) -> String {
    let name = |p: usize| a.places[p].clone();
    let j = AutomatonJson {
        places: a.places.clone(),
        initial: name(a.initial),
        transitions: a
            .transitions
            .iter()
            .map(|t| TransitionJson {
                inputs: t.inputs.iter().map(|&p| name(p)).collect(),
                outputs: t.outputs.iter().map(|&(x, p)| OutputJson { label: x.to_string(), place: name(p) }).collect(),
            })
            .collect(),
    };
    serde_json::to_string_pretty(&j).expect("serialisable")
}

pub fn automaton_from_json(s: &str, alphabet: Option<&Alphabet>) -> Result<PetriAutomaton, FormatError> {
    let j: AutomatonJson = serde_json::from_str(s)?;
    let index: BTreeMap<&str, usize> = j.places.iter().enumerate().map(|(i, p)| (p.as_str(), i)).collect();
    let place = |p: &str| index.get(p).copied().ok_or_else(|| FormatError::Place(p.to_string()));
    let mut transitions = Vec::with_capacity(j.transitions.len());
    for t in &j.transitions {
        let inputs = t.inputs.iter().map(|p| place(p)).collect::<Result<Vec<_>, _>>()?;
        let outputs = t
            .outputs
            .iter()
            .map(|o| Ok((letter(&o.label, alphabet)?, place(&o.place)?)))
            .collect::<Result<Vec<_>, FormatError>>()?;
        transitions.push(Transition::new(inputs, outputs));
    }
    let initial = place(&j.initial)?;
    Ok(PetriAutomaton::new(j.places.clone(), initial, transitions)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn graph_round_trip() {
        let g = fixtures::extended_reading_graph();
        assert_eq!(graph_from_json(&graph_to_json(&g), None).unwrap(), g);
    }

    #[test]
    fn automaton_round_trip() {
        let a = fixtures::extended_reading_automaton();
        assert_eq!(automaton_from_json(&automaton_to_json(&a), None).unwrap(), a);
    }

    #[test]
    fn alphabet_is_enforced() {
        let g = fixtures::running_example_trace();
        let ab = Alphabet::new(['a', 'b']);
        assert!(matches!(graph_from_json(&graph_to_json(&g), Some(&ab)), Err(FormatError::Alphabet { .. })));
    }
}
