//! Graphviz output.

use std::fmt::Write;

use crate::extract::TypeAutomaton;
use crate::graph::Graph;
use crate::petri::PetriAutomaton;

fn quote(s: &str) -> String {
    format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\""))
}

/// The input gets an unlabelled incoming arrow, the output a double circle.
pub fn graph_dot(g: &Graph) -> String {
    let mut s = String::from("digraph G {\n  rankdir=LR;\n  start [shape=point];\n");
    for &v in &g.vertices {
        let shape = if v == g.output { "doublecircle" } else { "circle" };
        writeln!(s, "  v{v} [label=\"{v}\", shape={shape}];").unwrap();
    }
    writeln!(s, "  start -> v{};", g.input).unwrap();
    for (u, a, v) in &g.edges {
        writeln!(s, "  v{u} -> v{v} [label={}];", quote(&a.to_string())).unwrap();
    }
    s.push_str("}\n");
    s
}

/// Places are circles, transitions boxes; output arcs carry the letters.
pub fn automaton_dot(a: &PetriAutomaton) -> String {
    let mut s = String::from("digraph A {\n  rankdir=LR;\n  start [shape=point];\n");
    for (i, p) in a.places.iter().enumerate() {
        writeln!(s, "  p{i} [label={}, shape=circle];", quote(p)).unwrap();
    }
    writeln!(s, "  start -> p{};", a.initial).unwrap();
    for (k, t) in a.transitions.iter().enumerate() {
        writeln!(s, "  t{k} [label=\"{k}\", shape=box];").unwrap();
        for p in &t.inputs {
            writeln!(s, "  p{p} -> t{k};").unwrap();
        }
        for (x, q) in &t.outputs {
            writeln!(s, "  t{k} -> p{q} [label={}];", quote(&x.to_string())).unwrap();
        }
    }
    s.push_str("}\n");
    s
}

/// States are tree types in bracket notation; edges name the transitions.
pub fn type_automaton_dot(ta: &TypeAutomaton) -> String {
    let names = &ta.prepared.automaton.places;
    let mut s = String::from("digraph T {\n  rankdir=LR;\n  start [shape=point];\n");
    for (i, tau) in ta.states.iter().enumerate() {
        let shape = if i == ta.final_state { "doubleoctagon" } else { "box" };
        writeln!(s, "  s{i} [label={}, shape={shape}];", quote(&tau.render(names))).unwrap();
    }
    writeln!(s, "  start -> s{};", ta.initial).unwrap();
    for e in &ta.edges {
        writeln!(s, "  s{} -> s{} [label=\"{}\"];", e.from, e.to, e.transition).unwrap();
    }
    s.push_str("}\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn output_is_marked() {
        let d = graph_dot(&fixtures::running_example_trace());
        assert!(d.contains("v6 [label=\"6\", shape=doublecircle]"));
        assert!(d.contains("start -> v0;"));
    }

    #[test]
    fn automaton_arcs_are_labelled() {
        let d = automaton_dot(&fixtures::extended_reading_automaton());
        assert!(d.contains("t2 -> p5 [label=\"a'\"]"));
        assert!(d.contains("t1 -> p4 [label=\"top\"]"));
    }
}
