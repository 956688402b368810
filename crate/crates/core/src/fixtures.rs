//! Small hand-built automata and graphs used by tests, benches and the CLI.

use crate::expr::Letter;
use crate::graph::Graph;
use crate::petri::{PetriAutomaton, Transition};

fn named(places: &[&str]) -> Vec<String> {
    places.iter().map(|p| p.to_string()).collect()
}

fn v(c: char) -> Letter {
    Letter::Var(c)
}

/// Nine transitions over places `A..I`, with two interleaving branches
/// from `A`, a loop through `C, D, E` and a join on `F, G`.
pub fn running_example() -> PetriAutomaton {
    let [a, b, c, d, e, f, g, h, i] = [0, 1, 2, 3, 4, 5, 6, 7, 8];
    PetriAutomaton::new(
        named(&["A", "B", "C", "D", "E", "F", "G", "H", "I"]),
        a,
        vec![
            Transition::new([a], [(v('b'), b), (v('a'), g)]),
            Transition::new([b], [(v('c'), c), (v('b'), e)]),
            Transition::new([c], [(v('a'), d)]),
            Transition::new([d, e], [(v('c'), c), (v('b'), e)]),
            Transition::new([d, e], [(v('d'), f)]),
            Transition::new([a], [(v('a'), h)]),
            Transition::new([h], [(v('b'), i)]),
            Transition::new([f, g], []),
            Transition::new([i], []),
        ],
    )
    .expect("well-formed")
}

/// The trace of the run `0;1;2;3;2;4;7` of [`running_example`].
pub fn running_example_trace() -> Graph {
    Graph::new(
        0..7,
        [
            (0, v('b'), 1),
            (0, v('a'), 6),
            (1, v('c'), 2),
            (1, v('b'), 3),
            (2, v('a'), 3),
            (3, v('c'), 4),
            (3, v('b'), 5),
            (4, v('a'), 5),
            (5, v('d'), 6),
        ],
        0,
        6,
    )
    .expect("well-formed")
}

/// A single transition putting a token back into its own input place
/// next to a token in `B`: the second firing double-marks `B`.
pub fn unsafe_self_feed() -> PetriAutomaton {
    PetriAutomaton::new(named(&["A", "B"]), 0, vec![Transition::new([0], [(v('a'), 1), (v('a'), 0)])])
        .expect("well-formed")
}

/// Safe, but its only accepting run has the N-shaped trace.
pub fn n_shaped() -> PetriAutomaton {
    let [a, b, c, d, e, f] = [0, 1, 2, 3, 4, 5];
    PetriAutomaton::new(
        named(&["A", "B", "C", "D", "E", "F"]),
        a,
        vec![
            Transition::new([a], [(v('a'), b), (v('c'), d)]),
            Transition::new([b], [(v('b'), e), (v('e'), c)]),
            Transition::new([c, d], [(v('d'), f)]),
            Transition::new([e, f], []),
        ],
    )
    .expect("well-formed")
}

/// The N-shaped graph: `a` then `b` on top, `c` then `d` below, and an
/// `e` edge crossing from the top middle to the bottom middle.
pub fn n_graph() -> Graph {
    Graph::new(0..4, [(0, v('a'), 1), (0, v('c'), 2), (1, v('b'), 3), (1, v('e'), 2), (2, v('d'), 3)], 0, 3)
        .expect("well-formed")
}

/// An automaton over the extended alphabet, using `top` and a converse letter.
pub fn extended_reading_automaton() -> PetriAutomaton {
    let [a, b, c, d, e, f] = [0, 1, 2, 3, 4, 5];
    PetriAutomaton::new(
        named(&["A", "B", "C", "D", "E", "F"]),
        a,
        vec![
            Transition::new([a], [(v('a'), b), (v('b'), c), (v('c'), d)]),
            Transition::new([b], [(Letter::Top, e)]),
            Transition::new([c, d], [(Letter::Conv('a'), f)]),
            Transition::new([e, f], []),
        ],
    )
    .expect("well-formed")
}

/// Two vertices with three parallel edges `a, b, c` from 1 to 2; input
/// and output are both 1.
pub fn extended_reading_graph() -> Graph {
    Graph::new([1, 2], [(1, v('a'), 2), (1, v('b'), 2), (1, v('c'), 2)], 1, 1).expect("well-formed")
}
