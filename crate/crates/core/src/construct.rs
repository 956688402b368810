//! Compilation of simple expressions into Petri automata.
//!
//! Place names record the construction path: operands of a binary node are
//! prefixed with `l.` and `r.`, fresh initial places are named `i`, so the
//! place sets of the two operands are disjoint by construction.

use std::collections::BTreeSet;

use thiserror::Error;

use crate::expr::{is_simple, Expr, Letter};
use crate::petri::{PetriAutomaton, Place, Transition};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CompileError {
    #[error("`{0}` is not simple: compile its detyped form instead")]
    NotSimple(String),
}

/// Name of the isolated place added by [`compile`].
pub const FINAL_PLACE: &str = "f";

/// Upper bound on the places of `compile(e)`: `2·|e| + 1` from the
/// constructions plus the isolated final place.
pub fn place_bound(e: &Expr) -> usize {
    2 * e.size() + 2
}

pub fn automaton_zero() -> PetriAutomaton {
    PetriAutomaton { places: vec!["i".into()], initial: 0, transitions: Vec::new() }
}

pub fn automaton_letter(x: Letter) -> PetriAutomaton {
    PetriAutomaton {
        places: vec!["i".into(), "p".into()],
        initial: 0,
        transitions: vec![Transition::new([0], [(x, 1)]), Transition::new([1], [])],
    }
}

fn initial_transitions(a: &PetriAutomaton) -> impl Iterator<Item = &Transition> {
    a.transitions.iter().filter(|t| t.inputs.len() == 1 && t.inputs.contains(&a.initial))
}

fn final_transitions(a: &PetriAutomaton) -> impl Iterator<Item = &Transition> {
    a.transitions.iter().filter(|t| t.is_final())
}

/// Places of `a` renamed with a prefix and shifted by `offset`.
fn shifted(t: &Transition, offset: usize) -> Transition {
    Transition {
        inputs: t.inputs.iter().map(|p| p + offset).collect(),
        outputs: t.outputs.iter().map(|&(x, p)| (x, p + offset)).collect(),
    }
}

struct Side {
    automaton: PetriAutomaton,
    offset: usize,
}

impl Side {
    fn initial(&self) -> Place {
        self.automaton.initial + self.offset
    }

    fn transitions(&self) -> impl Iterator<Item = Transition> + '_ {
        self.automaton.transitions.iter().map(|t| shifted(t, self.offset))
    }

    fn initials(&self) -> Vec<Transition> {
        initial_transitions(&self.automaton).map(|t| shifted(t, self.offset)).collect()
    }

    fn finals(&self) -> Vec<Transition> {
        final_transitions(&self.automaton).map(|t| shifted(t, self.offset)).collect()
    }
}

/// Lay out the places of two automata side by side, optionally after a
/// fresh initial place `i`.
fn side_by_side(a1: PetriAutomaton, a2: PetriAutomaton, fresh_initial: bool) -> (Vec<String>, Side, Side) {
    let mut places = Vec::new();
    if fresh_initial {
        places.push("i".to_string());
    }
    let o1 = places.len();
    places.extend(a1.places.iter().map(|p| format!("l.{p}")));
    let o2 = places.len();
    places.extend(a2.places.iter().map(|p| format!("r.{p}")));
    (places, Side { automaton: a1, offset: o1 }, Side { automaton: a2, offset: o2 })
}

fn finish(places: Vec<String>, initial: Place, transitions: Vec<Transition>) -> PetriAutomaton {
    let mut seen = BTreeSet::new();
    let transitions = transitions.into_iter().filter(|t| seen.insert(t.clone())).collect();
    PetriAutomaton { places, initial, transitions }
}

pub fn union_automata(a1: PetriAutomaton, a2: PetriAutomaton) -> PetriAutomaton {
    let (places, s1, s2) = side_by_side(a1, a2, true);
    let mut ts: Vec<Transition> = s1.transitions().chain(s2.transitions()).collect();
    for t in s1.initials().into_iter().chain(s2.initials()) {
        ts.push(Transition { inputs: BTreeSet::from([0]), outputs: t.outputs });
    }
    finish(places, 0, ts)
}

pub fn seq_automata(a1: PetriAutomaton, a2: PetriAutomaton) -> PetriAutomaton {
    let (places, s1, s2) = side_by_side(a1, a2, false);
    let mut ts: Vec<Transition> = s1.transitions().filter(|t| !t.is_final()).collect();
    ts.extend(s2.transitions());
    for f in s1.finals() {
        for i in s2.initials() {
            ts.push(Transition { inputs: f.inputs.clone(), outputs: i.outputs.clone() });
        }
    }
    let initial = s1.initial();
    finish(places, initial, ts)
}

pub fn plus_automaton(a: PetriAutomaton) -> PetriAutomaton {
    let mut ts = a.transitions.clone();
    for f in final_transitions(&a) {
        for i in initial_transitions(&a) {
            ts.push(Transition { inputs: f.inputs.clone(), outputs: i.outputs.clone() });
        }
    }
    finish(a.places.clone(), a.initial, ts)
}

pub fn par_automata(a1: PetriAutomaton, a2: PetriAutomaton) -> PetriAutomaton {
    let (places, s1, s2) = side_by_side(a1, a2, true);
    let mut ts: Vec<Transition> = s1.transitions().chain(s2.transitions()).filter(|t| !t.is_final()).collect();
    for t1 in s1.initials() {
        for t2 in s2.initials() {
            let outputs = t1.outputs.union(&t2.outputs).copied().collect();
            ts.push(Transition { inputs: BTreeSet::from([0]), outputs });
        }
    }
    for f1 in s1.finals() {
        for f2 in s2.finals() {
            let inputs = f1.inputs.union(&f2.inputs).copied().collect();
            ts.push(Transition { inputs, outputs: BTreeSet::new() });
        }
    }
    finish(places, 0, ts)
}

/// Structural fold of the constructions; no post-processing.
pub fn compile_raw(e: &Expr) -> Result<PetriAutomaton, CompileError> {
    if !is_simple(e) {
        return Err(CompileError::NotSimple(e.to_string()));
    }
    Ok(fold(e))
}

fn fold(e: &Expr) -> PetriAutomaton {
    match e {
        Expr::Zero => automaton_zero(),
        Expr::Atom(x) => automaton_letter(*x),
        Expr::Union(a, b) => union_automata(fold(a), fold(b)),
        Expr::Seq(a, b) => seq_automata(fold(a), fold(b)),
        Expr::Inter(a, b) => par_automata(fold(a), fold(b)),
        Expr::Plus(a) => plus_automaton(fold(a)),
        Expr::One | Expr::Top | Expr::Converse(_) => unreachable!("checked simple"),
    }
}

/// Compile a simple expression. The result never outputs into its initial
/// place and carries one extra isolated place named [`FINAL_PLACE`].
pub fn compile(e: &Expr) -> Result<PetriAutomaton, CompileError> {
    let mut a = compile_raw(e)?;
    debug_assert!(a.transitions.iter().all(|t| !t.output_places().contains(&a.initial)));
    a.places.push(FINAL_PLACE.to_string());
    Ok(a)
}

/// Compile any expression by first pushing converse to the leaves; the
/// result is over the extended alphabet.
pub fn compile_detyped(e: &Expr) -> PetriAutomaton {
    compile(&crate::expr::detype(e)).expect("detyped expressions are simple")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parse::{parse_expr, Alphabet};

    fn c(s: &str) -> PetriAutomaton {
        compile(&parse_expr(s, &Alphabet::lowercase()).unwrap()).unwrap()
    }

    #[test]
    fn letter_shape() {
        let a = c("a");
        assert_eq!(a.places, vec!["i", "p", "f"]);
        assert_eq!(a.transitions.len(), 2);
    }

    #[test]
    fn zero_has_no_runs() {
        assert!(c("0").enumerate_accepting_runs(5).is_empty());
        assert!(c("a0").enumerate_accepting_runs(5).is_empty());
    }

    #[test]
    fn intersection_free_is_sequential() {
        let a = c("(ab|c)+a");
        for t in &a.transitions {
            assert_eq!(t.inputs.len(), 1);
            assert!(t.outputs.len() <= 1);
        }
    }

    #[test]
    fn place_count_is_linear() {
        for s in ["a", "a&b", "(a|b)+&c", "((ab)+&(a|c))d"] {
            let e = parse_expr(s, &Alphabet::lowercase()).unwrap();
            assert!(compile(&e).unwrap().places.len() <= place_bound(&e));
        }
    }

    #[test]
    fn non_simple_is_rejected() {
        let e = parse_expr("a'", &Alphabet::lowercase()).unwrap();
        assert!(compile(&e).is_err());
        assert!(compile_detyped(&e).letters().contains(&Letter::Conv('a')));
    }
}
