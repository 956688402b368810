//! Simulation between Petri automata over the base alphabet.
//!
//! The left automaton is explored state by state. Next to each left state
//! we keep every partial map `η` from places of the right automaton to
//! places of the left one that some parallel run of the right automaton
//! can have reached while tracking the tokens. A left run reaching `∅`
//! must be matched by a map with empty domain.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use thiserror::Error;

use crate::construct::compile;
use crate::expr::{is_simple, Expr};
use crate::extract::{check_sp_constraint, ConstraintViolation};
use crate::graph::Graph;
use crate::petri::{PetriAutomaton, Place, Run, State, Transition};
use crate::reading::{membership_oracle, ReadingError};

/// Token correspondence: right place ↦ left place.
pub type Embedding = BTreeMap<Place, Place>;

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SimPair {
    pub left: State,
    pub witnesses: BTreeSet<Embedding>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SimulateError {
    #[error("{side} automaton uses converse, 1 or top letters; inclusion is only decided over the base alphabet")]
    ExtendedAlphabet { side: &'static str },
    #[error("{side} automaton violates a constraint: {violation}")]
    Constraint { side: &'static str, violation: Box<ConstraintViolation> },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DecideError {
    #[error("`{0}` is not simple: with converse, 1 or top the simulation is incomplete, so no verdict is given")]
    NotSimple(String),
    #[error(transparent)]
    Simulate(#[from] SimulateError),
    #[error("internal error: counterexample {graph} is accepted by the oracle")]
    BadCounterexample { graph: String },
    #[error(transparent)]
    Reading(#[from] ReadingError),
}

/// Answer of [`decide_inclusion`]: `No` carries an accepting run of the
/// left automaton whose trace is not in the language of the right one.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Inclusion {
    Yes,
    No(Run),
}

/// Answer of [`decide_leq`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Verdict {
    Yes,
    No(Graph),
}

impl Verdict {
    pub fn holds(&self) -> bool {
        matches!(self, Verdict::Yes)
    }
}

pub fn initial_pair(a1: &PetriAutomaton, a2: &PetriAutomaton) -> SimPair {
    SimPair { left: a1.initial_state(), witnesses: BTreeSet::from([BTreeMap::from([(a2.initial, a1.initial)])]) }
}

/// Fire left transition `t` and collect every successor embedding.
pub fn sim_step(a1: &PetriAutomaton, a2: &PetriAutomaton, pair: &SimPair, t: usize) -> SimPair {
    let left = a1.fire(&pair.left, t).expect("left transition must be enabled");
    let tl = &a1.transitions[t];
    let mut witnesses = BTreeSet::new();
    for eta in &pair.witnesses {
        successors(a2, tl, eta, &mut witnesses);
    }
    SimPair { left, witnesses }
}

/// A right transition with, for each of its output places, the left
/// output places that may stand for it.
type Usable<'a> = (&'a Transition, Vec<(Place, Vec<Place>)>);

fn successors(a2: &PetriAutomaton, tl: &Transition, eta: &Embedding, out: &mut BTreeSet<Embedding>) {
    let consumed: BTreeSet<Place> = eta.iter().filter(|(_, l)| tl.inputs.contains(l)).map(|(&p, _)| p).collect();
    let kept: Embedding = eta.iter().filter(|(p, _)| !consumed.contains(p)).map(|(&p, &l)| (p, l)).collect();
    // Right transitions whose inputs lie among the consumed tokens and whose
    // outputs can each be matched by some left output.
    let mut usable: Vec<Usable> = Vec::new();
    for tr in &a2.transitions {
        // A right-hand final transition reads its tokens at the output, so
        // it can only follow the left automaton's final step.
        if !tr.inputs.is_subset(&consumed) || (tr.is_final() && !tl.is_final()) {
            continue;
        }
        let mut targets = Vec::new();
        let mut ok = true;
        for q in tr.output_places() {
            let cands: Vec<Place> = tl
                .output_places()
                .into_iter()
                .filter(|&r| tr.outputs.iter().filter(|o| o.1 == q).all(|&(x, _)| tl.outputs.contains(&(x, r))))
                .collect();
            if cands.is_empty() {
                ok = false;
                break;
            }
            targets.push((q, cands));
        }
        if ok {
            usable.push((tr, targets));
        }
    }
    let mut chosen = Vec::new();
    cover(&consumed, &usable, &mut chosen, &kept, out);
}

/// Enumerate sets of usable transitions whose inputs partition `rest`.
fn cover<'a>(
    rest: &BTreeSet<Place>,
    usable: &'a [Usable<'a>],
    chosen: &mut Vec<&'a Usable<'a>>,
    kept: &Embedding,
    out: &mut BTreeSet<Embedding>,
) {
    let Some(&first) = rest.first() else {
        assign(chosen, kept, out);
        return;
    };
    // The block covering the least remaining place is chosen first, so each
    // partition is produced once.
    for (i, (tr, _)) in usable.iter().enumerate() {
        if !tr.inputs.contains(&first) || !tr.inputs.is_subset(rest) {
            continue;
        }
        let remaining: BTreeSet<Place> = rest.difference(&tr.inputs).copied().collect();
        chosen.push(&usable[i]);
        cover(&remaining, usable, chosen, kept, out);
        chosen.pop();
    }
}

fn assign(chosen: &[&Usable], kept: &Embedding, out: &mut BTreeSet<Embedding>) {
    let mut slots: Vec<(Place, &Vec<Place>)> = Vec::new();
    for (_, targets) in chosen {
        for (q, cands) in targets {
            if kept.contains_key(q) || slots.iter().any(|s| s.0 == *q) {
                return;
            }
            slots.push((*q, cands));
        }
    }
    let mut idx = vec![0usize; slots.len()];
    loop {
        let mut eta = kept.clone();
        for (i, (q, cands)) in slots.iter().enumerate() {
            eta.insert(*q, cands[idx[i]]);
        }
        out.insert(eta);
        let mut i = 0;
        loop {
            if i == idx.len() {
                return;
            }
            idx[i] += 1;
            if idx[i] < slots[i].1.len() {
                break;
            }
            idx[i] = 0;
            i += 1;
        }
    }
}

fn validate(a: &PetriAutomaton, side: &'static str) -> Result<(), SimulateError> {
    if !a.is_over_base_alphabet() {
        return Err(SimulateError::ExtendedAlphabet { side });
    }
    check_sp_constraint(a).map_err(|violation| SimulateError::Constraint { side, violation: Box::new(violation) })
}

/// Decide `Gr(A1) ⊆ L(A2)` by exploring all reachable simulation pairs.
pub fn decide_inclusion(a1: &PetriAutomaton, a2: &PetriAutomaton) -> Result<Inclusion, SimulateError> {
    validate(a1, "left")?;
    validate(a2, "right")?;
    let live = a1.coreachable_states();
    let start = initial_pair(a1, a2);
    if !live.contains(&start.left) {
        return Ok(Inclusion::Yes);
    }
    let mut pairs: Vec<SimPair> = vec![start.clone()];
    let mut parent: Vec<Option<(usize, usize)>> = vec![None];
    let mut seen: HashMap<SimPair, usize> = HashMap::from([(start, 0)]);
    let mut stack = vec![0usize];
    while let Some(i) = stack.pop() {
        let pair = pairs[i].clone();
        if pair.left.is_empty() {
            if !pair.witnesses.iter().any(|eta| eta.is_empty()) {
                let mut fired = Vec::new();
                let mut j = i;
                while let Some((p, t)) = parent[j] {
                    fired.push(t);
                    j = p;
                }
                fired.reverse();
                let run = a1.run_from(&a1.initial_state(), &fired).expect("replay");
                return Ok(Inclusion::No(run));
            }
            continue;
        }
        let enabled: Vec<usize> = a1.enabled_transitions(&pair.left).collect();
        for &t in enabled.iter().rev() {
            let next = sim_step(a1, a2, &pair, t);
            if !live.contains(&next.left) || seen.contains_key(&next) {
                continue;
            }
            pairs.push(next.clone());
            parent.push(Some((i, t)));
            seen.insert(next, pairs.len() - 1);
            stack.push(pairs.len() - 1);
        }
    }
    Ok(Inclusion::Yes)
}

fn check_simple(e: &Expr) -> Result<(), DecideError> {
    if is_simple(e) && e.is_over_base_alphabet() {
        Ok(())
    } else {
        Err(DecideError::NotSimple(e.to_string()))
    }
}

/// Decide whether `e ≤ f` holds in all relational interpretations. A
/// refutation comes with a graph of `e` outside `↓Gr(f)`, checked against
/// the brute-force oracle before being returned.
pub fn decide_leq(e: &Expr, f: &Expr) -> Result<Verdict, DecideError> {
    check_simple(e)?;
    check_simple(f)?;
    let a1 = compile(e).expect("checked simple");
    let a2 = compile(f).expect("checked simple");
    match decide_inclusion(&a1, &a2)? {
        Inclusion::Yes => Ok(Verdict::Yes),
        Inclusion::No(run) => {
            let g = a1.trace_of_run(&run);
            if membership_oracle(&g, f)? {
                return Err(DecideError::BadCounterexample { graph: format!("{g:?}") });
            }
            Ok(Verdict::No(g))
        }
    }
}

/// Both directions: `(e ≤ f, f ≤ e)`.
pub fn decide_eq(e: &Expr, f: &Expr) -> Result<(Verdict, Verdict), DecideError> {
    Ok((decide_leq(e, f)?, decide_leq(f, e)?))
}
