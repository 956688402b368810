//! Petri automata: places, transitions with letter-labelled outputs, the
//! firing rule, runs and their traces, safety and run reordering.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use thiserror::Error;

use crate::expr::Letter;
use crate::graph::Graph;

pub type Place = usize;
pub type State = BTreeSet<Place>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PetriError {
    #[error("transition {transition} has an empty input set")]
    EmptyInputs { transition: usize },
    #[error("transition {transition} refers to unknown place {place}")]
    UnknownPlace { transition: usize, place: Place },
    #[error("initial place {0} is not a place")]
    UnknownInitial(Place),
    #[error("duplicate place name `{0}`")]
    DuplicatePlace(String),
    #[error("transition {transition} is not enabled: missing places {missing:?}")]
    NotEnabled { transition: usize, missing: Vec<String> },
    #[error("no transition {0}")]
    UnknownTransition(usize),
    #[error("transitions at positions {k} and {} are not exchangeable", .k + 1)]
    NotExchangeable { k: usize },
}

/// A transition: a non-empty input set and a set of labelled outputs.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Transition {
    pub inputs: BTreeSet<Place>,
    pub outputs: BTreeSet<(Letter, Place)>,
}

impl Transition {
    pub fn new(
        inputs: impl IntoIterator<Item = Place>,
        outputs: impl IntoIterator<Item = (Letter, Place)>,
    ) -> Transition {
        Transition { inputs: inputs.into_iter().collect(), outputs: outputs.into_iter().collect() }
    }

    pub fn is_final(&self) -> bool {
        self.outputs.is_empty()
    }

    /// Places receiving a token.
    pub fn output_places(&self) -> BTreeSet<Place> {
        self.outputs.iter().map(|&(_, p)| p).collect()
    }
}

/// `⟨P, T, ι⟩`, with places named for display and serialisation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PetriAutomaton {
    pub places: Vec<String>,
    pub initial: Place,
    pub transitions: Vec<Transition>,
}

/// A run: the starting state, the fired transitions (by index) and the
/// state reached.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Run {
    pub start: State,
    pub fired: Vec<usize>,
    pub end: State,
}

impl PetriAutomaton {
    pub fn new(places: Vec<String>, initial: Place, transitions: Vec<Transition>) -> Result<Self, PetriError> {
        let mut seen = BTreeSet::new();
        for p in &places {
            if !seen.insert(p) {
                return Err(PetriError::DuplicatePlace(p.clone()));
            }
        }
        if initial >= places.len() {
            return Err(PetriError::UnknownInitial(initial));
        }
        for (i, t) in transitions.iter().enumerate() {
            if t.inputs.is_empty() {
                return Err(PetriError::EmptyInputs { transition: i });
            }
            if let Some(&p) = t.inputs.iter().chain(t.output_places().iter()).find(|&&p| p >= places.len()) {
                return Err(PetriError::UnknownPlace { transition: i, place: p });
            }
        }
        let mut dedup = BTreeSet::new();
        let transitions = transitions.into_iter().filter(|t| dedup.insert(t.clone())).collect();
        Ok(PetriAutomaton { places, initial, transitions })
    }

    pub fn place_index(&self, name: &str) -> Option<Place> {
        self.places.iter().position(|p| p == name)
    }

    pub fn initial_state(&self) -> State {
        BTreeSet::from([self.initial])
    }

    pub fn letters(&self) -> BTreeSet<Letter> {
        self.transitions.iter().flat_map(|t| t.outputs.iter().map(|o| o.0)).collect()
    }

    /// True when every output label is a letter of the base alphabet.
    pub fn is_over_base_alphabet(&self) -> bool {
        self.letters().iter().all(|l| l.is_plain())
    }

    pub fn enabled(&self, s: &State, t: usize) -> bool {
        self.transitions[t].inputs.is_subset(s)
    }

    pub fn enabled_transitions<'a>(&'a self, s: &'a State) -> impl Iterator<Item = usize> + 'a {
        (0..self.transitions.len()).filter(move |&t| self.enabled(s, t))
    }

    /// `(S ∖ ▸t) ∪ places(t▸)`.
    pub fn fire(&self, s: &State, t: usize) -> Result<State, PetriError> {
        let tr = self.transitions.get(t).ok_or(PetriError::UnknownTransition(t))?;
        let missing: Vec<String> = tr.inputs.difference(s).map(|&p| self.places[p].clone()).collect();
        if !missing.is_empty() {
            return Err(PetriError::NotEnabled { transition: t, missing });
        }
        let mut next: State = s.difference(&tr.inputs).copied().collect();
        next.extend(tr.output_places());
        Ok(next)
    }

    /// Replay a transition sequence from a state, producing a run.
    pub fn run_from(&self, start: &State, fired: &[usize]) -> Result<Run, PetriError> {
        let mut s = start.clone();
        for &t in fired {
            s = self.fire(&s, t)?;
        }
        Ok(Run { start: start.clone(), fired: fired.to_vec(), end: s })
    }

    /// All intermediate states `S_0 .. S_n` of a run.
    pub fn states_of(&self, r: &Run) -> Vec<State> {
        let mut out = vec![r.start.clone()];
        for &t in &r.fired {
            let next = self.fire(out.last().expect("non-empty"), t).expect("valid run");
            out.push(next);
        }
        out
    }

    /// Ready-made error naming the places of a state.
    pub fn state_names(&self, s: &State) -> Vec<String> {
        s.iter().map(|&p| self.places[p].clone()).collect()
    }

    /// Reachable states from `{ι}` with, for each, a transition sequence reaching it.
    pub fn reachable_states(&self) -> BTreeMap<State, Vec<usize>> {
        let mut seen: BTreeMap<State, Vec<usize>> = BTreeMap::new();
        let init = self.initial_state();
        seen.insert(init.clone(), Vec::new());
        let mut queue = VecDeque::from([init]);
        while let Some(s) = queue.pop_front() {
            let path = seen[&s].clone();
            for t in self.enabled_transitions(&s).collect::<Vec<_>>() {
                let next = self.fire(&s, t).expect("enabled");
                if !seen.contains_key(&next) {
                    let mut p = path.clone();
                    p.push(t);
                    seen.insert(next.clone(), p);
                    queue.push_back(next);
                }
            }
        }
        seen
    }

    /// Reachable states from which the empty state is reachable.
    pub fn coreachable_states(&self) -> BTreeSet<State> {
        let reach = self.reachable_states();
        let mut preds: BTreeMap<State, Vec<State>> = BTreeMap::new();
        for s in reach.keys() {
            for t in self.enabled_transitions(s) {
                let next = self.fire(s, t).expect("enabled");
                preds.entry(next).or_default().push(s.clone());
            }
        }
        let mut good = BTreeSet::new();
        let empty = State::new();
        if reach.contains_key(&empty) {
            good.insert(empty.clone());
            let mut queue = VecDeque::from([empty]);
            while let Some(s) = queue.pop_front() {
                for p in preds.get(&s).into_iter().flatten() {
                    if good.insert(p.clone()) {
                        queue.push_back(p.clone());
                    }
                }
            }
        }
        good
    }

    /// Breadth-first search for a reachable state where some enabled
    /// transition would put a second token in a place.
    pub fn check_safety(&self) -> SafetyReport {
        let mut seen: BTreeMap<State, Vec<usize>> = BTreeMap::new();
        let init = self.initial_state();
        seen.insert(init.clone(), Vec::new());
        let mut queue = VecDeque::from([init]);
        while let Some(s) = queue.pop_front() {
            let path = seen[&s].clone();
            for t in self.enabled_transitions(&s).collect::<Vec<_>>() {
                let tr = &self.transitions[t];
                let rest: State = s.difference(&tr.inputs).copied().collect();
                let clash: Vec<Place> = rest.intersection(&tr.output_places()).copied().collect();
                if !clash.is_empty() {
                    let run = self.run_from(&self.initial_state(), &path).expect("replay");
                    return SafetyReport::Violation { run, transition: t, places: clash };
                }
                let next = self.fire(&s, t).expect("enabled");
                if !seen.contains_key(&next) {
                    let mut p = path.clone();
                    p.push(t);
                    seen.insert(next.clone(), p);
                    queue.push_back(next);
                }
            }
        }
        SafetyReport::Safe
    }

    /// The trace of a run: one vertex per fired transition, plus one per
    /// place of the end state; each output token links its producer to its
    /// next consumer.
    pub fn trace_of_run(&self, r: &Run) -> Graph {
        let n = r.fired.len();
        let place_vertex = |p: Place| n + p;
        let mut vertices: BTreeSet<usize> = (0..n).collect();
        vertices.extend(r.end.iter().map(|&p| place_vertex(p)));
        let mut edges = BTreeSet::new();
        for (k, &t) in r.fired.iter().enumerate() {
            for &(a, p) in &self.transitions[t].outputs {
                let next = (k + 1..n).find(|&l| self.transitions[r.fired[l]].inputs.contains(&p));
                let target = next.unwrap_or_else(|| place_vertex(p));
                vertices.insert(target);
                edges.insert((k, a, target));
            }
        }
        let output = if n == 0 { 0 } else { n - 1 };
        if n == 0 {
            vertices.insert(0);
        }
        Graph { vertices, edges, input: 0, output }
    }

    /// No empty-output transition fires except as the very last step into
    /// the empty state.
    pub fn is_proper(&self, r: &Run) -> bool {
        let states = self.states_of(r);
        let n = r.fired.len();
        r.fired
            .iter()
            .enumerate()
            .all(|(i, &t)| !self.transitions[t].is_final() || (i + 1 == n && states[n].is_empty()))
    }

    /// All accepting runs (from `{ι}` to `∅`) with at most `max_len`
    /// transitions, in lexicographic order of transition indices.
    pub fn enumerate_accepting_runs(&self, max_len: usize) -> Vec<Run> {
        let dist = self.distance_to_empty();
        let mut out = Vec::new();
        let mut path = Vec::new();
        let init = self.initial_state();
        self.enumerate_from(&init, max_len, &dist, &mut path, &mut out);
        out
    }

    fn enumerate_from(
        &self,
        s: &State,
        budget: usize,
        dist: &BTreeMap<State, usize>,
        path: &mut Vec<usize>,
        out: &mut Vec<Run>,
    ) {
        if s.is_empty() {
            out.push(Run { start: self.initial_state(), fired: path.clone(), end: State::new() });
            return;
        }
        if dist.get(s).is_none_or(|&d| d > budget) {
            return;
        }
        for t in self.enabled_transitions(s).collect::<Vec<_>>() {
            let next = self.fire(s, t).expect("enabled");
            path.push(t);
            self.enumerate_from(&next, budget - 1, dist, path, out);
            path.pop();
        }
    }

    /// Fewest transitions needed to reach `∅` from each reachable state.
    fn distance_to_empty(&self) -> BTreeMap<State, usize> {
        let reach = self.reachable_states();
        let mut preds: BTreeMap<State, Vec<State>> = BTreeMap::new();
        for s in reach.keys() {
            for t in self.enabled_transitions(s) {
                preds.entry(self.fire(s, t).expect("enabled")).or_default().push(s.clone());
            }
        }
        let mut dist = BTreeMap::new();
        let empty = State::new();
        if reach.contains_key(&empty) {
            dist.insert(empty.clone(), 0);
            let mut queue = VecDeque::from([empty]);
            while let Some(s) = queue.pop_front() {
                let d = dist[&s];
                for p in preds.get(&s).into_iter().flatten() {
                    if !dist.contains_key(p) {
                        dist.insert(p.clone(), d + 1);
                        queue.push_back(p.clone());
                    }
                }
            }
        }
        dist
    }

    /// Both constraints, decided by building the type automaton.
    pub fn check_sp_constraint(&self) -> Result<(), crate::extract::ConstraintViolation> {
        crate::extract::check_sp_constraint(self)
    }

    /// True when no input place of the transition at `k + 1` is an output
    /// place of the transition at `k`.
    pub fn exchangeable(&self, r: &Run, k: usize) -> bool {
        if k + 1 >= r.fired.len() {
            return false;
        }
        let first = &self.transitions[r.fired[k]];
        let second = &self.transitions[r.fired[k + 1]];
        second.inputs.is_disjoint(&first.output_places())
    }

    /// Swap the transitions at positions `k` and `k + 1`.
    pub fn exchange_transitions(&self, r: &Run, k: usize) -> Result<Run, PetriError> {
        if !self.exchangeable(r, k) {
            return Err(PetriError::NotExchangeable { k });
        }
        let mut fired = r.fired.clone();
        fired.swap(k, k + 1);
        match self.run_from(&r.start, &fired) {
            Ok(run) => Ok(run),
            Err(_) => Err(PetriError::NotExchangeable { k }),
        }
    }
}

/// Result of [`PetriAutomaton::check_safety`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SafetyReport {
    Safe,
    /// Firing `transition` after `run` would double-mark `places`.
    Violation {
        run: Run,
        transition: usize,
        places: Vec<Place>,
    },
}

impl SafetyReport {
    pub fn is_safe(&self) -> bool {
        matches!(self, SafetyReport::Safe)
    }
}

impl fmt::Display for PetriAutomaton {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "initial {}", self.places[self.initial])?;
        for (i, t) in self.transitions.iter().enumerate() {
            let ins: Vec<&str> = t.inputs.iter().map(|&p| self.places[p].as_str()).collect();
            let outs: Vec<String> = t.outputs.iter().map(|(a, p)| format!("{a}:{}", self.places[*p])).collect();
            writeln!(f, "{i}: {{{}}} -> {{{}}}", ins.join(","), outs.join(","))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn letter_automaton() -> PetriAutomaton {
        PetriAutomaton::new(
            vec!["i".into(), "p".into()],
            0,
            vec![Transition::new([0], [(Letter::Var('a'), 1)]), Transition::new([1], [])],
        )
        .unwrap()
    }

    #[test]
    fn letter_automaton_runs() {
        let a = letter_automaton();
        let runs = a.enumerate_accepting_runs(2);
        assert_eq!(runs.len(), 1);
        let g = a.trace_of_run(&runs[0]);
        assert!(g.is_isomorphic(&crate::graph::var_graph(Letter::Var('a'))));
        assert!(a.is_proper(&runs[0]));
        assert!(a.check_safety().is_safe());
    }

    #[test]
    fn firing_errors_name_missing_places() {
        let a = letter_automaton();
        let err = a.fire(&BTreeSet::from([0]), 1).unwrap_err();
        assert_eq!(err, PetriError::NotEnabled { transition: 1, missing: vec!["p".into()] });
        assert_eq!(a.fire(&BTreeSet::from([1]), 1).unwrap(), State::new());
    }

    #[test]
    fn validation() {
        assert!(PetriAutomaton::new(vec!["i".into()], 0, vec![Transition::new([], [])]).is_err());
        assert!(PetriAutomaton::new(vec!["i".into()], 0, vec![Transition::new([3], [])]).is_err());
        assert!(PetriAutomaton::new(vec!["i".into(), "i".into()], 0, vec![]).is_err());
    }
}
