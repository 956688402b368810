//! From Petri automata back to expressions.
//!
//! A run is cut into boxes: acyclic slices with input ports (`pin`) and
//! output ports (`pout`) named by places. Tree types summarise how the
//! tokens of a state hang together once the prefix read so far is
//! SP-reduced. The type automaton has types as states and transition boxes
//! as edges; eliminating its inner states with finite templates (sets of
//! expression-labelled boxes) leaves the expression of the automaton.
//!
//! Building the type automaton also decides the series-parallel constraint.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use thiserror::Error;

use crate::canon::{canonical, CanonKey};
use crate::construct::FINAL_PLACE;
use crate::expr::{union_tidy, Expr};
use crate::graph::Graph;
use crate::petri::{PetriAutomaton, Place, Run, SafetyReport, State, Transition};
use crate::sp::{reduce_with, term_of_dag, LabeledDag, RuleOrder};

/// Ports are places; [`CENTER`] is the extra port used when an atomic box
/// is split at its center vertex.
pub type Port = usize;
pub const CENTER: Port = usize::MAX;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExtractError {
    #[error("cannot compose boxes: output ports {left:?} differ from input ports {right:?}")]
    PortMismatch { left: Vec<Port>, right: Vec<Port> },
    #[error("transition {transition} is not enabled in the given state")]
    NotEnabled { transition: usize },
    #[error("final transition {transition} fired from a state strictly larger than its inputs")]
    NotProper { transition: usize },
    #[error("template is not atomic: {0}")]
    NotAtomic(String),
    #[error("supports of atomic boxes overlap without nesting")]
    SupportsCross,
    #[error("box has no center vertex")]
    NoCenter,
    #[error("loop component moves tokens across ports: {0}")]
    PortCrossing(String),
    #[error("box does not reduce to a single edge")]
    NotSeriesParallel,
    #[error(transparent)]
    Constraint(#[from] ConstraintViolation),
}

/// A box `⟨pin, G, pout⟩`: input ports are the keys of `pin`, output ports
/// the keys of `pout`, which maps bijectively onto the sinks of the dag.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PortBox {
    pub vertices: BTreeSet<usize>,
    pub edges: Vec<(usize, Expr, usize)>,
    pub pin: BTreeMap<Port, usize>,
    pub pout: BTreeMap<Port, usize>,
}

/// Isomorphism-invariant key of a box.
pub type BoxKey = CanonKey<(Vec<Port>, Vec<Port>), Expr>;

impl PortBox {
    pub fn identity(ports: &BTreeSet<Port>) -> PortBox {
        let map: BTreeMap<Port, usize> = ports.iter().enumerate().map(|(i, &p)| (p, i)).collect();
        PortBox { vertices: (0..ports.len()).collect(), edges: Vec::new(), pin: map.clone(), pout: map }
    }

    pub fn input_ports(&self) -> BTreeSet<Port> {
        self.pin.keys().copied().collect()
    }

    pub fn output_ports(&self) -> BTreeSet<Port> {
        self.pout.keys().copied().collect()
    }

    /// Check that `pout` is a bijection onto the sinks and the dag is acyclic.
    pub fn is_well_formed(&self) -> bool {
        let sinks: BTreeSet<usize> =
            self.vertices.iter().copied().filter(|v| !self.edges.iter().any(|e| e.0 == *v)).collect();
        let images: BTreeSet<usize> = self.pout.values().copied().collect();
        images.len() == self.pout.len()
            && images == sinks
            && self.pin.values().all(|v| self.vertices.contains(v))
            && self.erased_graph().topological_order().is_some()
    }

    fn erased_graph(&self) -> Graph {
        Graph {
            vertices: self.vertices.clone(),
            edges: self.edges.iter().map(|(u, _, v)| (*u, crate::expr::Letter::One, *v)).collect(),
            input: *self.vertices.first().unwrap_or(&0),
            output: *self.vertices.first().unwrap_or(&0),
        }
    }

    /// Renumber vertices to `offset..` in increasing order.
    pub fn compacted(&self, offset: usize) -> PortBox {
        let map: BTreeMap<usize, usize> = self.vertices.iter().enumerate().map(|(i, &v)| (v, i + offset)).collect();
        let mut edges: Vec<(usize, Expr, usize)> =
            self.edges.iter().map(|(u, e, v)| (map[u], e.clone(), map[v])).collect();
        edges.sort();
        PortBox {
            vertices: map.values().copied().collect(),
            edges,
            pin: self.pin.iter().map(|(&p, v)| (p, map[v])).collect(),
            pout: self.pout.iter().map(|(&p, v)| (p, map[v])).collect(),
        }
    }

    /// `self ⊙ other`: the sinks of `self` are removed and the edges into
    /// them redirected to the matching input vertices of `other`.
    pub fn compose(&self, other: &PortBox) -> Result<PortBox, ExtractError> {
        if self.output_ports() != other.input_ports() {
            return Err(ExtractError::PortMismatch {
                left: self.output_ports().into_iter().collect(),
                right: other.input_ports().into_iter().collect(),
            });
        }
        let b1 = self.compacted(0);
        let b2 = other.compacted(b1.vertices.len());
        let removed: BTreeMap<usize, Port> = b1.pout.iter().map(|(&p, &v)| (v, p)).collect();
        let redirect = |v: usize| match removed.get(&v) {
            Some(p) => b2.pin[p],
            None => v,
        };
        let mut vertices: BTreeSet<usize> = b1.vertices.iter().copied().filter(|v| !removed.contains_key(v)).collect();
        vertices.extend(b2.vertices.iter().copied());
        let mut edges: Vec<(usize, Expr, usize)> =
            b1.edges.iter().map(|(u, e, v)| (*u, e.clone(), redirect(*v))).collect();
        edges.extend(b2.edges.iter().cloned());
        let pin = b1.pin.iter().map(|(&p, &v)| (p, redirect(v))).collect();
        Ok(PortBox { vertices, edges, pin, pout: b2.pout }.compacted(0))
    }

    /// Apply the SP rules inside the box, never contracting an input vertex.
    pub fn normalized(&self) -> PortBox {
        let protected: BTreeSet<usize> = self.pin.values().copied().collect();
        let (vertices, edges) = reduce_with(&self.vertices, self.edges.clone(), &protected, RuleOrder::EagerParallel);
        PortBox { vertices, edges, pin: self.pin.clone(), pout: self.pout.clone() }.compacted(0)
    }

    pub fn key(&self) -> BoxKey {
        let b = self.compacted(0);
        let mut colors: Vec<(Vec<Port>, Vec<Port>)> = vec![(Vec::new(), Vec::new()); b.vertices.len()];
        for (&p, &v) in &b.pin {
            colors[v].0.push(p);
        }
        for (&p, &v) in &b.pout {
            colors[v].1.push(p);
        }
        canonical(&colors, &b.edges).0
    }

    /// Ports moved by the box: present on both sides with `pin ≠ pout`.
    pub fn support(&self) -> BTreeSet<Port> {
        self.pin.iter().filter(|(p, v)| self.pout.get(p).is_none_or(|w| w != *v)).map(|(&p, _)| p).collect()
    }

    /// Weakly connected components of the dag, as vertex sets.
    pub fn components(&self) -> Vec<BTreeSet<usize>> {
        let mut adj: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for (u, _, v) in &self.edges {
            adj.entry(*u).or_default().push(*v);
            adj.entry(*v).or_default().push(*u);
        }
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        for &r in &self.vertices {
            if !seen.insert(r) {
                continue;
            }
            let mut comp = BTreeSet::from([r]);
            let mut stack = vec![r];
            while let Some(v) = stack.pop() {
                for &w in adj.get(&v).into_iter().flatten() {
                    if seen.insert(w) {
                        comp.insert(w);
                        stack.push(w);
                    }
                }
            }
            out.push(comp);
        }
        out
    }

    /// A component is trivial when it is a lone vertex that is the input
    /// and the output of exactly one port and of nothing else.
    fn is_trivial_component(&self, comp: &BTreeSet<usize>) -> bool {
        if comp.len() != 1 {
            return false;
        }
        let v = *comp.first().expect("non-empty");
        let ins: Vec<Port> = self.pin.iter().filter(|(_, &w)| w == v).map(|(&p, _)| p).collect();
        let outs: Vec<Port> = self.pout.iter().filter(|(_, &w)| w == v).map(|(&p, _)| p).collect();
        ins.len() == 1 && ins == outs
    }

    /// The dag as a graph between two of its vertices, letter labels only.
    pub fn dag_graph(&self, input: usize, output: usize) -> Option<Graph> {
        let mut edges = BTreeSet::new();
        for (u, e, v) in &self.edges {
            match e {
                Expr::Atom(l) => {
                    edges.insert((*u, *l, *v));
                }
                _ => return None,
            }
        }
        Some(Graph { vertices: self.vertices.clone(), edges, input, output })
    }

    /// Plain-text rendering with place names.
    pub fn render(&self, names: &[String]) -> String {
        let name = |p: &Port| port_name(*p, names);
        let pin: Vec<String> = self.pin.iter().map(|(p, v)| format!("{}->{v}", name(p))).collect();
        let pout: Vec<String> = self.pout.iter().map(|(p, v)| format!("{}->{v}", name(p))).collect();
        let edges: Vec<String> = self.edges.iter().map(|(u, e, v)| format!("{u}-{e}->{v}")).collect();
        format!("in[{}] edges[{}] out[{}]", pin.join(","), edges.join(","), pout.join(","))
    }
}

fn port_name(p: Port, names: &[String]) -> String {
    if p == CENTER {
        "*".to_string()
    } else {
        names.get(p).cloned().unwrap_or_else(|| p.to_string())
    }
}

/// The box of firing `t` from `s`. A final transition is only boxed from
/// exactly its inputs, and then leads to the port `final_port`.
pub fn box_of_transition(a: &PetriAutomaton, t: usize, s: &State, final_port: Port) -> Result<PortBox, ExtractError> {
    let tr = &a.transitions[t];
    if !tr.inputs.is_subset(s) {
        return Err(ExtractError::NotEnabled { transition: t });
    }
    if tr.is_final() {
        if *s != tr.inputs {
            return Err(ExtractError::NotProper { transition: t });
        }
        return Ok(PortBox {
            vertices: BTreeSet::from([0]),
            edges: Vec::new(),
            pin: s.iter().map(|&p| (p, 0)).collect(),
            pout: BTreeMap::from([(final_port, 0)]),
        });
    }
    let next = a.fire(s, t).expect("enabled");
    // vertex 0 is the transition, place q is vertex q + 1
    let star = 0;
    let pv = |q: Place| q + 1;
    let mut vertices: BTreeSet<usize> = BTreeSet::from([star]);
    vertices.extend(next.iter().map(|&q| pv(q)));
    let pin = s.iter().map(|&p| (p, if tr.inputs.contains(&p) { star } else { pv(p) })).collect();
    let pout = next.iter().map(|&q| (q, pv(q))).collect();
    let edges = tr.outputs.iter().map(|&(x, q)| (star, Expr::Atom(x), pv(q))).collect();
    Ok(PortBox { vertices, edges, pin, pout }.compacted(0))
}

/// The composite box of a proper run.
pub fn box_of_run(a: &PetriAutomaton, r: &Run, final_port: Port) -> Result<PortBox, ExtractError> {
    let mut acc = PortBox::identity(&r.start);
    let mut s = r.start.clone();
    for &t in &r.fired {
        let b = box_of_transition(a, t, &s, final_port)?;
        acc = acc.compose(&b)?;
        s = a.fire(&s, t).expect("enabled");
    }
    Ok(acc)
}

/// A proper tree with leaves labelled by ports: the root's unique child
/// is represented directly, internal nodes have at least two children,
/// kept sorted.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TreeType {
    Leaf(Port),
    Node(Vec<TreeType>),
}

impl TreeType {
    pub fn node(mut children: Vec<TreeType>) -> TreeType {
        assert!(children.len() >= 2, "internal nodes have at least two children");
        children.sort();
        TreeType::Node(children)
    }

    pub fn ports(&self) -> BTreeSet<Port> {
        let mut out = BTreeSet::new();
        self.collect_ports(&mut out);
        out
    }

    fn collect_ports(&self, out: &mut BTreeSet<Port>) {
        match self {
            TreeType::Leaf(p) => {
                out.insert(*p);
            }
            TreeType::Node(cs) => cs.iter().for_each(|c| c.collect_ports(out)),
        }
    }

    /// Bracketed rendering, e.g. `[B,[C,E]]`.
    pub fn render(&self, names: &[String]) -> String {
        match self {
            TreeType::Leaf(p) => port_name(*p, names),
            TreeType::Node(cs) => {
                let mut parts: Vec<String> = cs.iter().map(|c| c.render(names)).collect();
                parts.sort();
                format!("[{}]", parts.join(","))
            }
        }
    }

    /// The tree as a box from a single port: vertex 0 is the root.
    fn as_edges(&self) -> (usize, Vec<(usize, usize)>, BTreeMap<Port, usize>) {
        let mut edges = Vec::new();
        let mut leaves = BTreeMap::new();
        let mut next = 1;
        fn walk(
            t: &TreeType,
            parent: usize,
            next: &mut usize,
            edges: &mut Vec<(usize, usize)>,
            leaves: &mut BTreeMap<Port, usize>,
        ) {
            let me = *next;
            *next += 1;
            edges.push((parent, me));
            match t {
                TreeType::Leaf(p) => {
                    leaves.insert(*p, me);
                }
                TreeType::Node(cs) => cs.iter().for_each(|c| walk(c, me, next, edges, leaves)),
            }
        }
        walk(self, 0, &mut next, &mut edges, &mut leaves);
        (next, edges, leaves)
    }
}

/// The output type of `beta` from `sigma`, if the glued, label-erased
/// graph SP-reduces to a proper tree.
pub fn type_check(sigma: &TreeType, beta: &PortBox) -> Option<TreeType> {
    if sigma.ports() != beta.input_ports() {
        return None;
    }
    let (m, tree_edges, leaves) = sigma.as_edges();
    let b = beta.compacted(m);
    let leaf_port: BTreeMap<usize, Port> = leaves.iter().map(|(&p, &v)| (v, p)).collect();
    let mut edges: BTreeSet<(usize, usize)> = BTreeSet::new();
    for (u, v) in tree_edges {
        let v = leaf_port.get(&v).map_or(v, |p| b.pin[p]);
        edges.insert((u, v));
    }
    edges.extend(b.edges.iter().map(|(u, _, v)| (*u, *v)));
    let mut vertices: BTreeSet<usize> = (0..m).filter(|v| !leaf_port.contains_key(v)).collect();
    vertices.extend(b.vertices.iter().copied());

    let root = 0;
    loop {
        let mut indeg: BTreeMap<usize, usize> = BTreeMap::new();
        let mut outdeg: BTreeMap<usize, usize> = BTreeMap::new();
        for &(u, v) in &edges {
            *outdeg.entry(u).or_default() += 1;
            *indeg.entry(v).or_default() += 1;
        }
        let Some(&x) = vertices.iter().find(|&&v| v != root && indeg.get(&v) == Some(&1) && outdeg.get(&v) == Some(&1))
        else {
            break;
        };
        let u = edges.iter().find(|e| e.1 == x).expect("in-edge").0;
        let w = edges.iter().find(|e| e.0 == x).expect("out-edge").1;
        edges.remove(&(u, x));
        edges.remove(&(x, w));
        edges.insert((u, w));
        vertices.remove(&x);
    }

    let mut children: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    let mut indeg: BTreeMap<usize, usize> = BTreeMap::new();
    for &(u, v) in &edges {
        children.entry(u).or_default().push(v);
        *indeg.entry(v).or_default() += 1;
    }
    if indeg.contains_key(&root) || children.get(&root).map_or(0, Vec::len) != 1 {
        return None;
    }
    if vertices.iter().any(|v| *v != root && indeg.get(v) != Some(&1)) {
        return None;
    }
    let sink_port: BTreeMap<usize, Port> = b.pout.iter().map(|(&p, &v)| (v, p)).collect();
    fn build(v: usize, children: &BTreeMap<usize, Vec<usize>>, sink_port: &BTreeMap<usize, Port>) -> Option<TreeType> {
        match children.get(&v) {
            None => sink_port.get(&v).map(|&p| TreeType::Leaf(p)),
            Some(cs) if cs.len() >= 2 => {
                let kids: Option<Vec<TreeType>> = cs.iter().map(|&c| build(c, children, sink_port)).collect();
                Some(TreeType::node(kids?))
            }
            Some(_) => None,
        }
    }
    build(children[&root][0], &children, &sink_port)
}

/// The automaton, made ready for box construction: the initial place is
/// never an output, and `final_place` is an isolated place.
#[derive(Clone, Debug)]
pub struct Prepared {
    pub automaton: PetriAutomaton,
    pub final_place: Place,
    /// Index in the original automaton of each transition.
    pub origin: Vec<usize>,
}

pub fn prepare(a: &PetriAutomaton) -> Prepared {
    let mut a = a.clone();
    let mut origin: Vec<usize> = (0..a.transitions.len()).collect();
    let fresh = |a: &PetriAutomaton, base: &str| {
        let mut name = base.to_string();
        while a.place_index(&name).is_some() {
            name.push('\'');
        }
        name
    };
    if a.transitions.iter().any(|t| t.output_places().contains(&a.initial)) {
        let name = fresh(&a, "init");
        a.places.push(name);
        let new = a.places.len() - 1;
        let copies: Vec<(usize, Transition)> = a
            .transitions
            .iter()
            .enumerate()
            .filter(|(_, t)| t.inputs.len() == 1 && t.inputs.contains(&a.initial))
            .map(|(i, t)| (i, Transition { inputs: BTreeSet::from([new]), outputs: t.outputs.clone() }))
            .collect();
        for (i, t) in copies {
            origin.push(i);
            a.transitions.push(t);
        }
        a.initial = new;
    }
    let isolated = |a: &PetriAutomaton, p: Place| {
        p != a.initial && a.transitions.iter().all(|t| !t.inputs.contains(&p) && !t.output_places().contains(&p))
    };
    let final_place = match a.place_index(FINAL_PLACE) {
        Some(p) if isolated(&a, p) => p,
        _ => {
            let name = fresh(&a, FINAL_PLACE);
            a.places.push(name);
            a.places.len() - 1
        }
    };
    Prepared { automaton: a, final_place, origin }
}

/// Why an automaton fails one of the two constraints.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConstraintViolation {
    #[error("not safe: after {run:?}, transition {transition} re-marks places {places:?}")]
    Unsafe { run: Run, transition: usize, places: Vec<Place> },
    #[error("not series-parallel: after {run:?}, transition {transition} {reason}")]
    NotSeriesParallel { run: Run, transition: usize, reason: String },
}

impl ConstraintViolation {
    pub fn run(&self) -> &Run {
        match self {
            ConstraintViolation::Unsafe { run, .. } | ConstraintViolation::NotSeriesParallel { run, .. } => run,
        }
    }

    pub fn transition(&self) -> usize {
        match self {
            ConstraintViolation::Unsafe { transition, .. }
            | ConstraintViolation::NotSeriesParallel { transition, .. } => *transition,
        }
    }
}

#[derive(Clone, Debug)]
pub struct TypeEdge {
    pub from: usize,
    pub to: usize,
    pub transition: usize,
    pub boxed: PortBox,
}

/// Types reachable from the initial type, with transition boxes between them.
#[derive(Clone, Debug)]
pub struct TypeAutomaton {
    pub prepared: Prepared,
    pub states: Vec<TreeType>,
    pub initial: usize,
    pub final_state: usize,
    pub edges: Vec<TypeEdge>,
}

pub fn build_type_automaton(a: &PetriAutomaton) -> Result<TypeAutomaton, ConstraintViolation> {
    if let SafetyReport::Violation { run, transition, places } = a.check_safety() {
        return Err(ConstraintViolation::Unsafe { run, transition, places });
    }
    let original = a;
    let prepared = prepare(a);
    let a = &prepared.automaton;
    let co = a.coreachable_states();
    let f = prepared.final_place;
    let mut states = vec![TreeType::Leaf(a.initial), TreeType::Leaf(f)];
    let mut index: BTreeMap<TreeType, usize> = states.iter().cloned().enumerate().map(|(i, t)| (t, i)).collect();
    let mut parent: Vec<Option<(usize, usize)>> = vec![None, None];
    let mut edges = Vec::new();
    let mut queue = VecDeque::from([0usize]);
    // Witness runs are reported in terms of the original automaton.
    let witness = |parent: &[Option<(usize, usize)>], mut i: usize| {
        let mut fired = Vec::new();
        while let Some((p, t)) = parent[i] {
            fired.push(prepared.origin[t]);
            i = p;
        }
        fired.reverse();
        original.run_from(&original.initial_state(), &fired).expect("replay")
    };
    while let Some(i) = queue.pop_front() {
        if i == 1 {
            continue;
        }
        let tau = states[i].clone();
        let s = tau.ports();
        for t in a.enabled_transitions(&s).collect::<Vec<_>>() {
            let tr = &a.transitions[t];
            if tr.is_final() {
                if s == tr.inputs {
                    let boxed = box_of_transition(a, t, &s, f).expect("proper");
                    edges.push(TypeEdge { from: i, to: 1, transition: t, boxed });
                } else {
                    let rest: State = s.difference(&tr.inputs).copied().collect();
                    if co.contains(&rest) {
                        return Err(ConstraintViolation::NotSeriesParallel {
                            run: witness(&parent, i),
                            transition: prepared.origin[t],
                            reason: "ends a branch while other tokens can still be accepted".into(),
                        });
                    }
                }
                continue;
            }
            let boxed = box_of_transition(a, t, &s, f).expect("enabled");
            match type_check(&tau, &boxed) {
                Some(sigma) => {
                    let j = match index.get(&sigma) {
                        Some(&j) => j,
                        None => {
                            states.push(sigma.clone());
                            parent.push(Some((i, t)));
                            index.insert(sigma, states.len() - 1);
                            queue.push_back(states.len() - 1);
                            states.len() - 1
                        }
                    };
                    edges.push(TypeEdge { from: i, to: j, transition: t, boxed });
                }
                None => {
                    let next = a.fire(&s, t).expect("enabled");
                    if co.contains(&next) {
                        return Err(ConstraintViolation::NotSeriesParallel {
                            run: witness(&parent, i),
                            transition: prepared.origin[t],
                            reason: "joins tokens whose history does not reduce to a tree".into(),
                        });
                    }
                }
            }
        }
    }
    Ok(TypeAutomaton { prepared, states, initial: 0, final_state: 1, edges })
}

/// Check both constraints.
pub fn check_sp_constraint(a: &PetriAutomaton) -> Result<(), ConstraintViolation> {
    build_type_automaton(a).map(|_| ())
}

/// A finite template: a set of boxes with common ports.
pub type Template = Vec<PortBox>;

/// Normalise, drop boxes with an edge labelled `0`, identify isomorphic
/// boxes and merge boxes that differ in the label of a single edge.
fn dedup(boxes: impl IntoIterator<Item = PortBox>) -> Template {
    let mut seen: BTreeMap<BoxKey, PortBox> = BTreeMap::new();
    for b in boxes {
        let b = b.normalized();
        if b.edges.iter().any(|e| e.1 == Expr::Zero) {
            continue;
        }
        seen.entry(b.key()).or_insert(b);
    }
    let mut boxes: Vec<PortBox> = seen.into_values().collect();
    while let Some(merged) = merge_round(&boxes) {
        boxes = merged;
    }
    boxes
}

/// One round of single-edge merging, `None` when nothing merges. The edge
/// in question is masked by `0`, which no remaining label equals.
fn merge_round(boxes: &[PortBox]) -> Option<Template> {
    let mut groups: BTreeMap<BoxKey, Vec<(usize, Expr)>> = BTreeMap::new();
    for (i, b) in boxes.iter().enumerate() {
        for k in 0..b.edges.len() {
            let mut masked = b.clone();
            let label = std::mem::replace(&mut masked.edges[k].1, Expr::Zero);
            groups.entry(masked.key()).or_default().push((i, label));
        }
    }
    let mut used = vec![false; boxes.len()];
    let mut out = Vec::new();
    for (key, members) in groups {
        let fresh: Vec<&(usize, Expr)> = members.iter().filter(|(i, _)| !used[*i]).collect();
        let distinct: BTreeSet<usize> = fresh.iter().map(|(i, _)| *i).collect();
        if distinct.len() < 2 {
            continue;
        }
        for &i in &distinct {
            used[i] = true;
        }
        let label = union_tidy(fresh.iter().map(|(_, l)| l.clone()));
        out.push(box_of_key(&key, label));
    }
    if out.is_empty() {
        return None;
    }
    out.extend(boxes.iter().zip(&used).filter(|(_, &u)| !u).map(|(b, _)| b.clone()));
    let mut seen: BTreeMap<BoxKey, PortBox> = BTreeMap::new();
    for b in out {
        seen.entry(b.key()).or_insert(b);
    }
    Some(seen.into_values().collect())
}

/// Rebuild a box from a masked key, putting `label` on the masked edge.
fn box_of_key(key: &BoxKey, label: Expr) -> PortBox {
    let mut pin = BTreeMap::new();
    let mut pout = BTreeMap::new();
    for (v, (ins, outs)) in key.colors.iter().enumerate() {
        pin.extend(ins.iter().map(|&p| (p, v)));
        pout.extend(outs.iter().map(|&p| (p, v)));
    }
    let edges =
        key.edges.iter().map(|(u, e, v)| (*u, if *e == Expr::Zero { label.clone() } else { e.clone() }, *v)).collect();
    PortBox { vertices: (0..key.colors.len()).collect(), edges, pin, pout }.compacted(0)
}

/// All composites `x ⊙ y`, normalised and deduplicated.
pub fn compose_templates(xs: &[PortBox], ys: &[PortBox]) -> Result<Template, ExtractError> {
    let mut out = Vec::with_capacity(xs.len() * ys.len());
    for x in xs {
        for y in ys {
            out.push(x.compose(y)?);
        }
    }
    Ok(dedup(out))
}

/// One atomic box per non-trivial component of each loop box.
pub fn atomic_decomposition(gamma: &[PortBox]) -> Result<Template, ExtractError> {
    let mut out = Vec::new();
    for b in gamma {
        let ports = b.input_ports();
        if ports != b.output_ports() {
            return Err(ExtractError::NotAtomic("loop box changes its port set".into()));
        }
        for comp in b.components() {
            if b.is_trivial_component(&comp) {
                continue;
            }
            let ins: BTreeSet<Port> = b.pin.iter().filter(|(_, v)| comp.contains(v)).map(|(&p, _)| p).collect();
            let outs: BTreeSet<Port> = b.pout.iter().filter(|(_, v)| comp.contains(v)).map(|(&p, _)| p).collect();
            if ins != outs {
                return Err(ExtractError::PortCrossing(format!("in {ins:?}, out {outs:?}")));
            }
            out.push(restrict(b, &comp, &ins));
        }
    }
    Ok(dedup(out))
}

/// Keep one component; every port outside it gets its own idle vertex.
fn restrict(b: &PortBox, comp: &BTreeSet<usize>, moved: &BTreeSet<Port>) -> PortBox {
    let mut vertices = comp.clone();
    let mut next = b.vertices.last().map_or(0, |v| v + 1);
    let mut pin = BTreeMap::new();
    let mut pout = BTreeMap::new();
    for &p in b.pin.keys() {
        if moved.contains(&p) {
            pin.insert(p, b.pin[&p]);
            pout.insert(p, b.pout[&p]);
        } else {
            vertices.insert(next);
            pin.insert(p, next);
            pout.insert(p, next);
            next += 1;
        }
    }
    let edges = b.edges.iter().filter(|(u, _, _)| comp.contains(u)).cloned().collect();
    PortBox { vertices, edges, pin, pout }.compacted(0)
}

struct Atomic {
    boxed: PortBox,
    comp: BTreeSet<usize>,
    support: BTreeSet<Port>,
}

fn as_atomic(b: &PortBox) -> Result<Atomic, ExtractError> {
    let mut nontrivial: Vec<BTreeSet<usize>> =
        b.components().into_iter().filter(|c| !b.is_trivial_component(c)).collect();
    if nontrivial.len() != 1 {
        return Err(ExtractError::NotAtomic(format!("{} non-trivial components", nontrivial.len())));
    }
    let comp = nontrivial.pop().expect("one");
    let support = b.support();
    let ins: BTreeSet<Port> = b.pin.iter().filter(|(_, v)| comp.contains(v)).map(|(&p, _)| p).collect();
    if ins != support {
        return Err(ExtractError::NotAtomic("component ports differ from the support".into()));
    }
    Ok(Atomic { boxed: b.clone(), comp, support })
}

/// A finite template generating the iterates of an atomic template
/// (including the identity).
pub fn template_star(gamma: &[PortBox]) -> Result<Template, ExtractError> {
    let Some(first) = gamma.first() else {
        return Err(ExtractError::NotAtomic("empty template".into()));
    };
    let ports = first.input_ports();
    let mut atoms = Vec::new();
    for b in gamma {
        if b.input_ports() != ports || b.output_ports() != ports {
            return Err(ExtractError::NotAtomic("boxes disagree on ports".into()));
        }
        atoms.push(as_atomic(b)?);
    }
    for x in &atoms {
        for y in &atoms {
            let nested = x.support.is_subset(&y.support) || y.support.is_subset(&x.support);
            if !nested && !x.support.is_disjoint(&y.support) {
                return Err(ExtractError::SupportsCross);
            }
        }
    }
    atoms.sort_by_key(|a| (a.support.len(), a.boxed.key()));
    star_of(&atoms, &ports)
}

fn star_of(atoms: &[Atomic], ports: &BTreeSet<Port>) -> Result<Template, ExtractError> {
    let Some((last, rest)) = atoms.split_last() else {
        return Ok(vec![PortBox::identity(ports)]);
    };
    if last.support.len() == 1 && atoms.iter().all(|a| a.support == last.support) {
        let p = *last.support.first().expect("singleton");
        return singleton_star(atoms.iter().map(|a| (&a.boxed, &a.comp)), p, ports);
    }
    // Every atom sharing the largest support is split at its center; the
    // loops between two consecutive ones move only the center.
    let support = &last.support;
    let same: Vec<&Atomic> = atoms.iter().filter(|a| a.support == *support).collect();
    let inner: Vec<&Atomic> = rest.iter().filter(|a| a.support.is_subset(support) && a.support != *support).collect();
    let outer: Vec<&Atomic> = rest.iter().filter(|a| a.support.is_disjoint(support)).collect();
    let s1 = star_of_refs(&inner, ports)?;
    let s2 = star_of_refs(&outer, ports)?;
    let mut heads = Vec::with_capacity(same.len());
    let mut tails = Vec::with_capacity(same.len());
    for atom in &same {
        let (a1, a2) = split_at_center(atom)?;
        heads.push(a1);
        tails.push(a2);
    }
    let tails_s1 = compose_templates(&tails, &s1)?;
    let loops = compose_templates(&tails_s1, &heads)?;
    let mut loop_atoms = Vec::with_capacity(loops.len());
    for b in &loops {
        let atom = as_atomic(b)?;
        if atom.support != BTreeSet::from([CENTER]) {
            return Err(ExtractError::NotAtomic("split loop does not move only the center".into()));
        }
        loop_atoms.push(atom);
    }
    let loop_ports = heads[0].output_ports();
    let loop_star = singleton_star(loop_atoms.iter().map(|a| (&a.boxed, &a.comp)), CENTER, &loop_ports)?;
    // Γ₁* ⊙ ({id} ∪ α¹ ⊙ (α² Γ₁* α¹)* ⊙ α² Γ₁*) ⊙ Γ₂*
    let mut middle = compose_templates(&compose_templates(&heads, &loop_star)?, &tails_s1)?;
    middle.push(PortBox::identity(ports));
    let middle = dedup(middle);
    compose_templates(&compose_templates(&s1, &middle)?, &s2)
}

fn star_of_refs(atoms: &[&Atomic], ports: &BTreeSet<Port>) -> Result<Template, ExtractError> {
    let owned: Vec<Atomic> = atoms
        .iter()
        .map(|a| Atomic { boxed: a.boxed.clone(), comp: a.comp.clone(), support: a.support.clone() })
        .collect();
    star_of(&owned, ports)
}

/// Boxes that each move only port `p`: reduce each one's component to a
/// single edge and iterate the union of the edge labels.
fn singleton_star<'a>(
    boxes: impl Iterator<Item = (&'a PortBox, &'a BTreeSet<usize>)>,
    p: Port,
    ports: &BTreeSet<Port>,
) -> Result<Template, ExtractError> {
    let mut labels = Vec::new();
    for (b, comp) in boxes {
        let dag = LabeledDag {
            vertices: comp.clone(),
            edges: b.edges.iter().filter(|(u, _, _)| comp.contains(u)).cloned().collect(),
            input: b.pin[&p],
            output: b.pout[&p],
        };
        labels.push(term_of_dag(&dag).ok_or(ExtractError::NotSeriesParallel)?);
    }
    let id = PortBox::identity(ports);
    let mut looped = id.clone();
    let src = looped.pin[&p];
    let dst = looped.vertices.last().map_or(0, |v| v + 1);
    looped.vertices.insert(dst);
    looped.pout.insert(p, dst);
    let label = match union_tidy(labels) {
        e @ Expr::Plus(_) => e,
        e => Expr::plus(e),
    };
    looped.edges.push((src, label, dst));
    Ok(dedup([id, looped.compacted(0)]))
}

/// Split an atomic box at the latest vertex lying on every input-to-sink
/// path of its component: `α = α¹ ⊙ α²`, with the center as the only port
/// between the two halves besides the idle ones.
fn split_at_center(atom: &Atomic) -> Result<(PortBox, PortBox), ExtractError> {
    let b = &atom.boxed;
    let comp = &atom.comp;
    let moved = &atom.support;
    let succ = |v: usize| b.edges.iter().filter(move |e| e.0 == v).map(|e| e.2);
    let pins: BTreeSet<usize> = moved.iter().map(|p| b.pin[p]).collect();
    let sinks: BTreeSet<usize> = moved.iter().map(|p| b.pout[p]).collect();
    let dominates = |c: usize| {
        let mut seen: BTreeSet<usize> = pins.iter().copied().filter(|&v| v != c).collect();
        let mut stack: Vec<usize> = seen.iter().copied().collect();
        while let Some(v) = stack.pop() {
            if sinks.contains(&v) {
                return false;
            }
            for w in succ(v) {
                if w != c && seen.insert(w) {
                    stack.push(w);
                }
            }
        }
        true
    };
    let sub = PortBox {
        vertices: comp.clone(),
        edges: b.edges.iter().filter(|(u, _, _)| comp.contains(u)).cloned().collect(),
        pin: BTreeMap::new(),
        pout: BTreeMap::new(),
    };
    let order = sub.erased_graph().topological_order().ok_or(ExtractError::NoCenter)?;
    let center = *order.iter().rev().find(|&&c| dominates(c)).ok_or(ExtractError::NoCenter)?;

    let reach = |start: usize, forward: bool| {
        let mut seen = BTreeSet::from([start]);
        let mut stack = vec![start];
        while let Some(v) = stack.pop() {
            for (u, _, w) in &b.edges {
                let (from, to) = if forward { (*u, *w) } else { (*w, *u) };
                if from == v && seen.insert(to) {
                    stack.push(to);
                }
            }
        }
        seen
    };
    let upper = reach(center, false);
    let lower = reach(center, true);

    let idle: Vec<Port> = b.pin.keys().copied().filter(|p| !moved.contains(p)).collect();
    let mut first = PortBox {
        vertices: upper.clone(),
        edges: b.edges.iter().filter(|(u, _, v)| upper.contains(u) && upper.contains(v)).cloned().collect(),
        pin: moved.iter().map(|&p| (p, b.pin[&p])).collect(),
        pout: BTreeMap::from([(CENTER, center)]),
    };
    let mut second = PortBox {
        vertices: lower.clone(),
        edges: b.edges.iter().filter(|(u, _, v)| lower.contains(u) && lower.contains(v)).cloned().collect(),
        pin: BTreeMap::from([(CENTER, center)]),
        pout: moved.iter().map(|&p| (p, b.pout[&p])).collect(),
    };
    for p in idle {
        let v = b.pin[&p];
        for half in [&mut first, &mut second] {
            half.vertices.insert(v);
            half.pin.insert(p, v);
            half.pout.insert(p, v);
        }
    }
    Ok((first.compacted(0), second.compacted(0)))
}

/// The expression of an automaton satisfying both constraints.
pub fn extract_expression(a: &PetriAutomaton) -> Result<Expr, ExtractError> {
    let ta = build_type_automaton(a)?;
    let mut templates: BTreeMap<(usize, usize), Template> = BTreeMap::new();
    for e in &ta.edges {
        templates.entry((e.from, e.to)).or_default().push(e.boxed.clone());
    }
    for t in templates.values_mut() {
        *t = dedup(std::mem::take(t));
    }

    // Only states on some path from the initial to the final type matter.
    let useful = useful_states(&templates, ta.initial, ta.final_state);
    templates.retain(|(s, t), _| useful.contains(s) && useful.contains(t));
    let mut alive: BTreeSet<usize> =
        useful.iter().copied().filter(|&s| s != ta.initial && s != ta.final_state).collect();
    let names = &ta.prepared.automaton.places;

    while !alive.is_empty() {
        let tau = *alive
            .iter()
            .min_by_key(|&&s| {
                let incident = templates.keys().filter(|(x, y)| *x == s || *y == s).count();
                (incident, ta.states[s].render(names))
            })
            .expect("non-empty");
        let ports = ta.states[tau].ports();
        let star = match templates.remove(&(tau, tau)) {
            None => vec![PortBox::identity(&ports)],
            Some(gamma) => template_star(&atomic_decomposition(&gamma)?)?,
        };
        let ins: Vec<(usize, Template)> = templates
            .keys()
            .filter(|(_, y)| *y == tau)
            .copied()
            .collect::<Vec<_>>()
            .into_iter()
            .map(|k| (k.0, templates.remove(&k).expect("present")))
            .collect();
        let outs: Vec<(usize, Template)> = templates
            .keys()
            .filter(|(x, _)| *x == tau)
            .copied()
            .collect::<Vec<_>>()
            .into_iter()
            .map(|k| (k.1, templates.remove(&k).expect("present")))
            .collect();
        for (sigma, beta) in &ins {
            let head = compose_templates(beta, &star)?;
            for (chi, delta) in &outs {
                let through = compose_templates(&head, delta)?;
                let slot = templates.entry((*sigma, *chi)).or_default();
                slot.extend(through);
                *slot = dedup(std::mem::take(slot));
            }
        }
        alive.remove(&tau);
    }

    let finals = templates.remove(&(ta.initial, ta.final_state)).unwrap_or_default();
    let a = &ta.prepared.automaton;
    let mut terms = Vec::new();
    for b in finals {
        let dag = LabeledDag {
            vertices: b.vertices.clone(),
            edges: b.edges.clone(),
            input: b.pin[&a.initial],
            output: b.pout[&ta.prepared.final_place],
        };
        terms.push(term_of_dag(&dag).ok_or(ExtractError::NotSeriesParallel)?);
    }
    Ok(union_tidy(terms))
}

fn useful_states(templates: &BTreeMap<(usize, usize), Template>, from: usize, to: usize) -> BTreeSet<usize> {
    let walk = |start: usize, forward: bool| {
        let mut seen = BTreeSet::from([start]);
        let mut stack = vec![start];
        while let Some(v) = stack.pop() {
            for &(x, y) in templates.keys() {
                let (a, b) = if forward { (x, y) } else { (y, x) };
                if a == v && seen.insert(b) {
                    stack.push(b);
                }
            }
        }
        seen
    };
    walk(from, true).intersection(&walk(to, false)).copied().collect()
}

impl fmt::Display for TypeAutomaton {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names = &self.prepared.automaton.places;
        for e in &self.edges {
            writeln!(
                f,
                "{} --{}--> {}",
                self.states[e.from].render(names),
                e.transition,
                self.states[e.to].render(names)
            )?;
        }
        Ok(())
    }
}
