//! Two-pointed edge-labelled graphs, the graph algebra of terms, the
//! homomorphism preorder, retyping on graphs and relational evaluation.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::canon::{canonical, CanonKey};
use crate::expr::{Expr, Letter};

pub type Vertex = usize;
pub type Edge = (Vertex, Letter, Vertex);

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GraphError {
    #[error("vertex {0} is referenced but not declared")]
    UnknownVertex(Vertex),
    #[error("`{0}` is not a term (it contains union, zero or iteration)")]
    NotATerm(String),
}

/// A graph `⟨V, E, ι, o⟩`. Edges form a set.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Graph {
    pub vertices: BTreeSet<Vertex>,
    pub edges: BTreeSet<Edge>,
    pub input: Vertex,
    pub output: Vertex,
}

/// Isomorphism-invariant key of a graph.
pub type GraphKey = CanonKey<(bool, bool), Letter>;

impl Graph {
    pub fn new(
        vertices: impl IntoIterator<Item = Vertex>,
        edges: impl IntoIterator<Item = Edge>,
        input: Vertex,
        output: Vertex,
    ) -> Result<Graph, GraphError> {
        let g = Graph { vertices: vertices.into_iter().collect(), edges: edges.into_iter().collect(), input, output };
        g.validate()?;
        Ok(g)
    }

    fn validate(&self) -> Result<(), GraphError> {
        for v in [self.input, self.output].into_iter().chain(self.edges.iter().flat_map(|&(u, _, v)| [u, v])) {
            if !self.vertices.contains(&v) {
                return Err(GraphError::UnknownVertex(v));
            }
        }
        Ok(())
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    /// Renumber vertices to `offset..offset+n` in increasing order.
    pub fn compacted(&self, offset: usize) -> Graph {
        let map: BTreeMap<Vertex, Vertex> = self.vertices.iter().enumerate().map(|(i, &v)| (v, i + offset)).collect();
        self.renamed(&map)
    }

    fn renamed(&self, map: &BTreeMap<Vertex, Vertex>) -> Graph {
        Graph {
            vertices: self.vertices.iter().map(|v| map[v]).collect(),
            edges: self.edges.iter().map(|&(u, a, v)| (map[&u], a, map[&v])).collect(),
            input: map[&self.input],
            output: map[&self.output],
        }
    }

    /// Merge vertex `from` into vertex `into`.
    fn merged(mut self, from: Vertex, into: Vertex) -> Graph {
        if from == into {
            return self;
        }
        let r = |v: Vertex| if v == from { into } else { v };
        self.vertices.remove(&from);
        self.edges = self.edges.iter().map(|&(u, a, v)| (r(u), a, r(v))).collect();
        self.input = r(self.input);
        self.output = r(self.output);
        self
    }

    fn union_disjoint(&self, other: &Graph) -> (Graph, Graph) {
        let g = self.compacted(0);
        let h = other.compacted(g.vertices.len());
        (g, h)
    }

    /// Letters labelling the edges.
    pub fn labels(&self) -> BTreeSet<Letter> {
        self.edges.iter().map(|e| e.1).collect()
    }

    /// Canonical key: two graphs are isomorphic iff their keys are equal.
    pub fn canonical_key(&self) -> GraphKey {
        let g = self.compacted(0);
        let colors: Vec<(bool, bool)> = g.vertices.iter().map(|&v| (v == g.input, v == g.output)).collect();
        let edges: Vec<(usize, Letter, usize)> = g.edges.iter().copied().collect();
        canonical(&colors, &edges).0
    }

    pub fn is_isomorphic(&self, other: &Graph) -> bool {
        self.vertices.len() == other.vertices.len()
            && self.edges.len() == other.edges.len()
            && self.canonical_key() == other.canonical_key()
    }

    /// Length of the longest directed path, or `None` if the graph has a cycle.
    pub fn longest_path(&self) -> Option<usize> {
        let order = self.topological_order()?;
        let mut best: BTreeMap<Vertex, usize> = self.vertices.iter().map(|&v| (v, 0)).collect();
        for v in order {
            let d = best[&v];
            for &(u, _, w) in &self.edges {
                if u == v && best[&w] < d + 1 {
                    best.insert(w, d + 1);
                }
            }
        }
        best.values().copied().max()
    }

    /// A topological order (least vertex first among ready ones), or `None`
    /// if the graph is cyclic.
    pub fn topological_order(&self) -> Option<Vec<Vertex>> {
        let mut indeg: BTreeMap<Vertex, usize> = self.vertices.iter().map(|&v| (v, 0)).collect();
        for &(_, _, v) in &self.edges {
            *indeg.get_mut(&v).expect("validated") += 1;
        }
        let mut ready: BTreeSet<Vertex> = indeg.iter().filter(|(_, &d)| d == 0).map(|(&v, _)| v).collect();
        let mut order = Vec::with_capacity(self.vertices.len());
        while let Some(v) = ready.pop_first() {
            order.push(v);
            for &(u, _, w) in &self.edges {
                if u == v {
                    let d = indeg.get_mut(&w).expect("validated");
                    *d -= 1;
                    if *d == 0 {
                        ready.insert(w);
                    }
                }
            }
        }
        (order.len() == self.vertices.len()).then_some(order)
    }
}

/// `G·H`: the output of `G` is merged with the input of `H`.
pub fn seq_compose(g: &Graph, h: &Graph) -> Graph {
    let (g, h) = g.union_disjoint(h);
    let joined = Graph {
        vertices: g.vertices.union(&h.vertices).copied().collect(),
        edges: g.edges.union(&h.edges).copied().collect(),
        input: g.input,
        output: h.output,
    };
    joined.merged(h.input, g.output).compacted(0)
}

/// `G∩H`: inputs are merged, and outputs are merged.
pub fn par_compose(g: &Graph, h: &Graph) -> Graph {
    let (g, h) = g.union_disjoint(h);
    let joined = Graph {
        vertices: g.vertices.union(&h.vertices).copied().collect(),
        edges: g.edges.union(&h.edges).copied().collect(),
        input: g.input,
        output: g.output,
    };
    // Merging the inputs first may identify h.output with the image of g.output
    // only when both graphs have ι = o; resolve the second merge through it.
    let j = joined.merged(h.input, g.input);
    let ho = if h.output == h.input { g.input } else { h.output };
    let go = j.output;
    j.merged(ho, go).compacted(0)
}

/// Swap input and output.
pub fn converse_graph(g: &Graph) -> Graph {
    Graph { input: g.output, output: g.input, ..g.clone() }
}

/// One vertex, no edges, input = output.
pub fn unit_graph() -> Graph {
    Graph { vertices: BTreeSet::from([0]), edges: BTreeSet::new(), input: 0, output: 0 }
}

/// Two vertices and no edges.
pub fn top_graph() -> Graph {
    Graph { vertices: BTreeSet::from([0, 1]), edges: BTreeSet::new(), input: 0, output: 1 }
}

/// A single edge from input to output.
pub fn var_graph(a: Letter) -> Graph {
    Graph { vertices: BTreeSet::from([0, 1]), edges: BTreeSet::from([(0, a, 1)]), input: 0, output: 1 }
}

/// Fold a term over the graph algebra.
pub fn graph_of_term(u: &Expr) -> Result<Graph, GraphError> {
    Ok(match u {
        Expr::Atom(l) => var_graph(*l),
        Expr::One => unit_graph(),
        Expr::Top => top_graph(),
        Expr::Seq(a, b) => seq_compose(&graph_of_term(a)?, &graph_of_term(b)?),
        Expr::Inter(a, b) => par_compose(&graph_of_term(a)?, &graph_of_term(b)?),
        Expr::Converse(a) => converse_graph(&graph_of_term(a)?),
        Expr::Zero | Expr::Union(..) | Expr::Plus(_) => return Err(GraphError::NotATerm(u.to_string())),
    })
}

/// A vertex map from a source graph into a target graph.
pub type Homomorphism = BTreeMap<Vertex, Vertex>;

/// True iff `phi` is a homomorphism from `source` to `target`.
pub fn is_homomorphism(phi: &Homomorphism, source: &Graph, target: &Graph) -> bool {
    source.vertices.iter().all(|v| phi.get(v).is_some_and(|w| target.vertices.contains(w)))
        && phi[&source.input] == target.input
        && phi[&source.output] == target.output
        && source.edges.iter().all(|&(u, a, v)| target.edges.contains(&(phi[&u], a, phi[&v])))
}

/// Compose `phi: F → G` with `psi: G → H`.
pub fn compose_homomorphisms(phi: &Homomorphism, psi: &Homomorphism) -> Homomorphism {
    phi.iter().map(|(&v, w)| (v, psi[w])).collect()
}

/// Search for a homomorphism from `source` into `target`.
///
/// `Some` means `target ≲ source`. Complete backtracking: source vertices
/// are ordered by a DFS from the input over edges in both directions, and
/// each candidate set is cut down by the labels around the vertex and by
/// the edges to vertices already placed.
pub fn find_homomorphism(target: &Graph, source: &Graph) -> Option<Homomorphism> {
    let mut fixed: BTreeMap<Vertex, Vertex> = BTreeMap::new();
    fixed.insert(source.input, target.input);
    if source.output == source.input {
        if target.output != target.input {
            return None;
        }
    } else {
        fixed.insert(source.output, target.output);
    }

    let order = dfs_order(source);
    let out_labels =
        |g: &Graph, v: Vertex| -> BTreeSet<Letter> { g.edges.iter().filter(|e| e.0 == v).map(|e| e.1).collect() };
    let in_labels =
        |g: &Graph, v: Vertex| -> BTreeSet<Letter> { g.edges.iter().filter(|e| e.2 == v).map(|e| e.1).collect() };
    let t_out: BTreeMap<Vertex, BTreeSet<Letter>> =
        target.vertices.iter().map(|&v| (v, out_labels(target, v))).collect();
    let t_in: BTreeMap<Vertex, BTreeSet<Letter>> = target.vertices.iter().map(|&v| (v, in_labels(target, v))).collect();

    let mut candidates: Vec<Vec<Vertex>> = Vec::with_capacity(order.len());
    for &v in &order {
        let (so, si) = (out_labels(source, v), in_labels(source, v));
        let c: Vec<Vertex> = match fixed.get(&v) {
            Some(&w) => vec![w],
            None => target.vertices.iter().copied().collect(),
        };
        let c: Vec<Vertex> = c.into_iter().filter(|w| so.is_subset(&t_out[w]) && si.is_subset(&t_in[w])).collect();
        if c.is_empty() {
            return None;
        }
        candidates.push(c);
    }

    let position: BTreeMap<Vertex, usize> = order.iter().enumerate().map(|(i, &v)| (v, i)).collect();
    // Edges checked when the later endpoint is placed.
    let mut checks: Vec<Vec<Edge>> = vec![Vec::new(); order.len()];
    for &(u, a, v) in &source.edges {
        let k = position[&u].max(position[&v]);
        checks[k].push((u, a, v));
    }

    let mut phi: BTreeMap<Vertex, Vertex> = BTreeMap::new();
    if extend(0, &order, &candidates, &checks, target, &mut phi) {
        Some(phi)
    } else {
        None
    }
}

fn extend(
    k: usize,
    order: &[Vertex],
    candidates: &[Vec<Vertex>],
    checks: &[Vec<Edge>],
    target: &Graph,
    phi: &mut BTreeMap<Vertex, Vertex>,
) -> bool {
    if k == order.len() {
        return true;
    }
    let v = order[k];
    for &w in &candidates[k] {
        phi.insert(v, w);
        let ok = checks[k].iter().all(|&(x, a, y)| target.edges.contains(&(phi[&x], a, phi[&y])));
        if ok && extend(k + 1, order, candidates, checks, target, phi) {
            return true;
        }
    }
    phi.remove(&v);
    false
}

fn dfs_order(g: &Graph) -> Vec<Vertex> {
    let mut adj: BTreeMap<Vertex, Vec<Vertex>> = BTreeMap::new();
    for &(u, _, v) in &g.edges {
        adj.entry(u).or_default().push(v);
        adj.entry(v).or_default().push(u);
    }
    let mut seen = BTreeSet::new();
    let mut order = Vec::new();
    let roots = std::iter::once(g.input).chain(std::iter::once(g.output)).chain(g.vertices.iter().copied());
    for r in roots {
        if !seen.insert(r) {
            continue;
        }
        let mut stack = vec![r];
        while let Some(v) = stack.pop() {
            order.push(v);
            if let Some(ns) = adj.get(&v) {
                for &w in ns.iter().rev() {
                    if seen.insert(w) {
                        stack.push(w);
                    }
                }
            }
        }
    }
    order
}

/// Quotient by `1`-edges, turn `a'`-edges into reversed `a`-edges and drop
/// `top`-edges. Each class is represented by its least vertex.
pub fn retype_graph(g: &Graph) -> Graph {
    let mut parent: BTreeMap<Vertex, Vertex> = g.vertices.iter().map(|&v| (v, v)).collect();
    fn find(p: &mut BTreeMap<Vertex, Vertex>, v: Vertex) -> Vertex {
        let mut r = v;
        while p[&r] != r {
            r = p[&r];
        }
        let mut x = v;
        while p[&x] != r {
            let nx = p[&x];
            p.insert(x, r);
            x = nx;
        }
        r
    }
    for &(u, a, v) in &g.edges {
        if a == Letter::One {
            let (ru, rv) = (find(&mut parent, u), find(&mut parent, v));
            let (lo, hi) = (ru.min(rv), ru.max(rv));
            parent.insert(hi, lo);
        }
    }
    let mut rep = |v: Vertex| find(&mut parent, v);
    let mut edges = BTreeSet::new();
    for &(u, a, v) in &g.edges {
        match a {
            Letter::Var(_) => {
                edges.insert((rep(u), a, rep(v)));
            }
            Letter::Conv(x) => {
                edges.insert((rep(v), Letter::Var(x), rep(u)));
            }
            Letter::One | Letter::Top => {}
        }
    }
    let vertices: BTreeSet<Vertex> = g.vertices.iter().map(|&v| rep(v)).collect();
    Graph { vertices, edges, input: rep(g.input), output: rep(g.output) }
}

/// A binary relation over the carrier `0..n`, stored as row bitmasks.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Relation {
    n: usize,
    rows: Vec<u64>,
}

impl Relation {
    pub fn empty(n: usize) -> Relation {
        assert!(n <= 64, "carrier too large");
        Relation { n, rows: vec![0; n] }
    }

    pub fn identity(n: usize) -> Relation {
        let mut r = Relation::empty(n);
        for i in 0..n {
            r.rows[i] = 1 << i;
        }
        r
    }

    pub fn full(n: usize) -> Relation {
        let mask = if n == 64 { u64::MAX } else { (1u64 << n) - 1 };
        Relation { n, rows: vec![mask; n] }
    }

    pub fn from_pairs(n: usize, pairs: impl IntoIterator<Item = (usize, usize)>) -> Relation {
        let mut r = Relation::empty(n);
        for (i, j) in pairs {
            r.insert(i, j);
        }
        r
    }

    pub fn carrier(&self) -> usize {
        self.n
    }

    pub fn insert(&mut self, i: usize, j: usize) {
        self.rows[i] |= 1 << j;
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        self.rows[i] >> j & 1 == 1
    }

    pub fn pairs(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for i in 0..self.n {
            for j in 0..self.n {
                if self.contains(i, j) {
                    out.push((i, j));
                }
            }
        }
        out
    }

    pub fn is_subset(&self, o: &Relation) -> bool {
        self.rows.iter().zip(&o.rows).all(|(a, b)| a & !b == 0)
    }

    pub fn union(&self, o: &Relation) -> Relation {
        Relation { n: self.n, rows: self.rows.iter().zip(&o.rows).map(|(a, b)| a | b).collect() }
    }

    pub fn intersection(&self, o: &Relation) -> Relation {
        Relation { n: self.n, rows: self.rows.iter().zip(&o.rows).map(|(a, b)| a & b).collect() }
    }

    pub fn compose(&self, o: &Relation) -> Relation {
        let mut r = Relation::empty(self.n);
        for i in 0..self.n {
            for k in 0..self.n {
                if self.contains(i, k) {
                    r.rows[i] |= o.rows[k];
                }
            }
        }
        r
    }

    pub fn converse(&self) -> Relation {
        let mut r = Relation::empty(self.n);
        for (i, j) in self.pairs() {
            r.insert(j, i);
        }
        r
    }

    pub fn transitive_closure(&self) -> Relation {
        let mut r = self.clone();
        for k in 0..self.n {
            for i in 0..self.n {
                if r.contains(i, k) {
                    r.rows[i] |= r.rows[k];
                }
            }
        }
        r
    }
}

/// Interpretation of variables as relations on a common carrier.
pub type Interpretation = BTreeMap<char, Relation>;

/// The relational value of `e`; iteration is the exact transitive closure.
/// Variables missing from `sigma` denote the empty relation.
pub fn eval_relational(e: &Expr, sigma: &Interpretation, carrier: usize) -> Relation {
    let rec = |x: &Expr| eval_relational(x, sigma, carrier);
    match e {
        Expr::Zero => Relation::empty(carrier),
        Expr::One | Expr::Atom(Letter::One) => Relation::identity(carrier),
        Expr::Top | Expr::Atom(Letter::Top) => Relation::full(carrier),
        Expr::Atom(Letter::Var(a)) => sigma.get(a).cloned().unwrap_or_else(|| Relation::empty(carrier)),
        Expr::Atom(Letter::Conv(a)) => sigma.get(a).map(Relation::converse).unwrap_or_else(|| Relation::empty(carrier)),
        Expr::Union(a, b) => rec(a).union(&rec(b)),
        Expr::Inter(a, b) => rec(a).intersection(&rec(b)),
        Expr::Seq(a, b) => rec(a).compose(&rec(b)),
        Expr::Plus(a) => rec(a).transitive_closure(),
        Expr::Converse(a) => rec(a).converse(),
    }
}

/// The interpretation read off a graph: each variable denotes its edges.
/// Vertices are renumbered `0..n` in increasing order; the returned map
/// sends old ids to carrier elements.
pub fn graph_interpretation(g: &Graph) -> (Interpretation, usize, BTreeMap<Vertex, usize>) {
    let index: BTreeMap<Vertex, usize> = g.vertices.iter().enumerate().map(|(i, &v)| (v, i)).collect();
    let n = index.len();
    let mut sigma: Interpretation = BTreeMap::new();
    for &(u, a, v) in &g.edges {
        let x = a.var().expect("graph over the base alphabet");
        let r = sigma.entry(x).or_insert_with(|| Relation::empty(n));
        match a {
            Letter::Var(_) => r.insert(index[&u], index[&v]),
            _ => r.insert(index[&v], index[&u]),
        }
    }
    (sigma, n, index)
}

/// The graph whose edges are an interpretation, pointed at `(i, j)`.
pub fn interpretation_graph(sigma: &Interpretation, carrier: usize, i: usize, j: usize) -> Graph {
    let mut edges = BTreeSet::new();
    for (&a, r) in sigma {
        for (x, y) in r.pairs() {
            edges.insert((x, Letter::Var(a), y));
        }
    }
    Graph { vertices: (0..carrier).collect(), edges, input: i, output: j }
}
