//! Expressions over a finite alphabet, their terms, and the converse
//! normalisation pair [`detype`] / [`retype_expr`].
//!
//! A single [`Expr`] type covers both the full syntax (with converse, `1`
//! and `top` as constructors) and the simple fragment over the extended
//! alphabet, where `a'`, `1` and `top` appear only as [`Letter`]s.

use std::collections::BTreeSet;
use std::fmt;

/// A letter of the extended alphabet: a variable, a primed variable, or one
/// of the two constants used as plain edge labels.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Letter {
    Var(char),
    Conv(char),
    One,
    Top,
}

impl Letter {
    /// The underlying variable, if any.
    pub fn var(self) -> Option<char> {
        match self {
            Letter::Var(a) | Letter::Conv(a) => Some(a),
            _ => None,
        }
    }

    /// True for letters of the base alphabet.
    pub fn is_plain(self) -> bool {
        matches!(self, Letter::Var(_))
    }

    /// Parse the textual label used by the JSON formats.
    pub fn parse_label(s: &str) -> Option<Letter> {
        match s {
            "1" => Some(Letter::One),
            "top" => Some(Letter::Top),
            _ => {
                let mut chars = s.chars();
                let a = chars.next()?;
                if !a.is_ascii_alphabetic() {
                    return None;
                }
                match (chars.next(), chars.next()) {
                    (None, _) => Some(Letter::Var(a)),
                    (Some('\''), None) => Some(Letter::Conv(a)),
                    _ => None,
                }
            }
        }
    }
}

impl fmt::Display for Letter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Letter::Var(a) => write!(f, "{a}"),
            Letter::Conv(a) => write!(f, "{a}'"),
            Letter::One => write!(f, "1"),
            Letter::Top => write!(f, "top"),
        }
    }
}

/// Expression syntax tree.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Expr {
    Zero,
    One,
    Top,
    Atom(Letter),
    Union(Box<Expr>, Box<Expr>),
    Seq(Box<Expr>, Box<Expr>),
    Inter(Box<Expr>, Box<Expr>),
    Plus(Box<Expr>),
    Converse(Box<Expr>),
}

impl Expr {
    pub fn var(a: char) -> Expr {
        Expr::Atom(Letter::Var(a))
    }

    pub fn letter(l: Letter) -> Expr {
        Expr::Atom(l)
    }

    pub fn union(e: Expr, f: Expr) -> Expr {
        Expr::Union(Box::new(e), Box::new(f))
    }

    pub fn seq(e: Expr, f: Expr) -> Expr {
        Expr::Seq(Box::new(e), Box::new(f))
    }

    pub fn inter(e: Expr, f: Expr) -> Expr {
        Expr::Inter(Box::new(e), Box::new(f))
    }

    pub fn plus(e: Expr) -> Expr {
        Expr::Plus(Box::new(e))
    }

    pub fn converse(e: Expr) -> Expr {
        Expr::Converse(Box::new(e))
    }

    /// Number of syntax nodes.
    pub fn size(&self) -> usize {
        match self {
            Expr::Zero | Expr::One | Expr::Top | Expr::Atom(_) => 1,
            Expr::Plus(e) | Expr::Converse(e) => 1 + e.size(),
            Expr::Union(e, f) | Expr::Seq(e, f) | Expr::Inter(e, f) => 1 + e.size() + f.size(),
        }
    }

    /// Number of operator nodes (everything but leaves).
    pub fn operators(&self) -> usize {
        match self {
            Expr::Zero | Expr::One | Expr::Top | Expr::Atom(_) => 0,
            Expr::Plus(e) | Expr::Converse(e) => 1 + e.operators(),
            Expr::Union(e, f) | Expr::Seq(e, f) | Expr::Inter(e, f) => 1 + e.operators() + f.operators(),
        }
    }

    /// Letters occurring in the expression.
    pub fn letters(&self) -> BTreeSet<Letter> {
        let mut out = BTreeSet::new();
        self.collect_letters(&mut out);
        out
    }

    fn collect_letters(&self, out: &mut BTreeSet<Letter>) {
        match self {
            Expr::Atom(l) => {
                out.insert(*l);
            }
            Expr::Zero | Expr::One | Expr::Top => {}
            Expr::Plus(e) | Expr::Converse(e) => e.collect_letters(out),
            Expr::Union(e, f) | Expr::Seq(e, f) | Expr::Inter(e, f) => {
                e.collect_letters(out);
                f.collect_letters(out);
            }
        }
    }

    /// True when every atom is a letter of the base alphabet.
    pub fn is_over_base_alphabet(&self) -> bool {
        self.letters().iter().all(|l| l.is_plain())
    }

    /// True when the expression is a term: no union, zero or iteration.
    pub fn is_term(&self) -> bool {
        match self {
            Expr::Zero | Expr::Union(..) | Expr::Plus(_) => false,
            Expr::One | Expr::Top | Expr::Atom(_) => true,
            Expr::Converse(e) => e.is_term(),
            Expr::Seq(e, f) | Expr::Inter(e, f) => e.is_term() && f.is_term(),
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Union(..) => 0,
            Expr::Inter(..) => 1,
            Expr::Seq(..) => 2,
            Expr::Plus(_) | Expr::Converse(_) => 3,
            _ => 4,
        }
    }

    fn fmt_at(&self, f: &mut fmt::Formatter<'_>, min: u8) -> fmt::Result {
        if self.precedence() < min {
            write!(f, "(")?;
            self.fmt_at(f, 0)?;
            return write!(f, ")");
        }
        match self {
            Expr::Zero => write!(f, "0"),
            Expr::One => write!(f, "1"),
            Expr::Top => write!(f, "top"),
            Expr::Atom(l) => write!(f, "{l}"),
            Expr::Union(a, b) => {
                a.fmt_at(f, 0)?;
                write!(f, "|")?;
                b.fmt_at(f, 0)
            }
            Expr::Inter(a, b) => {
                a.fmt_at(f, 1)?;
                write!(f, "&")?;
                b.fmt_at(f, 1)
            }
            Expr::Seq(a, b) => {
                a.fmt_at(f, 2)?;
                b.fmt_at(f, 2)
            }
            Expr::Plus(a) => {
                a.fmt_at(f, 4)?;
                write!(f, "+")
            }
            Expr::Converse(a) => {
                a.fmt_at(f, 4)?;
                write!(f, "'")
            }
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.fmt_at(f, 0)
    }
}

/// True iff `e` uses none of the converse, `1` and `top` constructors.
///
/// Primed letters and the letters `1`/`top` of the extended alphabet are
/// allowed; use [`Expr::is_over_base_alphabet`] to rule them out as well.
pub fn is_simple(e: &Expr) -> bool {
    match e {
        Expr::One | Expr::Top | Expr::Converse(_) => false,
        Expr::Zero | Expr::Atom(_) => true,
        Expr::Plus(a) => is_simple(a),
        Expr::Union(a, b) | Expr::Seq(a, b) | Expr::Inter(a, b) => is_simple(a) && is_simple(b),
    }
}

/// Push converse down to the leaves, turning `1` and `top` into letters.
pub fn detype(e: &Expr) -> Expr {
    detype_at(e, false)
}

fn detype_at(e: &Expr, primed: bool) -> Expr {
    match e {
        Expr::Zero => Expr::Zero,
        Expr::One | Expr::Atom(Letter::One) => Expr::Atom(Letter::One),
        Expr::Top | Expr::Atom(Letter::Top) => Expr::Atom(Letter::Top),
        Expr::Atom(Letter::Var(a)) => Expr::Atom(if primed { Letter::Conv(*a) } else { Letter::Var(*a) }),
        Expr::Atom(Letter::Conv(a)) => Expr::Atom(if primed { Letter::Var(*a) } else { Letter::Conv(*a) }),
        Expr::Union(a, b) => Expr::union(detype_at(a, primed), detype_at(b, primed)),
        Expr::Inter(a, b) => Expr::inter(detype_at(a, primed), detype_at(b, primed)),
        Expr::Plus(a) => Expr::plus(detype_at(a, primed)),
        Expr::Seq(a, b) if primed => Expr::seq(detype_at(b, true), detype_at(a, true)),
        Expr::Seq(a, b) => Expr::seq(detype_at(a, false), detype_at(b, false)),
        Expr::Converse(a) => detype_at(a, !primed),
    }
}

/// Replace primed letters by converse and the constant letters by the
/// corresponding constructors.
pub fn retype_expr(e: &Expr) -> Expr {
    match e {
        Expr::Atom(Letter::Conv(a)) => Expr::converse(Expr::var(*a)),
        Expr::Atom(Letter::One) => Expr::One,
        Expr::Atom(Letter::Top) => Expr::Top,
        Expr::Zero | Expr::One | Expr::Top | Expr::Atom(_) => e.clone(),
        Expr::Union(a, b) => Expr::union(retype_expr(a), retype_expr(b)),
        Expr::Inter(a, b) => Expr::inter(retype_expr(a), retype_expr(b)),
        Expr::Seq(a, b) => Expr::seq(retype_expr(a), retype_expr(b)),
        Expr::Plus(a) => Expr::plus(retype_expr(a)),
        Expr::Converse(a) => Expr::converse(retype_expr(a)),
    }
}

/// The terms of `e`, with every iteration expanded to at most
/// `unroll_bound` sequential factors (each iteration node independently).
///
/// Sequences produced by an iteration are right-associated.
pub fn terms_of(e: &Expr, unroll_bound: usize) -> BTreeSet<Expr> {
    assert!(unroll_bound >= 1, "unroll bound must be positive");
    match e {
        Expr::Zero => BTreeSet::new(),
        Expr::One | Expr::Top | Expr::Atom(_) => BTreeSet::from([e.clone()]),
        Expr::Union(a, b) => {
            let mut s = terms_of(a, unroll_bound);
            s.extend(terms_of(b, unroll_bound));
            s
        }
        Expr::Seq(a, b) => product(&terms_of(a, unroll_bound), &terms_of(b, unroll_bound), Expr::seq),
        Expr::Inter(a, b) => product(&terms_of(a, unroll_bound), &terms_of(b, unroll_bound), Expr::inter),
        Expr::Converse(a) => terms_of(a, unroll_bound).into_iter().map(Expr::converse).collect(),
        Expr::Plus(a) => {
            let base = terms_of(a, unroll_bound);
            let mut all = base.clone();
            let mut layer = base.clone();
            for _ in 1..unroll_bound {
                // Prepend one factor to each chain of the previous layer.
                layer = product(&base, &layer, Expr::seq);
                all.extend(layer.iter().cloned());
            }
            all
        }
    }
}

fn product(xs: &BTreeSet<Expr>, ys: &BTreeSet<Expr>, mk: fn(Expr, Expr) -> Expr) -> BTreeSet<Expr> {
    let mut out = BTreeSet::new();
    for x in xs {
        for y in ys {
            out.insert(mk(x.clone(), y.clone()));
        }
    }
    out
}

/// Size measures of the graph of a simple term, computed syntactically.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TermSize {
    pub vertices: usize,
    /// Length of the longest directed path from input to output.
    pub depth: usize,
}

impl TermSize {
    fn letter() -> TermSize {
        TermSize { vertices: 2, depth: 1 }
    }

    fn seq(self, o: TermSize) -> TermSize {
        TermSize { vertices: self.vertices + o.vertices - 1, depth: self.depth + o.depth }
    }

    fn inter(self, o: TermSize) -> TermSize {
        TermSize { vertices: self.vertices + o.vertices - 2, depth: self.depth.max(o.depth) }
    }
}

/// Bounds for [`simple_terms_within`].
#[derive(Clone, Copy, Debug)]
pub struct TermBound {
    pub unroll: usize,
    pub max_vertices: usize,
    pub max_depth: usize,
}

impl TermBound {
    pub fn vertices(unroll: usize, max_vertices: usize) -> TermBound {
        TermBound { unroll, max_vertices, max_depth: usize::MAX }
    }

    fn admits(&self, s: TermSize) -> bool {
        s.vertices <= self.max_vertices && s.depth <= self.max_depth
    }
}

/// The terms of a simple expression whose graphs fit the given bound.
///
/// Equals `terms_of(e, bound.unroll)` filtered by vertex count and depth,
/// up to associativity of sequence (chains are flattened and
/// right-associated). Both measures only grow under sequence and
/// intersection, so oversized subterms are pruned early.
pub fn simple_terms_within(e: &Expr, bound: TermBound) -> Vec<(Expr, TermSize)> {
    assert!(is_simple(e), "bounded term expansion needs a simple expression");
    bounded(e, &bound).into_iter().collect()
}

fn bounded(e: &Expr, b: &TermBound) -> BTreeSet<(Expr, TermSize)> {
    let keep = |s: &TermSize| b.admits(*s);
    match e {
        Expr::Zero => BTreeSet::new(),
        Expr::Atom(_) => {
            let s = TermSize::letter();
            if keep(&s) {
                BTreeSet::from([(e.clone(), s)])
            } else {
                BTreeSet::new()
            }
        }
        Expr::Union(x, y) => {
            let mut s = bounded(x, b);
            s.extend(bounded(y, b));
            s
        }
        Expr::Seq(x, y) => {
            let (xs, ys) = (bounded(x, b), bounded(y, b));
            let mut out = BTreeSet::new();
            for (u, su) in &xs {
                for (v, sv) in &ys {
                    let s = su.seq(*sv);
                    if keep(&s) {
                        out.insert((seq_flat(u, v), s));
                    }
                }
            }
            out
        }
        Expr::Inter(x, y) => {
            let (xs, ys) = (bounded(x, b), bounded(y, b));
            let mut out = BTreeSet::new();
            for (u, su) in &xs {
                for (v, sv) in &ys {
                    let s = su.inter(*sv);
                    if keep(&s) {
                        out.insert((Expr::inter(u.clone(), v.clone()), s));
                    }
                }
            }
            out
        }
        Expr::Plus(x) => {
            let base = bounded(x, b);
            let mut all = base.clone();
            let mut layer = base.clone();
            for _ in 1..b.unroll {
                let mut next = BTreeSet::new();
                for (u, su) in &base {
                    for (v, sv) in &layer {
                        let s = su.seq(*sv);
                        if keep(&s) {
                            next.insert((seq_flat(u, v), s));
                        }
                    }
                }
                if next.is_empty() {
                    break;
                }
                all.extend(next.iter().cloned());
                layer = next;
            }
            all
        }
        Expr::One | Expr::Top | Expr::Converse(_) => unreachable!("checked simple"),
    }
}

/// Sequence of two expressions, flattened and right-associated.
pub fn seq_flat(u: &Expr, v: &Expr) -> Expr {
    let mut factors = Vec::new();
    seq_factors(u, &mut factors);
    seq_factors(v, &mut factors);
    let mut it = factors.into_iter().rev();
    let mut acc = it.next().expect("non-empty sequence");
    for f in it {
        acc = Expr::seq(f, acc);
    }
    acc
}

fn seq_factors(e: &Expr, out: &mut Vec<Expr>) {
    match e {
        Expr::Seq(a, b) => {
            seq_factors(a, out);
            seq_factors(b, out);
        }
        _ => out.push(e.clone()),
    }
}

/// Intersection of the given operands, flattened and sorted by serialized
/// form, as a right-nested chain.
pub fn inter_canon(operands: impl IntoIterator<Item = Expr>) -> Expr {
    ac_canon(operands, false)
}

/// Union of the given operands, flattened, sorted and deduplicated. The
/// empty union is `0`.
pub fn union_canon(operands: impl IntoIterator<Item = Expr>) -> Expr {
    ac_canon(operands, true)
}

/// [`union_canon`] after absorbing operands into iterations: `x | x x+`
/// and `x | x+ x` become `x+`, and any sequence of `x` and `x+` factors
/// is dropped next to `x+`. Language-preserving in every model.
pub fn union_tidy(operands: impl IntoIterator<Item = Expr>) -> Expr {
    let mut ops: Vec<Expr> = Vec::new();
    flatten_ac(union_canon(operands), true, &mut ops);
    loop {
        let set: BTreeSet<String> = ops.iter().map(|e| e.to_string()).collect();
        let mut changed = false;
        let mut next = Vec::with_capacity(ops.len());
        for e in &ops {
            let mut factors = Vec::new();
            seq_factors(e, &mut factors);
            if factors.len() == 2 {
                let (x, y) = (&factors[0], &factors[1]);
                let base = match (x, y) {
                    (x, Expr::Plus(p)) if **p == *x => Some(x),
                    (Expr::Plus(p), y) if **p == *y => Some(y),
                    _ => None,
                };
                if let Some(b) = base.filter(|b| set.contains(&b.to_string())) {
                    next.push(Expr::plus(b.clone()));
                    changed = true;
                    continue;
                }
            }
            let x = match &factors[0] {
                Expr::Plus(p) => (**p).clone(),
                f => f.clone(),
            };
            let xp = Expr::plus(x.clone());
            let dropped = *e != xp && set.contains(&xp.to_string()) && factors.iter().all(|f| *f == x || *f == xp);
            if dropped {
                changed = true;
            } else {
                next.push(e.clone());
            }
        }
        let tidied = union_canon(next);
        ops.clear();
        flatten_ac(tidied, true, &mut ops);
        if !changed {
            return union_canon(ops);
        }
    }
}

fn ac_canon(operands: impl IntoIterator<Item = Expr>, union: bool) -> Expr {
    let mut flat = Vec::new();
    for e in operands {
        flatten_ac(e, union, &mut flat);
    }
    let mut keyed: Vec<(String, Expr)> = flat.into_iter().map(|e| (e.to_string(), e)).collect();
    keyed.sort();
    if union {
        keyed.dedup_by(|a, b| a.0 == b.0);
    }
    let mut it = keyed.into_iter().rev().map(|(_, e)| e);
    let Some(mut acc) = it.next() else {
        assert!(union, "empty intersection");
        return Expr::Zero;
    };
    for e in it {
        acc = if union { Expr::union(e, acc) } else { Expr::inter(e, acc) };
    }
    acc
}

fn flatten_ac(e: Expr, union: bool, out: &mut Vec<Expr>) {
    match e {
        Expr::Union(a, b) if union => {
            flatten_ac(*a, union, out);
            flatten_ac(*b, union, out);
        }
        Expr::Inter(a, b) if !union => {
            flatten_ac(*a, union, out);
            flatten_ac(*b, union, out);
        }
        Expr::Zero if union => {}
        other => out.push(other),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(a: char) -> Expr {
        Expr::var(a)
    }

    #[test]
    fn detype_converse_of_sequence_swaps() {
        let e = Expr::converse(Expr::seq(v('a'), v('b')));
        let want = Expr::seq(Expr::Atom(Letter::Conv('b')), Expr::Atom(Letter::Conv('a')));
        assert_eq!(detype(&e), want);
    }

    #[test]
    fn detype_nested_converse() {
        let e = Expr::converse(Expr::plus(Expr::inter(v('a'), Expr::converse(v('b')))));
        let want = Expr::plus(Expr::inter(Expr::Atom(Letter::Conv('a')), v('b')));
        assert_eq!(detype(&e), want);
    }

    #[test]
    fn retype_replaces_leaves() {
        let e = Expr::inter(Expr::Atom(Letter::Conv('a')), Expr::Atom(Letter::One));
        assert_eq!(retype_expr(&e), Expr::inter(Expr::converse(v('a')), Expr::One));
    }

    #[test]
    fn simple_checks() {
        assert!(is_simple(&Expr::inter(v('a'), Expr::plus(Expr::seq(v('b'), v('c'))))));
        assert!(!is_simple(&Expr::seq(v('a'), Expr::converse(v('a')))));
        assert!(!is_simple(&Expr::inter(Expr::One, Expr::seq(v('a'), Expr::seq(v('b'), v('c'))))));
    }

    #[test]
    fn terms_of_small_cases() {
        assert!(terms_of(&Expr::Zero, 3).is_empty());
        let e = Expr::union(v('a'), Expr::seq(v('b'), v('c')));
        assert_eq!(terms_of(&e, 1), BTreeSet::from([v('a'), Expr::seq(v('b'), v('c'))]));
        let p = terms_of(&Expr::plus(v('a')), 3);
        let aa = Expr::seq(v('a'), v('a'));
        let aaa = Expr::seq(v('a'), aa.clone());
        assert_eq!(p, BTreeSet::from([v('a'), aa, aaa]));
    }

    #[test]
    fn display_round_trips_precedence() {
        let e = Expr::seq(Expr::inter(v('a'), v('b')), Expr::plus(Expr::union(v('a'), v('c'))));
        assert_eq!(e.to_string(), "(a&b)(a|c)+");
        let e = Expr::inter(Expr::seq(v('a'), v('b')), Expr::seq(v('a'), v('c')));
        assert_eq!(e.to_string(), "ab&ac");
    }

    #[test]
    fn canon_sorts_and_flattens() {
        let e = inter_canon([v('b'), Expr::inter(v('c'), v('a'))]);
        assert_eq!(e.to_string(), "a&b&c");
        assert_eq!(union_canon([v('b'), v('a'), v('b')]).to_string(), "a|b");
        assert_eq!(union_canon(Vec::new()), Expr::Zero);
    }

    #[test]
    fn union_tidy_absorbs_into_iterations() {
        let a = v('a');
        let ap = Expr::plus(a.clone());
        assert_eq!(union_tidy([a.clone(), Expr::seq(a.clone(), ap.clone())]), ap);
        assert_eq!(union_tidy([Expr::seq(ap.clone(), a.clone()), a.clone()]), ap);
        let covered = [ap.clone(), a.clone(), Expr::seq(a.clone(), a.clone()), Expr::seq(ap.clone(), ap.clone())];
        assert_eq!(union_tidy(covered), ap);
        assert_eq!(union_tidy([a.clone(), v('b')]).to_string(), "a|b");
        assert_eq!(union_tidy([Expr::seq(a.clone(), ap.clone()), v('b')]).to_string(), "aa+|b");
    }
}
