//! Shared workloads for the criterion benches in `benches/`.

use klpa::{parse_expr, Alphabet, Expr};

/// Inclusion questions `(name, e, f)` of increasing difficulty.
pub const PAIRS: &[(&str, &str, &str)] = &[
    ("distribute", "a(b&c)", "ab&ac"),
    ("incomparable", "a&bc", "ac&b"),
    ("iterate", "(a&b)+", "a+&b+"),
    ("nested", "(a(b&c))+&ad", "(ab&ac)+&(a|d)(d|a)"),
    ("unfold", "(a|b)+(a|b)+", "(a|b)(a|b)+"),
];

/// Expressions used for compilation and extraction.
pub const EXPRESSIONS: &[&str] = &["a(b&c)+d", "(ab|c)+&d", "(a+&b)+", "((a|b)&c)+(a&b)", "(a&(b|c))+"];

pub fn expr(s: &str) -> Expr {
    parse_expr(s, &Alphabet::lowercase()).expect("bench workload parses")
}
