//! Identity-free Kleene lattices: expressions with union, sequence,
//! intersection and strict iteration, interpreted as binary relations.
//!
//! Expressions compile to Petri automata whose runs produce series-parallel
//! graphs. Inclusion between two simple expressions is decided by a
//! token-tracking simulation between their automata, and automata can be
//! turned back into expressions. A brute-force graph and term oracle backs
//! every stage in the test suite.
//!
//! ```
//! use klpa::{decide_leq, parse_expr, Alphabet};
//!
//! let x = Alphabet::lowercase();
//! let e = parse_expr("a(b&c)", &x).unwrap();
//! let f = parse_expr("ab&ac", &x).unwrap();
//! assert!(decide_leq(&e, &f).unwrap().holds());
//! assert!(!decide_leq(&f, &e).unwrap().holds());
//! ```

pub mod canon;
pub mod construct;
pub mod corpus;
pub mod dot;
pub mod expr;
pub mod extract;
pub mod fixtures;
pub mod graph;
pub mod json;
pub mod parse;
pub mod petri;
pub mod reading;
pub mod simulate;
pub mod sp;

pub use construct::{compile, compile_detyped};
pub use expr::{detype, is_simple, retype_expr, terms_of, Expr, Letter};
pub use extract::{build_type_automaton, check_sp_constraint, extract_expression, ConstraintViolation};
pub use graph::{find_homomorphism, graph_of_term, Graph};
pub use parse::{parse_expr, Alphabet, ParseError};
pub use petri::{PetriAutomaton, Run, Transition};
pub use reading::{membership, membership_oracle, read_graph_along_run};
pub use simulate::{decide_eq, decide_inclusion, decide_leq, Inclusion, Verdict};
pub use sp::{is_series_parallel, term_of_graph};
