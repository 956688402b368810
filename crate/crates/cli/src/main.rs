//! `klpa`: decide, compile, extract and inspect identity-free Kleene
//! lattice expressions from the command line.
//!
//! Exit codes: 0 yes / ok, 1 refuted, 2 input error, 3 constraint violation.

use std::collections::BTreeMap;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use rand::rngs::StdRng;
use rand::SeedableRng;

use klpa::corpus::random_simple_term;
use klpa::dot::{automaton_dot, graph_dot, type_automaton_dot};
use klpa::expr::{is_simple, simple_terms_within, TermBound};
use klpa::json::{automaton_from_json, automaton_to_json, graph_from_json, graph_to_json};
use klpa::petri::{Run, SafetyReport};
use klpa::reading::bounded_membership;
use klpa::{
    build_type_automaton, compile, compile_detyped, decide_leq, extract_expression, graph_of_term, membership,
    membership_oracle, parse_expr, Alphabet, ConstraintViolation, Expr, Graph, PetriAutomaton, Verdict,
};

#[derive(Parser, Debug)]
#[command(name = "klpa", version, about = "Identity-free Kleene lattices via Petri automata")]
struct Cli {
    /// Letters allowed in expressions and files (default: a-z).
    #[arg(long, global = true)]
    alphabet: Option<String>,
    /// Output format for graphs and automata.
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Iteration unrolling bound of the oracle.
    #[arg(long, global = true, default_value_t = 3)]
    unroll: usize,
    /// Longest run explored by bounded enumerations.
    #[arg(long, global = true, default_value_t = 12)]
    max_run_len: usize,
    /// Seed of the randomised oracle corpus.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Dot,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Decide whether E ≤ F holds in all relational models.
    DecideLeq { e: String, f: String },
    /// Decide whether E = F holds in all relational models.
    DecideEq { e: String, f: String },
    /// Compile an expression to a Petri automaton.
    Compile {
        e: String,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Extract an expression from an automaton file.
    Extract {
        automaton: PathBuf,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Test whether a graph belongs to the language of an automaton.
    Member { graph: PathBuf, automaton: PathBuf },
    /// Check safety and the series-parallel constraint of an automaton.
    Check { automaton: PathBuf },
    /// Graphviz rendering of an expression's automaton or of a JSON file.
    Dot {
        input: String,
        #[arg(short, long)]
        out: Option<PathBuf>,
        /// Render the type automaton instead.
        #[arg(long)]
        types: bool,
    },
    /// Cross-check membership against the brute-force oracle on graphs of
    /// E and random terms.
    Oracle {
        e: String,
        f: String,
        /// Number of random terms added to the graphs of E.
        #[arg(long, default_value_t = 50)]
        samples: usize,
        /// Operators per random term.
        #[arg(long, default_value_t = 4)]
        ops: usize,
    },
}

enum Failure {
    Input(String),
    Violation(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Input(_) => 2,
            Failure::Violation(_) => 3,
        }
    }
}

fn input<E: std::fmt::Display>(context: &str) -> impl FnOnce(E) -> Failure + '_ {
    move |e| Failure::Input(format!("{context}: {e}"))
}

struct Ctx {
    alphabet: Alphabet,
    format: Format,
    unroll: usize,
    max_run_len: usize,
    seed: u64,
}

impl Ctx {
    fn expr(&self, s: &str) -> Result<Expr, Failure> {
        parse_expr(s, &self.alphabet).map_err(input(&format!("cannot parse `{s}`")))
    }

    fn read(&self, path: &Path) -> Result<String, Failure> {
        fs::read_to_string(path).map_err(input(&path.display().to_string()))
    }

    fn automaton(&self, path: &Path) -> Result<PetriAutomaton, Failure> {
        automaton_from_json(&self.read(path)?, Some(&self.alphabet)).map_err(input(&path.display().to_string()))
    }

    fn graph(&self, path: &Path) -> Result<Graph, Failure> {
        graph_from_json(&self.read(path)?, Some(&self.alphabet)).map_err(input(&path.display().to_string()))
    }

    fn render_graph(&self, g: &Graph) -> String {
        match self.format {
            Format::Json => graph_to_json(g) + "\n",
            Format::Dot => graph_dot(g),
        }
    }

    fn render_automaton(&self, a: &PetriAutomaton) -> String {
        match self.format {
            Format::Json => automaton_to_json(a) + "\n",
            Format::Dot => automaton_dot(a),
        }
    }
}

fn emit(out: &mut dyn Write, target: Option<&Path>, text: &str) -> Result<(), Failure> {
    match target {
        Some(p) => fs::write(p, text).map_err(input(&p.display().to_string())),
        None => out.write_all(text.as_bytes()).map_err(input("stdout")),
    }
}

fn describe_run(a: &PetriAutomaton, r: &Run) -> String {
    let fired: Vec<String> = r.fired.iter().map(|t| t.to_string()).collect();
    format!(
        "run: [{}] from {{{}}} to {{{}}}",
        fired.join(" "),
        a.state_names(&r.start).join(","),
        a.state_names(&r.end).join(",")
    )
}

fn describe_violation(a: &PetriAutomaton, v: &ConstraintViolation) -> String {
    let kind = match v {
        ConstraintViolation::Unsafe { places, .. } => {
            let names: Vec<&str> = places.iter().map(|&p| a.places[p].as_str()).collect();
            format!("not safe: transition {} would mark {{{}}} twice", v.transition(), names.join(","))
        }
        ConstraintViolation::NotSeriesParallel { reason, .. } => {
            format!("not series-parallel: transition {} {reason}", v.transition())
        }
    };
    format!("VIOLATION {kind}\n{}\n", describe_run(a, v.run()))
}

fn decide(e: &Expr, f: &Expr) -> Result<Option<Graph>, Failure> {
    match decide_leq(e, f).map_err(input("no verdict"))? {
        Verdict::Yes => Ok(None),
        Verdict::No(g) => Ok(Some(g)),
    }
}

fn run(cli: Cli, out: &mut dyn Write) -> Result<u8, Failure> {
    let alphabet = match &cli.alphabet {
        Some(s) => Alphabet::from_letters(s).map_err(input("--alphabet"))?,
        None => Alphabet::lowercase(),
    };
    if cli.unroll == 0 {
        return Err(Failure::Input("--unroll must be positive".into()));
    }
    let ctx = Ctx { alphabet, format: cli.format, unroll: cli.unroll, max_run_len: cli.max_run_len, seed: cli.seed };
    match &cli.command {
        Command::DecideLeq { e, f } => {
            let (e, f) = (ctx.expr(e)?, ctx.expr(f)?);
            match decide(&e, &f)? {
                None => {
                    emit(out, None, "YES\n")?;
                    Ok(0)
                }
                Some(g) => {
                    emit(out, None, &format!("NO\n{}", ctx.render_graph(&g)))?;
                    Ok(1)
                }
            }
        }
        Command::DecideEq { e, f } => {
            let (e, f) = (ctx.expr(e)?, ctx.expr(f)?);
            let forward = decide(&e, &f)?;
            let backward = decide(&f, &e)?;
            if forward.is_none() && backward.is_none() {
                emit(out, None, "YES\n")?;
                return Ok(0);
            }
            let mut text = String::from("NO\n");
            for (g, x, y) in [(forward, &e, &f), (backward, &f, &e)] {
                if let Some(g) = g {
                    text.push_str(&format!("{x} ≰ {y}:\n{}", ctx.render_graph(&g)));
                }
            }
            emit(out, None, &text)?;
            Ok(1)
        }
        Command::Compile { e, out: target } => {
            let e = ctx.expr(e)?;
            let a = if is_simple(&e) { compile(&e).expect("simple") } else { compile_detyped(&e) };
            emit(out, target.as_deref(), &ctx.render_automaton(&a))?;
            Ok(0)
        }
        Command::Extract { automaton, out: target } => {
            let a = ctx.automaton(automaton)?;
            match extract_expression(&a) {
                Ok(x) => {
                    emit(out, target.as_deref(), &format!("{x}\n"))?;
                    Ok(0)
                }
                Err(klpa::extract::ExtractError::Constraint(v)) => Err(Failure::Violation(describe_violation(&a, &v))),
                Err(err) => Err(Failure::Input(format!("extraction failed: {err}"))),
            }
        }
        Command::Member { graph, automaton } => {
            let g = ctx.graph(graph)?;
            let a = ctx.automaton(automaton)?;
            let exact = a.is_over_base_alphabet() && g.labels().iter().all(|l| l.is_plain());
            if exact {
                if let Ok(yes) = membership(&g, &a) {
                    emit(out, None, if yes { "YES\n" } else { "NO\n" })?;
                    return Ok(if yes { 0 } else { 1 });
                }
            }
            // Extended alphabets or non-series-parallel graphs: bounded search.
            match bounded_membership(&g, &a, ctx.max_run_len) {
                Some((r, _)) => {
                    emit(out, None, &format!("YES\n{}\n", describe_run(&a, &r)))?;
                    Ok(0)
                }
                None => {
                    emit(out, None, &format!("NOT FOUND within {} transitions\n", ctx.max_run_len))?;
                    Ok(1)
                }
            }
        }
        Command::Check { automaton } => {
            let a = ctx.automaton(automaton)?;
            if let SafetyReport::Violation { run, transition, places } = a.check_safety() {
                let v = ConstraintViolation::Unsafe { run, transition, places };
                return Err(Failure::Violation(describe_violation(&a, &v)));
            }
            match build_type_automaton(&a) {
                Ok(ta) => {
                    emit(
                        out,
                        None,
                        &format!(
                            "OK safe and series-parallel ({} types, {} typed boxes)\n",
                            ta.states.len(),
                            ta.edges.len()
                        ),
                    )?;
                    Ok(0)
                }
                Err(v) => Err(Failure::Violation(describe_violation(&a, &v))),
            }
        }
        Command::Dot { input: source, out: target, types } => {
            let path = Path::new(source);
            let a = if path.is_file() {
                let text = ctx.read(path)?;
                match automaton_from_json(&text, Some(&ctx.alphabet)) {
                    Ok(a) => a,
                    Err(ea) => match graph_from_json(&text, Some(&ctx.alphabet)) {
                        Ok(g) if !*types => {
                            emit(out, target.as_deref(), &graph_dot(&g))?;
                            return Ok(0);
                        }
                        _ => return Err(Failure::Input(format!("{source}: {ea}"))),
                    },
                }
            } else {
                let e = ctx.expr(source)?;
                if is_simple(&e) {
                    compile(&e).expect("simple")
                } else {
                    compile_detyped(&e)
                }
            };
            let text = if *types {
                let ta = build_type_automaton(&a).map_err(|v| Failure::Violation(describe_violation(&a, &v)))?;
                type_automaton_dot(&ta)
            } else {
                automaton_dot(&a)
            };
            emit(out, target.as_deref(), &text)?;
            Ok(0)
        }
        Command::Oracle { e, f, samples, ops } => {
            let (e, f) = (ctx.expr(e)?, ctx.expr(f)?);
            for x in [&e, &f] {
                if !is_simple(x) || !x.is_over_base_alphabet() {
                    return Err(Failure::Input(format!("`{x}` is not simple; the oracle needs simple expressions")));
                }
            }
            let mut graphs = BTreeMap::new();
            for (u, _) in simple_terms_within(&e, TermBound::vertices(ctx.unroll, usize::MAX)) {
                let g = graph_of_term(&u).expect("simple term");
                graphs.insert(g.canonical_key(), g);
            }
            let mut letters: Vec<char> = e.letters().union(&f.letters()).filter_map(|l| l.var()).collect();
            if letters.is_empty() {
                letters = ctx.alphabet.letters().take(1).collect();
            }
            let mut rng = StdRng::seed_from_u64(ctx.seed);
            for _ in 0..*samples {
                let g = graph_of_term(&random_simple_term(&mut rng, &letters, *ops)).expect("simple term");
                graphs.insert(g.canonical_key(), g);
            }
            let af = compile(&f).expect("simple");
            let (mut members, mut disagreements) = (0usize, Vec::new());
            for g in graphs.values() {
                let by_automaton = membership(g, &af).map_err(input("membership"))?;
                let by_oracle = membership_oracle(g, &f).map_err(input("oracle"))?;
                members += usize::from(by_oracle);
                if by_automaton != by_oracle {
                    disagreements.push(g);
                }
            }
            let mut text = format!(
                "graphs {} agree {} members {} non-members {}\n",
                graphs.len(),
                graphs.len() - disagreements.len(),
                members,
                graphs.len() - members
            );
            for g in &disagreements {
                text.push_str(&format!("DISAGREE\n{}", ctx.render_graph(g)));
            }
            emit(out, None, &text)?;
            Ok(if disagreements.is_empty() { 0 } else { 1 })
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let stdout = io::stdout();
    let mut out = stdout.lock();
    match run(cli, &mut out) {
        Ok(code) => ExitCode::from(code),
        Err(failure) => {
            match &failure {
                Failure::Input(msg) => eprintln!("error: {msg}"),
                Failure::Violation(msg) => {
                    let _ = out.write_all(msg.as_bytes());
                }
            }
            ExitCode::from(failure.code())
        }
    }
}
