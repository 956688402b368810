//! Recursive-descent parser for the textual expression syntax.
//!
//! `|` union, `&` intersection, juxtaposition or `.` sequence, postfix `+`
//! and `'`, literals `0`, `1`, `top`, single-letter identifiers. Postfix
//! binds tightest, then sequence, then `&`, then `|`.

use std::collections::BTreeSet;

use thiserror::Error;

use crate::expr::Expr;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("position {pos}: unexpected {found}, expected {expected}")]
    Unexpected { pos: usize, found: String, expected: &'static str },
    #[error("position {pos}: letter '{letter}' is not in the alphabet {{{alphabet}}}")]
    UnknownLetter { pos: usize, letter: char, alphabet: String },
}

/// A declared finite alphabet of single-letter variables.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Alphabet(BTreeSet<char>);

impl Alphabet {
    pub fn new(letters: impl IntoIterator<Item = char>) -> Alphabet {
        Alphabet(letters.into_iter().collect())
    }

    /// Parse an alphabet given as a string of letters, e.g. `"abc"`.
    pub fn from_letters(s: &str) -> Result<Alphabet, ParseError> {
        let mut set = BTreeSet::new();
        for (pos, c) in s.chars().enumerate() {
            if !c.is_ascii_lowercase() {
                return Err(ParseError::Unexpected { pos, found: format!("'{c}'"), expected: "a lowercase letter" });
            }
            set.insert(c);
        }
        Ok(Alphabet(set))
    }

    /// All lowercase ASCII letters.
    pub fn lowercase() -> Alphabet {
        Alphabet(('a'..='z').collect())
    }

    pub fn contains(&self, c: char) -> bool {
        self.0.contains(&c)
    }

    pub fn letters(&self) -> impl Iterator<Item = char> + '_ {
        self.0.iter().copied()
    }
}

impl std::fmt::Display for Alphabet {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for c in &self.0 {
            write!(f, "{c}")?;
        }
        Ok(())
    }
}

/// Parse an expression; every variable must belong to `alphabet`.
pub fn parse_expr(input: &str, alphabet: &Alphabet) -> Result<Expr, ParseError> {
    let mut p = Parser { chars: input.chars().collect(), pos: 0, alphabet };
    let e = p.union()?;
    p.skip_ws();
    if p.pos < p.chars.len() {
        return Err(p.unexpected("end of input"));
    }
    Ok(e)
}

struct Parser<'a> {
    chars: Vec<char>,
    pos: usize,
    alphabet: &'a Alphabet,
}

impl Parser<'_> {
    fn skip_ws(&mut self) {
        while self.pos < self.chars.len() && self.chars[self.pos].is_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<char> {
        self.skip_ws();
        self.chars.get(self.pos).copied()
    }

    fn unexpected(&mut self, expected: &'static str) -> ParseError {
        let found = match self.peek() {
            Some(c) => format!("'{c}'"),
            None => "end of input".to_string(),
        };
        ParseError::Unexpected { pos: self.pos, found, expected }
    }

    fn at_keyword_top(&self) -> bool {
        self.chars[self.pos..].starts_with(&['t', 'o', 'p'])
    }

    fn union(&mut self) -> Result<Expr, ParseError> {
        let mut e = self.inter()?;
        while self.peek() == Some('|') {
            self.pos += 1;
            e = Expr::union(e, self.inter()?);
        }
        Ok(e)
    }

    fn inter(&mut self) -> Result<Expr, ParseError> {
        let mut e = self.seq()?;
        while self.peek() == Some('&') {
            self.pos += 1;
            e = Expr::inter(e, self.seq()?);
        }
        Ok(e)
    }

    fn seq(&mut self) -> Result<Expr, ParseError> {
        let mut e = self.postfix()?;
        loop {
            match self.peek() {
                Some('.') => {
                    self.pos += 1;
                    e = Expr::seq(e, self.postfix()?);
                }
                Some(c) if c == '(' || c == '0' || c == '1' || c.is_ascii_alphabetic() => {
                    e = Expr::seq(e, self.postfix()?);
                }
                _ => return Ok(e),
            }
        }
    }

    fn postfix(&mut self) -> Result<Expr, ParseError> {
        let mut e = self.atom()?;
        loop {
            match self.peek() {
                Some('+') => {
                    self.pos += 1;
                    e = Expr::plus(e);
                }
                Some('\'') => {
                    self.pos += 1;
                    e = Expr::converse(e);
                }
                _ => return Ok(e),
            }
        }
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        match self.peek() {
            Some('(') => {
                self.pos += 1;
                let e = self.union()?;
                if self.peek() != Some(')') {
                    return Err(self.unexpected("')'"));
                }
                self.pos += 1;
                Ok(e)
            }
            Some('0') => {
                self.pos += 1;
                Ok(Expr::Zero)
            }
            Some('1') => {
                self.pos += 1;
                Ok(Expr::One)
            }
            Some('t') if self.at_keyword_top() => {
                self.pos += 3;
                Ok(Expr::Top)
            }
            Some(c) if c.is_ascii_alphabetic() => {
                if !self.alphabet.contains(c) {
                    return Err(ParseError::UnknownLetter {
                        pos: self.pos,
                        letter: c,
                        alphabet: self.alphabet.to_string(),
                    });
                }
                self.pos += 1;
                Ok(Expr::var(c))
            }
            _ => Err(self.unexpected("a letter, '0', '1', 'top' or '('")),
        }
    }
}
