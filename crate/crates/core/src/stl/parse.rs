//! Recursive-descent parser for the textual formula syntax.
//!
//! ```text
//! formula  := conj ("or" conj)*
//! conj     := unary ("and" unary)*
//! unary    := "not" unary
//!           | ("G" | "F") "[" num "," num "]" "(" formula ")"
//!           | "(" formula ")"
//!           | "true"
//!           | linexpr (">=" | "<=") linexpr
//! linexpr  := ["+" | "-"] term (("+" | "-") term)*
//! term     := num ["*" ident] | ident ["*" num]
//! ```
//!
//! `and` binds tighter than `or`; both associate to the left. Atoms written
//! with `<=` are normalized to the `>= 0` form.

use std::collections::BTreeMap;

use super::formula::{Formula, Interval, Predicate};
use super::StlError;

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Ge,
    Le,
    Plus,
    Minus,
    Star,
    Comma,
    LParen,
    RParen,
    LBracket,
    RBracket,
    Eof,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Num(v) => format!("number `{v}`"),
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Ge => "`>=`".into(),
            Tok::Le => "`<=`".into(),
            Tok::Plus => "`+`".into(),
            Tok::Minus => "`-`".into(),
            Tok::Star => "`*`".into(),
            Tok::Comma => "`,`".into(),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::LBracket => "`[`".into(),
            Tok::RBracket => "`]`".into(),
            Tok::Eof => "end of input".into(),
        }
    }
}

fn lex(text: &str) -> Result<Vec<(usize, Tok)>, StlError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        let tok = match c {
            b'>' | b'<' => {
                if bytes.get(i + 1) != Some(&b'=') {
                    return Err(perr(i, "expected `>=` or `<=`"));
                }
                i += 2;
                if c == b'>' {
                    Tok::Ge
                } else {
                    Tok::Le
                }
            }
            b'+' => {
                i += 1;
                Tok::Plus
            }
            b'-' => {
                i += 1;
                Tok::Minus
            }
            b'*' => {
                i += 1;
                Tok::Star
            }
            b',' => {
                i += 1;
                Tok::Comma
            }
            b'(' => {
                i += 1;
                Tok::LParen
            }
            b')' => {
                i += 1;
                Tok::RParen
            }
            b'[' => {
                i += 1;
                Tok::LBracket
            }
            b']' => {
                i += 1;
                Tok::RBracket
            }
            b'0'..=b'9' | b'.' => {
                while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                    i += 1;
                }
                if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                    let mut j = i + 1;
                    if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                        j += 1;
                    }
                    if j < bytes.len() && bytes[j].is_ascii_digit() {
                        i = j;
                        while i < bytes.len() && bytes[i].is_ascii_digit() {
                            i += 1;
                        }
                    }
                }
                let s = &text[start..i];
                let v: f64 = s.parse().map_err(|_| perr(start, &format!("malformed number `{s}`")))?;
                Tok::Num(v)
            }
            c if c.is_ascii_alphabetic() || c == b'_' => {
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                Tok::Ident(text[start..i].to_string())
            }
            _ => {
                let ch = text[i..].chars().next().unwrap_or('?');
                return Err(perr(i, &format!("unexpected character `{ch}`")));
            }
        };
        out.push((start, tok));
    }
    out.push((text.len(), Tok::Eof));
    Ok(out)
}

fn perr(pos: usize, message: &str) -> StlError {
    StlError::Parse { pos, message: message.to_string() }
}

const KEYWORDS: [&str; 4] = ["and", "or", "not", "true"];

struct Parser {
    toks: Vec<(usize, Tok)>,
    at: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.at].1
    }

    fn peek2(&self) -> &Tok {
        &self.toks[(self.at + 1).min(self.toks.len() - 1)].1
    }

    fn pos(&self) -> usize {
        self.toks[self.at].0
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.at].1.clone();
        if self.at + 1 < self.toks.len() {
            self.at += 1;
        }
        t
    }

    fn is_kw(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == kw)
    }

    fn expect(&mut self, want: Tok, what: &str) -> Result<(), StlError> {
        if *self.peek() == want {
            self.bump();
            Ok(())
        } else {
            Err(self.unexpected(what))
        }
    }

    fn unexpected(&self, what: &str) -> StlError {
        perr(self.pos(), &format!("expected {what}, found {}", self.peek().describe()))
    }

    fn formula(&mut self) -> Result<Formula, StlError> {
        let mut lhs = self.conj()?;
        while self.is_kw("or") {
            self.bump();
            let rhs = self.conj()?;
            lhs = Formula::or(lhs, rhs);
        }
        Ok(lhs)
    }

    fn conj(&mut self) -> Result<Formula, StlError> {
        let mut lhs = self.unary()?;
        while self.is_kw("and") {
            self.bump();
            let rhs = self.unary()?;
            lhs = Formula::and(lhs, rhs);
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Formula, StlError> {
        if self.is_kw("not") {
            self.bump();
            return Ok(Formula::not(self.unary()?));
        }
        if self.is_kw("true") {
            self.bump();
            return Ok(Formula::True);
        }
        if (self.is_kw("G") || self.is_kw("F")) && *self.peek2() == Tok::LBracket {
            let always = self.is_kw("G");
            self.bump();
            self.bump();
            let iv_pos = self.pos();
            let a = self.signed_number()?;
            self.expect(Tok::Comma, "`,`")?;
            let b = self.signed_number()?;
            self.expect(Tok::RBracket, "`]`")?;
            let iv = Interval::new(a, b).map_err(|_| {
                perr(iv_pos, &format!("invalid interval [{a},{b}]: need 0 <= a <= b"))
            })?;
            self.expect(Tok::LParen, "`(` after temporal interval")?;
            let body = self.formula()?;
            self.expect(Tok::RParen, "`)`")?;
            return Ok(if always {
                Formula::always(iv, body)
            } else {
                Formula::eventually(iv, body)
            });
        }
        if *self.peek() == Tok::LParen {
            self.bump();
            let f = self.formula()?;
            self.expect(Tok::RParen, "`)`")?;
            return Ok(f);
        }
        self.atom()
    }

    fn signed_number(&mut self) -> Result<f64, StlError> {
        let neg = if *self.peek() == Tok::Minus {
            self.bump();
            true
        } else {
            false
        };
        match self.bump() {
            Tok::Num(v) => Ok(if neg { -v } else { v }),
            other => Err(perr(self.toks[self.at.saturating_sub(1)].0, &format!(
                "expected number, found {}",
                other.describe()
            ))),
        }
    }

    fn atom(&mut self) -> Result<Formula, StlError> {
        match self.peek() {
            Tok::Num(_) | Tok::Plus | Tok::Minus => {}
            Tok::Ident(s) if !KEYWORDS.contains(&s.as_str()) => {}
            _ => return Err(self.unexpected("formula")),
        }
        let (mut lhs, lc) = self.linexpr()?;
        let ge = match self.peek() {
            Tok::Ge => true,
            Tok::Le => false,
            _ => return Err(self.unexpected("`>=` or `<=`")),
        };
        self.bump();
        let (rhs, rc) = self.linexpr()?;
        let sign = if ge { 1.0 } else { -1.0 };
        for v in lhs.values_mut() {
            *v *= sign;
        }
        for (k, v) in rhs {
            *lhs.entry(k).or_insert(0.0) -= sign * v;
        }
        Predicate::from_map(lhs, sign * (lc - rc)).map(Formula::Pred)
    }

    fn linexpr(&mut self) -> Result<(BTreeMap<String, f64>, f64), StlError> {
        let mut coeffs = BTreeMap::new();
        let mut constant = 0.0;
        let mut sign = 1.0;
        match self.peek() {
            Tok::Minus => {
                self.bump();
                sign = -1.0;
            }
            Tok::Plus => {
                self.bump();
            }
            _ => {}
        }
        loop {
            match self.bump() {
                Tok::Num(v) => {
                    if *self.peek() == Tok::Star {
                        self.bump();
                        let name = self.ident()?;
                        *coeffs.entry(name).or_insert(0.0) += sign * v;
                    } else {
                        constant += sign * v;
                    }
                }
                Tok::Ident(name) if !KEYWORDS.contains(&name.as_str()) => {
                    let mut c = 1.0;
                    if *self.peek() == Tok::Star {
                        self.bump();
                        match self.bump() {
                            Tok::Num(v) => c = v,
                            other => {
                                return Err(perr(self.toks[self.at - 1].0, &format!(
                                    "expected number, found {}",
                                    other.describe()
                                )))
                            }
                        }
                    }
                    *coeffs.entry(name).or_insert(0.0) += sign * c;
                }
                other => {
                    return Err(perr(self.toks[self.at.saturating_sub(1)].0, &format!(
                        "expected number or signal name, found {}",
                        other.describe()
                    )))
                }
            }
            match self.peek() {
                Tok::Plus => {
                    self.bump();
                    sign = 1.0;
                }
                Tok::Minus => {
                    self.bump();
                    sign = -1.0;
                }
                _ => return Ok((coeffs, constant)),
            }
        }
    }

    fn ident(&mut self) -> Result<String, StlError> {
        match self.peek().clone() {
            Tok::Ident(s) if !KEYWORDS.contains(&s.as_str()) => {
                self.bump();
                Ok(s)
            }
            _ => Err(self.unexpected("signal name")),
        }
    }
}

/// Parses formula text. Dimension names are not checked here.
pub fn parse_formula(text: &str) -> Result<Formula, StlError> {
    let toks = lex(text)?;
    let mut p = Parser { toks, at: 0 };
    let f = p.formula()?;
    if *p.peek() != Tok::Eof {
        return Err(p.unexpected("`and`, `or` or end of input"));
    }
    Ok(f)
}
