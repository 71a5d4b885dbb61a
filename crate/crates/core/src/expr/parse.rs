//! Parenthesized prefix reader and writer for expressions.
//!
//! Atoms are exact rationals (`3`, `-1/2`), the imaginary unit `i`, and
//! identifiers. Identifiers listed in the coordinate context parse as
//! coordinate variables, everything else as parameters. Compound forms:
//! `(+ e ...)`, `(* e ...)`, `(^ e k)`, `(- a [b])`, `(/ a b)`,
//! `(sin e)`, `(cos e)`, `(exp e)`, `(log e)`.

use thiserror::Error;

use super::node::SymExpr;

#[derive(Debug, Error, PartialEq)]
pub enum ParseError {
    #[error("line {line}, col {col}: {msg}")]
    Syntax {
        line: usize,
        col: usize,
        msg: String,
    },
}

struct Lexer<'a> {
    src: &'a str,
    pos: usize,
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Open,
    Close,
    Atom(String),
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str) -> Self {
        Lexer { src, pos: 0 }
    }

    fn line_col(&self, at: usize) -> (usize, usize) {
        let mut line = 1;
        let mut col = 1;
        for (i, c) in self.src.char_indices() {
            if i >= at {
                break;
            }
            if c == '\n' {
                line += 1;
                col = 1;
            } else {
                col += 1;
            }
        }
        (line, col)
    }

    fn err(&self, at: usize, msg: impl Into<String>) -> ParseError {
        let (line, col) = self.line_col(at);
        ParseError::Syntax {
            line,
            col,
            msg: msg.into(),
        }
    }

    fn next(&mut self) -> Option<(usize, Tok)> {
        let bytes = self.src.as_bytes();
        while self.pos < bytes.len() && (bytes[self.pos] as char).is_whitespace() {
            self.pos += 1;
        }
        if self.pos >= bytes.len() {
            return None;
        }
        let start = self.pos;
        match bytes[self.pos] as char {
            '(' => {
                self.pos += 1;
                Some((start, Tok::Open))
            }
            ')' => {
                self.pos += 1;
                Some((start, Tok::Close))
            }
            _ => {
                while self.pos < bytes.len() {
                    let c = bytes[self.pos] as char;
                    if c.is_whitespace() || c == '(' || c == ')' {
                        break;
                    }
                    self.pos += 1;
                }
                Some((start, Tok::Atom(self.src[start..self.pos].to_string())))
            }
        }
    }
}

fn parse_atom(atom: &str, coords: &[&str]) -> Option<SymExpr> {
    if atom == "i" {
        return Some(SymExpr::i());
    }
    if let Some(r) = parse_rational(atom) {
        return Some(r);
    }
    let c0 = atom.chars().next()?;
    if !(c0.is_ascii_alphabetic() || c0 == '_') {
        return None;
    }
    if !atom
        .chars()
        .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == ':')
    {
        return None;
    }
    if coords.contains(&atom) {
        Some(SymExpr::var(atom))
    } else {
        Some(SymExpr::param(atom))
    }
}

fn parse_rational(s: &str) -> Option<SymExpr> {
    if let Some((n, d)) = s.split_once('/') {
        let num: i128 = n.parse().ok()?;
        let den: i128 = d.parse().ok()?;
        if den == 0 {
            return None;
        }
        return Some(SymExpr::rat(num, den));
    }
    let n: i128 = s.parse().ok()?;
    Some(SymExpr::int(n))
}

/// Parse one expression; `coords` lists the identifiers that denote
/// coordinate variables in this context.
pub fn parse_expr(src: &str, coords: &[&str]) -> Result<SymExpr, ParseError> {
    let mut lx = Lexer::new(src);
    let e = parse_inner(&mut lx, coords)?;
    if let Some((at, _)) = lx.next() {
        return Err(lx.err(at, "trailing input after expression"));
    }
    Ok(e)
}

fn parse_inner(lx: &mut Lexer, coords: &[&str]) -> Result<SymExpr, ParseError> {
    let (at, tok) = match lx.next() {
        Some(t) => t,
        None => {
            let end = lx.src.len();
            return Err(lx.err(end, "unexpected end of input"));
        }
    };
    match tok {
        Tok::Close => Err(lx.err(at, "unexpected `)`")),
        Tok::Atom(a) => parse_atom(&a, coords).ok_or_else(|| lx.err(at, format!("bad atom `{a}`"))),
        Tok::Open => {
            let (hat, head) = lx.next().ok_or_else(|| lx.err(at, "unterminated form"))?;
            let head = match head {
                Tok::Atom(h) => h,
                _ => return Err(lx.err(hat, "expected operator after `(`")),
            };
            let mut args = Vec::new();
            loop {
                let save = lx.pos;
                match lx.next() {
                    None => return Err(lx.err(lx.src.len(), "unterminated form")),
                    Some((_, Tok::Close)) => break,
                    Some(_) => {
                        lx.pos = save;
                        args.push(parse_inner(lx, coords)?);
                    }
                }
            }
            build_form(&head, args, || {
                lx.err(hat, format!("bad arity for `{head}`"))
            })
        }
    }
}

fn build_form(
    head: &str,
    mut args: Vec<SymExpr>,
    arity_err: impl Fn() -> ParseError,
) -> Result<SymExpr, ParseError> {
    match head {
        "+" => {
            if args.is_empty() {
                return Err(arity_err());
            }
            Ok(SymExpr::sum(args))
        }
        "*" => {
            if args.is_empty() {
                return Err(arity_err());
            }
            Ok(SymExpr::prod(args))
        }
        "-" => match args.len() {
            1 => Ok(-args.pop().unwrap()),
            2 => {
                let b = args.pop().unwrap();
                let a = args.pop().unwrap();
                Ok(a - b)
            }
            _ => Err(arity_err()),
        },
        "/" => {
            if args.len() != 2 {
                return Err(arity_err());
            }
            let b = args.pop().unwrap();
            let a = args.pop().unwrap();
            Ok(a * b.inv())
        }
        "^" => {
            if args.len() != 2 {
                return Err(arity_err());
            }
            let k = args.pop().unwrap();
            let b = args.pop().unwrap();
            let k = match k.as_rat() {
                Some(r) if r.denom() == &1 => *r.numer() as i64,
                _ => return Err(arity_err()),
            };
            Ok(b.pow(k))
        }
        "sin" | "cos" | "exp" | "log" => {
            if args.len() != 1 {
                return Err(arity_err());
            }
            let u = args.pop().unwrap();
            Ok(match head {
                "sin" => u.sin(),
                "cos" => u.cos(),
                "exp" => u.exp(),
                _ => u.log(),
            })
        }
        _ => Err(arity_err()),
    }
}
