//! Recursive-descent parser for the expression grammar.
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := factor ('*' factor)*
//! factor  := '-' factor | power
//! power   := atom ('^' integer)?
//! atom    := number | 'x'<index> | func '(' expr ')' | '(' expr ')'
//! func    := sin | cos | tanh | arctan | atan
//! ```
//!
//! Exponents are nonnegative integer literals, so evaluation stays total.

use super::Expr;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParseError {
    #[error("syntax error at line {line}, column {col}: {msg}")]
    Syntax { line: usize, col: usize, msg: String },
    #[error("unknown identifier `{name}` at line {line}, column {col}")]
    UnknownIdentifier { name: String, line: usize, col: usize },
    #[error(
        "variable x{index} at line {line}, column {col} exceeds state dimension {dim}"
    )]
    VarOutOfRange { index: usize, dim: usize, line: usize, col: usize },
    #[error("expected {expected} expressions (one per state component), found {found}")]
    ComponentCount { expected: usize, found: usize },
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Caret,
    LParen,
    RParen,
    End,
}

struct Lexer<'a> {
    src: &'a [u8],
    pos: usize,
    line: usize,
    col: usize,
}

struct Spanned {
    tok: Tok,
    line: usize,
    col: usize,
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str, line: usize) -> Self {
        Lexer { src: src.as_bytes(), pos: 0, line, col: 1 }
    }

    fn bump(&mut self) -> Option<u8> {
        let c = self.src.get(self.pos).copied();
        if c.is_some() {
            self.pos += 1;
            self.col += 1;
        }
        c
    }

    fn peek(&self) -> Option<u8> {
        self.src.get(self.pos).copied()
    }

    fn next_token(&mut self) -> Result<Spanned, ParseError> {
        while matches!(self.peek(), Some(b' ') | Some(b'\t') | Some(b'\r')) {
            self.bump();
        }
        let (line, col) = (self.line, self.col);
        let mk = |tok| Spanned { tok, line, col };
        let Some(c) = self.peek() else {
            return Ok(mk(Tok::End));
        };
        match c {
            b'+' => {
                self.bump();
                Ok(mk(Tok::Plus))
            }
            b'-' => {
                self.bump();
                Ok(mk(Tok::Minus))
            }
            b'*' => {
                self.bump();
                Ok(mk(Tok::Star))
            }
            b'^' => {
                self.bump();
                Ok(mk(Tok::Caret))
            }
            b'(' => {
                self.bump();
                Ok(mk(Tok::LParen))
            }
            b')' => {
                self.bump();
                Ok(mk(Tok::RParen))
            }
            b'0'..=b'9' | b'.' => {
                let start = self.pos;
                while matches!(self.peek(), Some(b'0'..=b'9') | Some(b'.')) {
                    self.bump();
                }
                // exponent suffix like 1e-3
                if matches!(self.peek(), Some(b'e') | Some(b'E')) {
                    let save = (self.pos, self.col);
                    self.bump();
                    if matches!(self.peek(), Some(b'+') | Some(b'-')) {
                        self.bump();
                    }
                    if matches!(self.peek(), Some(b'0'..=b'9')) {
                        while matches!(self.peek(), Some(b'0'..=b'9')) {
                            self.bump();
                        }
                    } else {
                        self.pos = save.0;
                        self.col = save.1;
                    }
                }
                let text = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
                text.parse::<f64>().map(|v| mk(Tok::Num(v))).map_err(|_| {
                    ParseError::Syntax {
                        line,
                        col,
                        msg: format!("invalid numeric literal `{text}`"),
                    }
                })
            }
            c if c.is_ascii_alphabetic() || c == b'_' => {
                let start = self.pos;
                while matches!(self.peek(), Some(b) if b.is_ascii_alphanumeric() || b == b'_') {
                    self.bump();
                }
                let text = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
                Ok(mk(Tok::Ident(text.to_string())))
            }
            other => Err(ParseError::Syntax {
                line,
                col,
                msg: format!("unexpected character `{}`", other as char),
            }),
        }
    }
}

struct Parser {
    toks: Vec<Spanned>,
    at: usize,
    dim: usize,
}

impl Parser {
    fn peek(&self) -> &Spanned {
        &self.toks[self.at]
    }

    fn advance(&mut self) -> &Spanned {
        let s = &self.toks[self.at];
        if self.at + 1 < self.toks.len() {
            self.at += 1;
        }
        s
    }

    fn err_here(&self, msg: impl Into<String>) -> ParseError {
        let s = self.peek();
        ParseError::Syntax { line: s.line, col: s.col, msg: msg.into() }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut acc = self.term()?;
        loop {
            match self.peek().tok {
                Tok::Plus => {
                    self.advance();
                    acc = Expr::Add(Box::new(acc), Box::new(self.term()?));
                }
                Tok::Minus => {
                    self.advance();
                    acc = Expr::Sub(Box::new(acc), Box::new(self.term()?));
                }
                _ => return Ok(acc),
            }
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut acc = self.factor()?;
        while self.peek().tok == Tok::Star {
            self.advance();
            acc = Expr::Mul(Box::new(acc), Box::new(self.factor()?));
        }
        Ok(acc)
    }

    fn factor(&mut self) -> Result<Expr, ParseError> {
        if self.peek().tok == Tok::Minus {
            self.advance();
            return Ok(Expr::Neg(Box::new(self.factor()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.atom()?;
        if self.peek().tok == Tok::Caret {
            self.advance();
            let s = self.peek();
            match s.tok {
                Tok::Num(v) => {
                    if v.fract() != 0.0 || v < 0.0 || v > u32::MAX as f64 {
                        return Err(self.err_here(format!(
                            "exponent must be a nonnegative integer literal, found `{v}`"
                        )));
                    }
                    self.advance();
                    Ok(Expr::Pow(Box::new(base), v as u32))
                }
                _ => Err(self.err_here("expected integer exponent after `^`")),
            }
        } else {
            Ok(base)
        }
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        let (line, col) = (self.peek().line, self.peek().col);
        match self.peek().tok.clone() {
            Tok::Num(v) => {
                self.advance();
                Ok(Expr::Const(v))
            }
            Tok::LParen => {
                self.advance();
                let inner = self.expr()?;
                if self.peek().tok != Tok::RParen {
                    return Err(self.err_here("expected `)`"));
                }
                self.advance();
                Ok(inner)
            }
            Tok::Ident(name) => {
                self.advance();
                let func: Option<fn(Box<Expr>) -> Expr> = match name.as_str() {
                    "sin" => Some(Expr::Sin),
                    "cos" => Some(Expr::Cos),
                    "tanh" => Some(Expr::Tanh),
                    "arctan" | "atan" => Some(Expr::Atan),
                    _ => None,
                };
                if let Some(ctor) = func {
                    if self.peek().tok != Tok::LParen {
                        return Err(self.err_here(format!("expected `(` after `{name}`")));
                    }
                    self.advance();
                    let arg = self.expr()?;
                    if self.peek().tok != Tok::RParen {
                        return Err(self.err_here("expected `)`"));
                    }
                    self.advance();
                    return Ok(ctor(Box::new(arg)));
                }
                if let Some(rest) = name.strip_prefix('x') {
                    if let Ok(idx) = rest.parse::<usize>() {
                        if idx == 0 || idx > self.dim {
                            return Err(ParseError::VarOutOfRange {
                                index: idx,
                                dim: self.dim,
                                line,
                                col,
                            });
                        }
                        return Ok(Expr::Var(idx - 1));
                    }
                }
                Err(ParseError::UnknownIdentifier { name, line, col })
            }
            Tok::End => Err(self.err_here("unexpected end of input")),
            _ => Err(self.err_here("expected a number, variable, function or `(`")),
        }
    }
}

/// Parse a single scalar expression over `x1..x<dim>`.
pub fn parse_expression(source: &str, dim: usize) -> Result<Expr, ParseError> {
    parse_line(source, dim, 1)
}

fn parse_line(source: &str, dim: usize, line: usize) -> Result<Expr, ParseError> {
    let mut lexer = Lexer::new(source, line);
    let mut toks = Vec::new();
    loop {
        let s = lexer.next_token()?;
        let end = s.tok == Tok::End;
        toks.push(s);
        if end {
            break;
        }
    }
    let mut parser = Parser { toks, at: 0, dim };
    let e = parser.expr()?;
    if parser.peek().tok != Tok::End {
        return Err(parser.err_here("trailing input after expression"));
    }
    Ok(e)
}

/// Parse a vector field given one expression per nonempty line; the number of
/// nonempty lines must equal `dim`.
pub fn parse_vector_field(source: &str, dim: usize) -> Result<Vec<Expr>, ParseError> {
    let mut out = Vec::new();
    for (lineno, raw) in source.lines().enumerate() {
        let text = raw.trim();
        if text.is_empty() {
            continue;
        }
        out.push(parse_line(text, dim, lineno + 1)?);
    }
    if out.len() != dim {
        return Err(ParseError::ComponentCount { expected: dim, found: out.len() });
    }
    Ok(out)
}
