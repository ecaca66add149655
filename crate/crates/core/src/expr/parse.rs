use std::collections::{BTreeMap, BTreeSet};

use super::{ConstLeaf, Expr, ExprError, Node, Op};

/// Identifiers a parse may resolve.
#[derive(Debug, Clone, Default)]
pub struct Symbols {
    vars: BTreeSet<String>,
    consts: BTreeMap<String, ConstLeaf>,
    free_constants: bool,
    any_variable: bool,
}

impl Symbols {
    /// Variables plus constants with default value 1 and no units.
    pub fn new<V, C>(vars: V, consts: C) -> Symbols
    where
        V: IntoIterator,
        V::Item: Into<String>,
        C: IntoIterator,
        C::Item: Into<String>,
    {
        let consts = consts
            .into_iter()
            .map(|name| {
                let name = name.into();
                let leaf = ConstLeaf {
                    name: name.clone(),
                    default_value: 1.0,
                    units: String::new(),
                };
                (name, leaf)
            })
            .collect();
        Symbols {
            vars: vars.into_iter().map(Into::into).collect(),
            consts,
            free_constants: false,
            any_variable: false,
        }
    }

    pub fn with_constants<V>(vars: V, consts: impl IntoIterator<Item = ConstLeaf>) -> Symbols
    where
        V: IntoIterator,
        V::Item: Into<String>,
    {
        Symbols {
            vars: vars.into_iter().map(Into::into).collect(),
            consts: consts.into_iter().map(|c| (c.name.clone(), c)).collect(),
            free_constants: false,
            any_variable: false,
        }
    }

    /// Also accept any reserved constant name (`C`, `C1`, ...) that is not
    /// declared; such constants default to 1.
    pub fn allow_free_constants(mut self) -> Symbols {
        self.free_constants = true;
        self
    }

    /// Accepts every identifier: reserved names become constants, the rest
    /// variables. Used for edit payloads that are checked separately.
    pub fn permissive() -> Symbols {
        Symbols {
            free_constants: true,
            any_variable: true,
            ..Symbols::default()
        }
    }

    pub fn vars(&self) -> &BTreeSet<String> {
        &self.vars
    }

    fn resolve(&self, name: &str) -> Option<Node> {
        if let Some(c) = self.consts.get(name) {
            return Some(Node::Const(c.clone()));
        }
        if self.vars.contains(name) {
            return Some(Node::Var(name.to_string()));
        }
        if self.free_constants && is_reserved_constant(name) {
            return Some(Node::constant(name, 1.0));
        }
        if self.any_variable && Op::from_function_name(name).is_none() {
            return Some(Node::Var(name.to_string()));
        }
        None
    }
}

/// `C` or `C` followed by digits.
pub fn is_reserved_constant(name: &str) -> bool {
    let mut chars = name.chars();
    chars.next() == Some('C') && chars.all(|c| c.is_ascii_digit())
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ParseErrorKind {
    #[error("expected {0}")]
    Expected(&'static str),
    #[error("unexpected character {0:?}")]
    BadChar(char),
    #[error("malformed number {0:?}")]
    BadNumber(String),
    #[error("unknown identifier {0:?}")]
    UnknownIdentifier(String),
    #[error("{func} takes {expected} argument(s), found {found}")]
    Arity {
        func: String,
        expected: usize,
        found: usize,
    },
    #[error("{0}")]
    Invalid(ExprError),
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{kind} at position {position}")]
pub struct ParseError {
    pub kind: ParseErrorKind,
    /// Byte offset into the input.
    pub position: usize,
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Sym(char),
    End,
}

fn tokenize(text: &str) -> Result<Vec<(Tok, usize)>, ParseError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_ascii_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                i += 1;
            }
            if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                let mut j = i + 1;
                if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                    j += 1;
                }
                if j < bytes.len() && bytes[j].is_ascii_digit() {
                    while j < bytes.len() && bytes[j].is_ascii_digit() {
                        j += 1;
                    }
                    i = j;
                }
            }
            let s = &text[start..i];
            match s.parse::<f64>() {
                Ok(v) if v.is_finite() => out.push((Tok::Num(v), start)),
                _ => {
                    return Err(ParseError {
                        kind: ParseErrorKind::BadNumber(s.to_string()),
                        position: start,
                    })
                }
            }
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push((Tok::Ident(text[start..i].to_string()), start));
        } else if "+-*/^(),".contains(c) {
            out.push((Tok::Sym(c), i));
            i += 1;
        } else {
            let ch = text[i..].chars().next().unwrap_or(c);
            return Err(ParseError {
                kind: ParseErrorKind::BadChar(ch),
                position: i,
            });
        }
    }
    out.push((Tok::End, text.len()));
    Ok(out)
}

struct Parser<'a> {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    symbols: &'a Symbols,
}

impl Parser<'_> {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn offset(&self) -> usize {
        self.toks[self.pos].1
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].0.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn fail<T>(&self, kind: ParseErrorKind) -> Result<T, ParseError> {
        Err(ParseError {
            kind,
            position: self.offset(),
        })
    }

    fn sum(&mut self) -> Result<Node, ParseError> {
        let mut lhs = self.product()?;
        loop {
            let op = match self.peek() {
                Tok::Sym('+') => Op::Add,
                Tok::Sym('-') => Op::Sub,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.product()?;
            lhs = Node::binary(op, lhs, rhs);
        }
    }

    fn product(&mut self) -> Result<Node, ParseError> {
        let mut lhs = self.power()?;
        loop {
            let op = match self.peek() {
                Tok::Sym('*') => Op::Mul,
                Tok::Sym('/') => Op::Div,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.power()?;
            lhs = Node::binary(op, lhs, rhs);
        }
    }

    fn power(&mut self) -> Result<Node, ParseError> {
        let base = self.atom()?;
        if self.peek() == &Tok::Sym('^') {
            self.bump();
            let exponent = self.power()?;
            return Ok(Node::binary(Op::Pow, base, exponent));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Node, ParseError> {
        let start = self.offset();
        match self.bump() {
            Tok::Num(v) => Ok(Node::Lit(v)),
            Tok::Sym('-') => match self.peek().clone() {
                Tok::Num(v) => {
                    self.bump();
                    Ok(Node::Lit(-v))
                }
                _ => self.fail(ParseErrorKind::Expected("a number after '-'")),
            },
            Tok::Sym('(') => {
                let inner = self.sum()?;
                self.expect(')')?;
                Ok(inner)
            }
            Tok::Ident(name) => {
                if self.peek() == &Tok::Sym('(') {
                    self.bump();
                    self.call(name, start)
                } else if let Some(node) = self.symbols.resolve(&name) {
                    Ok(node)
                } else {
                    Err(ParseError {
                        kind: ParseErrorKind::UnknownIdentifier(name),
                        position: start,
                    })
                }
            }
            Tok::End => self.fail(ParseErrorKind::Expected("an operand before end of input")),
            Tok::Sym(_) => Err(ParseError {
                kind: ParseErrorKind::Expected("an operand"),
                position: start,
            }),
        }
    }

    fn call(&mut self, name: String, start: usize) -> Result<Node, ParseError> {
        let Some(op) = Op::from_function_name(&name) else {
            return Err(ParseError {
                kind: ParseErrorKind::UnknownIdentifier(name),
                position: start,
            });
        };
        let mut args = vec![self.sum()?];
        while self.peek() == &Tok::Sym(',') {
            self.bump();
            args.push(self.sum()?);
        }
        self.expect(')')?;
        if args.len() != 1 {
            return Err(ParseError {
                kind: ParseErrorKind::Arity {
                    func: name,
                    expected: 1,
                    found: args.len(),
                },
                position: start,
            });
        }
        Ok(Node::Apply(op, args))
    }

    fn expect(&mut self, c: char) -> Result<(), ParseError> {
        if self.peek() == &Tok::Sym(c) {
            self.bump();
            Ok(())
        } else if c == ')' {
            self.fail(ParseErrorKind::Expected("')'"))
        } else {
            self.fail(ParseErrorKind::Expected("a delimiter"))
        }
    }
}

/// Parses the infix syntax. Identifiers must be declared in `symbols`.
pub fn parse(text: &str, symbols: &Symbols) -> Result<Expr, ParseError> {
    let toks = tokenize(text)?;
    let mut p = Parser { toks, pos: 0, symbols };
    if p.peek() == &Tok::End {
        return p.fail(ParseErrorKind::Expected("an expression"));
    }
    let root = p.sum()?;
    if p.peek() != &Tok::End {
        return p.fail(ParseErrorKind::Expected("an operator or end of input"));
    }
    Expr::new(root).map_err(|e| ParseError {
        kind: ParseErrorKind::Invalid(e),
        position: 0,
    })
}
