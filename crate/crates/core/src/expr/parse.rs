//! Recursive-descent parser for the function language.
//!
//! ```text
//! expr   := term (("+"|"-") term)* ;
//! term   := factor (("*"|"/") factor)* ;
//! factor := ("-")? power ;
//! power  := atom ("^" integer)? ;
//! atom   := number | "x" | "pi" | ident "(" expr ("," expr)* ")" | "(" expr ")" ;
//! ```

use super::{BinaryOp, Node, UnaryOp};
use crate::error::{Error, ParseError, Result};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    Comma,
    Eof,
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    offset: usize,
    text: String,
}

fn describe(t: &Token) -> String {
    match t.tok {
        Tok::Eof => "end of input".to_string(),
        _ => format!("`{}`", t.text),
    }
}

fn lex(src: &str) -> Result<Vec<Token>> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        let simple = match c {
            b'+' => Some(Tok::Plus),
            b'-' => Some(Tok::Minus),
            b'*' => Some(Tok::Star),
            b'/' => Some(Tok::Slash),
            b'^' => Some(Tok::Caret),
            b'(' => Some(Tok::LParen),
            b')' => Some(Tok::RParen),
            b',' => Some(Tok::Comma),
            _ => None,
        };
        if let Some(tok) = simple {
            i += 1;
            out.push(Token {
                tok,
                offset: start,
                text: src[start..i].to_string(),
            });
            continue;
        }
        if c.is_ascii_digit() || c == b'.' {
            let digits = |i: &mut usize| {
                let s = *i;
                while *i < bytes.len() && bytes[*i].is_ascii_digit() {
                    *i += 1;
                }
                *i > s
            };
            let mut any = digits(&mut i);
            if i < bytes.len() && bytes[i] == b'.' {
                i += 1;
                any |= digits(&mut i);
            }
            if !any {
                return Err(ParseError {
                    offset: start,
                    expected: vec!["digit".into()],
                    found: "`.`".into(),
                }
                .into());
            }
            // Exponent only when digits follow, so `2e` lexes as `2` then `e`.
            if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                let mut j = i + 1;
                if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                    j += 1;
                }
                if j < bytes.len() && bytes[j].is_ascii_digit() {
                    i = j;
                    digits(&mut i);
                }
            }
            let text = &src[start..i];
            let value: f64 = text.parse().map_err(|_| ParseError {
                offset: start,
                expected: vec!["number".into()],
                found: format!("`{text}`"),
            })?;
            if !value.is_finite() {
                return Err(ParseError {
                    offset: start,
                    expected: vec!["finite number".into()],
                    found: format!("`{text}`"),
                }
                .into());
            }
            out.push(Token {
                tok: Tok::Num(value),
                offset: start,
                text: text.to_string(),
            });
            continue;
        }
        if c.is_ascii_alphabetic() || c == b'_' {
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            let text = &src[start..i];
            out.push(Token {
                tok: Tok::Ident(text.to_string()),
                offset: start,
                text: text.to_string(),
            });
            continue;
        }
        let ch = src[start..].chars().next().unwrap_or('?');
        return Err(ParseError {
            offset: start,
            expected: vec!["expression".into()],
            found: format!("`{ch}`"),
        }
        .into());
    }
    out.push(Token {
        tok: Tok::Eof,
        offset: src.len(),
        text: String::new(),
    });
    Ok(out)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

const ATOM_START: [&str; 6] = ["number", "`x`", "`pi`", "function name", "`(`", "`-`"];

impl Parser {
    fn peek(&self) -> &Token {
        &self.tokens[self.pos]
    }

    fn bump(&mut self) -> Token {
        let t = self.tokens[self.pos].clone();
        if t.tok != Tok::Eof {
            self.pos += 1;
        }
        t
    }

    fn fail<T>(&self, expected: &[&str]) -> Result<T> {
        let t = self.peek();
        Err(ParseError {
            offset: t.offset,
            expected: expected.iter().map(|s| s.to_string()).collect(),
            found: describe(t),
        }
        .into())
    }

    fn expect(&mut self, tok: Tok, name: &str) -> Result<Token> {
        if self.peek().tok == tok {
            Ok(self.bump())
        } else {
            self.fail(&[name])
        }
    }

    fn expr(&mut self) -> Result<Node> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek().tok {
                Tok::Plus => BinaryOp::Add,
                Tok::Minus => BinaryOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.term()?;
            lhs = Node::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn term(&mut self) -> Result<Node> {
        let mut lhs = self.factor()?;
        loop {
            let op = match self.peek().tok {
                Tok::Star => BinaryOp::Mul,
                Tok::Slash => BinaryOp::Div,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.factor()?;
            lhs = Node::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn factor(&mut self) -> Result<Node> {
        if self.peek().tok == Tok::Minus {
            self.bump();
            let inner = self.power()?;
            return Ok(Node::Unary(UnaryOp::Neg, Box::new(inner)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Node> {
        let base = self.atom()?;
        if self.peek().tok != Tok::Caret {
            return Ok(base);
        }
        self.bump();
        let t = self.peek().clone();
        let exponent = match t.tok {
            Tok::Num(_) if t.text.bytes().all(|b| b.is_ascii_digit()) => t.text.parse::<u32>().ok(),
            _ => None,
        };
        match exponent {
            Some(n) => {
                self.bump();
                Ok(Node::Pow(Box::new(base), n))
            }
            None => self.fail(&["non-negative integer exponent"]),
        }
    }

    fn atom(&mut self) -> Result<Node> {
        let t = self.peek().clone();
        match t.tok {
            Tok::Num(v) => {
                self.bump();
                Ok(Node::Const(v))
            }
            Tok::LParen => {
                self.bump();
                let inner = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(inner)
            }
            Tok::Ident(ref name) => {
                self.bump();
                match name.as_str() {
                    "x" => Ok(Node::Var),
                    "pi" => Ok(Node::Pi),
                    _ => self.call(name, t.offset),
                }
            }
            _ => self.fail(&ATOM_START),
        }
    }

    fn call(&mut self, name: &str, offset: usize) -> Result<Node> {
        let unary = match name {
            "sin" => Some(UnaryOp::Sin),
            "cos" => Some(UnaryOp::Cos),
            "exp" => Some(UnaryOp::Exp),
            "ln" => Some(UnaryOp::Ln),
            "sqrt" => Some(UnaryOp::Sqrt),
            "abs" => Some(UnaryOp::Abs),
            "floor" => Some(UnaryOp::Floor),
            "sign" => Some(UnaryOp::Sign),
            "dirichlet" => Some(UnaryOp::Dirichlet),
            "cantor" => Some(UnaryOp::Cantor),
            _ => None,
        };
        let binary = match name {
            "min" => Some(BinaryOp::Min),
            "max" => Some(BinaryOp::Max),
            _ => None,
        };
        if unary.is_none() && binary.is_none() && name != "step" {
            return Err(Error::UnknownIdentifier {
                name: name.to_string(),
                offset,
            });
        }
        self.expect(Tok::LParen, "`(`")?;
        if name == "step" {
            return self.step_args(offset);
        }
        let mut args = vec![self.expr()?];
        while self.peek().tok == Tok::Comma {
            self.bump();
            args.push(self.expr()?);
        }
        self.expect(Tok::RParen, "`,` or `)`")?;
        let arity = |expected: usize| Error::Arity {
            name: name.to_string(),
            expected,
            got: args.len(),
            offset,
        };
        if let Some(op) = unary {
            if args.len() != 1 {
                return Err(arity(1));
            }
            let arg = args.pop().unwrap();
            Ok(Node::Unary(op, Box::new(arg)))
        } else {
            if args.len() != 2 {
                return Err(arity(2));
            }
            let rhs = args.pop().unwrap();
            let lhs = args.pop().unwrap();
            Ok(Node::Binary(binary.unwrap(), Box::new(lhs), Box::new(rhs)))
        }
    }

    fn literal(&mut self) -> Result<f64> {
        let negative = self.peek().tok == Tok::Minus;
        if negative {
            self.bump();
        }
        match self.peek().tok {
            Tok::Num(v) => {
                self.bump();
                Ok(if negative { -v } else { v })
            }
            _ => self.fail(&["numeric literal"]),
        }
    }

    fn step_args(&mut self, offset: usize) -> Result<Node> {
        let mut vals = vec![self.literal()?];
        while self.peek().tok == Tok::Comma {
            self.bump();
            vals.push(self.literal()?);
        }
        self.expect(Tok::RParen, "`,` or `)`")?;
        match vals[..] {
            [threshold, below, above] => Ok(Node::Step {
                threshold,
                below,
                above,
            }),
            _ => Err(Error::Arity {
                name: "step".into(),
                expected: 3,
                got: vals.len(),
                offset,
            }),
        }
    }
}

pub(crate) fn parse_node(src: &str) -> Result<Node> {
    let mut p = Parser {
        tokens: lex(src)?,
        pos: 0,
    };
    let node = p.expr()?;
    if p.peek().tok != Tok::Eof {
        return p.fail(&["operator", "end of input"]);
    }
    Ok(node)
}
