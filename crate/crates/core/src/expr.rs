//! A one-variable arithmetic expression language for resource functions and
//! initial profiles: numbers, `x`, `pi`, `+ - * / ^`, parentheses and the
//! functions `sin cos exp ln sqrt`.

use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
#[error("{message} at column {column} in `{source_text}`")]
pub struct ExprError {
    pub message: String,
    pub column: usize,
    pub source_text: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Func {
    Sin,
    Cos,
    Exp,
    Ln,
    Sqrt,
}

impl Func {
    fn parse(name: &str) -> Option<Self> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "exp" => Func::Exp,
            "ln" => Func::Ln,
            "sqrt" => Func::Sqrt,
            _ => return None,
        })
    }

    fn apply(self, a: f64) -> f64 {
        match self {
            Func::Sin => a.sin(),
            Func::Cos => a.cos(),
            Func::Exp => a.exp(),
            Func::Ln => a.ln(),
            Func::Sqrt => a.sqrt(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Num(f64),
    X,
    Neg(Box<Node>),
    Add(Box<Node>, Box<Node>),
    Sub(Box<Node>, Box<Node>),
    Mul(Box<Node>, Box<Node>),
    Div(Box<Node>, Box<Node>),
    Pow(Box<Node>, Box<Node>),
    Call(Func, Box<Node>),
}

impl Node {
    fn eval(&self, x: f64) -> f64 {
        match self {
            Node::Num(v) => *v,
            Node::X => x,
            Node::Neg(a) => -a.eval(x),
            Node::Add(a, b) => a.eval(x) + b.eval(x),
            Node::Sub(a, b) => a.eval(x) - b.eval(x),
            Node::Mul(a, b) => a.eval(x) * b.eval(x),
            Node::Div(a, b) => a.eval(x) / b.eval(x),
            Node::Pow(a, b) => a.eval(x).powf(b.eval(x)),
            Node::Call(f, a) => f.apply(a.eval(x)),
        }
    }
}

/// A parsed expression; keeps its source text for display and serialization.
#[derive(Debug, Clone)]
pub struct Expr {
    source: String,
    root: Node,
}

impl PartialEq for Expr {
    fn eq(&self, other: &Self) -> bool {
        self.source == other.source
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.source)
    }
}

impl std::str::FromStr for Expr {
    type Err = ExprError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Expr::parse(s)
    }
}

impl Expr {
    pub fn parse(source: &str) -> Result<Self, ExprError> {
        let mut p = Parser { src: source, bytes: source.as_bytes(), pos: 0 };
        let root = p.expr()?;
        p.skip_ws();
        if p.pos < p.bytes.len() {
            return Err(p.error("unexpected input"));
        }
        Ok(Self { source: source.to_string(), root })
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.root.eval(x)
    }

    pub fn source(&self) -> &str {
        &self.source
    }
}

struct Parser<'a> {
    src: &'a str,
    bytes: &'a [u8],
    pos: usize,
}

impl Parser<'_> {
    fn error(&self, message: &str) -> ExprError {
        ExprError { message: message.to_string(), column: self.pos + 1, source_text: self.src.to_string() }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.bytes.get(self.pos).copied()
    }

    fn eat(&mut self, c: u8) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<Node, ExprError> {
        let mut lhs = self.term()?;
        loop {
            if self.eat(b'+') {
                lhs = Node::Add(Box::new(lhs), Box::new(self.term()?));
            } else if self.eat(b'-') {
                lhs = Node::Sub(Box::new(lhs), Box::new(self.term()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term(&mut self) -> Result<Node, ExprError> {
        let mut lhs = self.unary()?;
        loop {
            if self.eat(b'*') {
                lhs = Node::Mul(Box::new(lhs), Box::new(self.unary()?));
            } else if self.eat(b'/') {
                lhs = Node::Div(Box::new(lhs), Box::new(self.unary()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn unary(&mut self) -> Result<Node, ExprError> {
        if self.eat(b'-') {
            return Ok(Node::Neg(Box::new(self.unary()?)));
        }
        if self.eat(b'+') {
            return self.unary();
        }
        self.power()
    }

    // right-associative, binds tighter than unary minus on its left
    fn power(&mut self) -> Result<Node, ExprError> {
        let base = self.atom()?;
        if self.eat(b'^') {
            return Ok(Node::Pow(Box::new(base), Box::new(self.unary()?)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Node, ExprError> {
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let inner = self.expr()?;
                if !self.eat(b')') {
                    return Err(self.error("expected `)`"));
                }
                Ok(inner)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() => {
                let start = self.pos;
                while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_alphanumeric() {
                    self.pos += 1;
                }
                let name = &self.src[start..self.pos];
                match name {
                    "x" => Ok(Node::X),
                    "pi" => Ok(Node::Num(std::f64::consts::PI)),
                    _ => {
                        let func = Func::parse(name).ok_or_else(|| {
                            self.pos = start;
                            self.error(&format!("unknown name `{name}`"))
                        })?;
                        if !self.eat(b'(') {
                            return Err(self.error("expected `(` after function name"));
                        }
                        let arg = self.expr()?;
                        if !self.eat(b')') {
                            return Err(self.error("expected `)`"));
                        }
                        Ok(Node::Call(func, Box::new(arg)))
                    }
                }
            }
            Some(_) => Err(self.error("unexpected character")),
            None => Err(self.error("unexpected end of expression")),
        }
    }

    fn number(&mut self) -> Result<Node, ExprError> {
        let start = self.pos;
        let digits = |p: &mut Self| {
            while p.pos < p.bytes.len() && p.bytes[p.pos].is_ascii_digit() {
                p.pos += 1;
            }
        };
        digits(self);
        if self.bytes.get(self.pos) == Some(&b'.') {
            self.pos += 1;
            digits(self);
        }
        if matches!(self.bytes.get(self.pos), Some(b'e' | b'E')) {
            let save = self.pos;
            self.pos += 1;
            if matches!(self.bytes.get(self.pos), Some(b'+' | b'-')) {
                self.pos += 1;
            }
            let before = self.pos;
            digits(self);
            if self.pos == before {
                self.pos = save;
            }
        }
        self.src[start..self.pos].parse().map(Node::Num).map_err(|_| {
            self.pos = start;
            self.error("malformed number")
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(s: &str, x: f64) -> f64 {
        Expr::parse(s).unwrap().eval(x)
    }

    #[test]
    fn precedence_and_associativity() {
        assert_eq!(ev("1 + 2 * 3", 0.0), 7.0);
        assert_eq!(ev("(1 + 2) * 3", 0.0), 9.0);
        assert_eq!(ev("2 ^ 3 ^ 2", 0.0), 512.0);
        assert_eq!(ev("-2 ^ 2", 0.0), -4.0);
        assert_eq!(ev("2 ^ -1", 0.0), 0.5);
        assert_eq!(ev("8 / 4 / 2", 0.0), 1.0);
        assert_eq!(ev("1 - 2 - 3", 0.0), -4.0);
    }

    #[test]
    fn variable_and_functions() {
        assert!((ev("x*(1-x)", 0.25) - 0.1875).abs() < 1e-15);
        assert!((ev("cos(pi*x)", 1.0) + 1.0).abs() < 1e-15);
        assert!((ev("exp(ln(x))", 3.0) - 3.0).abs() < 1e-14);
        assert_eq!(ev("sqrt(x)", 16.0), 4.0);
        assert_eq!(ev("sin(0)", 0.0), 0.0);
        assert_eq!(ev("1.5e-3", 0.0), 1.5e-3);
        assert!(Expr::parse("2e").is_err());
    }

    #[test]
    fn errors_carry_columns() {
        let e = Expr::parse("1 + y").unwrap_err();
        assert_eq!(e.column, 5);
        assert!(Expr::parse("(1 + 2").is_err());
        assert!(Expr::parse("1 +").is_err());
        assert!(Expr::parse("tan(x)").is_err());
        assert!(Expr::parse("1 2").is_err());
        assert!(Expr::parse("").is_err());
    }
}
