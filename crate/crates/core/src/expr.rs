//! A small arithmetic expression language for config files.
//!
//! Variables: `x1`..`x3`, `t`, `r`; constants `pi`, `e`; functions `log`, `exp`,
//! `sqrt`, `sin`, `cos`, `abs`, `pow(a, b)`, `min(a, b)`, `max(a, b)`; operators
//! `+ - * / ^` with the usual precedence (`^` is right associative).

use std::fmt;

use crate::error::{Error, Result};

/// Slot layout of the evaluation context: `[x1, x2, x3, t, r]`.
pub const SLOT_T: usize = 3;
pub const SLOT_R: usize = 4;

#[derive(Clone, Debug, PartialEq)]
enum Node {
    Num(f64),
    Var(usize),
    Neg(Box<Node>),
    Bin(char, Box<Node>, Box<Node>),
    Call(Func, Vec<Node>),
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Func {
    Log,
    Exp,
    Sqrt,
    Sin,
    Cos,
    Abs,
    Pow,
    Min,
    Max,
}

impl Func {
    fn lookup(name: &str) -> Option<(Func, usize)> {
        Some(match name {
            "log" => (Func::Log, 1),
            "exp" => (Func::Exp, 1),
            "sqrt" => (Func::Sqrt, 1),
            "sin" => (Func::Sin, 1),
            "cos" => (Func::Cos, 1),
            "abs" => (Func::Abs, 1),
            "pow" => (Func::Pow, 2),
            "min" => (Func::Min, 2),
            "max" => (Func::Max, 2),
            _ => return None,
        })
    }
}

/// A parsed expression.
#[derive(Clone, PartialEq)]
pub struct Expr {
    source: String,
    root: Node,
    uses: [bool; 5],
}

impl fmt::Debug for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Expr({:?})", self.source)
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.source)
    }
}

impl Expr {
    pub fn parse(source: &str) -> Result<Self> {
        let mut p = Parser {
            src: source.as_bytes(),
            pos: 0,
            uses: [false; 5],
        };
        let root = p.expr()?;
        p.skip_ws();
        if p.pos < p.src.len() {
            return Err(p.error("unexpected trailing input"));
        }
        Ok(Expr {
            source: source.to_string(),
            root,
            uses: p.uses,
        })
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    /// Whether the expression mentions the variable in `slot`.
    pub fn uses(&self, slot: usize) -> bool {
        self.uses[slot]
    }

    /// Largest space index `k` such that `x_k` is referenced (0 if none).
    pub fn max_space_var(&self) -> usize {
        (0..3).rev().find(|&k| self.uses[k]).map_or(0, |k| k + 1)
    }

    /// Evaluates with `slots = [x1, x2, x3, t, r]`.
    pub fn eval(&self, slots: &[f64; 5]) -> f64 {
        eval(&self.root, slots)
    }
}

fn eval(node: &Node, s: &[f64; 5]) -> f64 {
    match node {
        Node::Num(v) => *v,
        Node::Var(k) => s[*k],
        Node::Neg(a) => -eval(a, s),
        Node::Bin(op, a, b) => {
            let (x, y) = (eval(a, s), eval(b, s));
            match op {
                '+' => x + y,
                '-' => x - y,
                '*' => x * y,
                '/' => x / y,
                _ => x.powf(y),
            }
        }
        Node::Call(f, args) => {
            let x = eval(&args[0], s);
            match f {
                Func::Log => x.ln(),
                Func::Exp => x.exp(),
                Func::Sqrt => x.sqrt(),
                Func::Sin => x.sin(),
                Func::Cos => x.cos(),
                Func::Abs => x.abs(),
                Func::Pow => x.powf(eval(&args[1], s)),
                Func::Min => x.min(eval(&args[1], s)),
                Func::Max => x.max(eval(&args[1], s)),
            }
        }
    }
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
    uses: [bool; 5],
}

impl Parser<'_> {
    fn error(&self, message: impl Into<String>) -> Error {
        Error::Expression {
            column: self.pos + 1,
            message: message.into(),
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn expect(&mut self, c: u8) -> Result<()> {
        if self.peek() == Some(c) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.error(format!("expected `{}`", c as char)))
        }
    }

    fn expr(&mut self) -> Result<Node> {
        let mut lhs = self.term()?;
        while let Some(c @ (b'+' | b'-')) = self.peek() {
            self.pos += 1;
            lhs = Node::Bin(c as char, Box::new(lhs), Box::new(self.term()?));
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Node> {
        let mut lhs = self.unary()?;
        while let Some(c @ (b'*' | b'/')) = self.peek() {
            self.pos += 1;
            lhs = Node::Bin(c as char, Box::new(lhs), Box::new(self.unary()?));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Node> {
        match self.peek() {
            Some(b'-') => {
                self.pos += 1;
                Ok(Node::Neg(Box::new(self.unary()?)))
            }
            Some(b'+') => {
                self.pos += 1;
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Node> {
        let base = self.atom()?;
        if self.peek() == Some(b'^') {
            self.pos += 1;
            let exp = self.unary()?;
            return Ok(Node::Bin('^', Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Node> {
        match self.peek() {
            None => Err(self.error("unexpected end of expression")),
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect(b')')?;
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() => self.ident(),
            Some(c) => Err(self.error(format!("unexpected character `{}`", c as char))),
        }
    }

    fn number(&mut self) -> Result<Node> {
        let start = self.pos;
        while self.pos < self.src.len()
            && (self.src[self.pos].is_ascii_digit() || self.src[self.pos] == b'.')
        {
            self.pos += 1;
        }
        if self.pos < self.src.len() && matches!(self.src[self.pos], b'e' | b'E') {
            let save = self.pos;
            self.pos += 1;
            if self.pos < self.src.len() && matches!(self.src[self.pos], b'+' | b'-') {
                self.pos += 1;
            }
            let digits = self.pos;
            while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                self.pos += 1;
            }
            if self.pos == digits {
                self.pos = save;
            }
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii");
        text.parse::<f64>().map(Node::Num).map_err(|_| Error::Expression {
            column: start + 1,
            message: format!("malformed number `{text}`"),
        })
    }

    fn ident(&mut self) -> Result<Node> {
        let start = self.pos;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_alphanumeric() {
            self.pos += 1;
        }
        let name = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii");
        let var = match name {
            "x1" => Some(0),
            "x2" => Some(1),
            "x3" => Some(2),
            "t" => Some(SLOT_T),
            "r" => Some(SLOT_R),
            _ => None,
        };
        if let Some(k) = var {
            self.uses[k] = true;
            return Ok(Node::Var(k));
        }
        match name {
            "pi" => return Ok(Node::Num(std::f64::consts::PI)),
            "e" => return Ok(Node::Num(std::f64::consts::E)),
            _ => {}
        }
        let Some((func, arity)) = Func::lookup(name) else {
            return Err(Error::Expression {
                column: start + 1,
                message: format!("unknown identifier `{name}`"),
            });
        };
        self.expect(b'(')?;
        let mut args = vec![self.expr()?];
        while self.peek() == Some(b',') {
            self.pos += 1;
            args.push(self.expr()?);
        }
        self.expect(b')')?;
        if args.len() != arity {
            return Err(Error::Expression {
                column: start + 1,
                message: format!("`{name}` takes {arity} argument(s), got {}", args.len()),
            });
        }
        Ok(Node::Call(func, args))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(s: &str, slots: [f64; 5]) -> f64 {
        Expr::parse(s).unwrap().eval(&slots)
    }

    #[test]
    fn precedence_and_associativity() {
        let z = [0.0; 5];
        assert_eq!(ev("1 + 2 * 3", z), 7.0);
        assert_eq!(ev("2 ^ 3 ^ 2", z), 512.0);
        assert_eq!(ev("-2 ^ 2", z), -4.0);
        assert_eq!(ev("(1 + 2) * 3 - 4 / 2", z), 7.0);
        assert_eq!(ev("1.5e1 + 2E-1", z), 15.2);
    }

    #[test]
    fn variables_and_functions() {
        let s = [1.0, 2.0, 3.0, 4.0, 0.5];
        assert_eq!(ev("x1 + x2 * x3 - t", s), 3.0);
        assert!((ev("pow(r, 1 - 2) * log(e + r)", s) - 2.0 * (std::f64::consts::E + 0.5).ln()).abs() < 1e-15);
        assert_eq!(ev("max(abs(-3), min(x1, x2))", s), 3.0);
        assert!((ev("sin(pi / 2) + cos(0) + sqrt(4) + exp(0)", s) - 5.0).abs() < 1e-15);
    }

    #[test]
    fn reports_columns() {
        match Expr::parse("1 + foo(2)") {
            Err(Error::Expression { column, .. }) => assert_eq!(column, 5),
            other => panic!("{other:?}"),
        }
        match Expr::parse("1 + (2") {
            Err(Error::Expression { column, .. }) => assert_eq!(column, 7),
            other => panic!("{other:?}"),
        }
        assert!(Expr::parse("pow(1)").is_err());
        assert!(Expr::parse("1 2").is_err());
        assert!(Expr::parse("").is_err());
    }

    #[test]
    fn tracks_variable_use() {
        let e = Expr::parse("x2 * r").unwrap();
        assert!(e.uses(SLOT_R));
        assert!(!e.uses(SLOT_T));
        assert_eq!(e.max_space_var(), 2);
    }
}
