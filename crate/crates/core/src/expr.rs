//! A small arithmetic expression language for file-specified maps.
//!
//! Grammar: numbers, named variables, `pi`, `+ - * / ^`, parentheses and the
//! functions `sin cos tan exp ln sqrt abs sign lambda xi gamma arccos arcsin
//! atan2 min max`. `^` is right associative and binds tighter than unary minus.

use crate::error::{Error, Result};
use crate::smoothfn;

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Var(usize),
    Neg(Box<Expr>),
    Bin(Op, Box<Expr>, Box<Expr>),
    Call(Func, Vec<Expr>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Op {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Tan,
    Exp,
    Ln,
    Sqrt,
    Abs,
    Sign,
    Lambda,
    Xi,
    Gamma,
    Arccos,
    Arcsin,
    Atan2,
    Min,
    Max,
}

impl Func {
    fn lookup(name: &str) -> Option<(Func, usize)> {
        Some(match name {
            "sin" => (Func::Sin, 1),
            "cos" => (Func::Cos, 1),
            "tan" => (Func::Tan, 1),
            "exp" => (Func::Exp, 1),
            "ln" | "log" => (Func::Ln, 1),
            "sqrt" => (Func::Sqrt, 1),
            "abs" => (Func::Abs, 1),
            "sign" => (Func::Sign, 1),
            "lambda" => (Func::Lambda, 1),
            "xi" => (Func::Xi, 1),
            "gamma" => (Func::Gamma, 1),
            "arccos" | "acos" => (Func::Arccos, 1),
            "arcsin" | "asin" => (Func::Arcsin, 1),
            "atan2" => (Func::Atan2, 2),
            "min" => (Func::Min, 2),
            "max" => (Func::Max, 2),
            _ => return None,
        })
    }

    fn apply(self, a: &[f64]) -> f64 {
        match self {
            Func::Sin => a[0].sin(),
            Func::Cos => a[0].cos(),
            Func::Tan => a[0].tan(),
            Func::Exp => a[0].exp(),
            Func::Ln => a[0].ln(),
            Func::Sqrt => a[0].sqrt(),
            Func::Abs => a[0].abs(),
            Func::Sign => {
                if a[0] > 0.0 {
                    1.0
                } else if a[0] < 0.0 {
                    -1.0
                } else {
                    0.0
                }
            }
            Func::Lambda => smoothfn::lambda_fn(a[0]),
            Func::Xi => smoothfn::xi(a[0]),
            Func::Gamma => smoothfn::gamma(a[0]),
            Func::Arccos => a[0].clamp(-1.0, 1.0).acos(),
            Func::Arcsin => a[0].clamp(-1.0, 1.0).asin(),
            Func::Atan2 => a[0].atan2(a[1]),
            Func::Min => a[0].min(a[1]),
            Func::Max => a[0].max(a[1]),
        }
    }
}

impl Expr {
    /// Parses `src`; identifiers must be listed in `vars` (their index is the slot).
    pub fn parse(src: &str, vars: &[String]) -> Result<Expr> {
        let tokens = tokenize(src)?;
        let mut p = Parser { tokens, pos: 0, vars };
        let e = p.expr()?;
        if p.pos != p.tokens.len() {
            return Err(Error::Parse(format!("unexpected {:?} in {src:?}", p.tokens[p.pos])));
        }
        Ok(e)
    }

    pub fn eval(&self, vals: &[f64]) -> f64 {
        match self {
            Expr::Num(x) => *x,
            Expr::Var(i) => vals.get(*i).copied().unwrap_or(f64::NAN),
            Expr::Neg(a) => -a.eval(vals),
            Expr::Bin(op, a, b) => {
                let (x, y) = (a.eval(vals), b.eval(vals));
                match op {
                    Op::Add => x + y,
                    Op::Sub => x - y,
                    Op::Mul => x * y,
                    Op::Div => x / y,
                    Op::Pow => pow(x, y),
                }
            }
            Expr::Call(f, args) => {
                let a: Vec<f64> = args.iter().map(|e| e.eval(vals)).collect();
                f.apply(&a)
            }
        }
    }
}

fn pow(x: f64, y: f64) -> f64 {
    if y.fract() == 0.0 && y.abs() <= i32::MAX as f64 {
        x.powi(y as i32)
    } else {
        x.powf(y)
    }
}

/// A vector-valued expression.
#[derive(Debug, Clone, PartialEq)]
pub struct ExprVec {
    pub exprs: Vec<Expr>,
}

impl ExprVec {
    pub fn parse<S: AsRef<str>>(srcs: &[S], vars: &[String]) -> Result<Self> {
        Ok(Self {
            exprs: srcs.iter().map(|s| Expr::parse(s.as_ref(), vars)).collect::<Result<_>>()?,
        })
    }

    /// `prefix1, …, prefixN`.
    pub fn indexed_vars(prefix: &str, n: usize) -> Vec<String> {
        (1..=n).map(|i| format!("{prefix}{i}")).collect()
    }

    /// Evaluates every component; a non-finite value is a domain error.
    pub fn eval(&self, vals: &[f64]) -> Result<Vec<f64>> {
        let out: Vec<f64> = self.exprs.iter().map(|e| e.eval(vals)).collect();
        if out.iter().any(|x| !x.is_finite()) {
            return Err(Error::domain(format!("expression is not finite at {vals:?}")));
        }
        Ok(out)
    }

    pub fn len(&self) -> usize {
        self.exprs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exprs.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Sym(char),
}

fn tokenize(src: &str) -> Result<Vec<Tok>> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    i = j;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let s: String = chars[start..i].iter().collect();
            let v = s
                .parse::<f64>()
                .map_err(|_| Error::Parse(format!("bad number {s:?}")))?;
            out.push(Tok::Num(v));
        } else if c.is_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push(Tok::Ident(chars[start..i].iter().collect()));
        } else if "+-*/^(),".contains(c) {
            out.push(Tok::Sym(c));
            i += 1;
        } else {
            return Err(Error::Parse(format!("unexpected character {c:?} in {src:?}")));
        }
    }
    Ok(out)
}

struct Parser<'a> {
    tokens: Vec<Tok>,
    pos: usize,
    vars: &'a [String],
}

impl Parser<'_> {
    fn peek_sym(&self) -> Option<char> {
        match self.tokens.get(self.pos) {
            Some(Tok::Sym(c)) => Some(*c),
            _ => None,
        }
    }

    fn expect(&mut self, c: char) -> Result<()> {
        if self.peek_sym() == Some(c) {
            self.pos += 1;
            Ok(())
        } else {
            Err(Error::Parse(format!("expected {c:?} at token {}", self.pos)))
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        while let Some(c @ ('+' | '-')) = self.peek_sym() {
            self.pos += 1;
            let rhs = self.term()?;
            let op = if c == '+' { Op::Add } else { Op::Sub };
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        while let Some(c @ ('*' | '/')) = self.peek_sym() {
            self.pos += 1;
            let rhs = self.unary()?;
            let op = if c == '*' { Op::Mul } else { Op::Div };
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr> {
        match self.peek_sym() {
            Some('-') => {
                self.pos += 1;
                Ok(Expr::Neg(Box::new(self.unary()?)))
            }
            Some('+') => {
                self.pos += 1;
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.atom()?;
        if self.peek_sym() == Some('^') {
            self.pos += 1;
            let exp = self.unary()?;
            return Ok(Expr::Bin(Op::Pow, Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr> {
        let tok = self
            .tokens
            .get(self.pos)
            .cloned()
            .ok_or_else(|| Error::Parse("unexpected end of expression".into()))?;
        self.pos += 1;
        match tok {
            Tok::Num(v) => Ok(Expr::Num(v)),
            Tok::Sym('(') => {
                let e = self.expr()?;
                self.expect(')')?;
                Ok(e)
            }
            Tok::Ident(name) => {
                if self.peek_sym() == Some('(') {
                    let (f, arity) =
                        Func::lookup(&name).ok_or_else(|| Error::Parse(format!("unknown function {name:?}")))?;
                    self.pos += 1;
                    let mut args = vec![self.expr()?];
                    while self.peek_sym() == Some(',') {
                        self.pos += 1;
                        args.push(self.expr()?);
                    }
                    self.expect(')')?;
                    if args.len() != arity {
                        return Err(Error::Parse(format!("{name} takes {arity} argument(s)")));
                    }
                    return Ok(Expr::Call(f, args));
                }
                if let Some(i) = self.vars.iter().position(|v| *v == name) {
                    return Ok(Expr::Var(i));
                }
                match name.as_str() {
                    "pi" => Ok(Expr::Num(std::f64::consts::PI)),
                    _ => Err(Error::Parse(format!("unknown variable {name:?}"))),
                }
            }
            Tok::Sym(c) => Err(Error::Parse(format!("unexpected {c:?}"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(src: &str, vars: &[(&str, f64)]) -> f64 {
        let names: Vec<String> = vars.iter().map(|(n, _)| n.to_string()).collect();
        let vals: Vec<f64> = vars.iter().map(|(_, v)| *v).collect();
        Expr::parse(src, &names).unwrap().eval(&vals)
    }

    #[test]
    fn precedence() {
        assert_eq!(ev("1 + 2 * 3", &[]), 7.0);
        assert_eq!(ev("-2^2", &[]), -4.0);
        assert_eq!(ev("2^3^2", &[]), 512.0);
        assert_eq!(ev("(1 + 2) * 3", &[]), 9.0);
        assert_eq!(ev("1/2", &[]), 0.5);
        assert_eq!(ev("2e-1 + 1.5E1", &[]), 15.2);
    }

    #[test]
    fn variables_and_functions() {
        assert_eq!(ev("x1 * x2 + 1", &[("x1", 2.0), ("x2", 3.0)]), 7.0);
        assert_eq!(ev("lambda(0.5)", &[]), 0.5);
        assert_eq!(ev("xi(0.1)", &[]), 0.1);
        assert_eq!(ev("sign(-3) + max(1, 2)", &[]), 1.0);
        assert!((ev("cos(pi)", &[]) + 1.0).abs() < 1e-15);
        assert_eq!(ev("atan2(0, 1)", &[]), 0.0);
    }

    #[test]
    fn errors() {
        assert!(Expr::parse("1 +", &[]).is_err());
        assert!(Expr::parse("foo(1)", &[]).is_err());
        assert!(Expr::parse("y", &[]).is_err());
        assert!(Expr::parse("min(1)", &[]).is_err());
        assert!(Expr::parse("(1", &[]).is_err());
        assert!(Expr::parse("1 $ 2", &[]).is_err());
        let v = ExprVec::parse(&["sqrt(x1)"], &ExprVec::indexed_vars("x", 1)).unwrap();
        assert!(v.eval(&[-1.0]).is_err());
    }
}
