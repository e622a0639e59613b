//! Scalar expressions over chart coordinates `x1..xn`.
//!
//! Expressions are parsed from text, differentiated symbolically and evaluated
//! numerically. Differentiation applies constant folding so that repeated
//! derivatives of metric components stay small; no other simplification is
//! attempted.

use std::fmt;
use std::ops;
use std::sync::Arc;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Func {
    Sin,
    Cos,
    Tan,
    Exp,
    Log,
    Sqrt,
}

impl Func {
    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Tan => "tan",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
        }
    }

    fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "tan" => Func::Tan,
            "exp" => Func::Exp,
            "log" => Func::Log,
            "sqrt" => Func::Sqrt,
            _ => return None,
        })
    }

    fn apply(self, x: f64) -> f64 {
        match self {
            Func::Sin => x.sin(),
            Func::Cos => x.cos(),
            Func::Tan => x.tan(),
            Func::Exp => x.exp(),
            Func::Log => x.ln(),
            Func::Sqrt => x.sqrt(),
        }
    }
}

/// Expression tree. Variables are stored 0-based (`Var(0)` is `x1`).
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    Var(usize),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, i32),
    Func(Func, Box<Expr>),
}

impl Expr {
    pub fn constant(c: f64) -> Expr {
        Expr::Const(c)
    }

    /// The 0-based coordinate variable `x{index+1}`.
    pub fn var(index: usize) -> Expr {
        Expr::Var(index)
    }

    pub fn as_const(&self) -> Option<f64> {
        match self {
            Expr::Const(c) => Some(*c),
            _ => None,
        }
    }

    fn is_const(&self, value: f64) -> bool {
        self.as_const() == Some(value)
    }

    pub fn powi(self, k: i32) -> Expr {
        match (k, &self) {
            (0, _) => Expr::Const(1.0),
            (1, _) => self,
            (_, Expr::Const(c)) => Expr::Const(c.powi(k)),
            _ => Expr::Pow(Box::new(self), k),
        }
    }

    pub fn apply(func: Func, arg: Expr) -> Expr {
        match arg {
            Expr::Const(c) => Expr::Const(func.apply(c)),
            arg => Expr::Func(func, Box::new(arg)),
        }
    }

    pub fn sin(self) -> Expr {
        Expr::apply(Func::Sin, self)
    }
    pub fn cos(self) -> Expr {
        Expr::apply(Func::Cos, self)
    }
    pub fn tan(self) -> Expr {
        Expr::apply(Func::Tan, self)
    }
    pub fn exp(self) -> Expr {
        Expr::apply(Func::Exp, self)
    }
    pub fn ln(self) -> Expr {
        Expr::apply(Func::Log, self)
    }
    pub fn sqrt(self) -> Expr {
        Expr::apply(Func::Sqrt, self)
    }

    /// Evaluates without finiteness checks; NaN propagates.
    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            Expr::Const(c) => *c,
            Expr::Var(i) => x[*i],
            Expr::Neg(a) => -a.eval(x),
            Expr::Add(a, b) => a.eval(x) + b.eval(x),
            Expr::Sub(a, b) => a.eval(x) - b.eval(x),
            Expr::Mul(a, b) => a.eval(x) * b.eval(x),
            Expr::Div(a, b) => a.eval(x) / b.eval(x),
            Expr::Pow(a, k) => a.eval(x).powi(*k),
            Expr::Func(f, a) => f.apply(a.eval(x)),
        }
    }

    /// Symbolic partial derivative with respect to the 0-based variable `var`.
    pub fn derivative(&self, var: usize) -> Expr {
        match self {
            Expr::Const(_) => Expr::Const(0.0),
            Expr::Var(i) => Expr::Const(if *i == var { 1.0 } else { 0.0 }),
            Expr::Neg(a) => -a.derivative(var),
            Expr::Add(a, b) => a.derivative(var) + b.derivative(var),
            Expr::Sub(a, b) => a.derivative(var) - b.derivative(var),
            Expr::Mul(a, b) => {
                a.derivative(var) * (**b).clone() + (**a).clone() * b.derivative(var)
            }
            Expr::Div(a, b) => {
                let da = a.derivative(var);
                let db = b.derivative(var);
                if db.is_const(0.0) {
                    da / (**b).clone()
                } else {
                    (da * (**b).clone() - (**a).clone() * db) / (**b).clone().powi(2)
                }
            }
            Expr::Pow(a, k) => Expr::Const(*k as f64) * (**a).clone().powi(k - 1) * a.derivative(var),
            Expr::Func(f, a) => {
                let da = a.derivative(var);
                if da.is_const(0.0) {
                    return Expr::Const(0.0);
                }
                let inner = (**a).clone();
                match f {
                    Func::Sin => inner.cos() * da,
                    Func::Cos => -(inner.sin()) * da,
                    Func::Tan => da / inner.cos().powi(2),
                    Func::Exp => inner.exp() * da,
                    Func::Log => da / inner,
                    Func::Sqrt => da / (Expr::Const(2.0) * inner.sqrt()),
                }
            }
        }
    }

    /// Replaces every variable `x{i+1}` by `values[i]`.
    pub fn substitute(&self, values: &[Expr]) -> Expr {
        match self {
            Expr::Const(c) => Expr::Const(*c),
            Expr::Var(i) => values[*i].clone(),
            Expr::Neg(a) => -a.substitute(values),
            Expr::Add(a, b) => a.substitute(values) + b.substitute(values),
            Expr::Sub(a, b) => a.substitute(values) - b.substitute(values),
            Expr::Mul(a, b) => a.substitute(values) * b.substitute(values),
            Expr::Div(a, b) => a.substitute(values) / b.substitute(values),
            Expr::Pow(a, k) => a.substitute(values).powi(*k),
            Expr::Func(f, a) => Expr::apply(*f, a.substitute(values)),
        }
    }

    /// Largest variable index used, plus one.
    pub fn arity(&self) -> usize {
        match self {
            Expr::Const(_) => 0,
            Expr::Var(i) => i + 1,
            Expr::Neg(a) | Expr::Pow(a, _) | Expr::Func(_, a) => a.arity(),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                a.arity().max(b.arity())
            }
        }
    }

    pub fn node_count(&self) -> usize {
        match self {
            Expr::Const(_) | Expr::Var(_) => 1,
            Expr::Neg(a) | Expr::Pow(a, _) | Expr::Func(_, a) => 1 + a.node_count(),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                1 + a.node_count() + b.node_count()
            }
        }
    }
}

impl ops::Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        match self {
            Expr::Const(c) => Expr::Const(-c),
            Expr::Neg(a) => *a,
            a => Expr::Neg(Box::new(a)),
        }
    }
}

impl ops::Add for Expr {
    type Output = Expr;
    fn add(self, rhs: Expr) -> Expr {
        match (self.as_const(), rhs.as_const()) {
            (Some(a), Some(b)) => Expr::Const(a + b),
            (Some(a), _) if a == 0.0 => rhs,
            (_, Some(b)) if b == 0.0 => self,
            _ => Expr::Add(Box::new(self), Box::new(rhs)),
        }
    }
}

impl ops::Sub for Expr {
    type Output = Expr;
    fn sub(self, rhs: Expr) -> Expr {
        match (self.as_const(), rhs.as_const()) {
            (Some(a), Some(b)) => Expr::Const(a - b),
            (Some(a), _) if a == 0.0 => -rhs,
            (_, Some(b)) if b == 0.0 => self,
            _ => Expr::Sub(Box::new(self), Box::new(rhs)),
        }
    }
}

impl ops::Mul for Expr {
    type Output = Expr;
    fn mul(self, rhs: Expr) -> Expr {
        match (self.as_const(), rhs.as_const()) {
            (Some(a), Some(b)) => Expr::Const(a * b),
            (Some(a), _) | (_, Some(a)) if a == 0.0 => Expr::Const(0.0),
            (Some(a), _) if a == 1.0 => rhs,
            (_, Some(b)) if b == 1.0 => self,
            (Some(a), _) if a == -1.0 => -rhs,
            (_, Some(b)) if b == -1.0 => -self,
            _ => Expr::Mul(Box::new(self), Box::new(rhs)),
        }
    }
}

impl ops::Div for Expr {
    type Output = Expr;
    fn div(self, rhs: Expr) -> Expr {
        match (self.as_const(), rhs.as_const()) {
            (Some(a), Some(b)) => Expr::Const(a / b),
            (Some(a), _) if a == 0.0 => Expr::Const(0.0),
            (_, Some(b)) if b == 1.0 => self,
            _ => Expr::Div(Box::new(self), Box::new(rhs)),
        }
    }
}

impl From<f64> for Expr {
    fn from(c: f64) -> Expr {
        Expr::Const(c)
    }
}

fn precedence(e: &Expr) -> u8 {
    match e {
        Expr::Add(..) | Expr::Sub(..) => 1,
        Expr::Mul(..) | Expr::Div(..) => 2,
        Expr::Neg(..) => 3,
        Expr::Pow(..) => 4,
        Expr::Const(c) if *c < 0.0 || c.is_sign_negative() => 3,
        _ => 5,
    }
}

struct Paren<'a>(&'a Expr, bool);

impl fmt::Display for Paren<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.1 {
            write!(f, "({})", self.0)
        } else {
            write!(f, "{}", self.0)
        }
    }
}

/// Prints text that parses back to an equivalent tree.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let p = precedence(self);
        match self {
            Expr::Const(c) => {
                if c.is_finite() {
                    write!(f, "{c:?}")
                } else {
                    // Not representable in the grammar; only reachable through folding.
                    write!(f, "({c})")
                }
            }
            Expr::Var(i) => write!(f, "x{}", i + 1),
            Expr::Neg(a) => write!(f, "-{}", Paren(a, precedence(a) < 3)),
            Expr::Add(a, b) => write!(f, "{} + {}", Paren(a, precedence(a) < 1), Paren(b, precedence(b) <= 1)),
            Expr::Sub(a, b) => write!(f, "{} - {}", Paren(a, precedence(a) < 1), Paren(b, precedence(b) <= 1)),
            Expr::Mul(a, b) => write!(f, "{} * {}", Paren(a, precedence(a) < 2), Paren(b, precedence(b) <= 2)),
            Expr::Div(a, b) => write!(f, "{} / {}", Paren(a, precedence(a) < 2), Paren(b, precedence(b) <= 2)),
            Expr::Pow(a, k) => write!(f, "{}^{}", Paren(a, precedence(a) <= p), k),
            Expr::Func(func, a) => write!(f, "{}({})", func.name(), a),
        }
    }
}

/// A scalar function on an `n`-dimensional chart.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    expr: Arc<Expr>,
    dim: usize,
}

impl ScalarField {
    pub fn new(expr: Expr, dim: usize) -> Result<Self> {
        if expr.arity() > dim {
            return Err(Error::Dimension(format!(
                "expression uses x{} but the chart has dimension {dim}",
                expr.arity()
            )));
        }
        Ok(ScalarField {
            expr: Arc::new(expr),
            dim,
        })
    }

    pub fn constant(c: f64, dim: usize) -> Self {
        ScalarField {
            expr: Arc::new(Expr::Const(c)),
            dim,
        }
    }

    pub fn parse(src: &str, dim: usize) -> Result<Self> {
        parse_scalar_field(src, dim)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn expr(&self) -> &Expr {
        &self.expr
    }

    pub fn is_zero(&self) -> bool {
        self.expr.is_const(0.0)
    }

    /// Evaluates at `x`; NaN or infinite results are errors.
    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        debug_assert!(x.len() >= self.dim);
        let v = self.expr.eval(x);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::NonFinite {
                context: format!("`{}` at {:?}", self.expr, &x[..self.dim]),
            })
        }
    }

    /// Partial derivative with respect to the 0-based coordinate `var`.
    pub fn derivative(&self, var: usize) -> ScalarField {
        ScalarField {
            expr: Arc::new(self.expr.derivative(var)),
            dim: self.dim,
        }
    }
}

impl fmt::Display for ScalarField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.expr.fmt(f)
    }
}

// ---------------------------------------------------------------------------
// Parser

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    End,
}

struct Lexer<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn syntax(&self, at: usize, message: impl Into<String>) -> Error {
        Error::Syntax {
            offset: at + 1,
            message: message.into(),
        }
    }

    fn skip_ws(&mut self) {
        let bytes = self.src.as_bytes();
        while self.pos < bytes.len() && bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    /// Returns the next token and its 0-based start offset.
    fn next(&mut self) -> Result<(Token, usize)> {
        self.skip_ws();
        let bytes = self.src.as_bytes();
        let start = self.pos;
        let Some(&c) = bytes.get(self.pos) else {
            return Ok((Token::End, start));
        };
        let tok = match c {
            b'+' => Token::Plus,
            b'-' => Token::Minus,
            b'*' => Token::Star,
            b'/' => Token::Slash,
            b'^' => Token::Caret,
            b'(' => Token::LParen,
            b')' => Token::RParen,
            b'0'..=b'9' | b'.' => return self.number(start),
            c if c.is_ascii_alphabetic() || c == b'_' => {
                let mut end = start;
                while end < bytes.len() && (bytes[end].is_ascii_alphanumeric() || bytes[end] == b'_') {
                    end += 1;
                }
                self.pos = end;
                return Ok((Token::Ident(self.src[start..end].to_string()), start));
            }
            _ => {
                let ch = self.src[start..].chars().next().unwrap_or('?');
                return Err(self.syntax(start, format!("unexpected character `{ch}`")));
            }
        };
        self.pos += 1;
        Ok((tok, start))
    }

    fn number(&mut self, start: usize) -> Result<(Token, usize)> {
        let bytes = self.src.as_bytes();
        let mut end = start;
        let digits = |end: &mut usize| {
            let from = *end;
            while *end < bytes.len() && bytes[*end].is_ascii_digit() {
                *end += 1;
            }
            *end - from
        };
        let mut mantissa = digits(&mut end);
        if end < bytes.len() && bytes[end] == b'.' {
            end += 1;
            mantissa += digits(&mut end);
        }
        if mantissa == 0 {
            return Err(self.syntax(start, "malformed number"));
        }
        if end < bytes.len() && (bytes[end] == b'e' || bytes[end] == b'E') {
            let mut probe = end + 1;
            if probe < bytes.len() && (bytes[probe] == b'+' || bytes[probe] == b'-') {
                probe += 1;
            }
            if probe < bytes.len() && bytes[probe].is_ascii_digit() {
                end = probe;
                digits(&mut end);
            }
        }
        self.pos = end;
        let text = &self.src[start..end];
        text.parse::<f64>()
            .map(|v| (Token::Num(v), start))
            .map_err(|_| self.syntax(start, format!("malformed number `{text}`")))
    }
}

struct Parser<'a> {
    lexer: Lexer<'a>,
    tok: Token,
    at: usize,
    dim: usize,
}

impl<'a> Parser<'a> {
    fn bump(&mut self) -> Result<()> {
        let (tok, at) = self.lexer.next()?;
        self.tok = tok;
        self.at = at;
        Ok(())
    }

    fn error_here(&self, message: impl Into<String>) -> Error {
        self.lexer.syntax(self.at, message)
    }

    fn expect(&mut self, want: Token, what: &str) -> Result<()> {
        if self.tok == want {
            self.bump()
        } else {
            Err(self.error_here(format!("expected {what}")))
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            match self.tok {
                Token::Plus => {
                    self.bump()?;
                    lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
                }
                Token::Minus => {
                    self.bump()?;
                    lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.factor()?;
        loop {
            match self.tok {
                Token::Star => {
                    self.bump()?;
                    lhs = Expr::Mul(Box::new(lhs), Box::new(self.factor()?));
                }
                Token::Slash => {
                    self.bump()?;
                    lhs = Expr::Div(Box::new(lhs), Box::new(self.factor()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn factor(&mut self) -> Result<Expr> {
        if self.tok == Token::Minus {
            self.bump()?;
            return Ok(Expr::Neg(Box::new(self.factor()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.atom()?;
        if self.tok != Token::Caret {
            return Ok(base);
        }
        self.bump()?;
        let negative = if self.tok == Token::Minus {
            self.bump()?;
            true
        } else {
            false
        };
        match self.tok {
            Token::Num(v) if v.fract() == 0.0 && v.abs() <= i32::MAX as f64 => {
                let text = &self.lexer.src[self.at..self.lexer.pos];
                if text.contains(['.', 'e', 'E']) {
                    return Err(self.error_here("exponent must be an integer literal"));
                }
                self.bump()?;
                let k = v as i32;
                Ok(Expr::Pow(Box::new(base), if negative { -k } else { k }))
            }
            _ => Err(self.error_here("exponent must be an integer literal")),
        }
    }

    fn atom(&mut self) -> Result<Expr> {
        match self.tok.clone() {
            Token::Num(v) => {
                self.bump()?;
                Ok(Expr::Const(v))
            }
            Token::LParen => {
                self.bump()?;
                let e = self.expr()?;
                self.expect(Token::RParen, "`)`")?;
                Ok(e)
            }
            Token::Ident(name) => {
                let at = self.at;
                self.bump()?;
                if let Some(func) = Func::from_name(&name) {
                    self.expect(Token::LParen, "`(` after function name")?;
                    let arg = self.expr()?;
                    self.expect(Token::RParen, "`)`")?;
                    return Ok(Expr::Func(func, Box::new(arg)));
                }
                match name.as_str() {
                    "pi" => return Ok(Expr::Const(std::f64::consts::PI)),
                    "e" => return Ok(Expr::Const(std::f64::consts::E)),
                    _ => {}
                }
                if let Some(digits) = name.strip_prefix('x') {
                    if !digits.is_empty() && digits.bytes().all(|b| b.is_ascii_digit()) {
                        let index: usize = digits.parse().unwrap_or(usize::MAX);
                        if index == 0 || index > self.dim {
                            return Err(Error::VariableOutOfRange {
                                index,
                                dim: self.dim,
                                offset: at + 1,
                            });
                        }
                        return Ok(Expr::Var(index - 1));
                    }
                }
                Err(Error::UnknownIdentifier { name, offset: at + 1 })
            }
            Token::End => Err(self.error_here("unexpected end of input")),
            _ => Err(self.error_here("expected a number, variable, function or `(`")),
        }
    }
}

/// Parses `src` over variables `x1..x{dim}`.
///
/// Precedence, tightest first: `^` (integer exponent), unary `-`, `* /`, `+ -`.
/// Binary operators associate to the left. Error offsets are 1-based byte columns;
/// an error at end of input reports `len + 1`.
pub fn parse_scalar_field(src: &str, dim: usize) -> Result<ScalarField> {
    let mut parser = Parser {
        lexer: Lexer { src, pos: 0 },
        tok: Token::End,
        at: 0,
        dim,
    };
    parser.bump()?;
    let expr = parser.expr()?;
    if parser.tok != Token::End {
        return Err(parser.error_here("unexpected trailing input"));
    }
    Ok(ScalarField {
        expr: Arc::new(expr),
        dim,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn eval(src: &str, dim: usize, x: &[f64]) -> f64 {
        parse_scalar_field(src, dim).unwrap().eval(x).unwrap()
    }

    #[test]
    fn spec_examples() {
        assert_eq!(eval("sin(x1)^2", 2, &[PI / 2.0, 0.0]), 1.0);
        assert_eq!(eval("x1*x2 + 2", 2, &[3.0, 4.0]), 14.0);
        let err = parse_scalar_field("sin(x1", 1).unwrap_err();
        assert!(matches!(err, Error::Syntax { offset: 7, .. }), "{err:?}");
    }

    #[test]
    fn precedence_and_associativity() {
        assert_eq!(eval("-x1^2", 1, &[3.0]), -9.0);
        assert!(parse_scalar_field("2^3^1", 1).is_err());
        assert_eq!(eval("8 - 3 - 2", 1, &[0.0]), 3.0);
        assert_eq!(eval("8 / 4 / 2", 1, &[0.0]), 1.0);
        assert_eq!(eval("1 + 2 * 3", 1, &[0.0]), 7.0);
        assert_eq!(eval("--x1", 1, &[2.0]), 2.0);
        assert_eq!(eval("x1^-2", 1, &[2.0]), 0.25);
        assert_eq!(eval("2*pi", 1, &[0.0]), 2.0 * PI);
        assert_eq!(eval("e", 1, &[0.0]), std::f64::consts::E);
        assert_eq!(eval("1.5e2 + .5", 1, &[0.0]), 150.5);
        assert_eq!(eval(" exp( 0 ) * sqrt(4) ", 1, &[0.0]), 2.0);
        // `e` after a number without digits is the constant times nothing: rejected.
        assert!(parse_scalar_field("2e", 1).is_err());
    }

    #[test]
    fn errors() {
        assert!(matches!(
            parse_scalar_field("y1 + 1", 2),
            Err(Error::UnknownIdentifier { offset: 1, .. })
        ));
        assert!(matches!(
            parse_scalar_field("x1 + x3", 2),
            Err(Error::VariableOutOfRange { index: 3, dim: 2, offset: 6 })
        ));
        assert!(matches!(parse_scalar_field("x0", 2), Err(Error::VariableOutOfRange { .. })));
        assert!(matches!(parse_scalar_field("x1 ^ 1.5", 1), Err(Error::Syntax { offset: 6, .. })));
        assert!(matches!(parse_scalar_field("x1 ^ x1", 1), Err(Error::Syntax { .. })));
        assert!(matches!(parse_scalar_field("", 1), Err(Error::Syntax { offset: 1, .. })));
        assert!(matches!(parse_scalar_field("x1 )", 1), Err(Error::Syntax { offset: 4, .. })));
        assert!(matches!(parse_scalar_field("x1 $ 2", 1), Err(Error::Syntax { offset: 4, .. })));
        assert!(matches!(parse_scalar_field("foo(x1)", 1), Err(Error::UnknownIdentifier { .. })));
    }

    #[test]
    fn non_finite_is_an_error() {
        let f = parse_scalar_field("log(x1)", 1).unwrap();
        assert!(matches!(f.eval(&[-1.0]), Err(Error::NonFinite { .. })));
        let g = parse_scalar_field("1/x1", 1).unwrap();
        assert!(g.eval(&[0.0]).is_err());
    }

    #[test]
    fn derivatives_fold_constants() {
        let f = parse_scalar_field("3*x1 + x2^2", 2).unwrap();
        assert_eq!(f.derivative(0).expr(), &Expr::Const(3.0));
        let d2 = f.derivative(1).derivative(1);
        assert_eq!(d2.eval(&[0.0, 0.0]).unwrap(), 2.0);
        assert!(f.derivative(0).derivative(1).is_zero());
    }

    #[test]
    fn display_round_trips() {
        for src in ["-x1^2", "(x1 - x2) - (x1 - 1)", "x1 / (x2 * 3)", "(-2)^3 + sin(-x1)", "-(x1 + 1)^2"] {
            let f = parse_scalar_field(src, 2).unwrap();
            let g = parse_scalar_field(&f.to_string(), 2).unwrap();
            let x = [0.7, -1.3];
            assert_eq!(f.eval(&x).unwrap(), g.eval(&x).unwrap(), "{src} -> {f}");
        }
    }
}
