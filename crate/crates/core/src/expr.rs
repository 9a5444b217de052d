//! Closed-form expression grammar with per-piece analytic derivatives.
//!
//! Expressions are built from arithmetic, `abs`, `sign`, `max`, `min`,
//! elementary functions, powers with constant exponents, region indicators
//! and region-wise piecewise definitions. Evaluation with [`Expr::jet`]
//! returns the value, the gradient of the active piece and a flag telling
//! whether the point lies in the interior of a smooth piece. Kinks of
//! `abs`/`max`/`min`/`sign` and points of null pieces are reported as
//! non-smooth; everything else is handled by the chain rule.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Region;

/// Largest supported domain dimension for jet evaluation.
pub const MAX_DIM: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Unary {
    Neg,
    Abs,
    Sign,
    Sqrt,
    Sin,
    Cos,
    Exp,
    Ln,
    Atan,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Binary {
    Add,
    Sub,
    Mul,
    Div,
    Max,
    Min,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Expr {
    Const(f64),
    Var(usize),
    Unary(Unary, Box<Expr>),
    Binary(Binary, Box<Expr>, Box<Expr>),
    /// `base ^ exponent` with a constant exponent.
    Pow(Box<Expr>, f64),
    /// 1 on the region, 0 elsewhere.
    Indicator(Box<Region>),
    /// First piece whose region contains the point wins.
    Piecewise {
        pieces: Vec<(Region, Expr)>,
        otherwise: Box<Expr>,
    },
}

/// Value, gradient and smoothness flag at a point.
#[derive(Clone, Copy, Debug)]
pub struct Jet {
    pub value: f64,
    pub grad: [f64; MAX_DIM],
    pub smooth: bool,
}

impl Jet {
    fn constant(value: f64) -> Self {
        Jet {
            value,
            grad: [0.0; MAX_DIM],
            smooth: true,
        }
    }

    fn scaled(mut self, value: f64, factor: f64, kink: bool) -> Self {
        for g in self.grad.iter_mut() {
            *g *= factor;
        }
        self.value = value;
        self.smooth &= !kink;
        self
    }

    fn combine(a: Jet, b: Jet, value: f64, ca: f64, cb: f64, kink: bool) -> Jet {
        let mut grad = [0.0; MAX_DIM];
        for (i, g) in grad.iter_mut().enumerate() {
            // skip zero coefficients so that 0 * inf does not poison the gradient
            let ga = if ca == 0.0 { 0.0 } else { ca * a.grad[i] };
            let gb = if cb == 0.0 { 0.0 } else { cb * b.grad[i] };
            *g = ga + gb;
        }
        Jet {
            value,
            grad,
            smooth: a.smooth && b.smooth && !kink,
        }
    }
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

impl Expr {
    pub fn constant(v: f64) -> Expr {
        Expr::Const(v)
    }

    pub fn var(i: usize) -> Expr {
        Expr::Var(i)
    }

    pub fn unary(op: Unary, arg: Expr) -> Expr {
        Expr::Unary(op, Box::new(arg))
    }

    pub fn binary(op: Binary, lhs: Expr, rhs: Expr) -> Expr {
        Expr::Binary(op, Box::new(lhs), Box::new(rhs))
    }

    pub fn abs(self) -> Expr {
        Expr::unary(Unary::Abs, self)
    }

    pub fn sign(self) -> Expr {
        Expr::unary(Unary::Sign, self)
    }

    pub fn sqrt(self) -> Expr {
        Expr::unary(Unary::Sqrt, self)
    }

    pub fn sin(self) -> Expr {
        Expr::unary(Unary::Sin, self)
    }

    pub fn cos(self) -> Expr {
        Expr::unary(Unary::Cos, self)
    }

    pub fn ln(self) -> Expr {
        Expr::unary(Unary::Ln, self)
    }

    pub fn atan(self) -> Expr {
        Expr::unary(Unary::Atan, self)
    }

    pub fn powf(self, e: f64) -> Expr {
        Expr::Pow(Box::new(self), e)
    }

    pub fn max(self, other: Expr) -> Expr {
        Expr::binary(Binary::Max, self, other)
    }

    pub fn min(self, other: Expr) -> Expr {
        Expr::binary(Binary::Min, self, other)
    }

    pub fn indicator(region: Region) -> Expr {
        Expr::Indicator(Box::new(region))
    }

    pub fn piecewise(pieces: Vec<(Region, Expr)>, otherwise: Expr) -> Expr {
        Expr::Piecewise {
            pieces,
            otherwise: Box::new(otherwise),
        }
    }

    /// Largest variable index plus one.
    pub fn arity(&self) -> usize {
        match self {
            Expr::Const(_) | Expr::Indicator(_) => 0,
            Expr::Var(i) => i + 1,
            Expr::Unary(_, a) | Expr::Pow(a, _) => a.arity(),
            Expr::Binary(_, a, b) => a.arity().max(b.arity()),
            Expr::Piecewise { pieces, otherwise } => pieces
                .iter()
                .map(|(_, e)| e.arity())
                .fold(otherwise.arity(), usize::max),
        }
    }

    /// Plain evaluation. Division by zero and domain errors yield non-finite
    /// values, which callers treat as points outside the field's domain.
    pub fn eval(&self, p: &[f64]) -> f64 {
        match self {
            Expr::Const(c) => *c,
            Expr::Var(i) => p[*i],
            Expr::Unary(op, a) => {
                let u = a.eval(p);
                match op {
                    Unary::Neg => -u,
                    Unary::Abs => u.abs(),
                    Unary::Sign => sign(u),
                    Unary::Sqrt => u.sqrt(),
                    Unary::Sin => u.sin(),
                    Unary::Cos => u.cos(),
                    Unary::Exp => u.exp(),
                    Unary::Ln => u.ln(),
                    Unary::Atan => u.atan(),
                }
            }
            Expr::Binary(op, a, b) => {
                let (u, v) = (a.eval(p), b.eval(p));
                match op {
                    Binary::Add => u + v,
                    Binary::Sub => u - v,
                    Binary::Mul => u * v,
                    Binary::Div => u / v,
                    Binary::Max => u.max(v),
                    Binary::Min => u.min(v),
                }
            }
            Expr::Pow(a, e) => pow(a.eval(p), *e),
            Expr::Indicator(r) => {
                if r.contains(p) {
                    1.0
                } else {
                    0.0
                }
            }
            Expr::Piecewise { pieces, otherwise } => {
                for (r, e) in pieces {
                    if r.contains(p) {
                        return e.eval(p);
                    }
                }
                otherwise.eval(p)
            }
        }
    }

    /// Value and gradient of the active piece at `p`.
    pub fn jet(&self, p: &[f64]) -> Jet {
        debug_assert!(p.len() <= MAX_DIM);
        let j = match self {
            Expr::Const(c) => Jet::constant(*c),
            Expr::Var(i) => {
                let mut j = Jet::constant(p[*i]);
                j.grad[*i] = 1.0;
                j
            }
            Expr::Unary(op, a) => {
                let ja = a.jet(p);
                let u = ja.value;
                match op {
                    Unary::Neg => ja.scaled(-u, -1.0, false),
                    Unary::Abs => ja.scaled(u.abs(), sign(u), u == 0.0),
                    Unary::Sign => {
                        let mut j = Jet::constant(sign(u));
                        j.smooth = ja.smooth && u != 0.0;
                        j
                    }
                    Unary::Sqrt => {
                        let s = u.sqrt();
                        ja.scaled(s, 0.5 / s, u <= 0.0)
                    }
                    Unary::Sin => ja.scaled(u.sin(), u.cos(), false),
                    Unary::Cos => ja.scaled(u.cos(), -u.sin(), false),
                    Unary::Exp => ja.scaled(u.exp(), u.exp(), false),
                    Unary::Ln => ja.scaled(u.ln(), 1.0 / u, u <= 0.0),
                    Unary::Atan => ja.scaled(u.atan(), 1.0 / (1.0 + u * u), false),
                }
            }
            Expr::Binary(op, a, b) => {
                let (ja, jb) = (a.jet(p), b.jet(p));
                let (u, v) = (ja.value, jb.value);
                match op {
                    Binary::Add => Jet::combine(ja, jb, u + v, 1.0, 1.0, false),
                    Binary::Sub => Jet::combine(ja, jb, u - v, 1.0, -1.0, false),
                    Binary::Mul => Jet::combine(ja, jb, u * v, v, u, false),
                    Binary::Div => Jet::combine(ja, jb, u / v, 1.0 / v, -u / (v * v), v == 0.0),
                    Binary::Max => {
                        if u >= v {
                            Jet::combine(ja, jb, u, 1.0, 0.0, u == v)
                        } else {
                            Jet::combine(ja, jb, v, 0.0, 1.0, false)
                        }
                    }
                    Binary::Min => {
                        if u <= v {
                            Jet::combine(ja, jb, u, 1.0, 0.0, u == v)
                        } else {
                            Jet::combine(ja, jb, v, 0.0, 1.0, false)
                        }
                    }
                }
            }
            Expr::Pow(a, e) => {
                let ja = a.jet(p);
                let u = ja.value;
                let d = if *e == 0.0 { 0.0 } else { e * pow(u, e - 1.0) };
                ja.scaled(pow(u, *e), d, u == 0.0 && *e < 1.0 && *e != 0.0)
            }
            Expr::Indicator(r) => Jet::constant(if r.contains(p) { 1.0 } else { 0.0 }),
            Expr::Piecewise { pieces, otherwise } => {
                let mut out = None;
                for (r, e) in pieces {
                    if r.contains(p) {
                        let mut j = e.jet(p);
                        j.smooth &= !r.is_null();
                        out = Some(j);
                        break;
                    }
                }
                out.unwrap_or_else(|| otherwise.jet(p))
            }
        };
        let mut j = j;
        if !j.value.is_finite() || j.grad.iter().any(|g| !g.is_finite()) {
            j.smooth = false;
        }
        j
    }

    /// Replace each `Var(i)` by `subs[i]`.
    pub fn substitute(&self, subs: &[Expr]) -> Expr {
        match self {
            Expr::Const(_) | Expr::Indicator(_) => self.clone(),
            Expr::Var(i) => subs[*i].clone(),
            Expr::Unary(op, a) => Expr::unary(*op, a.substitute(subs)),
            Expr::Binary(op, a, b) => Expr::binary(*op, a.substitute(subs), b.substitute(subs)),
            Expr::Pow(a, e) => Expr::Pow(Box::new(a.substitute(subs)), *e),
            Expr::Piecewise { .. } => {
                // region tests are stated in the outer coordinates and cannot be pulled back
                panic!("substitute: piecewise expressions cannot be composed")
            }
        }
    }

    pub fn parse(src: &str) -> Result<Expr> {
        Parser::new(src).parse()
    }
}

fn pow(u: f64, e: f64) -> f64 {
    if e.fract() == 0.0 && e.abs() < 64.0 {
        u.powi(e as i32)
    } else {
        u.powf(e)
    }
}

impl std::ops::Add for Expr {
    type Output = Expr;
    fn add(self, rhs: Expr) -> Expr {
        Expr::binary(Binary::Add, self, rhs)
    }
}

impl std::ops::Sub for Expr {
    type Output = Expr;
    fn sub(self, rhs: Expr) -> Expr {
        Expr::binary(Binary::Sub, self, rhs)
    }
}

impl std::ops::Mul for Expr {
    type Output = Expr;
    fn mul(self, rhs: Expr) -> Expr {
        Expr::binary(Binary::Mul, self, rhs)
    }
}

impl std::ops::Div for Expr {
    type Output = Expr;
    fn div(self, rhs: Expr) -> Expr {
        Expr::binary(Binary::Div, self, rhs)
    }
}

impl std::ops::Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::unary(Unary::Neg, self)
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(c) => write!(f, "{c}"),
            Expr::Var(i) => write!(f, "x{i}"),
            Expr::Unary(Unary::Neg, a) => write!(f, "(-{a})"),
            Expr::Unary(op, a) => {
                let name = match op {
                    Unary::Neg => unreachable!(),
                    Unary::Abs => "abs",
                    Unary::Sign => "sign",
                    Unary::Sqrt => "sqrt",
                    Unary::Sin => "sin",
                    Unary::Cos => "cos",
                    Unary::Exp => "exp",
                    Unary::Ln => "ln",
                    Unary::Atan => "atan",
                };
                write!(f, "{name}({a})")
            }
            Expr::Binary(op, a, b) => match op {
                Binary::Add => write!(f, "({a} + {b})"),
                Binary::Sub => write!(f, "({a} - {b})"),
                Binary::Mul => write!(f, "({a} * {b})"),
                Binary::Div => write!(f, "({a} / {b})"),
                Binary::Max => write!(f, "max({a}, {b})"),
                Binary::Min => write!(f, "min({a}, {b})"),
            },
            Expr::Pow(a, e) => write!(f, "({a} ^ {e})"),
            Expr::Indicator(r) => write!(f, "chi[{}]", r.kind_name()),
            Expr::Piecewise { pieces, otherwise } => {
                write!(f, "piecewise(")?;
                for (r, e) in pieces {
                    write!(f, "{}: {e}; ", r.kind_name())?;
                }
                write!(f, "else: {otherwise})")
            }
        }
    }
}

/// Recursive-descent parser for the region-free part of the grammar.
///
/// ```text
/// expr  := term (('+' | '-') term)*
/// term  := unary (('*' | '/') unary)*
/// unary := '-' unary | power
/// power := atom ('^' unary)?
/// atom  := number | 'pi' | var | func '(' expr (',' expr)* ')' | '(' expr ')'
/// var   := 'x' | 'y' | 'z' | 'x' digit+
/// ```
struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl<'a> Parser<'a> {
    fn new(src: &'a str) -> Self {
        Parser {
            src: src.as_bytes(),
            pos: 0,
        }
    }

    fn err<T>(&self, msg: impl Into<String>) -> Result<T> {
        Err(Error::Parse {
            pos: self.pos,
            msg: msg.into(),
        })
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

    fn eat(&mut self, c: u8) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn parse(mut self) -> Result<Expr> {
        let e = self.expr()?;
        if self.peek().is_some() {
            return self.err("trailing input");
        }
        Ok(e)
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            if self.eat(b'+') {
                lhs = lhs + self.term()?;
            } else if self.eat(b'-') {
                lhs = lhs - self.term()?;
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        loop {
            if self.eat(b'*') {
                lhs = lhs * self.unary()?;
            } else if self.eat(b'/') {
                lhs = lhs / self.unary()?;
            } else {
                return Ok(lhs);
            }
        }
    }

    fn unary(&mut self) -> Result<Expr> {
        if self.eat(b'-') {
            return Ok(-self.unary()?);
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.atom()?;
        if self.eat(b'^') {
            let at = self.pos;
            let exp = self.unary()?;
            match const_value(&exp) {
                Some(e) => Ok(base.powf(e)),
                None => {
                    self.pos = at;
                    self.err("exponent must be a constant")
                }
            }
        } else {
            Ok(base)
        }
    }

    fn atom(&mut self) -> Result<Expr> {
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                if !self.eat(b')') {
                    return self.err("expected ')'");
                }
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() => self.ident(),
            Some(_) => self.err("unexpected character"),
            None => self.err("unexpected end of input"),
        }
    }

    fn number(&mut self) -> Result<Expr> {
        let start = self.pos;
        while self.pos < self.src.len() {
            let c = self.src[self.pos];
            let exp_sign = (c == b'+' || c == b'-')
                && self.pos > start
                && matches!(self.src[self.pos - 1], b'e' | b'E');
            if c.is_ascii_digit() || c == b'.' || c == b'e' || c == b'E' || exp_sign {
                self.pos += 1;
            } else {
                break;
            }
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).unwrap_or("");
        match text.parse::<f64>() {
            Ok(v) => Ok(Expr::Const(v)),
            Err(_) => {
                self.pos = start;
                self.err(format!("bad number '{text}'"))
            }
        }
    }

    fn ident(&mut self) -> Result<Expr> {
        let start = self.pos;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_alphanumeric() {
            self.pos += 1;
        }
        let name = std::str::from_utf8(&self.src[start..self.pos]).unwrap_or("");
        match name {
            "x" => return Ok(Expr::Var(0)),
            "y" => return Ok(Expr::Var(1)),
            "z" => return Ok(Expr::Var(2)),
            "pi" => return Ok(Expr::Const(std::f64::consts::PI)),
            _ => {}
        }
        if let Some(idx) = name.strip_prefix('x') {
            if let Ok(i) = idx.parse::<usize>() {
                if i >= MAX_DIM {
                    self.pos = start;
                    return self.err(format!("variable index {i} exceeds {MAX_DIM}"));
                }
                return Ok(Expr::Var(i));
            }
        }
        if !self.eat(b'(') {
            self.pos = start;
            return self.err(format!("unknown identifier '{name}'"));
        }
        let mut args = vec![self.expr()?];
        while self.eat(b',') {
            args.push(self.expr()?);
        }
        if !self.eat(b')') {
            return self.err("expected ')'");
        }
        let unary = |op| -> Option<Unary> { Some(op) };
        let op = match name {
            "abs" => unary(Unary::Abs),
            "sign" => unary(Unary::Sign),
            "sqrt" => unary(Unary::Sqrt),
            "sin" => unary(Unary::Sin),
            "cos" => unary(Unary::Cos),
            "exp" => unary(Unary::Exp),
            "ln" => unary(Unary::Ln),
            "atan" => unary(Unary::Atan),
            _ => None,
        };
        if let Some(op) = op {
            if args.len() != 1 {
                return self.err(format!("{name} takes one argument"));
            }
            return Ok(Expr::unary(op, args.pop().unwrap()));
        }
        let binary = match name {
            "max" => Some(Binary::Max),
            "min" => Some(Binary::Min),
            _ => None,
        };
        if let Some(op) = binary {
            if args.len() != 2 {
                return self.err(format!("{name} takes two arguments"));
            }
            let b = args.pop().unwrap();
            let a = args.pop().unwrap();
            return Ok(Expr::binary(op, a, b));
        }
        if name == "pow" && args.len() == 2 {
            if let Some(e) = const_value(&args[1]) {
                let a = args.swap_remove(0);
                return Ok(a.powf(e));
            }
            return self.err("pow exponent must be a constant");
        }
        self.pos = start;
        self.err(format!("unknown function '{name}'"))
    }
}

fn const_value(e: &Expr) -> Option<f64> {
    if e.arity() == 0 && !matches!(e, Expr::Indicator(_) | Expr::Piecewise { .. }) {
        Some(e.eval(&[]))
    } else {
        None
    }
}
