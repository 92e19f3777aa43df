//! Scalar-field expression language: parsing, printing, exact symbolic
//! differentiation, and pointwise evaluation.
//!
//! Coordinates are named `x1..xN`. Extra named symbols (e.g. `rho` in a
//! reaction term, `t` in a nonlinearity) are declared at parse time and
//! bound at evaluation time. Differentiation is closed on the AST except at
//! the isolated kinks of `abs`/`sqrt`, where evaluation of the derivative
//! raises an error instead of fabricating a subgradient.

use std::fmt;
use std::sync::Arc as Rc;
use thiserror::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Func {
    Abs,
    Sqrt,
    Exp,
    Log,
    Sin,
    Cos,
    /// Internal: produced by differentiating `abs`; errors at 0.
    Sign,
}

impl Func {
    fn name(self) -> &'static str {
        match self {
            Func::Abs => "abs",
            Func::Sqrt => "sqrt",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Sign => "sign",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Expression {
    Num(f64),
    Coord(usize),
    Param(String),
    Neg(Rc<Expression>),
    Add(Rc<Expression>, Rc<Expression>),
    Sub(Rc<Expression>, Rc<Expression>),
    Mul(Rc<Expression>, Rc<Expression>),
    Div(Rc<Expression>, Rc<Expression>),
    Pow(Rc<Expression>, Rc<Expression>),
    Call(Func, Rc<Expression>),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("domain error: {0}")]
    Domain(&'static str),
    #[error("expression not differentiable at this point (sign of 0)")]
    NonDifferentiable,
    #[error("coordinate x{} out of range for a point of dimension {dim}", index + 1)]
    CoordOutOfRange { index: usize, dim: usize },
    #[error("unbound parameter `{0}`")]
    UnboundParam(String),
}

use Expression::*;

impl Expression {
    pub fn num(v: f64) -> Expression {
        Num(v)
    }

    pub fn coord(j: usize) -> Expression {
        Coord(j)
    }

    pub fn param(name: &str) -> Expression {
        Param(name.to_string())
    }

    pub fn neg(e: Expression) -> Expression {
        match e {
            Num(v) => Num(-v),
            Neg(inner) => (*inner).clone(),
            other => Neg(Rc::new(other)),
        }
    }

    pub fn add(a: Expression, b: Expression) -> Expression {
        match (a, b) {
            (Num(x), Num(y)) => Num(x + y),
            (Num(x), b) if x == 0.0 => b,
            (a, Num(y)) if y == 0.0 => a,
            (a, b) => Add(Rc::new(a), Rc::new(b)),
        }
    }

    pub fn sub(a: Expression, b: Expression) -> Expression {
        match (a, b) {
            (Num(x), Num(y)) => Num(x - y),
            (a, Num(y)) if y == 0.0 => a,
            (Num(x), b) if x == 0.0 => Expression::neg(b),
            (a, b) => Sub(Rc::new(a), Rc::new(b)),
        }
    }

    pub fn mul(a: Expression, b: Expression) -> Expression {
        match (a, b) {
            (Num(x), Num(y)) => Num(x * y),
            (Num(x), _) | (_, Num(x)) if x == 0.0 => Num(0.0),
            (Num(x), b) if x == 1.0 => b,
            (a, Num(y)) if y == 1.0 => a,
            // Keep negative constants out of products so printing round-trips.
            (Num(x), b) if x < 0.0 => Expression::neg(Expression::mul(Num(-x), b)),
            (a, Num(y)) if y < 0.0 => Expression::neg(Expression::mul(a, Num(-y))),
            (a, b) => Mul(Rc::new(a), Rc::new(b)),
        }
    }

    pub fn div(a: Expression, b: Expression) -> Expression {
        match (a, b) {
            (a, Num(y)) if y == 1.0 => a,
            (Num(x), Num(y)) if y != 0.0 => Num(x / y),
            (Num(x), b) if x == 0.0 && !matches!(b, Num(v) if v == 0.0) => Num(0.0),
            (a, Num(y)) if y < 0.0 => Expression::neg(Expression::div(a, Num(-y))),
            (a, b) => Div(Rc::new(a), Rc::new(b)),
        }
    }

    pub fn pow(a: Expression, b: Expression) -> Expression {
        match (a, b) {
            (_, Num(y)) if y == 0.0 => Num(1.0),
            (a, Num(y)) if y == 1.0 => a,
            (Num(x), Num(y)) => {
                let v = x.powf(y);
                if v.is_finite() {
                    Num(v)
                } else {
                    Pow(Rc::new(Num(x)), Rc::new(Num(y)))
                }
            }
            (a, b) => Pow(Rc::new(a), Rc::new(b)),
        }
    }

    pub fn call(f: Func, e: Expression) -> Expression {
        if let Num(v) = e {
            let out = match f {
                Func::Abs => Some(v.abs()),
                Func::Sqrt if v >= 0.0 => Some(v.sqrt()),
                Func::Exp => Some(v.exp()),
                Func::Sin => Some(v.sin()),
                Func::Cos => Some(v.cos()),
                Func::Log if v > 0.0 => Some(v.ln()),
                Func::Sign if v != 0.0 => Some(v.signum()),
                _ => None,
            };
            if let Some(out) = out {
                if out.is_finite() {
                    return Num(out);
                }
            }
            return Call(f, Rc::new(Num(v)));
        }
        Call(f, Rc::new(e))
    }

    pub fn abs(e: Expression) -> Expression {
        Expression::call(Func::Abs, e)
    }

    pub fn sqrt(e: Expression) -> Expression {
        Expression::call(Func::Sqrt, e)
    }

    /// Sum of a list, folding to 0 for an empty list.
    pub fn sum<I: IntoIterator<Item = Expression>>(items: I) -> Expression {
        items
            .into_iter()
            .fold(Num(0.0), |acc, e| Expression::add(acc, e))
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Num(v) if *v == 0.0)
    }

    /// Evaluate with coordinates `x` and named parameter bindings.
    pub fn eval_with(&self, x: &[f64], params: &[(&str, f64)]) -> Result<f64, EvalError> {
        match self {
            Num(v) => Ok(*v),
            Coord(j) => {
                if *j < x.len() {
                    Ok(x[*j])
                } else {
                    Err(EvalError::CoordOutOfRange {
                        index: *j,
                        dim: x.len(),
                    })
                }
            }
            Param(name) => params
                .iter()
                .find(|(n, _)| n == name)
                .map(|(_, v)| *v)
                .ok_or_else(|| EvalError::UnboundParam(name.clone())),
            Neg(e) => Ok(-e.eval_with(x, params)?),
            Add(a, b) => Ok(a.eval_with(x, params)? + b.eval_with(x, params)?),
            Sub(a, b) => Ok(a.eval_with(x, params)? - b.eval_with(x, params)?),
            Mul(a, b) => Ok(a.eval_with(x, params)? * b.eval_with(x, params)?),
            Div(a, b) => {
                let den = b.eval_with(x, params)?;
                if den == 0.0 {
                    return Err(EvalError::Domain("division by zero"));
                }
                Ok(a.eval_with(x, params)? / den)
            }
            Pow(a, b) => {
                let base = a.eval_with(x, params)?;
                let exp = b.eval_with(x, params)?;
                eval_pow(base, exp)
            }
            Call(f, e) => {
                let t = e.eval_with(x, params)?;
                match f {
                    Func::Abs => Ok(t.abs()),
                    Func::Sqrt => {
                        if t < 0.0 {
                            Err(EvalError::Domain("sqrt of negative value"))
                        } else {
                            Ok(t.sqrt())
                        }
                    }
                    Func::Exp => Ok(t.exp()),
                    Func::Log => {
                        if t <= 0.0 {
                            Err(EvalError::Domain("log of nonpositive value"))
                        } else {
                            Ok(t.ln())
                        }
                    }
                    Func::Sin => Ok(t.sin()),
                    Func::Cos => Ok(t.cos()),
                    Func::Sign => {
                        if t == 0.0 {
                            Err(EvalError::NonDifferentiable)
                        } else {
                            Ok(t.signum())
                        }
                    }
                }
            }
        }
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64, EvalError> {
        self.eval_with(x, &[])
    }

    /// Exact symbolic partial derivative with respect to coordinate `var`.
    pub fn diff(&self, var: usize) -> Expression {
        match self {
            Num(_) | Param(_) => Num(0.0),
            Coord(j) => Num(if *j == var { 1.0 } else { 0.0 }),
            Neg(e) => Expression::neg(e.diff(var)),
            Add(a, b) => Expression::add(a.diff(var), b.diff(var)),
            Sub(a, b) => Expression::sub(a.diff(var), b.diff(var)),
            Mul(a, b) => Expression::add(
                Expression::mul(a.diff(var), (**b).clone()),
                Expression::mul((**a).clone(), b.diff(var)),
            ),
            Div(a, b) => Expression::div(
                Expression::sub(
                    Expression::mul(a.diff(var), (**b).clone()),
                    Expression::mul((**a).clone(), b.diff(var)),
                ),
                Expression::mul((**b).clone(), (**b).clone()),
            ),
            Pow(a, b) => {
                if let Num(c) = **b {
                    // power rule for a constant exponent
                    Expression::mul(
                        Expression::mul(Num(c), Expression::pow((**a).clone(), Num(c - 1.0))),
                        a.diff(var),
                    )
                } else {
                    // a^b * (b' log a + b a'/a)
                    Expression::mul(
                        Expression::pow((**a).clone(), (**b).clone()),
                        Expression::add(
                            Expression::mul(
                                b.diff(var),
                                Expression::call(Func::Log, (**a).clone()),
                            ),
                            Expression::mul(
                                (**b).clone(),
                                Expression::div(a.diff(var), (**a).clone()),
                            ),
                        ),
                    )
                }
            }
            Call(f, e) => {
                let de = e.diff(var);
                if de.is_zero() {
                    return Num(0.0);
                }
                let inner = (**e).clone();
                match f {
                    Func::Abs => Expression::mul(Expression::call(Func::Sign, inner), de),
                    Func::Sqrt => Expression::div(
                        de,
                        Expression::mul(Num(2.0), Expression::call(Func::Sqrt, inner)),
                    ),
                    Func::Exp => Expression::mul(Expression::call(Func::Exp, inner), de),
                    Func::Log => Expression::div(de, inner),
                    Func::Sin => Expression::mul(Expression::call(Func::Cos, inner), de),
                    Func::Cos => {
                        Expression::neg(Expression::mul(Expression::call(Func::Sin, inner), de))
                    }
                    // a.e. derivative away from the kink
                    Func::Sign => Num(0.0),
                }
            }
        }
    }

    /// Replace coordinate j by `subs[j]` everywhere (composition with a map).
    pub fn substitute_coords(&self, subs: &[Expression]) -> Expression {
        match self {
            Num(v) => Num(*v),
            Param(p) => Param(p.clone()),
            Coord(j) => subs
                .get(*j)
                .cloned()
                .unwrap_or_else(|| Coord(*j)),
            Neg(e) => Expression::neg(e.substitute_coords(subs)),
            Add(a, b) => Expression::add(a.substitute_coords(subs), b.substitute_coords(subs)),
            Sub(a, b) => Expression::sub(a.substitute_coords(subs), b.substitute_coords(subs)),
            Mul(a, b) => Expression::mul(a.substitute_coords(subs), b.substitute_coords(subs)),
            Div(a, b) => Expression::div(a.substitute_coords(subs), b.substitute_coords(subs)),
            Pow(a, b) => Expression::pow(a.substitute_coords(subs), b.substitute_coords(subs)),
            Call(f, e) => Expression::call(*f, e.substitute_coords(subs)),
        }
    }

    /// Replace the named parameter by an expression.
    pub fn substitute_param(&self, name: &str, rep: &Expression) -> Expression {
        match self {
            Num(v) => Num(*v),
            Coord(j) => Coord(*j),
            Param(p) => {
                if p == name {
                    rep.clone()
                } else {
                    Param(p.clone())
                }
            }
            Neg(e) => Expression::neg(e.substitute_param(name, rep)),
            Add(a, b) => Expression::add(
                a.substitute_param(name, rep),
                b.substitute_param(name, rep),
            ),
            Sub(a, b) => Expression::sub(
                a.substitute_param(name, rep),
                b.substitute_param(name, rep),
            ),
            Mul(a, b) => Expression::mul(
                a.substitute_param(name, rep),
                b.substitute_param(name, rep),
            ),
            Div(a, b) => Expression::div(
                a.substitute_param(name, rep),
                b.substitute_param(name, rep),
            ),
            Pow(a, b) => Expression::pow(
                a.substitute_param(name, rep),
                b.substitute_param(name, rep),
            ),
            Call(f, e) => Expression::call(*f, e.substitute_param(name, rep)),
        }
    }

    /// Largest coordinate index referenced, if any.
    pub fn max_coord(&self) -> Option<usize> {
        match self {
            Num(_) | Param(_) => None,
            Coord(j) => Some(*j),
            Neg(e) | Call(_, e) => e.max_coord(),
            Add(a, b) | Sub(a, b) | Mul(a, b) | Div(a, b) | Pow(a, b) => {
                match (a.max_coord(), b.max_coord()) {
                    (Some(x), Some(y)) => Some(x.max(y)),
                    (Some(x), None) | (None, Some(x)) => Some(x),
                    (None, None) => None,
                }
            }
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            Num(v) if *v < 0.0 => 1,
            Add(..) | Sub(..) | Neg(..) => 1,
            Mul(..) | Div(..) => 2,
            Pow(..) => 3,
            _ => 4,
        }
    }

    fn fmt_prec(&self, f: &mut fmt::Formatter<'_>, parent: u8) -> fmt::Result {
        let me = self.precedence();
        let parens = me < parent;
        if parens {
            write!(f, "(")?;
        }
        match self {
            Num(v) => write!(f, "{}", v)?,
            Coord(j) => write!(f, "x{}", j + 1)?,
            Param(p) => write!(f, "{}", p)?,
            Neg(e) => {
                write!(f, "-")?;
                e.fmt_prec(f, 2)?;
            }
            Add(a, b) => {
                a.fmt_prec(f, 1)?;
                write!(f, " + ")?;
                b.fmt_prec(f, 2)?;
            }
            Sub(a, b) => {
                a.fmt_prec(f, 1)?;
                write!(f, " - ")?;
                b.fmt_prec(f, 2)?;
            }
            Mul(a, b) => {
                a.fmt_prec(f, 2)?;
                write!(f, "*")?;
                b.fmt_prec(f, 3)?;
            }
            Div(a, b) => {
                a.fmt_prec(f, 2)?;
                write!(f, "/")?;
                b.fmt_prec(f, 3)?;
            }
            Pow(a, b) => {
                a.fmt_prec(f, 4)?;
                write!(f, "^")?;
                b.fmt_prec(f, 3)?;
            }
            Call(func, e) => {
                write!(f, "{}(", func.name())?;
                e.fmt_prec(f, 0)?;
                write!(f, ")")?;
            }
        }
        if parens {
            write!(f, ")")?;
        }
        Ok(())
    }
}

fn eval_pow(base: f64, exp: f64) -> Result<f64, EvalError> {
    if base > 0.0 {
        return Ok(base.powf(exp));
    }
    if base == 0.0 {
        if exp > 0.0 {
            return Ok(0.0);
        }
        if exp == 0.0 {
            return Ok(1.0);
        }
        return Err(EvalError::Domain("zero raised to a negative power"));
    }
    // negative base: only integer exponents are defined
    if exp.fract() == 0.0 && exp.abs() < 2_147_483_647.0 {
        Ok(base.powi(exp as i32))
    } else {
        Err(EvalError::Domain(
            "negative base raised to a non-integer power",
        ))
    }
}

impl fmt::Display for Expression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.fmt_prec(f, 0)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParseError {
    #[error("parse error at byte {offset}: expected one of {expected:?}, found `{found}`")]
    Syntax {
        offset: usize,
        expected: Vec<&'static str>,
        found: String,
    },
    #[error("unknown coordinate or symbol `{name}` at byte {offset}")]
    UnknownCoordinate { name: String, offset: usize },
}

#[derive(Clone, Debug, PartialEq)]
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
    End,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Num(v) => format!("{}", v),
            Tok::Ident(s) => s.clone(),
            Tok::Plus => "+".into(),
            Tok::Minus => "-".into(),
            Tok::Star => "*".into(),
            Tok::Slash => "/".into(),
            Tok::Caret => "^".into(),
            Tok::LParen => "(".into(),
            Tok::RParen => ")".into(),
            Tok::Comma => ",".into(),
            Tok::End => "end of input".into(),
        }
    }
}

struct Lexer<'a> {
    src: &'a [u8],
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str) -> Self {
        Lexer {
            src: src.as_bytes(),
            pos: 0,
        }
    }

    fn next_tok(&mut self) -> Result<(Tok, usize), ParseError> {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        let start = self.pos;
        if self.pos >= self.src.len() {
            return Ok((Tok::End, start));
        }
        let c = self.src[self.pos];
        let single = match c {
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
        if let Some(t) = single {
            self.pos += 1;
            return Ok((t, start));
        }
        if c.is_ascii_digit() {
            let mut end = self.pos;
            while end < self.src.len() && self.src[end].is_ascii_digit() {
                end += 1;
            }
            if end < self.src.len() && self.src[end] == b'.' {
                end += 1;
                while end < self.src.len() && self.src[end].is_ascii_digit() {
                    end += 1;
                }
            }
            if end < self.src.len() && (self.src[end] == b'e' || self.src[end] == b'E') {
                let mut e = end + 1;
                if e < self.src.len() && (self.src[e] == b'+' || self.src[e] == b'-') {
                    e += 1;
                }
                if e < self.src.len() && self.src[e].is_ascii_digit() {
                    while e < self.src.len() && self.src[e].is_ascii_digit() {
                        e += 1;
                    }
                    end = e;
                }
            }
            let text = std::str::from_utf8(&self.src[self.pos..end]).unwrap();
            let v: f64 = text.parse().map_err(|_| ParseError::Syntax {
                offset: start,
                expected: vec!["number"],
                found: text.to_string(),
            })?;
            self.pos = end;
            return Ok((Tok::Num(v), start));
        }
        if c.is_ascii_alphabetic() || c == b'_' {
            let mut end = self.pos;
            while end < self.src.len()
                && (self.src[end].is_ascii_alphanumeric() || self.src[end] == b'_')
            {
                end += 1;
            }
            let text = std::str::from_utf8(&self.src[self.pos..end]).unwrap();
            self.pos = end;
            return Ok((Tok::Ident(text.to_string()), start));
        }
        Err(ParseError::Syntax {
            offset: start,
            expected: vec!["number", "identifier", "operator", "("],
            found: (c as char).to_string(),
        })
    }
}

struct Parser<'a> {
    toks: Vec<(Tok, usize)>,
    idx: usize,
    params: &'a [&'a str],
}

impl<'a> Parser<'a> {
    fn peek(&self) -> &(Tok, usize) {
        &self.toks[self.idx]
    }

    fn bump(&mut self) -> (Tok, usize) {
        let t = self.toks[self.idx].clone();
        if self.idx + 1 < self.toks.len() {
            self.idx += 1;
        }
        t
    }

    fn err(&self, expected: Vec<&'static str>) -> ParseError {
        let (tok, off) = self.peek();
        ParseError::Syntax {
            offset: *off,
            expected,
            found: tok.describe(),
        }
    }

    fn expr(&mut self) -> Result<Expression, ParseError> {
        let mut lhs = self.signed_term()?;
        loop {
            match self.peek().0 {
                Tok::Plus => {
                    self.bump();
                    let rhs = self.signed_term()?;
                    lhs = Expression::add(lhs, rhs);
                }
                Tok::Minus => {
                    self.bump();
                    let rhs = self.signed_term()?;
                    lhs = Expression::sub(lhs, rhs);
                }
                _ => return Ok(lhs),
            }
        }
    }

    // unary minus binds the whole term: "-x2/2" is Neg(x2/2)
    fn signed_term(&mut self) -> Result<Expression, ParseError> {
        if self.peek().0 == Tok::Minus {
            self.bump();
            let t = self.signed_term()?;
            return Ok(Expression::neg(t));
        }
        self.term()
    }

    fn term(&mut self) -> Result<Expression, ParseError> {
        let mut lhs = self.factor()?;
        loop {
            match self.peek().0 {
                Tok::Star => {
                    self.bump();
                    let rhs = self.factor()?;
                    lhs = Expression::mul(lhs, rhs);
                }
                Tok::Slash => {
                    self.bump();
                    let rhs = self.factor()?;
                    lhs = Expression::div(lhs, rhs);
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn factor(&mut self) -> Result<Expression, ParseError> {
        let base = self.base()?;
        if self.peek().0 == Tok::Caret {
            self.bump();
            let exp = self.exponent()?;
            return Ok(Expression::pow(base, exp));
        }
        Ok(base)
    }

    // right-associative, with an optional leading minus for convenience
    fn exponent(&mut self) -> Result<Expression, ParseError> {
        if self.peek().0 == Tok::Minus {
            self.bump();
            let e = self.factor()?;
            return Ok(Expression::neg(e));
        }
        self.factor()
    }

    fn base(&mut self) -> Result<Expression, ParseError> {
        match self.peek().0.clone() {
            Tok::Num(v) => {
                self.bump();
                Ok(Expression::num(v))
            }
            Tok::LParen => {
                self.bump();
                let inner = self.expr()?;
                if self.peek().0 != Tok::RParen {
                    return Err(self.err(vec![")"]));
                }
                self.bump();
                Ok(inner)
            }
            Tok::Ident(name) => {
                let (_, off) = self.bump();
                if self.peek().0 == Tok::LParen {
                    self.bump();
                    let first = self.expr()?;
                    let second = if self.peek().0 == Tok::Comma {
                        self.bump();
                        Some(self.expr()?)
                    } else {
                        None
                    };
                    if self.peek().0 != Tok::RParen {
                        return Err(self.err(vec![")", ","]));
                    }
                    self.bump();
                    return self.apply_func(&name, first, second, off);
                }
                self.symbol(&name, off)
            }
            _ => Err(self.err(vec!["number", "coordinate", "function", "("])),
        }
    }

    fn apply_func(
        &self,
        name: &str,
        first: Expression,
        second: Option<Expression>,
        off: usize,
    ) -> Result<Expression, ParseError> {
        let unary = |f: Func| -> Result<Expression, ParseError> {
            if second.is_some() {
                return Err(ParseError::Syntax {
                    offset: off,
                    expected: vec!["one argument"],
                    found: format!("{}(..., ...)", name),
                });
            }
            Ok(Expression::call(f, first.clone()))
        };
        match name {
            "abs" => unary(Func::Abs),
            "sqrt" => unary(Func::Sqrt),
            "exp" => unary(Func::Exp),
            "log" => unary(Func::Log),
            "sin" => unary(Func::Sin),
            "cos" => unary(Func::Cos),
            "sign" => unary(Func::Sign),
            "pow" => match second {
                Some(e) => Ok(Expression::pow(first, e)),
                None => Err(ParseError::Syntax {
                    offset: off,
                    expected: vec!["two arguments"],
                    found: format!("pow({})", first),
                }),
            },
            _ => Err(ParseError::UnknownCoordinate {
                name: name.to_string(),
                offset: off,
            }),
        }
    }

    fn symbol(&self, name: &str, off: usize) -> Result<Expression, ParseError> {
        if self.params.contains(&name) {
            return Ok(Expression::param(name));
        }
        if let Some(rest) = name.strip_prefix('x') {
            if !rest.is_empty() && rest.bytes().all(|b| b.is_ascii_digit()) {
                let idx: usize = rest.parse().map_err(|_| ParseError::UnknownCoordinate {
                    name: name.to_string(),
                    offset: off,
                })?;
                if idx >= 1 {
                    return Ok(Expression::coord(idx - 1));
                }
            }
        }
        Err(ParseError::UnknownCoordinate {
            name: name.to_string(),
            offset: off,
        })
    }
}

/// Parse an expression over coordinates `x1..xN` only.
pub fn parse_expression(text: &str) -> Result<Expression, ParseError> {
    parse_with_params(text, &[])
}

/// Parse with extra named symbols (e.g. `rho`) allowed as parameters.
pub fn parse_with_params(text: &str, params: &[&str]) -> Result<Expression, ParseError> {
    let mut lexer = Lexer::new(text);
    let mut toks = Vec::new();
    loop {
        let (t, off) = lexer.next_tok()?;
        let end = t == Tok::End;
        toks.push((t, off));
        if end {
            break;
        }
    }
    let mut p = Parser {
        toks,
        idx: 0,
        params,
    };
    let e = p.expr()?;
    if p.peek().0 != Tok::End {
        return Err(p.err(vec!["+", "-", "*", "/", "^", "end of input"]));
    }
    Ok(e)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grammar_examples() {
        let e = parse_expression("x1^2 + x2*x3").unwrap();
        assert_eq!(
            e,
            Expression::add(
                Expression::pow(Expression::coord(0), Expression::num(2.0)),
                Expression::mul(Expression::coord(1), Expression::coord(2)),
            )
        );

        let err = parse_expression("x1 +").unwrap_err();
        match err {
            ParseError::Syntax { offset, .. } => assert_eq!(offset, 4),
            other => panic!("unexpected error {other:?}"),
        }

        let e = parse_expression("-x2/2").unwrap();
        assert_eq!(
            e,
            Expression::neg(Expression::div(Expression::coord(1), Expression::num(2.0)))
        );
    }

    #[test]
    fn unknown_symbols_are_rejected() {
        assert!(matches!(
            parse_expression("x0 + 1"),
            Err(ParseError::UnknownCoordinate { .. })
        ));
        assert!(matches!(
            parse_expression("y1"),
            Err(ParseError::UnknownCoordinate { .. })
        ));
        assert!(matches!(
            parse_expression("rho"),
            Err(ParseError::UnknownCoordinate { .. })
        ));
        assert!(parse_with_params("rho^2 + x1", &["rho"]).is_ok());
    }

    #[test]
    fn pow_is_right_associative() {
        let e = parse_expression("x1^2^3").unwrap();
        assert_eq!(
            e,
            Expression::pow(
                Expression::coord(0),
                Expression::pow(Expression::num(2.0), Expression::num(3.0))
            )
        );
    }

    #[test]
    fn derivative_rules() {
        let e = parse_expression("x1^2 + x2*x3").unwrap();
        let d = e.diff(0);
        assert_eq!(d.eval(&[3.0, 0.0, 0.0]).unwrap(), 6.0);
        let d2 = e.diff(1);
        assert_eq!(d2.eval(&[0.0, 0.0, 5.0]).unwrap(), 5.0);

        // chain rule through sqrt
        let e = parse_expression("sqrt(x1^2 + 1)").unwrap();
        let d = e.diff(0);
        let v = d.eval(&[2.0]).unwrap();
        assert!((v - 2.0 / 5.0f64.sqrt()).abs() < 1e-15);

        // constant derivative is exactly zero
        let c = parse_expression("3.5").unwrap();
        assert!(c.diff(0).is_zero());
    }

    #[test]
    fn abs_derivative_errors_at_kink() {
        let e = parse_expression("abs(x1)").unwrap();
        let d = e.diff(0);
        assert_eq!(d.eval(&[2.0]).unwrap(), 1.0);
        assert_eq!(d.eval(&[-2.0]).unwrap(), -1.0);
        assert_eq!(d.eval(&[0.0]), Err(EvalError::NonDifferentiable));
    }

    #[test]
    fn domain_errors() {
        let e = parse_expression("log(x1)").unwrap();
        assert!(e.eval(&[-1.0]).is_err());
        let e = parse_expression("1/x1").unwrap();
        assert!(e.eval(&[0.0]).is_err());
        let e = parse_expression("pow(x1, 0.5)").unwrap();
        assert!(e.eval(&[-1.0]).is_err());
        assert_eq!(e.eval(&[4.0]).unwrap(), 2.0);
    }

    #[test]
    fn p2_power_folds_away() {
        // exponent zero folds to 1, so degenerate bases never evaluate
        let g2 = parse_expression("x1^2 + x2^2").unwrap();
        let folded = Expression::pow(g2, Expression::num(0.0));
        assert_eq!(folded, Expression::num(1.0));
    }

    #[test]
    fn print_parse_roundtrip_on_samples() {
        for s in [
            "x1^2 + x2*x3",
            "-x2/2",
            "x1 - (x2 - x3)",
            "(x1 + x2)*(x1 - x2)",
            "sqrt(x1^2 + x2^2)",
            "pow(x1^2 + 1, 0.25)",
            "x1^2^3",
            "1/(1 + x1)",
            "-(x1 + x2)^2",
            "abs(x1)*sign(x2)",
            "2.5*x1 + 0.125",
        ] {
            let a = parse_expression(s).unwrap();
            let printed = format!("{}", a);
            let b = parse_expression(&printed)
                .unwrap_or_else(|e| panic!("reparse of `{printed}` failed: {e}"));
            assert_eq!(a, b, "`{s}` -> `{printed}`");
        }
    }
}
