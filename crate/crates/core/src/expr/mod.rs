//! Scalar coordinate expressions.
//!
//! An [`Expr`] is an immutable tree over the coordinates of a [`Chart`].
//! Nodes are reference counted, so cloning is cheap and trees can be shared
//! and evaluated from several threads at once.

mod derivative;
mod parser;

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

pub use parser::parse;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExprError {
    #[error("syntax error at offset {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unknown identifier `{name}` at offset {offset}")]
    UnknownIdentifier { name: String, offset: usize },
    #[error("unknown function `{name}` at offset {offset}")]
    UnknownFunction { name: String, offset: usize },
    #[error("exponent at offset {offset} is not a constant")]
    NonConstantExponent { offset: usize },
    #[error("domain error in `{expr}`: {message}")]
    Domain { expr: String, message: String },
    #[error("point has {got} coordinates, expected {expected}")]
    Dimension { expected: usize, got: usize },
    #[error("invalid chart: {0}")]
    Chart(String),
}

/// Coordinate chart: ordered coordinate names and an open box domain.
#[derive(Debug, Clone, PartialEq)]
pub struct Chart {
    names: Vec<String>,
    domain: Vec<(f64, f64)>,
}

impl Chart {
    /// Chart with an unbounded domain.
    pub fn new<S: AsRef<str>>(names: &[S]) -> Result<Self, ExprError> {
        let domain = vec![(f64::NEG_INFINITY, f64::INFINITY); names.len()];
        Self::with_domain(names, domain)
    }

    pub fn with_domain<S: AsRef<str>>(
        names: &[S],
        domain: Vec<(f64, f64)>,
    ) -> Result<Self, ExprError> {
        if names.is_empty() {
            return Err(ExprError::Chart("a chart needs at least one coordinate".into()));
        }
        if domain.len() != names.len() {
            return Err(ExprError::Chart(format!(
                "domain has {} intervals for {} coordinates",
                domain.len(),
                names.len()
            )));
        }
        let names: Vec<String> = names.iter().map(|s| s.as_ref().to_string()).collect();
        for (i, name) in names.iter().enumerate() {
            if !is_identifier(name) {
                return Err(ExprError::Chart(format!("`{name}` is not an identifier")));
            }
            if parser::FUNCTIONS.contains(&name.as_str()) {
                return Err(ExprError::Chart(format!("`{name}` is a reserved function name")));
            }
            if names[..i].contains(name) {
                return Err(ExprError::Chart(format!("duplicate coordinate `{name}`")));
            }
        }
        for (name, &(lo, hi)) in names.iter().zip(&domain) {
            if lo.is_nan() || hi.is_nan() || lo >= hi {
                return Err(ExprError::Chart(format!("empty domain interval for `{name}`")));
            }
        }
        Ok(Self { names, domain })
    }

    pub fn dim(&self) -> usize {
        self.names.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn domain(&self) -> &[(f64, f64)] {
        &self.domain
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// Variable node for coordinate `index`.
    pub fn coordinate(&self, index: usize) -> Expr {
        Expr::var(index, &self.names[index])
    }

    pub fn parse(&self, src: &str) -> Result<Expr, ExprError> {
        parse(src, self)
    }

    /// True when `point` lies strictly inside the domain box.
    pub fn contains(&self, point: &[f64]) -> bool {
        point.len() == self.dim()
            && point
                .iter()
                .zip(&self.domain)
                .all(|(&x, &(lo, hi))| x.is_finite() && x > lo && x < hi)
    }

    pub fn check_point(&self, point: &[f64]) -> Result<(), ExprError> {
        if point.len() != self.dim() {
            return Err(ExprError::Dimension { expected: self.dim(), got: point.len() });
        }
        if !self.contains(point) {
            return Err(ExprError::Domain {
                expr: format!("{point:?}"),
                message: "point outside the chart domain".into(),
            });
        }
        Ok(())
    }
}

fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnaryOp {
    Neg,
    Sin,
    Cos,
    Tan,
    Exp,
    Log,
    Sqrt,
}

impl UnaryOp {
    fn name(self) -> &'static str {
        match self {
            UnaryOp::Neg => "-",
            UnaryOp::Sin => "sin",
            UnaryOp::Cos => "cos",
            UnaryOp::Tan => "tan",
            UnaryOp::Exp => "exp",
            UnaryOp::Log => "log",
            UnaryOp::Sqrt => "sqrt",
        }
    }

    pub(crate) fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "sin" => UnaryOp::Sin,
            "cos" => UnaryOp::Cos,
            "tan" => UnaryOp::Tan,
            "exp" => UnaryOp::Exp,
            "log" => UnaryOp::Log,
            "sqrt" => UnaryOp::Sqrt,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
}

#[derive(Debug, PartialEq)]
pub enum Node {
    Const(f64),
    Var { index: usize, name: Arc<str> },
    Unary(UnaryOp, Expr),
    Binary(BinaryOp, Expr, Expr),
    /// Power with a constant exponent.
    Pow(Expr, f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Expr(Arc<Node>);

impl Expr {
    pub fn node(&self) -> &Node {
        &self.0
    }

    pub fn constant(value: f64) -> Self {
        Expr(Arc::new(Node::Const(value)))
    }

    pub fn zero() -> Self {
        Self::constant(0.0)
    }

    pub fn one() -> Self {
        Self::constant(1.0)
    }

    pub fn var(index: usize, name: &str) -> Self {
        Expr(Arc::new(Node::Var { index, name: Arc::from(name) }))
    }

    pub fn as_const(&self) -> Option<f64> {
        match *self.0 {
            Node::Const(c) => Some(c),
            _ => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.as_const() == Some(0.0)
    }

    fn is_one(&self) -> bool {
        self.as_const() == Some(1.0)
    }

    pub fn unary(op: UnaryOp, arg: Expr) -> Self {
        if let Some(c) = arg.as_const() {
            if let Ok(v) = apply_unary(op, c) {
                return Self::constant(v);
            }
        }
        if op == UnaryOp::Neg {
            if let Node::Unary(UnaryOp::Neg, inner) = arg.node() {
                return inner.clone();
            }
        }
        Expr(Arc::new(Node::Unary(op, arg)))
    }

    pub fn binary(op: BinaryOp, lhs: Expr, rhs: Expr) -> Self {
        if let (Some(a), Some(b)) = (lhs.as_const(), rhs.as_const()) {
            if let Ok(v) = apply_binary(op, a, b) {
                return Self::constant(v);
            }
        }
        match op {
            BinaryOp::Add => {
                if lhs.is_zero() {
                    return rhs;
                }
                if rhs.is_zero() {
                    return lhs;
                }
            }
            BinaryOp::Sub => {
                if rhs.is_zero() {
                    return lhs;
                }
                if lhs.is_zero() {
                    return Self::unary(UnaryOp::Neg, rhs);
                }
            }
            BinaryOp::Mul => {
                if lhs.is_zero() || rhs.is_zero() {
                    return Self::zero();
                }
                if lhs.is_one() {
                    return rhs;
                }
                if rhs.is_one() {
                    return lhs;
                }
            }
            BinaryOp::Div => {
                if rhs.is_one() {
                    return lhs;
                }
                if lhs.is_zero() && !rhs.is_zero() {
                    return Self::zero();
                }
            }
        }
        Expr(Arc::new(Node::Binary(op, lhs, rhs)))
    }

    pub fn pow(base: Expr, exponent: f64) -> Self {
        if exponent == 0.0 {
            return Self::one();
        }
        if exponent == 1.0 {
            return base;
        }
        if let Some(c) = base.as_const() {
            if let Ok(v) = apply_pow(c, exponent) {
                return Self::constant(v);
            }
        }
        Expr(Arc::new(Node::Pow(base, exponent)))
    }

    pub fn sin(self) -> Self {
        Self::unary(UnaryOp::Sin, self)
    }

    pub fn cos(self) -> Self {
        Self::unary(UnaryOp::Cos, self)
    }

    pub fn powf(self, exponent: f64) -> Self {
        Self::pow(self, exponent)
    }

    /// Evaluates at `point`; variable indices must be in range.
    pub fn eval(&self, point: &[f64]) -> Result<f64, ExprError> {
        match self.node() {
            Node::Const(c) => Ok(*c),
            Node::Var { index, .. } => point.get(*index).copied().ok_or(ExprError::Dimension {
                expected: index + 1,
                got: point.len(),
            }),
            Node::Unary(op, arg) => {
                let a = arg.eval(point)?;
                apply_unary(*op, a).map_err(|message| self.domain_error(message))
            }
            Node::Binary(op, lhs, rhs) => {
                let a = lhs.eval(point)?;
                let b = rhs.eval(point)?;
                apply_binary(*op, a, b).map_err(|message| self.domain_error(message))
            }
            Node::Pow(base, exponent) => {
                let a = base.eval(point)?;
                apply_pow(a, *exponent).map_err(|message| self.domain_error(message))
            }
        }
    }

    fn domain_error(&self, message: &str) -> ExprError {
        ExprError::Domain { expr: self.to_string(), message: message.to_string() }
    }

    /// Exact partial derivative with respect to coordinate `index`.
    pub fn derivative(&self, index: usize) -> Expr {
        derivative::derivative(self, index)
    }

    /// Partial derivative by coordinate name.
    pub fn differentiate(&self, var: &str, chart: &Chart) -> Result<Expr, ExprError> {
        let index = chart
            .index_of(var)
            .ok_or_else(|| ExprError::UnknownIdentifier { name: var.to_string(), offset: 0 })?;
        Ok(self.derivative(index))
    }

    /// Largest variable index + 1 referenced by the tree (0 for constants).
    pub fn arity(&self) -> usize {
        match self.node() {
            Node::Const(_) => 0,
            Node::Var { index, .. } => index + 1,
            Node::Unary(_, a) | Node::Pow(a, _) => a.arity(),
            Node::Binary(_, a, b) => a.arity().max(b.arity()),
        }
    }

    fn precedence(&self) -> u8 {
        match self.node() {
            Node::Const(_) | Node::Var { .. } => 5,
            Node::Unary(UnaryOp::Neg, _) => 3,
            Node::Unary(..) => 5,
            Node::Binary(BinaryOp::Add | BinaryOp::Sub, ..) => 1,
            Node::Binary(BinaryOp::Mul | BinaryOp::Div, ..) => 2,
            Node::Pow(..) => 4,
        }
    }
}

fn apply_unary(op: UnaryOp, a: f64) -> Result<f64, &'static str> {
    Ok(match op {
        UnaryOp::Neg => -a,
        UnaryOp::Sin => a.sin(),
        UnaryOp::Cos => a.cos(),
        UnaryOp::Tan => {
            let c = a.cos();
            if c == 0.0 {
                return Err("tan at a pole");
            }
            a.tan()
        }
        UnaryOp::Exp => a.exp(),
        UnaryOp::Log => {
            if !(a > 0.0) {
                return Err("log of a non-positive value");
            }
            a.ln()
        }
        UnaryOp::Sqrt => {
            if !(a >= 0.0) {
                return Err("sqrt of a negative value");
            }
            a.sqrt()
        }
    })
}

fn apply_binary(op: BinaryOp, a: f64, b: f64) -> Result<f64, &'static str> {
    Ok(match op {
        BinaryOp::Add => a + b,
        BinaryOp::Sub => a - b,
        BinaryOp::Mul => a * b,
        BinaryOp::Div => {
            if b == 0.0 {
                return Err("division by zero");
            }
            a / b
        }
    })
}

pub(crate) fn integer_exponent(exponent: f64) -> Option<i32> {
    if exponent.fract() == 0.0 && exponent.abs() <= i32::MAX as f64 {
        Some(exponent as i32)
    } else {
        None
    }
}

fn apply_pow(a: f64, exponent: f64) -> Result<f64, &'static str> {
    match integer_exponent(exponent) {
        Some(n) => {
            if n < 0 && a == 0.0 {
                return Err("negative power of zero");
            }
            Ok(a.powi(n))
        }
        None => {
            if !(a > 0.0) {
                return Err("non-integer power of a non-positive base");
            }
            Ok(a.powf(exponent))
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn wrap(f: &mut fmt::Formatter<'_>, e: &Expr, min: u8) -> fmt::Result {
            if e.precedence() < min {
                write!(f, "({e})")
            } else {
                write!(f, "{e}")
            }
        }
        match self.node() {
            Node::Const(c) => write_number(f, *c),
            Node::Var { name, .. } => write!(f, "{name}"),
            Node::Unary(UnaryOp::Neg, a) => {
                write!(f, "-")?;
                wrap(f, a, 4)
            }
            Node::Unary(op, a) => write!(f, "{}({a})", op.name()),
            Node::Binary(op, a, b) => {
                let (sym, prec) = match op {
                    BinaryOp::Add => ("+", 1),
                    BinaryOp::Sub => ("-", 1),
                    BinaryOp::Mul => ("*", 2),
                    BinaryOp::Div => ("/", 2),
                };
                wrap(f, a, prec)?;
                write!(f, "{sym}")?;
                // right operand of a non-commutative operator binds tighter
                let right_min = match op {
                    BinaryOp::Add | BinaryOp::Mul => prec,
                    BinaryOp::Sub | BinaryOp::Div => prec + 1,
                };
                wrap(f, b, right_min)
            }
            Node::Pow(a, p) => {
                wrap(f, a, 5)?;
                write!(f, "^")?;
                write_number(f, *p)
            }
        }
    }
}

fn write_number(f: &mut fmt::Formatter<'_>, c: f64) -> fmt::Result {
    if c.is_finite() {
        // `{:?}` round-trips and uses scientific notation for extreme magnitudes
        let s = format!("{:?}", c.abs());
        let s = s.strip_suffix(".0").unwrap_or(&s);
        if c.is_sign_negative() && c != 0.0 {
            write!(f, "(-{s})")
        } else {
            write!(f, "{s}")
        }
    } else {
        // not representable in the grammar; printed as a division
        if c.is_nan() {
            write!(f, "(0/0)")
        } else if c > 0.0 {
            write!(f, "(1/0)")
        } else {
            write!(f, "(-1/0)")
        }
    }
}

macro_rules! binary_impl {
    ($tr:ident, $method:ident, $op:expr) => {
        impl std::ops::$tr for Expr {
            type Output = Expr;
            fn $method(self, rhs: Expr) -> Expr {
                Expr::binary($op, self, rhs)
            }
        }
        impl std::ops::$tr<&Expr> for &Expr {
            type Output = Expr;
            fn $method(self, rhs: &Expr) -> Expr {
                Expr::binary($op, self.clone(), rhs.clone())
            }
        }
        impl std::ops::$tr<f64> for Expr {
            type Output = Expr;
            fn $method(self, rhs: f64) -> Expr {
                Expr::binary($op, self, Expr::constant(rhs))
            }
        }
    };
}

binary_impl!(Add, add, BinaryOp::Add);
binary_impl!(Sub, sub, BinaryOp::Sub);
binary_impl!(Mul, mul, BinaryOp::Mul);
binary_impl!(Div, div, BinaryOp::Div);

impl std::ops::Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::unary(UnaryOp::Neg, self)
    }
}

impl From<f64> for Expr {
    fn from(c: f64) -> Self {
        Expr::constant(c)
    }
}
