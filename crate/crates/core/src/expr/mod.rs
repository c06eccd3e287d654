//! Scalar expressions over an ordered list of named variables.
//!
//! An [`Expr`] is an immutable tree that can be parsed from text, evaluated
//! at a point, differentiated symbolically and printed back in a form the
//! parser accepts. Every coefficient of a Pfaffian form lives here, and all
//! partial derivatives used by the integrability tests are computed by
//! [`Expr::diff`] rather than by finite differences.

mod diff;
mod parse;
mod simplify;

use std::fmt;
use std::ops;

use thiserror::Error;

pub use parse::{parse_expression, ParseError};

/// Function names understood by the parser.
pub const FUNCTION_NAMES: [&str; 5] = ["exp", "log", "sin", "cos", "sqrt"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum UnaryOp {
    Neg,
    Exp,
    Log,
    Sin,
    Cos,
    Sqrt,
}

impl UnaryOp {
    pub fn name(self) -> &'static str {
        match self {
            UnaryOp::Neg => "-",
            UnaryOp::Exp => "exp",
            UnaryOp::Log => "log",
            UnaryOp::Sin => "sin",
            UnaryOp::Cos => "cos",
            UnaryOp::Sqrt => "sqrt",
        }
    }

    pub(crate) fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "exp" => UnaryOp::Exp,
            "log" => UnaryOp::Log,
            "sin" => UnaryOp::Sin,
            "cos" => UnaryOp::Cos,
            "sqrt" => UnaryOp::Sqrt,
            _ => return None,
        })
    }

    fn apply(self, x: f64) -> Result<f64, EvalError> {
        match self {
            UnaryOp::Neg => Ok(-x),
            UnaryOp::Exp => Ok(x.exp()),
            UnaryOp::Log if x <= 0.0 => Err(EvalError::LogNonPositive(x)),
            UnaryOp::Log => Ok(x.ln()),
            UnaryOp::Sin => Ok(x.sin()),
            UnaryOp::Cos => Ok(x.cos()),
            UnaryOp::Sqrt if x < 0.0 => Err(EvalError::SqrtNegative(x)),
            UnaryOp::Sqrt => Ok(x.sqrt()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
}

impl BinaryOp {
    pub fn symbol(self) -> char {
        match self {
            BinaryOp::Add => '+',
            BinaryOp::Sub => '-',
            BinaryOp::Mul => '*',
            BinaryOp::Div => '/',
        }
    }

    fn apply(self, a: f64, b: f64) -> Result<f64, EvalError> {
        match self {
            BinaryOp::Add => Ok(a + b),
            BinaryOp::Sub => Ok(a - b),
            BinaryOp::Mul => Ok(a * b),
            BinaryOp::Div if b == 0.0 => Err(EvalError::DivisionByZero),
            BinaryOp::Div => Ok(a / b),
        }
    }
}

/// Expression tree node.
///
/// Variables are referenced by index into the variable list the expression
/// was parsed against. Powers only take constant exponents, which keeps the
/// operator set closed under differentiation.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    Var(usize),
    Unary(UnaryOp, Box<Expr>),
    Binary(BinaryOp, Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, f64),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("division by zero")]
    DivisionByZero,
    #[error("logarithm of non-positive value {0}")]
    LogNonPositive(f64),
    #[error("square root of negative value {0}")]
    SqrtNegative(f64),
    #[error("power {base}^{exponent} is undefined")]
    PowDomain { base: f64, exponent: f64 },
    #[error("non-finite intermediate value")]
    NonFinite,
    #[error("variable index {index} out of range for point of length {arity}")]
    VarOutOfRange { index: usize, arity: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("variable index {index} out of range for arity {arity}")]
pub struct ArityError {
    pub index: usize,
    pub arity: usize,
}

impl Expr {
    pub fn constant(c: f64) -> Self {
        Expr::Const(c)
    }

    pub fn var(index: usize) -> Self {
        Expr::Var(index)
    }

    pub fn unary(op: UnaryOp, arg: Expr) -> Self {
        Expr::Unary(op, Box::new(arg))
    }

    pub fn binary(op: BinaryOp, a: Expr, b: Expr) -> Self {
        Expr::Binary(op, Box::new(a), Box::new(b))
    }

    pub fn exp(self) -> Self {
        Expr::unary(UnaryOp::Exp, self)
    }

    pub fn log(self) -> Self {
        Expr::unary(UnaryOp::Log, self)
    }

    pub fn sin(self) -> Self {
        Expr::unary(UnaryOp::Sin, self)
    }

    pub fn cos(self) -> Self {
        Expr::unary(UnaryOp::Cos, self)
    }

    pub fn sqrt(self) -> Self {
        Expr::unary(UnaryOp::Sqrt, self)
    }

    pub fn powf(self, exponent: f64) -> Self {
        Expr::Pow(Box::new(self), exponent)
    }

    pub fn as_const(&self) -> Option<f64> {
        match self {
            Expr::Const(c) => Some(*c),
            _ => None,
        }
    }

    pub fn is_const(&self, value: f64) -> bool {
        matches!(self, Expr::Const(c) if *c == value)
    }

    /// One past the largest variable index referenced, or 0 for a constant
    /// expression.
    pub fn min_arity(&self) -> usize {
        match self {
            Expr::Const(_) => 0,
            Expr::Var(i) => i + 1,
            Expr::Unary(_, a) | Expr::Pow(a, _) => a.min_arity(),
            Expr::Binary(_, a, b) => a.min_arity().max(b.min_arity()),
        }
    }

    pub fn node_count(&self) -> usize {
        match self {
            Expr::Const(_) | Expr::Var(_) => 1,
            Expr::Unary(_, a) | Expr::Pow(a, _) => 1 + a.node_count(),
            Expr::Binary(_, a, b) => 1 + a.node_count() + b.node_count(),
        }
    }

    /// Evaluates the expression at `point`.
    ///
    /// Any operation leaving the real domain (division by zero, logarithm of
    /// a non-positive value, square root of a negative value) is an error, as
    /// is any non-finite intermediate result.
    pub fn eval(&self, point: &[f64]) -> Result<f64, EvalError> {
        let value = match self {
            Expr::Const(c) => *c,
            Expr::Var(i) => *point.get(*i).ok_or(EvalError::VarOutOfRange {
                index: *i,
                arity: point.len(),
            })?,
            Expr::Unary(op, a) => op.apply(a.eval(point)?)?,
            Expr::Binary(op, a, b) => op.apply(a.eval(point)?, b.eval(point)?)?,
            Expr::Pow(a, e) => pow_checked(a.eval(point)?, *e)?,
        };
        if value.is_finite() {
            Ok(value)
        } else {
            Err(EvalError::NonFinite)
        }
    }

    /// Replaces every `Var(i)` with `replacements[i]`.
    ///
    /// # Panics
    ///
    /// Panics if a referenced index has no replacement.
    pub fn substitute(&self, replacements: &[Expr]) -> Expr {
        match self {
            Expr::Const(c) => Expr::Const(*c),
            Expr::Var(i) => replacements[*i].clone(),
            Expr::Unary(op, a) => Expr::unary(*op, a.substitute(replacements)),
            Expr::Binary(op, a, b) => {
                Expr::binary(*op, a.substitute(replacements), b.substitute(replacements))
            }
            Expr::Pow(a, e) => Expr::Pow(Box::new(a.substitute(replacements)), *e),
        }
    }

    /// Renders the expression with the given variable names. The output is
    /// fully parenthesized and parses back to a structurally equal tree.
    pub fn display<'a, S: AsRef<str>>(&'a self, vars: &'a [S]) -> Display<'a, S> {
        Display { expr: self, vars }
    }

    pub fn to_text<S: AsRef<str>>(&self, vars: &[S]) -> String {
        self.display(vars).to_string()
    }
}

fn pow_checked(base: f64, exponent: f64) -> Result<f64, EvalError> {
    let integral = exponent.fract() == 0.0;
    if (base < 0.0 && !integral) || (base == 0.0 && exponent < 0.0) {
        return Err(EvalError::PowDomain { base, exponent });
    }
    if integral && exponent.abs() <= i32::MAX as f64 {
        Ok(base.powi(exponent as i32))
    } else {
        Ok(base.powf(exponent))
    }
}

/// Checks `var_index < arity` and returns the simplified partial derivative.
pub fn differentiate(e: &Expr, var_index: usize, arity: usize) -> Result<Expr, ArityError> {
    if var_index >= arity {
        return Err(ArityError {
            index: var_index,
            arity,
        });
    }
    Ok(e.diff(var_index))
}

/// Printer returned by [`Expr::display`].
pub struct Display<'a, S> {
    expr: &'a Expr,
    vars: &'a [S],
}

impl<S: AsRef<str>> fmt::Display for Display<'_, S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_expr(self.expr, self.vars, f)
    }
}

fn write_expr<S: AsRef<str>>(e: &Expr, vars: &[S], f: &mut fmt::Formatter<'_>) -> fmt::Result {
    match e {
        Expr::Const(c) => write!(f, "{c:?}"),
        Expr::Var(i) => match vars.get(*i) {
            Some(name) => f.write_str(name.as_ref()),
            None => write!(f, "_v{i}"),
        },
        Expr::Unary(UnaryOp::Neg, a) => {
            f.write_str("-(")?;
            write_expr(a, vars, f)?;
            f.write_str(")")
        }
        Expr::Unary(op, a) => {
            write!(f, "{}(", op.name())?;
            write_expr(a, vars, f)?;
            f.write_str(")")
        }
        Expr::Binary(op, a, b) => {
            f.write_str("(")?;
            write_expr(a, vars, f)?;
            write!(f, " {} ", op.symbol())?;
            write_expr(b, vars, f)?;
            f.write_str(")")
        }
        Expr::Pow(a, e) => {
            f.write_str("(")?;
            write_expr(a, vars, f)?;
            write!(f, ")^{e:?}")
        }
    }
}

impl ops::Add for Expr {
    type Output = Expr;
    fn add(self, rhs: Expr) -> Expr {
        Expr::binary(BinaryOp::Add, self, rhs)
    }
}

impl ops::Sub for Expr {
    type Output = Expr;
    fn sub(self, rhs: Expr) -> Expr {
        Expr::binary(BinaryOp::Sub, self, rhs)
    }
}

impl ops::Mul for Expr {
    type Output = Expr;
    fn mul(self, rhs: Expr) -> Expr {
        Expr::binary(BinaryOp::Mul, self, rhs)
    }
}

impl ops::Div for Expr {
    type Output = Expr;
    fn div(self, rhs: Expr) -> Expr {
        Expr::binary(BinaryOp::Div, self, rhs)
    }
}

impl ops::Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::unary(UnaryOp::Neg, self)
    }
}
