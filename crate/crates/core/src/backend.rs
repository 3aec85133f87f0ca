//! Arithmetic backends.
//!
//! Every numerical routine in this crate (expression evaluation, quadrature,
//! system assembly, elimination) is written once against [`Backend`] and run
//! either in plain binary64, in CESTAC stochastic arithmetic
//! ([`crate::sa::SaContext`]) or over dual numbers ([`crate::dual::Dual`]).

use std::fmt;

use serde::Serialize;

use crate::sa::Instability;

/// Pivots smaller than this are treated as zero by the plain backend.
pub const PLAIN_ZERO_THRESHOLD: f64 = 1e-30;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum UnaryOp {
    Neg,
    Abs,
    Exp,
    Sin,
    Cos,
    Tan,
    Asin,
    Acos,
    Atan,
    Sqrt,
    Log,
}

impl UnaryOp {
    pub fn name(self) -> &'static str {
        match self {
            UnaryOp::Neg => "neg",
            UnaryOp::Abs => "abs",
            UnaryOp::Exp => "exp",
            UnaryOp::Sin => "sin",
            UnaryOp::Cos => "cos",
            UnaryOp::Tan => "tan",
            UnaryOp::Asin => "asin",
            UnaryOp::Acos => "acos",
            UnaryOp::Atan => "atan",
            UnaryOp::Sqrt => "sqrt",
            UnaryOp::Log => "log",
        }
    }

    /// Round-to-nearest evaluation on one binary64 operand.
    pub fn apply(self, x: f64) -> f64 {
        match self {
            UnaryOp::Neg => -x,
            UnaryOp::Abs => x.abs(),
            UnaryOp::Exp => x.exp(),
            UnaryOp::Sin => x.sin(),
            UnaryOp::Cos => x.cos(),
            UnaryOp::Tan => x.tan(),
            UnaryOp::Asin => x.asin(),
            UnaryOp::Acos => x.acos(),
            UnaryOp::Atan => x.atan(),
            UnaryOp::Sqrt => x.sqrt(),
            UnaryOp::Log => x.ln(),
        }
    }

    /// Whether `x` lies in the mathematical domain of the function.
    pub fn in_domain(self, x: f64) -> bool {
        match self {
            UnaryOp::Asin | UnaryOp::Acos => (-1.0..=1.0).contains(&x),
            UnaryOp::Sqrt => x >= 0.0,
            UnaryOp::Log => x > 0.0,
            _ => true,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinaryOp {
    pub fn apply(self, a: f64, b: f64) -> f64 {
        match self {
            BinaryOp::Add => a + b,
            BinaryOp::Sub => a - b,
            BinaryOp::Mul => a * b,
            BinaryOp::Div => a / b,
            BinaryOp::Pow => a.powf(b),
        }
    }

    pub fn symbol(self) -> char {
        match self {
            BinaryOp::Add => '+',
            BinaryOp::Sub => '-',
            BinaryOp::Mul => '*',
            BinaryOp::Div => '/',
            BinaryOp::Pow => '^',
        }
    }
}

/// Backend-independent view of one computed scalar, used for reports.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ValueSummary {
    pub mean: f64,
    /// Sample standard deviation; `None` for deterministic backends.
    pub sigma: Option<f64>,
    /// Estimated number of exact significant digits; `None` for deterministic backends.
    pub digits: Option<f64>,
    pub text: String,
}

pub trait Backend {
    type Value: Clone + fmt::Debug;

    fn constant(&self, x: f64) -> Self::Value;
    fn unary(&self, op: UnaryOp, a: &Self::Value) -> Self::Value;
    fn binary(&self, op: BinaryOp, a: &Self::Value, b: &Self::Value) -> Self::Value;

    /// Central value used for pivot selection and plain-number reporting.
    fn mean(&self, a: &Self::Value) -> f64;
    /// Numerical zero test: the informatical zero under SA, a tiny magnitude otherwise.
    fn is_zero(&self, a: &Self::Value) -> bool;
    fn is_unstable(&self, a: &Self::Value) -> bool;
    fn summary(&self, a: &Self::Value) -> ValueSummary;

    fn is_stochastic(&self) -> bool {
        false
    }

    /// Instabilities recorded since construction.
    fn instabilities(&self) -> Vec<Instability> {
        Vec::new()
    }

    fn add(&self, a: &Self::Value, b: &Self::Value) -> Self::Value {
        self.binary(BinaryOp::Add, a, b)
    }
    fn sub(&self, a: &Self::Value, b: &Self::Value) -> Self::Value {
        self.binary(BinaryOp::Sub, a, b)
    }
    fn mul(&self, a: &Self::Value, b: &Self::Value) -> Self::Value {
        self.binary(BinaryOp::Mul, a, b)
    }
    fn div(&self, a: &Self::Value, b: &Self::Value) -> Self::Value {
        self.binary(BinaryOp::Div, a, b)
    }
    fn neg(&self, a: &Self::Value) -> Self::Value {
        self.unary(UnaryOp::Neg, a)
    }
    fn abs(&self, a: &Self::Value) -> Self::Value {
        self.unary(UnaryOp::Abs, a)
    }
}

/// Ordinary round-to-nearest binary64 arithmetic.
#[derive(Clone, Copy, Debug, Default)]
pub struct Plain;

/// Fixed-point rendering used for plain-arithmetic tables (20 decimals).
pub fn format_plain(x: f64) -> String {
    if x.is_finite() && x.abs() < 1e6 {
        format!("{x:.20}")
    } else {
        format!("{x:.16e}")
    }
}

impl Backend for Plain {
    type Value = f64;

    fn constant(&self, x: f64) -> f64 {
        x
    }

    fn unary(&self, op: UnaryOp, a: &f64) -> f64 {
        op.apply(*a)
    }

    fn binary(&self, op: BinaryOp, a: &f64, b: &f64) -> f64 {
        op.apply(*a, *b)
    }

    fn mean(&self, a: &f64) -> f64 {
        *a
    }

    fn is_zero(&self, a: &f64) -> bool {
        !a.is_finite() || a.abs() < PLAIN_ZERO_THRESHOLD
    }

    fn is_unstable(&self, a: &f64) -> bool {
        !a.is_finite()
    }

    fn summary(&self, a: &f64) -> ValueSummary {
        ValueSummary {
            mean: *a,
            sigma: None,
            digits: None,
            text: format_plain(*a),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plain_ops() {
        let p = Plain;
        assert_eq!(p.add(&1.0, &2.0), 3.0);
        assert_eq!(p.binary(BinaryOp::Pow, &2.0, &0.5), 2f64.sqrt());
        assert!(p.is_zero(&0.0));
        assert!(p.is_zero(&1e-31));
        assert!(!p.is_zero(&1e-29));
        assert!(p.is_unstable(&f64::NAN));
    }

    #[test]
    fn domains() {
        assert!(!UnaryOp::Asin.in_domain(1.5));
        assert!(UnaryOp::Asin.in_domain(-1.0));
        assert!(!UnaryOp::Log.in_domain(0.0));
        assert!(!UnaryOp::Sqrt.in_domain(-1e-300));
        assert!(UnaryOp::Exp.in_domain(-1e300));
    }

    #[test]
    fn plain_format_is_fixed_point() {
        assert_eq!(format_plain(0.25), "0.25000000000000000000");
        assert_eq!(format_plain(-1.5), "-1.50000000000000000000");
    }
}
