//! Expression language for kernels, boundary curves, right-hand sides,
//! exact solutions and output transforms.
//!
//! Grammar (whitespace-insensitive):
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := unary (('*' | '/') unary)*
//! unary   := '-' unary | power
//! power   := primary ('^' unary)?
//! primary := number | constant | variable | func '(' expr (',' expr)* ')' | '(' expr ')'
//! ```
//!
//! `^` is right-associative and binds tighter than unary minus, so `-r^2`
//! is `-(r^2)` and `2^-1` is `2^(-1)`. There is no implicit multiplication.

mod parse;

use std::f64::consts;
use std::fmt;

use thiserror::Error;

use crate::backend::{Backend, BinaryOp, UnaryOp};

pub use parse::{parse, ParseError};

/// Integer powers up to this exponent are expanded into repeated products.
pub const MAX_EXPANDED_POWER: u32 = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Var {
    R,
    S,
    W,
}

impl Var {
    pub fn name(self) -> &'static str {
        match self {
            Var::R => "r",
            Var::S => "s",
            Var::W => "w",
        }
    }

    fn index(self) -> usize {
        self as usize
    }

    fn from_name(name: &str) -> Option<Var> {
        match name {
            "r" => Some(Var::R),
            "s" => Some(Var::S),
            "w" => Some(Var::W),
            _ => None,
        }
    }
}

/// The variables an expression may reference, by role.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct VarSet(u8);

impl VarSet {
    pub const NONE: VarSet = VarSet(0);
    /// Curves, right-hand sides and exact solutions: `{r}`.
    pub const R: VarSet = VarSet(1);
    /// Kernels: `{r, s}`.
    pub const KERNEL: VarSet = VarSet(0b011);
    /// Output transforms: `{w}`.
    pub const TRANSFORM: VarSet = VarSet(0b100);

    pub fn of(vars: &[Var]) -> VarSet {
        VarSet(vars.iter().fold(0, |acc, v| acc | 1 << v.index()))
    }

    pub fn contains(self, v: Var) -> bool {
        self.0 & (1 << v.index()) != 0
    }

    fn describe(self) -> String {
        let names: Vec<&str> = [Var::R, Var::S, Var::W]
            .into_iter()
            .filter(|v| self.contains(*v))
            .map(Var::name)
            .collect();
        format!("{{{}}}", names.join(", "))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Constant {
    Pi,
    E,
}

impl Constant {
    pub fn value(self) -> f64 {
        match self {
            Constant::Pi => consts::PI,
            Constant::E => consts::E,
        }
    }

    fn name(self) -> &'static str {
        match self {
            Constant::Pi => "pi",
            Constant::E => "e",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Func {
    Unary(UnaryOp),
    Pow,
}

impl Func {
    fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "exp" => Func::Unary(UnaryOp::Exp),
            "sin" => Func::Unary(UnaryOp::Sin),
            "cos" => Func::Unary(UnaryOp::Cos),
            "tan" => Func::Unary(UnaryOp::Tan),
            "asin" => Func::Unary(UnaryOp::Asin),
            "acos" => Func::Unary(UnaryOp::Acos),
            "atan" => Func::Unary(UnaryOp::Atan),
            "sqrt" => Func::Unary(UnaryOp::Sqrt),
            "log" => Func::Unary(UnaryOp::Log),
            "abs" => Func::Unary(UnaryOp::Abs),
            "pow" => Func::Pow,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Func::Unary(op) => op.name(),
            Func::Pow => "pow",
        }
    }

    pub fn arity(self) -> usize {
        match self {
            Func::Unary(_) => 1,
            Func::Pow => 2,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Num(f64),
    Const(Constant),
    Var(Var),
    Neg(Box<Expr>),
    Binary(BinaryOp, Box<Expr>, Box<Expr>),
    Call(Func, Vec<Expr>),
}

#[derive(Clone, Copy, Debug, Error, PartialEq, Eq)]
#[error("variable `{}` is not bound", .0.name())]
pub struct UnboundVariable(pub Var);

/// Variable bindings for one evaluation.
#[derive(Clone, Debug)]
pub struct Env<V> {
    slots: [Option<V>; 3],
}

impl<V> Default for Env<V> {
    fn default() -> Self {
        Self {
            slots: [None, None, None],
        }
    }
}

impl<V: Clone> Env<V> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, var: Var, value: V) -> Self {
        self.set(var, value);
        self
    }

    pub fn set(&mut self, var: Var, value: V) {
        self.slots[var.index()] = Some(value);
    }

    pub fn get(&self, var: Var) -> Option<&V> {
        self.slots[var.index()].as_ref()
    }
}

impl Expr {
    pub fn num(x: f64) -> Expr {
        Expr::Num(x)
    }

    pub fn var(v: Var) -> Expr {
        Expr::Var(v)
    }

    /// Evaluates the tree, routing every node through `backend`.
    pub fn eval<B: Backend>(&self, backend: &B, env: &Env<B::Value>) -> Result<B::Value, UnboundVariable> {
        Ok(match self {
            Expr::Num(x) => backend.constant(*x),
            Expr::Const(c) => backend.constant(c.value()),
            Expr::Var(v) => env.get(*v).ok_or(UnboundVariable(*v))?.clone(),
            Expr::Neg(a) => backend.neg(&a.eval(backend, env)?),
            Expr::Binary(BinaryOp::Pow, base, exp) => match small_integer(exp) {
                Some(k) => {
                    let b = base.eval(backend, env)?;
                    let mut acc = b.clone();
                    for _ in 1..k {
                        acc = backend.mul(&acc, &b);
                    }
                    acc
                }
                None => {
                    let b = base.eval(backend, env)?;
                    let e = exp.eval(backend, env)?;
                    backend.binary(BinaryOp::Pow, &b, &e)
                }
            },
            Expr::Binary(op, a, b) => {
                let a = a.eval(backend, env)?;
                let b = b.eval(backend, env)?;
                backend.binary(*op, &a, &b)
            }
            Expr::Call(Func::Unary(op), args) => backend.unary(*op, &args[0].eval(backend, env)?),
            Expr::Call(Func::Pow, args) => {
                let a = args[0].eval(backend, env)?;
                let b = args[1].eval(backend, env)?;
                backend.binary(BinaryOp::Pow, &a, &b)
            }
        })
    }

    /// Plain binary64 evaluation of an expression in at most `r`, `s`, `w`.
    pub fn eval_f64(&self, env: &Env<f64>) -> Result<f64, UnboundVariable> {
        self.eval(&crate::backend::Plain, env)
    }

    pub fn node_count(&self) -> usize {
        match self {
            Expr::Num(_) | Expr::Const(_) | Expr::Var(_) => 1,
            Expr::Neg(a) => 1 + a.node_count(),
            Expr::Binary(_, a, b) => 1 + a.node_count() + b.node_count(),
            Expr::Call(_, args) => 1 + args.iter().map(Expr::node_count).sum::<usize>(),
        }
    }

    /// Whether the expression references `v`.
    pub fn uses(&self, v: Var) -> bool {
        match self {
            Expr::Var(x) => *x == v,
            Expr::Num(_) | Expr::Const(_) => false,
            Expr::Neg(a) => a.uses(v),
            Expr::Binary(_, a, b) => a.uses(v) || b.uses(v),
            Expr::Call(_, args) => args.iter().any(|a| a.uses(v)),
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Binary(BinaryOp::Add | BinaryOp::Sub, ..) => 1,
            Expr::Binary(BinaryOp::Mul | BinaryOp::Div, ..) => 2,
            Expr::Neg(_) => 3,
            Expr::Binary(BinaryOp::Pow, ..) => 4,
            _ => 5,
        }
    }
}

fn small_integer(e: &Expr) -> Option<u32> {
    match e {
        Expr::Num(x) if x.fract() == 0.0 && *x >= 1.0 && *x <= MAX_EXPANDED_POWER as f64 => Some(*x as u32),
        _ => None,
    }
}

fn write_child(f: &mut fmt::Formatter<'_>, e: &Expr, parens: bool) -> fmt::Result {
    if parens {
        write!(f, "({e})")
    } else {
        write!(f, "{e}")
    }
}

/// Prints with the minimum parentheses that reparse to the same tree.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(x) if *x < 0.0 || x.is_sign_negative() => write!(f, "(-{:?})", -x),
            Expr::Num(x) => write!(f, "{x:?}"),
            Expr::Const(c) => f.write_str(c.name()),
            Expr::Var(v) => f.write_str(v.name()),
            Expr::Neg(a) => {
                f.write_str("-")?;
                write_child(f, a, a.precedence() < 3)
            }
            Expr::Binary(op, a, b) => {
                let p = self.precedence();
                if *op == BinaryOp::Pow {
                    write_child(f, a, a.precedence() <= p)?;
                    write!(f, "^")?;
                    write_child(f, b, b.precedence() < 3)
                } else {
                    write_child(f, a, a.precedence() < p)?;
                    write!(f, " {} ", op.symbol())?;
                    write_child(f, b, b.precedence() <= p)
                }
            }
            Expr::Call(func, args) => {
                write!(f, "{}(", func.name())?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{a}")?;
                }
                f.write_str(")")
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::Plain;

    fn p(text: &str, vars: VarSet) -> Expr {
        parse(text, vars).unwrap()
    }

    #[test]
    fn left_associative_sum() {
        let e = p("1+r+s", VarSet::KERNEL);
        let expected = Expr::Binary(
            BinaryOp::Add,
            Box::new(Expr::Binary(
                BinaryOp::Add,
                Box::new(Expr::Num(1.0)),
                Box::new(Expr::Var(Var::R)),
            )),
            Box::new(Expr::Var(Var::S)),
        );
        assert_eq!(e, expected);
    }

    #[test]
    fn example_one_rhs_parses() {
        let rhs = "(1/128)*(-4 - (1/8)*(16*r + 69*r^2 + 15*r^3) - exp(r/4)*(r^2 - 13*r + 12) \
                   + exp(r)*(4*r^2 - 16*r + 28) + exp(3*r/2)*(14*r + 20) - 32*exp(2*r))";
        let e = p(rhs, VarSet::R);
        let v = e.eval_f64(&Env::new().with(Var::R, 0.0)).unwrap();
        assert!(v.abs() < 1e-15);
    }

    #[test]
    fn plain_evaluation_examples() {
        let env = |r| Env::new().with(Var::R, r);
        assert_eq!(p("r^2", VarSet::R).eval_f64(&env(0.5)).unwrap(), 0.25);
        let v = p("(exp(2*r)-1)/8", VarSet::R).eval_f64(&env(0.2)).unwrap();
        assert!((v - ((0.4f64).exp() - 1.0) / 8.0).abs() < 1e-17);
        assert!((v - 0.06147808728).abs() < 1e-10);
        let v = p("sin(r+2)", VarSet::R).eval_f64(&env(0.4)).unwrap();
        assert!((v - 0.67546318).abs() < 1e-8);
    }

    #[test]
    fn precedence_rules() {
        let env = Env::new().with(Var::R, 3.0);
        let ev = |t: &str| p(t, VarSet::R).eval_f64(&env).unwrap();
        assert_eq!(ev("-r^2"), -9.0);
        assert_eq!(ev("2^3^2"), 512.0);
        assert_eq!(ev("2^-1"), 0.5);
        assert_eq!(ev("8/4/2"), 1.0);
        assert_eq!(ev("1-2-3"), -4.0);
        assert_eq!(ev("2*pi"), 2.0 * consts::PI);
        assert_eq!(ev("pow(r, 0.5)"), 3f64.sqrt());
    }

    #[test]
    fn integer_powers_expand_to_products() {
        let x = 1.1f64;
        let env = Env::new().with(Var::R, x);
        assert_eq!(p("r^3", VarSet::R).eval_f64(&env).unwrap(), x * x * x);
        assert_eq!(p("r^2.5", VarSet::R).eval_f64(&env).unwrap(), x.powf(2.5));
        assert_eq!(p("r^9", VarSet::R).eval_f64(&env).unwrap(), x.powf(9.0));
    }

    #[test]
    fn unbound_variable() {
        let e = p("r+s", VarSet::KERNEL);
        let err = e.eval(&Plain, &Env::new().with(Var::R, 1.0)).unwrap_err();
        assert_eq!(err, UnboundVariable(Var::S));
    }

    #[test]
    fn display_reparses() {
        for text in [
            "1+r+s",
            "r-(s-1)",
            "-(r+1)^2",
            "(-r)^2",
            "2^3^2",
            "(2^3)^2",
            "r/(s*2)",
            "--r",
            "2^-r",
            "pow(r, s) - sin(r*s)/3",
            "(31*r^6)/40960 + 1099*r^5/20480",
        ] {
            let e = p(text, VarSet::KERNEL);
            let printed = e.to_string();
            assert_eq!(p(&printed, VarSet::KERNEL), e, "{text} -> {printed}");
        }
        assert_eq!(p("1+r*s", VarSet::KERNEL).to_string(), "1.0 + r * s");
    }
}
