//! Forward-mode differentiation over any backend.
//!
//! Used to obtain `rho_p'(0)` and `f'(0)` for the differentiated collocation
//! row at `r = 0`, where every integration range collapses.

use crate::backend::{Backend, BinaryOp, UnaryOp, ValueSummary};
use crate::sa::Instability;

#[derive(Clone, Debug, PartialEq)]
pub struct DualValue<V> {
    pub value: V,
    pub deriv: V,
}

#[derive(Debug)]
pub struct Dual<'a, B> {
    inner: &'a B,
}

impl<'a, B: Backend> Dual<'a, B> {
    pub fn new(inner: &'a B) -> Self {
        Self { inner }
    }

    /// The independent variable at `x` (derivative one).
    pub fn variable(&self, x: f64) -> DualValue<B::Value> {
        DualValue {
            value: self.inner.constant(x),
            deriv: self.inner.constant(1.0),
        }
    }

    pub fn inner(&self) -> &B {
        self.inner
    }
}

impl<B: Backend> Backend for Dual<'_, B> {
    type Value = DualValue<B::Value>;

    fn constant(&self, x: f64) -> Self::Value {
        DualValue {
            value: self.inner.constant(x),
            deriv: self.inner.constant(0.0),
        }
    }

    fn unary(&self, op: UnaryOp, a: &Self::Value) -> Self::Value {
        let b = self.inner;
        let value = b.unary(op, &a.value);
        let da = &a.deriv;
        let deriv = match op {
            UnaryOp::Neg => b.neg(da),
            UnaryOp::Abs => {
                if b.mean(&a.value) < 0.0 {
                    b.neg(da)
                } else {
                    da.clone()
                }
            }
            UnaryOp::Exp => b.mul(&value, da),
            UnaryOp::Sin => b.mul(&b.unary(UnaryOp::Cos, &a.value), da),
            UnaryOp::Cos => b.neg(&b.mul(&b.unary(UnaryOp::Sin, &a.value), da)),
            UnaryOp::Tan => {
                let sec2 = b.add(&b.constant(1.0), &b.mul(&value, &value));
                b.mul(&sec2, da)
            }
            UnaryOp::Asin | UnaryOp::Acos => {
                let one = b.constant(1.0);
                let root = b.unary(
                    UnaryOp::Sqrt,
                    &b.sub(&one, &b.mul(&a.value, &a.value)),
                );
                let d = b.div(da, &root);
                if op == UnaryOp::Acos {
                    b.neg(&d)
                } else {
                    d
                }
            }
            UnaryOp::Atan => {
                let den = b.add(&b.constant(1.0), &b.mul(&a.value, &a.value));
                b.div(da, &den)
            }
            UnaryOp::Sqrt => b.div(da, &b.mul(&b.constant(2.0), &value)),
            UnaryOp::Log => b.div(da, &a.value),
        };
        DualValue { value, deriv }
    }

    fn binary(&self, op: BinaryOp, x: &Self::Value, y: &Self::Value) -> Self::Value {
        let b = self.inner;
        match op {
            BinaryOp::Add => DualValue {
                value: b.add(&x.value, &y.value),
                deriv: b.add(&x.deriv, &y.deriv),
            },
            BinaryOp::Sub => DualValue {
                value: b.sub(&x.value, &y.value),
                deriv: b.sub(&x.deriv, &y.deriv),
            },
            BinaryOp::Mul => DualValue {
                value: b.mul(&x.value, &y.value),
                deriv: b.add(&b.mul(&x.deriv, &y.value), &b.mul(&x.value, &y.deriv)),
            },
            BinaryOp::Div => {
                let value = b.div(&x.value, &y.value);
                let num = b.sub(&x.deriv, &b.mul(&value, &y.deriv));
                DualValue {
                    deriv: b.div(&num, &y.value),
                    value,
                }
            }
            BinaryOp::Pow => {
                let value = b.binary(BinaryOp::Pow, &x.value, &y.value);
                // constant exponent: y x^(y-1) x'
                let power_rule = {
                    let ym1 = b.sub(&y.value, &b.constant(1.0));
                    let xp = b.binary(BinaryOp::Pow, &x.value, &ym1);
                    b.mul(&b.mul(&y.value, &xp), &x.deriv)
                };
                let deriv = if b.mean(&y.deriv) == 0.0 {
                    power_rule
                } else {
                    let ln = b.unary(UnaryOp::Log, &x.value);
                    b.add(&b.mul(&b.mul(&value, &ln), &y.deriv), &power_rule)
                };
                DualValue { value, deriv }
            }
        }
    }

    fn mean(&self, a: &Self::Value) -> f64 {
        self.inner.mean(&a.value)
    }

    fn is_zero(&self, a: &Self::Value) -> bool {
        self.inner.is_zero(&a.value)
    }

    fn is_unstable(&self, a: &Self::Value) -> bool {
        self.inner.is_unstable(&a.value) || self.inner.is_unstable(&a.deriv)
    }

    fn summary(&self, a: &Self::Value) -> ValueSummary {
        self.inner.summary(&a.value)
    }

    fn is_stochastic(&self) -> bool {
        self.inner.is_stochastic()
    }

    fn instabilities(&self) -> Vec<Instability> {
        self.inner.instabilities()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::Plain;

    fn central(f: impl Fn(f64) -> f64, x: f64) -> f64 {
        let h = 1e-5;
        (f(x + h) - f(x - h)) / (2.0 * h)
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let d = Dual::new(&Plain);
        let cases: Vec<(UnaryOp, f64)> = vec![
            (UnaryOp::Exp, 0.3),
            (UnaryOp::Sin, 0.7),
            (UnaryOp::Cos, 0.7),
            (UnaryOp::Tan, 0.4),
            (UnaryOp::Asin, 0.2),
            (UnaryOp::Acos, 0.2),
            (UnaryOp::Atan, 1.3),
            (UnaryOp::Sqrt, 2.0),
            (UnaryOp::Log, 1.7),
            (UnaryOp::Abs, -0.5),
            (UnaryOp::Neg, 0.5),
        ];
        for (op, x) in cases {
            let got = d.unary(op, &d.variable(x)).deriv;
            let fd = central(|t| op.apply(t), x);
            assert!((got - fd).abs() < 1e-8, "{op:?}: {got} vs {fd}");
        }
    }

    #[test]
    fn product_quotient_and_power_rules() {
        let d = Dual::new(&Plain);
        let x = d.variable(0.8);
        let three = d.constant(3.0);
        let f = d.div(&d.mul(&x, &d.unary(UnaryOp::Sin, &x)), &d.add(&x, &three));
        let fd = central(|t| t * t.sin() / (t + 3.0), 0.8);
        assert!((f.deriv - fd).abs() < 1e-9);

        let p = d.binary(BinaryOp::Pow, &x, &d.constant(2.5));
        assert!((p.deriv - 2.5 * 0.8f64.powf(1.5)).abs() < 1e-14);

        let q = d.binary(BinaryOp::Pow, &d.constant(2.0), &x);
        assert!((q.deriv - 2f64.powf(0.8) * 2f64.ln()).abs() < 1e-14);

        // negative base with a constant exponent stays finite
        let neg = d.variable(-0.5);
        let c = d.binary(BinaryOp::Pow, &neg, &d.constant(3.0));
        assert!((c.deriv - 0.75).abs() < 1e-14);
    }
}
