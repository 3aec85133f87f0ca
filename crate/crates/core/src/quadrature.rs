//! Composite Simpson quadrature and the Abel-weight substitution.

use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backend::{Backend, UnaryOp};

pub const DEFAULT_PANELS: usize = 500;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Weight {
    #[default]
    None,
    /// `1 / sqrt(r^2 - s^2)` on `[0, r]`.
    Abel,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct QuadConfig {
    pub panels: usize,
    pub weight: Weight,
}

impl Default for QuadConfig {
    fn default() -> Self {
        Self {
            panels: DEFAULT_PANELS,
            weight: Weight::None,
        }
    }
}

impl QuadConfig {
    pub fn validate(&self) -> Result<(), QuadError> {
        check_panels(self.panels)
    }
}

#[derive(Clone, Debug, Error, PartialEq)]
pub enum QuadError {
    #[error("panel count must be even and at least 2, got {0}")]
    BadPanels(usize),
    #[error("reversed interval [{lo}, {hi}]")]
    Reversed { lo: f64, hi: f64 },
    #[error("Abel radius must be positive, got {0}")]
    NonPositiveRadius(f64),
    #[error("integrand component {component} is not finite at s = {s}")]
    NonFinite { s: f64, component: usize },
}

fn check_panels(panels: usize) -> Result<(), QuadError> {
    if panels < 2 || !panels.is_multiple_of(2) {
        return Err(QuadError::BadPanels(panels));
    }
    Ok(())
}

/// Composite Simpson rule for a scalar integrand.
pub fn simpson<B: Backend>(
    backend: &B,
    lo: &B::Value,
    hi: &B::Value,
    panels: usize,
    mut f: impl FnMut(&B::Value) -> B::Value,
) -> Result<B::Value, QuadError> {
    let mut out = simpson_many(backend, lo, hi, panels, 1, |s| vec![f(s)])?;
    Ok(out.pop().expect("one component"))
}

/// Composite Simpson rule for `dim` integrands sharing their nodes.
///
/// `f` returns all components at one node, so expensive shared factors
/// (a kernel value, successive powers) are computed once per node.
pub fn simpson_many<B: Backend>(
    backend: &B,
    lo: &B::Value,
    hi: &B::Value,
    panels: usize,
    dim: usize,
    mut f: impl FnMut(&B::Value) -> Vec<B::Value>,
) -> Result<Vec<B::Value>, QuadError> {
    check_panels(panels)?;
    let (l, h) = (backend.mean(lo), backend.mean(hi));
    if l > h {
        return Err(QuadError::Reversed { lo: l, hi: h });
    }
    let zero = backend.constant(0.0);
    if l == h {
        return Ok(vec![zero; dim]);
    }

    let step = backend.div(&backend.sub(hi, lo), &backend.constant(panels as f64));
    let mut sample = |s: &B::Value| -> Result<Vec<B::Value>, QuadError> {
        let v = f(s);
        debug_assert_eq!(v.len(), dim);
        if let Some(component) = v.iter().position(|x| backend.is_unstable(x)) {
            return Err(QuadError::NonFinite {
                s: backend.mean(s),
                component,
            });
        }
        Ok(v)
    };

    let mut ends = sample(lo)?;
    for (e, x) in ends.iter_mut().zip(sample(hi)?) {
        *e = backend.add(e, &x);
    }
    let mut odd = vec![zero.clone(); dim];
    let mut even = vec![zero; dim];
    for k in 1..panels {
        let s = backend.add(lo, &backend.mul(&backend.constant(k as f64), &step));
        let acc = if k % 2 == 1 { &mut odd } else { &mut even };
        for (a, x) in acc.iter_mut().zip(sample(&s)?) {
            *a = backend.add(a, &x);
        }
    }

    let four = backend.constant(4.0);
    let two = backend.constant(2.0);
    let third = backend.div(&step, &backend.constant(3.0));
    Ok((0..dim)
        .map(|i| {
            let sum = backend.add(
                &backend.add(&ends[i], &backend.mul(&four, &odd[i])),
                &backend.mul(&two, &even[i]),
            );
            backend.mul(&sum, &third)
        })
        .collect())
}

/// `[1, x, x^2, ..., x^degree]` by repeated multiplication.
pub fn powers<B: Backend>(backend: &B, x: &B::Value, degree: usize) -> Vec<B::Value> {
    let mut out = Vec::with_capacity(degree + 1);
    out.push(backend.constant(1.0));
    for j in 1..=degree {
        let next = backend.mul(&out[j - 1], x);
        out.push(next);
    }
    out
}

/// Abel-weighted moments `int_0^r k(s) (s - c)^j / sqrt(r^2 - s^2) ds` for
/// `j = 0..=degree`.
///
/// With `s = r sin(t)` the weight cancels against `ds` and the integrand
/// becomes `k(r sin t) (r sin t - c)^j` on `[0, pi/2]`, smooth for smooth `k`.
/// At `r = 0` this gives the limit `k(0) (-c)^j pi/2`.
pub fn abel_moments<B: Backend>(
    backend: &B,
    r: &B::Value,
    c: &B::Value,
    degree: usize,
    panels: usize,
    mut kernel: impl FnMut(&B::Value) -> B::Value,
) -> Result<Vec<B::Value>, QuadError> {
    let rm = backend.mean(r);
    if rm < 0.0 {
        return Err(QuadError::NonPositiveRadius(rm));
    }
    let lo = backend.constant(0.0);
    let hi = backend.constant(FRAC_PI_2);
    simpson_many(backend, &lo, &hi, panels, degree + 1, |t| {
        let s = backend.mul(r, &backend.unary(UnaryOp::Sin, t));
        let k = kernel(&s);
        powers(backend, &backend.sub(&s, c), degree)
            .iter()
            .map(|p| backend.mul(&k, p))
            .collect()
    })
}

/// `int_0^r (s - c)^j / sqrt(r^2 - s^2) ds` for `r > 0`.
pub fn abel_basis_integral<B: Backend>(
    backend: &B,
    r: &B::Value,
    c: &B::Value,
    j: usize,
    panels: usize,
) -> Result<B::Value, QuadError> {
    let rm = backend.mean(r);
    if rm <= 0.0 || rm.is_nan() {
        return Err(QuadError::NonPositiveRadius(rm));
    }
    let one = backend.constant(1.0);
    let mut m = abel_moments(backend, r, c, j, panels, |_| one.clone())?;
    Ok(m.swap_remove(j))
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use super::*;
    use crate::backend::Plain;

    fn plain(lo: f64, hi: f64, panels: usize, f: impl Fn(f64) -> f64) -> f64 {
        simpson(&Plain, &lo, &hi, panels, |s| f(*s)).unwrap()
    }

    #[test]
    fn cubic_is_exact() {
        // dyadic steps leave nothing to round
        for panels in [2, 4, 8, 128, 512] {
            assert_eq!(plain(0.0, 1.0, panels, |s| s * s * s), 0.25);
        }
        // otherwise only the node and weight roundings remain
        for panels in [6, 10, 12, 100, 500] {
            let v = plain(0.0, 1.0, panels, |s| s * s * s);
            assert!((v - 0.25).abs() <= 2.0 * f64::EPSILON * 0.25, "{panels}: {v:e}");
        }
    }

    #[test]
    fn sine_over_half_period() {
        assert!((plain(0.0, PI, 500, f64::sin) - 2.0).abs() < 1e-10);
    }

    #[test]
    fn empty_and_reversed() {
        assert_eq!(plain(0.3, 0.3, 500, |_| 1.0), 0.0);
        assert!(matches!(
            simpson(&Plain, &1.0, &0.0, 4, |s| *s),
            Err(QuadError::Reversed { .. })
        ));
        assert_eq!(
            simpson(&Plain, &0.0, &1.0, 3, |s| *s),
            Err(QuadError::BadPanels(3))
        );
        assert_eq!(
            simpson(&Plain, &0.0, &1.0, 0, |s| *s),
            Err(QuadError::BadPanels(0))
        );
    }

    #[test]
    fn non_finite_integrand_reported() {
        let err = simpson(&Plain, &0.0, &1.0, 4, |s| 1.0 / (s - 0.5)).unwrap_err();
        assert_eq!(err, QuadError::NonFinite { s: 0.5, component: 0 });
    }

    #[test]
    fn fourth_order() {
        let exact = 1f64.exp() - 1.0;
        let e1 = (plain(0.0, 1.0, 8, f64::exp) - exact).abs();
        let e2 = (plain(0.0, 1.0, 16, f64::exp) - exact).abs();
        let ratio = e1 / e2;
        assert!((12.0..=20.0).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn abel_examples() {
        let p = Plain;
        let f = |j| abel_basis_integral(&p, &1.0, &0.0, j, 500).unwrap();
        assert!((f(0) - PI / 2.0).abs() < 1e-14);
        assert!((f(1) - 1.0).abs() < 1e-12);
        assert!((f(2) - PI / 4.0).abs() < 1e-14);
        assert!(abel_basis_integral(&p, &0.0, &0.0, 0, 500).is_err());
        assert!(abel_basis_integral(&p, &-1.0, &0.0, 0, 500).is_err());
    }

    #[test]
    fn abel_limit_at_origin() {
        let m = abel_moments(&Plain, &0.0, &0.5, 2, 500, |_| 2.0).unwrap();
        for (j, v) in m.iter().enumerate() {
            let want = 2.0 * (-0.5f64).powi(j as i32) * PI / 2.0;
            assert!((v - want).abs() < 1e-14);
        }
    }

    #[test]
    fn powers_by_multiplication() {
        assert_eq!(powers(&Plain, &3.0, 3), vec![1.0, 3.0, 9.0, 27.0]);
        assert_eq!(powers(&Plain, &3.0, 0), vec![1.0]);
    }
}
