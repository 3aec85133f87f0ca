//! Taylor-collocation systems for first-kind Volterra equations
//!
//! ```text
//! sum_p int_{rho_{p-1}(r)}^{rho_p(r)} k_p(r, s) v(s) ds = f(r)
//! ```
//!
//! with `v` approximated by `sum_j c_j (s - c)^j`. Row `i` is the equation
//! enforced at the collocation point `r_i`; column `j` integrates the
//! monomial `(s - c)^j`, so the unknowns are `c_j = v^(j)(c) / j!`.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backend::{Backend, Plain};
use crate::dual::Dual;
use crate::expr::{Env, Expr, UnboundVariable, Var};
use crate::quadrature::{abel_moments, powers, simpson_many, QuadConfig, QuadError, Weight};

/// Tolerance for the chaining and `f(0) = 0` checks.
pub const SPEC_TOLERANCE: f64 = 1e-12;
/// Number of sampled `r` values used by [`ProblemSpec::validate`].
pub const VALIDATION_SAMPLES: usize = 50;

#[derive(Clone, Debug, PartialEq)]
pub struct Segment {
    pub rho_lo: Expr,
    pub rho_hi: Expr,
    pub kernel: Expr,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProblemSpec {
    pub label: String,
    pub a: f64,
    pub b: f64,
    /// Taylor center.
    pub c: f64,
    /// Default query point `r*`.
    pub point: f64,
    pub segments: Vec<Segment>,
    pub rhs: Expr,
    pub weight: Weight,
    /// Output map `w -> v` applied after solving (nonlinear problems).
    pub transform: Option<Expr>,
    pub exact: Option<Expr>,
    /// Working precision (24 or 53 mantissa bits) the problem is meant to be
    /// run in under stochastic arithmetic; `None` leaves the caller's choice.
    pub precision_bits: Option<u32>,
}

/// Which part of a [`ProblemSpec`] an error refers to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Field {
    Interval,
    Center,
    Point,
    Segment(usize),
    Rhs,
    Weight,
    Transform,
    Exact,
    Precision,
}

impl fmt::Display for Field {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Field::Interval => f.write_str("interval"),
            Field::Center => f.write_str("center"),
            Field::Point => f.write_str("point"),
            Field::Segment(p) => write!(f, "segment {}", p + 1),
            Field::Rhs => f.write_str("rhs"),
            Field::Weight => f.write_str("weight"),
            Field::Transform => f.write_str("transform"),
            Field::Exact => f.write_str("exact"),
            Field::Precision => f.write_str("precision"),
        }
    }
}

#[derive(Clone, Debug, Error, PartialEq)]
#[error("{field}: {message}")]
pub struct SpecError {
    pub field: Field,
    pub message: String,
}

impl SpecError {
    fn new(field: Field, message: impl Into<String>) -> Self {
        Self {
            field,
            message: message.into(),
        }
    }
}

fn eval_r(e: &Expr, r: f64) -> Result<f64, UnboundVariable> {
    e.eval_f64(&Env::new().with(Var::R, r))
}

fn only_uses(e: &Expr, allowed: &[Var]) -> Option<Var> {
    [Var::R, Var::S, Var::W]
        .into_iter()
        .find(|v| !allowed.contains(v) && e.uses(*v))
}

impl ProblemSpec {
    /// Checks interval, query point, variable roles, chaining of the
    /// boundary curves on sampled `r`, and `f(0) = 0` for unweighted problems.
    // negated comparisons below also reject NaN
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn validate(&self) -> Result<(), SpecError> {
        let (a, b) = (self.a, self.b);
        if !(a.is_finite() && b.is_finite() && a < b) {
            return Err(SpecError::new(Field::Interval, format!("need a < b, got [{a}, {b}]")));
        }
        if a < 0.0 {
            return Err(SpecError::new(Field::Interval, "interval must lie in r >= 0"));
        }
        if !self.c.is_finite() {
            return Err(SpecError::new(Field::Center, "center must be finite"));
        }
        if !(self.point > a && self.point <= b) {
            return Err(SpecError::new(
                Field::Point,
                format!("point {} must lie in ({a}, {b}]", self.point),
            ));
        }
        if let Some(p) = self.precision_bits {
            if p != 24 && p != 53 {
                return Err(SpecError::new(Field::Precision, format!("must be 24 or 53, got {p}")));
            }
        }
        if self.segments.is_empty() {
            return Err(SpecError::new(Field::Segment(0), "at least one segment is required"));
        }

        let roles: Vec<(Field, &Expr, &[Var])> = self
            .segments
            .iter()
            .enumerate()
            .flat_map(|(p, s)| {
                [
                    (Field::Segment(p), &s.rho_lo, &[Var::R][..]),
                    (Field::Segment(p), &s.rho_hi, &[Var::R][..]),
                    (Field::Segment(p), &s.kernel, &[Var::R, Var::S][..]),
                ]
            })
            .chain([(Field::Rhs, &self.rhs, &[Var::R][..])])
            .chain(self.exact.iter().map(|e| (Field::Exact, e, &[Var::R][..])))
            .chain(self.transform.iter().map(|e| (Field::Transform, e, &[Var::W][..])))
            .collect();
        for (field, e, allowed) in roles {
            if let Some(v) = only_uses(e, allowed) {
                return Err(SpecError::new(field, format!("variable `{}` is not allowed here", v.name())));
            }
        }

        if self.weight == Weight::Abel {
            let s = &self.segments;
            if s.len() != 1 || s[0].rho_lo != Expr::Num(0.0) || s[0].rho_hi != Expr::Var(Var::R) {
                return Err(SpecError::new(
                    Field::Weight,
                    "the Abel weight needs exactly one segment from 0 to r",
                ));
            }
        }

        let m = self.segments.len();
        for k in 1..=VALIDATION_SAMPLES {
            let r = a + (b - a) * k as f64 / VALIDATION_SAMPLES as f64;
            let tol = SPEC_TOLERANCE * r.abs().max(1.0);
            let mut prev_hi = 0.0;
            for (p, seg) in self.segments.iter().enumerate() {
                let field = Field::Segment(p);
                let lo = eval_r(&seg.rho_lo, r).map_err(|e| SpecError::new(field, e.to_string()))?;
                let hi = eval_r(&seg.rho_hi, r).map_err(|e| SpecError::new(field, e.to_string()))?;
                if !lo.is_finite() || !hi.is_finite() {
                    return Err(SpecError::new(field, format!("boundary is not finite at r = {r}")));
                }
                if lo > hi + tol {
                    return Err(SpecError::new(field, format!("rho_lo > rho_hi at r = {r}")));
                }
                if (lo - prev_hi).abs() > tol {
                    let what = if p == 0 {
                        "first segment must start at 0".to_string()
                    } else {
                        format!("does not start where segment {p} ends (r = {r})")
                    };
                    return Err(SpecError::new(field, what));
                }
                if p + 1 == m && (hi - r).abs() > tol {
                    return Err(SpecError::new(field, format!("last segment must end at r (r = {r})")));
                }
                prev_hi = hi;
            }
            let f = eval_r(&self.rhs, r).map_err(|e| SpecError::new(Field::Rhs, e.to_string()))?;
            if !f.is_finite() {
                return Err(SpecError::new(Field::Rhs, format!("not finite at r = {r}")));
            }
        }

        if a == 0.0 && self.weight == Weight::None {
            let f0 = eval_r(&self.rhs, 0.0).map_err(|e| SpecError::new(Field::Rhs, e.to_string()))?;
            if !(f0.abs() <= SPEC_TOLERANCE) {
                return Err(SpecError::new(Field::Rhs, "rhs must vanish at r=0"));
            }
        }
        Ok(())
    }

    pub fn quad_config(&self, panels: usize) -> QuadConfig {
        QuadConfig {
            panels,
            weight: self.weight,
        }
    }

    /// The exact solution at `r`, if one is known.
    pub fn exact_at(&self, r: f64) -> Option<f64> {
        self.exact.as_ref().and_then(|e| eval_r(e, r).ok())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GridMode {
    /// Equispaced `r_i = a + (b - a) i / n`; a row at `r = 0` is replaced by
    /// its derivative, since the equation itself degenerates to `0 = 0` there.
    #[default]
    Limit,
    /// `r_i = a + (b - a)(i + 1)/(n + 1)`, which never touches `a`.
    Shifted,
    /// Equispaced and taken literally; the `r = 0` row stays all-zero.
    Paper,
}

impl GridMode {
    pub fn name(self) -> &'static str {
        match self {
            GridMode::Limit => "limit",
            GridMode::Shifted => "shifted",
            GridMode::Paper => "paper",
        }
    }
}

#[derive(Clone, Debug, Error, PartialEq)]
pub enum CollocationError {
    #[error("degree must be at least 1")]
    ZeroDegree,
    #[error("need a < b, got [{0}, {1}]")]
    BadInterval(f64, f64),
    #[error("quadrature weight {quad:?} does not match the problem weight {problem:?}")]
    WeightMismatch { quad: Weight, problem: Weight },
    #[error("entry ({row}, {col}): {source}")]
    Quadrature {
        row: usize,
        col: usize,
        source: QuadError,
    },
    #[error("row {row}: {source}")]
    Unbound { row: usize, source: UnboundVariable },
    #[error("row {row}: right-hand side is not finite")]
    Rhs { row: usize },
}

#[allow(clippy::neg_cmp_op_on_partial_ord)]
pub fn collocation_points(degree: usize, a: f64, b: f64, mode: GridMode) -> Result<Vec<f64>, CollocationError> {
    if degree < 1 {
        return Err(CollocationError::ZeroDegree);
    }
    if !(a < b) {
        return Err(CollocationError::BadInterval(a, b));
    }
    let n = degree as f64;
    Ok((0..=degree)
        .map(|i| match mode {
            GridMode::Limit | GridMode::Paper => a + (b - a) * i as f64 / n,
            GridMode::Shifted => a + (b - a) * (i + 1) as f64 / (n + 1.0),
        })
        .collect())
}

#[derive(Clone, Debug)]
pub struct LinearSystem<V> {
    pub points: Vec<f64>,
    pub a: Vec<Vec<V>>,
    pub f: Vec<V>,
}

impl<V> LinearSystem<V> {
    pub fn dim(&self) -> usize {
        self.f.len()
    }
}

/// `[int k (s - c)^j over the problem's segments at r, j = 0..=degree]`.
///
/// This is one row of the collocation matrix at an arbitrary `r >= 0`; at
/// `r = 0` an unweighted row is identically zero.
pub fn row_at<B: Backend>(
    backend: &B,
    spec: &ProblemSpec,
    r: f64,
    degree: usize,
    panels: usize,
) -> Result<Vec<B::Value>, RowError> {
    let rv = backend.constant(r);
    let c = backend.constant(spec.c);
    let env = Env::new().with(Var::R, rv.clone());
    let mut row = vec![backend.constant(0.0); degree + 1];
    for seg in &spec.segments {
        let moments = match spec.weight {
            Weight::None => {
                let lo = seg.rho_lo.eval(backend, &env)?;
                let hi = seg.rho_hi.eval(backend, &env)?;
                let mut bad = None;
                let m = simpson_many(backend, &lo, &hi, panels, degree + 1, |s| {
                    let k = kernel_at(backend, &seg.kernel, &rv, s, &mut bad);
                    powers(backend, &backend.sub(s, &c), degree)
                        .iter()
                        .map(|p| backend.mul(&k, p))
                        .collect()
                });
                if let Some(e) = bad {
                    return Err(RowError::Unbound(e));
                }
                m?
            }
            Weight::Abel => {
                let mut bad = None;
                let m = abel_moments(backend, &rv, &c, degree, panels, |s| {
                    kernel_at(backend, &seg.kernel, &rv, s, &mut bad)
                });
                if let Some(e) = bad {
                    return Err(RowError::Unbound(e));
                }
                m?
            }
        };
        for (acc, x) in row.iter_mut().zip(&moments) {
            *acc = backend.add(acc, x);
        }
    }
    Ok(row)
}

fn kernel_at<B: Backend>(
    backend: &B,
    kernel: &Expr,
    r: &B::Value,
    s: &B::Value,
    bad: &mut Option<UnboundVariable>,
) -> B::Value {
    let env = Env::new().with(Var::R, r.clone()).with(Var::S, s.clone());
    kernel.eval(backend, &env).unwrap_or_else(|e| {
        *bad = Some(e);
        backend.constant(0.0)
    })
}

#[derive(Clone, Debug, Error, PartialEq)]
pub enum RowError {
    #[error(transparent)]
    Quadrature(#[from] QuadError),
    #[error(transparent)]
    Unbound(#[from] UnboundVariable),
}

/// Derivative in `r` of the unweighted row at `r = 0`, with `f'(0)`.
///
/// Every interval `[rho_{p-1}(0), rho_p(0)]` has collapsed to the point 0, so
/// by Leibniz' rule only the boundary terms survive:
/// `sum_p k_p(0, 0) (0 - c)^j (rho_p'(0) - rho_{p-1}'(0))`.
fn limit_row<B: Backend>(
    backend: &B,
    spec: &ProblemSpec,
    degree: usize,
) -> Result<(Vec<B::Value>, B::Value), UnboundVariable> {
    let dual = Dual::new(backend);
    let r = dual.variable(0.0);
    let env = Env::new().with(Var::R, r);
    let zero = backend.constant(0.0);
    let c = backend.constant(spec.c);
    let mut row = vec![zero.clone(); degree + 1];
    for seg in &spec.segments {
        let lo = seg.rho_lo.eval(&dual, &env)?;
        let hi = seg.rho_hi.eval(&dual, &env)?;
        let kenv = |s: &B::Value| Env::new().with(Var::R, zero.clone()).with(Var::S, s.clone());
        let k_hi = seg.kernel.eval(backend, &kenv(&hi.value))?;
        let k_lo = seg.kernel.eval(backend, &kenv(&lo.value))?;
        let p_hi = powers(backend, &backend.sub(&hi.value, &c), degree);
        let p_lo = powers(backend, &backend.sub(&lo.value, &c), degree);
        let w_hi = backend.mul(&k_hi, &hi.deriv);
        let w_lo = backend.mul(&k_lo, &lo.deriv);
        for j in 0..=degree {
            let term = backend.sub(&backend.mul(&w_hi, &p_hi[j]), &backend.mul(&w_lo, &p_lo[j]));
            row[j] = backend.add(&row[j], &term);
        }
    }
    let f = spec.rhs.eval(&dual, &env)?;
    Ok((row, f.deriv))
}

/// Builds `A c = F` for the given degree (`degree + 1` unknowns).
pub fn assemble_system<B: Backend>(
    backend: &B,
    spec: &ProblemSpec,
    degree: usize,
    quad: &QuadConfig,
    grid: GridMode,
) -> Result<LinearSystem<B::Value>, CollocationError> {
    quad.validate().map_err(|source| CollocationError::Quadrature { row: 0, col: 0, source })?;
    if quad.weight != spec.weight {
        return Err(CollocationError::WeightMismatch {
            quad: quad.weight,
            problem: spec.weight,
        });
    }
    let points = collocation_points(degree, spec.a, spec.b, grid)?;
    let mut a = Vec::with_capacity(points.len());
    let mut f = Vec::with_capacity(points.len());
    for (i, &r) in points.iter().enumerate() {
        if r == 0.0 && spec.weight == Weight::None && grid == GridMode::Limit {
            let (row, fi) = limit_row(backend, spec, degree)
                .map_err(|source| CollocationError::Unbound { row: i, source })?;
            a.push(row);
            f.push(fi);
            continue;
        }
        let row = row_at(backend, spec, r, degree, quad.panels).map_err(|e| match e {
            RowError::Quadrature(source) => {
                let col = match source {
                    QuadError::NonFinite { component, .. } => component,
                    _ => 0,
                };
                CollocationError::Quadrature { row: i, col, source }
            }
            RowError::Unbound(source) => CollocationError::Unbound { row: i, source },
        })?;
        let fi = spec
            .rhs
            .eval(backend, &Env::new().with(Var::R, backend.constant(r)))
            .map_err(|source| CollocationError::Unbound { row: i, source })?;
        if backend.is_unstable(&fi) {
            return Err(CollocationError::Rhs { row: i });
        }
        a.push(row);
        f.push(fi);
    }
    Ok(LinearSystem { points, a, f })
}

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum SolveError {
    #[error("singular or numerically unstable system: pivot {pivot} (row {row}) is zero")]
    Singular { pivot: usize, row: usize },
    #[error("system is not square")]
    NotSquare,
}

/// Gauss-Jordan elimination with partial pivoting on the largest |mean|.
#[allow(clippy::needless_range_loop)]
pub fn gauss_jordan_solve<B: Backend>(backend: &B, sys: &LinearSystem<B::Value>) -> Result<Vec<B::Value>, SolveError> {
    let n = sys.f.len();
    if sys.a.len() != n || sys.a.iter().any(|row| row.len() != n) {
        return Err(SolveError::NotSquare);
    }
    let mut a = sys.a.clone();
    let mut f = sys.f.clone();
    for k in 0..n {
        // reversed so that ties keep the topmost row
        let p = (k..n)
            .rev()
            .max_by(|&x, &y| {
                let (mx, my) = (backend.mean(&a[x][k]).abs(), backend.mean(&a[y][k]).abs());
                // NaN sorts first, so it is never chosen over a number
                mx.partial_cmp(&my).unwrap_or(if mx.is_nan() {
                    std::cmp::Ordering::Less
                } else {
                    std::cmp::Ordering::Greater
                })
            })
            .expect("non-empty range");
        if backend.is_zero(&a[p][k]) {
            return Err(SolveError::Singular { pivot: k, row: p });
        }
        a.swap(k, p);
        f.swap(k, p);

        let piv = a[k][k].clone();
        for j in k + 1..n {
            a[k][j] = backend.div(&a[k][j], &piv);
        }
        f[k] = backend.div(&f[k], &piv);
        a[k][k] = backend.constant(1.0);

        for i in 0..n {
            if i == k {
                continue;
            }
            let factor = a[i][k].clone();
            for j in k + 1..n {
                a[i][j] = backend.sub(&a[i][j], &backend.mul(&factor, &a[k][j]));
            }
            f[i] = backend.sub(&f[i], &backend.mul(&factor, &f[k]));
            a[i][k] = backend.constant(0.0);
        }
    }
    Ok(f)
}

/// Truncated Taylor expansion `sum_j c_j (s - c)^j`.
#[derive(Clone, Debug)]
pub struct TaylorSolution<V> {
    pub center: f64,
    /// `c_j = v^(j)(c) / j!`, lowest order first.
    pub coeffs: Vec<V>,
}

impl<V: Clone> TaylorSolution<V> {
    pub fn degree(&self) -> usize {
        self.coeffs.len().saturating_sub(1)
    }

    /// Horner evaluation at `s`.
    pub fn eval<B: Backend<Value = V>>(&self, backend: &B, s: &V) -> V {
        let x = backend.sub(s, &backend.constant(self.center));
        let mut it = self.coeffs.iter().rev();
        let Some(top) = it.next() else {
            return backend.constant(0.0);
        };
        it.fold(top.clone(), |acc, cj| backend.add(&backend.mul(&acc, &x), cj))
    }

    /// Derivatives `v^(j)(c) = j! c_j`.
    pub fn derivatives<B: Backend<Value = V>>(&self, backend: &B) -> Vec<V> {
        let mut fact = 1.0;
        self.coeffs
            .iter()
            .enumerate()
            .map(|(j, cj)| {
                if j > 1 {
                    fact *= j as f64;
                }
                backend.mul(cj, &backend.constant(fact))
            })
            .collect()
    }
}

/// Solves the degree-`degree` system and wraps the coefficients.
pub fn solve<B: Backend>(
    backend: &B,
    spec: &ProblemSpec,
    degree: usize,
    quad: &QuadConfig,
    grid: GridMode,
) -> Result<TaylorSolution<B::Value>, SolutionError> {
    let sys = assemble_system(backend, spec, degree, quad, grid)?;
    let coeffs = gauss_jordan_solve(backend, &sys)?;
    Ok(TaylorSolution { center: spec.c, coeffs })
}

#[derive(Clone, Debug, Error, PartialEq)]
pub enum SolutionError {
    #[error(transparent)]
    Assembly(#[from] CollocationError),
    #[error(transparent)]
    Solve(#[from] SolveError),
}

/// `v_n(s)`, with the problem's output transform applied when present.
pub fn evaluate_solution<B: Backend>(
    backend: &B,
    spec: &ProblemSpec,
    sol: &TaylorSolution<B::Value>,
    s: f64,
) -> Result<B::Value, UnboundVariable> {
    let w = sol.eval(backend, &backend.constant(s));
    match &spec.transform {
        Some(t) => t.eval(backend, &Env::new().with(Var::W, w)),
        None => Ok(w),
    }
}

/// Max-norm residual `|sum_p int k_p v_n - f|` of the inner (untransformed)
/// solution, in plain arithmetic, over the given points.
pub fn discrepancy(
    spec: &ProblemSpec,
    coeffs: &[f64],
    points: &[f64],
    panels: usize,
) -> Result<f64, RowError> {
    let degree = coeffs.len().saturating_sub(1);
    let mut worst = 0.0f64;
    for &r in points {
        let row = row_at(&Plain, spec, r, degree, panels)?;
        let lhs: f64 = row.iter().zip(coeffs).map(|(a, c)| a * c).sum();
        let f = eval_r(&spec.rhs, r)?;
        worst = worst.max((lhs - f).abs());
    }
    Ok(worst)
}

/// Midpoints between consecutive collocation points, where the residual is
/// not forced to vanish.
pub fn midpoints(degree: usize, a: f64, b: f64, grid: GridMode) -> Result<Vec<f64>, CollocationError> {
    let pts = collocation_points(degree, a, b, grid)?;
    Ok(pts.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect())
}
