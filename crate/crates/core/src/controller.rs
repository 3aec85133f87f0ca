//! The degree-raising loop and its stopping rules.
//!
//! Iterations are labelled by the number of Taylor coefficients, `n =
//! degree + 1`, and start at `n = 2` (degree one).

use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::backend::{Backend, ValueSummary};
use crate::collocation::{discrepancy, evaluate_solution, midpoints, solve, GridMode, ProblemSpec};
use crate::quadrature::DEFAULT_PANELS;
use crate::sa::common_digits;

pub const DEFAULT_MAX_N: usize = 25;
/// First iteration label (degree one).
pub const FIRST_N: usize = 2;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "rule", rename_all = "kebab-case")]
pub enum StoppingRule {
    /// Stop when `v_n - v_{n-1}` is an informatical zero.
    SaSuccessive,
    /// Stop when `|v(r*) - v_n(r*)| <= epsilon`; needs the exact solution.
    FpaAbsolute { epsilon: f64 },
    /// Stop when `|v_n - v_{n-1}| <= epsilon`.
    FpaCorrection { epsilon: f64 },
    /// Stop when the residual of the equation, sampled between collocation
    /// points, is `<= epsilon`.
    FpaDiscrepancy { epsilon: f64 },
}

impl StoppingRule {
    pub fn name(&self) -> &'static str {
        match self {
            StoppingRule::SaSuccessive => "sa",
            StoppingRule::FpaAbsolute { .. } => "fpa-abs",
            StoppingRule::FpaCorrection { .. } => "fpa-corr",
            StoppingRule::FpaDiscrepancy { .. } => "fpa-disc",
        }
    }

    pub fn epsilon(&self) -> Option<f64> {
        match *self {
            StoppingRule::SaSuccessive => None,
            StoppingRule::FpaAbsolute { epsilon }
            | StoppingRule::FpaCorrection { epsilon }
            | StoppingRule::FpaDiscrepancy { epsilon } => Some(epsilon),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunOptions {
    pub point: f64,
    pub rule: StoppingRule,
    pub max_n: usize,
    pub panels: usize,
    pub grid: GridMode,
}

impl RunOptions {
    pub fn new(spec: &ProblemSpec, rule: StoppingRule) -> Self {
        Self {
            point: spec.point,
            rule,
            max_n: DEFAULT_MAX_N,
            panels: DEFAULT_PANELS,
            grid: GridMode::default(),
        }
    }
}

#[derive(Clone, Debug, Error, PartialEq)]
pub enum RunError {
    #[error("point {point} must lie in ({a}, {b}]")]
    PointOutside { point: f64, a: f64, b: f64 },
    #[error("epsilon must be positive and finite, got {0}")]
    BadEpsilon(f64),
    #[error("the absolute-error rule needs an exact solution")]
    NoExact,
    #[error("the stochastic rule needs the stochastic backend")]
    NotStochastic,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IterationRecord {
    pub n: usize,
    pub value: ValueSummary,
    /// `|v_n - v_{n-1}|`; absent on the first iteration.
    pub diff: Option<ValueSummary>,
    /// `|v(r*) - v_n(r*)|` when the exact solution is known.
    pub err: Option<ValueSummary>,
    /// Residual norm, computed for the discrepancy rule only.
    pub residual: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum StopReason {
    RuleFired { rule: &'static str },
    MaxN,
    UnstableSystem { n: usize },
}

impl fmt::Display for StopReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StopReason::RuleFired { rule } => write!(f, "{rule} rule fired"),
            StopReason::MaxN => f.write_str("max_n reached"),
            StopReason::UnstableSystem { n } => write!(f, "unstable system at n = {n}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunReport {
    pub label: String,
    pub point: f64,
    pub rule: StoppingRule,
    pub grid: GridMode,
    pub records: Vec<IterationRecord>,
    pub optimal_n: Option<usize>,
    pub optimal_value: Option<ValueSummary>,
    pub stop_reason: StopReason,
    pub instability_log: Vec<String>,
}

impl RunReport {
    pub fn fired(&self) -> bool {
        matches!(self.stop_reason, StopReason::RuleFired { .. })
    }
}

/// Runs iterations `n = 2, 3, ...` until the rule fires, `n` reaches
/// `max_n`, or the system cannot be solved. The first iteration always runs.
pub fn run<B: Backend>(backend: &B, spec: &ProblemSpec, opts: &RunOptions) -> Result<RunReport, RunError> {
    let r = opts.point;
    if !(r > spec.a && r <= spec.b) {
        return Err(RunError::PointOutside { point: r, a: spec.a, b: spec.b });
    }
    if let Some(eps) = opts.rule.epsilon() {
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(RunError::BadEpsilon(eps));
        }
    }
    let exact = spec.exact_at(r);
    if matches!(opts.rule, StoppingRule::FpaAbsolute { .. }) && exact.is_none() {
        return Err(RunError::NoExact);
    }
    if opts.rule == StoppingRule::SaSuccessive && !backend.is_stochastic() {
        return Err(RunError::NotStochastic);
    }

    let quad = spec.quad_config(opts.panels);
    let exact_v = exact.map(|x| backend.constant(x));
    let mut records = Vec::new();
    let mut log = Vec::new();
    let mut prev: Option<B::Value> = None;
    let mut n = FIRST_N;
    let stop_reason = loop {
        let degree = n - 1;
        let sol = match solve(backend, spec, degree, &quad, opts.grid) {
            Ok(sol) => sol,
            Err(e) => {
                log.push(format!("n = {n}: {e}"));
                break StopReason::UnstableSystem { n };
            }
        };
        let v = match evaluate_solution(backend, spec, &sol, r) {
            Ok(v) => v,
            Err(e) => {
                log.push(format!("n = {n}: {e}"));
                break StopReason::UnstableSystem { n };
            }
        };
        let diff = prev.as_ref().map(|p| backend.abs(&backend.sub(&v, p)));
        let err = exact_v.as_ref().map(|x| backend.abs(&backend.sub(x, &v)));
        let residual = match opts.rule {
            StoppingRule::FpaDiscrepancy { .. } => {
                let coeffs: Vec<f64> = sol.coeffs.iter().map(|c| backend.mean(c)).collect();
                let pts = midpoints(degree, spec.a, spec.b, opts.grid).expect("grid was valid for solve");
                match discrepancy(spec, &coeffs, &pts, opts.panels) {
                    Ok(d) => Some(d),
                    Err(e) => {
                        log.push(format!("n = {n}: {e}"));
                        break StopReason::UnstableSystem { n };
                    }
                }
            }
            _ => None,
        };

        let fired = match opts.rule {
            StoppingRule::SaSuccessive => diff.as_ref().is_some_and(|d| backend.is_zero(d)),
            StoppingRule::FpaAbsolute { epsilon } => err.as_ref().is_some_and(|e| backend.mean(e) <= epsilon),
            StoppingRule::FpaCorrection { epsilon } => diff.as_ref().is_some_and(|d| backend.mean(d) <= epsilon),
            StoppingRule::FpaDiscrepancy { epsilon } => residual.is_some_and(|d| d <= epsilon),
        };
        records.push(IterationRecord {
            n,
            value: backend.summary(&v),
            diff: diff.as_ref().map(|d| backend.summary(d)),
            err: err.as_ref().map(|e| backend.summary(e)),
            residual,
        });
        if fired {
            break StopReason::RuleFired { rule: opts.rule.name() };
        }
        if n >= opts.max_n {
            break StopReason::MaxN;
        }
        prev = Some(v);
        n += 1;
    };

    log.extend(backend.instabilities().iter().map(|i| i.to_string()));
    let last = records.last();
    Ok(RunReport {
        label: spec.label.clone(),
        point: r,
        rule: opts.rule,
        grid: opts.grid,
        optimal_n: last.map(|rec| rec.n),
        optimal_value: last.map(|rec| rec.value.clone()),
        records,
        stop_reason,
        instability_log: log,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DigitAgreement {
    pub n: usize,
    /// Common digits of `v_n` and the exact value (negative clamped to 0).
    pub c_exact: f64,
    /// Common digits of `v_n` and `v_{n+1}` (negative clamped to 0).
    pub c_succ: f64,
    /// `|c_exact - c_succ|` with both capped at 15 digits.
    pub gap: f64,
}

/// Digit cap used when comparing infinite agreement counts.
pub const AGREEMENT_CAP: f64 = 15.0;

/// Compares, for each consecutive pair of records, the digits `v_n` shares
/// with the exact value against those it shares with `v_{n+1}`.
pub fn digit_agreement(report: &RunReport, exact_value: f64) -> Vec<DigitAgreement> {
    report
        .records
        .windows(2)
        .map(|w| {
            let (v, next) = (w[0].value.mean, w[1].value.mean);
            let c_exact = common_digits(v, exact_value).max(0.0);
            let c_succ = common_digits(v, next).max(0.0);
            DigitAgreement {
                n: w[0].n,
                c_exact,
                c_succ,
                gap: (c_exact.min(AGREEMENT_CAP) - c_succ.min(AGREEMENT_CAP)).abs(),
            }
        })
        .collect()
}
