//! Line-based problem files.
//!
//! ```text
//! # comment
//! label = my problem
//! interval = 0 3*pi/2
//! center = 0
//! point = 0.5
//! segment: rho_lo=0; rho_hi=sin(r/2); kernel=2
//! segment: rho_lo=sin(r/2); rho_hi=r; kernel=1 + r*s
//! rhs = ...
//! weight = abel
//! transform = sin(w)
//! exact = r^2
//! precision = 53
//! ```
//!
//! `interval` defaults to `0 1` and `center` to the left endpoint; `label`,
//! `point`, `rhs` and at least one `segment` are required.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use thiserror::Error;

use crate::collocation::{Field, ProblemSpec, Segment};
use crate::expr::{parse, Env, Expr, ParseError, VarSet};
use crate::quadrature::Weight;

#[derive(Debug, Error)]
pub enum LoadError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Line { line: usize, message: String },
    #[error("line {line}, column {column}: expected {expected}, found {found}")]
    Expr {
        line: usize,
        column: usize,
        expected: String,
        found: String,
    },
    #[error("missing key `{0}`")]
    Missing(&'static str),
}

impl LoadError {
    pub fn line(&self) -> Option<usize> {
        match self {
            LoadError::Line { line, .. } | LoadError::Expr { line, .. } => Some(*line),
            _ => None,
        }
    }
}

fn line_err(line: usize, message: impl Into<String>) -> LoadError {
    LoadError::Line {
        line,
        message: message.into(),
    }
}

/// `text` sits at byte `offset` of line `line`; columns are 1-based.
fn expr_at(text: &str, vars: VarSet, line: usize, offset: usize) -> Result<Expr, LoadError> {
    parse(text, vars).map_err(|ParseError { position, expected, found }| LoadError::Expr {
        line,
        column: offset + position + 1,
        expected,
        found,
    })
}

fn constant(text: &str, line: usize, offset: usize) -> Result<f64, LoadError> {
    let x = expr_at(text, VarSet::NONE, line, offset)?
        .eval_f64(&Env::new())
        .expect("no variables");
    if !x.is_finite() {
        return Err(line_err(line, format!("`{}` is not a finite number", text.trim())));
    }
    Ok(x)
}

/// Offset of `part` inside `whole`; `part` must be a subslice.
fn offset_in(whole: &str, part: &str) -> usize {
    part.as_ptr() as usize - whole.as_ptr() as usize
}

pub fn parse_problem(source: &str) -> Result<ProblemSpec, LoadError> {
    let mut seen: HashMap<&str, usize> = HashMap::new();
    let mut label = None;
    let mut interval = None;
    let mut center = None;
    let mut point = None;
    let mut rhs = None;
    let mut weight = Weight::None;
    let mut transform = None;
    let mut exact = None;
    let mut precision = None;
    let mut segments = Vec::new();
    let mut segment_lines = Vec::new();

    for (idx, raw) in source.lines().enumerate() {
        let line = idx + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }

        if let Some(rest) = trimmed.strip_prefix("segment:") {
            let mut parts: HashMap<&str, (&str, usize)> = HashMap::new();
            for item in rest.split(';') {
                if item.trim().is_empty() {
                    continue;
                }
                let (k, v) = item
                    .split_once('=')
                    .ok_or_else(|| line_err(line, format!("expected `name=expr` in segment, found `{}`", item.trim())))?;
                let k = k.trim();
                if !matches!(k, "rho_lo" | "rho_hi" | "kernel") {
                    return Err(line_err(line, format!("unknown segment part `{k}`")));
                }
                if parts.insert(k, (v, offset_in(raw, v))).is_some() {
                    return Err(line_err(line, format!("duplicate segment part `{k}`")));
                }
            }
            let mut get = |k: &'static str, vars| -> Result<Expr, LoadError> {
                let (v, off) = parts
                    .remove(k)
                    .ok_or_else(|| line_err(line, format!("segment is missing `{k}`")))?;
                expr_at(v, vars, line, off)
            };
            segments.push(Segment {
                rho_lo: get("rho_lo", VarSet::R)?,
                rho_hi: get("rho_hi", VarSet::R)?,
                kernel: get("kernel", VarSet::KERNEL)?,
            });
            segment_lines.push(line);
            continue;
        }

        let (key, value) = trimmed
            .split_once('=')
            .ok_or_else(|| line_err(line, "expected `key = value` or `segment: ...`"))?;
        let key = key.trim();
        let off = offset_in(raw, value);
        let static_key: &'static str = match key {
            "label" => "label",
            "interval" => "interval",
            "center" => "center",
            "point" => "point",
            "rhs" => "rhs",
            "weight" => "weight",
            "transform" => "transform",
            "exact" => "exact",
            "precision" => "precision",
            _ => return Err(line_err(line, format!("unknown key `{key}`"))),
        };
        if let Some(first) = seen.insert(static_key, line) {
            return Err(line_err(line, format!("duplicate key `{key}` (first on line {first})")));
        }
        match static_key {
            "label" => label = Some(value.trim().to_string()),
            "interval" => {
                let (lo, hi) = split_interval(value)
                    .ok_or_else(|| line_err(line, "interval needs two values `a b`"))?;
                interval = Some((
                    constant(lo, line, offset_in(raw, lo))?,
                    constant(hi, line, offset_in(raw, hi))?,
                ));
            }
            "center" => center = Some(constant(value, line, off)?),
            "point" => point = Some(constant(value, line, off)?),
            "rhs" => rhs = Some(expr_at(value, VarSet::R, line, off)?),
            "weight" => {
                weight = match value.trim() {
                    "abel" => Weight::Abel,
                    "none" => Weight::None,
                    other => return Err(line_err(line, format!("unknown weight `{other}` (expected abel or none)"))),
                }
            }
            "transform" => transform = Some(expr_at(value, VarSet::TRANSFORM, line, off)?),
            "exact" => exact = Some(expr_at(value, VarSet::R, line, off)?),
            "precision" => {
                precision = Some(match value.trim() {
                    "24" => 24,
                    "53" => 53,
                    other => return Err(line_err(line, format!("precision must be 24 or 53, found `{other}`"))),
                })
            }
            _ => unreachable!(),
        }
    }

    let label = label.ok_or(LoadError::Missing("label"))?;
    let point = point.ok_or(LoadError::Missing("point"))?;
    let rhs = rhs.ok_or(LoadError::Missing("rhs"))?;
    if segments.is_empty() {
        return Err(LoadError::Missing("segment"));
    }
    let (a, b) = interval.unwrap_or((0.0, 1.0));
    let spec = ProblemSpec {
        label,
        a,
        b,
        c: center.unwrap_or(a),
        point,
        segments,
        rhs,
        weight,
        transform,
        exact,
        precision_bits: precision,
    };

    spec.validate().map_err(|e| {
        let line = match e.field {
            Field::Interval => seen.get("interval").copied(),
            Field::Center => seen.get("center").copied(),
            Field::Point => seen.get("point").copied(),
            Field::Segment(p) => segment_lines.get(p).copied(),
            Field::Rhs => seen.get("rhs").copied(),
            Field::Weight => seen.get("weight").copied(),
            Field::Transform => seen.get("transform").copied(),
            Field::Exact => seen.get("exact").copied(),
            Field::Precision => seen.get("precision").copied(),
        };
        match line {
            Some(line) => line_err(line, e.message),
            // defaulted interval: blame the first line that depends on it
            None => line_err(seen.values().copied().min().unwrap_or(1), e.to_string()),
        }
    })?;
    Ok(spec)
}

/// Splits `a b` at the first whitespace where both sides are valid constants.
fn split_interval(v: &str) -> Option<(&str, &str)> {
    v.char_indices()
        .filter(|(_, c)| c.is_whitespace())
        .map(|(i, _)| v.split_at(i))
        .find(|(lo, hi)| {
            !lo.trim().is_empty()
                && !hi.trim().is_empty()
                && parse(lo, VarSet::NONE).is_ok()
                && parse(hi, VarSet::NONE).is_ok()
        })
}

pub fn load_problem(path: &Path) -> Result<ProblemSpec, LoadError> {
    let text = std::fs::read_to_string(path).map_err(|source| LoadError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_problem(&text)
}

/// Renders `spec` in the problem-file format; [`parse_problem`] reads it back
/// to an equal spec.
pub fn serialize_problem(spec: &ProblemSpec) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "label = {}", spec.label);
    let _ = writeln!(out, "interval = {:?} {:?}", spec.a, spec.b);
    let _ = writeln!(out, "center = {:?}", spec.c);
    let _ = writeln!(out, "point = {:?}", spec.point);
    for s in &spec.segments {
        let _ = writeln!(out, "segment: rho_lo={}; rho_hi={}; kernel={}", s.rho_lo, s.rho_hi, s.kernel);
    }
    let _ = writeln!(out, "rhs = {}", spec.rhs);
    if spec.weight == Weight::Abel {
        let _ = writeln!(out, "weight = abel");
    }
    if let Some(t) = &spec.transform {
        let _ = writeln!(out, "transform = {t}");
    }
    if let Some(e) = &spec.exact {
        let _ = writeln!(out, "exact = {e}");
    }
    if let Some(p) = spec.precision_bits {
        let _ = writeln!(out, "precision = {p}");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::examples::{builtin_example, EXAMPLE_IDS};

    const SIMPLE: &str = "\
# a tiny problem
label = identity
point = 0.5
segment: rho_lo=0; rho_hi=r; kernel=1
rhs = r^2/2
exact = r
";

    #[test]
    fn loads_minimal_file() {
        let p = parse_problem(SIMPLE).unwrap();
        assert_eq!((p.a, p.b, p.c, p.point), (0.0, 1.0, 0.0, 0.5));
        assert_eq!(p.label, "identity");
        assert_eq!(p.segments.len(), 1);
    }

    #[test]
    fn builtins_round_trip() {
        for id in EXAMPLE_IDS {
            let p = builtin_example(id).unwrap();
            let text = serialize_problem(&p);
            let q = parse_problem(&text).unwrap_or_else(|e| panic!("example {id}: {e}\n{text}"));
            assert_eq!(p, q, "example {id}");
        }
    }

    #[test]
    fn rhs_must_vanish() {
        let text = SIMPLE.replace("rhs = r^2/2", "rhs = 1");
        let err = parse_problem(&text).unwrap_err();
        assert_eq!(err.line(), Some(5));
        assert!(err.to_string().contains("rhs must vanish at r=0"), "{err}");
    }

    #[test]
    fn missing_point_named() {
        let text = SIMPLE.replace("point = 0.5\n", "");
        let err = parse_problem(&text).unwrap_err();
        assert_eq!(err.to_string(), "missing key `point`");
    }

    #[test]
    fn expression_errors_carry_column() {
        let text = SIMPLE.replace("rhs = r^2/2", "rhs = r^2/(2");
        match parse_problem(&text).unwrap_err() {
            LoadError::Expr { line, column, .. } => {
                assert_eq!(line, 5);
                assert_eq!(column, 13);
            }
            e => panic!("{e}"),
        }
        let text = SIMPLE.replace("kernel=1", "kernel=1 + w");
        assert_eq!(parse_problem(&text).unwrap_err().line(), Some(4));
    }

    #[test]
    fn interval_expressions() {
        let text = SIMPLE.replace("point", "interval = 0 3*pi/2\npoint");
        let p = parse_problem(&text).unwrap();
        assert_eq!(p.b, 3.0 * std::f64::consts::PI / 2.0);
        let text = SIMPLE.replace("point", "interval = (1 - 1) 2 * 1\npoint");
        let p = parse_problem(&text).unwrap();
        assert_eq!((p.a, p.b), (0.0, 2.0));
        let text = SIMPLE.replace("point", "interval = 0\npoint");
        assert_eq!(parse_problem(&text).unwrap_err().line(), Some(3));
    }

    #[test]
    fn rejects_unknown_and_duplicate_keys() {
        let text = format!("{SIMPLE}colour = red\n");
        assert!(parse_problem(&text).unwrap_err().to_string().contains("unknown key"));
        let text = format!("{SIMPLE}point = 0.2\n");
        assert!(parse_problem(&text).unwrap_err().to_string().contains("duplicate key"));
        let text = SIMPLE.replace("kernel=1", "kernel=1; kernel=2");
        assert!(parse_problem(&text).is_err());
    }
}
