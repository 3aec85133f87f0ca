//! The five built-in test problems.
//!
//! Each carries the working precision its stochastic runs were published
//! in: single for examples 1, 4 and 5, double for 2 and 3.

use thiserror::Error;

use crate::collocation::{ProblemSpec, Segment};
use crate::expr::{parse, VarSet};
use crate::quadrature::Weight;

pub const EXAMPLE_IDS: [u32; 5] = [1, 2, 3, 4, 5];

#[derive(Clone, Copy, Debug, Error, PartialEq, Eq)]
#[error("unknown example {0} (expected 1..=5)")]
pub struct UnknownExample(pub u32);

struct Raw {
    label: &'static str,
    interval: (f64, f64),
    point: f64,
    segments: &'static [(&'static str, &'static str, &'static str)],
    rhs: &'static str,
    weight: Weight,
    transform: Option<&'static str>,
    exact: &'static str,
    precision_bits: u32,
}

const EXAMPLE_1: Raw = Raw {
    label: "example 1: four discontinuous kernel pieces",
    interval: (0.0, 2.0),
    point: 0.2,
    segments: &[
        ("0", "r/8", "1 + r + s"),
        ("r/8", "r/2", "2 + r*s"),
        ("r/2", "3*r/4", "r + s - 1"),
        ("3*r/4", "r", "-4"),
    ],
    rhs: "(1/128)*(-4 - (1/8)*(16*r + 69*r^2 + 15*r^3) - exp(r/4)*(r^2 - 13*r + 12) \
          + exp(r)*(4*r^2 - 16*r + 28) + exp(3*r/2)*(14*r + 20) - 32*exp(2*r))",
    weight: Weight::None,
    transform: None,
    exact: "(exp(2*r) - 1)/8",
    precision_bits: 24,
};

const EXAMPLE_2: Raw = Raw {
    label: "example 2: constant kernels on trigonometric curves",
    interval: (0.0, 3.0 * std::f64::consts::FRAC_PI_2),
    point: 0.5,
    segments: &[
        ("0", "sin(r/2)", "2"),
        ("sin(r/2)", "2*sin(r/3)", "-1"),
        ("2*sin(r/3)", "r", "1"),
    ],
    rhs: "r^3/3 + sin(r/2)^3 - (16/3)*sin(r/3)^3",
    weight: Weight::None,
    transform: None,
    exact: "r^2",
    precision_bits: 53,
};

const EXAMPLE_3: Raw = Raw {
    label: "example 3: three pieces, cubic solution",
    interval: (0.0, 2.0),
    point: 0.7,
    segments: &[
        ("0", "r/4", "1 + r + s"),
        ("r/4", "r/2", "2 + r*s"),
        ("r/2", "r", "1 + r + s"),
    ],
    rhs: "31*r^6/40960 + 1099*r^5/20480 + 271*r^4/8192",
    weight: Weight::None,
    transform: None,
    exact: "r^3/8",
    precision_bits: 53,
};

const EXAMPLE_4: Raw = Raw {
    label: "example 4: linear Abel equation",
    interval: (0.0, 1.0),
    point: 0.1,
    segments: &[("0", "r", "1")],
    rhs: "(2/3)*pi*r^3",
    weight: Weight::Abel,
    transform: None,
    exact: "pi*r^3",
    precision_bits: 24,
};

const EXAMPLE_5: Raw = Raw {
    label: "example 5: nonlinear Abel equation, solved for asin(v)",
    interval: (0.0, 1.0),
    point: 0.4,
    segments: &[("0", "r", "1")],
    rhs: "pi + r",
    weight: Weight::Abel,
    transform: Some("sin(w)"),
    exact: "sin(r + 2)",
    precision_bits: 24,
};

fn build(raw: &Raw) -> ProblemSpec {
    let p = |text: &str, vars| parse(text, vars).expect("built-in expression parses");
    ProblemSpec {
        label: raw.label.to_string(),
        a: raw.interval.0,
        b: raw.interval.1,
        c: raw.interval.0,
        point: raw.point,
        segments: raw
            .segments
            .iter()
            .map(|(lo, hi, k)| Segment {
                rho_lo: p(lo, VarSet::R),
                rho_hi: p(hi, VarSet::R),
                kernel: p(k, VarSet::KERNEL),
            })
            .collect(),
        rhs: p(raw.rhs, VarSet::R),
        weight: raw.weight,
        transform: raw.transform.map(|t| p(t, VarSet::TRANSFORM)),
        exact: Some(p(raw.exact, VarSet::R)),
        precision_bits: Some(raw.precision_bits),
    }
}

pub fn builtin_example(id: u32) -> Result<ProblemSpec, UnknownExample> {
    let raw = match id {
        1 => &EXAMPLE_1,
        2 => &EXAMPLE_2,
        3 => &EXAMPLE_3,
        4 => &EXAMPLE_4,
        5 => &EXAMPLE_5,
        _ => return Err(UnknownExample(id)),
    };
    Ok(build(raw))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_validate() {
        for id in EXAMPLE_IDS {
            let p = builtin_example(id).unwrap();
            p.validate().unwrap_or_else(|e| panic!("example {id}: {e}"));
        }
        assert_eq!(builtin_example(6), Err(UnknownExample(6)));
        assert_eq!(builtin_example(0), Err(UnknownExample(0)));
    }

    #[test]
    fn exact_values() {
        assert_eq!(builtin_example(2).unwrap().exact_at(0.5), Some(0.25));
        let v = builtin_example(4).unwrap().exact_at(0.1).unwrap();
        assert!((v - 0.0031415926535897933).abs() < 1e-18);
    }
}
