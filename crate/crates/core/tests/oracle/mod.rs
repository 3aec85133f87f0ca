//! Independent reference implementations used by the integration tests.
#![allow(dead_code)]

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub struct Rng(ChaCha8Rng);

impl Rng {
    pub fn new(seed: u64) -> Self {
        Rng(ChaCha8Rng::seed_from_u64(seed))
    }

    /// Uniform in [0, 1).
    pub fn unit(&mut self) -> f64 {
        (self.0.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    pub fn range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.unit()
    }

    pub fn below(&mut self, n: usize) -> usize {
        (self.0.next_u64() % n as u64) as usize
    }
}

/// Determinant by cofactor expansion along the first row.
pub fn det(m: &[Vec<f64>]) -> f64 {
    let n = m.len();
    if n == 1 {
        return m[0][0];
    }
    let mut total = 0.0;
    for col in 0..n {
        let minor: Vec<Vec<f64>> = m[1..]
            .iter()
            .map(|row| row.iter().enumerate().filter(|&(j, _)| j != col).map(|(_, &x)| x).collect())
            .collect();
        let sign = if col % 2 == 0 { 1.0 } else { -1.0 };
        total += sign * m[0][col] * det(&minor);
    }
    total
}

/// Cramer's rule.
pub fn cramer(a: &[Vec<f64>], f: &[f64]) -> Vec<f64> {
    let d = det(a);
    (0..f.len())
        .map(|k| {
            let replaced: Vec<Vec<f64>> = a
                .iter()
                .zip(f)
                .map(|(row, &fi)| {
                    let mut row = row.clone();
                    row[k] = fi;
                    row
                })
                .collect();
            det(&replaced) / d
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
    Neg,
    LParen,
    RParen,
    Comma,
}

fn tokenize(s: &str) -> Vec<Tok> {
    let chars: Vec<char> = s.chars().collect();
    let mut out: Vec<Tok> = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            let text: String = chars[start..i].iter().collect();
            out.push(Tok::Num(text.parse().unwrap()));
        } else if c.is_ascii_alphabetic() {
            let start = i;
            while i < chars.len() && chars[i].is_ascii_alphanumeric() {
                i += 1;
            }
            out.push(Tok::Ident(chars[start..i].iter().collect()));
        } else {
            let unary_position = matches!(out.last(), None | Some(Tok::Op(_) | Tok::Neg | Tok::LParen | Tok::Comma));
            out.push(match c {
                '(' => Tok::LParen,
                ')' => Tok::RParen,
                ',' => Tok::Comma,
                '-' if unary_position => Tok::Neg,
                '+' | '-' | '*' | '/' | '^' => Tok::Op(c),
                _ => panic!("oracle cannot tokenize {c:?}"),
            });
            i += 1;
        }
    }
    out
}

fn precedence(t: &Tok) -> u8 {
    match t {
        Tok::Op('+' | '-') => 1,
        Tok::Op('*' | '/') => 2,
        Tok::Neg => 3,
        Tok::Op('^') => 4,
        _ => 0,
    }
}

fn is_function(name: &str) -> bool {
    matches!(name, "sin" | "cos" | "exp" | "sqrt" | "atan" | "abs" | "log" | "pow")
}

/// Evaluates an infix string in `r` with Dijkstra's shunting-yard algorithm.
pub fn shunting_yard(s: &str, r: f64) -> f64 {
    let mut output: Vec<Tok> = Vec::new();
    let mut stack: Vec<Tok> = Vec::new();
    for tok in tokenize(s) {
        match tok {
            Tok::Num(_) => output.push(tok),
            Tok::Ident(ref name) if is_function(name) => stack.push(tok),
            Tok::Ident(_) => output.push(tok),
            Tok::Neg | Tok::LParen => stack.push(tok),
            Tok::Op(c) => {
                let p = precedence(&tok);
                while let Some(top) = stack.last() {
                    let q = precedence(top);
                    if q == 0 || q < p || (q == p && c == '^') {
                        break;
                    }
                    output.push(stack.pop().unwrap());
                }
                stack.push(tok);
            }
            Tok::Comma => {
                while stack.last() != Some(&Tok::LParen) {
                    output.push(stack.pop().expect("comma inside a call"));
                }
            }
            Tok::RParen => {
                while let Some(top) = stack.pop() {
                    if top == Tok::LParen {
                        break;
                    }
                    output.push(top);
                }
                if let Some(Tok::Ident(_)) = stack.last() {
                    output.push(stack.pop().unwrap());
                }
            }
        }
    }
    while let Some(top) = stack.pop() {
        output.push(top);
    }

    let mut values: Vec<f64> = Vec::new();
    for tok in output {
        match tok {
            Tok::Num(x) => values.push(x),
            Tok::Ident(name) => {
                let v = match name.as_str() {
                    "r" => r,
                    "pi" => std::f64::consts::PI,
                    "pow" => {
                        let e = values.pop().unwrap();
                        let b = values.pop().unwrap();
                        b.powf(e)
                    }
                    f => {
                        let x = values.pop().unwrap();
                        match f {
                            "sin" => x.sin(),
                            "cos" => x.cos(),
                            "exp" => x.exp(),
                            "sqrt" => x.sqrt(),
                            "atan" => x.atan(),
                            "abs" => x.abs(),
                            "log" => x.ln(),
                            _ => panic!("unknown identifier {f}"),
                        }
                    }
                };
                values.push(v);
            }
            Tok::Neg => {
                let x = values.pop().unwrap();
                values.push(-x);
            }
            Tok::Op(c) => {
                let b = values.pop().unwrap();
                let a = values.pop().unwrap();
                values.push(match c {
                    '+' => a + b,
                    '-' => a - b,
                    '*' => a * b,
                    '/' => a / b,
                    '^' => a.powf(b),
                    _ => unreachable!(),
                });
            }
            _ => unreachable!("parentheses never reach the output queue"),
        }
    }
    assert_eq!(values.len(), 1, "malformed expression {s}");
    values[0]
}

fn atom(rng: &mut Rng, depth: u32, out: &mut String) {
    let pick = if depth == 0 { rng.below(3) } else { rng.below(6) };
    match pick {
        0 => out.push_str(&format!("{}", (rng.below(300) + 1) as f64 / 100.0)),
        1 => out.push('r'),
        2 => out.push_str(if rng.below(2) == 0 { "pi" } else { "r" }),
        3 => {
            out.push('(');
            expression(rng, depth - 1, out);
            out.push(')');
        }
        4 => {
            const F: [&str; 7] = ["sin", "cos", "exp", "sqrt", "atan", "abs", "log"];
            out.push_str(F[rng.below(F.len())]);
            out.push('(');
            expression(rng, depth - 1, out);
            out.push(')');
        }
        _ => {
            out.push_str("pow(");
            expression(rng, depth - 1, out);
            out.push_str(", ");
            out.push_str(["2", "0.5", "3"][rng.below(3)]);
            out.push(')');
        }
    }
}

fn operand(rng: &mut Rng, depth: u32, out: &mut String) {
    if rng.below(5) == 0 {
        out.push('-');
    }
    atom(rng, depth, out);
    if rng.below(4) == 0 {
        out.push('^');
        if rng.below(3) == 0 {
            out.push('-');
        }
        out.push_str(["2", "3", "0.5", "1.5"][rng.below(4)]);
    }
}

fn expression(rng: &mut Rng, depth: u32, out: &mut String) {
    operand(rng, depth, out);
    for _ in 0..rng.below(4) {
        out.push_str([" + ", " - ", "*", " / "][rng.below(4)]);
        operand(rng, depth, out);
    }
}

/// A random infix expression in `r` that exercises precedence, unary minus,
/// right-associative powers and function calls.
pub fn random_expression(rng: &mut Rng) -> String {
    let mut s = String::new();
    expression(rng, 3, &mut s);
    s
}

/// Agreement up to a few ulps of accumulated rounding; two NaNs agree.
pub fn close(a: f64, b: f64, rel: f64) -> bool {
    if a.is_nan() || b.is_nan() {
        return a.is_nan() && b.is_nan();
    }
    if a.is_infinite() || b.is_infinite() {
        return a == b;
    }
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(1.0)
}
