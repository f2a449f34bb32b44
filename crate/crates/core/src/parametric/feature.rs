use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A basis function `g(x)` of a model that is linear in its coefficients.
///
/// Trigonometric frequencies are multiples of `pi`: `Sin(2.0)` is `sin(2 pi x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Feature {
    Const,
    Power(u32),
    Sin(f64),
    Cos(f64),
    /// `exp(-x) g(x)`
    ExpDamped(Box<Feature>),
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

impl Feature {
    pub fn eval(&self, x: f64) -> f64 {
        self.derivative(x, 0)
    }

    /// `d^order g / dx^order` at `x`.
    pub fn derivative(&self, x: f64, order: usize) -> f64 {
        match self {
            Feature::Const => {
                if order == 0 {
                    1.0
                } else {
                    0.0
                }
            }
            Feature::Power(q) => {
                let q = *q as usize;
                if order > q {
                    0.0
                } else {
                    let falling: f64 = ((q - order + 1)..=q).map(|k| k as f64).product();
                    falling * x.powi((q - order) as i32)
                }
            }
            Feature::Sin(a) => {
                let w = a * PI;
                w.powi(order as i32) * (w * x + order as f64 * PI / 2.0).sin()
            }
            Feature::Cos(a) => {
                let w = a * PI;
                w.powi(order as i32) * (w * x + order as f64 * PI / 2.0).cos()
            }
            Feature::ExpDamped(inner) => {
                let e = (-x).exp();
                (0..=order)
                    .map(|i| {
                        let sign = if (order - i) % 2 == 0 { 1.0 } else { -1.0 };
                        binomial(order, i) * sign * inner.derivative(x, i)
                    })
                    .sum::<f64>()
                    * e
            }
        }
    }
}

impl fmt::Display for Feature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Feature::Const => write!(f, "1"),
            Feature::Power(1) => write!(f, "x"),
            Feature::Power(q) => write!(f, "x^{q}"),
            Feature::Sin(a) => write!(f, "sin({a})"),
            Feature::Cos(a) => write!(f, "cos({a})"),
            Feature::ExpDamped(g) => write!(f, "expdamp({g})"),
        }
    }
}

/// Parse a `+`-separated feature list.
///
/// Terms: `1`, `x`, `x^q`, `poly(q)` (expands to `1, x, ..., x^q`),
/// `sin(a)`, `cos(a)` (meaning `sin(a pi x)`, `cos(a pi x)`), and
/// `expdamp(<list>)` which multiplies every inner feature by `exp(-x)`.
pub fn parse_features(expr: &str) -> Result<Vec<Feature>> {
    let chars: Vec<char> = expr.chars().filter(|c| !c.is_whitespace()).collect();
    let mut parser = Parser { s: &chars, pos: 0, src: expr };
    let out = parser.list()?;
    if parser.pos != chars.len() {
        return Err(parser.fail("trailing input"));
    }
    if out.is_empty() {
        return Err(parser.fail("no features"));
    }
    Ok(out)
}

struct Parser<'a> {
    s: &'a [char],
    pos: usize,
    src: &'a str,
}

impl Parser<'_> {
    fn fail(&self, what: &str) -> Error {
        Error::InvalidInput(format!(
            "cannot parse model expression `{}` at offset {}: {what}",
            self.src, self.pos
        ))
    }

    fn peek(&self) -> Option<char> {
        self.s.get(self.pos).copied()
    }

    fn eat(&mut self, word: &str) -> bool {
        let w: Vec<char> = word.chars().collect();
        if self.s[self.pos..].starts_with(&w) {
            self.pos += w.len();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: char) -> Result<()> {
        if self.peek() == Some(c) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.fail(&format!("expected `{c}`")))
        }
    }

    fn number(&mut self) -> Result<f64> {
        let start = self.pos;
        while let Some(c) = self.peek() {
            if c.is_ascii_digit() || c == '.' || c == '-' || c == 'e' || c == 'E' {
                self.pos += 1;
            } else {
                break;
            }
        }
        let text: String = self.s[start..self.pos].iter().collect();
        text.parse::<f64>()
            .map_err(|_| self.fail(&format!("bad number `{text}`")))
    }

    fn integer(&mut self) -> Result<u32> {
        let v = self.number()?;
        if v < 0.0 || v.fract() != 0.0 || v > 64.0 {
            return Err(self.fail("expected a small non-negative integer"));
        }
        Ok(v as u32)
    }

    fn list(&mut self) -> Result<Vec<Feature>> {
        let mut out = self.term()?;
        while self.peek() == Some('+') {
            self.pos += 1;
            out.extend(self.term()?);
        }
        Ok(out)
    }

    fn term(&mut self) -> Result<Vec<Feature>> {
        if self.eat("poly(") {
            let q = self.integer()?;
            self.expect(')')?;
            let mut v = vec![Feature::Const];
            v.extend((1..=q).map(Feature::Power));
            return Ok(v);
        }
        if self.eat("expdamp(") {
            let inner = self.list()?;
            self.expect(')')?;
            return Ok(inner
                .into_iter()
                .map(|g| Feature::ExpDamped(Box::new(g)))
                .collect());
        }
        for (word, ctor) in [("sin(", Feature::Sin as fn(f64) -> Feature), ("cos(", Feature::Cos)] {
            if self.eat(word) {
                let a = self.number()?;
                self.expect(')')?;
                return Ok(vec![ctor(a)]);
            }
        }
        if self.eat("x^") {
            let q = self.integer()?;
            return Ok(vec![if q == 0 { Feature::Const } else { Feature::Power(q) }]);
        }
        if self.eat("x") {
            return Ok(vec![Feature::Power(1)]);
        }
        if self.eat("1") {
            return Ok(vec![Feature::Const]);
        }
        Err(self.fail("unknown term"))
    }
}
