//! Source and data export for symmetric central series.
//!
//! The emitted expression is the nested form
//!
//! ```text
//! v*(a0 +
//!     w*(a1 +
//!     w*(a2 +
//!     w*a3)))
//! ```
//!
//! with `v = 2u − 1` and `w = v²`, one coefficient per line. A single
//! coefficient is emitted as `v*a0`. The C wrapper is
//!
//! ```text
//! /* <dist>; terms: <N>; digits: <digits> */
//! double charquant_quantile(double u)
//! {
//!     const double v = 2.0*u - 1.0;
//!     const double w = v*v;
//!     return v*(a0 +
//!         w*(a1 +
//!         w*a2));
//! }
//! ```
//!
//! Literals carry `digits` significant digits. Up to 17 digits the shortest
//! decimal that reads back to the same double is used when it is shorter;
//! beyond 17 digits the extra precision of the build is printed.

use crate::charfns::DistSpec;
use crate::dd::DoubleDouble;
use crate::error::{Error, Result};
use crate::series::{series_order, CentralSeries};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

pub const DEFAULT_DIGITS: usize = 17;
/// Double-double carries about 32 significant digits.
pub const MAX_DIGITS: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Lang {
    C,
    GenericExpression,
    JsonCoeffs,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CodeMetadata {
    pub terms: usize,
    pub digits: usize,
    pub dist: Option<DistSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratedCode {
    pub lang: Lang,
    pub text: String,
    pub metadata: CodeMetadata,
}

/// Decimal literal for `a` with at most `digits` significant digits.
pub fn format_literal(a: DoubleDouble, digits: usize) -> String {
    if digits > 17 {
        return a.to_decimal(digits);
    }
    let x = a.to_f64();
    let shortest = format!("{x:e}");
    let mantissa = shortest.split('e').next().unwrap_or("");
    let sig = mantissa.chars().filter(|c| c.is_ascii_digit()).count();
    DoubleDouble::new(x).to_decimal(sig.min(digits))
}

fn check_digits(digits: usize) -> Result<()> {
    if (1..=MAX_DIGITS).contains(&digits) {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "digits must lie in 1..={MAX_DIGITS}, got {digits}"
        )))
    }
}

fn horner_text(cs: &CentralSeries, digits: usize, indent: &str) -> Result<String> {
    check_digits(digits)?;
    let a = cs.horner_coeffs_dd()?;
    let lits: Vec<String> = a.iter().map(|&c| format_literal(c, digits)).collect();
    let n = lits.len();
    if n == 1 {
        return Ok(format!("v*{}", lits[0]));
    }
    let mut s = format!("v*({} +\n", lits[0]);
    for lit in &lits[1..n - 1] {
        s.push_str(&format!("{indent}w*({lit} +\n"));
    }
    s.push_str(&format!("{indent}w*{}", lits[n - 1]));
    s.push_str(&")".repeat(n - 1));
    Ok(s)
}

fn metadata(cs: &CentralSeries, digits: usize) -> CodeMetadata {
    CodeMetadata {
        terms: cs.nterms,
        digits,
        dist: cs.dist.clone(),
    }
}

fn describe(cs: &CentralSeries) -> String {
    cs.dist
        .as_ref()
        .map_or_else(|| "custom law".to_string(), |d| d.to_json())
}

/// Bare nested expression in `v` and `w`.
pub fn emit_horner_expression(cs: &CentralSeries, digits: usize) -> Result<GeneratedCode> {
    Ok(GeneratedCode {
        lang: Lang::GenericExpression,
        text: horner_text(cs, digits, "    ")? + "\n",
        metadata: metadata(cs, digits),
    })
}

/// Freestanding C function `double charquant_quantile(double u)`.
pub fn emit_horner_c(cs: &CentralSeries, digits: usize) -> Result<GeneratedCode> {
    let expr = horner_text(cs, digits, "        ")?;
    let text = format!(
        "/* {}; terms: {}; digits: {} */\n\
         double charquant_quantile(double u)\n\
         {{\n    \
         const double v = 2.0*u - 1.0;\n    \
         const double w = v*v;\n    \
         return {};\n\
         }}\n",
        describe(cs).replace("*/", "* /"),
        cs.nterms,
        digits,
        expr
    );
    Ok(GeneratedCode {
        lang: Lang::C,
        text,
        metadata: metadata(cs, digits),
    })
}

/// Series coefficients as JSON (`u0`, `wdash`, `qcoeffs`, `symmetric`, `dist`, …).
pub fn emit_coeff_json(cs: &CentralSeries) -> GeneratedCode {
    GeneratedCode {
        lang: Lang::JsonCoeffs,
        text: serde_json::to_string_pretty(cs).expect("series serializes") + "\n",
        metadata: metadata(cs, DEFAULT_DIGITS),
    }
}

/// Read coefficients written by [`emit_coeff_json`].
pub fn load_coeff_json(text: &str) -> Result<CentralSeries> {
    let cs: CentralSeries = serde_json::from_str(text)?;
    let want = series_order(cs.symmetric, cs.nterms);
    if cs.qcoeffs.len() != want {
        return Err(Error::Parse(format!(
            "expected {want} coefficients for {} terms, found {}",
            cs.nterms,
            cs.qcoeffs.len()
        )));
    }
    if !cs.qcoeffs_lo.is_empty() && cs.qcoeffs_lo.len() != want {
        return Err(Error::Parse("qcoeffs_lo length does not match qcoeffs".into()));
    }
    if !(cs.u0 >= 0.0 && cs.u0 <= 1.0) || (cs.symmetric && cs.u0 != 0.5) {
        return Err(Error::Parse(format!("u0 = {} is not a valid anchor", cs.u0)));
    }
    if cs.qcoeffs.iter().any(|q| !q.is_finite()) {
        return Err(Error::Parse("non-finite coefficient".into()));
    }
    Ok(cs)
}

/// Arithmetic expression over numbers and named variables.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Var(String),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
}

/// Polynomial in `v` and `w`, keyed by `(deg_v, deg_w)`.
pub type VwPoly = BTreeMap<(u32, u32), f64>;

impl Expr {
    /// Evaluate with `vars` supplying variable values.
    pub fn eval(&self, vars: &dyn Fn(&str) -> Option<f64>) -> Result<f64> {
        Ok(match self {
            Expr::Num(x) => *x,
            Expr::Var(name) => {
                vars(name).ok_or_else(|| Error::Parse(format!("unbound variable {name}")))?
            }
            Expr::Neg(a) => -a.eval(vars)?,
            Expr::Add(a, b) => a.eval(vars)? + b.eval(vars)?,
            Expr::Sub(a, b) => a.eval(vars)? - b.eval(vars)?,
            Expr::Mul(a, b) => a.eval(vars)? * b.eval(vars)?,
            Expr::Div(a, b) => a.eval(vars)? / b.eval(vars)?,
        })
    }

    /// Evaluate at level `u` with `v = 2u − 1`, `w = v²`.
    pub fn eval_at(&self, u: f64) -> Result<f64> {
        let v = 2.0 * u - 1.0;
        let w = v * v;
        self.eval(&|name| match name {
            "u" => Some(u),
            "v" => Some(v),
            "w" => Some(w),
            _ => None,
        })
    }

    /// Expand into a polynomial in `v` and `w`; division only by constants.
    pub fn to_vw_poly(&self) -> Result<VwPoly> {
        fn add(mut a: VwPoly, b: VwPoly, sign: f64) -> VwPoly {
            for (k, c) in b {
                *a.entry(k).or_insert(0.0) += sign * c;
            }
            a
        }
        Ok(match self {
            Expr::Num(x) => BTreeMap::from([((0, 0), *x)]),
            Expr::Var(name) => match name.as_str() {
                "v" => BTreeMap::from([((1, 0), 1.0)]),
                "w" => BTreeMap::from([((0, 1), 1.0)]),
                _ => return Err(Error::Parse(format!("variable {name} is not v or w"))),
            },
            Expr::Neg(a) => a.to_vw_poly()?.into_iter().map(|(k, c)| (k, -c)).collect(),
            Expr::Add(a, b) => add(a.to_vw_poly()?, b.to_vw_poly()?, 1.0),
            Expr::Sub(a, b) => add(a.to_vw_poly()?, b.to_vw_poly()?, -1.0),
            Expr::Mul(a, b) => {
                let (pa, pb) = (a.to_vw_poly()?, b.to_vw_poly()?);
                let mut out = BTreeMap::new();
                for (&(va, wa), &ca) in &pa {
                    for (&(vb, wb), &cb) in &pb {
                        *out.entry((va + vb, wa + wb)).or_insert(0.0) += ca * cb;
                    }
                }
                out
            }
            Expr::Div(a, b) => {
                let pb = b.to_vw_poly()?;
                let d = match pb.iter().collect::<Vec<_>>().as_slice() {
                    [(&(0, 0), &d)] => d,
                    _ => return Err(Error::Parse("division by a non-constant".into())),
                };
                a.to_vw_poly()?.into_iter().map(|(k, c)| (k, c / d)).collect()
            }
        })
    }
}

/// Horner coefficients `a_j` of an expression of the form `v·Σ a_j w^j`.
pub fn horner_coeffs_from_expr(e: &Expr) -> Result<Vec<f64>> {
    let poly = e.to_vw_poly()?;
    let mut out = Vec::new();
    for (&(dv, dw), &c) in &poly {
        if dv != 1 {
            if c == 0.0 {
                continue;
            }
            return Err(Error::Shape(format!(
                "term v^{dv} w^{dw} does not fit v·(a0 + a1 w + …)"
            )));
        }
        let j = dw as usize;
        if out.len() <= j {
            out.resize(j + 1, 0.0);
        }
        out[j] = c;
    }
    Ok(out)
}

/// The expression of a C `return` statement, or the whole text if there is none.
pub fn extract_expression(code: &str) -> &str {
    match code.find("return") {
        Some(i) => {
            let rest = &code[i + "return".len()..];
            rest.split(';').next().unwrap_or(rest)
        }
        None => code,
    }
}

/// Parse `+ - * /`, unary minus, parentheses, decimal literals and identifiers.
pub fn parse_expression(text: &str) -> Result<Expr> {
    let mut p = Parser {
        s: text.as_bytes(),
        i: 0,
    };
    let e = p.sum()?;
    p.skip_ws();
    if p.i != p.s.len() {
        return Err(p.error("unexpected trailing input"));
    }
    Ok(e)
}

struct Parser<'a> {
    s: &'a [u8],
    i: usize,
}

impl Parser<'_> {
    fn error(&self, msg: &str) -> Error {
        Error::Parse(format!("{msg} at byte {}", self.i))
    }

    fn skip_ws(&mut self) {
        while self.i < self.s.len() && self.s[self.i].is_ascii_whitespace() {
            self.i += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.s.get(self.i).copied()
    }

    fn sum(&mut self) -> Result<Expr> {
        let mut e = self.product()?;
        while let Some(op @ (b'+' | b'-')) = self.peek() {
            self.i += 1;
            let r = self.product()?;
            e = if op == b'+' {
                Expr::Add(Box::new(e), Box::new(r))
            } else {
                Expr::Sub(Box::new(e), Box::new(r))
            };
        }
        Ok(e)
    }

    fn product(&mut self) -> Result<Expr> {
        let mut e = self.unary()?;
        while let Some(op @ (b'*' | b'/')) = self.peek() {
            self.i += 1;
            let r = self.unary()?;
            e = if op == b'*' {
                Expr::Mul(Box::new(e), Box::new(r))
            } else {
                Expr::Div(Box::new(e), Box::new(r))
            };
        }
        Ok(e)
    }

    fn unary(&mut self) -> Result<Expr> {
        match self.peek() {
            Some(b'-') => {
                self.i += 1;
                Ok(Expr::Neg(Box::new(self.unary()?)))
            }
            Some(b'+') => {
                self.i += 1;
                self.unary()
            }
            _ => self.atom(),
        }
    }

    fn atom(&mut self) -> Result<Expr> {
        match self.peek() {
            Some(b'(') => {
                self.i += 1;
                let e = self.sum()?;
                if self.peek() != Some(b')') {
                    return Err(self.error("expected ')'"));
                }
                self.i += 1;
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() || c == b'_' => {
                let start = self.i;
                while self.i < self.s.len()
                    && (self.s[self.i].is_ascii_alphanumeric() || self.s[self.i] == b'_')
                {
                    self.i += 1;
                }
                let name = std::str::from_utf8(&self.s[start..self.i]).expect("ascii");
                Ok(Expr::Var(name.to_string()))
            }
            Some(_) => Err(self.error("unexpected character")),
            None => Err(self.error("unexpected end of input")),
        }
    }

    fn number(&mut self) -> Result<Expr> {
        let start = self.i;
        let digits = |p: &mut Self| {
            while p.i < p.s.len() && p.s[p.i].is_ascii_digit() {
                p.i += 1;
            }
        };
        digits(self);
        if self.s.get(self.i) == Some(&b'.') {
            self.i += 1;
            digits(self);
        }
        if matches!(self.s.get(self.i), Some(b'e' | b'E')) {
            self.i += 1;
            if matches!(self.s.get(self.i), Some(b'+' | b'-')) {
                self.i += 1;
            }
            digits(self);
        }
        let lit = std::str::from_utf8(&self.s[start..self.i]).expect("ascii");
        lit.parse::<f64>()
            .map(Expr::Num)
            .map_err(|_| Error::Parse(format!("bad number {lit:?} at byte {start}")))
    }
}
