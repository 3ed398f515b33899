//! Exact differential polynomial ring for the quantile recurrence
//!
//! ```text
//! P₂ = B₀,   P_{n+1} = (n+1)·x·B₀·P_n + x²·B₀·∂ₓP_n + ∂_w P_n
//! ```
//!
//! where `B_m` stands for the m-th w-derivative of `P₂` at the expansion
//! point (`∂_w B_m = B_{m+1}`). Numerically `B_m = −f^{(m+1)}(0)`.
//!
//! Coefficients are arbitrary-precision rationals stored as integer
//! numerators over one common denominator per polynomial. For a symmetric
//! density the even-index symbols vanish and `B_{2j−1} = (−1)^{j−1} E_j`;
//! [`SymmetricPoly`] holds the result of that substitution.

use crate::dd::DoubleDouble;
use crate::error::{Error, Result};
use crate::moments::MomentVector;
use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rustc_hash::FxHashMap;
use serde::{Deserialize, Serialize};
use smallvec::SmallVec;
use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, OnceLock};

/// Default cap on the number of monomials in any one `P_n`.
pub const DEFAULT_TERM_CAP: usize = 5_000_000;

/// Largest order the compact monomial encoding can carry.
pub const MAX_ORDER: usize = 250;

/// Environment variable naming the on-disk cache directory.
pub const CACHE_DIR_ENV: &str = "CHARQUANT_CACHE_DIR";

const FORMAT_FULL: &str = "charquant-pseq";
const FORMAT_SYMMETRIC: &str = "charquant-pseq-symmetric";
const CACHE_VERSION: u32 = 2;

/// The symbol `B_m`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BSymbol(pub usize);

impl fmt::Display for BSymbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "B{}", self.0)
    }
}

type Runs = SmallVec<[(u8, u8); 8]>;

/// `x^xdeg · Π B_i^{c_i}`, stored as sorted `(i, c_i)` runs.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Monomial {
    xdeg: u16,
    runs: Runs,
}

fn runs_from_indices(indices: &[usize]) -> Runs {
    let mut sorted = indices.to_vec();
    sorted.sort_unstable();
    let mut runs = Runs::new();
    for i in sorted {
        assert!(i <= MAX_ORDER, "symbol index {i} exceeds {MAX_ORDER}");
        match runs.last_mut() {
            Some((j, c)) if *j as usize == i => *c += 1,
            _ => runs.push((i as u8, 1)),
        }
    }
    runs
}

fn expand_runs(runs: &Runs) -> Vec<usize> {
    runs.iter()
        .flat_map(|&(i, c)| std::iter::repeat(i as usize).take(c as usize))
        .collect()
}

impl Monomial {
    /// Build from an x-power and an unsorted list of B indices.
    pub fn new(xdeg: usize, bfactors: &[usize]) -> Self {
        assert!(xdeg <= u16::MAX as usize);
        Monomial {
            xdeg: xdeg as u16,
            runs: runs_from_indices(bfactors),
        }
    }

    pub fn one() -> Self {
        Monomial {
            xdeg: 0,
            runs: Runs::new(),
        }
    }

    pub fn xdeg(&self) -> usize {
        self.xdeg as usize
    }

    /// B indices in ascending order, with repetition.
    pub fn bfactors(&self) -> Vec<usize> {
        expand_runs(&self.runs)
    }

    /// Total number of B factors.
    pub fn bdegree(&self) -> usize {
        self.runs.iter().map(|&(_, c)| c as usize).sum()
    }

    pub fn max_index(&self) -> Option<usize> {
        self.runs.last().map(|&(i, _)| i as usize)
    }

    fn even_factors(&self) -> usize {
        self.runs
            .iter()
            .filter(|&&(i, _)| i % 2 == 0)
            .map(|&(_, c)| c as usize)
            .sum()
    }

    fn mul(&self, other: &Monomial) -> Monomial {
        let mut runs = Runs::new();
        let (mut a, mut b) = (self.runs.iter().peekable(), other.runs.iter().peekable());
        loop {
            match (a.peek(), b.peek()) {
                (Some(&&(i, c)), Some(&&(j, d))) => {
                    if i == j {
                        runs.push((i, c + d));
                        a.next();
                        b.next();
                    } else if i < j {
                        runs.push((i, c));
                        a.next();
                    } else {
                        runs.push((j, d));
                        b.next();
                    }
                }
                (Some(&&r), None) => {
                    runs.push(r);
                    a.next();
                }
                (None, Some(&&r)) => {
                    runs.push(r);
                    b.next();
                }
                (None, None) => break,
            }
        }
        Monomial {
            xdeg: self.xdeg + other.xdeg,
            runs,
        }
    }

    /// `x·B₀·self`
    fn times_x_b0(&self) -> Monomial {
        let mut runs = self.runs.clone();
        match runs.first_mut() {
            Some((0, c)) => *c += 1,
            _ => runs.insert(0, (0, 1)),
        }
        Monomial {
            xdeg: self.xdeg + 1,
            runs,
        }
    }

    /// Replace one factor of the run at `pos` by the next symbol.
    fn bump(&self, pos: usize) -> Monomial {
        let mut runs = self.runs.clone();
        let (i, c) = runs[pos];
        let next = i + 1;
        if c == 1 {
            runs.remove(pos);
        } else {
            runs[pos].1 = c - 1;
        }
        // The successor index can only merge with the run right after `pos`.
        let at = if c == 1 { pos } else { pos + 1 };
        if at < runs.len() && runs[at].0 == next {
            runs[at].1 += 1;
        } else {
            runs.insert(at, (next, 1));
        }
        Monomial {
            xdeg: self.xdeg,
            runs,
        }
    }
}

impl fmt::Display for Monomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts: Vec<String> = Vec::new();
        match self.xdeg {
            0 => {}
            1 => parts.push("x".into()),
            d => parts.push(format!("x^{d}")),
        }
        for &(i, c) in &self.runs {
            if c == 1 {
                parts.push(format!("B{i}"));
            } else {
                parts.push(format!("B{i}^{c}"));
            }
        }
        if parts.is_empty() {
            write!(f, "1")
        } else {
            write!(f, "{}", parts.join("*"))
        }
    }
}

/// Polynomial in `x` and the `B_m` with exact rational coefficients.
///
/// Canonical form: terms sorted by monomial, no zero numerators, positive
/// denominator coprime to the numerators' gcd.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DiffPoly {
    terms: Vec<(Monomial, BigInt)>,
    den: BigInt,
}

type Accumulator = FxHashMap<Monomial, BigInt>;

fn accumulate(acc: &mut Accumulator, m: Monomial, c: BigInt) {
    use std::collections::hash_map::Entry;
    match acc.entry(m) {
        Entry::Occupied(mut e) => {
            *e.get_mut() += c;
        }
        Entry::Vacant(e) => {
            e.insert(c);
        }
    }
}

impl DiffPoly {
    pub fn zero() -> Self {
        DiffPoly {
            terms: Vec::new(),
            den: BigInt::one(),
        }
    }

    pub fn one() -> Self {
        Self::monomial(Monomial::one(), BigInt::one())
    }

    pub fn x() -> Self {
        Self::monomial(Monomial::new(1, &[]), BigInt::one())
    }

    pub fn b(m: usize) -> Self {
        Self::monomial(Monomial::new(0, &[m]), BigInt::one())
    }

    pub fn monomial(m: Monomial, c: BigInt) -> Self {
        Self::from_parts(vec![(m, c)], BigInt::one())
    }

    /// Build from rational-coefficient terms; repeated monomials are summed.
    pub fn from_terms<I: IntoIterator<Item = (Monomial, BigRational)>>(terms: I) -> Self {
        let terms: Vec<(Monomial, BigRational)> = terms.into_iter().collect();
        let mut den = BigInt::one();
        for (_, c) in &terms {
            den = den.lcm(c.denom());
        }
        let mut acc = Accumulator::default();
        for (m, c) in terms {
            let scaled = c.numer() * (&den / c.denom());
            accumulate(&mut acc, m, scaled);
        }
        Self::from_map(acc, den)
    }

    /// Integer-coefficient constructor, e.g. `DiffPoly::int(&[(2, &[0, 0, 0], 15)])`.
    pub fn int(terms: &[(usize, &[usize], i64)]) -> Self {
        let mut acc = Accumulator::default();
        for &(xd, bf, c) in terms {
            accumulate(&mut acc, Monomial::new(xd, bf), BigInt::from(c));
        }
        Self::from_map(acc, BigInt::one())
    }

    fn from_map(acc: Accumulator, den: BigInt) -> Self {
        Self::from_parts(acc.into_iter().collect(), den)
    }

    fn from_parts(mut terms: Vec<(Monomial, BigInt)>, mut den: BigInt) -> Self {
        terms.retain(|(_, c)| !c.is_zero());
        terms.sort_unstable_by(|a, b| a.0.cmp(&b.0));
        if den.is_negative() {
            den = -den;
            for (_, c) in terms.iter_mut() {
                *c = -std::mem::take(c);
            }
        }
        if terms.is_empty() {
            den = BigInt::one();
        } else if !den.is_one() {
            let mut g = den.clone();
            for (_, c) in &terms {
                g = g.gcd(c);
                if g.is_one() {
                    break;
                }
            }
            if !g.is_one() {
                den /= &g;
                for (_, c) in terms.iter_mut() {
                    *c /= &g;
                }
            }
        }
        DiffPoly { terms, den }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Number of stored monomials.
    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn denominator(&self) -> &BigInt {
        &self.den
    }

    pub fn max_xdeg(&self) -> Option<usize> {
        self.terms.iter().map(|(m, _)| m.xdeg()).max()
    }

    /// Highest B index present.
    pub fn max_symbol(&self) -> Option<usize> {
        self.terms.iter().filter_map(|(m, _)| m.max_index()).max()
    }

    pub fn coeff(&self, m: &Monomial) -> BigRational {
        match self.terms.binary_search_by(|(t, _)| t.cmp(m)) {
            Ok(i) => BigRational::new(self.terms[i].1.clone(), self.den.clone()),
            Err(_) => BigRational::zero(),
        }
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, BigRational)> + '_ {
        self.terms
            .iter()
            .map(move |(m, c)| (m, BigRational::new(c.clone(), self.den.clone())))
    }

    pub fn add(&self, other: &DiffPoly) -> DiffPoly {
        let den = self.den.lcm(&other.den);
        let fa = &den / &self.den;
        let fb = &den / &other.den;
        let mut acc = Accumulator::default();
        for (m, c) in &self.terms {
            accumulate(&mut acc, m.clone(), c * &fa);
        }
        for (m, c) in &other.terms {
            accumulate(&mut acc, m.clone(), c * &fb);
        }
        Self::from_map(acc, den)
    }

    pub fn neg(&self) -> DiffPoly {
        DiffPoly {
            terms: self.terms.iter().map(|(m, c)| (m.clone(), -c)).collect(),
            den: self.den.clone(),
        }
    }

    pub fn sub(&self, other: &DiffPoly) -> DiffPoly {
        self.add(&other.neg())
    }

    pub fn scale(&self, c: &BigRational) -> DiffPoly {
        let terms = self
            .terms
            .iter()
            .map(|(m, k)| (m.clone(), k * c.numer()))
            .collect();
        Self::from_parts(terms, &self.den * c.denom())
    }

    pub fn mul(&self, other: &DiffPoly) -> DiffPoly {
        let mut acc = Accumulator::default();
        for (ma, ca) in &self.terms {
            for (mb, cb) in &other.terms {
                accumulate(&mut acc, ma.mul(mb), ca * cb);
            }
        }
        Self::from_map(acc, &self.den * &other.den)
    }

    /// Partial derivative in `x`.
    pub fn ddx(&self) -> DiffPoly {
        let terms = self
            .terms
            .iter()
            .filter(|(m, _)| m.xdeg > 0)
            .map(|(m, c)| {
                let mut dm = m.clone();
                dm.xdeg -= 1;
                (dm, c * m.xdeg)
            })
            .collect();
        Self::from_parts(terms, self.den.clone())
    }

    /// Derivative in `w`: product rule with `B_m ↦ B_{m+1}`.
    pub fn ddw(&self) -> DiffPoly {
        let mut acc = Accumulator::default();
        for (m, c) in &self.terms {
            for (pos, &(_, k)) in m.runs.iter().enumerate() {
                accumulate(&mut acc, m.bump(pos), c * k);
            }
        }
        Self::from_map(acc, self.den.clone())
    }

    /// Replace every symbol by its value and `x` by a number, in double-double.
    pub fn eval_dd(&self, bvals: &[DoubleDouble], x: DoubleDouble) -> Result<DoubleDouble> {
        if let Some(m) = self.max_symbol() {
            if m >= bvals.len() {
                return Err(Error::MissingSymbol(m));
            }
        }
        let den = DoubleDouble::from_bigint(&self.den);
        let mut sum = DoubleDouble::ZERO;
        for (m, c) in &self.terms {
            let mut t = DoubleDouble::from_bigint(c) * x.powi(m.xdeg as u32);
            for &(i, k) in &m.runs {
                t = t * bvals[i as usize].powi(k as u32);
            }
            sum = sum + t;
        }
        Ok(sum / den)
    }

    /// Symmetric substitution: even-index symbols vanish and
    /// `B_{2j−1} ↦ (−1)^{j−1} E_j`.
    pub fn symmetric_reduction(&self) -> SymmetricPoly {
        let mut acc: FxHashMap<Monomial, BigInt> = FxHashMap::default();
        for (m, c) in &self.terms {
            if let Some(e) = reduce_monomial(m) {
                accumulate(&mut acc, e.0, if e.1 { -c } else { c.clone() });
            }
        }
        SymmetricPoly(DiffPoly::from_map(acc, self.den.clone()))
    }

    fn to_record(&self, n: usize) -> PEntry {
        PEntry {
            n,
            den: self.den.to_string(),
            terms: self
                .terms
                .iter()
                .map(|(m, c)| TermRecord(m.xdeg(), m.bfactors(), c.to_string()))
                .collect(),
        }
    }

    fn from_record(entry: &PEntry) -> Result<DiffPoly> {
        let den: BigInt = entry
            .den
            .parse()
            .map_err(|_| Error::Parse(format!("bad denominator {:?}", entry.den)))?;
        if !den.is_positive() {
            return Err(Error::Parse(format!("denominator of P_{} must be positive", entry.n)));
        }
        let mut terms = Vec::with_capacity(entry.terms.len());
        for TermRecord(xdeg, bfactors, num) in &entry.terms {
            if bfactors.iter().any(|&i| i > MAX_ORDER) {
                return Err(Error::Parse(format!("symbol index out of range in P_{}", entry.n)));
            }
            let num: BigInt = num
                .parse()
                .map_err(|_| Error::Parse(format!("bad numerator {num:?}")))?;
            terms.push((Monomial::new(*xdeg, bfactors), num));
        }
        let p = Self::from_parts(terms, den);
        if p.terms.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::Parse(format!("repeated monomial in P_{}", entry.n)));
        }
        Ok(p)
    }
}

/// Maps a monomial to its E-form (E indices reuse the B slots) and whether
/// the sign flips; `None` if an even-index symbol is present.
fn reduce_monomial(m: &Monomial) -> Option<(Monomial, bool)> {
    let mut runs = Runs::new();
    let mut negative = false;
    for &(i, c) in &m.runs {
        if i % 2 == 0 {
            return None;
        }
        let j = (i + 1) / 2;
        if (j - 1) % 2 == 1 && c % 2 == 1 {
            negative = !negative;
        }
        runs.push((j, c));
    }
    Some((Monomial { xdeg: m.xdeg, runs }, negative))
}

impl fmt::Display for DiffPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_poly(f, &self.terms, &self.den, "B")
    }
}

fn write_poly(
    f: &mut fmt::Formatter<'_>,
    terms: &[(Monomial, BigInt)],
    den: &BigInt,
    sym: &str,
) -> fmt::Result {
    if terms.is_empty() {
        return write!(f, "0");
    }
    for (k, (m, c)) in terms.iter().rev().enumerate() {
        let r = BigRational::new(c.clone(), den.clone());
        let (sign, mag) = if r.is_negative() { ("-", -r) } else { ("+", r) };
        if k == 0 {
            if sign == "-" {
                write!(f, "-")?;
            }
        } else {
            write!(f, " {sign} ")?;
        }
        let body = m.to_string().replace('B', sym);
        if body == "1" {
            write!(f, "{mag}")?;
        } else if mag.is_one() {
            write!(f, "{body}")?;
        } else {
            write!(f, "{mag}*{body}")?;
        }
    }
    Ok(())
}

/// `P_{n+1}` from `P_n`.
pub fn recurrence_step(p_n: &DiffPoly, n: usize) -> DiffPoly {
    let acc = step_terms(&p_n.terms, n, |_| true);
    DiffPoly::from_map(acc, p_n.den.clone())
}

// (n+1)·x·B₀·P + x²·B₀·∂ₓP combine into one term per monomial:
// x^d ↦ (n+1+d)·x^{d+1}·B₀.
fn step_terms<K: Fn(&Monomial) -> bool>(
    terms: &[(Monomial, BigInt)],
    n: usize,
    keep: K,
) -> Accumulator {
    let mut acc = Accumulator::default();
    acc.reserve(terms.len() * 2);
    for (m, c) in terms {
        let lifted = m.times_x_b0();
        if keep(&lifted) {
            accumulate(&mut acc, lifted, c * (n as u64 + 1 + m.xdeg as u64));
        }
        for (pos, &(_, k)) in m.runs.iter().enumerate() {
            let bumped = m.bump(pos);
            if keep(&bumped) {
                accumulate(&mut acc, bumped, c * k as u64);
            }
        }
    }
    acc.retain(|_, c| !c.is_zero());
    acc
}

fn check_order(n_max: usize) -> Result<()> {
    if n_max < 2 {
        return Err(Error::Domain(format!("n_max must be at least 2, got {n_max}")));
    }
    if n_max > MAX_ORDER {
        return Err(Error::Domain(format!("n_max {n_max} exceeds the supported {MAX_ORDER}")));
    }
    Ok(())
}

/// `[P₂, …, P_{n_max}]` with the default term cap.
pub fn compute_p_sequence(n_max: usize) -> Result<Vec<DiffPoly>> {
    compute_p_sequence_capped(n_max, DEFAULT_TERM_CAP)
}

pub fn compute_p_sequence_capped(n_max: usize, term_cap: usize) -> Result<Vec<DiffPoly>> {
    check_order(n_max)?;
    let mut seq = vec![DiffPoly::b(0)];
    extend_sequence(&mut seq, n_max, term_cap)?;
    Ok(seq)
}

fn extend_sequence(seq: &mut Vec<DiffPoly>, n_max: usize, term_cap: usize) -> Result<()> {
    while seq.len() + 1 < n_max {
        let n = seq.len() + 1;
        let next = recurrence_step(seq.last().expect("non-empty"), n);
        if next.len() > term_cap {
            return Err(Error::ResourceLimit {
                n: n + 1,
                terms: next.len(),
                cap: term_cap,
            });
        }
        log::debug!("P_{} has {} terms", n + 1, next.len());
        seq.push(next);
    }
    Ok(())
}

/// A symmetric-substituted `P_n`: a polynomial in `x` and `E_j`, stored as a
/// [`DiffPoly`] whose symbol indices are the `j` of `E_j`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SymmetricPoly(DiffPoly);

impl SymmetricPoly {
    /// Integer-coefficient constructor over `(xdeg, E indices, coefficient)`.
    pub fn int(terms: &[(usize, &[usize], i64)]) -> Self {
        SymmetricPoly(DiffPoly::int(terms))
    }

    pub fn as_poly(&self) -> &DiffPoly {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    /// Highest `j` of any `E_j` present.
    pub fn max_moment(&self) -> Option<usize> {
        self.0.max_symbol()
    }

    /// Evaluate at `x` with `evals[j] = E_j`.
    pub fn eval_dd(&self, evals: &[DoubleDouble], x: DoubleDouble) -> Result<DoubleDouble> {
        self.0.eval_dd(evals, x)
    }
}

impl fmt::Display for SymmetricPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_poly(f, &self.0.terms, &self.0.den, "E")
    }
}

/// Symmetric reductions of `P₃, P₅, …, P_{n_max}` (even orders vanish).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SymmetricSequence {
    n_max: usize,
    polys: Vec<SymmetricPoly>,
}

impl SymmetricSequence {
    pub fn n_max(&self) -> usize {
        self.n_max
    }

    /// Reduced `P_n`; zero polynomial for even `n`, `None` beyond `n_max`.
    pub fn get(&self, n: usize) -> Option<SymmetricPoly> {
        if n < 2 || n > self.n_max {
            return None;
        }
        if n % 2 == 0 {
            return Some(SymmetricPoly(DiffPoly::zero()));
        }
        Some(self.polys[(n - 3) / 2].clone())
    }

    pub fn odd(&self, n: usize) -> Option<&SymmetricPoly> {
        if n % 2 == 1 && n >= 3 && n <= self.n_max {
            Some(&self.polys[(n - 3) / 2])
        } else {
            None
        }
    }

    /// Restrict to orders `≤ n_max`.
    pub fn truncated(&self, n_max: usize) -> SymmetricSequence {
        let n_max = n_max.min(self.n_max);
        let keep = if n_max >= 3 { (n_max - 1) / 2 } else { 0 };
        SymmetricSequence {
            n_max,
            polys: self.polys[..keep].to_vec(),
        }
    }
}

/// Symmetric reductions up to `n_max`, streaming through the recurrence.
///
/// A term with `e` even-index factors needs at least `e` further `∂_w`
/// steps to lose them, so terms with `e > n_max − n` are dropped early.
pub fn compute_symmetric_sequence(n_max: usize, term_cap: usize) -> Result<SymmetricSequence> {
    check_order(n_max)?;
    let mut cur = DiffPoly::b(0);
    let mut polys = Vec::new();
    for n in 2..n_max {
        let budget = n_max - (n + 1);
        let acc = step_terms(&cur.terms, n, |m| m.even_factors() <= budget);
        if acc.len() > term_cap {
            return Err(Error::ResourceLimit {
                n: n + 1,
                terms: acc.len(),
                cap: term_cap,
            });
        }
        cur = DiffPoly {
            terms: acc.into_iter().collect(),
            den: cur.den,
        };
        log::debug!("pruned P_{} has {} terms", n + 1, cur.len());
        if (n + 1) % 2 == 1 {
            cur.terms.sort_unstable_by(|a, b| a.0.cmp(&b.0));
            polys.push(cur.symmetric_reduction());
        }
    }
    Ok(SymmetricSequence { n_max, polys })
}

/// Value of `P_n[x, anchor]` with `B_m = −D_{m+1}` from the moment vector.
pub fn substitute(p: &DiffPoly, mv: &MomentVector, x: f64) -> Result<f64> {
    let b: Vec<DoubleDouble> = mv.b_values().into_iter().map(DoubleDouble::new).collect();
    Ok(p.eval_dd(&b, DoubleDouble::new(x))?.to_f64())
}

/// `[xdeg, symbol indices, numerator]`.
#[derive(Debug, Serialize, Deserialize)]
struct TermRecord(usize, Vec<usize>, String);

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PEntry {
    n: usize,
    /// Common denominator of the numerators.
    den: String,
    terms: Vec<TermRecord>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SequenceDocument {
    format: String,
    version: u32,
    n_max: usize,
    sequence: Vec<PEntry>,
}

/// Serialize `[P₂, …]` to the versioned cache document.
pub fn sequence_to_json(seq: &[DiffPoly]) -> String {
    let doc = SequenceDocument {
        format: FORMAT_FULL.into(),
        version: CACHE_VERSION,
        n_max: seq.len() + 1,
        sequence: seq.iter().enumerate().map(|(i, p)| p.to_record(i + 2)).collect(),
    };
    serde_json::to_string(&doc).expect("serializable")
}

fn parse_document(text: &str, format: &str) -> Result<SequenceDocument> {
    let doc: SequenceDocument = serde_json::from_str(text)?;
    if doc.format != format {
        return Err(Error::Parse(format!(
            "expected a {format} document, found {:?}",
            doc.format
        )));
    }
    if doc.version != CACHE_VERSION {
        return Err(Error::Parse(format!(
            "unsupported cache version {} (expected {CACHE_VERSION})",
            doc.version
        )));
    }
    Ok(doc)
}

pub fn sequence_from_json(text: &str) -> Result<Vec<DiffPoly>> {
    let doc = parse_document(text, FORMAT_FULL)?;
    let mut out = Vec::with_capacity(doc.sequence.len());
    for (i, e) in doc.sequence.iter().enumerate() {
        if e.n != i + 2 {
            return Err(Error::Parse(format!("expected P_{}, found P_{}", i + 2, e.n)));
        }
        out.push(DiffPoly::from_record(e)?);
    }
    if out.len() + 1 != doc.n_max {
        return Err(Error::Parse("n_max does not match the stored sequence".into()));
    }
    Ok(out)
}

pub fn symmetric_to_json(seq: &SymmetricSequence) -> String {
    let doc = SequenceDocument {
        format: FORMAT_SYMMETRIC.into(),
        version: CACHE_VERSION,
        n_max: seq.n_max,
        sequence: seq
            .polys
            .iter()
            .enumerate()
            .map(|(i, p)| p.0.to_record(2 * i + 3))
            .collect(),
    };
    serde_json::to_string(&doc).expect("serializable")
}

pub fn symmetric_from_json(text: &str) -> Result<SymmetricSequence> {
    let doc = parse_document(text, FORMAT_SYMMETRIC)?;
    let mut polys = Vec::with_capacity(doc.sequence.len());
    for (i, e) in doc.sequence.iter().enumerate() {
        if e.n != 2 * i + 3 {
            return Err(Error::Parse(format!("expected P_{}, found P_{}", 2 * i + 3, e.n)));
        }
        polys.push(SymmetricPoly(DiffPoly::from_record(e)?));
    }
    if doc.n_max < 3 || polys.len() != (doc.n_max - 1) / 2 {
        return Err(Error::Parse("n_max does not match the stored sequence".into()));
    }
    Ok(SymmetricSequence {
        n_max: doc.n_max,
        polys,
    })
}

/// Memoized symbolic stage, optionally backed by a cache directory.
pub struct SymbolicStore {
    cache_dir: Option<PathBuf>,
    term_cap: usize,
    full: Mutex<Vec<Arc<DiffPoly>>>,
    symmetric: Mutex<Option<Arc<SymmetricSequence>>>,
}

impl SymbolicStore {
    pub fn new(cache_dir: Option<PathBuf>) -> Self {
        Self::with_cap(cache_dir, DEFAULT_TERM_CAP)
    }

    pub fn with_cap(cache_dir: Option<PathBuf>, term_cap: usize) -> Self {
        SymbolicStore {
            cache_dir,
            term_cap,
            full: Mutex::new(Vec::new()),
            symmetric: Mutex::new(None),
        }
    }

    /// Process-wide store; the cache directory comes from `CHARQUANT_CACHE_DIR`.
    pub fn global() -> &'static SymbolicStore {
        static STORE: OnceLock<SymbolicStore> = OnceLock::new();
        STORE.get_or_init(|| {
            let dir = std::env::var_os(CACHE_DIR_ENV)
                .filter(|s| !s.is_empty())
                .map(PathBuf::from);
            SymbolicStore::new(dir)
        })
    }

    pub fn cache_dir(&self) -> Option<&Path> {
        self.cache_dir.as_deref()
    }

    /// `[P₂, …, P_{n_max}]`.
    pub fn p_sequence(&self, n_max: usize) -> Result<Vec<Arc<DiffPoly>>> {
        check_order(n_max)?;
        let mut full = self.full.lock().unwrap_or_else(|e| e.into_inner());
        if full.len() + 1 < n_max {
            if let Some(loaded) = self.load_cached(FORMAT_FULL, n_max, |t| {
                Ok(sequence_from_json(t)?.into_iter().map(Arc::new).collect::<Vec<_>>())
            }) {
                if loaded.len() > full.len() {
                    *full = loaded;
                }
            }
        }
        if full.len() + 1 < n_max {
            let mut seq: Vec<DiffPoly> = full.iter().map(|p| (**p).clone()).collect();
            if seq.is_empty() {
                seq.push(DiffPoly::b(0));
            }
            extend_sequence(&mut seq, n_max, self.term_cap)?;
            self.store_cached(FORMAT_FULL, n_max, || sequence_to_json(&seq));
            *full = seq.into_iter().map(Arc::new).collect();
        }
        Ok(full[..n_max - 1].to_vec())
    }

    /// Symmetric reductions up to `n_max`.
    pub fn symmetric_sequence(&self, n_max: usize) -> Result<Arc<SymmetricSequence>> {
        check_order(n_max)?;
        let mut slot = self.symmetric.lock().unwrap_or_else(|e| e.into_inner());
        if let Some(s) = slot.as_ref() {
            if s.n_max >= n_max {
                return Ok(Arc::new(s.truncated(n_max)));
            }
        }
        let seq = match self.load_cached(FORMAT_SYMMETRIC, n_max, symmetric_from_json) {
            Some(s) => s,
            None => {
                let s = compute_symmetric_sequence(n_max, self.term_cap)?;
                self.store_cached(FORMAT_SYMMETRIC, n_max, || symmetric_to_json(&s));
                s
            }
        };
        let seq = Arc::new(seq);
        *slot = Some(seq.clone());
        Ok(Arc::new(seq.truncated(n_max)))
    }

    fn file_name(format: &str, n: usize) -> String {
        format!("{format}-n{n}.json")
    }

    /// Smallest cached document of `format` covering `n_max`.
    fn load_cached<T, F: Fn(&str) -> Result<T>>(&self, format: &str, n_max: usize, parse: F) -> Option<T> {
        let dir = self.cache_dir.as_ref()?;
        let prefix = format!("{format}-n");
        let mut candidates: BTreeMap<usize, PathBuf> = BTreeMap::new();
        for entry in std::fs::read_dir(dir).ok()?.flatten() {
            let name = entry.file_name().to_string_lossy().into_owned();
            if let Some(rest) = name.strip_prefix(&prefix).and_then(|r| r.strip_suffix(".json")) {
                if let Ok(n) = rest.parse::<usize>() {
                    if n >= n_max {
                        candidates.insert(n, entry.path());
                    }
                }
            }
        }
        for path in candidates.values() {
            match std::fs::read_to_string(path).map_err(Error::from).and_then(|t| parse(&t)) {
                Ok(v) => return Some(v),
                Err(e) => log::warn!("ignoring cache file {}: {e}", path.display()),
            }
        }
        None
    }

    fn store_cached<F: FnOnce() -> String>(&self, format: &str, n_max: usize, render: F) {
        let Some(dir) = self.cache_dir.as_ref() else {
            return;
        };
        let path = dir.join(Self::file_name(format, n_max));
        let tmp = dir.join(format!(".{}.tmp{}", Self::file_name(format, n_max), std::process::id()));
        let result = std::fs::create_dir_all(dir)
            .and_then(|_| std::fs::write(&tmp, render()))
            .and_then(|_| std::fs::rename(&tmp, &path));
        if let Err(e) = result {
            log::warn!("could not write cache file {}: {e}", path.display());
        }
    }
}

/// Exact rational coefficient as `f64` (for display and tests).
pub fn rational_to_f64(r: &BigRational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(terms: &[(usize, &[usize], i64)]) -> DiffPoly {
        DiffPoly::int(terms)
    }

    #[test]
    fn add_cases() {
        assert!(DiffPoly::zero().add(&DiffPoly::zero()).is_zero());
        let a = p(&[(1, &[0], 1)]);
        assert!(a.add(&a.neg()).is_zero());
        let s = p(&[(2, &[0, 0, 0], 12)]).add(&p(&[(2, &[0, 0, 0], 3)]));
        assert_eq!(s, p(&[(2, &[0, 0, 0], 15)]));
    }

    #[test]
    fn mul_cases() {
        let q = p(&[(2, &[0, 0, 0], 15), (1, &[0, 1], 10), (0, &[2], 1)]);
        assert_eq!(DiffPoly::one().mul(&q), q);
        let xb = p(&[(1, &[0], 1)]);
        assert_eq!(xb.mul(&xb), p(&[(2, &[0, 0], 1)]));
        let three_x_b0sq = p(&[(1, &[0, 0], 3)]);
        assert_eq!(three_x_b0sq.mul(&xb), p(&[(2, &[0, 0, 0], 3)]));
    }

    #[test]
    fn derivative_cases() {
        assert!(DiffPoly::b(3).ddx().is_zero());
        assert_eq!(p(&[(2, &[0, 0, 0], 1)]).ddx(), p(&[(1, &[0, 0, 0], 2)]));
        let p4 = p(&[(2, &[0, 0, 0], 15), (1, &[0, 1], 10), (0, &[2], 1)]);
        assert_eq!(p4.ddx(), p(&[(1, &[0, 0, 0], 30), (0, &[0, 1], 10)]));
        assert_eq!(DiffPoly::b(0).ddw(), DiffPoly::b(1));
        assert_eq!(p(&[(0, &[0, 0], 1)]).ddw(), p(&[(0, &[0, 1], 2)]));
        assert_eq!(
            p4.ddw(),
            p(&[
                (2, &[0, 0, 1], 45),
                (1, &[1, 1], 10),
                (1, &[0, 2], 10),
                (0, &[3], 1)
            ])
        );
    }

    #[test]
    fn bump_merges_runs() {
        let m = Monomial::new(0, &[0, 1, 1, 3]);
        assert_eq!(m.bump(0), Monomial::new(0, &[1, 1, 1, 3]));
        assert_eq!(m.bump(1), Monomial::new(0, &[0, 1, 2, 3]));
        let m = Monomial::new(0, &[2, 2, 3]);
        assert_eq!(m.bump(0), Monomial::new(0, &[2, 3, 3]));
    }

    #[test]
    fn first_steps() {
        let p3 = recurrence_step(&DiffPoly::b(0), 2);
        assert_eq!(p3, p(&[(1, &[0, 0], 3), (0, &[1], 1)]));
        let p4 = recurrence_step(&p3, 3);
        assert_eq!(p4, p(&[(2, &[0, 0, 0], 15), (1, &[0, 1], 10), (0, &[2], 1)]));
        let seq = compute_p_sequence(3).unwrap();
        assert_eq!(seq, vec![DiffPoly::b(0), p3]);
    }

    #[test]
    fn step_matches_generic_operations() {
        // (n+1)·x·B₀·P + x²·B₀·∂ₓP + ∂_wP with the general ring operations.
        let seq = compute_p_sequence(9).unwrap();
        for n in 2..9 {
            let pn = &seq[n - 2];
            let xb0 = p(&[(1, &[0], 1)]);
            let x2b0 = p(&[(2, &[0], 1)]);
            let k = BigRational::from_integer(BigInt::from(n + 1));
            let direct = xb0.mul(pn).scale(&k).add(&x2b0.mul(&pn.ddx())).add(&pn.ddw());
            assert_eq!(direct, seq[n - 1], "n={n}");
        }
    }

    #[test]
    fn symmetric_p5() {
        let seq = compute_p_sequence(5).unwrap();
        let s = seq[3].symmetric_reduction();
        assert_eq!(s, SymmetricPoly::int(&[(1, &[1, 1], 10), (0, &[2], -1)]));
    }

    #[test]
    fn max_xdeg_is_n_minus_two() {
        for (i, q) in compute_p_sequence(14).unwrap().iter().enumerate() {
            assert_eq!(q.max_xdeg(), Some(i));
        }
    }

    #[test]
    fn pruned_stream_matches_full_reduction() {
        let full = compute_p_sequence(17).unwrap();
        let sym = compute_symmetric_sequence(17, DEFAULT_TERM_CAP).unwrap();
        for n in (3..=17).step_by(2) {
            assert_eq!(sym.odd(n).unwrap(), &full[n - 2].symmetric_reduction(), "n={n}");
        }
        for n in (2..=17).step_by(2) {
            assert!(full[n - 2].symmetric_reduction().is_zero());
        }
    }

    #[test]
    fn term_cap_is_enforced() {
        let err = compute_p_sequence_capped(12, 50).unwrap_err();
        assert!(matches!(err, Error::ResourceLimit { cap: 50, .. }), "{err}");
    }

    #[test]
    fn substitution_missing_symbol() {
        let q = p(&[(0, &[3], 1)]);
        let b = [DoubleDouble::new(1.0); 2];
        assert!(matches!(q.eval_dd(&b, DoubleDouble::ONE), Err(Error::MissingSymbol(3))));
    }

    #[test]
    fn substitution_symmetric_rule() {
        // P₅ with B₀ = B₂ = 0, B₁ = E₁, B₃ = −E₂ equals 10xE₁² − E₂.
        let p5 = &compute_p_sequence(5).unwrap()[3];
        let (e1, e2, x) = (0.37, 1.9, 2.3);
        let b = [0.0, e1, 0.0, -e2].map(DoubleDouble::new);
        let v = p5.eval_dd(&b, DoubleDouble::new(x)).unwrap().to_f64();
        assert!((v - (10.0 * x * e1 * e1 - e2)).abs() < 1e-13);
        let zero = DiffPoly::b(0).eval_dd(&[DoubleDouble::ZERO], DoubleDouble::ONE).unwrap();
        assert_eq!(zero.to_f64(), 0.0);
    }

    #[test]
    fn rational_coefficients_normalize() {
        let half = BigRational::new(BigInt::from(1), BigInt::from(2));
        let q = DiffPoly::from_terms(vec![
            (Monomial::new(1, &[0]), half.clone()),
            (Monomial::new(0, &[1]), half.clone() + half.clone()),
        ]);
        assert_eq!(q.denominator(), &BigInt::from(2));
        assert_eq!(q.coeff(&Monomial::new(0, &[1])), BigRational::one());
        let doubled = q.scale(&BigRational::from_integer(BigInt::from(2)));
        assert!(doubled.denominator().is_one());
        assert_eq!(q.to_string(), "1/2*x*B0 + B1");
    }

    #[test]
    fn json_round_trip() {
        let seq = compute_p_sequence(8).unwrap();
        let back = sequence_from_json(&sequence_to_json(&seq)).unwrap();
        assert_eq!(seq, back);
        let sym = compute_symmetric_sequence(11, DEFAULT_TERM_CAP).unwrap();
        assert_eq!(symmetric_from_json(&symmetric_to_json(&sym)).unwrap(), sym);
        assert!(symmetric_from_json(&sequence_to_json(&seq)).is_err());
        let text = sequence_to_json(&seq);
        let bumped = text.replace(&format!("\"version\":{CACHE_VERSION}"), "\"version\":9");
        assert_ne!(bumped, text);
        assert!(sequence_from_json(&bumped).is_err());
        let doubled = text.replace("[[0,[0],\"1\"]]", "[[0,[0],\"1\"],[0,[0],\"1\"]]");
        assert_ne!(doubled, text);
        assert!(sequence_from_json(&doubled).is_err());
    }

    #[test]
    fn store_uses_cache_dir() {
        let dir = tempfile::tempdir().unwrap();
        let store = SymbolicStore::new(Some(dir.path().to_path_buf()));
        let a = store.symmetric_sequence(13).unwrap();
        assert!(dir.path().join("charquant-pseq-symmetric-n13.json").exists());
        let fresh = SymbolicStore::new(Some(dir.path().to_path_buf()));
        assert_eq!(*fresh.symmetric_sequence(9).unwrap(), a.truncated(9));
        let full = store.p_sequence(7).unwrap();
        assert_eq!(full.len(), 6);
        assert!(dir.path().join("charquant-pseq-n7.json").exists());
        assert_eq!(*fresh.p_sequence(6).unwrap()[4], *full[4]);
    }
}
