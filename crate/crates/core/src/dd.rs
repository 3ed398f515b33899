//! Minimal double-double arithmetic.
//!
//! Substituting moments into high-order recurrence polynomials sums millions of
//! terms that cancel down by up to fifteen orders of magnitude. The inputs are
//! well conditioned, so carrying the sum in ~106 bits recovers a full double
//! result.

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};
use std::ops::{Add, Div, Mul, Neg, Sub};

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct DoubleDouble {
    pub hi: f64,
    pub lo: f64,
}

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    let err = (a - (s - bb)) + (b - bb);
    (s, err)
}

#[inline]
fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    (s, b - (s - a))
}

#[inline]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

impl DoubleDouble {
    pub const ZERO: Self = Self { hi: 0.0, lo: 0.0 };
    pub const ONE: Self = Self { hi: 1.0, lo: 0.0 };

    pub fn new(hi: f64) -> Self {
        Self { hi, lo: 0.0 }
    }

    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }

    pub fn abs(self) -> Self {
        if self.hi < 0.0 {
            -self
        } else {
            self
        }
    }

    pub fn powi(self, mut k: u32) -> Self {
        let mut base = self;
        let mut acc = Self::ONE;
        while k > 0 {
            if k & 1 == 1 {
                acc = acc * base;
            }
            base = base * base;
            k >>= 1;
        }
        acc
    }

    /// Exact-as-possible conversion of a big integer (106 significant bits kept).
    pub fn from_bigint(n: &BigInt) -> Self {
        if n.is_zero() {
            return Self::ZERO;
        }
        let hi = n.to_f64().unwrap_or(f64::INFINITY);
        if !hi.is_finite() {
            return Self::new(hi);
        }
        let rem = n - big_from_f64(hi);
        let lo = rem.to_f64().unwrap_or(0.0);
        let (hi, lo) = quick_two_sum(hi, lo);
        Self { hi, lo }
    }

    /// Exact value `hi + lo` rounded half-even to `digits` significant decimal
    /// digits. Trailing zeros are dropped; magnitudes outside `[1e-5, 1e21)`
    /// use an `e` exponent.
    pub fn to_decimal(self, digits: usize) -> String {
        let digits = digits.max(1);
        if !self.hi.is_finite() {
            return format!("{}", self.hi);
        }
        if self.hi == 0.0 {
            return "0.0".into();
        }
        let exact = BigRational::from_float(self.hi).expect("finite")
            + BigRational::from_float(self.lo).expect("finite");
        let neg = exact.is_negative();
        let r = exact.abs();
        let ten = BigInt::from(10);
        let lower = ten.pow(digits as u32 - 1);
        let upper = ten.pow(digits as u32);
        let mut e10 = self.hi.abs().log10().floor() as i32;
        let mantissa = loop {
            let shift = digits as i32 - 1 - e10;
            let scaled = if shift >= 0 {
                &r * BigRational::from_integer(ten.pow(shift as u32))
            } else {
                &r / BigRational::from_integer(ten.pow((-shift) as u32))
            };
            let n = round_half_even(&scaled);
            if n >= upper {
                e10 += 1;
            } else if n < lower {
                e10 -= 1;
            } else {
                break n.to_string();
            }
        };
        let sign = if neg { "-" } else { "" };
        if (-5..21).contains(&e10) {
            let (int, frac) = if e10 >= 0 {
                let e = e10 as usize + 1;
                if e >= digits {
                    (format!("{mantissa}{}", "0".repeat(e - digits)), String::new())
                } else {
                    (mantissa[..e].to_string(), mantissa[e..].to_string())
                }
            } else {
                ("0".to_string(), format!("{}{mantissa}", "0".repeat((-e10 - 1) as usize)))
            };
            let frac = frac.trim_end_matches('0');
            let frac = if frac.is_empty() { "0" } else { frac };
            format!("{sign}{int}.{frac}")
        } else {
            let frac = mantissa[1..].trim_end_matches('0');
            let frac = if frac.is_empty() { "0" } else { frac };
            format!("{sign}{}.{frac}e{e10}", &mantissa[..1])
        }
    }
}

fn round_half_even(x: &BigRational) -> BigInt {
    let fl = x.floor();
    let frac = x - &fl;
    let half = BigRational::new(BigInt::from(1), BigInt::from(2));
    let n = fl.to_integer();
    if frac > half || (frac == half && n.is_odd()) {
        n + 1
    } else {
        n
    }
}

impl DoubleDouble {
    pub const PI: Self = Self {
        hi: 3.141_592_653_589_793,
        lo: 1.224_646_799_147_353_2e-16,
    };
    pub const LN2: Self = Self {
        hi: 0.693_147_180_559_945_3,
        lo: 2.319_046_813_846_299_6e-17,
    };

    /// `p / q` for integers exactly representable in `f64`.
    pub fn ratio(p: f64, q: f64) -> Self {
        Self::new(p) / Self::new(q)
    }

    /// Multiply by `2^k` exactly.
    pub fn ldexp(self, k: i32) -> Self {
        let mut out = self;
        let mut k = k;
        while k != 0 {
            let step = k.clamp(-1000, 1000);
            let f = 2f64.powi(step);
            out = Self {
                hi: out.hi * f,
                lo: out.lo * f,
            };
            k -= step;
        }
        out
    }

    pub fn sqrt(self) -> Self {
        if self.hi <= 0.0 {
            return Self::new(self.hi.sqrt());
        }
        let x = Self::new(self.hi.sqrt());
        x + (self - x * x) / (x + x)
    }

    pub fn exp(self) -> Self {
        if self.hi > 709.8 {
            return Self::new(f64::INFINITY);
        }
        if self.hi < -745.2 {
            return Self::ZERO;
        }
        let k = (self.hi / Self::LN2.hi).round();
        let r = (self - Self::LN2 * Self::new(k)).ldexp(-10);
        // expm1(r) by Taylor series; |r| < 4e-4 so 10 terms reach 1e-35.
        let mut term = r;
        let mut s = r;
        for n in 2..=10 {
            term = term * r / Self::new(n as f64);
            s = s + term;
        }
        // e^{2r} − 1 = s·(s + 2)
        for _ in 0..10 {
            s = s * (s + Self::new(2.0));
        }
        (s + Self::ONE).ldexp(k as i32)
    }

    pub fn ln(self) -> Self {
        if !(self.hi > 0.0) {
            return Self::new(f64::NAN);
        }
        // ln(m·2^k) = ln m + k ln 2 with m in [1, 2)
        let k = self.hi.log2().floor() as i32;
        let m = self.ldexp(-k);
        let mut x = Self::new(m.hi.ln());
        for _ in 0..2 {
            x = x + m * (-x).exp() - Self::ONE;
        }
        x + Self::LN2 * Self::new(k as f64)
    }
}

fn big_from_f64(x: f64) -> BigInt {
    use num_traits::FromPrimitive;
    BigInt::from_f64(x.trunc()).unwrap_or_default()
}

impl From<f64> for DoubleDouble {
    fn from(x: f64) -> Self {
        Self::new(x)
    }
}

impl Add for DoubleDouble {
    type Output = Self;
    #[inline]
    fn add(self, o: Self) -> Self {
        let (s, e) = two_sum(self.hi, o.hi);
        let (t, f) = two_sum(self.lo, o.lo);
        let (s, e) = quick_two_sum(s, e + t);
        let (hi, lo) = quick_two_sum(s, e + f);
        Self { hi, lo }
    }
}

impl Neg for DoubleDouble {
    type Output = Self;
    fn neg(self) -> Self {
        Self {
            hi: -self.hi,
            lo: -self.lo,
        }
    }
}

impl Sub for DoubleDouble {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        self + (-o)
    }
}

impl Mul for DoubleDouble {
    type Output = Self;
    #[inline]
    fn mul(self, o: Self) -> Self {
        let (p, e) = two_prod(self.hi, o.hi);
        let e = e + (self.hi * o.lo + self.lo * o.hi);
        let (hi, lo) = quick_two_sum(p, e);
        Self { hi, lo }
    }
}

impl Div for DoubleDouble {
    type Output = Self;
    fn div(self, o: Self) -> Self {
        let q1 = self.hi / o.hi;
        let r = self - o * Self::new(q1);
        let q2 = r.hi / o.hi;
        let r = r - o * Self::new(q2);
        let q3 = r.hi / o.hi;
        let (hi, lo) = quick_two_sum(q1, q2);
        Self { hi, lo } + Self::new(q3)
    }
}
