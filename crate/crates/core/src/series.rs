//! Central power series of the quantile about the zero-quantile anchor.
//!
//! With `x = w′(u₀)` and the anchor values of the recurrence polynomials,
//! `w(u) = Σ_k q_k (u − u₀)^k` where `q₁ = x` and
//! `q_k = x^{k+1} P_k / k!` for `k ≥ 2`.
//!
//! Symmetric series only carry odd orders. They are evaluated in
//! `v = 2u − 1`, `w = v²` as `v·(a₀ + w·(a₁ + …))` with
//! `a_j = q_{2j+1} / 2^{2j+1}`.

use crate::charfns::{CharFnDescriptor, DistSpec};
use crate::dd::DoubleDouble;
use crate::diffring::SymbolicStore;
use crate::error::{Error, Result};
use crate::moments::{build_moment_vector, even_moment_dd, zero_location, MomentVector, QuadratureConfig};
use num_bigint::BigInt;
use serde::{Deserialize, Serialize};

/// Default number of odd corrections beyond the linear term (series order 71).
pub const DEFAULT_TERMS: usize = 35;

/// Power series `w(u) = Σ_{k=1}^{order} q_k (u − u₀)^k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CentralSeries {
    pub u0: f64,
    pub wdash: f64,
    /// `q_k` at index `k − 1`; even entries are zero for symmetric series.
    pub qcoeffs: Vec<f64>,
    /// Low halves of the double-double `q_k`, when the build kept them.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub qcoeffs_lo: Vec<f64>,
    pub symmetric: bool,
    /// Corrections beyond the linear term: orders `3, 5, …, 2N+1` when
    /// symmetric, `2, …, N+1` otherwise.
    pub nterms: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dist: Option<DistSpec>,
}

/// Highest series order needed for `nterms` corrections.
pub fn series_order(symmetric: bool, nterms: usize) -> usize {
    if symmetric {
        2 * nterms + 1
    } else {
        nterms + 1
    }
}

impl CentralSeries {
    pub fn order(&self) -> usize {
        self.qcoeffs.len()
    }

    /// `q_k`, zero beyond the stored order.
    pub fn q(&self, k: usize) -> f64 {
        if k == 0 {
            0.0
        } else {
            self.qcoeffs.get(k - 1).copied().unwrap_or(0.0)
        }
    }

    /// `a_j = q_{2j+1}/2^{2j+1}` of the `v = 2u − 1` Horner form.
    pub fn horner_coeffs(&self) -> Result<Vec<f64>> {
        if !self.symmetric {
            return Err(Error::Shape(
                "the v = 2u - 1 Horner form needs a symmetric series".into(),
            ));
        }
        Ok((0..=self.nterms)
            .map(|j| {
                let k = 2 * j + 1;
                self.q(k) * 0.5f64.powi(k as i32)
            })
            .collect())
    }

    /// Horner coefficients with the extra precision of the build, if any.
    pub fn horner_coeffs_dd(&self) -> Result<Vec<DoubleDouble>> {
        let a = self.horner_coeffs()?;
        Ok(a.iter()
            .enumerate()
            .map(|(j, &hi)| {
                let k = 2 * j + 1;
                let lo = self.qcoeffs_lo.get(k - 1).copied().unwrap_or(0.0);
                DoubleDouble { hi, lo: lo * 0.5f64.powi(k as i32) }
            })
            .collect())
    }

    /// `w(u)` by nested multiplication.
    pub fn eval(&self, u: f64) -> f64 {
        if self.symmetric {
            let v = 2.0 * u - 1.0;
            let w = v * v;
            let a = self.horner_coeffs().expect("symmetric");
            v * a.iter().rev().fold(0.0, |acc, &c| acc * w + c)
        } else {
            let d = u - self.u0;
            d * self.qcoeffs.iter().rev().fold(0.0, |acc, &c| acc * d + c)
        }
    }

    /// `w′(u)`.
    pub fn derivative(&self, u: f64) -> f64 {
        if self.symmetric {
            let v = 2.0 * u - 1.0;
            let w = v * v;
            let a = self.horner_coeffs().expect("symmetric");
            let s = a
                .iter()
                .enumerate()
                .rev()
                .fold(0.0, |acc, (j, &c)| acc * w + (2 * j + 1) as f64 * c);
            2.0 * s
        } else {
            let d = u - self.u0;
            self.qcoeffs
                .iter()
                .enumerate()
                .rev()
                .fold(0.0, |acc, (i, &c)| acc * d + (i + 1) as f64 * c)
        }
    }

    /// Whether `w′ > 0` at `n` evenly spaced points of `[lo, hi]`.
    pub fn increasing_on(&self, lo: f64, hi: f64, n: usize) -> bool {
        let n = n.max(2);
        (0..n).all(|i| {
            let u = lo + (hi - lo) * i as f64 / (n - 1) as f64;
            self.derivative(u) > 0.0
        })
    }

    /// Series of `cX` for `c > 0`. The distribution label is dropped since it
    /// no longer describes the law.
    pub fn scaled(&self, c: f64) -> Result<CentralSeries> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::Domain(format!("scale must be positive and finite, got {c}")));
        }
        let mut out = self.clone();
        out.wdash *= c;
        for q in out.qcoeffs.iter_mut().chain(out.qcoeffs_lo.iter_mut()) {
            *q *= c;
        }
        out.dist = None;
        Ok(out)
    }

    /// The same series cut back to `nterms` corrections.
    pub fn truncated(&self, nterms: usize) -> CentralSeries {
        let nterms = nterms.min(self.nterms);
        let mut out = self.clone();
        out.nterms = nterms;
        out.qcoeffs.truncate(series_order(self.symmetric, nterms));
        out.qcoeffs_lo.truncate(series_order(self.symmetric, nterms));
        out
    }
}

/// `w(u)` of a central series.
pub fn eval_series(cs: &CentralSeries, u: f64) -> f64 {
    cs.eval(u)
}

/// Horner coefficients in `v = 2u − 1`.
pub fn horner_coeffs(cs: &CentralSeries) -> Result<Vec<f64>> {
    cs.horner_coeffs()
}

/// `w′(u₀) = 1/f(0) = 1/D₀`.
pub fn slope_at_anchor(mv: &MomentVector) -> Result<f64> {
    let d0 = mv.dvals.first().copied().unwrap_or(f64::NAN);
    density_slope(d0)
}

fn density_slope(d0: f64) -> Result<f64> {
    if !(d0 > 0.0) || !d0.is_finite() {
        return Err(Error::DegenerateDensity(d0));
    }
    Ok(1.0 / d0)
}

fn factorial_dd(n: usize) -> DoubleDouble {
    let mut f = BigInt::from(1u32);
    for k in 2..=n {
        f *= k;
    }
    DoubleDouble::from_bigint(&f)
}

/// Build the central series with the process-wide symbolic store.
pub fn build_series(
    cf: &CharFnDescriptor,
    nterms: usize,
    cfg: &QuadratureConfig,
) -> Result<CentralSeries> {
    build_series_with(cf, SymbolicStore::global(), nterms, cfg)
}

pub fn build_series_with(
    cf: &CharFnDescriptor,
    store: &SymbolicStore,
    nterms: usize,
    cfg: &QuadratureConfig,
) -> Result<CentralSeries> {
    cfg.validate()?;
    if cf.symmetric {
        build_symmetric(cf, store, nterms, cfg)
    } else {
        build_asymmetric(cf, store, nterms, cfg)
    }
}

fn build_symmetric(
    cf: &CharFnDescriptor,
    store: &SymbolicStore,
    nterms: usize,
    cfg: &QuadratureConfig,
) -> Result<CentralSeries> {
    // E_0..E_N; refusal happens here if a moment diverges.
    let mut evals = Vec::with_capacity(nterms + 1);
    for j in 0..=nterms {
        let e = even_moment_dd(cf, j, cfg)?;
        if !e.hi.is_finite() {
            return Err(Error::NonConvergence(format!("E_{j} of {} is not finite", cf.name)));
        }
        evals.push(e);
    }
    density_slope(evals[0].to_f64())?;
    let x = DoubleDouble::ONE / evals[0];
    let wdash = x.to_f64();
    let order = series_order(true, nterms);
    let mut qcoeffs = vec![0.0; order];
    let mut qcoeffs_lo = vec![0.0; order];
    qcoeffs[0] = x.hi;
    qcoeffs_lo[0] = x.lo;
    if nterms > 0 {
        let seq = store.symmetric_sequence(order)?;
        for n in (3..=order).step_by(2) {
            let p = seq.odd(n).expect("sequence covers order");
            let pn = p.eval_dd(&evals, x)?;
            let qd = pn * x.powi(n as u32 + 1) / factorial_dd(n);
            let q = qd.hi;
            if !q.is_finite() {
                return Err(Error::NonConvergence(format!(
                    "series coefficient q_{n} of {} overflowed",
                    cf.name
                )));
            }
            qcoeffs[n - 1] = q;
            qcoeffs_lo[n - 1] = qd.lo;
        }
    }
    Ok(CentralSeries {
        u0: 0.5,
        wdash,
        qcoeffs,
        qcoeffs_lo,
        symmetric: true,
        nterms,
        dist: cf.spec.clone(),
    })
}

fn build_asymmetric(
    cf: &CharFnDescriptor,
    store: &SymbolicStore,
    nterms: usize,
    cfg: &QuadratureConfig,
) -> Result<CentralSeries> {
    let order = series_order(false, nterms);
    // P_n carries B_0..B_{n−2}, i.e. D_1..D_{n−1}.
    let mv = build_moment_vector(cf, order.saturating_sub(1), cfg)?;
    let wdash = slope_at_anchor(&mv)?;
    let u0 = zero_location(cf, cfg)?;
    let x = DoubleDouble::ONE / DoubleDouble::new(mv.dvals[0]);
    let b: Vec<DoubleDouble> = mv.b_values().into_iter().map(DoubleDouble::new).collect();
    let mut qcoeffs = vec![0.0; order];
    qcoeffs[0] = wdash;
    if order >= 2 {
        let seq = store.p_sequence(order)?;
        for n in 2..=order {
            let pn = seq[n - 2].eval_dd(&b, x)?;
            let q = (pn * x.powi(n as u32 + 1) / factorial_dd(n)).to_f64();
            if !q.is_finite() {
                return Err(Error::NonConvergence(format!(
                    "series coefficient q_{n} of {} overflowed",
                    cf.name
                )));
            }
            qcoeffs[n - 1] = q;
        }
    }
    Ok(CentralSeries {
        u0,
        wdash,
        qcoeffs,
        qcoeffs_lo: Vec::new(),
        symmetric: false,
        nterms,
        dist: cf.spec.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::charfns::{make_gaussian, make_stable_symmetric, make_variance_gamma};
    use crate::special::normal_quantile;
    use std::f64::consts::PI;

    fn store() -> SymbolicStore {
        SymbolicStore::new(None)
    }

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    // Maclaurin coefficients of the inverse normal CDF about ½ from the
    // inverse-error-function recursion c_k = Σ c_m c_{k−1−m}/((m+1)(2m+1)).
    fn inverse_normal_taylor(n: usize) -> Vec<f64> {
        let mut c = vec![1.0];
        for k in 1..n {
            let mut s = 0.0;
            for m in 0..k {
                s += c[m] * c[k - 1 - m] / ((m + 1) as f64 * (2 * m + 1) as f64);
            }
            c.push(s);
        }
        // erfinv(z) = Σ c_k/(2k+1)·(√π z/2)^{2k+1}, Φ⁻¹(u) = √2·erfinv(2u − 1)
        (0..n)
            .map(|k| {
                let p = (2 * k + 1) as i32;
                2f64.sqrt() * c[k] / (2 * k + 1) as f64 * PI.sqrt().powi(p)
            })
            .collect()
    }

    #[test]
    fn gaussian_leading_coefficients() {
        let cs = build_series_with(&make_gaussian(0.0).unwrap(), &store(), 5, &Default::default()).unwrap();
        let s2 = 2f64.sqrt();
        let expected = [
            (2.0 * PI).sqrt(),
            s2 * PI.powf(1.5) / 3.0,
            7.0 * PI.powf(2.5) / (15.0 * s2),
            127.0 * PI.powf(3.5) / (315.0 * s2),
            4369.0 * PI.powf(4.5) / (11340.0 * s2),
            34807.0 * PI.powf(5.5) / (89100.0 * s2),
        ];
        let oracle = inverse_normal_taylor(6);
        for (j, e) in expected.iter().enumerate() {
            let q = cs.q(2 * j + 1);
            assert!(rel(q, *e) < 1e-13, "q_{}: {q} vs {e}", 2 * j + 1);
            assert!(rel(q, oracle[j]) < 1e-13);
            assert_eq!(cs.q(2 * j + 2), 0.0);
        }
    }

    #[test]
    fn gaussian_twenty_terms_match_taylor_oracle() {
        let cs = build_series_with(&make_gaussian(0.0).unwrap(), &store(), 20, &Default::default()).unwrap();
        for (j, c) in inverse_normal_taylor(21).iter().enumerate() {
            assert!(rel(cs.q(2 * j + 1), *c) < 1e-12, "j={j}");
        }
        let u = 0.7;
        assert!(rel(cs.eval(u), normal_quantile(u)) < 1e-13);
    }

    #[test]
    fn stable_slopes_and_cubic_term() {
        for &alpha in &[1.0, 1.5, 2.0] {
            let cs = build_series_with(&make_stable_symmetric(alpha).unwrap(), &store(), 3, &Default::default())
                .unwrap();
            let g = crate::special::gamma;
            assert!(rel(cs.wdash, PI / g(1.0 + 1.0 / alpha)) < 1e-14);
            let q3 = PI.powi(3) * alpha.powi(3) * g(3.0 / alpha) / (6.0 * g(1.0 / alpha).powi(4));
            assert!(rel(cs.q(3), q3) < 1e-13, "alpha={alpha}");
        }
    }

    #[test]
    fn cauchy_matches_tangent_series() {
        let cs = build_series_with(&make_stable_symmetric(1.0).unwrap(), &store(), 8, &Default::default()).unwrap();
        assert!(rel(cs.q(1), PI) < 1e-15);
        assert!(rel(cs.q(3), PI.powi(3) / 3.0) < 1e-14);
        assert!(rel(cs.q(5), 2.0 * PI.powi(5) / 15.0) < 1e-14);
        let a = cs.horner_coeffs().unwrap();
        assert!(rel(a[0], PI / 2.0) < 1e-15);
        assert!(rel(a[1], PI.powi(3) / 24.0) < 1e-14);
        let u = 0.6;
        assert!(rel(cs.eval(u), (PI * (u - 0.5)).tan()) < 1e-12);
    }

    #[test]
    fn symmetric_shape() {
        let cs = build_series_with(&make_gaussian(0.0).unwrap(), &store(), 4, &Default::default()).unwrap();
        assert_eq!(cs.eval(0.5), 0.0);
        for &u in &[0.1, 0.33, 0.77] {
            assert!((cs.eval(u) + cs.eval(1.0 - u)).abs() < 1e-15);
        }
        assert_eq!(cs.order(), 9);
        assert!(cs.increasing_on(0.05, 0.95, 200));
        // Numeric derivative agrees with the analytic one.
        let h = 1e-6;
        let fd = (cs.eval(0.8 + h) - cs.eval(0.8 - h)) / (2.0 * h);
        assert!(rel(cs.derivative(0.8), fd) < 1e-8);
    }

    #[test]
    fn truncation_is_stable() {
        let st = store();
        let long = build_series_with(&make_stable_symmetric(1.5).unwrap(), &st, 9, &Default::default()).unwrap();
        let short = build_series_with(&make_stable_symmetric(1.5).unwrap(), &st, 4, &Default::default()).unwrap();
        assert_eq!(long.truncated(4), short);
    }

    #[test]
    fn divergent_moments_are_refused() {
        let vg = make_variance_gamma(1.0, 1.0).unwrap();
        let err = build_series_with(&vg, &store(), 10, &Default::default()).unwrap_err();
        assert!(matches!(err, Error::MomentDoesNotExist { .. }));
        assert!(err.to_string().contains("moment does not exist"));
        assert!(build_series_with(&vg, &store(), 0, &Default::default()).is_ok());
    }

    #[test]
    fn asymmetric_gaussian_is_shifted_normal() {
        let cf = make_gaussian(1.0).unwrap();
        let cs = build_series_with(&cf, &store(), 30, &Default::default()).unwrap();
        assert!((cs.u0 - 0.158_655_253_931_457_05).abs() < 1e-10);
        assert!(cs.horner_coeffs().is_err());
        for i in 0..=16 {
            let u = 0.08 + 0.01 * i as f64;
            let exact = normal_quantile(u) + 1.0;
            let got = cs.eval(u);
            assert!((got - exact).abs() < 1e-8 * exact.abs().max(1.0), "u={u}: {got} vs {exact}");
        }
    }

    #[test]
    fn slope_rejects_degenerate_density() {
        let mv = MomentVector {
            dvals: vec![0.0],
            provenance: vec![],
            abs_err: vec![],
            symmetric: true,
        };
        assert!(matches!(slope_at_anchor(&mv), Err(Error::DegenerateDensity(_))));
    }
}
