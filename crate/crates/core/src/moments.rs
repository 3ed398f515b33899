//! Characteristic moments, density derivatives at the origin, the
//! Gil-Pelaez CDF and the zero-quantile location.

use crate::charfns::{make_stable_symmetric, CharFnDescriptor, MomentOrder};
use crate::dd::DoubleDouble;
use crate::error::{Error, Result};
use crate::quadrature::{integrate_oscillatory, integrate_semi_infinite, QuadResult};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::sync::OnceLock;

/// Tolerances shared by every quadrature in the crate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuadratureConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Panel mass, relative to the running integral, below which the
    /// semi-infinite range is truncated.
    pub truncation: f64,
    pub max_subdivisions: usize,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self {
            rel_tol: 1e-12,
            abs_tol: 1e-15,
            truncation: 1e-18,
            max_subdivisions: 400,
        }
    }
}

impl QuadratureConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0 && self.abs_tol > 0.0 && self.truncation > 0.0) {
            return Err(Error::Validation(
                "quadrature tolerances must be positive".into(),
            ));
        }
        if self.max_subdivisions == 0 {
            return Err(Error::Validation("max_subdivisions must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    ClosedForm,
    Quadrature,
}

/// Density derivatives at the origin, `D_k = f^{(k)}(0)` for `k = 0..=K`.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentVector {
    pub dvals: Vec<f64>,
    pub provenance: Vec<Provenance>,
    pub abs_err: Vec<f64>,
    pub symmetric: bool,
}

impl MomentVector {
    pub fn len(&self) -> usize {
        self.dvals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dvals.is_empty()
    }

    /// `B_m = −D_{m+1}`, the values of the recurrence symbols at the anchor.
    pub fn b_values(&self) -> Vec<f64> {
        self.dvals.iter().skip(1).map(|d| -d).collect()
    }
}

fn check_power(cf: &CharFnDescriptor, power: usize, order: usize) -> Result<()> {
    if cf.moment_order.admits_power(power) {
        return Ok(());
    }
    let available = match cf.moment_order {
        MomentOrder::Finite(p) => p,
        MomentOrder::Unbounded => usize::MAX,
    };
    Err(Error::MomentDoesNotExist {
        dist: cf.name.clone(),
        order,
        available,
    })
}

fn first_panel(power: usize) -> f64 {
    (power as f64).max(1.0)
}

/// `E_k = (1/π)∫₀^∞ t^{2k} φ(t) dt` by quadrature.
pub fn even_moment_quadrature(
    cf: &CharFnDescriptor,
    k: usize,
    cfg: &QuadratureConfig,
) -> Result<QuadResult> {
    if !cf.symmetric {
        return Err(Error::Shape(format!(
            "even moments need a symmetric characteristic function ({})",
            cf.name
        )));
    }
    check_power(cf, 2 * k, 2 * k)?;
    let p = 2 * k as i32;
    let mut r = integrate_semi_infinite(|t| t.powi(p) * cf.eval(t).re, first_panel(2 * k), cfg)?;
    r.value /= PI;
    r.abs_err /= PI;
    r.abs_mass /= PI;
    Ok(r)
}

/// Normalized even moment `E_k`, preferring the descriptor's closed form.
pub fn even_moment(cf: &CharFnDescriptor, k: usize, cfg: &QuadratureConfig) -> Result<f64> {
    if !cf.symmetric {
        return Err(Error::Shape(format!(
            "even moments need a symmetric characteristic function ({})",
            cf.name
        )));
    }
    check_power(cf, 2 * k, 2 * k)?;
    match cf.closed_moment(k) {
        Some(v) => v,
        None => Ok(even_moment_quadrature(cf, k, cfg)?.value),
    }
}

/// `E_k` in double-double: exact to ~1e−30 for closed forms, quadrature
/// accuracy otherwise.
pub fn even_moment_dd(cf: &CharFnDescriptor, k: usize, cfg: &QuadratureConfig) -> Result<DoubleDouble> {
    if !cf.symmetric {
        return Err(Error::Shape(format!(
            "even moments need a symmetric characteristic function ({})",
            cf.name
        )));
    }
    check_power(cf, 2 * k, 2 * k)?;
    match cf.closed_moment_dd(k) {
        Some(v) => v,
        None => Ok(DoubleDouble::new(even_moment_quadrature(cf, k, cfg)?.value)),
    }
}

/// `Re[(−i)^k z]`.
fn rotate_re(z: Complex64, k: usize) -> f64 {
    match k % 4 {
        0 => z.re,
        1 => z.im,
        2 => -z.re,
        _ => -z.im,
    }
}

/// `D_k = f^{(k)}(0) = (1/π)∫₀^∞ t^k Re[(−i)^k φ(t)] dt` by quadrature,
/// with exact zeros for odd `k` when `φ` is symmetric.
pub fn derivative_at_zero_quadrature(
    cf: &CharFnDescriptor,
    k: usize,
    cfg: &QuadratureConfig,
) -> Result<QuadResult> {
    check_power(cf, k, k)?;
    if cf.symmetric && k % 2 == 1 {
        return Ok(QuadResult {
            value: 0.0,
            abs_err: 0.0,
            abs_mass: 0.0,
            evals: 0,
        });
    }
    let p = k as i32;
    let mut r = integrate_semi_infinite(
        |t| t.powi(p) * rotate_re(cf.eval(t), k),
        first_panel(k),
        cfg,
    )?;
    r.value /= PI;
    r.abs_err /= PI;
    r.abs_mass /= PI;
    Ok(r)
}

/// `D_k = f^{(k)}(0)`, through the closed even moments when available.
pub fn derivative_at_zero(cf: &CharFnDescriptor, k: usize, cfg: &QuadratureConfig) -> Result<f64> {
    check_power(cf, k, k)?;
    if cf.symmetric {
        if k % 2 == 1 {
            return Ok(0.0);
        }
        if let Some(e) = cf.closed_moment(k / 2) {
            let e = e?;
            return Ok(if (k / 2) % 2 == 0 { e } else { -e });
        }
    }
    Ok(derivative_at_zero_quadrature(cf, k, cfg)?.value)
}

/// `D_0..=D_K`, closed forms preferred.
pub fn build_moment_vector(
    cf: &CharFnDescriptor,
    max_k: usize,
    cfg: &QuadratureConfig,
) -> Result<MomentVector> {
    check_power(cf, max_k, max_k)?;
    let closed = cf.symmetric && cf.has_closed_moments();
    let mut mv = MomentVector {
        dvals: Vec::with_capacity(max_k + 1),
        provenance: Vec::with_capacity(max_k + 1),
        abs_err: Vec::with_capacity(max_k + 1),
        symmetric: cf.symmetric,
    };
    for k in 0..=max_k {
        let (value, err) = if closed {
            (derivative_at_zero(cf, k, cfg)?, 0.0)
        } else {
            let r = derivative_at_zero_quadrature(cf, k, cfg)?;
            (r.value, r.abs_err)
        };
        if !value.is_finite() {
            return Err(Error::NonConvergence(format!(
                "D_{k} of {} is not finite",
                cf.name
            )));
        }
        mv.dvals.push(value);
        mv.provenance.push(if closed {
            Provenance::ClosedForm
        } else {
            Provenance::Quadrature
        });
        mv.abs_err.push(err);
    }
    Ok(mv)
}

/// CDF value with its quadrature error estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CdfValue {
    pub value: f64,
    pub abs_err: f64,
}

fn gil_pelaez_raw(cf: &CharFnDescriptor, x: f64, cfg: &QuadratureConfig) -> Result<CdfValue> {
    // F(x) = 1/2 − (1/π)∫₀^∞ Im[φ(t) e^{−itx}] / t dt
    let integrand = |t: f64| {
        let z = cf.eval(t) * Complex64::from_polar(1.0, -t * x);
        z.im / t
    };
    let r = if x.abs() > 1.0 {
        integrate_oscillatory(integrand, PI / x.abs(), cfg)?
    } else {
        integrate_semi_infinite(integrand, 1.0, cfg)?
    };
    let value = (0.5 - r.value / PI).clamp(0.0, 1.0);
    Ok(CdfValue {
        value,
        abs_err: r.abs_err / PI,
    })
}

static SIGN_CHECK: OnceLock<std::result::Result<(), String>> = OnceLock::new();

/// Cauchy `F(1) = 3/4` guard against a flipped inversion sign, run once.
fn sign_convention_check() -> Result<()> {
    SIGN_CHECK
        .get_or_init(|| {
            let cauchy = make_stable_symmetric(1.0).map_err(|e| e.to_string())?;
            let f = gil_pelaez_raw(&cauchy, 1.0, &QuadratureConfig::default())
                .map_err(|e| e.to_string())?;
            if (f.value - 0.75).abs() > 1e-10 {
                return Err(format!(
                    "Gil-Pelaez sign check failed: Cauchy F(1) = {}",
                    f.value
                ));
            }
            Ok(())
        })
        .clone()
        .map_err(Error::NonConvergence)
}

/// `F(x)` from `φ` alone, with error estimate.
pub fn gil_pelaez_cdf_with_error(
    cf: &CharFnDescriptor,
    x: f64,
    cfg: &QuadratureConfig,
) -> Result<CdfValue> {
    sign_convention_check()?;
    if !x.is_finite() {
        return Ok(CdfValue {
            value: if x > 0.0 { 1.0 } else { 0.0 },
            abs_err: 0.0,
        });
    }
    gil_pelaez_raw(cf, x, cfg)
}

/// `F(x)` from `φ` alone.
pub fn gil_pelaez_cdf(cf: &CharFnDescriptor, x: f64, cfg: &QuadratureConfig) -> Result<f64> {
    Ok(gil_pelaez_cdf_with_error(cf, x, cfg)?.value)
}

/// The `u₀` with `w(u₀) = 0`; exactly `1/2` for symmetric laws.
pub fn zero_location(cf: &CharFnDescriptor, cfg: &QuadratureConfig) -> Result<f64> {
    if cf.symmetric {
        return Ok(0.5);
    }
    gil_pelaez_cdf(cf, 0.0, cfg)
}
