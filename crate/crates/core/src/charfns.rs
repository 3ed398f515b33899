//! Catalog of characteristic functions.
//!
//! Every descriptor carries the evaluator `t ↦ φ(t)`, a symmetry flag, the
//! highest power of `|t|` against which `φ` is absolutely integrable, and,
//! where one is known, a closed form for the normalized even moments
//! `E_k = (1/2π)∫ t^{2k} φ(t) dt`.

use crate::dd::DoubleDouble;
use crate::error::{Error, Result};
use crate::special::{bessel_k, bessel_k_scaled, gamma, gamma_dd};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

pub type CharFn = Arc<dyn Fn(f64) -> Complex64 + Send + Sync>;
pub type ClosedMoments = Arc<dyn Fn(usize) -> Result<DoubleDouble> + Send + Sync>;

/// Highest power `p` of `|t|` for which `∫|t|^p |φ(t)| dt` converges.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MomentOrder {
    Unbounded,
    Finite(usize),
}

impl MomentOrder {
    pub fn admits_power(self, p: usize) -> bool {
        match self {
            MomentOrder::Unbounded => true,
            MomentOrder::Finite(max) => p <= max,
        }
    }
}

/// Serializable description of a catalog distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "dist", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DistSpec {
    Gaussian {
        #[serde(default)]
        mu: f64,
    },
    Student {
        n: f64,
    },
    Stable {
        alpha: f64,
        #[serde(default)]
        beta: f64,
    },
    Sgh {
        lambda: f64,
        alpha: f64,
        delta: f64,
    },
    LevyAreaP {
        r: f64,
    },
    /// Symmetric variance-gamma evaluator, `(α²/(α²+t²))^λ`.
    CustomVg {
        lambda: f64,
        #[serde(default = "one")]
        alpha: f64,
    },
}

fn one() -> f64 {
    1.0
}

impl DistSpec {
    pub fn parse_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("spec serializes")
    }

    /// Build the descriptor for this spec.
    pub fn descriptor(&self) -> Result<CharFnDescriptor> {
        match *self {
            DistSpec::Gaussian { mu } => make_gaussian(mu),
            DistSpec::Student { n } => make_student(n),
            DistSpec::Stable { alpha, beta } => {
                if beta == 0.0 {
                    make_stable_symmetric(alpha)
                } else {
                    make_stable(alpha, beta)
                }
            }
            DistSpec::Sgh {
                lambda,
                alpha,
                delta,
            } => make_sgh(lambda, alpha, delta),
            DistSpec::LevyAreaP { r } => make_levy_area_p(r),
            DistSpec::CustomVg { lambda, alpha } => make_variance_gamma(lambda, alpha),
        }
    }
}

impl fmt::Display for DistSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_json())
    }
}

/// A characteristic function with the metadata the pipeline needs.
#[derive(Clone)]
pub struct CharFnDescriptor {
    pub name: String,
    pub params: Vec<(String, f64)>,
    eval: CharFn,
    pub symmetric: bool,
    pub moment_order: MomentOrder,
    closed_moments: Option<ClosedMoments>,
    /// Catalog spec this descriptor was built from, if any.
    pub spec: Option<DistSpec>,
}

impl fmt::Debug for CharFnDescriptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CharFnDescriptor")
            .field("name", &self.name)
            .field("params", &self.params)
            .field("symmetric", &self.symmetric)
            .field("moment_order", &self.moment_order)
            .field("closed_moments", &self.closed_moments.is_some())
            .finish()
    }
}

impl CharFnDescriptor {
    pub fn eval(&self, t: f64) -> Complex64 {
        (self.eval)(t)
    }

    pub fn has_closed_moments(&self) -> bool {
        self.closed_moments.is_some()
    }

    /// Closed-form `E_k`, if this descriptor has one.
    pub fn closed_moment(&self, k: usize) -> Option<Result<f64>> {
        self.closed_moment_dd(k).map(|r| r.map(DoubleDouble::to_f64))
    }

    /// Closed-form `E_k` in double-double.
    pub fn closed_moment_dd(&self, k: usize) -> Option<Result<DoubleDouble>> {
        self.closed_moments.as_ref().map(|m| m(k))
    }

    pub fn param(&self, name: &str) -> Option<f64> {
        self.params.iter().find(|(n, _)| n == name).map(|(_, v)| *v)
    }

    /// Descriptor of `cX`, i.e. `φ(t) ↦ φ(ct)`. Its quantile is `c·w(u)`.
    pub fn scaled(&self, c: f64) -> Result<CharFnDescriptor> {
        if !(c > 0.0) {
            return Err(Error::Domain(format!("scale factor must be positive, got {c}")));
        }
        let inner = self.eval.clone();
        let closed = self.closed_moments.clone().map(|m| {
            Arc::new(move |k: usize| Ok(m(k)? / DoubleDouble::new(c).powi(2 * k as u32 + 1)))
                as ClosedMoments
        });
        let mut params = self.params.clone();
        params.push(("scale".into(), c));
        Ok(CharFnDescriptor {
            name: self.name.clone(),
            params,
            eval: Arc::new(move |t| inner(c * t)),
            symmetric: self.symmetric,
            moment_order: self.moment_order,
            closed_moments: closed,
            spec: None,
        })
    }

    /// Descriptor of `X + a`: `φ(t) ↦ e^{ita} φ(t)`.
    pub fn shifted(&self, a: f64) -> CharFnDescriptor {
        let inner = self.eval.clone();
        let mut params = self.params.clone();
        params.push(("shift".into(), a));
        CharFnDescriptor {
            name: self.name.clone(),
            params,
            eval: Arc::new(move |t| Complex64::from_polar(1.0, t * a) * inner(t)),
            symmetric: self.symmetric && a == 0.0,
            moment_order: self.moment_order,
            closed_moments: if a == 0.0 {
                self.closed_moments.clone()
            } else {
                None
            },
            spec: None,
        }
    }

    /// Probe `φ(0) = 1`, `|φ| ≤ 1` and the symmetry claim on a fixed grid.
    pub fn validate(&self) -> Result<()> {
        let phi0 = self.eval(0.0);
        if (phi0 - Complex64::new(1.0, 0.0)).norm() > 1e-14 {
            return Err(Error::Validation(format!(
                "{}: φ(0) = {phi0} is not 1",
                self.name
            )));
        }
        for t in probe_grid() {
            for s in [t, -t] {
                let v = self.eval(s);
                if !v.re.is_finite() || !v.im.is_finite() {
                    return Err(Error::Validation(format!(
                        "{}: φ({s}) is not finite",
                        self.name
                    )));
                }
                if v.norm() > 1.0 + 1e-14 {
                    return Err(Error::Validation(format!(
                        "{}: |φ({s})| = {} exceeds 1",
                        self.name,
                        v.norm()
                    )));
                }
            }
            if self.symmetric {
                let a = self.eval(t);
                let b = self.eval(-t);
                if a.im.abs() > 1e-14 || (a.re - b.re).abs() > 1e-14 || b.im.abs() > 1e-14 {
                    return Err(Error::Validation(format!(
                        "{}: declared symmetric but φ({t}) = {a}, φ(−{t}) = {b}",
                        self.name
                    )));
                }
            }
        }
        Ok(())
    }
}

fn probe_grid() -> impl Iterator<Item = f64> {
    (0..=40).map(|i| 10f64.powf(-3.0 + 5.0 * i as f64 / 40.0))
}

/// Wrap an arbitrary evaluator. The symmetry claim and normalization are probed.
pub fn make_custom(
    name: &str,
    eval: CharFn,
    symmetric: bool,
    moment_order: MomentOrder,
) -> Result<CharFnDescriptor> {
    let d = CharFnDescriptor {
        name: name.to_string(),
        params: Vec::new(),
        eval,
        symmetric,
        moment_order,
        closed_moments: None,
        spec: None,
    };
    d.validate()?;
    Ok(d)
}

/// Unit-variance Gaussian with mean `mu`.
pub fn make_gaussian(mu: f64) -> Result<CharFnDescriptor> {
    if !mu.is_finite() {
        return Err(Error::Domain(format!("gaussian mean must be finite, got {mu}")));
    }
    let closed: Option<ClosedMoments> = if mu == 0.0 {
        // E_k = (2k−1)!! / √(2π)
        Some(Arc::new(|k: usize| {
            let mut acc = DoubleDouble::ONE;
            for j in 1..=k {
                acc = acc * DoubleDouble::new((2 * j - 1) as f64);
            }
            Ok(acc / sqrt_2pi_dd())
        }))
    } else {
        None
    };
    Ok(CharFnDescriptor {
        name: "gaussian".into(),
        params: vec![("mu".into(), mu)],
        eval: Arc::new(move |t| Complex64::from_polar((-0.5 * t * t).exp(), mu * t)),
        symmetric: mu == 0.0,
        moment_order: MomentOrder::Unbounded,
        closed_moments: closed,
        spec: Some(DistSpec::Gaussian { mu }),
    })
}

fn sqrt_2pi_dd() -> DoubleDouble {
    DoubleDouble {
        hi: 2.506_628_274_631_000_2,
        lo: -1.832_857_092_720_036_8e-16,
    }
}

fn pi_dd() -> DoubleDouble {
    DoubleDouble {
        hi: PI,
        lo: 1.224_646_799_147_353_2e-16,
    }
}

/// `z^ν K_ν(z)`, finite as `z → 0` for `ν > 0`.
fn z_pow_bessel_k(nu: f64, z: f64) -> f64 {
    if z < 1e-30 {
        return 2f64.powf(nu - 1.0) * gamma(nu);
    }
    match bessel_k_scaled(nu, z) {
        Ok(k) => (nu * z.ln() - z).exp() * k,
        Err(_) => f64::NAN,
    }
}

/// Student t with `n` degrees of freedom.
pub fn make_student(n: f64) -> Result<CharFnDescriptor> {
    if !(n > 0.0) || !n.is_finite() {
        return Err(Error::Domain(format!("student degrees of freedom must be > 0, got {n}")));
    }
    let nu = 0.5 * n;
    let norm = 2f64.powf(1.0 - nu) / gamma(nu);
    let sqrt_n = n.sqrt();
    let closed: ClosedMoments = Arc::new(move |k: usize| {
        // 4^k n^{−k−1/2} Γ(k+1/2) Γ(k+n/2+1/2) / (π Γ(n/2))
        let kf = k as f64;
        let g1 = gamma_dd(DoubleDouble::new(kf + 0.5));
        let g2 = gamma_dd(DoubleDouble::new(kf) + DoubleDouble::new(nu) + DoubleDouble::new(0.5));
        let scale = DoubleDouble::new(4f64.powi(k as i32))
            * DoubleDouble::new(n.powf(-kf - 0.5));
        let denom = pi_dd() * gamma_dd(DoubleDouble::new(nu));
        Ok(scale * g1 * g2 / denom)
    });
    Ok(CharFnDescriptor {
        name: "student".into(),
        params: vec![("n".into(), n)],
        eval: Arc::new(move |t| {
            if t == 0.0 {
                return Complex64::new(1.0, 0.0);
            }
            Complex64::new(norm * z_pow_bessel_k(nu, sqrt_n * t.abs()), 0.0)
        }),
        symmetric: true,
        moment_order: MomentOrder::Unbounded,
        closed_moments: Some(closed),
        spec: Some(DistSpec::Student { n }),
    })
}

/// Symmetric α-stable law in standard form, `φ(t) = exp(−|t|^α)`.
pub fn make_stable_symmetric(alpha: f64) -> Result<CharFnDescriptor> {
    if !(alpha > 0.0 && alpha <= 2.0) {
        return Err(Error::Domain(format!("stable alpha must lie in (0, 2], got {alpha}")));
    }
    let closed: ClosedMoments = Arc::new(move |k: usize| {
        // E_k = Γ((2k+1)/α) / (π α)
        let arg = DoubleDouble::new((2 * k + 1) as f64) / DoubleDouble::new(alpha);
        if arg.hi > 171.6 {
            return Err(Error::Domain(format!(
                "stable moment E_{k} overflows double precision (alpha = {alpha})"
            )));
        }
        let g = gamma_dd(arg);
        Ok(g / (pi_dd() * DoubleDouble::new(alpha)))
    });
    Ok(CharFnDescriptor {
        name: "stable".into(),
        params: vec![("alpha".into(), alpha), ("beta".into(), 0.0)],
        eval: Arc::new(move |t| Complex64::new((-t.abs().powf(alpha)).exp(), 0.0)),
        symmetric: true,
        moment_order: MomentOrder::Unbounded,
        closed_moments: Some(closed),
        spec: Some(DistSpec::Stable { alpha, beta: 0.0 }),
    })
}

/// Skewed α-stable law, `φ(t) = exp(−|t|^α (1 − iβ sign(t) tan(απ/2)))`.
///
/// Provided for the zero-location computation; no closed moments.
pub fn make_stable(alpha: f64, beta: f64) -> Result<CharFnDescriptor> {
    if !(alpha > 0.0 && alpha <= 2.0) {
        return Err(Error::Domain(format!("stable alpha must lie in (0, 2], got {alpha}")));
    }
    if !(-1.0..=1.0).contains(&beta) {
        return Err(Error::Domain(format!("stable beta must lie in [−1, 1], got {beta}")));
    }
    if beta == 0.0 {
        return make_stable_symmetric(alpha);
    }
    if alpha == 1.0 {
        return Err(Error::Domain(
            "skewed stable with alpha = 1 is not representable in this parametrization".into(),
        ));
    }
    let skew = beta * (alpha * PI / 2.0).tan();
    Ok(CharFnDescriptor {
        name: "stable".into(),
        params: vec![("alpha".into(), alpha), ("beta".into(), beta)],
        eval: Arc::new(move |t| {
            let a = t.abs().powf(alpha);
            Complex64::from_polar((-a).exp(), a * skew * t.signum())
        }),
        symmetric: false,
        moment_order: MomentOrder::Unbounded,
        closed_moments: None,
        spec: Some(DistSpec::Stable { alpha, beta }),
    })
}

/// Closed-form zero-quantile location of the skewed stable law,
/// `1/2 − arctan(β tan(απ/2)) / (πα)`.
pub fn stable_zero_location(alpha: f64, beta: f64) -> f64 {
    0.5 - (beta * (alpha * PI / 2.0).tan()).atan() / (PI * alpha)
}

/// Symmetric generalized hyperbolic law.
pub fn make_sgh(lambda: f64, alpha: f64, delta: f64) -> Result<CharFnDescriptor> {
    if !(alpha > 0.0) || !(delta > 0.0) || !(lambda < 2.0) {
        return Err(Error::Domain(format!(
            "sgh needs alpha > 0, delta > 0, lambda < 2 (got lambda={lambda}, alpha={alpha}, delta={delta})"
        )));
    }
    let ad = alpha * delta;
    let k_lambda_scaled = bessel_k_scaled(lambda, ad)?;
    let closed: ClosedMoments = Arc::new(move |k: usize| {
        // 2^{k−1/2} Γ(k+1/2) (α/δ)^{k+1/2} K_{1/2+k−λ}(αδ) / (π K_λ(αδ))
        let kf = k as f64;
        let ratio = bessel_k_scaled(0.5 + kf - lambda, ad)? / k_lambda_scaled;
        let g = gamma_dd(DoubleDouble::new(kf + 0.5));
        let scale = DoubleDouble::new(2f64.powf(kf - 0.5))
            * DoubleDouble::new((alpha / delta).powf(kf + 0.5))
            * DoubleDouble::new(ratio);
        Ok(scale * g / pi_dd())
    });
    Ok(CharFnDescriptor {
        name: "sgh".into(),
        params: vec![
            ("lambda".into(), lambda),
            ("alpha".into(), alpha),
            ("delta".into(), delta),
        ],
        eval: Arc::new(move |t| {
            if t == 0.0 {
                return Complex64::new(1.0, 0.0);
            }
            let p = (alpha * alpha + t * t).sqrt();
            let dp = delta * p;
            let v = match bessel_k_scaled(lambda, dp) {
                Ok(k) => (alpha / p).powf(lambda) * k / k_lambda_scaled * (ad - dp).exp(),
                Err(_) => f64::NAN,
            };
            Complex64::new(v, 0.0)
        }),
        symmetric: true,
        moment_order: MomentOrder::Unbounded,
        closed_moments: Some(closed),
        spec: Some(DistSpec::Sgh {
            lambda,
            alpha,
            delta,
        }),
    })
}

/// `s·coth(s)`, with its series near the origin.
pub fn s_coth_s(s: f64) -> f64 {
    let a = s.abs();
    if a < 1e-4 {
        let s2 = s * s;
        1.0 + s2 / 3.0 - s2 * s2 / 45.0
    } else {
        a / a.tanh()
    }
}

/// Conditioned part `P` of the Lévy stochastic area at unit time,
/// `φ_P(s) = exp(−(r²/2)(s coth s − 1))`.
pub fn make_levy_area_p(r: f64) -> Result<CharFnDescriptor> {
    if !(r > 0.0) || !r.is_finite() {
        return Err(Error::Domain(format!("levy area radius must be > 0, got {r}")));
    }
    let half_r2 = 0.5 * r * r;
    Ok(CharFnDescriptor {
        name: "levy-area-p".into(),
        params: vec![("r".into(), r)],
        eval: Arc::new(move |s| Complex64::new((-half_r2 * (s_coth_s(s) - 1.0)).exp(), 0.0)),
        symmetric: true,
        moment_order: MomentOrder::Unbounded,
        closed_moments: None,
        spec: Some(DistSpec::LevyAreaP { r }),
    })
}

/// Symmetric variance gamma, `φ(t) = (α²/(α²+t²))^λ`. Only powers
/// `p < 2λ − 1` of `|t|` are integrable against it.
pub fn make_variance_gamma(lambda: f64, alpha: f64) -> Result<CharFnDescriptor> {
    if !(lambda > 0.5) || !(alpha > 0.0) {
        return Err(Error::Domain(format!(
            "variance gamma needs lambda > 1/2 and alpha > 0 (got lambda={lambda}, alpha={alpha})"
        )));
    }
    let bound = 2.0 * lambda - 1.0;
    let max_power = (bound.ceil() as usize).saturating_sub(1);
    let a2 = alpha * alpha;
    let mut d = make_custom(
        "custom-vg",
        Arc::new(move |t| Complex64::new((a2 / (a2 + t * t)).powf(lambda), 0.0)),
        true,
        MomentOrder::Finite(max_power),
    )?;
    d.params = vec![("lambda".into(), lambda), ("alpha".into(), alpha)];
    d.spec = Some(DistSpec::CustomVg { lambda, alpha });
    Ok(d)
}

/// Second derivative of a symmetric `φ` at the origin by Richardson-extrapolated
/// central differences.
pub fn second_derivative_at_zero(cf: &CharFnDescriptor, h0: f64) -> f64 {
    let phi = |t: f64| cf.eval(t).re;
    let f0 = phi(0.0);
    let d2 = |h: f64| (phi(h) - 2.0 * f0 + phi(-h)) / (h * h);
    let levels = 5;
    let mut table = vec![vec![0.0; levels]; levels];
    let mut h = h0;
    for i in 0..levels {
        table[i][0] = d2(h);
        let mut factor = 4.0;
        for j in 1..=i {
            table[i][j] = table[i][j - 1] + (table[i][j - 1] - table[i - 1][j - 1]) / (factor - 1.0);
            factor *= 4.0;
        }
        h *= 0.5;
    }
    table[levels - 1][levels - 1]
}

/// `K_λ(αδ)`-free density value at the origin for the SGH law,
/// `√(α/(2πδ)) K_{λ−1/2}(αδ)/K_λ(αδ)`.
pub fn sgh_density_at_origin(lambda: f64, alpha: f64, delta: f64) -> Result<f64> {
    let ad = alpha * delta;
    Ok((alpha / (2.0 * PI * delta)).sqrt() * bessel_k(lambda - 0.5, ad)? / bessel_k(lambda, ad)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn catalog_descriptors_validate() {
        let all = [
            make_gaussian(0.0).unwrap(),
            make_gaussian(1.0).unwrap(),
            make_student(1.0).unwrap(),
            make_student(3.0).unwrap(),
            make_student(5.5).unwrap(),
            make_stable_symmetric(0.8).unwrap(),
            make_stable_symmetric(1.5).unwrap(),
            make_stable_symmetric(2.0).unwrap(),
            make_stable(1.5, 0.5).unwrap(),
            make_stable(0.75, -1.0).unwrap(),
            make_sgh(-0.5, 1.0, 1.0).unwrap(),
            make_sgh(1.0, 2.0, 0.5).unwrap(),
            make_levy_area_p(1.0).unwrap(),
            make_variance_gamma(1.0, 1.0).unwrap(),
        ];
        for d in &all {
            d.validate().unwrap_or_else(|e| panic!("{d:?}: {e}"));
        }
    }

    #[test]
    fn gaussian_first_moment_and_symmetry_flag() {
        let g = make_gaussian(0.0).unwrap();
        assert!(g.symmetric);
        let e1 = g.closed_moment(1).unwrap().unwrap();
        assert!((e1 - 0.398_942_280_401_432_7).abs() < 1e-16);
        assert!((1.0 / g.closed_moment(0).unwrap().unwrap() - 2.506_628_274_631_000_5).abs() < 1e-15);
        assert!(!make_gaussian(1.0).unwrap().symmetric);
    }

    #[test]
    fn student_one_is_cauchy() {
        let s = make_student(1.0).unwrap();
        for &t in &[0.1, 1.0, 3.0] {
            assert!((s.eval(t).re - (-t).exp()).abs() < 1e-14);
        }
        // w'(1/2) = 1/E_0 = π for Cauchy
        assert!((1.0 / s.closed_moment(0).unwrap().unwrap() - PI).abs() < 1e-14);
    }

    #[test]
    fn student_normalization_matches_closed_slope() {
        // w'(1/2) = √(nπ) Γ(n/2) / Γ((n+1)/2)
        for &n in &[1.0, 3.0, 5.0, 7.5] {
            let e0 = make_student(n).unwrap().closed_moment(0).unwrap().unwrap();
            let slope = (n * PI).sqrt() * gamma(n / 2.0) / gamma((n + 1.0) / 2.0);
            assert!((1.0 / e0 / slope - 1.0).abs() < 1e-14, "n={n}");
        }
    }

    #[test]
    fn stable_normalization() {
        // w'(1/2) = π/Γ(1+1/α)
        for &a in &[1.0, 1.5, 2.0] {
            let e0 = make_stable_symmetric(a).unwrap().closed_moment(0).unwrap().unwrap();
            assert!((1.0 / e0 - PI / gamma(1.0 + 1.0 / a)).abs() < 1e-14);
        }
        assert!((1.0 / make_stable_symmetric(2.0).unwrap().closed_moment(0).unwrap().unwrap()
            - 3.544_907_701_811_032)
            .abs()
            < 1e-14);
    }

    #[test]
    fn sgh_normalization_matches_density_at_origin() {
        for &(l, a, d) in &[(-0.5, 1.0, 1.0), (1.0, 2.0, 0.5), (0.3, 1.5, 2.0)] {
            let e0 = make_sgh(l, a, d).unwrap().closed_moment(0).unwrap().unwrap();
            let f0 = sgh_density_at_origin(l, a, d).unwrap();
            assert!((e0 / f0 - 1.0).abs() < 1e-13);
        }
    }

    #[test]
    fn nig_characteristic_function_closed_form() {
        let d = make_sgh(-0.5, 1.0, 1.0).unwrap();
        for &t in &[0.3f64, 1.0, 4.0] {
            let exact = (1.0 - (1.0 + t * t).sqrt()).exp();
            assert!((d.eval(t).re - exact).abs() < 1e-14);
        }
    }

    #[test]
    fn levy_area_variance_from_second_derivative() {
        for &r in &[0.5, 1.0, 2.0] {
            let d = make_levy_area_p(r).unwrap();
            let var = -second_derivative_at_zero(&d, 0.2);
            assert!((var / (r * r / 3.0) - 1.0).abs() < 1e-8, "r={r}: {var}");
        }
    }

    #[test]
    fn s_coth_s_is_continuous_at_switch() {
        let s = 1e-4_f64;
        let series = 1.0 + s * s / 3.0 - s.powi(4) / 45.0;
        assert!((s_coth_s(s) - series).abs() < 5e-16);
        assert!((s_coth_s(0.99999e-4) - series).abs() < 1e-13);
        assert_eq!(s_coth_s(0.0), 1.0);
    }

    #[test]
    fn asymmetric_gaussian_fails_symmetry_probe() {
        let err = make_custom(
            "shifted",
            Arc::new(|t| Complex64::from_polar((-0.5 * t * t).exp(), t)),
            true,
            MomentOrder::Unbounded,
        );
        assert!(matches!(err, Err(Error::Validation(_))));
    }

    #[test]
    fn unnormalized_custom_is_rejected() {
        let err = make_custom(
            "bad",
            Arc::new(|t| Complex64::new(2.0 * (-t * t).exp(), 0.0)),
            true,
            MomentOrder::Unbounded,
        );
        assert!(matches!(err, Err(Error::Validation(_))));
    }

    #[test]
    fn variance_gamma_moment_order() {
        assert_eq!(make_variance_gamma(1.0, 1.0).unwrap().moment_order, MomentOrder::Finite(0));
        assert_eq!(make_variance_gamma(2.0, 1.0).unwrap().moment_order, MomentOrder::Finite(2));
        assert_eq!(make_variance_gamma(2.2, 1.0).unwrap().moment_order, MomentOrder::Finite(3));
    }

    #[test]
    fn domain_errors() {
        assert!(make_student(0.0).is_err());
        assert!(make_stable_symmetric(0.0).is_err());
        assert!(make_stable_symmetric(2.5).is_err());
        assert!(make_sgh(2.0, 1.0, 1.0).is_err());
        assert!(make_sgh(0.0, -1.0, 1.0).is_err());
        assert!(make_levy_area_p(0.0).is_err());
    }

    #[test]
    fn spec_json_round_trip() {
        let specs = [
            r#"{"dist": "stable", "alpha": 1.5}"#,
            r#"{"dist": "sgh", "lambda": -0.5, "alpha": 1, "delta": 1}"#,
            r#"{"dist": "student", "n": 3}"#,
            r#"{"dist": "gaussian", "mu": 0}"#,
            r#"{"dist": "levy-area-p", "r": 1}"#,
        ];
        for s in specs {
            let spec = DistSpec::parse_json(s).unwrap();
            let again = DistSpec::parse_json(&spec.to_json()).unwrap();
            assert_eq!(spec, again);
            spec.descriptor().unwrap();
        }
        assert_eq!(
            DistSpec::parse_json(r#"{"dist": "stable", "alpha": 1.5}"#).unwrap(),
            DistSpec::Stable { alpha: 1.5, beta: 0.0 }
        );
        assert!(DistSpec::parse_json(r#"{"dist": "weibull", "k": 2}"#).is_err());
    }
}
