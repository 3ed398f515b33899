//! Tail models and the composite quantile.
//!
//! The symmetric stable tail inverts the first four terms of the
//! asymptotic expansion of `1 − F(x)`:
//!
//! ```text
//! w(u) ≈ {c₋₁/(1−u) + c₀ + c₁(1−u) + c₂(1−u)²}^{1/α}
//! ```

use crate::charfns::CharFnDescriptor;
use crate::error::{Error, Result};
use crate::moments::{gil_pelaez_cdf, QuadratureConfig};
use crate::series::CentralSeries;
use crate::special::{gamma, normal_quantile};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Settings for joining a tail to the central series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TailConfig {
    /// Scan range for the join point.
    pub scan_lo: f64,
    pub scan_hi: f64,
    pub scan_points: usize,
    /// Relative gap above which the join is reported as a kink.
    pub kink_tol: f64,
    /// CDF residual the tail should meet beyond the join.
    pub tail_tol: f64,
}

impl Default for TailConfig {
    fn default() -> Self {
        TailConfig {
            scan_lo: 0.90,
            scan_hi: 0.99,
            scan_points: 181,
            kink_tol: 1e-3,
            tail_tol: 1e-4,
        }
    }
}

/// Asymptotic upper tail of a symmetric stable law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailModel {
    pub alpha: f64,
    /// `[c₋₁, c₀, c₁, c₂]`
    pub c: [f64; 4],
    pub u_switch: f64,
    /// Multiplier applied to the quantile, for `φ(ct)` laws.
    #[serde(default = "unit")]
    pub scale: f64,
}

fn unit() -> f64 {
    1.0
}

impl TailModel {
    /// Tail quantile at `u` (meaningful for `u` near 1).
    pub fn eval(&self, u: f64) -> f64 {
        let s = 1.0 - u;
        let [cm1, c0, c1, c2] = self.c;
        let bracket = cm1 / s + c0 + s * (c1 + s * c2);
        if bracket <= 0.0 {
            return f64::NAN;
        }
        self.scale * bracket.powf(1.0 / self.alpha)
    }

    /// Largest `s₀ ≤ 1/2` such that the model is decreasing in `s = 1 − u`
    /// on `(0, s₀]`.
    pub fn monotone_limit(&self) -> f64 {
        let [cm1, c0, c1, c2] = self.c;
        let mut s = 1e-9;
        while s < 0.5 {
            let slope = -cm1 / (s * s) + c1 + 2.0 * c2 * s;
            let bracket = cm1 / s + c0 + s * (c1 + s * c2);
            if slope >= 0.0 || bracket <= 0.0 {
                return s / 1.01;
            }
            s *= 1.01;
        }
        0.5
    }
}

/// Coefficients `c₋₁, c₀, c₁, c₂` of the four-term stable tail.
pub fn stable_tail_coefficients(alpha: f64) -> [f64; 4] {
    let h = PI * alpha / 2.0;
    let (g1, g2, g3, g4) = (gamma(alpha), gamma(2.0 * alpha), gamma(3.0 * alpha), gamma(4.0 * alpha));
    let csc = 1.0 / h.sin();
    let cot = h.cos() / h.sin();
    let cpa = (PI * alpha).cos();
    let cm1 = g1 * h.sin() / PI;
    let c0 = -h.cos() * g2 / g1;
    let c1 = PI * csc * csc
        * (2.0 * g1 * g3 * (3.0 * h).sin() - 3.0 * csc * g2 * g2 * (PI * alpha).sin().powi(2))
        / (12.0 * g1.powi(3));
    let c2 = -PI * PI * cot * csc
        * (6.0 * (cpa + 1.0) * g2.powi(3) - 3.0 * (2.0 * cpa + 1.0) * g1 * g3 * g2
            + cpa * g1 * g1 * g4)
        / (6.0 * g1.powi(5));
    [cm1, c0, c1, c2]
}

/// Stable tail for `0 < α < 2` with the join at the middle of the scan range
/// (see [`choose_switch`] for the fitted join).
pub fn stable_tail(alpha: f64, cfg: &TailConfig) -> Result<TailModel> {
    if !(alpha > 0.0 && alpha < 2.0) {
        return Err(Error::Domain(format!(
            "the stable tail model needs 0 < alpha < 2, got {alpha}"
        )));
    }
    Ok(TailModel {
        alpha,
        c: stable_tail_coefficients(alpha),
        u_switch: 0.5 * (cfg.scan_lo + cfg.scan_hi),
        scale: 1.0,
    })
}

/// Normal approximation `w(u) = σ·Φ⁻¹(u)` for the extreme tail.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianTail {
    pub sigma: f64,
    pub u_switch: f64,
}

impl GaussianTail {
    pub fn eval(&self, u: f64) -> f64 {
        self.sigma * normal_quantile(u)
    }
}

/// Logarithmic tail `w(u) = w_s + b·ln((1−u_s)/(1−u))` for laws whose density
/// decays exponentially, joined to the central series with matching value
/// and slope.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExponentialTail {
    pub u_switch: f64,
    pub w_switch: f64,
    pub b: f64,
}

impl ExponentialTail {
    /// Continue `cs` beyond `u_switch` with a C¹ join.
    pub fn matched(cs: &CentralSeries, u_switch: f64) -> Result<Self> {
        if !(u_switch > 0.5 && u_switch < 1.0) {
            return Err(Error::Domain(format!("join must lie in (0.5, 1), got {u_switch}")));
        }
        let b = cs.derivative(u_switch) * (1.0 - u_switch);
        if !(b > 0.0) {
            return Err(Error::Validation(format!(
                "central series is not increasing at the join u = {u_switch}"
            )));
        }
        Ok(ExponentialTail {
            u_switch,
            w_switch: cs.eval(u_switch),
            b,
        })
    }

    pub fn eval(&self, u: f64) -> f64 {
        self.w_switch + self.b * ((-self.u_switch).ln_1p() - (-u).ln_1p())
    }
}

/// Upper-tail model attached to a composite quantile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Tail {
    Stable(TailModel),
    Gaussian(GaussianTail),
    Exponential(ExponentialTail),
}

impl Tail {
    pub fn eval(&self, u: f64) -> f64 {
        match self {
            Tail::Stable(t) => t.eval(u),
            Tail::Gaussian(t) => t.eval(u),
            Tail::Exponential(t) => t.eval(u),
        }
    }

    pub fn u_switch(&self) -> f64 {
        match self {
            Tail::Stable(t) => t.u_switch,
            Tail::Gaussian(t) => t.u_switch,
            Tail::Exponential(t) => t.u_switch,
        }
    }

    /// See [`TailModel::monotone_limit`].
    pub fn monotone_limit(&self) -> f64 {
        match self {
            Tail::Stable(t) => t.monotone_limit(),
            Tail::Gaussian(_) | Tail::Exponential(_) => 0.5,
        }
    }

    /// The same tail for the law scaled by `c`.
    pub fn scaled(&self, c: f64) -> Tail {
        match *self {
            Tail::Stable(t) => Tail::Stable(TailModel { scale: t.scale * c, ..t }),
            Tail::Gaussian(t) => Tail::Gaussian(GaussianTail { sigma: t.sigma * c, ..t }),
            Tail::Exponential(t) => Tail::Exponential(ExponentialTail {
                w_switch: t.w_switch * c,
                b: t.b * c,
                ..t
            }),
        }
    }

    fn set_switch(&mut self, u: f64) {
        match self {
            Tail::Stable(t) => t.u_switch = u,
            Tail::Gaussian(t) => t.u_switch = u,
            Tail::Exponential(_) => {}
        }
    }
}

/// Outcome of the join scan.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SwitchChoice {
    pub u_switch: f64,
    /// Relative gap `|central − tail| / |tail|` at the chosen point.
    pub gap: f64,
    pub within_tolerance: bool,
}

/// Scan the configured range for the point where central series and tail
/// agree best. Points where the tail is not monotone out to `u = 1` are
/// skipped; if that excludes the whole range, the join moves to the edge of
/// the tail's monotone region.
pub fn choose_switch(cs: &CentralSeries, tail: &Tail, cfg: &TailConfig) -> SwitchChoice {
    let n = cfg.scan_points.max(2);
    let u_min = 1.0 - tail.monotone_limit();
    let (lo, hi) = if u_min > cfg.scan_hi {
        log::warn!("tail model is only monotone above u = {u_min:.5}; moving the join there");
        (u_min, u_min)
    } else {
        (cfg.scan_lo.max(u_min), cfg.scan_hi)
    };
    let mut best = SwitchChoice {
        u_switch: hi,
        gap: f64::INFINITY,
        within_tolerance: false,
    };
    for i in 0..n {
        let u = lo + (hi - lo) * i as f64 / (n - 1) as f64;
        let t = tail.eval(u);
        let gap = ((cs.eval(u) - t) / t).abs();
        if gap < best.gap {
            best.gap = gap;
            best.u_switch = u;
        }
    }
    best.within_tolerance = best.gap < cfg.kink_tol;
    if !best.within_tolerance {
        log::warn!(
            "tail join at u = {:.4} leaves a relative gap of {:.2e} (tolerance {:.0e})",
            best.u_switch,
            best.gap,
            cfg.kink_tol
        );
    }
    best
}

/// Join chosen from the CDF residuals `|F(w(u)) − u|` of the two pieces.
///
/// A candidate join `u` is admissible when the central series is still
/// increasing up to `u` and does not exceed the tail there. Its score is the
/// larger of the worst central residual below `u` and the worst tail residual
/// above it. Joins whose tail residual stays within `tail_tol` are preferred;
/// among those (or among all, if none qualify) the lowest score wins. When
/// the central series has broken down inside the scan range the search is
/// repeated from `u = 0.55` in steps of 0.005. Falls back to
/// [`choose_switch`] if no point is admissible.
pub fn choose_switch_by_cdf(
    cs: &CentralSeries,
    tail: &Tail,
    cf: &CharFnDescriptor,
    cfg: &TailConfig,
    qcfg: &QuadratureConfig,
) -> Result<SwitchChoice> {
    let u_min = 1.0 - tail.monotone_limit();
    let n = cfg.scan_points.max(2);
    let lo = cfg.scan_lo.max(u_min);
    let hi = cfg.scan_hi.max(lo);
    let main: Vec<f64> = (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect();
    let mut best = best_join(cs, tail, cf, &main, cfg, qcfg)?;
    if best.map_or(true, |(_, score)| score > cfg.kink_tol) {
        let start = 0.55_f64.max(u_min);
        let steps = ((lo - start) / 0.005).floor().max(0.0) as usize;
        let mut grid: Vec<f64> = (0..steps).map(|i| start + 0.005 * i as f64).collect();
        grid.extend_from_slice(&main);
        if let Some(ext) = best_join(cs, tail, cf, &grid, cfg, qcfg)? {
            if best.map_or(true, |b| ext.1 < b.1) {
                best = Some(ext);
            }
        }
    }
    let Some((u_switch, score)) = best else {
        log::warn!("no admissible join from CDF residuals; falling back to the gap scan");
        return Ok(choose_switch(cs, tail, cfg));
    };
    if score > cfg.kink_tol {
        log::warn!("tail join at u = {u_switch:.4} leaves a CDF residual of {score:.2e}");
    }
    let t = tail.eval(u_switch);
    let gap = ((cs.eval(u_switch) - t) / t).abs();
    Ok(SwitchChoice {
        u_switch,
        gap,
        within_tolerance: gap < cfg.kink_tol,
    })
}

/// Best admissible join on an ascending grid, with its score.
fn best_join(
    cs: &CentralSeries,
    tail: &Tail,
    cf: &CharFnDescriptor,
    grid: &[f64],
    cfg: &TailConfig,
    qcfg: &QuadratureConfig,
) -> Result<Option<(f64, f64)>> {
    let Some(&first) = grid.first() else {
        return Ok(None);
    };
    let mut rows = Vec::with_capacity(grid.len());
    for &u in grid {
        let (wc, wt) = (cs.eval(u), tail.eval(u));
        let rc = (gil_pelaez_cdf(cf, wc, qcfg)? - u).abs();
        let rt = (gil_pelaez_cdf(cf, wt, qcfg)? - u).abs();
        rows.push((u, wc, wt, rc, rt));
    }
    let mut suffix = vec![0.0_f64; rows.len()];
    let mut acc = 0.0_f64;
    for (i, r) in rows.iter().enumerate().rev() {
        acc = acc.max(r.4);
        suffix[i] = acc;
    }
    let mut increasing = cs.increasing_on(0.5, first, 100);
    let mut prefix = 0.0_f64;
    let mut prev = f64::NEG_INFINITY;
    let mut best: Option<(f64, f64, bool)> = None;
    for (i, &(u, wc, wt, rc, _)) in rows.iter().enumerate() {
        increasing &= wc > prev && wc.is_finite();
        prev = wc;
        prefix = prefix.max(rc);
        if !increasing {
            break;
        }
        if wc > wt {
            continue;
        }
        let score = prefix.max(suffix[i]);
        let trusted = suffix[i] <= cfg.tail_tol;
        let better = match best {
            None => true,
            Some((_, s, t)) => (trusted && !t) || (trusted == t && score < s),
        };
        if better {
            best = Some((u, score, trusted));
        }
    }
    Ok(best.map(|(u, s, _)| (u, s)))
}

/// Central series with optional tails; the evaluatable quantile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompositeQuantile {
    pub central: CentralSeries,
    pub upper_tail: Option<Tail>,
    /// Mirror the upper tail into the lower one (`w(u) = −w(1−u)`).
    pub reflection: bool,
    /// Upper end of the range where the central series alone is trusted,
    /// used only when there is no tail.
    pub central_limit: Option<f64>,
}

impl CompositeQuantile {
    /// Central series only.
    pub fn central_only(central: CentralSeries) -> Self {
        CompositeQuantile {
            reflection: central.symmetric,
            central,
            upper_tail: None,
            central_limit: None,
        }
    }

    /// Attach a tail at the best join in the configured scan range.
    pub fn with_tail(central: CentralSeries, mut tail: Tail, cfg: &TailConfig) -> Result<(Self, SwitchChoice)> {
        if !central.symmetric {
            return Err(Error::Shape("tail models need a symmetric central series".into()));
        }
        let choice = choose_switch(&central, &tail, cfg);
        tail.set_switch(choice.u_switch);
        Ok((
            CompositeQuantile {
                central,
                upper_tail: Some(tail),
                reflection: true,
                central_limit: None,
            },
            choice,
        ))
    }

    /// Attach a tail at the join chosen by [`choose_switch_by_cdf`].
    pub fn with_tail_for(
        central: CentralSeries,
        mut tail: Tail,
        cf: &CharFnDescriptor,
        cfg: &TailConfig,
        qcfg: &QuadratureConfig,
    ) -> Result<(Self, SwitchChoice)> {
        if !central.symmetric {
            return Err(Error::Shape("tail models need a symmetric central series".into()));
        }
        let choice = choose_switch_by_cdf(&central, &tail, cf, cfg, qcfg)?;
        tail.set_switch(choice.u_switch);
        Ok((
            CompositeQuantile {
                central,
                upper_tail: Some(tail),
                reflection: true,
                central_limit: None,
            },
            choice,
        ))
    }

    /// Quantile of `cX`, i.e. of the law with characteristic function `φ(ct)`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        Ok(CompositeQuantile {
            central: self.central.scaled(c)?,
            upper_tail: self.upper_tail.map(|t| t.scaled(c)),
            reflection: self.reflection,
            central_limit: self.central_limit,
        })
    }

    /// Attach a tail whose join point is already fixed.
    pub fn with_fixed_tail(central: CentralSeries, tail: Tail) -> Result<Self> {
        if !central.symmetric {
            return Err(Error::Shape("tail models need a symmetric central series".into()));
        }
        Ok(CompositeQuantile {
            central,
            upper_tail: Some(tail),
            reflection: true,
            central_limit: None,
        })
    }

    /// `w(u)`; `u` must lie strictly inside `(0, 1)`.
    pub fn eval(&self, u: f64) -> Result<f64> {
        if !(u > 0.0 && u < 1.0) {
            return Err(Error::Domain(format!("quantile level must lie in (0, 1), got {u}")));
        }
        if let Some(tail) = &self.upper_tail {
            let us = tail.u_switch();
            if u > us {
                return Ok(tail.eval(u));
            }
            if self.reflection && u < 1.0 - us {
                return Ok(-tail.eval(1.0 - u));
            }
        }
        Ok(self.central.eval(u))
    }

    /// Whether `u` lies where the model is backed by a tail or the trusted
    /// central range.
    pub fn in_trusted_range(&self, u: f64) -> bool {
        if self.upper_tail.is_some() {
            return true;
        }
        match self.central_limit {
            Some(lim) => u <= lim && (!self.central.symmetric || u >= 1.0 - lim),
            None => true,
        }
    }

    /// Which piece evaluates `u`.
    pub fn region(&self, u: f64) -> Region {
        match &self.upper_tail {
            Some(t) if u > t.u_switch() => Region::UpperTail,
            Some(t) if self.reflection && u < 1.0 - t.u_switch() => Region::LowerTail,
            _ => Region::Central,
        }
    }

    /// Check `w` strictly increasing on `n` interior grid points of `[lo, hi]`.
    pub fn check_monotone(&self, lo: f64, hi: f64, n: usize) -> Result<()> {
        let n = n.max(2);
        let mut prev = f64::NEG_INFINITY;
        for i in 0..n {
            let u = lo + (hi - lo) * i as f64 / (n - 1) as f64;
            let w = self.eval(u)?;
            if !(w > prev) {
                return Err(Error::Validation(format!(
                    "quantile not increasing at u = {u}: {w} after {prev}"
                )));
            }
            prev = w;
        }
        Ok(())
    }
}

/// Region of a composite quantile.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Region {
    LowerTail,
    Central,
    UpperTail,
}

/// Evaluate a composite quantile.
pub fn eval_quantile(q: &CompositeQuantile, u: f64) -> Result<f64> {
    q.eval(u)
}

#[cfg(test)]
mod tests {
    use super::*;

    // Truncated asymptotic survival function Σ_{k≤4} (1/π)Γ(kα)/k!(−1)^{k−1} sin(kπα/2) x^{−kα}.
    fn survival_series(x: f64, alpha: f64) -> f64 {
        let mut s = 0.0;
        let mut fact = 1.0;
        for k in 1..=4 {
            let kf = k as f64;
            fact *= kf;
            let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
            s += sign * gamma(kf * alpha) / fact * (kf * PI * alpha / 2.0).sin() * x.powf(-kf * alpha);
        }
        s / PI
    }

    #[test]
    fn coefficients_invert_the_asymptotic_series() {
        // Substituting the tail back leaves an O(s⁵) residual.
        for &alpha in &[0.8, 1.0, 1.5] {
            let tm = stable_tail(alpha, &TailConfig::default()).unwrap();
            let resid = |s: f64| survival_series(tm.eval(1.0 - s), alpha) - s;
            let order = (resid(1e-2) / resid(5e-3)).abs().log2();
            assert!(order > 4.5, "alpha={alpha}: order {order}");
        }
    }

    #[test]
    fn known_coefficients() {
        let c = stable_tail_coefficients(1.5);
        assert!((c[0] - 0.199_471_140_2).abs() < 1e-10);
        let c = stable_tail_coefficients(1.0);
        assert!((c[0] - 1.0 / PI).abs() < 1e-16);
        assert!(c[1].abs() < 1e-15);
        assert!((c[2] + PI / 3.0).abs() < 1e-14);
        assert!(c[3].abs() < 1e-14);
        assert!(stable_tail(2.0, &TailConfig::default()).is_err());
        assert!(stable_tail(0.0, &TailConfig::default()).is_err());
    }

    #[test]
    fn cauchy_tail_asymptotics() {
        let tm = stable_tail(1.0, &TailConfig::default()).unwrap();
        for &s in &[1e-2, 1e-3, 1e-4] {
            let exact = 1.0 / (PI * s).tan();
            let err = (PI * s).powi(3) / 45.0;
            assert!((tm.eval(1.0 - s) - exact).abs() < 1.1 * err + 1e-12 * exact);
        }
    }

    #[test]
    fn tail_decreases_towards_the_switch() {
        for &alpha in &[0.8, 1.0, 1.5, 1.9] {
            let tm = stable_tail(alpha, &TailConfig::default()).unwrap();
            let lim = tm.monotone_limit();
            if alpha < 1.6 {
                assert!(lim > 0.1, "alpha={alpha}: {lim}");
            }
            let mut prev = f64::INFINITY;
            for i in 0..1000 {
                let s = 1e-6 + (lim.min(0.1) - 1e-6) * i as f64 / 999.0;
                let w = tm.eval(1.0 - s);
                assert!(w.is_finite() && w < prev, "alpha={alpha} s={s}");
                prev = w;
            }
        }
    }

    #[test]
    fn composite_domain() {
        let cs = CentralSeries {
            u0: 0.5,
            wdash: PI,
            qcoeffs: vec![PI],
            qcoeffs_lo: Vec::new(),
            symmetric: true,
            nterms: 0,
            dist: None,
        };
        let q = CompositeQuantile::central_only(cs);
        assert_eq!(q.eval(0.5).unwrap(), 0.0);
        assert!(q.eval(0.0).is_err());
        assert!(q.eval(1.0).is_err());
        assert!(q.eval(f64::NAN).is_err());
    }
}
