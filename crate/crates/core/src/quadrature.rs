//! Adaptive Gauss–Kronrod integration.
//!
//! Three drivers sit on top of a 21-point Kronrod rule with its embedded
//! 10-point Gauss rule:
//!
//! * [`integrate`] — globally adaptive bisection on a finite interval;
//! * [`integrate_semi_infinite`] — geometrically growing panels on `[0, ∞)`,
//!   stopped once the panel mass falls below the truncation threshold;
//! * [`integrate_oscillatory`] — panels of one half-period of a known
//!   oscillation, with Euler averaging of the partial sums.
//!
//! All of them start the first panel at `t = 0` through the substitution
//! `t = a·s⁴`, which smooths integrable `t^(β−1)` behaviour at the origin.

use crate::error::{Error, Result};
use crate::moments::QuadratureConfig;
use std::cmp::Ordering;
use std::collections::BinaryHeap;

const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.0,
];

const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_208_292_238_155,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];

// Gauss weights for the odd-indexed Kronrod abscissae XGK[1], XGK[3], ...
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

/// Outcome of one integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult {
    pub value: f64,
    pub abs_err: f64,
    /// Integral of `|f|`, used for truncation decisions.
    pub abs_mass: f64,
    pub evals: usize,
}

#[derive(Debug, Clone, Copy)]
struct Segment {
    a: f64,
    b: f64,
    value: f64,
    err: f64,
    mass: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.err == other.err
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.err.total_cmp(&other.err)
    }
}

/// One application of the 21-point Kronrod rule, QUADPACK-style error estimate.
pub fn gauss_kronrod_21<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut resk = fc * WGK[10];
    let mut resg = 0.0;
    let mut resabs = resk.abs();
    let mut fv1 = [0.0; 10];
    let mut fv2 = [0.0; 10];
    for j in 0..10 {
        let dx = half * XGK[j];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        fv1[j] = f1;
        fv2[j] = f2;
        resk += WGK[j] * (f1 + f2);
        resabs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            resg += WG[j / 2] * (f1 + f2);
        }
    }
    let reskh = resk * 0.5;
    let mut resasc = WGK[10] * (fc - reskh).abs();
    for j in 0..10 {
        resasc += WGK[j] * ((fv1[j] - reskh).abs() + (fv2[j] - reskh).abs());
    }
    let result = resk * half;
    let resabs = resabs * half.abs();
    let resasc = resasc * half.abs();
    let mut err = ((resk - resg) * half).abs();
    if resasc != 0.0 && err != 0.0 {
        err = resasc * (200.0 * err / resasc).powf(1.5).min(1.0);
    }
    let eps = f64::EPSILON;
    if resabs > f64::MIN_POSITIVE / (50.0 * eps) {
        err = err.max(50.0 * eps * resabs);
    }
    (result, err, resabs)
}

/// Globally adaptive integration of `f` over `[a, b]`.
pub fn integrate<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    cfg: &QuadratureConfig,
) -> Result<QuadResult> {
    integrate_inner(&mut f, a, b, cfg.rel_tol, cfg.abs_tol, cfg.max_subdivisions)
}

fn integrate_inner<F: FnMut(f64) -> f64>(
    f: &mut F,
    a: f64,
    b: f64,
    rel_tol: f64,
    abs_tol: f64,
    max_subdivisions: usize,
) -> Result<QuadResult> {
    if a == b {
        return Ok(QuadResult {
            value: 0.0,
            abs_err: 0.0,
            abs_mass: 0.0,
            evals: 0,
        });
    }
    let (value, err, mass) = gauss_kronrod_21(f, a, b);
    let mut evals = 21;
    let mut heap = BinaryHeap::new();
    heap.push(Segment {
        a,
        b,
        value,
        err,
        mass,
    });
    let mut total = value;
    let mut total_err = err;
    let mut total_mass = mass;
    let mut splits = 0;
    loop {
        if !total.is_finite() {
            return Err(Error::NonConvergence(format!(
                "non-finite integrand on [{a}, {b}]"
            )));
        }
        if total_err <= abs_tol.max(rel_tol * total.abs()) {
            break;
        }
        if splits >= max_subdivisions {
            // Accept when the residual error is at the roundoff floor of the mass.
            if total_err <= 1e3 * f64::EPSILON * total_mass {
                break;
            }
            return Err(Error::NonConvergence(format!(
                "subdivision limit {max_subdivisions} reached on [{a}, {b}] (err {total_err:e}, value {total:e})"
            )));
        }
        let seg = heap.pop().expect("heap never empty");
        let mid = 0.5 * (seg.a + seg.b);
        if mid <= seg.a.min(seg.b) || mid >= seg.a.max(seg.b) {
            // Interval no longer divisible; nothing more to gain.
            heap.push(seg);
            break;
        }
        let (v1, e1, m1) = gauss_kronrod_21(f, seg.a, mid);
        let (v2, e2, m2) = gauss_kronrod_21(f, mid, seg.b);
        evals += 42;
        splits += 1;
        total += v1 + v2 - seg.value;
        total_err += e1 + e2 - seg.err;
        total_mass += m1 + m2 - seg.mass;
        heap.push(Segment {
            a: seg.a,
            b: mid,
            value: v1,
            err: e1,
            mass: m1,
        });
        heap.push(Segment {
            a: mid,
            b: seg.b,
            value: v2,
            err: e2,
            mass: m2,
        });
    }
    // Re-sum to shed accumulated update error.
    let mut value = 0.0;
    let mut abs_err = 0.0;
    let mut abs_mass = 0.0;
    for s in heap.iter() {
        value += s.value;
        abs_err += s.err;
        abs_mass += s.mass;
    }
    Ok(QuadResult {
        value,
        abs_err,
        abs_mass,
        evals,
    })
}

/// Integrate over `[0, a]` through `t = a·s⁴`.
fn integrate_origin_panel<F: FnMut(f64) -> f64>(
    f: &mut F,
    a: f64,
    cfg: &QuadratureConfig,
) -> Result<QuadResult> {
    let mut g = |s: f64| {
        let s2 = s * s;
        let t = a * s2 * s2;
        if t == 0.0 {
            return 0.0;
        }
        4.0 * a * s2 * s * f(t)
    };
    integrate_inner(
        &mut g,
        0.0,
        1.0,
        cfg.rel_tol,
        cfg.abs_tol,
        cfg.max_subdivisions,
    )
}

/// `∫₀^∞ f(t) dt` for integrands that decay at least exponentially or
/// stretched-exponentially.
///
/// Panels `[0, a]`, `[a, 2a]`, `[2a, 4a]`, ... are integrated in turn; the sum
/// stops once two consecutive panels carry absolute mass below
/// `cfg.truncation` relative to the running total (or below `abs_tol`).
pub fn integrate_semi_infinite<F: FnMut(f64) -> f64>(
    mut f: F,
    first_panel: f64,
    cfg: &QuadratureConfig,
) -> Result<QuadResult> {
    let mut out = integrate_origin_panel(&mut f, first_panel, cfg)?;
    let mut lo = first_panel;
    let mut quiet = 0;
    let mut max_mass = out.abs_mass;
    for _ in 0..200 {
        let hi = 2.0 * lo;
        let panel = integrate(&mut f, lo, hi, cfg)?;
        out.value += panel.value;
        out.abs_err += panel.abs_err;
        out.abs_mass += panel.abs_mass;
        out.evals += panel.evals;
        max_mass = max_mass.max(panel.abs_mass);
        let small = panel.abs_mass <= cfg.truncation * out.value.abs().max(max_mass)
            || panel.abs_mass <= cfg.abs_tol * 1e-3;
        if small && (panel.abs_mass < max_mass || panel.abs_mass == 0.0) {
            quiet += 1;
            if quiet >= 2 {
                return Ok(out);
            }
        } else {
            quiet = 0;
        }
        lo = hi;
        if !out.value.is_finite() {
            break;
        }
    }
    Err(Error::NonConvergence(format!(
        "semi-infinite integral did not decay by t = {lo:e}"
    )))
}

/// `∫₀^∞ f(t) dt` for integrands oscillating with half-period `half_period`.
///
/// The first panel is `[0, half_period]`; each later panel spans one
/// half-period. Partial sums are accelerated by repeated averaging of
/// neighbours (Euler's transformation for alternating series).
pub fn integrate_oscillatory<F: FnMut(f64) -> f64>(
    mut f: F,
    half_period: f64,
    cfg: &QuadratureConfig,
) -> Result<QuadResult> {
    const EULER_DEPTH: usize = 12;
    const MAX_PANELS: usize = 200_000;

    let first = integrate_origin_panel(&mut f, half_period, cfg)?;
    let mut out = first;
    let mut partial: Vec<f64> = vec![out.value];
    let mut max_mass = first.abs_mass;
    let mut last_accel: Option<f64> = None;
    let mut quiet = 0;
    let mut stable = 0;
    for m in 1..MAX_PANELS {
        let lo = m as f64 * half_period;
        let hi = lo + half_period;
        let panel = integrate(&mut f, lo, hi, cfg)?;
        out.value += panel.value;
        out.abs_err += panel.abs_err;
        out.abs_mass += panel.abs_mass;
        out.evals += panel.evals;
        max_mass = max_mass.max(panel.abs_mass);
        partial.push(out.value);

        let tol = cfg.abs_tol.max(cfg.rel_tol * out.value.abs());
        if panel.abs_mass <= cfg.truncation * out.value.abs().max(max_mass)
            || panel.abs_mass <= 1e-3 * cfg.abs_tol
        {
            quiet += 1;
            if quiet >= 2 {
                return Ok(out);
            }
        } else {
            quiet = 0;
        }

        if partial.len() > EULER_DEPTH {
            let accel = euler_average(&partial[partial.len() - EULER_DEPTH - 1..]);
            if let Some(prev) = last_accel {
                if (accel - prev).abs() <= tol {
                    stable += 1;
                    if stable >= 3 {
                        out.abs_err += (accel - prev).abs();
                        out.value = accel;
                        return Ok(out);
                    }
                } else {
                    stable = 0;
                }
            }
            last_accel = Some(accel);
        }
        if !out.value.is_finite() {
            break;
        }
    }
    Err(Error::NonConvergence(format!(
        "oscillatory integral did not settle after {MAX_PANELS} panels"
    )))
}

/// Repeated neighbour averaging of partial sums.
pub fn euler_average(partial: &[f64]) -> f64 {
    let mut row = partial.to_vec();
    while row.len() > 1 {
        row = row.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
    }
    row[0]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> QuadratureConfig {
        QuadratureConfig::default()
    }

    #[test]
    fn kronrod_rule_is_exact_for_degree_31() {
        let mut f = |x: f64| x.powi(30) + 3.0 * x.powi(7) - 1.0;
        let (v, _, _) = gauss_kronrod_21(&mut f, -1.0, 1.0);
        let exact = 2.0 / 31.0 - 2.0;
        assert!((v - exact).abs() < 1e-14, "{v} vs {exact}");
    }

    #[test]
    fn adaptive_handles_peaks() {
        let r = integrate(|x| 1.0 / (1e-4 + x * x), -1.0, 1.0, &cfg()).unwrap();
        let exact = 2.0 * (1.0f64 / 1e-2).atan() / 1e-2;
        assert!((r.value / exact - 1.0).abs() < 1e-12);
    }

    #[test]
    fn semi_infinite_gamma_integral() {
        // ∫ t^20 e^{-t} = 20!
        let r = integrate_semi_infinite(|t| t.powi(20) * (-t).exp(), 1.0, &cfg()).unwrap();
        let fact20 = 2_432_902_008_176_640_000.0;
        assert!((r.value / fact20 - 1.0).abs() < 1e-12, "{}", r.value);
    }

    #[test]
    fn origin_singularity_is_smoothed() {
        // ∫ t^{-1/4} e^{-t} = Γ(3/4)
        let r = integrate_semi_infinite(|t| t.powf(-0.25) * (-t).exp(), 1.0, &cfg()).unwrap();
        assert!((r.value - 1.225_416_702_465_177_6).abs() < 1e-12, "{}", r.value);
    }

    #[test]
    fn oscillatory_dirichlet_type() {
        // ∫ e^{-t/50} sin(t)/t dt = atan(50)
        let r = integrate_oscillatory(
            |t| (-t / 50.0).exp() * t.sin() / t,
            std::f64::consts::PI,
            &cfg(),
        )
        .unwrap();
        assert!((r.value - 50f64.atan()).abs() < 1e-10, "{}", r.value);
    }

    #[test]
    fn euler_average_of_alternating_harmonic() {
        let mut s = 0.0;
        let partial: Vec<f64> = (1..=20)
            .map(|k| {
                s += if k % 2 == 1 { 1.0 } else { -1.0 } / k as f64;
                s
            })
            .collect();
        assert!((euler_average(&partial) - 2f64.ln()).abs() < 1e-8);
    }
}
