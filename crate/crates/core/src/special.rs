//! Special functions: Γ, modified Bessel K of real order, and the normal
//! distribution helpers used by the oracles.

use crate::dd::DoubleDouble;
use crate::error::{Error, Result};
use std::f64::consts::PI;

const LANCZOS_G: f64 = 607.0 / 128.0;
const LANCZOS_COEFFS: [f64; 15] = [
    0.999_999_999_999_997_091_82,
    57.156_235_665_862_923_517,
    -59.597_960_355_475_491_248,
    14.136_097_974_741_747_174,
    -0.491_913_816_097_620_199_78,
    0.339_946_499_848_118_886_99e-4,
    0.465_236_289_270_485_756_65e-4,
    -0.983_744_753_048_795_646_77e-4,
    0.158_088_703_224_912_488_84e-3,
    -0.210_264_441_724_104_883_19e-3,
    0.217_439_618_115_212_643_20e-3,
    -0.164_318_106_536_763_890_22e-3,
    0.844_182_239_838_527_432_93e-4,
    -0.261_908_384_015_814_086_70e-4,
    0.368_991_826_595_316_227_04e-5,
];

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_741_78;

fn lanczos_sum(z: f64) -> f64 {
    // z here is the shifted argument (Γ(z + 1) form).
    let mut acc = LANCZOS_COEFFS[0];
    for (k, c) in LANCZOS_COEFFS.iter().enumerate().skip(1) {
        acc += c / (z + k as f64);
    }
    acc
}

/// ln Γ(x) for x > 0.
pub fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        // Reflection: Γ(x)Γ(1−x) = π / sin(πx)
        return (PI / (PI * x).sin()).abs().ln() - ln_gamma(1.0 - x);
    }
    let z = x - 1.0;
    let t = z + LANCZOS_G + 0.5;
    LN_SQRT_2PI + (z + 0.5) * t.ln() - t + lanczos_sum(z).ln()
}

/// Γ(x) for real x away from the non-positive integers.
pub fn gamma(x: f64) -> f64 {
    if x <= 0.0 && x == x.floor() {
        return f64::NAN;
    }
    if x < 0.5 {
        return PI / ((PI * x).sin() * gamma(1.0 - x));
    }
    if x > 171.7 {
        return f64::INFINITY;
    }
    gamma_dd(DoubleDouble::new(x)).to_f64()
}

// B_{2k} / (2k(2k−1)) as (numerator, denominator), k = 1..=13.
const STIRLING: [(f64, f64); 13] = [
    (1.0, 12.0),
    (-1.0, 360.0),
    (1.0, 1260.0),
    (-1.0, 1680.0),
    (1.0, 1188.0),
    (-691.0, 360_360.0),
    (1.0, 156.0),
    (-3617.0, 122_400.0),
    (43867.0, 244_188.0),
    (-174_611.0, 125_400.0),
    (77683.0, 5796.0),
    (-236_364_091.0, 1_506_960.0),
    (657_931.0, 300.0),
];

/// ln Γ(z) for z ≥ 40 by the Stirling series, in double-double.
fn ln_gamma_stirling(z: DoubleDouble) -> DoubleDouble {
    let half = DoubleDouble::new(0.5);
    let ln_sqrt_2pi = (DoubleDouble::PI * DoubleDouble::new(2.0)).ln() * half;
    let mut s = (z - half) * z.ln() - z + ln_sqrt_2pi;
    let zinv = DoubleDouble::ONE / z;
    let zinv2 = zinv * zinv;
    let mut p = zinv;
    for &(num, den) in &STIRLING {
        s = s + DoubleDouble::ratio(num, den) * p;
        p = p * zinv2;
    }
    s
}

/// Γ(x) for x > 0 to double-double accuracy: the argument is shifted past
/// 40, where the Stirling series converges to ~1e−35, and divided back.
pub fn gamma_dd(x: DoubleDouble) -> DoubleDouble {
    debug_assert!(x.hi > 0.0);
    let mut z = x;
    let mut prod = DoubleDouble::ONE;
    while z.hi < 40.0 {
        prod = prod * z;
        z = z + DoubleDouble::ONE;
    }
    ln_gamma_stirling(z).exp() / prod
}

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// Standard normal density.
pub fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

/// Standard normal quantile: rational starting point refined by Halley steps
/// on the complementary error function.
pub fn normal_quantile(p: f64) -> f64 {
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    if p > 0.5 {
        return -normal_quantile(1.0 - p);
    }
    let mut x = normal_quantile_rational(p);
    for _ in 0..3 {
        // Lower half: work with Φ(x) = erfc(−x/√2)/2 directly.
        let e = normal_cdf(x) - p;
        let u = e / normal_pdf(x);
        x -= u / (1.0 + 0.5 * x * u);
    }
    x
}

// Acklam's rational approximation (relative error ~1e-9).
fn normal_quantile_rational(p: f64) -> f64 {
    const A: [f64; 6] = [
        -3.969_683_028_665_376e1,
        2.209_460_984_245_205e2,
        -2.759_285_104_469_687e2,
        1.383_577_518_672_690e2,
        -3.066_479_806_614_716e1,
        2.506_628_277_459_239,
    ];
    const B: [f64; 5] = [
        -5.447_609_879_822_406e1,
        1.615_858_368_580_409e2,
        -1.556_989_798_598_866e2,
        6.680_131_188_771_972e1,
        -1.328_068_155_288_572e1,
    ];
    const C: [f64; 6] = [
        -7.784_894_002_430_293e-3,
        -3.223_964_580_411_365e-1,
        -2.400_758_277_161_838,
        -2.549_732_539_343_734,
        4.374_664_141_464_968,
        2.938_163_982_698_783,
    ];
    const D: [f64; 4] = [
        7.784_695_709_041_462e-3,
        3.224_671_290_700_398e-1,
        2.445_134_137_142_996,
        3.754_408_661_907_416,
    ];
    const P_LOW: f64 = 0.024_25;
    if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    }
}

/// Above this argument `I_ν` overflows, so the scaled `K_ν` comes from the
/// large-argument expansion instead.
const BESSEL_ASYMPTOTIC_Z: f64 = 500.0;

/// `e^z K_ν(z)` from Hankel's expansion, for large `z` and `|ν| ≤ 1`.
fn bessel_k_scaled_hankel(nu: f64, z: f64) -> f64 {
    let mu = 4.0 * nu * nu;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..30 {
        let odd = (2 * k - 1) as f64;
        term *= (mu - odd * odd) / (k as f64 * 8.0 * z);
        sum += term;
        if term.abs() < 1e-17 * sum.abs() {
            break;
        }
    }
    (PI / (2.0 * z)).sqrt() * sum
}

/// Modified Bessel function of the second kind, real order, scaled by `e^z`.
///
/// Large arguments use Hankel's expansion at orders `μ, μ+1` with
/// `μ = ν − ⌊ν⌋` and the upward recurrence `K_{ν+1} = K_{ν−1} + (2ν/z) K_ν`,
/// which is stable for K.
pub fn bessel_k_scaled(nu: f64, z: f64) -> Result<f64> {
    if !(z > 0.0) || !z.is_finite() {
        return Err(Error::Domain(format!("Bessel K needs z > 0, got {z}")));
    }
    let nu = nu.abs();
    if !nu.is_finite() {
        return Err(Error::Domain(format!("Bessel K needs a finite order, got {nu}")));
    }
    if z <= BESSEL_ASYMPTOTIC_Z {
        let (_, k, _, _) = puruspe::besselik(nu, z);
        return Ok(k * z.exp());
    }
    let mu = nu - nu.floor();
    let mut k_prev = bessel_k_scaled_hankel(mu, z);
    if nu < 1.0 {
        return Ok(k_prev);
    }
    let mut k_cur = bessel_k_scaled_hankel(mu + 1.0, z);
    let mut order = mu + 1.0;
    while order + 0.5 < nu {
        let next = k_prev + 2.0 * order / z * k_cur;
        k_prev = k_cur;
        k_cur = next;
        order += 1.0;
    }
    Ok(k_cur)
}

/// Modified Bessel function of the second kind `K_ν(z)`, real order, `z > 0`.
pub fn bessel_k(nu: f64, z: f64) -> Result<f64> {
    Ok(bessel_k_scaled(nu, z)? * (-z).exp())
}
