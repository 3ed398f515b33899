//! Inverse-transform sampling through composite quantiles.
//!
//! # Generator
//!
//! Uniforms come from xorshift64* seeded through splitmix64, so any
//! implementation can reproduce a batch from its seed:
//!
//! ```text
//! splitmix64:  z = (s += 0x9E3779B97F4A7C15)
//!              z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
//!              z = (z ^ (z >> 27)) * 0x94D049BB133111EB
//!              return z ^ (z >> 31)
//! state₀     = splitmix64(seed)          (replaced by 1 if zero)
//! xorshift64*: x ^= x >> 12; x ^= x << 25; x ^= x >> 27
//!              return x * 0x2545F4914F6CDD1D
//! U          = ((k >> 12) + 0.5) · 2⁻⁵²  ∈ (0, 1)
//! ```
//!
//! All arithmetic is wrapping mod 2⁶⁴. Partition `p` of a split batch uses the
//! seed `splitmix64` returns on its `(p+1)`-th call from state `seed`.

use crate::charfns::make_levy_area_p;
use crate::diffring::SymbolicStore;
use crate::error::{Error, Result};
use crate::moments::QuadratureConfig;
use crate::series::build_series_with;
use crate::tails::{CompositeQuantile, ExponentialTail, GaussianTail, Tail};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// One splitmix64 step; returns the output and advances `state`.
pub fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of partition `p` derived from a batch seed.
pub fn partition_seed(seed: u64, p: u64) -> u64 {
    let mut s = seed;
    let mut out = 0;
    for _ in 0..=p {
        out = splitmix64(&mut s);
    }
    out
}

/// xorshift64* generator.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct XorShift64Star {
    state: u64,
}

impl XorShift64Star {
    pub fn new(seed: u64) -> Self {
        let mut s = seed;
        let state = splitmix64(&mut s);
        XorShift64Star {
            state: if state == 0 { 1 } else { state },
        }
    }

    pub fn next_u64(&mut self) -> u64 {
        let mut x = self.state;
        x ^= x >> 12;
        x ^= x << 25;
        x ^= x >> 27;
        self.state = x;
        x.wrapping_mul(0x2545_F491_4F6C_DD1D)
    }

    /// Uniform on the open interval `(0, 1)`.
    pub fn next_uniform(&mut self) -> f64 {
        ((self.next_u64() >> 12) as f64 + 0.5) * (1.0 / (1u64 << 52) as f64)
    }
}

/// A reproducible batch of draws.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleBatch {
    pub values: Vec<f64>,
    pub seed: u64,
    /// Description of the sampled law, echoed into outputs.
    pub dist: String,
    pub n: usize,
}

fn describe(q: &CompositeQuantile) -> String {
    match &q.central.dist {
        Some(d) => d.to_json(),
        None => "custom".into(),
    }
}

/// `n` draws of `w(U)`.
pub fn sample(q: &CompositeQuantile, n: usize, seed: u64) -> Result<SampleBatch> {
    if n == 0 {
        return Err(Error::Domain("sample size must be at least 1".into()));
    }
    let mut rng = XorShift64Star::new(seed);
    let mut values = Vec::with_capacity(n);
    for _ in 0..n {
        values.push(q.eval(rng.next_uniform())?);
    }
    Ok(SampleBatch {
        values,
        seed,
        dist: describe(q),
        n,
    })
}

/// Quantile of the loop part, logistic with scale `Δt/π`.
pub fn levy_loop_quantile(u: f64, delta_t: f64) -> f64 {
    delta_t / PI * (u / (1.0 - u)).ln()
}

/// Upper-tail treatment of the conditioned part `P`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum LevyTail {
    /// Central series everywhere.
    None,
    /// `P ≈ r·Z/√3` beyond the join.
    Gaussian,
    /// Logarithmic continuation with matching slope; the density of `P`
    /// decays exponentially, so this keeps the second moment.
    #[default]
    Exponential,
}

/// Options for the conditioned part of the Lévy area sampler.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LevyAreaOptions {
    pub nterms: usize,
    pub tail: LevyTail,
    pub u_switch: f64,
}

impl Default for LevyAreaOptions {
    fn default() -> Self {
        LevyAreaOptions {
            nterms: 35,
            tail: LevyTail::Exponential,
            u_switch: 0.95,
        }
    }
}

/// Composite quantile of the conditioned part `P` at unit time.
pub fn levy_area_p_quantile(
    r: f64,
    opts: &LevyAreaOptions,
    store: &SymbolicStore,
    cfg: &QuadratureConfig,
) -> Result<CompositeQuantile> {
    let cf = make_levy_area_p(r)?;
    let central = build_series_with(&cf, store, opts.nterms, cfg)?;
    let tail = match opts.tail {
        LevyTail::None => return Ok(CompositeQuantile::central_only(central)),
        LevyTail::Gaussian => Tail::Gaussian(GaussianTail {
            sigma: r / 3f64.sqrt(),
            u_switch: opts.u_switch,
        }),
        LevyTail::Exponential => Tail::Exponential(ExponentialTail::matched(&central, opts.u_switch)?),
    };
    CompositeQuantile::with_fixed_tail(central, tail)
}

/// `n` draws of `L = Q_X(U₁) + Δt·Q_P(U₂)` from one stream (`U₁` then `U₂`).
pub fn sample_levy_area(
    r: f64,
    delta_t: f64,
    n: usize,
    seed: u64,
    opts: &LevyAreaOptions,
    store: &SymbolicStore,
    cfg: &QuadratureConfig,
) -> Result<SampleBatch> {
    if !(delta_t > 0.0) || !delta_t.is_finite() {
        return Err(Error::Domain(format!("delta_t must be > 0, got {delta_t}")));
    }
    if n == 0 {
        return Err(Error::Domain("sample size must be at least 1".into()));
    }
    let qp = levy_area_p_quantile(r, opts, store, cfg)?;
    let mut rng = XorShift64Star::new(seed);
    let mut values = Vec::with_capacity(n);
    for _ in 0..n {
        let u1 = rng.next_uniform();
        let u2 = rng.next_uniform();
        values.push(levy_loop_quantile(u1, delta_t) + delta_t * qp.eval(u2)?);
    }
    Ok(SampleBatch {
        values,
        seed,
        dist: format!("{{\"dist\":\"levy-area\",\"r\":{r},\"delta_t\":{delta_t}}}"),
        n,
    })
}
