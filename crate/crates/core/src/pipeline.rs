//! From a distribution spec to an evaluatable quantile.
//!
//! Tail policy: symmetric stable laws with `α < 2` get the asymptotic stable
//! tail, the conditioned Lévy-area part gets the logarithmic tail, everything
//! else is central-only with a trusted range capped at `central_limit`.

use crate::charfns::{CharFnDescriptor, DistSpec};
use crate::diffring::SymbolicStore;
use crate::error::Result;
use crate::moments::QuadratureConfig;
use crate::sampler::{levy_area_p_quantile, LevyAreaOptions, LevyTail};
use crate::series::{build_series_with, DEFAULT_TERMS};
use crate::tails::{stable_tail, CompositeQuantile, SwitchChoice, Tail, TailConfig};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuantileOptions {
    pub nterms: usize,
    /// Attach the tail model when the law has one.
    pub tails: bool,
    pub tail: TailConfig,
    /// Upper end of the trusted central range for laws without a tail.
    pub central_limit: f64,
    /// Multiplier `c`: the quantile is that of `cX`.
    pub scale: f64,
}

impl Default for QuantileOptions {
    fn default() -> Self {
        QuantileOptions {
            nterms: DEFAULT_TERMS,
            tails: true,
            tail: TailConfig::default(),
            central_limit: 0.94,
            scale: 1.0,
        }
    }
}

/// A composite quantile together with what went into it.
#[derive(Clone)]
pub struct BuiltQuantile {
    pub quantile: CompositeQuantile,
    /// Descriptor of the (scaled) law, for CDF checks.
    pub descriptor: CharFnDescriptor,
    pub switch: Option<SwitchChoice>,
}

pub fn build_quantile(
    spec: &DistSpec,
    store: &SymbolicStore,
    opts: &QuantileOptions,
    cfg: &QuadratureConfig,
) -> Result<BuiltQuantile> {
    let cf = spec.descriptor()?;
    let mut switch = None;
    let quantile = match *spec {
        DistSpec::Stable { alpha, beta } if beta == 0.0 && alpha < 2.0 && opts.tails => {
            let central = build_series_with(&cf, store, opts.nterms, cfg)?;
            let tail = Tail::Stable(stable_tail(alpha, &opts.tail)?);
            let (q, choice) = CompositeQuantile::with_tail_for(central, tail, &cf, &opts.tail, cfg)?;
            switch = Some(choice);
            q
        }
        DistSpec::LevyAreaP { r } => {
            let levy = LevyAreaOptions {
                nterms: opts.nterms,
                tail: if opts.tails { LevyTail::Exponential } else { LevyTail::None },
                ..LevyAreaOptions::default()
            };
            levy_area_p_quantile(r, &levy, store, cfg)?
        }
        _ => {
            let central = build_series_with(&cf, store, opts.nterms, cfg)?;
            let mut q = CompositeQuantile::central_only(central);
            if q.central.symmetric {
                q.central_limit = Some(opts.central_limit);
            }
            q
        }
    };
    let (quantile, descriptor) = if opts.scale == 1.0 {
        (quantile, cf)
    } else {
        (quantile.scaled(opts.scale)?, cf.scaled(opts.scale)?)
    };
    Ok(BuiltQuantile {
        quantile,
        descriptor,
        switch,
    })
}
