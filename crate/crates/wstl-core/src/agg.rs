//! Smooth weighted min/max aggregation with an exact min/max reference mode.
//!
//! The smooth forms are softmin/softmax-style ratios
//! `sum w_i r_i exp(-+r_i/sigma) / sum w_i exp(-+r_i/sigma)`; conjunction and
//! globally use the `-r/sigma` exponent, disjunction and eventually `+r/sigma`.
//! Exponents are shifted by the extremum before evaluation, which leaves the
//! ratio unchanged but avoids overflow at small `sigma`.

use alloc::string::String;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AggMode {
    /// Differentiable softmin/softmax ratio aggregation.
    Smooth,
    /// Exact min/max over entries with positive weight (reference oracle).
    ExactMinMax,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AggregationConfig {
    pub sigma: f64,
    pub mode: AggMode,
}

impl AggregationConfig {
    pub fn smooth(sigma: f64) -> Result<Self> {
        if !(sigma > 0.0) {
            return Err(Error::Config(String::from("sigma must be > 0")));
        }
        Ok(AggregationConfig {
            sigma,
            mode: AggMode::Smooth,
        })
    }

    pub fn exact() -> Self {
        AggregationConfig {
            sigma: 1.0,
            mode: AggMode::ExactMinMax,
        }
    }
}

fn check_inputs(weights: &[f64], values: &[f64]) -> Result<()> {
    if weights.is_empty() || weights.len() != values.len() {
        return Err(Error::Domain(String::from(
            "weights and values must have the same nonzero length",
        )));
    }
    if weights.iter().all(|&w| w == 0.0) {
        return Err(Error::Domain(String::from("all-zero weight vector")));
    }
    Ok(())
}

/// `sign = -1` gives the conjunctive (min-like) form, `sign = +1` the
/// disjunctive (max-like) form. Zero-weight entries are skipped.
fn smooth_agg(weights: &[f64], values: &[f64], sigma: f64, sign: f64) -> f64 {
    // shift exponents by the active extremum; identity on the ratio
    let shift = weights
        .iter()
        .zip(values)
        .filter(|(&w, _)| w > 0.0)
        .map(|(_, &r)| sign * r)
        .fold(f64::NEG_INFINITY, f64::max);
    let mut num = 0.0;
    let mut den = 0.0;
    for (&w, &r) in weights.iter().zip(values) {
        if w == 0.0 {
            continue;
        }
        let e = libm::exp(sign * r / sigma - shift / sigma);
        num += w * r * e;
        den += w * e;
    }
    num / den
}

fn exact_agg(weights: &[f64], values: &[f64], sign: f64) -> f64 {
    let mut best = f64::NEG_INFINITY;
    for (&w, &r) in weights.iter().zip(values) {
        if w > 0.0 && sign * r > best {
            best = sign * r;
        }
    }
    sign * best
}

fn agg(weights: &[f64], values: &[f64], cfg: &AggregationConfig, sign: f64) -> Result<f64> {
    check_inputs(weights, values)?;
    Ok(match cfg.mode {
        AggMode::Smooth => smooth_agg(weights, values, cfg.sigma, sign),
        AggMode::ExactMinMax => exact_agg(weights, values, sign),
    })
}

/// Weighted conjunction aggregation (min-like).
pub fn agg_conj(weights: &[f64], values: &[f64], cfg: &AggregationConfig) -> Result<f64> {
    agg(weights, values, cfg, -1.0)
}

/// Weighted disjunction aggregation (max-like).
pub fn agg_disj(weights: &[f64], values: &[f64], cfg: &AggregationConfig) -> Result<f64> {
    agg(weights, values, cfg, 1.0)
}

/// Globally aggregation over the interval-shifted robustness sequence.
/// Same form as [`agg_conj`].
pub fn agg_glob(weights: &[f64], values: &[f64], cfg: &AggregationConfig) -> Result<f64> {
    agg(weights, values, cfg, -1.0)
}

/// Eventually aggregation over the interval-shifted robustness sequence.
/// Same form as [`agg_disj`].
pub fn agg_event(weights: &[f64], values: &[f64], cfg: &AggregationConfig) -> Result<f64> {
    agg(weights, values, cfg, 1.0)
}
