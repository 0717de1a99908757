//! Weighted null-proportion adaptive compound e-values.
//!
//! Each hypothesis carries a deterministic weight `w_k ∈ [0, K]` with
//! `Σ w_k = K`. Zero weights are allowed and simply drop the hypothesis.

use std::ops::Deref;

use crate::engine::{EValues, PValues};
use crate::error::{check_open_unit, Error, Result};
use crate::estimators::{check_shapes, leave_one_out_sums};
use crate::shape::Shape;

const SUM_TOLERANCE: f64 = 1e-9;

/// Prior weights summing to `K`.
#[derive(Debug, Clone, PartialEq)]
pub struct Weights(Vec<f64>);

impl Weights {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::validation("weight vector is empty"));
        }
        let k = values.len() as f64;
        for (i, &w) in values.iter().enumerate() {
            if !(w >= 0.0 && w <= k) {
                return Err(Error::validation(format!(
                    "weight at index {i} is {w}, outside [0, {k}]"
                )));
            }
        }
        let sum: f64 = values.iter().sum();
        if (sum - k).abs() > SUM_TOLERANCE * k {
            return Err(Error::validation(format!(
                "weights sum to {sum}, expected {k}"
            )));
        }
        Ok(Weights(values))
    }

    /// Rescales nonnegative values so they sum to `K`.
    pub fn normalized(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|&w| !(w >= 0.0) || !w.is_finite()) {
            return Err(Error::validation("weights must be finite and nonnegative"));
        }
        let sum: f64 = values.iter().sum();
        if !(sum > 0.0) {
            return Err(Error::validation("weights sum to zero; cannot normalize"));
        }
        let k = values.len() as f64;
        Weights::new(values.into_iter().map(|w| k * w / sum).collect())
    }

    pub fn uniform(k: usize) -> Self {
        Weights(vec![1.0; k])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

impl Deref for Weights {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

fn check_pair(p: &PValues, w: &Weights) -> Result<()> {
    if p.len() != w.len() {
        return Err(Error::Dimension {
            expected: p.len(),
            got: w.len(),
        });
    }
    Ok(())
}

fn ratio(numerator: f64, denominator: f64) -> f64 {
    if numerator == 0.0 {
        0.0
    } else {
        numerator / denominator
    }
}

/// W-Max-Storey: `K w_k (1-τ) / (max_l w_l + Σ_l w_l 1{P_l > τ})`.
pub fn w_max_storey(p: &PValues, w: &Weights, tau: f64) -> Result<EValues> {
    check_open_unit("tau", tau)?;
    check_pair(p, w)?;
    let k = p.len() as f64;
    let max_w = w.iter().copied().fold(0.0, f64::max);
    let exceed: f64 = p
        .iter()
        .zip(w.iter())
        .map(|(&p, &w)| if p > tau { w } else { 0.0 })
        .sum();
    let denominator = max_w + exceed;
    EValues::new(
        w.iter()
            .map(|&wk| ratio(k * wk * (1.0 - tau), denominator))
            .collect(),
    )
}

/// W-LOO-Storey+: `K w_k (1-τ) / (w_k + Σ_{l≠k} w_l 1{P_l > τ})`.
///
/// With `censor`, `E_k` is additionally zeroed when `P_k > τ`, which
/// reproduces the censored weighted Storey procedure.
pub fn w_loo_storey_plus(p: &PValues, w: &Weights, tau: f64, censor: bool) -> Result<EValues> {
    check_open_unit("tau", tau)?;
    check_pair(p, w)?;
    let k = p.len() as f64;
    let terms: Vec<f64> = p
        .iter()
        .zip(w.iter())
        .map(|(&p, &w)| if p > tau { w } else { 0.0 })
        .collect();
    let others = leave_one_out_sums(&terms);
    EValues::new(
        w.iter()
            .zip(p.iter())
            .zip(others)
            .map(|((&wk, &pk), rest)| {
                if censor && pk > tau {
                    0.0
                } else {
                    ratio(k * wk * (1.0 - tau), wk + rest)
                }
            })
            .collect(),
    )
}

/// W-DM+: `K w_k / (w_k/ν_k + Σ_{l≠k} ψ_l(P_l) w_l/ν_l)`.
pub fn w_dm_plus(p: &PValues, w: &Weights, shapes: &[Shape]) -> Result<EValues> {
    check_pair(p, w)?;
    check_shapes(p, shapes)?;
    let k = p.len() as f64;
    let terms: Vec<f64> = p
        .iter()
        .zip(w.iter())
        .zip(shapes)
        .map(|((&p, &w), s)| s.eval(p) * (w / s.nu()))
        .collect();
    let others = leave_one_out_sums(&terms);
    EValues::new(
        w.iter()
            .zip(shapes)
            .zip(others)
            .map(|((&wk, s), rest)| ratio(k * wk, wk / s.nu() + rest))
            .collect(),
    )
}
