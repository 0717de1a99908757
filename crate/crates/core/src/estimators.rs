//! Homogeneous null-proportion adaptivity as compound e-values.
//!
//! An adaptive BH procedure that runs BH at level `alpha / pi0_hat(P)` is
//! ep-BH with the flat e-values `E_k = 1 / pi0_hat(P)`. When `pi0_hat` is
//! coordinate-wise non-decreasing, the leave-one-out values
//! `E_k = 1 / pi0_hat(P_{k -> 0})` are at least as large and still yield FDR
//! control, so every such procedure has a uniformly more powerful "+" form.
//!
//! All e-values here are computed as `1 / pi0` from an explicit `pi0`
//! expression so that a flat construction and its leave-one-out lift round
//! identically.

use std::sync::Arc;

use log::warn;

use crate::engine::{bh_count, step_up, EValues, PValues, Rejections};
use crate::error::{check_open_unit, Error, Result};
use crate::shape::Shape;

/// A null-proportion estimator `P -> pi0_hat(P) ∈ (0, ∞]`.
///
/// `+∞` is allowed and maps to the e-value 0. Implementations must be
/// reentrant.
pub trait NullPropEstimator: Send + Sync {
    fn pi0(&self, p: &[f64]) -> Result<f64>;

    /// Whether `pi0` is coordinate-wise non-decreasing in `P`. The
    /// leave-one-out lift is only valid for monotone estimators.
    fn is_monotone(&self) -> bool;
}

fn invert(pi0: f64) -> Result<f64> {
    if pi0.is_nan() || pi0 <= 0.0 {
        return Err(Error::Numerical(format!(
            "null-proportion estimate must be positive, got {pi0}"
        )));
    }
    Ok(1.0 / pi0)
}

/// `Σ_{l≠k} terms[l]` for every `k`, via prefix and suffix sums.
///
/// Each entry is non-decreasing in every term other than its own and does
/// not depend on its own term at all.
pub(crate) fn leave_one_out_sums(terms: &[f64]) -> Vec<f64> {
    let k = terms.len();
    let mut prefix = vec![0.0; k + 1];
    for i in 0..k {
        prefix[i + 1] = prefix[i] + terms[i];
    }
    let mut suffix = vec![0.0; k + 1];
    for i in (0..k).rev() {
        suffix[i] = suffix[i + 1] + terms[i];
    }
    (0..k).map(|i| prefix[i] + suffix[i + 1]).collect()
}

pub(crate) fn check_shapes(p: &[f64], shapes: &[Shape]) -> Result<()> {
    if shapes.len() != p.len() {
        return Err(Error::Dimension {
            expected: p.len(),
            got: shapes.len(),
        });
    }
    Ok(())
}

fn exceedances(p: &[f64], tau: f64) -> usize {
    p.iter().filter(|&&x| x > tau).count()
}

// ---------------------------------------------------------------------------
// Estimators
// ---------------------------------------------------------------------------

/// Storey: `(c + #{P > τ}) / (K (1 - τ))`.
#[derive(Debug, Clone, Copy)]
pub struct StoreyEstimator {
    tau: f64,
    c: f64,
}

impl StoreyEstimator {
    pub fn new(tau: f64, c: f64) -> Result<Self> {
        check_open_unit("tau", tau)?;
        if !(c > 0.0 && c <= 1.0) {
            return Err(Error::domain(format!("c must lie in (0, 1], got {c}")));
        }
        Ok(StoreyEstimator { tau, c })
    }

    fn from_count(&self, count: usize, k: usize) -> f64 {
        (self.c + count as f64) / (k as f64 * (1.0 - self.tau))
    }
}

impl NullPropEstimator for StoreyEstimator {
    fn pi0(&self, p: &[f64]) -> Result<f64> {
        Ok(self.from_count(exceedances(p, self.tau), p.len()))
    }

    fn is_monotone(&self) -> bool {
        true
    }
}

/// Modified Pounds–Cheng: `(2 + 2 Σ P) / K`.
#[derive(Debug, Clone, Copy, Default)]
pub struct MpcEstimator;

impl NullPropEstimator for MpcEstimator {
    fn pi0(&self, p: &[f64]) -> Result<f64> {
        Ok((2.0 + 2.0 * p.iter().sum::<f64>()) / p.len() as f64)
    }

    fn is_monotone(&self) -> bool {
        true
    }
}

/// Döhler–Meah: `(max_l 1/ν_l + Σ_l ψ_l(P_l)/ν_l) / K`.
#[derive(Debug, Clone)]
pub struct DmEstimator {
    shapes: Vec<Shape>,
}

impl DmEstimator {
    pub fn new(shapes: Vec<Shape>) -> Self {
        DmEstimator { shapes }
    }
}

impl NullPropEstimator for DmEstimator {
    fn pi0(&self, p: &[f64]) -> Result<f64> {
        check_shapes(p, &self.shapes)?;
        let max_inv = self.shapes.iter().map(|s| 1.0 / s.nu()).fold(0.0, f64::max);
        let total: f64 = p
            .iter()
            .zip(&self.shapes)
            .map(|(&x, s)| s.eval(x) / s.nu())
            .sum();
        Ok((max_inv + total) / p.len() as f64)
    }

    fn is_monotone(&self) -> bool {
        true
    }
}

/// Quantile estimator: `(K - L + 1) / (K (1 - P_(L)))`.
#[derive(Debug, Clone, Copy)]
pub struct QuantEstimator {
    l: usize,
}

impl QuantEstimator {
    pub fn new(l: usize) -> Result<Self> {
        if l == 0 {
            return Err(Error::domain("quantile index L must be at least 1"));
        }
        Ok(QuantEstimator { l })
    }
}

impl NullPropEstimator for QuantEstimator {
    fn pi0(&self, p: &[f64]) -> Result<f64> {
        let k = p.len();
        if self.l > k {
            return Err(Error::domain(format!(
                "quantile index L={} exceeds K={k}",
                self.l
            )));
        }
        let mut sorted = p.to_vec();
        sorted.sort_by(f64::total_cmp);
        let q = sorted[self.l - 1];
        let numerator = (k - self.l + 1) as f64;
        if q >= 1.0 {
            return Ok(f64::INFINITY);
        }
        Ok(numerator / (k as f64 * (1.0 - q)))
    }

    fn is_monotone(&self) -> bool {
        true
    }
}

/// IBHlog: `(2 - Σ log(1 - P)) / K`; infinite when some `P = 1`.
#[derive(Debug, Clone, Copy, Default)]
pub struct IbhLogEstimator;

impl NullPropEstimator for IbhLogEstimator {
    fn pi0(&self, p: &[f64]) -> Result<f64> {
        let s: f64 = p.iter().map(|&x| (-x).ln_1p()).sum();
        Ok((2.0 - s) / p.len() as f64)
    }

    fn is_monotone(&self) -> bool {
        true
    }
}

/// Parameters of Min-Storey. The constant `c` has no default.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MinStoreyParams {
    pub eps: f64,
    pub pi_lower: f64,
    pub c: f64,
}

impl MinStoreyParams {
    pub fn new(eps: f64, pi_lower: f64, c: f64) -> Result<Self> {
        check_open_unit("eps", eps)?;
        check_open_unit("pi_lower", pi_lower)?;
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::domain(format!("Min-Storey constant C must be positive, got {c}")));
        }
        Ok(MinStoreyParams { eps, pi_lower, c })
    }
}

/// Min-Storey: `max{π_lower, C inf_{τ∈[0,1-ε]} max{1, #{P > τ}} / (K(1-τ))}`.
#[derive(Debug, Clone, Copy)]
pub struct MinStoreyEstimator {
    params: MinStoreyParams,
}

impl MinStoreyEstimator {
    pub fn new(params: MinStoreyParams) -> Self {
        MinStoreyEstimator { params }
    }
}

/// The infimum over `τ ∈ [0, 1-ε]` of `max{1, #{P > τ}} / (K (1 - τ))`.
///
/// Between consecutive order statistics the count is constant and
/// `1/(1-τ)` increases, so the infimum is attained on the grid
/// `{0} ∪ {P_(i) ≤ 1-ε} ∪ {1-ε}`.
pub fn min_storey_infimum(p: &[f64], eps: f64) -> f64 {
    let k = p.len();
    let mut sorted = p.to_vec();
    sorted.sort_by(f64::total_cmp);
    let upper = 1.0 - eps;
    let objective = |tau: f64| {
        let at_or_below = sorted.partition_point(|&x| x <= tau);
        let count = (k - at_or_below).max(1);
        count as f64 / (k as f64 * (1.0 - tau))
    };
    std::iter::once(0.0)
        .chain(sorted.iter().copied().filter(|&x| x <= upper))
        .chain(std::iter::once(upper))
        .map(objective)
        .fold(f64::INFINITY, f64::min)
}

impl NullPropEstimator for MinStoreyEstimator {
    fn pi0(&self, p: &[f64]) -> Result<f64> {
        let MinStoreyParams { eps, pi_lower, c } = self.params;
        Ok(pi_lower.max(c * min_storey_infimum(p, eps)))
    }

    fn is_monotone(&self) -> bool {
        true
    }
}

/// Convex combination `λ pi0_A + (1-λ) pi0_B`.
#[derive(Clone)]
pub struct Combination {
    a: Arc<dyn NullPropEstimator>,
    b: Arc<dyn NullPropEstimator>,
    lambda: f64,
}

impl NullPropEstimator for Combination {
    fn pi0(&self, p: &[f64]) -> Result<f64> {
        Ok(self.lambda * self.a.pi0(p)? + (1.0 - self.lambda) * self.b.pi0(p)?)
    }

    fn is_monotone(&self) -> bool {
        self.a.is_monotone() && self.b.is_monotone()
    }
}

/// A user-supplied estimator with a self-declared monotonicity flag.
pub struct FnEstimator<F> {
    f: F,
    monotone: bool,
}

impl<F> FnEstimator<F>
where
    F: Fn(&[f64]) -> f64 + Send + Sync,
{
    pub fn new(f: F, monotone: bool) -> Self {
        FnEstimator { f, monotone }
    }
}

impl<F> NullPropEstimator for FnEstimator<F>
where
    F: Fn(&[f64]) -> f64 + Send + Sync,
{
    fn pi0(&self, p: &[f64]) -> Result<f64> {
        Ok((self.f)(p))
    }

    fn is_monotone(&self) -> bool {
        self.monotone
    }
}

// ---------------------------------------------------------------------------
// Generic constructions
// ---------------------------------------------------------------------------

/// Flat e-values `1 / pi0_hat(P)`, the ep-BH form of adaptive BH.
pub fn flat(estimator: &dyn NullPropEstimator, p: &PValues) -> Result<EValues> {
    let e = invert(estimator.pi0(p)?)?;
    EValues::constant(p.len(), e)
}

/// Leave-one-out lift: `E_k = 1 / pi0_hat(P_{k -> 0})`.
pub fn loo_lift(estimator: &dyn NullPropEstimator, p: &PValues) -> Result<EValues> {
    if !estimator.is_monotone() {
        return Err(Error::NonMonotone);
    }
    let mut work = p.to_vec();
    let mut out = Vec::with_capacity(p.len());
    for k in 0..p.len() {
        let saved = work[k];
        work[k] = 0.0;
        out.push(invert(estimator.pi0(&work)?)?);
        work[k] = saved;
    }
    EValues::new(out)
}

/// BH at level `alpha / pi0_hat(P)`.
///
/// Levels at or above 1 are clamped to `1 - 1e-12` with a warning.
pub fn adaptive_bh(p: &PValues, estimator: &dyn NullPropEstimator, alpha: f64) -> Result<Rejections> {
    check_open_unit("alpha", alpha)?;
    let pi0 = estimator.pi0(p)?;
    invert(pi0)?;
    let mut level = alpha / pi0;
    if level >= 1.0 {
        warn!("adaptive BH level alpha/pi0 = {level} >= 1; clamping to 1 - 1e-12");
        level = 1.0 - 1e-12;
    }
    Ok(step_up(p, level))
}

/// `λ pi0_A + (1-λ) pi0_B` as a new estimator.
pub fn combine_pi0(
    a: Arc<dyn NullPropEstimator>,
    b: Arc<dyn NullPropEstimator>,
    lambda: f64,
) -> Result<Combination> {
    check_open_unit("lambda", lambda)?;
    Ok(Combination { a, b, lambda })
}

/// Arithmetic average `λ E_A + (1-λ) E_B` of two compound e-value vectors.
pub fn combine_evalues(a: &EValues, b: &EValues, lambda: f64) -> Result<EValues> {
    check_open_unit("lambda", lambda)?;
    if a.len() != b.len() {
        return Err(Error::Dimension {
            expected: a.len(),
            got: b.len(),
        });
    }
    EValues::new(
        a.iter()
            .zip(b.iter())
            .map(|(&x, &y)| lambda * x + (1.0 - lambda) * y)
            .collect(),
    )
}

// ---------------------------------------------------------------------------
// Closed-form constructors
// ---------------------------------------------------------------------------

/// Storey: `E_k = K(1-τ) / (c + Σ_l 1{P_l > τ})`, identical across `k`.
pub fn storey(p: &PValues, tau: f64, c: f64) -> Result<EValues> {
    flat(&StoreyEstimator::new(tau, c)?, p)
}

/// Approximation slack `ε = 2(1-c) / (c (K0+1) (1-τ))` of Storey with `c < 1`,
/// where `K0` is the number of true nulls.
pub fn storey_epsilon(c: f64, tau: f64, k0: usize) -> Result<f64> {
    let est = StoreyEstimator::new(tau, c)?;
    Ok(2.0 * (1.0 - est.c) / (est.c * (k0 as f64 + 1.0) * (1.0 - est.tau)))
}

/// Storey+: `E_k = K(1-τ) / (1 + Σ_{l≠k} 1{P_l > τ})`.
pub fn storey_plus(p: &PValues, tau: f64) -> Result<EValues> {
    let est = StoreyEstimator::new(tau, 1.0)?;
    let total = exceedances(p, tau);
    let out = p
        .iter()
        .map(|&x| {
            let own = usize::from(x > tau);
            invert(est.from_count(total - own, p.len()))
        })
        .collect::<Result<Vec<_>>>()?;
    EValues::new(out)
}

/// MPC: `E_k = K / (2 + 2 Σ P_l)`.
pub fn mpc(p: &PValues) -> Result<EValues> {
    flat(&MpcEstimator, p)
}

/// DM: `E_k = K / (max_l 1/ν_l + Σ_l ψ_l(P_l)/ν_l)`.
pub fn dm(p: &PValues, shapes: &[Shape]) -> Result<EValues> {
    flat(&DmEstimator::new(shapes.to_vec()), p)
}

/// DM+: `E_k = K / (1/ν_k + Σ_{l≠k} ψ_l(P_l)/ν_l)`.
pub fn dm_plus(p: &PValues, shapes: &[Shape]) -> Result<EValues> {
    check_shapes(p, shapes)?;
    let k = p.len() as f64;
    let terms: Vec<f64> = p
        .iter()
        .zip(shapes)
        .map(|(&x, s)| s.eval(x) / s.nu())
        .collect();
    let out = leave_one_out_sums(&terms)
        .into_iter()
        .zip(shapes)
        .map(|(rest, s)| invert((1.0 / s.nu() + rest) / k))
        .collect::<Result<Vec<_>>>()?;
    EValues::new(out)
}

/// Quant: `E_k = K(1 - P_(L)) / (K - L + 1)`.
pub fn quant(p: &PValues, l: usize) -> Result<EValues> {
    let est = QuantEstimator::new(l)?;
    let pi0 = est.pi0(p)?;
    EValues::constant(p.len(), invert(pi0)?)
}

/// IBHlog: `E_k = K / (2 - Σ log(1 - P_l))`; zero when some `P_l = 1`.
pub fn ibhlog(p: &PValues) -> Result<EValues> {
    flat(&IbhLogEstimator, p)
}

/// Min-Storey with an explicitly supplied constant `C`.
pub fn min_storey(p: &PValues, params: MinStoreyParams) -> Result<EValues> {
    flat(&MinStoreyEstimator::new(params), p)
}

/// MABH: `E_k = K/(K-1) 1{R_{BH,α}(P) > 0}`, valid for `α <= (K-1)/K`.
pub fn mabh(p: &PValues, alpha: f64) -> Result<EValues> {
    check_open_unit("alpha", alpha)?;
    let k = p.len();
    if k < 2 {
        return Err(Error::validation("MABH requires at least two hypotheses"));
    }
    let kf = k as f64;
    if alpha > (kf - 1.0) / kf {
        return Err(Error::validation(format!(
            "MABH requires alpha <= (K-1)/K = {}",
            (kf - 1.0) / kf
        )));
    }
    let e = if bh_count(p, alpha) > 0 { kf / (kf - 1.0) } else { 0.0 };
    EValues::constant(k, e)
}

/// Two-stage step-up: `E_k = (1/(1+α)) K / (K - R_{BH,α'}(P_{k -> 1}))`
/// with `α' = α/(1+α)`. With `plus`, every entry is scaled by `(K+α)/K`.
pub fn tst(p: &PValues, alpha: f64, plus: bool) -> Result<EValues> {
    check_open_unit("alpha", alpha)?;
    let k = p.len();
    let kf = k as f64;
    let alpha1 = alpha / (1.0 + alpha);
    let first = step_up(p, alpha1);
    let scale = if plus { (kf + alpha) / kf } else { 1.0 };
    let mut work = p.to_vec();
    let mut out = Vec::with_capacity(k);
    for i in 0..k {
        // Raising a p-value BH did not reject leaves the rejection count unchanged.
        let r = if first.contains(i) {
            let saved = work[i];
            work[i] = 1.0;
            let r = bh_count(&work, alpha1);
            work[i] = saved;
            r
        } else {
            first.len()
        };
        let e = (1.0 / (1.0 + alpha)) * kf / (kf - r as f64);
        out.push(e * scale);
    }
    EValues::new(out)
}
