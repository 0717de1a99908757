//! Step-up rejection engines.
//!
//! All engines reduce to one routine: sort `Q_k = P_k / E_k`, find the
//! largest `k` with `K * Q_(k) / k <= alpha`, and reject every index whose
//! `Q` does not exceed `Q_(k*)`. The comparison is an exact `<=` on `f64`
//! evaluated as `(K * Q) / k`, with no tolerance.

use std::ops::Deref;

use crate::error::{check_open_unit, Error, Result};
use crate::weighted::Weights;

/// Observed p-values, each in `[0, 1]`, at least one entry.
#[derive(Debug, Clone, PartialEq)]
pub struct PValues(Vec<f64>);

impl PValues {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::validation("at least one p-value is required"));
        }
        for (i, &p) in values.iter().enumerate() {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::domain(format!(
                    "p-value at index {i} is {p}, outside [0, 1]"
                )));
            }
        }
        Ok(PValues(values))
    }

    /// Copy of `self` with entry `k` replaced by `value` (the `P_{k -> c}` vector).
    pub fn with_replaced(&self, k: usize, value: f64) -> Vec<f64> {
        let mut v = self.0.clone();
        v[k] = value;
        v
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for PValues {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// A vector in `[0, ∞]^K` used as compound e-values.
#[derive(Debug, Clone, PartialEq)]
pub struct EValues(Vec<f64>);

impl EValues {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::validation("at least one e-value is required"));
        }
        for (i, &e) in values.iter().enumerate() {
            if e.is_nan() || e < 0.0 {
                return Err(Error::domain(format!(
                    "e-value at index {i} is {e}, outside [0, ∞]"
                )));
            }
        }
        Ok(EValues(values))
    }

    /// All entries equal to `value`.
    pub fn constant(k: usize, value: f64) -> Result<Self> {
        EValues::new(vec![value; k])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    /// Sum of the entries over `indices`.
    pub fn sum_over(&self, indices: impl IntoIterator<Item = usize>) -> f64 {
        indices.into_iter().map(|i| self.0[i]).sum()
    }
}

impl Deref for EValues {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// Rejected indices (0-based, ascending) and the crossing index `k*`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Rejections {
    pub rejected: Vec<usize>,
    pub k_star: usize,
}

impl Rejections {
    pub fn len(&self) -> usize {
        self.rejected.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rejected.is_empty()
    }

    pub fn contains(&self, k: usize) -> bool {
        self.rejected.binary_search(&k).is_ok()
    }

    pub fn is_subset_of(&self, other: &Rejections) -> bool {
        self.rejected.iter().all(|&k| other.contains(k))
    }

    /// Indicator vector of length `k`.
    pub fn mask(&self, k: usize) -> Vec<bool> {
        let mut m = vec![false; k];
        for &i in &self.rejected {
            m[i] = true;
        }
        m
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    check_open_unit("alpha", alpha)
}

fn check_lengths(p: &[f64], e: &[f64]) -> Result<()> {
    if p.len() != e.len() {
        return Err(Error::Dimension {
            expected: p.len(),
            got: e.len(),
        });
    }
    Ok(())
}

/// `p / e` with `0/0 = 0`, `p/0 = ∞` for `p > 0`, `p/∞ = 0`.
pub fn quotient(p: f64, e: f64) -> f64 {
    if e == 0.0 {
        if p == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else if e.is_infinite() {
        0.0
    } else {
        p / e
    }
}

/// The weighted p-values `Q_k = P_k / E_k`.
pub fn q_values(p: &PValues, e: &EValues) -> Result<Vec<f64>> {
    check_lengths(p, e)?;
    Ok(p.iter().zip(e.iter()).map(|(&p, &e)| quotient(p, e)).collect())
}

/// BH step-up on already-weighted values.
pub(crate) fn step_up(q: &[f64], alpha: f64) -> Rejections {
    let k = q.len();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| q[a].total_cmp(&q[b]));
    let kf = k as f64;
    let k_star = (1..=k)
        .rev()
        .find(|&r| kf * q[order[r - 1]] / r as f64 <= alpha)
        .unwrap_or(0);
    if k_star == 0 {
        return Rejections::default();
    }
    // K Q / k is decreasing in k for a fixed Q, so exact ties at Q_(k*) are
    // already inside the first k* order statistics; collecting by threshold
    // keeps |rejected| == k* while staying independent of the sort order.
    let threshold = q[order[k_star - 1]];
    let rejected: Vec<usize> = (0..k).filter(|&i| q[i] <= threshold).collect();
    Rejections {
        k_star: rejected.len(),
        rejected,
    }
}

/// Number of rejections of p-BH at level `alpha`, `R_{BH,alpha}(P)`.
///
/// Takes a raw slice so callers can pass modified copies such as `P_{k -> 1}`.
pub fn bh_count(p: &[f64], alpha: f64) -> usize {
    let mut sorted = p.to_vec();
    sorted.sort_by(f64::total_cmp);
    let kf = sorted.len() as f64;
    (1..=sorted.len())
        .rev()
        .find(|&r| kf * sorted[r - 1] / r as f64 <= alpha)
        .unwrap_or(0)
}

/// The ep-BH procedure at level `alpha`.
pub fn ep_bh(p: &PValues, e: &EValues, alpha: f64) -> Result<Rejections> {
    check_alpha(alpha)?;
    let q = q_values(p, e)?;
    Ok(step_up(&q, alpha))
}

/// Benjamini–Hochberg at level `alpha`.
pub fn p_bh(p: &PValues, alpha: f64) -> Result<Rejections> {
    check_alpha(alpha)?;
    Ok(step_up(p, alpha))
}

/// Weighted BH: ep-BH with the deterministic weights as e-values.
pub fn weighted_p_bh(p: &PValues, w: &Weights, alpha: f64) -> Result<Rejections> {
    check_lengths(p, w)?;
    let e = EValues::new(w.to_vec())?;
    ep_bh(p, &e, alpha)
}

/// `E_k * 1{P_k <= tau}` with `∞ * 0 = 0`.
pub fn censor_evalues(p: &PValues, e: &EValues, tau: f64) -> Result<EValues> {
    check_open_unit("tau", tau)?;
    check_lengths(p, e)?;
    Ok(EValues(
        p.iter()
            .zip(e.iter())
            .map(|(&p, &e)| if p <= tau { e } else { 0.0 })
            .collect(),
    ))
}

/// τ-censored ep-BH: no hypothesis with `P_k > tau` can be rejected.
///
/// Implemented as ep-BH on the censored e-values, which is equivalent to the
/// self-consistency definition `P_k <= min(tau, E_k alpha k*/K)`.
pub fn tau_censored_ep_bh(p: &PValues, e: &EValues, alpha: f64, tau: f64) -> Result<Rejections> {
    let masked = censor_evalues(p, e, tau)?;
    ep_bh(p, &masked, alpha)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn pv(v: &[f64]) -> PValues {
        PValues::new(v.to_vec()).unwrap()
    }

    fn ev(v: &[f64]) -> EValues {
        EValues::new(v.to_vec()).unwrap()
    }

    /// Largest self-consistent set by enumeration of all subsets.
    fn brute_force_k_star(q: &[f64], alpha: f64) -> usize {
        let k = q.len();
        let mut best = 0;
        for mask in 0u32..(1 << k) {
            let size = mask.count_ones() as usize;
            if size == 0 {
                continue;
            }
            let ok = (0..k)
                .filter(|i| mask & (1 << i) != 0)
                .all(|i| k as f64 * q[i] / size as f64 <= alpha);
            if ok {
                best = best.max(size);
            }
        }
        best
    }

    /// Literal τ-censored definition: fixed point of the counting rule.
    fn censored_literal(p: &[f64], e: &[f64], alpha: f64, tau: f64) -> Vec<usize> {
        let k = p.len();
        let kf = k as f64;
        let admits = |j: usize, r: usize| p[j] <= tau.min(e[j] * alpha * r as f64 / kf);
        let k_star = (1..=k)
            .rev()
            .find(|&r| (0..k).filter(|&j| admits(j, r)).count() >= r)
            .unwrap_or(0);
        if k_star == 0 {
            return vec![];
        }
        (0..k).filter(|&j| admits(j, k_star)).collect()
    }

    fn random_instance(rng: &mut ChaCha8Rng, k: usize) -> (Vec<f64>, Vec<f64>) {
        let p: Vec<f64> = (0..k)
            .map(|_| {
                let u: f64 = rng.random();
                if rng.random_bool(0.3) {
                    u.powi(4)
                } else {
                    u
                }
            })
            .collect();
        let e: Vec<f64> = (0..k).map(|_| rng.random::<f64>() * 3.0).collect();
        (p, e)
    }

    #[test]
    fn q_transform_examples() {
        assert_eq!(q_values(&pv(&[0.2, 0.4]), &ev(&[2.0, 0.5])).unwrap(), vec![0.1, 0.8]);
        assert_eq!(
            q_values(&pv(&[0.0, 0.3]), &ev(&[0.0, 0.0])).unwrap(),
            vec![0.0, f64::INFINITY]
        );
        assert_eq!(q_values(&pv(&[0.5]), &ev(&[f64::INFINITY])).unwrap(), vec![0.0]);
    }

    #[test]
    fn q_transform_errors() {
        assert!(matches!(
            q_values(&pv(&[0.1, 0.2]), &ev(&[1.0])),
            Err(Error::Dimension { .. })
        ));
        assert!(matches!(EValues::new(vec![-1.0]), Err(Error::Domain(_))));
        assert!(matches!(PValues::new(vec![1.5]), Err(Error::Domain(_))));
        assert!(matches!(PValues::new(vec![]), Err(Error::Validation(_))));
    }

    #[test]
    fn ep_bh_examples() {
        let r = ep_bh(&pv(&[0.1, 0.2, 0.6, 0.9]), &ev(&[1.0; 4]), 0.5).unwrap();
        assert_eq!(r.k_star, 2);
        assert_eq!(r.rejected, vec![0, 1]);

        let r = ep_bh(&pv(&[1.0; 4]), &ev(&[1.0; 4]), 0.5).unwrap();
        assert_eq!(r.k_star, 0);
        assert!(r.is_empty());

        let r = ep_bh(&pv(&[0.3, 0.6]), &ev(&[2.0, 0.5]), 0.4).unwrap();
        assert_eq!(r.rejected, vec![0]);
        assert_eq!(r.k_star, 1);
    }

    #[test]
    fn p_bh_examples() {
        assert_eq!(p_bh(&pv(&[0.01, 0.9]), 0.1).unwrap().rejected, vec![0]);
        assert!(p_bh(&pv(&[1.0; 7]), 0.99).unwrap().is_empty());
        assert!(p_bh(&pv(&[0.01]), 1.0).is_err());
        assert!(p_bh(&pv(&[0.01]), 0.0).is_err());
    }

    #[test]
    fn p_bh_matches_unit_evalues() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..1000 {
            let k = rng.random_range(1..40);
            let (p, _) = random_instance(&mut rng, k);
            let p = pv(&p);
            let a = p_bh(&p, 0.1).unwrap();
            let b = ep_bh(&p, &EValues::constant(k, 1.0).unwrap(), 0.1).unwrap();
            assert_eq!(a, b);
            assert_eq!(a.len(), bh_count(&p, 0.1));
        }
    }

    #[test]
    fn weighted_bh_examples() {
        let p = pv(&[0.3, 0.6]);
        let w = Weights::new(vec![1.6, 0.4]).unwrap();
        assert_eq!(weighted_p_bh(&p, &w, 0.4).unwrap().rejected, vec![0]);

        let p = pv(&[0.01, 0.2, 0.6, 0.9]);
        assert_eq!(
            weighted_p_bh(&p, &Weights::uniform(4), 0.3).unwrap(),
            p_bh(&p, 0.3).unwrap()
        );

        // zero weight: Q = ∞ for p > 0, never rejected
        let p = pv(&[0.001, 0.001]);
        let w = Weights::new(vec![2.0, 0.0]).unwrap();
        assert_eq!(weighted_p_bh(&p, &w, 0.5).unwrap().rejected, vec![0]);
    }

    #[test]
    fn censored_examples() {
        let p = pv(&[0.3, 0.6]);
        let e = ev(&[2.0, 0.5]);
        assert!(tau_censored_ep_bh(&p, &e, 0.4, 0.25).unwrap().is_empty());
        assert_eq!(tau_censored_ep_bh(&p, &e, 0.4, 0.99).unwrap().rejected, vec![0]);
        assert!(tau_censored_ep_bh(&p, &e, 0.4, 1.0).is_err());
    }

    #[test]
    fn censored_matches_literal_definition() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..1000 {
            let k = rng.random_range(1..25);
            let (p, e) = random_instance(&mut rng, k);
            let tau = rng.random_range(0.05..0.95);
            let alpha = rng.random_range(0.05..0.6);
            let r = tau_censored_ep_bh(&pv(&p), &ev(&e), alpha, tau).unwrap();
            assert_eq!(r.rejected, censored_literal(&p, &e, alpha, tau));
            assert!(r.rejected.iter().all(|&i| p[i] <= tau));
        }
    }

    #[test]
    fn brute_force_self_consistency() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..2000 {
            let k = rng.random_range(1..=5);
            let (p, e) = random_instance(&mut rng, k);
            let alpha = rng.random_range(0.05..0.9);
            let r = ep_bh(&pv(&p), &ev(&e), alpha).unwrap();
            let q = q_values(&pv(&p), &ev(&e)).unwrap();
            assert_eq!(r.k_star, brute_force_k_star(&q, alpha));
        }
    }

    #[test]
    fn single_hypothesis() {
        assert_eq!(ep_bh(&pv(&[0.04]), &ev(&[1.0]), 0.05).unwrap().rejected, vec![0]);
        assert!(ep_bh(&pv(&[0.06]), &ev(&[1.0]), 0.05).unwrap().is_empty());
    }

    fn instance() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
        (1usize..20).prop_flat_map(|k| {
            (
                prop::collection::vec(0.0f64..=1.0, k),
                prop::collection::vec(0.0f64..4.0, k),
            )
        })
    }

    proptest! {
        #[test]
        fn permutation_invariance((p, e) in instance(), shift in 0usize..20, alpha in 0.01f64..0.9) {
            let k = p.len();
            let perm: Vec<usize> = (0..k).map(|i| (i + shift) % k).collect();
            let p2: Vec<f64> = perm.iter().map(|&i| p[i]).collect();
            let e2: Vec<f64> = perm.iter().map(|&i| e[i]).collect();
            let r1 = ep_bh(&pv(&p), &ev(&e), alpha).unwrap();
            let r2 = ep_bh(&pv(&p2), &ev(&e2), alpha).unwrap();
            let mut mapped: Vec<usize> = r2.rejected.iter().map(|&j| perm[j]).collect();
            mapped.sort_unstable();
            prop_assert_eq!(r1.rejected, mapped);
        }

        #[test]
        fn monotone_in_e_and_p((p, e) in instance(), bump in 0.0f64..2.0, idx in 0usize..20, alpha in 0.01f64..0.9) {
            let k = p.len();
            let i = idx % k;
            let base = ep_bh(&pv(&p), &ev(&e), alpha).unwrap();
            let mut e_up = e.clone();
            e_up[i] += bump;
            prop_assert!(base.is_subset_of(&ep_bh(&pv(&p), &ev(&e_up), alpha).unwrap()));
            let mut p_down = p.clone();
            p_down[i] *= 0.5;
            prop_assert!(base.is_subset_of(&ep_bh(&pv(&p_down), &ev(&e), alpha).unwrap()));
        }

        #[test]
        fn threshold_characterization((p, e) in instance(), alpha in 0.01f64..0.9) {
            let k = p.len();
            let r = ep_bh(&pv(&p), &ev(&e), alpha).unwrap();
            let q = q_values(&pv(&p), &ev(&e)).unwrap();
            prop_assert_eq!(r.k_star, r.len());
            if r.k_star > 0 {
                let t = q.iter().enumerate().filter(|(i, _)| r.contains(*i)).map(|(_, &v)| v).fold(0.0, f64::max);
                for i in 0..k {
                    prop_assert_eq!(r.contains(i), q[i] <= t);
                }
                prop_assert!(k as f64 * t / r.k_star as f64 <= alpha);
            }
        }

        #[test]
        fn censored_never_rejects_above_tau((p, e) in instance(), tau in 0.01f64..0.99, alpha in 0.01f64..0.9) {
            let r = tau_censored_ep_bh(&pv(&p), &ev(&e), alpha, tau).unwrap();
            prop_assert!(r.rejected.iter().all(|&i| p[i] <= tau));
        }
    }
}
