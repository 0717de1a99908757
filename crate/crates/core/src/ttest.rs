//! Simultaneous one-sample t-tests and the LOO-Var+ compound e-values.
//!
//! Each hypothesis `k` has `n` Gaussian replicates `Y_k1..Y_kn` and tests
//! `μ_k = 0`. Besides the usual t-test p-value, the mean of squares
//! `S_k² = (1/n) Σ_j Y_kj²` is independent of the p-value under the null and
//! carries information about `μ_k`; it drives both the normalized weights
//! and LOO-Var+.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use rand::Rng;
use rand_distr::{Beta, Distribution};

use crate::engine::{EValues, PValues};
use crate::error::{Error, Result};
use crate::estimators::leave_one_out_sums;
use crate::quadrature::GaussJacobi;
use crate::rng::{stream_rng, Domain};
use crate::shape::Psi;
use crate::special::t_sf;
use crate::weighted::Weights;

/// Default number of Gauss–Jacobi nodes for derandomized LOO-Var+.
pub const DEFAULT_NODES: usize = 64;
/// Smallest accepted node count.
pub const MIN_NODES: usize = 8;

/// A `K × n` matrix of replicates, `n >= 2`.
#[derive(Debug, Clone, PartialEq)]
pub struct TTestDataset {
    values: Vec<f64>,
    k: usize,
    n: usize,
}

impl TTestDataset {
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let k = rows.len();
        if k == 0 {
            return Err(Error::validation("replicate matrix has no rows"));
        }
        let n = rows[0].len();
        let mut values = Vec::with_capacity(k * n);
        for (i, row) in rows.into_iter().enumerate() {
            if row.len() != n {
                return Err(Error::validation(format!(
                    "row {} has {} replicates, expected {n}",
                    i + 1,
                    row.len()
                )));
            }
            values.extend(row);
        }
        TTestDataset::from_flat(k, n, values)
    }

    /// Row-major construction.
    pub fn from_flat(k: usize, n: usize, values: Vec<f64>) -> Result<Self> {
        if n < 2 {
            return Err(Error::validation(format!(
                "t-tests need at least 2 replicates per row, got {n}"
            )));
        }
        if k == 0 || values.len() != k * n {
            return Err(Error::Dimension {
                expected: k * n,
                got: values.len(),
            });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::validation(format!(
                "non-finite replicate in row {}",
                i / n + 1
            )));
        }
        Ok(TTestDataset { values, k, n })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.n..(i + 1) * self.n]
    }
}

/// Per-row t-test summaries.
#[derive(Debug, Clone, PartialEq)]
pub struct TTestSummary {
    pub n: usize,
    pub mu_hat: Vec<f64>,
    /// Unbiased sample variance (divisor `n - 1`).
    pub sigma2_hat: Vec<f64>,
    pub t: Vec<f64>,
    pub p: PValues,
    /// Mean of squares.
    pub s2: Vec<f64>,
}

impl TTestSummary {
    pub fn k(&self) -> usize {
        self.mu_hat.len()
    }
}

/// Two-sided t-test p-value `2 (1 - F_{t,n-1}(|T|))`, clamped to `[0, 1]`.
pub fn two_sided_p(t: f64, df: usize) -> Result<f64> {
    Ok((2.0 * t_sf(t.abs(), df)?).clamp(0.0, 1.0))
}

/// Sample mean, sample variance, t statistic, p-value and mean of squares
/// for every row.
///
/// Rows with zero sample variance get `T = ±∞` and `P = 0` when the mean is
/// nonzero, and `T = 0`, `P = 1` when the row is identically zero.
pub fn summarize(data: &TTestDataset) -> Result<TTestSummary> {
    let n = data.n();
    let nf = n as f64;
    let k = data.k();
    let mut mu_hat = Vec::with_capacity(k);
    let mut sigma2_hat = Vec::with_capacity(k);
    let mut t = Vec::with_capacity(k);
    let mut p = Vec::with_capacity(k);
    let mut s2 = Vec::with_capacity(k);
    for i in 0..k {
        let row = data.row(i);
        let mean = row.iter().sum::<f64>() / nf;
        let ss: f64 = row.iter().map(|y| (y - mean).powi(2)).sum();
        let var = ss / (nf - 1.0);
        let stat = if var > 0.0 {
            nf.sqrt() * mean / var.sqrt()
        } else if mean > 0.0 {
            f64::INFINITY
        } else if mean < 0.0 {
            f64::NEG_INFINITY
        } else {
            0.0
        };
        mu_hat.push(mean);
        sigma2_hat.push(var);
        t.push(stat);
        p.push(two_sided_p(stat, n - 1)?);
        s2.push(row.iter().map(|y| y * y).sum::<f64>() / nf);
    }
    Ok(TTestSummary {
        n,
        mu_hat,
        sigma2_hat,
        t,
        p: PValues::new(p)?,
        s2,
    })
}

/// `w_k = K ψ(S_k²) / Σ_l ψ(S_l²)`, or all ones when the denominator is zero.
pub fn normalized_weights(s2: &[f64], psi: &Psi) -> Result<Weights> {
    let k = s2.len();
    let values: Vec<f64> = s2.iter().map(|&s| psi.eval(s)).collect();
    if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
        return Err(Error::Numerical(format!(
            "shape function {} returned {v}",
            psi.label()
        )));
    }
    let total: f64 = values.iter().sum();
    if total == 0.0 {
        return Ok(Weights::uniform(k));
    }
    if !total.is_finite() {
        return Err(Error::Numerical("sum of shape values overflowed".into()));
    }
    Weights::new(values.iter().map(|v| k as f64 * v / total).collect())
}

/// One draw of `B = (n/(n-1)) Beta((n-1)/2, 1/2)`, which under the null has
/// the law of `σ̂²/S²` and is independent of `S²`.
pub fn beta_scaled_sample<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<f64> {
    let dist = beta_law(n)?;
    Ok(scale(n) * dist.sample(rng))
}

fn beta_law(n: usize) -> Result<Beta<f64>> {
    if n < 2 {
        return Err(Error::validation(format!("B requires n >= 2, got {n}")));
    }
    Beta::new((n as f64 - 1.0) / 2.0, 0.5)
        .map_err(|e| Error::Numerical(format!("beta distribution: {e}")))
}

fn scale(n: usize) -> f64 {
    n as f64 / (n as f64 - 1.0)
}

/// Quadrature rule for expectations over `B`: nodes `b_i` and probability
/// weights summing to one.
///
/// The Beta((n-1)/2, 1/2) density `x^{a-1} (1-x)^{-1/2}` becomes the Jacobi
/// weight `(1-t)^{-1/2} (1+t)^{a-1}` under `x = (1+t)/2`, so the singular
/// endpoint is absorbed into the rule.
#[derive(Debug, Clone)]
pub struct BetaScaleRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl BetaScaleRule {
    pub fn new(n: usize, m: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::validation(format!("B requires n >= 2, got {n}")));
        }
        if m < MIN_NODES {
            return Err(Error::domain(format!(
                "derandomized LOO-Var+ needs at least {MIN_NODES} nodes, got {m}"
            )));
        }
        let a = (n as f64 - 1.0) / 2.0;
        let rule = GaussJacobi::new(m, -0.5, a - 1.0)?;
        let total: f64 = rule.weights().iter().sum();
        let c = scale(n);
        Ok(BetaScaleRule {
            nodes: rule.nodes().iter().map(|t| c * (1.0 + t) / 2.0).collect(),
            weights: rule.weights().iter().map(|w| w / total).collect(),
        })
    }

    /// Shared rule for `(n, m)`, built once per process.
    pub fn cached(n: usize, m: usize) -> Result<Arc<Self>> {
        static CACHE: OnceLock<Mutex<HashMap<(usize, usize), Arc<BetaScaleRule>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        if let Some(rule) = cache.lock().unwrap_or_else(|e| e.into_inner()).get(&(n, m)) {
            return Ok(Arc::clone(rule));
        }
        let rule = Arc::new(BetaScaleRule::new(n, m)?);
        cache
            .lock()
            .unwrap_or_else(|e| e.into_inner())
            .insert((n, m), Arc::clone(&rule));
        Ok(rule)
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn expect<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&b, &w)| w * f(b))
            .sum()
    }
}

/// How the auxiliary scale `B_k` of LOO-Var+ is handled.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LooVarMode {
    /// One draw of `B_k` per hypothesis from the stream
    /// `(seed, replication, k)`.
    Randomized { seed: u64, replication: u64 },
    /// Integrate over `B_k` with an `nodes`-point Gauss–Jacobi rule.
    Derandomized { nodes: usize },
}

impl Default for LooVarMode {
    fn default() -> Self {
        LooVarMode::Derandomized {
            nodes: DEFAULT_NODES,
        }
    }
}

fn loo_var_term(k: f64, own: f64, rest: f64) -> f64 {
    let den = own + rest;
    if den == 0.0 {
        0.0
    } else {
        k * own / den
    }
}

fn shape_values(psi: &Psi, xs: &[f64]) -> Result<Vec<f64>> {
    xs.iter()
        .map(|&x| {
            let v = psi.eval(x);
            if v.is_finite() && v >= 0.0 {
                Ok(v)
            } else {
                Err(Error::Numerical(format!(
                    "shape function {} returned {v} at {x}",
                    psi.label()
                )))
            }
        })
        .collect()
}

/// LOO-Var+ with explicitly supplied scale draws `b`:
/// `E_k = K ψ(b_k S_k²) / (ψ(b_k S_k²) + Σ_{l≠k} ψ(σ̂_l²))`, with `0/0 = 0`.
pub fn loo_var_plus_with_draws(summary: &TTestSummary, psi: &Psi, b: &[f64]) -> Result<EValues> {
    let k = summary.k();
    if b.len() != k {
        return Err(Error::Dimension { expected: k, got: b.len() });
    }
    let kf = k as f64;
    let rest = leave_one_out_sums(&shape_values(psi, &summary.sigma2_hat)?);
    let mut out = Vec::with_capacity(k);
    for i in 0..k {
        let own = psi.eval(b[i] * summary.s2[i]);
        out.push(loo_var_term(kf, own, rest[i]));
    }
    EValues::new(out)
}

/// LOO-Var+ compound e-values, randomized or derandomized.
pub fn loo_var_plus(summary: &TTestSummary, psi: &Psi, mode: LooVarMode) -> Result<EValues> {
    let k = summary.k();
    match mode {
        LooVarMode::Randomized { seed, replication } => {
            let dist = beta_law(summary.n)?;
            let c = scale(summary.n);
            let draws: Vec<f64> = (0..k)
                .map(|i| {
                    let mut rng = stream_rng(seed, Domain::BetaScale, replication, i as u64);
                    c * dist.sample(&mut rng)
                })
                .collect();
            loo_var_plus_with_draws(summary, psi, &draws)
        }
        LooVarMode::Derandomized { nodes } => {
            let rule = BetaScaleRule::cached(summary.n, nodes)?;
            loo_var_plus_with_rule(summary, psi, &rule)
        }
    }
}

/// Derandomized LOO-Var+ with a prebuilt quadrature rule.
pub fn loo_var_plus_with_rule(summary: &TTestSummary, psi: &Psi, rule: &BetaScaleRule) -> Result<EValues> {
    let k = summary.k();
    let kf = k as f64;
    let rest = leave_one_out_sums(&shape_values(psi, &summary.sigma2_hat)?);
    let out = (0..k)
        .map(|i| rule.expect(|b| loo_var_term(kf, psi.eval(b * summary.s2[i]), rest[i])))
        .collect();
    EValues::new(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn null_rows(rng: &mut ChaCha8Rng, k: usize, n: usize) -> TTestDataset {
        let values = (0..k * n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        TTestDataset::from_flat(k, n, values).unwrap()
    }

    fn mean_se(xs: &[f64]) -> (f64, f64) {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        (mean, (var / n).sqrt())
    }

    #[test]
    fn summarize_examples() {
        let data = TTestDataset::from_rows(vec![vec![1.0, -1.0], vec![2.0, 2.0], vec![0.0, 0.0], vec![-3.0, -3.0]]).unwrap();
        let s = summarize(&data).unwrap();
        assert_eq!(s.mu_hat[0], 0.0);
        assert_eq!(s.t[0], 0.0);
        assert_eq!(s.p[0], 1.0);
        assert_eq!(s.s2[0], 1.0);
        assert_eq!(s.sigma2_hat[0], 2.0);
        assert_eq!((s.t[1], s.p[1]), (f64::INFINITY, 0.0));
        assert_eq!((s.t[2], s.p[2]), (0.0, 1.0));
        assert_eq!((s.t[3], s.p[3]), (f64::NEG_INFINITY, 0.0));

        // a row whose t statistic is 2.776 with n = 5
        let d = [-2.0, -1.0, 0.0, 1.0, 2.0];
        let sd = (10.0f64 / 4.0).sqrt();
        let mu = 2.776 * sd / 5f64.sqrt();
        let row: Vec<f64> = d.iter().map(|x| x + mu).collect();
        let s = summarize(&TTestDataset::from_rows(vec![row]).unwrap()).unwrap();
        assert_relative_eq!(s.t[0], 2.776, max_relative = 1e-12);
        assert!((s.p[0] - 0.05).abs() < 5e-4);
    }

    #[test]
    fn dataset_validation() {
        assert!(TTestDataset::from_rows(vec![vec![1.0]]).is_err());
        assert!(TTestDataset::from_rows(vec![vec![1.0, 2.0], vec![1.0]]).is_err());
        assert!(TTestDataset::from_rows(vec![]).is_err());
        assert!(TTestDataset::from_rows(vec![vec![1.0, f64::NAN]]).is_err());
    }

    #[test]
    fn sum_of_squares_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for n in [2, 3, 5, 20] {
            let values = (0..50 * n).map(|_| 3.0 * rng.random::<f64>() - 1.0).collect();
            let data = TTestDataset::from_flat(50, n, values).unwrap();
            let s = summarize(&data).unwrap();
            let nf = n as f64;
            for i in 0..50 {
                let lhs = nf * s.s2[i];
                let rhs = (nf - 1.0) * s.sigma2_hat[i] + nf * s.mu_hat[i].powi(2);
                assert_relative_eq!(lhs, rhs, max_relative = 1e-9);
                // σ̂² = n S² / ((n-1) + T²)
                let back = nf * s.s2[i] / ((nf - 1.0) + s.t[i].powi(2));
                assert_relative_eq!(back, s.sigma2_hat[i], max_relative = 1e-9);
            }
        }
    }

    #[test]
    fn normalized_weight_examples() {
        let w = normalized_weights(&[4.0, 1.0, 1.0, 2.0], &Psi::identity()).unwrap();
        assert_eq!(w.as_slice(), &[2.0, 0.5, 0.5, 1.0]);
        let w = normalized_weights(&[4.0, 1.0, 1.0], &Psi::constant(0.0)).unwrap();
        assert_eq!(w.as_slice(), &[1.0; 3]);
        let w = normalized_weights(&[0.5, 1.0, 0.9], &Psi::step(1.0)).unwrap();
        assert_eq!(w.as_slice(), &[1.0; 3]);
    }

    #[test]
    fn loo_var_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let s = summarize(&null_rows(&mut rng, 6, 4)).unwrap();
        let modes = [
            LooVarMode::Randomized { seed: 3, replication: 0 },
            LooVarMode::Derandomized { nodes: 16 },
        ];
        for mode in modes {
            let e = loo_var_plus(&s, &Psi::constant(2.5), mode).unwrap();
            for v in e.iter() {
                assert_relative_eq!(*v, 1.0, max_relative = 1e-14);
            }
        }

        let pinned = TTestSummary {
            n: 3,
            mu_hat: vec![0.0, 0.0],
            sigma2_hat: vec![7.0, 0.5],
            t: vec![0.0, 0.0],
            p: PValues::new(vec![0.5, 0.5]).unwrap(),
            s2: vec![4.0, 1.0],
        };
        let e = loo_var_plus_with_draws(&pinned, &Psi::identity(), &[0.5, 1.0]).unwrap();
        assert_relative_eq!(e[0], 1.6, max_relative = 1e-15);

        // 0/0 = 0
        let zero = loo_var_plus_with_draws(&pinned, &Psi::step(100.0), &[0.5, 1.0]).unwrap();
        assert_eq!(zero.as_slice(), &[0.0, 0.0]);

        assert!(loo_var_plus(&pinned, &Psi::identity(), LooVarMode::Derandomized { nodes: 7 }).is_err());
    }

    #[test]
    fn beta_rule_moments() {
        // E[B] = 1 and E[B^2] = (n/(n-1))^2 a(a+1)/((a+b)(a+b+1)) with a=(n-1)/2, b=1/2.
        for n in [2usize, 3, 5, 20] {
            let rule = BetaScaleRule::new(n, 16).unwrap();
            let c = n as f64 / (n as f64 - 1.0);
            let a = (n as f64 - 1.0) / 2.0;
            let second = c * c * a * (a + 1.0) / ((a + 0.5) * (a + 1.5));
            assert_relative_eq!(rule.weights().iter().sum::<f64>(), 1.0, max_relative = 1e-14);
            assert_relative_eq!(rule.expect(|b| b), 1.0, max_relative = 1e-12);
            assert_relative_eq!(rule.expect(|b| b * b), second, max_relative = 1e-12);
            assert!(rule.nodes().iter().all(|&b| b > 0.0 && b < c));
        }
        assert!(BetaScaleRule::new(1, 16).is_err());
    }

    #[test]
    fn beta_sample_support_and_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for n in [2usize, 5] {
            let c = n as f64 / (n as f64 - 1.0);
            let draws: Vec<f64> = (0..1_000_000).map(|_| beta_scaled_sample(n, &mut rng).unwrap()).collect();
            assert!(draws.iter().all(|&b| b > 0.0 && b < c));
            let (mean, se) = mean_se(&draws);
            assert!((mean - 1.0).abs() <= 3.0 * se, "n={n}: {mean} ± {se}");
        }
        assert!(beta_scaled_sample(1, &mut rng).is_err());
    }

    fn ks_statistic(mut a: Vec<f64>, mut b: Vec<f64>) -> f64 {
        a.sort_by(f64::total_cmp);
        b.sort_by(f64::total_cmp);
        let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
        while i < a.len() && j < b.len() {
            let x = a[i].min(b[j]);
            while i < a.len() && a[i] <= x {
                i += 1;
            }
            while j < b.len() && b[j] <= x {
                j += 1;
            }
            d = d.max((i as f64 / a.len() as f64 - j as f64 / b.len() as f64).abs());
        }
        d
    }

    #[test]
    fn null_variance_has_law_of_b_times_mean_square() {
        let n = 5;
        let rows = 100_000;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let first = summarize(&null_rows(&mut rng, rows, n)).unwrap();
        let second = summarize(&null_rows(&mut rng, rows, n)).unwrap();
        let scaled: Vec<f64> = second
            .s2
            .iter()
            .map(|s| beta_scaled_sample(n, &mut rng).unwrap() * s)
            .collect();
        let d = ks_statistic(first.sigma2_hat.clone(), scaled);
        let critical = 1.628 * (2.0 / rows as f64).sqrt();
        assert!(d < critical, "KS statistic {d} >= {critical}");
    }

    fn ranks(xs: &[f64]) -> Vec<f64> {
        let mut idx: Vec<usize> = (0..xs.len()).collect();
        idx.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
        let mut r = vec![0.0; xs.len()];
        for (rank, &i) in idx.iter().enumerate() {
            r[i] = rank as f64;
        }
        r
    }

    fn correlation(x: &[f64], y: &[f64]) -> f64 {
        let (mx, _) = mean_se(x);
        let (my, _) = mean_se(y);
        let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
        let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
        let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
        sxy / (sxx * syy).sqrt()
    }

    #[test]
    fn mean_square_independent_of_null_p_value() {
        let rows = 100_000;
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let s = summarize(&null_rows(&mut rng, rows, 5)).unwrap();
        let se = 1.0 / (rows as f64).sqrt();
        let r = correlation(&s.s2, &s.p);
        assert!(r.abs() <= 3.0 * se, "Pearson {r}");
        let rho = correlation(&ranks(&s.s2), &ranks(&s.p));
        assert!(rho.abs() * ((rows - 1) as f64).sqrt() < 2.576, "Spearman {rho}");
    }

    #[test]
    fn derandomized_matches_monte_carlo() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 5;
        let s = summarize(&null_rows(&mut rng, 8, n)).unwrap();
        let psi = Psi::power(4.0);
        let derand = loo_var_plus(&s, &psi, LooVarMode::Derandomized { nodes: 64 }).unwrap();
        let draws = 1_000_000;
        let mut sums = vec![Vec::with_capacity(draws); s.k()];
        for _ in 0..draws {
            let b: Vec<f64> = (0..s.k()).map(|_| beta_scaled_sample(n, &mut rng).unwrap()).collect();
            let e = loo_var_plus_with_draws(&s, &psi, &b).unwrap();
            for (acc, v) in sums.iter_mut().zip(e.iter()) {
                acc.push(*v);
            }
        }
        for (i, xs) in sums.iter().enumerate() {
            let (mean, se) = mean_se(xs);
            assert!((mean - derand[i]).abs() <= 3.0 * se, "k={i}: MC {mean} ± {se} vs {}", derand[i]);
        }
    }

    #[test]
    fn node_count_convergence() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for n in [2usize, 5, 20] {
            let s = summarize(&null_rows(&mut rng, 10, n)).unwrap();
            let a = loo_var_plus(&s, &Psi::identity(), LooVarMode::Derandomized { nodes: 8 }).unwrap();
            let b = loo_var_plus(&s, &Psi::identity(), LooVarMode::Derandomized { nodes: 64 }).unwrap();
            for (x, y) in a.iter().zip(b.iter()) {
                assert!((x - y).abs() <= 1e-6, "n={n}: {x} vs {y}");
            }
        }
    }

    #[test]
    fn randomized_mode_is_reproducible() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let s = summarize(&null_rows(&mut rng, 10, 3)).unwrap();
        let mode = LooVarMode::Randomized { seed: 11, replication: 4 };
        let a = loo_var_plus(&s, &Psi::power(4.0), mode).unwrap();
        let b = loo_var_plus(&s, &Psi::power(4.0), mode).unwrap();
        assert_eq!(a, b);
        let c = loo_var_plus(&s, &Psi::power(4.0), LooVarMode::Randomized { seed: 12, replication: 4 }).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn compound_audit_both_modes_and_shapes() {
        let (k, n, reps) = (20, 5, 10_000);
        for psi in [Psi::power(4.0), Psi::square_above_one()] {
            let rule = BetaScaleRule::new(n, DEFAULT_NODES).unwrap();
            let mut rand_sums = Vec::with_capacity(reps);
            let mut derand_sums = Vec::with_capacity(reps);
            for rep in 0..reps {
                let mut rng = stream_rng(21, Domain::Data, rep as u64, 0);
                let s = summarize(&null_rows(&mut rng, k, n)).unwrap();
                let mode = LooVarMode::Randomized { seed: 21, replication: rep as u64 };
                rand_sums.push(loo_var_plus(&s, &psi, mode).unwrap().iter().sum::<f64>());
                derand_sums.push(loo_var_plus_with_rule(&s, &psi, &rule).unwrap().iter().sum::<f64>());
            }
            for sums in [&rand_sums, &derand_sums] {
                let (mean, se) = mean_se(sums);
                assert!(mean <= k as f64 + 3.0 * se, "{}: {mean} ± {se}", psi.label());
            }
        }
    }

    #[test]
    fn e_values_shrink_when_a_p_value_grows() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let n = 4;
        let nf = n as f64;
        for _ in 0..200 {
            let mut values: Vec<f64> = (0..12 * n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
            for v in values.iter_mut().take(3 * n) {
                *v += 3.0;
            }
            let s = summarize(&TTestDataset::from_flat(12, n, values).unwrap()).unwrap();
            let e = loo_var_plus(&s, &Psi::power(4.0), LooVarMode::default()).unwrap();
            // shrink |T_l| holding S² fixed, which raises P_l and σ̂_l²
            let l = rng.random_range(0..12);
            let mut moved = s.clone();
            moved.t[l] *= 0.5;
            moved.sigma2_hat[l] = nf * s.s2[l] / ((nf - 1.0) + moved.t[l].powi(2));
            let mut p = s.p.to_vec();
            p[l] = two_sided_p(moved.t[l], n - 1).unwrap();
            moved.p = PValues::new(p).unwrap();
            let e2 = loo_var_plus(&moved, &Psi::power(4.0), LooVarMode::default()).unwrap();
            for k in 0..12 {
                assert!(e2[k] <= e[k] * (1.0 + 1e-12));
            }
        }
    }

    proptest! {
        #[test]
        fn e_non_increasing_in_other_variances(
            s2 in prop::collection::vec(0.01f64..10.0, 2..12),
            frac in prop::collection::vec(0.01f64..1.0, 12),
            idx in 0usize..12,
            bump in 0.0f64..5.0,
        ) {
            let k = s2.len();
            let n = 5;
            let sigma2: Vec<f64> = s2.iter().zip(&frac).map(|(s, f)| s * f * 1.25).collect();
            let summary = TTestSummary {
                n,
                mu_hat: vec![0.0; k],
                sigma2_hat: sigma2.clone(),
                t: vec![0.0; k],
                p: PValues::new(vec![0.5; k]).unwrap(),
                s2: s2.clone(),
            };
            let l = idx % k;
            let mut raised = summary.clone();
            raised.sigma2_hat[l] += bump;
            for psi in [Psi::power(4.0), Psi::square_above_one(), Psi::identity()] {
                let a = loo_var_plus(&summary, &psi, LooVarMode::Derandomized { nodes: 16 }).unwrap();
                let b = loo_var_plus(&raised, &psi, LooVarMode::Derandomized { nodes: 16 }).unwrap();
                for i in 0..k {
                    if i == l {
                        // its own variance does not enter its own e-value
                        prop_assert_eq!(a[i], b[i]);
                    } else {
                        prop_assert!(b[i] <= a[i]);
                    }
                }
            }
        }
    }
}
