//! Numerical integration: globally adaptive Gauss–Kronrod (7/15) on finite
//! intervals, and Gauss–Jacobi rules for integrands with algebraic endpoint
//! singularities.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::special::ln_gamma;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];

// Gauss weights for the nodes XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

const MAX_INTERVALS: usize = 4000;

struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

fn kronrod15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Segment {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for (j, (&x, &w)) in XGK.iter().zip(WGK.iter()).take(7).enumerate() {
        let dx = half * x;
        let pair = f(center - dx) + f(center + dx);
        kronrod += w * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    Segment {
        a,
        b,
        value: kronrod * half,
        error: ((kronrod - gauss) * half).abs(),
    }
}

/// `∫_a^b f` to absolute accuracy `tol`, bisecting the worst segment until
/// the summed error estimate is below `tol`.
pub fn integrate_adaptive<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> Result<f64> {
    if !(a.is_finite() && b.is_finite() && a < b) {
        return Err(Error::domain(format!("invalid integration interval [{a}, {b}]")));
    }
    let mut segments = vec![kronrod15(&f, a, b)];
    loop {
        let total_error: f64 = segments.iter().map(|s| s.error).sum();
        if !total_error.is_finite() {
            return Err(Error::Numerical("non-finite integrand".into()));
        }
        if total_error <= tol {
            return Ok(segments.iter().map(|s| s.value).sum());
        }
        if segments.len() >= MAX_INTERVALS {
            return Err(Error::Numerical(format!(
                "adaptive quadrature did not reach {tol:e} (error estimate {total_error:e})"
            )));
        }
        let worst = segments
            .iter()
            .enumerate()
            .max_by(|x, y| x.1.error.total_cmp(&y.1.error))
            .map(|(i, _)| i)
            .unwrap();
        let s = segments.swap_remove(worst);
        let mid = 0.5 * (s.a + s.b);
        segments.push(kronrod15(&f, s.a, mid));
        segments.push(kronrod15(&f, mid, s.b));
    }
}

/// Gauss–Jacobi rule for `∫_{-1}^{1} (1-t)^alpha (1+t)^beta f(t) dt`,
/// built with the Golub–Welsch eigenvalue method.
#[derive(Debug, Clone)]
pub struct GaussJacobi {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussJacobi {
    pub fn new(m: usize, alpha: f64, beta: f64) -> Result<Self> {
        if m < 1 {
            return Err(Error::domain("Gauss–Jacobi needs at least one node"));
        }
        if !(alpha > -1.0 && beta > -1.0) {
            return Err(Error::domain(format!(
                "Jacobi exponents must exceed -1, got alpha={alpha}, beta={beta}"
            )));
        }
        let ab = alpha + beta;
        let mut jacobi = DMatrix::<f64>::zeros(m, m);
        jacobi[(0, 0)] = (beta - alpha) / (ab + 2.0);
        for j in 1..m {
            let jf = j as f64;
            let s = 2.0 * jf + ab;
            jacobi[(j, j)] = (beta * beta - alpha * alpha) / (s * (s + 2.0));
            // The j = 1 term has a removable 0/0 when alpha + beta = -1.
            let off_sq = if j == 1 {
                4.0 * (1.0 + alpha) * (1.0 + beta) / ((2.0 + ab).powi(2) * (3.0 + ab))
            } else {
                4.0 * jf * (jf + alpha) * (jf + beta) * (jf + ab) / (s * s * (s + 1.0) * (s - 1.0))
            };
            let off = off_sq.sqrt();
            jacobi[(j, j - 1)] = off;
            jacobi[(j - 1, j)] = off;
        }
        let eigen = jacobi.symmetric_eigen();
        let ln_mu0 = (ab + 1.0) * std::f64::consts::LN_2 + ln_gamma(alpha + 1.0)
            + ln_gamma(beta + 1.0)
            - ln_gamma(ab + 2.0);
        let mu0 = ln_mu0.exp();
        let mut pairs: Vec<(f64, f64)> = (0..m)
            .map(|i| {
                let v0 = eigen.eigenvectors[(0, i)];
                (eigen.eigenvalues[i], v0 * v0 * mu0)
            })
            .collect();
        pairs.sort_by(|x, y| x.0.total_cmp(&y.0));
        if pairs
            .iter()
            .any(|&(x, w)| !(x > -1.0 && x < 1.0) || !(w >= 0.0) || !w.is_finite())
        {
            return Err(Error::Numerical(
                "Gauss–Jacobi eigen-decomposition produced invalid nodes".into(),
            ));
        }
        let (nodes, weights) = pairs.into_iter().unzip();
        Ok(GaussJacobi { nodes, weights })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }
}
