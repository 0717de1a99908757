//! Shape functions `ψ` used by the DM-type constructions, the normalized
//! t-test weights and LOO-Var+.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::quadrature::integrate_adaptive;

/// Stand-in argument when `ψ` is asked to evaluate at `+∞`.
const INFINITY_PROXY: f64 = 1e300;

/// A non-decreasing function, labelled for reports.
#[derive(Clone)]
pub struct Psi {
    label: String,
    f: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
}

impl Psi {
    pub fn new(label: impl Into<String>, f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Psi {
            label: label.into(),
            f: Arc::new(f),
        }
    }

    #[inline]
    pub fn eval(&self, u: f64) -> f64 {
        let u = if u == f64::INFINITY { INFINITY_PROXY } else { u };
        (self.f)(u)
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// `ψ(u) = u`.
    pub fn identity() -> Self {
        Psi::new("identity", |u| u)
    }

    /// `ψ(u) = u^r`, `r > 0`.
    pub fn power(r: f64) -> Self {
        if r.fract() == 0.0 && r.abs() <= i32::MAX as f64 {
            let e = r as i32;
            return Psi::new(format!("pow{r}"), move |u: f64| u.powi(e));
        }
        Psi::new(format!("pow{r}"), move |u: f64| u.powf(r))
    }

    /// `ψ(u) = 1{u > c}`.
    pub fn step(c: f64) -> Self {
        Psi::new(format!("step{c}"), move |u| if u > c { 1.0 } else { 0.0 })
    }

    /// `ψ(u) = u^2 1{u >= 1}`.
    pub fn square_above_one() -> Self {
        Psi::new("pow2-ge1", |u| if u >= 1.0 { u * u } else { 0.0 })
    }

    /// `ψ(u) = c` for all `u`.
    pub fn constant(c: f64) -> Self {
        Psi::new(format!("const{c}"), move |_| c)
    }

    /// Parses `identity`, `pow<r>`, `step<c>`, `pow2-ge1` or `const<c>`.
    pub fn parse(id: &str) -> Result<Self> {
        let id = id.trim();
        let number = |s: &str| -> Result<f64> {
            s.parse::<f64>()
                .map_err(|_| Error::validation(format!("cannot parse shape function `{id}`")))
        };
        match id {
            "identity" | "u" => Ok(Psi::identity()),
            "pow2-ge1" => Ok(Psi::square_above_one()),
            _ => {
                if let Some(r) = id.strip_prefix("pow") {
                    let r = number(r)?;
                    if !(r > 0.0 && r.is_finite()) {
                        return Err(Error::domain(format!("power must be positive, got {r}")));
                    }
                    if r == 1.0 {
                        return Ok(Psi::identity());
                    }
                    Ok(Psi::power(r))
                } else if let Some(c) = id.strip_prefix("step") {
                    Ok(Psi::step(number(c)?))
                } else if let Some(c) = id.strip_prefix("const") {
                    let c = number(c)?;
                    if c < 0.0 {
                        return Err(Error::domain("constant shape must be nonnegative"));
                    }
                    Ok(Psi::constant(c))
                } else {
                    Err(Error::validation(format!(
                        "unknown shape function `{id}` (expected identity, pow<r>, step<c>, pow2-ge1, const<c>)"
                    )))
                }
            }
        }
    }
}

impl fmt::Debug for Psi {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Psi({})", self.label)
    }
}

/// A shape `ψ: [0,1] -> [0,1]` paired with its nominal mean `ν ∈ (0, 1]`.
///
/// Normally `ν = ∫ψ`; a larger user-supplied `ν` is allowed for discrete
/// nulls that are stochastically larger than uniform.
#[derive(Debug, Clone)]
pub struct Shape {
    psi: Psi,
    nu: f64,
}

impl Shape {
    pub fn new(psi: Psi, nu: f64) -> Result<Self> {
        if !(nu > 0.0 && nu <= 1.0) {
            return Err(Error::domain(format!("nu must lie in (0, 1], got {nu}")));
        }
        Ok(Shape { psi, nu })
    }

    /// `ν` computed as `∫_0^1 ψ(u) du` by adaptive Gauss–Kronrod to 1e-10.
    pub fn integrated(psi: Psi) -> Result<Self> {
        let nu = integrate_adaptive(|u| psi.eval(u), 0.0, 1.0, 1e-10)?;
        Shape::new(psi, nu)
    }

    /// `ψ(u) = 1{u > τ}`, `ν = 1 - τ` (Storey).
    pub fn indicator(tau: f64) -> Result<Self> {
        crate::error::check_open_unit("tau", tau)?;
        Shape::new(Psi::step(tau), 1.0 - tau)
    }

    /// `ψ(u) = u`, `ν = 1/2` (MPC).
    pub fn identity() -> Self {
        Shape {
            psi: Psi::identity(),
            nu: 0.5,
        }
    }

    /// `ψ(u) = u^r`, `ν = 1/(r+1)`.
    pub fn power(r: f64) -> Result<Self> {
        if !(r > 0.0 && r.is_finite()) {
            return Err(Error::domain(format!("power must be positive, got {r}")));
        }
        Shape::new(Psi::power(r), 1.0 / (r + 1.0))
    }

    #[inline]
    pub fn eval(&self, u: f64) -> f64 {
        self.psi.eval(u)
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn psi(&self) -> &Psi {
        &self.psi
    }
}
