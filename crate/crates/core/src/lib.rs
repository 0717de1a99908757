//! Null-proportion adaptive FDR control through compound e-values.
//!
//! Every adaptive Benjamini–Hochberg variant in this crate is expressed as
//! the ep-BH procedure: BH applied to `Q_k = P_k / E_k`, where `E` is a
//! vector of compound e-values built from the p-values (and, for the
//! t-test methods, from side statistics that are independent of the null
//! p-values).
//!
//! * [`engine`] holds the rejection engines (p-BH, weighted p-BH, ep-BH and
//!   τ-censored ep-BH).
//! * [`estimators`] holds the homogeneous null-proportion constructions,
//!   the generic leave-one-out lift and the estimator combinations.
//! * [`weighted`] holds the weighted constructions.
//! * [`ttest`] holds the simultaneous one-sample t-test machinery and the
//!   LOO-Var+ compound e-values.
//! * [`sim`] is the Monte Carlo harness used to audit FDR control, power and
//!   the compound e-value property.
//! * [`registry`] resolves string identifiers into runnable procedures.

pub mod engine;
pub mod error;
pub mod estimators;
pub mod quadrature;
pub mod registry;
pub mod rng;
pub mod shape;
pub mod sim;
pub mod special;
pub mod ttest;
pub mod weighted;

pub use engine::{
    ep_bh, p_bh, q_values, tau_censored_ep_bh, weighted_p_bh, EValues, PValues, Rejections,
};
pub use error::{Error, Result};
pub use registry::{Inputs, Procedure, ProcedureSpec};
pub use shape::{Psi, Shape};
pub use weighted::Weights;
