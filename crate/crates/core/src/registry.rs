//! String identifiers for every procedure, used by the simulation harness
//! and the command-line tool.
//!
//! A [`ProcedureSpec`] is an identifier plus a `key=value` parameter map.
//! [`Procedure::from_spec`] validates it once; the resulting value computes
//! compound e-values and rejections for any input of matching shape.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use crate::engine::{ep_bh, EValues, PValues, Rejections};
use crate::error::{Error, Result};
use crate::estimators::{
    combine_evalues, combine_pi0, dm_plus, flat, loo_lift, mabh, storey_plus, tst, DmEstimator,
    IbhLogEstimator, MinStoreyEstimator, MinStoreyParams, MpcEstimator, NullPropEstimator,
    QuantEstimator, StoreyEstimator,
};
use crate::shape::{Psi, Shape};
use crate::ttest::{loo_var_plus, normalized_weights, LooVarMode, TTestSummary, DEFAULT_NODES};
use crate::weighted::{w_dm_plus, w_loo_storey_plus, w_max_storey, Weights};

/// Every registered identifier.
pub const PROCEDURE_IDS: &[&str] = &[
    "bh",
    "w-bh",
    "storey",
    "storey+",
    "mpc",
    "dm",
    "dm+",
    "quant",
    "quant+",
    "ibhlog",
    "ibhlog+",
    "min-storey",
    "min-storey+",
    "mabh",
    "tst",
    "tst+",
    "combine",
    "w-max-storey",
    "w-loo-storey",
    "w-loo-storey+",
    "w-dm+",
    "loo-var+",
    "loo-var/storey+",
];

const DEFAULT_TAU: f64 = 0.5;
const DEFAULT_PSI: &str = "pow4";

/// A procedure identifier with its parameters.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ProcedureSpec {
    pub id: String,
    pub params: BTreeMap<String, String>,
}

impl ProcedureSpec {
    pub fn new(id: impl Into<String>) -> Self {
        ProcedureSpec {
            id: id.into().trim().to_ascii_lowercase(),
            params: BTreeMap::new(),
        }
    }

    pub fn with(mut self, key: impl Into<String>, value: impl Into<String>) -> Self {
        self.params.insert(key.into(), value.into());
        self
    }

    /// Adds a parameter given as `key=value`.
    pub fn push_param(&mut self, pair: &str) -> Result<()> {
        let (key, value) = pair
            .split_once('=')
            .ok_or_else(|| Error::validation(format!("parameter `{pair}` is not key=value")))?;
        self.params
            .insert(key.trim().to_string(), value.trim().to_string());
        Ok(())
    }

    fn raw(&self, key: &str) -> Option<&str> {
        self.params.get(key).map(String::as_str)
    }

    fn f64_or(&self, key: &str, default: f64) -> Result<f64> {
        match self.raw(key) {
            None => Ok(default),
            Some(v) => v.parse().map_err(|_| self.bad(key, v, "a number")),
        }
    }

    fn f64_required(&self, key: &str) -> Result<f64> {
        let v = self.raw(key).ok_or_else(|| {
            Error::validation(format!("procedure `{}` requires parameter `{key}`", self.id))
        })?;
        v.parse().map_err(|_| self.bad(key, v, "a number"))
    }

    fn usize_opt(&self, key: &str) -> Result<Option<usize>> {
        self.raw(key)
            .map(|v| v.parse().map_err(|_| self.bad(key, v, "a nonnegative integer")))
            .transpose()
    }

    fn u64_or(&self, key: &str, default: u64) -> Result<u64> {
        match self.raw(key) {
            None => Ok(default),
            Some(v) => v.parse().map_err(|_| self.bad(key, v, "a nonnegative integer")),
        }
    }

    fn bool_or(&self, key: &str, default: bool) -> Result<bool> {
        match self.raw(key) {
            None => Ok(default),
            Some("true" | "1" | "yes") => Ok(true),
            Some("false" | "0" | "no") => Ok(false),
            Some(v) => Err(self.bad(key, v, "true or false")),
        }
    }

    fn bad(&self, key: &str, value: &str, expected: &str) -> Error {
        Error::validation(format!(
            "parameter `{key}={value}` of `{}` must be {expected}",
            self.id
        ))
    }

    /// Parameters for one side of a combination: shared keys, overridden
    /// by keys prefixed with `side.`.
    fn constituent(&self, side: &str, default_id: Option<&str>) -> Result<ProcedureSpec> {
        let id = self
            .raw(side)
            .or(default_id)
            .ok_or_else(|| Error::validation(format!("`combine` requires parameter `{side}`")))?;
        let mut spec = ProcedureSpec::new(id);
        let prefix = format!("{side}.");
        for (key, value) in &self.params {
            if matches!(key.as_str(), "a" | "b" | "lambda" | "mode") || key.contains('.') {
                continue;
            }
            spec.params.insert(key.clone(), value.clone());
        }
        for (key, value) in &self.params {
            if let Some(stripped) = key.strip_prefix(&prefix) {
                spec.params.insert(stripped.to_string(), value.clone());
            }
        }
        Ok(spec)
    }
}

impl FromStr for ProcedureSpec {
    type Err = Error;

    /// Parses `id` or `id:key=value,key=value`.
    fn from_str(s: &str) -> Result<Self> {
        let (id, rest) = match s.split_once(':') {
            Some((id, rest)) => (id, Some(rest)),
            None => (s, None),
        };
        let mut spec = ProcedureSpec::new(id);
        if let Some(rest) = rest {
            for pair in rest.split(',').filter(|p| !p.trim().is_empty()) {
                spec.push_param(pair)?;
            }
        }
        Ok(spec)
    }
}

impl fmt::Display for ProcedureSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.id)?;
        let mut sep = ':';
        for (k, v) in &self.params {
            write!(f, "{sep}{k}={v}")?;
            sep = ',';
        }
        Ok(())
    }
}

/// Data a procedure may consume.
#[derive(Debug, Clone, Copy)]
pub struct Inputs<'a> {
    pub p: &'a PValues,
    /// Explicit weights; when absent, weighted procedures derive normalized
    /// weights from `summary`.
    pub weights: Option<&'a Weights>,
    pub summary: Option<&'a TTestSummary>,
    pub seed: u64,
    pub replication: u64,
}

impl<'a> Inputs<'a> {
    pub fn new(p: &'a PValues) -> Self {
        Inputs {
            p,
            weights: None,
            summary: None,
            seed: 0,
            replication: 0,
        }
    }

    pub fn with_weights(mut self, w: &'a Weights) -> Self {
        self.weights = Some(w);
        self
    }

    pub fn with_summary(mut self, s: &'a TTestSummary) -> Self {
        self.summary = Some(s);
        self
    }

    pub fn with_stream(mut self, seed: u64, replication: u64) -> Self {
        self.seed = seed;
        self.replication = replication;
        self
    }
}

/// Where the weights of a weighted procedure come from.
#[derive(Debug, Clone)]
struct WeightSource {
    psi: Psi,
}

impl WeightSource {
    fn from_spec(spec: &ProcedureSpec) -> Result<Self> {
        Ok(WeightSource {
            psi: Psi::parse(spec.raw("psi").unwrap_or(DEFAULT_PSI))?,
        })
    }

    fn resolve(&self, inputs: &Inputs<'_>) -> Result<Weights> {
        let w = match (inputs.weights, inputs.summary) {
            (Some(w), _) => w.clone(),
            (None, Some(s)) => normalized_weights(&s.s2, &self.psi)?,
            (None, None) => {
                return Err(Error::validation(
                    "weighted procedure needs weights or replicate summaries",
                ))
            }
        };
        if w.len() != inputs.p.len() {
            return Err(Error::Dimension {
                expected: inputs.p.len(),
                got: w.len(),
            });
        }
        Ok(w)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CombineMode {
    /// Average the implied compound e-values.
    EValues,
    /// Average the null-proportion estimates and run adaptive BH.
    Pi0,
}

/// How a homogeneous estimator is turned into e-values.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Lift {
    Flat,
    LeaveOneOut,
}

#[derive(Debug, Clone)]
enum EstimatorKind {
    Storey { tau: f64, c: f64 },
    Mpc,
    Dm { shape: Shape },
    Quant { l: Option<usize> },
    IbhLog,
    MinStorey(MinStoreyParams),
}

impl EstimatorKind {
    fn build(&self, k: usize) -> Result<Arc<dyn NullPropEstimator>> {
        Ok(match self {
            EstimatorKind::Storey { tau, c } => Arc::new(StoreyEstimator::new(*tau, *c)?),
            EstimatorKind::Mpc => Arc::new(MpcEstimator),
            EstimatorKind::Dm { shape } => Arc::new(DmEstimator::new(vec![shape.clone(); k])),
            EstimatorKind::Quant { l } => Arc::new(QuantEstimator::new(l.unwrap_or((k / 2).max(1)))?),
            EstimatorKind::IbhLog => Arc::new(IbhLogEstimator),
            EstimatorKind::MinStorey(params) => Arc::new(MinStoreyEstimator::new(*params)),
        })
    }
}

#[derive(Debug, Clone)]
enum Kind {
    Bh,
    WBh(WeightSource),
    Estimator(EstimatorKind, Lift),
    StoreyPlus { tau: f64 },
    DmPlus { shape: Shape },
    Mabh,
    Tst { plus: bool },
    Combine {
        a: Box<Procedure>,
        b: Box<Procedure>,
        lambda: f64,
        mode: CombineMode,
    },
    WMaxStorey { tau: f64, weights: WeightSource },
    WLooStorey { tau: f64, censor: bool, weights: WeightSource },
    WDmPlus { shape: Shape, weights: WeightSource },
    LooVarPlus { psi: Psi, mode: LooVarModeSpec },
}

#[derive(Debug, Clone, Copy)]
enum LooVarModeSpec {
    Randomized { seed: Option<u64> },
    Derandomized { nodes: usize },
}

/// A validated, runnable procedure.
#[derive(Debug, Clone)]
pub struct Procedure {
    spec: ProcedureSpec,
    kind: Kind,
}

/// The p-value shape named by parameter `key` (default `identity`), with
/// `ν` from parameter `nu` or from the shape itself.
fn shape_from_spec(spec: &ProcedureSpec, key: &str) -> Result<Shape> {
    let id = spec.raw(key).unwrap_or("identity");
    let psi = Psi::parse(id)?;
    if let Some(nu) = spec.raw("nu") {
        let nu = nu.parse().map_err(|_| spec.bad("nu", nu, "a number"))?;
        return Shape::new(psi, nu);
    }
    if id == "identity" || id == "u" || id == "pow1" {
        return Ok(Shape::identity());
    }
    if let Some(r) = id.strip_prefix("pow").and_then(|r| r.parse::<f64>().ok()) {
        return Shape::power(r);
    }
    if let Some(c) = id.strip_prefix("step").and_then(|c| c.parse::<f64>().ok()) {
        if c > 0.0 && c < 1.0 {
            return Shape::indicator(c);
        }
    }
    Shape::integrated(psi)
}

fn tau(spec: &ProcedureSpec) -> Result<f64> {
    spec.f64_or("tau", DEFAULT_TAU)
}

impl Procedure {
    pub fn from_spec(spec: &ProcedureSpec) -> Result<Procedure> {
        let kind = match spec.id.as_str() {
            "bh" => Kind::Bh,
            "w-bh" => Kind::WBh(WeightSource::from_spec(spec)?),
            "storey" => Kind::Estimator(
                EstimatorKind::Storey {
                    tau: tau(spec)?,
                    c: spec.f64_or("c", 1.0)?,
                },
                Lift::Flat,
            ),
            "storey+" => Kind::StoreyPlus { tau: tau(spec)? },
            "mpc" => Kind::Estimator(EstimatorKind::Mpc, Lift::Flat),
            "dm" => Kind::Estimator(
                EstimatorKind::Dm {
                    shape: shape_from_spec(spec, "psi")?,
                },
                Lift::Flat,
            ),
            "dm+" => Kind::DmPlus {
                shape: shape_from_spec(spec, "psi")?,
            },
            "quant" | "quant+" => Kind::Estimator(
                EstimatorKind::Quant {
                    l: spec.usize_opt("L")?.or(spec.usize_opt("l")?),
                },
                lift_for(&spec.id),
            ),
            "ibhlog" | "ibhlog+" => Kind::Estimator(EstimatorKind::IbhLog, lift_for(&spec.id)),
            "min-storey" | "min-storey+" => {
                let c = match spec.raw("C") {
                    Some(_) => spec.f64_required("C")?,
                    None => spec.f64_required("c")?,
                };
                let params = MinStoreyParams::new(
                    spec.f64_required("eps")?,
                    spec.f64_required("pi_lower")?,
                    c,
                )?;
                Kind::Estimator(EstimatorKind::MinStorey(params), lift_for(&spec.id))
            }
            "mabh" => Kind::Mabh,
            "tst" => Kind::Tst { plus: false },
            "tst+" => Kind::Tst { plus: true },
            "combine" | "loo-var/storey+" => {
                let alias = spec.id == "loo-var/storey+";
                let (da, db) = if alias {
                    (Some("loo-var+"), Some("w-loo-storey+"))
                } else {
                    (None, None)
                };
                let a = Procedure::from_spec(&spec.constituent("a", da)?)?;
                let b = Procedure::from_spec(&spec.constituent("b", db)?)?;
                let lambda = spec.f64_or("lambda", 0.5)?;
                let mode = match spec.raw("mode").unwrap_or("evalues") {
                    "evalues" | "e" | "alg4" => CombineMode::EValues,
                    "pi0" | "alg3" => CombineMode::Pi0,
                    other => return Err(spec.bad("mode", other, "`evalues` or `pi0`")),
                };
                if !(lambda > 0.0 && lambda < 1.0) {
                    return Err(Error::domain(format!("lambda must lie in (0, 1), got {lambda}")));
                }
                if mode == CombineMode::Pi0 && (a.estimator_kind().is_none() || b.estimator_kind().is_none()) {
                    return Err(Error::validation(
                        "mode=pi0 needs two null-proportion estimators (storey, mpc, dm, quant, ibhlog, min-storey)",
                    ));
                }
                Kind::Combine {
                    a: Box::new(a),
                    b: Box::new(b),
                    lambda,
                    mode,
                }
            }
            "w-max-storey" => Kind::WMaxStorey {
                tau: tau(spec)?,
                weights: WeightSource::from_spec(spec)?,
            },
            "w-loo-storey" | "w-loo-storey+" => Kind::WLooStorey {
                tau: tau(spec)?,
                censor: spec.bool_or("censor", spec.id == "w-loo-storey")?,
                weights: WeightSource::from_spec(spec)?,
            },
            "w-dm+" => Kind::WDmPlus {
                shape: shape_from_spec(spec, "shape")?,
                weights: WeightSource::from_spec(spec)?,
            },
            "loo-var+" => {
                let psi = Psi::parse(spec.raw("psi").unwrap_or(DEFAULT_PSI))?;
                let mode = match spec.raw("mode").unwrap_or("derandomized") {
                    "derandomized" => LooVarModeSpec::Derandomized {
                        nodes: spec.usize_opt("nodes")?.unwrap_or(DEFAULT_NODES),
                    },
                    "randomized" => LooVarModeSpec::Randomized {
                        seed: spec.raw("seed").map(|_| spec.u64_or("seed", 0)).transpose()?,
                    },
                    other => return Err(spec.bad("mode", other, "`randomized` or `derandomized`")),
                };
                Kind::LooVarPlus { psi, mode }
            }
            other => {
                return Err(Error::UnknownProcedure {
                    id: other.to_string(),
                    known: PROCEDURE_IDS.join(", "),
                })
            }
        };
        Ok(Procedure {
            spec: spec.clone(),
            kind,
        })
    }

    pub fn parse(s: &str) -> Result<Procedure> {
        Procedure::from_spec(&s.parse()?)
    }

    pub fn spec(&self) -> &ProcedureSpec {
        &self.spec
    }

    pub fn id(&self) -> &str {
        &self.spec.id
    }

    /// Whether the procedure needs t-test summaries or weights.
    pub fn needs_side_information(&self) -> bool {
        match &self.kind {
            Kind::WBh(_) | Kind::WMaxStorey { .. } | Kind::WLooStorey { .. } | Kind::WDmPlus { .. } | Kind::LooVarPlus { .. } => true,
            Kind::Combine { a, b, .. } => a.needs_side_information() || b.needs_side_information(),
            _ => false,
        }
    }

    fn estimator_kind(&self) -> Option<&EstimatorKind> {
        match &self.kind {
            Kind::Estimator(e, _) => Some(e),
            _ => None,
        }
    }

    fn estimator(&self, k: usize) -> Result<Option<Arc<dyn NullPropEstimator>>> {
        match &self.kind {
            Kind::Estimator(e, _) => Ok(Some(e.build(k)?)),
            Kind::StoreyPlus { tau } => Ok(Some(Arc::new(StoreyEstimator::new(*tau, 1.0)?))),
            Kind::DmPlus { shape } => Ok(Some(Arc::new(DmEstimator::new(vec![shape.clone(); k])))),
            _ => Ok(None),
        }
    }

    /// The compound e-values this procedure feeds to ep-BH.
    pub fn evalues(&self, inputs: &Inputs<'_>, alpha: f64) -> Result<EValues> {
        let p = inputs.p;
        let k = p.len();
        match &self.kind {
            Kind::Bh => EValues::constant(k, 1.0),
            Kind::WBh(src) => EValues::new(src.resolve(inputs)?.to_vec()),
            Kind::Estimator(e, lift) => {
                let est = e.build(k)?;
                match lift {
                    Lift::Flat => flat(est.as_ref(), p),
                    Lift::LeaveOneOut => loo_lift(est.as_ref(), p),
                }
            }
            Kind::StoreyPlus { tau } => storey_plus(p, *tau),
            Kind::DmPlus { shape } => dm_plus(p, &vec![shape.clone(); k]),
            Kind::Mabh => mabh(p, alpha),
            Kind::Tst { plus } => tst(p, alpha, *plus),
            Kind::Combine { a, b, lambda, mode } => match mode {
                CombineMode::EValues => {
                    combine_evalues(&a.evalues(inputs, alpha)?, &b.evalues(inputs, alpha)?, *lambda)
                }
                CombineMode::Pi0 => {
                    let (ea, eb) = (a.estimator(k)?, b.estimator(k)?);
                    let (Some(ea), Some(eb)) = (ea, eb) else {
                        return Err(Error::validation("mode=pi0 needs two null-proportion estimators"));
                    };
                    flat(&combine_pi0(ea, eb, *lambda)?, p)
                }
            },
            Kind::WMaxStorey { tau, weights } => w_max_storey(p, &weights.resolve(inputs)?, *tau),
            Kind::WLooStorey { tau, censor, weights } => {
                w_loo_storey_plus(p, &weights.resolve(inputs)?, *tau, *censor)
            }
            Kind::WDmPlus { shape, weights } => {
                w_dm_plus(p, &weights.resolve(inputs)?, &vec![shape.clone(); k])
            }
            Kind::LooVarPlus { psi, mode } => {
                let summary = inputs
                    .summary
                    .ok_or_else(|| Error::validation("loo-var+ needs replicate summaries"))?;
                if summary.k() != k {
                    return Err(Error::Dimension { expected: k, got: summary.k() });
                }
                let mode = match *mode {
                    LooVarModeSpec::Derandomized { nodes } => LooVarMode::Derandomized { nodes },
                    LooVarModeSpec::Randomized { seed } => LooVarMode::Randomized {
                        seed: seed.unwrap_or(inputs.seed),
                        replication: inputs.replication,
                    },
                };
                loo_var_plus(summary, psi, mode)
            }
        }
    }

    /// Compound e-values and the ep-BH rejections at level `alpha`.
    pub fn reject(&self, inputs: &Inputs<'_>, alpha: f64) -> Result<(EValues, Rejections)> {
        let e = self.evalues(inputs, alpha)?;
        let r = ep_bh(inputs.p, &e, alpha)?;
        Ok((e, r))
    }
}

fn lift_for(id: &str) -> Lift {
    if id.ends_with('+') {
        Lift::LeaveOneOut
    } else {
        Lift::Flat
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{p_bh, weighted_p_bh};
    use crate::estimators::{dm, ibhlog, min_storey, mpc, quant, storey};
    use crate::ttest::{summarize, TTestDataset};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const P4: [f64; 4] = [0.01, 0.2, 0.6, 0.9];

    fn pv(v: &[f64]) -> PValues {
        PValues::new(v.to_vec()).unwrap()
    }

    fn run(spec: &str, p: &PValues) -> EValues {
        Procedure::parse(spec).unwrap().evalues(&Inputs::new(p), 0.1).unwrap()
    }

    #[test]
    fn spec_parsing() {
        let s: ProcedureSpec = "Storey:tau=0.3, c=0.5".parse().unwrap();
        assert_eq!(s.id, "storey");
        assert_eq!(s.params["tau"], "0.3");
        assert_eq!(s.params["c"], "0.5");
        assert_eq!(s.to_string(), "storey:c=0.5,tau=0.3");
        assert!("storey:tau".parse::<ProcedureSpec>().is_err());
    }

    #[test]
    fn unknown_identifier_lists_known_ids() {
        let err = Procedure::parse("storey++").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("storey++"));
        assert!(msg.contains("loo-var+"));
    }

    #[test]
    fn registry_matches_direct_calls() {
        let p = pv(&P4);
        assert_eq!(run("storey", &p), storey(&p, 0.5, 1.0).unwrap());
        assert_eq!(run("storey+:tau=0.5", &p), storey_plus(&p, 0.5).unwrap());
        assert_eq!(run("mpc", &p), mpc(&p).unwrap());
        assert_eq!(run("quant", &p), quant(&p, 2).unwrap());
        assert_eq!(run("quant:L=3", &p), quant(&p, 3).unwrap());
        assert_eq!(run("ibhlog", &p), ibhlog(&p).unwrap());
        let shapes = vec![Shape::power(4.0).unwrap(); 4];
        assert_eq!(run("dm:psi=pow4", &p), dm(&p, &shapes).unwrap());
        assert_eq!(run("dm+:psi=pow4", &p), dm_plus(&p, &shapes).unwrap());
        let ms = MinStoreyParams::new(0.5, 0.1, 1.0).unwrap();
        assert_eq!(run("min-storey:eps=0.5,pi_lower=0.1,C=1", &p), min_storey(&p, ms).unwrap());
        assert!(Procedure::parse("min-storey:eps=0.5,pi_lower=0.1").is_err());
        assert_eq!(run("tst+", &p), tst(&p, 0.1, true).unwrap());
        assert_eq!(run("bh", &p).as_slice(), &[1.0; 4]);
    }

    #[test]
    fn combinations_from_specs() {
        let p = pv(&P4);
        let e = run("combine:a=storey+,b=quant+,lambda=0.5", &p);
        let a = run("storey+", &p);
        let b = run("quant+", &p);
        let expected = combine_evalues(&a, &b, 0.5).unwrap();
        assert_eq!(e, expected);

        let e3 = run("combine:a=storey,b=quant,mode=pi0,a.tau=0.3", &p);
        let pa = 1.0 / run("storey:tau=0.3", &p)[0];
        let pb = 1.0 / run("quant", &p)[0];
        assert!((e3[0] - 1.0 / (0.5 * pa + 0.5 * pb)).abs() < 1e-12);
        assert!(Procedure::parse("combine:a=storey,b=tst,mode=pi0").is_err());
        assert!(Procedure::parse("combine:a=storey").is_err());
        assert!(Procedure::parse("combine:a=storey,b=mpc,lambda=1").is_err());
    }

    #[test]
    fn weighted_procedures_use_supplied_weights() {
        let p = pv(&P4);
        let w = Weights::new(vec![2.0, 1.0, 0.5, 0.5]).unwrap();
        let inputs = Inputs::new(&p).with_weights(&w);
        let proc = Procedure::parse("w-bh").unwrap();
        let (_, r) = proc.reject(&inputs, 0.2).unwrap();
        assert_eq!(r, weighted_p_bh(&p, &w, 0.2).unwrap());
        let e = Procedure::parse("w-loo-storey").unwrap().evalues(&inputs, 0.1).unwrap();
        assert_eq!(e, w_loo_storey_plus(&p, &w, 0.5, true).unwrap());
        let e = Procedure::parse("w-loo-storey+").unwrap().evalues(&inputs, 0.1).unwrap();
        assert_eq!(e, w_loo_storey_plus(&p, &w, 0.5, false).unwrap());
        assert!(Procedure::parse("w-bh").unwrap().evalues(&Inputs::new(&p), 0.1).is_err());
    }

    #[test]
    fn ttest_procedures_from_summaries() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let values: Vec<f64> = (0..30).map(|_| rng.random::<f64>() - 0.3).collect();
        let summary = summarize(&TTestDataset::from_flat(10, 3, values).unwrap()).unwrap();
        let inputs = Inputs::new(&summary.p).with_summary(&summary).with_stream(5, 2);
        let w = normalized_weights(&summary.s2, &Psi::power(4.0)).unwrap();
        let e = Procedure::parse("w-bh").unwrap().evalues(&inputs, 0.1).unwrap();
        assert_eq!(e.as_slice(), w.as_slice());

        let derand = Procedure::parse("loo-var+").unwrap().evalues(&inputs, 0.1).unwrap();
        assert_eq!(derand, loo_var_plus(&summary, &Psi::power(4.0), LooVarMode::default()).unwrap());
        let rand = Procedure::parse("loo-var+:mode=randomized").unwrap().evalues(&inputs, 0.1).unwrap();
        let direct = loo_var_plus(&summary, &Psi::power(4.0), LooVarMode::Randomized { seed: 5, replication: 2 }).unwrap();
        assert_eq!(rand, direct);
        assert_ne!(rand, derand);

        let combo = Procedure::parse("loo-var/storey+").unwrap().evalues(&inputs, 0.1).unwrap();
        let storey_w = w_loo_storey_plus(&summary.p, &w, 0.5, false).unwrap();
        assert_eq!(combo, combine_evalues(&derand, &storey_w, 0.5).unwrap());
        assert!(Procedure::parse("loo-var/storey+").unwrap().needs_side_information());
        assert!(!Procedure::parse("storey").unwrap().needs_side_information());
    }

    #[test]
    fn bh_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let proc = Procedure::parse("bh").unwrap();
        for _ in 0..200 {
            let p = pv(&(0..20).map(|_| rng.random::<f64>().powi(3)).collect::<Vec<_>>());
            let (_, r) = proc.reject(&Inputs::new(&p), 0.1).unwrap();
            assert_eq!(r, p_bh(&p, 0.1).unwrap());
        }
    }
}
