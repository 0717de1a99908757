//! Monte Carlo harness: simultaneous t-test scenarios, power and FDR
//! estimation, compound e-value audits and two-hypothesis rejection-region
//! grids.
//!
//! Replications are independent and run in parallel. Every random draw comes
//! from a counter-based stream keyed by `(seed, replication, hypothesis)`,
//! and per-replication results are collected in order before being reduced,
//! so output is identical for any thread count.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::engine::{EValues, PValues, Rejections};
use crate::error::{Error, Result};
use crate::registry::{Inputs, Procedure, ProcedureSpec};
use crate::rng::{stream_key, stream_rng, Domain};
use crate::ttest::{summarize, TTestDataset, TTestSummary, DEFAULT_NODES};

/// How the effect size `ξ` sets the alternative mean `μ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MuMapping {
    /// `μ = ξ σ / √n`, so that `ξ` is the noncentrality of the t statistic.
    #[default]
    TStat,
    /// `μ = ξ σ √n`.
    Paper,
}

impl MuMapping {
    pub fn mu(self, xi: f64, sigma: f64, n: usize) -> f64 {
        let root = (n as f64).sqrt();
        match self {
            MuMapping::TStat => xi * sigma / root,
            MuMapping::Paper => xi * sigma * root,
        }
    }
}

impl FromStr for MuMapping {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "tstat" => Ok(MuMapping::TStat),
            "paper" => Ok(MuMapping::Paper),
            other => Err(Error::validation(format!(
                "mu_mapping must be `tstat` or `paper`, got `{other}`"
            ))),
        }
    }
}

impl fmt::Display for MuMapping {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MuMapping::TStat => "tstat",
            MuMapping::Paper => "paper",
        })
    }
}

/// One scenario cell: `K` hypotheses with `n` replicates each, the first
/// `K1` of which are alternatives.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub k: usize,
    pub n: usize,
    pub k1: usize,
    pub xi: f64,
    pub sigma2: f64,
    pub mu_mapping: MuMapping,
    pub seed: u64,
}

impl ScenarioConfig {
    /// All-null scenario with `K` hypotheses and `n` replicates.
    pub fn global_null(k: usize, n: usize, seed: u64) -> Self {
        ScenarioConfig {
            k,
            n,
            k1: 0,
            xi: 0.0,
            sigma2: 1.0,
            mu_mapping: MuMapping::default(),
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::validation("K must be at least 1"));
        }
        if self.n < 2 {
            return Err(Error::validation(format!("n must be at least 2, got {}", self.n)));
        }
        if self.k1 > self.k {
            return Err(Error::validation(format!(
                "K1={} exceeds K={}",
                self.k1, self.k
            )));
        }
        if !(self.xi.is_finite() && self.xi >= 0.0) {
            return Err(Error::validation(format!("xi must be finite and >= 0, got {}", self.xi)));
        }
        if !(self.sigma2.is_finite() && self.sigma2 > 0.0) {
            return Err(Error::validation(format!("sigma2 must be positive, got {}", self.sigma2)));
        }
        Ok(())
    }

    pub fn mu(&self) -> f64 {
        self.mu_mapping.mu(self.xi, self.sigma2.sqrt(), self.n)
    }
}

/// Replicate matrix and truth mask (`true` = alternative) for replication
/// `rep`. Deterministic in `(config, rep)`.
pub fn generate(config: &ScenarioConfig, rep: u64) -> Result<(TTestDataset, Vec<bool>)> {
    config.validate()?;
    let (k, n) = (config.k, config.n);
    let sigma = config.sigma2.sqrt();
    let mu = config.mu();
    let mut values = Vec::with_capacity(k * n);
    let mut truth = Vec::with_capacity(k);
    for i in 0..k {
        let alt = i < config.k1;
        let mean = if alt { mu } else { 0.0 };
        let mut rng = stream_rng(config.seed, Domain::Data, rep, i as u64);
        for _ in 0..n {
            let z: f64 = rng.sample(StandardNormal);
            values.push(mean + sigma * z);
        }
        truth.push(alt);
    }
    Ok((TTestDataset::from_flat(k, n, values)?, truth))
}

/// Mean and standard error (sample SD over `√reps`) of a sample.
pub fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Power and FDR estimates for one procedure in one scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct ProcedureStats {
    pub procedure: String,
    pub power: f64,
    pub power_se: f64,
    pub fdr: f64,
    pub fdr_se: f64,
    pub mean_rejections: f64,
    pub reps: usize,
}

/// Result of running several procedures on one scenario.
#[derive(Debug, Clone)]
pub struct ScenarioResult {
    pub stats: Vec<ProcedureStats>,
    /// `records[rep][procedure]` when requested.
    pub records: Option<Vec<Vec<Rejections>>>,
}

struct RepOutcome {
    fdp: Vec<f64>,
    tpp: Vec<f64>,
    rejections: Vec<Rejections>,
}

fn false_discovery_proportion(r: &Rejections, truth: &[bool]) -> (f64, f64) {
    let false_disc = r.rejected.iter().filter(|&&i| !truth[i]).count();
    let true_disc = r.len() - false_disc;
    let alternatives = truth.iter().filter(|&&t| t).count();
    let fdp = false_disc as f64 / r.len().max(1) as f64;
    let tpp = if alternatives == 0 {
        0.0
    } else {
        true_disc as f64 / alternatives as f64
    };
    (fdp, tpp)
}

fn run_one(config: &ScenarioConfig, procedures: &[Procedure], alpha: f64, rep: u64) -> Result<RepOutcome> {
    let (data, truth) = generate(config, rep)?;
    let summary = summarize(&data)?;
    let inputs = Inputs::new(&summary.p)
        .with_summary(&summary)
        .with_stream(config.seed, rep);
    let mut out = RepOutcome {
        fdp: Vec::with_capacity(procedures.len()),
        tpp: Vec::with_capacity(procedures.len()),
        rejections: Vec::with_capacity(procedures.len()),
    };
    for proc in procedures {
        let (_, r) = proc.reject(&inputs, alpha)?;
        let (fdp, tpp) = false_discovery_proportion(&r, &truth);
        out.fdp.push(fdp);
        out.tpp.push(tpp);
        out.rejections.push(r);
    }
    Ok(out)
}

/// Runs every procedure on `reps` replications of one scenario.
pub fn run_scenario(
    config: &ScenarioConfig,
    procedures: &[Procedure],
    alpha: f64,
    reps: usize,
    keep_records: bool,
) -> Result<ScenarioResult> {
    config.validate()?;
    crate::error::check_open_unit("alpha", alpha)?;
    if reps == 0 {
        return Err(Error::validation("reps must be at least 1"));
    }
    let outcomes: Vec<RepOutcome> = (0..reps as u64)
        .into_par_iter()
        .map(|rep| run_one(config, procedures, alpha, rep))
        .collect::<Result<_>>()?;
    let stats = procedures
        .iter()
        .enumerate()
        .map(|(j, proc)| {
            let fdp: Vec<f64> = outcomes.iter().map(|o| o.fdp[j]).collect();
            let tpp: Vec<f64> = outcomes.iter().map(|o| o.tpp[j]).collect();
            let rejections: Vec<f64> = outcomes.iter().map(|o| o.rejections[j].len() as f64).collect();
            let (fdr, fdr_se) = mean_and_se(&fdp);
            let (power, power_se) = mean_and_se(&tpp);
            ProcedureStats {
                procedure: proc.id().to_string(),
                power,
                power_se,
                fdr,
                fdr_se,
                mean_rejections: mean_and_se(&rejections).0,
                reps,
            }
        })
        .collect();
    let records = keep_records.then(|| outcomes.into_iter().map(|o| o.rejections).collect());
    Ok(ScenarioResult { stats, records })
}

/// A grid of scenario cells and the procedures to run on each.
#[derive(Debug, Clone, PartialEq)]
pub struct StudyConfig {
    pub k: usize,
    pub n_values: Vec<usize>,
    pub k1_values: Vec<usize>,
    pub xi_values: Vec<f64>,
    pub sigma2: f64,
    pub alpha: f64,
    pub tau: f64,
    pub psi: String,
    pub procedures: Vec<ProcedureSpec>,
    pub reps: usize,
    pub seed: u64,
    pub mu_mapping: MuMapping,
    pub loo_var_mode: String,
    pub nodes: usize,
}

/// The seven-method comparison.
pub const STUDY_PROCEDURES: &[&str] = &[
    "bh",
    "w-bh",
    "w-max-storey",
    "w-loo-storey",
    "w-loo-storey+",
    "loo-var+",
    "loo-var/storey+",
];

impl Default for StudyConfig {
    fn default() -> Self {
        StudyConfig::desk()
    }
}

impl StudyConfig {
    /// Desk scale: `K = 50`, `K1 ∈ {2, 5, 25}`, 2,000 replications.
    pub fn desk() -> Self {
        StudyConfig {
            k: 50,
            n_values: vec![2, 5, 20],
            k1_values: vec![2, 5, 25],
            xi_values: (0..7).map(|i| 2.0 + i as f64).collect(),
            sigma2: 1.0,
            alpha: 0.1,
            tau: 0.5,
            psi: "pow4".into(),
            procedures: STUDY_PROCEDURES.iter().map(|id| ProcedureSpec::new(*id)).collect(),
            reps: 2000,
            seed: 0,
            mu_mapping: MuMapping::default(),
            loo_var_mode: "derandomized".into(),
            nodes: DEFAULT_NODES,
        }
    }

    /// Full scale: `K = 200`, `K1 ∈ {2, 5, 100}`, 10,000 replications.
    pub fn full_scale() -> Self {
        StudyConfig {
            k: 200,
            k1_values: vec![2, 5, 100],
            reps: 10_000,
            ..StudyConfig::desk()
        }
    }

    pub fn validate(&self) -> Result<()> {
        crate::error::check_open_unit("alpha", self.alpha)?;
        crate::error::check_open_unit("tau", self.tau)?;
        if self.reps == 0 {
            return Err(Error::validation("reps must be at least 1"));
        }
        if self.n_values.is_empty() || self.k1_values.is_empty() || self.xi_values.is_empty() {
            return Err(Error::validation("n, K1 and xi lists must be nonempty"));
        }
        if self.procedures.is_empty() {
            return Err(Error::validation("procedures list is empty"));
        }
        for cell in self.cells() {
            cell.validate()?;
        }
        self.resolved_procedures().map(|_| ())
    }

    /// Scenario cells in `n`, then `K1`, then `ξ` order. Each cell gets its
    /// own derived seed.
    pub fn cells(&self) -> Vec<ScenarioConfig> {
        let mut out = Vec::new();
        for &n in &self.n_values {
            for &k1 in &self.k1_values {
                for &xi in &self.xi_values {
                    let index = out.len() as u64;
                    out.push(ScenarioConfig {
                        k: self.k,
                        n,
                        k1,
                        xi,
                        sigma2: self.sigma2,
                        mu_mapping: self.mu_mapping,
                        seed: stream_key(self.seed, Domain::Other, index, 0),
                    });
                }
            }
        }
        out
    }

    /// The configured procedures with study-wide `tau`, `psi`, `mode` and
    /// `nodes` filled in wherever the procedure does not set them.
    pub fn resolved_procedures(&self) -> Result<Vec<Procedure>> {
        self.procedures
            .iter()
            .map(|spec| {
                let mut spec = spec.clone();
                let defaults = [
                    ("tau", self.tau.to_string()),
                    ("psi", self.psi.clone()),
                    ("nodes", self.nodes.to_string()),
                ];
                for (key, value) in defaults {
                    spec.params.entry(key.into()).or_insert(value);
                }
                if spec.id == "loo-var+" {
                    spec.params
                        .entry("mode".into())
                        .or_insert(self.loo_var_mode.clone());
                } else if spec.id == "loo-var/storey+" {
                    spec.params
                        .entry("a.mode".into())
                        .or_insert(self.loo_var_mode.clone());
                }
                Procedure::from_spec(&spec)
            })
            .collect()
    }

    /// Parses the flat `key = value` config format. Keys not present keep
    /// their desk-scale defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = StudyConfig::desk();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::validation(format!("config line {}: expected `key = value`", lineno + 1))
            })?;
            cfg.set(key.trim(), value.trim())
                .map_err(|e| Error::validation(format!("config line {}: {e}", lineno + 1)))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: FromStr>(key: &str, v: &str) -> Result<T> {
            v.trim()
                .parse()
                .map_err(|_| Error::validation(format!("field `{key}`: cannot parse `{v}`")))
        }
        fn list<T: FromStr>(key: &str, v: &str) -> Result<Vec<T>> {
            v.split(',').map(|x| num(key, x)).collect()
        }
        match key {
            "K" | "k" => self.k = num(key, value)?,
            "n" => self.n_values = list(key, value)?,
            "K1" | "k1" => self.k1_values = list(key, value)?,
            "xi" => self.xi_values = list(key, value)?,
            "sigma2" => self.sigma2 = num(key, value)?,
            "alpha" => self.alpha = num(key, value)?,
            "tau" => self.tau = num(key, value)?,
            "psi" => self.psi = value.to_string(),
            "reps" => self.reps = num(key, value)?,
            "seed" => self.seed = num(key, value)?,
            "mu_mapping" => self.mu_mapping = value.parse()?,
            "loo_var_mode" => self.loo_var_mode = value.to_string(),
            "nodes" => self.nodes = num(key, value)?,
            "procedures" => {
                self.procedures = value
                    .split(';')
                    .filter(|s| !s.trim().is_empty())
                    .map(|s| s.trim().parse())
                    .collect::<Result<_>>()?
            }
            other => {
                return Err(Error::validation(format!(
                    "unknown field `{other}` (expected K, n, K1, xi, sigma2, alpha, tau, psi, procedures, reps, seed, mu_mapping, loo_var_mode, nodes)"
                )))
            }
        }
        Ok(())
    }

    /// The config in the same flat format accepted by [`StudyConfig::parse`].
    pub fn to_text(&self) -> String {
        let join = |v: Vec<String>, sep: &str| v.join(sep);
        let mut s = String::new();
        s += &format!("K = {}\n", self.k);
        s += &format!("n = {}\n", join(self.n_values.iter().map(|x| x.to_string()).collect(), ", "));
        s += &format!("K1 = {}\n", join(self.k1_values.iter().map(|x| x.to_string()).collect(), ", "));
        s += &format!("xi = {}\n", join(self.xi_values.iter().map(|x| x.to_string()).collect(), ", "));
        s += &format!("sigma2 = {}\n", self.sigma2);
        s += &format!("alpha = {}\n", self.alpha);
        s += &format!("tau = {}\n", self.tau);
        s += &format!("psi = {}\n", self.psi);
        s += &format!(
            "procedures = {}\n",
            join(self.procedures.iter().map(|p| p.to_string()).collect(), "; ")
        );
        s += &format!("reps = {}\n", self.reps);
        s += &format!("seed = {}\n", self.seed);
        s += &format!("mu_mapping = {}\n", self.mu_mapping);
        s += &format!("loo_var_mode = {}\n", self.loo_var_mode);
        s += &format!("nodes = {}\n", self.nodes);
        s
    }
}

/// One output row of a study.
#[derive(Debug, Clone, PartialEq)]
pub struct StudyRow {
    pub scenario_id: String,
    pub n: usize,
    pub k1: usize,
    pub xi: f64,
    pub stats: ProcedureStats,
}

/// Runs every cell of the study. Rows are ordered by cell, then procedure.
pub fn run_study(config: &StudyConfig) -> Result<Vec<StudyRow>> {
    config.validate()?;
    let procedures = config.resolved_procedures()?;
    let mut rows = Vec::new();
    for cell in config.cells() {
        let result = run_scenario(&cell, &procedures, config.alpha, config.reps, false)?;
        let scenario_id = format!("K{}_n{}_K1{}_xi{}", cell.k, cell.n, cell.k1, cell.xi);
        for stats in result.stats {
            rows.push(StudyRow {
                scenario_id: scenario_id.clone(),
                n: cell.n,
                k1: cell.k1,
                xi: cell.xi,
                stats,
            });
        }
    }
    Ok(rows)
}

/// Outcome of a compound e-value audit: the Monte Carlo mean of
/// `Σ_{k null} E_k` against a bound.
#[derive(Debug, Clone, PartialEq)]
pub struct AuditReport {
    pub name: String,
    pub reps: usize,
    pub mean: f64,
    pub se: f64,
    pub bound: f64,
}

impl AuditReport {
    /// `mean <= bound + 3 SE`.
    pub fn pass(&self) -> bool {
        self.mean <= self.bound + 3.0 * self.se
    }

    pub fn with_bound(mut self, bound: f64) -> Self {
        self.bound = bound;
        self
    }
}

impl fmt::Display for AuditReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}: mean {:.4} (SE {:.4}) vs bound {:.4} over {} reps: {}",
            self.name,
            self.mean,
            self.se,
            self.bound,
            self.reps,
            if self.pass() { "pass" } else { "FAIL" }
        )
    }
}

fn null_sum(e: &EValues, truth: &[bool]) -> f64 {
    e.sum_over(truth.iter().enumerate().filter(|(_, &t)| !t).map(|(i, _)| i))
}

/// Audits an arbitrary constructor. `draw(rep)` returns the e-values and
/// truth mask of replication `rep`; the bound is the number of nulls of the
/// first replication.
pub fn audit_with<F>(name: &str, reps: usize, draw: F) -> Result<AuditReport>
where
    F: Fn(u64) -> Result<(EValues, Vec<bool>)> + Sync,
{
    if reps == 0 {
        return Err(Error::validation("reps must be at least 1"));
    }
    let per_rep: Vec<(f64, usize)> = (0..reps as u64)
        .into_par_iter()
        .map(|rep| {
            let (e, truth) = draw(rep)?;
            Ok((null_sum(&e, &truth), truth.iter().filter(|&&t| !t).count()))
        })
        .collect::<Result<_>>()?;
    let sums: Vec<f64> = per_rep.iter().map(|x| x.0).collect();
    let (mean, se) = mean_and_se(&sums);
    Ok(AuditReport {
        name: name.to_string(),
        reps,
        mean,
        se,
        bound: per_rep[0].1 as f64,
    })
}

/// Audits several procedures on shared t-test data from `scenario`.
pub fn audit_many(
    procedures: &[Procedure],
    scenario: &ScenarioConfig,
    alpha: f64,
    reps: usize,
) -> Result<Vec<AuditReport>> {
    scenario.validate()?;
    if reps == 0 {
        return Err(Error::validation("reps must be at least 1"));
    }
    let nulls = (scenario.k - scenario.k1) as f64;
    let per_rep: Vec<Vec<f64>> = (0..reps as u64)
        .into_par_iter()
        .map(|rep| {
            let (data, truth) = generate(scenario, rep)?;
            let summary = summarize(&data)?;
            let inputs = Inputs::new(&summary.p)
                .with_summary(&summary)
                .with_stream(scenario.seed, rep);
            procedures
                .iter()
                .map(|proc| Ok(null_sum(&proc.evalues(&inputs, alpha)?, &truth)))
                .collect()
        })
        .collect::<Result<_>>()?;
    Ok(procedures
        .iter()
        .enumerate()
        .map(|(j, proc)| {
            let sums: Vec<f64> = per_rep.iter().map(|r| r[j]).collect();
            let (mean, se) = mean_and_se(&sums);
            AuditReport {
                name: proc.spec().to_string(),
                reps,
                mean,
                se,
                bound: nulls,
            }
        })
        .collect())
}

/// Audits one procedure against `Σ_{k null} E[E_k] <= #nulls`.
pub fn audit_compound(
    procedure: &ProcedureSpec,
    scenario: &ScenarioConfig,
    alpha: f64,
    reps: usize,
) -> Result<AuditReport> {
    let proc = Procedure::from_spec(procedure)?;
    Ok(audit_many(&[proc], scenario, alpha, reps)?.remove(0))
}

/// Convenience: uniform null p-values for replication `rep`.
pub fn uniform_null_p(seed: u64, rep: u64, k: usize) -> PValues {
    let mut rng = stream_rng(seed, Domain::Data, rep, 0);
    PValues::new((0..k).map(|_| rng.random::<f64>()).collect()).expect("uniform draws lie in [0, 1)")
}

/// Convenience: t-test summary of the null scenario for replication `rep`.
pub fn null_summary(k: usize, n: usize, seed: u64, rep: u64) -> Result<TTestSummary> {
    let (data, _) = generate(&ScenarioConfig::global_null(k, n, seed), rep)?;
    summarize(&data)
}

/// Discovery counts of a two-hypothesis procedure over cell centers of a
/// regular grid on `[0, 1]²`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegionGrid {
    size: usize,
    /// `counts[i * size + j]` is the count at `(P1, P2) = (c_i, c_j)`.
    counts: Vec<u8>,
}

impl RegionGrid {
    pub fn size(&self) -> usize {
        self.size
    }

    pub fn resolution(&self) -> f64 {
        1.0 / self.size as f64
    }

    pub fn center(&self, i: usize) -> f64 {
        (i as f64 + 0.5) / self.size as f64
    }

    pub fn count(&self, i: usize, j: usize) -> u8 {
        self.counts[i * self.size + j]
    }

    /// Count at the cell containing `(p1, p2)`.
    pub fn count_at(&self, p1: f64, p2: f64) -> u8 {
        let idx = |p: f64| ((p * self.size as f64).floor() as usize).min(self.size - 1);
        self.count(idx(p1), idx(p2))
    }

    /// `(P1, P2, count)` for every cell, `P1` outer.
    pub fn cells(&self) -> impl Iterator<Item = (f64, f64, u8)> + '_ {
        (0..self.size).flat_map(move |i| (0..self.size).map(move |j| (self.center(i), self.center(j), self.count(i, j))))
    }

    /// Whether every cell count is at least the other grid's.
    pub fn dominates(&self, other: &RegionGrid) -> bool {
        self.size == other.size && self.counts.iter().zip(&other.counts).all(|(a, b)| a >= b)
    }
}

/// Evaluates a two-hypothesis procedure at every cell center.
pub fn region_grid(procedure: &Procedure, alpha: f64, resolution: f64) -> Result<RegionGrid> {
    if procedure.needs_side_information() {
        return Err(Error::validation(format!(
            "`{}` needs side information and cannot be drawn as a p-value region",
            procedure.id()
        )));
    }
    if !(resolution > 0.0 && resolution <= 1.0) {
        return Err(Error::domain(format!("resolution must lie in (0, 1], got {resolution}")));
    }
    let size = (1.0 / resolution).round() as usize;
    if (size as f64 * resolution - 1.0).abs() > 1e-9 {
        return Err(Error::domain(format!("resolution {resolution} does not divide 1 evenly")));
    }
    let rows: Vec<Vec<u8>> = (0..size)
        .into_par_iter()
        .map(|i| {
            let p1 = (i as f64 + 0.5) / size as f64;
            (0..size)
                .map(|j| {
                    let p2 = (j as f64 + 0.5) / size as f64;
                    let p = PValues::new(vec![p1, p2])?;
                    let (_, r) = procedure.reject(&Inputs::new(&p), alpha)?;
                    Ok(r.len() as u8)
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    Ok(RegionGrid {
        size,
        counts: rows.into_iter().flatten().collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generation_is_deterministic_and_labelled() {
        let cfg = ScenarioConfig {
            k: 10,
            n: 3,
            k1: 4,
            xi: 3.0,
            sigma2: 1.0,
            mu_mapping: MuMapping::TStat,
            seed: 9,
        };
        let (a, ta) = generate(&cfg, 5).unwrap();
        let (b, tb) = generate(&cfg, 5).unwrap();
        assert_eq!(a, b);
        assert_eq!(ta, tb);
        assert_eq!(ta.iter().filter(|&&t| t).count(), 4);
        let (c, _) = generate(&cfg, 6).unwrap();
        assert_ne!(a, c);
        assert!(generate(&ScenarioConfig { k1: 11, ..cfg.clone() }, 0).is_err());
        assert!(generate(&ScenarioConfig { n: 1, ..cfg }, 0).is_err());
    }

    #[test]
    fn mu_mappings() {
        assert!((MuMapping::TStat.mu(2.0, 1.0, 4) - 1.0).abs() < 1e-15);
        assert!((MuMapping::Paper.mu(2.0, 1.0, 4) - 4.0).abs() < 1e-15);
        assert_eq!("paper".parse::<MuMapping>().unwrap(), MuMapping::Paper);
        assert!("other".parse::<MuMapping>().is_err());
    }

    #[test]
    fn global_null_fdr_sanity() {
        let cfg = ScenarioConfig::global_null(20, 5, 3);
        let procs: Vec<Procedure> = ["bh", "storey+", "w-loo-storey+", "loo-var+"]
            .iter()
            .map(|s| Procedure::parse(s).unwrap())
            .collect();
        let result = run_scenario(&cfg, &procs, 0.1, 2000, false).unwrap();
        for s in &result.stats {
            assert!(s.fdr <= 0.1 + 3.0 * s.fdr_se, "{}: {}", s.procedure, s.fdr);
            assert_eq!(s.power, 0.0);
        }
    }

    #[test]
    fn scenario_results_are_reproducible() {
        let cfg = ScenarioConfig {
            k: 20,
            n: 5,
            k1: 5,
            xi: 4.0,
            sigma2: 1.0,
            mu_mapping: MuMapping::TStat,
            seed: 1,
        };
        let procs = vec![Procedure::parse("loo-var+:mode=randomized").unwrap(), Procedure::parse("w-bh").unwrap()];
        let a = run_scenario(&cfg, &procs, 0.1, 300, true).unwrap();
        let b = run_scenario(&cfg, &procs, 0.1, 300, true).unwrap();
        assert_eq!(a.stats, b.stats);
        assert_eq!(a.records, b.records);
        assert!(a.stats[0].power > 0.0);
    }

    #[test]
    fn negative_control_audit_fails() {
        let k = 20;
        let report = audit_with("broken", 2000, |rep| {
            let _ = uniform_null_p(0, rep, k);
            Ok((EValues::constant(k, k as f64)?, vec![false; k]))
        })
        .unwrap();
        assert!((report.mean - (k * k) as f64).abs() < 1e-9);
        assert!(!report.pass());

        let report = audit_compound(&ProcedureSpec::new("storey"), &ScenarioConfig::global_null(k, 5, 0), 0.1, 5000).unwrap();
        assert!(report.pass(), "{report}");
        assert_eq!(report.bound, k as f64);
    }

    #[test]
    fn region_grid_examples() {
        let storey = Procedure::parse("storey:tau=0.3").unwrap();
        let plus = Procedure::parse("storey+:tau=0.3").unwrap();
        let coarse = region_grid(&storey, 0.4, 0.25).unwrap();
        assert_eq!(coarse.cells().count(), 16);
        assert!(coarse.cells().all(|(_, _, c)| c <= 2));
        assert!(region_grid(&storey, 0.4, 0.3).is_err());
        assert!(region_grid(&Procedure::parse("w-bh").unwrap(), 0.4, 0.25).is_err());

        let a = region_grid(&storey, 0.4, 0.05).unwrap();
        let b = region_grid(&plus, 0.4, 0.05).unwrap();
        assert!(b.dominates(&a));
        assert_eq!(a.count_at(0.05, 0.35), 1);
        assert_eq!(b.count_at(0.05, 0.35), 2);
    }

    #[test]
    fn config_round_trip_and_errors() {
        let cfg = StudyConfig::desk();
        let parsed = StudyConfig::parse(&cfg.to_text()).unwrap();
        assert_eq!(parsed, cfg);
        let text = "K = 30 # fewer\nn = 2, 5\nprocedures = bh; loo-var+:mode=randomized\nmu_mapping = paper\n";
        let parsed = StudyConfig::parse(text).unwrap();
        assert_eq!(parsed.k, 30);
        assert_eq!(parsed.n_values, vec![2, 5]);
        assert_eq!(parsed.procedures.len(), 2);
        assert_eq!(parsed.mu_mapping, MuMapping::Paper);

        let err = StudyConfig::parse("kay = 3").unwrap_err().to_string();
        assert!(err.contains("kay"), "{err}");
        let err = StudyConfig::parse("alpha = high").unwrap_err().to_string();
        assert!(err.contains("alpha"), "{err}");
        assert!(StudyConfig::parse("procedures = nope").is_err());
        assert!(StudyConfig::parse("K1 = 60").is_err());
    }

    #[test]
    fn small_study_runs() {
        let cfg = StudyConfig {
            k: 20,
            n_values: vec![3],
            k1_values: vec![4],
            xi_values: vec![3.0, 5.0],
            reps: 100,
            ..StudyConfig::desk()
        };
        let rows = run_study(&cfg).unwrap();
        assert_eq!(rows.len(), 2 * STUDY_PROCEDURES.len());
        assert_eq!(rows, run_study(&cfg).unwrap());
        for r in &rows {
            assert!((0.0..=1.0).contains(&r.stats.power));
            assert!((0.0..=1.0).contains(&r.stats.fdr));
        }
    }
}
