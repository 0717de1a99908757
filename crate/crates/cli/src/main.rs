//! `epbh` command-line tool.

mod error;
mod input;

use std::fs::File;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use epbh::engine::{quotient, q_values};
use epbh::sim::{self, MuMapping, ScenarioConfig, StudyConfig};
use epbh::ttest::{summarize, TTestDataset};
use epbh::{EValues, Inputs, PValues, Procedure, ProcedureSpec, Rejections, Weights};

use crate::error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(name = "epbh", version, about = "Multiple testing with compound e-values and ep-BH")]
struct Cli {
    /// Seed for every random stream. Defaults to 0.
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct ProcedureArgs {
    /// Procedure id, optionally with inline parameters (`storey+:tau=0.5`).
    #[arg(long, short = 'p')]
    procedure: String,

    /// Extra procedure parameter as key=value. Repeatable.
    #[arg(long = "param", value_name = "KEY=VALUE")]
    params: Vec<String>,
}

impl ProcedureArgs {
    fn spec(&self) -> CliResult<ProcedureSpec> {
        let mut spec: ProcedureSpec = self.procedure.parse()?;
        for pair in &self.params {
            spec.push_param(pair).map_err(|e| CliError::Usage(e.to_string()))?;
        }
        Ok(spec)
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a procedure on a CSV of p-values.
    Reject {
        /// CSV with a `pvalue` column and an optional `weight` column.
        input: PathBuf,
        #[command(flatten)]
        procedure: ProcedureArgs,
        #[arg(long, default_value_t = 0.1)]
        alpha: f64,
        /// Output CSV; standard output when absent.
        #[arg(long, short = 'o')]
        output: Option<PathBuf>,
    },
    /// One-sample t-tests on a headerless K x n replicate matrix, then a procedure.
    Ttest {
        input: PathBuf,
        #[command(flatten)]
        procedure: ProcedureArgs,
        #[arg(long, default_value_t = 0.1)]
        alpha: f64,
        #[arg(long, short = 'o')]
        output: Option<PathBuf>,
    },
    /// Run the simulation study.
    Simulate {
        /// Config file; the desk-scale defaults are used when absent.
        #[arg(long, short = 'c')]
        config: Option<PathBuf>,
        /// Start from the full-scale defaults instead of desk scale.
        #[arg(long)]
        full_scale: bool,
        #[arg(long)]
        reps: Option<usize>,
        #[arg(long)]
        alpha: Option<f64>,
        /// `tstat` (mu = xi*sigma/sqrt(n)) or `paper` (mu = xi*sigma*sqrt(n)).
        #[arg(long)]
        mu_mapping: Option<MuMapping>,
        #[arg(long, short = 'o')]
        output: Option<PathBuf>,
        /// Print the effective config and exit.
        #[arg(long)]
        print_config: bool,
    },
    /// Discovery counts of a procedure on a grid over (P1, P2).
    Region {
        #[command(flatten)]
        procedure: ProcedureArgs,
        #[arg(long, default_value_t = 0.1)]
        alpha: f64,
        #[arg(long, default_value_t = 0.005)]
        resolution: f64,
        #[arg(long, short = 'o')]
        output: Option<PathBuf>,
    },
    /// Monte Carlo audit of the compound e-value property under a t-test null.
    Audit {
        #[command(flatten)]
        procedure: ProcedureArgs,
        #[arg(long, default_value_t = 0.1)]
        alpha: f64,
        /// Number of hypotheses.
        #[arg(long = "k", default_value_t = 20)]
        k: usize,
        /// Replicates per hypothesis.
        #[arg(long, default_value_t = 5)]
        n: usize,
        /// Number of non-null hypotheses.
        #[arg(long = "k1", default_value_t = 0)]
        k1: usize,
        #[arg(long, default_value_t = 4.0)]
        xi: f64,
        #[arg(long, default_value_t = 100_000)]
        reps: usize,
        #[arg(long, default_value = "tstat")]
        mu_mapping: MuMapping,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("epbh: {e}");
            e.exit_code()
        }
    }
}

fn run(cli: Cli) -> CliResult<ExitCode> {
    let seed = cli.seed;
    match cli.command {
        Command::Reject {
            input,
            procedure,
            alpha,
            output,
        } => cmd_reject(&input, &procedure, alpha, seed.unwrap_or(0), output.as_deref()),
        Command::Ttest {
            input,
            procedure,
            alpha,
            output,
        } => cmd_ttest(&input, &procedure, alpha, seed.unwrap_or(0), output.as_deref()),
        Command::Simulate {
            config,
            full_scale,
            reps,
            alpha,
            mu_mapping,
            output,
            print_config,
        } => {
            let mut cfg = match (&config, full_scale) {
                (Some(path), _) => {
                    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
                        path: path.display().to_string(),
                        source,
                    })?;
                    let mut cfg = StudyConfig::parse(&text).map_err(|e| CliError::Usage(e.to_string()))?;
                    if full_scale {
                        let full = StudyConfig::full_scale();
                        cfg.k = full.k;
                        cfg.k1_values = full.k1_values;
                        cfg.reps = full.reps;
                    }
                    cfg
                }
                (None, true) => StudyConfig::full_scale(),
                (None, false) => StudyConfig::desk(),
            };
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(r) = reps {
                cfg.reps = r;
            }
            if let Some(a) = alpha {
                cfg.alpha = a;
            }
            if let Some(m) = mu_mapping {
                cfg.mu_mapping = m;
            }
            if print_config {
                print!("{}", cfg.to_text());
                return Ok(ExitCode::SUCCESS);
            }
            cmd_simulate(&cfg, output.as_deref())
        }
        Command::Region {
            procedure,
            alpha,
            resolution,
            output,
        } => cmd_region(&procedure, alpha, resolution, output.as_deref()),
        Command::Audit {
            procedure,
            alpha,
            k,
            n,
            k1,
            xi,
            reps,
            mu_mapping,
        } => {
            let scenario = ScenarioConfig {
                k1,
                xi,
                mu_mapping,
                ..ScenarioConfig::global_null(k, n, seed.unwrap_or(0))
            };
            cmd_audit(&procedure, &scenario, alpha, reps)
        }
    }
}

/// Opens the CSV sink. Summary lines go to stdout when the table goes to a
/// file and to stderr otherwise, so piping the table stays clean.
fn sink(output: Option<&Path>) -> CliResult<(csv::Writer<Box<dyn Write>>, Box<dyn Write>)> {
    match output {
        Some(path) => {
            let file = File::create(path).map_err(|source| CliError::Io {
                path: path.display().to_string(),
                source,
            })?;
            Ok((csv::Writer::from_writer(Box::new(file)), Box::new(io::stdout())))
        }
        None => Ok((csv::Writer::from_writer(Box::new(io::stdout())), Box::new(io::stderr()))),
    }
}

fn finish(mut writer: csv::Writer<Box<dyn Write>>) -> CliResult<()> {
    writer.flush().map_err(|source| CliError::Io {
        path: "output".into(),
        source,
    })
}

/// Splits a CLI-only `weights_path` parameter off the spec.
fn take_weights_path(spec: &mut ProcedureSpec) -> Option<PathBuf> {
    spec.params.remove("weights_path").map(PathBuf::from)
}

fn build_procedure(spec: &ProcedureSpec) -> CliResult<Procedure> {
    Procedure::from_spec(spec).map_err(|e| match e {
        epbh::Error::UnknownProcedure { .. } => CliError::Core(e),
        other => CliError::Usage(format!("procedure `{spec}`: {other}")),
    })
}

fn report(
    summary: &mut dyn Write,
    procedure: &ProcedureSpec,
    alpha: f64,
    rejections: &Rejections,
) -> CliResult<()> {
    writeln!(
        summary,
        "procedure {procedure} at alpha {alpha}: k* = {}, rejected = {}",
        rejections.k_star,
        rejections.len()
    )
    .map_err(|source| CliError::Io {
        path: "summary".into(),
        source,
    })
}

fn cmd_reject(
    input: &Path,
    args: &ProcedureArgs,
    alpha: f64,
    seed: u64,
    output: Option<&Path>,
) -> CliResult<ExitCode> {
    let mut spec = args.spec()?;
    let weights_path = take_weights_path(&mut spec);
    let procedure = build_procedure(&spec)?;
    let table = input::read_pvalues(input)?;
    let raw_weights = match weights_path {
        Some(path) => Some(input::read_weights(&path)?),
        None => table.weights.clone(),
    };
    let weights = raw_weights
        .map(|w| {
            if w.len() != table.pvalues.len() {
                return Err(CliError::Data(format!(
                    "{} weights for {} p-values",
                    w.len(),
                    table.pvalues.len()
                )));
            }
            Ok(Weights::normalized(w)?)
        })
        .transpose()?;
    if procedure.needs_side_information() && weights.is_none() {
        return Err(CliError::Usage(format!(
            "procedure `{}` needs weights: add a `weight` column or a weights_path parameter",
            procedure.id()
        )));
    }
    let p = PValues::new(table.pvalues)?;
    let mut inputs = Inputs::new(&p).with_stream(seed, 0);
    if let Some(w) = &weights {
        inputs = inputs.with_weights(w);
    }
    let (e, rejections) = procedure.reject(&inputs, alpha)?;
    let q = q_values(&p, &e)?;
    let (mut writer, mut summary) = sink(output)?;
    writer.write_record(["index", "pvalue", "e_value", "q_value", "rejected"])?;
    for (i, ((pv, ev), qv)) in p.as_slice().iter().zip(e.as_slice()).zip(&q).enumerate() {
        writer.write_record([
            (i + 1).to_string(),
            pv.to_string(),
            ev.to_string(),
            qv.to_string(),
            u8::from(rejections.contains(i)).to_string(),
        ])?;
    }
    finish(writer)?;
    report(summary.as_mut(), procedure.spec(), alpha, &rejections)?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_ttest(
    input: &Path,
    args: &ProcedureArgs,
    alpha: f64,
    seed: u64,
    output: Option<&Path>,
) -> CliResult<ExitCode> {
    let spec = args.spec()?;
    let procedure = build_procedure(&spec)?;
    let rows = input::read_replicates(input)?;
    let data = TTestDataset::from_rows(rows)?;
    let summary_stats = summarize(&data)?;
    let inputs = Inputs::new(&summary_stats.p)
        .with_summary(&summary_stats)
        .with_stream(seed, 0);
    let (e, rejections): (EValues, Rejections) = procedure.reject(&inputs, alpha)?;
    let (mut writer, mut summary) = sink(output)?;
    writer.write_record([
        "index", "mu_hat", "sigma2_hat", "t", "pvalue", "s2", "e_value", "q_value", "rejected",
    ])?;
    for i in 0..summary_stats.k() {
        let p = summary_stats.p.as_slice()[i];
        let ev = e.as_slice()[i];
        writer.write_record([
            (i + 1).to_string(),
            summary_stats.mu_hat[i].to_string(),
            summary_stats.sigma2_hat[i].to_string(),
            summary_stats.t[i].to_string(),
            p.to_string(),
            summary_stats.s2[i].to_string(),
            ev.to_string(),
            quotient(p, ev).to_string(),
            u8::from(rejections.contains(i)).to_string(),
        ])?;
    }
    finish(writer)?;
    report(summary.as_mut(), procedure.spec(), alpha, &rejections)?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_simulate(cfg: &StudyConfig, output: Option<&Path>) -> CliResult<ExitCode> {
    cfg.validate().map_err(|e| match e {
        epbh::Error::UnknownProcedure { .. } => CliError::Core(e),
        other => CliError::Usage(format!("config: {other}")),
    })?;
    log::info!("running {} cells x {} reps", cfg.cells().len(), cfg.reps);
    let rows = sim::run_study(cfg)?;
    let (mut writer, _) = sink(output)?;
    writer.write_record([
        "scenario_id", "procedure", "n", "K1", "xi", "power", "power_se", "fdr", "fdr_se", "reps",
    ])?;
    for row in &rows {
        let s = &row.stats;
        writer.write_record([
            row.scenario_id.clone(),
            s.procedure.clone(),
            row.n.to_string(),
            row.k1.to_string(),
            row.xi.to_string(),
            s.power.to_string(),
            s.power_se.to_string(),
            s.fdr.to_string(),
            s.fdr_se.to_string(),
            s.reps.to_string(),
        ])?;
    }
    finish(writer)?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_region(args: &ProcedureArgs, alpha: f64, resolution: f64, output: Option<&Path>) -> CliResult<ExitCode> {
    let spec = args.spec()?;
    let procedure = build_procedure(&spec)?;
    let grid = sim::region_grid(&procedure, alpha, resolution).map_err(|e| match e {
        epbh::Error::Numerical(_) => CliError::Core(e),
        other => CliError::Usage(other.to_string()),
    })?;
    let (mut writer, _) = sink(output)?;
    writer.write_record(["p1", "p2", "count"])?;
    for (p1, p2, count) in grid.cells() {
        writer.write_record([p1.to_string(), p2.to_string(), count.to_string()])?;
    }
    finish(writer)?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_audit(args: &ProcedureArgs, scenario: &ScenarioConfig, alpha: f64, reps: usize) -> CliResult<ExitCode> {
    let spec = args.spec()?;
    build_procedure(&spec)?;
    scenario.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let report = sim::audit_compound(&spec, scenario, alpha, reps)?;
    println!("{report}");
    Ok(if report.pass() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}
