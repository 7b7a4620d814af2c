//! `roprg`: audits, per-step checks and full-generator sweeps.
//!
//! Every subcommand writes CSV to `--out` (or stdout) and, with `--out`, a
//! JSON sidecar next to it. Exit status is 0 when every check passed, 1 when
//! some check failed and 2 on errors.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use roprg_core::fourier::{decompose_prefix_heavy, decomposition_error};
use roprg_core::harness::{
    level_k_damping_check, run_experiment, single_step_error, ExperimentConfig, GeneratorConfig, MeasurementMode,
    OrderPolicy, ProgramSource, Report,
};
use roprg_core::primitives::{audit_kwise, max_bias, DEFAULT_BUDGET_BITS};
use roprg_core::{
    BranchingProgram, DistributionDescriptor, EnumerationBudget, MassBoundMode, StepParams, Variant,
};

/// Tolerance for floating-point identities and inequalities.
const TOL: f64 = 1e-9;

#[derive(Parser)]
#[command(name = "roprg", version, about = "Pseudorandom generators for read-once branching programs in any order")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Exact audits of the k-wise, small-bias and almost k-wise spaces.
    AuditPrimitives(AuditArgs),
    /// Exact error of one noise step `D ⊕ (T ∧ U)`.
    SingleStep(StepArgs),
    /// Fooling error of the full generator over programs and orders.
    Fool(FoolArgs),
    /// Pointwise check of the prefix-heavy decomposition.
    Prop1Check(DecompArgs),
    /// Level-k damping inequality on the decomposition's heavy parts.
    LemmaCheck(StepArgs),
    /// Run an experiment config file.
    Report(ReportArgs),
}

#[derive(Args)]
struct Output {
    /// CSV path; a JSON sidecar is written next to it.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct Programs {
    #[arg(long, default_value_t = 6)]
    n: usize,
    #[arg(long, default_value_t = 2)]
    w: usize,
    /// Number of random programs.
    #[arg(long, default_value_t = 1)]
    count: usize,
    #[arg(long = "rng-seed", default_value_t = 0)]
    rng_seed: u64,
    /// Program files; replaces the random programs.
    #[arg(long, conflicts_with = "formula")]
    program: Vec<PathBuf>,
    /// File of read-once formulas, one per line.
    #[arg(long)]
    formula: Option<PathBuf>,
}

impl Programs {
    fn source(&self) -> ProgramSource {
        if !self.program.is_empty() {
            ProgramSource::File {
                paths: self.program.clone(),
            }
        } else if let Some(path) = &self.formula {
            ProgramSource::Formula { path: path.clone() }
        } else {
            ProgramSource::Random {
                n: self.n,
                w: self.w,
                count: self.count,
                rng_seed: self.rng_seed,
            }
        }
    }

    fn load(&self) -> Result<Vec<BranchingProgram>> {
        Ok(self.source().load()?)
    }
}

#[derive(Args)]
struct AuditArgs {
    #[arg(long, default_value_t = 8)]
    n: usize,
    /// Audit the k-wise space.
    #[arg(long)]
    k: Option<usize>,
    /// Audit the δ-biased space.
    #[arg(long)]
    delta: Option<f64>,
    /// Audit the γ-almost k-wise space (needs `--k`).
    #[arg(long, requires = "k")]
    gamma: Option<f64>,
    #[arg(long = "budget-bits", default_value_t = DEFAULT_BUDGET_BITS)]
    budget_bits: u32,
    #[command(flatten)]
    output: Output,
}

#[derive(Args)]
struct StepArgs {
    #[command(flatten)]
    programs: Programs,
    #[arg(long, default_value_t = 2)]
    k: usize,
    #[arg(long, default_value_t = Variant::Exact)]
    variant: Variant,
    #[arg(long, required_if_eq("variant", "star"))]
    delta: Option<f64>,
    #[arg(long, required_if_eq("variant", "star"))]
    gamma: Option<f64>,
    /// `trivial`, `chrt` or `chrt(c)`.
    #[arg(long, default_value_t = MassBoundMode::Trivial)]
    mass: MassBoundMode,
    #[arg(long = "budget-bits", default_value_t = DEFAULT_BUDGET_BITS)]
    budget_bits: u32,
    #[command(flatten)]
    output: Output,
}

impl StepArgs {
    fn step(&self) -> StepParams {
        match self.variant {
            Variant::Exact => StepParams::Exact { k: self.k },
            Variant::Star => StepParams::Star {
                delta: self.delta.expect("required by clap"),
                gamma: self.gamma.expect("required by clap"),
                k: self.k,
            },
        }
    }
}

#[derive(Args)]
struct FoolArgs {
    #[command(flatten)]
    programs: Programs,
    /// Override k; derived from (n, w) when absent.
    #[arg(long, requires = "r")]
    k: Option<usize>,
    #[arg(long, requires = "k")]
    r: Option<usize>,
    #[arg(long, default_value_t = Variant::Exact)]
    variant: Variant,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    /// Target error for derived star parameters.
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    mass: Option<MassBoundMode>,
    /// `identity`, `all`, or a number of sampled orders.
    #[arg(long, default_value = "identity")]
    orders: String,
    /// `exact-dp`, `exact-seeds` or `sampled`.
    #[arg(long, default_value = "exact-dp")]
    mode: String,
    #[arg(long, default_value_t = 100_000)]
    samples: u64,
    #[arg(long = "budget-bits", default_value_t = DEFAULT_BUDGET_BITS)]
    budget_bits: u32,
    #[command(flatten)]
    output: Output,
}

impl FoolArgs {
    fn config(&self) -> Result<ExperimentConfig> {
        let seed = self.programs.rng_seed;
        let orders = match self.orders.as_str() {
            "identity" => OrderPolicy::Identity,
            "all" => OrderPolicy::All,
            count => OrderPolicy::Sampled {
                count: count
                    .parse()
                    .with_context(|| format!("--orders expects identity, all or a count, got {count:?}"))?,
                rng_seed: seed,
            },
        };
        let mode = match self.mode.as_str() {
            "exact-dp" => MeasurementMode::ExactDp,
            "exact-seeds" => MeasurementMode::ExactSeeds,
            "sampled" => MeasurementMode::Sampled {
                samples: self.samples,
                rng_seed: seed,
            },
            other => bail!("--mode expects exact-dp, exact-seeds or sampled, got {other:?}"),
        };
        Ok(ExperimentConfig {
            programs: self.programs.source(),
            orders,
            generator: GeneratorConfig {
                variant: self.variant,
                k: self.k,
                r: self.r,
                delta: self.delta,
                gamma: self.gamma,
                epsilon: self.epsilon,
                mass: self.mass,
            },
            mode,
            budget_bits: self.budget_bits,
            out: self.output.out.clone(),
        })
    }
}

#[derive(Args)]
struct DecompArgs {
    #[command(flatten)]
    programs: Programs,
    /// Single k; every k in 1..=n when absent.
    #[arg(long)]
    k: Option<usize>,
    #[command(flatten)]
    output: Output,
}

#[derive(Args)]
struct ReportArgs {
    /// JSON experiment config.
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config's output path.
    #[command(flatten)]
    output: Output,
}

/// A CSV table with a pass flag.
struct Table {
    columns: &'static [&'static str],
    rows: Vec<Vec<String>>,
    passed: bool,
}

fn num(x: f64) -> String {
    format!("{x:e}")
}

fn sidecar_path(out: &Path) -> PathBuf {
    out.with_extension("json")
}

fn emit(table: &Table, output: &Output) -> Result<()> {
    let write = |sink: Box<dyn Write>| -> Result<()> {
        let mut wtr = csv::Writer::from_writer(sink);
        wtr.write_record(table.columns)?;
        for row in &table.rows {
            wtr.write_record(row)?;
        }
        wtr.flush()?;
        Ok(())
    };
    match &output.out {
        None => write(Box::new(std::io::stdout().lock())),
        Some(path) => {
            write(Box::new(std::fs::File::create(path).with_context(|| format!("creating {}", path.display()))?))?;
            let echo = serde_json::json!({
                "args": std::env::args().skip(1).collect::<Vec<_>>(),
                "columns": table.columns,
                "rows": table.rows.len(),
                "passed": table.passed,
            });
            std::fs::write(sidecar_path(path), serde_json::to_string_pretty(&echo)? + "\n")?;
            Ok(())
        }
    }
}

fn audit(args: &AuditArgs) -> Result<Table> {
    let budget = EnumerationBudget::new(args.budget_bits);
    let mut rows = Vec::new();
    let mut passed = true;
    let mut push = |desc: &DistributionDescriptor, check: &str, value: f64, target: f64| {
        let ok = value <= target;
        passed &= ok;
        rows.push(vec![desc.to_string(), check.to_string(), num(value), num(target), ok.to_string()]);
    };
    if let Some(k) = args.k {
        let d = DistributionDescriptor::kwise(args.n, k)?;
        push(&d, "kwise_deviation", audit_kwise(&d, k.min(args.n), budget)?, 0.0);
    }
    if let Some(delta) = args.delta {
        let d = DistributionDescriptor::small_bias(args.n, delta)?;
        push(&d, "max_bias", max_bias(&d, budget)?, delta);
    }
    if let (Some(k), Some(gamma)) = (args.k, args.gamma) {
        let d = DistributionDescriptor::almost_kwise(args.n, k, gamma)?;
        push(&d, "kwise_deviation", audit_kwise(&d, k.min(args.n), budget)?, gamma);
    }
    if rows.is_empty() {
        bail!("nothing to audit: give --k, --delta or --gamma");
    }
    Ok(Table {
        columns: &["descriptor", "check", "value", "target", "passed"],
        rows,
        passed,
    })
}

fn single_step(args: &StepArgs) -> Result<Table> {
    let budget = EnumerationBudget::new(args.budget_bits);
    let step = args.step();
    let results = args
        .programs
        .load()?
        .par_iter()
        .map(|bp| Ok((bp.n(), bp.w(), single_step_error(bp, step, args.mass, budget)?)))
        .collect::<Result<Vec<_>>>()?;
    let rows: Vec<Vec<String>> = results
        .iter()
        .enumerate()
        .map(|(i, (n, w, e))| {
            vec![
                i.to_string(),
                n.to_string(),
                w.to_string(),
                num(e.error.frobenius),
                num(e.error.scalar),
                num(e.bound),
                (e.error.frobenius <= e.bound).to_string(),
            ]
        })
        .collect();
    Ok(Table {
        columns: &["program", "n", "w", "frobenius", "scalar", "bound", "passed"],
        passed: results.iter().all(|(_, _, e)| e.error.frobenius <= e.bound),
        rows,
    })
}

fn prop1(args: &DecompArgs) -> Result<Table> {
    let programs = args.programs.load()?;
    let mut jobs = Vec::new();
    for (i, bp) in programs.iter().enumerate() {
        match args.k {
            Some(k) => jobs.push((i, bp, k)),
            None => jobs.extend((1..=bp.n()).map(|k| (i, bp, k))),
        }
    }
    let errors = jobs
        .par_iter()
        .map(|&(_, bp, k)| Ok(decomposition_error(bp, &decompose_prefix_heavy(bp, k)?)))
        .collect::<Result<Vec<f64>>>()?;
    let rows = jobs
        .iter()
        .zip(&errors)
        .map(|(&(i, bp, k), &e)| {
            vec![
                i.to_string(),
                bp.n().to_string(),
                bp.w().to_string(),
                k.to_string(),
                num(e),
                (e <= TOL).to_string(),
            ]
        })
        .collect();
    Ok(Table {
        columns: &["program", "n", "w", "k", "max_error", "passed"],
        rows,
        passed: errors.iter().all(|&e| e <= TOL),
    })
}

fn lemma(args: &StepArgs) -> Result<Table> {
    let budget = EnumerationBudget::new(args.budget_bits);
    let step = args.step();
    let mut rows = Vec::new();
    let mut passed = true;
    for (p, bp) in args.programs.load()?.iter().enumerate() {
        let dec = decompose_prefix_heavy(bp, args.k)?;
        for (i, h) in dec.high().iter().enumerate() {
            if h.is_empty() {
                continue;
            }
            let c = level_k_damping_check(h, step, budget)?;
            let ok = c.lhs <= c.rhs + TOL;
            passed &= ok;
            rows.push(vec![
                p.to_string(),
                (i + 1).to_string(),
                h.len().to_string(),
                num(c.lhs),
                num(c.rhs),
                ok.to_string(),
            ]);
        }
    }
    Ok(Table {
        columns: &["program", "prefix", "terms", "lhs", "rhs", "passed"],
        rows,
        passed,
    })
}

fn emit_report(report: &Report) -> Result<bool> {
    if report.config.out.is_none() {
        report.write_csv(std::io::stdout().lock())?;
    }
    Ok(report.passed())
}

fn run(cli: Cli) -> Result<bool> {
    let table = match &cli.command {
        Command::AuditPrimitives(a) => (audit(a)?, &a.output),
        Command::SingleStep(a) => (single_step(a)?, &a.output),
        Command::Prop1Check(a) => (prop1(a)?, &a.output),
        Command::LemmaCheck(a) => (lemma(a)?, &a.output),
        Command::Fool(a) => return emit_report(&run_experiment(&a.config()?)?),
        Command::Report(a) => {
            let mut config = ExperimentConfig::load(&a.config)
                .with_context(|| format!("reading config {}", a.config.display()))?;
            if a.output.out.is_some() {
                config.out = a.output.out.clone();
            }
            return emit_report(&run_experiment(&config)?);
        }
    };
    emit(&table.0, table.1)?;
    Ok(table.0.passed)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
