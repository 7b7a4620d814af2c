//! Config-driven sweeps over programs, orders and one generator spec.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use itertools::Itertools;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{fooling_error_of, sampled_fooling_error, FoolingError};
use crate::dist::ExactDistribution;
use crate::error::{Error, Result};
use crate::fourier::{mass_bound, MassBoundMode};
use crate::generator::{GeneratorSpec, ParamSource, Variant};
use crate::primitives::{EnumerationBudget, DEFAULT_BUDGET_BITS};
use crate::robp::{compile_formula, random_formula, random_permutation, random_program, BranchingProgram, ReadOnceFormula};

/// Largest `n` for [`OrderPolicy::All`].
pub const MAX_ALL_ORDERS_BITS: usize = 7;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum ProgramSource {
    /// Program `i` is `random_program(n, w, rng_seed + i)`.
    Random { n: usize, w: usize, count: usize, rng_seed: u64 },
    /// Program text files.
    File { paths: Vec<PathBuf> },
    /// One formula per line; blank lines and `#` comments are skipped.
    Formula { path: PathBuf },
    RandomFormula {
        max_vars: usize,
        max_depth: usize,
        count: usize,
        rng_seed: u64,
    },
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum OrderPolicy {
    #[default]
    Identity,
    /// Every permutation, for `n ≤ 7`.
    All,
    /// `count` uniform permutations per program; program `i` uses ChaCha8
    /// stream `i` under `rng_seed`.
    Sampled { count: usize, rng_seed: u64 },
}

/// Either derived parameters (`k`, `r` absent) or a full override.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub variant: Variant,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mass: Option<MassBoundMode>,
}

impl GeneratorConfig {
    pub fn exact(k: usize, r: usize) -> Self {
        GeneratorConfig {
            variant: Variant::Exact,
            k: Some(k),
            r: Some(r),
            delta: None,
            gamma: None,
            epsilon: None,
            mass: None,
        }
    }

    pub fn star(k: usize, r: usize, delta: f64, gamma: f64) -> Self {
        GeneratorConfig {
            variant: Variant::Star,
            delta: Some(delta),
            gamma: Some(gamma),
            ..GeneratorConfig::exact(k, r)
        }
    }

    pub fn spec(&self, n: usize, w: usize) -> Result<GeneratorSpec> {
        match (self.variant, self.k, self.r) {
            (Variant::Exact, Some(k), Some(r)) => GeneratorSpec::exact_with(n, w, k, r),
            (Variant::Exact, None, None) => GeneratorSpec::exact(n, w),
            (Variant::Star, Some(k), Some(r)) => {
                let (Some(delta), Some(gamma)) = (self.delta, self.gamma) else {
                    return Err(Error::invalid("generator config", "star overrides need delta and gamma"));
                };
                GeneratorSpec::star_with(n, w, k, r, delta, gamma)
            }
            (Variant::Star, None, None) => {
                let eps = self
                    .epsilon
                    .ok_or_else(|| Error::invalid("generator config", "derived star parameters need epsilon"))?;
                GeneratorSpec::star(n, w, eps, self.mass.unwrap_or(MassBoundMode::Trivial))
            }
            _ => Err(Error::invalid("generator config", "give both k and r or neither")),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum MeasurementMode {
    /// Output pmf from the level-by-level distribution recursion.
    #[default]
    ExactDp,
    /// Output pmf from enumerating every seed.
    ExactSeeds,
    /// Row `i` draws `samples` seeds from `rng_seed + i`.
    Sampled { samples: u64, rng_seed: u64 },
}

impl MeasurementMode {
    fn label(&self) -> &'static str {
        match self {
            MeasurementMode::ExactDp => "exact_dp",
            MeasurementMode::ExactSeeds => "exact_seeds",
            MeasurementMode::Sampled { .. } => "sampled",
        }
    }
}

fn default_budget_bits() -> u32 {
    DEFAULT_BUDGET_BITS
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub programs: ProgramSource,
    #[serde(default)]
    pub orders: OrderPolicy,
    pub generator: GeneratorConfig,
    #[serde(default)]
    pub mode: MeasurementMode,
    #[serde(default = "default_budget_bits")]
    pub budget_bits: u32,
    /// CSV path; the JSON sidecar goes next to it with extension `json`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Ok(serde_json::from_reader(BufReader::new(File::open(path)?))?)
    }

    /// Hex SHA-256 of the compact JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }
}

/// Full-generator bound for the active variant:
/// `r·nw/2^(k/2) + 2n√w/2^r`, or
/// `r(√δL + 2^(−k/2) + √γ)nw + r(2^(−⌊k/2⌋) + 2γ·4^k)·2√w`.
pub fn composite_bound(spec: &GeneratorSpec) -> f64 {
    let (n, w, k, r) = (spec.n() as f64, spec.w() as f64, spec.k(), spec.r() as f64);
    let half_k = 2f64.powf(-(k as f64) / 2.0);
    match spec.variant() {
        Variant::Exact => r * n * w * half_k + 2.0 * n * w.sqrt() / 2f64.powf(r),
        Variant::Star => {
            let delta = spec.delta().expect("star specs carry δ");
            let gamma = spec.gamma().expect("star specs carry γ");
            let mode = spec.mass_mode().unwrap_or(MassBoundMode::Trivial);
            let l = mass_bound(spec.n(), spec.w(), k, mode).value;
            let step = (delta.sqrt() * l + half_k + gamma.sqrt()) * n * w;
            let tail = 2f64.powi(-((k / 2) as i32)) + 2.0 * gamma * 4f64.powi(k as i32);
            r * step + r * tail * 2.0 * w.sqrt()
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "reason")]
pub enum RowStatus {
    Ok,
    Skipped(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub row: usize,
    pub program: usize,
    pub n: usize,
    pub w: usize,
    /// 1-based variable order, dash separated.
    pub order: String,
    pub spec: String,
    pub params: String,
    pub mode: String,
    pub seed_bits: usize,
    pub frobenius: Option<f64>,
    pub scalar: Option<f64>,
    pub half_width: Option<f64>,
    pub bound: Option<f64>,
    pub mass_mode: String,
    pub vacuous: bool,
    pub within_bound: Option<bool>,
    pub status: RowStatus,
}

impl ReportRow {
    /// Bound holds and scalar error is at most Frobenius error. Skipped rows
    /// pass vacuously.
    pub fn passed(&self) -> bool {
        match (self.frobenius, self.scalar) {
            (Some(f), Some(s)) => self.within_bound != Some(false) && s <= f + 1e-12,
            _ => true,
        }
    }

    fn record(&self) -> Vec<String> {
        let num = |v: Option<f64>| v.map(|x| format!("{x:e}")).unwrap_or_default();
        let (status, reason) = match &self.status {
            RowStatus::Ok => ("ok".to_string(), String::new()),
            RowStatus::Skipped(r) => ("skipped".to_string(), r.clone()),
        };
        vec![
            self.row.to_string(),
            self.program.to_string(),
            self.n.to_string(),
            self.w.to_string(),
            self.order.clone(),
            self.spec.clone(),
            self.params.clone(),
            self.mode.clone(),
            self.seed_bits.to_string(),
            num(self.frobenius),
            num(self.scalar),
            num(self.half_width),
            num(self.bound),
            self.mass_mode.clone(),
            self.vacuous.to_string(),
            self.within_bound.map(|b| b.to_string()).unwrap_or_default(),
            status,
            reason,
        ]
    }
}

pub const CSV_COLUMNS: [&str; 18] = [
    "row",
    "program",
    "n",
    "w",
    "order",
    "spec",
    "params",
    "mode",
    "seed_bits",
    "frobenius",
    "scalar",
    "half_width",
    "bound",
    "mass_mode",
    "vacuous",
    "within_bound",
    "status",
    "reason",
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub config: ExperimentConfig,
    pub config_hash: String,
    pub rows: Vec<ReportRow>,
}

#[derive(Serialize)]
struct Sidecar<'a> {
    config: &'a ExperimentConfig,
    config_hash: &'a str,
    columns: &'a [&'a str],
    rows: usize,
    measured: usize,
    skipped: usize,
    vacuous: usize,
    passed: bool,
    max_frobenius: Option<f64>,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.rows.iter().all(ReportRow::passed)
    }

    pub fn skipped(&self) -> usize {
        self.rows.iter().filter(|r| matches!(r.status, RowStatus::Skipped(_))).count()
    }

    pub fn max_frobenius(&self) -> Option<f64> {
        self.rows.iter().filter_map(|r| r.frobenius).reduce(f64::max)
    }

    pub fn write_csv(&self, out: impl Write) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(out);
        wtr.write_record(CSV_COLUMNS)?;
        for row in &self.rows {
            wtr.write_record(row.record())?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn write_json(&self, out: impl Write) -> Result<()> {
        let sidecar = Sidecar {
            config: &self.config,
            config_hash: &self.config_hash,
            columns: &CSV_COLUMNS,
            rows: self.rows.len(),
            measured: self.rows.len() - self.skipped(),
            skipped: self.skipped(),
            vacuous: self.rows.iter().filter(|r| r.vacuous).count(),
            passed: self.passed(),
            max_frobenius: self.max_frobenius(),
        };
        serde_json::to_writer_pretty(out, &sidecar)?;
        Ok(())
    }

    /// Writes `path` (CSV) and `path` with extension `json`.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        self.write_csv(File::create(path)?)?;
        let mut json = File::create(path.with_extension("json"))?;
        self.write_json(&mut json)?;
        writeln!(json)?;
        Ok(())
    }
}

impl ProgramSource {
    /// Materializes the programs, in row order.
    pub fn load(&self) -> Result<Vec<BranchingProgram>> {
        load_programs(self)
    }
}

fn load_programs(source: &ProgramSource) -> Result<Vec<BranchingProgram>> {
    match source {
        ProgramSource::Random { n, w, count, rng_seed } => (0..*count as u64)
            .map(|i| random_program(*n, *w, rng_seed.wrapping_add(i)))
            .collect(),
        ProgramSource::File { paths } => paths.iter().map(BranchingProgram::load).collect(),
        ProgramSource::Formula { path } => {
            let mut out = Vec::new();
            for line in BufReader::new(File::open(path)?).lines() {
                let line = line?;
                let text = line.split('#').next().unwrap_or("").trim();
                if !text.is_empty() {
                    out.push(compile_formula(&text.parse::<ReadOnceFormula>()?)?);
                }
            }
            Ok(out)
        }
        ProgramSource::RandomFormula {
            max_vars,
            max_depth,
            count,
            rng_seed,
        } => {
            let cap = (*max_vars).min(1usize.checked_shl(*max_depth as u32).unwrap_or(usize::MAX));
            if cap == 0 {
                return Err(Error::invalid("formula source", "max_vars must be positive"));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(*rng_seed);
            (0..*count)
                .map(|_| {
                    let vars = rng.random_range(1..=cap);
                    compile_formula(&random_formula(vars, *max_depth, &mut rng)?)
                })
                .collect()
        }
    }
}

fn orders_for(policy: &OrderPolicy, n: usize, program: usize) -> Result<Vec<Vec<usize>>> {
    match policy {
        OrderPolicy::Identity => Ok(vec![(0..n).collect()]),
        OrderPolicy::All => {
            if n > MAX_ALL_ORDERS_BITS {
                return Err(Error::invalid(
                    "order policy",
                    format!("all orders needs n ≤ {MAX_ALL_ORDERS_BITS}, got {n}"),
                ));
            }
            Ok((0..n).permutations(n).collect())
        }
        OrderPolicy::Sampled { count, rng_seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(*rng_seed);
            rng.set_stream(program as u64);
            Ok((0..*count).map(|_| random_permutation(n, &mut rng)).collect())
        }
    }
}

/// Per-`(n, w)` spec and exact output pmf, or the reason they are unavailable.
struct Prepared {
    spec: std::result::Result<GeneratorSpec, String>,
    pmf: Option<std::result::Result<ExactDistribution, String>>,
}

fn prepare(config: &ExperimentConfig, n: usize, w: usize) -> Prepared {
    let budget = EnumerationBudget::new(config.budget_bits);
    let spec = config.generator.spec(n, w).map_err(|e| e.to_string());
    let pmf = match (&spec, config.mode) {
        (Ok(s), MeasurementMode::ExactDp) => Some(s.exact_output_distribution(budget).map_err(|e| e.to_string())),
        (Ok(s), MeasurementMode::ExactSeeds) => Some(s.seed_histogram(budget).map_err(|e| e.to_string())),
        _ => None,
    };
    Prepared { spec, pmf }
}

/// Tolerance on the exact bound comparison, for float accumulation.
const BOUND_SLACK: f64 = 1e-9;

fn measure(
    config: &ExperimentConfig,
    prepared: &Prepared,
    row: usize,
    program: usize,
    bp: &BranchingProgram,
) -> ReportRow {
    let order = bp.order().iter().map(|p| (p + 1).to_string()).join("-");
    let mut out = ReportRow {
        row,
        program,
        n: bp.n(),
        w: bp.w(),
        order,
        spec: String::new(),
        params: String::new(),
        mode: config.mode.label().to_string(),
        seed_bits: 0,
        frobenius: None,
        scalar: None,
        half_width: None,
        bound: None,
        mass_mode: "none".to_string(),
        vacuous: false,
        within_bound: None,
        status: RowStatus::Ok,
    };
    let spec = match &prepared.spec {
        Ok(s) => s,
        Err(e) => {
            out.status = RowStatus::Skipped(e.clone());
            return out;
        }
    };
    out.spec = spec.to_string();
    out.params = match spec.source() {
        ParamSource::Derived => "derived",
        ParamSource::Override => "override",
    }
    .to_string();
    out.seed_bits = spec.seed_length();
    if spec.variant() == Variant::Star {
        out.mass_mode = spec.mass_mode().unwrap_or(MassBoundMode::Trivial).to_string();
    }
    let bound = composite_bound(spec);
    out.bound = Some(bound);
    out.vacuous = bound >= 2.0 * (bp.w() as f64).sqrt();

    let measured: Result<(FoolingError, f64)> = match (&prepared.pmf, config.mode) {
        (Some(Ok(pmf)), _) => fooling_error_of(bp, pmf).map(|e| (e, 0.0)),
        (Some(Err(e)), _) => {
            out.status = RowStatus::Skipped(e.clone());
            return out;
        }
        (None, MeasurementMode::Sampled { samples, rng_seed }) => {
            sampled_fooling_error(bp, spec, samples, rng_seed.wrapping_add(row as u64))
                .map(|s| (s.estimate, s.half_width))
        }
        (None, _) => unreachable!("exact modes are prepared"),
    };
    match measured {
        Ok((e, h)) => {
            out.frobenius = Some(e.frobenius);
            out.scalar = Some(e.scalar);
            let slack = if matches!(config.mode, MeasurementMode::Sampled { .. }) {
                out.half_width = Some(h);
                h
            } else {
                BOUND_SLACK
            };
            out.within_bound = Some(e.frobenius <= bound + slack);
        }
        Err(e) => out.status = RowStatus::Skipped(e.to_string()),
    }
    out
}

/// Runs every `(program, order)` pair against the configured spec. Rows are
/// computed in parallel and returned in row order. Writes the CSV and JSON
/// sidecar when `config.out` is set.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Report> {
    let programs = load_programs(&config.programs)?;
    let mut items = Vec::new();
    for (i, bp) in programs.iter().enumerate() {
        for sigma in orders_for(&config.orders, bp.n(), i)? {
            items.push((i, bp.permute_order(&sigma)?));
        }
    }
    let shapes: Vec<(usize, usize)> = programs.iter().map(|bp| (bp.n(), bp.w())).unique().collect();
    let prepared: HashMap<(usize, usize), Prepared> = shapes
        .into_par_iter()
        .map(|(n, w)| ((n, w), prepare(config, n, w)))
        .collect();
    let rows = items
        .par_iter()
        .enumerate()
        .map(|(row, (i, bp))| measure(config, &prepared[&(bp.n(), bp.w())], row, *i, bp))
        .collect();
    let report = Report {
        config: config.clone(),
        config_hash: config.hash(),
        rows,
    };
    if let Some(path) = &config.out {
        report.save(path)?;
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(programs: ProgramSource, orders: OrderPolicy, generator: GeneratorConfig) -> ExperimentConfig {
        ExperimentConfig {
            programs,
            orders,
            generator,
            mode: MeasurementMode::ExactDp,
            budget_bits: DEFAULT_BUDGET_BITS,
            out: None,
        }
    }

    #[test]
    fn empty_program_list_gives_header_only() {
        let c = config(
            ProgramSource::Random {
                n: 4,
                w: 2,
                count: 0,
                rng_seed: 0,
            },
            OrderPolicy::Identity,
            GeneratorConfig::exact(1, 1),
        );
        let report = run_experiment(&c).unwrap();
        assert!(report.rows.is_empty() && report.passed());
        let mut buf = Vec::new();
        report.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().trim_end(), CSV_COLUMNS.join(","));
    }

    #[test]
    fn parity_is_order_invariant() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("parity.robp");
        BranchingProgram::parity(5).save(&path).unwrap();
        let source = ProgramSource::File { paths: vec![path] };
        let g = GeneratorConfig::exact(1, 1);
        let id = run_experiment(&config(source.clone(), OrderPolicy::Identity, g.clone())).unwrap();
        let all = run_experiment(&config(source, OrderPolicy::All, g)).unwrap();
        assert_eq!(all.rows.len(), 120);
        for row in &all.rows {
            assert_eq!((row.frobenius, row.scalar), (id.rows[0].frobenius, id.rows[0].scalar));
        }
    }

    #[test]
    fn deterministic_and_hashed() {
        let mut c = config(
            ProgramSource::Random {
                n: 6,
                w: 3,
                count: 3,
                rng_seed: 7,
            },
            OrderPolicy::Sampled { count: 4, rng_seed: 1 },
            GeneratorConfig::exact(1, 2),
        );
        c.mode = MeasurementMode::Sampled {
            samples: 2000,
            rng_seed: 3,
        };
        let a = run_experiment(&c).unwrap();
        let b = run_experiment(&c).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.rows.len(), 12);
        assert_eq!(a.config_hash.len(), 64);
        assert!(a.rows.iter().all(|r| r.half_width.unwrap() > 0.0));
        c.orders = OrderPolicy::Identity;
        assert_ne!(run_experiment(&c).unwrap().config_hash, a.config_hash);
    }

    #[test]
    fn infeasible_rows_are_skipped() {
        let mut c = config(
            ProgramSource::Random {
                n: 6,
                w: 2,
                count: 2,
                rng_seed: 0,
            },
            OrderPolicy::Identity,
            GeneratorConfig::exact(2, 2),
        );
        c.mode = MeasurementMode::ExactSeeds;
        c.budget_bits = 4;
        let report = run_experiment(&c).unwrap();
        assert_eq!(report.skipped(), 2);
        assert!(report.passed());
        assert!(report.rows.iter().all(|r| r.frobenius.is_none()));
    }

    #[test]
    fn writes_csv_and_sidecar() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("report.csv");
        let mut c = config(
            ProgramSource::Random {
                n: 5,
                w: 2,
                count: 2,
                rng_seed: 1,
            },
            OrderPolicy::Identity,
            GeneratorConfig::exact(1, 1),
        );
        c.out = Some(out.clone());
        let report = run_experiment(&c).unwrap();
        let csv = std::fs::read_to_string(&out).unwrap();
        assert_eq!(csv.lines().count(), 3);
        let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.with_extension("json")).unwrap()).unwrap();
        assert_eq!(json["config_hash"], report.config_hash);
        assert_eq!(json["rows"], 2);
        let back: ExperimentConfig = serde_json::from_value(json["config"].clone()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn composite_bounds() {
        let s = GeneratorSpec::exact_with(8, 2, 3, 2).unwrap();
        let expected = 2.0 * 16.0 / 8f64.sqrt() + 2.0 * 8.0 * 2f64.sqrt() / 4.0;
        assert!((composite_bound(&s) - expected).abs() <= 1e-12);
        let s = GeneratorSpec::star_with(4, 2, 2, 1, 0.25, 0.0625).unwrap();
        let l = mass_bound(4, 2, 2, MassBoundMode::Trivial).value;
        let expected = (0.5 * l + 0.5 + 0.25) * 8.0 + (0.5 + 2.0 * 0.0625 * 16.0) * 2.0 * 2f64.sqrt();
        assert!((composite_bound(&s) - expected).abs() <= 1e-12);
    }
}
