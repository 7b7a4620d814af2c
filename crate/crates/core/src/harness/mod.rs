//! Fooling-error measurement and exact checks of the per-step inequalities.

mod experiment;
mod profile;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::algebra::{chi, BitVector, DenseMatrix};
use crate::dist::ExactDistribution;
use crate::error::{Error, Result};
use crate::fourier::{mass_bound, FourierExpansion, MassBoundMode};
use crate::generator::{GeneratorSpec, Variant};
use crate::primitives::{DistributionDescriptor, EnumerationBudget};
use crate::robp::BranchingProgram;

pub use experiment::{
    composite_bound, run_experiment, ExperimentConfig, GeneratorConfig, MeasurementMode, OrderPolicy, ProgramSource,
    Report, ReportRow, RowStatus, CSV_COLUMNS,
};
pub use profile::{level_error_profile, LevelProfile};

/// Two-sided 99% normal quantile.
pub const Z_99: f64 = 2.575_829_303_548_9;

/// `(‖E F(G) − E F(U)‖, |E f(G) − E f(U)|)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FoolingError {
    pub frobenius: f64,
    pub scalar: f64,
}

fn check_n(bp: &BranchingProgram, n: usize) -> Result<()> {
    if bp.n() != n {
        return Err(Error::Dimension {
            expected: n,
            got: bp.n(),
        });
    }
    Ok(())
}

fn error_against_uniform(bp: &BranchingProgram, expectation: &DenseMatrix) -> FoolingError {
    let diff = expectation - &bp.uniform_expectation();
    FoolingError {
        frobenius: diff.frobenius_norm(),
        scalar: diff.get(0, 0).abs(),
    }
}

/// `E_{x~pmf} F(x)`, accumulated as integer counts before scaling.
pub fn expectation_under(bp: &BranchingProgram, pmf: &ExactDistribution) -> Result<DenseMatrix> {
    check_n(bp, pmf.n())?;
    let w = bp.w();
    let mut counts = vec![0u128; w * w];
    for (x, c) in pmf.support() {
        for (s, t) in bp.transition_map(x).into_iter().enumerate() {
            counts[s * w + t] += c;
        }
    }
    let scale = 2f64.powi(-(pmf.log2_denominator() as i32));
    Ok(DenseMatrix::from_fn(w, w, |s, t| counts[s * w + t] as f64 * scale))
}

/// Fooling error of an arbitrary exact input distribution.
pub fn fooling_error_of(bp: &BranchingProgram, pmf: &ExactDistribution) -> Result<FoolingError> {
    Ok(error_against_uniform(bp, &expectation_under(bp, pmf)?))
}

/// Exact fooling error of `G_r` via the level-by-level output pmf.
pub fn exact_fooling_error(bp: &BranchingProgram, spec: &GeneratorSpec, budget: EnumerationBudget) -> Result<FoolingError> {
    check_n(bp, spec.n())?;
    fooling_error_of(bp, &spec.exact_output_distribution(budget)?)
}

/// Monte Carlo fooling error with a 99% half-width on the Frobenius error.
/// Each entry gets an Agresti-Coull normal interval; half-widths combine as
/// a root sum of squares.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampledError {
    pub estimate: FoolingError,
    /// `sqrt(Σ h_ij²)` over per-entry half-widths `h_ij`.
    pub half_width: f64,
    /// Half-width of the `(0, 0)` entry alone.
    pub scalar_half_width: f64,
    pub samples: u64,
}

const SAMPLE_CHUNK: u64 = 4096;

/// Estimates `E F(G)` from `samples` uniformly random seeds. Chunk `j` of
/// the sample stream uses ChaCha8 stream `j` under `rng_seed`, so results do
/// not depend on thread scheduling.
pub fn sampled_fooling_error(
    bp: &BranchingProgram,
    spec: &GeneratorSpec,
    samples: u64,
    rng_seed: u64,
) -> Result<SampledError> {
    check_n(bp, spec.n())?;
    if samples < 2 {
        return Err(Error::invalid("sample count", "need at least 2 samples"));
    }
    let w = bp.w();
    let bits = spec.seed_length();
    let chunks = samples.div_ceil(SAMPLE_CHUNK);
    let counts = (0..chunks)
        .into_par_iter()
        .map(|j| {
            let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
            rng.set_stream(j);
            let len = SAMPLE_CHUNK.min(samples - j * SAMPLE_CHUNK);
            let mut acc = vec![0u64; w * w];
            for _ in 0..len {
                let x = spec.expand_seed_word(&BitVector::random(bits, &mut rng))?;
                for (s, t) in bp.transition_map(x).into_iter().enumerate() {
                    acc[s * w + t] += 1;
                }
            }
            Ok(acc)
        })
        .try_reduce(
            || vec![0u64; w * w],
            |mut a, b| {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                Ok::<_, Error>(a)
            },
        )?;
    let nf = samples as f64;
    let half = |c: u64| {
        // Agresti-Coull: stays positive when an entry is always 0 or always 1.
        let adjusted = nf + Z_99 * Z_99;
        let p = (c as f64 + Z_99 * Z_99 / 2.0) / adjusted;
        Z_99 * (p * (1.0 - p) / adjusted).sqrt()
    };
    let mean = DenseMatrix::from_fn(w, w, |s, t| counts[s * w + t] as f64 / nf);
    Ok(SampledError {
        estimate: error_against_uniform(bp, &mean),
        half_width: counts.iter().map(|&c| half(c).powi(2)).sum::<f64>().sqrt(),
        scalar_half_width: half(counts[0]),
        samples,
    })
}

/// The distributions of one noise step `D ⊕ (T ∧ U)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum StepParams {
    /// `D` 2k-wise, `T` k-wise independent.
    Exact { k: usize },
    /// `D` δ-biased, `T` γ-almost k-wise independent.
    Star { delta: f64, gamma: f64, k: usize },
}

impl StepParams {
    pub fn k(&self) -> usize {
        match *self {
            StepParams::Exact { k } | StepParams::Star { k, .. } => k,
        }
    }

    /// The step used at every level of `spec`.
    pub fn of(spec: &GeneratorSpec) -> StepParams {
        match spec.variant() {
            Variant::Exact => StepParams::Exact { k: spec.k() },
            Variant::Star => StepParams::Star {
                delta: spec.delta().expect("star specs carry δ"),
                gamma: spec.gamma().expect("star specs carry γ"),
                k: spec.k(),
            },
        }
    }

    pub fn descriptors(&self, n: usize) -> Result<(DistributionDescriptor, DistributionDescriptor)> {
        Ok(match *self {
            StepParams::Exact { k } => (DistributionDescriptor::kwise(n, 2 * k)?, DistributionDescriptor::kwise(n, k)?),
            StepParams::Star { delta, gamma, k } => (
                DistributionDescriptor::small_bias(n, delta)?,
                DistributionDescriptor::almost_kwise(n, k, gamma)?,
            ),
        })
    }

    pub fn distributions(&self, n: usize, budget: EnumerationBudget) -> Result<(ExactDistribution, ExactDistribution)> {
        let (d, t) = self.descriptors(n)?;
        Ok((d.exact_distribution(budget)?, t.exact_distribution(budget)?))
    }

    /// Single-step bound: `nw/2^(k/2)`, or `(√δ·L + 2^(−k/2) + √γ)·nw`.
    pub fn bound(&self, n: usize, w: usize, mode: MassBoundMode) -> f64 {
        let nw = (n * w) as f64;
        match *self {
            StepParams::Exact { k } => nw * 2f64.powf(-(k as f64) / 2.0),
            StepParams::Star { delta, gamma, k } => {
                let l = mass_bound(n, w, k, mode).value;
                (delta.sqrt() * l + 2f64.powf(-(k as f64) / 2.0) + gamma.sqrt()) * nw
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepError {
    pub error: FoolingError,
    pub bound: f64,
}

/// `Σ_{d,t} p(d) p(t) M(d, t)` with the inner sum over `d` done first.
/// Weights are integer numerators; the final scale is a power of two.
fn weighted_pair_sum(
    pd: &ExactDistribution,
    pt: &ExactDistribution,
    len: usize,
    term: impl Fn(u64, u64, &mut [f64]) + Sync,
) -> Vec<f64> {
    let d_support: Vec<(u64, u128)> = pd.support().collect();
    let t_support: Vec<(u64, u128)> = pt.support().collect();
    let mut total = t_support
        .par_iter()
        .map(|&(t, ct)| {
            let mut inner = vec![0.0; len];
            let mut scratch = vec![0.0; len];
            for &(d, cd) in &d_support {
                scratch.iter_mut().for_each(|v| *v = 0.0);
                term(d, t, &mut scratch);
                for (acc, v) in inner.iter_mut().zip(&scratch) {
                    *acc += cd as f64 * v;
                }
            }
            inner.iter_mut().for_each(|v| *v *= ct as f64);
            inner
        })
        .reduce(
            || vec![0.0; len],
            |mut a, b| {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                a
            },
        );
    let scale = 2f64.powi(-((pd.log2_denominator() + pt.log2_denominator()) as i32));
    total.iter_mut().for_each(|v| *v *= scale);
    total
}

/// Exact `‖E_{D,T,U} F(D ⊕ (T ∧ U)) − E_U F(U)‖`, with `E_U` done per `(d, t)`
/// as a product of per-layer averages.
pub fn single_step_error(
    bp: &BranchingProgram,
    step: StepParams,
    mode: MassBoundMode,
    budget: EnumerationBudget,
) -> Result<StepError> {
    let (pd, pt) = step.distributions(bp.n(), budget)?;
    single_step_error_with(bp, &pd, &pt, step.bound(bp.n(), bp.w(), mode))
}

/// [`single_step_error`] with precomputed step distributions.
pub fn single_step_error_with(
    bp: &BranchingProgram,
    pd: &ExactDistribution,
    pt: &ExactDistribution,
    bound: f64,
) -> Result<StepError> {
    check_n(bp, pd.n())?;
    check_n(bp, pt.n())?;
    let w = bp.w();
    let mixed = weighted_pair_sum(pd, pt, w * w, |d, t, out| {
        out.copy_from_slice(&bp.restricted_expectation_rows(d, t));
    });
    let expectation = DenseMatrix::from_row_major(w, w, &mixed)?;
    Ok(StepError {
        error: error_against_uniform(bp, &expectation),
        bound,
    })
}

/// `(lhs, rhs)` of the level-k damping inequality.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DampingCheck {
    /// `E_{D,T} ‖E_U H(D ⊕ (T ∧ U))‖²`.
    pub lhs: f64,
    /// `2^(−k) Σ‖Ĥ_α‖²`, or `(2^(−k) + γ)(δ(Σ‖Ĥ_α‖)² + Σ‖Ĥ_α‖²)`.
    pub rhs: f64,
}

/// Exact check for `H` supported at level `k` only, using
/// `E_U χ_α(d ⊕ (t ∧ U)) = χ_α(d)·1{α ∧ t = 0}`.
pub fn level_k_damping_check(h: &FourierExpansion, step: StepParams, budget: EnumerationBudget) -> Result<DampingCheck> {
    let k = step.k();
    if let Some((a, _)) = h.iter().find(|(a, _)| a.count_ones() as usize != k) {
        return Err(Error::invalid(
            "level-k function",
            format!("coefficient at α = {} has weight {} ≠ {k}", BitVector::from_u64(h.n(), a), a.count_ones()),
        ));
    }
    let (pd, pt) = step.distributions(h.n(), budget)?;
    let coeffs: Vec<(u64, Vec<f64>)> = h.iter().map(|(a, m)| (a, m.row_major())).collect();
    let len = h.rows() * h.cols();
    let lhs = weighted_pair_sum(&pd, &pt, 1, |d, t, out| {
        let mut m = vec![0.0; len];
        for (a, c) in &coeffs {
            if a & t == 0 {
                let s = chi(*a, d) as f64;
                m.iter_mut().zip(c).for_each(|(x, y)| *x += s * y);
            }
        }
        out[0] = m.iter().map(|v| v * v).sum();
    })[0];
    let sq = h.squared_mass();
    let rhs = match step {
        StepParams::Exact { .. } => 2f64.powi(-(k as i32)) * sq,
        StepParams::Star { delta, gamma, .. } => {
            (2f64.powi(-(k as i32)) + gamma) * (delta * h.l1_mass().powi(2) + sq)
        }
    };
    Ok(DampingCheck { lhs, rhs })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KillCheck {
    /// `|E_{T,U} f(T ∧ U)|` for `f = χ_α·g`.
    pub value: f64,
    /// `E_U f(U)`, which is 0.
    pub uniform_mean: f64,
}

/// Exact `|E f(T ∧ U)|` for `f = χ_α·g`, `T` k-wise independent, where `g`
/// (a table over `F₂ⁿ`) ignores the coordinates in `α`.
pub fn character_kill_check(alpha: u64, g: &[f64], n: usize, k: usize, budget: EnumerationBudget) -> Result<KillCheck> {
    if g.len() != 1 << n {
        return Err(Error::Dimension {
            expected: 1 << n,
            got: g.len(),
        });
    }
    if (alpha.count_ones() as usize) < k {
        return Err(Error::invalid("character", format!("|α| = {} < k = {k}", alpha.count_ones())));
    }
    if let Some(x) = (0..1u64 << n).find(|&x| g[x as usize] != g[(x & !alpha) as usize]) {
        return Err(Error::invalid(
            "test function",
            format!("g depends on a coordinate of α (differs at x = {})", BitVector::from_u64(n, x)),
        ));
    }
    let f = |x: u64| chi(alpha, x) as f64 * g[x as usize];
    let pt = DistributionDescriptor::kwise(n, k)?.exact_distribution(budget)?;
    let size = (1u64 << n) as f64;
    let scale = 2f64.powi(-(pt.log2_denominator() as i32));
    let value: f64 = pt
        .support()
        .collect::<Vec<_>>()
        .par_iter()
        .map(|&(t, c)| c as f64 * (0..1u64 << n).map(|u| f(t & u)).sum::<f64>() / size)
        .sum::<f64>()
        * scale;
    let uniform_mean = (0..1u64 << n).map(f).sum::<f64>() / size;
    Ok(KillCheck {
        value: value.abs(),
        uniform_mean,
    })
}
