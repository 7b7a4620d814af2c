//! Seeded k-wise independent, δ-biased and γ-almost k-wise independent
//! distributions over F₂ⁿ, with exhaustive auditors.
//!
//! Constructions (all bit-exact):
//!
//! * **k-wise**: `m = ⌈lg max(n, 2)⌉`; the `k·m`-bit seed holds coefficients
//!   `c_0 … c_{k−1}` of GF(2^m), coefficient `i` at seed bits `[i·m, (i+1)·m)`.
//!   Output bit `j` is the lowest bit of `p(ζ_j)`, `p(t) = Σ c_i t^i`, where
//!   `ζ_j` is the field element with integer encoding `j`.
//! * **δ-biased** (powering): `m = ⌈lg(n/δ)⌉`; the seed is `(x, y)` with `x`
//!   in bits `[0, m)` and `y` in `[m, 2m)`. Output bit `i` is
//!   `⟨x^(i+1), y⟩ mod 2`. A nonzero α gives the polynomial `Σ α_i t^(i+1)`
//!   with at most `n` roots, so the bias is at most `n / 2^m ≤ δ`.
//! * **γ-almost k-wise**: the δ'-biased space with `δ' = γ·2^(−k/2)`; every
//!   k-bit projection is then within `2^(k/2)·δ' = γ` of uniform.
//!
//! Every construction is linear in its seed (the small-bias one for each
//! fixed `x`), which gives a fast exact route to the output pmf alongside the
//! brute-force seed enumeration used by the auditors.

use std::fmt;
use std::str::FromStr;

use itertools::Itertools;
use rayon::prelude::*;

use crate::algebra::bitvec::low_mask;
use crate::algebra::{ceil_log2, chi, BitVector, FieldContext, FieldElement, MAX_FIELD_DEGREE};
use crate::dist::{ExactDistribution, MAX_DENSE_BITS};
use crate::error::{Error, Result};

pub const DEFAULT_BUDGET_BITS: u32 = 26;

/// Cap on the number of steps (as a power of two) an exhaustive routine may take.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EnumerationBudget {
    pub max_bits: u32,
}

impl Default for EnumerationBudget {
    fn default() -> Self {
        EnumerationBudget {
            max_bits: DEFAULT_BUDGET_BITS,
        }
    }
}

impl EnumerationBudget {
    pub fn new(max_bits: u32) -> Self {
        EnumerationBudget { max_bits }
    }

    pub fn check(&self, what: impl Into<String>, needed_bits: u32) -> Result<()> {
        if needed_bits > self.max_bits {
            return Err(Error::Budget {
                what: what.into(),
                needed_bits,
                budget_bits: self.max_bits,
            });
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum DistributionKind {
    KWise { k: usize },
    SmallBias { delta: f64 },
    AlmostKWise { k: usize, gamma: f64 },
    PointMass(BitVector),
    Uniform,
}

/// A seeded distribution over F₂ⁿ together with its exact seed cost.
#[derive(Clone, Debug, PartialEq)]
pub struct DistributionDescriptor {
    kind: DistributionKind,
    n: usize,
    seed_bits: usize,
    field_degree: Option<u32>,
    field: Option<FieldContext>,
}

/// Exact `⌈lg x⌉` for a positive finite `x` (at least 1 is returned).
fn ceil_lg_at_least_one(x: f64) -> u32 {
    let mut m = x.log2().ceil().max(1.0) as i64;
    while m > 1 && 2f64.powi((m - 1) as i32) >= x {
        m -= 1;
    }
    while 2f64.powi(m as i32) < x {
        m += 1;
    }
    m as u32
}

/// Field degree of the k-wise construction: `⌈lg max(n, 2)⌉`.
pub fn kwise_field_degree(n: usize) -> u32 {
    ceil_log2(n.max(2) as u64)
}

/// Field degree of the powering construction: `⌈lg(n/δ)⌉`.
pub fn small_bias_field_degree(n: usize, delta: f64) -> u32 {
    ceil_lg_at_least_one(n.max(1) as f64 / delta)
}

/// Field degree of the almost-k-wise construction: `⌈lg(n·2^(k/2)/γ)⌉`.
pub fn almost_kwise_field_degree(n: usize, k: usize, gamma: f64) -> u32 {
    ceil_lg_at_least_one(n.max(1) as f64 * 2f64.powf(k as f64 / 2.0) / gamma)
}

fn check_unit_interval(what: &'static str, v: f64) -> Result<()> {
    if !(v > 0.0 && v <= 1.0) {
        return Err(Error::invalid(what, format!("{v} is not in (0, 1]")));
    }
    Ok(())
}

fn field_for(m: u32) -> Result<Option<FieldContext>> {
    if m > MAX_FIELD_DEGREE {
        Ok(None)
    } else {
        FieldContext::standard(m).map(Some)
    }
}

impl DistributionDescriptor {
    pub fn kwise(n: usize, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::invalid("k-wise independence", "k must be ≥ 1"));
        }
        let m = kwise_field_degree(n);
        Ok(DistributionDescriptor {
            kind: DistributionKind::KWise { k },
            n,
            seed_bits: k * m as usize,
            field_degree: Some(m),
            field: field_for(m)?,
        })
    }

    pub fn small_bias(n: usize, delta: f64) -> Result<Self> {
        check_unit_interval("bias δ", delta)?;
        let m = small_bias_field_degree(n, delta);
        Ok(DistributionDescriptor {
            kind: DistributionKind::SmallBias { delta },
            n,
            seed_bits: 2 * m as usize,
            field_degree: Some(m),
            field: field_for(m)?,
        })
    }

    pub fn almost_kwise(n: usize, k: usize, gamma: f64) -> Result<Self> {
        if k == 0 {
            return Err(Error::invalid("almost k-wise independence", "k must be ≥ 1"));
        }
        check_unit_interval("closeness γ", gamma)?;
        let m = almost_kwise_field_degree(n, k, gamma);
        Ok(DistributionDescriptor {
            kind: DistributionKind::AlmostKWise { k, gamma },
            n,
            seed_bits: 2 * m as usize,
            field_degree: Some(m),
            field: field_for(m)?,
        })
    }

    pub fn point_mass(v: BitVector) -> Self {
        DistributionDescriptor {
            n: v.len(),
            kind: DistributionKind::PointMass(v),
            seed_bits: 0,
            field_degree: None,
            field: None,
        }
    }

    pub fn uniform(n: usize) -> Self {
        DistributionDescriptor {
            kind: DistributionKind::Uniform,
            n,
            seed_bits: n,
            field_degree: None,
            field: None,
        }
    }

    pub fn kind(&self) -> &DistributionKind {
        &self.kind
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn seed_bits(&self) -> usize {
        self.seed_bits
    }

    pub fn field_degree(&self) -> Option<u32> {
        self.field_degree
    }

    pub fn field(&self) -> Option<&FieldContext> {
        self.field.as_ref()
    }

    /// The bias bound this space is built to: δ, or δ' = γ·2^(−k/2).
    pub fn target_bias(&self) -> Option<f64> {
        match self.kind {
            DistributionKind::SmallBias { delta } => Some(delta),
            DistributionKind::AlmostKWise { k, gamma } => Some(gamma * 2f64.powf(-(k as f64) / 2.0)),
            _ => None,
        }
    }

    fn require_field(&self) -> Result<&FieldContext> {
        match (&self.field, self.field_degree) {
            (Some(ctx), _) => Ok(ctx),
            (None, Some(m)) => Err(Error::FieldDegree(m)),
            (None, None) => Err(Error::invalid("descriptor", "no field for this kind")),
        }
    }

    fn check_seed(&self, seed: &BitVector) -> Result<()> {
        if seed.len() != self.seed_bits {
            return Err(Error::SeedLength {
                expected: self.seed_bits,
                got: seed.len(),
            });
        }
        Ok(())
    }

    /// Feeds output bits `(i, b_i)` in order to `emit`.
    fn generate(&self, seed: &BitVector, mut emit: impl FnMut(usize, bool)) -> Result<()> {
        self.check_seed(seed)?;
        match &self.kind {
            DistributionKind::KWise { k } => {
                let ctx = self.require_field()?;
                let m = ctx.degree() as usize;
                let coeffs: Vec<FieldElement> = (0..*k)
                    .map(|i| ctx.element_truncated(seed.read_word(i * m, m)))
                    .collect();
                for j in 0..self.n {
                    let z = ctx.element_truncated(j as u64);
                    let mut acc = FieldElement::ZERO;
                    for &c in coeffs.iter().rev() {
                        acc = ctx.add(ctx.mul(acc, z), c);
                    }
                    emit(j, acc.value() & 1 == 1);
                }
            }
            DistributionKind::SmallBias { .. } | DistributionKind::AlmostKWise { .. } => {
                let ctx = self.require_field()?;
                let m = ctx.degree() as usize;
                let x = ctx.element_truncated(seed.read_word(0, m));
                let y = seed.read_word(m, m);
                let mut p = x;
                for i in 0..self.n {
                    emit(i, (p.value() & y).count_ones() & 1 == 1);
                    p = ctx.mul(p, x);
                }
            }
            DistributionKind::PointMass(v) => {
                for (i, b) in v.iter().enumerate() {
                    emit(i, b);
                }
            }
            DistributionKind::Uniform => {
                for (i, b) in seed.iter().enumerate() {
                    emit(i, b);
                }
            }
        }
        Ok(())
    }

    pub fn sample(&self, seed: &BitVector) -> Result<BitVector> {
        let mut out = BitVector::zeros(self.n);
        self.generate(seed, |i, b| {
            if b {
                out.set(i, true)
            }
        })?;
        Ok(out)
    }

    /// Word-valued sampling for `n ≤ 64`.
    pub fn sample_word(&self, seed: &BitVector) -> Result<u64> {
        if self.n > 64 {
            return Err(Error::invalid("descriptor", "word sampling needs n ≤ 64"));
        }
        let mut out = 0u64;
        self.generate(seed, |i, b| out |= (b as u64) << i)?;
        Ok(out)
    }

    fn sample_indexed_seed(&self, s: u64) -> u64 {
        self.sample_word(&BitVector::from_u64(self.seed_bits, s))
            .expect("seed length matches by construction")
    }

    /// Output counts over all `2^seed_bits` seeds, by direct enumeration.
    pub fn seed_histogram(&self, budget: EnumerationBudget) -> Result<ExactDistribution> {
        if self.n > MAX_DENSE_BITS {
            return Err(Error::Budget {
                what: format!("histogram over F_2^{}", self.n),
                needed_bits: self.n as u32,
                budget_bits: MAX_DENSE_BITS as u32,
            });
        }
        budget.check(format!("seed enumeration of `{self}`"), self.seed_bits as u32)?;
        let size = 1usize << self.n;
        let counts = (0..1u64 << self.seed_bits)
            .into_par_iter()
            .fold(
                || vec![0u128; size],
                |mut acc, s| {
                    acc[self.sample_indexed_seed(s) as usize] += 1;
                    acc
                },
            )
            .reduce(
                || vec![0u128; size],
                |mut a, b| {
                    for (x, y) in a.iter_mut().zip(b) {
                        *x += y;
                    }
                    a
                },
            );
        ExactDistribution::from_counts(self.n, counts, self.seed_bits as u32)
    }

    /// Exact output pmf via the linear structure of the construction.
    ///
    /// For the k-wise space the output is a linear image of a uniform seed,
    /// hence uniform on the column span (exactly uniform on F₂ⁿ once k ≥ n).
    /// For the powering spaces the image is linear in `y` for each fixed `x`.
    pub fn exact_distribution(&self, budget: EnumerationBudget) -> Result<ExactDistribution> {
        let n = self.n;
        if n > MAX_DENSE_BITS {
            return Err(Error::Budget {
                what: format!("dense pmf over F_2^{n}"),
                needed_bits: n as u32,
                budget_bits: MAX_DENSE_BITS as u32,
            });
        }
        match &self.kind {
            DistributionKind::Uniform => ExactDistribution::uniform(n),
            DistributionKind::PointMass(v) => ExactDistribution::point_mass(n, v.to_u64().unwrap_or(0)),
            // Any n evaluation points are distinct, so once k ≥ n the map from
            // coefficients onto F₂ⁿ is surjective.
            DistributionKind::KWise { k } if *k >= n => ExactDistribution::uniform(n),
            DistributionKind::KWise { .. } => {
                self.require_field()?;
                let columns: Vec<u64> = (0..self.seed_bits)
                    .map(|j| {
                        let mut unit = BitVector::zeros(self.seed_bits);
                        unit.set(j, true);
                        self.sample_word(&unit)
                    })
                    .collect::<Result<_>>()?;
                let basis = span_basis(&columns);
                budget.check("k-wise span enumeration", basis.len() as u32)?;
                let mut counts = vec![0u128; 1 << n];
                for_each_span_point(&basis, |p| counts[p as usize] += 1);
                ExactDistribution::from_counts(n, counts, basis.len() as u32)
            }
            DistributionKind::SmallBias { .. } | DistributionKind::AlmostKWise { .. } => {
                let ctx = *self.require_field()?;
                let m = ctx.degree();
                budget.check("small-bias span enumeration", m + m.min(n as u32))?;
                let size = 1usize << n;
                let counts = (0..1u64 << m)
                    .into_par_iter()
                    .fold(
                        || vec![0u128; size],
                        |mut acc, x| {
                            let xe = ctx.element_truncated(x);
                            // powers[i] = x^(i+1); column b has bit i = bit b of powers[i].
                            let mut powers = Vec::with_capacity(n);
                            let mut p = xe;
                            for _ in 0..n {
                                powers.push(p.value());
                                p = ctx.mul(p, xe);
                            }
                            let columns: Vec<u64> = (0..m)
                                .map(|b| {
                                    powers
                                        .iter()
                                        .enumerate()
                                        .fold(0u64, |c, (i, &pw)| c | (((pw >> b) & 1) << i))
                                })
                                .collect();
                            let basis = span_basis(&columns);
                            let weight = 1u128 << (m as usize - basis.len());
                            for_each_span_point(&basis, |pt| acc[pt as usize] += weight);
                            acc
                        },
                    )
                    .reduce(
                        || vec![0u128; size],
                        |mut a, b| {
                            for (x, y) in a.iter_mut().zip(b) {
                                *x += y;
                            }
                            a
                        },
                    );
                ExactDistribution::from_counts(n, counts, 2 * m)
            }
        }
    }
}

/// Row-reduced basis of the F₂-span of `vectors`.
fn span_basis(vectors: &[u64]) -> Vec<u64> {
    let mut basis: Vec<u64> = Vec::new();
    for &v in vectors {
        let mut v = v;
        for &b in &basis {
            v = v.min(v ^ b);
        }
        if v != 0 {
            basis.push(v);
            basis.sort_unstable_by(|a, b| b.cmp(a));
        }
    }
    basis
}

/// Visits each of the `2^basis.len()` span points once (Gray-code order).
fn for_each_span_point(basis: &[u64], mut f: impl FnMut(u64)) {
    let mut p = 0u64;
    f(p);
    for i in 1u64..(1u64 << basis.len()) {
        p ^= basis[i.trailing_zeros() as usize];
        f(p);
    }
}

impl fmt::Display for DistributionDescriptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let field = |f: &mut fmt::Formatter<'_>| match (self.field_degree, &self.field) {
            (Some(m), Some(ctx)) => write!(f, " m={m} poly=0x{:x}", ctx.modulus()),
            (Some(m), None) => write!(f, " m={m} poly=none"),
            _ => Ok(()),
        };
        match &self.kind {
            DistributionKind::KWise { k } => {
                write!(f, "kwise n={} k={k}", self.n)?;
                field(f)
            }
            DistributionKind::SmallBias { delta } => {
                write!(f, "smallbias n={} delta={delta:e}", self.n)?;
                field(f)
            }
            DistributionKind::AlmostKWise { k, gamma } => {
                write!(f, "almostkwise n={} k={k} gamma={gamma:e}", self.n)?;
                field(f)
            }
            DistributionKind::PointMass(v) => write!(f, "pointmass n={} v={v}", self.n),
            DistributionKind::Uniform => write!(f, "uniform n={}", self.n),
        }
    }
}

/// Parses `key=value` tokens following a leading tag.
pub(crate) fn parse_fields(s: &str) -> Result<(String, Vec<(String, String)>)> {
    let mut tokens = s.split_whitespace();
    let tag = tokens
        .next()
        .ok_or_else(|| Error::Parse("empty descriptor".into()))?
        .to_string();
    let fields = tokens
        .map(|t| {
            t.split_once('=')
                .map(|(k, v)| (k.to_string(), v.to_string()))
                .ok_or_else(|| Error::Parse(format!("expected key=value, got {t:?}")))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((tag, fields))
}

pub(crate) fn field_value<'a>(fields: &'a [(String, String)], key: &str) -> Option<&'a str> {
    fields.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
}

pub(crate) fn required<T: FromStr>(fields: &[(String, String)], key: &str) -> Result<T> {
    let raw = field_value(fields, key).ok_or_else(|| Error::Parse(format!("missing field `{key}`")))?;
    raw.parse()
        .map_err(|_| Error::Parse(format!("bad value for `{key}`: {raw:?}")))
}

impl FromStr for DistributionDescriptor {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (tag, fields) = parse_fields(s)?;
        let n: usize = required(&fields, "n")?;
        let desc = match tag.as_str() {
            "kwise" => DistributionDescriptor::kwise(n, required(&fields, "k")?)?,
            "smallbias" => DistributionDescriptor::small_bias(n, required(&fields, "delta")?)?,
            "almostkwise" => {
                DistributionDescriptor::almost_kwise(n, required(&fields, "k")?, required(&fields, "gamma")?)?
            }
            "pointmass" => {
                let v: BitVector = required(&fields, "v")?;
                if v.len() != n {
                    return Err(Error::Dimension {
                        expected: n,
                        got: v.len(),
                    });
                }
                DistributionDescriptor::point_mass(v)
            }
            "uniform" => DistributionDescriptor::uniform(n),
            other => return Err(Error::Parse(format!("unknown distribution kind {other:?}"))),
        };
        // Field parameters are derived; if present they must agree.
        if let Some(m) = field_value(&fields, "m") {
            if Some(m.parse::<u32>().map_err(|_| Error::Parse(format!("bad m {m:?}")))?) != desc.field_degree {
                return Err(Error::Parse(format!("field degree m={m} disagrees with parameters")));
            }
        }
        if let (Some(poly), Some(ctx)) = (field_value(&fields, "poly"), desc.field()) {
            let parsed = u128::from_str_radix(poly.trim_start_matches("0x"), 16)
                .map_err(|_| Error::Parse(format!("bad poly {poly:?}")))?;
            if parsed != ctx.modulus() {
                return Err(Error::Parse(format!("modulus {poly} disagrees with the standard table")));
            }
        }
        Ok(desc)
    }
}

pub fn sample_kwise(n: usize, k: usize, seed: &BitVector) -> Result<BitVector> {
    DistributionDescriptor::kwise(n, k)?.sample(seed)
}

pub fn sample_small_bias(n: usize, delta: f64, seed: &BitVector) -> Result<BitVector> {
    DistributionDescriptor::small_bias(n, delta)?.sample(seed)
}

pub fn sample_almost_kwise(n: usize, k: usize, gamma: f64, seed: &BitVector) -> Result<BitVector> {
    DistributionDescriptor::almost_kwise(n, k, gamma)?.sample(seed)
}

/// Exact `E_seed χ_α(sample)` over all seeds.
pub fn measure_bias(desc: &DistributionDescriptor, alpha: &BitVector, budget: EnumerationBudget) -> Result<f64> {
    if alpha.len() != desc.n() {
        return Err(Error::Dimension {
            expected: desc.n(),
            got: alpha.len(),
        });
    }
    let a = alpha
        .to_u64()
        .ok_or_else(|| Error::invalid("character", "bias measurement needs n ≤ 64"))?;
    if desc.n() > 64 {
        return Err(Error::invalid("descriptor", "bias measurement needs n ≤ 64"));
    }
    budget.check(format!("seed enumeration of `{desc}`"), desc.seed_bits() as u32)?;
    let total: i64 = (0..1u64 << desc.seed_bits())
        .into_par_iter()
        .map(|s| chi(a, desc.sample_indexed_seed(s)) as i64)
        .sum();
    Ok(total as f64 / 2f64.powi(desc.seed_bits() as i32))
}

/// In-place unnormalized Walsh-Hadamard transform.
pub fn walsh_hadamard(values: &mut [f64]) {
    let n = values.len();
    assert!(n.is_power_of_two(), "transform length must be a power of two");
    let mut h = 1;
    while h < n {
        for block in values.chunks_mut(2 * h) {
            let (lo, hi) = block.split_at_mut(h);
            for (a, b) in lo.iter_mut().zip(hi.iter_mut()) {
                let (x, y) = (*a, *b);
                *a = x + y;
                *b = x - y;
            }
        }
        h *= 2;
    }
}

/// `E χ_α(sample)` for every α at once, from the seed histogram.
pub fn bias_spectrum(desc: &DistributionDescriptor, budget: EnumerationBudget) -> Result<Vec<f64>> {
    let hist = desc.seed_histogram(budget)?;
    let mut values: Vec<f64> = (0..1u64 << desc.n()).map(|x| hist.probability(x)).collect();
    walsh_hadamard(&mut values);
    Ok(values)
}

/// Largest `|E χ_α|` over nonzero α.
pub fn max_bias(desc: &DistributionDescriptor, budget: EnumerationBudget) -> Result<f64> {
    Ok(bias_spectrum(desc, budget)?
        .iter()
        .skip(1)
        .fold(0.0f64, |m, b| m.max(b.abs())))
}

/// Max over k-subsets `S` and patterns `p ∈ F₂^k` of `|Pr[sample|_S = p] − 2^(−k)|`,
/// computed from integer seed counts (so an exactly k-wise space returns 0.0).
pub fn audit_kwise(desc: &DistributionDescriptor, k: usize, budget: EnumerationBudget) -> Result<f64> {
    let n = desc.n();
    if k == 0 || k > n {
        return Err(Error::invalid("audit", format!("k={k} must be in 1..={n}")));
    }
    let hist = desc.seed_histogram(budget)?;
    let s = hist.log2_denominator();
    let support: Vec<(u64, u128)> = hist.support().collect();
    let subsets: Vec<Vec<usize>> = (0..n).combinations(k).collect();
    let worst = subsets
        .par_iter()
        .map(|subset| {
            let mut counts = vec![0u128; 1 << k];
            for &(x, c) in &support {
                let pattern = subset
                    .iter()
                    .enumerate()
                    .fold(0usize, |p, (bit, &coord)| p | ((((x >> coord) & 1) as usize) << bit));
                counts[pattern] += c;
            }
            // |c/2^s − 2^−k| = |c·2^k − 2^s| / 2^(s+k)
            counts
                .iter()
                .map(|&c| {
                    let lhs = c << k;
                    let rhs = 1u128 << s;
                    lhs.abs_diff(rhs)
                })
                .max()
                .unwrap_or(0)
        })
        .max()
        .unwrap_or(0);
    Ok(worst as f64 / 2f64.powi((s as usize + k) as i32))
}

/// `Pr[α ∧ T = 0]` exactly, for a mask distribution `T`.
pub fn kill_probability(mask: &ExactDistribution, alpha: u64) -> f64 {
    let (num, log2_den) = mask.mass_where(|t| t & alpha == 0);
    num as f64 / 2f64.powi(log2_den as i32)
}

/// Mask of the low `n` bits.
pub fn full_mask(n: usize) -> u64 {
    low_mask(n)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn budget() -> EnumerationBudget {
        EnumerationBudget::default()
    }

    #[test]
    fn kwise_zero_seed_is_zero() {
        let out = sample_kwise(4, 1, &BitVector::zeros(2)).unwrap();
        assert_eq!(out.to_string(), "0000");
    }

    #[test]
    fn kwise_single_bit_marginals_uniform() {
        let d = DistributionDescriptor::kwise(4, 1).unwrap();
        assert_eq!(d.seed_bits(), 2);
        let mut ones = [0usize; 4];
        for s in 0..4u64 {
            let out = d.sample(&BitVector::from_u64(2, s)).unwrap();
            for (j, b) in out.iter().enumerate() {
                ones[j] += b as usize;
            }
        }
        assert_eq!(ones, [2, 2, 2, 2]);
    }

    #[test]
    fn kwise_pairs_uniform_over_all_seeds() {
        // n=8, k=2, m=3: 64 seeds; every pair of output bits hits each pattern 16 times.
        let d = DistributionDescriptor::kwise(8, 2).unwrap();
        assert_eq!(d.seed_bits(), 6);
        let outs: Vec<u64> = (0..64).map(|s| d.sample_indexed_seed(s)).collect();
        for i in 0..8 {
            for j in i + 1..8 {
                let mut c = [0; 4];
                for &o in &outs {
                    c[(((o >> i) & 1) | (((o >> j) & 1) << 1)) as usize] += 1;
                }
                assert_eq!(c, [16, 16, 16, 16], "pair ({i},{j})");
            }
        }
    }

    #[test]
    fn small_bias_zero_components_give_zero_output() {
        let d = DistributionDescriptor::small_bias(5, 0.25).unwrap();
        let m = d.field_degree().unwrap() as usize;
        for x in 0..1u64 << m {
            let seed = BitVector::from_u64(2 * m, x);
            assert!(d.sample(&seed).unwrap().is_zero());
        }
        for y in 0..1u64 << m {
            let seed = BitVector::from_u64(2 * m, y << m);
            assert!(d.sample(&seed).unwrap().is_zero());
        }
    }

    #[test]
    fn small_bias_n4_exhaustive_bias_audit() {
        // The polynomial t + t² + t⁴ = t(t³ + t + 1) has four roots in GF(8), so
        // α = 1101 reaches bias 4/8; the bound n/2^m = 1/2 = δ is tight here.
        let d = DistributionDescriptor::small_bias(4, 0.5).unwrap();
        assert_eq!(d.field_degree(), Some(3));
        let spectrum = bias_spectrum(&d, budget()).unwrap();
        let worst = spectrum[1..].iter().fold(0.0f64, |m, b| m.max(b.abs()));
        assert_eq!(worst, 0.5);
        assert_eq!(spectrum[0b1011], 0.5);
        assert!(worst <= 4.0 / 8.0);
    }

    #[test]
    fn almost_kwise_audit_within_gamma() {
        let d = DistributionDescriptor::almost_kwise(4, 2, 0.25).unwrap();
        assert_eq!(d.field_degree(), Some(5));
        let dev = audit_kwise(&d, 2, budget()).unwrap();
        assert!(dev <= 0.25, "deviation {dev}");
        let zero_y = BitVector::from_u64(10, 0b11111);
        assert!(d.sample(&zero_y).unwrap().is_zero());
        let vacuous = DistributionDescriptor::almost_kwise(4, 4, 1.0).unwrap();
        assert!(audit_kwise(&vacuous, 4, budget()).unwrap() <= 1.0);
    }

    #[test]
    fn measure_bias_examples() {
        let u = DistributionDescriptor::uniform(5);
        for a in 1..32 {
            assert_eq!(measure_bias(&u, &BitVector::from_u64(5, a), budget()).unwrap(), 0.0);
        }
        let v: BitVector = "10110".parse().unwrap();
        let p = DistributionDescriptor::point_mass(v.clone());
        for a in 0..32u64 {
            let alpha = BitVector::from_u64(5, a);
            let expected = crate::algebra::character_eval(&alpha, &v).unwrap() as f64;
            assert_eq!(measure_bias(&p, &alpha, budget()).unwrap(), expected);
        }
    }

    #[test]
    fn measure_bias_agrees_with_spectrum() {
        let d = DistributionDescriptor::small_bias(6, 0.25).unwrap();
        let spectrum = bias_spectrum(&d, budget()).unwrap();
        for a in 0..64u64 {
            let direct = measure_bias(&d, &BitVector::from_u64(6, a), budget()).unwrap();
            assert!((direct - spectrum[a as usize]).abs() < 1e-12);
        }
    }

    #[test]
    fn budget_refusal_reports_bit_count() {
        let d = DistributionDescriptor::kwise(16, 8).unwrap();
        match measure_bias(&d, &BitVector::from_u64(16, 1), EnumerationBudget::new(20)) {
            Err(Error::Budget {
                needed_bits,
                budget_bits,
                ..
            }) => {
                assert_eq!(needed_bits, 32);
                assert_eq!(budget_bits, 20);
            }
            other => panic!("expected budget refusal, got {other:?}"),
        }
    }

    #[test]
    fn point_mass_audit_is_half() {
        let p = DistributionDescriptor::point_mass("01".parse().unwrap());
        assert_eq!(audit_kwise(&p, 1, budget()).unwrap(), 0.5);
    }

    #[test]
    fn seed_length_accounting() {
        for n in [2usize, 3, 4, 5, 8, 9, 16, 100] {
            for k in 1..=5 {
                assert_eq!(
                    DistributionDescriptor::kwise(n, k).unwrap().seed_bits(),
                    k * ceil_log2(n as u64) as usize
                );
            }
        }
        assert_eq!(DistributionDescriptor::small_bias(12, 0.125).unwrap().seed_bits(), 2 * 7);
        assert_eq!(DistributionDescriptor::small_bias(16, 0.25).unwrap().seed_bits(), 2 * 6);
        // n·2^(k/2)/γ = 4·2·4 = 32
        assert_eq!(DistributionDescriptor::almost_kwise(4, 2, 0.25).unwrap().seed_bits(), 10);
        assert_eq!(DistributionDescriptor::uniform(7).seed_bits(), 7);
        assert_eq!(DistributionDescriptor::point_mass(BitVector::ones(3)).seed_bits(), 0);
    }

    #[test]
    fn parameter_validation() {
        assert!(DistributionDescriptor::kwise(4, 0).is_err());
        assert!(DistributionDescriptor::small_bias(4, 0.0).is_err());
        assert!(DistributionDescriptor::small_bias(4, 1.5).is_err());
        assert!(DistributionDescriptor::almost_kwise(4, 2, -0.1).is_err());
        assert!(matches!(
            sample_kwise(4, 2, &BitVector::zeros(3)),
            Err(Error::SeedLength { expected: 4, got: 3 })
        ));
    }

    #[test]
    fn oversized_fields_are_layout_only() {
        let d = DistributionDescriptor::small_bias(16, 2f64.powi(-70)).unwrap();
        assert_eq!(d.field_degree(), Some(74));
        assert_eq!(d.seed_bits(), 148);
        assert!(d.field().is_none());
        assert!(matches!(d.sample(&BitVector::zeros(148)), Err(Error::FieldDegree(74))));
    }

    #[test]
    fn descriptor_text_form() {
        let d = DistributionDescriptor::kwise(16, 4).unwrap();
        assert_eq!(d.to_string(), "kwise n=16 k=4 m=4 poly=0x13");
        for d in [
            d,
            DistributionDescriptor::small_bias(10, 0.1).unwrap(),
            DistributionDescriptor::almost_kwise(6, 3, 2f64.powi(-10)).unwrap(),
            DistributionDescriptor::point_mass("0110".parse().unwrap()),
            DistributionDescriptor::uniform(3),
        ] {
            let back: DistributionDescriptor = d.to_string().parse().unwrap();
            assert_eq!(back, d);
        }
        assert!("kwise n=16 k=4 m=5".parse::<DistributionDescriptor>().is_err());
        assert!("kwise n=16 k=4 m=4 poly=0x19".parse::<DistributionDescriptor>().is_err());
        assert!("bogus n=3".parse::<DistributionDescriptor>().is_err());
    }

    #[test]
    fn linear_route_matches_seed_enumeration() {
        for d in [
            DistributionDescriptor::kwise(4, 1).unwrap(),
            DistributionDescriptor::kwise(6, 2).unwrap(),
            DistributionDescriptor::kwise(8, 3).unwrap(),
            DistributionDescriptor::kwise(4, 4).unwrap(),
            DistributionDescriptor::kwise(5, 7).unwrap(),
            DistributionDescriptor::small_bias(5, 0.5).unwrap(),
            DistributionDescriptor::small_bias(7, 0.125).unwrap(),
            DistributionDescriptor::almost_kwise(4, 2, 0.25).unwrap(),
            DistributionDescriptor::point_mass("101".parse().unwrap()),
            DistributionDescriptor::uniform(4),
        ] {
            assert_eq!(
                d.exact_distribution(budget()).unwrap(),
                d.seed_histogram(budget()).unwrap(),
                "{d}"
            );
        }
    }

    #[test]
    fn masks_kill_heavy_characters() {
        for (n, k) in [(6usize, 2usize), (8, 3), (5, 1)] {
            let t = DistributionDescriptor::kwise(n, k)
                .unwrap()
                .exact_distribution(budget())
                .unwrap();
            for alpha in 1..1u64 << n {
                let w = alpha.count_ones() as usize;
                if w < k {
                    continue;
                }
                let p = kill_probability(&t, alpha);
                assert!(p <= 2f64.powi(-(k as i32)) + 1e-15, "n={n} k={k} α={alpha:b}");
                if w == k {
                    assert_eq!(p, 2f64.powi(-(k as i32)));
                }
            }
        }
    }

    #[test]
    fn walsh_hadamard_of_delta_is_all_ones() {
        let mut v = vec![0.0; 8];
        v[0] = 1.0;
        walsh_hadamard(&mut v);
        assert!(v.iter().all(|&x| x == 1.0));
    }
}
