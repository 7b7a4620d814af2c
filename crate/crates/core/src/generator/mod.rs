//! The recursive generators `G_{i+1} = D_i ⊕ (T_i ∧ G_i)`.
//!
//! * **Exact**: `G_0 = 1ⁿ` (no seed), each `D_i` is 2k-wise and each `T_i` is
//!   k-wise independent.
//! * **Star**: `G_0` is `320k`-wise independent, each `D_i` is δ-biased and
//!   each `T_i` is γ-almost k-wise independent.
//!
//! Seed layout (`layout=v1`): the base seed first, then levels `r, r−1, …, 1`,
//! with `D_i` before `T_i` inside each level. Every slice is disjoint.

mod params;

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::algebra::BitVector;
use crate::dist::ExactDistribution;
use crate::error::{Error, Result};
use crate::fourier::MassBoundMode;
use crate::primitives::{field_value, parse_fields, required, DistributionDescriptor, EnumerationBudget};

pub use params::{derive_params_exact, derive_params_star, StarParams};

/// Independence of the star variant's base distribution, in units of `k`.
pub const STAR_BASE_INDEPENDENCE_FACTOR: usize = 320;

/// Largest `n` for which output distributions are computed exactly.
pub const MAX_EXACT_OUTPUT_BITS: usize = 16;

pub const LAYOUT_VERSION: &str = "v1";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Exact,
    Star,
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::Exact => "exact",
            Variant::Star => "star",
        })
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(Variant::Exact),
            "star" => Ok(Variant::Star),
            other => Err(Error::Parse(format!("unknown variant {other:?}"))),
        }
    }
}

/// Whether `(k, r, δ, γ)` came from the parameter formulas or were given.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamSource {
    Derived,
    Override,
}

impl fmt::Display for ParamSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ParamSource::Derived => "derived",
            ParamSource::Override => "override",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Role {
    Base,
    D,
    T,
}

/// One seed slice: level 0 is the base.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LayoutEntry {
    pub level: usize,
    pub role: Role,
    pub offset: usize,
    pub len: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GeneratorSpec {
    variant: Variant,
    n: usize,
    w: usize,
    k: usize,
    r: usize,
    epsilon: Option<f64>,
    delta: Option<f64>,
    gamma: Option<f64>,
    mass_mode: Option<MassBoundMode>,
    source: ParamSource,
    base: DistributionDescriptor,
    d: DistributionDescriptor,
    t: DistributionDescriptor,
    layout: Vec<LayoutEntry>,
}

impl GeneratorSpec {
    fn assemble(
        variant: Variant,
        n: usize,
        w: usize,
        k: usize,
        r: usize,
        star: Option<(f64, f64)>,
        source: ParamSource,
    ) -> Result<Self> {
        if n == 0 || w == 0 || k == 0 {
            return Err(Error::invalid("generator", format!("need n, w, k ≥ 1 (n={n} w={w} k={k})")));
        }
        let (base, d, t, delta, gamma) = match (variant, star) {
            (Variant::Exact, _) => (
                DistributionDescriptor::point_mass(BitVector::ones(n)),
                DistributionDescriptor::kwise(n, 2 * k)?,
                DistributionDescriptor::kwise(n, k)?,
                None,
                None,
            ),
            (Variant::Star, Some((delta, gamma))) => (
                DistributionDescriptor::kwise(n, STAR_BASE_INDEPENDENCE_FACTOR * k)?,
                DistributionDescriptor::small_bias(n, delta)?,
                DistributionDescriptor::almost_kwise(n, k, gamma)?,
                Some(delta),
                Some(gamma),
            ),
            (Variant::Star, None) => return Err(Error::invalid("generator", "star variant needs δ and γ")),
        };
        let mut layout = vec![LayoutEntry {
            level: 0,
            role: Role::Base,
            offset: 0,
            len: base.seed_bits(),
        }];
        let mut offset = base.seed_bits();
        for level in (1..=r).rev() {
            for (role, desc) in [(Role::D, &d), (Role::T, &t)] {
                layout.push(LayoutEntry {
                    level,
                    role,
                    offset,
                    len: desc.seed_bits(),
                });
                offset += desc.seed_bits();
            }
        }
        Ok(GeneratorSpec {
            variant,
            n,
            w,
            k,
            r,
            epsilon: None,
            delta,
            gamma,
            mass_mode: None,
            source,
            base,
            d,
            t,
            layout,
        })
    }

    /// Exact variant with derived `(k, r)`.
    pub fn exact(n: usize, w: usize) -> Result<Self> {
        let (k, r) = derive_params_exact(n, w)?;
        Self::assemble(Variant::Exact, n, w, k, r, None, ParamSource::Derived)
    }

    /// Exact variant with explicit `(k, r)`.
    pub fn exact_with(n: usize, w: usize, k: usize, r: usize) -> Result<Self> {
        Self::assemble(Variant::Exact, n, w, k, r, None, ParamSource::Override)
    }

    /// Star variant with all parameters derived from `ε`.
    pub fn star(n: usize, w: usize, epsilon: f64, mode: MassBoundMode) -> Result<Self> {
        let p = derive_params_star(n, w, epsilon, mode)?;
        let mut spec = Self::assemble(
            Variant::Star,
            n,
            w,
            p.k,
            p.r,
            Some((p.delta, p.gamma)),
            ParamSource::Derived,
        )?;
        spec.epsilon = Some(epsilon);
        spec.mass_mode = Some(mode);
        Ok(spec)
    }

    /// Star variant with explicit `(k, r, δ, γ)`.
    pub fn star_with(n: usize, w: usize, k: usize, r: usize, delta: f64, gamma: f64) -> Result<Self> {
        Self::assemble(Variant::Star, n, w, k, r, Some((delta, gamma)), ParamSource::Override)
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn w(&self) -> usize {
        self.w
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn r(&self) -> usize {
        self.r
    }

    pub fn epsilon(&self) -> Option<f64> {
        self.epsilon
    }

    pub fn delta(&self) -> Option<f64> {
        self.delta
    }

    pub fn gamma(&self) -> Option<f64> {
        self.gamma
    }

    pub fn mass_mode(&self) -> Option<MassBoundMode> {
        self.mass_mode
    }

    pub fn source(&self) -> ParamSource {
        self.source
    }

    pub fn base(&self) -> &DistributionDescriptor {
        &self.base
    }

    /// Descriptor shared by every `D_i`.
    pub fn d(&self) -> &DistributionDescriptor {
        &self.d
    }

    /// Descriptor shared by every `T_i`.
    pub fn t(&self) -> &DistributionDescriptor {
        &self.t
    }

    pub fn layout(&self) -> &[LayoutEntry] {
        &self.layout
    }

    /// Total seed bits.
    pub fn seed_length(&self) -> usize {
        self.layout.iter().map(|e| e.len).sum()
    }

    fn entry(&self, level: usize, role: Role) -> &LayoutEntry {
        self.layout
            .iter()
            .find(|e| e.level == level && e.role == role)
            .expect("layout covers every level")
    }

    fn check_seed(&self, seed: &BitVector) -> Result<()> {
        if seed.len() != self.seed_length() {
            return Err(Error::SeedLength {
                expected: self.seed_length(),
                got: seed.len(),
            });
        }
        Ok(())
    }

    fn sample_slice(&self, desc: &DistributionDescriptor, seed: &BitVector, e: &LayoutEntry) -> Result<BitVector> {
        desc.sample(&seed.slice(e.offset, e.len)?)
    }

    pub fn expand_seed(&self, seed: &BitVector) -> Result<BitVector> {
        self.check_seed(seed)?;
        let mut g = self.sample_slice(&self.base, seed, self.entry(0, Role::Base))?;
        for level in 1..=self.r {
            let d = self.sample_slice(&self.d, seed, self.entry(level, Role::D))?;
            let t = self.sample_slice(&self.t, seed, self.entry(level, Role::T))?;
            g = d.xor(&t.and(&g)?)?;
        }
        Ok(g)
    }

    /// Word-valued [`expand_seed`](Self::expand_seed) for `n ≤ 64`.
    pub fn expand_seed_word(&self, seed: &BitVector) -> Result<u64> {
        self.check_seed(seed)?;
        let word = |desc: &DistributionDescriptor, e: &LayoutEntry| desc.sample_word(&seed.slice(e.offset, e.len)?);
        let mut g = word(&self.base, self.entry(0, Role::Base))?;
        for level in 1..=self.r {
            let d = word(&self.d, self.entry(level, Role::D))?;
            let t = word(&self.t, self.entry(level, Role::T))?;
            g = d ^ (t & g);
        }
        Ok(g)
    }

    fn check_exact_size(&self) -> Result<()> {
        if self.n > MAX_EXACT_OUTPUT_BITS {
            return Err(Error::Budget {
                what: format!("exact output distribution over F_2^{}", self.n),
                needed_bits: self.n as u32,
                budget_bits: MAX_EXACT_OUTPUT_BITS as u32,
            });
        }
        Ok(())
    }

    /// Exact pmfs of `(G_0, D, T)`.
    pub fn component_distributions(
        &self,
        budget: EnumerationBudget,
    ) -> Result<(ExactDistribution, ExactDistribution, ExactDistribution)> {
        self.check_exact_size()?;
        Ok((
            self.base.exact_distribution(budget)?,
            self.d.exact_distribution(budget)?,
            self.t.exact_distribution(budget)?,
        ))
    }

    /// Exact pmf of `G_r`, level by level from the component pmfs.
    pub fn exact_output_distribution(&self, budget: EnumerationBudget) -> Result<ExactDistribution> {
        let (mut g, d, t) = self.component_distributions(budget)?;
        for _ in 0..self.r {
            g = g.noise_step(&d, &t)?;
        }
        Ok(g)
    }

    /// Pmf of `G_r` by running [`expand_seed`](Self::expand_seed) on every seed.
    pub fn seed_histogram(&self, budget: EnumerationBudget) -> Result<ExactDistribution> {
        self.check_exact_size()?;
        let bits = self.seed_length();
        budget.check(format!("seed enumeration of `{self}`"), bits as u32)?;
        let size = 1usize << self.n;
        let counts = (0..1u64 << bits)
            .into_par_iter()
            .try_fold(
                || vec![0u128; size],
                |mut acc, s| {
                    acc[self.expand_seed_word(&BitVector::from_u64(bits, s))? as usize] += 1;
                    Ok::<_, Error>(acc)
                },
            )
            .try_reduce(
                || vec![0u128; size],
                |mut a, b| {
                    a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                    Ok(a)
                },
            )?;
        ExactDistribution::from_counts(self.n, counts, bits as u32)
    }

    /// Pmf of the noise mask `Y = T_1 ∧ ⋯ ∧ T_r`.
    pub fn noise_mask_distribution(&self, budget: EnumerationBudget) -> Result<ExactDistribution> {
        self.check_exact_size()?;
        let t = self.t.exact_distribution(budget)?;
        let mut y = ExactDistribution::point_mass(self.n, crate::primitives::full_mask(self.n))?;
        for _ in 0..self.r {
            y = y.and_combine(&t)?;
        }
        Ok(y)
    }
}

impl fmt::Display for GeneratorSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "gen variant={} n={} w={} k={} r={}",
            self.variant, self.n, self.w, self.k, self.r
        )?;
        if let (Some(delta), Some(gamma)) = (self.delta, self.gamma) {
            write!(f, " delta={delta:e} gamma={gamma:e}")?;
        }
        write!(f, " layout={LAYOUT_VERSION}")?;
        if self.source == ParamSource::Derived {
            write!(f, " params=derived")?;
            if let Some(eps) = self.epsilon {
                write!(f, " eps={eps:e}")?;
            }
            if let Some(mode) = self.mass_mode {
                write!(f, " mass={mode}")?;
            }
        }
        Ok(())
    }
}

impl FromStr for GeneratorSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (tag, fields) = parse_fields(s)?;
        if tag != "gen" {
            return Err(Error::Parse(format!("expected `gen`, got {tag:?}")));
        }
        if let Some(layout) = field_value(&fields, "layout") {
            if layout != LAYOUT_VERSION {
                return Err(Error::Parse(format!("unsupported seed layout {layout:?}")));
            }
        }
        let variant: Variant = required(&fields, "variant")?;
        let n: usize = required(&fields, "n")?;
        let w: usize = required(&fields, "w")?;
        let k: usize = required(&fields, "k")?;
        let r: usize = required(&fields, "r")?;
        let derived = field_value(&fields, "params") == Some("derived");
        let spec = match (variant, derived) {
            (Variant::Exact, true) => GeneratorSpec::exact(n, w)?,
            (Variant::Exact, false) => GeneratorSpec::exact_with(n, w, k, r)?,
            (Variant::Star, true) => {
                let mode = match field_value(&fields, "mass") {
                    Some(m) => m.parse()?,
                    None => MassBoundMode::Trivial,
                };
                GeneratorSpec::star(n, w, required(&fields, "eps")?, mode)?
            }
            (Variant::Star, false) => {
                GeneratorSpec::star_with(n, w, k, r, required(&fields, "delta")?, required(&fields, "gamma")?)?
            }
        };
        if spec.k != k || spec.r != r {
            return Err(Error::Parse(format!(
                "k={k} r={r} disagree with derived k={} r={}",
                spec.k, spec.r
            )));
        }
        Ok(spec)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn budget() -> EnumerationBudget {
        EnumerationBudget::default()
    }

    #[test]
    fn layout_is_contiguous() {
        for spec in [
            GeneratorSpec::exact_with(8, 2, 3, 2).unwrap(),
            GeneratorSpec::star_with(6, 2, 3, 2, 2f64.powi(-10), 2f64.powi(-10)).unwrap(),
            GeneratorSpec::exact(256, 256).unwrap(),
        ] {
            let mut next = 0;
            for e in spec.layout() {
                assert_eq!(e.offset, next);
                next += e.len;
            }
            assert_eq!(next, spec.seed_length());
            let roles: Vec<(usize, Role)> = spec.layout().iter().map(|e| (e.level, e.role)).collect();
            assert_eq!(roles[0], (0, Role::Base));
            assert_eq!(roles[1], (spec.r(), Role::D));
            assert_eq!(roles[2], (spec.r(), Role::T));
            assert_eq!(roles.last().unwrap(), &(1, Role::T));
        }
    }

    #[test]
    fn seed_lengths() {
        assert_eq!(GeneratorSpec::exact(256, 256).unwrap().seed_length(), 26880);
        assert_eq!(GeneratorSpec::exact_with(8, 2, 3, 0).unwrap().seed_length(), 0);
        let star = GeneratorSpec::star_with(6, 2, 3, 2, 2f64.powi(-10), 2f64.powi(-10)).unwrap();
        // base 960·3; D: m = ⌈lg(6·2^10)⌉ = 13; T: m = ⌈lg(6·2^1.5·2^10)⌉ = 15
        assert_eq!(star.base().seed_bits(), 960 * 3);
        assert_eq!(star.seed_length(), 960 * 3 + 2 * (2 * 13 + 2 * 15));
        for n in [4usize, 8, 16, 100] {
            for k in 1..6 {
                for r in 0..4 {
                    let s = GeneratorSpec::exact_with(n, 2, k, r).unwrap();
                    let m = crate::algebra::ceil_log2(n as u64) as usize;
                    assert_eq!(s.seed_length(), 3 * r * k * m);
                }
            }
        }
    }

    #[test]
    fn r_zero_is_all_ones() {
        let spec = GeneratorSpec::exact_with(5, 2, 2, 0).unwrap();
        assert_eq!(spec.expand_seed(&BitVector::zeros(0)).unwrap(), BitVector::ones(5));
        assert_eq!(
            spec.exact_output_distribution(budget()).unwrap(),
            ExactDistribution::point_mass(5, 0b11111).unwrap()
        );
    }

    #[test]
    fn one_level_hand_trace() {
        // n=4, k=1: m=2; D is 2-wise (c0, c1), T is 1-wise (c0).
        let spec = GeneratorSpec::exact_with(4, 2, 1, 1).unwrap();
        assert_eq!(spec.seed_length(), 6);
        for s in 0..64u64 {
            let seed = BitVector::from_u64(6, s);
            let d = spec.d().sample(&seed.slice(0, 4).unwrap()).unwrap();
            let t = spec.t().sample(&seed.slice(4, 2).unwrap()).unwrap();
            assert_eq!(spec.expand_seed(&seed).unwrap(), d.xor(&t).unwrap());
        }
        // D seed c0 = 1, c1 = 0 gives p ≡ 1: output bits all 1; T seed c0 = 1 likewise.
        let seed: BitVector = "100010".parse().unwrap();
        assert_eq!(spec.expand_seed(&seed).unwrap().to_string(), "0000");
        let seed: BitVector = "100000".parse().unwrap();
        assert_eq!(spec.expand_seed(&seed).unwrap().to_string(), "1111");
    }

    #[test]
    fn dp_matches_seed_enumeration() {
        for (n, k, r) in [(4, 1, 1), (6, 2, 1), (4, 1, 2), (5, 1, 2)] {
            let spec = GeneratorSpec::exact_with(n, 2, k, r).unwrap();
            let dp = spec.exact_output_distribution(budget()).unwrap();
            assert_eq!(dp, spec.seed_histogram(budget()).unwrap(), "n={n} k={k} r={r}");
            let total: u128 = dp.numerators().iter().sum();
            assert_eq!(total, 1u128 << dp.log2_denominator());
        }
    }

    #[test]
    fn uniform_collapse() {
        let spec = GeneratorSpec::exact_with(6, 2, 3, 1).unwrap();
        assert!(spec.exact_output_distribution(budget()).unwrap().is_uniform());
        let spec = GeneratorSpec::exact_with(8, 2, 4, 3).unwrap();
        assert!(spec.exact_output_distribution(budget()).unwrap().is_uniform());
    }

    #[test]
    fn noise_mask_decays() {
        for (n, k, r) in [(6usize, 1usize, 1usize), (6, 1, 3), (8, 2, 2), (5, 3, 4)] {
            let spec = GeneratorSpec::exact_with(n, 2, k, r).unwrap();
            let y = spec.noise_mask_distribution(budget()).unwrap();
            for j in 0..n {
                let (num, den) = y.mass_where(|v| (v >> j) & 1 == 1);
                assert!(num << r <= 1u128 << den, "n={n} k={k} r={r} j={j}");
            }
        }
    }

    #[test]
    fn expand_seed_is_deterministic_and_checked() {
        let spec = GeneratorSpec::exact_with(8, 2, 3, 2).unwrap();
        assert_eq!(spec.seed_length(), 54);
        let seed = BitVector::from_hex(spec.seed_length(), "0123456789ab0d").unwrap();
        assert_eq!(spec.expand_seed(&seed).unwrap(), spec.expand_seed(&seed).unwrap());
        assert_eq!(
            spec.expand_seed(&seed).unwrap().to_u64().unwrap(),
            spec.expand_seed_word(&seed).unwrap()
        );
        assert!(matches!(
            spec.expand_seed(&BitVector::zeros(3)),
            Err(Error::SeedLength { .. })
        ));
    }

    #[test]
    fn star_variant_samples() {
        let spec = GeneratorSpec::star_with(6, 2, 3, 2, 2f64.powi(-10), 2f64.powi(-10)).unwrap();
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(1);
        let seed = BitVector::random(spec.seed_length(), &mut rng);
        assert_eq!(spec.expand_seed(&seed).unwrap().len(), 6);
        // base is 960-wise over 6 bits: uniform
        let (base, _, _) = spec.component_distributions(budget()).unwrap();
        assert!(base.is_uniform());
    }

    #[test]
    fn derived_star_spec_is_layout_only() {
        let spec = GeneratorSpec::star(16, 2, 0.5, MassBoundMode::Trivial).unwrap();
        assert_eq!((spec.k(), spec.r()), (18, 4));
        assert_eq!(spec.t().field_degree(), Some(67));
        assert!(spec.seed_length() > 0);
        let seed = BitVector::zeros(spec.seed_length());
        assert!(matches!(spec.expand_seed(&seed), Err(Error::FieldDegree(67))));
    }

    #[test]
    fn text_form() {
        let spec = GeneratorSpec::exact_with(16, 4, 6, 3).unwrap();
        assert_eq!(spec.to_string(), "gen variant=exact n=16 w=4 k=6 r=3 layout=v1");
        for spec in [
            spec,
            GeneratorSpec::exact(64, 4).unwrap(),
            GeneratorSpec::star_with(6, 2, 3, 2, 2f64.powi(-10), 0.001).unwrap(),
            GeneratorSpec::star(16, 2, 0.5, MassBoundMode::Trivial).unwrap(),
        ] {
            let back: GeneratorSpec = spec.to_string().parse().unwrap();
            assert_eq!(back, spec);
        }
        assert!("gen variant=exact n=16 w=4 k=6 r=3 layout=v2".parse::<GeneratorSpec>().is_err());
        assert!("gen variant=exact n=16 w=4 k=5 r=3 layout=v1 params=derived"
            .parse::<GeneratorSpec>()
            .is_err());
    }
}
