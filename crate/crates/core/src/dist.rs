//! Exact probability mass functions over F₂ⁿ with power-of-two denominators.

use rayon::prelude::*;

use crate::error::{Error, Result};

/// Largest `n` for which a dense pmf over F₂ⁿ is materialized.
pub const MAX_DENSE_BITS: usize = 20;

/// A pmf over F₂ⁿ whose masses are `numerator / 2^log2_denominator`.
///
/// Always stored in lowest terms (some numerator is odd, unless the
/// denominator is 1), so two equal distributions compare equal structurally.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct ExactDistribution {
    n: usize,
    log2_denominator: u32,
    numerators: Vec<u128>,
}

/// Below this many bits the direct support product is used.
const TRANSFORM_MIN_BITS: usize = 9;

fn hadamard_i128(v: &mut [i128]) {
    let mut h = 1;
    while h < v.len() {
        for block in v.chunks_mut(2 * h) {
            let (lo, hi) = block.split_at_mut(h);
            for (x, y) in lo.iter_mut().zip(hi) {
                let (a, b) = (*x, *y);
                *x = a + b;
                *y = a - b;
            }
        }
        h *= 2;
    }
}

fn superset_sums(v: &mut [u128]) {
    let mut h = 1;
    while h < v.len() {
        for block in v.chunks_mut(2 * h) {
            let (lo, hi) = block.split_at_mut(h);
            lo.iter_mut().zip(hi.iter()).for_each(|(x, y)| *x += y);
        }
        h *= 2;
    }
}

fn superset_differences(v: &mut [u128]) {
    let mut h = 1;
    while h < v.len() {
        for block in v.chunks_mut(2 * h) {
            let (lo, hi) = block.split_at_mut(h);
            lo.iter_mut().zip(hi.iter()).for_each(|(x, y)| *x -= y);
        }
        h *= 2;
    }
}

fn overflow(what: &str) -> Error {
    Error::Budget {
        what: format!("{what} (dyadic numerator overflow)"),
        needed_bits: 128,
        budget_bits: 127,
    }
}

impl ExactDistribution {
    fn check_n(n: usize) -> Result<()> {
        if n > MAX_DENSE_BITS {
            return Err(Error::Budget {
                what: format!("dense pmf over F_2^{n}"),
                needed_bits: n as u32,
                budget_bits: MAX_DENSE_BITS as u32,
            });
        }
        Ok(())
    }

    pub fn point_mass(n: usize, x: u64) -> Result<Self> {
        Self::check_n(n)?;
        let mut numerators = vec![0u128; 1 << n];
        numerators[x as usize] = 1;
        Ok(ExactDistribution {
            n,
            log2_denominator: 0,
            numerators,
        })
    }

    pub fn uniform(n: usize) -> Result<Self> {
        Self::check_n(n)?;
        Ok(ExactDistribution {
            n,
            log2_denominator: n as u32,
            numerators: vec![1; 1 << n],
        })
    }

    /// Builds a pmf from outcome counts that total exactly `2^log2_total`.
    pub fn from_counts(n: usize, counts: Vec<u128>, log2_total: u32) -> Result<Self> {
        Self::check_n(n)?;
        if counts.len() != 1 << n {
            return Err(Error::Dimension {
                expected: 1 << n,
                got: counts.len(),
            });
        }
        let total = counts
            .iter()
            .try_fold(0u128, |acc, &c| acc.checked_add(c))
            .ok_or_else(|| overflow("count total"))?;
        if log2_total >= 128 || total != 1u128 << log2_total {
            return Err(Error::invalid(
                "distribution",
                format!("counts total {total}, expected 2^{log2_total}"),
            ));
        }
        let mut d = ExactDistribution {
            n,
            log2_denominator: log2_total,
            numerators: counts,
        };
        d.reduce();
        Ok(d)
    }

    fn reduce(&mut self) {
        let tz = self
            .numerators
            .iter()
            .filter(|&&c| c != 0)
            .map(|c| c.trailing_zeros())
            .min()
            .unwrap_or(0)
            .min(self.log2_denominator);
        if tz > 0 {
            for c in &mut self.numerators {
                *c >>= tz;
            }
            self.log2_denominator -= tz;
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn log2_denominator(&self) -> u32 {
        self.log2_denominator
    }

    pub fn numerators(&self) -> &[u128] {
        &self.numerators
    }

    pub fn numerator(&self, x: u64) -> u128 {
        self.numerators[x as usize]
    }

    pub fn probability(&self, x: u64) -> f64 {
        self.numerators[x as usize] as f64 / 2f64.powi(self.log2_denominator as i32)
    }

    /// `(outcome, numerator)` pairs with nonzero mass.
    pub fn support(&self) -> impl Iterator<Item = (u64, u128)> + '_ {
        self.numerators
            .iter()
            .enumerate()
            .filter(|(_, &c)| c != 0)
            .map(|(x, &c)| (x as u64, c))
    }

    pub fn support_size(&self) -> usize {
        self.numerators.iter().filter(|&&c| c != 0).count()
    }

    /// Outcomes with their probabilities as `f64`.
    pub fn weighted_support(&self) -> Vec<(u64, f64)> {
        let scale = 2f64.powi(-(self.log2_denominator as i32));
        self.support().map(|(x, c)| (x, c as f64 * scale)).collect()
    }

    pub fn is_uniform(&self) -> bool {
        self.log2_denominator == self.n as u32 && self.numerators.iter().all(|&c| c == 1)
    }

    /// Distribution of `f(X)` for a map `f: F₂ⁿ → F₂ⁿ`.
    pub fn push_forward(&self, f: impl Fn(u64) -> u64) -> ExactDistribution {
        let mut numerators = vec![0u128; 1 << self.n];
        for (x, c) in self.support() {
            numerators[f(x) as usize] += c;
        }
        let mut d = ExactDistribution {
            n: self.n,
            log2_denominator: self.log2_denominator,
            numerators,
        };
        d.reduce();
        d
    }

    fn combine(
        &self,
        other: &ExactDistribution,
        op: impl Fn(u64, u64) -> u64 + Sync,
        what: &str,
    ) -> Result<ExactDistribution> {
        if self.n != other.n {
            return Err(Error::Dimension {
                expected: self.n,
                got: other.n,
            });
        }
        let log2_denominator = self.log2_denominator + other.log2_denominator;
        if log2_denominator >= 128 {
            return Err(overflow(what));
        }
        let size = 1usize << self.n;
        let left: Vec<(u64, u128)> = self.support().collect();
        let right: Vec<(u64, u128)> = other.support().collect();
        let numerators = left
            .par_chunks(64)
            .try_fold(
                || vec![0u128; size],
                |mut acc, chunk| {
                    for &(a, ca) in chunk {
                        for &(b, cb) in &right {
                            let slot = &mut acc[op(a, b) as usize];
                            *slot = ca
                                .checked_mul(cb)
                                .and_then(|p| slot.checked_add(p))
                                .ok_or_else(|| overflow(what))?;
                        }
                    }
                    Ok::<_, Error>(acc)
                },
            )
            .try_reduce(
                || vec![0u128; size],
                |mut a, b| {
                    for (x, y) in a.iter_mut().zip(b) {
                        *x = x.checked_add(y).ok_or_else(|| overflow(what))?;
                    }
                    Ok(a)
                },
            )?;
        let mut d = ExactDistribution {
            n: self.n,
            log2_denominator,
            numerators,
        };
        d.reduce();
        Ok(d)
    }

    fn use_transform(&self, other: &ExactDistribution) -> bool {
        self.n >= TRANSFORM_MIN_BITS
            && self.n == other.n
            && (self.log2_denominator + other.log2_denominator) as usize + self.n < 126
            && self.support_size().saturating_mul(other.support_size()) > self.n << self.n
    }

    fn from_numerators(n: usize, log2_denominator: u32, numerators: Vec<u128>) -> ExactDistribution {
        let mut d = ExactDistribution {
            n,
            log2_denominator,
            numerators,
        };
        d.reduce();
        d
    }

    /// Distribution of `X ⊕ Y` for independent `X ~ self`, `Y ~ other`.
    pub fn xor_convolve(&self, other: &ExactDistribution) -> Result<ExactDistribution> {
        if !self.use_transform(other) {
            return self.combine(other, |a, b| a ^ b, "xor convolution");
        }
        // Integer Walsh-Hadamard: the pointwise product, transformed back,
        // is 2ⁿ times the convolution.
        let mut a: Vec<i128> = self.numerators.iter().map(|&c| c as i128).collect();
        let mut b: Vec<i128> = other.numerators.iter().map(|&c| c as i128).collect();
        hadamard_i128(&mut a);
        hadamard_i128(&mut b);
        a.iter_mut().zip(&b).for_each(|(x, y)| *x *= y);
        hadamard_i128(&mut a);
        let numerators = a.into_iter().map(|v| (v >> self.n) as u128).collect();
        Ok(Self::from_numerators(
            self.n,
            self.log2_denominator + other.log2_denominator,
            numerators,
        ))
    }

    /// Distribution of `X ∧ Y` for independent `X ~ self`, `Y ~ other`.
    pub fn and_combine(&self, other: &ExactDistribution) -> Result<ExactDistribution> {
        if !self.use_transform(other) {
            return self.combine(other, |a, b| a & b, "and combination");
        }
        // Superset sums multiply under ∧.
        let mut a = self.numerators.clone();
        let mut b = other.numerators.clone();
        superset_sums(&mut a);
        superset_sums(&mut b);
        a.iter_mut().zip(&b).for_each(|(x, y)| *x *= y);
        superset_differences(&mut a);
        Ok(Self::from_numerators(
            self.n,
            self.log2_denominator + other.log2_denominator,
            a,
        ))
    }

    /// Distribution of `D ⊕ (T ∧ G)` with `G ~ self` and independent `D`, `T`.
    pub fn noise_step(&self, d: &ExactDistribution, t: &ExactDistribution) -> Result<ExactDistribution> {
        t.and_combine(self)?.xor_convolve(d)
    }

    /// `Pr[X ∈ S]` as an exact `(numerator, log2_denominator)` pair.
    pub fn mass_where(&self, pred: impl Fn(u64) -> bool) -> (u128, u32) {
        let num = self.support().filter(|&(x, _)| pred(x)).map(|(_, c)| c).sum();
        (num, self.log2_denominator)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pseudo_random(n: usize, seed: u64, sparse: bool) -> ExactDistribution {
        let mut state = seed.wrapping_mul(0x9e37_79b9_7f4a_7c15) | 1;
        let counts: Vec<u128> = (0..1u64 << n)
            .map(|_| {
                state ^= state << 13;
                state ^= state >> 7;
                state ^= state << 17;
                if sparse && state % 5 != 0 {
                    0
                } else {
                    (state % 7) as u128
                }
            })
            .collect();
        let total: u128 = counts.iter().sum();
        let log2 = 128 - total.leading_zeros();
        let mut padded = counts;
        padded[0] += (1u128 << log2) - total;
        ExactDistribution::from_counts(n, padded, log2).unwrap()
    }

    #[test]
    fn transforms_match_direct_products() {
        for seed in 0..4 {
            let (x, y) = (pseudo_random(10, seed, false), pseudo_random(10, seed + 9, seed % 2 == 0));
            assert!(x.use_transform(&y));
            assert_eq!(x.xor_convolve(&y).unwrap(), x.combine(&y, |a, b| a ^ b, "xor").unwrap());
            assert_eq!(x.and_combine(&y).unwrap(), x.combine(&y, |a, b| a & b, "and").unwrap());
        }
    }

    #[test]
    fn reduces_to_lowest_terms() {
        let d = ExactDistribution::from_counts(2, vec![4, 4, 4, 4], 4).unwrap();
        assert_eq!(d, ExactDistribution::uniform(2).unwrap());
        assert!(d.is_uniform());
        let p = ExactDistribution::from_counts(2, vec![0, 0, 8, 0], 3).unwrap();
        assert_eq!(p, ExactDistribution::point_mass(2, 2).unwrap());
        assert_eq!(p.log2_denominator(), 0);
    }

    #[test]
    fn rejects_bad_totals() {
        assert!(ExactDistribution::from_counts(1, vec![1, 2], 2).is_err());
        assert!(ExactDistribution::from_counts(1, vec![1, 1, 1], 2).is_err());
    }

    #[test]
    fn uniform_absorbs_xor() {
        let u = ExactDistribution::uniform(3).unwrap();
        let p = ExactDistribution::from_counts(3, vec![3, 0, 1, 0, 0, 0, 0, 4], 3).unwrap();
        assert!(p.xor_convolve(&u).unwrap().is_uniform());
    }

    #[test]
    fn noise_step_with_point_masses() {
        let g = ExactDistribution::point_mass(4, 0b1111).unwrap();
        let d = ExactDistribution::point_mass(4, 0b0101).unwrap();
        let t = ExactDistribution::point_mass(4, 0b0011).unwrap();
        let out = g.noise_step(&d, &t).unwrap();
        assert_eq!(out, ExactDistribution::point_mass(4, 0b0101 ^ 0b0011).unwrap());
    }

    #[test]
    fn masses_sum_to_one_after_combination() {
        let a = ExactDistribution::from_counts(3, vec![1, 2, 0, 1, 0, 0, 4, 0], 3).unwrap();
        let b = ExactDistribution::from_counts(3, vec![0, 1, 1, 0, 0, 0, 0, 2], 2).unwrap();
        let c = a.noise_step(&b, &a).unwrap();
        let total: u128 = c.numerators().iter().sum();
        assert_eq!(total, 1u128 << c.log2_denominator());
    }
}
