//! Arithmetic in GF(2^m), 1 ≤ m ≤ 64.
//!
//! Elements are polynomials over GF(2) packed into a `u64` (bit `i` is the
//! coefficient of `t^i`). Moduli come from a fixed table of minimal-weight
//! irreducible polynomials: the trinomial `t^m + t^a + 1` with the smallest
//! `a` when one exists, otherwise the pentanomial `t^m + t^a + t^b + t^c + 1`
//! with `(a, b, c)` lexicographically smallest. Degree 1 uses `t + 1`.

use std::fmt;
use std::sync::OnceLock;

use crate::error::{Error, Result};

pub const MAX_FIELD_DEGREE: u32 = 64;

/// Largest degree whose irreducibility is checked by exhaustive trial division.
pub const EXHAUSTIVE_IRREDUCIBILITY_DEGREE: u32 = 32;

/// `LOW_WEIGHT_MODULI[m - 1]` is the modulus for GF(2^m), including the leading term.
pub const LOW_WEIGHT_MODULI: [u128; 64] = [
    0x3,
    0x7,
    0xb,
    0x13,
    0x25,
    0x43,
    0x83,
    0x11b,
    0x203,
    0x409,
    0x805,
    0x1009,
    0x201b,
    0x4021,
    0x8003,
    0x1002b,
    0x20009,
    0x40009,
    0x80027,
    0x100009,
    0x200005,
    0x400003,
    0x800021,
    0x100001b,
    0x2000009,
    0x400001b,
    0x8000027,
    0x10000003,
    0x20000005,
    0x40000003,
    0x80000009,
    0x10000008d,
    0x200000401,
    0x400000081,
    0x800000005,
    0x1000000201,
    0x2000000053,
    0x4000000063,
    0x8000000011,
    0x10000000039,
    0x20000000009,
    0x40000000081,
    0x80000000059,
    0x100000000021,
    0x20000000001b,
    0x400000000003,
    0x800000000021,
    0x100000000002d,
    0x2000000000201,
    0x400000000001d,
    0x800000000004b,
    0x10000000000009,
    0x20000000000047,
    0x40000000000201,
    0x80000000000081,
    0x100000000000095,
    0x200000000000011,
    0x400000000080001,
    0x800000000000095,
    0x1000000000000003,
    0x2000000000000027,
    0x4000000020000001,
    0x8000000000000003,
    0x1000000000000001b,
];

/// An element of GF(2^m); meaningful only together with its [`FieldContext`].
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct FieldElement(u64);

impl FieldElement {
    pub const ZERO: FieldElement = FieldElement(0);
    pub const ONE: FieldElement = FieldElement(1);

    pub fn value(self) -> u64 {
        self.0
    }

    pub fn is_zero(self) -> bool {
        self.0 == 0
    }
}

impl fmt::Debug for FieldElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "0x{:x}", self.0)
    }
}

/// GF(2^m) = GF(2)[t] / (modulus).
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub struct FieldContext {
    m: u32,
    modulus: u128,
}

#[inline]
fn degree(p: u128) -> i32 {
    127 - p.leading_zeros() as i32
}

/// Carry-less product of two polynomials of degree < 64.
#[inline]
fn clmul(a: u64, b: u64) -> u128 {
    let a = a as u128;
    let mut b = b;
    let mut acc = 0u128;
    while b != 0 {
        let tz = b.trailing_zeros();
        acc ^= a << tz;
        b &= b - 1;
    }
    acc
}

/// `a mod f` for arbitrary polynomials in u128.
fn poly_rem(mut a: u128, f: u128) -> u128 {
    let df = degree(f);
    while a != 0 && degree(a) >= df {
        a ^= f << (degree(a) - df);
    }
    a
}

fn poly_gcd(mut a: u128, mut b: u128) -> u128 {
    while b != 0 {
        let r = poly_rem(a, b);
        a = b;
        b = r;
    }
    a
}

fn irreducible_by_trial_division(f: u128, m: u32) -> bool {
    // Any factorization has a factor of degree ≤ m/2.
    for d in 1..=m / 2 {
        for low in 0u128..(1u128 << d) {
            let g = (1u128 << d) | low;
            if poly_rem(f, g) == 0 {
                return false;
            }
        }
    }
    true
}

/// Ben-Or: `f` of degree m is irreducible iff gcd(t^(2^i) − t, f) = 1 for i ≤ m/2.
fn irreducible_by_ben_or(f: u128, m: u32) -> bool {
    let t = 0b10u128;
    let mut p = t;
    for _ in 1..=m / 2 {
        let low = p as u64;
        p = poly_rem(clmul(low, low), f);
        if poly_gcd(f, p ^ t) != 1 {
            return false;
        }
    }
    true
}

fn is_irreducible(f: u128, m: u32) -> bool {
    if m <= EXHAUSTIVE_IRREDUCIBILITY_DEGREE {
        irreducible_by_trial_division(f, m)
    } else {
        irreducible_by_ben_or(f, m)
    }
}

static STANDARD_CONTEXTS: [OnceLock<FieldContext>; 64] = [const { OnceLock::new() }; 64];

impl FieldContext {
    /// Validates `modulus` (degree exactly `m`, irreducible) and builds the context.
    pub fn new(m: u32, modulus: u128) -> Result<Self> {
        if m == 0 || m > MAX_FIELD_DEGREE {
            return Err(Error::FieldDegree(m));
        }
        if degree(modulus) != m as i32 {
            return Err(Error::invalid(
                "field modulus",
                format!("0x{modulus:x} does not have degree {m}"),
            ));
        }
        if !is_irreducible(modulus, m) {
            return Err(Error::invalid("field modulus", format!("0x{modulus:x} is reducible")));
        }
        Ok(FieldContext { m, modulus })
    }

    /// The context for GF(2^m) with the table modulus. Validated once per degree.
    pub fn standard(m: u32) -> Result<Self> {
        if m == 0 || m > MAX_FIELD_DEGREE {
            return Err(Error::FieldDegree(m));
        }
        let slot = &STANDARD_CONTEXTS[(m - 1) as usize];
        if let Some(ctx) = slot.get() {
            return Ok(*ctx);
        }
        let ctx = FieldContext::new(m, LOW_WEIGHT_MODULI[(m - 1) as usize])?;
        Ok(*slot.get_or_init(|| ctx))
    }

    pub fn degree(&self) -> u32 {
        self.m
    }

    pub fn modulus(&self) -> u128 {
        self.modulus
    }

    /// Number of field elements, `2^m`, when it fits.
    pub fn order(&self) -> Option<u64> {
        1u64.checked_shl(self.m)
    }

    #[inline]
    pub fn value_mask(&self) -> u64 {
        if self.m == 64 {
            u64::MAX
        } else {
            (1u64 << self.m) - 1
        }
    }

    pub fn element(&self, value: u64) -> Result<FieldElement> {
        if value & !self.value_mask() != 0 {
            return Err(Error::invalid(
                "field element",
                format!("0x{value:x} has degree ≥ {}", self.m),
            ));
        }
        Ok(FieldElement(value))
    }

    /// Masks `value` to m bits.
    #[inline]
    pub fn element_truncated(&self, value: u64) -> FieldElement {
        FieldElement(value & self.value_mask())
    }

    #[inline]
    pub fn add(&self, a: FieldElement, b: FieldElement) -> FieldElement {
        FieldElement(a.0 ^ b.0)
    }

    #[inline]
    pub fn mul(&self, a: FieldElement, b: FieldElement) -> FieldElement {
        let mut p = clmul(a.0, b.0);
        let m = self.m as i32;
        // Reduce from the top: the product has degree ≤ 2m − 2.
        let mut top = degree(p);
        while top >= m {
            p ^= self.modulus << (top - m);
            top = degree(p);
        }
        FieldElement(p as u64)
    }

    pub fn pow(&self, base: FieldElement, mut exp: u128) -> FieldElement {
        let mut acc = FieldElement::ONE;
        let mut b = base;
        while exp != 0 {
            if exp & 1 == 1 {
                acc = self.mul(acc, b);
            }
            b = self.mul(b, b);
            exp >>= 1;
        }
        acc
    }

    /// Multiplicative inverse via `a^(2^m − 2)`; `None` for zero.
    pub fn inv(&self, a: FieldElement) -> Option<FieldElement> {
        if a.is_zero() {
            return None;
        }
        Some(self.pow(a, (1u128 << self.m) - 2))
    }
}

pub fn field_multiply(ctx: &FieldContext, a: FieldElement, b: FieldElement) -> FieldElement {
    ctx.mul(a, b)
}

/// `⌈lg max(x, 1)⌉` for integers.
pub fn ceil_log2(x: u64) -> u32 {
    if x <= 1 {
        0
    } else {
        64 - (x - 1).leading_zeros()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn multiply_examples() {
        let ctx = FieldContext::standard(3).unwrap();
        assert_eq!(ctx.modulus(), 0b1011);
        let x = ctx.element(0b010).unwrap();
        let x2 = ctx.element(0b100).unwrap();
        // x³ ≡ x + 1 mod x³ + x + 1
        assert_eq!(field_multiply(&ctx, x, x2), FieldElement(0b011));
        for m in [1, 3, 8, 17, 40, 64] {
            let ctx = FieldContext::standard(m).unwrap();
            let a = ctx.element_truncated(0xdead_beef_1234_5678);
            assert_eq!(ctx.mul(a, FieldElement::ONE), a);
            assert_eq!(ctx.mul(a, FieldElement::ZERO), FieldElement::ZERO);
        }
    }

    #[test]
    fn table_matches_documented_small_moduli() {
        assert_eq!(LOW_WEIGHT_MODULI[2], 0b1011); // t³+t+1
        assert_eq!(LOW_WEIGHT_MODULI[3], 0b1_0011); // t⁴+t+1
        assert_eq!(LOW_WEIGHT_MODULI[7], 0x11b); // t⁸+t⁴+t³+t+1
    }

    #[test]
    fn every_table_modulus_is_irreducible() {
        for m in 1..=64u32 {
            let f = LOW_WEIGHT_MODULI[(m - 1) as usize];
            assert_eq!(degree(f), m as i32);
            assert!(FieldContext::new(m, f).is_ok(), "m={m}");
        }
    }

    #[test]
    fn both_irreducibility_tests_agree_on_small_degrees() {
        for m in 2..=10u32 {
            for low in 0u128..(1 << m) {
                let f = (1u128 << m) | low;
                assert_eq!(
                    irreducible_by_trial_division(f, m),
                    irreducible_by_ben_or(f, m),
                    "f=0x{f:x}"
                );
            }
        }
    }

    #[test]
    fn rejects_reducible_and_wrong_degree() {
        // t⁴ + 1 = (t + 1)⁴
        assert!(FieldContext::new(4, 0b1_0001).is_err());
        assert!(FieldContext::new(4, 0b1011).is_err());
        assert!(matches!(FieldContext::standard(0), Err(Error::FieldDegree(0))));
        assert!(matches!(FieldContext::standard(65), Err(Error::FieldDegree(65))));
        let ctx = FieldContext::standard(3).unwrap();
        assert!(ctx.element(8).is_err());
    }

    #[test]
    fn field_axioms_on_random_triples() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for m in 3..=16u32 {
            let ctx = FieldContext::standard(m).unwrap();
            for _ in 0..10_000 {
                let a = ctx.element_truncated(rng.random());
                let b = ctx.element_truncated(rng.random());
                let c = ctx.element_truncated(rng.random());
                assert_eq!(ctx.mul(ctx.mul(a, b), c), ctx.mul(a, ctx.mul(b, c)));
                assert_eq!(ctx.mul(a, b), ctx.mul(b, a));
                assert_eq!(ctx.mul(a, ctx.add(b, c)), ctx.add(ctx.mul(a, b), ctx.mul(a, c)));
                if let Some(inv) = ctx.inv(a) {
                    assert_eq!(ctx.mul(a, inv), FieldElement::ONE);
                } else {
                    assert!(a.is_zero());
                }
            }
        }
    }

    #[test]
    fn multiplicative_group_is_cyclic_of_full_order() {
        // For GF(2^m) with 2^m − 1 prime, every non-identity element generates the group.
        let ctx = FieldContext::standard(7).unwrap();
        let g = ctx.element(0b10).unwrap();
        let mut seen = std::collections::HashSet::new();
        let mut p = FieldElement::ONE;
        for _ in 0..127 {
            assert!(seen.insert(p));
            p = ctx.mul(p, g);
        }
        assert_eq!(p, FieldElement::ONE);
    }

    #[test]
    fn ceil_log2_values() {
        assert_eq!(ceil_log2(1), 0);
        assert_eq!(ceil_log2(2), 1);
        assert_eq!(ceil_log2(3), 2);
        assert_eq!(ceil_log2(4), 2);
        assert_eq!(ceil_log2(5), 3);
        assert_eq!(ceil_log2(1 << 40), 40);
    }
}
