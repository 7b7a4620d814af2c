//! Vectors over F₂ⁿ.
//!
//! Bit 0 is the first variable x₁ (the first layer read by an identity-order
//! program). The text form is a little-endian 0/1 string: character `i` is
//! bit `i`.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// A fixed-length element of F₂ⁿ.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BitVector {
    len: usize,
    words: Vec<u64>,
}

#[inline]
fn word_count(len: usize) -> usize {
    len.div_ceil(64)
}

#[inline]
pub(crate) fn low_mask(len: usize) -> u64 {
    if len >= 64 {
        u64::MAX
    } else {
        (1u64 << len) - 1
    }
}

impl BitVector {
    pub fn zeros(len: usize) -> Self {
        BitVector {
            len,
            words: vec![0; word_count(len)],
        }
    }

    pub fn ones(len: usize) -> Self {
        let mut v = BitVector {
            len,
            words: vec![u64::MAX; word_count(len)],
        };
        v.clear_tail();
        v
    }

    /// Builds a vector of length `len ≤ 64` from the low bits of `bits`.
    /// Bits at positions `≥ len` are discarded.
    pub fn from_u64(len: usize, bits: u64) -> Self {
        assert!(len <= 64, "from_u64 supports at most 64 bits, got {len}");
        let mut v = BitVector::zeros(len);
        if len > 0 {
            v.words[0] = bits & low_mask(len);
        }
        v
    }

    /// Uniformly random vector of length `len`.
    pub fn random(len: usize, rng: &mut impl rand::Rng) -> Self {
        let mut v = BitVector {
            len,
            words: (0..word_count(len)).map(|_| rng.random()).collect(),
        };
        v.clear_tail();
        v
    }

    pub fn from_bools<I: IntoIterator<Item = bool>>(bits: I) -> Self {
        let bits: Vec<bool> = bits.into_iter().collect();
        let mut v = BitVector::zeros(bits.len());
        for (i, b) in bits.into_iter().enumerate() {
            v.set(i, b);
        }
        v
    }

    /// The word representation, for `len ≤ 64`.
    pub fn to_u64(&self) -> Option<u64> {
        match self.len {
            0 => Some(0),
            l if l <= 64 => Some(self.words[0]),
            _ => None,
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    #[inline]
    pub fn get(&self, i: usize) -> bool {
        assert!(i < self.len, "bit index {i} out of range for length {}", self.len);
        (self.words[i / 64] >> (i % 64)) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, i: usize, value: bool) {
        assert!(i < self.len, "bit index {i} out of range for length {}", self.len);
        let mask = 1u64 << (i % 64);
        if value {
            self.words[i / 64] |= mask;
        } else {
            self.words[i / 64] &= !mask;
        }
    }

    pub fn hamming_weight(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_zero(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        (0..self.len).map(move |i| self.get(i))
    }

    /// Indices of set bits, ascending.
    pub fn support(&self) -> Vec<usize> {
        (0..self.len).filter(|&i| self.get(i)).collect()
    }

    /// Copies bits `[offset, offset + len)` into a new vector.
    pub fn slice(&self, offset: usize, len: usize) -> Result<BitVector> {
        if offset + len > self.len {
            return Err(Error::Dimension {
                expected: offset + len,
                got: self.len,
            });
        }
        let mut out = BitVector::zeros(len);
        for i in 0..len {
            if self.get(offset + i) {
                out.set(i, true);
            }
        }
        Ok(out)
    }

    /// Reads bits `[offset, offset + width)` as a little-endian integer (`width ≤ 64`).
    pub(crate) fn read_word(&self, offset: usize, width: usize) -> u64 {
        debug_assert!(width <= 64 && offset + width <= self.len);
        let mut out = 0u64;
        let mut done = 0;
        while done < width {
            let pos = offset + done;
            let shift = pos % 64;
            let take = (64 - shift).min(width - done);
            let chunk = (self.words[pos / 64] >> shift) & low_mask(take);
            out |= chunk << done;
            done += take;
        }
        out
    }

    fn check_len(&self, other: &BitVector) -> Result<()> {
        if self.len != other.len {
            return Err(Error::Dimension {
                expected: self.len,
                got: other.len,
            });
        }
        Ok(())
    }

    pub fn xor(&self, other: &BitVector) -> Result<BitVector> {
        self.check_len(other)?;
        Ok(BitVector {
            len: self.len,
            words: self.words.iter().zip(&other.words).map(|(a, b)| a ^ b).collect(),
        })
    }

    pub fn and(&self, other: &BitVector) -> Result<BitVector> {
        self.check_len(other)?;
        Ok(BitVector {
            len: self.len,
            words: self.words.iter().zip(&other.words).map(|(a, b)| a & b).collect(),
        })
    }

    /// Parity of `⟨self, other⟩` over F₂.
    pub fn inner_parity(&self, other: &BitVector) -> Result<bool> {
        self.check_len(other)?;
        let ones: u32 = self
            .words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a & b).count_ones())
            .sum();
        Ok(ones & 1 == 1)
    }

    /// Little-endian byte packing (bit `i` is bit `i % 8` of byte `i / 8`) as lowercase hex.
    pub fn to_hex(&self) -> String {
        let bytes: Vec<u8> = (0..self.len.div_ceil(8))
            .map(|b| (self.words[b / 8] >> ((b % 8) * 8)) as u8)
            .collect();
        hex::encode(bytes)
    }

    /// Inverse of [`BitVector::to_hex`]; the caller supplies the bit length.
    pub fn from_hex(len: usize, s: &str) -> Result<BitVector> {
        let bytes = hex::decode(s.trim()).map_err(|e| Error::Parse(format!("bad hex seed: {e}")))?;
        if bytes.len() != len.div_ceil(8) {
            return Err(Error::SeedLength {
                expected: len,
                got: bytes.len() * 8,
            });
        }
        let mut v = BitVector::zeros(len);
        for (b, byte) in bytes.iter().enumerate() {
            for bit in 0..8 {
                let i = b * 8 + bit;
                if (byte >> bit) & 1 == 1 {
                    if i >= len {
                        return Err(Error::Parse(format!("hex seed has bit {i} set beyond length {len}")));
                    }
                    v.set(i, true);
                }
            }
        }
        Ok(v)
    }

    fn clear_tail(&mut self) {
        let rem = self.len % 64;
        if rem != 0 {
            if let Some(last) = self.words.last_mut() {
                *last &= low_mask(rem);
            }
        }
    }
}

impl fmt::Display for BitVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in self.iter() {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl fmt::Debug for BitVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BitVector({self})")
    }
}

impl FromStr for BitVector {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let mut v = BitVector::zeros(s.len());
        for (i, c) in s.chars().enumerate() {
            match c {
                '0' => {}
                '1' => v.set(i, true),
                other => return Err(Error::Parse(format!("invalid bit character {other:?} in {s:?}"))),
            }
        }
        Ok(v)
    }
}

/// Bitwise XOR, i.e. addition over F₂ⁿ.
pub fn xor_add(a: &BitVector, b: &BitVector) -> Result<BitVector> {
    a.xor(b)
}

pub fn bitwise_and(a: &BitVector, b: &BitVector) -> Result<BitVector> {
    a.and(b)
}

/// χ_α(x) = (−1)^⟨α,x⟩.
pub fn character_eval(alpha: &BitVector, x: &BitVector) -> Result<i32> {
    Ok(if alpha.inner_parity(x)? { -1 } else { 1 })
}

/// Word-level character for `n ≤ 64` hot loops.
#[inline]
pub fn chi(alpha: u64, x: u64) -> i32 {
    1 - 2 * ((alpha & x).count_ones() & 1) as i32
}
