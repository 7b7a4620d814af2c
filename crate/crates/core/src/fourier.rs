//! Exact Fourier expansions of small matrix-valued functions on F₂ⁿ.
//!
//! `F̂_α = E_x F(x) χ_α(x)`, computed with one Walsh-Hadamard transform per
//! matrix entry. Everything here is exhaustive and refuses inputs beyond the
//! configured size rather than approximating.

use std::collections::BTreeMap;
use std::io::Write;

use rayon::prelude::*;

use crate::algebra::{chi, BitVector, DenseMatrix};
use crate::error::{Error, Result};
use crate::primitives::walsh_hadamard;
use crate::robp::BranchingProgram;

/// Default limit on `n` for exhaustive expansions.
pub const MAX_EXPANSION_BITS: usize = 16;

/// Coefficients with Frobenius norm below this are dropped.
pub const DEFAULT_PRUNE_TOLERANCE: f64 = 1e-12;

/// `F(x)` for every `x ∈ F₂ⁿ`, stored row-major per input.
#[derive(Clone, Debug, PartialEq)]
pub struct MatrixFunction {
    n: usize,
    rows: usize,
    cols: usize,
    values: Vec<f64>,
}

fn check_budget(n: usize, max_bits: usize) -> Result<()> {
    if n > max_bits {
        return Err(Error::Budget {
            what: format!("exhaustive Fourier expansion over F_2^{n}"),
            needed_bits: n as u32,
            budget_bits: max_bits as u32,
        });
    }
    Ok(())
}

impl MatrixFunction {
    pub fn from_fn(n: usize, rows: usize, cols: usize, f: impl Fn(u64) -> DenseMatrix + Sync) -> Result<Self> {
        check_budget(n, MAX_EXPANSION_BITS)?;
        let per = rows * cols;
        let mut values = vec![0.0; per << n];
        values.par_chunks_mut(per).enumerate().try_for_each(|(x, out)| {
            let m = f(x as u64);
            if m.rows() != rows || m.cols() != cols {
                return Err(Error::Dimension {
                    expected: per,
                    got: m.rows() * m.cols(),
                });
            }
            out.copy_from_slice(&m.row_major());
            Ok(())
        })?;
        Ok(MatrixFunction { n, rows, cols, values })
    }

    /// The truth table of `x ↦ F(x)` for a program, indexed by input (not read) order.
    pub fn from_program(bp: &BranchingProgram) -> Result<Self> {
        check_budget(bp.n(), MAX_EXPANSION_BITS)?;
        let w = bp.w();
        let mut values = vec![0.0; (w * w) << bp.n()];
        values.par_chunks_mut(w * w).enumerate().for_each(|(x, out)| {
            for (s, t) in bp.transition_map(x as u64).into_iter().enumerate() {
                out[s * w + t] = 1.0;
            }
        });
        Ok(MatrixFunction {
            n: bp.n(),
            rows: w,
            cols: w,
            values,
        })
    }

    /// A 1×1 function from real values.
    pub fn scalar(n: usize, values: Vec<f64>) -> Result<Self> {
        check_budget(n, MAX_EXPANSION_BITS)?;
        if values.len() != 1 << n {
            return Err(Error::Dimension {
                expected: 1 << n,
                got: values.len(),
            });
        }
        Ok(MatrixFunction {
            n,
            rows: 1,
            cols: 1,
            values,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn at(&self, x: u64) -> DenseMatrix {
        let per = self.rows * self.cols;
        let start = x as usize * per;
        DenseMatrix::from_row_major(self.rows, self.cols, &self.values[start..start + per]).expect("sized by construction")
    }

    /// `E_x ‖F(x)‖²`.
    pub fn mean_square_norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>() / (1u64 << self.n) as f64
    }
}

/// Sparse map `α ↦ F̂_α` (α as a word, bit `i` is `α_{i+1}`).
#[derive(Clone, Debug, PartialEq)]
pub struct FourierExpansion {
    n: usize,
    rows: usize,
    cols: usize,
    coefficients: BTreeMap<u64, DenseMatrix>,
}

impl FourierExpansion {
    pub fn new(n: usize, rows: usize, cols: usize) -> Self {
        FourierExpansion {
            n,
            rows,
            cols,
            coefficients: BTreeMap::new(),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn len(&self) -> usize {
        self.coefficients.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coefficients.is_empty()
    }

    pub fn insert(&mut self, alpha: u64, m: DenseMatrix) -> Result<()> {
        if m.rows() != self.rows || m.cols() != self.cols {
            return Err(Error::Dimension {
                expected: self.rows * self.cols,
                got: m.rows() * m.cols(),
            });
        }
        if self.n < 64 && alpha >> self.n != 0 {
            return Err(Error::invalid("character index", format!("{alpha:b} exceeds n = {}", self.n)));
        }
        self.coefficients.insert(alpha, m);
        Ok(())
    }

    pub fn coefficient(&self, alpha: u64) -> Option<&DenseMatrix> {
        self.coefficients.get(&alpha)
    }

    /// The coefficient, or the zero matrix when pruned.
    pub fn coefficient_or_zero(&self, alpha: u64) -> DenseMatrix {
        self.coefficient(alpha)
            .cloned()
            .unwrap_or_else(|| DenseMatrix::zeros(self.rows, self.cols))
    }

    pub fn iter(&self) -> impl Iterator<Item = (u64, &DenseMatrix)> {
        self.coefficients.iter().map(|(&a, m)| (a, m))
    }

    /// `Σ_α F̂_α χ_α(x)`.
    pub fn evaluate(&self, x: u64) -> DenseMatrix {
        let mut out = DenseMatrix::zeros(self.rows, self.cols);
        for (&a, m) in &self.coefficients {
            out.add_scaled(m, chi(a, x) as f64);
        }
        out
    }

    /// Coefficients whose index satisfies `keep`.
    pub fn filter(&self, keep: impl Fn(u64) -> bool) -> FourierExpansion {
        FourierExpansion {
            coefficients: self
                .coefficients
                .iter()
                .filter(|(&a, _)| keep(a))
                .map(|(&a, m)| (a, m.clone()))
                .collect(),
            ..*self
        }
    }

    /// Coefficients at exactly Hamming weight `k`.
    pub fn level(&self, k: usize) -> FourierExpansion {
        self.filter(|a| a.count_ones() as usize == k)
    }

    /// `Σ_α ‖F̂_α‖²`.
    pub fn squared_mass(&self) -> f64 {
        self.coefficients.values().map(|m| m.frobenius_norm().powi(2)).sum()
    }

    /// `Σ_α ‖F̂_α‖`.
    pub fn l1_mass(&self) -> f64 {
        self.coefficients.values().map(DenseMatrix::frobenius_norm).sum()
    }

    /// Same function viewed on `F₂^m` for `m ≥ n`, ignoring the new variables.
    pub fn embed(&self, m: usize) -> Result<FourierExpansion> {
        if m < self.n {
            return Err(Error::invalid("embedding", format!("{m} < n = {}", self.n)));
        }
        Ok(FourierExpansion {
            n: m,
            coefficients: self.coefficients.clone(),
            ..*self
        })
    }

    /// CSV with columns `alpha,row,col,value`; `alpha` is a little-endian bit string.
    pub fn write_csv(&self, out: impl Write) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(out);
        wtr.write_record(["alpha", "row", "col", "value"])?;
        for (&a, m) in &self.coefficients {
            let alpha = BitVector::from_u64(self.n, a).to_string();
            for r in 0..self.rows {
                for c in 0..self.cols {
                    wtr.write_record([alpha.clone(), r.to_string(), c.to_string(), format!("{:e}", m.get(r, c))])?;
                }
            }
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Exact expansion of a tabulated function, pruning at `tolerance`.
pub fn expand_with_tolerance(f: &MatrixFunction, tolerance: f64) -> FourierExpansion {
    let per = f.rows * f.cols;
    let size = 1usize << f.n;
    let scale = 1.0 / size as f64;
    let spectra: Vec<Vec<f64>> = (0..per)
        .into_par_iter()
        .map(|e| {
            let mut v: Vec<f64> = (0..size).map(|x| f.values[x * per + e]).collect();
            walsh_hadamard(&mut v);
            v.iter_mut().for_each(|c| *c *= scale);
            v
        })
        .collect();
    let coefficients = (0..size)
        .filter_map(|a| {
            let entries: Vec<f64> = spectra.iter().map(|s| s[a]).collect();
            let m = DenseMatrix::from_row_major(f.rows, f.cols, &entries).expect("sized by construction");
            (m.frobenius_norm() >= tolerance).then_some((a as u64, m))
        })
        .collect();
    FourierExpansion {
        n: f.n,
        rows: f.rows,
        cols: f.cols,
        coefficients,
    }
}

pub fn expand(f: &MatrixFunction) -> FourierExpansion {
    expand_with_tolerance(f, DEFAULT_PRUNE_TOLERANCE)
}

/// Expansion of a program's `F` in input coordinates.
pub fn expand_program(bp: &BranchingProgram) -> Result<FourierExpansion> {
    Ok(expand(&MatrixFunction::from_program(bp)?))
}

/// `(Σ_α ‖F̂_α‖², E_x ‖F(x)‖²)`, computed independently.
pub fn parseval_check(f: &MatrixFunction) -> (f64, f64) {
    (expand_with_tolerance(f, 0.0).squared_mass(), f.mean_square_norm())
}

/// `L_k(F) = Σ_{|α|=k} ‖F̂_α‖`.
pub fn level_mass(expansion: &FourierExpansion, k: usize) -> f64 {
    expansion
        .iter()
        .filter(|(a, _)| a.count_ones() as usize == k)
        .map(|(_, m)| m.frobenius_norm())
        .sum()
}

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode", content = "c")]
pub enum MassBoundMode {
    /// `L_i ≤ C(n,i)^{1/2} w^{1/2}` from Cauchy-Schwarz and Parseval.
    Trivial,
    /// `L_i ≤ (c · lg n)^{w·i}` with an explicit constant `c`.
    Chrt(f64),
}

/// Placeholder constant for the `(c lg n)^{wk}` bound. No value is known;
/// nothing in the acceptance suite depends on it.
pub const DEFAULT_CHRT_CONSTANT: f64 = 1.0;

impl std::fmt::Display for MassBoundMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            MassBoundMode::Trivial => write!(f, "trivial"),
            MassBoundMode::Chrt(c) => write!(f, "chrt({c})"),
        }
    }
}

impl std::str::FromStr for MassBoundMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "trivial" {
            return Ok(MassBoundMode::Trivial);
        }
        if s == "chrt" {
            return Ok(MassBoundMode::Chrt(DEFAULT_CHRT_CONSTANT));
        }
        s.strip_prefix("chrt(")
            .and_then(|r| r.strip_suffix(')'))
            .and_then(|c| c.parse().ok())
            .map(MassBoundMode::Chrt)
            .ok_or_else(|| Error::Parse(format!("unknown mass bound mode {s:?}")))
    }
}

/// An `L(n, w; k)` proxy; `overflowed` marks an infinite value.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MassBound {
    pub value: f64,
    pub overflowed: bool,
}

fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// `Σ_{i=1}^k` of the per-level bound selected by `mode`.
pub fn mass_bound(n: usize, w: usize, k: usize, mode: MassBoundMode) -> MassBound {
    let value: f64 = match mode {
        MassBoundMode::Trivial => (1..=k.min(n)).map(|i| (binomial(n, i) * w as f64).sqrt()).sum(),
        MassBoundMode::Chrt(c) => {
            let base = c * (n.max(1) as f64).log2();
            (1..=k).map(|i| base.powf((w * i) as f64)).sum()
        }
    };
    if value.is_finite() {
        MassBound {
            value,
            overflowed: false,
        }
    } else {
        MassBound {
            value: f64::INFINITY,
            overflowed: true,
        }
    }
}

/// `F = F̂_0 + L + Σ_i H_i · F^{>i}` in read-order coordinates, where `L`
/// collects levels `1..k` (exclusive) and `H_i` collects the level-`k`
/// coefficients of the prefix `F^{≤i}` whose last set bit is `i`.
#[derive(Clone, Debug)]
pub struct PrefixDecomposition {
    k: usize,
    constant: DenseMatrix,
    low: FourierExpansion,
    /// `high[i-1]` is `H_i`, an expansion over `F₂^i`.
    high: Vec<FourierExpansion>,
    /// `suffixes[i-1]` is `F^{>i}`.
    suffixes: Vec<BranchingProgram>,
}

impl PrefixDecomposition {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn constant(&self) -> &DenseMatrix {
        &self.constant
    }

    pub fn low(&self) -> &FourierExpansion {
        &self.low
    }

    /// `H_1 … H_n`.
    pub fn high(&self) -> &[FourierExpansion] {
        &self.high
    }

    pub fn suffixes(&self) -> &[BranchingProgram] {
        &self.suffixes
    }

    /// Right-hand side at read-order input `y`.
    pub fn reconstruct(&self, y: u64) -> DenseMatrix {
        let mut out = &self.constant + &self.low.evaluate(y);
        for (i, (h, suffix)) in self.high.iter().zip(&self.suffixes).enumerate() {
            if h.is_empty() {
                continue;
            }
            let prefix_bits = i + 1;
            let hv = h.evaluate(y & crate::primitives::full_mask(prefix_bits));
            let tail = DenseMatrix::from_successors(&suffix.transition_map(y >> prefix_bits));
            out = &out + &(&hv * &tail);
        }
        out
    }
}

/// Builds the prefix-heavy decomposition of `bp` at level `k ≥ 1`.
/// Any `k` is accepted; for `k > n` every `H_i` is empty.
pub fn decompose_prefix_heavy(bp: &BranchingProgram, k: usize) -> Result<PrefixDecomposition> {
    if k == 0 {
        return Err(Error::invalid("decomposition level", "k must be ≥ 1"));
    }
    let n = bp.n();
    check_budget(n, MAX_EXPANSION_BITS)?;
    let read = bp.in_read_order();
    let full = expand_program(&read)?;
    let constant = full.coefficient_or_zero(0);
    let low = full.filter(|a| a != 0 && (a.count_ones() as usize) < k);
    let mut high = Vec::with_capacity(n);
    let mut suffixes = Vec::with_capacity(n);
    for i in 1..=n {
        let (prefix, suffix) = read.split(i)?;
        let last = 1u64 << (i - 1);
        let h = if k <= i {
            expand_program(&prefix)?.filter(|a| a & last != 0 && a.count_ones() as usize == k)
        } else {
            FourierExpansion::new(i, bp.w(), bp.w())
        };
        high.push(h);
        suffixes.push(suffix);
    }
    Ok(PrefixDecomposition {
        k,
        constant,
        low,
        high,
        suffixes,
    })
}

/// Largest entrywise gap between `F` and the decomposition over all inputs.
pub fn decomposition_error(bp: &BranchingProgram, dec: &PrefixDecomposition) -> f64 {
    let read = bp.in_read_order();
    (0..1u64 << bp.n())
        .into_par_iter()
        .map(|y| {
            DenseMatrix::from_successors(&read.transition_map(y)).max_abs_diff(&dec.reconstruct(y))
        })
        .reduce(|| 0.0, f64::max)
}
