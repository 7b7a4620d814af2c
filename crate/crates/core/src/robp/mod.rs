//! Read-once oblivious branching programs in matrix-product form.
//!
//! Layer `i` reads input bit `order[i]` and moves every state `s` to
//! `succ[i][b][s]`. The product `F(x) = A_{1,·} ⋯ A_{n,·}` has rows indexed by
//! the start state and columns by the end state. State 0 is both the start
//! and the accept state, so `evaluate` reads entry `(0, 0)`.
//!
//! Text format (states and variables 1-based):
//!
//! ```text
//! robp n=3 w=2 order=1,2,3
//! 1,2 | 2,1
//! 1,2 | 2,1
//! 1,2 | 2,1
//! ```
//!
//! Each layer line lists the successors of states `1..=w` on bit 0, then on bit 1.

mod formula;

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::algebra::{BitVector, DenseMatrix};
use crate::error::{Error, Result};
use crate::primitives::{field_value, parse_fields, required};

pub use formula::{compile_formula, random_formula, ReadOnceFormula};

/// Successor arrays of one layer, indexed by the bit read.
pub type Layer = [Vec<usize>; 2];

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BranchingProgram {
    w: usize,
    layers: Vec<Layer>,
    order: Vec<usize>,
}

fn check_permutation(perm: &[usize], n: usize) -> Result<()> {
    if perm.len() != n {
        return Err(Error::Dimension {
            expected: n,
            got: perm.len(),
        });
    }
    let mut seen = vec![false; n];
    for &p in perm {
        if p >= n || std::mem::replace(&mut seen[p], true) {
            return Err(Error::invalid("permutation", format!("{perm:?} is not a bijection on 0..{n}")));
        }
    }
    Ok(())
}

/// Restriction masks in read order: bit `i` refers to layer `i`.
#[derive(Clone, Copy)]
struct LayerMasks {
    fixed: u64,
    free: u64,
}

impl BranchingProgram {
    /// Builds a program from layers and a 0-based read order.
    pub fn new(w: usize, layers: Vec<Layer>, order: Vec<usize>) -> Result<Self> {
        if w == 0 {
            return Err(Error::invalid("program", "width must be ≥ 1"));
        }
        check_permutation(&order, layers.len())?;
        for (i, layer) in layers.iter().enumerate() {
            for succ in layer {
                if succ.len() != w {
                    return Err(Error::invalid("program", format!("layer {} has {} rows, width is {w}", i + 1, succ.len())));
                }
                if let Some(&s) = succ.iter().find(|&&s| s >= w) {
                    return Err(Error::invalid("program", format!("layer {} targets state {} ≥ w", i + 1, s + 1)));
                }
            }
        }
        Ok(BranchingProgram { w, layers, order })
    }

    /// Builds a program from 0/1 transition matrices with one 1 per row.
    pub fn from_matrices(matrices: &[[DenseMatrix; 2]], order: Vec<usize>) -> Result<Self> {
        let w = matrices.first().map_or(1, |m| m[0].rows());
        let mut layers = Vec::with_capacity(matrices.len());
        for pair in matrices {
            let mut layer: Layer = [Vec::with_capacity(w), Vec::with_capacity(w)];
            for (b, m) in pair.iter().enumerate() {
                if m.rows() != w || m.cols() != w {
                    return Err(Error::Dimension {
                        expected: w,
                        got: m.rows().max(m.cols()),
                    });
                }
                for s in 0..w {
                    let ones: Vec<usize> = (0..w).filter(|&j| m.get(s, j) != 0.0).collect();
                    if ones.len() != 1 || m.get(s, ones[0]) != 1.0 {
                        return Err(Error::invalid("transition matrix", format!("row {} is not a unit row", s + 1)));
                    }
                    layer[b].push(ones[0]);
                }
            }
            layers.push(layer);
        }
        BranchingProgram::new(w, layers, order)
    }

    /// All transitions are the identity; `F(x) = I`.
    pub fn identity(n: usize, w: usize) -> Result<Self> {
        let id: Vec<usize> = (0..w).collect();
        BranchingProgram::new(w, vec![[id.clone(), id]; n], (0..n).collect())
    }

    /// Width-2 program accepting inputs of even parity.
    pub fn parity(n: usize) -> Self {
        BranchingProgram::new(2, vec![[vec![0, 1], vec![1, 0]]; n], (0..n).collect()).expect("valid by construction")
    }

    pub fn n(&self) -> usize {
        self.layers.len()
    }

    pub fn w(&self) -> usize {
        self.w
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    /// `order()[i]` is the 0-based input position read by layer `i`.
    pub fn order(&self) -> &[usize] {
        &self.order
    }

    pub fn transition_matrix(&self, layer: usize, bit: bool) -> DenseMatrix {
        DenseMatrix::from_successors(&self.layers[layer][bit as usize])
    }

    /// The input word rearranged into read order: bit `i` is `x[order[i]]`.
    pub fn to_read_order(&self, x: u64) -> u64 {
        self.order
            .iter()
            .enumerate()
            .fold(0, |y, (i, &p)| y | (((x >> p) & 1) << i))
    }

    /// Inverse of [`to_read_order`](Self::to_read_order).
    pub fn from_read_order(&self, y: u64) -> u64 {
        self.order
            .iter()
            .enumerate()
            .fold(0, |x, (i, &p)| x | (((y >> i) & 1) << p))
    }

    /// End state reached from `start` on input `x` (bit `p` of `x` is `x_{p+1}`).
    #[inline]
    pub fn run(&self, start: usize, x: u64) -> usize {
        self.layers
            .iter()
            .zip(&self.order)
            .fold(start, |s, (layer, &p)| layer[((x >> p) & 1) as usize][s])
    }

    /// `s ↦ run(s, x)`, i.e. the successor form of `F(x)`.
    pub fn transition_map(&self, x: u64) -> Vec<usize> {
        let mut states: Vec<usize> = (0..self.w).collect();
        for (layer, &p) in self.layers.iter().zip(&self.order) {
            let succ = &layer[((x >> p) & 1) as usize];
            for s in &mut states {
                *s = succ[*s];
            }
        }
        states
    }

    fn check_input(&self, x: &BitVector) -> Result<u64> {
        if x.len() != self.n() {
            return Err(Error::Dimension {
                expected: self.n(),
                got: x.len(),
            });
        }
        x.to_u64()
            .ok_or_else(|| Error::invalid("input", "programs are limited to 64 variables"))
    }

    pub fn product_matrix(&self, x: &BitVector) -> Result<DenseMatrix> {
        Ok(DenseMatrix::from_successors(&self.transition_map(self.check_input(x)?)))
    }

    pub fn evaluate(&self, x: &BitVector) -> Result<bool> {
        Ok(self.run(0, self.check_input(x)?) == 0)
    }

    /// Word-valued [`evaluate`](Self::evaluate) for hot loops.
    #[inline]
    pub fn accepts(&self, x: u64) -> bool {
        self.run(0, x) == 0
    }

    fn layer_masks(&self, fixed: u64, free: u64) -> LayerMasks {
        LayerMasks {
            fixed: self.to_read_order(fixed),
            free: self.to_read_order(free),
        }
    }

    /// Row-major `E_u F(a ⊕ (b ∧ u))` for uniform `u`, via per-layer averages.
    pub fn restricted_expectation_rows(&self, a: u64, b: u64) -> Vec<f64> {
        let LayerMasks { fixed, free } = self.layer_masks(a, b);
        let w = self.w;
        let mut cur = vec![0.0; w * w];
        for s in 0..w {
            cur[s * w + s] = 1.0;
        }
        let mut next = vec![0.0; w * w];
        for (i, layer) in self.layers.iter().enumerate() {
            next.iter_mut().for_each(|v| *v = 0.0);
            if (free >> i) & 1 == 1 {
                for row in 0..w {
                    for s in 0..w {
                        let v = cur[row * w + s];
                        if v != 0.0 {
                            next[row * w + layer[0][s]] += 0.5 * v;
                            next[row * w + layer[1][s]] += 0.5 * v;
                        }
                    }
                }
            } else {
                let succ = &layer[((fixed >> i) & 1) as usize];
                for row in 0..w {
                    for s in 0..w {
                        next[row * w + succ[s]] += cur[row * w + s];
                    }
                }
            }
            std::mem::swap(&mut cur, &mut next);
        }
        cur
    }

    /// `E_u F(a ⊕ (b ∧ u))`: the restriction fixing bits outside `b` to `a`,
    /// averaged over the free bits.
    pub fn restricted_expectation(&self, a: u64, b: u64) -> DenseMatrix {
        DenseMatrix::from_row_major(self.w, self.w, &self.restricted_expectation_rows(a, b))
            .expect("w×w by construction")
    }

    /// `E_U F(U) = Π_i (A_{i,0} + A_{i,1}) / 2`.
    pub fn uniform_expectation(&self) -> DenseMatrix {
        self.restricted_expectation(0, crate::primitives::full_mask(self.n()))
    }

    /// Splits at read position `i` into programs over the first `i` and the
    /// remaining `n − i` bits in read order, each with identity order, so that
    /// `F(x) = F^{≤i}(y_{1..i}) · F^{>i}(y_{i+1..n})` where `y` is `x` in read order.
    pub fn split(&self, i: usize) -> Result<(BranchingProgram, BranchingProgram)> {
        if i > self.n() {
            return Err(Error::invalid("split point", format!("{i} > n = {}", self.n())));
        }
        let prefix = self.layers[..i].to_vec();
        let suffix = self.layers[i..].to_vec();
        Ok((
            BranchingProgram::new(self.w, prefix, (0..i).collect())?,
            BranchingProgram::new(self.w, suffix, (0..self.n() - i).collect())?,
        ))
    }

    /// The same layers read in identity order.
    pub fn in_read_order(&self) -> BranchingProgram {
        BranchingProgram {
            w: self.w,
            layers: self.layers.clone(),
            order: (0..self.n()).collect(),
        }
    }

    /// Program computing `x ↦ self(x ∘ σ)`, where `(x ∘ σ)_j = x_{σ(j)}`.
    /// `sigma` is 0-based. Only the order field changes.
    pub fn permute_order(&self, sigma: &[usize]) -> Result<BranchingProgram> {
        check_permutation(sigma, self.n())?;
        Ok(BranchingProgram {
            w: self.w,
            layers: self.layers.clone(),
            order: self.order.iter().map(|&p| sigma[p]).collect(),
        })
    }

    /// Replaces the read order outright.
    pub fn with_order(&self, order: Vec<usize>) -> Result<BranchingProgram> {
        check_permutation(&order, self.n())?;
        Ok(BranchingProgram {
            w: self.w,
            layers: self.layers.clone(),
            order,
        })
    }

    /// Accept bit for every input `x < 2^n`.
    pub fn truth_table(&self) -> Result<Vec<bool>> {
        if self.n() > crate::dist::MAX_DENSE_BITS {
            return Err(Error::Budget {
                what: "program truth table".into(),
                needed_bits: self.n() as u32,
                budget_bits: crate::dist::MAX_DENSE_BITS as u32,
            });
        }
        Ok((0..1u64 << self.n()).map(|x| self.accepts(x)).collect())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        std::fs::read_to_string(path)?.parse()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_string())?;
        Ok(())
    }
}

/// Uniformly random successors in every row; identity read order.
pub fn random_program(n: usize, w: usize, rng_seed: u64) -> Result<BranchingProgram> {
    if w == 0 {
        return Err(Error::invalid("program", "width must be ≥ 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let layers = (0..n)
        .map(|_| [0, 1].map(|_| (0..w).map(|_| rng.random_range(0..w)).collect()))
        .collect();
    BranchingProgram::new(w, layers, (0..n).collect())
}

/// A uniformly random permutation of `0..n`.
pub fn random_permutation(n: usize, rng: &mut impl Rng) -> Vec<usize> {
    let mut p: Vec<usize> = (0..n).collect();
    p.shuffle(rng);
    p
}

fn join_one_based(v: &[usize]) -> String {
    v.iter().map(|s| (s + 1).to_string()).collect::<Vec<_>>().join(",")
}

fn parse_one_based(s: &str, what: &str) -> Result<Vec<usize>> {
    if s.trim().is_empty() {
        return Ok(Vec::new());
    }
    s.split(',')
        .map(|t| match t.trim().parse::<usize>() {
            Ok(v) if v >= 1 => Ok(v - 1),
            _ => Err(Error::Parse(format!("bad {what} entry {t:?}"))),
        })
        .collect()
}

impl fmt::Display for BranchingProgram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "robp n={} w={} order={}", self.n(), self.w, join_one_based(&self.order))?;
        for layer in &self.layers {
            writeln!(f, "{} | {}", join_one_based(&layer[0]), join_one_based(&layer[1]))?;
        }
        Ok(())
    }
}

impl FromStr for BranchingProgram {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut lines = s
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'));
        let header = lines.next().ok_or_else(|| Error::Parse("empty program file".into()))?;
        let (tag, fields) = parse_fields(header)?;
        if tag != "robp" {
            return Err(Error::Parse(format!("expected `robp` header, got {tag:?}")));
        }
        let n: usize = required(&fields, "n")?;
        let w: usize = required(&fields, "w")?;
        let order = match field_value(&fields, "order") {
            Some(o) => parse_one_based(o, "order")?,
            None => (0..n).collect(),
        };
        let layers = lines
            .map(|line| {
                let (zero, one) = line
                    .split_once('|')
                    .ok_or_else(|| Error::Parse(format!("layer line needs `|`: {line:?}")))?;
                Ok([parse_one_based(zero, "successor")?, parse_one_based(one, "successor")?])
            })
            .collect::<Result<Vec<Layer>>>()?;
        if layers.len() != n {
            return Err(Error::Parse(format!("header says n={n} but {} layer lines follow", layers.len())));
        }
        BranchingProgram::new(w, layers, order)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bv(s: &str) -> BitVector {
        s.parse().unwrap()
    }

    #[test]
    fn identity_program() {
        let id = BranchingProgram::identity(3, 3).unwrap();
        for x in 0..8 {
            let xv = BitVector::from_u64(3, x);
            assert_eq!(id.product_matrix(&xv).unwrap(), DenseMatrix::identity(3));
            assert!(id.evaluate(&xv).unwrap());
        }
        assert_eq!(id.uniform_expectation(), DenseMatrix::identity(3));
    }

    #[test]
    fn parity_program_products() {
        let p = BranchingProgram::parity(3);
        let swap = DenseMatrix::from_successors(&[1, 0]);
        assert_eq!(p.product_matrix(&bv("110")).unwrap(), DenseMatrix::identity(2));
        assert_eq!(p.product_matrix(&bv("100")).unwrap(), swap);
        assert!(p.evaluate(&bv("101")).unwrap());
        assert!(!p.evaluate(&bv("100")).unwrap());
        let half = DenseMatrix::from_row_major(2, 2, &[0.5; 4]).unwrap();
        for n in 1..6 {
            assert_eq!(BranchingProgram::parity(n).uniform_expectation(), half);
        }
        assert!(p.evaluate(&bv("10")).is_err());
    }

    #[test]
    fn products_have_norm_sqrt_w() {
        let bp = random_program(8, 4, 42).unwrap();
        for x in 0..256 {
            let m = bp.product_matrix(&BitVector::from_u64(8, x)).unwrap();
            assert_eq!(m.frobenius_norm().powi(2).round(), 4.0);
            for r in 0..4 {
                assert_eq!((0..4).map(|c| m.get(r, c)).sum::<f64>(), 1.0);
            }
        }
    }

    #[test]
    fn uniform_expectation_matches_brute_force() {
        for seed in 0..5 {
            for n in [1usize, 5, 12] {
                let bp = random_program(n, 3, seed).unwrap().permute_order(&{
                    let mut s: Vec<usize> = (0..n).collect();
                    s.rotate_left(1);
                    s
                });
                let bp = bp.unwrap();
                let mut acc = DenseMatrix::zeros(3, 3);
                for x in 0..1u64 << n {
                    acc.add_scaled(&DenseMatrix::from_successors(&bp.transition_map(x)), 1.0);
                }
                let avg = acc.scale(0.5f64.powi(n as i32));
                assert!(avg.max_abs_diff(&bp.uniform_expectation()) <= 1e-12);
            }
        }
    }

    #[test]
    fn split_identity_holds() {
        for seed in 0..4 {
            let bp = random_program(6, 3, seed)
                .unwrap()
                .permute_order(&[2, 0, 5, 1, 4, 3])
                .unwrap();
            for i in 0..=6 {
                let (pre, suf) = bp.split(i).unwrap();
                assert_eq!(pre.n(), i);
                for x in 0..64u64 {
                    let y = bp.to_read_order(x);
                    let left = DenseMatrix::from_successors(&pre.transition_map(y & ((1 << i) - 1)));
                    let right = DenseMatrix::from_successors(&suf.transition_map(y >> i));
                    assert_eq!(&left * &right, DenseMatrix::from_successors(&bp.transition_map(x)));
                }
            }
            let (_, empty) = bp.split(6).unwrap();
            assert_eq!(empty.transition_map(0), vec![0, 1, 2]);
        }
        assert!(BranchingProgram::parity(3).split(4).is_err());
    }

    #[test]
    fn permute_order_reindexes_inputs() {
        // x₁ ∧ ¬x₃ with state 0 = accept; state 1 = reject sink.
        let bp = BranchingProgram::new(
            2,
            vec![[vec![1, 1], vec![0, 1]], [vec![0, 1], vec![0, 1]], [vec![0, 1], vec![1, 1]]],
            vec![0, 1, 2],
        )
        .unwrap();
        let swapped = bp.permute_order(&[2, 1, 0]).unwrap();
        for x in 0..8u64 {
            let (x1, x3) = (x & 1 == 1, x & 4 == 4);
            assert_eq!(bp.accepts(x), x1 && !x3);
            assert_eq!(swapped.accepts(x), x3 && !x1);
        }
        let parity = BranchingProgram::parity(4);
        let shuffled = parity.permute_order(&[3, 1, 0, 2]).unwrap();
        assert_eq!(parity.truth_table().unwrap(), shuffled.truth_table().unwrap());
        assert!(parity.permute_order(&[0, 0, 1, 2]).is_err());
    }

    #[test]
    fn permutation_round_trip() {
        let bp = random_program(5, 3, 9).unwrap();
        let sigma = [3, 0, 4, 1, 2];
        let mut inv = [0; 5];
        for (i, &s) in sigma.iter().enumerate() {
            inv[s] = i;
        }
        let back = bp.permute_order(&sigma).unwrap().permute_order(&inv).unwrap();
        assert_eq!(back.truth_table().unwrap(), bp.truth_table().unwrap());
    }

    #[test]
    fn random_program_is_deterministic() {
        assert_eq!(random_program(8, 4, 42).unwrap(), random_program(8, 4, 42).unwrap());
        assert_ne!(random_program(8, 4, 42).unwrap(), random_program(8, 4, 43).unwrap());
        let empty = random_program(0, 3, 1).unwrap();
        assert!(empty.evaluate(&BitVector::zeros(0)).unwrap());
    }

    #[test]
    fn text_format_round_trip() {
        let bp = random_program(5, 3, 7).unwrap().permute_order(&[4, 2, 0, 1, 3]).unwrap();
        let text = bp.to_string();
        assert!(text.starts_with("robp n=5 w=3 order=5,3,1,2,4\n"));
        assert_eq!(text.parse::<BranchingProgram>().unwrap(), bp);
        let parity = "robp n=2 w=2 order=1,2\n1,2 | 2,1\n1,2 | 2,1\n";
        assert_eq!(parity.parse::<BranchingProgram>().unwrap(), BranchingProgram::parity(2));
        assert!("robp n=2 w=2\n1,2 | 2,1\n".parse::<BranchingProgram>().is_err());
        assert!("robp n=1 w=2\n1,3 | 2,1\n".parse::<BranchingProgram>().is_err());
    }

    #[test]
    fn from_matrices_validates_rows() {
        let good = [[DenseMatrix::identity(2), DenseMatrix::from_successors(&[1, 0])]];
        assert_eq!(
            BranchingProgram::from_matrices(&good, vec![0]).unwrap(),
            BranchingProgram::parity(1)
        );
        let bad = [[DenseMatrix::zeros(2, 2), DenseMatrix::identity(2)]];
        assert!(BranchingProgram::from_matrices(&bad, vec![0]).is_err());
    }
}
