//! Per-level decomposition of the fooling error of `G_r`.
//!
//! Unrolling `G_r = D ⊕ (T ∧ G_{r−1})` from the top gives a random restriction
//! `ρ = (a, b)` per level, `F_ρ(y) = F(a ⊕ (b ∧ y))`, with `y` read from the
//! next level down. Composing with one more step gives
//! `(a ⊕ (b ∧ d), b ∧ t)`. Level `i` contributes
//! `E_ρ ‖E_{D,T} F_ρ(D ⊕ (T ∧ U)) − E F_ρ(U)‖`, the base contributes
//! `E_ρ ‖E F_ρ(G_0) − E F_ρ(U)‖`, and the total error is at most their sum.

use std::collections::{HashMap, HashSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dist::ExactDistribution;
use crate::error::{Error, Result};
use crate::generator::GeneratorSpec;
use crate::primitives::{full_mask, EnumerationBudget};
use crate::robp::BranchingProgram;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelProfile {
    /// `steps[i − 1]` is the contribution of level `i`.
    pub steps: Vec<f64>,
    pub base_residual: f64,
    /// `‖E F(G_r) − E F(U)‖`.
    pub total: f64,
    /// Distinct restrictions reached at the bottom.
    pub restrictions: usize,
}

impl LevelProfile {
    pub fn sum(&self) -> f64 {
        self.steps.iter().sum::<f64>() + self.base_residual
    }
}

type Restriction = (u64, u64);

/// Projects `p` onto the coordinates in `b`.
fn project(p: &ExactDistribution, b: u64) -> Vec<(u64, f64)> {
    let mut out: HashMap<u64, u128> = HashMap::new();
    for (x, c) in p.support() {
        *out.entry(x & b).or_default() += c;
    }
    let scale = 2f64.powi(-(p.log2_denominator() as i32));
    let mut v: Vec<(u64, f64)> = out.into_iter().map(|(x, c)| (x, c as f64 * scale)).collect();
    v.sort_unstable_by_key(|e| e.0);
    v
}

/// Law of `(b ∧ d, b ∧ t)`.
fn step_law(pd: &ExactDistribution, pt: &ExactDistribution, b: u64) -> Vec<(Restriction, f64)> {
    let (qd, qt) = (project(pd, b), project(pt, b));
    let mut joint: HashMap<Restriction, f64> = HashMap::new();
    for &(t, pt) in &qt {
        for &(d, pd) in &qd {
            *joint.entry((d, t)).or_default() += pd * pt;
        }
    }
    let mut v: Vec<_> = joint.into_iter().collect();
    v.sort_unstable_by_key(|e| e.0);
    v
}

/// `E_U F_ρ(U)` depends only on `a ∧ ¬b`, so entries are keyed canonically.
struct Cache<'a> {
    bp: &'a BranchingProgram,
    map: HashMap<Restriction, Vec<f64>>,
}

impl Cache<'_> {
    fn fill(&mut self, keys: impl IntoIterator<Item = Restriction>) {
        let missing: HashSet<Restriction> = keys
            .into_iter()
            .map(|(a, b)| (a & !b, b))
            .filter(|k| !self.map.contains_key(k))
            .collect();
        let bp = self.bp;
        let computed: Vec<_> = missing
            .into_par_iter()
            .map(|(a, b)| ((a, b), bp.restricted_expectation_rows(a, b)))
            .collect();
        self.map.extend(computed);
    }

    fn get(&self, (a, b): Restriction) -> &[f64] {
        &self.map[&(a & !b, b)]
    }
}

fn distance(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt()
}

fn mix(len: usize, terms: impl Iterator<Item = (f64, Vec<f64>)>) -> Vec<f64> {
    let mut out = vec![0.0; len];
    for (p, m) in terms {
        out.iter_mut().zip(m).for_each(|(o, v)| *o += p * v);
    }
    out
}

/// Exact per-level error profile of `spec` on `bp`.
pub fn level_error_profile(bp: &BranchingProgram, spec: &GeneratorSpec, budget: EnumerationBudget) -> Result<LevelProfile> {
    if bp.n() != spec.n() {
        return Err(Error::Dimension {
            expected: spec.n(),
            got: bp.n(),
        });
    }
    let (base, pd, pt) = spec.component_distributions(budget)?;
    let len = bp.w() * bp.w();
    let mut cache = Cache {
        bp,
        map: HashMap::new(),
    };
    let mut states: Vec<(Restriction, f64)> = vec![((0, full_mask(bp.n())), 1.0)];
    let mut steps = vec![0.0; spec.r()];

    for level in (1..=spec.r()).rev() {
        let laws: HashMap<u64, Vec<(Restriction, f64)>> = states
            .iter()
            .map(|&((_, b), _)| b)
            .collect::<HashSet<_>>()
            .into_par_iter()
            .map(|b| (b, step_law(&pd, &pt, b)))
            .collect();
        cache.fill(states.iter().flat_map(|&((a, b), _)| {
            std::iter::once((a, b)).chain(laws[&b].iter().map(move |&((u, v), _)| (a ^ u, v)))
        }));
        let mut contribution = 0.0;
        let mut next: HashMap<Restriction, f64> = HashMap::new();
        for &((a, b), p) in &states {
            let law = &laws[&b];
            let mixed = mix(len, law.iter().map(|&((u, v), q)| (q, cache.get((a ^ u, v)).to_vec())));
            contribution += p * distance(&mixed, cache.get((a, b)));
            for &((u, v), q) in law {
                *next.entry((a ^ u, v)).or_default() += p * q;
            }
        }
        steps[level - 1] = contribution;
        states = next.into_iter().collect();
        states.sort_unstable_by_key(|e| e.0);
    }

    let base_laws: HashMap<u64, Vec<(u64, f64)>> = states
        .iter()
        .map(|&((_, b), _)| b)
        .collect::<HashSet<_>>()
        .into_iter()
        .map(|b| (b, project(&base, b)))
        .collect();
    cache.fill(states.iter().flat_map(|&((a, b), _)| {
        std::iter::once((a, b)).chain(base_laws[&b].iter().map(move |&(g, _)| (a ^ g, 0)))
    }));
    let mut base_residual = 0.0;
    let mut overall = vec![0.0; len];
    for &((a, b), p) in &states {
        let mixed = mix(len, base_laws[&b].iter().map(|&(g, q)| (q, cache.get((a ^ g, 0)).to_vec())));
        base_residual += p * distance(&mixed, cache.get((a, b)));
        overall.iter_mut().zip(&mixed).for_each(|(o, m)| *o += p * m);
    }
    let total = distance(&overall, &bp.uniform_expectation().row_major());
    Ok(LevelProfile {
        steps,
        base_residual,
        total,
        restrictions: states.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::exact_fooling_error;
    use crate::robp::random_program;

    #[test]
    fn total_matches_exact_error_and_sum_dominates() {
        for seed in 0..6 {
            let bp = random_program(6, 3, seed).unwrap();
            for (k, r) in [(1, 1), (1, 2), (2, 2), (1, 3)] {
                let spec = GeneratorSpec::exact_with(6, 3, k, r).unwrap();
                let p = level_error_profile(&bp, &spec, EnumerationBudget::default()).unwrap();
                let e = exact_fooling_error(&bp, &spec, EnumerationBudget::default()).unwrap();
                assert!((p.total - e.frobenius).abs() <= 1e-12, "{} vs {}", p.total, e.frobenius);
                assert!(p.total <= p.sum() + 1e-9);
                assert_eq!(p.steps.len(), r);
            }
        }
    }

    #[test]
    fn uniform_step_contributes_nothing() {
        let bp = random_program(5, 2, 3).unwrap();
        let spec = GeneratorSpec::exact_with(5, 2, 3, 3).unwrap();
        let p = level_error_profile(&bp, &spec, EnumerationBudget::default()).unwrap();
        assert!(p.steps.iter().all(|&s| s.abs() <= 1e-12), "{:?}", p.steps);
        assert!(p.total <= 1e-12);
    }

    #[test]
    fn zero_levels_is_the_base_error() {
        let bp = BranchingProgram::parity(5);
        let spec = GeneratorSpec::exact_with(5, 2, 1, 0).unwrap();
        let p = level_error_profile(&bp, &spec, EnumerationBudget::default()).unwrap();
        assert!(p.steps.is_empty());
        assert_eq!(p.base_residual, 1.0);
        assert_eq!(p.total, 1.0);
    }
}
