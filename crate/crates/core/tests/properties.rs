use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use roprg_core::fourier::expand_program;
use roprg_core::robp::{compile_formula, random_formula, random_permutation, random_program};
use roprg_core::{BitVector, DenseMatrix, EnumerationBudget, GeneratorSpec};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn hex_round_trip(len in 1usize..130, seed: u64) {
        let v = BitVector::random(len, &mut ChaCha8Rng::seed_from_u64(seed));
        prop_assert_eq!(BitVector::from_hex(len, &v.to_hex()).unwrap(), v.clone());
        prop_assert_eq!(v.to_string().parse::<BitVector>().unwrap(), v);
    }

    #[test]
    fn restricted_expectation_is_an_average(n in 1usize..7, w in 1usize..4, seed: u64, a: u64, b: u64) {
        let bp = random_program(n, w, seed).unwrap();
        let mask = (1u64 << n) - 1;
        let (a, b) = (a & mask, b & mask);
        let mut acc = DenseMatrix::zeros(w, w);
        let free = b.count_ones();
        for u in 0..1u64 << n {
            if u & !b == 0 {
                acc.add_scaled(&DenseMatrix::from_successors(&bp.transition_map(a ^ u)), 2f64.powi(-(free as i32)));
            }
        }
        prop_assert!(bp.restricted_expectation(a, b).max_abs_diff(&acc) <= 1e-12);
    }

    #[test]
    fn uniform_expectation_ignores_order(n in 1usize..8, w in 1usize..4, seed: u64) {
        let bp = random_program(n, w, seed).unwrap();
        let sigma = random_permutation(n, &mut ChaCha8Rng::seed_from_u64(seed ^ 1));
        let permuted = bp.permute_order(&sigma).unwrap();
        prop_assert!(bp.uniform_expectation().max_abs_diff(&permuted.uniform_expectation()) <= 1e-12);
    }

    #[test]
    fn expansion_reproduces_program(n in 1usize..7, w in 1usize..4, seed: u64, x: u64) {
        let bp = random_program(n, w, seed).unwrap();
        let x = x & ((1u64 << n) - 1);
        let f = DenseMatrix::from_successors(&bp.transition_map(x));
        prop_assert!(expand_program(&bp).unwrap().evaluate(x).max_abs_diff(&f) <= 1e-12);
    }

    #[test]
    fn compiled_formulas_agree(vars in 1usize..9, depth in 3usize..5, seed: u64) {
        let phi = random_formula(vars, depth, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        let bp = compile_formula(&phi).unwrap();
        prop_assert!(bp.w() <= phi.depth() + 2);
        for x in 0..1u64 << vars {
            prop_assert_eq!(bp.accepts(x), phi.eval(x));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn distribution_recursion_matches_seed_enumeration(n in 2usize..6, k in 1usize..3, r in 0usize..3) {
        let spec = GeneratorSpec::exact_with(n, 2, k, r).unwrap();
        prop_assume!(spec.seed_length() <= 20);
        let budget = EnumerationBudget::default();
        prop_assert_eq!(spec.exact_output_distribution(budget).unwrap(), spec.seed_histogram(budget).unwrap());
    }
}
