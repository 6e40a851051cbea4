//! Property tests over random assemblages.

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use steering::assemblage::Assemblage;
use steering::decomposition::{decompose, decompose_tree, DecomposeOptions, Side};
use steering::exec::Execution;
use steering::extremality::{
    direct_perturbation_basis, hermitian_basis_for_input, is_extremal, is_extremal_direct,
};
use steering::numerics::HermitianOperator;
use steering::numerics::{numerical_rank, DEFAULT_EPSILON as EPS};
use steering::random::{random_assemblage, random_density, random_povm, random_unitary, Family};

fn family() -> impl Strategy<Value = Family> {
    prop::sample::select(Family::ALL.to_vec())
}

/// `(seed, family, d, N, R)` for a random assemblage.
fn instance(max: usize) -> impl Strategy<Value = Assemblage> {
    (any::<u64>(), family(), 1..=max, 1..=max, 1..=max).prop_map(|(seed, fam, d, n, r)| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        random_assemblage(&mut rng, fam, d, n, r)
    })
}

/// Small enough to decompose quickly.
fn small_instance() -> impl Strategy<Value = Assemblage> {
    (any::<u64>(), family(), 1..=2usize, 1..=3usize, 1..=2usize).prop_map(|(seed, fam, d, n, r)| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        random_assemblage(&mut rng, fam, d, n, r)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn measured_states_are_valid(
        seed in any::<u64>(),
        dim_a in 1usize..=3,
        dim_b in 1usize..=3,
        n in 1usize..=3,
        r in 1usize..=3,
        rank in 1usize..=9,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rho = random_density(&mut rng, dim_a * dim_b, rank.min(dim_a * dim_b));
        let meas: Vec<_> = (0..r)
            .map(|_| {
                let mut ranks = vec![1; n];
                ranks[0] = dim_a;
                random_povm(&mut rng, dim_a, &ranks)
            })
            .collect();
        let sigma = Assemblage::from_state_and_measurements(&rho, dim_a, &meas, EPS).unwrap();
        prop_assert!(sigma.validate(EPS).passed());
    }

    #[test]
    fn canonical_realization_round_trips(sigma in instance(3)) {
        let realization = sigma.canonical_realization(EPS).unwrap();
        let back = realization.reconstruct(EPS).unwrap();
        prop_assert!(back.max_block_distance(&sigma) < 1e-6);
    }

    #[test]
    fn family_size_is_sum_of_squared_ranks(sigma in instance(3)) {
        for r in 0..sigma.n_inputs() {
            let family = hermitian_basis_for_input(&sigma, r, EPS).unwrap();
            let expected: usize = (0..sigma.n_outcomes())
                .map(|n| numerical_rank(sigma.block(n, r), EPS).pow(2))
                .sum();
            prop_assert_eq!(family.len(), expected);
        }
    }

    #[test]
    fn witnesses_are_valid_and_indefinite(sigma in instance(3)) {
        let report = is_extremal(&sigma, EPS).unwrap();
        prop_assert_eq!(report.extremal, is_extremal_direct(&sigma, EPS).unwrap());
        if let Some(w) = report.witness {
            let check = w.check(&sigma, EPS);
            prop_assert!(check.is_valid(10.0 * EPS), "{}", check);
            let most_negative = w
                .blocks()
                .iter()
                .map(|b| b.min_eigenvalue())
                .fold(f64::INFINITY, f64::min);
            prop_assert!(most_negative < -1e-9);
        }
    }

    #[test]
    fn embedding_preserves_verdict(sigma in instance(3), axis in 0usize..3) {
        let (d, n, r) = (sigma.dim(), sigma.n_outcomes(), sigma.n_inputs());
        let big = match axis {
            0 => sigma.embed(n + 1, r, d),
            1 => sigma.embed(n, r + 1, d),
            _ => sigma.embed(n, r, d + 1),
        }
        .unwrap();
        prop_assert!(big.validate(EPS).passed());
        prop_assert_eq!(
            is_extremal(&sigma, EPS).unwrap().extremal,
            is_extremal(&big, EPS).unwrap().extremal
        );
    }
}

/// `U σ U†` blockwise.
fn conjugated(sigma: &Assemblage, seed: u64) -> Assemblage {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let u = random_unitary(&mut rng, sigma.dim());
    let grid = sigma
        .to_grid()
        .into_iter()
        .map(|row| row.iter().map(|b| b.congruence(&u.adjoint())).collect())
        .collect();
    Assemblage::new(grid).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    // Mixing in white noise makes block spectra degenerate, so the eigenframes
    // picked before and after rotation differ inside degenerate subspaces.
    #[test]
    fn verdict_is_independent_of_degenerate_frames(
        sigma in instance(3),
        noise in prop::sample::select(vec![0.0, 0.25, 0.5]),
        seed in any::<u64>(),
    ) {
        let (d, n, r) = (sigma.dim(), sigma.n_outcomes(), sigma.n_inputs());
        let white = Assemblage::new(vec![vec![&HermitianOperator::identity(d) * (1.0 / (d * n) as f64); n]; r]).unwrap();
        let mixed = Assemblage::weighted_sum([(1.0 - noise, &sigma), (noise, &white)]).unwrap();
        let rotated = conjugated(&mixed, seed);
        prop_assert_eq!(
            is_extremal(&mixed, EPS).unwrap().extremal,
            is_extremal(&rotated, EPS).unwrap().extremal
        );
        prop_assert_eq!(
            direct_perturbation_basis(&mixed, EPS).unwrap().len(),
            direct_perturbation_basis(&rotated, EPS).unwrap().len()
        );
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn decomposition_reconstructs_with_extremal_leaves(sigma in small_instance()) {
        let opts = DecomposeOptions { check_perturbations: true, ..DecomposeOptions::default() };
        let result = decompose(&sigma, &opts).unwrap();
        prop_assert!(!result.truncated);
        prop_assert!((result.total_weight() - 1.0).abs() < 1e-9);
        prop_assert!(result.reconstruction_residual(&sigma) < 1e-6);
        prop_assert!(result.stats.max_perturbation_residual <= 10.0 * EPS);
        for leaf in &result.leaves {
            prop_assert!(leaf.weight > 0.0);
            prop_assert!(leaf.assemblage.validate(10.0 * EPS).passed());
            prop_assert!(is_extremal(&leaf.assemblage, EPS).unwrap().extremal);
            prop_assert!(is_extremal_direct(&leaf.assemblage, EPS).unwrap());
        }
        prop_assert_eq!(result.stats.raw_leaves, result.leaves.len() + result.stats.merges);
    }

    #[test]
    fn weights_are_conserved_at_every_node(sigma in small_instance()) {
        let tree = decompose_tree(&sigma, &DecomposeOptions::default()).unwrap();
        // Leaf weights on the plus branch add up to the first split's p+.
        let total: f64 = tree.leaves.iter().map(|l| l.weight).sum();
        prop_assert!((total - 1.0).abs() < 1e-12);
        if let Some(rs) = &tree.stats.root_split {
            let plus: f64 = tree.leaves.iter().filter(|l| l.path[0] == Side::Plus).map(|l| l.weight).sum();
            prop_assert!((plus - rs.p_plus).abs() < 1e-12);
            prop_assert!((rs.p_plus + rs.p_minus - 1.0).abs() < 1e-15);
        }
        prop_assert!(tree.stats.max_depth <= sigma.n_outcomes() * sigma.n_inputs() * sigma.dim());
    }

    #[test]
    fn sequential_and_parallel_agree(sigma in small_instance()) {
        let run = |execution| {
            let o = DecomposeOptions { execution, ..DecomposeOptions::default() };
            decompose(&sigma, &o).unwrap()
        };
        let (a, b) = (run(Execution::Sequential), run(Execution::Parallel));
        prop_assert_eq!(a.leaves, b.leaves);
    }
}
