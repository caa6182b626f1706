use proptest::prelude::*;
use proptest::test_runner::RngSeed;
use sylvobs_core::numkernel::{
    build_transform_l, eigenvalues, inverse_transform_l, rank_tol, RealMatrix,
};
use sylvobs_core::testgen::PairGenerator;
use sylvobs_core::Tolerances;

fn low_rank(rows: usize, cols: usize, rank: usize, seed: u64) -> RealMatrix {
    let mut g = PairGenerator::new(seed);
    g.matrix(rows, rank) * g.matrix(rank, cols)
}

proptest! {
    #![proptest_config(ProptestConfig {
        cases: 64,
        rng_seed: RngSeed::Fixed(0x5171_0b5e),
        ..ProptestConfig::default()
    })]

    #[test]
    fn rank_is_transpose_invariant(rows in 1usize..7, cols in 1usize..7, r in 0usize..7, seed in any::<u64>()) {
        let m = low_rank(rows, cols, r.min(rows).min(cols), seed);
        prop_assert_eq!(rank_tol(&m, 0.0), rank_tol(&m.transpose(), 0.0));
        prop_assert_eq!(rank_tol(&m, 0.0), r.min(rows).min(cols));
    }

    #[test]
    fn eigenvalues_are_similarity_invariant(n in 1usize..8, seed in any::<u64>()) {
        let mut g = PairGenerator::new(seed);
        let a = g.matrix(n, n);
        let (s, s_inv) = g.similarity(n);
        let e1 = eigenvalues(&a).unwrap();
        let e2 = eigenvalues(&(&s_inv * &a * &s)).unwrap();
        prop_assert_eq!(e1.len(), e2.len());
        // Greedy matching; a random matrix has well separated eigenvalues.
        let mut used = vec![false; n];
        for x in e1.values() {
            let (j, d) = e2
                .values()
                .iter()
                .enumerate()
                .filter(|(j, _)| !used[*j])
                .map(|(j, y)| (j, (x - y).norm()))
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .unwrap();
            used[j] = true;
            prop_assert!(d < 1e-7 * (1.0 + x.norm()), "eigenvalue {} moved by {}", x, d);
        }
    }
}

#[test]
fn transform_normalizes_random_outputs() {
    let mut g = PairGenerator::new(2024);
    let tols = Tolerances::default();
    for _ in 0..100 {
        let (n, p) = g.dims(8);
        let c = g.matrix(p, n);
        let l = build_transform_l(&c, &tols).unwrap();
        let mut target = RealMatrix::zeros(p, n);
        target.view_mut((0, 0), (p, p)).fill_with_identity();
        let scale = 1.0 + c.norm();
        assert!((&c * &l - &target).norm() <= 1e-10 * scale);
        let l_inv = inverse_transform_l(&c, &l);
        assert!((&l_inv * &l - RealMatrix::identity(n, n)).norm() <= 1e-10 * scale * scale);
    }
}
