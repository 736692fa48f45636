use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use synrdp::prob::{
    entropy, kl_divergence, mutual_information, partial_semantic_kl, semantic_entropy, single_side_semantic_mi,
};
use synrdp::{random, FiniteDistribution, SynsetPartition};

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Every block holds at most one index with positive mass.
fn blocks_are_pure(p: &FiniteDistribution, s: &SynsetPartition) -> bool {
    s.blocks().iter().all(|b| b.iter().filter(|&&i| p.get(i) > 0.0).count() <= 1)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn semantic_entropy_is_sandwiched(seed in any::<u64>(), n in 1usize..9, zero_prob in 0.0f64..0.8) {
        let mut r = rng(seed);
        let p = random::sparse_distribution(&mut r, n, zero_prob);
        let s = random::partition(&mut r, n);
        let hs = semantic_entropy(&p, &s).unwrap();
        let h = entropy(&p);
        prop_assert!(hs >= -1e-12);
        prop_assert!(hs <= h + 1e-12);
        prop_assert_eq!((h - hs).abs() <= 1e-12, blocks_are_pure(&p, &s));
    }

    #[test]
    fn partial_semantic_kl_is_below_kl(seed in any::<u64>(), n in 1usize..9) {
        let mut r = rng(seed);
        let q = random::distribution(&mut r, n);
        let p = random::distribution(&mut r, n);
        let s = random::partition(&mut r, n);
        prop_assert!(partial_semantic_kl(&q, &p, &s).unwrap() <= kl_divergence(&q, &p).unwrap() + 1e-12);
    }

    #[test]
    fn kl_is_nonnegative(seed in any::<u64>(), n in 1usize..9) {
        let mut r = rng(seed);
        let q = random::distribution(&mut r, n);
        let p = random::distribution(&mut r, n);
        let kl = kl_divergence(&q, &p).unwrap();
        prop_assert!(kl >= 0.0);
        let same = q.probs().iter().zip(p.probs()).all(|(a, b)| (a - b).abs() <= 1e-12);
        prop_assert_eq!(same, kl == 0.0);
        prop_assert_eq!(kl_divergence(&q, &q).unwrap(), 0.0);
    }

    #[test]
    fn merging_blocks_never_raises_semantic_entropy(seed in any::<u64>(), n in 2usize..9) {
        let mut r = rng(seed);
        let p = random::distribution(&mut r, n);
        let s = random::partition(&mut r, n);
        prop_assume!(s.num_blocks() >= 2);
        let hs = semantic_entropy(&p, &s).unwrap();
        for a in 0..s.num_blocks() {
            for b in a + 1..s.num_blocks() {
                let merged = s.merge(a, b).unwrap();
                prop_assert!(semantic_entropy(&p, &merged).unwrap() <= hs + 1e-12);
            }
        }
    }

    #[test]
    fn collapsing_outputs_loses_information(seed in any::<u64>(), rows in 1usize..7, cols in 1usize..7) {
        let mut r = rng(seed);
        let j = random::joint(&mut r, rows, cols);
        let s = random::partition(&mut r, cols);
        prop_assert!(single_side_semantic_mi(&j, &s).unwrap() <= mutual_information(&j) + 1e-12);
    }
}

#[test]
fn kl_equality_case_on_identical_inputs() {
    let p = FiniteDistribution::new(vec![0.2, 0.0, 0.8]).unwrap();
    assert_eq!(kl_divergence(&p, &p).unwrap(), 0.0);
    let q = FiniteDistribution::new(vec![0.2, 1e-6, 0.8 - 1e-6]).unwrap();
    assert!(kl_divergence(&p, &q).unwrap() > 0.0);
}
