use lop_core::io::gen_uniform;
use lop_core::rng::Rng;
use lop_core::{
    edge_features, evaluate, evaluate_insert_delta, validate_tournament, LopInstance, Permutation,
};
use proptest::prelude::*;

fn random_perm(n: usize, rng: &mut Rng) -> Permutation {
    let mut v: Vec<usize> = (0..n).collect();
    rng.shuffle(&mut v);
    Permutation::new(v).unwrap()
}

fn int_instance(n: usize, seed: u64) -> LopInstance {
    let mut rng = Rng::new(seed);
    let b = (0..n * n).map(|_| rng.index(100) as f64).collect();
    LopInstance::new("int", n, b).unwrap()
}

#[test]
fn delta_matches_full_reevaluation() {
    let inst = gen_uniform(6, 21).unwrap();
    let mut rng = Rng::new(5);
    let mut p = random_perm(6, &mut rng);
    for _ in 0..50 {
        let (from, to) = (rng.index(6), rng.index(6));
        let before = evaluate(&inst, &p).unwrap();
        let delta = evaluate_insert_delta(&inst, &p, from, to).unwrap();
        p.insert_move(from, to).unwrap();
        let after = evaluate(&inst, &p).unwrap();
        assert!((after - before - delta).abs() < 1e-12);
    }
}

#[test]
fn integer_delta_chain_is_exact() {
    let inst = int_instance(12, 3);
    let mut rng = Rng::new(8);
    let mut p = random_perm(12, &mut rng);
    let mut value = evaluate(&inst, &p).unwrap();
    for _ in 0..500 {
        let (from, to) = (rng.index(12), rng.index(12));
        value += evaluate_insert_delta(&inst, &p, from, to).unwrap();
        p.insert_move(from, to).unwrap();
    }
    assert_eq!(value, evaluate(&inst, &p).unwrap());
}

#[test]
fn edge_features_are_antisymmetric() {
    let inst = gen_uniform(3, 99).unwrap();
    let y = edge_features(&inst);
    for i in 0..3 {
        for j in 0..3 {
            assert_eq!(y.get(i, j) + y.get(j, i), 0.0);
            assert_eq!(y.get(i, j), inst.weight(i, j) - inst.weight(j, i));
        }
    }
}

#[test]
fn every_permutation_of_four_is_an_acyclic_tournament() {
    let mut count = 0;
    for a in 0..4 {
        for b in 0..4 {
            for c in 0..4 {
                for d in 0..4 {
                    let order = [a, b, c, d];
                    let distinct = {
                        let mut s = order;
                        s.sort_unstable();
                        s == [0, 1, 2, 3]
                    };
                    let report = validate_tournament(4, &order);
                    assert_eq!(report.is_valid(), distinct, "{order:?}");
                    count += distinct as usize;
                }
            }
        }
    }
    assert_eq!(count, 24);
}

proptest! {
    #[test]
    fn reversal_complement(seed in any::<u64>(), n in 2usize..15) {
        let inst = int_instance(n, seed);
        let mut rng = Rng::new(seed ^ 1);
        let p = random_perm(n, &mut rng);
        let total = evaluate(&inst, &p).unwrap() + evaluate(&inst, &p.reversed()).unwrap();
        prop_assert_eq!(total, inst.off_diagonal_sum());
    }

    #[test]
    fn relabeling_invariance(seed in any::<u64>(), n in 2usize..12) {
        let inst = gen_uniform(n, seed).unwrap();
        let mut rng = Rng::new(seed.wrapping_add(3));
        let sigma = random_perm(n, &mut rng);
        let p = random_perm(n, &mut rng);
        let relabeled = inst.relabel(&sigma).unwrap();
        // item i of the relabeled instance is item sigma[i] of the original
        let p_rel = p.map_items(sigma.inverse().as_slice()).unwrap();
        let a = evaluate(&inst, &p).unwrap();
        let b = evaluate(&relabeled, &p_rel).unwrap();
        prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
    }

    #[test]
    fn delta_chain_relative_precision(seed in any::<u64>(), n in 5usize..31) {
        let inst = gen_uniform(n, seed).unwrap();
        let mut rng = Rng::new(seed ^ 0xabc);
        let mut p = random_perm(n, &mut rng);
        let mut value = evaluate(&inst, &p).unwrap();
        for _ in 0..40 {
            let (from, to) = (rng.index(n), rng.index(n));
            value += evaluate_insert_delta(&inst, &p, from, to).unwrap();
            p.insert_move(from, to).unwrap();
        }
        let exact = evaluate(&inst, &p).unwrap();
        prop_assert!((value - exact).abs() <= 1e-9 * exact.abs());
    }

    #[test]
    fn permutations_always_validate(seed in any::<u64>(), n in 2usize..20) {
        let mut rng = Rng::new(seed);
        let p = random_perm(n, &mut rng);
        prop_assert!(validate_tournament(n, p.as_slice()).is_valid());
    }
}
