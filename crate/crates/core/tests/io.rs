use lop_core::io::{
    gen_subsample, gen_uniform, load_dataset, parse_lolib, save_dataset, write_lolib, Dataset,
    GeneratorSpec,
};
use lop_core::rng::Rng;
use lop_core::LopInstance;
use proptest::prelude::*;

fn int_instance(n: usize, seed: u64) -> LopInstance {
    let mut rng = Rng::new(seed);
    let b = (0..n * n).map(|_| rng.index(1000) as f64 - 200.0).collect();
    LopInstance::new(format!("int-{seed}"), n, b).unwrap()
}

fn round_trip(inst: &LopInstance) -> LopInstance {
    let mut buf = Vec::new();
    write_lolib(inst, &mut buf).unwrap();
    parse_lolib(buf.as_slice(), "fallback").unwrap()
}

#[test]
fn integer_instances_round_trip_exactly() {
    for seed in 0..20 {
        let inst = int_instance(2 + (seed as usize % 9), seed);
        assert_eq!(round_trip(&inst), inst);
    }
}

proptest! {
    #[test]
    fn real_instances_round_trip(seed in any::<u64>(), n in 2usize..12) {
        let inst = gen_uniform(n, seed).unwrap();
        let back = round_trip(&inst);
        prop_assert_eq!(back.name(), inst.name());
        for (a, b) in inst.matrix().iter().zip(back.matrix()) {
            prop_assert!((a - b).abs() <= 1e-9);
        }
    }
}

#[test]
fn subsample_draws_from_source_entries() {
    let src = int_instance(7, 4);
    let pool: Vec<f64> = src.off_diagonal().collect();
    let inst = gen_subsample(&src, 30, 12).unwrap();
    for i in 0..30 {
        for j in 0..30 {
            let v = inst.weight(i, j);
            if i == j {
                assert_eq!(v, 0.0);
            } else {
                assert!(pool.contains(&v));
            }
        }
    }
    assert_eq!(inst, gen_subsample(&src, 30, 12).unwrap());
}

#[test]
fn subsample_histogram_matches_source() {
    // Source with 4 distinct values in proportions 1:2:3:6 (12 off-diagonal
    // entries of a 4x4 matrix).
    let rows = vec![
        vec![0.0, 1.0, 2.0, 2.0],
        vec![3.0, 0.0, 3.0, 3.0],
        vec![4.0, 4.0, 0.0, 4.0],
        vec![4.0, 4.0, 4.0, 0.0],
    ];
    let src = LopInstance::from_rows("hist", &rows).unwrap();
    let inst = gen_subsample(&src, 100, 77).unwrap();
    let mut counts = [0f64; 4];
    for v in inst.off_diagonal() {
        counts[v as usize - 1] += 1.0;
    }
    let total = 100.0 * 99.0;
    let expected = [1.0, 2.0, 3.0, 6.0].map(|w| total * w / 12.0);
    let chi2: f64 = counts
        .iter()
        .zip(expected)
        .map(|(o, e)| (o - e) * (o - e) / e)
        .sum();
    // 3 degrees of freedom: P(chi2 > 16.27) = 0.001
    assert!(chi2 < 16.27, "chi2 = {chi2}, counts {counts:?}");
}

#[test]
fn dataset_round_trip_and_regeneration() {
    let dir = tempfile::tempdir().unwrap();
    let spec = GeneratorSpec::uniform(9, 2024);
    let ds = Dataset::generated(&spec, &[], 32).unwrap();
    save_dataset(&ds, dir.path()).unwrap();
    let back = load_dataset(dir.path()).unwrap();
    assert_eq!(back.len(), 32);
    assert_eq!(back.manifest, ds.manifest);
    for (a, b) in ds.instances.iter().zip(&back.instances) {
        assert_eq!(a.matrix(), b.matrix());
        assert_eq!(a.name(), b.name());
    }
    assert!(back.regeneration_mismatches(&[]).unwrap().is_empty());

    let manifest = std::fs::read_to_string(dir.path().join("manifest.json")).unwrap();
    let json: serde_json::Value = serde_json::from_str(&manifest).unwrap();
    for key in ["version", "generator", "seed", "count", "names"] {
        assert!(json.get(key).is_some(), "manifest lacks {key}");
    }
}

#[test]
fn subsample_dataset_regenerates_from_sources() {
    let sources = vec![int_instance(6, 1), int_instance(8, 2)];
    let spec = GeneratorSpec::subsample(10, 5, "pool");
    let ds = Dataset::generated(&spec, &sources, 6).unwrap();
    assert!(ds.regeneration_mismatches(&sources).unwrap().is_empty());
    let swapped = vec![sources[1].clone(), sources[0].clone()];
    assert!(!ds.regeneration_mismatches(&swapped).unwrap().is_empty());
}
