use certicos::builder::build_graph;
use certicos::format::{self, FormatError};
use certicos::synth;
use certicos_core::knng::{build_knng, verify_knng};
use certicos_core::{LshSeeder, UnitVectorSet};
use proptest::prelude::*;

fn dataset(seed: u64, n: usize, d: usize, clusters: usize) -> UnitVectorSet {
    let mut rng = synth::rng_for(seed);
    let data = if clusters == 0 {
        synth::uniform(&mut rng, n, d)
    } else {
        synth::clustered(&mut rng, n, d, clusters, 0.05)
    };
    UnitVectorSet::from_rows(d, data, false).unwrap()
}

#[test]
fn vectors_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("v.c2vd");
    let set = dataset(1, 40, 6, 3);
    format::save_vectors(&path, 6, set.as_slice()).unwrap();
    let bytes = std::fs::read(&path).unwrap();
    assert_eq!(bytes.len(), 20 + 40 * 6 * 4);
    let back = format::load_vectors(&path, false).unwrap();
    assert_eq!(back, set);
    assert_eq!(format::load_vectors(&path, true).unwrap(), set);
}

#[test]
fn load_vectors_examples() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("v.c2vd");

    format::save_vectors(&path, 2, &[3.0, 4.0]).unwrap();
    assert_eq!(format::load_vectors(&path, true).unwrap().row(0), &[0.6, 0.8]);
    assert!(matches!(format::load_vectors(&path, false), Err(FormatError::Data(_))));

    format::save_vectors(&path, 2, &[1.0, 0.0]).unwrap();
    assert_eq!(format::load_vectors(&path, false).unwrap().row(0), &[1.0, 0.0]);

    format::save_vectors(&path, 2, &[0.0, 0.0]).unwrap();
    assert!(matches!(
        format::load_vectors(&path, true),
        Err(FormatError::Data(certicos_core::Error::ZeroRow { row: 0 }))
    ));
}

#[test]
fn index_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("i.c2ix");
    let set = dataset(2, 300, 8, 0);
    let graph = build_knng(&set, 12).unwrap();
    let seeder = LshSeeder::build(&set, 10, 99).unwrap();
    format::save_index(&path, &graph, &seeder).unwrap();
    let (g, s) = format::load_index(&path).unwrap();
    assert_eq!((&g, &s), (&graph, &seeder));
    let again = dir.path().join("j.c2ix");
    format::save_index(&again, &g, &s).unwrap();
    assert_eq!(std::fs::read(&path).unwrap(), std::fs::read(&again).unwrap());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn parallel_builder_equals_core(
        seed in any::<u64>(),
        n in 3usize..200,
        d in 2usize..24,
        clusters in 0usize..6,
        k_frac in 0.0f64..1.0,
    ) {
        let set = dataset(seed, n, d, clusters);
        let k = 1 + ((n - 2) as f64 * k_frac) as usize;
        let fast = build_graph(&set, k).unwrap();
        prop_assert_eq!(&fast, &build_knng(&set, k).unwrap());
        prop_assert!(verify_knng(&set, &fast).is_empty());
    }

    #[test]
    fn index_bytes_round_trip_and_damage(
        seed in any::<u64>(),
        n in 3usize..80,
        d in 2usize..10,
        bits in 1usize..=12,
        cut in any::<prop::sample::Index>(),
        flip in any::<prop::sample::Index>(),
    ) {
        let set = dataset(seed, n, d, 0);
        let graph = build_knng(&set, 2.min(n - 1)).unwrap();
        let seeder = LshSeeder::build(&set, bits, seed).unwrap();
        let bytes = format::encode_index(&graph, &seeder);
        let (g, s) = format::decode_index(&bytes).unwrap();
        prop_assert_eq!(format::encode_index(&g, &s), bytes.clone());

        let at = cut.index(bytes.len());
        prop_assert!(matches!(format::decode_index(&bytes[..at]), Err(FormatError::Truncated(_))));

        let mut damaged = bytes.clone();
        damaged[flip.index(bytes.len())] ^= 0x10;
        prop_assert!(format::decode_index(&damaged).is_err());
    }
}
