use nalgebra::DVector;
use proptest::prelude::*;
use rand::Rng;
use randmeas::dataset::acquire_with;
use randmeas::ensembles::sample_setting;
use randmeas::hamlearn::{build_K, AnsatzBasis, ExactProvider};
use randmeas::pauli::paulis_up_to_weight;
use randmeas::protocols::{cross_overlap, fmax};
use randmeas::shadows::{build_snapshots, pt_moments, purity_shadow};
use randmeas::sim::prep::{haar_pure, random_mixed};
use randmeas::sim::{build_ising_chain, Propagator, QuantumState};
use randmeas::{
    acquire, acquire_on_device, Basis, BasisString, EnsembleKind, EnsembleSpec, MeasurementDataset,
};

fn kind() -> impl Strategy<Value = EnsembleKind> {
    prop_oneof![
        Just(EnsembleKind::SingleQubitClifford),
        Just(EnsembleKind::SingleQubitHaar)
    ]
}

fn mixed(n: usize, seed: u64) -> QuantumState {
    QuantumState::Mixed(random_mixed(n, seed).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn settings_do_not_depend_on_call_order(seed: u64, ms in prop::collection::vec(0u64..10_000, 1..16), k in kind()) {
        let e = EnsembleSpec::new(k, 3);
        let forward: Vec<_> = ms.iter().map(|&m| sample_setting(&e, seed, m)).collect();
        let mut backward: Vec<_> = ms.iter().rev().map(|&m| sample_setting(&e, seed, m)).collect();
        backward.reverse();
        prop_assert_eq!(forward, backward);
    }

    #[test]
    fn dataset_bytes_round_trip(seed: u64, n in 1usize..5, m in 1usize..12, shots in 1usize..5, k in kind()) {
        let st = QuantumState::Pure(haar_pure(n, seed).unwrap());
        let ds = acquire(&st, &EnsembleSpec::new(k, n), m, shots, seed).unwrap();
        let bytes = ds.to_bytes();
        let back = MeasurementDataset::read_from(&bytes[..]).unwrap();
        prop_assert_eq!(&back, &ds);
        prop_assert_eq!(back.to_bytes(), bytes);
    }

    #[test]
    fn snapshots_have_unit_trace(seed: u64, n in 1usize..4, k in kind()) {
        let ds = acquire(&mixed(n, seed), &EnsembleSpec::new(k, n), 8, 3, seed).unwrap();
        let all: Vec<usize> = (0..n).collect();
        for s in build_snapshots(&ds) {
            let tr = s.dense(&all, 0).trace();
            prop_assert!((tr.re - 1.0).abs() < 1e-12 && tr.im.abs() < 1e-12, "trace {tr}");
        }
    }

    #[test]
    fn second_pt_moment_is_shadow_purity(seed: u64, k in kind()) {
        let ds = acquire(&mixed(3, seed), &EnsembleSpec::new(k, 3), 30, 2, seed).unwrap();
        let p2 = pt_moments(&ds, &[0], &[1, 2], 2).unwrap().value;
        let purity = purity_shadow(&ds, &[0, 1, 2]).unwrap().value;
        prop_assert!((p2 - purity).abs() < 1e-10, "{p2} vs {purity}");
    }

    #[test]
    fn cross_overlap_is_exactly_symmetric(seed: u64, k in kind()) {
        let st = mixed(3, seed);
        let e = EnsembleSpec::new(k, 3);
        let a = acquire_on_device(&st, &e, 40, 4, seed, 1).unwrap();
        let b = acquire_on_device(&st, &e, 40, 4, seed, 2).unwrap();
        for q in [vec![0], vec![1, 2], vec![0, 1, 2]] {
            prop_assert_eq!(cross_overlap(&a, &b, &q).unwrap(), cross_overlap(&b, &a, &q).unwrap());
        }
    }

    #[test]
    fn fmax_flag_matches_its_range(seed: u64) {
        let e = EnsembleSpec::clifford(2);
        let a = acquire_on_device(&mixed(2, seed), &e, 6, 2, seed, 1).unwrap();
        let b = acquire_on_device(&mixed(2, seed ^ 1), &e, 6, 2, seed, 2).unwrap();
        if let Ok(f) = fmax(&a, &b, &[0, 1]) {
            prop_assert_eq!(f.out_of_range, !(-0.1..=1.1).contains(&f.fmax.value));
        }
    }

    #[test]
    fn constraint_matrix_is_exactly_antisymmetric(seed: u64) {
        let basis = AnsatzBasis::chain(3, 2, 1).unwrap();
        let k = build_K(&basis, &ExactProvider(&mixed(3, seed))).unwrap();
        prop_assert_eq!(&k, &(-k.transpose()));
        prop_assert!(k.diagonal().iter().all(|&d| d == 0.0));
    }

    #[test]
    fn eigenstates_annihilate_true_couplings(hx in -1.5f64..1.5, hz in -1.0f64..1.0, index in 0usize..16) {
        let h = build_ising_chain(4, 1.0, hx, hz).unwrap();
        let st = QuantumState::Pure(Propagator::new(&h).unwrap().eigenstate(index).unwrap());
        let basis = AnsatzBasis::chain(4, 2, 1).unwrap();
        let c = DVector::from_vec(basis.couplings(&h));
        let k = build_K(&basis, &ExactProvider(&st)).unwrap();
        prop_assert!((k * c).norm() < 1e-8);
    }
}

#[test]
fn random_bases_match_pauli_weight_law() {
    let draws = 100_000;
    let mut rng = randmeas::seed::rng(5);
    let bases: Vec<BasisString> = (0..draws)
        .map(|_| {
            BasisString::new(
                (0..4)
                    .map(|_| [Basis::X, Basis::Y, Basis::Z][rng.random_range(0..3)])
                    .collect(),
            )
        })
        .collect();
    for w in 1..=3 {
        let p = paulis_up_to_weight(4, w)
            .into_iter()
            .find(|p| p.weight() == w)
            .unwrap();
        let hits = bases.iter().filter(|b| p.is_compatible(b)).count();
        let q = 3f64.powi(-(w as i32));
        let sigma = (q * (1.0 - q) / draws as f64).sqrt();
        let f = hits as f64 / draws as f64;
        assert!((f - q).abs() < 3.0 * sigma, "weight {w}: {f} vs {q}");
    }
}

#[test]
fn custom_setting_generators_are_honored() {
    let st = QuantumState::Pure(haar_pure(2, 3).unwrap());
    let e = EnsembleSpec::clifford(2);
    let plain = acquire(&st, &e, 5, 2, 9).unwrap();
    let custom = acquire_with(&st, &e, 5, 2, 9, |m| sample_setting(&e, 9, m)).unwrap();
    assert_eq!(plain, custom);
}
