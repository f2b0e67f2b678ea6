use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use enthier::bounds::{convex_roof_upper_bound, DecompositionEnsemble, SearchConfig, RECONSTRUCTION_TOL};
use enthier::io::{parse_state, state_to_json, LoadOptions, LoadedState};
use enthier::measures::{Evaluator, Family, MeasureSpec};
use enthier::partitions::{enumerate_k_partitions, stirling2};
use enthier::tensor::{permute_subsystems, pi_part, reduced_density, schmidt_spectrum};
use enthier::{random, IndexSubset, PureState, C64};

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Small mixed-dimension systems: 2..=4 parties of dimension 2 or 3, total <= 36.
fn dims_strategy() -> impl Strategy<Value = Vec<usize>> {
    prop::collection::vec(2usize..=3, 2..=4).prop_filter("keep it small", |d| d.iter().product::<usize>() <= 36)
}

/// Identical parties, so that every subsystem permutation is defined.
fn uniform_dims_strategy() -> impl Strategy<Value = Vec<usize>> {
    prop_oneof![
        (2usize..=4).prop_map(|n| vec![2; n]),
        (2usize..=3).prop_map(|n| vec![3; n])
    ]
}

fn spec_strategy() -> impl Strategy<Value = (Family, Option<f64>)> {
    prop_oneof![
        Just((Family::KGm, None)),
        Just((Family::KMe, None)),
        (1.05f64..4.0).prop_map(|q| (Family::QkGm, Some(q))),
        (1.05f64..4.0).prop_map(|q| (Family::QkMe, Some(q))),
        (0.0f64..0.99).prop_map(|a| (Family::AlphaKGm, Some(a))),
    ]
}

const BELL: [u128; 11] = [1, 1, 2, 5, 15, 52, 203, 877, 4140, 21147, 115975];

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn schmidt_matches_reduced_eigenvalues(dims in dims_strategy(), seed: u64, mask in 1u64..15) {
        let n = dims.len();
        let mask = mask & ((1 << n) - 1);
        prop_assume!(mask != 0 && mask != (1 << n) - 1);
        let psi = random::haar_state(&dims, &mut rng(seed)).unwrap();
        let cut = IndexSubset::from_mask(mask, n).unwrap();
        let s = schmidt_spectrum(&psi, &cut).unwrap();
        let r = reduced_density(&psi, &cut).unwrap().spectrum().unwrap();
        let len = s.len().max(r.len());
        for i in 0..len {
            let a = s.values().get(i).copied().unwrap_or(0.0);
            let b = r.values().get(i).copied().unwrap_or(0.0);
            prop_assert!((a - b).abs() <= 1e-12, "{} vs {}", a, b);
        }
        prop_assert!((s.values().iter().sum::<f64>() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn measures_are_permutation_and_lu_invariant(
        dims in uniform_dims_strategy(), seed: u64, (family, param) in spec_strategy(), kk in 0usize..8
    ) {
        let n = dims.len();
        let k = 2 + kk % (n - 1);
        let mut r = rng(seed);
        let psi = random::haar_state(&dims, &mut r).unwrap();
        let perm = random::permutation(n, &mut r);
        let moved = permute_subsystems(&psi, &perm).unwrap();
        let spec = MeasureSpec::new(family, k, param);
        let a = Evaluator::new(&dims, spec).unwrap().value(&psi).unwrap();
        let b = Evaluator::new(&dims, spec).unwrap().value(&moved).unwrap();
        prop_assert!((a - b).abs() <= 1e-10, "perm {:?}: {} vs {}", perm, a, b);
        let lu = psi.apply_local(&random::local_unitaries(&dims, &mut r)).unwrap();
        let c = Evaluator::new(&dims, spec).unwrap().value(&lu).unwrap();
        prop_assert!((a - c).abs() <= 1e-9, "lu: {} vs {}", a, c);
        prop_assert!(a >= 0.0 && a.is_finite());
    }

    #[test]
    fn gm_dominates_me(dims in dims_strategy(), seed: u64, kk in 0usize..8, q in 1.05f64..4.0) {
        let n = dims.len();
        let k = 2 + kk % (n - 1);
        let psi = random::haar_state(&dims, &mut rng(seed)).unwrap();
        let v = |s: MeasureSpec| Evaluator::new(&dims, s).unwrap().value(&psi).unwrap();
        prop_assert!(v(MeasureSpec::kgm(k)) >= v(MeasureSpec::kme(k)) - 1e-10);
        prop_assert!(v(MeasureSpec::qkgm(k, q)) >= std::f64::consts::SQRT_2 * v(MeasureSpec::qkme(k, q)) - 1e-10);
    }

    #[test]
    fn separable_states_vanish(seed: u64, kk in 0usize..3, (family, param) in spec_strategy()) {
        let dims = [2usize, 3, 2, 2];
        let k = 2 + kk;
        let (psi, _) = random::k_separable_state(&dims, k, &mut rng(seed)).unwrap();
        let v = Evaluator::new(&dims, MeasureSpec::new(family, k, param)).unwrap().value(&psi).unwrap();
        prop_assert!(v <= 1e-8, "{}", v);
    }

    #[test]
    fn pi_part_is_idempotent_and_symmetric(seed: u64, mixed in any::<bool>()) {
        let dims = [2usize, 2, 2];
        let mut r = rng(seed);
        let a = random::haar_state(&dims, &mut r).unwrap();
        let rho = if mixed {
            let b = random::haar_state(&dims, &mut r).unwrap();
            DecompositionEnsemble::new(vec![(0.3, a), (0.7, b)]).unwrap().density()
        } else {
            a.to_density()
        };
        let once = pi_part(&rho).unwrap();
        let twice = pi_part(&once).unwrap();
        prop_assert!(once.max_abs_diff(&twice) <= 1e-12);
        let perm = random::permutation(3, &mut r);
        prop_assert!(once.conjugate_by_permutation(&perm).unwrap().max_abs_diff(&once) <= 1e-12);
        prop_assert!((once.matrix().trace().re - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn file_round_trip_is_bit_exact(dims in dims_strategy(), seed: u64, label in "[a-z0-9 _-]{0,12}") {
        let psi = random::haar_state(&dims, &mut rng(seed)).unwrap();
        let text = state_to_json(&LoadedState::Pure(psi.clone()), Some(&label));
        let back = parse_state(&text, LoadOptions { normalize: false }).unwrap();
        prop_assert_eq!(back.state, LoadedState::Pure(psi.clone()));
        prop_assert_eq!(back.label.as_deref(), Some(label.as_str()));

        let rho = psi.to_density();
        let text = state_to_json(&LoadedState::Mixed(rho.clone()), None);
        let back = parse_state(&text, LoadOptions { normalize: false }).unwrap();
        prop_assert_eq!(back.state, LoadedState::Mixed(rho));
    }

    #[test]
    fn round_trip_preserves_awkward_floats(bits in prop::collection::vec(any::<u64>(), 4)) {
        // arbitrary finite doubles, renormalized
        let raw: Vec<f64> = bits
            .iter()
            .map(|b| f64::from_bits(*b))
            .map(|x| if x.is_finite() && x.abs() > 1e-150 && x.abs() < 1e150 { x } else { 0.5 })
            .collect();
        let amps: Vec<C64> = raw.iter().map(|&x| C64::new(x, -0.25 * x)).collect();
        let psi = PureState::normalized(vec![2, 2], amps).unwrap();
        let text = state_to_json(&LoadedState::Pure(psi.clone()), None);
        let back = parse_state(&text, LoadOptions { normalize: false }).unwrap();
        prop_assert_eq!(back.state, LoadedState::Pure(psi));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn roof_bound_is_sound(seed: u64, p in 0.05f64..0.95, sizes in prop::collection::vec(2usize..=4, 1..=2)) {
        let dims = [2usize, 2, 2];
        let mut r = rng(seed);
        let a = random::haar_state(&dims, &mut r).unwrap();
        let b = random::haar_state(&dims, &mut r).unwrap();
        let ens = DecompositionEnsemble::new(vec![(p, a), (1.0 - p, b)]).unwrap();
        let rho = ens.density();
        let spec = MeasureSpec::kgm(2);
        let cfg = SearchConfig { seed, ensemble_sizes: Some(sizes), restarts: 2, refine_iters: 15, ..SearchConfig::default() };
        let got = convex_roof_upper_bound(&rho, &spec, &cfg, std::slice::from_ref(&ens)).unwrap();
        prop_assert!(got.best.reconstruction_error(&rho) <= RECONSTRUCTION_TOL);
        let ev = Evaluator::new(&dims, spec).unwrap();
        prop_assert!((got.best.average(&ev).unwrap() - got.value).abs() <= 1e-14);
        prop_assert!(got.value <= ens.average(&ev).unwrap());
        // deterministic for a fixed configuration
        let again = convex_roof_upper_bound(&rho, &spec, &cfg, std::slice::from_ref(&ens)).unwrap();
        prop_assert_eq!(got.value, again.value);
    }
}

#[test]
fn enumeration_count_matches_stirling() {
    for (n, &bell) in BELL.iter().enumerate().skip(2) {
        let mut total = 0u128;
        for k in 2..=n {
            let mut prev: Option<String> = None;
            let mut count = 0u128;
            for part in enumerate_k_partitions(n, k).unwrap() {
                assert_eq!(part.k(), k);
                let covered: usize = part.blocks().iter().map(|b| b.len()).sum();
                assert_eq!(covered, n);
                // blocks ordered by smallest element: RGS order is strictly increasing
                let key: String = (0..n)
                    .map(|i| char::from(b'a' + part.blocks().iter().position(|b| b.contains(i)).unwrap() as u8))
                    .collect();
                if let Some(p) = &prev {
                    assert!(*p < key, "{p} !< {key}");
                }
                prev = Some(key);
                count += 1;
            }
            assert_eq!(count, stirling2(n, k).unwrap(), "n={n} k={k}");
            total += count;
        }
        // every partition with at least two blocks
        assert_eq!(total, bell - 1, "n={n}");
    }
}

#[test]
fn stirling_row_sums_are_bell_numbers() {
    for (n, &bell) in BELL.iter().enumerate().skip(2) {
        let s: u128 = (2..=n).map(|k| stirling2(n, k).unwrap()).sum();
        assert_eq!(s + 1, bell);
    }
}
