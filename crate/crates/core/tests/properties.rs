//! Invariants checked over randomly generated states and parameters.

use std::f64::consts::PI;
use std::sync::Arc;

use bosewitness::fock::{FockBasis, QuantumState, StateData};
use bosewitness::interferometer::{consistency_check, evolve, PulseSpec, SequenceElement};
use bosewitness::serial::{state_from_json, state_to_json};
use bosewitness::spin::{evaluate_frame, principal_frame, SpinOperators};
use bosewitness::states::{pair_product, random_mixed, random_pure};
use bosewitness::witness::{hup_region, HupRegion};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn state(n: usize, multi_sector: bool, mixed: bool, seed: u64) -> QuantumState {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let basis = if multi_sector { Arc::new(FockBasis::truncated(2, n).unwrap()) } else { FockBasis::two_mode(n) };
    if mixed {
        random_mixed(basis, 3, &mut rng).unwrap()
    } else {
        random_pure(basis, &mut rng).unwrap()
    }
}

fn any_state() -> impl Strategy<Value = QuantumState> {
    (1usize..=10, any::<bool>(), any::<bool>(), any::<u64>()).prop_map(|(n, m, x, s)| state(n, m, x, s))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn casimir_and_variance_sums(st in any_state()) {
        let ops = SpinOperators::two_mode(st.basis().clone()).unwrap();
        let f = evaluate_frame(&ops, &st).unwrap();
        let scale = f.scale();
        for (a, b, g) in [(0, 1, 2), (1, 2, 0), (2, 0, 1)] {
            prop_assert!(f.variance(a) + f.variance(b) >= f.bloch[g].abs() - 1e-9 * scale);
        }
        let b2: f64 = f.bloch.iter().map(|x| x * x).sum();
        let sum: f64 = (0..3).map(|i| f.variance(i)).sum();
        prop_assert!((sum - (f.casimir - b2)).abs() <= 1e-9 * scale.max(1.0));
    }

    #[test]
    fn principal_frame_diagonalizes(st in any_state()) {
        let f = evaluate_frame(&SpinOperators::two_mode(st.basis().clone()).unwrap(), &st).unwrap();
        let p = principal_frame(&f);
        let scale = f.scale().max(1.0);
        for i in 0..3 {
            for j in 0..3 {
                if i != j {
                    prop_assert!(p.frame.cov[i][j].abs() <= 1e-9 * scale);
                }
            }
        }
        let t0: f64 = (0..3).map(|i| f.variance(i)).sum();
        let t1: f64 = p.principal_variances.iter().sum();
        prop_assert!((t0 - t1).abs() <= 1e-9 * scale);
        let r = p.rotation_matrix();
        prop_assert!((r * r.transpose() - nalgebra::Matrix3::identity()).abs().max() <= 1e-12);
        prop_assert!((r.determinant() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn pulse_matches_prediction(st in any_state(), theta in 0.0..2.0 * PI, phi in -PI..PI) {
        let c = consistency_check(&st, theta, phi).unwrap();
        prop_assert!(c.mean_residual <= 1e-9, "{:?}", c);
        prop_assert!(c.variance_residual <= 1e-9, "{:?}", c);
    }

    #[test]
    fn pulse_preserves_norm(st in any_state(), theta in 0.0..2.0 * PI, phi in -PI..PI) {
        let out = evolve(&st, &SequenceElement::Pulse(PulseSpec::new(theta, phi).unwrap())).unwrap();
        let tr: f64 = out.populations().iter().sum();
        prop_assert!((tr - 1.0).abs() <= 1e-12);
        prop_assert!((out.purity() - st.purity()).abs() <= 1e-10);
    }

    #[test]
    fn single_pair_occupancy_reduces_to_two_modes(st in any_state(), theta in 0.0..2.0 * PI, phi in -PI..PI) {
        let four = pair_product(&[&st], 2).unwrap();
        let c2 = consistency_check(&st, theta, phi).unwrap();
        let c4 = consistency_check(&four, theta, phi).unwrap();
        prop_assert!((c2.direct_mean - c4.direct_mean).abs() <= 1e-10);
        prop_assert!((c2.direct_variance - c4.direct_variance).abs() <= 1e-10);
    }

    #[test]
    fn serialization_is_bit_exact(st in any_state()) {
        let back = state_from_json(&state_to_json(&st)).unwrap();
        let bits = |d: &StateData| -> Vec<(u64, u64)> {
            match d {
                StateData::Pure(v) => v.iter().map(|c| (c.re.to_bits(), c.im.to_bits())).collect(),
                StateData::Mixed(m) => m.iter().map(|c| (c.re.to_bits(), c.im.to_bits())).collect(),
            }
        };
        let floor = |d: &StateData| -> Vec<bool> {
            match d {
                StateData::Pure(v) => v.iter().map(|c| c.norm() >= 1e-15).collect(),
                StateData::Mixed(m) => m.iter().map(|c| c.norm() >= 1e-15).collect(),
            }
        };
        let kept = floor(st.data());
        for ((a, b), k) in bits(st.data()).iter().zip(bits(back.data())).zip(kept) {
            if k {
                prop_assert_eq!(*a, b);
            }
        }
    }

    #[test]
    fn hup_roots_obey_vieta(j in 0.5f64..2000.0, xi in 1.0f64..20.0, frac in 0.0f64..=1.0) {
        let sz = frac * j;
        let k = j * (j + 1.0) - sz * sz;
        let c = xi * sz * sz;
        match hup_region(j, xi, sz).unwrap() {
            HupRegion::Allowed { lower, upper } => {
                prop_assert!(k * k >= c);
                prop_assert!(0.0 <= lower && lower <= upper);
                prop_assert!((lower + upper - k).abs() <= 1e-12 * k.abs().max(1.0));
                prop_assert!((lower * upper - c / 4.0).abs() <= 1e-12 * (c / 4.0).max(1e-300));
            }
            HupRegion::Excluded => prop_assert!(k * k < c),
        }
    }
}
