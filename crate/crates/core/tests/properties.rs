use std::f64::consts::TAU;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sim_uplink::combiner::{compose_sim, PhaseProfile};
use sim_uplink::geometry::{phase_at_electrical_distance, wrap_to_pi};
use sim_uplink::harness::gradcheck::RandomInstance;
use sim_uplink::metrics::sinr;
use sim_uplink::rng::{stream_key, StreamPurpose};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn rates_are_nonnegative_and_finite(seed in any::<u64>(), layers in 1usize..4, cells in 2usize..8, users in 1usize..3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let inst = RandomInstance::draw(layers, cells.max(users), users, &mut rng).unwrap();
        let g = compose_sim(&inst.stack, &inst.phases, inst.noise.transmission_efficiency).unwrap();
        let r = sinr(&g.g, &inst.h, &inst.noise, &inst.factor).unwrap();
        prop_assert!(r.sum_rate.is_finite() && r.sum_rate >= 0.0);
        prop_assert!(r.gamma.iter().all(|g| *g >= 0.0));
    }

    #[test]
    fn wrapped_profiles_give_the_same_combiner(seed in any::<u64>(), shift in -5i32..5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let inst = RandomInstance::draw(2, 4, 1, &mut rng).unwrap();
        let moved: Vec<f64> = inst.phases.as_slice().iter().map(|v| v + TAU * shift as f64).collect();
        let moved = PhaseProfile::new(2, 4, moved).unwrap().wrapped();
        prop_assert!(moved.as_slice().iter().all(|v| (0.0..TAU).contains(v)));
        let a = compose_sim(&inst.stack, &inst.phases, 1.0).unwrap().g;
        let b = compose_sim(&inst.stack, &moved, 1.0).unwrap().g;
        prop_assert!((a - b).norm() < 1e-12);
    }

    #[test]
    fn phase_stays_in_principal_range(kr in 1e-3f64..1e4) {
        let p = phase_at_electrical_distance(kr);
        prop_assert!(p > -std::f64::consts::PI && p <= std::f64::consts::PI);
        prop_assert_eq!(wrap_to_pi(p), p);
    }

    #[test]
    fn stream_keys_separate_purposes(seed in any::<u64>(), p in 0u64..1000, r in 0u64..1000) {
        let a = stream_key(seed, StreamPurpose::SimChannel, p, r);
        prop_assert_ne!(a, stream_key(seed, StreamPurpose::PhaseInit, p, r));
        prop_assert_ne!(a, stream_key(seed, StreamPurpose::SimChannel, p, r + 1));
        prop_assert_ne!(a, stream_key(seed, StreamPurpose::SimChannel, p + 1, r));
    }
}
