use moyal_heat::convexity::{jensen_gap_cp, power_integral_check, random_unital_cp};
use moyal_heat::random::{random_positive, rng};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn jensen_holds_on_unit_interval(seed in any::<u64>(), p in 1.0f64..=2.0, dim in 2usize..6, k in 1usize..4) {
        let phi = random_unital_cp(dim, k, seed).unwrap();
        let u = random_positive(dim, &mut rng(seed.wrapping_add(1)));
        prop_assert!(jensen_gap_cp(&phi, &u, p).is_ok());
    }

    #[test]
    fn power_integral_reproduces_powers(seed in any::<u64>(), p in 1.05f64..1.95) {
        let x = random_positive(4, &mut rng(seed));
        let x = x.scale(1.0 / x.spectral_norm());
        // random_positive can be near-singular; shift into the supported range
        let x = &x + &moyal_heat::Operator::identity(4).scale(1e-3);
        prop_assert!(power_integral_check(&x, p).unwrap() < 1e-9);
    }
}
