mod common;

use common::{random_g, random_probability, rng};
use proptest::prelude::*;
use thermo_core::gmeasure::{adjoint_residual, sup_contraction_check, validate_g};
use thermo_core::{g_measure, CylinderMeasure, CylinderTable, GFunction};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn measures_are_consistent_and_stationary(seed in any::<u64>(), n in 2usize..=3, k in 1usize..=3, extra in 0usize..=2) {
        let g = random_g(&mut rng(seed), n, k);
        let m = k + extra + 1;
        let mu = g_measure(&g, m).unwrap();
        let coarse = g_measure(&g, m - 1).unwrap();
        prop_assert!(mu.marginal(m - 1).unwrap().table().max_abs_diff(coarse.table()).unwrap() <= 1e-12);
        prop_assert!((mu.table().values().iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        prop_assert!(mu.table().values().iter().all(|&v| v >= 0.0));
        prop_assert!(mu.stationarity_defect().unwrap() <= 1e-12);
        prop_assert!(adjoint_residual(&g, &mu).unwrap() <= 1e-12);
    }

    #[test]
    fn memoryless_measure_is_the_product(seed in any::<u64>(), n in 2usize..=4, m in 1usize..=4) {
        let p = random_probability(&mut rng(seed), n);
        let g = GFunction::memoryless(&p).unwrap();
        let mu = g_measure(&g, m).unwrap();
        let product = CylinderMeasure::product(&p, m).unwrap();
        for (a, b) in mu.table().values().iter().zip(product.table().values()) {
            prop_assert!((a - b).abs() <= 2.0 * f64::EPSILON * b.max(f64::MIN_POSITIVE), "{} vs {}", a, b);
        }
    }

    #[test]
    fn transfer_contracts_sup_norm(seed in any::<u64>(), n in 2usize..=4, k in 1usize..=3) {
        let g = random_g(&mut rng(seed), n, k);
        prop_assert!(sup_contraction_check(&g, 64, seed).unwrap() <= 1.0 + 1e-12);
        let report = validate_g(g.table()).unwrap();
        prop_assert!(report.max_fiber_deviation <= 1e-12);
        prop_assert!(g.table().values().iter().all(|&v| v > 0.0 && v <= 1.0));
    }
}

#[test]
fn bad_fiber_sum_is_rejected() {
    let t = CylinderTable::new(2, 1, vec![0.5, 0.47]).unwrap();
    assert!(validate_g(&t).is_err());
    assert!(GFunction::new(t).is_err());
}
