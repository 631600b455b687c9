use std::sync::Arc;

use lsv_core::coupling::{u_window, RegularityConstants};
use lsv_core::env::{count_below, sample_path, Direction, EnvironmentPath, ParameterLaw};
use lsv_core::lsv::{left_inverse, map_eval, return_time, step, ReturnStructure};
use lsv_core::stats::{clt_diagnostic, memory_loss_curve, operator_variances, Base, Cocycle, Observable};
use lsv_core::transfer::{push_density, DensityVector, Grid, UlamMatrix};
use proptest::prelude::*;

fn coin(a: f64, b: f64, len: usize, seed: u64) -> EnvironmentPath {
    sample_path(&ParameterLaw::fair_coin(a, b), 64, len, seed).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn count_below_is_a_counting_function(a in 0.0..0.99f64, b in 0.0..0.99f64, gamma in 0.0..1.0f64, seed: u64) {
        let p = coin(a, b, 200, seed);
        let mut prev = 0;
        for n in 1..=200 {
            let s = count_below(&p, gamma, n, Direction::Forward).unwrap();
            prop_assert!(s == prev || s == prev + 1);
            prop_assert_eq!(s - prev, usize::from(p.beta(n as i64 - 1) <= gamma));
            prev = s;
        }
        let lower = count_below(&p, gamma * 0.5, 200, Direction::Forward).unwrap();
        prop_assert!(lower <= prev);
    }

    #[test]
    fn left_inverse_round_trips(beta in 0.0..0.999f64, y in 1e-12..=1.0f64) {
        let x = left_inverse(beta, y);
        prop_assert!((0.0..=0.5).contains(&x));
        prop_assert!((step(beta, x) - y).abs() <= 1e-13);
    }

    #[test]
    fn left_branch_reaches_one_at_half(beta in 0.0..0.999f64) {
        prop_assert!(map_eval(beta, 0.5 - 1e-12).unwrap() > 1.0 - 1e-9);
    }

    #[test]
    fn return_partition_is_monotone_and_exact(a in 0.0..0.9f64, b in 0.0..0.9f64, seed: u64, u in 0.001..0.999f64) {
        let p = coin(a, b, 300, seed);
        let s = ReturnStructure::build(&p, 0, 0, 40).unwrap();
        for n in 1..40 {
            prop_assert!(s.x(0, n + 1).unwrap() < s.x(0, n).unwrap());
            prop_assert!(s.y(0, n + 1).unwrap() < s.y(0, n).unwrap());
        }
        for n in 1..25 {
            for (lo, hi) in s.level_set(0, n).unwrap() {
                let x = lo + (hi - lo) * u;
                prop_assert_eq!(return_time(&p, x, 300).unwrap().value, n);
            }
        }
    }

    #[test]
    fn u_window_is_nonincreasing_in_l(a in 0.0..0.9f64, b in 0.0..0.9f64, seed: u64, n in 0usize..10) {
        let p = coin(a, b, 200, seed);
        let s = ReturnStructure::build(&p, 0, 20, 80).unwrap();
        let mut prev = f64::INFINITY;
        for l in 1..60 {
            let v = u_window(&s, 0, n, l, 3.0).unwrap();
            prop_assert!(v <= prev);
            prev = v;
        }
    }

    #[test]
    fn k1_is_k_plus_k2_over_lambda(lambda in 1.01..10.0f64, k in 0.0..5.0f64) {
        let c = RegularityConstants::with_default_k2(lambda, k).unwrap();
        prop_assert!((c.k1 - (c.k + c.k2 / c.lambda)).abs() <= 1e-12);
        prop_assert!(c.k1 < c.k2);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn ulam_rows_are_stochastic_and_mass_is_conserved(beta in 0.0..0.999f64, half in 1usize..300, seed: u64) {
        let grid = Arc::new(Grid::uniform(2 * half).unwrap());
        let m = UlamMatrix::new(beta, grid.clone()).unwrap();
        prop_assert!(m.row_sum_defect() <= 1e-12);
        let mut rng = seed;
        let values: Vec<f64> = (0..grid.len())
            .map(|_| {
                rng = lsv_core::rng::splitmix64(rng);
                lsv_core::rng::unit_f64(rng)
            })
            .collect();
        let d = DensityVector::new(grid, values).unwrap();
        let pushed = push_density(&[&m, &m, &m], &d).unwrap();
        prop_assert!((pushed.mass() - d.mass()).abs() <= 1e-12 * d.mass().max(1.0));
    }

    #[test]
    fn l1_memory_loss_never_exceeds_l2(a in 0.0..0.6f64, b in 0.0..0.6f64, seed: u64) {
        let p = coin(a, b, 80, seed);
        let c = Cocycle::new(p, Grid::uniform(256).unwrap(), 0, 60, 60).unwrap();
        let phi = Observable::centered(Base::identity());
        let one = Observable::new(Base::constant(1.0));
        let curves = memory_loss_curve(&c, 0, 0, &[1, 2, 4, 8, 16, 32], &phi, &one, &[1.0, 2.0]).unwrap();
        for (l1, l2) in curves[0].values().iter().zip(curves[1].values()) {
            prop_assert!(*l1 <= l2 * (1.0 + 1e-9) + 1e-15);
        }
    }

    #[test]
    fn variance_scales_with_the_square(cst in -3.0..3.0f64, seed: u64) {
        let p = coin(0.0, 0.3, 80, seed);
        let c = Cocycle::new(p, Grid::uniform(256).unwrap(), 0, 60, 60).unwrap();
        let phi = Observable::centered(Base::identity());
        let v = operator_variances(&c, 0, &phi, 40).unwrap();
        let w = operator_variances(&c, 0, &phi.scaled(cst), 40).unwrap();
        for (a, b) in v.iter().zip(&w) {
            prop_assert!((b - cst * cst * a).abs() <= 1e-10 * (1.0 + b.abs()));
        }
    }

    #[test]
    fn normalised_clt_distance_ignores_rescaling(cst in 0.1..10.0f64, seed: u64) {
        let p = coin(0.0, 0.2, 300, seed);
        let c = Cocycle::new(p, Grid::uniform(256).unwrap(), 0, 220, 60).unwrap();
        let phi = Observable::centered(Base::identity());
        let a = clt_diagnostic(&c, 0, &phi, &[50, 200], 500, seed).unwrap();
        let b = clt_diagnostic(&c, 0, &phi.scaled(cst), &[50, 200], 500, seed).unwrap();
        for (x, y) in a.points.iter().zip(&b.points) {
            prop_assert!((x.distance - y.distance).abs() <= 1e-9);
        }
    }
}
