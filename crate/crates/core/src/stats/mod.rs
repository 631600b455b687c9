//! Quenched and annealed statistics of observables along the cocycle.
//!
//! Operator methods work on grid functions through the normalised operators
//! of [`crate::transfer`]; Monte Carlo methods run exact-arithmetic orbits
//! from the equivariant measures. The two are independent error channels
//! and are meant to be compared.

mod annealed;
mod cocycle;
mod martingale;
mod mc;
mod observable;
mod quenched;

pub use annealed::{annealed_correlation, annealed_variance, AnnealedSetup, AnnealedVariance};
pub use cocycle::Cocycle;
pub use martingale::{
    martingale_orthogonality_check, martingale_parts, telescoping_residuals, DefectReport, MartingaleParts,
};
pub use mc::{mean_stderr, par_samples, step_refined, DensitySampler};
pub use observable::{default_test_functions, Base, FiberValues, Observable, Weight};
pub use quenched::{
    birkhoff_samples, birkhoff_sums, clt_diagnostic, correlation, correlation_curve, kolmogorov_distance,
    memory_loss_curve, moment_growth, operator_variances, variance_curve, CltPoint, CltReport, Estimate, Method,
    DEGENERATE_VARIANCE,
};

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::EnvironmentPath;
    use crate::transfer::Grid;

    fn doubling(n: usize, len: usize) -> Cocycle {
        Cocycle::new(
            EnvironmentPath::constant(0.0, 50, len + 10),
            Grid::uniform(n).unwrap(),
            0,
            len,
            50,
        )
        .unwrap()
    }

    fn centred_x() -> Observable {
        Observable::centered(Base::identity())
    }

    #[test]
    fn constant_observables_lose_no_memory_and_leave_zero() {
        let c = doubling(64, 20);
        let one = Observable::new(Base::constant(1.0));
        let curves = memory_loss_curve(&c, 0, 2, &[0, 1, 5, 10], &one, &one, &[1.0, 2.0]).unwrap();
        for curve in curves {
            assert!(curve.values().iter().all(|&v| v.abs() < 1e-14));
        }
    }

    #[test]
    fn doubling_annihilates_cosine_in_one_step() {
        let c = doubling(1024, 10);
        let g1 = Observable::new(Base::cos(1.0));
        let one = Observable::new(Base::constant(1.0));
        let curve = &memory_loss_curve(&c, 0, 0, &[1, 2, 5], &g1, &one, &[1.0]).unwrap()[0];
        assert!(curve.values().iter().all(|&v| v < 1e-2), "{:?}", curve.values());
    }

    /// For the doubling map, `int (x - 1/2)(T^n x - 1/2) dx = 2^{-n} / 12`.
    #[test]
    fn doubling_correlations_match_exact_integral() {
        let c = doubling(4096, 12);
        let phi = centred_x();
        let lags: Vec<u64> = (0..=8).collect();
        let op = correlation_curve(&c, 0, &phi, &phi, &lags, Method::Operator).unwrap();
        for (n, e) in op.iter().enumerate() {
            let exact = 2f64.powi(-(n as i32)) / 12.0;
            assert!((e.value - exact).abs() < 1e-4, "n={n}: {}", e.value);
        }
        let mc = correlation_curve(
            &c,
            0,
            &phi,
            &phi,
            &lags,
            Method::MonteCarlo {
                samples: 40_000,
                seed: 5,
            },
        )
        .unwrap();
        for (a, b) in op.iter().zip(&mc) {
            assert!(a.z_distance(b) < 4.0, "{a:?} {b:?}");
        }
    }

    #[test]
    fn correlation_with_constant_vanishes() {
        let c = doubling(128, 10);
        let one = Observable::new(Base::constant(1.0));
        let e = correlation(&c, 0, &centred_x(), &one, 3, Method::Operator).unwrap();
        assert!(e.value.abs() < 1e-14);
    }

    #[test]
    fn trivial_birkhoff_sums() {
        let c = doubling(64, 40);
        let zero = Observable::new(Base::constant(0.0));
        assert!(birkhoff_samples(&c, 0, &zero, 30, 50, 1)
            .unwrap()
            .iter()
            .all(|&v| v == 0.0));
        let one = Observable::new(Base::constant(1.0));
        assert!(birkhoff_samples(&c, 0, &one, 30, 50, 1)
            .unwrap()
            .iter()
            .all(|&v| v == 30.0));
    }

    #[test]
    fn doubling_variance_tends_to_a_quarter() {
        let c = doubling(4096, 400);
        let curve = variance_curve(&c, 0, &centred_x(), &[100, 400], Method::Operator).unwrap();
        // Sigma^2_n / n = 1/4 - 1/(3n) + O(2^{-n}); the Ulam operator loses
        // resolution each doubling, an O(1/N) deficit.
        let v = curve.value_at(400).unwrap();
        assert!((v - (0.25 - 1.0 / 1200.0)).abs() < 2e-4, "{v}");
        let scaled = variance_curve(&c, 0, &centred_x().scaled(3.0), &[400], Method::Operator).unwrap();
        assert!((scaled.values()[0] - 9.0 * v).abs() < 1e-12);
    }

    #[test]
    fn coboundary_variance_vanishes_and_clt_rejects_it() {
        let c = doubling(256, 6000);
        let cob = Observable::centered(Base::coboundary(Base::identity(), 0.0));
        // S_n = psi - psi ∘ T^n stays bounded, so Sigma^2_n / n falls like 1/n.
        let v = variance_curve(&c, 0, &cob, &[100, 400], Method::Operator).unwrap();
        let (a, b) = (v.values()[0], v.values()[1]);
        assert!(b < 1e-3 && (a / b - 4.0).abs() < 0.2, "{a} {b}");
        let small = Observable::centered(Base::coboundary(Base::cos(1.0), 0.0)).scaled(0.05);
        assert!(matches!(
            clt_diagnostic(&c, 0, &small, &[5000], 100, 1),
            Err(crate::Error::DegenerateClt { .. })
        ));
    }

    #[test]
    fn kolmogorov_distance_of_normal_draws_is_small() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let xs: Vec<f64> = (0..100_000).map(|_| rng.sample(rand_distr::StandardNormal)).collect();
        assert!(kolmogorov_distance(&xs) < 0.01);
        let shifted: Vec<f64> = xs.iter().map(|x| x + 1.0).collect();
        assert!(kolmogorov_distance(&shifted) > 0.3);
    }

    #[test]
    fn martingale_parts_for_cosine_on_doubling() {
        let c = doubling(1024, 12);
        let phi = Observable::new(Base::cos(1.0));
        let parts = martingale_parts(&c, 0, &phi, 8).unwrap();
        assert!(parts.g[0].iter().all(|&v| v == 0.0));
        for k in 1..parts.g.len() {
            let m = parts.g[k].iter().fold(0.0f64, |a, v| a.max(v.abs()));
            assert!(m < 1e-2, "G_{k} = {m}");
        }
        for (k, h) in parts.h.iter().enumerate() {
            assert!(c.mean(k as i64, h).abs() < 1e-8);
        }
        let res = telescoping_residuals(&c, &parts, &default_test_functions()).unwrap();
        assert!(res.iter().all(|&r| r < 1e-10), "{res:?}");
    }

    #[test]
    fn zero_observable_has_zero_defect() {
        let c = doubling(64, 12);
        let zero = Observable::new(Base::constant(0.0));
        let r = martingale_orthogonality_check(&c, 0, &zero, 8, &default_test_functions()).unwrap();
        assert_eq!(r.max_defect, 0.0);
        let one = vec![Base::constant(1.0)];
        let r = martingale_orthogonality_check(&c, 0, &centred_x(), 8, &one).unwrap();
        assert!(r.max_defect < 1e-8);
    }

    #[test]
    fn annealed_single_atom_matches_quenched() {
        let setup = AnnealedSetup {
            law: crate::ParameterLaw::constant(0.0),
            grid: Grid::uniform(256).unwrap(),
            n_pull: 40,
            n_paths: 2,
            inner: Method::Operator,
            seed: 1,
        };
        let a = annealed_correlation(&setup, &centred_x(), &[0, 1, 3]).unwrap();
        assert!((a[0].value - 1.0 / 12.0).abs() < 1e-4);
        assert!((a[2].value - 1.0 / 96.0).abs() < 1e-4);
        let v = annealed_variance(&setup, &centred_x(), 60).unwrap();
        assert!((v.value.unwrap() - 0.25).abs() < 0.02);
        let zero = annealed_variance(&setup, &Observable::new(Base::constant(0.0)), 10).unwrap();
        assert_eq!(zero.value, Some(0.0));
    }
}
