//! Induced-map regularity on `Y = [1/2, 1]` and the coupling-time simulator.

mod regularity;
mod simulate;

pub use regularity::{
    induced_constants, induced_derivatives, ll_seminorm, push_on_branch, regularity_check, u_window, InducedReport,
    RegularityConstants, RegularityReport, LL_WINDOW,
};
pub use simulate::{
    simulate_coupling_time, CouplingConfig, CouplingResult, GeometricShim, ReturnTailModel, TailModel, TailRow,
};

/// DKW half-width `sqrt(ln(2 / alpha) / (2 n))`.
pub fn dkw_epsilon(n: usize, alpha: f64) -> f64 {
    ((2.0 / alpha).ln() / (2.0 * n as f64)).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{sample_path, EnvironmentPath, ParameterLaw};
    use crate::lsv::ReturnStructure;

    fn ys(n: usize) -> Vec<f64> {
        (0..n).map(|i| 0.5 + 0.5 * i as f64 / (n - 1) as f64).collect()
    }

    #[test]
    fn ll_seminorm_examples() {
        let y = ys(512);
        assert_eq!(ll_seminorm(&y, &vec![3.0; 512]), 0.0);
        let e: Vec<f64> = y.iter().map(|v| (-1.7 * v).exp()).collect();
        assert!((ll_seminorm(&y, &e) - 1.7).abs() < 1e-9);
        let lin = ll_seminorm(&y, &y);
        let mut brute = 0.0f64;
        for i in 0..y.len() {
            for j in i + 1..y.len() {
                brute = brute.max((y[j].ln() - y[i].ln()) / (y[j] - y[i]));
            }
        }
        assert_eq!(lin, brute);
        assert!((lin - 2.0).abs() < 5e-3);
        assert_eq!(ll_seminorm(&[0.5, 0.6], &[0.0, 0.0]), 0.0);
        assert!(ll_seminorm(&[0.5, 0.6], &[0.0, 1.0]).is_infinite());
    }

    #[test]
    fn doubling_constants() {
        let path = EnvironmentPath::constant(0.0, 0, 200);
        let r = induced_constants(&path, 0, 30).unwrap();
        assert_eq!(r.constants.lambda, 2.0);
        assert_eq!(r.constants.k, 0.0);
        let c = r.constants;
        assert!((c.k1 - (c.k + c.k2 / c.lambda)).abs() < 1e-12);
        assert!(c.k2 > (1.0 - 1.0 / c.lambda) * c.k);
        assert!(RegularityConstants::new(2.0, 1.0, 0.4).is_err());
    }

    #[test]
    fn intermittent_constants_settle_with_depth() {
        let path = EnvironmentPath::constant(0.5, 0, 400);
        let a = induced_constants(&path, 0, 50).unwrap().constants;
        let b = induced_constants(&path, 0, 100).unwrap().constants;
        assert!(a.lambda > 1.0 && b.lambda > 1.0);
        assert!((a.k - b.k).abs() <= 0.1 * b.k, "{} {}", a.k, b.k);
        let rnd = sample_path(&ParameterLaw::fair_coin(0.1, 0.7), 0, 400, 11).unwrap();
        assert!(induced_constants(&rnd, 0, 60).unwrap().constants.lambda > 1.0);
    }

    #[test]
    fn regularity_of_uniform_on_y_for_doubling() {
        let path = EnvironmentPath::constant(0.0, 0, 100);
        let nu = |x: f64| if x >= 0.5 { 2.0 } else { 0.0 };
        let r = regularity_check(&nu, &path, 0, 10, 1.0, 200).unwrap();
        assert!(r.pass);
        assert!(r.values.iter().all(|v| v.1 < 1e-9), "{:?}", r.values);
        let wild = |x: f64| 1.0 + 0.99 * (400.0 * x).sin();
        let r = regularity_check(&wild, &path, 0, 5, 10.0, 400).unwrap();
        assert!(!r.pass);
        assert!(r.worst.0 >= 1 && r.worst.1 > 10.0);
    }

    #[test]
    fn pushforward_obeys_contraction() {
        let path = EnvironmentPath::constant(0.4, 0, 200);
        let consts = induced_constants(&path, 0, 40).unwrap().constants;
        let rs = ReturnStructure::build(&path, 0, 0, 40).unwrap();
        for c in [-consts.k2, 0.0, consts.k2] {
            let psi = move |x: f64| (c * x).exp();
            for n in [1, 2, 5, 20] {
                let (y, rho) = push_on_branch(&path, &rs, 0, n, &psi, 64).unwrap();
                assert!(ll_seminorm(&y, &rho) <= consts.k1);
            }
        }
    }

    #[test]
    fn u_window_examples() {
        let path = EnvironmentPath::constant(0.0, 0, 100);
        let rs = ReturnStructure::build(&path, 0, 20, 40).unwrap();
        assert_eq!(u_window(&rs, 0, 0, 3, 2.0).unwrap(), 2.0 * rs.tail_u(0, 3).unwrap());
        for n in 0..6 {
            for l in 1..8 {
                let exact = 2.0 * 2f64.powi(1 - l as i32) * (2.0 - 2f64.powi(-(n as i32)));
                assert!((u_window(&rs, 0, n, l, 2.0).unwrap() - exact).abs() < 1e-12);
                assert!(u_window(&rs, 0, n, l + 1, 2.0).unwrap() <= u_window(&rs, 0, n, l, 2.0).unwrap());
            }
        }
        assert!(u_window(&rs, 0, 5, 40, 2.0).is_err());
    }

    fn cfg(theta: f64, n_samples: usize) -> CouplingConfig {
        CouplingConfig {
            theta,
            horizon: 200,
            n_samples,
            seed: 7,
            fit_window: (1.0, 100.0),
        }
    }

    #[test]
    fn zero_tails_give_zero_time() {
        let r = simulate_coupling_time(&GeometricShim { q: 0.0 }, &cfg(0.3, 1000)).unwrap();
        assert_eq!(r.p_hat(1), 0.0);
        assert_eq!(r.censored_frac, 0.0);
    }

    #[test]
    fn geometric_shim_matches_closed_form() {
        let shim = GeometricShim { q: 0.7 };
        let n = 100_000;
        let eps = dkw_epsilon(n, 1e-3);
        for theta in [0.25, 1.0] {
            let r = simulate_coupling_time(&shim, &cfg(theta, n)).unwrap();
            for k in 0..=60 {
                assert!(
                    (r.p_hat(k) - shim.exact_tail(theta, k)).abs() <= eps,
                    "theta {theta} n {k}"
                );
            }
        }
        let a = simulate_coupling_time(&shim, &cfg(0.25, 1000)).unwrap();
        let b = simulate_coupling_time(&shim, &cfg(0.25, 1000)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn theta_one_reproduces_first_tail() {
        let path = EnvironmentPath::constant(0.5, 0, 400);
        let rs = ReturnStructure::build(&path, 0, 0, 300).unwrap();
        let model = ReturnTailModel {
            structure: rs.clone(),
            t: 0,
            c_u: 2.0,
        };
        let n = 50_000;
        let r = simulate_coupling_time(&model, &cfg(1.0, n)).unwrap();
        let eps = dkw_epsilon(n, 1e-3);
        for l in 0..100 {
            assert!((r.p_hat(l) - rs.tail_u(0, l).unwrap()).abs() <= eps);
        }
    }
}
