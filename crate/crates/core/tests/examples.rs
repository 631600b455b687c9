use lsv_core::coupling::{
    dkw_epsilon, induced_constants, simulate_coupling_time, CouplingConfig, ReturnTailModel, TailModel,
};
use lsv_core::env::{sample_path, EnvironmentPath, ParameterLaw};
use lsv_core::lsv::ReturnStructure;
use lsv_core::stats::{
    annealed_correlation, correlation, moment_growth, AnnealedSetup, Base, Cocycle, Method, Observable,
};
use lsv_core::transfer::Grid;

/// `P(X >= l)` for the running-minimum clipped tail used by the simulator.
fn pmf(cap: usize, f: impl Fn(usize) -> f64) -> Vec<f64> {
    let mut tail = vec![1.0f64; cap + 2];
    for l in 1..=cap + 1 {
        tail[l] = tail[l - 1].min(f(l)).min(1.0);
    }
    (0..=cap).map(|l| tail[l] - tail[l + 1]).collect()
}

/// `P(S = s)` for `s <= cap` by convolving over `xi` and the last draw.
fn exact_coupling_law(model: &dyn TailModel, theta: f64, cap: usize, max_xi: usize) -> Vec<f64> {
    // state[s][last]: probability that the first j draws sum to s with X_j = last.
    let first = pmf(cap, |l| model.first(l).unwrap());
    let mut state = vec![vec![0.0f64; cap + 1]; cap + 1];
    for (x, p) in first.iter().enumerate() {
        state[x][x] = *p;
    }
    let mut law = vec![0.0f64; cap + 1];
    let mut weight = theta;
    for _ in 0..max_xi {
        for s in 0..=cap {
            law[s] += weight * state[s].iter().sum::<f64>();
        }
        let mut next = vec![vec![0.0f64; cap + 1]; cap + 1];
        for s in 0..=cap {
            for last in 0..=s {
                let p = state[s][last];
                if p == 0.0 {
                    continue;
                }
                let q = pmf(cap - s, |l| model.next(s - last, last, l).unwrap());
                for (x, px) in q.iter().enumerate() {
                    next[s + x][x] += p * px;
                }
            }
        }
        state = next;
        weight *= 1.0 - theta;
    }
    law
}

#[test]
fn doubling_coupling_time_matches_convolution() {
    let horizon = 120;
    let path = EnvironmentPath::constant(0.0, 0, horizon + 200);
    let c_u = induced_constants(&path, 0, 40).unwrap().constants.c_u();
    let model = ReturnTailModel {
        structure: ReturnStructure::build(&path, 0, horizon as i64, horizon + 2).unwrap(),
        t: 0,
        c_u,
    };
    let cfg = CouplingConfig {
        theta: 0.9,
        horizon,
        n_samples: 100_000,
        seed: 17,
        fit_window: (5.0, 30.0),
    };
    let sim = simulate_coupling_time(&model, &cfg).unwrap();
    let law = exact_coupling_law(&model, cfg.theta, 60, 12);
    let band = dkw_epsilon(cfg.n_samples, 1e-3);
    for n in 0..=40 {
        let exact: f64 = 1.0 - law[..n].iter().sum::<f64>();
        assert!(
            (sim.p_hat(n) - exact).abs() <= band,
            "n = {n}: {} vs {exact}",
            sim.p_hat(n)
        );
    }
    let slope = sim.log2_slope(5, 30).unwrap();
    assert!(slope <= -0.5, "log2 slope {slope}");
}

#[test]
fn fair_coin_annealed_correlations_decay() {
    let setup = AnnealedSetup {
        law: ParameterLaw::fair_coin(0.0, 0.4),
        grid: Grid::uniform(512).unwrap(),
        n_pull: 200,
        n_paths: 12,
        inner: Method::Operator,
        seed: 3,
    };
    let phi = Observable::centered(Base::identity());
    let lags: Vec<u64> = (0..=8).collect();
    let c = annealed_correlation(&setup, &phi, &lags).unwrap();
    for w in c.windows(2) {
        assert!(w[1].value <= w[0].value + 3.0 * (w[0].stderr + w[1].stderr), "{c:?}");
    }
    assert!(c[8].value < 0.2 * c[0].value);
}

#[test]
fn lag_zero_correlation_is_the_squared_norm() {
    let path = sample_path(&ParameterLaw::fair_coin(0.1, 0.5), 100, 50, 8).unwrap();
    let c = Cocycle::new(path, Grid::uniform(1024).unwrap(), 0, 10, 100).unwrap();
    let phi = Observable::centered(Base::cos(1.0));
    let g = c.fibers(&phi, 0, 0).unwrap().grid(0);
    let norm = c.track().norm(0, &g, 2.0);
    let corr = correlation(&c, 0, &phi, &phi, 0, Method::Operator).unwrap();
    assert!((corr.value - norm * norm).abs() <= 1e-12);
}

#[test]
fn constant_observable_sums_grow_linearly() {
    let path = EnvironmentPath::constant(0.3, 100, 1000);
    let c = Cocycle::new(path, Grid::uniform(256).unwrap(), 0, 1000, 100).unwrap();
    let one = Observable::new(Base::constant(1.0));
    let (curve, fit) = moment_growth(&c, 0, &one, 2.0, &[10, 30, 100, 300, 1000], 200, 1).unwrap();
    assert_eq!(curve.values(), vec![10.0, 30.0, 100.0, 300.0, 1000.0]);
    assert!((fit.unwrap().slope - 1.0).abs() <= 1e-12);
}
