use glarnet::estimator::{
    fit, fit_row, fit_row_traced, grad_nll_row, kkt_violation, nll_row, rmle_objective, EstimatorConfig, StepPolicy,
};
use glarnet::rng::SimRng;
use glarnet::simulator::{simulate, InitialState, TimeSeries};
use glarnet::{Family, GlarModel};
use nalgebra::DMatrix;
use proptest::prelude::*;

fn random_instance(family: Family, seed: u64) -> (GlarModel, TimeSeries) {
    let mut rng = SimRng::new(seed, 40);
    let dim = 2 + rng.below(4) as usize;
    let a = DMatrix::from_fn(dim, dim, |_, _| if rng.uniform() < 0.5 { rng.uniform_in(-1.0, if family == Family::Poisson { 0.0 } else { 1.0 }) } else { 0.0 });
    let nu = (0..dim).map(|_| rng.uniform_in(-0.5, 0.5)).collect();
    let model = GlarModel::new(family, a, nu).unwrap();
    let init = InitialState::Given(vec![0.0; dim]);
    let series = simulate(&model, &init, 60 + rng.below(100) as usize, 5, seed).unwrap();
    (model, series)
}

#[test]
fn gradient_matches_central_differences() {
    let h = 1e-6;
    for family in Family::ALL {
        for seed in 0..100 {
            let (model, series) = random_instance(family, seed);
            let dim = model.dim();
            let mut rng = SimRng::new(seed, 41);
            let m = rng.below(dim as u64) as usize;
            let a: Vec<f64> = (0..dim).map(|_| rng.uniform_in(-0.5, 0.3)).collect();
            let g = grad_nll_row(family, model.nu[m], &a, &series, m).unwrap();
            for j in 0..dim {
                let mut up = a.clone();
                let mut down = a.clone();
                up[j] += h;
                down[j] -= h;
                let fd = (nll_row(family, model.nu[m], &up, &series, m).unwrap()
                    - nll_row(family, model.nu[m], &down, &series, m).unwrap())
                    / (2.0 * h);
                let rel = (fd - g[j]).abs() / g[j].abs().max(1e-2);
                assert!(rel <= 1e-6, "{family} seed {seed} coord {j}: fd {fd} vs {}", g[j]);
            }
        }
    }
}

#[test]
fn objective_never_increases() {
    for family in Family::ALL {
        for seed in 0..20 {
            let (model, series) = random_instance(family, seed);
            for acceleration in [false, true] {
                let config = EstimatorConfig { acceleration, ..EstimatorConfig::with_lambda(0.02) };
                let (_, d, trace) = fit_row_traced(family, model.nu[0], &series, 0, &config).unwrap();
                assert!(d.converged);
                for w in trace.windows(2) {
                    assert!(w[1] <= w[0] + 1e-12 * w[0].abs().max(1.0), "{family} seed {seed}: {} -> {}", w[0], w[1]);
                }
            }
        }
    }
}

#[test]
fn kkt_conditions_hold_at_convergence() {
    for family in Family::ALL {
        for seed in 0..30 {
            let (model, series) = random_instance(family, seed);
            let config = EstimatorConfig::with_lambda(0.01);
            let est = fit(family, &model.nu, &series, &config).unwrap();
            assert!(est.all_converged());
            for m in 0..model.dim() {
                let row: Vec<f64> = est.a_hat.row(m).iter().copied().collect();
                let g = grad_nll_row(family, model.nu[m], &row, &series, m).unwrap();
                let v = kkt_violation(&g, &row, config.lambda);
                assert!(v <= 10.0 * config.tol, "{family} seed {seed} row {m}: {v:e}");
            }
        }
    }
}

#[test]
fn full_objective_is_the_sum_of_row_objectives() {
    for family in Family::ALL {
        let (model, series) = random_instance(family, 3);
        let est = fit(family, &model.nu, &series, &EstimatorConfig::with_lambda(0.05)).unwrap();
        let full = rmle_objective(family, &model.nu, &est.a_hat, &series, 0.05).unwrap();
        assert_eq!(full, est.objective());
    }
}

#[test]
fn large_lambda_returns_zero_matrix() {
    for family in Family::ALL {
        let (model, series) = random_instance(family, 4);
        let dim = model.dim();
        let lambda = (0..dim)
            .map(|m| grad_nll_row(family, model.nu[m], &vec![0.0; dim], &series, m).unwrap())
            .flat_map(|g| g.into_iter().map(f64::abs))
            .fold(0.0, f64::max);
        let est = fit(family, &model.nu, &series, &EstimatorConfig::with_lambda(lambda)).unwrap();
        assert_eq!(est.a_hat, DMatrix::zeros(dim, dim));
    }
}

#[test]
fn thread_count_does_not_change_the_fit() {
    let (model, series) = random_instance(Family::Poisson, 12);
    let config = EstimatorConfig::with_lambda(0.01);
    let pool = |n| rayon::ThreadPoolBuilder::new().num_threads(n).build().unwrap();
    let one = pool(1).install(|| fit(Family::Poisson, &model.nu, &series, &config).unwrap());
    let four = pool(4).install(|| fit(Family::Poisson, &model.nu, &series, &config).unwrap());
    assert_eq!(one.to_json().unwrap(), four.to_json().unwrap());
}

#[test]
fn relabeling_nodes_permutes_the_estimate() {
    let (model, series) = random_instance(Family::Bernoulli, 21);
    let dim = model.dim();
    let perm: Vec<usize> = (0..dim).rev().collect();
    let config = EstimatorConfig::with_lambda(0.02);
    let est = fit(Family::Bernoulli, &model.nu, &series, &config).unwrap();
    let nu_p: Vec<f64> = perm.iter().map(|&p| model.nu[p]).collect();
    let est_p = fit(Family::Bernoulli, &nu_p, &series.permuted(&perm), &config).unwrap();
    for i in 0..dim {
        for j in 0..dim {
            let d = (est_p.a_hat[(i, j)] - est.a_hat[(perm[i], perm[j])]).abs();
            assert!(d < 1e-6, "({i},{j}) differs by {d:e}");
        }
    }
}

/// Dense one-dimensional scan of the composite objective, refined twice.
fn grid_minimizer(family: Family, nu: f64, series: &TimeSeries, lambda: f64) -> f64 {
    let f = |a: f64| nll_row(family, nu, &[a], series, 0).unwrap() + lambda * a.abs();
    let (mut lo, mut hi) = (-5.0, 5.0);
    let mut best = 0.0;
    for _ in 0..4 {
        let step = (hi - lo) / 2000.0;
        best = (0..=2000).map(|k| lo + step * k as f64).fold(best, |b, a| if f(a) < f(b) { a } else { b });
        lo = best - 2.0 * step;
        hi = best + 2.0 * step;
    }
    best
}

#[test]
fn scalar_fit_agrees_with_grid_search() {
    for (family, a_true, nu) in [(Family::Bernoulli, -1.2, 0.4), (Family::Poisson, -0.6, 0.5), (Family::Bernoulli, 0.0, 0.0)] {
        let model = GlarModel::new(family, DMatrix::from_element(1, 1, a_true), vec![nu]).unwrap();
        let series = simulate(&model, &InitialState::Given(vec![0.0]), 3000, 0, 17).unwrap();
        let lambda = 0.01;
        let (a, d) = fit_row(family, nu, &series, 0, &EstimatorConfig::with_lambda(lambda)).unwrap();
        assert!(d.converged);
        let oracle = grid_minimizer(family, nu, &series, lambda);
        assert!((a[0] - oracle).abs() < 1e-5, "{family}: solver {} vs grid {oracle}", a[0]);
        assert!((a[0] - a_true).abs() < 0.25, "{family}: estimate {} far from {a_true}", a[0]);
    }
}

#[test]
fn ista_and_fista_reach_the_same_point() {
    let (model, series) = random_instance(Family::Poisson, 30);
    let base = EstimatorConfig { tol: 1e-9, ..EstimatorConfig::with_lambda(0.02) };
    let fista = fit(Family::Poisson, &model.nu, &series, &base).unwrap();
    let ista = fit(Family::Poisson, &model.nu, &series, &EstimatorConfig { acceleration: false, max_iter: 200_000, ..base.clone() }).unwrap();
    let fixed = EstimatorConfig { step_policy: StepPolicy::Fixed { eta: 0.05 }, acceleration: false, max_iter: 200_000, ..base };
    let fixed = fit(Family::Poisson, &model.nu, &series, &fixed).unwrap();
    assert!((&fista.a_hat - &ista.a_hat).amax() < 1e-5);
    assert!((&fista.a_hat - &fixed.a_hat).amax() < 1e-5);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn fit_never_loses_to_the_zero_matrix(seed in any::<u64>(), lambda in 0.0f64..0.2) {
        let family = if seed % 2 == 0 { Family::Bernoulli } else { Family::Poisson };
        let (model, series) = random_instance(family, seed);
        let est = fit(family, &model.nu, &series, &EstimatorConfig::with_lambda(lambda)).unwrap();
        let zero = DMatrix::zeros(model.dim(), model.dim());
        let at_zero = rmle_objective(family, &model.nu, &zero, &series, lambda).unwrap();
        prop_assert!(est.objective() <= at_zero + 1e-12);
    }

    #[test]
    fn rows_are_solved_independently(seed in any::<u64>()) {
        let (model, series) = random_instance(Family::Bernoulli, seed);
        let config = EstimatorConfig::with_lambda(0.03);
        let est = fit(Family::Bernoulli, &model.nu, &series, &config).unwrap();
        for m in 0..model.dim() {
            let (row, _) = fit_row(Family::Bernoulli, model.nu[m], &series, m, &config).unwrap();
            let fitted: Vec<f64> = est.a_hat.row(m).iter().copied().collect();
            prop_assert_eq!(row, fitted);
        }
    }
}
