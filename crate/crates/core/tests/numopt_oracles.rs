mod oracles;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use oracles::random_problem;
use stablemil::numopt::{
    gmm_fit, gmm_fit_with, gmm_posteriors, gram_matrix, smo_train, solve_dual, svm_decision, GmmConfig, KernelSpec,
    SvmConfig,
};

#[test]
fn smo_matches_brute_force_qp_on_500_problems() {
    let worst = oracles::smo_worst_gap(500, 2024);
    assert!(worst <= 1e-6, "worst dual gap {worst:e}");
}

#[test]
fn objective_trace_is_non_decreasing() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..100 {
        let (points, y, kernel, c) = random_problem(&mut rng);
        let config = SvmConfig { c, tol: 1e-8, max_iter: None, trace: true };
        let model = smo_train(&points, &y, kernel, &config).unwrap();
        for w in model.objective_trace.windows(2) {
            assert!(w[1] >= w[0] - 1e-12, "{} -> {}", w[0], w[1]);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn kkt_conditions_hold(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = rng.random_range(4..30);
        let points: Vec<Vec<f64>> = (0..m).map(|_| vec![rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)]).collect();
        let mut y: Vec<f64> = points.iter().map(|p| if p[0] + 0.5 * p[1] + rng.random_range(-1.0..1.0) > 0.0 { 1.0 } else { -1.0 }).collect();
        y[0] = 1.0;
        y[1] = -1.0;
        let c = [0.5, 1.0, 5.0][rng.random_range(0..3)];
        let tol = 1e-3;
        let config = SvmConfig { c, tol, ..SvmConfig::default() };
        let kernel = KernelSpec::rbf(0.7).unwrap();
        let gram = gram_matrix(&points, &kernel);
        let sol = solve_dual(&gram, &y, &config);
        prop_assert!(sol.converged);
        let model = smo_train(&points, &y, kernel, &config).unwrap();
        for i in 0..m {
            let a = sol.alpha[i];
            prop_assert!((0.0..=c).contains(&a));
            let margin = y[i] * svm_decision(&model, &points[i]).unwrap();
            if a == 0.0 {
                prop_assert!(margin >= 1.0 - tol, "alpha 0, margin {}", margin);
            } else if a == c {
                prop_assert!(margin <= 1.0 + tol, "alpha C, margin {}", margin);
            } else {
                prop_assert!((margin - 1.0).abs() <= tol, "free, margin {}", margin);
            }
        }
        let balance: f64 = sol.alpha.iter().zip(&y).map(|(a, y)| a * y).sum();
        prop_assert!(balance.abs() < 1e-9);
    }
}

#[test]
fn duplicating_points_preserves_the_decision_function() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for _ in 0..20 {
        let m = rng.random_range(6..20);
        let points: Vec<Vec<f64>> = (0..m).map(|_| vec![rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)]).collect();
        let mut y: Vec<f64> = points.iter().map(|p| if p[0] + rng.random_range(-0.8..0.8) > 0.0 { 1.0 } else { -1.0 }).collect();
        y[0] = 1.0;
        y[1] = -1.0;
        let doubled: Vec<Vec<f64>> = points.iter().chain(&points).cloned().collect();
        let y2: Vec<f64> = y.iter().chain(&y).copied().collect();
        let kernel = KernelSpec::rbf(0.5).unwrap();
        // two copies with box C are the single-copy problem with box 2C
        let single = smo_train(&points, &y, kernel, &SvmConfig { c: 2.0, tol: 1e-10, ..SvmConfig::default() }).unwrap();
        let dup = smo_train(&doubled, &y2, kernel, &SvmConfig { c: 1.0, tol: 1e-10, ..SvmConfig::default() }).unwrap();
        for _ in 0..30 {
            let x = [rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)];
            let (a, b) = (svm_decision(&single, &x).unwrap(), svm_decision(&dup, &x).unwrap());
            assert!((a - b).abs() < 1e-6, "{a} vs {b}");
        }
    }
}

#[test]
fn duplicating_separable_points_with_loose_box() {
    let points = vec![vec![0.0, 0.0], vec![0.5, 1.0], vec![3.0, 3.0], vec![4.0, 2.5]];
    let y = vec![-1.0, -1.0, 1.0, 1.0];
    let doubled: Vec<Vec<f64>> = points.iter().chain(&points).cloned().collect();
    let y2: Vec<f64> = y.iter().chain(&y).copied().collect();
    let cfg = SvmConfig { c: 1e3, tol: 1e-10, ..SvmConfig::default() };
    let single = smo_train(&points, &y, KernelSpec::Linear, &cfg).unwrap();
    let dup = smo_train(&doubled, &y2, KernelSpec::Linear, &cfg).unwrap();
    for x in [[0.0, 1.0], [2.0, 2.0], [-1.0, 5.0]] {
        assert!((svm_decision(&single, &x).unwrap() - svm_decision(&dup, &x).unwrap()).abs() < 1e-6);
    }
}

#[test]
fn decision_matches_independent_evaluator() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let points: Vec<Vec<f64>> = (0..40).map(|_| (0..3).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
    let y: Vec<f64> = points.iter().map(|p| if p[0] * p[1] > 0.0 { 1.0 } else { -1.0 }).collect();
    let gamma = 1.3;
    let model = smo_train(&points, &y, KernelSpec::rbf(gamma).unwrap(), &SvmConfig::with_c(10.0)).unwrap();
    for _ in 0..50 {
        let x: Vec<f64> = (0..3).map(|_| rng.random_range(-1.5..1.5)).collect();
        let mut f = model.bias;
        for (sv, coef) in model.support_vectors.iter().zip(&model.coefficients) {
            let d2: f64 = sv.iter().zip(&x).map(|(a, b)| (a - b) * (a - b)).sum();
            f += coef * (-gamma * d2).exp();
        }
        assert!((svm_decision(&model, &x).unwrap() - f).abs() < 1e-10);
    }
}

#[test]
fn em_log_likelihood_is_monotone_on_random_data() {
    assert_eq!(oracles::em_monotonicity_violations(40, 31), 0);
}

#[test]
fn restarts_never_lower_the_likelihood() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let points: Vec<Vec<f64>> = (0..150).map(|i| vec![(i % 5) as f64 * 3.0 + rng.random_range(-1.0..1.0)]).collect();
    let one = gmm_fit_with(&points, &GmmConfig { components: 4, restarts: 1, ..GmmConfig::default() }, 9).unwrap();
    let many = gmm_fit_with(&points, &GmmConfig { components: 4, restarts: 4, ..GmmConfig::default() }, 9).unwrap();
    assert!(many.log_likelihood >= one.log_likelihood);
}

#[test]
fn posteriors_stay_finite_far_from_the_data() {
    let points: Vec<Vec<f64>> = (0..60).map(|i| vec![(i % 2) as f64 * 4.0 + (i as f64 * 0.37).sin(), (i as f64).cos()]).collect();
    let model = gmm_fit(&points, 3, 1, 100, 1e-6).unwrap();
    for x in [[1e3, 1e3], [-1e3, 0.0], [0.0, -1e3], [1e3, -1e3]] {
        let post = gmm_posteriors(&model, &x).unwrap();
        assert!(post.iter().all(|p| p.is_finite() && *p >= 0.0));
        assert!((post.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(model.log_density(&x).unwrap().is_finite());
    }
}
