//! Independent reference implementations shared by the numeric test suites.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use stablemil::base::{FisherEncoder, FisherNorm};
use stablemil::numopt::{gmm_fit, gram_matrix, solve_dual, GmmModel, KernelSpec, SvmConfig};
use stablemil::{Bag, Instance};

pub fn dual_objective(alpha: &[f64], q: &DMatrix<f64>) -> f64 {
    let a = DVector::from_column_slice(alpha);
    a.sum() - 0.5 * (a.transpose() * q * &a)[(0, 0)]
}

/// Exact dual optimum by enumerating which variables sit at 0, at C, or
/// strictly inside, and solving the equality-constrained stationarity system
/// on each face.
pub fn brute_force_dual(gram: &[f64], y: &[f64], c: f64) -> f64 {
    let m = y.len();
    let q = DMatrix::from_fn(m, m, |i, j| y[i] * y[j] * gram[i * m + j]);
    let mut best = f64::NEG_INFINITY;
    for code in 0..3usize.pow(m as u32) {
        let mut state = vec![0u8; m];
        let mut rest = code;
        for s in state.iter_mut() {
            *s = (rest % 3) as u8;
            rest /= 3;
        }
        let free: Vec<usize> = (0..m).filter(|&i| state[i] == 2).collect();
        let mut alpha: Vec<f64> = state.iter().map(|&s| if s == 1 { c } else { 0.0 }).collect();
        let fixed_sum: f64 = (0..m).filter(|&i| state[i] != 2).map(|i| y[i] * alpha[i]).sum();
        if free.is_empty() {
            if fixed_sum.abs() > 1e-12 {
                continue;
            }
        } else {
            let f = free.len();
            let mut lhs = DMatrix::zeros(f + 1, f + 1);
            let mut rhs = DVector::zeros(f + 1);
            for (a, &i) in free.iter().enumerate() {
                for (b, &j) in free.iter().enumerate() {
                    lhs[(a, b)] = q[(i, j)];
                }
                lhs[(a, f)] = y[i];
                lhs[(f, a)] = y[i];
                let bound: f64 = (0..m).filter(|&j| state[j] != 2).map(|j| q[(i, j)] * alpha[j]).sum();
                rhs[a] = 1.0 - bound;
            }
            rhs[f] = -fixed_sum;
            let svd = lhs.clone().svd(true, true);
            let Ok(sol) = svd.solve(&rhs, 1e-12) else { continue };
            if (&lhs * &sol - &rhs).norm() > 1e-8 {
                continue;
            }
            let mut feasible = true;
            for (a, &i) in free.iter().enumerate() {
                if sol[a] < -1e-10 || sol[a] > c + 1e-10 {
                    feasible = false;
                }
                alpha[i] = sol[a].clamp(0.0, c);
            }
            if !feasible {
                continue;
            }
        }
        best = best.max(dual_objective(&alpha, &q));
    }
    best
}

pub fn random_problem(rng: &mut ChaCha8Rng) -> (Vec<Vec<f64>>, Vec<f64>, KernelSpec, f64) {
    let m = rng.random_range(2..=6);
    let d = rng.random_range(1..=3);
    let points: Vec<Vec<f64>> = (0..m).map(|_| (0..d).map(|_| rng.random_range(-2.0..2.0)).collect()).collect();
    let mut y: Vec<f64> = (0..m).map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 }).collect();
    y[0] = 1.0;
    y[1] = -1.0;
    let kernel = if rng.random::<bool>() { KernelSpec::Linear } else { KernelSpec::rbf(rng.random_range(0.2..2.0)).unwrap() };
    let c = [0.1, 1.0, 10.0][rng.random_range(0..3)];
    (points, y, kernel, c)
}

/// Largest gap between the SMO dual objective and the enumerated optimum over
/// `problems` random problems of at most six points.
pub fn smo_worst_gap(problems: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..problems {
        let (points, y, kernel, c) = random_problem(&mut rng);
        let gram = gram_matrix(&points, &kernel);
        let config = SvmConfig { c, tol: 1e-10, max_iter: Some(1_000_000), trace: false };
        let sol = solve_dual(&gram, &y, &config);
        let m = y.len();
        let q = DMatrix::from_fn(m, m, |i, j| y[i] * y[j] * gram[i * m + j]);
        let ours = dual_objective(&sol.alpha, &q);
        let gap = if sol.converged && (sol.objective - ours).abs() <= 1e-9 {
            (ours - brute_force_dual(&gram, &y, c)).abs()
        } else {
            f64::INFINITY
        };
        worst = worst.max(gap);
    }
    worst
}

pub fn random_gmm(rng: &mut ChaCha8Rng, d: usize, k: usize) -> GmmModel {
    let raw: Vec<f64> = (0..k).map(|_| rng.random_range(0.2..1.0)).collect();
    let total: f64 = raw.iter().sum();
    GmmModel {
        weights: raw.iter().map(|w| w / total).collect(),
        means: (0..k).map(|_| (0..d).map(|_| rng.random_range(-2.0..2.0)).collect()).collect(),
        variances: (0..k).map(|_| (0..d).map(|_| rng.random_range(0.5..2.0)).collect()).collect(),
        var_floor: vec![1e-10; d],
        log_likelihood: 0.0,
        iterations: 0,
        converged: true,
        ll_trace: Vec::new(),
    }
}

pub fn random_bag(rng: &mut ChaCha8Rng, d: usize, n: usize) -> Bag {
    let instances = (0..n).map(|_| Instance::new((0..d).map(|_| rng.random_range(-3.0..3.0)).collect())).collect();
    Bag::new("b", instances, 0).unwrap()
}

/// Average log-likelihood of the bag under the mixture, written out directly.
pub fn avg_log_likelihood(g: &GmmModel, bag: &Bag) -> f64 {
    let mut total = 0.0;
    for inst in bag.instances() {
        let mut p = 0.0;
        for k in 0..g.weights.len() {
            let mut log = g.weights[k].ln();
            for j in 0..inst.features.len() {
                let v = g.variances[k][j];
                let z = inst.features[j] - g.means[k][j];
                log += -0.5 * (2.0 * std::f64::consts::PI * v).ln() - z * z / (2.0 * v);
            }
            p += log.exp();
        }
        total += p.ln();
    }
    total / bag.len() as f64
}

/// Largest relative error between the raw Fisher encoding and central finite
/// differences of the average log-likelihood, over `cases` random cases.
pub fn fisher_worst_rel_error(cases: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    let rel = |a: f64, b: f64| (a - b).abs() / a.abs().max(b.abs()).max(1e-3);
    for _ in 0..cases {
        let (d, k) = (rng.random_range(1..4), rng.random_range(1..4));
        let gmm = random_gmm(&mut rng, d, k);
        let n = rng.random_range(1..8);
        let bag = random_bag(&mut rng, d, n);
        let enc = FisherEncoder::new(gmm.clone(), FisherNorm { power_norm: false, l2_norm: false });
        let raw = enc.encode_raw(&bag).unwrap();
        assert_eq!(raw.len(), 2 * d * k);
        let h = 1e-6;
        for c in 0..k {
            let w = gmm.weights[c];
            for j in 0..d {
                let sigma2 = gmm.variances[c][j];
                let mut plus = gmm.clone();
                let mut minus = gmm.clone();
                plus.means[c][j] += h;
                minus.means[c][j] -= h;
                let fd_mu = (avg_log_likelihood(&plus, &bag) - avg_log_likelihood(&minus, &bag)) / (2.0 * h);
                worst = worst.max(rel(raw[c * d + j], fd_mu * sigma2.sqrt() / w.sqrt()));

                let mut plus = gmm.clone();
                let mut minus = gmm.clone();
                plus.variances[c][j] += h;
                minus.variances[c][j] -= h;
                let fd_var = (avg_log_likelihood(&plus, &bag) - avg_log_likelihood(&minus, &bag)) / (2.0 * h);
                let expected = fd_var * sigma2 * std::f64::consts::SQRT_2 / w.sqrt();
                worst = worst.max(rel(raw[d * k + c * d + j], expected));
            }
        }
    }
    worst
}

/// Fits mixtures to `trials` random point clouds; returns the number of
/// fits whose log-likelihood trace ever decreases.
pub fn em_monotonicity_violations(trials: u64, seed: u64) -> usize {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut bad = 0;
    for trial in 0..trials {
        let d = rng.random_range(1..5);
        let n = rng.random_range(20..200);
        let centers: Vec<Vec<f64>> = (0..3).map(|_| (0..d).map(|_| rng.random_range(-5.0..5.0)).collect()).collect();
        let points: Vec<Vec<f64>> = (0..n)
            .map(|i| centers[i % 3].iter().map(|c| c + rng.random_range(-1.0..1.0)).collect())
            .collect();
        let k = rng.random_range(1..6);
        let model = gmm_fit(&points, k, trial, 300, 1e-9).unwrap();
        if model.ll_trace.is_empty()
            || model.ll_trace.windows(2).any(|w| w[1] < w[0] - 1e-9 * w[0].abs().max(1.0))
        {
            bad += 1;
        }
    }
    bad
}
