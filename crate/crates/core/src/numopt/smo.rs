//! Sequential minimal optimization for the soft-margin SVM dual
//!
//! ```text
//! max  sum(a) - 1/2 sum_ij a_i a_j y_i y_j K_ij
//! s.t. 0 <= a_i <= C,  sum(a_i y_i) = 0
//! ```
//!
//! Each step updates the maximal KKT-violating pair analytically, so the
//! dual objective never decreases. Stops when the violation gap drops
//! below `tol`.

use serde::{Deserialize, Serialize};

use super::kernel::{dot, gram_matrix, KernelSpec};
use crate::error::{Error, Result};

const TAU: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SvmConfig {
    pub c: f64,
    pub tol: f64,
    /// Pair-update cap; `None` means 10 passes of `m` updates per example.
    pub max_iter: Option<usize>,
    /// Record the dual objective after every update.
    #[serde(default)]
    pub trace: bool,
}

impl Default for SvmConfig {
    fn default() -> Self {
        Self { c: 1.0, tol: 1e-3, max_iter: None, trace: false }
    }
}

impl SvmConfig {
    pub fn with_c(c: f64) -> Self {
        Self { c, ..Self::default() }
    }

    fn iteration_cap(&self, m: usize) -> usize {
        self.max_iter.unwrap_or_else(|| (10 * m * m).max(10_000))
    }
}

/// Result of the dual solve on a precomputed Gram matrix.
#[derive(Clone, Debug)]
pub struct DualSolution {
    pub alpha: Vec<f64>,
    pub bias: f64,
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
    pub objective_trace: Vec<f64>,
}

/// Solves the dual given a row-major `m x m` Gram matrix and labels in {-1, +1}.
pub fn solve_dual(gram: &[f64], y: &[f64], config: &SvmConfig) -> DualSolution {
    let m = y.len();
    debug_assert_eq!(gram.len(), m * m);
    let c = config.c;
    let q = |i: usize, j: usize| y[i] * y[j] * gram[i * m + j];

    let mut alpha = vec![0.0; m];
    let mut grad = vec![-1.0; m];
    let mut trace = Vec::new();
    let cap = config.iteration_cap(m);
    let mut iterations = 0;
    let mut converged = false;

    let objective = |alpha: &[f64], grad: &[f64]| -> f64 {
        -alpha.iter().zip(grad).map(|(a, g)| a * (g - 1.0)).sum::<f64>() / 2.0
    };

    while iterations < cap {
        let Some((i, j)) = select_pair(&alpha, &grad, y, c, config.tol) else {
            converged = true;
            break;
        };
        iterations += 1;

        let (old_i, old_j) = (alpha[i], alpha[j]);
        let (qii, qjj, qij) = (q(i, i), q(j, j), q(i, j));
        if y[i] != y[j] {
            let quad = (qii + qjj + 2.0 * qij).max(TAU);
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let quad = (qii + qjj - 2.0 * qij).max(TAU);
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }

        let (di, dj) = (alpha[i] - old_i, alpha[j] - old_j);
        for t in 0..m {
            grad[t] += q(t, i) * di + q(t, j) * dj;
        }
        if config.trace {
            trace.push(objective(&alpha, &grad));
        }
    }

    let bias = -compute_rho(&alpha, &grad, y, c);
    DualSolution {
        objective: objective(&alpha, &grad),
        alpha,
        bias,
        iterations,
        converged,
        objective_trace: trace,
    }
}

fn is_upper(a: f64, c: f64) -> bool {
    a >= c
}

fn is_lower(a: f64) -> bool {
    a <= 0.0
}

/// Maximal violating pair, or `None` when the gap is within `tol`.
fn select_pair(alpha: &[f64], grad: &[f64], y: &[f64], c: f64, tol: f64) -> Option<(usize, usize)> {
    let mut gmax = f64::NEG_INFINITY;
    let mut gmin = f64::INFINITY;
    let (mut i_best, mut j_best) = (usize::MAX, usize::MAX);
    for t in 0..y.len() {
        let v = -y[t] * grad[t];
        let in_up = if y[t] > 0.0 { !is_upper(alpha[t], c) } else { !is_lower(alpha[t]) };
        let in_low = if y[t] > 0.0 { !is_lower(alpha[t]) } else { !is_upper(alpha[t], c) };
        if in_up && v > gmax {
            gmax = v;
            i_best = t;
        }
        if in_low && v < gmin {
            gmin = v;
            j_best = t;
        }
    }
    if i_best == usize::MAX || j_best == usize::MAX || gmax - gmin < tol {
        None
    } else {
        Some((i_best, j_best))
    }
}

fn compute_rho(alpha: &[f64], grad: &[f64], y: &[f64], c: f64) -> f64 {
    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut sum_free, mut n_free) = (0.0, 0usize);
    for t in 0..y.len() {
        let yg = y[t] * grad[t];
        if is_upper(alpha[t], c) {
            if y[t] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if is_lower(alpha[t]) {
            if y[t] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            n_free += 1;
            sum_free += yg;
        }
    }
    if n_free > 0 {
        sum_free / n_free as f64
    } else {
        (ub + lb) / 2.0
    }
}

/// A trained kernel SVM. `coefficients[i]` is `alpha_i * y_i` of support vector `i`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    pub support_vectors: Vec<Vec<f64>>,
    pub coefficients: Vec<f64>,
    pub bias: f64,
    pub kernel: KernelSpec,
    pub c: f64,
    pub converged: bool,
    pub iterations: usize,
    pub dual_objective: f64,
    #[serde(skip)]
    pub objective_trace: Vec<f64>,
}

impl SvmModel {
    /// Builds the model from a dual solution over `points`, keeping examples with nonzero alpha.
    pub fn from_dual<P: AsRef<[f64]>>(
        points: &[P],
        y: &[f64],
        solution: DualSolution,
        kernel: KernelSpec,
        c: f64,
    ) -> Self {
        let mut support_vectors = Vec::new();
        let mut coefficients = Vec::new();
        for (i, &a) in solution.alpha.iter().enumerate() {
            if a > 0.0 {
                support_vectors.push(points[i].as_ref().to_vec());
                coefficients.push(a * y[i]);
            }
        }
        Self {
            support_vectors,
            coefficients,
            bias: solution.bias,
            kernel,
            c,
            converged: solution.converged,
            iterations: solution.iterations,
            dual_objective: solution.objective,
            objective_trace: solution.objective_trace,
        }
    }

    pub fn dim(&self) -> Option<usize> {
        self.support_vectors.first().map(Vec::len)
    }

    /// For a linear kernel, the primal weight vector `sum_i coef_i * sv_i`.
    pub fn linear_weights(&self) -> Option<Vec<f64>> {
        if self.kernel != KernelSpec::Linear {
            return None;
        }
        let d = self.dim()?;
        let mut w = vec![0.0; d];
        for (sv, coef) in self.support_vectors.iter().zip(&self.coefficients) {
            for (wk, v) in w.iter_mut().zip(sv) {
                *wk += coef * v;
            }
        }
        Some(w)
    }
}

fn check_inputs<P: AsRef<[f64]>>(points: &[P], labels: &[f64]) -> Result<()> {
    if points.len() != labels.len() {
        return Err(Error::InvalidData(format!("{} points but {} labels", points.len(), labels.len())));
    }
    if labels.iter().any(|&l| l != 1.0 && l != -1.0) {
        return Err(Error::InvalidData("SVM labels must be -1 or +1".into()));
    }
    if !(labels.contains(&1.0) && labels.contains(&-1.0)) {
        return Err(Error::SingleClass);
    }
    let d = points[0].as_ref().len();
    for p in points {
        let p = p.as_ref();
        if p.len() != d {
            return Err(Error::DimMismatch { expected: d, found: p.len() });
        }
        if p.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidData("non-finite SVM feature".into()));
        }
    }
    Ok(())
}

/// Trains a kernel SVM. Non-convergence within the iteration cap is not an
/// error: the last iterate is returned with `converged == false`.
pub fn smo_train<P: AsRef<[f64]>>(
    points: &[P],
    labels: &[f64],
    kernel: KernelSpec,
    config: &SvmConfig,
) -> Result<SvmModel> {
    if !(config.c > 0.0 && config.tol > 0.0) {
        return Err(Error::InvalidConfig("SVM C and tol must be positive".into()));
    }
    check_inputs(points, labels)?;
    let gram = gram_matrix(points, &kernel);
    let solution = solve_dual(&gram, labels, config);
    Ok(SvmModel::from_dual(points, labels, solution, kernel, config.c))
}

/// Signed decision value `sum_i coef_i K(sv_i, x) + b`.
pub fn svm_decision(model: &SvmModel, x: &[f64]) -> Result<f64> {
    if let Some(d) = model.dim() {
        if d != x.len() {
            return Err(Error::DimMismatch { expected: d, found: x.len() });
        }
    }
    let sum: f64 = match model.kernel {
        KernelSpec::Linear => model
            .support_vectors
            .iter()
            .zip(&model.coefficients)
            .map(|(sv, c)| c * dot(sv, x))
            .sum(),
        kernel => model
            .support_vectors
            .iter()
            .zip(&model.coefficients)
            .map(|(sv, c)| c * kernel.eval(sv, x))
            .sum(),
    };
    Ok(sum + model.bias)
}

/// Hard label: 1 iff the decision value is nonnegative.
pub fn svm_predict(model: &SvmModel, x: &[f64]) -> Result<u8> {
    Ok(u8::from(svm_decision(model, x)? >= 0.0))
}
