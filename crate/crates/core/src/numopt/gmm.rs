//! Diagonal-covariance Gaussian mixtures fitted by EM.
//!
//! Initialization is k-means++ seeding from a seeded RNG: the chosen points
//! become the initial means, every component starts with the pooled data
//! variance and uniform weight. Variances are floored at
//! `max(1e-6 * data variance, 1e-10)` per dimension, which is the
//! constrained M-step optimum, so the log-likelihood stays monotone.

use std::f64::consts::PI;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seeds;

const REL_FLOOR: f64 = 1e-6;
const ABS_FLOOR: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GmmConfig {
    pub components: usize,
    pub max_iter: usize,
    pub rel_tol: f64,
    pub restarts: usize,
}

impl Default for GmmConfig {
    fn default() -> Self {
        Self { components: 5, max_iter: 200, rel_tol: 1e-6, restarts: 1 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GmmModel {
    pub weights: Vec<f64>,
    pub means: Vec<Vec<f64>>,
    pub variances: Vec<Vec<f64>>,
    pub var_floor: Vec<f64>,
    /// Total log-likelihood of the training points under the final parameters.
    pub log_likelihood: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Log-likelihood after every E-step of the selected restart.
    #[serde(skip)]
    pub ll_trace: Vec<f64>,
}

impl GmmModel {
    pub fn components(&self) -> usize {
        self.weights.len()
    }

    pub fn dim(&self) -> usize {
        self.means[0].len()
    }

    /// Per-component `log w_k - 1/2 sum_j log(2 pi var_kj)`.
    pub(crate) fn log_norms(&self) -> Vec<f64> {
        self.weights
            .iter()
            .zip(&self.variances)
            .map(|(w, var)| w.ln() - 0.5 * var.iter().map(|v| (2.0 * PI * v).ln()).sum::<f64>())
            .collect()
    }

    /// Unnormalized log joint `log w_k + log N(x | k)` for every component.
    pub(crate) fn log_joint_into(&self, log_norms: &[f64], x: &[f64], out: &mut [f64]) {
        for k in 0..self.components() {
            let mean = &self.means[k];
            let var = &self.variances[k];
            let mut quad = 0.0;
            for j in 0..x.len() {
                let diff = x[j] - mean[j];
                quad += diff * diff / var[j];
            }
            out[k] = log_norms[k] - 0.5 * quad;
        }
    }

    /// Log-likelihood of a single point.
    pub fn log_density(&self, x: &[f64]) -> Result<f64> {
        self.check_dim(x)?;
        let mut buf = vec![0.0; self.components()];
        self.log_joint_into(&self.log_norms(), x, &mut buf);
        Ok(log_sum_exp(&buf))
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::DimMismatch { expected: self.dim(), found: x.len() });
        }
        Ok(())
    }
}

pub(crate) fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Turns log joints into posteriors in place; returns the log normalizer.
pub(crate) fn normalize_log_posteriors(buf: &mut [f64]) -> f64 {
    let lse = log_sum_exp(buf);
    let mut total = 0.0;
    for v in buf.iter_mut() {
        *v = (*v - lse).exp();
        total += *v;
    }
    for v in buf.iter_mut() {
        *v /= total;
    }
    lse
}

/// Component posteriors of `x`, computed with log-sum-exp stabilization.
pub fn gmm_posteriors(model: &GmmModel, x: &[f64]) -> Result<Vec<f64>> {
    model.check_dim(x)?;
    let mut buf = vec![0.0; model.components()];
    model.log_joint_into(&model.log_norms(), x, &mut buf);
    normalize_log_posteriors(&mut buf);
    Ok(buf)
}

/// Fits a `k`-component diagonal GMM by EM with the default restart count.
pub fn gmm_fit<P: AsRef<[f64]>>(points: &[P], k: usize, seed: u64, max_iter: usize, rel_tol: f64) -> Result<GmmModel> {
    let config = GmmConfig { components: k, max_iter, rel_tol, restarts: 1 };
    gmm_fit_with(points, &config, seed)
}

pub fn gmm_fit_with<P: AsRef<[f64]>>(points: &[P], config: &GmmConfig, seed: u64) -> Result<GmmModel> {
    let k = config.components;
    if k == 0 {
        return Err(Error::InvalidConfig("GMM needs at least one component".into()));
    }
    if points.len() < k {
        return Err(Error::TooFewPoints { needed: k, got: points.len() });
    }
    let d = points[0].as_ref().len();
    if let Some(p) = points.iter().find(|p| p.as_ref().len() != d) {
        return Err(Error::DimMismatch { expected: d, found: p.as_ref().len() });
    }
    let data: Vec<f64> = points.iter().flat_map(|p| p.as_ref().iter().copied()).collect();
    let n = points.len();

    let mut mean = vec![0.0; d];
    for row in data.chunks_exact(d) {
        for j in 0..d {
            mean[j] += row[j];
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let mut data_var = vec![0.0; d];
    for row in data.chunks_exact(d) {
        for j in 0..d {
            data_var[j] += (row[j] - mean[j]).powi(2);
        }
    }
    data_var.iter_mut().for_each(|v| *v /= n as f64);
    let floor: Vec<f64> = data_var.iter().map(|v| (REL_FLOOR * v).max(ABS_FLOOR)).collect();
    let init_var: Vec<f64> = data_var.iter().zip(&floor).map(|(v, f)| v.max(*f)).collect();

    let mut best: Option<GmmModel> = None;
    for restart in 0..config.restarts.max(1) {
        let restart_seed = if restart == 0 { seed } else { seeds::substream(seed, "gmm-restart", restart as u64) };
        let centers = kmeans_pp(&data, d, k, restart_seed);
        let model = GmmModel {
            weights: vec![1.0 / k as f64; k],
            means: centers,
            variances: vec![init_var.clone(); k],
            var_floor: floor.clone(),
            log_likelihood: f64::NEG_INFINITY,
            iterations: 0,
            converged: false,
            ll_trace: Vec::new(),
        };
        let fitted = run_em(model, &data, d, config);
        if best.as_ref().is_none_or(|b| fitted.log_likelihood > b.log_likelihood) {
            best = Some(fitted);
        }
    }
    Ok(best.expect("at least one restart"))
}

fn kmeans_pp(data: &[f64], d: usize, k: usize, seed: u64) -> Vec<Vec<f64>> {
    let n = data.len() / d;
    let row = |i: usize| &data[i * d..(i + 1) * d];
    let mut rng = seeds::rng(seed);
    let mut centers = vec![row(rng.random_range(0..n)).to_vec()];
    let mut dist: Vec<f64> = (0..n).map(|i| super::kernel::sq_dist(row(i), &centers[0])).collect();
    while centers.len() < k {
        let total: f64 = dist.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut chosen = n - 1;
            for (i, &w) in dist.iter().enumerate() {
                if target < w {
                    chosen = i;
                    break;
                }
                target -= w;
            }
            chosen
        } else {
            rng.random_range(0..n)
        };
        let c = row(pick).to_vec();
        for (i, di) in dist.iter_mut().enumerate() {
            *di = di.min(super::kernel::sq_dist(row(i), &c));
        }
        centers.push(c);
    }
    centers
}

fn run_em(mut model: GmmModel, data: &[f64], d: usize, config: &GmmConfig) -> GmmModel {
    let k = model.components();
    let n = data.len() / d;
    let mut resp = vec![0.0; n * k];
    let mut prev_ll = f64::NEG_INFINITY;

    loop {
        // E-step under the current parameters.
        let log_norms = model.log_norms();
        let mut ll = 0.0;
        for (x, r) in data.chunks_exact(d).zip(resp.chunks_exact_mut(k)) {
            model.log_joint_into(&log_norms, x, r);
            ll += normalize_log_posteriors(r);
        }
        model.ll_trace.push(ll);
        model.log_likelihood = ll;

        if model.iterations > 0 && ll - prev_ll <= config.rel_tol * prev_ll.abs() {
            model.converged = true;
            break;
        }
        if model.iterations >= config.max_iter {
            break;
        }
        prev_ll = ll;

        // M-step.
        let mut nk = vec![0.0; k];
        let mut sums = vec![vec![0.0; d]; k];
        for (x, r) in data.chunks_exact(d).zip(resp.chunks_exact(k)) {
            for c in 0..k {
                nk[c] += r[c];
                for j in 0..d {
                    sums[c][j] += r[c] * x[j];
                }
            }
        }
        for c in 0..k {
            if nk[c] > 0.0 {
                for j in 0..d {
                    model.means[c][j] = sums[c][j] / nk[c];
                }
            }
        }
        let mut sq = vec![vec![0.0; d]; k];
        for (x, r) in data.chunks_exact(d).zip(resp.chunks_exact(k)) {
            for c in 0..k {
                for j in 0..d {
                    let diff = x[j] - model.means[c][j];
                    sq[c][j] += r[c] * diff * diff;
                }
            }
        }
        for c in 0..k {
            if nk[c] > 0.0 {
                for j in 0..d {
                    model.variances[c][j] = (sq[c][j] / nk[c]).max(model.var_floor[j]);
                }
            }
        }
        let total: f64 = nk.iter().sum();
        model.weights = nk.iter().map(|v| v / total).collect();
        model.iterations += 1;
    }
    model
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::{Distribution, Normal};

    fn two_clusters(seed: u64) -> Vec<Vec<f64>> {
        let mut rng = seeds::rng(seed);
        let noise = Normal::new(0.0, 0.5).unwrap();
        (0..200)
            .map(|i| {
                let c = if i % 2 == 0 { 0.0 } else { 10.0 };
                vec![c + noise.sample(&mut rng), c + noise.sample(&mut rng)]
            })
            .collect()
    }

    #[test]
    fn single_component_is_sample_moments() {
        let pts = two_clusters(3);
        let model = gmm_fit(&pts, 1, 0, 100, 1e-8).unwrap();
        let n = pts.len() as f64;
        for j in 0..2 {
            let mean: f64 = pts.iter().map(|p| p[j]).sum::<f64>() / n;
            let var: f64 = pts.iter().map(|p| (p[j] - mean).powi(2)).sum::<f64>() / n;
            assert!((model.means[0][j] - mean).abs() < 1e-10);
            assert!((model.variances[0][j] - var).abs() < 1e-10);
        }
        assert_eq!(model.weights, vec![1.0]);
    }

    #[test]
    fn recovers_two_clusters() {
        let pts = two_clusters(11);
        let model = gmm_fit(&pts, 2, 5, 200, 1e-8).unwrap();
        let mut order: Vec<usize> = (0..2).collect();
        order.sort_by(|&a, &b| model.means[a][0].total_cmp(&model.means[b][0]));
        for (rank, &c) in order.iter().enumerate() {
            let target = if rank == 0 { 0.0 } else { 10.0 };
            for j in 0..2 {
                assert!((model.means[c][j] - target).abs() < 0.3);
            }
            assert!((model.weights[c] - 0.5).abs() < 0.1);
        }
    }

    #[test]
    fn too_few_points() {
        let pts = vec![vec![0.0], vec![1.0]];
        assert!(matches!(gmm_fit(&pts, 3, 0, 10, 1e-6), Err(Error::TooFewPoints { needed: 3, got: 2 })));
    }

    #[test]
    fn duplicates_hit_the_floor_not_an_error() {
        let pts = vec![vec![1.0, 2.0]; 10];
        let model = gmm_fit(&pts, 2, 0, 50, 1e-6).unwrap();
        for var in &model.variances {
            assert!(var.iter().all(|&v| v >= ABS_FLOOR));
        }
    }

    #[test]
    fn posteriors_single_component_and_dominance() {
        let pts = two_clusters(1);
        let one = gmm_fit(&pts, 1, 0, 10, 1e-6).unwrap();
        assert_eq!(gmm_posteriors(&one, &[3.0, 4.0]).unwrap(), vec![1.0]);

        let model = GmmModel {
            weights: vec![0.5, 0.5],
            means: vec![vec![0.0, 0.0], vec![10.0, 10.0]],
            variances: vec![vec![1.0, 1.0]; 2],
            var_floor: vec![1e-10; 2],
            log_likelihood: 0.0,
            iterations: 0,
            converged: true,
            ll_trace: vec![],
        };
        let post = gmm_posteriors(&model, &[10.0, 10.0]).unwrap();
        assert!(post[1] > 0.99);
        assert!(matches!(gmm_posteriors(&model, &[1.0]), Err(Error::DimMismatch { .. })));
    }

    #[test]
    fn deterministic_per_seed() {
        let pts = two_clusters(2);
        let a = gmm_fit(&pts, 3, 9, 100, 1e-8).unwrap();
        let b = gmm_fit(&pts, 3, 9, 100, 1e-8).unwrap();
        assert_eq!(a, b);
    }
}
